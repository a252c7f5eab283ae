"""Monte Carlo sample aggregation and per-vertebra uncertainty scoring.

The mean of the stochastic forward-pass samples is the predictive
distribution; its Shannon entropy (natural log, with 0*log(0) = 0) is the
uncertainty score. The certainty weight 1 - H/ln(24) feeds message fusion,
so confident neighbors dominate and uncertain ones are damped. Per-class
sample variance is reported alongside as an alternative dispersion measure.
"""

from __future__ import annotations

import numpy as np

from .domain import MAX_ENTROPY, ConfidenceState, McSampleSet, UncertaintyReport

__all__ = [
    "UncertaintyReport",
    "aggregate_samples",
    "entropy",
    "report",
    "certainty_from_variance",
]

# Largest possible variance of a [0, 1]-valued variable; normalizes the
# variance-based certainty weight.
_VAR_CEILING = 0.25


def aggregate_samples(mc: McSampleSet) -> ConfidenceState:
    """Element-wise mean of the sample rows, renormalized to sum to 1."""
    mean = mc.samples.mean(axis=0)
    return ConfidenceState(mean / mean.sum())


def entropy(p: ConfidenceState) -> float:
    """Shannon entropy of a confidence vector in nats; zero terms contribute 0."""
    probs = p.probs
    nz = probs > 0.0
    return float(-(probs[nz] * np.log(probs[nz])).sum()) + 0.0  # avoid -0.0


def report(mc: McSampleSet) -> UncertaintyReport:
    """Full uncertainty summary for one vertebra's sample set.

    Entropy is computed on the mean distribution, not averaged over
    per-sample entropies. Variance is the mean over classes of the unbiased
    per-class sample variance, 0 when only one sample exists.
    """
    mean_probs = aggregate_samples(mc)
    ent = entropy(mean_probs)
    if mc.n > 1:
        var = float(mc.samples.var(axis=0, ddof=1).mean())
    else:
        var = 0.0
    return UncertaintyReport(
        mean_probs=mean_probs,
        entropy=ent,
        variance=var,
        certainty_weight=1.0 - ent / MAX_ENTROPY,
    )


def certainty_from_variance(rep: UncertaintyReport) -> float:
    """Alternative fusion weight 1 - variance/0.25, clipped into [0, 1]."""
    return float(np.clip(1.0 - rep.variance / _VAR_CEILING, 0.0, 1.0))
