"""Uncertainty-weighted message fusion over the vertebra chain.

Each hop updates every vertebra's confidence vector by mixing in messages
from its window neighbors:

    raw_i = C_i + theta * sum_j (1 / dis(i, j)) * u_j * (C_j @ phi[j - i])
    C_i'  = raw_i / sum(raw_i)

where u_j is the neighbor's certainty weight, dis is the index gap or the
physical center distance, and phi holds one non-negative 24 x 24 matrix per
signed neighbor offset, shared across positions. Every factor is
non-negative, so confidences stay non-negative and the per-vertebra
normalization keeps them summing to 1 after every hop.

``train_phi`` fits the phi matrices by full-batch gradient descent on the
mean cross-entropy between final-hop confidences and one-hot truths,
back-propagating through the unrolled hops by hand; entries are projected
onto [0, inf) after every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import ConfidenceState, FusionParams, SpineCase, phi_offsets
from .errors import DegenerateGeometryError, DivergenceError, ValidationError
from .labels import N_CLASSES
from .uncertainty import aggregate_samples, certainty_from_variance, report


@dataclass(frozen=True)
class FusionTrace:
    """Per-hop confidence snapshots plus the decoded final labels."""

    snapshots: tuple[tuple[ConfidenceState, ...], ...]
    final_labels: tuple[int, ...]


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings for fitting the phi matrices."""

    learning_rate: float
    epochs: int
    seed: int = 0
    init: str = "identity"

    def __post_init__(self):
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ValidationError(f"learning_rate must be finite and non-negative, got {self.learning_rate!r}")
        if not 1 <= self.epochs <= 100_000:
            raise ValidationError(f"epochs must lie in [1, 100000], got {self.epochs!r}")
        if self.init not in ("identity", "uniform_small"):
            raise ValidationError(f"init must be 'identity' or 'uniform_small', got {self.init!r}")


def initial_phi(window: int, init: str = "identity", seed: int = 0) -> dict[int, np.ndarray]:
    """Starting phi matrices: identity, or small positive uniform entries."""
    offsets = phi_offsets(window)
    if init == "identity":
        return {d: np.eye(N_CLASSES) for d in offsets}
    if init == "uniform_small":
        rng = np.random.default_rng(seed)
        return {d: rng.uniform(0.0, 0.05, size=(N_CLASSES, N_CLASSES)) for d in offsets}
    raise ValidationError(f"unknown init {init!r}")


def identity_params(
    theta: float = 0.1,
    hops: int = 3,
    window: int = 5,
    distance_mode: str = "index",
) -> FusionParams:
    """Convenience constructor with identity phi matrices."""
    return FusionParams(theta, hops, window, distance_mode, initial_phi(window))


def resolve_certainty(case: SpineCase, u_metric: str | None = None) -> np.ndarray:
    """Per-vertebra fusion weights u.

    ``entropy`` and ``variance`` recompute from the MC samples; None prefers
    weights stored on the case (written by the uncertainty stage) and falls
    back to the entropy metric.
    """
    if u_metric is None:
        stored = [v.fusion_weight for v in case.vertebrae]
        if all(w is not None for w in stored):
            return np.array(stored, dtype=np.float64)
        u_metric = "entropy"
    if u_metric == "entropy":
        return np.array([report(v.mc).certainty_weight for v in case.vertebrae])
    if u_metric == "variance":
        return np.array([certainty_from_variance(report(v.mc)) for v in case.vertebrae])
    raise ValidationError(f"u_metric must be 'entropy' or 'variance', got {u_metric!r}")


def _pair_table(case: SpineCase, params: FusionParams, u: np.ndarray):
    """(dst, src, coeff) index arrays per offset; coeff folds theta, u and 1/dis."""
    k = len(case)
    positions = np.array([v.center.position for v in case.vertebrae], dtype=np.float64)
    table = {}
    for delta in phi_offsets(params.window):
        dst = np.arange(max(0, -delta), k - max(0, delta), dtype=np.int64)
        if len(dst) == 0:
            continue
        src = dst + delta
        if params.distance_mode == "index":
            dis = np.full(len(dst), float(abs(delta)))
        else:
            dis = np.linalg.norm(positions[dst] - positions[src], axis=1)
            if np.any(dis == 0.0):
                i = int(dst[np.argmax(dis == 0.0)])
                raise DegenerateGeometryError(
                    f"vertebrae {i} and {i + delta} share a physical position; 1/distance is undefined"
                )
        table[delta] = (dst, src, params.theta * u[src] / dis)
    return table


def _step_matrix(c: np.ndarray, table, phi: dict[int, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """One hop on a (k, 24) matrix; returns (next_states, raw row sums)."""
    raw = c.copy()
    for delta, (dst, src, coeff) in table.items():
        raw[dst] += coeff[:, None] * (c[src] @ phi[delta])
    sums = raw.sum(axis=1)
    return raw / sums[:, None], sums


def _states_matrix(states, k: int) -> np.ndarray:
    states = list(states)
    if len(states) != k:
        raise ValidationError(f"got {len(states)} states for a case of {k} vertebrae")
    return np.array([s.probs for s in states], dtype=np.float64)


def fuse_step(
    states: list[ConfidenceState],
    case: SpineCase,
    params: FusionParams,
    u_metric: str | None = None,
) -> list[ConfidenceState]:
    """Apply one fusion hop to the given per-vertebra confidences.

    With theta = 0, a single vertebra, or a window of 1 there are no
    messages and the input states are returned unchanged.
    """
    states = list(states)
    if len(states) != len(case):
        raise ValidationError(f"got {len(states)} states for a case of {len(case)} vertebrae")
    if params.theta == 0.0 or len(case) == 1 or params.window == 1:
        return states
    u = resolve_certainty(case, u_metric)
    table = _pair_table(case, params, u)
    nxt, _ = _step_matrix(_states_matrix(states, len(case)), table, params.phi)
    return [ConfidenceState(row) for row in nxt]


def fuse(
    case: SpineCase,
    params: FusionParams,
    u_metric: str | None = None,
    initial_states: list[ConfidenceState] | None = None,
) -> FusionTrace:
    """Iterate the fusion hop and decode final labels by argmax.

    The initial states default to each vertebra's MC sample mean. The trace
    holds hops + 1 snapshots, the first being the inputs; argmax ties break
    toward the smaller class index.
    """
    if initial_states is None:
        initial_states = [aggregate_samples(v.mc) for v in case.vertebrae]
    else:
        initial_states = list(initial_states)
        if len(initial_states) != len(case):
            raise ValidationError(
                f"got {len(initial_states)} initial states for a case of {len(case)} vertebrae"
            )
    snapshots = [tuple(initial_states)]
    no_messages = params.theta == 0.0 or len(case) == 1 or params.window == 1
    if no_messages:
        snapshots.extend(tuple(initial_states) for _ in range(params.hops))
    else:
        u = resolve_certainty(case, u_metric)
        table = _pair_table(case, params, u)
        c = _states_matrix(initial_states, len(case))
        for _ in range(params.hops):
            c, _ = _step_matrix(c, table, params.phi)
            snapshots.append(tuple(ConfidenceState(row) for row in c))
    final = snapshots[-1]
    return FusionTrace(
        snapshots=tuple(snapshots),
        final_labels=tuple(int(np.argmax(s.probs)) for s in final),
    )


# ---------------------------------------------------------------------------
# training


class _Unrolled:
    """All training cases stacked into one matrix with per-offset pair tables.

    Case boundaries are respected by construction: pairs never cross them,
    so one forward/backward pass covers the whole corpus.
    """

    def __init__(self, cases: list[SpineCase], params: FusionParams, u_metric: str | None):
        c0_rows = []
        truth_rows = []
        tables = []
        offset_list = phi_offsets(params.window)
        start = 0
        for case in cases:
            truths = case.truths
            if truths is None:
                raise ValidationError(f"case {case.case_id!r} lacks full ground truth")
            u = resolve_certainty(case, u_metric)
            table = _pair_table(case, params, u)
            tables.append((start, table))
            c0_rows.extend(aggregate_samples(v.mc).probs for v in case.vertebrae)
            truth_rows.extend(t.index for t in truths)
            start += len(case)
        self.c0 = np.array(c0_rows, dtype=np.float64)
        self.truth = np.array(truth_rows, dtype=np.int64)
        self.hops = params.hops
        self.pairs: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        for delta in offset_list:
            dsts, srcs, coeffs = [], [], []
            for case_start, table in tables:
                if delta not in table:
                    continue
                dst, src, coeff = table[delta]
                dsts.append(dst + case_start)
                srcs.append(src + case_start)
                coeffs.append(coeff)
            if dsts:
                self.pairs[delta] = (
                    np.concatenate(dsts),
                    np.concatenate(srcs),
                    np.concatenate(coeffs),
                )

    def loss_and_grad(self, phi: dict[int, np.ndarray]):
        """Mean cross-entropy at the final hop and its gradient w.r.t. phi."""
        m = len(self.c0)
        cs = [self.c0]
        sums = []
        for _ in range(self.hops):
            nxt, s = _step_matrix(cs[-1], self.pairs, phi)
            cs.append(nxt)
            sums.append(s)
        final = cs[-1]
        picked = final[np.arange(m), self.truth]
        with np.errstate(divide="ignore"):
            loss = float(-np.log(picked).mean())

        grad = {delta: np.zeros((N_CLASSES, N_CLASSES)) for delta in phi}
        g = np.zeros_like(final)
        g[np.arange(m), self.truth] = -1.0 / (m * picked)
        for t in range(self.hops - 1, -1, -1):
            c_next, c_prev, s = cs[t + 1], cs[t], sums[t]
            # backward through raw -> raw/sum(raw)
            h = (g - (g * c_next).sum(axis=1, keepdims=True)) / s[:, None]
            g = h.copy()
            for delta, (dst, src, coeff) in self.pairs.items():
                hd = h[dst]
                grad[delta] += (coeff[:, None] * c_prev[src]).T @ hd
                g[src] += coeff[:, None] * (hd @ phi[delta].T)
        return loss, grad

    def loss(self, phi: dict[int, np.ndarray]) -> float:
        m = len(self.c0)
        c = self.c0
        for _ in range(self.hops):
            c, _ = _step_matrix(c, self.pairs, phi)
        picked = c[np.arange(m), self.truth]
        with np.errstate(divide="ignore"):
            return float(-np.log(picked).mean())


def train_phi(
    train_cases: list[SpineCase],
    params_init: FusionParams,
    cfg: TrainConfig,
    u_metric: str | None = None,
) -> FusionParams:
    """Fit phi by projected full-batch gradient descent.

    The starting point comes from ``cfg.init``; ``params_init`` supplies
    theta, hops, window and distance mode. Entries are clipped to zero after
    each step. Returns the best parameters seen, so the training loss never
    exceeds the initial loss. Deterministic for a fixed seed.
    """
    if not train_cases:
        raise ValidationError("training requires at least one case")
    unrolled = _Unrolled(list(train_cases), params_init, u_metric)
    phi = initial_phi(params_init.window, cfg.init, cfg.seed)
    best_phi = {d: m.copy() for d, m in phi.items()}
    best_loss = unrolled.loss(phi)
    if not np.isfinite(best_loss):
        raise DivergenceError("initial loss is not finite", epoch=0)
    for epoch in range(cfg.epochs):
        loss, grad = unrolled.loss_and_grad(phi)
        if not np.isfinite(loss):
            raise DivergenceError("training loss is not finite", epoch=epoch)
        if loss < best_loss:
            best_loss = loss
            best_phi = {d: m.copy() for d, m in phi.items()}
        phi = {d: np.maximum(phi[d] - cfg.learning_rate * grad[d], 0.0) for d in phi}
    final_loss = unrolled.loss(phi)
    if np.isfinite(final_loss) and final_loss < best_loss:
        best_loss = final_loss
        best_phi = phi
    return params_init.with_phi(best_phi)
