"""Identification metrics, decoding, and corpus-level evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import ConfidenceState, SpineCase
from .errors import ValidationError
from .labels import N_CLASSES, VertebraLabel

DECODE_MODES = ("argmax", "constrained")


def _as_indices(labels: Sequence) -> list[int]:
    out = []
    for v in labels:
        if isinstance(v, VertebraLabel):
            out.append(v.index)
        else:
            out.append(int(v))
    return out


def id_rate(pred: Sequence, truth: Sequence) -> float:
    """Fraction of vertebrae whose predicted label matches the truth."""
    p, t = _as_indices(pred), _as_indices(truth)
    if len(p) != len(t) or len(p) == 0:
        raise ValidationError(f"prediction/truth lengths differ or are empty: {len(p)} vs {len(t)}")
    return sum(a == b for a, b in zip(p, t)) / len(p)


def label_mse(pred: Sequence, truth: Sequence) -> float:
    """Mean squared error between predicted and true label indices."""
    p, t = _as_indices(pred), _as_indices(truth)
    if len(p) != len(t) or len(p) == 0:
        raise ValidationError(f"prediction/truth lengths differ or are empty: {len(p)} vs {len(t)}")
    return float(np.mean([(a - b) ** 2 for a, b in zip(p, t)]))


def constrained_decode(states: Sequence[ConfidenceState]) -> list[int]:
    """Best strictly consecutive label window for a case.

    Chooses the start s maximizing sum_i log(C_i[s + i] + 1e-12) over all
    feasible windows and returns [s, s+1, ...]; ties go to the smallest s.
    """
    k = len(states)
    if k == 0:
        raise ValidationError("cannot decode an empty state list")
    if k > N_CLASSES:
        raise ValidationError(f"{k} vertebrae cannot carry {N_CLASSES} distinct consecutive labels")
    mat = np.array([s.probs for s in states], dtype=np.float64)
    scores = [
        float(np.log(mat[np.arange(k), start + np.arange(k)] + 1e-12).sum())
        for start in range(N_CLASSES - k + 1)
    ]
    best = int(np.argmax(scores))  # argmax takes the first, i.e. smallest, start
    return list(range(best, best + k))


def decode_states(states: Sequence[ConfidenceState], mode: str = "argmax") -> list[int]:
    """Turn per-vertebra confidences into label indices."""
    if mode == "argmax":
        return [int(np.argmax(s.probs)) for s in states]
    if mode == "constrained":
        return constrained_decode(states)
    raise ValidationError(f"decode mode must be one of {DECODE_MODES}, got {mode!r}")


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Aggregated identification metrics over a corpus.

    The confusion matrix is indexed [truth, predicted]; its trace over
    n_vertebrae reproduces id_rate exactly. per_case_id_rate feeds the
    per-case histogram (all-or-nothing under constrained decoding).
    """

    id_rate: float
    mse: float
    per_class_confusion: np.ndarray
    n_vertebrae: int
    per_case_id_rate: tuple[float, ...]

    def __post_init__(self):
        conf = np.array(self.per_class_confusion, dtype=np.int64, copy=True)
        if conf.shape != (N_CLASSES, N_CLASSES):
            raise ValidationError(f"confusion matrix must be {N_CLASSES} x {N_CLASSES}, got {conf.shape}")
        if int(conf.sum()) != self.n_vertebrae:
            raise ValidationError("confusion matrix total must equal n_vertebrae")
        if abs(self.id_rate - np.trace(conf) / self.n_vertebrae) > 1e-12:
            raise ValidationError("id_rate must equal trace(confusion) / n_vertebrae")
        conf.flags.writeable = False
        object.__setattr__(self, "per_class_confusion", conf)
        object.__setattr__(self, "per_case_id_rate", tuple(float(v) for v in self.per_case_id_rate))


def evaluate(
    cases: Sequence[SpineCase],
    predictions: Sequence[Sequence],
    decode: str = "argmax",
) -> EvalReport:
    """Score per-case predictions against the cases' ground truth.

    ``predictions`` holds, per case, either confidence states (decoded with
    the chosen mode) or already-decoded label indices. Every case must carry
    full ground truth.
    """
    if len(cases) != len(predictions):
        raise ValidationError(f"{len(predictions)} prediction lists for {len(cases)} cases")
    if len(cases) == 0:
        raise ValidationError("cannot evaluate an empty corpus")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    per_case = []
    correct = 0
    sq_err = 0.0
    total = 0
    for case, preds in zip(cases, predictions):
        truths = case.truths
        if truths is None:
            raise ValidationError(f"case {case.case_id!r} lacks full ground truth")
        preds = list(preds)
        if len(preds) != len(case):
            raise ValidationError(f"case {case.case_id!r}: {len(preds)} predictions for {len(case)} vertebrae")
        if preds and isinstance(preds[0], ConfidenceState):
            labels = decode_states(preds, decode)
        else:
            labels = _as_indices(preds)
        case_correct = 0
        for pred, truth in zip(labels, truths):
            confusion[truth.index, pred] += 1
            case_correct += pred == truth.index
            sq_err += (pred - truth.index) ** 2
        correct += case_correct
        total += len(case)
        per_case.append(case_correct / len(case))
    return EvalReport(
        id_rate=correct / total,
        mse=sq_err / total,
        per_class_confusion=confusion,
        n_vertebrae=total,
        per_case_id_rate=tuple(per_case),
    )
