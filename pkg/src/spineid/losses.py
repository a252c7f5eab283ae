"""Batch-contrastive and sequence-consistency losses.

``supcon_loss`` pulls same-label embeddings together and pushes different
labels apart; its printed form places the mean over positives inside the
log, and ``supcon_grad`` differentiates exactly that form. ``sequence_loss``
scores a predicted label sequence by how far it is from being strictly
increasing. ``total_loss`` is the weighted scalar combiner.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .labels import N_CLASSES, VertebraLabel

NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EmbeddingBatch:
    """L2-normalized embedding rows with labels and a softmax temperature.

    Every label must occur at least twice, so each anchor has a non-empty
    positive set.
    """

    vectors: np.ndarray
    labels: tuple[VertebraLabel, ...]
    tau: float

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=np.float64, copy=True)
        if vecs.ndim != 2 or vecs.shape[0] < 2:
            raise ValidationError(f"vectors must be a (batch >= 2) x dim matrix, got shape {vecs.shape}")
        norms = np.linalg.norm(vecs, axis=1)
        off = np.abs(norms - 1.0)
        if np.any(off > NORM_TOL):
            row = int(np.argmax(off))
            raise ValidationError(f"embedding row {row} has L2 norm {norms[row]!r}, expected 1 within {NORM_TOL}")
        vecs.flags.writeable = False
        object.__setattr__(self, "vectors", vecs)
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) != vecs.shape[0]:
            raise ValidationError(f"{len(labels)} labels for {vecs.shape[0]} vectors")
        idx = [lab.index for lab in labels]
        for i, lab in enumerate(idx):
            if idx.count(lab) < 2:
                raise ValidationError(
                    f"label {labels[i].name} at row {i} has no positive partner in the batch"
                )
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise ValidationError(f"tau must be a positive temperature, got {self.tau!r}")

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    def label_indices(self) -> np.ndarray:
        return np.array([lab.index for lab in self.labels], dtype=np.int64)


def _logit_matrices(batch: EmbeddingBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairwise logits with the diagonal removed, plus positive/valid masks."""
    z = batch.vectors
    s = (z @ z.T) / batch.tau
    n = batch.size
    labels = batch.label_indices()
    valid = ~np.eye(n, dtype=bool)
    positive = (labels[:, None] == labels[None, :]) & valid
    return s, positive, valid


def supcon_loss(batch: EmbeddingBatch) -> float:
    """Supervised contrastive loss, summed over anchors.

    For each anchor v the contribution is
    -log( mean over positives g of exp(s_vg) / sum over a != v of exp(s_va) )
    with s the temperature-scaled dot products. Exponents are shifted by the
    per-anchor row maximum before exponentiation.
    """
    s, positive, valid = _logit_matrices(batch)
    row_max = np.max(np.where(valid, s, -np.inf), axis=1, keepdims=True)
    e = np.exp(s - row_max) * valid
    denom = e.sum(axis=1)
    pos_sum = (e * positive).sum(axis=1)
    pos_count = positive.sum(axis=1)
    per_anchor = -(np.log(pos_sum / pos_count) - np.log(denom))
    return float(per_anchor.sum())


def supcon_grad(batch: EmbeddingBatch) -> np.ndarray:
    """Gradient of supcon_loss with respect to every embedding row.

    Rows are treated as free variables; no normalization constraint is
    back-propagated. Closed form: with q the per-anchor softmax over the
    non-self logits and p the positive-restricted normalization, the
    gradient is ((W + W^T) @ Z) / tau where W = q - p on valid entries.
    """
    s, positive, valid = _logit_matrices(batch)
    row_max = np.max(np.where(valid, s, -np.inf), axis=1, keepdims=True)
    e = np.exp(s - row_max) * valid
    q = e / e.sum(axis=1, keepdims=True)
    pos_sum = (e * positive).sum(axis=1, keepdims=True)
    p = np.where(positive, e / pos_sum, 0.0)
    w = q - p
    return (w + w.T) @ batch.vectors / batch.tau


@dataclass(frozen=True)
class LabelSequence:
    """A predicted label-index sequence in cranial-to-caudal order."""

    seq: tuple[int, ...]

    def __post_init__(self):
        seq = tuple(int(v) for v in self.seq)
        if len(seq) == 0:
            raise ValidationError("label sequence must not be empty")
        for i, v in enumerate(seq):
            if not 0 <= v < N_CLASSES:
                raise ValidationError(f"seq[{i}] = {v} outside [0, {N_CLASSES - 1}]")
        object.__setattr__(self, "seq", seq)

    @property
    def n(self) -> int:
        return len(self.seq)


def sequence_loss(s: LabelSequence | Sequence[int]) -> int:
    """Sequence length minus the longest strictly increasing subsequence.

    Computed by the quadratic relaxation v[i] = max(v[i], v[j] + 1) over
    j < i with seq[i] > seq[j], each v initialized to 1. Zero exactly when
    the sequence is already strictly increasing; duplicates are penalized.
    The score is an integer penalty and is not differentiable.
    """
    if not isinstance(s, LabelSequence):
        s = LabelSequence(tuple(s))
    seq = s.seq
    n = s.n
    v = [1] * n
    for i in range(n):
        for j in range(i):
            if seq[i] > seq[j]:
                v[i] = max(v[i], v[j] + 1)
    return n - max(v)


def total_loss(
    l_se: float,
    l_mse: float,
    l_ce: float,
    alpha: float = 0.1,
    beta: float = 0.5,
    gamma: float = 1.0,
) -> float:
    """Weighted sum alpha*l_se + beta*l_mse + gamma*l_ce."""
    values = {"l_se": l_se, "l_mse": l_mse, "l_ce": l_ce,
              "alpha": alpha, "beta": beta, "gamma": gamma}
    for name, v in values.items():
        if not np.isfinite(v):
            raise ValidationError(f"{name} must be finite, got {v!r}")
    for name in ("alpha", "beta", "gamma"):
        if values[name] < 0:
            raise ValidationError(f"{name} must be non-negative, got {values[name]!r}")
    return float(alpha * l_se + beta * l_mse + gamma * l_ce)
