"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from spineid.domain import (
    McSampleSet,
    SpineCase,
    SpineVertebra,
    VertebraCenter,
    phi_offsets,
)
from spineid.labels import N_CLASSES, VertebraLabel


def one_hot(index: int) -> np.ndarray:
    v = np.zeros(N_CLASSES)
    v[index] = 1.0
    return v


def random_probs(rng: np.random.Generator, n_rows: int = 1, sharp: float = 1.0) -> np.ndarray:
    """Random valid probability rows via normalized positive draws."""
    raw = rng.uniform(0.01, 1.0, size=(n_rows, N_CLASSES)) ** sharp
    return raw / raw.sum(axis=1, keepdims=True)


def make_case(
    rows,
    truths=None,
    case_id: str = "case",
    spacing: float = 26.0,
    positions=None,
) -> SpineCase:
    """Build a case from per-vertebra MC sample matrices (or single rows)."""
    verts = []
    for i, row in enumerate(rows):
        arr = np.asarray(row, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        pos = positions[i] if positions is not None else (100.0 + 0.1 * i, 100.0, 500.0 - spacing * i)
        verts.append(
            SpineVertebra(
                center=VertebraCenter(
                    position=tuple(float(v) for v in pos),
                    mean_dims=(30.0, 20.0),
                    member_count=10,
                    z_rank=i,
                ),
                mc=McSampleSet(arr),
                truth=None if truths is None else VertebraLabel(int(truths[i])),
            )
        )
    return SpineCase(case_id=case_id, vertebrae=tuple(verts))


def shift_phi(window: int, scale: float = 1.0) -> dict[int, np.ndarray]:
    """Ideal message matrices: a neighbor at offset d votes for class c - d."""
    phi = {}
    for d in phi_offsets(window):
        m = np.zeros((N_CLASSES, N_CLASSES))
        for c in range(N_CLASSES):
            if 0 <= c - d < N_CLASSES:
                m[c, c - d] = scale
        phi[d] = m
    return phi


def random_case(rng: np.random.Generator, k: int | None = None, with_truth: bool = True) -> SpineCase:
    """A random valid case with dispersed MC samples and distinct positions."""
    if k is None:
        k = int(rng.integers(2, 13))
    start = int(rng.integers(0, N_CLASSES - k + 1))
    rows = []
    for i in range(k):
        base = np.full(N_CLASSES, 0.01)
        base[start + i] = 1.0
        base /= base.sum()
        rows.append(rng.dirichlet(8.0 * base, size=int(rng.integers(1, 8))))
    truths = list(range(start, start + k)) if with_truth else None
    return make_case(rows, truths=truths, case_id=f"rand_{rng.integers(1e9)}")
