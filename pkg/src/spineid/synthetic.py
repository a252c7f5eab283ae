"""Seeded synthetic spine cases with planted ground truth.

Each generated case carries a consecutive run of vertebra labels, centers on
a gently curved cranial-caudal curve, Dirichlet-sampled MC confidence
vectors whose base distribution leaks mass onto the anatomically adjacent
labels, and a paired detection set: per-plane boxes jittered around each
vertebra's central slices plus a configurable fraction of uniform noise
boxes. Everything derives from one master seed; equal configurations always
produce byte-identical corpora.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import DetectionSet, McSampleSet, SliceDetection, SpineCase, SpineVertebra, VertebraCenter
from .errors import ValidationError
from .labels import N_CLASSES, VertebraLabel


@dataclass(frozen=True)
class ConfusionModel:
    """Base confidence mass placed on the truth and its neighbors.

    ``true_mass`` sits on the planted label, ``adjacent1`` on each label one
    step away, ``adjacent2`` two steps away and ``floor`` everywhere else;
    the vector is renormalized, which also absorbs mass lost at the label
    range edges.
    """

    true_mass: float = 0.7
    adjacent1: float = 0.1
    adjacent2: float = 0.02
    floor: float = 0.002

    def __post_init__(self):
        for name in ("true_mass", "adjacent1", "adjacent2", "floor"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be finite and non-negative, got {v!r}")
        if self.true_mass <= 0:
            raise ValidationError("true_mass must be positive")
        if self.true_mass <= max(self.adjacent1, self.adjacent2, self.floor):
            raise ValidationError("true_mass must dominate every off-target mass")

    def base_vector(self, truth: int) -> np.ndarray:
        base = np.full(N_CLASSES, self.floor, dtype=np.float64)
        base[truth] = self.true_mass
        for step, mass in ((1, self.adjacent1), (2, self.adjacent2)):
            for j in (truth - step, truth + step):
                if 0 <= j < N_CLASSES:
                    base[j] = mass
        return base / base.sum()


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo sampling: N draws from Dirichlet(concentration * base)."""

    n_samples: int = 20
    concentration: float = 50.0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError(f"n_samples must be at least 1, got {self.n_samples}")
        if not np.isfinite(self.concentration) or self.concentration <= 0:
            raise ValidationError(f"concentration must be positive, got {self.concentration!r}")


@dataclass(frozen=True)
class DetectConfig:
    """Detector emulation: box counts, jitters, and the uniform noise fraction."""

    boxes_per_vertebra: int = 30
    count_jitter: float = 0.2
    pos_sigma: float = 1.0
    dim_sigma: float = 1.0
    noise_rate: float = 0.1

    def __post_init__(self):
        if self.boxes_per_vertebra < 1:
            raise ValidationError("boxes_per_vertebra must be at least 1")
        if not 0.0 <= self.count_jitter < 1.0:
            raise ValidationError(f"count_jitter must lie in [0, 1), got {self.count_jitter!r}")
        for name in ("pos_sigma", "dim_sigma"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValidationError(f"noise_rate must lie in [0, 1), got {self.noise_rate!r}")


@dataclass(frozen=True)
class GenConfig:
    """Top-level generator settings."""

    seed: int = 0
    n_cases: int = 1
    k_slices: int = 200
    vertebrae_range: tuple[int, int] = (4, 12)
    confusion: ConfusionModel = field(default_factory=ConfusionModel)
    mc: McConfig = field(default_factory=McConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)

    def __post_init__(self):
        if self.n_cases < 1:
            raise ValidationError(f"n_cases must be at least 1, got {self.n_cases}")
        if self.k_slices < 1:
            raise ValidationError(f"k_slices must be at least 1, got {self.k_slices}")
        lo, hi = self.vertebrae_range
        if not 1 <= lo <= hi <= N_CLASSES:
            raise ValidationError(f"vertebrae_range must satisfy 1 <= min <= max <= {N_CLASSES}")


# Geometry of the planted spine, in voxels.
_SPACING = 26.0
_MARGIN = 40.0


def _case_rng(master_seed: int, case_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(case_index,)))


def sample_mc(rng: np.random.Generator, base: np.ndarray, kappa: float, n: int) -> np.ndarray:
    """Dirichlet draws around a base vector; zero-mass classes stay zero."""
    support = base > 0.0
    rows = np.zeros((n, len(base)), dtype=np.float64)
    rows[:, support] = rng.dirichlet(kappa * base[support], size=n)
    rows /= rows.sum(axis=1, keepdims=True)
    return rows


def _true_boxes(rng, cfg: DetectConfig, plane, normal_coord, in_cx, in_cy, bw, bh, extent):
    count = cfg.boxes_per_vertebra
    if cfg.count_jitter > 0:
        count = max(1, int(round(count * (1.0 + rng.uniform(-cfg.count_jitter, cfg.count_jitter)))))
    boxes = []
    for _ in range(count):
        s = int(np.clip(round(normal_coord + rng.normal(0.0, cfg.pos_sigma)), 0, extent - 1))
        boxes.append(
            SliceDetection(
                plane=plane,
                slice_index=s,
                cx=float(in_cx + rng.normal(0.0, cfg.pos_sigma)),
                cy=float(in_cy + rng.normal(0.0, cfg.pos_sigma)),
                w=float(max(1.0, bw + rng.normal(0.0, cfg.dim_sigma))),
                h=float(max(1.0, bh + rng.normal(0.0, cfg.dim_sigma))),
                confidence=float(rng.uniform(0.6, 0.99)),
            )
        )
    return boxes


def generate_case(cfg: GenConfig, case_index: int) -> tuple[SpineCase, DetectionSet]:
    """One seeded case: planted truths, MC samples, centers, and detections."""
    rng = _case_rng(cfg.seed, case_index)
    lo, hi = cfg.vertebrae_range
    k = int(rng.integers(lo, hi + 1))
    start = int(rng.integers(0, N_CLASSES - k + 1))

    depth = int(math.ceil(_SPACING * (k - 1) + 2 * _MARGIN))
    width = height = cfg.k_slices
    amp = rng.uniform(5.0, 15.0, size=2)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=2)
    ts = np.arange(k) / max(k - 1, 1)
    xs = width / 2.0 + amp[0] * np.sin(math.pi * ts + phase[0])
    ys = height / 2.0 + amp[1] * np.sin(math.pi * ts + phase[1])
    zs = depth - _MARGIN - _SPACING * np.arange(k)
    box_w = rng.uniform(26.0, 34.0, size=k)
    box_h = rng.uniform(17.0, 23.0, size=k)

    detections: list[SliceDetection] = []
    per_vertebra_counts: list[int] = []
    for i in range(k):
        sag = _true_boxes(rng, cfg.detect, "sagittal", xs[i], ys[i], zs[i], box_w[i], box_h[i], width)
        cor = _true_boxes(rng, cfg.detect, "coronal", ys[i], xs[i], zs[i], box_w[i], box_h[i], height)
        per_vertebra_counts.append(len(sag) + len(cor))
        detections.extend(sag)
        detections.extend(cor)

    n_true = len(detections)
    rate = cfg.detect.noise_rate
    n_noise = int(round(rate / (1.0 - rate) * n_true)) if rate > 0 else 0
    for _ in range(n_noise):
        plane = "sagittal" if rng.uniform() < 0.5 else "coronal"
        extent = width if plane == "sagittal" else height
        in_extent = height if plane == "sagittal" else width
        detections.append(
            SliceDetection(
                plane=plane,
                slice_index=int(rng.integers(0, extent)),
                cx=float(rng.uniform(0.0, in_extent)),
                cy=float(rng.uniform(0.0, depth)),
                w=float(rng.uniform(10.0, 45.0)),
                h=float(rng.uniform(10.0, 45.0)),
                confidence=float(rng.uniform(0.1, 0.9)),
            )
        )

    vertebrae = []
    for i in range(k):
        truth = start + i
        samples = sample_mc(rng, cfg.confusion.base_vector(truth), cfg.mc.concentration, cfg.mc.n_samples)
        vertebrae.append(
            SpineVertebra(
                center=VertebraCenter(
                    position=(float(xs[i]), float(ys[i]), float(zs[i])),
                    mean_dims=(float(box_w[i]), float(box_h[i])),
                    member_count=per_vertebra_counts[i],
                    z_rank=i,
                ),
                mc=McSampleSet(samples),
                truth=VertebraLabel(truth),
            )
        )

    case_id = f"case_{case_index:04d}"
    case = SpineCase(case_id=case_id, vertebrae=tuple(vertebrae))
    dets = DetectionSet(
        case_id=case_id,
        volume_shape=(depth, height, width),
        detections=tuple(detections),
        slice_count_per_plane=cfg.k_slices,
    )
    return case, dets


def gen_cases(cfg: GenConfig) -> list[tuple[SpineCase, DetectionSet]]:
    """Generate the whole corpus; each case draws from its own child seed."""
    return [generate_case(cfg, i) for i in range(cfg.n_cases)]
