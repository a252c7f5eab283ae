"""Value types shared by every pipeline stage.

All types are immutable after construction and validate their invariants in
``__post_init__``; numpy-backed fields are stored as read-only float64 arrays,
so instances are safe to share across threads and processes.

Coordinate convention (fixed, voxel units): the embedded frame is (x, y, z)
with z the cranial-caudal axis, increasing toward the head. A volume of shape
``(d, h, w)`` spans z in [0, d), y in [0, h) and x in [0, w). Sagittal slices
are indexed along x and coronal slices along y; within any slice the box
center is (cx, cy) where cy is the z coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .labels import N_CLASSES, VertebraLabel

PLANES = ("sagittal", "coronal")

# Probability vectors must renormalize to this tolerance after internal
# operations; files produced by external tools are accepted at 1e-6 and
# renormalized on ingest.
SUM_TOL_INTERNAL = 1e-9
SUM_TOL_INGEST = 1e-6

MAX_ENTROPY = math.log(N_CLASSES)


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


def _frozen_array(values, shape: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if shape is not None and arr.shape != shape:
        raise ValidationError(f"expected array of shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SliceDetection:
    """One 2D bounding box on one slice of one anatomical plane."""

    plane: str
    slice_index: int
    cx: float
    cy: float
    w: float
    h: float
    confidence: float

    def __post_init__(self):
        if self.plane not in PLANES:
            raise ValidationError(f"plane must be one of {PLANES}, got {self.plane!r}")
        if not isinstance(self.slice_index, int) or isinstance(self.slice_index, bool) or self.slice_index < 0:
            raise ValidationError(f"slice_index must be a non-negative integer, got {self.slice_index!r}")
        for name in ("cx", "cy"):
            object.__setattr__(self, name, _require_finite(name, getattr(self, name)))
        for name in ("w", "h"):
            value = _require_finite(name, getattr(self, name))
            if value <= 0:
                raise ValidationError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)
        conf = _require_finite("confidence", self.confidence)
        if not 0.0 <= conf <= 1.0:
            raise ValidationError(f"confidence must lie in [0, 1], got {conf}")
        object.__setattr__(self, "confidence", conf)


@dataclass(frozen=True)
class DetectionSet:
    """Every per-slice detection for one scan, plus the scan geometry."""

    case_id: str
    volume_shape: tuple[int, int, int]
    detections: tuple[SliceDetection, ...]
    slice_count_per_plane: int

    def __post_init__(self):
        shape = tuple(int(v) for v in self.volume_shape)
        if len(shape) != 3 or any(v <= 0 for v in shape):
            raise ValidationError(f"volume_shape must be three positive extents, got {self.volume_shape!r}")
        object.__setattr__(self, "volume_shape", shape)
        object.__setattr__(self, "detections", tuple(self.detections))
        if self.slice_count_per_plane <= 0:
            raise ValidationError(f"slice_count_per_plane must be positive, got {self.slice_count_per_plane}")
        d, h, w = shape
        for i, det in enumerate(self.detections):
            if not isinstance(det, SliceDetection):
                raise ValidationError(f"detections[{i}] is not a SliceDetection")
            extent = w if det.plane == "sagittal" else h
            if det.slice_index >= extent:
                raise ValidationError(
                    f"detections[{i}]: slice_index {det.slice_index} outside the "
                    f"{det.plane} extent {extent}"
                )

    def __len__(self) -> int:
        return len(self.detections)


@dataclass(frozen=True)
class VertebraCenter:
    """A clustered 3D vertebra center with robust box dimensions."""

    position: tuple[float, float, float]
    mean_dims: tuple[float, float]
    member_count: int
    z_rank: int

    def __post_init__(self):
        pos = tuple(_require_finite(f"position[{i}]", v) for i, v in enumerate(self.position))
        if len(pos) != 3:
            raise ValidationError(f"position must have 3 coordinates, got {len(pos)}")
        object.__setattr__(self, "position", pos)
        dims = tuple(_require_finite(f"mean_dims[{i}]", v) for i, v in enumerate(self.mean_dims))
        if len(dims) != 2 or any(v <= 0 for v in dims):
            raise ValidationError(f"mean_dims must be two positive values, got {self.mean_dims!r}")
        object.__setattr__(self, "mean_dims", dims)
        if self.member_count < 1:
            raise ValidationError(f"member_count must be at least 1, got {self.member_count}")
        if self.z_rank < 0:
            raise ValidationError(f"z_rank must be non-negative, got {self.z_rank}")

    @property
    def z(self) -> float:
        return self.position[2]


@dataclass(frozen=True, eq=False)
class ConfidenceState:
    """A per-vertebra probability vector over the 24 classes."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.probs, (N_CLASSES,))
        if not np.all(np.isfinite(arr)):
            raise ValidationError("probabilities must be finite")
        if np.any(arr < 0):
            raise ValidationError("probabilities must be non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL_INTERNAL:
            raise ValidationError(f"probabilities must sum to 1 within {SUM_TOL_INTERNAL}, got {total!r}")
        object.__setattr__(self, "probs", arr)

    @classmethod
    def from_ingest(cls, values) -> "ConfidenceState":
        """Accept externally produced vectors at 1e-6 precision, renormalizing.

        Vectors already within the internal tolerance pass through untouched so
        save/load round-trips are bit exact.
        """
        arr = np.array(values, dtype=np.float64)
        if arr.shape != (N_CLASSES,):
            raise ValidationError(f"expected {N_CLASSES} probabilities, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("ingested probabilities must be finite and non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL_INGEST:
            raise ValidationError(f"ingested probabilities must sum to 1 within {SUM_TOL_INGEST}, got {total!r}")
        if abs(total - 1.0) > SUM_TOL_INTERNAL:
            arr = arr / total
        return cls(arr)

    def argmax(self) -> int:
        """Most probable class; ties resolve to the smallest index."""
        return int(np.argmax(self.probs))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfidenceState):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)


@dataclass(frozen=True, eq=False)
class McSampleSet:
    """N stochastic forward-pass probability vectors for one vertebra."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[1] != N_CLASSES:
            raise ValidationError(f"samples must be an N x {N_CLASSES} matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValidationError("at least one sample is required")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("samples must be finite")
        if np.any(arr < 0):
            raise ValidationError("samples must be non-negative")
        sums = arr.sum(axis=1)
        bad = np.abs(sums - 1.0) > SUM_TOL_INGEST
        if np.any(bad):
            row = int(np.argmax(bad))
            raise ValidationError(
                f"sample row {row} must sum to 1 within {SUM_TOL_INGEST}, got {sums[row]!r}"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, McSampleSet):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)


@dataclass(frozen=True)
class UncertaintyReport:
    """Aggregated Monte Carlo statistics for one vertebra.

    ``certainty_weight`` is the entropy-complement weight used by message
    fusion: 1 for a one-hot mean distribution, 0 for a uniform one.
    """

    mean_probs: ConfidenceState
    entropy: float
    variance: float
    certainty_weight: float

    def __post_init__(self):
        ent = _require_finite("entropy", self.entropy)
        if not -1e-12 <= ent <= MAX_ENTROPY + 1e-12:
            raise ValidationError(f"entropy {ent} outside [0, ln {N_CLASSES}]")
        object.__setattr__(self, "entropy", ent)
        var = _require_finite("variance", self.variance)
        if var < 0:
            raise ValidationError(f"variance must be non-negative, got {var}")
        object.__setattr__(self, "variance", var)
        cw = _require_finite("certainty_weight", self.certainty_weight)
        if abs(cw - (1.0 - ent / MAX_ENTROPY)) > 1e-12:
            raise ValidationError("certainty_weight must equal 1 - entropy/ln(24)")
        object.__setattr__(self, "certainty_weight", cw)


@dataclass(frozen=True)
class SpineVertebra:
    """One vertebra record inside a case: clustered center, MC samples, optional truth."""

    center: VertebraCenter
    mc: McSampleSet
    truth: VertebraLabel | None = None
    uncertainty: UncertaintyReport | None = None
    fusion_weight: float | None = None

    def __post_init__(self):
        if not isinstance(self.center, VertebraCenter):
            raise ValidationError("center must be a VertebraCenter")
        if not isinstance(self.mc, McSampleSet):
            raise ValidationError("mc must be a McSampleSet")
        if self.truth is not None and not isinstance(self.truth, VertebraLabel):
            raise ValidationError("truth must be a VertebraLabel or None")
        if self.fusion_weight is not None:
            fw = _require_finite("fusion_weight", self.fusion_weight)
            if not 0.0 <= fw <= 1.0:
                raise ValidationError(f"fusion_weight must lie in [0, 1], got {fw}")
            object.__setattr__(self, "fusion_weight", fw)


@dataclass(frozen=True)
class SpineCase:
    """An ordered cranial-to-caudal sequence of vertebra records for one scan."""

    case_id: str
    vertebrae: tuple[SpineVertebra, ...]

    def __post_init__(self):
        verts = tuple(self.vertebrae)
        object.__setattr__(self, "vertebrae", verts)
        if len(verts) == 0:
            raise ValidationError("a case must contain at least one vertebra")
        for i, v in enumerate(verts):
            if not isinstance(v, SpineVertebra):
                raise ValidationError(f"vertebrae[{i}] is not a SpineVertebra")
            if v.center.z_rank != i:
                raise ValidationError(
                    f"vertebrae[{i}] has z_rank {v.center.z_rank}; order must follow z_rank"
                )
        zs = [v.center.z for v in verts]
        for i in range(len(zs) - 1):
            if zs[i + 1] > zs[i]:
                raise ValidationError(
                    f"center z must not increase along the case (position {i} -> {i + 1})"
                )
        truths = [v.truth for v in verts]
        if all(t is not None for t in truths):
            for i in range(len(truths) - 1):
                if truths[i + 1].index != truths[i].index + 1:
                    raise ValidationError(
                        "truth labels must increase by exactly 1 along the case, got "
                        f"{truths[i].name} -> {truths[i + 1].name} at position {i}"
                    )

    def __len__(self) -> int:
        return len(self.vertebrae)

    @property
    def truths(self) -> list[VertebraLabel] | None:
        """All-or-nothing ground truth; None when any vertebra lacks a label."""
        out = [v.truth for v in self.vertebrae]
        return out if all(t is not None for t in out) else None


ALLOWED_WINDOWS = (1, 3, 5, 7)
DISTANCE_MODES = ("index", "physical")
MAX_HOPS = 10


def phi_offsets(window: int) -> tuple[int, ...]:
    """Signed neighbor offsets for a window size: -half..-1, +1..+half."""
    half = (window - 1) // 2
    return tuple(range(-half, 0)) + tuple(range(1, half + 1))


@dataclass(frozen=True, eq=False)
class FusionParams:
    """Hyper-parameters and per-offset message matrices for confidence fusion."""

    theta: float
    hops: int
    window: int
    distance_mode: str
    phi: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        theta = _require_finite("theta", self.theta)
        if theta < 0:
            raise ValidationError(f"theta must be non-negative, got {theta}")
        object.__setattr__(self, "theta", theta)
        if not isinstance(self.hops, int) or isinstance(self.hops, bool) or not 0 <= self.hops <= MAX_HOPS:
            raise ValidationError(f"hops must be an integer in [0, {MAX_HOPS}], got {self.hops!r}")
        if self.window not in ALLOWED_WINDOWS:
            raise ValidationError(f"window must be odd and one of {ALLOWED_WINDOWS}, got {self.window!r}")
        if self.distance_mode not in DISTANCE_MODES:
            raise ValidationError(f"distance_mode must be one of {DISTANCE_MODES}, got {self.distance_mode!r}")
        expected = set(phi_offsets(self.window))
        got = {int(k) for k in self.phi}
        if got != expected:
            raise ValidationError(f"phi offsets {sorted(got)} do not match window {self.window} "
                                  f"(expected {sorted(expected)})")
        frozen: dict[int, np.ndarray] = {}
        for offset in sorted(self.phi, key=int):
            mat = _frozen_array(self.phi[int(offset)], (N_CLASSES, N_CLASSES))
            if not np.all(np.isfinite(mat)):
                raise ValidationError(f"phi[{offset}] must be finite")
            if np.any(mat < 0):
                raise ValidationError(f"phi[{offset}] must be non-negative")
            frozen[int(offset)] = mat
        object.__setattr__(self, "phi", frozen)

    @property
    def half_window(self) -> int:
        return (self.window - 1) // 2

    def with_phi(self, phi: dict[int, np.ndarray]) -> "FusionParams":
        return FusionParams(self.theta, self.hops, self.window, self.distance_mode, phi)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FusionParams):
            return NotImplemented
        return (
            self.theta == other.theta
            and self.hops == other.hops
            and self.window == other.window
            and self.distance_mode == other.distance_mode
            and self.phi.keys() == other.phi.keys()
            and all(np.array_equal(self.phi[k], other.phi[k]) for k in self.phi)
        )
