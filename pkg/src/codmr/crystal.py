"""
Symmetry-equivalent defect frames in a cubic host and frame transforms.

Three frames are in play. The *crystal* frame has its axes along the cubic
[100], [010], [001] directions. The *lab* frame is fixed by two crystal
directions (``z_lab``, ``x_lab``). Each *defect* frame has its z-axis along a
quantization axis of one defect orientation.

A :class:`DefectFrame` stores the rotation taking crystal-frame vector
components to defect-frame components; its rows are the defect axes written
in crystal coordinates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .spin import MagneticField

_ANGLE_TOL = 1e-9


def _check_rotation(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise ValidationError("rotation must be 3x3")
    if np.abs(r.T @ r - np.eye(3)).max() > 1e-12 or abs(np.linalg.det(r) - 1.0) > 1e-12:
        raise ValidationError("matrix is not a proper rotation")
    return r


def cubic_rotations() -> list[np.ndarray]:
    """The 24 proper rotations of the cube as signed permutation matrices.

    Order is deterministic: permutations in lexicographic order, then sign
    patterns in lexicographic order.
    """
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            m = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                m[row, col] = s
            if np.linalg.det(m) > 0:
                out.append(m)
    return out


CUBIC_ROTATIONS = tuple(cubic_rotations())


def _direction_label(v: np.ndarray) -> str:
    # "[1-1-1]"-style label for lattice-like directions, generic otherwise
    nz = np.abs(v[np.abs(v) > 1e-9])
    ints = v / nz.min()
    if np.allclose(ints, np.round(ints), atol=1e-6) and np.abs(ints).max() < 10:
        return "[" + "".join(str(int(round(c))) for c in ints) + "]"
    return "[" + ",".join(f"{c:.4f}" for c in v) + "]"


@dataclass(frozen=True)
class DefectFrame:
    rotation: np.ndarray
    label: str = ""

    def __post_init__(self):
        rot = _check_rotation(self.rotation)
        rot.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        if not self.label:
            object.__setattr__(self, "label", _direction_label(rot[2]))

    @classmethod
    def from_axes(cls, z_axis, x_hint=None, label: str = "") -> "DefectFrame":
        """Frame with the given z-axis; x is ``x_hint`` orthogonalized against z.

        Without a hint the crystal axis least aligned with z is used.
        """
        z = np.asarray(z_axis, dtype=float)
        z = z / np.linalg.norm(z)
        if x_hint is None:
            x_hint = np.eye(3)[int(np.argmin(np.abs(z)))]
        x = np.asarray(x_hint, dtype=float)
        x = x - (x @ z) * z
        if np.linalg.norm(x) < 1e-9:
            raise ValidationError("x hint is parallel to the z-axis")
        x = x / np.linalg.norm(x)
        y = np.cross(z, x)
        return cls(np.array([x, y, z]), label)

    def __eq__(self, other):
        return isinstance(other, DefectFrame) and np.array_equal(self.rotation, other.rotation)

    def __hash__(self):
        return hash(self.rotation.tobytes())

    @property
    def z_axis(self) -> np.ndarray:
        return self.rotation[2]

    def rotated(self, q: np.ndarray) -> "DefectFrame":
        """Image of this frame under the crystal rotation ``q``."""
        return DefectFrame(self.rotation @ q.T)


def _same_axis(a: np.ndarray, b: np.ndarray) -> bool:
    # antipodal axes are identified
    angle = np.arctan2(np.linalg.norm(np.cross(a, b)), abs(float(a @ b)))
    return angle < _ANGLE_TOL


@dataclass(frozen=True)
class OrientationSet:
    frames: tuple
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValidationError("orientation set must not be empty")
        for i, a in enumerate(frames):
            for b in frames[:i]:
                if _same_axis(a.z_axis, b.z_axis):
                    raise ValidationError(f"duplicate quantization axis {a.label}")
        w = np.ones(len(frames)) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (len(frames),) or np.any(w < 0) or w.sum() <= 0:
            raise ValidationError("weights must be nonnegative, one per frame, not all zero")
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.frames)

    def __eq__(self, other):
        return (isinstance(other, OrientationSet) and self.frames == other.frames
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.frames, self.weights.tobytes()))

    @property
    def z_axes(self) -> np.ndarray:
        return np.array([f.z_axis for f in self.frames])


def _dedup(frames) -> list[DefectFrame]:
    kept: list[DefectFrame] = []
    for f in frames:
        if not any(_same_axis(f.z_axis, k.z_axis) for k in kept):
            kept.append(f)
    return kept


def orbit(seed: DefectFrame, group=CUBIC_ROTATIONS) -> list[DefectFrame]:
    """Images of ``seed`` under ``group``, one frame per quantization axis."""
    return _dedup(seed.rotated(q) for q in group)


def _symmetric_family(seed: DefectFrame, axes) -> list[DefectFrame]:
    # Frames for every axis in ``axes``, such that frames related by a
    # rotation about the seed axis are exact images of each other. Then a
    # field along the seed axis sees symmetry-equivalent tilted frames as
    # identical, independent of the transverse ZFS term.
    z0 = seed.z_axis
    stab = [q for q in CUBIC_ROTATIONS if np.allclose(q @ z0, z0, atol=1e-12)]
    kept = [seed]
    for a in axes:
        a = np.asarray(a, float) / np.linalg.norm(a)
        if any(_same_axis(a, k.z_axis) for k in kept):
            continue
        q = next(q for q in CUBIC_ROTATIONS if _same_axis(q @ z0, a))
        base = seed.rotated(q)
        for h in stab:
            f = base.rotated(h)
            if not any(_same_axis(f.z_axis, k.z_axis) for k in kept):
                kept.append(f)
    return kept


_SEEDS = {
    "axes100": ((0, 0, 1), (1, 0, 0)),
    "axes111": ((1, 1, 1), (1, 1, -2)),
    "axes110": ((1, 1, 0), (0, 0, 1)),
}

_AXES = {
    "axes100": [(1, 0, 0), (0, 1, 0), (0, 0, 1)],
    "axes111": [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)],
    "axes110": [(1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1), (0, 1, 1), (0, 1, -1)],
}

PRESETS = ("axes100", "axes111", "axes110", "full_orbit")


def orientation_preset(family: str, seed_frame: DefectFrame | None = None, weights=None) -> OrientationSet:
    """Standard orientation families of a cubic host.

    ``axes100``, ``axes111`` and ``axes110`` give 3, 4 and 6 frames along the
    cube axes, body diagonals and face diagonals. The first frame of each
    family lies along [001], [111] and [110] respectively (or along
    ``seed_frame`` when given), and the remaining frames are arranged so a
    field along that first axis treats all symmetry-equivalent tilted
    frames alike.

    ``full_orbit`` returns the orbit of ``seed_frame`` under the 24 proper
    cubic rotations, deduplicated by quantization axis.
    """
    if family == "full_orbit":
        if seed_frame is None:
            raise ValidationError("full_orbit requires a seed frame")
        frames = orbit(seed_frame)
    elif family in _SEEDS:
        if seed_frame is None:
            seed_frame = DefectFrame.from_axes(*_SEEDS[family])
        elif not any(_same_axis(seed_frame.z_axis, np.asarray(a, float) / np.linalg.norm(a))
                     for a in _AXES[family]):
            raise ValidationError(f"seed axis {seed_frame.label} is not a {family} direction")
        frames = _symmetric_family(seed_frame, _AXES[family])
    else:
        raise ValidationError(f"unknown orientation family {family!r}; expected one of {PRESETS}")
    return OrientationSet(tuple(frames), weights)


@dataclass(frozen=True)
class LabFrameConfig:
    """Lab axes written as crystal directions; ``y_lab = z_lab x x_lab``.

    The default puts the lab z-axis along [110] (sample normal) and the lab
    x-axis along [001].
    """

    z_lab: tuple = (1.0, 1.0, 0.0)
    x_lab: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        z = np.asarray(self.z_lab, float)
        x = np.asarray(self.x_lab, float)
        if z.shape != (3,) or x.shape != (3,) or np.linalg.norm(z) == 0 or np.linalg.norm(x) == 0:
            raise ValidationError("lab axes must be nonzero 3-vectors")
        z, x = z / np.linalg.norm(z), x / np.linalg.norm(x)
        if abs(z @ x) > 1e-9:
            raise ValidationError("z_lab and x_lab must be perpendicular")
        object.__setattr__(self, "z_lab", tuple(float(c) for c in z))
        object.__setattr__(self, "x_lab", tuple(float(c) for c in x))

    @classmethod
    def identity(cls) -> "LabFrameConfig":
        return cls((0.0, 0.0, 1.0), (1.0, 0.0, 0.0))

    @property
    def y_lab(self) -> tuple:
        return tuple(float(c) for c in np.cross(self.z_lab, self.x_lab))

    @property
    def matrix(self) -> np.ndarray:
        """Rotation taking crystal components to lab components."""
        return np.array([self.x_lab, self.y_lab, self.z_lab])

    def axis(self, name: str) -> np.ndarray:
        """Lab axis ``x``, ``y`` or ``z`` expressed in lab coordinates."""
        try:
            return np.eye(3)["xyz".index(name)]
        except ValueError:
            raise ValidationError(f"unknown lab axis {name!r}") from None

    def crystal_to_lab(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, float)


def lab_to_defect_matrix(lab: LabFrameConfig, frame: DefectFrame) -> np.ndarray:
    return frame.rotation @ lab.matrix.T


def to_defect_frame(b: MagneticField, lab: LabFrameConfig, frame: DefectFrame) -> MagneticField:
    """Express a lab-frame field in the given defect frame."""
    b.require("lab")
    return MagneticField.from_vector(lab_to_defect_matrix(lab, frame) @ b.vector, "defect")


def to_crystal_frame(b: MagneticField, lab: LabFrameConfig) -> MagneticField:
    b.require("lab")
    return MagneticField.from_vector(lab.matrix.T @ b.vector, "crystal")
