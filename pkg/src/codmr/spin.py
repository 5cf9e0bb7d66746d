"""
Effective spin-1 Hamiltonian of a triplet color center.

All energies are frequencies in MHz (energy divided by Planck's constant),
magnetic fields are in tesla. Matrices are written in the ``m_s`` basis
ordered ``{+1, 0, -1}``.

The zero-field part uses the usual EPR convention

    H/h = D (Sz^2 - 2/3) + E (Sx^2 - Sy^2)

so that at zero field the two allowed lines sit at ``D - E`` and ``D + E``.
The Zeeman part couples the effective spin to the field through the
axial g-tensor ``diag(g_perp, g_perp, g_par)`` of the defect frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import FrameError, ValidationError

#: Bohr magneton over Planck constant, MHz/T (CODATA 2018).
MU_B_MHZ_PER_T = 13996.245
#: Free-electron g-factor.
G_FREE = 2.0023

FRAMES = ("lab", "crystal", "defect")

_HERMITIAN_TOL = 1e-10


class SpinOperators(NamedTuple):
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    splus: np.ndarray
    sminus: np.ndarray


def spin1_operators() -> SpinOperators:
    """Return the S=1 matrices in the basis ``{+1, 0, -1}``."""
    r2 = np.sqrt(2.0)
    splus = np.array([[0, r2, 0], [0, 0, r2], [0, 0, 0]], dtype=complex)
    sminus = splus.conj().T
    sx = (splus + sminus) / 2
    sy = (splus - sminus) / 2j
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return SpinOperators(sx, sy, sz, splus, sminus)


_S = spin1_operators()
_SVEC = np.stack([_S.sx, _S.sy, _S.sz])


@dataclass(frozen=True)
class ZfsParams:
    """Zero-field splitting constants in MHz."""

    d_mhz: float = 987.0
    e_mhz: float = 22.0

    def __post_init__(self):
        if not (np.isfinite(self.d_mhz) and np.isfinite(self.e_mhz)):
            raise ValidationError("ZFS parameters must be finite")

    @property
    def is_canonical(self) -> bool:
        return 0.0 <= self.e_mhz <= abs(self.d_mhz) / 3.0 + 1e-12

    def canonical(self) -> "ZfsParams":
        """Relabel the principal axes so that ``0 <= E <= |D|/3``.

        The z-axis becomes the principal axis with the largest absolute
        coupling. For ``D >= 0`` this gives the ``0 <= E <= D/3`` form; a
        negative ``D`` keeps its sign because no relabeling can flip it.
        """
        d, e = self.d_mhz, self.e_mhz
        principal = np.array([-d / 3 + e, -d / 3 - e, 2 * d / 3])
        iz = int(np.argmax(np.abs(principal)))
        rest = np.delete(principal, iz)
        return ZfsParams(1.5 * float(principal[iz]), abs(float(rest[0] - rest[1])) / 2)


@dataclass(frozen=True)
class GTensor:
    """Axial g-tensor ``diag(g_perp, g_perp, g_par)`` in the defect frame."""

    g_perp: float = G_FREE
    g_par: float = G_FREE

    def __post_init__(self):
        if not (self.g_perp > 0 and self.g_par > 0):
            raise ValidationError("g-tensor components must be strictly positive")

    def diag(self) -> np.ndarray:
        return np.array([self.g_perp, self.g_perp, self.g_par])


@dataclass(frozen=True)
class MagneticField:
    """A field vector in tesla, tagged with the frame it is expressed in."""

    bx: float
    by: float
    bz: float
    frame: str = "lab"

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValidationError(f"unknown frame {self.frame!r}; expected one of {FRAMES}")
        if not np.all(np.isfinite(self.vector)):
            raise ValidationError("magnetic field components must be finite")

    @classmethod
    def from_vector(cls, v, frame: str = "lab") -> "MagneticField":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]), frame)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.bx, self.by, self.bz], dtype=float)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def require(self, frame: str) -> None:
        if self.frame != frame:
            raise FrameError(f"field is tagged {self.frame!r}, expected {frame!r}")


def assemble_hamiltonian(zfs: ZfsParams, g: GTensor, b: MagneticField) -> np.ndarray:
    """Build the 3x3 Hamiltonian (MHz) for a field given in the defect frame."""
    b.require("defect")
    s = _S
    h = zfs.d_mhz * (s.sz @ s.sz - (2.0 / 3.0) * np.eye(3))
    h = h + zfs.e_mhz * (s.sx @ s.sx - s.sy @ s.sy)
    gb = MU_B_MHZ_PER_T * g.diag() * b.vector
    h = h + np.tensordot(gb, _SVEC, axes=1)
    # exact Hermitian symmetrization; removes rounding asymmetry
    return 0.5 * (h + h.conj().T)


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues (MHz) with eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    # Largest-magnitude component made real-positive; on ties the lowest index wins.
    mag = np.abs(vecs)
    top = mag.max(axis=-2, keepdims=True)
    first = np.argmax(mag >= top - 1e-12, axis=-2)
    pivot = np.take_along_axis(vecs, first[..., None, :], axis=-2)
    phase = pivot / np.abs(pivot)
    return vecs / phase


def _check_hermitian(h: np.ndarray) -> None:
    dev = np.abs(h - np.conj(np.swapaxes(h, -1, -2))).max(axis=(-2, -1))
    scale = np.maximum(1.0, np.abs(h).max(axis=(-2, -1)))
    if np.any(dev > _HERMITIAN_TOL * scale):
        raise ValidationError("matrix is not Hermitian within 1e-10")


def eigensystem(h) -> EigenSystem:
    """Diagonalize a Hermitian 3x3 matrix.

    Parameters
    ----------
    h : array_like, shape (3, 3) or (..., 3, 3)
        Hermitian matrix or a stack of them.

    Returns
    -------
    EigenSystem
        Eigenvalues ascending along the last axis; ``eigenvectors[..., :, i]``
        belongs to ``eigenvalues[..., i]``. Each eigenvector is normalized and
        its largest-magnitude component is real and positive, so repeated
        calls give bit-identical results.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape[-2:] != (3, 3):
        raise ValidationError(f"expected 3x3 matrices, got shape {h.shape}")
    _check_hermitian(h)
    w, v = np.linalg.eigh(0.5 * (h + np.conj(np.swapaxes(h, -1, -2))))
    return EigenSystem(w, _fix_phase(v))


@dataclass(frozen=True)
class Transition:
    f_mhz: float
    amplitude: float
    from_index: int
    to_index: int


_PAIRS = ((0, 1), (0, 2), (1, 2))


def dipole_amplitudes(vecs: np.ndarray, drive_dir=None) -> np.ndarray:
    """Squared magnetic-dipole matrix elements for the three level pairs.

    ``drive_dir=None`` averages over drive polarizations, i.e. returns
    ``(1/3) sum_a |<j|S_a|i>|^2``, which is rotation invariant.
    """
    # elements[a, j, i] = <v_j| S_a |v_i>
    elements = np.einsum("kj,akl,li->aji", vecs.conj(), _SVEC, vecs)
    if drive_dir is None:
        full = (np.abs(elements) ** 2).sum(axis=0) / 3.0
    else:
        full = np.abs(np.tensordot(drive_dir, elements, axes=1)) ** 2
    return np.array([full[j, i] for i, j in _PAIRS])


def _unit(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValidationError(f"{what} must be a finite 3-vector")
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValidationError(f"{what} must have unit norm (got {np.linalg.norm(v):.6g})")
    return v


def transitions(es: EigenSystem, drive_dir=None) -> list[Transition]:
    """Return the three transitions of an eigensystem, sorted by frequency.

    Parameters
    ----------
    es : EigenSystem
    drive_dir : array_like of 3 floats, optional
        Unit RF drive direction in the defect frame. ``None`` selects the
        polarization-averaged amplitude.

    Equal frequencies keep the level-pair order (0,1), (0,2), (1,2).
    """
    if drive_dir is not None:
        drive_dir = _unit(drive_dir, "drive direction")
    amps = dipole_amplitudes(es.eigenvectors, drive_dir)
    lam = es.eigenvalues
    out = [
        Transition(float(lam[j] - lam[i]), float(amps[k]), i, j)
        for k, (i, j) in enumerate(_PAIRS)
    ]
    return sorted(out, key=lambda t: t.f_mhz)


def zero_like_index(es: EigenSystem) -> int:
    """Index of the eigenstate with the largest ``m_s = 0`` weight."""
    return int(np.argmax(np.abs(es.eigenvectors[1, :]) ** 2))
