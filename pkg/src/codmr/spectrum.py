"""
Ensemble resonance lists, synthetic ODMR spectra and field sweeps.

Contrast values are in percent and follow the measured sign convention:
resonant dips are negative. The RF-power dependent cyclotron-resonance
(ODCR) background is kept as a separate, nonnegative offset.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .crystal import LabFrameConfig, OrientationSet, lab_to_defect_matrix
from .errors import ValidationError
from .spin import (
    MU_B_MHZ_PER_T,
    GTensor,
    MagneticField,
    ZfsParams,
    assemble_hamiltonian,
    eigensystem,
    transitions,
    zero_like_index,
)

AMPLITUDE_FLOOR = 1e-12
LINE_KINDS = ("lorentzian", "gaussian")


@dataclass(frozen=True)
class LineShape:
    kind: str = "lorentzian"
    fwhm_mhz: float = 5.0

    def __post_init__(self):
        if self.kind not in LINE_KINDS:
            raise ValidationError(f"unknown line shape {self.kind!r}")
        if not self.fwhm_mhz > 0:
            raise ValidationError("fwhm_mhz must be positive")

    def __call__(self, df):
        """Height-normalized profile: 1 at the center, 1/2 at +-fwhm/2."""
        x = 2.0 * np.asarray(df, float) / self.fwhm_mhz
        if self.kind == "lorentzian":
            return 1.0 / (1.0 + x * x)
        return np.exp(-np.log(2.0) * x * x)


@dataclass(frozen=True)
class FrequencyGrid:
    start_mhz: float
    stop_mhz: float
    step_mhz: float

    def __post_init__(self):
        if not (np.isfinite(self.start_mhz) and np.isfinite(self.stop_mhz)):
            raise ValidationError("grid bounds must be finite")
        if not self.start_mhz < self.stop_mhz:
            raise ValidationError("grid start must be below stop (empty grid)")
        if not self.step_mhz > 0:
            raise ValidationError("grid step must be positive")

    @property
    def n_bins(self) -> int:
        # small slack so that e.g. (1100-900)/0.5 lands on 400, not 399.999
        return int(np.floor((self.stop_mhz - self.start_mhz) / self.step_mhz + 1e-9)) + 1

    @property
    def frequencies(self) -> np.ndarray:
        return self.start_mhz + self.step_mhz * np.arange(self.n_bins)

    def shifted(self, df_mhz: float) -> "FrequencyGrid":
        return FrequencyGrid(self.start_mhz + df_mhz, self.stop_mhz + df_mhz, self.step_mhz)


@dataclass(frozen=True)
class ResonanceLine:
    f_mhz: float
    amplitude: float
    orientation_index: int
    transition_index: int
    weight: float = 1.0
    #: True if one of the two levels is the m_s=0-like eigenstate
    involves_zero: bool = True


@dataclass(frozen=True)
class OdmrSpectrum:
    grid: FrequencyGrid
    contrast_pct: np.ndarray
    background_pct: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.contrast_pct, float)
        if c.shape != (self.grid.n_bins,):
            raise ValidationError(f"expected {self.grid.n_bins} contrast values, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("contrast values must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "contrast_pct", c)

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies

    @property
    def total_pct(self) -> np.ndarray:
        """ODMR contrast plus the ODCR offset."""
        return self.contrast_pct + self.background_pct


@dataclass(frozen=True)
class OdcrModel:
    b_max_pct: float = 0.0
    p_half_mw: float = 100.0
    offset_pct: float = 0.0

    def __post_init__(self):
        if self.b_max_pct < 0:
            raise ValidationError("b_max_pct must be nonnegative")
        if not self.p_half_mw > 0:
            raise ValidationError("p_half_mw must be positive")


def odcr_background(p_rf_mw: float, model: OdcrModel) -> float:
    """Saturating RF-power dependent background, in percent."""
    if p_rf_mw < 0:
        raise ValidationError("RF power must be nonnegative")
    if np.isinf(p_rf_mw):
        return model.offset_pct + model.b_max_pct
    return model.offset_pct + model.b_max_pct * p_rf_mw / (p_rf_mw + model.p_half_mw)


def _unit_or_none(v):
    if v is None:
        return None
    v = np.asarray(v, float)
    n = np.linalg.norm(v)
    if v.shape != (3,) or abs(n - 1.0) > 1e-9:
        raise ValidationError("drive direction must be a unit 3-vector")
    return v


def ensemble_resonances(
    zfs: ZfsParams,
    g: GTensor,
    orientations: OrientationSet,
    b_lab: MagneticField,
    lab: LabFrameConfig,
    drive_dir_lab=None,
) -> list[ResonanceLine]:
    """All resonance lines of an orientation ensemble, sorted by frequency.

    Each frame contributes its three transitions with the frame weight.
    ``drive_dir_lab=None`` uses polarization-averaged amplitudes.
    """
    b_lab.require("lab")
    drive = _unit_or_none(drive_dir_lab)
    lines = []
    for k, (frame, w) in enumerate(zip(orientations.frames, orientations.weights)):
        rot = lab_to_defect_matrix(lab, frame)
        b_def = MagneticField.from_vector(rot @ b_lab.vector, "defect")
        es = eigensystem(assemble_hamiltonian(zfs, g, b_def))
        n_def = None if drive is None else rot @ drive
        if n_def is not None:
            n_def = n_def / np.linalg.norm(n_def)
        iz = zero_like_index(es)
        for t_idx, t in enumerate(transitions(es, n_def)):
            if t.amplitude * w < AMPLITUDE_FLOOR:
                continue
            lines.append(
                ResonanceLine(
                    t.f_mhz, t.amplitude, k, t_idx, float(w),
                    involves_zero=iz in (t.from_index, t.to_index),
                )
            )
    lines.sort(key=lambda ln: (ln.f_mhz, ln.orientation_index, ln.transition_index))
    return lines


def cluster_frequencies(freqs, tol_mhz: float = 2.0) -> list[float]:
    """Single-linkage clusters of sorted frequencies; returns cluster means."""
    f = np.sort(np.asarray(freqs, float))
    if f.size == 0:
        return []
    groups = np.split(f, np.nonzero(np.diff(f) > tol_mhz)[0] + 1)
    return [float(gr.mean()) for gr in groups]


def count_clusters(lines, tol_mhz: float = 2.0, zero_branch_only: bool = True) -> int:
    """Number of distinct peaks in a line list.

    By default only the transitions that involve the ``m_s=0``-like level
    are counted; these are the lines an ODMR window around ``D`` shows.
    """
    sel = [ln.f_mhz for ln in lines if ln.involves_zero or not zero_branch_only]
    return len(cluster_frequencies(sel, tol_mhz))


def synthesize_spectrum(lines, shape: LineShape, grid: FrequencyGrid, depth_scale_pct: float = 1.0,
                        background_pct: float = 0.0) -> OdmrSpectrum:
    """Superpose line profiles into a (negative) contrast spectrum."""
    if depth_scale_pct < 0:
        raise ValidationError("depth_scale_pct must be nonnegative")
    f = grid.frequencies
    total = np.zeros_like(f)
    for ln in lines:
        total += ln.amplitude * ln.weight * shape(f - ln.f_mhz)
    # 0.0 - x keeps exact zeros positive-signed for byte-stable output
    return OdmrSpectrum(grid, 0.0 - depth_scale_pct * total, background_pct)


@dataclass(frozen=True)
class FieldSweep:
    direction: np.ndarray
    magnitudes_mt: tuple
    spectra: tuple = field(repr=False)
    lines: tuple = field(default=(), repr=False)

    def b_lab(self, i: int) -> MagneticField:
        return MagneticField.from_vector(self.direction * self.magnitudes_mt[i] * 1e-3, "lab")


def field_sweep(
    zfs: ZfsParams,
    g: GTensor,
    orientations: OrientationSet,
    lab: LabFrameConfig,
    direction,
    magnitudes_mt,
    shape: LineShape = LineShape(),
    grid: FrequencyGrid = FrequencyGrid(600.0, 1400.0, 0.5),
    depth_scale_pct: float = 1.0,
    drive_dir_lab=None,
    workers: int = 1,
) -> FieldSweep:
    """One synthesized spectrum per field magnitude along a lab direction.

    Magnitudes are in mT and must be strictly ascending. With ``workers > 1``
    magnitudes are evaluated on a thread pool; output order always follows
    the input order.
    """
    direction = np.asarray(direction, float)
    if direction.shape != (3,) or abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValidationError("sweep direction must be a unit 3-vector")
    mags = tuple(float(m) for m in magnitudes_mt)
    if not mags:
        raise ValidationError("field sweep needs at least one magnitude")
    if any(b <= a for a, b in zip(mags, mags[1:])):
        raise ValidationError("magnitudes must be strictly ascending")

    def one(m):
        b = MagneticField.from_vector(direction * m * 1e-3, "lab")
        lines = ensemble_resonances(zfs, g, orientations, b, lab, drive_dir_lab)
        return lines, synthesize_spectrum(lines, shape, grid, depth_scale_pct)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, mags))
    else:
        results = [one(m) for m in mags]
    return FieldSweep(direction, mags, tuple(r[1] for r in results), tuple(r[0] for r in results))


def zeeman_step_bound(g: GTensor, delta_b_t: float) -> float:
    """Largest eigenvalue shift (MHz) a field change of ``delta_b_t`` can cause."""
    return max(g.g_perp, g.g_par) * MU_B_MHZ_PER_T * abs(delta_b_t)


# -- serialization -------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def spectrum_to_csv(s: OdmrSpectrum, path=None, total: bool = False) -> str:
    vals = s.total_pct if total else s.contrast_pct
    rows = ["freq_mhz,contrast_pct"]
    rows += [f"{_fmt(f)},{_fmt(c)}" for f, c in zip(s.frequencies, vals)]
    text = "\n".join(rows) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def grid_to_dict(grid: FrequencyGrid) -> dict:
    return {"start_mhz": grid.start_mhz, "stop_mhz": grid.stop_mhz, "step_mhz": grid.step_mhz,
            "n_bins": grid.n_bins}


def spectrum_to_json(s: OdmrSpectrum, path=None) -> str:
    doc = {
        "grid": grid_to_dict(s.grid),
        "background_pct": s.background_pct,
        "contrast_pct": [float(c) for c in s.contrast_pct],
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def spectrum_from_json(text: str) -> OdmrSpectrum:
    doc = json.loads(text)
    gr = doc["grid"]
    grid = FrequencyGrid(gr["start_mhz"], gr["stop_mhz"], gr["step_mhz"])
    return OdmrSpectrum(grid, np.array(doc["contrast_pct"], float), doc.get("background_pct", 0.0))


def read_spectrum_csv(path_or_text, step_tol: float = 1e-6) -> OdmrSpectrum:
    """Read a two-column ``freq_mhz, contrast_pct`` CSV (header optional).

    The frequency column must be uniformly spaced.
    """
    text = str(path_or_text)
    if "\n" not in text:
        text = Path(text).read_text()
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        raw = raw.strip()
        if not raw:
            continue
        parts = [p.strip() for p in raw.split(",")]
        try:
            f, c = float(parts[0]), float(parts[1])
        except (ValueError, IndexError):
            if not rows and lineno == 1:
                continue  # header row
            raise ValidationError(f"line {lineno}: expected two numeric columns") from None
        rows.append((f, c))
    if len(rows) < 2:
        raise ValidationError("spectrum CSV needs at least two rows")
    arr = np.array(rows)
    steps = np.diff(arr[:, 0])
    step = float(steps.mean())
    if step <= 0 or np.abs(steps - step).max() > step_tol * max(1.0, abs(step)) + 1e-9:
        raise ValidationError("frequency column must be ascending and uniformly spaced")
    grid = FrequencyGrid(float(arr[0, 0]), float(arr[-1, 0]), step)
    if grid.n_bins != len(arr):
        grid = FrequencyGrid(float(arr[0, 0]), float(arr[0, 0]) + step * (len(arr) - 1) + step * 1e-6, step)
    return OdmrSpectrum(grid, arr[:, 1])


def write_field_sweep(sweep: FieldSweep, out_dir) -> dict:
    """Write one CSV per magnitude plus ``index.json``; returns the index."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (m, s) in enumerate(zip(sweep.magnitudes_mt, sweep.spectra)):
        name = f"spectrum_{i:03d}.csv"
        spectrum_to_csv(s, out / name)
        entries.append({
            "file": name,
            "magnitude_mt": m,
            "b_lab_t": [float(c) for c in sweep.b_lab(i).vector],
        })
    index = {
        "direction": [float(c) for c in sweep.direction],
        "grid": grid_to_dict(sweep.spectra[0].grid),
        "spectra": entries,
    }
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return index
