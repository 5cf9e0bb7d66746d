"""
Peak extraction and damped least-squares fitting of spectra.

Detection is cheap: local minima with a prominence threshold, refined by a
three-point parabola. Full line-shape refinement happens in
:func:`fit_params`, a bounded Levenberg-Marquardt loop over the forward
model ``parameters -> ensemble lines -> synthesized spectra``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .crystal import LabFrameConfig, OrientationSet, orientation_preset
from .errors import ValidationError
from .spectrum import (
    FrequencyGrid,
    LineShape,
    OdmrSpectrum,
    ensemble_resonances,
    synthesize_spectrum,
)
from .spin import GTensor, MagneticField, ZfsParams

# -- peaks ---------------------------------------------------------------


@dataclass(frozen=True)
class Peak:
    f_mhz: float
    depth_pct: float
    fwhm_mhz: float


def detect_peaks(s: OdmrSpectrum, min_prominence_pct: float = 0.0,
                 merge_tol_mhz: float = 0.0) -> list[Peak]:
    """Find resonance dips in a spectrum.

    Parameters
    ----------
    s : OdmrSpectrum
    min_prominence_pct : float
        Minimum dip prominence. Zero still rejects flat regions.
    merge_tol_mhz : float
        Dips closer than this are merged into the deeper one.

    Returns
    -------
    list of Peak
        Ascending in frequency. Centers and depths come from a parabola
        through the three bins around each minimum.
    """
    y = np.asarray(s.contrast_pct, float)
    f = s.frequencies
    step = s.grid.step_mhz
    idx, _ = find_peaks(-y, prominence=max(min_prominence_pct, 1e-300))
    if idx.size == 0:
        return []
    widths = peak_widths(-y, idx, rel_height=0.5)[0] * step
    peaks = []
    for i, w in zip(idx, widths):
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2.0 * y1 + y2
        off = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        peaks.append(Peak(float(f[i] + off * step), float(y1 - 0.25 * (y0 - y2) * off), float(w)))
    merged: list[Peak] = []
    for pk in peaks:
        if merged and pk.f_mhz - merged[-1].f_mhz < merge_tol_mhz:
            if pk.depth_pct < merged[-1].depth_pct:
                merged[-1] = pk
            continue
        merged.append(pk)
    return merged


def zfs_from_two_peaks(f1_mhz: float, f2_mhz: float) -> ZfsParams:
    """Zero-field D and E from the two allowed lines at ``D - E`` and ``D + E``."""
    if not (f1_mhz > 0 and f2_mhz > 0):
        raise ValidationError("peak frequencies must be positive")
    return ZfsParams((f1_mhz + f2_mhz) / 2.0, abs(f2_mhz - f1_mhz) / 2.0)


# -- generic bounded Levenberg-Marquardt ---------------------------------


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    initial_cost: float
    jacobian: np.ndarray
    n_iter: int
    converged: bool
    singular: bool = False
    history: list = field(default_factory=list)
    message: str = ""


def jacobian_fd(fun: Callable, x: np.ndarray, lo=None, hi=None, rel_step: float = 1e-6,
                abs_step: float = 1e-9, f0: np.ndarray | None = None) -> np.ndarray:
    """Central-difference Jacobian; one-sided second order at bounds."""
    x = np.asarray(x, float)
    n = x.size
    lo = np.full(n, -np.inf) if lo is None else np.asarray(lo, float)
    hi = np.full(n, np.inf) if hi is None else np.asarray(hi, float)
    cols = []
    for i in range(n):
        h = max(rel_step * abs(x[i]), abs_step)
        e = np.zeros(n)
        e[i] = h
        if x[i] + h <= hi[i] and x[i] - h >= lo[i]:
            cols.append((fun(x + e) - fun(x - e)) / (2 * h))
            continue
        base = fun(x) if f0 is None else f0
        sgn = -1.0 if x[i] + h > hi[i] else 1.0
        # (-3 f(x) + 4 f(x+h) - f(x+2h)) / 2h, mirrored when stepping down
        cols.append(sgn * (-3 * base + 4 * fun(x + sgn * e) - fun(x + 2 * sgn * e)) / (2 * h))
    return np.column_stack(cols)


def _cost(r: np.ndarray) -> float:
    return math.fsum(float(v) * float(v) for v in r)


def levenberg_marquardt(fun: Callable, x0, lo=None, hi=None, max_iter: int = 200,
                        lam0: float = 1e-3, ftol: float = 1e-10, xtol: float = 1e-12,
                        rel_step: float = 1e-6, abs_step: float = 1e-9) -> LMResult:
    """Minimize ``sum(fun(x)**2)`` within box bounds.

    Damping is multiplied by 10 after a rejected step and divided by 10 after
    an accepted one; the damping term is Marquardt-scaled by ``diag(J^T J)``.
    Parameters sitting on a bound with the descent direction pointing out of
    the box are frozen for that iteration, then every trial point is
    projected back into the box. Stops when the relative cost decrease of an
    accepted step falls below ``ftol`` or the step falls below ``xtol``
    relative to ``|x|``.
    """
    x = np.asarray(x0, float).copy()
    n = x.size
    lo = np.full(n, -np.inf) if lo is None else np.asarray(lo, float)
    hi = np.full(n, np.inf) if hi is None else np.asarray(hi, float)
    if np.any(lo > hi):
        raise ValidationError("lower bounds exceed upper bounds")
    x = np.clip(x, lo, hi)
    r = fun(x)
    cost = _cost(r)
    initial = cost
    history = [cost]
    lam = lam0
    singular = False
    converged = False
    message = "iteration cap reached"
    jac = None
    it = 0
    for it in range(1, max_iter + 1):
        jac = jacobian_fd(fun, x, lo, hi, rel_step, abs_step, f0=r)
        grad = jac.T @ r
        at_lo = (x <= lo) & (grad > 0)
        at_hi = (x >= hi) & (grad < 0)
        free = ~(at_lo | at_hi)
        if not free.any():
            converged, message = True, "all parameters pinned at bounds"
            break
        jf = jac[:, free]
        a = jf.T @ jf
        gf = grad[free]
        d = np.diag(a).copy()
        d[d <= 0] = max(float(d.max()), 1.0) * 1e-12
        accepted = False
        while lam <= 1e16:
            mat = a + lam * np.diag(d)
            try:
                step_f = np.linalg.solve(mat, -gf)
                if not np.all(np.isfinite(step_f)):
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                singular = True
                step_f = np.linalg.lstsq(mat, -gf, rcond=None)[0]
            step = np.zeros(n)
            step[free] = step_f
            x_new = np.clip(x + step, lo, hi)
            dx = x_new - x
            if np.linalg.norm(dx) <= xtol * max(np.linalg.norm(x), 1.0):
                converged, message = True, "step below tolerance"
                break
            r_new = fun(x_new)
            cost_new = _cost(r_new)
            if cost_new < cost:
                rel = (cost - cost_new) / cost if cost > 0 else 0.0
                x, r, cost = x_new, r_new, cost_new
                history.append(cost)
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                if rel < ftol:
                    converged, message = True, "relative cost change below tolerance"
                break
            lam *= 10.0
        if converged:
            break
        if not accepted:
            converged, message = True, "no further decrease possible (damping limit)"
            break
        if cost == 0.0:
            converged, message = True, "exact fit"
            break
    if jac is None:
        jac = jacobian_fd(fun, x, lo, hi, rel_step, abs_step, f0=r)
    if singular:
        warnings.warn("singular normal equations; used a damped pseudo-solution", RuntimeWarning)
    return LMResult(x, cost, initial, jac, it, converged, singular, history, message)


# -- spectral fit problem ------------------------------------------------

FIT_PARAMETERS = ("d_mhz", "e_mhz", "g_perp", "g_par", "depth_pct", "fwhm_mhz", "offset_pct")


@dataclass(frozen=True)
class FitParam:
    name: str
    init: float
    lo: float = -np.inf
    hi: float = np.inf

    def __post_init__(self):
        if self.name not in FIT_PARAMETERS:
            raise ValidationError(f"unknown fit parameter {self.name!r}; expected one of {FIT_PARAMETERS}")
        if not self.lo <= self.init <= self.hi:
            raise ValidationError(f"{self.name}: need lo <= init <= hi")


@dataclass(frozen=True)
class ModelConfig:
    """Everything the forward model needs that is not being fitted."""

    zfs: ZfsParams = ZfsParams()
    g: GTensor = GTensor()
    orientations: OrientationSet = field(default_factory=lambda: orientation_preset("axes111"))
    lab: LabFrameConfig = LabFrameConfig()
    shape: LineShape = LineShape()
    depth_pct: float = 1.0
    offset_pct: float = 0.0
    drive_dir_lab: tuple | None = None

    def values(self) -> dict:
        return {
            "d_mhz": self.zfs.d_mhz, "e_mhz": self.zfs.e_mhz,
            "g_perp": self.g.g_perp, "g_par": self.g.g_par,
            "depth_pct": self.depth_pct, "fwhm_mhz": self.shape.fwhm_mhz,
            "offset_pct": self.offset_pct,
        }

    def with_values(self, v: dict) -> "ModelConfig":
        return replace(
            self,
            zfs=ZfsParams(v["d_mhz"], v["e_mhz"]),
            g=GTensor(v["g_perp"], v["g_par"]),
            shape=LineShape(self.shape.kind, v["fwhm_mhz"]),
            depth_pct=v["depth_pct"],
            offset_pct=v["offset_pct"],
        )


def model_spectrum(cfg: ModelConfig, b_lab: MagneticField, grid: FrequencyGrid) -> OdmrSpectrum:
    lines = ensemble_resonances(cfg.zfs, cfg.g, cfg.orientations, b_lab, cfg.lab, cfg.drive_dir_lab)
    return synthesize_spectrum(lines, cfg.shape, grid, cfg.depth_pct, cfg.offset_pct)


@dataclass(frozen=True)
class FitProblem:
    params: tuple
    datasets: tuple
    config: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        params = tuple(self.params)
        names = [p.name for p in params]
        if not params or len(set(names)) != len(names):
            raise ValidationError("need at least one fit parameter, names unique")
        datasets = tuple(self.datasets)
        if not datasets:
            raise ValidationError("need at least one dataset")
        for b, s in datasets:
            b.require("lab")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "datasets", datasets)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def config_at(self, x) -> ModelConfig:
        v = self.config.values()
        v.update(zip(self.names, (float(c) for c in x)))
        return self.config.with_values(v)

    def residuals(self, x) -> np.ndarray:
        cfg = self.config_at(x)
        parts = [model_spectrum(cfg, b, s.grid).total_pct - s.contrast_pct for b, s in self.datasets]
        return np.concatenate(parts)

    def jacobian(self, x) -> np.ndarray:
        lo = [p.lo for p in self.params]
        hi = [p.hi for p in self.params]
        return jacobian_fd(self.residuals, np.asarray(x, float), lo, hi)


@dataclass
class FitResult:
    params: dict
    std_errors: dict
    rss: float
    initial_rss: float
    n_iter: int
    converged: bool
    singular: bool = False
    message: str = ""
    history: list = field(default_factory=list)

    def to_json(self, path=None) -> str:
        doc = {
            "parameters": self.params,
            "std_errors": {k: (None if not np.isfinite(v) else v) for k, v in self.std_errors.items()},
            "std_errors_approximate": True,
            "residual_sum_squares": self.rss,
            "initial_residual_sum_squares": self.initial_rss,
            "iterations": self.n_iter,
            "converged": self.converged,
            "singular_warning": self.singular,
            "message": self.message,
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def fit_params(problem: FitProblem, max_iter: int = 200) -> FitResult:
    """Fit the free model parameters of ``problem`` to its datasets.

    Standard errors come from the Gauss-Newton covariance
    ``s^2 (J^T J)^-1`` at the solution and are approximate.
    """
    lo = np.array([p.lo for p in problem.params])
    hi = np.array([p.hi for p in problem.params])
    x0 = np.array([p.init for p in problem.params])
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        res = levenberg_marquardt(problem.residuals, x0, lo, hi, max_iter=max_iter)
    m, n = res.jacobian.shape
    dof = max(m - n, 1)
    try:
        cov = np.linalg.inv(res.jacobian.T @ res.jacobian) * (res.cost / dof)
        errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        errs = np.full(n, np.nan)
    return FitResult(
        params={k: float(v) for k, v in zip(problem.names, res.x)},
        std_errors={k: float(e) for k, e in zip(problem.names, errs)},
        rss=res.cost,
        initial_rss=res.initial_cost,
        n_iter=res.n_iter,
        converged=res.converged,
        singular=res.singular,
        message=res.message,
        history=res.history,
    )


def synthetic_datasets(cfg: ModelConfig, fields_lab: Sequence[MagneticField], grid: FrequencyGrid,
                       noise_pct: float = 0.0, seed: int | None = None) -> tuple:
    """Forward-model spectra for several fields, with optional Gaussian noise."""
    rng = np.random.default_rng(seed)
    out = []
    for b in fields_lab:
        s = model_spectrum(cfg, b, grid)
        y = s.total_pct
        if noise_pct > 0:
            y = y + rng.normal(0.0, noise_pct, size=y.shape)
        out.append((b, OdmrSpectrum(grid, y)))
    return tuple(out)
