"""
Six-level population model of optically pumped spin shelving.

Levels, in vector order::

    G   singlet ground state
    C1  upper singlet excited state
    C0  lowest singlet excited state (emits the zero-phonon line)
    T0  triplet m_s = 0
    Tp  triplet m_s = +1
    Tm  triplet m_s = -1

The laser pumps G into C0 (and a fraction into C1). C0 and C1 decay
radiatively to G, C1 also relaxes into C0. A small intersystem-crossing
rate feeds T0 only (spin selection rule). T0 decays to G faster than the
T+- sublevels, so an RF field that mixes T0 with T+- shelves population
in the long-lived sublevels and dims the luminescence.

RF driving is treated as an incoherent rate ``W``: modulation (22 Hz) and
triplet lifetimes (ms) are far slower than any coherent spin dynamics.
Populations obey ``dn/dt = M n`` with a generator ``M`` whose columns sum
to zero.

All rates are in 1/s. Lifetime defaults take the reported lower bounds
as values: 1.4 ms for T0, 10 ms for T+-, 30 us for radiative decay.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import DegenerateModelError, StiffnessError, ValidationError

LEVELS = ("G", "C1", "C0", "T0", "Tp", "Tm")
G, C1, C0, T0, TP, TM = range(6)

#: Boltzmann constant in meV/K.
K_B_MEV = 8.617333262e-2

RF_TARGETS = ("plus", "minus", "both")
CHANNELS = ("c0", "c1", "both")


@dataclass(frozen=True)
class RfCoupling:
    """Spin-resonance lines through which RF mixes T0 with T+ and T-."""

    f_plus_mhz: float = 1009.0
    f_minus_mhz: float = 965.0
    fwhm_mhz: float = 5.0
    #: weak-drive default: linear in RF power well past 1 W
    w_max: float = 0.2
    target: str = "both"

    def __post_init__(self):
        if self.target not in RF_TARGETS:
            raise ValidationError(f"rf target must be one of {RF_TARGETS}")
        if not self.fwhm_mhz > 0:
            raise ValidationError("rf fwhm_mhz must be positive")
        if self.w_max < 0:
            raise ValidationError("rf w_max must be nonnegative")


@dataclass(frozen=True)
class RateParams:
    k_pump: float = 1.0e4
    pump_branch_c1: float = 0.2
    k_rad0: float = 1 / 30e-6
    k_rad1: float = 1 / 30e-6
    k_10: float = 1 / 10e-6
    k_isc: float = 0.05 / 30e-6
    k_t0: float = 1 / 1.4e-3
    k_t1: float = 1 / 10e-3
    #: thermally activated T0 -> C0 return, off by default
    k_risc: float = 0.0
    rf: RfCoupling = field(default_factory=RfCoupling)
    #: permit T+- to decay faster than T0
    allow_fast_shelving: bool = False

    def __post_init__(self):
        for name in ("k_pump", "k_rad0", "k_rad1", "k_10", "k_isc", "k_t0", "k_t1", "k_risc"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be a nonnegative finite rate (got {v})")
        if not 0.0 <= self.pump_branch_c1 <= 1.0:
            raise ValidationError("pump_branch_c1 must lie in [0, 1]")
        if self.k_t1 > self.k_t0 and not self.allow_fast_shelving:
            raise ValidationError("k_t1 > k_t0 requires allow_fast_shelving=True")


@dataclass(frozen=True)
class RfDrive:
    """Square-wave amplitude-modulated RF drive.

    The peak pumping rate scales linearly with power,
    ``w = rf.w_max * p_rf_mw / p_ref_mw``, clipped at ``w_cap`` if given.
    """

    f_rf_mhz: float
    p_rf_mw: float = 100.0
    mod_freq_hz: float = 22.0
    duty: float = 0.5
    p_ref_mw: float = 100.0
    w_cap: float | None = None

    def __post_init__(self):
        if not self.mod_freq_hz > 0:
            raise ValidationError("mod_freq_hz must be positive")
        if self.p_rf_mw < 0:
            raise ValidationError("p_rf_mw must be nonnegative")
        if not 0 < self.duty < 1:
            raise ValidationError("duty must lie in (0, 1)")
        if not self.p_ref_mw > 0:
            raise ValidationError("p_ref_mw must be positive")

    def peak_rate(self, rf: RfCoupling) -> float:
        w = rf.w_max * self.p_rf_mw / self.p_ref_mw
        return w if self.w_cap is None else min(w, self.w_cap)


def rf_rate(f_rf_mhz: float, f_res_mhz: float, fwhm_mhz: float, w_max: float) -> float:
    """Lorentzian RF pumping rate, ``w_max`` on resonance."""
    x = 2.0 * (f_rf_mhz - f_res_mhz) / fwhm_mhz
    return w_max / (1.0 + x * x)


def rate_matrix(p: RateParams, rf_on: bool = False, f_rf_mhz: float | None = None,
                resonances: dict | None = None, w_max: float | None = None) -> np.ndarray:
    """Generator ``M`` of the population dynamics, ``dn/dt = M n``.

    Parameters
    ----------
    p : RateParams
    rf_on : bool
        Include the RF mixing of T0 with T+-.
    f_rf_mhz : float, optional
        RF frequency; required when ``rf_on``.
    resonances : dict, optional
        ``{"plus": f, "minus": f}`` overriding the resonance frequencies of
        ``p.rf``.
    w_max : float, optional
        Peak RF rate overriding ``p.rf.w_max``.
    """
    m = np.zeros((6, 6))

    def add(src, dst, k):
        m[dst, src] += k
        m[src, src] -= k

    add(G, C0, p.k_pump * (1.0 - p.pump_branch_c1))
    add(G, C1, p.k_pump * p.pump_branch_c1)
    add(C0, G, p.k_rad0)
    add(C1, G, p.k_rad1)
    add(C1, C0, p.k_10)
    add(C0, T0, p.k_isc)
    add(T0, C0, p.k_risc)
    add(T0, G, p.k_t0)
    add(TP, G, p.k_t1)
    add(TM, G, p.k_t1)
    if rf_on:
        if f_rf_mhz is None:
            raise ValidationError("f_rf_mhz is required when rf_on")
        rf = p.rf
        res = {"plus": rf.f_plus_mhz, "minus": rf.f_minus_mhz}
        res.update(resonances or {})
        w = rf.w_max if w_max is None else w_max
        if w < 0:
            raise ValidationError("RF rate must be nonnegative")
        for target, level in (("plus", TP), ("minus", TM)):
            if rf.target in (target, "both"):
                wt = rf_rate(f_rf_mhz, res[target], rf.fwhm_mhz, w)
                add(T0, level, wt)
                add(level, T0, wt)
    return m


def _reachable(m: np.ndarray, start: int) -> list[int]:
    seen, stack = {start}, [start]
    while stack:
        i = stack.pop()
        for j in np.nonzero(m[:, i] > 0)[0]:
            if j != i and j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return sorted(seen)


def steady_state(m: np.ndarray, start: int = G) -> np.ndarray:
    """Stationary populations reached from level ``start``.

    Levels not reachable from ``start`` carry zero population. Raises
    :class:`DegenerateModelError` if the reachable part of the chain has
    more than one stationary distribution.
    """
    m = np.asarray(m, float)
    idx = _reachable(m, start)
    sub = m[np.ix_(idx, idx)]
    sv = np.linalg.svd(sub, compute_uv=False)
    scale = max(1.0, np.abs(sub).max())
    null_dim = int(np.sum(sv <= 1e-12 * scale * len(idx)))
    if null_dim != 1:
        raise DegenerateModelError(
            f"stationary space has dimension {null_dim} (disconnected or absorbing chain)"
        )
    a = np.vstack([sub, np.ones(len(idx))])
    rhs = np.zeros(len(idx) + 1)
    rhs[-1] = 1.0
    x, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    x = np.where(np.abs(x) < 1e-15, 0.0, x)
    if x.min() < -1e-12:
        raise DegenerateModelError("stationary solution has negative populations")
    n = np.zeros(m.shape[0])
    n[idx] = np.clip(x, 0.0, None)
    return n / n.sum()


def slowest_rate(m: np.ndarray) -> float:
    """Smallest nonzero relaxation rate |Re(lambda)| of the generator."""
    lam = np.linalg.eigvals(m)
    mags = np.sort(np.abs(lam.real))
    nonzero = mags[mags > 1e-9 * max(1.0, mags.max())]
    return float(nonzero[0]) if nonzero.size else 0.0


@dataclass(frozen=True)
class Trajectory:
    t_s: np.ndarray
    populations: np.ndarray

    def to_csv(self, path=None) -> str:
        rows = ["t_s," + ",".join(f"n_{name}" for name in LEVELS)]
        for t, n in zip(self.t_s, self.populations):
            rows.append(",".join(repr(float(v)) for v in (t, *n)))
        text = "\n".join(rows) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _check_populations(n0) -> np.ndarray:
    n0 = np.asarray(n0, float)
    if n0.shape != (6,) or np.any(n0 < 0) or abs(n0.sum() - 1.0) > 1e-9:
        raise ValidationError("populations must be 6 nonnegative values summing to 1")
    return n0


def transient(m: np.ndarray, n0, duration_s: float, tol: float = 1e-10, t_eval=None) -> Trajectory:
    """Integrate ``dn/dt = M n`` with an adaptive implicit (Radau) scheme.

    ``tol`` is the relative local tolerance; the absolute tolerance is
    ``tol * 1e-3``. Small negative excursions within the absolute tolerance
    are clamped to zero, larger ones raise.
    """
    n0 = _check_populations(n0)
    if not duration_s > 0:
        raise ValidationError("duration must be positive")
    atol = tol * 1e-3
    sol = solve_ivp(lambda t, n: m @ n, (0.0, duration_s), n0, method="Radau",
                    jac=m, rtol=tol, atol=atol, t_eval=t_eval)
    if sol.status != 0:
        lam = np.abs(np.linalg.eigvals(m).real)
        lam = lam[lam > 0]
        ratio = lam.max() / lam.min() if lam.size else float("nan")
        raise StiffnessError(f"integration failed ({sol.message}); stiffness ratio {ratio:.3g}")
    y = sol.y.T
    if y.min() < -10 * atol:
        raise StiffnessError(f"population went negative ({y.min():.3g}) beyond tolerance")
    return Trajectory(sol.t, np.clip(y, 0.0, None))


def _propagators(m: np.ndarray, dt: float):
    # exp(M dt) and its time integral, via the block-exponential identity
    k = m.shape[0]
    big = np.zeros((2 * k, 2 * k))
    big[:k, :k] = m
    big[:k, k:] = np.eye(k)
    e = expm(big * dt)
    return e[:k, :k], e[:k, k:]


def pl_weights(p: RateParams, channel: str = "c0") -> np.ndarray:
    """Linear functional turning populations into a photon emission rate."""
    if channel not in CHANNELS:
        raise ValidationError(f"channel must be one of {CHANNELS}")
    c = np.zeros(6)
    if channel in ("c0", "both"):
        c[C0] = p.k_rad0
    if channel in ("c1", "both"):
        c[C1] = p.k_rad1
    return c


@dataclass(frozen=True)
class LockinOutput:
    pl_on: float
    pl_off: float
    max_sum_error: float = 0.0

    @property
    def delta_pl(self) -> float:
        return self.pl_on - self.pl_off

    @property
    def contrast_pct(self) -> float:
        return 100.0 * self.delta_pl / self.pl_off


def simulate_lockin(p: RateParams, drive: RfDrive, n_cycles: int = 4,
                    settle_s: float | None = None, channel: str = "c0",
                    n0=None, temperature_factor: float = 1.0) -> LockinOutput:
    """Square-wave RF on/off cycle with lock-in style on/off averaging.

    The populations start from ``n0`` (default: the RF-off steady state) and
    run through whole modulation periods for ``settle_s`` (default five T+-
    lifetimes) before averaging PL over ``n_cycles`` periods. Within each
    half-period the generator is constant, so propagation and the PL time
    average are computed exactly with matrix exponentials.
    """
    if n_cycles < 1:
        raise ValidationError("n_cycles must be >= 1")
    c = pl_weights(p, channel)
    if p.k_pump <= 0 or not c.any():
        raise ValidationError("PL is identically zero (no pump or no emitting channel)")
    m_off = rate_matrix(p, rf_on=False)
    w = drive.peak_rate(p.rf)
    m_on = rate_matrix(p, rf_on=True, f_rf_mhz=drive.f_rf_mhz, w_max=w)
    period = 1.0 / drive.mod_freq_hz
    t_on, t_off = drive.duty * period, (1.0 - drive.duty) * period
    e_on, i_on = _propagators(m_on, t_on)
    e_off, i_off = _propagators(m_off, t_off)

    n = steady_state(m_off) if n0 is None else _check_populations(n0)
    if settle_s is None:
        settle_s = 5.0 / p.k_t1 if p.k_t1 > 0 else 5.0 / p.k_t0
    worst = 0.0
    for _ in range(int(math.ceil(settle_s / period))):
        n = e_off @ (e_on @ n)
        worst = max(worst, abs(n.sum() - 1.0))
    on_acc = off_acc = 0.0
    for _ in range(n_cycles):
        on_acc += c @ (i_on @ n)
        n = e_on @ n
        worst = max(worst, abs(n.sum() - 1.0))
        off_acc += c @ (i_off @ n)
        n = e_off @ n
        worst = max(worst, abs(n.sum() - 1.0))
    pl_on = temperature_factor * on_acc / (n_cycles * t_on)
    pl_off = temperature_factor * off_acc / (n_cycles * t_off)
    if np.array_equal(m_on, m_off):
        # RF has no effect: both halves see the same dynamics
        pl_on = pl_off = temperature_factor * (on_acc + off_acc) / (n_cycles * period)
    if not pl_off > 0:
        raise ValidationError("RF-off PL vanished; contrast undefined")
    return LockinOutput(float(pl_on), float(pl_off), float(worst))


def steady_state_contrast(p: RateParams, f_rf_mhz: float, w_max: float | None = None,
                          channel: str = "c0") -> float:
    """Contrast (%) between the RF-on and RF-off stationary states."""
    c = pl_weights(p, channel)
    on = c @ steady_state(rate_matrix(p, True, f_rf_mhz, w_max=w_max))
    off = c @ steady_state(rate_matrix(p, False))
    return 100.0 * (on - off) / off


def lockin_sweep(p: RateParams, drive: RfDrive, freqs_mhz, n_cycles: int = 4,
                 channel: str = "c0", workers: int = 1) -> np.ndarray:
    """Lock-in contrast (%) for each RF frequency, in input order."""
    def one(f):
        return simulate_lockin(p, replace(drive, f_rf_mhz=float(f)), n_cycles, channel=channel).contrast_pct

    freqs = [float(f) for f in freqs_mhz]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.array(list(pool.map(one, freqs)))
    return np.array([one(f) for f in freqs])


def square_wave_trajectory(p: RateParams, drive: RfDrive, n_cycles: int = 2,
                           samples_per_half: int = 50, n0=None) -> Trajectory:
    """Populations sampled uniformly through ``n_cycles`` modulation periods."""
    period = 1.0 / drive.mod_freq_hz
    t_on, t_off = drive.duty * period, (1.0 - drive.duty) * period
    m_on = rate_matrix(p, True, drive.f_rf_mhz, w_max=drive.peak_rate(p.rf))
    m_off = rate_matrix(p, False)
    step_on, _ = _propagators(m_on, t_on / samples_per_half)
    step_off, _ = _propagators(m_off, t_off / samples_per_half)
    n = steady_state(m_off) if n0 is None else _check_populations(n0)
    ts, ns, t = [0.0], [n.copy()], 0.0
    for _ in range(n_cycles):
        for step, dt in ((step_on, t_on), (step_off, t_off)):
            for _ in range(samples_per_half):
                n = step @ n
                t += dt / samples_per_half
                ts.append(t)
                ns.append(n.copy())
    return Trajectory(np.array(ts), np.array(ns))


def temperature_quench(t_kelvin: float, a: float, ea_mev: float) -> float:
    """Thermal PL quench factor ``1 / (1 + a exp(-Ea / kT))``."""
    if t_kelvin < 0 or not a > 0 or not ea_mev > 0:
        raise ValidationError("need t >= 0, a > 0, ea_mev > 0")
    if t_kelvin == 0:
        return 1.0
    return 1.0 / (1.0 + a * math.exp(-ea_mev / (K_B_MEV * t_kelvin)))


def calibrate_quench(t_low: float = 20.0, f_low: float = 0.9,
                     t_high: float = 45.0, f_high: float = 0.01) -> tuple[float, float]:
    """Solve for ``(a, ea_mev)`` so the quench factor hits both endpoints.

    Defaults encode bright emission at 20 K and full quenching by 45 K.
    """
    if not (0 < f_high < f_low < 1 and 0 < t_low < t_high):
        raise ValidationError("need 0 < f_high < f_low < 1 and 0 < t_low < t_high")
    r_low = 1.0 / f_low - 1.0
    r_high = 1.0 / f_high - 1.0
    ea = K_B_MEV * math.log(r_high / r_low) / (1.0 / t_low - 1.0 / t_high)
    a = r_low * math.exp(ea / (K_B_MEV * t_low))
    return a, ea


QUENCH_A, QUENCH_EA_MEV = calibrate_quench()
