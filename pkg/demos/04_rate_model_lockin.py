"""
Spin-dependent shelving and lock-in detection
=============================================

Optical pumping cycles population between the ground and excited
singlets. A small intersystem-crossing rate feeds the m_s = 0 triplet
sublevel, which decays back faster than m_s = +-1. Resonant RF therefore
moves population into longer-lived sublevels and dims the emission: a
negative ODMR contrast. A 22 Hz square wave and on/off averaging mimic
lock-in detection.
"""

import numpy as np

from codmr import (
    LEVELS,
    QUENCH_A,
    QUENCH_EA_MEV,
    RateParams,
    RfDrive,
    lockin_sweep,
    rate_matrix,
    simulate_lockin,
    steady_state,
    temperature_quench,
)

p = RateParams()
n = steady_state(rate_matrix(p))
print("RF-off populations:", {k: f"{v:.3e}" for k, v in zip(LEVELS, n)})

out = simulate_lockin(p, RfDrive(965.0))
print(f"on resonance: PL_on - PL_off = {out.delta_pl:.4g}, contrast {out.contrast_pct:.4e} %")
print(f"500 MHz away: contrast {simulate_lockin(p, RfDrive(1465.0)).contrast_pct:.2e} %")

# Contrast scales with RF power until the drive competes with triplet decay
for pw in (10, 100, 1000, 1e4, 1e5):
    c = simulate_lockin(p, RfDrive(965.0, p_rf_mw=pw)).contrast_pct
    print(f"{pw:8.0f} mW  {c:+.4e} %")

freqs = np.arange(950.0, 1021.0, 2.0)
c = lockin_sweep(p, RfDrive(965.0, p_rf_mw=1e4), freqs, workers=4)
for f, v in zip(freqs[::3], c[::3]):
    print(f"{f:7.1f} MHz {'#' * int(round(-v * 10))}")

# Thermal quenching scales the PL, not the relative contrast
for t in (5, 20, 30, 45):
    print(f"{t:3d} K  PL scale {temperature_quench(t, QUENCH_A, QUENCH_EA_MEV):.3f}")
