"""
Fitting Hamiltonian parameters to noisy spectra
===============================================

Five synthetic spectra (zero field and 8 mT along four directions) with
noise at 1 % of the signal amplitude. Starting values come from the
zero-field dips; the g-tensor starts at the free-electron value.
"""

import numpy as np

from codmr import (
    FitParam,
    FitProblem,
    FrequencyGrid,
    GTensor,
    LabFrameConfig,
    LineShape,
    MagneticField,
    ModelConfig,
    OdmrSpectrum,
    ZfsParams,
    detect_peaks,
    fit_params,
    model_spectrum,
    zfs_from_two_peaks,
)

truth = ModelConfig(zfs=ZfsParams(987.0, 22.0), g=GTensor(1.98, 2.05), shape=LineShape("lorentzian", 8.0))
lab = LabFrameConfig()
grid = FrequencyGrid(600.0, 1400.0, 1.0)
rng = np.random.default_rng(1)

dirs = [lab.axis("y"), lab.axis("z"), lab.axis("x"), np.ones(3) / np.sqrt(3)]
fields = [MagneticField(0, 0, 0, "lab")] + [MagneticField.from_vector(d * 8e-3, "lab") for d in dirs]
data = []
for b in fields:
    y = model_spectrum(truth, b, grid).total_pct
    data.append((b, OdmrSpectrum(grid, y + rng.normal(0, 0.01 * np.abs(y).max(), y.shape))))

peaks = sorted(detect_peaks(data[0][1], 0.0, 2.0), key=lambda p: p.depth_pct)[:2]
z0 = zfs_from_two_peaks(peaks[0].f_mhz, peaks[1].f_mhz)
print(f"start: D = {z0.d_mhz:.2f}, E = {z0.e_mhz:.2f}")

params = (
    FitParam("d_mhz", z0.d_mhz, 500, 1500),
    FitParam("e_mhz", z0.e_mhz, 0, 200),
    FitParam("g_perp", 2.0023, 1.5, 2.5),
    FitParam("g_par", 2.0023, 1.5, 2.5),
    FitParam("depth_pct", 1.0, 0, 100),
    FitParam("fwhm_mhz", 6.0, 0.1, 100),
)
res = fit_params(FitProblem(params, tuple(data), truth))
print(f"{res.n_iter} iterations, converged: {res.converged} ({res.message})")
for k, v in res.params.items():
    print(f"{k:10s} {v:10.5f} +- {res.std_errors[k]:.5f}   true {truth.values()[k]:.5f}")
