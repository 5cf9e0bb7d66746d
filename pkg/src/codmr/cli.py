"""
Command-line entry point.

    codmr SUBCOMMAND [--config PATH] [--out DIR] [--threads N] [--seed U64]

Subcommands: ``zero-field``, ``sweep``, ``odmr-sweep``, ``rates``, ``fit``,
``lines``. Each run writes its data files plus ``manifest.json`` into the
output directory. Data files carry no timestamps, so identical inputs give
byte-identical data regardless of ``--threads``; only the manifest records
volatile facts such as wall-clock time.

On any error the exit status is 1 and a JSON error document is printed to
stderr (and written to ``error.json`` when the output directory exists).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .errors import CodmrError
from .fitting import FitProblem, detect_peaks, fit_params, zfs_from_two_peaks
from .optics import CT_GAP_MEV, N_SILICON, ct_energy_mev, fabry_perot_fsr, line_catalog
from .rates import lockin_sweep, simulate_lockin, square_wave_trajectory
from .spectrum import (
    FrequencyGrid,
    OdmrSpectrum,
    ensemble_resonances,
    field_sweep,
    odcr_background,
    read_spectrum_csv,
    spectrum_to_csv,
    spectrum_to_json,
    synthesize_spectrum,
    write_field_sweep,
)
from .spin import MagneticField

SUBCOMMANDS = ("zero-field", "sweep", "odmr-sweep", "rates", "fit", "lines")
THREADS_ENV = "CODMR_THREADS"


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    def __init__(self, cfg: RunConfig, out: Path, threads: int, seed: int | None):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.seed = seed
        self.inputs: dict[str, str] = {}

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)


def _zero_field(run: Run) -> None:
    cfg = run.cfg
    b = MagneticField(0.0, 0.0, 0.0, "lab")
    lines = ensemble_resonances(cfg.zfs(), cfg.g_tensor(), cfg.orientations(), b,
                                cfg.lab_frame(), cfg.drive_dir_lab())
    background = odcr_background(cfg.data["drive"]["p_rf_mw"], cfg.odcr())
    s = synthesize_spectrum(lines, cfg.line_shape(), cfg.grid(), cfg.data["depth_pct"], background)
    run.write("spectrum.csv", spectrum_to_csv(s))
    run.write("spectrum.json", spectrum_to_json(s))
    peaks = detect_peaks(s, 0.0, cfg.data["cluster_tol_mhz"])
    doc = {"peaks": [{"f_mhz": p.f_mhz, "depth_pct": p.depth_pct, "fwhm_mhz": p.fwhm_mhz} for p in peaks]}
    deepest = sorted(sorted(peaks, key=lambda p: p.depth_pct)[:2], key=lambda p: p.f_mhz)
    if len(deepest) == 2:
        z = zfs_from_two_peaks(deepest[0].f_mhz, deepest[1].f_mhz)
        doc["zfs_estimate"] = {"d_mhz": z.d_mhz, "e_mhz": z.e_mhz}
    run.write("peaks.json", _dump(doc))


def _sweep(run: Run) -> None:
    cfg = run.cfg
    sw = cfg.data["sweep"]
    lab = cfg.lab_frame()
    direction = lab.axis(sw["axis"])
    result = field_sweep(cfg.zfs(), cfg.g_tensor(), cfg.orientations(), lab, direction,
                         sw["magnitudes_mt"], cfg.line_shape(), cfg.grid("sweep"),
                         cfg.data["depth_pct"], cfg.drive_dir_lab(), workers=run.threads)
    if sw["noise_pct"] > 0 and run.seed is not None:
        rng = np.random.default_rng(run.seed)
        noisy = tuple(OdmrSpectrum(s.grid, s.contrast_pct + rng.normal(0, sw["noise_pct"], s.grid.n_bins))
                      for s in result.spectra)
        result = type(result)(result.direction, result.magnitudes_mt, noisy, result.lines)
    write_field_sweep(result, run.out / "sweep")


def _odmr_sweep(run: Run) -> None:
    cfg = run.cfg
    lk = cfg.data["lockin"]
    grid = FrequencyGrid(lk["f_start_mhz"], lk["f_stop_mhz"], lk["f_step_mhz"])
    freqs = grid.frequencies
    c = lockin_sweep(cfg.rate_params(), cfg.rf_drive(), freqs, lk["n_cycles"], lk["channel"],
                     workers=run.threads)
    rows = ["f_rf_mhz,contrast_pct"] + [f"{float(f)!r},{float(v)!r}" for f, v in zip(freqs, c)]
    run.write("lockin.csv", "\n".join(rows) + "\n")


def _rates(run: Run) -> None:
    cfg = run.cfg
    p, drive = cfg.rate_params(), cfg.rf_drive()
    tr = cfg.data["trajectory"]
    traj = square_wave_trajectory(p, drive, tr["n_cycles"], tr["samples_per_half"])
    run.write("trajectory.csv", traj.to_csv())
    lk = cfg.data["lockin"]
    out = simulate_lockin(p, drive, lk["n_cycles"], lk["settle_s"], lk["channel"])
    row = [drive.f_rf_mhz, out.pl_on, out.pl_off, out.contrast_pct]
    run.write("rates_summary.csv", "f_rf_mhz,pl_on,pl_off,contrast_pct\n"
              + ",".join(repr(float(v)) for v in row) + "\n")


def _load_datasets(run: Run) -> list:
    fit = run.cfg.data["fit"]
    datasets = []
    if fit["sweep_index"]:
        index_path = Path(fit["sweep_index"])
        run.inputs[str(index_path)] = _sha256(index_path)
        index = json.loads(index_path.read_text())
        for entry in index["spectra"]:
            csv = index_path.parent / entry["file"]
            run.inputs[str(csv)] = _sha256(csv)
            datasets.append((MagneticField.from_vector(entry["b_lab_t"], "lab"), read_spectrum_csv(csv)))
    for i, ds in enumerate(fit["datasets"]):
        if not isinstance(ds, dict) or set(ds) - {"csv", "b_lab_mt"} or "csv" not in ds:
            raise ConfigError("dataset entries need {csv, b_lab_mt}", f"fit.datasets.{i}")
        csv = Path(ds["csv"])
        run.inputs[str(csv)] = _sha256(csv)
        b = np.asarray(ds.get("b_lab_mt", [0.0, 0.0, 0.0]), float) * 1e-3
        datasets.append((MagneticField.from_vector(b, "lab"), read_spectrum_csv(csv)))
    if not datasets:
        raise ConfigError("fit needs fit.datasets or fit.sweep_index", "fit.datasets")
    return datasets


def _fit(run: Run) -> None:
    cfg = run.cfg
    problem = FitProblem(tuple(cfg.fit_params()), tuple(_load_datasets(run)), cfg.model_config())
    result = fit_params(problem, cfg.data["fit"]["max_iter"])
    run.write("fit_report.json", result.to_json())


def _lines(run: Run) -> None:
    rows = ["name,wavelength_nm,energy_mev"]
    doc = {"lines": []}
    for ln in line_catalog().values():
        rows.append(f"{ln.name},{ln.wavelength_nm!r},{ln.energy_mev!r}")
        doc["lines"].append({"name": ln.name, "wavelength_nm": ln.wavelength_nm,
                             "energy_mev": ln.energy_mev, "note": ln.note})
    doc["ct_energy_mev"] = ct_energy_mev()
    doc["ct_gap_mev"] = CT_GAP_MEV
    doc["fabry_perot_fsr_nm"] = {"thickness_um": 12.0, "refractive_index": N_SILICON,
                                 "lambda_nm": 1550.0, "fsr_nm": fabry_perot_fsr(12.0, N_SILICON, 1550.0)}
    run.write("lines.csv", "\n".join(rows) + "\n")
    run.write("lines.json", _dump(doc))


_HANDLERS = {
    "zero-field": _zero_field,
    "sweep": _sweep,
    "odmr-sweep": _odmr_sweep,
    "rates": _rates,
    "fit": _fit,
    "lines": _lines,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="codmr", description="ODMR simulation and fitting for triplet color centers")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="JSON config file (defaults apply when omitted)")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--threads", type=int, default=None,
                    help=f"worker threads (default: ${THREADS_ENV} or 1)")
    ap.add_argument("--seed", type=int, default=None, help="seed for optional noise injection")
    return ap


def _resolve_threads(arg: int | None) -> int:
    if arg is None:
        arg = int(os.environ.get(THREADS_ENV, "1"))
    return max(1, arg)


def run(subcommand: str, config: RunConfig, output_dir, threads: int = 1, seed: int | None = None,
        config_path: Path | None = None) -> int:
    """Execute one subcommand; returns the process exit status."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    r = Run(config, out, threads, seed)
    if config_path is not None:
        r.inputs[str(config_path)] = _sha256(config_path)
    t0 = time.perf_counter()
    _HANDLERS[subcommand](r)
    manifest = {
        "tool": "codmr",
        "version": __version__,
        "subcommand": subcommand,
        "config": config.data,
        "inputs": r.inputs,
        "threads": threads,
        "seed": seed,
        "wall_clock_s": time.perf_counter() - t0,
    }
    (out / "manifest.json").write_text(_dump(manifest))
    return 0


def _error_doc(exc: Exception) -> dict:
    if isinstance(exc, ConfigError):
        return exc.to_dict()
    if isinstance(exc, CodmrError):
        return {"error": exc.code, "message": str(exc)}
    if isinstance(exc, OSError):
        return {"error": "io", "message": str(exc)}
    return {"error": "internal", "type": type(exc).__name__, "message": str(exc)}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else "{}"
        cfg = parse_config(text)
        return run(args.subcommand, cfg, args.out, _resolve_threads(args.threads), args.seed, args.config)
    except Exception as exc:  # every module error becomes a JSON report
        doc = _error_doc(exc)
        sys.stderr.write(_dump(doc))
        if args.out.is_dir():
            (args.out / "error.json").write_text(_dump(doc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
