import json
import subprocess
import sys

import numpy as np
import pytest

from codmr.cli import SUBCOMMANDS, main
from codmr.config import DEFAULTS, ConfigError, default_config, parse_config
from codmr.spectrum import read_spectrum_csv


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def data_files(out):
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file() and p.name != "manifest.json"}


# -- config --------------------------------------------------------------

def test_defaults():
    cfg = default_config()
    assert cfg.zfs().d_mhz == 987.0 and cfg.zfs().e_mhz == 22.0
    assert cfg.g_tensor().g_perp == 2.0023 and cfg.g_tensor().g_par == 2.0023
    assert len(cfg.orientations()) == 4
    assert cfg.data["schema_version"] == 1
    assert parse_config("") == cfg == parse_config("{}")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as ei:
        parse_config('{"zfs": {"d_mhz": 987, "q": 1}}')
    assert ei.value.field == "zfs.q"
    with pytest.raises(ConfigError):
        parse_config('{"colour": 1}')


def test_e_outside_canonical_range():
    with pytest.raises(ConfigError) as ei:
        parse_config('{"zfs": {"d_mhz": 987, "e_mhz": 400}}')
    assert ei.value.field == "zfs.e_mhz"
    assert "canonical" in str(ei.value)


def test_type_errors_name_field():
    with pytest.raises(ConfigError) as ei:
        parse_config('{"grid": {"step_mhz": "fine"}}')
    assert ei.value.field == "grid.step_mhz"
    with pytest.raises(ConfigError) as ei:
        parse_config('{"rates": {"k_isc": -5}}')
    assert ei.value.field == "rates"
    with pytest.raises(ConfigError) as ei:
        parse_config('{"lockin": {"n_cycles": 2.5}}')
    assert ei.value.field == "lockin.n_cycles"


def test_syntax_error_position():
    with pytest.raises(ConfigError) as ei:
        parse_config('{\n  "zfs": {"d_mhz": 987,,}\n}')
    assert ei.value.line == 2 and ei.value.column > 1
    assert ei.value.to_dict()["line"] == 2


def test_round_trip():
    cfg = parse_config('{"zfs": {"e_mhz": 30}, "orientations": {"preset": "axes100"}, "sweep": {"axis": "x"}}')
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()


def test_explicit_frames_config():
    cfg = parse_config(json.dumps({"orientations": {"preset": "explicit",
                                                    "frames": [{"z": [0, 0, 1]}, {"z": [1, 0, 0], "x": [0, 0, 1]}],
                                                    "weights": [1, 3]}}))
    s = cfg.orientations()
    assert len(s) == 2 and np.allclose(s.weights, [0.25, 0.75])


def test_fit_parameter_names_checked():
    with pytest.raises(ConfigError) as ei:
        parse_config('{"fit": {"parameters": {"zeta": {"init": 1}}}}')
    assert ei.value.field == "fit.parameters.zeta"


def test_defaults_table_not_mutated():
    before = json.dumps(DEFAULTS, sort_keys=True)
    parse_config('{"sweep": {"magnitudes_mt": [1, 2]}}').data["sweep"]["magnitudes_mt"].append(3)
    assert json.dumps(DEFAULTS, sort_keys=True) == before


# -- CLI -----------------------------------------------------------------

def test_zero_field_cli(tmp_path):
    out = tmp_path / "zf"
    assert main(["zero-field", "--out", str(out)]) == 0
    s = read_spectrum_csv(out / "spectrum.csv")
    c = s.contrast_pct
    i = np.arange(1, len(c) - 1)
    minima = i[(c[i] < c[i - 1]) & (c[i] < c[i + 1])]
    deepest = sorted(s.frequencies[minima[np.argsort(c[minima])[:2]]])
    assert deepest == [965.0, 1009.0]
    peaks = json.loads((out / "peaks.json").read_text())
    assert peaks["zfs_estimate"]["d_mhz"] == pytest.approx(987.0, abs=0.25)
    man = json.loads((out / "manifest.json").read_text())
    assert man["subcommand"] == "zero-field" and man["config"] == default_config().data


def test_rates_zero_drive(tmp_path):
    cfg = write_cfg(tmp_path, {"rf": {"w_max": 0.0}, "lockin": {"f_step_mhz": 20.0}})
    for sub in ("rates", "odmr-sweep"):
        out = tmp_path / sub
        assert main([sub, "--config", str(cfg), "--out", str(out)]) == 0
    summary = (tmp_path / "rates" / "rates_summary.csv").read_text().splitlines()
    assert summary[0].endswith("contrast_pct") and float(summary[1].split(",")[-1]) == 0.0
    rows = (tmp_path / "odmr-sweep" / "lockin.csv").read_text().splitlines()[1:]
    assert rows and all(float(r.split(",")[1]) == 0.0 for r in rows)
    head = (tmp_path / "rates" / "trajectory.csv").read_text().splitlines()[0]
    assert head == "t_s,n_G,n_C1,n_C0,n_T0,n_Tp,n_Tm"


def test_rates_default_negative(tmp_path):
    out = tmp_path / "r"
    assert main(["rates", "--out", str(out)]) == 0
    row = (out / "rates_summary.csv").read_text().splitlines()[1].split(",")
    assert float(row[-1]) < 0


def test_lines_cli(tmp_path):
    out = tmp_path / "l"
    assert main(["lines", "--out", str(out)]) == 0
    doc = json.loads((out / "lines.json").read_text())
    assert doc["ct_energy_mev"] == pytest.approx(786.6, abs=0.05)
    assert doc["fabry_perot_fsr_nm"]["fsr_nm"] == pytest.approx(28.8, abs=0.1)
    assert (out / "lines.csv").read_text().splitlines()[1].startswith("C0,1571.0,")


def test_sweep_then_fit(tmp_path):
    truth = {"zfs": {"d_mhz": 990.0, "e_mhz": 20.0}, "g_tensor": {"g_perp": 1.98, "g_par": 2.05},
             "sweep": {"magnitudes_mt": [0.0, 4.0, 8.0], "grid": {"start_mhz": 700.0, "stop_mhz": 1300.0,
                                                                   "step_mhz": 1.0}}}
    assert main(["sweep", "--config", str(write_cfg(tmp_path, truth, "t.json")),
                 "--out", str(tmp_path / "s")]) == 0
    index = tmp_path / "s" / "sweep" / "index.json"
    assert len(json.loads(index.read_text())["spectra"]) == 3
    fit_cfg = {"fit": {"sweep_index": str(index), "parameters": {
        "d_mhz": {"init": 988.0, "lo": 900.0, "hi": 1100.0},
        "e_mhz": {"init": 21.0, "lo": 0.0, "hi": 100.0},
        "g_perp": {"init": 2.0023, "lo": 1.5, "hi": 2.5},
        "g_par": {"init": 2.0023, "lo": 1.5, "hi": 2.5}}}}
    out = tmp_path / "f"
    assert main(["fit", "--config", str(write_cfg(tmp_path, fit_cfg, "f.json")), "--out", str(out)]) == 0
    rep = json.loads((out / "fit_report.json").read_text())
    p = rep["parameters"]
    assert p["d_mhz"] == pytest.approx(990.0, abs=1e-4)
    assert p["e_mhz"] == pytest.approx(20.0, abs=1e-4)
    assert p["g_perp"] == pytest.approx(1.98, abs=1e-6)
    assert p["g_par"] == pytest.approx(2.05, abs=1e-6)
    man = json.loads((out / "manifest.json").read_text())
    assert str(index) in man["inputs"] and len(man["inputs"]) == 5


def test_fit_from_csv_list(tmp_path):
    assert main(["zero-field", "--out", str(tmp_path / "z")]) == 0
    cfg = {"fit": {"datasets": [{"csv": str(tmp_path / "z" / "spectrum.csv"), "b_lab_mt": [0, 0, 0]}],
                   "parameters": {"d_mhz": {"init": 985.0, "lo": 900.0, "hi": 1100.0},
                                  "e_mhz": {"init": 20.0, "lo": 0.0, "hi": 100.0}}}}
    out = tmp_path / "f"
    assert main(["fit", "--config", str(write_cfg(tmp_path, cfg)), "--out", str(out)]) == 0
    p = json.loads((out / "fit_report.json").read_text())["parameters"]
    assert p["d_mhz"] == pytest.approx(987.0, abs=1e-6) and p["e_mhz"] == pytest.approx(22.0, abs=1e-6)


def test_sweep_noise_seeded(tmp_path):
    cfg = write_cfg(tmp_path, {"sweep": {"noise_pct": 0.01, "magnitudes_mt": [0.0, 5.0]}})
    runs = []
    for k, seed in enumerate(("1", "1", "2")):
        out = tmp_path / f"n{k}"
        assert main(["sweep", "--config", str(cfg), "--out", str(out), "--seed", seed]) == 0
        runs.append(data_files(out))
    assert runs[0] == runs[1] and runs[0] != runs[2]


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_determinism_across_threads(tmp_path, sub, monkeypatch):
    doc = {"lockin": {"f_step_mhz": 10.0}, "sweep": {"magnitudes_mt": [0.0, 3.0, 6.0]}}
    if sub == "fit":
        assert main(["zero-field", "--out", str(tmp_path / "z")]) == 0
        doc["fit"] = {"datasets": [{"csv": str(tmp_path / "z" / "spectrum.csv")}],
                      "parameters": {"d_mhz": {"init": 985.0, "lo": 900.0, "hi": 1100.0}}}
    cfg = write_cfg(tmp_path, doc)
    outs = []
    for k, threads in enumerate((1, 4, None)):
        out = tmp_path / f"run{k}"
        argv = [sub, "--config", str(cfg), "--out", str(out)]
        if threads is None:
            monkeypatch.setenv("CODMR_THREADS", "3")
        else:
            argv += ["--threads", str(threads)]
        assert main(argv) == 0
        outs.append(data_files(out))
    assert outs[0] == outs[1] == outs[2]
    assert outs[0]


def test_error_json(tmp_path, capsys):
    out = tmp_path / "e"
    out.mkdir()
    cfg = write_cfg(tmp_path, {"zfs": {"d_mhz": 987, "e_mhz": 400}})
    assert main(["zero-field", "--config", str(cfg), "--out", str(out)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and err["field"] == "zfs.e_mhz"
    assert json.loads((out / "error.json").read_text()) == err


def test_missing_dataset_file(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"fit": {"datasets": [{"csv": str(tmp_path / "nope.csv")}]}})
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "io"


def test_fit_without_data(tmp_path, capsys):
    assert main(["fit", "--out", str(tmp_path / "o")]) == 1
    assert json.loads(capsys.readouterr().err)["field"] == "fit.datasets"


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "codmr.cli", "lines", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    r = subprocess.run([sys.executable, "-m", "codmr.cli", "bogus"], capture_output=True, text=True)
    assert r.returncode != 0


def test_config_seed_reaches_preset():
    cfg = parse_config(json.dumps({"orientations": {"preset": "axes111", "seed": {"z": [-1, 1, -1]}},
                                   "lab_frame": {"z_lab": [1, 1, 0], "x_lab": [1, -1, -2]}}))
    assert np.allclose(np.abs(cfg.orientations().frames[0].z_axis), 1 / np.sqrt(3))
    with pytest.raises(ConfigError) as ei:
        parse_config('{"orientations": {"preset": "axes111", "seed": {"z": [1, 0, 0]}}}')
    assert ei.value.field == "orientations"
