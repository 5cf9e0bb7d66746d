"""
JSON run configuration.

Every key is optional; missing keys take the defaults in :data:`DEFAULTS`.
Unknown keys are rejected. :func:`parse_config` returns a :class:`RunConfig`
whose ``data`` is the fully resolved document, so
``parse_config(cfg.to_json())`` reproduces ``cfg`` exactly.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import numpy as np

from .crystal import PRESETS, DefectFrame, LabFrameConfig, OrientationSet, orientation_preset
from .errors import ValidationError
from .fitting import FIT_PARAMETERS, FitParam, ModelConfig
from .rates import RateParams, RfCoupling, RfDrive
from .spectrum import FrequencyGrid, LineShape, OdcrModel
from .spin import G_FREE, GTensor, ZfsParams

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "zfs": {"d_mhz": 987.0, "e_mhz": 22.0},
    "g_tensor": {"g_perp": G_FREE, "g_par": G_FREE},
    "orientations": {"preset": "axes111", "seed": None, "frames": None, "weights": None},
    "lab_frame": {"z_lab": [1.0, 1.0, 0.0], "x_lab": [0.0, 0.0, 1.0]},
    "drive_dir_lab": None,
    "line_shape": {"kind": "lorentzian", "fwhm_mhz": 5.0},
    "grid": {"start_mhz": 900.0, "stop_mhz": 1100.0, "step_mhz": 0.5},
    "depth_pct": 1.0,
    "cluster_tol_mhz": 2.0,
    "sweep": {
        "axis": "y",
        "magnitudes_mt": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
        "grid": {"start_mhz": 600.0, "stop_mhz": 1400.0, "step_mhz": 0.5},
        "noise_pct": 0.0,
    },
    "rates": {
        "k_pump": 1.0e4,
        "pump_branch_c1": 0.2,
        "k_rad0": 1 / 30e-6,
        "k_rad1": 1 / 30e-6,
        "k_10": 1 / 10e-6,
        "k_isc": 0.05 / 30e-6,
        "k_t0": 1 / 1.4e-3,
        "k_t1": 1 / 10e-3,
        "k_risc": 0.0,
        "allow_fast_shelving": False,
    },
    "rf": {"f_plus_mhz": 1009.0, "f_minus_mhz": 965.0, "fwhm_mhz": 5.0, "w_max": 0.2, "target": "both"},
    "drive": {"f_rf_mhz": 965.0, "p_rf_mw": 100.0, "mod_freq_hz": 22.0, "duty": 0.5,
              "p_ref_mw": 100.0, "w_cap": None},
    "lockin": {"f_start_mhz": 900.0, "f_stop_mhz": 1100.0, "f_step_mhz": 1.0, "n_cycles": 4,
               "settle_s": None, "channel": "c0"},
    "trajectory": {"n_cycles": 2, "samples_per_half": 50},
    "odcr": {"b_max_pct": 0.0, "p_half_mw": 100.0, "offset_pct": 0.0},
    "fit": {
        "parameters": {
            "d_mhz": {"init": 987.0, "lo": 500.0, "hi": 1500.0},
            "e_mhz": {"init": 22.0, "lo": 0.0, "hi": 200.0},
            "g_perp": {"init": G_FREE, "lo": 1.5, "hi": 2.5},
            "g_par": {"init": G_FREE, "lo": 1.5, "hi": 2.5},
            "depth_pct": {"init": 1.0, "lo": 0.0, "hi": 100.0},
            "fwhm_mhz": {"init": 5.0, "lo": 0.1, "hi": 100.0},
        },
        "datasets": [],
        "sweep_index": None,
        "max_iter": 200,
    },
}

# sections whose keys are user-chosen rather than fixed by the schema
_OPEN_MAPPINGS = {("fit", "parameters")}


class ConfigError(ValidationError):
    """Config problem; ``field`` names the offending key path."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None,
                 column: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column

    def to_dict(self) -> dict:
        d = {"error": "config", "message": str(self)}
        for k in ("field", "line", "column"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        return d


def _merge(defaults, user, path=()):
    if isinstance(defaults, dict) and path not in _OPEN_MAPPINGS:
        if not isinstance(user, dict):
            raise ConfigError("expected an object", ".".join(path))
        unknown = sorted(set(user) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown key {unknown[0]!r}", ".".join(path + (unknown[0],)))
        return {k: _merge(v, user[k], path + (k,)) if k in user else copy.deepcopy(v)
                for k, v in defaults.items()}
    if path == ("fit", "parameters"):
        return _merge_fit_params(user, path)
    if isinstance(defaults, bool):
        if not isinstance(user, bool):
            raise ConfigError("expected true or false", ".".join(path))
        return user
    if isinstance(defaults, (int, float)) and not isinstance(defaults, bool):
        if isinstance(user, bool) or not isinstance(user, (int, float)):
            raise ConfigError("expected a number", ".".join(path))
        if isinstance(defaults, int) and not isinstance(user, int):
            raise ConfigError("expected an integer", ".".join(path))
        return user if isinstance(defaults, int) else float(user)
    return copy.deepcopy(user)


def _merge_fit_params(user, path):
    if not isinstance(user, dict):
        raise ConfigError("expected an object", ".".join(path))
    out = {}
    for name in sorted(user):
        spec = user[name]
        where = ".".join(path + (name,))
        if name not in FIT_PARAMETERS:
            raise ConfigError(f"unknown fit parameter {name!r}", where)
        if not isinstance(spec, dict) or set(spec) - {"init", "lo", "hi"} or "init" not in spec:
            raise ConfigError("expected {init, lo, hi}", where)
        out[name] = {"init": float(spec["init"]),
                     "lo": float(spec.get("lo", -1e300)), "hi": float(spec.get("hi", 1e300))}
    return out


def _vec3(v, where):
    if v is None:
        return None
    if not (isinstance(v, list) and len(v) == 3 and all(isinstance(c, (int, float)) for c in v)):
        raise ConfigError("expected a list of three numbers", where)
    return [float(c) for c in v]


@dataclass(frozen=True)
class RunConfig:
    data: dict

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.to_json() == other.to_json()

    # -- domain objects --------------------------------------------------
    def zfs(self) -> ZfsParams:
        return ZfsParams(**self.data["zfs"])

    def g_tensor(self) -> GTensor:
        return GTensor(**self.data["g_tensor"])

    def lab_frame(self) -> LabFrameConfig:
        lf = self.data["lab_frame"]
        return LabFrameConfig(tuple(lf["z_lab"]), tuple(lf["x_lab"]))

    def orientations(self) -> OrientationSet:
        o = self.data["orientations"]
        if o["preset"] == "explicit":
            frames = [DefectFrame.from_axes(f["z"], f.get("x")) for f in o["frames"]]
            return OrientationSet(tuple(frames), o["weights"])
        seed = None
        if o["seed"] is not None:
            seed = DefectFrame.from_axes(o["seed"]["z"], o["seed"].get("x"))
        return orientation_preset(o["preset"], seed, o["weights"])

    def drive_dir_lab(self):
        d = self.data["drive_dir_lab"]
        return None if d is None else tuple(np.asarray(d) / np.linalg.norm(d))

    def line_shape(self) -> LineShape:
        return LineShape(**self.data["line_shape"])

    def grid(self, key: str = "grid") -> FrequencyGrid:
        src = self.data["sweep"]["grid"] if key == "sweep" else self.data["grid"]
        return FrequencyGrid(**src)

    def rate_params(self) -> RateParams:
        return RateParams(rf=RfCoupling(**self.data["rf"]), **self.data["rates"])

    def rf_drive(self) -> RfDrive:
        return RfDrive(**self.data["drive"])

    def odcr(self) -> OdcrModel:
        return OdcrModel(**self.data["odcr"])

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            zfs=self.zfs(), g=self.g_tensor(), orientations=self.orientations(),
            lab=self.lab_frame(), shape=self.line_shape(), depth_pct=self.data["depth_pct"],
            drive_dir_lab=self.drive_dir_lab(),
        )

    def fit_params(self) -> list[FitParam]:
        return [FitParam(name, **spec) for name, spec in sorted(self.data["fit"]["parameters"].items())]


def _validate(cfg: RunConfig) -> None:
    d = cfg.data
    if d["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {d['schema_version']}", "schema_version")
    z = d["zfs"]
    if not 0.0 <= z["e_mhz"] <= abs(z["d_mhz"]) / 3.0:
        canon = ZfsParams(z["d_mhz"], z["e_mhz"]).canonical()
        raise ConfigError(
            f"zfs must satisfy 0 <= e_mhz <= |d_mhz|/3; the same tensor in canonical axes is "
            f"d_mhz={canon.d_mhz:.6g}, e_mhz={canon.e_mhz:.6g}", "zfs.e_mhz")
    o = d["orientations"]
    if o["preset"] not in PRESETS + ("explicit",):
        raise ConfigError(f"unknown preset {o['preset']!r}", "orientations.preset")
    for key in ("seed",):
        if o[key] is not None:
            _vec3(o[key].get("z"), f"orientations.{key}.z")
    if o["preset"] == "explicit" and not o["frames"]:
        raise ConfigError("explicit orientations need a frames list", "orientations.frames")
    _vec3(d["lab_frame"]["z_lab"], "lab_frame.z_lab")
    _vec3(d["lab_frame"]["x_lab"], "lab_frame.x_lab")
    if d["drive_dir_lab"] is not None:
        v = _vec3(d["drive_dir_lab"], "drive_dir_lab")
        if np.linalg.norm(v) == 0:
            raise ConfigError("drive direction must be nonzero", "drive_dir_lab")
    if d["sweep"]["axis"] not in ("x", "y", "z"):
        raise ConfigError("sweep axis must be x, y or z", "sweep.axis")
    if d["depth_pct"] < 0:
        raise ConfigError("depth_pct must be nonnegative", "depth_pct")
    if d["lockin"]["n_cycles"] < 1:
        raise ConfigError("n_cycles must be >= 1", "lockin.n_cycles")
    if d["lockin"]["channel"] not in ("c0", "c1", "both"):
        raise ConfigError("channel must be c0, c1 or both", "lockin.channel")
    checks = [
        ("zfs", cfg.zfs), ("g_tensor", cfg.g_tensor), ("lab_frame", cfg.lab_frame),
        ("orientations", cfg.orientations), ("line_shape", cfg.line_shape),
        ("grid", cfg.grid), ("sweep.grid", lambda: cfg.grid("sweep")),
        ("rates", cfg.rate_params), ("drive", cfg.rf_drive), ("odcr", cfg.odcr),
        ("fit.parameters", cfg.fit_params),
    ]
    for where, build in checks:
        try:
            build()
        except ConfigError:
            raise
        except (ValidationError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc), where) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config, filling defaults."""
    try:
        user = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON syntax error: {exc.msg}", None, exc.lineno, exc.colno) from None
    cfg = RunConfig(_merge(DEFAULTS, user))
    _validate(cfg)
    return cfg


def default_config() -> RunConfig:
    return parse_config("{}")
