"""Experiment configuration: flat key-value files plus built-in presets.

The config format is one ``section.key = value`` assignment per line with
``#`` comments.  Angles are given in degrees and powers in dB; conversion
to radians and linear scale happens on load.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .arrays import ArrayGeometry
from .errors import ValidationError
from .optimizer import OptimizerConfig
from .spatial import ISOTROPIC, TRUNCATED_GAUSSIAN, ScatteringSpec

SWEEP_VARIABLES = ("snr_db", "sir_db", "tau", "ris_m", "delta_e_deg", "outer_iter")
RMSE_METHODS = ("mmse", "mmse-phi0", "rsls", "ls", "mmse-no-emi", "rsls-no-emi")

# "No EMI" scenarios keep a strictly positive EMI power for numerical
# uniformity; 300 dB below the signal is indistinguishable from none.
NO_EMI_SIR_DB = 300.0

BS_UNCORRELATED = "uncorrelated"


@dataclass(frozen=True)
class ScatterSettings:
    """Raw (degree-valued) scattering parameters of one link."""

    kind: str = TRUNCATED_GAUSSIAN
    azimuth_deg: float = 0.0
    elevation_deg: float = 0.0
    spread_deg: float = 10.0
    gain: float = 1.0

    def to_spec(self) -> ScatteringSpec:
        if self.kind == ISOTROPIC:
            return ScatteringSpec(ISOTROPIC, gain=self.gain)
        return ScatteringSpec.gaussian_deg(
            self.azimuth_deg, self.elevation_deg, self.spread_deg, self.gain)


@dataclass(frozen=True)
class ExperimentConfig:
    ris_geom: ArrayGeometry = ArrayGeometry(4, 4, 0.5)
    bs_geom: ArrayGeometry = ArrayGeometry(1, 1, 0.5)
    scatter_h: ScatterSettings = ScatterSettings(azimuth_deg=70, elevation_deg=-20, spread_deg=10)
    scatter_g: ScatterSettings = ScatterSettings(azimuth_deg=-60, elevation_deg=-30, spread_deg=5)
    scatter_e: ScatterSettings = ScatterSettings(azimuth_deg=-10, elevation_deg=20, spread_deg=20)
    bs_kind: str = BS_UNCORRELATED
    scatter_bs: ScatterSettings = ScatterSettings(kind=ISOTROPIC)
    tau: int = 16
    tau_c: int = 160
    snr_db: float = 15.0
    sir_db: float = 5.0
    rho: float = 1.0
    rho_tr: float = 1.0
    sweep_var: str = "snr_db"
    sweep_values: tuple = (0.0, 10.0, 20.0, 30.0)
    estimators: tuple = ("mmse", "mmse-phi0", "rsls", "ls", "mmse-no-emi")
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    trials: int = 1000
    seed: int = 1
    workers: int = 1
    output: Optional[str] = None
    trace_output: Optional[str] = None

    def __post_init__(self) -> None:
        if not 0 < self.tau < self.tau_c:
            raise ValidationError(f"need 0 < tau < tau_c, got tau={self.tau}, tau_c={self.tau_c}")
        if self.trials < 1:
            raise ValidationError("trials must be at least 1")
        if self.workers < 1:
            raise ValidationError("workers must be at least 1")
        if self.sweep_var not in SWEEP_VARIABLES:
            raise ValidationError(f"unknown sweep variable {self.sweep_var!r}")
        if len(self.sweep_values) == 0:
            raise ValidationError("sweep range must be non-empty")
        unknown = set(self.estimators) - set(RMSE_METHODS)
        if unknown:
            raise ValidationError(f"unknown estimator methods: {sorted(unknown)}")


DESK_PRESET = {
    "geometry.ris.rows_h": "4",
    "geometry.ris.cols_v": "4",
    "geometry.ris.spacing": "0.5",
    "geometry.bs.rows_h": "1",
    "geometry.bs.cols_v": "1",
    "geometry.bs.spacing": "0.5",
    "scattering.h.kind": TRUNCATED_GAUSSIAN,
    "scattering.h.azimuth_deg": "70",
    "scattering.h.elevation_deg": "-20",
    "scattering.h.spread_deg": "10",
    "scattering.h.gain": "1",
    "scattering.g.kind": TRUNCATED_GAUSSIAN,
    "scattering.g.azimuth_deg": "-60",
    "scattering.g.elevation_deg": "-30",
    "scattering.g.spread_deg": "5",
    "scattering.g.gain": "1",
    "scattering.e.kind": TRUNCATED_GAUSSIAN,
    "scattering.e.azimuth_deg": "-10",
    "scattering.e.elevation_deg": "20",
    "scattering.e.spread_deg": "20",
    "scattering.e.gain": "1",
    "scattering.bs.kind": BS_UNCORRELATED,
    "pilot.tau": "16",
    "pilot.tau_c": "160",
    "power.snr_db": "15",
    "power.sir_db": "5",
    "power.rho": "1",
    "power.rho_tr": "1",
    "sweep.variable": "snr_db",
    "sweep.values": "0,10,20,30",
    "estimators": "mmse,mmse-phi0,rsls,ls,mmse-no-emi",
    "optimizer.alpha": "0.5",
    "optimizer.eps_outer": "1e-5",
    "optimizer.eps_inner": "1e-8",
    "optimizer.inner_iters": "1",
    "optimizer.max_outer": "500",
    "trials": "1000",
    "seed": "1",
    "workers": "1",
}

# Full-paper scale: 6x6 RIS, tau = M = 36, coherence block 10 tau.
PAPER_PRESET = dict(DESK_PRESET, **{
    "geometry.ris.rows_h": "6",
    "geometry.ris.cols_v": "6",
    "pilot.tau": "36",
    "pilot.tau_c": "360",
})

PRESETS = {"desk": DESK_PRESET, "paper": PAPER_PRESET}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a flat string map."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def _get_float(entries, key):
    try:
        return float(entries[key])
    except ValueError as exc:
        raise ValidationError(f"config key {key} is not a number: {entries[key]!r}") from exc


def _get_int(entries, key):
    value = _get_float(entries, key)
    if value != int(value):
        raise ValidationError(f"config key {key} must be an integer, got {value}")
    return int(value)


def _get_list(entries, key):
    return tuple(v.strip() for v in entries[key].split(",") if v.strip())


def _get_float_list(entries, key):
    try:
        return tuple(float(v) for v in _get_list(entries, key))
    except ValueError as exc:
        raise ValidationError(f"config key {key} has non-numeric entries") from exc


def _scatter(entries, link: str) -> ScatterSettings:
    prefix = f"scattering.{link}."
    return ScatterSettings(
        kind=entries.get(prefix + "kind", TRUNCATED_GAUSSIAN),
        azimuth_deg=_get_float(entries, prefix + "azimuth_deg") if prefix + "azimuth_deg" in entries else 0.0,
        elevation_deg=_get_float(entries, prefix + "elevation_deg") if prefix + "elevation_deg" in entries else 0.0,
        spread_deg=_get_float(entries, prefix + "spread_deg") if prefix + "spread_deg" in entries else 10.0,
        gain=_get_float(entries, prefix + "gain") if prefix + "gain" in entries else 1.0,
    )


def config_from_entries(entries: dict) -> ExperimentConfig:
    known_scalar = entries.get("scattering.bs.kind", BS_UNCORRELATED)
    return ExperimentConfig(
        ris_geom=ArrayGeometry(
            _get_int(entries, "geometry.ris.rows_h"),
            _get_int(entries, "geometry.ris.cols_v"),
            _get_float(entries, "geometry.ris.spacing"),
        ),
        bs_geom=ArrayGeometry(
            _get_int(entries, "geometry.bs.rows_h"),
            _get_int(entries, "geometry.bs.cols_v"),
            _get_float(entries, "geometry.bs.spacing"),
        ),
        scatter_h=_scatter(entries, "h"),
        scatter_g=_scatter(entries, "g"),
        scatter_e=_scatter(entries, "e"),
        bs_kind=known_scalar,
        scatter_bs=_scatter(entries, "bs") if known_scalar != BS_UNCORRELATED else ScatterSettings(kind=ISOTROPIC),
        tau=_get_int(entries, "pilot.tau"),
        tau_c=_get_int(entries, "pilot.tau_c"),
        snr_db=_get_float(entries, "power.snr_db"),
        sir_db=_get_float(entries, "power.sir_db"),
        rho=_get_float(entries, "power.rho"),
        rho_tr=_get_float(entries, "power.rho_tr"),
        sweep_var=entries["sweep.variable"],
        sweep_values=_get_float_list(entries, "sweep.values"),
        estimators=_get_list(entries, "estimators"),
        optimizer=OptimizerConfig(
            alpha=_get_float(entries, "optimizer.alpha"),
            eps_outer=_get_float(entries, "optimizer.eps_outer"),
            eps_inner=_get_float(entries, "optimizer.eps_inner"),
            inner_iters=_get_int(entries, "optimizer.inner_iters"),
            max_outer=_get_int(entries, "optimizer.max_outer"),
        ),
        trials=_get_int(entries, "trials"),
        seed=_get_int(entries, "seed"),
        workers=_get_int(entries, "workers"),
        output=entries.get("output"),
        trace_output=entries.get("trace_output"),
    )


def load_config(path: Optional[str] = None, preset: str = "desk",
                overrides: Optional[dict] = None) -> ExperimentConfig:
    """Assemble a config from a preset, an optional file and CLI overrides."""
    if preset not in PRESETS:
        raise ValidationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    entries = dict(PRESETS[preset])
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                entries.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    if overrides:
        entries.update({k: str(v) for k, v in overrides.items() if v is not None})
    return config_from_entries(entries)


def with_updates(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    return replace(cfg, **kwargs)


def snr_to_noise_power(snr_db: float, rho: float) -> float:
    return rho * 10.0 ** (-snr_db / 10.0)


def square_geometry(num_elements: int, spacing: float) -> ArrayGeometry:
    side = int(round(np.sqrt(num_elements)))
    if side * side != num_elements:
        raise ValidationError(f"RIS size sweep needs square element counts, got {num_elements}")
    return ArrayGeometry(side, side, spacing)
