"""Monte-Carlo sweep orchestration and CSV emission.

Each sweep point builds its scenario statistics, optimizes the phases
where requested and evaluates all methods on shared per-trial draws, so
method comparisons are paired.  Trials own deterministic RNG streams
derived from (seed, point index, trial index); results are therefore
independent of worker count and execution order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import crandn
from .channel import sample_channel_realization, sample_unit_emi, simulate_training, \
    training_observation, trial_rng
from .combining import HardeningAccumulator, hardening_terms, mmse_combiner
from .config import ExperimentConfig, NO_EMI_SIR_DB, snr_to_noise_power, square_geometry
from .errors import InsufficientPilotsError, ValidationError
from .estimation import (LinearEstimator, empirical_rmse, lmmse_filter, ls_filter,
                         rmse_standard_error_db, rsls_filter)
from .gradcheck import run_gradient_checks
from .optimizer import ao_data, ao_training
from .phases import PhaseConfiguration
from .spatial import ScenarioStatistics, build_correlation, derive_scenario

CSV_HEADER = "sweep_var,sweep_value,method,metric,unit,value,stderr,trials,seed"


@dataclass(frozen=True)
class SweepRow:
    sweep_var: str
    sweep_value: float
    method: str
    metric: str
    unit: str
    value: Optional[float]
    stderr: Optional[float]
    trials: int
    seed: int

    def to_csv(self) -> str:
        def fmt(x):
            return "NA" if x is None else format(float(x), ".12g")

        return ",".join([
            self.sweep_var, format(float(self.sweep_value), ".12g"), self.method,
            self.metric, self.unit, fmt(self.value), fmt(self.stderr),
            str(self.trials), str(self.seed),
        ])


@dataclass
class SweepResult:
    sweep_var: str
    rows: list

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (r.sweep_value, r.method, r.metric))

    def to_csv_text(self) -> str:
        lines = [CSV_HEADER] + [r.to_csv() for r in self.sorted_rows()]
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv_text())

    def value(self, sweep_value: float, method: str, metric: str) -> Optional[float]:
        for r in self.rows:
            if (r.method == method and r.metric == metric
                    and np.isclose(r.sweep_value, sweep_value)):
                return r.value
        raise KeyError(f"no row for {method}/{metric} at {sweep_value}")

    def stderr(self, sweep_value: float, method: str, metric: str) -> Optional[float]:
        for r in self.rows:
            if (r.method == method and r.metric == metric
                    and np.isclose(r.sweep_value, sweep_value)):
                return r.stderr
        raise KeyError(f"no row for {method}/{metric} at {sweep_value}")


# ---------------------------------------------------------------------------
# Scenario construction per sweep point


@dataclass(frozen=True)
class PointSettings:
    ris_geom: object
    tau: int
    snr_db: float
    sir_db: float
    delta_e_deg: float


def point_settings(cfg: ExperimentConfig, value: float) -> PointSettings:
    ris_geom = cfg.ris_geom
    tau = cfg.tau
    snr_db = cfg.snr_db
    sir_db = cfg.sir_db
    delta_e = cfg.scatter_e.spread_deg
    if cfg.sweep_var == "snr_db":
        snr_db = value
    elif cfg.sweep_var == "sir_db":
        sir_db = value
    elif cfg.sweep_var == "tau":
        tau = int(value)
        if tau < 1:
            raise ValidationError("tau sweep values must be >= 1")
    elif cfg.sweep_var == "ris_m":
        ris_geom = square_geometry(int(value), cfg.ris_geom.spacing)
        tau = int(value)  # pilot length tracks the element count in size sweeps
    elif cfg.sweep_var == "delta_e_deg":
        delta_e = value
    return PointSettings(ris_geom, tau, snr_db, sir_db, delta_e)


def build_scenario(cfg: ExperimentConfig, settings: PointSettings,
                   no_emi: bool = False) -> ScenarioStatistics:
    from dataclasses import replace as dc_replace

    r_h = build_correlation(settings.ris_geom, cfg.scatter_h.to_spec())
    r_g = build_correlation(settings.ris_geom, cfg.scatter_g.to_spec())
    scatter_e = dc_replace(cfg.scatter_e, spread_deg=settings.delta_e_deg)
    r_e = build_correlation(settings.ris_geom, scatter_e.to_spec())
    n = cfg.bs_geom.num_elements
    if cfg.bs_kind == "uncorrelated" or n == 1:
        r_gp = np.eye(n, dtype=complex)
    else:
        r_gp = build_correlation(cfg.bs_geom, cfg.scatter_bs.to_spec())
    sir_db = NO_EMI_SIR_DB if no_emi else settings.sir_db
    return derive_scenario(
        r_h, r_g, r_gp, r_e,
        sigma2=snr_to_noise_power(settings.snr_db, cfg.rho),
        sigma_e2=snr_to_noise_power(sir_db, cfg.rho),
        rho_tr=cfg.rho_tr,
        rho=cfg.rho,
    )


# ---------------------------------------------------------------------------
# RMSE sweep


@dataclass(frozen=True)
class _MethodSetup:
    name: str
    phase: Optional[PhaseConfiguration]
    filt: Optional[LinearEstimator]
    no_emi: bool


def _prepare_rmse_point(cfg: ExperimentConfig, settings: PointSettings
                        ) -> tuple[list, ScenarioStatistics, ScenarioStatistics]:
    stats = build_scenario(cfg, settings)
    stats0 = build_scenario(cfg, settings, no_emi=True)
    m = settings.ris_geom.num_elements
    phi0 = PhaseConfiguration.dft(settings.tau, m)

    setups = []
    for name in cfg.estimators:
        try:
            if name == "mmse":
                phase = ao_training(phi0, stats, cfg.optimizer).phase
                setups.append(_MethodSetup(name, phase, lmmse_filter(phase, stats), False))
            elif name == "mmse-phi0":
                setups.append(_MethodSetup(name, phi0, lmmse_filter(phi0, stats), False))
            elif name == "rsls":
                setups.append(_MethodSetup(name, phi0, rsls_filter(phi0, stats), False))
            elif name == "ls":
                setups.append(_MethodSetup(name, phi0, ls_filter(phi0, stats), False))
            elif name == "mmse-no-emi":
                phase = ao_training(phi0, stats0, cfg.optimizer).phase
                setups.append(_MethodSetup(name, phase, lmmse_filter(phase, stats0), True))
            elif name == "rsls-no-emi":
                setups.append(_MethodSetup(name, phi0, rsls_filter(phi0, stats0), True))
        except InsufficientPilotsError:
            setups.append(_MethodSetup(name, None, None, name.endswith("no-emi")))
    return setups, stats, stats0


def _rmse_chunk(args) -> tuple[int, dict]:
    """Squared errors for trials [t0, t1); shared draws across methods."""
    setups, stats, stats0, seed, point_idx, t0, t1, tau = args
    active = [s for s in setups if s.filt is not None]
    out = {s.name: np.empty(t1 - t0) for s in active}
    n = stats.num_bs
    for t in range(t0, t1):
        rng = trial_rng(seed, point_idx, t)
        real = sample_channel_realization(stats, rng)
        unit_emi = sample_unit_emi(stats, rng, tau)
        unit_noise = crandn(rng, n * tau)
        for s in active:
            st = stats0 if s.no_emi else stats
            y = training_observation(s.phase, real, unit_emi, unit_noise, st)
            xhat = s.filt.estimate(y, st.rho_tr).xhat
            out[s.name][t - t0] = float(np.sum(np.abs(real.x - xhat) ** 2))
    return t0, out


def _run_chunks(worker, args_list, workers: int) -> list:
    if workers <= 1 or len(args_list) <= 1:
        return [worker(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, args_list))


def _chunk_ranges(trials: int, workers: int) -> list:
    bounds = np.linspace(0, trials, num=max(workers, 1) * 4 + 1, dtype=int)
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_rmse_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Channel-estimation RMSE versus the configured sweep variable."""
    if cfg.sweep_var == "outer_iter":
        return _run_convergence_sweep(cfg)
    rows = []
    for p_idx, value in enumerate(cfg.sweep_values):
        settings = point_settings(cfg, value)
        setups, stats, stats0 = _prepare_rmse_point(cfg, settings)
        m = settings.ris_geom.num_elements

        errors = {s.name: np.empty(cfg.trials) for s in setups if s.filt is not None}
        args = [(setups, stats, stats0, cfg.seed, p_idx, a, b, settings.tau)
                for a, b in _chunk_ranges(cfg.trials, cfg.workers)]
        for t0, chunk in _run_chunks(_rmse_chunk, args, cfg.workers):
            for name, vals in chunk.items():
                errors[name][t0:t0 + len(vals)] = vals

        for s in setups:
            if s.filt is None:
                rows.append(SweepRow(cfg.sweep_var, value, s.name, "rmse", "dB",
                                     None, None, cfg.trials, cfg.seed))
                rows.append(SweepRow(cfg.sweep_var, value, s.name, "mse", "linear",
                                     None, None, cfg.trials, cfg.seed))
                continue
            sq = errors[s.name]
            rows.append(SweepRow(cfg.sweep_var, value, s.name, "rmse", "dB",
                                 empirical_rmse(sq, m), rmse_standard_error_db(sq, m),
                                 cfg.trials, cfg.seed))
            mse_lin = float(np.mean(sq)) / m
            se_lin = float(np.std(sq, ddof=1)) / np.sqrt(sq.size) / m if sq.size > 1 else 0.0
            rows.append(SweepRow(cfg.sweep_var, value, s.name, "mse", "linear",
                                 mse_lin, se_lin, cfg.trials, cfg.seed))
    result = SweepResult(cfg.sweep_var, rows)
    _maybe_write_outputs(cfg, result)
    return result


# ---------------------------------------------------------------------------
# Convergence sweep (RMSE of the analytic objective vs outer iteration)


def _run_convergence_sweep(cfg: ExperimentConfig) -> SweepResult:
    settings = point_settings(cfg, cfg.sweep_values[0])
    stats = build_scenario(cfg, settings)
    m = settings.ris_geom.num_elements
    max_k = int(max(cfg.sweep_values))
    opt = cfg.optimizer
    from dataclasses import replace as dc_replace
    opt = dc_replace(opt, max_outer=max(max_k, 1))

    inits = {
        "rsls-init": PhaseConfiguration.dft(settings.tau, m),
        "random-init": PhaseConfiguration.random(settings.tau, m, trial_rng(cfg.seed, 7, 0)),
    }
    rows = []
    for name, phase0 in inits.items():
        trace = ao_training(phase0, stats, opt)
        objs = trace.objectives
        for k in cfg.sweep_values:
            idx = min(int(k), len(objs) - 1)  # converged runs hold their last value
            rmse_db = 10.0 * np.log10(max(objs[idx] / m, 1e-30))
            rows.append(SweepRow("outer_iter", float(int(k)), name, "rmse", "dB",
                                 rmse_db, 0.0, 1, cfg.seed))
    result = SweepResult("outer_iter", rows)
    _maybe_write_outputs(cfg, result)
    return result


# ---------------------------------------------------------------------------
# SE sweep


def _se_chunk(args) -> tuple[int, dict]:
    """Hardening-bound statistics for trials [t0, t1)."""
    (train_phase, filt, phi_d0, stats, cfg_opt, seed, point_idx, t0, t1) = args
    out = {name: {"gain": [], "emi": [], "norm": []} for name in ("mmse-ao", "mmse-phi0")}
    for t in range(t0, t1):
        rng = trial_rng(seed, point_idx, t)
        real = sample_channel_realization(stats, rng)
        y_tr = simulate_training(train_phase, real, stats, rng)
        xhat = filt.estimate(y_tr, stats.rho_tr).xhat

        v0 = mmse_combiner(phi_d0, xhat, filt.error_cov, stats).v
        _store(out["mmse-phi0"], hardening_terms(phi_d0, v0, real.x, stats))

        trace, comb = ao_data(phi_d0, xhat, filt.error_cov, stats, cfg_opt)
        _store(out["mmse-ao"], hardening_terms(trace.phase, comb.v, real.x, stats))
    return t0, out


def _store(store, terms) -> None:
    store["gain"].append(terms[0])
    store["emi"].append(terms[1])
    store["norm"].append(terms[2])


def run_se_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Hardening-bound spectral efficiency versus SNR or pilot length."""
    if cfg.sweep_var not in ("snr_db", "tau", "sir_db"):
        raise ValidationError(f"SE sweep does not support variable {cfg.sweep_var!r}")
    rows = []
    for p_idx, value in enumerate(cfg.sweep_values):
        settings = point_settings(cfg, value)
        if settings.tau >= cfg.tau_c:
            raise ValidationError(
                f"tau = {settings.tau} must stay below tau_c = {cfg.tau_c}")
        stats = build_scenario(cfg, settings)
        m = settings.ris_geom.num_elements

        phi0 = PhaseConfiguration.dft(settings.tau, m)
        train_phase = ao_training(phi0, stats, cfg.optimizer).phase
        filt = lmmse_filter(train_phase, stats)
        phi_d0 = PhaseConfiguration(train_phase.matrix[:1, :])

        store = {name: {"gain": [None] * cfg.trials, "emi": [None] * cfg.trials,
                        "norm": [None] * cfg.trials} for name in ("mmse-ao", "mmse-phi0")}
        args = [(train_phase, filt, phi_d0, stats, cfg.optimizer, cfg.seed, p_idx, a, b)
                for a, b in _chunk_ranges(cfg.trials, cfg.workers)]
        for t0, chunk in _run_chunks(_se_chunk, args, cfg.workers):
            for name, vals in chunk.items():
                count = len(vals["gain"])
                for key in ("gain", "emi", "norm"):
                    store[name][key][t0:t0 + count] = vals[key]

        for name in ("mmse-ao", "mmse-phi0"):
            acc = HardeningAccumulator()
            acc.gains = list(store[name]["gain"])
            acc.emi_forms = list(store[name]["emi"])
            acc.norms = list(store[name]["norm"])
            se, stderr = acc.spectral_efficiency(settings.tau, cfg.tau_c, stats)
            rows.append(SweepRow(cfg.sweep_var, value, name, "se", "bit/s/Hz",
                                 se, stderr, cfg.trials, cfg.seed))
    result = SweepResult(cfg.sweep_var, rows)
    _maybe_write_outputs(cfg, result)
    return result


# ---------------------------------------------------------------------------
# Gradient-check command and output plumbing


def run_gradcheck(instances: int = 50, seed: int = 0, perturb: float = 0.0):
    return run_gradient_checks(instances=instances, seed=seed, perturb=perturb)


def _maybe_write_outputs(cfg: ExperimentConfig, result: SweepResult) -> None:
    if cfg.output:
        result.write_csv(cfg.output)
    if cfg.trace_output:
        _write_ao_trace(cfg)


def _write_ao_trace(cfg: ExperimentConfig) -> None:
    """Objective trace of the phase optimization at the first sweep point."""
    settings = point_settings(cfg, cfg.sweep_values[0])
    stats = build_scenario(cfg, settings)
    phi0 = PhaseConfiguration.dft(settings.tau, settings.ris_geom.num_elements)
    trace = ao_training(phi0, stats, cfg.optimizer)
    lines = ["outer_iter,objective"]
    lines += [f"{k},{format(obj, '.12g')}" for k, obj in enumerate(trace.objectives)]
    with open(cfg.trace_output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
