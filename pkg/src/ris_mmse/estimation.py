"""LMMSE, LS and reduced-subspace LS estimators for the cascaded channel."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import hermitize, herm_solve
from .errors import InsufficientPilotsError, NumericalError, ValidationError
from .phases import PhaseConfiguration
from .spatial import ScenarioStatistics, signal_subspace, training_emi_covariance

# Reporting floor for degenerate (error-free) trials.
RMSE_FLOOR_DB = -200.0


@dataclass(frozen=True, eq=False)
class EstimationResult:
    """Estimate plus its closed-form mean square error."""

    xhat: np.ndarray
    analytic_mse: float
    method: str


def training_observation_covariance(phase: PhaseConfiguration,
                                    stats: ScenarioStatistics) -> np.ndarray:
    """Covariance of the training observation, normalized by the pilot power."""
    phi_nt = phase.expanded(stats.num_bs)
    r_w = training_emi_covariance(phase, stats)
    n_tau = phi_nt.shape[0]
    return hermitize(
        phi_nt @ stats.R_x @ phi_nt.conj().T
        + (stats.sigma_e2 / stats.rho_tr) * r_w
        + (stats.sigma2 / stats.rho_tr) * np.eye(n_tau)
    )


@dataclass(frozen=True, eq=False)
class LinearEstimator:
    """Precomputed linear filter, reusable across Monte-Carlo trials.

    ``matrix`` multiplies the training observation (already divided by the
    pilot amplitude); ``error_cov`` is the estimation-error covariance when
    the estimator admits one in closed form (LMMSE), else None.
    """

    matrix: np.ndarray
    analytic_mse: float
    method: str
    error_cov: Optional[np.ndarray] = None

    def estimate(self, y_tr: np.ndarray, rho_tr: float) -> EstimationResult:
        xhat = self.matrix @ y_tr / np.sqrt(rho_tr)
        return EstimationResult(xhat=xhat, analytic_mse=self.analytic_mse, method=self.method)


def lmmse_filter(phase: PhaseConfiguration, stats: ScenarioStatistics) -> LinearEstimator:
    """LMMSE filter R_x Phi^H R_y^{-1} with its error covariance and MSE."""
    phi_nt = phase.expanded(stats.num_bs)
    r_y = training_observation_covariance(phase, stats)
    a = herm_solve(r_y, phi_nt @ stats.R_x).conj().T
    r_err = hermitize(stats.R_x - a @ phi_nt @ stats.R_x)
    mse = float(np.real(np.trace(r_err)))
    return LinearEstimator(matrix=a, analytic_mse=mse, method="lmmse", error_cov=r_err)


def lmmse_estimate(y_tr: np.ndarray, phase: PhaseConfiguration,
                   stats: ScenarioStatistics) -> EstimationResult:
    """LMMSE estimate of the cascaded channel from the training observation."""
    return lmmse_filter(phase, stats).estimate(y_tr, stats.rho_tr)


def lmmse_error_stats(phase: PhaseConfiguration,
                      stats: ScenarioStatistics) -> tuple[np.ndarray, float]:
    """Error covariance R_x - R_x Q R_x and its trace (the MSE)."""
    filt = lmmse_filter(phase, stats)
    return filt.error_cov, filt.analytic_mse


def ls_filter(phase: PhaseConfiguration, stats: ScenarioStatistics) -> LinearEstimator:
    """Plain least-squares filter; requires tau >= M."""
    m = stats.num_ris
    if phase.tau < m:
        raise InsufficientPilotsError(
            f"LS needs tau >= M, got tau = {phase.tau} < M = {m}")
    phi_nt = phase.expanded(stats.num_bs)
    gram = hermitize(phi_nt.conj().T @ phi_nt)
    _check_rank(gram, "LS Gram matrix")
    a = herm_solve(gram, phi_nt.conj().T)
    r_w = training_emi_covariance(phase, stats)
    gram_inv = herm_solve(gram, np.eye(gram.shape[0]))
    mse = float(np.real(
        (stats.sigma_e2 / stats.rho_tr) * np.trace(a @ r_w @ a.conj().T)
        + (stats.sigma2 / stats.rho_tr) * np.trace(gram_inv)
    ))
    return LinearEstimator(matrix=a, analytic_mse=mse, method="ls")


def ls_estimate(y_tr: np.ndarray, phase: PhaseConfiguration,
                stats: ScenarioStatistics) -> EstimationResult:
    return ls_filter(phase, stats).estimate(y_tr, stats.rho_tr)


def rsls_filter(phase: PhaseConfiguration, stats: ScenarioStatistics,
                u_s: Optional[np.ndarray] = None) -> LinearEstimator:
    """Reduced-subspace LS filter restricted to the signal subspace of R_x.

    Needs only enough pilots to resolve the signal subspace; a singular
    reduced Gram matrix raises InsufficientPilotsError.
    """
    if u_s is None:
        u_s, _ = signal_subspace(stats.R_x)
    rank = u_s.shape[1]
    n = stats.num_bs
    if phase.tau * n < rank:
        raise InsufficientPilotsError(
            f"RS-LS needs tau >= rank/N = {rank}/{n}, got tau = {phase.tau}")
    phi_nt = phase.expanded(n)
    proj = phi_nt @ u_s
    gram = hermitize(proj.conj().T @ proj)
    _check_rank(gram, "RS-LS reduced Gram matrix")
    try:
        core = herm_solve(gram, proj.conj().T)
    except NumericalError as exc:
        raise InsufficientPilotsError("reduced Gram matrix is singular") from exc
    a = u_s @ core
    r_w = training_emi_covariance(phase, stats)
    gram_inv = herm_solve(gram, np.eye(rank))
    mse = float(np.real(
        (stats.sigma_e2 / stats.rho_tr) * np.trace(a @ r_w @ a.conj().T)
        + (stats.sigma2 / stats.rho_tr) * np.trace(gram_inv)
    ))
    return LinearEstimator(matrix=a, analytic_mse=mse, method="rsls")


def rsls_estimate(y_tr: np.ndarray, phase: PhaseConfiguration, stats: ScenarioStatistics,
                  u_s: Optional[np.ndarray] = None) -> EstimationResult:
    return rsls_filter(phase, stats, u_s).estimate(y_tr, stats.rho_tr)


def _check_rank(gram: np.ndarray, name: str, rel_tol: float = 1e-10) -> None:
    w = np.linalg.eigvalsh(gram)
    if w[-1] <= 0 or w[0] < rel_tol * w[-1]:
        raise InsufficientPilotsError(f"{name} is singular")


def empirical_rmse(sq_errors: np.ndarray, num_ris: int) -> float:
    """Relative MSE in dB: 10 log10 of the trial mean of ||x - xhat||^2 / M.

    Error-free runs are reported at the -200 dB floor instead of -inf.
    """
    sq_errors = np.asarray(sq_errors, dtype=float)
    if sq_errors.size == 0:
        raise ValidationError("empirical_rmse needs at least one trial")
    mean = float(np.mean(sq_errors)) / num_ris
    if mean <= 0.0:
        return RMSE_FLOOR_DB
    return max(10.0 * np.log10(mean), RMSE_FLOOR_DB)


def rmse_standard_error_db(sq_errors: np.ndarray, num_ris: int) -> float:
    """Delta-method standard error of the dB-scale relative MSE."""
    sq_errors = np.asarray(sq_errors, dtype=float) / num_ris
    mean = float(np.mean(sq_errors))
    if mean <= 0.0 or sq_errors.size < 2:
        return 0.0
    se_lin = float(np.std(sq_errors, ddof=1)) / np.sqrt(sq_errors.size)
    return (10.0 / np.log(10.0)) * se_lin / mean
