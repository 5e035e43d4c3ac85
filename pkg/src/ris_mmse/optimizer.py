"""Alternating optimization of the RIS phases for both system phases.

The training-phase objective (channel-estimation MSE with the linear
filter held fixed) and the data-phase objective (combining MSE with the
combiner held fixed) are both convex quadratics in the phase entries; the
inner solver is a diagonally scaled Newton descent followed by projection
onto the unit-modulus set.

Gradients follow the Wirtinger convention: a gradient entry is
2 * df/d(conj(z)), the Hessian diagonal 2 * d2f/(d conj(z) dz), so their
ratio forms the exact Newton step on separable quadratics.  Analytic forms
were validated against central finite differences; see gradcheck.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._linalg import herm_solve
from .combining import CombinerResult, combining_mse, mmse_combiner
from .errors import NumericalError, ValidationError
from .estimation import training_observation_covariance
from .phases import PhaseConfiguration
from .spatial import ScenarioStatistics

# Hessian diagonal entries at or below this level trigger the plain
# gradient-step fallback for that coordinate.
HESS_FLOOR = 1e-14

# Objective increases beyond this slack indicate the projected step went
# uphill; the outer loop then keeps the previous iterate and stops.
MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs of the alternating optimization loops."""

    alpha: float = 0.5
    eps_outer: float = 1e-5
    eps_inner: float = 1e-8
    inner_iters: int = 1
    max_outer: int = 500

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValidationError("step size alpha must lie in (0, 1]")
        if self.eps_outer <= 0 or self.eps_inner <= 0:
            raise ValidationError("tolerances must be positive")
        if self.inner_iters < 1 or self.max_outer < 1:
            raise ValidationError("iteration counts must be at least 1")


@dataclass(eq=False)
class AoTrace:
    """Objective history of one alternating-optimization run."""

    objectives: np.ndarray
    phase: PhaseConfiguration
    iterations: int
    converged: bool
    stopped_uphill: bool = field(default=False)


# ---------------------------------------------------------------------------
# Training phase: filter update, objective, derivatives


def lambda_update(phase: PhaseConfiguration, stats: ScenarioStatistics) -> np.ndarray:
    """MSE-optimal linear filter for the current phases (MN x N tau)."""
    phi_nt = phase.expanded(stats.num_bs)
    r_y = training_observation_covariance(phase, stats)
    return herm_solve(r_y, phi_nt @ stats.R_x).conj().T


def training_mse_objective(lam: np.ndarray, phase: PhaseConfiguration,
                           stats: ScenarioStatistics) -> float:
    """Channel-estimation MSE for an arbitrary filter/phase pair."""
    phi_nt = phase.expanded(stats.num_bs)
    r_y = training_observation_covariance(phase, stats)
    cross = lam @ phi_nt @ stats.R_x
    val = np.trace(lam @ r_y @ lam.conj().T) - 2.0 * np.real(np.trace(cross)) \
        + np.trace(stats.R_x)
    val = complex(val)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise NumericalError(f"training objective has imaginary residue {val.imag:.3e}")
    return float(val.real)


def _compressed_filter_products(lam: np.ndarray,
                                stats: ScenarioStatistics) -> tuple[np.ndarray, np.ndarray]:
    """Collapse the BS dimension out of the filter products.

    Traces against R_gp (x) X reduce to tau x tau / M x tau block sums
    weighted by R_gp, which keeps the per-coordinate gradient cost at the
    RIS dimension instead of the full MN one.  For a single BS antenna
    these are just Lambda^H Lambda and Lambda.
    """
    n = stats.num_bs
    if n == 1:
        # scalar BS correlation still scales both products (unit in the
        # usual SISO normalization)
        gain = float(np.real(stats.R_gp[0, 0]))
        return gain * (lam.conj().T @ lam), gain * lam
    tau = lam.shape[1] // n
    m = stats.num_ris
    t = (lam.conj().T @ lam).reshape(n, tau, n, tau)
    w = np.einsum("ba,aibj->ij", stats.R_gp, t)
    lam_blocks = lam.reshape(n, m, n, tau)
    l_til = np.einsum("ba,ambt->mt", stats.R_gp, lam_blocks)
    return w, l_til


def grad_training(lam: np.ndarray, psi: np.ndarray,
                  stats: ScenarioStatistics) -> np.ndarray:
    """Gradient of the training MSE w.r.t. the (tau, M) phase entries.

    Valid for any complex iterate, not only unit-modulus ones, since the
    objective is quadratic.
    """
    w, l_til = _compressed_filter_products(lam, stats)
    return _grad_training_from_products(w, l_til, psi, stats)


def _grad_training_from_products(w: np.ndarray, l_til: np.ndarray, psi: np.ndarray,
                                 stats: ScenarioStatistics) -> np.ndarray:
    emi_scale = 2.0 * stats.sigma_e2 / stats.rho_tr
    return (
        2.0 * (w @ psi @ stats.R_c)
        + emi_scale * (np.real(np.diag(w))[:, None] * (psi @ stats.R_q))
        - 2.0 * (l_til.conj().T @ stats.R_c)
    )


def hess_diag_training(lam: np.ndarray, psi: np.ndarray,
                       stats: ScenarioStatistics) -> np.ndarray:
    """Diagonal of the training-MSE Hessian, as a (tau, M) array.

    Strictly positive whenever the filter is nonzero (products of the
    positive diagonals of the correlation matrices with diag(W) >= 0); the
    quadratic term makes it independent of the iterate itself.
    """
    del psi  # quadratic objective: the Hessian is constant
    w, _ = _compressed_filter_products(lam, stats)
    d = np.real(np.diag(w))
    cols = np.real(np.diag(stats.R_c)) \
        + (stats.sigma_e2 / stats.rho_tr) * np.real(np.diag(stats.R_q))
    return 2.0 * np.outer(d, cols)


# ---------------------------------------------------------------------------
# Data phase: objective and derivatives w.r.t. the phase vector


def _data_kernel(xhat: np.ndarray, error_cov: np.ndarray,
                 stats: ScenarioStatistics) -> np.ndarray:
    """Quadratic kernel of the data-phase MSE: estimate outer product plus
    estimation-error and (scaled) EMI covariances."""
    return np.outer(xhat, xhat.conj()) + error_cov \
        + (stats.sigma_e2 / stats.rho) * np.kron(stats.R_gp, stats.R_q)


def _data_mse_from_kernel(k: np.ndarray, v: np.ndarray, phi: np.ndarray,
                          xhat: np.ndarray, stats: ScenarioStatistics) -> float:
    n, m = stats.num_bs, stats.num_ris
    m_til = _stacked_phase_product(k, v, n, m)
    quad = np.real(phi @ (m_til @ phi.conj()))  # phi^T Mtilde phi*, real by Hermitian-ness
    gain = np.real(np.vdot(v, xhat.reshape(n, m) @ phi))
    return float(1.0 + stats.rho * quad + stats.sigma2 * np.real(np.vdot(v, v))
                 - 2.0 * np.sqrt(stats.rho) * gain)


def data_mse_objective(v: np.ndarray, phi: np.ndarray, xhat: np.ndarray,
                       error_cov: np.ndarray, stats: ScenarioStatistics) -> float:
    """Combining MSE for an arbitrary combiner/phase pair (phi is a plain
    complex M-vector, not necessarily unit modulus)."""
    return _data_mse_from_kernel(_data_kernel(xhat, error_cov, stats), v, phi, xhat, stats)


def _stacked_phase_product(k: np.ndarray, v: np.ndarray, n: int, m: int) -> np.ndarray:
    """Compress the MN-dim quadratic kernel with the combiner: (v (x) I)^H K (v (x) I)."""
    if n == 1:
        return (np.abs(v[0]) ** 2) * k
    kb = k.reshape(n, m, n, m)
    return np.einsum("a,aibj,b->ij", v.conj(), kb, v)


def _grad_data_from_kernel(k: np.ndarray, v: np.ndarray, phi: np.ndarray,
                           xhat: np.ndarray, stats: ScenarioStatistics) -> np.ndarray:
    n, m = stats.num_bs, stats.num_ris
    m_til = _stacked_phase_product(k, v, n, m)
    linear = v @ xhat.conj().reshape(n, m)
    return 2.0 * stats.rho * (m_til.T @ phi) - 2.0 * np.sqrt(stats.rho) * linear


def grad_data(v: np.ndarray, phi: np.ndarray, xhat: np.ndarray, error_cov: np.ndarray,
              stats: ScenarioStatistics) -> np.ndarray:
    """Gradient of the combining MSE w.r.t. the phase vector (length M)."""
    return _grad_data_from_kernel(_data_kernel(xhat, error_cov, stats), v, phi, xhat, stats)


def hess_diag_data(v: np.ndarray, phi: np.ndarray, xhat: np.ndarray,
                   error_cov: np.ndarray, stats: ScenarioStatistics) -> np.ndarray:
    """Diagonal of the data-phase Hessian (length M), nonnegative by PSD-ness."""
    del phi  # quadratic objective again
    n, m = stats.num_bs, stats.num_ris
    k = _data_kernel(xhat, error_cov, stats)
    m_til = _stacked_phase_product(k, v, n, m)
    return 2.0 * stats.rho * np.real(np.diag(m_til))


# ---------------------------------------------------------------------------
# Projected descent inner loop and the two outer AO loops


def _descent(psi: np.ndarray, grad_fn: Callable[[np.ndarray], np.ndarray],
             hess_fn: Callable[[np.ndarray], np.ndarray],
             cfg: OptimizerConfig) -> np.ndarray:
    """Diagonally scaled Newton steps on the unconstrained iterate."""
    for _ in range(cfg.inner_iters):
        g = grad_fn(psi)
        if np.linalg.norm(g) < cfg.eps_inner:
            break
        h = hess_fn(psi)
        safe = h > HESS_FLOOR
        step = np.where(safe, g / np.where(safe, h, 1.0), g)
        psi = psi - cfg.alpha * step
    return psi


def pg_inner_training(phase: PhaseConfiguration, lam: np.ndarray,
                      stats: ScenarioStatistics, cfg: OptimizerConfig) -> PhaseConfiguration:
    """One inner projected-gradient pass; returns the projected phases."""
    psi = _descent(
        phase.matrix,
        lambda p: grad_training(lam, p, stats),
        lambda p: hess_diag_training(lam, p, stats),
        cfg,
    )
    return PhaseConfiguration.project(psi)


def pg_inner_data(phase: PhaseConfiguration, v: np.ndarray, xhat: np.ndarray,
                  error_cov: np.ndarray, stats: ScenarioStatistics,
                  cfg: OptimizerConfig) -> PhaseConfiguration:
    theta = _descent(
        phase.phi,
        lambda p: grad_data(v, p, xhat, error_cov, stats),
        lambda p: hess_diag_data(v, p, xhat, error_cov, stats),
        cfg,
    )
    return PhaseConfiguration.project(theta[None, :])


def _alternate(phase: PhaseConfiguration,
               update_fn: Callable[[PhaseConfiguration], object],
               objective_fn: Callable[[object, PhaseConfiguration], float],
               step_fn: Callable[[PhaseConfiguration, object], PhaseConfiguration],
               cfg: OptimizerConfig) -> tuple[AoTrace, object]:
    """Shared AO outer loop: filter update, objective, projected step.

    The objective never increases along the recorded trace: a projected
    step that would move uphill (beyond slack) is rejected and the loop
    stops at the previous iterate.
    """
    aux = update_fn(phase)
    obj = objective_fn(aux, phase)
    objectives = [obj]
    converged = False
    stopped_uphill = False
    for _ in range(cfg.max_outer):
        candidate = step_fn(phase, aux)
        cand_aux = update_fn(candidate)
        cand_obj = objective_fn(cand_aux, candidate)
        if cand_obj > obj + MONOTONE_SLACK:
            stopped_uphill = True
            converged = True
            break
        phase, aux = candidate, cand_aux
        objectives.append(cand_obj)
        rel_change = abs(obj - cand_obj) / max(abs(cand_obj), 1e-300)
        obj = cand_obj
        if rel_change <= cfg.eps_outer:
            converged = True
            break
    trace = AoTrace(
        objectives=np.asarray(objectives),
        phase=phase,
        iterations=len(objectives) - 1,
        converged=converged,
        stopped_uphill=stopped_uphill,
    )
    return trace, aux


def ao_training(phase0: PhaseConfiguration, stats: ScenarioStatistics,
                cfg: OptimizerConfig | None = None) -> AoTrace:
    """Minimize the channel-estimation MSE over unit-modulus training phases."""
    cfg = cfg or OptimizerConfig()
    trace, _ = _alternate(
        phase0,
        update_fn=lambda p: lambda_update(p, stats),
        objective_fn=lambda lam, p: training_mse_objective(lam, p, stats),
        step_fn=lambda p, lam: pg_inner_training(p, lam, stats, cfg),
        cfg=cfg,
    )
    return trace


def ao_data(phase0: PhaseConfiguration, xhat: np.ndarray, error_cov: np.ndarray,
            stats: ScenarioStatistics,
            cfg: OptimizerConfig | None = None) -> tuple[AoTrace, CombinerResult]:
    """Minimize the combining MSE over the unit-modulus data phases.

    Returns the trace together with the final conditional-MMSE combiner.
    """
    cfg = cfg or OptimizerConfig()
    trace, _ = _alternate(
        phase0,
        update_fn=lambda p: mmse_combiner(p, xhat, error_cov, stats).v,
        objective_fn=lambda v, p: combining_mse(p, v, xhat, error_cov, stats),
        step_fn=lambda p, v: pg_inner_data(p, v, xhat, error_cov, stats, cfg),
        cfg=cfg,
    )
    return trace, mmse_combiner(trace.phase, xhat, error_cov, stats)


# ---------------------------------------------------------------------------
# Finite-difference oracle


def finite_diff_gradient(objective: Callable[[np.ndarray], float], point: np.ndarray,
                         step: float = 1e-5) -> np.ndarray:
    """Central-difference conjugate gradient df/d(conj z) of a real objective.

    Real and imaginary parts are perturbed independently and assembled as
    (df/dRe + j df/dIm) / 2.  Analytic gradients in this module carry an
    extra factor 2 by convention.
    """
    _check_fd_step(step)
    point = np.asarray(point, dtype=complex)
    grad = np.zeros(point.shape, dtype=complex)
    it = np.nditer(np.zeros(point.shape), flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        grad[idx] = 0.5 * (_central_diff(objective, point, idx, step, 1.0)
                           + 1j * _central_diff(objective, point, idx, step, 1j))
    return grad


def finite_diff_hessian_diag(objective: Callable[[np.ndarray], float], point: np.ndarray,
                             step: float = 1e-4) -> np.ndarray:
    """Central-difference d2f/(d conj(z) dz) along the diagonal."""
    _check_fd_step(step)
    point = np.asarray(point, dtype=complex)
    f0 = _checked_eval(objective, point)
    diag = np.zeros(point.shape, dtype=float)
    it = np.nditer(np.zeros(point.shape), flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        d2 = (_second_diff(objective, point, idx, step, 1.0, f0)
              + _second_diff(objective, point, idx, step, 1j, f0))
        diag[idx] = 0.25 * d2
    return diag


def _check_fd_step(step: float) -> None:
    if not 1e-7 <= step <= 1e-4:
        raise ValidationError("finite-difference step must lie in [1e-7, 1e-4]")


def _checked_eval(objective, point) -> float:
    val = float(objective(point))
    if not np.isfinite(val):
        raise NumericalError("objective returned a non-finite value")
    return val


def _central_diff(objective, point, idx, step, direction) -> float:
    plus = point.copy()
    plus[idx] += step * direction
    minus = point.copy()
    minus[idx] -= step * direction
    return (_checked_eval(objective, plus) - _checked_eval(objective, minus)) / (2.0 * step)


def _second_diff(objective, point, idx, step, direction, f0) -> float:
    plus = point.copy()
    plus[idx] += step * direction
    minus = point.copy()
    minus[idx] -= step * direction
    return (_checked_eval(objective, plus) - 2.0 * f0
            + _checked_eval(objective, minus)) / step**2
