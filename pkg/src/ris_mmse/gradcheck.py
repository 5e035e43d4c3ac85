"""Cross-validation of the analytic derivatives.

Three independent routes are compared per random instance: the fast
block-compressed forms used by the optimizer, literal trace/Kronecker
evaluations of the same expressions, and central finite differences of the
objectives.  The finite-difference oracle is the authority; the analytic
expressions here are the conjugate-consistent variants it validates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import crandn, hermitize
from .channel import trial_rng
from .errors import ValidationError
from .optimizer import (
    data_mse_objective,
    finite_diff_gradient,
    finite_diff_hessian_diag,
    grad_data,
    grad_training,
    hess_diag_data,
    hess_diag_training,
    lambda_update,
    training_mse_objective,
    _compressed_filter_products,
    _grad_training_from_products,
)
from .phases import PhaseConfiguration
from .spatial import ScenarioStatistics, derive_scenario

GRAD_TOL = 1e-6
HESS_TOL = 1e-5
CONSISTENCY_TOL = 1e-10


def _unit_basis(tau: int, m: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((tau, m))
    e[i, j] = 1.0
    return e


def naive_grad_training(lam: np.ndarray, psi: np.ndarray,
                        stats: ScenarioStatistics) -> np.ndarray:
    """Per-entry trace form of the training gradient, built from the full
    Kronecker products (slow; test reference only)."""
    tau, m = psi.shape
    t = lam.conj().T @ lam
    scale = stats.sigma_e2 / stats.rho_tr
    g = np.zeros((tau, m), dtype=complex)
    for i in range(tau):
        for j in range(m):
            jm = _unit_basis(tau, m, i, j)
            quad = np.kron(stats.R_gp, psi @ stats.R_c @ jm.conj().T)
            emi = np.kron(stats.R_gp,
                          np.diag(np.diag(psi @ stats.R_q @ jm.conj().T)))
            lin = np.kron(stats.R_gp, stats.R_c @ jm.conj().T)
            g[i, j] = 2.0 * (np.trace(t @ quad) + scale * np.trace(t @ emi)
                             - np.trace(lam.conj().T @ lin))
    return g


def naive_hess_diag_training(lam: np.ndarray, psi: np.ndarray,
                             stats: ScenarioStatistics) -> np.ndarray:
    tau, m = psi.shape
    t = lam.conj().T @ lam
    scale = stats.sigma_e2 / stats.rho_tr
    h = np.zeros((tau, m))
    for i in range(tau):
        for j in range(m):
            jm = _unit_basis(tau, m, i, j)
            quad = np.kron(stats.R_gp, jm @ stats.R_c @ jm.conj().T)
            emi = np.kron(stats.R_gp, np.diag(np.diag(jm @ stats.R_q @ jm.conj().T)))
            h[i, j] = 2.0 * np.real(np.trace(t @ quad) + scale * np.trace(t @ emi))
    return h


def naive_grad_data(v: np.ndarray, phi: np.ndarray, xhat: np.ndarray,
                    error_cov: np.ndarray, stats: ScenarioStatistics) -> np.ndarray:
    n, m = stats.num_bs, stats.num_ris
    k = np.outer(xhat, xhat.conj()) + error_cov \
        + (stats.sigma_e2 / stats.rho) * np.kron(stats.R_gp, stats.R_q)
    phi_n = np.kron(np.eye(n), phi[None, :])
    vv = np.outer(v, v.conj())
    g = np.zeros(m, dtype=complex)
    for j in range(m):
        sel = np.zeros((1, m))
        sel[0, j] = 1.0
        j_nm = np.kron(np.eye(n), sel)
        g[j] = 2.0 * stats.rho * np.trace(vv @ phi_n @ k @ j_nm.conj().T) \
            - 2.0 * np.sqrt(stats.rho) * np.trace(np.outer(v, xhat.conj()) @ j_nm.conj().T)
    return g


def naive_hess_diag_data(v: np.ndarray, xhat: np.ndarray, error_cov: np.ndarray,
                         stats: ScenarioStatistics) -> np.ndarray:
    n, m = stats.num_bs, stats.num_ris
    k = np.outer(xhat, xhat.conj()) + error_cov \
        + (stats.sigma_e2 / stats.rho) * np.kron(stats.R_gp, stats.R_q)
    vv = np.outer(v, v.conj())
    h = np.zeros(m)
    for j in range(m):
        sel = np.zeros((1, m))
        sel[0, j] = 1.0
        j_nm = np.kron(np.eye(n), sel)
        h[j] = 2.0 * stats.rho * np.real(np.trace(vv @ j_nm @ k @ j_nm.conj().T))
    return h


# ---------------------------------------------------------------------------
# Random instances and the check suite


def random_psd(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = crandn(rng, dim, dim + 2)
    return hermitize(a @ a.conj().T / (dim + 2))


def random_scenario(rng: np.random.Generator, m: int, n: int) -> ScenarioStatistics:
    return derive_scenario(
        random_psd(rng, m), random_psd(rng, m), random_psd(rng, n), random_psd(rng, m),
        sigma2=float(rng.uniform(0.05, 1.0)),
        sigma_e2=float(rng.uniform(0.05, 1.0)),
        rho_tr=float(rng.uniform(0.5, 2.0)),
        rho=float(rng.uniform(0.5, 2.0)),
    )


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-30)
    return float(np.max(np.abs(a - b)) / scale)


@dataclass
class CheckRow:
    name: str
    max_rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


@dataclass
class GradCheckReport:
    rows: list
    notes: list

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    def format(self) -> str:
        lines = []
        for r in self.rows:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"[{status}] {r.name}: max rel err {r.max_rel_err:.3e} (tol {r.tol:g})")
        lines.extend(self.notes)
        lines.append("gradcheck: " + ("all checks passed" if self.ok else "FAILURES detected"))
        return "\n".join(lines)


def run_gradient_checks(instances: int = 50, seed: int = 0,
                        perturb: float = 0.0,
                        hessian_fd_instances: Optional[int] = None) -> GradCheckReport:
    """Run the full derivative oracle suite on random instances.

    ``perturb`` is a negative-control hook: it adds an offset to the first
    analytic gradient entry so the suite must report a failure.
    """
    if instances < 1:
        raise ValidationError("need at least one instance")
    hessian_fd_instances = hessian_fd_instances or max(10, instances // 5)
    errs = {
        "training gradient vs finite differences": [],
        "training gradient vs trace form": [],
        "training Hessian diag vs finite differences": [],
        "training Hessian diag vs trace form": [],
        "training SISO path vs general block form": [],
        "data gradient vs finite differences": [],
        "data gradient vs trace form": [],
        "data Hessian diag vs finite differences": [],
        "data Hessian diag vs trace form": [],
        "data SISO path vs general block form": [],
    }
    positive = True

    for inst in range(instances):
        rng = trial_rng(seed, 9000, inst)
        m = int(rng.integers(2, 7))
        tau = int(rng.integers(1, 5))
        n = int(rng.integers(1, 3))
        stats = random_scenario(rng, m, n)

        # training phase instance: filter from a feasible random phase
        phase = PhaseConfiguration.random(tau, m, rng)
        lam = lambda_update(phase, stats)
        psi = phase.matrix + 0.3 * crandn(rng, tau, m)

        g_fast = grad_training(lam, psi, stats)
        if perturb and inst == 0:
            g_fast = g_fast.copy()
            g_fast.flat[0] += perturb
        g_naive = naive_grad_training(lam, psi, stats)
        obj = lambda p: training_mse_objective(lam, _as_phase_free(p), stats)
        g_fd = finite_diff_gradient(obj, psi)
        errs["training gradient vs finite differences"].append(_rel_err(g_fast, 2.0 * g_fd))
        errs["training gradient vs trace form"].append(_rel_err(g_fast, g_naive))

        h_fast = hess_diag_training(lam, psi, stats)
        h_naive = naive_hess_diag_training(lam, psi, stats)
        errs["training Hessian diag vs trace form"].append(_rel_err(h_fast, h_naive))
        if inst < hessian_fd_instances:
            h_fd = finite_diff_hessian_diag(obj, psi)
            errs["training Hessian diag vs finite differences"].append(
                _rel_err(h_fast, 2.0 * h_fd))

        if n == 1:
            w, l_til = _general_products(lam, stats)
            g_general = _grad_training_from_products(w, l_til, psi, stats)
            errs["training SISO path vs general block form"].append(_rel_err(g_fast, g_general))

        # data phase instance
        xhat = crandn(rng, n * m)
        err_cov = random_psd(rng, n * m)
        v = crandn(rng, n)
        phi = crandn(rng, m)
        positive &= bool(np.all(hess_diag_data(v, phi, xhat, err_cov, stats) > 0))

        gd_fast = grad_data(v, phi, xhat, err_cov, stats)
        gd_naive = naive_grad_data(v, phi, xhat, err_cov, stats)
        objd = lambda p: data_mse_objective(v, p, xhat, err_cov, stats)
        gd_fd = finite_diff_gradient(objd, phi)
        errs["data gradient vs finite differences"].append(_rel_err(gd_fast, 2.0 * gd_fd))
        errs["data gradient vs trace form"].append(_rel_err(gd_fast, gd_naive))

        hd_fast = hess_diag_data(v, phi, xhat, err_cov, stats)
        hd_naive = naive_hess_diag_data(v, xhat, err_cov, stats)
        errs["data Hessian diag vs trace form"].append(_rel_err(hd_fast, hd_naive))
        if inst < hessian_fd_instances:
            hd_fd = finite_diff_hessian_diag(objd, phi)
            errs["data Hessian diag vs finite differences"].append(_rel_err(hd_fast, 2.0 * hd_fd))

        if n == 1:
            gd_general = _grad_data_general(v, phi, xhat, err_cov, stats)
            errs["data SISO path vs general block form"].append(
                _rel_err(gd_fast, gd_general))

    rows = []
    for name, vals in errs.items():
        tol = HESS_TOL if "Hessian" in name else (
            CONSISTENCY_TOL if ("trace form" in name or "block form" in name) else GRAD_TOL)
        rows.append(CheckRow(name, max(vals) if vals else 0.0, tol))
    rows.append(CheckRow("data Hessian diag positivity (nonzero combiner)",
                         0.0 if positive else 1.0, 0.5))
    notes = [
        "note: analytic forms use the conjugate-consistent variants "
        "validated by the finite-difference oracle (linear data-phase term "
        "carries v, not conj(v))."
    ]
    return GradCheckReport(rows=rows, notes=notes)


def _as_phase_free(psi: np.ndarray):
    """Adapter: training objective expects a phase-like object with
    .matrix/.expanded but the FD oracle perturbs a raw array."""
    return _FreeMatrix(psi)


class _FreeMatrix:
    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.tau = self.matrix.shape[0]

    def expanded(self, n_bs: int) -> np.ndarray:
        return np.kron(np.eye(n_bs), self.matrix)


def _general_products(lam: np.ndarray, stats: ScenarioStatistics):
    """Force the block-sum (general MISO) route even when N = 1."""
    n = stats.num_bs
    tau = lam.shape[1] // n
    m = stats.num_ris
    t = (lam.conj().T @ lam).reshape(n, tau, n, tau)
    w = np.einsum("ba,aibj->ij", stats.R_gp, t)
    lam_blocks = lam.reshape(n, m, n, tau)
    l_til = np.einsum("ba,ambt->mt", stats.R_gp, lam_blocks)
    return w, l_til


def _grad_data_general(v: np.ndarray, phi: np.ndarray, xhat: np.ndarray,
                       error_cov: np.ndarray, stats: ScenarioStatistics) -> np.ndarray:
    """Force the einsum (general MISO) route of the data gradient."""
    n, m = stats.num_bs, stats.num_ris
    k = np.outer(xhat, xhat.conj()) + error_cov \
        + (stats.sigma_e2 / stats.rho) * np.kron(stats.R_gp, stats.R_q)
    kb = k.reshape(n, m, n, m)
    m_til = np.einsum("a,aibj,b->ij", v.conj(), kb, v)
    linear = v @ xhat.conj().reshape(n, m)
    return 2.0 * stats.rho * (m_til.T @ phi) - 2.0 * np.sqrt(stats.rho) * linear
