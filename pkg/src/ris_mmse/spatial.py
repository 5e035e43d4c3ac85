"""Spatial correlation matrices and scenario statistics.

Correlation matrices are built by quadrature of the angular scattering
density against the array response outer products.  A scenario bundles all
correlation matrices together with the power levels and the composite
covariances (Hadamard/Kronecker products) needed by the estimators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import check_hermitian, check_psd, hermitize, psd_sqrt_factor
from .arrays import Angle, ArrayGeometry, HALF_PI, response_matrix
from .errors import NumericalError, QuadratureError, ValidationError
from .phases import PhaseConfiguration

TRUNCATED_GAUSSIAN = "truncated-gaussian"
ISOTROPIC = "isotropic"

# Quadrature defaults: nodes per axis over the truncated support, doubled
# automatically until entries move by less than the convergence tolerance.
_GAUSS_NODES = 64
_ISO_NODES = 128
_MAX_NODES = 2048
_CONV_TOL = 1e-8


@dataclass(frozen=True)
class ScatteringSpec:
    """Angular scattering density of one propagation link.

    ``truncated-gaussian`` places independent Gaussians (std = spread/2) in
    azimuth and elevation, truncated to the spread neighborhood of the
    center and renormalized.  ``isotropic`` is the uniform half-space
    density cos(elevation) / (2 pi).  ``gain`` scales the resulting
    correlation matrix, i.e. every diagonal entry.
    """

    kind: str
    center: Optional[Angle] = None
    spread: float = 0.0
    gain: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (TRUNCATED_GAUSSIAN, ISOTROPIC):
            raise ValidationError(f"unknown scattering kind {self.kind!r}")
        if self.kind == TRUNCATED_GAUSSIAN:
            if self.center is None:
                raise ValidationError("truncated-gaussian scattering needs a center angle")
            if not self.spread > 0:
                raise ValidationError("angular spread must be positive")
        if not self.gain > 0:
            raise ValidationError("gain must be positive")

    @classmethod
    def gaussian_deg(cls, azimuth_deg: float, elevation_deg: float,
                     spread_deg: float, gain: float = 1.0) -> "ScatteringSpec":
        return cls(TRUNCATED_GAUSSIAN, Angle.from_degrees(azimuth_deg, elevation_deg),
                   float(np.deg2rad(spread_deg)), gain)


def _support(spec: ScatteringSpec) -> tuple[tuple[float, float], tuple[float, float]]:
    if spec.kind == ISOTROPIC:
        return (-HALF_PI, HALF_PI), (-HALF_PI, HALF_PI)
    az0, el0 = spec.center.azimuth, spec.center.elevation
    d = spec.spread
    return (
        (max(az0 - d, -HALF_PI), min(az0 + d, HALF_PI)),
        (max(el0 - d, -HALF_PI), min(el0 + d, HALF_PI)),
    )


def _density(spec: ScatteringSpec, az: np.ndarray, el: np.ndarray) -> np.ndarray:
    """Unnormalized scattering density on a grid; normalization happens in
    the quadrature so the density integrates to exactly 1 under the rule."""
    if spec.kind == ISOTROPIC:
        return np.cos(el)
    sd = spec.spread / 2.0
    az0, el0 = spec.center.azimuth, spec.center.elevation
    return np.exp(-0.5 * ((az - az0) / sd) ** 2 - 0.5 * ((el - el0) / sd) ** 2)


def _quadrature(geom: ArrayGeometry, spec: ScatteringSpec, nodes: int) -> np.ndarray:
    (az_lo, az_hi), (el_lo, el_hi) = _support(spec)
    x, wx = np.polynomial.legendre.leggauss(nodes)
    az = 0.5 * (az_hi - az_lo) * x + 0.5 * (az_hi + az_lo)
    waz = 0.5 * (az_hi - az_lo) * wx
    el = 0.5 * (el_hi - el_lo) * x + 0.5 * (el_hi + el_lo)
    wel = 0.5 * (el_hi - el_lo) * wx

    az_grid, el_grid = np.meshgrid(az, el, indexing="ij")
    weights = np.outer(waz, wel) * _density(spec, az_grid, el_grid)
    weights = weights.ravel()
    weights = weights / np.sum(weights)

    a = response_matrix(geom, az_grid.ravel(), el_grid.ravel())
    r = (a * weights) @ a.conj().T
    return spec.gain * hermitize(r)


def build_correlation(geom: ArrayGeometry, spec: ScatteringSpec, *,
                      nodes: Optional[int] = None, tol: float = _CONV_TOL) -> np.ndarray:
    """Correlation matrix gain * E{a a^H} under the scattering density.

    Tensor-product Gauss-Legendre quadrature over the truncated support,
    with node doubling until no entry moves by more than ``tol``.  Raises
    QuadratureError if the node cap is hit before convergence.
    """
    n = nodes if nodes is not None else (_ISO_NODES if spec.kind == ISOTROPIC else _GAUSS_NODES)
    r_prev = _quadrature(geom, spec, n)
    while n <= _MAX_NODES:
        n *= 2
        r = _quadrature(geom, spec, n)
        if np.max(np.abs(r - r_prev)) <= tol:
            return r
        r_prev = r
    raise QuadratureError(
        f"correlation quadrature did not converge below {tol:g} with {_MAX_NODES} nodes/axis"
    )


def validate_correlation(r: np.ndarray, name: str = "correlation matrix") -> None:
    """Check the Hermitian/PSD contract for a correlation matrix."""
    r = np.asarray(r)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValidationError(f"{name} must be square")
    check_hermitian(r, name=name)
    check_psd(r, name=name)


@dataclass(frozen=True, eq=False)
class ScenarioStatistics:
    """All second-order statistics and power levels of one scenario.

    R_h, R_g and R_e live on the RIS (dim M); R_gp lives on the BS array
    (dim N).  The composites follow from independence of the two channel
    legs: R_c = R_g o R_h, R_q = R_g o R_e (Hadamard) and the cascaded
    covariance R_x = R_gp (x) R_c (Kronecker).  The square factors are
    cached for sampling correlated Gaussians.
    """

    R_h: np.ndarray
    R_g: np.ndarray
    R_gp: np.ndarray
    R_e: np.ndarray
    sigma2: float
    sigma_e2: float
    rho_tr: float
    rho: float
    R_c: np.ndarray
    R_q: np.ndarray
    R_x: np.ndarray
    h_factor: np.ndarray
    e_factor: np.ndarray
    g_stack_factor: np.ndarray

    @property
    def num_ris(self) -> int:
        return self.R_h.shape[0]

    @property
    def num_bs(self) -> int:
        return self.R_gp.shape[0]


def derive_scenario(R_h: np.ndarray, R_g: np.ndarray, R_gp: np.ndarray, R_e: np.ndarray,
                    *, sigma2: float, sigma_e2: float, rho_tr: float,
                    rho: float) -> ScenarioStatistics:
    """Bundle correlation matrices and powers, deriving all composites."""
    R_h = np.asarray(R_h, dtype=complex)
    R_g = np.asarray(R_g, dtype=complex)
    R_gp = np.asarray(R_gp, dtype=complex)
    R_e = np.asarray(R_e, dtype=complex)
    m = R_h.shape[0]
    for mat, name in ((R_h, "R_h"), (R_g, "R_g"), (R_e, "R_e")):
        validate_correlation(mat, name)
        if mat.shape[0] != m:
            raise ValidationError(f"{name} must share the RIS dimension {m}")
    validate_correlation(R_gp, "R_gp")
    for value, name in ((sigma2, "sigma2"), (sigma_e2, "sigma_e2"),
                        (rho_tr, "rho_tr"), (rho, "rho")):
        if not value > 0:
            raise ValidationError(f"{name} must be strictly positive")

    R_c = hermitize(R_g * R_h)
    R_q = hermitize(R_g * R_e)
    R_x = np.kron(R_gp, R_c)
    return ScenarioStatistics(
        R_h=R_h, R_g=R_g, R_gp=R_gp, R_e=R_e,
        sigma2=float(sigma2), sigma_e2=float(sigma_e2),
        rho_tr=float(rho_tr), rho=float(rho),
        R_c=R_c, R_q=R_q, R_x=R_x,
        h_factor=psd_sqrt_factor(R_h),
        e_factor=psd_sqrt_factor(R_e),
        g_stack_factor=np.kron(psd_sqrt_factor(R_gp), psd_sqrt_factor(R_g)),
    )


def training_emi_covariance(phase: PhaseConfiguration, stats: ScenarioStatistics) -> np.ndarray:
    """Normalized covariance of the training-phase EMI term (dim N tau).

    The EMI is white in time, so within each BS-antenna block only the
    per-channel-use diagonal of Phi R_q Phi^H survives.  sigma_e^2 is kept
    out of the normalization and applied by the callers.
    """
    s = phase.matrix @ stats.R_q @ phase.matrix.conj().T
    return np.kron(stats.R_gp, np.diag(np.diag(s)))


def data_emi_covariance(phase: PhaseConfiguration, stats: ScenarioStatistics) -> np.ndarray:
    """Normalized covariance of the data-phase EMI term (dim N)."""
    phi = phase.phi
    scalar = np.real(phi @ stats.R_q @ phi.conj())
    return stats.R_gp * scalar


def signal_subspace(r: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Orthonormal basis of the signal subspace of a PSD matrix.

    Returns eigenvectors whose eigenvalues exceed tol times the largest
    one, together with the numerical rank.
    """
    r = np.asarray(r, dtype=complex)
    check_hermitian(r, name="signal_subspace input")
    w, u = np.linalg.eigh(hermitize(r))
    if w[-1] <= 0.0:
        raise NumericalError("matrix is numerically zero; signal subspace is empty")
    keep = w > tol * w[-1]
    rank = int(np.count_nonzero(keep))
    # eigh sorts ascending; present the dominant directions first
    u_s = u[:, keep][:, ::-1]
    return u_s, rank


def psd_factor(r: np.ndarray) -> np.ndarray:
    """Square factor L with L L^H = r (works for rank-deficient PSD r)."""
    return psd_sqrt_factor(r)
