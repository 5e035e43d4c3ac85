"""Small complex linear-algebra helpers used throughout the package."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import NumericalError, ValidationError

# Double-precision headroom for matrix inversions.
MAX_CONDITION = 1e14

# Tikhonov jitter applied only when a Hermitian factorization fails.
JITTER_SCALE = 1e-12


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circularly symmetric complex Gaussian draws with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def hermitize(a: np.ndarray) -> np.ndarray:
    """Symmetrize away roundoff so the result is exactly Hermitian."""
    return 0.5 * (a + a.conj().T)


def check_hermitian(a: np.ndarray, rel_tol: float = 1e-12, name: str = "matrix") -> None:
    scale = np.max(np.abs(a)) if a.size else 0.0
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > rel_tol * max(scale, 1e-300):
        raise ValidationError(f"{name} is not Hermitian (deviation {dev:.3e})")


def check_psd(a: np.ndarray, rel_tol: float = 1e-10, name: str = "matrix") -> None:
    """Reject matrices whose minimum eigenvalue dips below -rel_tol * trace."""
    w = np.linalg.eigvalsh(hermitize(a))
    tr = float(np.real(np.trace(a)))
    if w[0] < -rel_tol * max(tr, 1e-300):
        raise ValidationError(f"{name} is not PSD (min eigenvalue {w[0]:.3e}, trace {tr:.3e})")


def herm_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b for Hermitian positive (semi)definite a.

    The solve goes through a Cholesky factorization; on factorization
    failure a Tikhonov jitter of 1e-12 * trace/dim is added once.  A
    condition estimate above 1e14 raises, since results would be garbage
    in double precision anyway.
    """
    a = hermitize(np.asarray(a, dtype=complex))
    dim = a.shape[0]
    try:
        factor = cho_factor(a, lower=True, check_finite=False)
    except (LinAlgError, np.linalg.LinAlgError):
        jitter = JITTER_SCALE * max(np.real(np.trace(a)) / dim, 1e-300)
        a = a + jitter * np.eye(dim)
        try:
            factor = cho_factor(a, lower=True, check_finite=False)
        except (LinAlgError, np.linalg.LinAlgError) as exc:
            raise NumericalError("Hermitian factorization failed even after jitter") from exc
    cond = _condition_estimate(a)
    if cond > MAX_CONDITION:
        raise NumericalError(f"matrix condition {cond:.3e} exceeds {MAX_CONDITION:.0e}")
    return cho_solve(factor, b, check_finite=False)


def _condition_estimate(a: np.ndarray) -> float:
    w = np.linalg.eigvalsh(a)
    lo = max(float(w[0]), 1e-300)
    return float(w[-1]) / lo


def psd_sqrt_factor(r: np.ndarray) -> np.ndarray:
    """Square factor L with L L^H = r, valid for rank-deficient PSD r.

    Built from the eigendecomposition with negative eigenvalues clamped
    at zero, so sampling from singular covariances stays well defined.
    """
    r = np.asarray(r, dtype=complex)
    check_hermitian(r, name="psd_factor input")
    w, u = np.linalg.eigh(hermitize(r))
    w = np.clip(w, 0.0, None)
    return u * np.sqrt(w)
