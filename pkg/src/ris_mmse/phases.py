"""Unit-modulus phase-shift configurations for the reflecting surface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Construction tolerance: inputs may carry roundoff but must already be
# unit modulus in intent; arbitrary matrices go through project().
_UNIT_TOL = 1e-6


def project_unit_modulus(values: np.ndarray) -> np.ndarray:
    """Normalize every entry to unit amplitude, keeping its phase.

    Repeated division by the amplitude settles on a fixed point (or a full
    cycle of the division map), which makes the projection exactly
    idempotent in floating point.
    """
    w = np.array(values, dtype=complex)
    if np.any(w == 0):
        raise ValidationError("cannot project zero entries onto the unit circle")
    for _ in range(4):
        a = np.abs(w)
        if np.all(a == 1.0):
            break
        w = w / a
    return w


@dataclass(frozen=True, eq=False)
class PhaseConfiguration:
    """Phase-shift matrix with one row per channel use.

    ``matrix`` has shape (tau, M) and exactly unit-modulus entries.  During
    data transmission tau is 1 and ``phi`` exposes the single row.
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.atleast_2d(np.asarray(self.matrix, dtype=complex))
        if m.ndim != 2 or m.size == 0:
            raise ValidationError("phase matrix must be a non-empty 2-D array")
        if np.max(np.abs(np.abs(m) - 1.0)) > _UNIT_TOL:
            raise ValidationError(
                "phase entries must be unit modulus; use PhaseConfiguration.project"
            )
        object.__setattr__(self, "matrix", project_unit_modulus(m))

    @property
    def tau(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_elements(self) -> int:
        return self.matrix.shape[1]

    @property
    def phi(self) -> np.ndarray:
        """The single phase row as a vector (data-phase form, tau = 1)."""
        if self.tau != 1:
            raise ValidationError(f"phi is only defined for tau = 1, got tau = {self.tau}")
        return self.matrix[0]

    def expanded(self, n_bs: int) -> np.ndarray:
        """Block-diagonal training matrix I_N (x) Phi, shape (N tau, N M)."""
        return np.kron(np.eye(n_bs), self.matrix)

    def data_expanded(self, n_bs: int) -> np.ndarray:
        """Block-diagonal data matrix I_N (x) phi^T, shape (N, N M)."""
        return np.kron(np.eye(n_bs), self.phi[None, :])

    @classmethod
    def project(cls, values: np.ndarray) -> "PhaseConfiguration":
        """Build a configuration from arbitrary nonzero complex entries."""
        return cls(project_unit_modulus(np.atleast_2d(values)))

    @classmethod
    def from_phases(cls, radians: np.ndarray) -> "PhaseConfiguration":
        return cls(np.exp(1j * np.atleast_2d(np.asarray(radians, dtype=float))))

    @classmethod
    def dft(cls, tau: int, num_elements: int) -> "PhaseConfiguration":
        """DFT-based configuration: orthogonal rows for tau <= M, orthogonal
        columns for tau >= M.  Used as the training initializer."""
        size = max(tau, num_elements)
        i = np.arange(tau)[:, None]
        m = np.arange(num_elements)[None, :]
        return cls(np.exp(-2j * np.pi * i * m / size))

    @classmethod
    def random(cls, tau: int, num_elements: int, rng: np.random.Generator) -> "PhaseConfiguration":
        return cls.from_phases(rng.uniform(0.0, 2.0 * np.pi, size=(tau, num_elements)))
