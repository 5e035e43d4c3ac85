"""MMSE receive combining, SINR and spectral-efficiency evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._linalg import hermitize, herm_solve
from .channel import (RngLike, as_generator, sample_channel_realization, simulate_training)
from .errors import ValidationError
from .estimation import lmmse_filter
from .phases import PhaseConfiguration
from .spatial import ScenarioStatistics, data_emi_covariance

# Estimator protocol for SE evaluation: draws one joint (channel, estimate)
# realization and returns (x, xhat, error_cov).
EstimateSampler = Callable[[RngLike], tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True, eq=False)
class CombinerResult:
    """Combiner vector with its conditional MSE and the implied SINR."""

    v: np.ndarray
    e_s: float
    sinr: float


def _noise_plus_emi_covariance(phase: PhaseConfiguration,
                               stats: ScenarioStatistics) -> np.ndarray:
    n = stats.num_bs
    r_w = data_emi_covariance(phase, stats)
    return (stats.sigma_e2 / stats.rho) * r_w + (stats.sigma2 / stats.rho) * np.eye(n)


def data_observation_covariance(phase: PhaseConfiguration, xhat: np.ndarray,
                                error_cov: np.ndarray, stats: ScenarioStatistics) -> np.ndarray:
    """Covariance of the data observation conditioned on the estimate,
    normalized by the data power."""
    n, m = stats.num_bs, stats.num_ris
    k = np.outer(xhat, xhat.conj()) + error_cov
    kb = k.reshape(n, m, n, m)
    phi = phase.phi
    signal = np.einsum("i,aibj,j->ab", phi, kb, phi.conj())
    return hermitize(signal + _noise_plus_emi_covariance(phase, stats))


def mmse_combiner(phase: PhaseConfiguration, xhat: np.ndarray, error_cov: np.ndarray,
                  stats: ScenarioStatistics) -> CombinerResult:
    """Combiner minimizing E{|v^H y - s|^2} conditioned on the estimate.

    With a perfect estimate (xhat = x, error_cov = 0) this reduces to the
    classical MMSE combiner and 1/e_s - 1 recovers the SINR.
    """
    r_y = data_observation_covariance(phase, xhat, error_cov, stats)
    c = xhat.reshape(stats.num_bs, -1) @ phase.phi
    v = herm_solve(r_y, c) / np.sqrt(stats.rho)
    e_s = float(np.real(1.0 - c.conj() @ herm_solve(r_y, c)))
    sinr = 1.0 / e_s - 1.0 if e_s > 0 else np.inf
    return CombinerResult(v=v, e_s=e_s, sinr=sinr)


def combining_mse(phase: PhaseConfiguration, v: np.ndarray, xhat: np.ndarray,
                  error_cov: np.ndarray, stats: ScenarioStatistics) -> float:
    """Conditional MSE E{|v^H y - s|^2 | xhat} for an arbitrary combiner."""
    r_y = data_observation_covariance(phase, xhat, error_cov, stats)
    c = xhat.reshape(stats.num_bs, -1) @ phase.phi
    quad = np.real(v.conj() @ r_y @ v)
    cross = np.real(v.conj() @ c)
    return float(1.0 + stats.rho * quad - 2.0 * np.sqrt(stats.rho) * cross)


def sinr_perfect(phase: PhaseConfiguration, x: np.ndarray,
                 stats: ScenarioStatistics) -> float:
    """SINR of the optimal combiner under perfect channel knowledge."""
    c = x.reshape(stats.num_bs, -1) @ phase.phi
    cov = _noise_plus_emi_covariance(phase, stats)
    return float(np.real(c.conj() @ herm_solve(cov, c)))


def _prelog(tau: int, tau_c: int) -> float:
    if not 0 < tau < tau_c:
        raise ValidationError(f"pilot length must satisfy 0 < tau < tau_c, got {tau}/{tau_c}")
    return (tau_c - tau) / tau_c


def se_perfect(phase: PhaseConfiguration, stats: ScenarioStatistics, trials: int,
               tau: int, tau_c: int, rng: RngLike) -> tuple[float, float]:
    """Ergodic SE with perfect CSI, Monte-Carlo mean of log2(1 + SINR).

    Returns the estimate and its standard error (both in bits/s/Hz).
    """
    if trials < 1:
        raise ValidationError("se_perfect needs at least one trial")
    prelog = _prelog(tau, tau_c)
    gen = as_generator(rng)
    rates = np.empty(trials)
    for t in range(trials):
        real = sample_channel_realization(stats, gen)
        rates[t] = np.log2(1.0 + sinr_perfect(phase, real.x, stats))
    se = prelog * float(np.mean(rates))
    stderr = prelog * float(np.std(rates, ddof=1)) / np.sqrt(trials) if trials > 1 else 0.0
    return se, stderr


def hardening_terms(phase: PhaseConfiguration, v: np.ndarray, x: np.ndarray,
                    stats: ScenarioStatistics) -> tuple[complex, float, float]:
    """Per-draw ingredients of the hardening bound: the effective gain
    v^H Phi_N x, the EMI quadratic form v^H R_w v and the combiner norm."""
    c = x.reshape(stats.num_bs, -1) @ phase.phi
    r_w = data_emi_covariance(phase, stats)
    return (complex(v.conj() @ c),
            float(np.real(v.conj() @ r_w @ v)),
            float(np.real(v.conj() @ v)))


@dataclass
class HardeningAccumulator:
    """Running sums for the hardening-bound SE under imperfect CSI.

    The bound uses the mean effective channel as the useful signal and
    treats everything else (channel fluctuation, EMI, noise) as
    uncorrelated additive distortion.
    """

    gains: list = None
    emi_forms: list = None
    norms: list = None

    def __post_init__(self):
        self.gains, self.emi_forms, self.norms = [], [], []

    def add(self, phase: PhaseConfiguration, v: np.ndarray, x: np.ndarray,
            stats: ScenarioStatistics) -> None:
        gain, emi_form, norm = hardening_terms(phase, v, x, stats)
        self.gains.append(gain)
        self.emi_forms.append(emi_form)
        self.norms.append(norm)

    def _se(self, idx: np.ndarray, prelog: float, stats: ScenarioStatistics) -> float:
        g = np.asarray(self.gains)[idx]
        mean_gain = np.mean(g)
        signal = np.abs(mean_gain) ** 2
        distortion = (
            float(np.mean(np.abs(g) ** 2)) - signal
            + (stats.sigma_e2 / stats.rho) * float(np.mean(np.asarray(self.emi_forms)[idx]))
            + (stats.sigma2 / stats.rho) * float(np.mean(np.asarray(self.norms)[idx]))
        )
        if distortion <= 0.0:
            return prelog * np.log2(1.0 + signal / max(distortion, 1e-300))
        return prelog * np.log2(1.0 + signal / distortion)

    def spectral_efficiency(self, tau: int, tau_c: int, stats: ScenarioStatistics,
                            batches: int = 10) -> tuple[float, float]:
        """Point estimate plus a batch-means standard error."""
        prelog = _prelog(tau, tau_c)
        n = len(self.gains)
        if n == 0:
            raise ValidationError("no draws accumulated")
        se = self._se(np.arange(n), prelog, stats)
        batches = min(batches, n)
        if batches < 2:
            return se, 0.0
        edges = np.array_split(np.arange(n), batches)
        per_batch = np.array([self._se(e, prelog, stats) for e in edges])
        stderr = float(np.std(per_batch, ddof=1)) / np.sqrt(batches)
        return se, stderr


def perfect_csi_sampler(stats: ScenarioStatistics) -> EstimateSampler:
    zero = np.zeros((stats.num_bs * stats.num_ris,) * 2, dtype=complex)

    def draw(rng: RngLike):
        real = sample_channel_realization(stats, rng)
        return real.x, real.x, zero

    return draw


def lmmse_sampler(train_phase: PhaseConfiguration,
                  stats: ScenarioStatistics) -> EstimateSampler:
    """Joint (channel, LMMSE estimate) sampler for a fixed training phase."""
    filt = lmmse_filter(train_phase, stats)

    def draw(rng: RngLike):
        gen = as_generator(rng)
        real = sample_channel_realization(stats, gen)
        y_tr = simulate_training(train_phase, real, stats, gen)
        xhat = filt.estimate(y_tr, stats.rho_tr).xhat
        return real.x, xhat, filt.error_cov

    return draw


def se_hardening(phase: PhaseConfiguration, estimator: EstimateSampler,
                 stats: ScenarioStatistics, trials: int, tau: int, tau_c: int,
                 rng: RngLike) -> tuple[float, float]:
    """Achievable SE via the hardening bound, for a fixed data phase.

    Expectations over joint (channel, estimate) draws; the combiner is the
    conditional-MMSE one recomputed per draw.
    """
    if trials < 1:
        raise ValidationError("se_hardening needs at least one trial")
    gen = as_generator(rng)
    acc = HardeningAccumulator()
    for _ in range(trials):
        x, xhat, err_cov = estimator(gen)
        v = mmse_combiner(phase, xhat, err_cov, stats).v
        acc.add(phase, v, x, stats)
    return acc.spectral_efficiency(tau, tau_c, stats)
