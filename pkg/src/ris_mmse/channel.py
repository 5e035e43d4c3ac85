"""Correlated channel/EMI/noise sampling and received-signal synthesis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ._linalg import crandn
from .errors import ValidationError
from .phases import PhaseConfiguration
from .spatial import ScenarioStatistics


@dataclass(frozen=True)
class TrialRandomness:
    """Deterministic per-trial randomness: (seed, stream) -> generator.

    Streams are derived with a counter-based seed sequence, so trials can
    run in any order (or in parallel) without changing their draws.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, self.stream]))


RngLike = Union[TrialRandomness, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, TrialRandomness):
        return rng.generator()
    return rng


def trial_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for an arbitrary-depth stream index under one master seed."""
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One block-fading draw.

    ``h`` is the UE-to-RIS channel (M,), ``G`` stacks the RIS-to-BS rows
    g_n^T as (N, M), and ``x`` is the cascaded channel with block n equal
    to g_n o h, flattened to (M N,) with the BS index outermost.
    """

    h: np.ndarray
    G: np.ndarray
    x: np.ndarray


def sample_channel_realization(stats: ScenarioStatistics, rng: RngLike) -> ChannelRealization:
    """Draw h ~ CN(0, R_h) and the row stack of G ~ CN(0, R_gp (x) R_g).

    The two legs are independent; the cascaded channel is assembled
    entrywise, so its covariance is R_gp (x) (R_g o R_h) by construction.
    """
    gen = as_generator(rng)
    m, n = stats.num_ris, stats.num_bs
    h = stats.h_factor @ crandn(gen, m)
    g_stack = stats.g_stack_factor @ crandn(gen, m * n)
    G = g_stack.reshape(n, m)
    x = (G * h[None, :]).reshape(n * m)
    return ChannelRealization(h=h, G=G, x=x)


def sample_unit_emi(stats: ScenarioStatistics, rng: RngLike, uses: int) -> np.ndarray:
    """Unit-power spatially correlated EMI draws, one column per channel use."""
    gen = as_generator(rng)
    return stats.e_factor @ crandn(gen, stats.num_ris, uses)


def training_observation(phase: PhaseConfiguration, real: ChannelRealization,
                         unit_emi: np.ndarray, unit_noise: np.ndarray,
                         stats: ScenarioStatistics) -> np.ndarray:
    """Deterministic composition of the training signal from given draws.

    Splitting sampling from composition lets paired comparisons (e.g. the
    same trial with and without EMI) reuse identical draws.
    """
    emi = np.sqrt(stats.sigma_e2) * unit_emi
    # w_n(i) = phi(i)^T (g_n o e(i)); pilot symbols are all ones
    w = np.einsum("im,nm,mi->ni", phase.matrix, real.G, emi)
    signal = np.sqrt(stats.rho_tr) * (phase.matrix @ real.x.reshape(stats.num_bs, -1).T).T
    y = signal + w + np.sqrt(stats.sigma2) * unit_noise.reshape(stats.num_bs, phase.tau)
    return y.reshape(stats.num_bs * phase.tau)


def simulate_training(phase: PhaseConfiguration, real: ChannelRealization,
                      stats: ScenarioStatistics, rng: RngLike) -> np.ndarray:
    """Received training vector over tau channel uses, stacked per BS antenna.

    EMI takes a fresh realization each channel use; thermal noise is white.
    """
    gen = as_generator(rng)
    unit_emi = sample_unit_emi(stats, gen, phase.tau)
    unit_noise = crandn(gen, stats.num_bs * phase.tau)
    return training_observation(phase, real, unit_emi, unit_noise, stats)


def data_observation(phase: PhaseConfiguration, real: ChannelRealization, s: complex,
                     unit_emi: np.ndarray, unit_noise: np.ndarray,
                     stats: ScenarioStatistics) -> np.ndarray:
    emi = np.sqrt(stats.sigma_e2) * unit_emi[:, 0]
    w = real.G @ (phase.phi * emi)
    signal = np.sqrt(stats.rho) * (real.x.reshape(stats.num_bs, -1) @ phase.phi) * s
    return signal + w + np.sqrt(stats.sigma2) * unit_noise


def simulate_data(phase: PhaseConfiguration, real: ChannelRealization, s: complex,
                  stats: ScenarioStatistics, rng: RngLike) -> np.ndarray:
    """Received data vector for one unit-power symbol s."""
    if phase.tau != 1:
        raise ValidationError("data transmission uses a single phase row (tau = 1)")
    gen = as_generator(rng)
    unit_emi = sample_unit_emi(stats, gen, 1)
    unit_noise = crandn(gen, stats.num_bs)
    return data_observation(phase, real, s, unit_emi, unit_noise, stats)


def sample_symbol(rng: RngLike) -> complex:
    """Unit-power circularly symmetric Gaussian data symbol."""
    return complex(crandn(as_generator(rng), 1)[0])
