"""MMSE design of RIS phase shifts under correlated channels and EMI."""

from .arrays import Angle, ArrayGeometry, array_response, element_position, element_positions
from .channel import (ChannelRealization, TrialRandomness, sample_channel_realization,
                      simulate_data, simulate_training, trial_rng)
from .combining import (CombinerResult, mmse_combiner, se_hardening, se_perfect,
                        sinr_perfect)
from .errors import (InsufficientPilotsError, NumericalError, QuadratureError,
                     SimulatorError, ValidationError)
from .estimation import (EstimationResult, empirical_rmse, lmmse_error_stats,
                         lmmse_estimate, ls_estimate, rsls_estimate,
                         training_observation_covariance)
from .optimizer import (AoTrace, OptimizerConfig, ao_data, ao_training,
                        finite_diff_gradient, grad_data, grad_training,
                        hess_diag_data, hess_diag_training, lambda_update,
                        training_mse_objective)
from .phases import PhaseConfiguration, project_unit_modulus
from .spatial import (ScatteringSpec, ScenarioStatistics, build_correlation,
                      data_emi_covariance, derive_scenario, psd_factor,
                      signal_subspace, training_emi_covariance)

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
