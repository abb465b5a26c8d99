"""Multiscale change-point segmentation.

Least-jump step-function estimators under a simultaneous multiscale
constraint, Monte Carlo threshold calibration, feature inference with
simultaneous confidence, and oracle approximation diagnostics.
"""
from .harness import (ConfigError, ExperimentConfig, ExperimentResult, emit, run_convergence,
                      run_experiment, run_noise_sweep, run_robustness, run_stability)
from .inference import (ConfidenceParams, FeatureReport, count_modes_troughs, feature_report,
                        jump_distance, mean_order_claim, monotonicity, r_value,
                        significant_jumps)
from .intervals import GridInterval, IntervalSystem, contained_in, enumerate_system, is_normal
from .multiscale import (CalibrationResult, Threshold, multiscale_statistic, penalty_value,
                         simulate_quantile, universal_threshold)
from .oracle import (approx_error_curve, approximation_errors, best_approximant, equal_partition,
                     lp_loss, oracle_risk, oracle_segmentation)
from .signals import (ContinuousSignal, NoiseModel, Observation, StepFunction, cell_means,
                      blocks, bumps, doppler, heavisine, make_olshen_signal, make_signal, ramp,
                      sample_observations, sine_distorted, snr_sigma)
from .solver import Estimate, FeasibleBand, InfeasibleError, fit, prune_certificate, segment_band

__version__ = "0.1.0"
