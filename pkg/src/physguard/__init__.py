"""Simulated water-tank stage under sensor attacks, with residual-based
detectors and noise-based sensor fingerprinting."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .attack import AttackScenario, Bias, Hold, Replay, Spoof, Stealthy, apply_attack, stealthy_residual_bound
from .detect import (DetectorConfig, EstimatorState, ResidualStats, Verdict, bad_data_detect,
                     cusum_step, kalman_step, residual, residual_stats, run_filter, tune_threshold)
from .fingerprint import (FeatureVector, FingerprintModel, NoiseChunk, authenticate, classify,
                          compute_features, evaluate, extract_noise_constant,
                          extract_noise_residual, train)
from .model import (FlowMeterParams, StateSpaceModel, TankParams, build_tank_model,
                    flowmeter_voltage, measure, speed_of_sound, step_dynamics)
from .noise import NoiseSpec, sample_noise
from .sim import ControllerConfig, SimTrace, plc_control, run_simulation
