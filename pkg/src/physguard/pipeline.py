"""Experiment steps shared by the CLI and the acceptance suite."""

from __future__ import annotations

import numpy as np

from .config import ExperimentConfig
from .detect import (DetectorConfig, detect, residual_stats, run_filter,
                     tune_threshold)
from .errors import PhysguardError
from .fingerprint import extract_noise_constant, extract_noise_residual
from .sim import SimTrace, default_p0, run_simulation

# calibration runs use their own noise streams so they never repeat the experiment's noise
CALIBRATION_STREAMS = 1 << 32


def estimator_prior(cfg: ExperimentConfig):
    model = cfg.state_space()
    p0 = default_p0(model) if cfg.detector.p0 is None else np.array([[cfg.detector.p0]])
    return np.array([cfg.start_level]), p0


def calibration_residuals(cfg: ExperimentConfig) -> np.ndarray:
    """Residuals of an attack-free run on independent noise streams."""
    model = cfg.state_space()
    x0, p0 = estimator_prior(cfg)
    trace = run_simulation(model, cfg.controller_config(), cfg.process_noise_spec(),
                           cfg.meas_noise_spec(), cfg.detector.calibration_horizon, None,
                           cfg.start_level, bounds=cfg.bounds(), estimator_p0=p0,
                           stream_offset=CALIBRATION_STREAMS)
    _, res = run_filter(model, trace.y_attacked, trace.u, x0, p0)
    return res[:, 0]


def resolve_detector(cfg: ExperimentConfig) -> tuple[DetectorConfig, dict]:
    """Detector thresholds: explicit config values, else calibrated on an
    attack-free run (tau from the target false-alarm rate, CUSUM from the
    residual std)."""
    d = cfg.detector
    info = {"tau_source": "config" if d.tau is not None else "calibrated"}
    if d.tau is not None and d.cusum_bias is not None and d.cusum_threshold is not None:
        return DetectorConfig(d.tau, d.cusum_bias, d.cusum_threshold), info
    res = calibration_residuals(cfg)
    sigma = float(np.std(res, ddof=1))
    tau = d.tau if d.tau is not None else tune_threshold(res, d.target_far)
    if not tau > 0 or not sigma > 0:
        raise PhysguardError("attack-free residuals are identically zero; "
                             "set detector.tau, cusum_bias and cusum_threshold explicitly")
    info["calibration_samples"] = len(res)
    info["calibration_residual_std"] = sigma
    bias = d.cusum_bias if d.cusum_bias is not None else 0.5 * sigma
    thresh = d.cusum_threshold if d.cusum_threshold is not None else 5.0 * sigma
    return DetectorConfig(tau, bias, thresh), info


def simulate(cfg: ExperimentConfig) -> SimTrace:
    tau = resolve_detector(cfg)[0].tau if cfg.needs_detector_tau() else None
    model = cfg.state_space()
    _, p0 = estimator_prior(cfg)
    return run_simulation(model, cfg.controller_config(), cfg.process_noise_spec(),
                          cfg.meas_noise_spec(), cfg.horizon, cfg.attack_scenarios(tau),
                          cfg.start_level, bounds=cfg.bounds(), estimator_p0=p0)


def _segments(flags):
    out = []
    k, n = 0, len(flags)
    while k < n:
        if flags[k]:
            j = k
            while j < n and flags[j]:
                j += 1
            out.append([k, j])
            k = j
        else:
            k += 1
    return out


def _alarm_metrics(alarm, active):
    idx = np.flatnonzero(alarm)
    hits = np.flatnonzero(alarm & active)
    n_act, n_idle = int(active.sum()), int((~active).sum())
    false_alarms = int((alarm & ~active).sum())
    first_active = int(np.flatnonzero(active)[0]) if n_act else None
    first_hit = int(hits[0]) if len(hits) else None
    return {
        "alarms": int(alarm.sum()),
        "first_alarm": int(idx[0]) if len(idx) else None,
        "first_alarm_in_attack": first_hit,
        "detection_delay": first_hit - first_active if first_hit is not None else None,
        "alarms_in_attack": int(len(hits)),
        "detection_rate": len(hits) / n_act if n_act else None,
        "false_alarms": false_alarms,
        "false_alarm_rate": false_alarms / n_idle if n_idle else None,
    }


def detect_trace(cfg: ExperimentConfig, trace: SimTrace):
    """Run the estimator and both detectors over a trace; returns
    ``(DetectionResult, metrics dict)``."""
    dcfg, info = resolve_detector(cfg)
    x0, p0 = estimator_prior(cfg)
    result = detect(cfg.state_space(), trace.y_attacked, trace.u, dcfg, x0, p0)
    active = np.asarray(trace.attack_active, dtype=bool)
    clean = ~active & ~np.asarray(trace.saturated, dtype=bool)
    stats = residual_stats(result.r[clean]) if clean.sum() >= 2 else None
    metrics = {
        "horizon": len(trace),
        "tau": dcfg.tau,
        "cusum_bias": dcfg.cusum_bias,
        "cusum_threshold": dcfg.cusum_threshold,
        **info,
        "attack_windows": _segments(active),
        "attack_steps": int(active.sum()),
        "saturated_steps": int(np.sum(trace.saturated)),
        "cumulative_injected_offset": float(np.sum(np.abs(trace.y_attacked - trace.y))),
        "baddata": _alarm_metrics(result.alarm_baddata, active),
        "cusum": _alarm_metrics(result.alarm_cusum, active),
        "residual_attack_free": None if stats is None else {
            "mean": float(stats.mean[0]),
            "std": float(stats.std[0]),
            "count": stats.sample_count,
        },
    }
    return result, metrics


def trace_chunks(cfg: ExperimentConfig, trace: SimTrace, label: str):
    """Noise chunks of one sensor trace per the fingerprint settings."""
    f = cfg.fingerprint
    series = (trace.y_attacked if f.column == "y_attacked" else trace.y)[:, 0]
    if f.mode == "constant":
        return extract_noise_constant(series, f.chunk_len, label)
    model = cfg.state_space()
    _, p0 = estimator_prior(cfg)
    _, res = run_filter(model, series, trace.u, series[:1], p0)
    return extract_noise_residual(res[:, 0], f.chunk_len, label)
