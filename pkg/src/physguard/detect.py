"""State estimation, residuals and statistical detectors.

The estimator is a Kalman filter in innovation form: the reported output
estimate is the one-step prediction ``C x_prior``, so the residual can be
tested before the (possibly attacked) reading is folded into the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (DimensionMismatchError, InsufficientDataError,
                     InvalidParameterError, SingularInnovationError)
from .model import StateSpaceModel


@dataclass(frozen=True, eq=False)
class EstimatorState:
    x_hat: np.ndarray
    p_cov: np.ndarray

    def __post_init__(self):
        x = np.array(self.x_hat, dtype=np.float64).ravel()
        p = np.array(self.p_cov, dtype=np.float64, ndmin=2)
        if p.shape != (x.size, x.size):
            raise DimensionMismatchError("p_cov must be n x n for an n-vector x_hat")
        if not np.allclose(p, p.T, rtol=0, atol=1e-12 * max(1.0, np.abs(p).max())):
            raise InvalidParameterError("p_cov must be symmetric")
        if np.any(np.diag(p) < 0):
            raise InvalidParameterError("p_cov diagonal must be >= 0")
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "p_cov", p)


@dataclass(frozen=True)
class DetectorConfig:
    tau: float
    cusum_bias: float
    cusum_threshold: float

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidParameterError("tau must be > 0")
        if not self.cusum_bias >= 0:
            raise InvalidParameterError("cusum_bias must be >= 0")
        if not self.cusum_threshold > 0:
            raise InvalidParameterError("cusum_threshold must be > 0")

    @classmethod
    def from_residual_std(cls, tau: float, sigma: float) -> "DetectorConfig":
        """CUSUM drift 0.5 sigma and threshold 5 sigma of attack-free residuals."""
        return cls(tau, 0.5 * sigma, 5.0 * sigma)


@dataclass(frozen=True)
class Verdict:
    alarm: bool
    statistic: float
    nonfinite: bool = False


@dataclass(frozen=True, eq=False)
class ResidualStats:
    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


def _vec(value, size, name):
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (size,):
        raise DimensionMismatchError(f"{name} must have shape ({size},), got {arr.shape}")
    return arr


def _matrices(model):
    return (model.a_matrix, model.b_matrix, model.c_matrix,
            model.process_noise_cov, model.meas_noise_cov)


def kalman_step(model: StateSpaceModel, state: EstimatorState, u, y):
    """Predict with ``u`` from the posterior ``state``, then update with ``y``.

    Returns ``(new_state, y_hat, r)`` where ``y_hat = C x_prior`` and
    ``r = y - y_hat`` is the innovation.
    """
    n, p = model.n_states, model.n_outputs
    if state.x_hat.size != n:
        raise DimensionMismatchError(f"state has {state.x_hat.size} entries, model has {n} states")
    u = _vec(u, model.n_inputs, "u")
    y = _vec(y, p, "y")
    a, b, c, q, r = _matrices(model)
    xm, pm = np.zeros(n), np.zeros((n, n))
    kernels.kf_predict(a, b, q, state.x_hat, state.p_cov, u, xm, pm)
    x_post, p_post = np.zeros(n), np.zeros((n, n))
    yhat, res = np.zeros(p), np.zeros(p)
    if kernels.kf_update(c, r, xm, pm, y, x_post, p_post, yhat, res) != kernels.OK:
        raise SingularInnovationError("C P C^T + R is singular")
    return EstimatorState(x_post, p_post), yhat, res


def run_filter(model: StateSpaceModel, y_series, u_series, x0, p0):
    """Filter a whole record. ``(x0, p0)`` is the prior at step 0; step
    ``k > 0`` predicts with ``u_series[k-1]``. Returns ``(y_hat, r)`` as
    ``(T, p)`` arrays."""
    n, p, m = model.n_states, model.n_outputs, model.n_inputs
    ys = np.ascontiguousarray(np.asarray(y_series, dtype=np.float64).reshape(-1, p))
    us = np.ascontiguousarray(np.asarray(u_series, dtype=np.float64).reshape(-1, m))
    if len(us) != len(ys):
        raise DimensionMismatchError("y_series and u_series lengths differ")
    x0 = _vec(x0, n, "x0")
    p0 = np.array(p0, dtype=np.float64).reshape(n, n)
    yhat, res, _, status, fail = kernels.kalman_filter(*_matrices(model), x0, p0, us, ys)
    if status != kernels.OK:
        raise SingularInnovationError(f"innovation covariance singular at step {fail}")
    return yhat, res


def residual(y, y_hat) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    y_hat = np.atleast_1d(np.asarray(y_hat, dtype=np.float64))
    if y.shape != y_hat.shape:
        raise DimensionMismatchError(f"shapes differ: {y.shape} vs {y_hat.shape}")
    return y - y_hat


def bad_data_detect(r: float, tau: float) -> Verdict:
    """Alarm iff ``|r| > tau`` (strict). Non-finite residuals always alarm."""
    if not tau > 0:
        raise InvalidParameterError("tau must be > 0")
    stat = abs(float(r))
    if not np.isfinite(stat):
        return Verdict(True, np.inf, True)
    return Verdict(stat > tau, stat)


def bad_data_series(residuals, tau: float):
    """Vectorised :func:`bad_data_detect`; returns ``(statistic, alarm)`` arrays."""
    if not tau > 0:
        raise InvalidParameterError("tau must be > 0")
    return kernels.bad_data_series(np.ascontiguousarray(residuals, dtype=np.float64), float(tau))


def cusum_step(state: tuple[float, float], r: float, config: DetectorConfig):
    """Two-sided CUSUM with reset on alarm. Returns ``((s_plus, s_minus), Verdict)``."""
    sp, sm, stat, alarm, bad = kernels.cusum_update(float(state[0]), float(state[1]), float(r),
                                                    config.cusum_bias, config.cusum_threshold)
    return (sp, sm), Verdict(bool(alarm), float(stat), bool(bad))


def cusum_series(residuals, config: DetectorConfig):
    return kernels.cusum_series(np.ascontiguousarray(residuals, dtype=np.float64),
                                config.cusum_bias, config.cusum_threshold)


def tune_threshold(residual_samples, target_far: float) -> float:
    """Empirical ``1 - target_far`` quantile of ``|r|``.

    Uses numpy's default ("linear", Hyndman-Fan type 7) interpolation between
    order statistics. Requires at least ``10 / target_far`` samples.
    """
    if not 0 < target_far < 1:
        raise InvalidParameterError("target_far must be in (0, 1)")
    r = np.abs(np.asarray(residual_samples, dtype=np.float64).ravel())
    if r.size < 10 / target_far:
        raise InsufficientDataError(f"need >= {int(np.ceil(10 / target_far))} samples, got {r.size}")
    return float(np.quantile(r, 1 - target_far, method="linear"))


def residual_stats(residual_samples) -> ResidualStats:
    """Sample mean and unbiased covariance; rows are samples."""
    r = np.asarray(residual_samples, dtype=np.float64)
    if r.ndim == 1:
        r = r[:, None]
    if r.shape[0] < 2:
        raise InsufficientDataError("need at least 2 residual samples")
    mean = r.mean(axis=0)
    centered = r - mean
    cov = centered.T @ centered / (r.shape[0] - 1)
    return ResidualStats(mean, 0.5 * (cov + cov.T), r.shape[0])


@dataclass(frozen=True, eq=False)
class DetectionResult:
    y_hat: np.ndarray
    r: np.ndarray
    stat_baddata: np.ndarray
    alarm_baddata: np.ndarray
    stat_cusum: np.ndarray
    alarm_cusum: np.ndarray


def detect(model: StateSpaceModel, y_series, u_series, config: DetectorConfig,
           x0, p0, sensor: int = 0) -> DetectionResult:
    """Filter the record and run both detectors on one sensor's residual."""
    yhat, res = run_filter(model, y_series, u_series, x0, p0)
    r = np.ascontiguousarray(res[:, sensor])
    sb, ab = bad_data_series(r, config.tau)
    sc, ac = cusum_series(r, config)
    return DetectionResult(yhat[:, sensor].copy(), r, sb, ab, sc, ac)
