"""Discrete LTI plant model and sensing-physics formulas.

The tank stage is modelled as a single integrator: the level changes by the
commanded inflow minus outflow divided by the cross-section, integrated with
forward Euler over one sample period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError

# speed of sound in air at 0 degC [m/s] and its temperature slope [m/s per degC]
SOUND_SPEED_0C = 331.45
SOUND_SPEED_SLOPE = 0.607


@dataclass(frozen=True)
class TankParams:
    area: float
    q_in: float
    q_out: float
    level_min: float
    level_max: float
    sample_period: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.area > 0:
            problems.append("area must be > 0")
        if not self.q_in >= 0:
            problems.append("q_in must be >= 0")
        if not self.q_out >= 0:
            problems.append("q_out must be >= 0")
        if not self.level_min < self.level_max:
            problems.append("level_min must be < level_max")
        if not self.sample_period > 0:
            problems.append("sample_period must be > 0")
        if problems:
            raise InvalidParameterError("; ".join(problems))


def _as_matrix(value, name):
    arr = np.array(value, dtype=np.float64, ndmin=2)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """``x[k+1] = A x[k] + B u[k] + v[k]``, ``y[k] = C x[k] + eta[k]``.

    ``process_noise_cov`` and ``meas_noise_cov`` are the covariances of
    ``v`` and ``eta``. Arrays are copied to C-contiguous float64 and made
    read-only.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    c_matrix: np.ndarray
    process_noise_cov: np.ndarray | None = None
    meas_noise_cov: np.ndarray | None = None
    sample_period: float = 1.0

    def __post_init__(self):
        a = _as_matrix(self.a_matrix, "a_matrix")
        b = _as_matrix(self.b_matrix, "b_matrix")
        c = _as_matrix(self.c_matrix, "c_matrix")
        n = a.shape[0]
        if a.shape != (n, n):
            raise DimensionMismatchError(f"a_matrix must be square, got {a.shape}")
        if b.shape[0] != n:
            raise DimensionMismatchError(f"b_matrix must have {n} rows, got {b.shape}")
        if c.shape[1] != n:
            raise DimensionMismatchError(f"c_matrix must have {n} columns, got {c.shape}")
        p = c.shape[0]
        q = np.zeros((n, n)) if self.process_noise_cov is None else _as_matrix(self.process_noise_cov, "process_noise_cov")
        r = np.zeros((p, p)) if self.meas_noise_cov is None else _as_matrix(self.meas_noise_cov, "meas_noise_cov")
        for name, cov, dim in (("process_noise_cov", q, n), ("meas_noise_cov", r, p)):
            if cov.shape != (dim, dim):
                raise DimensionMismatchError(f"{name} must be {dim}x{dim}, got {cov.shape}")
            if not np.array_equal(cov, cov.T):
                raise InvalidParameterError(f"{name} must be symmetric")
            if np.any(np.diag(cov) < 0):
                raise InvalidParameterError(f"{name} must have a non-negative diagonal")
        if not self.sample_period > 0:
            raise InvalidParameterError("sample_period must be > 0")
        for name, arr in (("a_matrix", a), ("b_matrix", b), ("c_matrix", c),
                          ("process_noise_cov", q), ("meas_noise_cov", r)):
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b_matrix.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c_matrix.shape[0]

    def with_noise(self, process_noise_cov=None, meas_noise_cov=None) -> "StateSpaceModel":
        """Copy of the model with replaced noise covariances."""
        return StateSpaceModel(
            self.a_matrix, self.b_matrix, self.c_matrix,
            self.process_noise_cov if process_noise_cov is None else process_noise_cov,
            self.meas_noise_cov if meas_noise_cov is None else meas_noise_cov,
            self.sample_period,
        )


@dataclass(frozen=True)
class FlowMeterParams:
    instrument_constant: float
    field_strength: float
    pipe_cross_section: float

    def __post_init__(self):
        if not self.instrument_constant > 0:
            raise InvalidParameterError("instrument_constant must be > 0")
        if not self.field_strength >= 0:
            raise InvalidParameterError("field_strength must be >= 0")
        if not self.pipe_cross_section > 0:
            raise InvalidParameterError("pipe_cross_section must be > 0")


def build_tank_model(params: TankParams) -> StateSpaceModel:
    """Scalar tank model with command vector ``u = [valve, pump]``.

    One forward-Euler step of ``dh/dt = (q_in*valve - q_out*pump) / area``
    gives ``b = [Ts*q_in/area, -Ts*q_out/area]``. Noise covariances are zero;
    use :meth:`StateSpaceModel.with_noise` to set them.
    """
    if not isinstance(params, TankParams):
        raise InvalidParameterError("params must be a TankParams")
    ts = params.sample_period
    b = [[ts * params.q_in / params.area, -ts * params.q_out / params.area]]
    return StateSpaceModel([[1.0]], b, [[1.0]], sample_period=ts)


def _vector(value, size, name):
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (size,):
        raise DimensionMismatchError(f"{name} must have shape ({size},), got {arr.shape}")
    return arr


def step_dynamics(model: StateSpaceModel, x, u, v=None) -> np.ndarray:
    """Return ``A x + B u + v``."""
    x = _vector(x, model.n_states, "x")
    u = _vector(u, model.n_inputs, "u")
    v = np.zeros(model.n_states) if v is None else _vector(v, model.n_states, "v")
    return model.a_matrix @ x + model.b_matrix @ u + v


def measure(model: StateSpaceModel, x, eta=None) -> np.ndarray:
    """Return ``C x + eta``."""
    x = _vector(x, model.n_states, "x")
    eta = np.zeros(model.n_outputs) if eta is None else _vector(eta, model.n_outputs, "eta")
    return model.c_matrix @ x + eta


def speed_of_sound(temp_c: float) -> float:
    """Speed of sound in air [m/s] at ``temp_c`` degrees Celsius (linear model)."""
    return SOUND_SPEED_0C + SOUND_SPEED_SLOPE * temp_c


def flowmeter_voltage(params: FlowMeterParams, velocity: float) -> float:
    """Induced electrode voltage ``K * B * V * D`` of an electromagnetic flow meter."""
    if velocity < 0:
        raise InvalidParameterError("velocity must be >= 0")
    return params.instrument_constant * params.field_strength * velocity * params.pipe_cross_section
