"""Closed-loop simulation of the tank stage.

Each step the sensor reading is formed, optionally rewritten by the attack
scenarios, handed to the hysteresis PLC, and the plant advances with the
resulting command. The PLC only ever sees the attacked reading.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .attack import ATTACK_KINDS, AttackScenario, Replay, Spoof, Stealthy
from .errors import InvalidParameterError, SingularInnovationError
from .model import StateSpaceModel
from .noise import NoiseSpec, draw_noise

STREAM_PROCESS = 0
STREAM_MEAS = 1
STREAM_ATTACK = 2


@dataclass(frozen=True)
class ControllerConfig:
    low_setpoint: float
    high_setpoint: float

    def __post_init__(self):
        if not self.low_setpoint < self.high_setpoint:
            raise InvalidParameterError("low_setpoint must be < high_setpoint")

    def check_bounds(self, level_min: float, level_max: float):
        if not (level_min <= self.low_setpoint and self.high_setpoint <= level_max):
            raise InvalidParameterError("setpoints must lie within [level_min, level_max]")


def plc_control(level_reading: float, prev_command, config: ControllerConfig) -> np.ndarray:
    """Hysteresis on/off law: fill at or below the low setpoint, drain at or
    above the high one, otherwise keep ``prev_command``. A non-finite reading
    is treated as high (drain)."""
    valve, pump = kernels.plc_command(float(level_reading), config.low_setpoint,
                                      config.high_setpoint, float(prev_command[0]),
                                      float(prev_command[1]))
    return np.array([valve, pump])


@dataclass(frozen=True, eq=False)
class SimTrace:
    t: np.ndarray
    x_true: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_attacked: np.ndarray
    attack_active: np.ndarray
    saturated: np.ndarray
    nonfinite: np.ndarray

    def __len__(self):
        return len(self.t)

    @property
    def level(self) -> np.ndarray:
        return self.x_true[:, 0]

    def equals(self, other: "SimTrace") -> bool:
        """Bit-exact comparison of every series."""
        return all(
            np.array_equal(getattr(self, f).view(np.uint8), getattr(other, f).view(np.uint8))
            for f in ("t", "x_true", "u", "y", "y_attacked", "attack_active", "saturated", "nonfinite")
        )


def _pack_attacks(scenarios, horizon, n_outputs, spoof_stream_base):
    count = len(scenarios)
    kinds = np.zeros(count, dtype=np.int64)
    targets = np.zeros(count, dtype=np.int64)
    starts = np.zeros(count, dtype=np.int64)
    ends = np.zeros(count, dtype=np.int64)
    p1 = np.zeros(count)
    p2 = np.zeros(count)
    own = np.zeros(count, dtype=np.bool_)
    src_start = np.full(count, -1, dtype=np.int64)
    src_off = np.zeros(count, dtype=np.int64)
    buffers = []
    offset = 0
    width = max([min(s.end, horizon) - s.start for s in scenarios] + [1])
    spoof = np.zeros((count, max(width, 1)))
    for i, sc in enumerate(scenarios):
        if sc.target_sensor >= n_outputs:
            raise InvalidParameterError(f"target_sensor {sc.target_sensor} out of range")
        kind = sc.kind
        kinds[i] = ATTACK_KINDS[type(kind)]
        targets[i] = sc.target_sensor
        starts[i] = sc.start
        ends[i] = sc.end
        if kinds[i] == kernels.BIAS:
            p1[i] = kind.delta
        elif isinstance(kind, Stealthy):
            p1[i] = kind.tau
            p2[i] = kind.direction
            own[i] = kind.estimator == "own"
        elif isinstance(kind, Replay):
            if kind.source_start is not None:
                src_start[i] = kind.source_start
            else:
                src_off[i] = offset
                buffers.append(kind.source)
                offset += len(kind.source)
        elif isinstance(kind, Spoof):
            p1[i] = kind.base
            n_draw = max(min(sc.end, horizon) - sc.start, 0)
            spoof[i, :n_draw] = draw_noise(kind.noise, n_draw, spoof_stream_base + i)
    buf = np.concatenate(buffers) if buffers else np.zeros(1)
    return kinds, targets, starts, ends, p1, p2, own, src_start, src_off, buf, spoof


def run_simulation(
    model: StateSpaceModel,
    controller: ControllerConfig,
    process_noise: NoiseSpec,
    meas_noise: NoiseSpec,
    horizon: int,
    scenario: AttackScenario | Sequence[AttackScenario] | None = None,
    initial_level: float = 0.0,
    *,
    bounds: tuple[float, float] | None = None,
    estimator_x0=None,
    estimator_p0=None,
    stream_offset: int = 0,
) -> SimTrace:
    """Run the closed loop for ``horizon`` steps.

    ``bounds`` clamps the level (state 0) to ``[level_min, level_max]``;
    clamped steps are flagged in ``SimTrace.saturated``. Several scenarios
    may be given; they are applied in order. A stealthy scenario sees the
    defender's Kalman prediction, which starts from ``estimator_x0``
    (default: the true initial state) and ``estimator_p0`` (default: the
    measurement noise covariance when the model has one state per output,
    else identity).

    Noise streams: process noise is stream ``stream_offset + 0`` of
    ``process_noise.seed``, measurement noise ``stream_offset + 1`` of
    ``meas_noise.seed``, spoof noise of scenario ``i`` is stream
    ``stream_offset + 2 + i`` of its own spec's seed.
    """
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise InvalidParameterError("horizon must be an integer >= 1")
    if model.n_inputs != 2:
        raise InvalidParameterError("the PLC drives a [valve, pump] command; model needs 2 inputs")
    lo, hi = (-np.inf, np.inf) if bounds is None else bounds
    if bounds is not None:
        controller.check_bounds(lo, hi)
    if not lo <= initial_level <= hi:
        raise InvalidParameterError("initial_level outside [level_min, level_max]")

    if scenario is None:
        scenarios = []
    elif isinstance(scenario, AttackScenario):
        scenarios = [scenario]
    else:
        scenarios = list(scenario)

    n, p = model.n_states, model.n_outputs
    x0 = np.zeros(n)
    x0[0] = initial_level
    eta = draw_noise(meas_noise, horizon * p, stream_offset + STREAM_MEAS).reshape(horizon, p)
    v = draw_noise(process_noise, horizon * n, stream_offset + STREAM_PROCESS).reshape(horizon, n)
    packed = _pack_attacks(scenarios, horizon, p, stream_offset + STREAM_ATTACK)
    xhat0 = x0.copy() if estimator_x0 is None else np.array(estimator_x0, dtype=np.float64).reshape(n)
    p0 = default_p0(model) if estimator_p0 is None else np.array(estimator_p0, dtype=np.float64).reshape(n, n)

    xs, us, ys, yas, active, sat, nonfinite, status, fail = kernels.simulate(
        model.a_matrix, model.b_matrix, model.c_matrix, model.process_noise_cov,
        model.meas_noise_cov, x0, eta, v, controller.low_setpoint,
        controller.high_setpoint, float(lo), float(hi), *packed, xhat0, p0,
    )
    if status == kernels.SINGULAR:
        raise SingularInnovationError(f"innovation covariance singular at step {fail}")
    t = np.arange(horizon) * model.sample_period
    return SimTrace(t, xs, us, ys, yas, active, sat, nonfinite)


def default_p0(model: StateSpaceModel) -> np.ndarray:
    """Initial estimator covariance used when none is given."""
    n, p = model.n_states, model.n_outputs
    if n == p and np.array_equal(model.c_matrix, np.eye(n)):
        return np.array(model.meas_noise_cov, dtype=np.float64)
    return np.eye(n)
