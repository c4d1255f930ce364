"""Sensor attack scenarios.

Attacks rewrite the measurement of one sensor over a half-open step window
``[start, end)``. Outside the window the honest value passes through.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidParameterError, MissingEstimateError, ReplayUnderflowError
from .noise import NoiseSpec, NoiseStream, sample_noise


@dataclass(frozen=True)
class Bias:
    delta: float


@dataclass(frozen=True)
class Stealthy:
    """Pin the residual at ``direction * tau``.

    ``estimator="defender"`` gives the attacker the defender's own one-step
    prediction; ``"own"`` makes it run a parallel filter on the honest
    measurements instead.
    """

    tau: float
    direction: float = 1.0
    estimator: str = "defender"

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidParameterError("stealthy tau must be > 0")
        if self.direction not in (1.0, -1.0):
            raise InvalidParameterError("direction must be +1 or -1")
        if self.estimator not in ("defender", "own"):
            raise InvalidParameterError("estimator must be 'defender' or 'own'")


@dataclass(frozen=True, eq=False)
class Replay:
    """Replay a recorded honest segment aligned to the window start.

    Give either ``source`` (explicit values) or ``source_start`` (replay the
    run's own honest readings from that step; the segment must end before the
    window starts).
    """

    source: np.ndarray | None = None
    source_start: int | None = None

    def __post_init__(self):
        if (self.source is None) == (self.source_start is None):
            raise InvalidParameterError("replay needs exactly one of source / source_start")
        if self.source is not None:
            src = np.array(self.source, dtype=np.float64).ravel()
            src.flags.writeable = False
            object.__setattr__(self, "source", src)
        elif self.source_start < 0:
            raise InvalidParameterError("source_start must be >= 0")


@dataclass(frozen=True)
class Spoof:
    """Replace readings with ``base`` plus fresh draws from ``noise``."""

    noise: NoiseSpec
    base: float


@dataclass(frozen=True)
class Hold:
    """Freeze the last honest value seen before the window."""


ATTACK_KINDS = {Bias: kernels.BIAS, Stealthy: kernels.STEALTHY, Replay: kernels.REPLAY,
                Spoof: kernels.SPOOF, Hold: kernels.HOLD}


@dataclass(frozen=True)
class AttackScenario:
    kind: Bias | Stealthy | Replay | Spoof | Hold
    start: int
    end: int
    target_sensor: int = 0

    def __post_init__(self):
        if type(self.kind) not in ATTACK_KINDS:
            raise InvalidParameterError(f"unknown attack kind {self.kind!r}")
        if not self.start < self.end:
            raise InvalidParameterError("attack window needs start < end")
        if self.start < 0 or self.target_sensor < 0:
            raise InvalidParameterError("start and target_sensor must be >= 0")
        if isinstance(self.kind, Replay):
            length = self.end - self.start
            if self.kind.source is not None and len(self.kind.source) < length:
                raise InvalidParameterError("replay source shorter than the attack window")
            if self.kind.source_start is not None and self.kind.source_start + length > self.start:
                raise InvalidParameterError("in-run replay segment must end before the window starts")

    @property
    def length(self) -> int:
        return self.end - self.start

    def is_active(self, k: int) -> bool:
        return self.start <= k < self.end


@dataclass
class AttackState:
    """Per-trace state: last honest reading before the window and spoof stream."""

    last_honest: float | None = None
    spoof_stream: NoiseStream = field(default_factory=NoiseStream)


def apply_attack(y_k, y_hat_k, scenario: AttackScenario, k: int, state: AttackState | None = None):
    """Attacked reading of the target sensor at step ``k``.

    ``y_k`` and ``y_hat_k`` are that sensor's honest reading and the
    estimator's one-step prediction (only needed by stealthy attacks).
    Returns ``(y_a, state)``; feed the state back in for the next step.
    """
    state = state if state is not None else AttackState()
    kind = scenario.kind
    if not scenario.is_active(k):
        if k < scenario.start:
            state.last_honest = float(y_k)
        return y_k, state

    code = ATTACK_KINDS[type(kind)]
    yhat = p1 = p2 = hold = rep = spoof = 0.0
    if isinstance(kind, Bias):
        p1 = kind.delta
    elif isinstance(kind, Stealthy):
        if y_hat_k is None:
            raise MissingEstimateError("stealthy attack needs the estimated measurement")
        yhat, p1, p2 = float(y_hat_k), kind.tau, kind.direction
    elif isinstance(kind, Replay):
        if kind.source is None:
            raise InvalidParameterError("in-run replay is only available inside run_simulation")
        j = k - scenario.start
        if j >= len(kind.source):
            raise ReplayUnderflowError(f"replay source exhausted at step {k}")
        rep = float(kind.source[j])
    elif isinstance(kind, Spoof):
        p1 = kind.base
        spoof, state.spoof_stream = sample_noise(kind.noise, state.spoof_stream)
    else:
        if state.last_honest is None:
            state.last_honest = float(y_k)
        hold = state.last_honest
    return kernels.attack_value(code, float(y_k), yhat, p1, p2, hold, rep, spoof), state


def stealthy_residual_bound(tau: float) -> float:
    """Residual magnitude left by a stealthy attack at threshold ``tau``.

    The injected offset ``y_hat - y + tau`` turns the residual into exactly
    ``tau``, and ``tau > tau`` is false, so a strict threshold test never
    fires.
    """
    if not tau > 0:
        raise InvalidParameterError("tau must be > 0")
    resid = kernels.stealthy_value(0.0, float(tau), 1.0)
    assert not abs(resid) > tau
    return resid
