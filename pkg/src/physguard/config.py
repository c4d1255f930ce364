"""Experiment configuration: strict JSON schema, defaults, domain conversion.

Defaults (every key is optional):

=====================================  ===============================
key                                    default
=====================================  ===============================
plant.area / q_in / q_out              1.5 m^2 / 0.002 / 0.0015 m^3/s
plant.level_min / level_max            0.0 / 1.0 m
plant.sample_period                    1.0 s
controller.low_setpoint / high         0.3 / 0.8 m
process_noise                          gaussian, mean 0, std 1e-4 m
meas_noise                             gaussian, mean 0, std 5e-3 m
horizon                                10000 steps
initial_level                          controller.low_setpoint
seed                                   0
attacks                                []
detector.tau                           null (calibrated)
detector.target_far                    0.01
detector.cusum_bias / threshold        null (0.5 / 5 residual std)
detector.calibration_horizon           20000
detector.p0                            null (measurement variance)
fingerprint.chunk_len                  300
fingerprint.accept_quantile            0.99
fingerprint.mode                       "residual"
fingerprint.column                     "y_attacked"
=====================================  ===============================

Noise specs and spoof noise take their ``seed`` from the top-level ``seed``
unless given explicitly.
"""

from __future__ import annotations

import hashlib
import json
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .attack import AttackScenario, Bias, Hold, Replay, Spoof, Stealthy
from .errors import ConfigError, PhysguardError
from .model import StateSpaceModel, TankParams, build_tank_model
from .noise import NoiseSpec
from .sim import ControllerConfig

U64_MAX = (1 << 64) - 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PlantCfg(_Strict):
    area: float = Field(1.5, gt=0)
    q_in: float = Field(0.002, ge=0)
    q_out: float = Field(0.0015, ge=0)
    level_min: float = 0.0
    level_max: float = 1.0
    sample_period: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _levels(self):
        if not self.level_min < self.level_max:
            raise ValueError("level_min must be < level_max")
        return self


class ControllerCfg(_Strict):
    low_setpoint: float = 0.3
    high_setpoint: float = 0.8

    @model_validator(mode="after")
    def _band(self):
        if not self.low_setpoint < self.high_setpoint:
            raise ValueError("low_setpoint must be < high_setpoint")
        return self


class ComponentCfg(_Strict):
    weight: float = Field(gt=0)
    mean: float = 0.0
    std: float = Field(ge=0)


class NoiseCfg(_Strict):
    family: Literal["gaussian", "gaussian_mixture", "uniform"] = "gaussian"
    mean: float = 0.0
    std: float = Field(0.0, ge=0)
    components: list[ComponentCfg] = []
    seed: Optional[int] = Field(None, ge=0, le=U64_MAX)

    @model_validator(mode="after")
    def _mixture(self):
        if self.family == "gaussian_mixture":
            if not self.components:
                raise ValueError("gaussian_mixture needs components")
            if abs(sum(c.weight for c in self.components) - 1.0) > 1e-9:
                raise ValueError("mixture weights must sum to 1")
        return self

    def to_spec(self, default_seed: int) -> NoiseSpec:
        return NoiseSpec(self.family, self.mean, self.std,
                         tuple((c.weight, c.mean, c.std) for c in self.components),
                         default_seed if self.seed is None else self.seed)


class _AttackBase(_Strict):
    target_sensor: int = Field(0, ge=0)
    start: int = Field(ge=0)
    end: int = Field(gt=0)

    @model_validator(mode="after")
    def _window(self):
        if not self.start < self.end:
            raise ValueError("attack window needs start < end")
        return self


class BiasCfg(_AttackBase):
    kind: Literal["bias"]
    delta: float


class StealthyCfg(_AttackBase):
    kind: Literal["stealthy"]
    tau: Optional[float] = Field(None, gt=0)
    direction: Literal[1, -1] = 1
    estimator: Literal["defender", "own"] = "defender"


class ReplayCfg(_AttackBase):
    kind: Literal["replay"]
    source: Optional[list[float]] = None
    source_start: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def _source(self):
        if (self.source is None) == (self.source_start is None):
            raise ValueError("replay needs exactly one of source / source_start")
        if self.source is not None and len(self.source) < self.end - self.start:
            raise ValueError("replay source shorter than the attack window")
        if self.source_start is not None and self.source_start + self.end - self.start > self.start:
            raise ValueError("in-run replay segment must end before the window starts")
        return self


class SpoofCfg(_AttackBase):
    kind: Literal["spoof"]
    base: float
    noise: NoiseCfg = NoiseCfg()


class HoldCfg(_AttackBase):
    kind: Literal["hold"]


AttackCfg = Annotated[Union[BiasCfg, StealthyCfg, ReplayCfg, SpoofCfg, HoldCfg],
                      Field(discriminator="kind")]


class DetectorCfg(_Strict):
    tau: Optional[float] = Field(None, gt=0)
    target_far: float = Field(0.01, gt=0, lt=1)
    cusum_bias: Optional[float] = Field(None, ge=0)
    cusum_threshold: Optional[float] = Field(None, gt=0)
    calibration_horizon: int = Field(20000, ge=1)
    p0: Optional[float] = Field(None, ge=0)


class FingerprintCfg(_Strict):
    chunk_len: int = Field(300, ge=8)
    accept_quantile: float = Field(0.99, gt=0, le=1)
    mode: Literal["residual", "constant"] = "residual"
    column: Literal["y", "y_attacked"] = "y_attacked"


class OutputCfg(_Strict):
    trace: str = "trace.csv"
    detection: str = "detection.csv"
    metrics: str = "metrics.json"
    model: str = "fingerprint_model.json"
    report: str = "fingerprint_report.json"
    summary: str = "summary.txt"


class ExperimentConfig(_Strict):
    plant: PlantCfg = PlantCfg()
    controller: ControllerCfg = ControllerCfg()
    process_noise: NoiseCfg = NoiseCfg(std=1e-4)
    meas_noise: NoiseCfg = NoiseCfg(std=5e-3)
    horizon: int = Field(10000, ge=1)
    initial_level: Optional[float] = None
    seed: int = Field(0, ge=0, le=U64_MAX)
    attacks: list[AttackCfg] = []
    detector: DetectorCfg = DetectorCfg()
    fingerprint: FingerprintCfg = FingerprintCfg()
    outputs: OutputCfg = OutputCfg()

    @model_validator(mode="after")
    def _cross(self):
        p, c = self.plant, self.controller
        problems = []
        if not (p.level_min <= c.low_setpoint and c.high_setpoint <= p.level_max):
            problems.append("controller setpoints must lie within [plant.level_min, plant.level_max]")
        if self.initial_level is not None and not p.level_min <= self.initial_level <= p.level_max:
            problems.append("initial_level must lie within [plant.level_min, plant.level_max]")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    # -- derived domain objects -------------------------------------------

    @property
    def start_level(self) -> float:
        return self.controller.low_setpoint if self.initial_level is None else self.initial_level

    def tank_params(self) -> TankParams:
        return TankParams(**self.plant.model_dump())

    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(self.controller.low_setpoint, self.controller.high_setpoint)

    def process_noise_spec(self) -> NoiseSpec:
        return self.process_noise.to_spec(self.seed)

    def meas_noise_spec(self) -> NoiseSpec:
        return self.meas_noise.to_spec(self.seed)

    def state_space(self) -> StateSpaceModel:
        """Tank model with noise covariances set from the noise specs."""
        return build_tank_model(self.tank_params()).with_noise(
            [[self.process_noise_spec().variance]], [[self.meas_noise_spec().variance]])

    def bounds(self) -> tuple[float, float]:
        return self.plant.level_min, self.plant.level_max

    def attack_scenarios(self, stealthy_tau: float | None = None) -> list[AttackScenario]:
        """Domain scenarios; ``stealthy_tau`` fills stealthy attacks without a tau."""
        out = []
        for a in self.attacks:
            if isinstance(a, BiasCfg):
                kind = Bias(a.delta)
            elif isinstance(a, StealthyCfg):
                tau = a.tau if a.tau is not None else stealthy_tau
                if tau is None:
                    raise PhysguardError("stealthy attack without tau needs the detector threshold")
                kind = Stealthy(tau, float(a.direction), a.estimator)
            elif isinstance(a, ReplayCfg):
                kind = Replay(a.source, a.source_start)
            elif isinstance(a, SpoofCfg):
                kind = Spoof(a.noise.to_spec(self.seed), a.base)
            else:
                kind = Hold()
            out.append(AttackScenario(kind, a.start, a.end, a.target_sensor))
        return out

    def needs_detector_tau(self) -> bool:
        return any(isinstance(a, StealthyCfg) and a.tau is None for a in self.attacks)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _errors(exc: ValidationError) -> list[dict]:
    out = []
    for e in exc.errors():
        loc = ".".join(str(p) for p in e["loc"])
        out.append({"loc": loc or "<root>", "msg": e["msg"]})
    return out


def parse_config(data: dict, seed: int | None = None) -> ExperimentConfig:
    """Validate a config mapping; ``seed`` overrides the file's seed."""
    if seed is not None:
        data = {**data, "seed": seed}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_errors(exc)) from None


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([{"loc": "<file>", "msg": f"JSON parse error: {exc}"}]) from None
    if not isinstance(data, dict):
        raise ConfigError([{"loc": "<root>", "msg": "config must be a JSON object"}])
    return parse_config(data, seed)
