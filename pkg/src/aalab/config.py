"""Experiment configuration: TOML (or JSON) files validated against pydantic
models.  Unknown keys are rejected; the JSON schema of :class:`ExperimentConfig`
is the published schema (``aalab validate-config --schema``)."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Annotated, Literal, Union

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .functions import parse

SEED_MAX = (1 << 64) - 1


class ConfigError(ValueError):
    pass


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _expr_ok(text):
    parse(text)
    return text


class Grid(Strict):
    t0: float
    h: Annotated[float, Field(gt=0)]
    n: Annotated[int, Field(ge=1)]


class Ou(Strict):
    alpha: Annotated[float, Field(gt=0)] = 1.0
    sigma: Annotated[float, Field(gt=0)] = 1.0


class Diagnostics(Strict):
    cap_line: Annotated[int, Field(ge=10)] = 5000
    cap: Annotated[int, Field(ge=10)] = 500
    splits: Annotated[int, Field(ge=1)] = 4
    levels: Annotated[int, Field(ge=1, le=5)] = 3
    max_ratio: Annotated[float, Field(gt=0)] = 2.0


class Measure(Strict):
    name: Literal["lebesgue", "polynomial", "exp_window"] = "lebesgue"
    k: float | None = None
    a: float | None = None

    def to_spec(self):
        return {key: v for key, v in self.model_dump().items() if v is not None}


class Model(Strict):
    deltas: list[Annotated[float, Field(gt=0)]]
    noise_variances: list[Annotated[float, Field(ge=0)]]
    K_growth: Annotated[float, Field(ge=0)]
    K_lip: Annotated[float, Field(ge=0)]

    @property
    def dim(self):
        return len(self.deltas)


class ExprModel(Model):
    f: list[str]
    g: list[list[str]]

    @field_validator("f")
    @classmethod
    def _f(cls, v):
        return [_expr_ok(e) for e in v]

    @field_validator("g")
    @classmethod
    def _g(cls, v):
        return [[_expr_ok(e) for e in row] for row in v]

    @model_validator(mode="after")
    def _shapes(self):
        if len(self.f) != self.dim or len(self.g) != self.dim:
            raise ValueError("f and g need one entry/row per generator decay")
        if any(len(row) != len(self.noise_variances) for row in self.g):
            raise ValueError("each g row needs one entry per noise component")
        return self


class SplitModel(Model):
    f1: list[str]
    f2: list[str]
    g1: list[list[str]]
    g2: list[list[str]]

    @field_validator("f1", "f2")
    @classmethod
    def _f(cls, v):
        return [_expr_ok(e) for e in v]

    @field_validator("g1", "g2")
    @classmethod
    def _g(cls, v):
        return [[_expr_ok(e) for e in row] for row in v]

    @model_validator(mode="after")
    def _shapes(self):
        d, dn = self.dim, len(self.noise_variances)
        if len(self.f1) != d or len(self.f2) != d:
            raise ValueError("f1 and f2 need one entry per generator decay")
        for g in (self.g1, self.g2):
            if len(g) != d or any(len(row) != dn for row in g):
                raise ValueError("g1 and g2 must be dim x noise-dim")
        return self


class Base(Strict):
    seed: Annotated[int, Field(ge=0, le=SEED_MAX)]
    output_dir: str | None = None
    diagnostics: Diagnostics = Diagnostics()


class Covariance(Strict):
    cases: list[tuple[float, float, float]] = [(1.0, 1.0, 0.5), (0.5, 2.0, 1.0)]
    M: Annotated[int, Field(ge=100)] = 100_000
    n_se: Annotated[float, Field(gt=0)] = 3.0


class Gap(Strict):
    deltas: list[Annotated[float, Field(gt=0)]] = [0.5, 2.0, 5.0]
    grid: Grid = Grid(t0=0.0, h=0.05, n=1000)
    M: Annotated[int, Field(ge=100)] = 10_000
    rel_tol: Annotated[float, Field(gt=0)] = 0.05
    lags: list[Annotated[float, Field(ge=0)]] = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0]


class PathCurve(Strict):
    base_time: float = 3.0
    shifts: list[float] = [float(k) for k in range(1, 21)]


class OuCounterexample(Base):
    scenario: Literal["ou-counterexample"]
    ou: Ou = Ou()
    covariance: Covariance = Covariance()
    gap: Gap = Gap()
    path_curve: PathCurve = PathCurve()


class RemarkNonvector(Base):
    scenario: Literal["remark-nonvector"]
    ou: Ou = Ou()
    grid: Grid = Grid(t0=0.0, h=0.5, n=40)
    M: Annotated[int, Field(ge=100)] = 100_000
    times: list[float] = [0.0, 1.0, 5.0, 20.0]
    shifts: list[float] = [1.0, 5.0, 20.0]
    n_se: Annotated[float, Field(gt=0)] = 3.0
    min_gap_ratio: Annotated[float, Field(gt=0)] = 5.0


class Contraction(Strict):
    grid: Grid
    M: Annotated[int, Field(ge=1)]
    iterations: Annotated[int, Field(ge=2)] = 8
    slack: Annotated[float, Field(ge=0)] = 0.2


class TheoremAA(Base):
    scenario: Literal["theorem-aa"]
    model: ExprModel
    grid: Grid
    burn_in: Annotated[float, Field(gt=0)]
    M: Annotated[int, Field(ge=10)]
    contraction: Contraction
    base_time: float
    shifts: list[float]
    ui_cutoffs: list[Annotated[float, Field(ge=0)]] = [0.0, 1.0, 2.0, 3.0, 4.0]
    ui_decay: Annotated[float, Field(gt=0, lt=1)] = 0.05

    @model_validator(mode="after")
    def _theta_prime(self):
        K = max(self.model.K_growth, self.model.K_lip)
        d = min(self.model.deltas)
        tp = 4.0 * K**2 / d * (1.0 / d + sum(self.model.noise_variances))
        if not tp < 1.0:
            raise ValueError(f"theta' = {tp:.4g} must be < 1 for this scenario")
        return self


class PropProbe(Strict):
    gammas: list[float] = [5.0, 10.0, 20.0]
    grid: Grid = Grid(t0=0.0, h=0.05, n=200)
    base_time: float = 5.0


class TheoremMain(Base):
    scenario: Literal["theorem-main"]
    model: SplitModel
    grid: Grid
    burn_in: Annotated[float, Field(gt=0)]
    M: Annotated[int, Field(ge=10)]
    p: Annotated[float, Field(ge=0)] = 2.0
    measure: Measure = Measure()
    radii: list[Annotated[float, Field(gt=0)]]
    decay_fraction: Annotated[float, Field(gt=0, lt=1)] = 0.25
    base_time: float = 0.0
    shifts: list[float]
    probe: PropProbe = PropProbe()


class Superposition(Base):
    scenario: Literal["superposition"]
    ou: Ou = Ou()
    grid: Grid
    M: Annotated[int, Field(ge=10)]
    f1: str
    f2: str
    measure: Measure = Measure()
    radii: list[Annotated[float, Field(gt=0)]]
    decay_fraction: Annotated[float, Field(gt=0, lt=1)] = 0.25
    base_time: float = 0.0
    shifts: list[float]

    @field_validator("f1", "f2")
    @classmethod
    def _expr(cls, v):
        return _expr_ok(v)


Scenario = Annotated[Union[OuCounterexample, RemarkNonvector, TheoremAA, TheoremMain, Superposition],
                     Field(discriminator="scenario")]


class ExperimentConfig(Strict):
    experiment: Scenario


SCENARIOS = ("ou-counterexample", "remark-nonvector", "theorem-aa", "theorem-main", "superposition")


def _reject_non_finite(obj, where="config"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ConfigError(f"{where}: non-finite number")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _reject_non_finite(v, f"{where}.{k}")
    if isinstance(obj, list):
        for i, v in enumerate(obj):
            _reject_non_finite(v, f"{where}[{i}]")


def parse_config(data):
    """Validate a plain dict (the top-level table of a config file)."""
    _reject_non_finite(data)
    try:
        return ExperimentConfig.model_validate({"experiment": data}).experiment
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else tomli.loads(text)
    except (tomli.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)


def resolved(cfg):
    """Full config with defaults filled in, as plain JSON data."""
    return cfg.model_dump(mode="json")


def schema():
    return ExperimentConfig.model_json_schema()


def shipped_config(name):
    """Path of the default config shipped for a scenario."""
    return Path(__file__).parent / "configs" / f"{name}.toml"
