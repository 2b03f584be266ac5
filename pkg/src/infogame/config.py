"""Run configuration: one YAML document, validated with unknown keys rejected."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from .errors import ConfigError
from .game import STRATEGIES
from .lorenz import TOPOLOGIES, LorenzConfig
from .tracking import TRACKING_STRATEGIES, TrackingConfig

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


Block = tuple[int, int, int, int]


class LorenzSection(_Strict):
    topology: Literal["row6", "2x3", "3x3"] = "row6"
    ensemble_size: int = Field(1024, ge=2)
    spinup: float = Field(500.0, ge=0)
    dt: float = Field(0.01, gt=0)
    cycles: int = Field(20, ge=0)
    climatology_interval: float = Field(0.5, gt=0)
    t_s: float = Field(0.05, gt=0)
    t_v: float = Field(0.55, gt=0)
    ocean_block: Block = (12, 0, 12, 9)
    search_block: Optional[Block] = None  # default from topology
    agent_grid: Optional[tuple[int, int]] = None  # default from topology
    verification_block: Block = (26, 3, 4, 3)
    routine_sensors: int = Field(93, ge=0)
    routine_seed: int = 0
    ocean_acceptance: float = Field(0.05, ge=0, le=1)
    noise_factor: float = Field(0.02, gt=0)
    routine_noise_factor: float = Field(0.02, gt=0)
    cardinality: int = Field(1, ge=1)

    def to_config(self) -> LorenzConfig:
        block, grid = TOPOLOGIES[self.topology]
        fields = self.model_dump(exclude={"topology"})
        fields["search_block"] = tuple(self.search_block or block)
        fields["agent_grid"] = tuple(self.agent_grid or grid)
        return LorenzConfig(**fields)


class TrackingSection(_Strict):
    region: float = Field(40.0, gt=0)
    n_uavs: int = Field(3, ge=1)
    start: tuple[float, float] = (20.0, 20.0)
    headings: Literal[8, 12] = 12
    step: float = Field(2.0, gt=0)
    target: tuple[float, float] = (25.0, 28.0)
    sigma: float = Field(0.5, gt=0)
    particles: int = Field(1000, ge=1)
    horizon: int = Field(20, ge=0)
    mode: Literal["closed-loop", "audit"] = "closed-loop"
    audit_gap: bool = False
    audit_every: int = Field(1, ge=1)
    jitter: float = Field(0.1, ge=0)
    nodes_per_panel: int = Field(12, ge=2)
    panel_width: float = Field(8.0, gt=0)
    snapshots: bool = False

    def to_config(self, strategy: str, alpha_bar: float, max_stages: int) -> TrackingConfig:
        fields = self.model_dump(exclude={"snapshots"})
        return TrackingConfig(strategy=strategy, alpha_bar=alpha_bar, max_stages=max_stages, **fields)


class SyntheticSection(_Strict):
    agents: tuple[int, int] = (2, 3)
    actions: tuple[int, int] = (3, 6)
    n_verif: tuple[int, int] = (1, 3)
    verification_is_state: bool = False

    @model_validator(mode="after")
    def _ranges(self):
        for name in ("agents", "actions", "n_verif"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < (0 if name == "n_verif" else 1):
                raise ValueError(f"{name} must be an increasing (low, high) pair")
        return self


class RunConfig(_Strict):
    schema_version: Literal[1] = 1
    scenario: Literal["lorenz-targeting", "tracking", "synthetic-gaussian"]
    strategies: list[str] = Field(default_factory=lambda: list(STRATEGIES), min_length=1)
    alpha_bar: float = Field(0.3, gt=0, le=1)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    output: str = "out"
    max_stages: int = Field(200, ge=1)
    budget: int = Field(10**7, ge=1)
    lorenz: LorenzSection = Field(default_factory=LorenzSection)
    tracking: TrackingSection = Field(default_factory=TrackingSection)
    synthetic: SyntheticSection = Field(default_factory=SyntheticSection)

    @field_validator("seeds")
    @classmethod
    def _unique_seeds(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("seeds must be unique")
        return v

    @field_validator("strategies")
    @classmethod
    def _strategies_known(cls, v, info: ValidationInfo):
        allowed = TRACKING_STRATEGIES if info.data.get("scenario") == "tracking" else STRATEGIES
        for k, s in enumerate(v):
            if s not in allowed:
                raise ValueError(f"entry {k}: unknown strategy {s!r}; expected one of {list(allowed)}")
        if len(set(v)) != len(v):
            raise ValueError("strategies must be unique")
        return v

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>: config must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"{path} is not valid YAML: {err}") from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_LORENZ_HEADER = """\
# Lorenz-95 targeting: {desc}
# Values marked (package default) are choices of this package.
"""

_LORENZ_BODY = """\
schema_version: 1
scenario: lorenz-targeting
strategies: [optimal, local, sequential, iterative, jsfp, jsfp-noinertia]
alpha_bar: 0.3
seeds: [0]
output: out/{name}
max_stages: 200
budget: {budget}
lorenz:
  topology: {topology}
  ensemble_size: 1024
  spinup: 500.0            # (package default) model time before the scenario window
  dt: 0.01                 # (package default) RK4 step
  cycles: 20               # (package default) 6-hour assimilation windows before t = 0
  climatology_interval: 0.5  # (package default) spacing of climatology draws
  t_s: 0.05
  t_v: 0.55
  ocean_block: [12, 0, 12, 9]   # lon0, lat0, n_lon, n_lat; (package default) position
  search_block: {search}   # (package default) position inside the ocean block
  agent_grid: {grid}
  verification_block: [26, 3, 4, 3]  # (package default) downstream 4x3 block
  routine_sensors: 93
  routine_seed: 0          # (package default)
  ocean_acceptance: 0.05   # (package default) share of routine draws kept inside the ocean
  noise_factor: 0.02       # (package default) targeted R = factor * mean climatological variance
  routine_noise_factor: 0.02  # (package default)
  cardinality: 1
"""

_TRACKING = """\
# Range-only tracking with three UAVs from a common start.
# Values marked (package default) are choices of this package.
schema_version: 1
scenario: tracking
strategies: [jsfp, local, sequential]
alpha_bar: 0.3
seeds: [0]
output: out/tracking-3uav
max_stages: 200
budget: 10000000
tracking:
  region: 40.0
  n_uavs: 3
  start: [20.0, 20.0]
  headings: 12             # 8 selects the 45-degree reading
  step: 2.0                # (package default) meters per step
  target: [25.0, 28.0]     # (package default)
  sigma: 0.5               # (package default) range noise, meters
  particles: 1000          # (package default)
  horizon: 20
  mode: closed-loop        # or audit: random motion, planning compared with enumeration
  audit_gap: false
  audit_every: 1
  jitter: 0.1              # (package default) roughening after resampling, meters
  nodes_per_panel: 12      # (package default) quadrature nodes per 8-sigma panel
  panel_width: 8.0
  snapshots: false
"""

PRESETS = {
    "lorenz-row6": ("six agents in a row (8x1 regions)", "row6", 10**7),
    "lorenz-2x3": ("six agents in a 2x3 layout (4x2 regions)", "2x3", 10**7),
    "lorenz-3x3": ("nine agents in a 3x3 layout (3x2 regions)", "3x3", 2 * 10**7),
    "tracking-3uav": None,
}


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    if name == "tracking-3uav":
        return _TRACKING
    desc, topo, budget = PRESETS[name]
    block, grid = TOPOLOGIES[topo]
    return _LORENZ_HEADER.format(desc=desc) + _LORENZ_BODY.format(
        name=name, budget=budget, topology=topo, search=list(block), grid=list(grid))
