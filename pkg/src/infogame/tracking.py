"""Closed-loop range-only tracking of a stationary target by a UAV team.

Each step every UAV may move ``step`` meters along one of a fixed set of
equally spaced headings; the team picks headings by solving the sensing game
over the candidate next positions, moves, measures ranges and updates the
shared particle filter.

Two modes:

``closed-loop``  UAVs fly the planned headings.
``audit``        UAVs fly random headings; the planning problem is still
                 solved (and compared with enumeration) every step, so the
                 comparison never feeds back into the motion.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .game import STRATEGIES, SensingGame, potential, run_strategy
from .particle import (
    GaussianNoise,
    ParticleEngine,
    ParticleSet,
    QuadratureRule,
    RangeSensorModel,
    pf_update,
)

TRACKING_STRATEGIES = STRATEGIES + ("random",)
MODES = ("closed-loop", "audit")


@dataclass
class TrackingConfig:
    region: float = 40.0
    n_uavs: int = 3
    start: tuple[float, float] = (20.0, 20.0)
    headings: int = 12
    step: float = 2.0  # (package default)
    target: tuple[float, float] = (25.0, 28.0)  # (package default)
    sigma: float = 0.5  # (package default)
    particles: int = 1000  # (package default)
    horizon: int = 20
    strategy: str = "jsfp"
    mode: str = "closed-loop"
    alpha_bar: float = 0.3
    max_stages: int = 200
    audit_gap: bool = False  # closed-loop only; audit mode always enumerates
    audit_every: int = 1  # enumerate on every k-th step only
    jitter: float = 0.1  # roughening after resampling, meters (package default)
    nodes_per_panel: int = 12
    panel_width: float = 8.0

    def __post_init__(self):
        if self.headings not in (8, 12):
            raise ArgumentError("headings must be 12 (or 8 for the alternative reading)")
        if self.n_uavs < 1:
            raise ArgumentError("need at least one UAV")
        if self.strategy not in TRACKING_STRATEGIES:
            raise ArgumentError(f"unknown strategy {self.strategy!r}; expected one of {TRACKING_STRATEGIES}")
        if self.mode not in MODES:
            raise ArgumentError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "audit" and self.strategy == "random":
            raise ArgumentError("audit mode needs a planning strategy to audit")
        if not (0.0 < self.alpha_bar <= 1.0):
            raise ArgumentError("alpha_bar must lie in (0, 1]")
        if self.audit_every < 1:
            raise ArgumentError("audit_every must be at least 1")
        if self.horizon < 0 or self.step <= 0 or self.region <= 0 or self.particles < 1:
            raise ArgumentError("horizon, step, region and particle count must be positive")
        for p in (self.start, self.target):
            if not (0.0 <= p[0] <= self.region and 0.0 <= p[1] <= self.region):
                raise ArgumentError(f"position {p} lies outside the region")

    @property
    def bounds(self):
        return (0.0, 0.0), (self.region, self.region)

    @property
    def model(self) -> RangeSensorModel:
        return RangeSensorModel(GaussianNoise(self.sigma))

    @property
    def rule(self) -> QuadratureRule:
        return QuadratureRule(nodes_per_panel=self.nodes_per_panel, panel_width=self.panel_width)

    def heading_degrees(self) -> np.ndarray:
        return np.arange(self.headings) * (360.0 / self.headings)


def candidates(cfg: TrackingConfig, position) -> tuple[list[int], np.ndarray]:
    """Headings (indices) whose next position stays in the region, and those positions."""
    ang = np.deg2rad(cfg.heading_degrees())
    nxt = np.asarray(position, dtype=float) + cfg.step * np.column_stack([np.cos(ang), np.sin(ang)])
    inside = np.all((nxt >= 0.0) & (nxt <= cfg.region), axis=1)
    keep = np.flatnonzero(inside)
    if keep.size == 0:
        return [-1], np.asarray(position, dtype=float)[None, :]  # hold position
    return keep.tolist(), nxt[keep]


@dataclass
class PlanResult:
    headings: list[int]  # per UAV; -1 means hold
    positions: np.ndarray  # (N, 2) planned next positions
    joint: tuple[int, ...]
    mi: float
    stages: int
    evaluations: int
    game: SensingGame
    heading_sets: list[list[int]]


def build_game(cfg: TrackingConfig, ps: ParticleSet, positions) -> tuple[SensingGame, list[list[int]]]:
    sensors, regions, heading_sets = [], [], []
    for p in positions:
        heads, nxt = candidates(cfg, p)
        regions.append(list(range(len(sensors), len(sensors) + len(heads))))
        sensors.extend(nxt)
        heading_sets.append(heads)
    engine = ParticleEngine(ps, cfg.model, np.array(sensors), cfg.rule, max_joint=max(3, len(positions)))
    return SensingGame(engine, regions), heading_sets


def plan_step(cfg: TrackingConfig, ps: ParticleSet, positions, strategy: str | None = None, seed: int = 0) -> PlanResult:
    strategy = strategy or cfg.strategy
    game, heading_sets = build_game(cfg, ps, positions)
    if strategy == "random":
        rng = np.random.default_rng(seed)
        joint = tuple(int(rng.integers(len(a))) for a in game.action_sets)
        stages = evals = 0
    else:
        joint, trace = run_strategy(game, strategy, alpha_bar=cfg.alpha_bar, seed=seed,
                                    max_stages=cfg.max_stages, budget=10**6)
        stages, evals = trace.stages, trace.evaluations
    sensors = game.engine.sensors
    pts = game.points(joint)
    return PlanResult(
        headings=[heading_sets[i][joint[i]] for i in range(game.n_agents)],
        positions=sensors[list(pts)],
        joint=joint,
        mi=potential(game, joint),
        stages=stages,
        evaluations=evals,
        game=game,
        heading_sets=heading_sets,
    )


TRACE_COLUMNS = ["step", "uav", "x", "y", "heading", "measured_range", "strategy_mi", "optimal_mi", "gap",
                 "jsfp_stages", "jsfp_evals"]


@dataclass
class EpisodeTrace:
    strategy: str
    mode: str
    rows: list[dict] = field(default_factory=list)
    snapshots: list[ParticleSet] = field(default_factory=list)  # filter before each plan
    planned: list[list[float]] = field(default_factory=list)  # planned headings (deg) per step
    final: ParticleSet | None = None

    @property
    def steps(self) -> int:
        return len({r["step"] for r in self.rows})

    def per_step(self) -> list[dict]:
        seen: dict[int, dict] = {}
        for r in self.rows:
            seen.setdefault(r["step"], r)
        return [seen[k] for k in sorted(seen)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in TRACE_COLUMNS])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def read_episode_csv(text: str) -> list[dict]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        rec = {}
        for k, v in row.items():
            if k in ("step", "uav", "jsfp_stages", "jsfp_evals"):
                rec[k] = int(v)
            else:
                rec[k] = float(v) if v != "" else float("nan")
        out.append(rec)
    return out


def run_episode(cfg: TrackingConfig, seed: int, keep_snapshots: bool = False) -> EpisodeTrace:
    """Simulate one episode.

    The UAVs take one range measurement at the common start before the first
    plan, so that the first planning problem already sees a ring-shaped
    posterior instead of the flat prior.
    """
    ss = np.random.SeedSequence(seed)
    prior_rng, noise_rng, pf_rng, plan_rng, walk_rng = (np.random.default_rng(s) for s in ss.spawn(5))
    model = cfg.model
    target = np.asarray(cfg.target, dtype=float)
    positions = np.tile(np.asarray(cfg.start, dtype=float), (cfg.n_uavs, 1))
    trace = EpisodeTrace(cfg.strategy, cfg.mode)

    def measure(pos):
        return model.ranges(target, pos) + model.noise.sample(noise_rng, len(pos))

    ps = ParticleSet.uniform(prior_rng, cfg.particles, cfg.bounds)
    if cfg.horizon == 0:
        trace.final = ps
        return trace
    ps = pf_update(ps, model, positions, measure(positions), pf_rng, cfg.jitter, cfg.bounds)

    enumerate_gaps = cfg.mode == "audit" or cfg.audit_gap
    for k in range(cfg.horizon):
        audit = enumerate_gaps and k % cfg.audit_every == 0
        if keep_snapshots:
            trace.snapshots.append(ps)
        plan_seed = int(plan_rng.integers(2**63))
        plan = plan_step(cfg, ps, positions, cfg.strategy, plan_seed)
        opt_mi = float("nan")
        if audit and cfg.strategy != "optimal":
            _, opt_trace = run_strategy(plan.game, "optimal", budget=10**6)
            opt_mi = opt_trace.records[-1].potential
        elif audit:
            opt_mi = plan.mi
        gap = opt_mi - plan.mi if audit else float("nan")
        degs = cfg.heading_degrees()
        trace.planned.append([float(degs[h]) if h >= 0 else float("nan") for h in plan.headings])

        if cfg.mode == "audit":
            heads, nxt = [], []
            for i, p in enumerate(positions):
                hs, cand = candidates(cfg, p)
                a = int(walk_rng.integers(len(hs)))
                heads.append(hs[a])
                nxt.append(cand[a])
            positions = np.array(nxt)
        else:
            heads = plan.headings
            positions = plan.positions.copy()
        z = measure(positions)
        jsfp = cfg.strategy.startswith("jsfp")
        for i in range(cfg.n_uavs):
            trace.rows.append({
                "step": k,
                "uav": i,
                "x": float(positions[i, 0]),
                "y": float(positions[i, 1]),
                "heading": float(degs[heads[i]]) if heads[i] >= 0 else float("nan"),
                "measured_range": float(z[i]),
                "strategy_mi": float(plan.mi),
                "optimal_mi": float(opt_mi),
                "gap": float(gap),
                "jsfp_stages": plan.stages if jsfp else 0,
                "jsfp_evals": plan.evaluations if jsfp else 0,
            })
        ps = pf_update(ps, model, positions, z, pf_rng, cfg.jitter, cfg.bounds)
    trace.final = ps
    return trace


def angular_separations(headings_deg) -> list[float]:
    """Pairwise angular distances (degrees, in [0, 180])."""
    h = [float(x) for x in headings_deg]
    out = []
    for a in range(len(h)):
        for b in range(a + 1, len(h)):
            d = abs(h[a] - h[b]) % 360.0
            out.append(min(d, 360.0 - d))
    return out
