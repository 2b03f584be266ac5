"""Two-dimensional Lorenz-95 testbed and the targeting scenario built on it.

Grid arrays are indexed ``[lon, lat]`` with shape ``(36, 9)``; ensembles add
a leading member axis.  Longitude is cyclic; in latitude the advection terms
see a constant ghost value of 4 outside the grid, while the linear damping
term only ever sees real grid values.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ArgumentError, NumericError
from .gaussian import JointGaussian

log = logging.getLogger(__name__)

L_ON = 36
L_AT = 9
FORCING = 8.0
GHOST = 4.0
STEPS_PER_WINDOW_DT = 0.05  # model time of one 6-hour window


def derivative(y: np.ndarray, forcing: float = FORCING) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    single = y.ndim == 2
    out = kernels.l95_tendency(y[None] if single else y, forcing, GHOST)
    return out[0] if single else out


def integrate(y: np.ndarray, dt: float, steps: int, forcing: float = FORCING) -> np.ndarray:
    """Classical RK4, ``steps`` steps of size ``dt``."""
    if dt <= 0:
        raise ArgumentError("dt must be positive")
    if steps < 0:
        raise ArgumentError("steps must be non-negative")
    y = np.asarray(y, dtype=float)
    if steps == 0:
        return y.copy()
    single = y.ndim == 2
    out, bad = kernels.l95_rk4(y[None] if single else y, dt, steps, forcing, GHOST)
    if bad >= 0:
        raise NumericError(f"Lorenz-95 state became non-finite at step {bad}")
    return out[0] if single else out


@dataclass
class EnsembleState:
    members: np.ndarray  # (M, L_ON, L_AT)
    time: float = 0.0

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=float)
        if self.members.ndim != 3 or self.members.shape[0] < 2:
            raise ArgumentError("an ensemble needs at least two members of 2-D fields")

    @property
    def size(self) -> int:
        return self.members.shape[0]

    def forecast(self, dt: float, steps: int) -> "EnsembleState":
        return EnsembleState(integrate(self.members, dt, steps), self.time + dt * steps)


def ensrf_assimilate(ens: EnsembleState, obs_index, obs_values, noise) -> EnsembleState:
    """Serial ensemble square-root filter (one scalar observation at a time).

    ``obs_index`` are flat grid indices (``lon * L_AT + lat``), each observed
    directly with error variance ``noise`` (scalar or per observation).
    """
    idx = np.atleast_1d(np.asarray(obs_index, dtype=np.int64))
    vals = np.atleast_1d(np.asarray(obs_values, dtype=float))
    r = np.broadcast_to(np.asarray(noise, dtype=float), idx.shape)
    if vals.shape != idx.shape:
        raise ArgumentError("one observed value per observation index")
    if np.any(r <= 0):
        raise ArgumentError("observation noise must be positive")
    m = ens.size
    shape = ens.members.shape
    x = ens.members.reshape(m, -1)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[1]):
        raise ArgumentError("observation index outside the grid")
    mean = x.mean(axis=0)
    pert = x - mean
    for k, yo, rk in zip(idx, vals, r):
        hx = pert[:, k].copy()
        var = float(hx @ hx) / (m - 1)
        if var <= 0.0:
            log.warning("zero prior variance at observed index %d; observation skipped", k)
            continue
        gain = (pert.T @ hx) / (m - 1) / (var + rk)
        mean = mean + gain * (yo - mean[k])
        alpha = 1.0 / (1.0 + math.sqrt(rk / (var + rk)))
        pert = pert - alpha * np.outer(hx, gain)
    return EnsembleState((mean + pert).reshape(shape), ens.time)


# ---------------------------------------------------------------------------
# Targeting scenario
# ---------------------------------------------------------------------------


@dataclass
class LorenzConfig:
    """Scenario knobs.  Defaults marked (package default) are choices of this package."""

    ensemble_size: int = 1024
    spinup: float = 500.0  # (package default)
    dt: float = 0.01  # (package default)
    cycles: int = 20  # assimilation windows before the decision time (package default)
    climatology_interval: float = 0.5  # spacing of climatology draws (package default)
    t_s: float = 0.05
    t_v: float = 0.55
    ocean_block: tuple[int, int, int, int] = (12, 0, 12, 9)  # lon0, lat0, n_lon, n_lat
    search_block: tuple[int, int, int, int] = (14, 1, 8, 6)  # inside the ocean block (package default offset)
    agent_grid: tuple[int, int] = (1, 6)  # agents along lon, along lat
    verification_block: tuple[int, int, int, int] = (26, 3, 4, 3)  # (package default)
    routine_sensors: int = 93
    routine_seed: int = 0  # (package default)
    ocean_acceptance: float = 0.05  # (package default)
    noise_factor: float = 0.02  # targeted R = factor * mean climatological variance (package default)
    routine_noise_factor: float = 0.02  # (package default)
    cardinality: int = 1


# search block and agent split per topology: six 8x1 strips, six 4x2 tiles,
# nine 3x2 tiles.  Offsets inside the ocean block are a package choice.
TOPOLOGIES = {
    "row6": ((14, 1, 8, 6), (1, 6)),
    "2x3": ((14, 1, 8, 6), (2, 3)),
    "3x3": ((13, 1, 9, 6), (3, 3)),
}


def topology_config(name: str, **overrides) -> LorenzConfig:
    try:
        block, grid = TOPOLOGIES[name]
    except KeyError:
        raise ArgumentError(f"unknown topology {name!r}; expected one of {sorted(TOPOLOGIES)}") from None
    return LorenzConfig(**{"search_block": block, "agent_grid": grid, **overrides})


@dataclass
class TargetingScenario:
    config: LorenzConfig
    routine_network: np.ndarray  # flat grid indices
    search_region: np.ndarray  # flat grid indices, catalog order
    regions: list[list[int]]  # per agent, catalog sensing indices
    verification_region: np.ndarray  # flat grid indices
    t_s: float
    t_v: float
    climatological_variance: float = field(default=float("nan"))


def flat_index(lon, lat):
    return np.asarray(lon) % L_ON * L_AT + np.asarray(lat)


def block_indices(block) -> np.ndarray:
    lon0, lat0, nlon, nlat = block
    if lat0 < 0 or lat0 + nlat > L_AT or nlon > L_ON or nlon < 1 or nlat < 1:
        raise ArgumentError(f"block {block} does not fit the {L_ON}x{L_AT} grid")
    lon = (lon0 + np.arange(nlon)) % L_ON
    lat = lat0 + np.arange(nlat)
    return flat_index(lon[:, None], lat[None, :]).ravel()


def agent_regions(block, agent_grid) -> list[np.ndarray]:
    """Split ``block`` into ``agent_grid`` equal rectangles (lon-major order)."""
    lon0, lat0, nlon, nlat = block
    alon, alat = agent_grid
    if nlon % alon or nlat % alat:
        raise ArgumentError(f"block {nlon}x{nlat} cannot be split into {alon}x{alat} equal regions")
    w, h = nlon // alon, nlat // alat
    out = []
    for a in range(alon):
        for b in range(alat):
            out.append(block_indices((lon0 + a * w, lat0 + b * h, w, h)))
    return out


def routine_network(n: int, ocean_block, seed: int, ocean_acceptance: float) -> np.ndarray:
    """Rejection-sampled fixed network that leaves the ocean block sparse."""
    rng = np.random.default_rng(seed)
    ocean = set(block_indices(ocean_block).tolist())
    picked: list[int] = []
    while len(picked) < n:
        cand = int(rng.integers(L_ON * L_AT))
        if cand in picked:
            continue
        if cand in ocean and rng.random() >= ocean_acceptance:
            continue
        picked.append(cand)
    return np.array(sorted(picked), dtype=np.int64)


def ensemble_joint_gaussian(ens_s: EnsembleState, ens_v: EnsembleState, search, verif, noise) -> JointGaussian:
    """Sample covariance of X_search from ``ens_s`` joined with V from ``ens_v``.

    Catalog order: the search points (sensing indices ``0..n_s-1``) then V.
    """
    if ens_s.size != ens_v.size:
        raise ArgumentError("both ensembles must have the same members")
    search = np.asarray(search, dtype=np.int64)
    verif = np.asarray(verif, dtype=np.int64)
    m = ens_s.size
    data = np.hstack([ens_s.members.reshape(m, -1)[:, search], ens_v.members.reshape(m, -1)[:, verif]])
    mean = data.mean(axis=0)
    dev = data - mean
    cov = dev.T @ dev / (m - 1)
    cov = 0.5 * (cov + cov.T)
    n_s = search.size
    return JointGaussian(
        cov=cov,
        sensing=np.arange(n_s),
        verification=np.arange(n_s, n_s + verif.size),
        noise=np.broadcast_to(np.asarray(noise, dtype=float), (n_s,)),
        mean=mean,
    )


def build_targeting_scenario(config: LorenzConfig, seed: int) -> tuple[TargetingScenario, JointGaussian]:
    cfg = config
    if not (0 < cfg.t_s < cfg.t_v):
        raise ArgumentError("need 0 < t_s < t_v")
    search = block_indices(cfg.search_block)
    if not set(search.tolist()) <= set(block_indices(cfg.ocean_block).tolist()):
        raise ArgumentError("search block must lie inside the ocean block")
    verif = block_indices(cfg.verification_block)
    if set(search.tolist()) & set(verif.tolist()):
        raise ArgumentError("verification region overlaps the search region")
    pos = {g: k for k, g in enumerate(search.tolist())}
    regions = [[pos[g] for g in r.tolist()] for r in agent_regions(cfg.search_block, cfg.agent_grid)]
    routine = routine_network(cfg.routine_sensors, cfg.ocean_block, cfg.routine_seed, cfg.ocean_acceptance)

    rng = np.random.default_rng(seed)
    dt = cfg.dt
    window = int(round(STEPS_PER_WINDOW_DT / dt))
    state = FORCING + 0.01 * rng.standard_normal((L_ON, L_AT))
    state = integrate(state, dt, int(round(cfg.spinup / dt)))
    gap = int(round(cfg.climatology_interval / dt))
    members = np.empty((cfg.ensemble_size, L_ON, L_AT))
    for m in range(cfg.ensemble_size):
        state = integrate(state, dt, gap)
        members[m] = state
    truth = integrate(state, dt, gap)
    clim_var = float(members.var(axis=0, ddof=1).mean())
    r_routine = cfg.routine_noise_factor * clim_var
    r_target = cfg.noise_factor * clim_var

    ens = EnsembleState(members, 0.0)
    for _ in range(cfg.cycles):
        ens = ens.forecast(dt, window)
        truth = integrate(truth, dt, window)
        obs = truth.ravel()[routine] + math.sqrt(r_routine) * rng.standard_normal(routine.size)
        ens = ensrf_assimilate(ens, routine, obs, r_routine)

    ens_s = ens.forecast(dt, int(round(cfg.t_s / dt)))
    ens_v = ens_s.forecast(dt, int(round((cfg.t_v - cfg.t_s) / dt)))
    jg = ensemble_joint_gaussian(ens_s, ens_v, search, verif, r_target)
    scenario = TargetingScenario(cfg, routine, search, regions, verif, cfg.t_s, cfg.t_v, clim_var)
    return scenario, jg
