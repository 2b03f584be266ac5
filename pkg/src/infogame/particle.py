"""Particle-filter information engine for range-only sensing.

The measurement of a sensor at ``s`` is ``z = ||s - r|| + W`` with an additive
noise density that need not be Gaussian.  Given a weighted particle cloud
``{(V_p, w_p)}`` the predictive density of a set of measurements is the
mixture

    q(z) = sum_p w_p prod_j L_j(z_j | V_p)

(measurements are independent given the target), and entropies are integrals
of ``-q log q`` on a tensor grid of composite Gauss-Legendre nodes.  Because
the noise density does not depend on the sensor or target position,
``H(Z_j | V)`` is just the noise entropy.
"""
from __future__ import annotations

import csv
import functools
import logging
import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import kernels
from .errors import ArgumentError, DegeneracyError, GridCoverageError
from .info import InformationEngine

log = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Noise models
# ---------------------------------------------------------------------------


class GaussianNoise:
    def __init__(self, sigma: float = 0.5):
        if not sigma > 0:
            raise ArgumentError("noise sigma must be positive")
        self.sigma = float(sigma)

    @property
    def scale(self) -> float:
        return self.sigma

    def support(self, tail_sigmas: float = 6.0) -> tuple[float, float]:
        return -tail_sigmas * self.sigma, tail_sigmas * self.sigma

    def logpdf(self, x):
        x = np.asarray(x, dtype=float) / self.sigma
        return -0.5 * x * x - _LOG_SQRT_2PI - math.log(self.sigma)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def entropy(self) -> float:
        return 0.5 * math.log(2.0 * math.pi * math.e * self.sigma**2)

    def sample(self, rng: np.random.Generator, size=None):
        return self.sigma * rng.standard_normal(size)

    def __repr__(self):
        return f"GaussianNoise(sigma={self.sigma!r})"


class GaussianMixtureNoise:
    """Finite mixture of Gaussians; its entropy has no closed form."""

    def __init__(self, weights, means, sigmas):
        self.weights = np.asarray(weights, dtype=float)
        self.means = np.asarray(means, dtype=float)
        self.sigmas = np.asarray(sigmas, dtype=float)
        if not (self.weights.shape == self.means.shape == self.sigmas.shape) or self.weights.ndim != 1:
            raise ArgumentError("mixture weights, means and sigmas must be equal-length vectors")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ArgumentError("mixture weights must be non-negative and sum to 1")
        if np.any(self.sigmas <= 0):
            raise ArgumentError("mixture sigmas must be positive")
        self._entropy = None

    @property
    def scale(self) -> float:
        return float(self.sigmas.min())

    def support(self, tail_sigmas: float = 6.0) -> tuple[float, float]:
        return (float(np.min(self.means - tail_sigmas * self.sigmas)),
                float(np.max(self.means + tail_sigmas * self.sigmas)))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        u = (x[..., None] - self.means) / self.sigmas
        comp = np.log(self.weights, where=self.weights > 0, out=np.full_like(self.weights, -np.inf))
        terms = comp - 0.5 * u * u - _LOG_SQRT_2PI - np.log(self.sigmas)
        top = np.max(terms, axis=-1)
        safe = np.where(np.isfinite(top), top, 0.0)
        return safe + np.log(np.sum(np.exp(terms - safe[..., None]), axis=-1))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def entropy(self) -> float:
        if self._entropy is None:
            lo, hi = self.support(8.0)
            nodes, wts = composite_gauss_legendre(lo, hi, self.scale, panel_width=2.0, nodes_per_panel=16)
            p = self.pdf(nodes)
            self._entropy = float(-np.sum(wts * np.where(p > 0, p * self.logpdf(nodes), 0.0)))
        return self._entropy

    def sample(self, rng: np.random.Generator, size=None):
        comp = rng.choice(self.weights.size, size=size, p=self.weights)
        return self.means[comp] + self.sigmas[comp] * rng.standard_normal(size)

    def __repr__(self):
        return f"GaussianMixtureNoise({self.weights.tolist()}, {self.means.tolist()}, {self.sigmas.tolist()})"


@dataclass(frozen=True)
class RangeSensorModel:
    noise: object = None

    def __post_init__(self):
        if self.noise is None:
            object.__setattr__(self, "noise", GaussianNoise(0.5))

    @staticmethod
    def ranges(sensor, positions) -> np.ndarray:
        d = np.asarray(positions, dtype=float) - np.asarray(sensor, dtype=float)
        return np.hypot(d[..., 0], d[..., 1])

    def likelihood(self, z, sensor, target):
        return self.noise.pdf(np.asarray(z, dtype=float) - self.ranges(sensor, target))

    def log_likelihood(self, z, sensor, target):
        return self.noise.logpdf(np.asarray(z, dtype=float) - self.ranges(sensor, target))


# ---------------------------------------------------------------------------
# Particles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParticleSet:
    positions: np.ndarray  # (M, 2), meters
    weights: np.ndarray  # (M,)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ArgumentError("particle positions must have shape (M, 2) with M >= 1")
        if w.shape != (pos.shape[0],):
            raise ArgumentError("one weight per particle")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ArgumentError("particle weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ArgumentError(f"particle weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, positions, weights=None) -> "ParticleSet":
        pos = np.asarray(positions, dtype=float)
        w = np.ones(len(pos)) if weights is None else np.asarray(weights, dtype=float)
        return cls(pos, w / w.sum())

    @classmethod
    def uniform(cls, rng: np.random.Generator, m: int, bounds) -> "ParticleSet":
        (x0, y0), (x1, y1) = bounds
        pos = np.column_stack([rng.uniform(x0, x1, m), rng.uniform(y0, y1, m)])
        return cls(pos, np.full(m, 1.0 / m))

    @property
    def size(self) -> int:
        return self.weights.size

    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))

    def mean(self) -> np.ndarray:
        return self.weights @ self.positions


def save_particles_csv(path, ps: ParticleSet) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "y", "w"])
        for (x, y), w in zip(ps.positions, ps.weights):
            out.writerow([repr(float(x)), repr(float(y)), repr(float(w))])


def load_particles_csv(path) -> ParticleSet:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return ParticleSet(data[:, :2], data[:, 2])


def systematic_resample(rng: np.random.Generator, weights: np.ndarray) -> np.ndarray:
    m = weights.size
    u = (rng.random() + np.arange(m)) / m
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side="right")


def pf_update(ps: ParticleSet, model: RangeSensorModel, sensors, ranges, rng: np.random.Generator | None = None,
              jitter: float = 0.0, bounds=None) -> ParticleSet:
    """Bayes update with range measurements, resampling when ESS < M/2.

    ``jitter`` is the standard deviation of the roughening noise added after
    resampling.  If every particle becomes impossible the filter is reset to
    uniform over ``bounds`` with a warning; without bounds that raises.
    """
    sensors = np.atleast_2d(np.asarray(sensors, dtype=float))
    ranges = np.atleast_1d(np.asarray(ranges, dtype=float))
    if len(sensors) != len(ranges):
        raise ArgumentError("one observed range per sensor")
    logw = np.log(ps.weights, where=ps.weights > 0, out=np.full(ps.size, -np.inf))
    for s, z in zip(sensors, ranges):
        logw = logw + model.log_likelihood(z, s, ps.positions)
    logw = np.where(np.isnan(logw), -np.inf, logw)
    top = logw.max()
    if not np.isfinite(top):
        if bounds is None or rng is None:
            raise DegeneracyError("all particle weights vanished")
        log.warning("particle filter degenerate; resetting to uniform over the region")
        return ParticleSet.uniform(rng, ps.size, bounds)
    w = np.exp(logw - top)
    w /= w.sum()
    out = ParticleSet(ps.positions, w / w.sum())
    if out.ess() < 0.5 * out.size:
        if rng is None:
            raise ArgumentError("resampling needs a random generator")
        pos = out.positions[systematic_resample(rng, out.weights)]
        if jitter > 0:
            pos = pos + jitter * rng.standard_normal(pos.shape)
            if bounds is not None:
                (x0, y0), (x1, y1) = bounds
                pos = np.column_stack([np.clip(pos[:, 0], x0, x1), np.clip(pos[:, 1], y0, y1)])
        out = ParticleSet(pos, np.full(out.size, 1.0 / out.size))
    return out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _leggauss(n: int):
    return leggauss(n)


def composite_gauss_legendre(lo: float, hi: float, scale: float, panel_width: float = 8.0,
                             nodes_per_panel: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels of width ``panel_width * scale`` covering [lo, hi]."""
    if not hi > lo:
        raise ArgumentError("empty quadrature interval")
    panels = max(1, int(math.ceil((hi - lo) / (panel_width * scale) - 1e-9)))
    x, wt = _leggauss(nodes_per_panel)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (half[:, None] * x + mid[:, None]).ravel(), (half[:, None] * wt).ravel()


@dataclass(frozen=True)
class QuadratureRule:
    """Composite Gauss-Legendre rule adapted to the spread of predicted ranges.

    Each measurement axis spans ``[min range + noise lo, max range + noise hi]``
    where the noise support reaches ``tail_sigmas`` noise scales out; the axis
    is cut into panels of ``panel_width`` noise scales with
    ``nodes_per_panel`` nodes each.
    """

    nodes_per_panel: int = 12
    panel_width: float = 8.0
    tail_sigmas: float = 6.0
    tail_tol: float = 1e-6

    def refined(self, factor: int = 2) -> "QuadratureRule":
        return QuadratureRule(self.nodes_per_panel * factor, self.panel_width, self.tail_sigmas, self.tail_tol)


@dataclass(frozen=True)
class SensorAxis:
    nodes: np.ndarray
    weights: np.ndarray
    lik: np.ndarray  # (n_nodes, M): noise density of node minus predicted range


def sensor_axis(ps: ParticleSet, model: RangeSensorModel, sensor, rule: QuadratureRule) -> SensorAxis:
    mu = model.ranges(sensor, ps.positions)
    lo, hi = model.noise.support(rule.tail_sigmas)
    nodes, wts = composite_gauss_legendre(float(mu.min()) + lo, float(mu.max()) + hi, model.noise.scale,
                                          rule.panel_width, rule.nodes_per_panel)
    lik = model.noise.pdf(nodes[:, None] - mu[None, :])
    mass = float(wts @ (lik @ ps.weights))
    if not abs(1.0 - mass) <= rule.tail_tol:
        raise GridCoverageError(f"quadrature grid holds predictive mass {mass:.9f}; tail tolerance {rule.tail_tol:g}")
    return SensorAxis(nodes, wts, lik)


def _prefix_rows(axes: Sequence[SensorAxis], w: np.ndarray):
    """Tensor-product rows for the prefix sensors: (R, M) weighted likelihoods and (R,) weights."""
    rows = w[None, :].copy()
    wr = np.ones(1)
    for ax in axes:
        rows = (rows[:, None, :] * ax.lik[None, :, :]).reshape(-1, w.size)
        wr = (wr[:, None] * ax.weights[None, :]).ravel()
    return rows, wr


def grouped_entropies(prefix: Sequence[SensorAxis], lasts: Sequence[SensorAxis], w: np.ndarray,
                      max_cells: int = 4_000_000) -> np.ndarray:
    """Entropy of prefix + each last sensor, sharing the prefix tensor.

    One GEMM against the stacked (zero-padded) last-sensor likelihoods gives
    the mixture density on every grid cell of every candidate.
    """
    rows, wr = _prefix_rows(prefix, w)
    k = len(lasts)
    cmax = max(ax.nodes.size for ax in lasts)
    stack = np.zeros((k, cmax, w.size))
    wc = np.zeros((k, cmax))
    for n, ax in enumerate(lasts):
        stack[n, : ax.nodes.size] = ax.lik
        wc[n, : ax.nodes.size] = ax.weights
    flat = stack.reshape(k * cmax, w.size).T
    out = np.zeros(k)
    step = max(1, max_cells // (k * cmax))
    for lo in range(0, rows.shape[0], step):
        q = (rows[lo: lo + step] @ flat).reshape(-1, k, cmax)
        out += kernels.mixture_entropy(q, wr[lo: lo + step], wc)
    return out


# ---------------------------------------------------------------------------
# Entropy and mutual information of sensor sets
# ---------------------------------------------------------------------------


def _check_joint(sensors, max_joint):
    sensors = np.atleast_2d(np.asarray(sensors, dtype=float)) if len(sensors) else np.zeros((0, 2))
    if sensors.shape[0] > max_joint:
        raise ArgumentError(f"joint sets are limited to {max_joint} sensors, got {sensors.shape[0]}")
    return sensors


def entropy_prior(ps: ParticleSet, model: RangeSensorModel, sensors, rule: QuadratureRule | None = None,
                  max_joint: int = 3) -> float:
    """Differential entropy (nats) of the predicted measurements at ``sensors``."""
    rule = rule or QuadratureRule()
    sensors = _check_joint(sensors, max_joint)
    if sensors.shape[0] == 0:
        return 0.0
    axes = [sensor_axis(ps, model, s, rule) for s in sensors]
    return float(grouped_entropies(axes[:-1], axes[-1:], ps.weights)[0])


def entropy_given_state(ps: ParticleSet, model: RangeSensorModel, sensor) -> float:
    # additive noise with a fixed density: every particle contributes the noise entropy
    return model.noise.entropy()


def conditional_entropy(ps: ParticleSet, model: RangeSensorModel, sensors, others, rule: QuadratureRule | None = None,
                        max_joint: int = 3) -> float:
    """H(Z_sensors | Z_others) = H(Z_sensors, Z_others) - H(Z_others)."""
    sensors = _check_joint(sensors, max_joint)
    others = _check_joint(others, max_joint)
    if others.shape[0] == 0:
        return entropy_prior(ps, model, sensors, rule, max_joint)
    both = np.vstack([others, sensors])
    return entropy_prior(ps, model, both, rule, max_joint) - entropy_prior(ps, model, others, rule, max_joint)


def particle_mi(ps: ParticleSet, model: RangeSensorModel, sensors, given=(), rule: QuadratureRule | None = None,
                max_joint: int = 3) -> float:
    """I(V; Z_sensors | Z_given) = H(Z_sensors | Z_given) - sum_j H(Z_j | V)."""
    sensors = _check_joint(sensors, max_joint)
    h_cond = conditional_entropy(ps, model, sensors, given, rule, max_joint)
    return h_cond - sum(entropy_given_state(ps, model, s) for s in sensors)


class ParticleEngine(InformationEngine):
    """Information engine over a fixed catalog of candidate sensor positions.

    Joint entropies are cached by sensor set for the life of the engine (one
    planning step, one particle snapshot).
    """

    negative_tol = 1e-4

    def __init__(self, ps: ParticleSet, model: RangeSensorModel, sensors, rule: QuadratureRule | None = None,
                 max_joint: int = 3):
        self.ps = ps
        self.model = model
        self.sensors = np.atleast_2d(np.asarray(sensors, dtype=float))
        self.rule = rule or QuadratureRule()
        self.max_joint = int(max_joint)
        self._axes: dict[int, SensorAxis] = {}
        self._h: dict[frozenset, float] = {frozenset(): 0.0}
        self._h_noise = model.noise.entropy()

    @property
    def size(self) -> int:
        return self.sensors.shape[0]

    def axis(self, k: int) -> SensorAxis:
        ax = self._axes.get(k)
        if ax is None:
            ax = self._axes[k] = sensor_axis(self.ps, self.model, self.sensors[k], self.rule)
        return ax

    def entropies(self, requests) -> None:
        """Fill the cache for ``(prefix, last)`` requests, one GEMM per prefix."""
        groups: dict[tuple, list[int]] = {}
        for prefix, last in requests:
            key = frozenset(prefix) | {last}
            if key in self._h:
                continue
            if len(key) > self.max_joint:
                raise ArgumentError(f"joint sets are limited to {self.max_joint} sensors")
            lst = groups.setdefault(tuple(prefix), [])
            if last not in lst:
                lst.append(last)
        for prefix, lasts in groups.items():
            vals = grouped_entropies([self.axis(p) for p in prefix], [self.axis(k) for k in lasts], self.ps.weights)
            for k, h in zip(lasts, vals):
                self._h[frozenset(prefix) | {k}] = float(h)

    def entropy(self, sel) -> float:
        key = frozenset(sel)
        if key not in self._h:
            s = sorted(key)
            self.entropies([(tuple(s[:-1]), s[-1])])
        return self._h[key]

    def _mi(self, sel):
        return self.entropy(sel) - len(sel) * self._h_noise

    def _conditional_mi(self, sel, given):
        return self.entropy(set(sel) | set(given)) - self.entropy(given) - len(sel) * self._h_noise

    def _prefetch(self, sels, given):
        # singletons share the conditioning set as their prefix
        reqs = []
        for s in sels:
            if len(s) == 1:
                reqs.append((tuple(given), s[0]))
            else:
                full = sorted(set(s) | set(given))
                reqs.append((tuple(full[:-1]), full[-1]))
        if given:
            reqs.append((tuple(given[:-1]), given[-1]))
        self.entropies(reqs)

    def conditional_mi_many(self, sels, given=()):
        sels = [self._check(s) for s in sels]
        g = self._check(given)
        self._prefetch(sels, g)
        return np.array([self.conditional_mi(s, g) for s in sels])

    def enumerate_mi(self, action_sets):
        joints = list(product(*action_sets))
        reqs = []
        for joint in joints:
            flat = [p for a in joint for p in a]
            if len(set(flat)) != len(flat):
                raise ArgumentError("joint action repeats a sensing point")
            reqs.append((tuple(flat[:-1]), flat[-1]))
        self.entropies(reqs)
        return np.array([self.mi([p for a in joint for p in a]) for joint in joints])
