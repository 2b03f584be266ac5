"""Linear-Gaussian information engine with backward selection.

Measurements are ``Z_s = X_s + W_s`` with ``W_s ~ N(0, R_s)``.  Instead of
conditioning on every candidate measurement, the engine conditions the
sensing-state covariance on the verification variables once and then reads
principal submatrices:

    I(V; Z_s) = 0.5 * [logdet(P_s + R_s) - logdet(P_s|V + R_s)]

Conditional utilities first condition both cached matrices on the noisy
measurements ``Z_given``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ArgumentError, CatalogError, NumericError
from .info import InformationEngine

JITTER = 1e-10
PSD_TOL = 1e-9
SYM_TOL = 1e-12


def _scale(mat: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0


def cholesky(mat: np.ndarray) -> np.ndarray:
    """Cholesky factor with one jitter rescue.

    Rank-deficient ensemble covariances are routine, so a first failure adds
    ``1e-10 * trace/n`` to the diagonal; a second failure is fatal.
    """
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    n = mat.shape[0]
    bump = JITTER * max(float(np.trace(mat)) / n, np.finfo(float).tiny)
    try:
        return np.linalg.cholesky(mat + bump * np.eye(n))
    except np.linalg.LinAlgError:
        raise NumericError(f"matrix of size {n} is not positive definite after jitter {bump:.3e}", matrix=mat)


def logdet(mat: np.ndarray) -> float:
    if mat.shape[0] == 0:
        return 0.0
    return 2.0 * float(np.sum(np.log(np.diag(cholesky(mat)))))


def _schur(cov: np.ndarray, t: np.ndarray, g: np.ndarray) -> np.ndarray:
    s_tt = cov[np.ix_(t, t)]
    if g.size == 0:
        return s_tt.copy()
    s_tg = cov[np.ix_(t, g)]
    chol = cholesky(cov[np.ix_(g, g)])
    half = np.linalg.solve(chol, s_tg.T)
    out = s_tt - half.T @ half
    return 0.5 * (out + out.T)


def condition_on(cov: np.ndarray, target: Sequence[int], given: Sequence[int], check: bool = True) -> np.ndarray:
    """Schur complement ``Cov(target | given)``, symmetrised."""
    cov = np.asarray(cov, dtype=float)
    t = np.asarray(list(target), dtype=np.int64)
    g = np.asarray(list(given), dtype=np.int64)
    if set(t.tolist()) & set(g.tolist()):
        raise ArgumentError("target and conditioning sets overlap")
    n = cov.shape[0]
    for idx in np.concatenate([t, g]):
        if idx < 0 or idx >= n:
            raise CatalogError(f"index {idx} outside covariance of size {n}")
    out = _schur(cov, t, g)
    if check and out.size:
        lo = float(np.linalg.eigvalsh(out).min())
        if lo < -PSD_TOL * _scale(cov):
            raise NumericError(f"conditional covariance has eigenvalue {lo:.3e}", matrix=out)
    return out


@dataclass(frozen=True)
class JointGaussian:
    """Gaussian over a frozen state catalog.

    ``sensing[k]`` is the state variable behind selectable index ``k``;
    ``verification`` lists the state variables in V.  The two may overlap
    (V = X is allowed).  ``noise[k]`` is the variance R of sensor ``k``.
    """

    cov: np.ndarray
    sensing: np.ndarray
    verification: np.ndarray
    noise: np.ndarray
    mean: np.ndarray = field(default=None)

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        n = cov.shape[0]
        if cov.ndim != 2 or cov.shape[1] != n:
            raise ArgumentError(f"covariance must be square, got {cov.shape}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYM_TOL * _scale(cov):
            raise NumericError("covariance is not symmetric", matrix=cov)
        if n and float(np.linalg.eigvalsh(cov).min()) < -PSD_TOL * _scale(cov):
            raise NumericError("covariance is not positive semidefinite", matrix=cov)
        sensing = np.asarray(self.sensing, dtype=np.int64)
        verification = np.asarray(self.verification, dtype=np.int64)
        noise = np.broadcast_to(np.asarray(self.noise, dtype=float), sensing.shape).copy()
        for arr in (sensing, verification):
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise CatalogError("catalog index outside covariance")
        if len(set(sensing.tolist())) != sensing.size:
            raise ArgumentError("sensing indices must be unique")
        if np.any(noise <= 0) or not np.all(np.isfinite(noise)):
            raise ArgumentError("noise variances must be strictly positive")
        mean = np.zeros(n) if self.mean is None else np.asarray(self.mean, dtype=float)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "sensing", sensing)
        object.__setattr__(self, "verification", verification)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "mean", mean)


@dataclass(frozen=True)
class ConditionedCache:
    cov_prior: np.ndarray
    cov_given_v: np.ndarray


def build_cache(jg: JointGaussian) -> ConditionedCache:
    cov, s, v = jg.cov, jg.sensing, jg.verification
    prior = cov[np.ix_(s, s)].copy()
    if v.size == 0:
        return ConditionedCache(prior, prior.copy())
    # sensing variables that are themselves in V are known exactly given V
    in_v = np.isin(s, v)
    given_v = prior.copy()
    free = np.flatnonzero(~in_v)
    given_v[in_v, :] = 0.0
    given_v[:, in_v] = 0.0
    if free.size:
        given_v[np.ix_(free, free)] = condition_on(cov, s[free], v)
    return ConditionedCache(prior, given_v)


def gaussian_mi(cache: ConditionedCache, noise: np.ndarray, sel: Sequence[int], given: Sequence[int] = ()) -> float:
    """``I(V; Z_sel | Z_given)`` in nats from a conditioned cache."""
    a = np.asarray(list(sel), dtype=np.int64)
    g = np.asarray(list(given), dtype=np.int64)
    if a.size == 0:
        return 0.0
    u = np.concatenate([a, g])
    ia = np.arange(a.size)
    ig = np.arange(a.size, u.size)
    r = np.diag(noise[u])
    z_prior = cache.cov_prior[np.ix_(u, u)] + r
    z_post = cache.cov_given_v[np.ix_(u, u)] + r
    return 0.5 * (logdet(_schur(z_prior, ia, ig)) - logdet(_schur(z_post, ia, ig)))


class GaussianEngine(InformationEngine):
    def __init__(self, jg: JointGaussian):
        self.jg = jg
        self.cache = build_cache(jg)
        self.noise = jg.noise
        self._z_prior = self.cache.cov_prior + np.diag(self.noise)
        self._z_post = self.cache.cov_given_v + np.diag(self.noise)

    @property
    def size(self) -> int:
        return int(self.jg.sensing.size)

    def _mi(self, sel):
        idx = np.asarray(sel, dtype=np.int64)
        return 0.5 * (logdet(self._z_prior[np.ix_(idx, idx)]) - logdet(self._z_post[np.ix_(idx, idx)]))

    def _conditional_mi(self, sel, given):
        return gaussian_mi(self.cache, self.noise, sel, given)

    def conditional_mi_many(self, sels, given=()):
        sels = [self._check(s) for s in sels]
        g = self._check(given)
        union = sorted(set().union(*map(set, sels))) if sels else []
        if set(union) & set(g):
            raise ArgumentError("a selection overlaps the conditioning set")
        if not union:
            return np.zeros(len(sels))
        u = np.asarray(union + list(g), dtype=np.int64)
        t = np.arange(len(union))
        gi = np.arange(len(union), u.size)
        cp = _schur(self._z_prior[np.ix_(u, u)], t, gi)
        cv = _schur(self._z_post[np.ix_(u, u)], t, gi)
        pos = {s: k for k, s in enumerate(union)}
        out = np.empty(len(sels))
        for n, s in enumerate(sels):
            k = np.asarray([pos[x] for x in s], dtype=np.int64)
            val = 0.5 * (logdet(cp[np.ix_(k, k)]) - logdet(cv[np.ix_(k, k)]))
            out[n] = self._clamp(val, f"I(V; Z{list(s)} | Z{list(g)})")
        return out

    def enumerate_mi(self, action_sets):
        n_agents = len(action_sets)
        nact = np.array([len(a) for a in action_sets], dtype=np.int64)
        kk = np.array([len(a[0]) for a in action_sets], dtype=np.int64)
        for i, acts in enumerate(action_sets):
            if any(len(x) != kk[i] for x in acts):
                raise ArgumentError(f"agent {i} has actions of unequal cardinality")
        pts = np.zeros((n_agents, int(nact.max()), int(kk.max())), dtype=np.int64)
        for i, acts in enumerate(action_sets):
            for a, x in enumerate(acts):
                pts[i, a, : kk[i]] = self._check(x)
        out = kernels.enumerate_logdet_gap(self._z_prior, self._z_post, pts, kk, nact)
        if np.any(~np.isfinite(out)):
            raise NumericError("non-positive-definite selection during enumeration")
        bad = out < -self.negative_tol
        if np.any(bad):
            raise NumericError(f"negative mutual information {out[bad].min():.3e} during enumeration")
        return np.maximum(out, 0.0)


# ---------------------------------------------------------------------------
# Matrix file: .npz with the arrays of JointGaussian plus a JSON catalog that
# tags each state variable ("S<agent>", "V", or "X").
# ---------------------------------------------------------------------------


def catalog_tags(jg: JointGaussian, regions: Sequence[Sequence[int]] | None = None) -> list[str]:
    tags = ["X"] * jg.cov.shape[0]
    for k, var in enumerate(jg.sensing):
        tags[var] = "S"
    if regions is not None:
        for agent, region in enumerate(regions):
            for k in region:
                tags[jg.sensing[k]] = f"S{agent}"
    for var in jg.verification:
        tags[var] = "V" if tags[var] == "X" else tags[var] + "+V"
    return tags


def save_joint_gaussian(path, jg: JointGaussian, regions: Sequence[Sequence[int]] | None = None, extra: dict | None = None) -> Path:
    path = Path(path)
    catalog = {
        "format": "infogame.joint-gaussian",
        "version": 1,
        "tags": catalog_tags(jg, regions),
        "regions": [list(map(int, r)) for r in regions] if regions is not None else None,
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            cov=jg.cov,
            mean=jg.mean,
            sensing=jg.sensing,
            verification=jg.verification,
            noise=jg.noise,
            catalog=np.frombuffer(json.dumps(catalog, sort_keys=True).encode(), dtype=np.uint8),
        )
    return path


def load_joint_gaussian(path) -> tuple[JointGaussian, dict]:
    with np.load(path) as data:
        catalog = json.loads(bytes(data["catalog"]).decode())
        if catalog.get("format") != "infogame.joint-gaussian":
            raise ArgumentError(f"{path} is not a joint-gaussian matrix file")
        jg = JointGaussian(
            cov=data["cov"], sensing=data["sensing"], verification=data["verification"],
            noise=data["noise"], mean=data["mean"],
        )
    return jg, catalog
