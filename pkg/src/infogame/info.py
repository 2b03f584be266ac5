"""Engine contract shared by every information reward.

Game code only ever talks to an :class:`InformationEngine`; the engines keep
their entropy machinery to themselves.  All quantities are in nats.
"""
from __future__ import annotations

import abc
import itertools
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, CatalogError, NumericError

Selection = Sequence[int]


def _as_index_tuple(sel: Iterable[int]) -> tuple[int, ...]:
    return tuple(int(s) for s in sel)


class InformationEngine(abc.ABC):
    """Evaluates ``I(V; Z_sel)`` and ``I(V; Z_sel | Z_given)``.

    Subclasses implement :meth:`_mi` and :meth:`_conditional_mi` on validated,
    sorted index tuples.  The public methods validate, then clamp negatives
    that are within ``negative_tol`` of zero; anything more negative is taken
    as a sign of a broken model and raises :class:`NumericError`.

    Engines are read-only after construction, so sharing one between threads
    is safe (internal memo caches only ever gain entries).
    """

    negative_tol: float = 1e-9

    @property
    @abc.abstractmethod
    def size(self) -> int:
        """Number of selectable indices; valid indices are ``0..size-1``."""

    @abc.abstractmethod
    def _mi(self, sel: tuple[int, ...]) -> float: ...

    @abc.abstractmethod
    def _conditional_mi(self, sel: tuple[int, ...], given: tuple[int, ...]) -> float: ...

    # -- validation -------------------------------------------------------
    def _check(self, sel: Iterable[int]) -> tuple[int, ...]:
        idx = _as_index_tuple(sel)
        n = self.size
        for s in idx:
            if s < 0 or s >= n:
                raise CatalogError(f"index {s} outside catalog of size {n}")
        if len(set(idx)) != len(idx):
            raise ArgumentError(f"duplicate indices in selection {idx}")
        return tuple(sorted(idx))

    def _clamp(self, value: float, what: str) -> float:
        if not np.isfinite(value):
            raise NumericError(f"{what} is not finite ({value})")
        if value < 0.0:
            if value < -self.negative_tol:
                raise NumericError(f"{what} = {value:.3e} is negative beyond tolerance")
            return 0.0
        return float(value)

    # -- public contract --------------------------------------------------
    def mi(self, sel: Iterable[int]) -> float:
        idx = self._check(sel)
        if not idx:
            return 0.0
        return self._clamp(self._mi(idx), f"I(V; Z{list(idx)})")

    def conditional_mi(self, sel: Iterable[int], given: Iterable[int] = ()) -> float:
        a = self._check(sel)
        g = self._check(given)
        if set(a) & set(g):
            raise ArgumentError(f"selection {a} and conditioning set {g} overlap")
        if not a:
            return 0.0
        if not g:
            return self.mi(a)
        return self._clamp(self._conditional_mi(a, g), f"I(V; Z{list(a)} | Z{list(g)})")

    # -- batch hooks (engines override these for speed) --------------------
    def conditional_mi_many(self, sels: Sequence[Selection], given: Selection = ()) -> np.ndarray:
        """``conditional_mi`` for each selection against one conditioning set."""
        return np.array([self.conditional_mi(s, given) for s in sels], dtype=float)

    def enumerate_mi(self, action_sets: Sequence[Sequence[Selection]]) -> np.ndarray:
        """``mi`` of every joint action, in ``itertools.product`` order.

        ``action_sets[i][a]`` is the tuple of indices agent ``i`` measures
        under its action ``a``.
        """
        out = []
        for combo in itertools.product(*action_sets):
            out.append(self.mi(tuple(itertools.chain.from_iterable(combo))))
        return np.array(out, dtype=float)


def chain_rule_check(
    engine: InformationEngine,
    sets: Sequence[Selection],
    permutation: Sequence[int] | None = None,
) -> float:
    """Residual ``|I(V; union) - sum_k I(V; Z_k | Z_{k_1..k-1})|`` for one ordering."""
    blocks = [_as_index_tuple(s) for s in sets]
    seen: set[int] = set()
    for b in blocks:
        if seen & set(b):
            raise ArgumentError("sets passed to chain_rule_check must be pairwise disjoint")
        seen |= set(b)
    order = range(len(blocks)) if permutation is None else permutation
    if sorted(order) != list(range(len(blocks))):
        raise ArgumentError(f"{list(order)} is not a permutation of {len(blocks)} sets")
    total = engine.mi(tuple(seen))
    acc = 0.0
    given: tuple[int, ...] = ()
    for k in order:
        acc += engine.conditional_mi(blocks[k], given)
        given = given + blocks[k]
    return abs(total - acc)
