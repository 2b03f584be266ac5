"""Potential game over sensing decisions.

Agent ``i`` picks ``n_i`` points from its region; its utility is the
conditional mutual information ``I(V; Z_i | Z_-i)``, which makes the team
mutual information ``I(V; Z_1:N)`` an exact potential.  Joint actions are
tuples of per-agent action indices into ``SensingGame.action_sets``.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, BudgetExceededError
from .info import InformationEngine

JointAction = tuple[int, ...]

NE_TOL = 1e-9
ARGMAX_RTOL = 1e-12
DEFAULT_BUDGET = 10**7
DEFAULT_MAX_STAGES = 200


def argmax_lowest(values: np.ndarray, rtol: float = ARGMAX_RTOL) -> int:
    """Lowest index whose value is within ``rtol * max(1, |max|)`` of the max.

    Rounding noise between mathematically tied actions must not decide the
    winner, otherwise identical seeds could diverge across platforms.
    """
    values = np.asarray(values, dtype=float)
    top = float(values.max())
    tol = rtol * max(1.0, abs(top))
    return int(np.flatnonzero(values >= top - tol)[0])


class SensingGame:
    def __init__(self, engine: InformationEngine, regions: Sequence[Iterable[int]], cardinality: int | Sequence[int] = 1):
        self.engine = engine
        self.regions = [tuple(sorted(int(x) for x in r)) for r in regions]
        if not self.regions:
            raise ArgumentError("a game needs at least one agent")
        seen: set[int] = set()
        for r in self.regions:
            if seen & set(r):
                raise ArgumentError("sensing regions must be pairwise disjoint")
            seen |= set(r)
        if isinstance(cardinality, int):
            cardinality = [cardinality] * len(self.regions)
        self.cardinality = [int(k) for k in cardinality]
        if len(self.cardinality) != len(self.regions):
            raise ArgumentError("one cardinality per agent is required")
        self.action_sets = [list(itertools.combinations(r, k)) for r, k in zip(self.regions, self.cardinality)]
        for i, acts in enumerate(self.action_sets):
            if not acts:
                raise ArgumentError(f"agent {i} has an empty action set")

    @property
    def n_agents(self) -> int:
        return len(self.regions)

    @property
    def joint_size(self) -> int:
        return int(np.prod([len(a) for a in self.action_sets], dtype=object))

    def points(self, joint: Sequence[int], agents: Iterable[int] | None = None) -> tuple[int, ...]:
        if len(joint) != self.n_agents:
            raise ArgumentError(f"joint action has {len(joint)} entries for {self.n_agents} agents")
        agents = range(self.n_agents) if agents is None else agents
        out: list[int] = []
        for i in agents:
            out.extend(self.action_sets[i][joint[i]])
        return tuple(out)

    def others(self, i: int) -> list[int]:
        return [j for j in range(self.n_agents) if j != i]

    def utility_table(self, i: int, joint: Sequence[int]) -> np.ndarray:
        """``I(V; Z_a | Z_-i)`` for every action ``a`` of agent ``i``."""
        return self.engine.conditional_mi_many(self.action_sets[i], self.points(joint, self.others(i)))


def local_utility(game: SensingGame, i: int, joint: Sequence[int]) -> float:
    return game.engine.conditional_mi(game.points(joint, [i]), game.points(joint, game.others(i)))


def generalized_utility(game: SensingGame, i: int, joint: Sequence[int], j1: Iterable[int], j2: Iterable[int]) -> float:
    """``I(V; Z_i, Z_J1 | Z_J2)`` for a split of the other agents into J1 and J2."""
    j1, j2 = set(j1), set(j2)
    if i in j1 or i in j2 or j1 & j2 or (j1 | j2 | {i}) != set(range(game.n_agents)):
        raise ArgumentError(f"J1={sorted(j1)}, J2={sorted(j2)} is not a valid split around agent {i}")
    return game.engine.conditional_mi(game.points(joint, [i, *sorted(j1)]), game.points(joint, sorted(j2)))


def potential(game: SensingGame, joint: Sequence[int]) -> float:
    return game.engine.mi(game.points(joint))


@dataclass
class StageRecord:
    stage: int
    joint: JointAction
    potential: float
    best_response: tuple[bool, ...]
    evaluations: int


@dataclass
class SolveTrace:
    """Per-stage history of a solve.

    ``best_response[i]`` means: for JSFP, the chosen action equals the agent's
    averaged-utility best response; for iterative greedy, it equals the best
    response to the previous stage; for one-shot strategies, no unilateral
    deviation beats it.  ``evaluations`` counts per-agent utility-table
    computations (``n_actions`` MI values each), cumulatively.
    """

    strategy: str
    records: list[StageRecord] = field(default_factory=list)
    converged: bool = True

    def append(self, *args) -> None:
        rec = StageRecord(*args)
        if self.records and rec.evaluations < self.records[-1].evaluations:
            raise ArgumentError("evaluation count must be monotone")
        self.records.append(rec)

    @property
    def stages(self) -> int:
        return self.records[-1].stage if self.records else 0

    @property
    def evaluations(self) -> int:
        return self.records[-1].evaluations if self.records else 0

    def to_csv(self, game: SensingGame) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "agent", "action", "best_response", "potential", "evaluations"])
        for rec in self.records:
            for i, a in enumerate(rec.joint):
                pts = ";".join(str(p) for p in game.action_sets[i][a])
                w.writerow([rec.stage, i, pts, int(rec.best_response[i]), repr(rec.potential), rec.evaluations])
        return buf.getvalue()


def read_trace_csv(text: str) -> list[dict]:
    """Parse a SolveTrace CSV into per-stage dicts with catalog-point actions."""
    stages: dict[int, dict] = {}
    for row in csv.DictReader(io.StringIO(text)):
        st = stages.setdefault(int(row["stage"]), {"stage": int(row["stage"]), "actions": {}, "potential": float(row["potential"]), "evaluations": int(row["evaluations"])})
        st["actions"][int(row["agent"])] = tuple(int(p) for p in row["action"].split(";"))
    return [stages[k] for k in sorted(stages)]


def joint_from_points(game: SensingGame, actions: dict[int, tuple[int, ...]]) -> JointAction:
    out = []
    for i in range(game.n_agents):
        out.append(game.action_sets[i].index(tuple(sorted(actions[i]))))
    return tuple(out)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def _one_shot_trace(game: SensingGame, name: str, joint: JointAction, evaluations: int) -> SolveTrace:
    _, gains = _unilateral_gains(game, joint)
    trace = SolveTrace(name)
    trace.append(0, joint, potential(game, joint), tuple(g <= NE_TOL for g in gains), evaluations)
    return trace


def solve_optimal(game: SensingGame, budget: int = DEFAULT_BUDGET) -> JointAction:
    """Exact argmax of the potential by enumeration; lexicographic tie-break."""
    size = game.joint_size
    if size > budget:
        raise BudgetExceededError(size, budget)
    phis = game.engine.enumerate_mi(game.action_sets)
    flat = argmax_lowest(phis)
    return tuple(int(x) for x in np.unravel_index(flat, [len(a) for a in game.action_sets]))


def solve_local_greedy(game: SensingGame) -> JointAction:
    return tuple(argmax_lowest(game.engine.conditional_mi_many(acts, ())) for acts in game.action_sets)


def solve_sequential_greedy(game: SensingGame, permutation: Sequence[int] | None = None) -> JointAction:
    order = list(range(game.n_agents)) if permutation is None else [int(k) for k in permutation]
    if sorted(order) != list(range(game.n_agents)):
        raise ArgumentError(f"{order} is not a permutation of the agents")
    chosen: dict[int, int] = {}
    given: tuple[int, ...] = ()
    for i in order:
        a = argmax_lowest(game.engine.conditional_mi_many(game.action_sets[i], given))
        chosen[i] = a
        given = given + game.action_sets[i][a]
    return tuple(chosen[i] for i in range(game.n_agents))


def solve_iterative_greedy(game: SensingGame, max_stages: int = DEFAULT_MAX_STAGES):
    """Simultaneous best response to the previous stage.

    Returns ``(joint, cycled, trace)``.  On a revisit of an earlier joint
    action (other than a fixed point) the best joint action seen so far is
    returned with ``cycled=True``.
    """
    star = solve_local_greedy(game)
    trace = SolveTrace("iterative")
    evals = game.n_agents
    trace.append(0, star, potential(game, star), (True,) * game.n_agents, evals)
    history = [star]
    cached: list = [None] * game.n_agents
    cycled = False
    converged = False
    for t in range(1, max_stages + 1):
        new = []
        for i in range(game.n_agents):
            others = tuple(star[j] for j in game.others(i))
            if cached[i] is None or cached[i][0] != others:
                cached[i] = (others, game.utility_table(i, star))
                evals += 1
            new.append(argmax_lowest(cached[i][1]))
        new = tuple(new)
        trace.append(t, new, potential(game, new), (True,) * game.n_agents, evals)
        if new == star:
            converged = True
            break
        if new in history:
            cycled = True
            break
        history.append(new)
        star = new
    trace.converged = converged
    best = max(trace.records, key=lambda r: (r.potential, -r.stage))
    return (new if converged else best.joint), cycled, trace


# ---------------------------------------------------------------------------
# Joint strategy fictitious play with inertia
# ---------------------------------------------------------------------------


@dataclass
class JsfpState:
    t: int
    avg_utility: list[np.ndarray]
    s_star: list[int]
    s_dagger: list[int]
    s_sharp: list[int | None]
    rng: np.random.Generator
    alpha_bar: float


class JsfpSolver:
    """Stage-by-stage JSFP with inertia.

    Every agent sees the fully committed previous stage ``s*[t-1]``.  An agent
    recomputes its instantaneous utilities only when the other agents'
    previous actions changed; :attr:`evaluations` counts those recomputations
    (stage 0 initialisation excluded).
    """

    def __init__(self, game: SensingGame, alpha_bar: float = 0.3, seed: int | None = 0):
        if not (0.0 < alpha_bar <= 1.0):
            raise ArgumentError(f"alpha_bar must lie in (0, 1], got {alpha_bar}")
        self.game = game
        init = [game.engine.conditional_mi_many(acts, ()) for acts in game.action_sets]
        dagger = [argmax_lowest(u) for u in init]
        self.state = JsfpState(
            t=0,
            avg_utility=init,
            s_star=list(dagger),
            s_dagger=list(dagger),
            s_sharp=[None] * game.n_agents,
            rng=np.random.default_rng(seed),
            alpha_bar=float(alpha_bar),
        )
        self.evaluations = 0
        self.instant: list[np.ndarray | None] = [None] * game.n_agents
        self.instant_history: list[list[np.ndarray]] = [[] for _ in range(game.n_agents)]
        self._cond_on: list = [None] * game.n_agents

    def step(self) -> bool:
        """Run one stage; True when the termination condition holds."""
        st, game = self.state, self.game
        st.t += 1
        t = st.t
        prev_star = tuple(st.s_star)
        prev_dagger = tuple(st.s_dagger)
        new_star = list(prev_star)
        for i in range(game.n_agents):
            others = tuple(prev_star[j] for j in game.others(i))
            if self._cond_on[i] != others:
                self.instant[i] = game.utility_table(i, prev_star)
                self._cond_on[i] = others
                self.evaluations += 1
            inst = self.instant[i]
            self.instant_history[i].append(inst)
            st.avg_utility[i] = inst / t + (t - 1) / t * st.avg_utility[i]
            st.s_sharp[i] = argmax_lowest(inst)
            st.s_dagger[i] = argmax_lowest(st.avg_utility[i])
            # one draw per agent per stage keeps the random stream aligned
            if st.rng.random() < st.alpha_bar:
                new_star[i] = st.s_dagger[i]
        st.s_star = new_star
        return all(st.s_sharp[i] == prev_star[i] and st.s_sharp[i] == prev_dagger[i] for i in range(game.n_agents))

    def snapshot(self) -> tuple[tuple, tuple, tuple]:
        st = self.state
        return tuple(st.s_star), tuple(st.s_dagger), tuple(st.s_sharp)


def solve_jsfp(game: SensingGame, alpha_bar: float = 0.3, seed: int | None = 0, max_stages: int = DEFAULT_MAX_STAGES, solver_out: list | None = None):
    """JSFP with inertia.  Returns ``(joint, trace, converged)``.

    When ``max_stages`` runs out the best joint action seen is returned with
    ``converged=False``.  Pass a list as ``solver_out`` to receive the solver
    object (for forcing extra stages).
    """
    if max_stages < 1:
        raise ArgumentError("max_stages must be at least 1")
    solver = JsfpSolver(game, alpha_bar, seed)
    if solver_out is not None:
        solver_out.append(solver)
    name = "jsfp" if alpha_bar < 1.0 else "jsfp-noinertia"
    trace = SolveTrace(name)
    star = tuple(solver.state.s_star)
    trace.append(0, star, potential(game, star), (True,) * game.n_agents, 0)
    converged = False
    for _ in range(max_stages):
        converged = solver.step()
        st = solver.state
        star = tuple(st.s_star)
        flags = tuple(st.s_star[i] == st.s_dagger[i] for i in range(game.n_agents))
        trace.append(st.t, star, potential(game, star), flags, solver.evaluations)
        if converged:
            break
    trace.converged = converged
    if converged:
        return star, trace, True
    best = max(trace.records, key=lambda r: (r.potential, -r.stage))
    return best.joint, trace, False


def _unilateral_gains(game: SensingGame, joint: Sequence[int]) -> tuple[list[int], list[float]]:
    best, gains = [], []
    for i in range(game.n_agents):
        vals = game.utility_table(i, joint)
        b = argmax_lowest(vals)
        best.append(b)
        gains.append(float(vals[b] - vals[joint[i]]))
    return best, gains


def audit_nash(game: SensingGame, joint: Sequence[int], tol: float = NE_TOL) -> tuple[bool, float]:
    """``(is_ne, worst_gain)``: largest utility gain any agent gets by deviating alone."""
    _, gains = _unilateral_gains(game, tuple(joint))
    worst = max(gains)
    return worst <= tol, worst


STRATEGIES = ("optimal", "local", "sequential", "iterative", "jsfp", "jsfp-noinertia")


def run_strategy(game: SensingGame, strategy: str, *, alpha_bar: float = 0.3, seed: int = 0,
                 max_stages: int = DEFAULT_MAX_STAGES, budget: int = DEFAULT_BUDGET,
                 permutation: Sequence[int] | None = None) -> tuple[JointAction, SolveTrace]:
    """Uniform front end used by the scenario drivers and the CLI."""
    if strategy == "optimal":
        joint = solve_optimal(game, budget)
        return joint, _one_shot_trace(game, strategy, joint, game.joint_size)
    if strategy == "local":
        joint = solve_local_greedy(game)
        return joint, _one_shot_trace(game, strategy, joint, game.n_agents)
    if strategy == "sequential":
        joint = solve_sequential_greedy(game, permutation)
        return joint, _one_shot_trace(game, strategy, joint, game.n_agents)
    if strategy == "iterative":
        joint, _, trace = solve_iterative_greedy(game, max_stages)
        return joint, trace
    if strategy in ("jsfp", "jsfp-noinertia"):
        a = 1.0 if strategy == "jsfp-noinertia" else alpha_bar
        joint, trace, _ = solve_jsfp(game, a, seed, max_stages)
        return joint, trace
    raise ArgumentError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
