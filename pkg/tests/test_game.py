import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infogame import (
    SensingGame,
    audit_nash,
    generalized_utility,
    local_utility,
    potential,
    run_strategy,
    solve_iterative_greedy,
    solve_jsfp,
    solve_local_greedy,
    solve_optimal,
    solve_sequential_greedy,
)
from infogame.errors import ArgumentError, BudgetExceededError
from infogame.game import STRATEGIES, argmax_lowest, joint_from_points, read_trace_csv
from infogame.synthetic import cycling_game, random_game, small_state_game
from oracles import brute_potential_table


def _deviations(game):
    for joint in itertools.product(*[range(len(a)) for a in game.action_sets]):
        for i in range(game.n_agents):
            for b in range(len(game.action_sets[i])):
                if b != joint[i]:
                    dev = list(joint)
                    dev[i] = b
                    yield i, joint, tuple(dev)


@settings(max_examples=25)
@given(seed=st.integers(0, 100_000))
def test_utility_differences_equal_potential_differences(seed):
    game = random_game(np.random.default_rng(seed))
    phi = brute_potential_table(game)
    for i, a, b in _deviations(game):
        du = local_utility(game, i, b) - local_utility(game, i, a)
        assert abs(du - (phi[b] - phi[a])) < 1e-9


@settings(max_examples=15)
@given(seed=st.integers(0, 100_000), split=st.integers(0, 2**6))
def test_generalized_utility_alignment(seed, split):
    game = random_game(np.random.default_rng(seed), agents=(3, 3))
    phi = brute_potential_table(game)
    for i, a, b in _deviations(game):
        others = game.others(i)
        j1 = [j for n, j in enumerate(others) if split >> n & 1]
        j2 = [j for j in others if j not in j1]
        du = generalized_utility(game, i, b, j1, j2) - generalized_utility(game, i, a, j1, j2)
        assert abs(du - (phi[b] - phi[a])) < 1e-9


def test_generalized_utility_rejects_bad_split():
    game = random_game(np.random.default_rng(0), agents=(3, 3))
    with pytest.raises(ArgumentError):
        generalized_utility(game, 0, (0, 0, 0), [0], [1, 2])
    with pytest.raises(ArgumentError):
        generalized_utility(game, 0, (0, 0, 0), [1], [1, 2])


def test_argmax_tie_break_is_lowest_index():
    assert argmax_lowest(np.array([1.0, 3.0, 3.0])) == 1
    assert argmax_lowest(np.array([1.0, 3.0 - 1e-14, 3.0])) == 1
    assert argmax_lowest(np.array([1.0, 3.0 - 1e-6, 3.0])) == 2


def test_optimal_matches_brute_force():
    for seed in range(10):
        game = random_game(np.random.default_rng(seed))
        phi = brute_potential_table(game)
        best = max(phi.values())
        assert potential(game, solve_optimal(game)) == pytest.approx(best, abs=1e-12)


def test_optimal_budget():
    game = random_game(np.random.default_rng(1), agents=(3, 3), actions=(5, 5))
    with pytest.raises(BudgetExceededError):
        solve_optimal(game, budget=100)


def test_regions_must_be_disjoint():
    game = random_game(np.random.default_rng(2))
    with pytest.raises(ArgumentError):
        SensingGame(game.engine, [[0, 1], [1, 2]])


def test_cardinality_two_action_sets():
    game = random_game(np.random.default_rng(3), agents=(2, 2), actions=(4, 4))
    g2 = SensingGame(game.engine, game.regions, 2)
    assert [len(a) for a in g2.action_sets] == [6, 6]
    assert all(len(x) == 2 for x in g2.action_sets[0])


def test_sequential_greedy_follows_permutation():
    game = random_game(np.random.default_rng(4), agents=(3, 3))
    eng = game.engine
    for perm in ([0, 1, 2], [2, 0, 1]):
        joint = solve_sequential_greedy(game, perm)
        given = ()
        for i in perm:
            vals = eng.conditional_mi_many(game.action_sets[i], given)
            assert joint[i] == argmax_lowest(vals)
            given = given + game.action_sets[i][joint[i]]
    with pytest.raises(ArgumentError):
        solve_sequential_greedy(game, [0, 0, 1])


def test_local_greedy_ignores_others():
    game = random_game(np.random.default_rng(5))
    joint = solve_local_greedy(game)
    for i, a in enumerate(joint):
        assert a == argmax_lowest([game.engine.mi(x) for x in game.action_sets[i]])


def test_iterative_greedy_cycles_on_constructed_game():
    game = cycling_game()
    joint, cycled, trace = solve_iterative_greedy(game)
    assert cycled
    assert not trace.converged
    assert [r.joint for r in trace.records[:3]] == [(0, 0), (1, 1), (0, 0)]


def test_cycling_game_equilibria_are_mixed():
    game = cycling_game()
    assert audit_nash(game, (0, 1))[0] and audit_nash(game, (1, 0))[0]
    assert not audit_nash(game, (0, 0))[0] and not audit_nash(game, (1, 1))[0]
    joint, trace, converged = solve_jsfp(game, 0.3, 0)
    assert converged and joint in {(0, 1), (1, 0)}


@given(seed=st.integers(0, 100_000), run_seed=st.integers(0, 2**31))
def test_jsfp_reaches_nash(seed, run_seed):
    game = random_game(np.random.default_rng(seed))
    joint, trace, converged = solve_jsfp(game, 0.3, run_seed, max_stages=2000)
    assert converged
    assert audit_nash(game, joint)[0]
    assert trace.evaluations <= trace.stages * game.n_agents


def test_jsfp_is_deterministic_per_seed():
    game = random_game(np.random.default_rng(6), agents=(3, 3))
    a = solve_jsfp(game, 0.3, 42)
    b = solve_jsfp(game, 0.3, 42)
    assert a[0] == b[0]
    assert [r.joint for r in a[1].records] == [r.joint for r in b[1].records]


def test_jsfp_fixed_point_is_absorbing():
    for seed in range(20):
        game = random_game(np.random.default_rng(seed))
        box = []
        _, _, converged = solve_jsfp(game, 0.3, seed, solver_out=box)
        assert converged
        solver = box[0]
        snap = solver.snapshot()
        for _ in range(10):
            solver.step()
            assert solver.snapshot() == snap


def test_jsfp_initialisation_is_local_greedy():
    game = random_game(np.random.default_rng(7))
    _, trace, _ = solve_jsfp(game, 0.3, 0)
    assert trace.records[0].joint == solve_local_greedy(game)
    assert trace.records[0].evaluations == 0


def test_jsfp_validates_alpha():
    game = random_game(np.random.default_rng(8))
    for bad in (0.0, 1.5):
        with pytest.raises(ArgumentError):
            solve_jsfp(game, bad)


@given(seed=st.integers(0, 100_000))
def test_sequential_greedy_submodular_bound(seed):
    game = small_state_game(np.random.default_rng(seed))
    opt = potential(game, solve_optimal(game))
    seq = potential(game, solve_sequential_greedy(game))
    assert seq >= (1 - 1 / math.e) * opt - 1e-12


def test_every_strategy_runs_and_traces_round_trip():
    game = random_game(np.random.default_rng(9))
    for s in STRATEGIES:
        joint, trace = run_strategy(game, s, seed=3)
        text = trace.to_csv(game)
        stages = read_trace_csv(text)
        last = stages[-1]
        assert last["stage"] == trace.stages
        assert joint_from_points(game, last["actions"]) == trace.records[-1].joint
        assert last["potential"] == trace.records[-1].potential
    with pytest.raises(ArgumentError):
        run_strategy(game, "bogus")


def test_evaluations_are_monotone():
    game = random_game(np.random.default_rng(10), agents=(3, 3))
    _, trace, _ = solve_jsfp(game, 0.3, 1)
    evals = [r.evaluations for r in trace.records]
    assert evals == sorted(evals)
