import math

import numpy as np
import pytest

from infogame import ParticleSet
from infogame.errors import ArgumentError
from infogame.game import audit_nash, potential, solve_optimal
from infogame.tracking import (
    TrackingConfig,
    angular_separations,
    build_game,
    candidates,
    plan_step,
    read_episode_csv,
    run_episode,
)

FAST = dict(particles=300, horizon=3)


def cloud(rng, m=300, center=(25.0, 28.0), spread=2.0):
    return ParticleSet.normalized(center + spread * rng.standard_normal((m, 2)))


def test_horizon_zero_is_empty():
    trace = run_episode(TrackingConfig(horizon=0), 0)
    assert trace.rows == [] and trace.steps == 0
    assert trace.final.size == 1000


def test_config_validation():
    with pytest.raises(ArgumentError):
        TrackingConfig(headings=10)
    with pytest.raises(ArgumentError):
        TrackingConfig(strategy="random", mode="audit")
    with pytest.raises(ArgumentError):
        TrackingConfig(target=(50.0, 1.0))
    with pytest.raises(ArgumentError):
        TrackingConfig(alpha_bar=0.0)
    assert TrackingConfig().heading_degrees().tolist() == [30.0 * k for k in range(12)]
    assert TrackingConfig(headings=8).heading_degrees().tolist() == [45.0 * k for k in range(8)]


def test_candidates_drop_moves_outside_region():
    cfg = TrackingConfig()
    heads, pos = candidates(cfg, (20.0, 20.0))
    assert heads == list(range(12))
    np.testing.assert_allclose(np.hypot(*(pos - 20.0).T), 2.0)
    heads, pos = candidates(cfg, (0.5, 20.0))
    assert 6 not in heads and 0 in heads  # 180 deg would leave through x = 0
    assert np.all(pos >= 0) and np.all(pos <= 40)
    heads, _ = candidates(cfg, (0.0, 0.0))
    assert heads == [0, 1, 2, 3]


def test_optimal_enumerates_every_joint_heading():
    cfg = TrackingConfig()
    ps = cloud(np.random.default_rng(0), 200)
    game, heading_sets = build_game(cfg, ps, np.tile([20.0, 20.0], (3, 1)))
    assert game.joint_size == 12**3 == 1728
    assert game.engine.enumerate_mi(game.action_sets).size == 1728


def test_episode_is_deterministic():
    cfg = TrackingConfig(mode="audit", **FAST)
    a = run_episode(cfg, 4)
    b = run_episode(cfg, 4)
    assert a.to_csv() == b.to_csv()
    np.testing.assert_array_equal(a.final.positions, b.final.positions)
    assert run_episode(cfg, 5).to_csv() != a.to_csv()


def test_random_walk_audit_gap_reproducible():
    cfg = TrackingConfig(strategy="jsfp", mode="audit", **FAST)
    gaps = [[r["gap"] for r in run_episode(cfg, 9).per_step()] for _ in range(2)]
    assert gaps[0] == gaps[1]
    assert all(g >= -1e-12 for g in gaps[0])


def test_closed_loop_follows_plan():
    cfg = TrackingConfig(strategy="local", **FAST)
    trace = run_episode(cfg, 1)
    first = [r for r in trace.rows if r["step"] == 0]
    for r, h in zip(first, trace.planned[0]):
        assert r["heading"] == h
        assert math.hypot(r["x"] - 20.0, r["y"] - 20.0) == pytest.approx(2.0)


def test_episode_csv_round_trip():
    trace = run_episode(TrackingConfig(strategy="jsfp", audit_gap=True, **FAST), 2)
    rows = read_episode_csv(trace.to_csv())
    assert len(rows) == 3 * 3
    for a, b in zip(rows, trace.rows):
        for k, v in b.items():
            if isinstance(v, float) and math.isnan(v):
                assert math.isnan(a[k])
            else:
                assert a[k] == v


def test_jsfp_plan_statistics_invariants():
    cfg = TrackingConfig(particles=300)
    rng = np.random.default_rng(3)
    for seed in range(3):
        ps = cloud(rng)
        positions = rng.uniform(10, 30, (3, 2))
        plan = plan_step(cfg, ps, positions, "jsfp", seed)
        n_actions = max(len(h) for h in plan.heading_sets)
        assert plan.evaluations < plan.stages * n_actions
        assert plan.evaluations <= 3 * plan.stages
        best = potential(plan.game, solve_optimal(plan.game))
        assert best - plan.mi >= -1e-12
        assert audit_nash(plan.game, plan.joint, 1e-9)[0]


def test_random_strategy_plans_without_stages():
    cfg = TrackingConfig(strategy="random", **FAST)
    trace = run_episode(cfg, 0)
    assert {r["jsfp_stages"] for r in trace.rows} == {0}


def test_first_step_jsfp_spreads_out():
    trace = run_episode(TrackingConfig(horizon=1), 0)
    seps = angular_separations(trace.planned[0])
    assert all(abs(s - 120.0) <= 30.0 for s in seps)


def test_sequential_first_two_deciders_go_opposite():
    trace = run_episode(TrackingConfig(horizon=1, strategy="sequential"), 0)
    assert angular_separations(trace.planned[0][:2]) == [180.0]


def test_local_greedy_does_not_coordinate():
    trace = run_episode(TrackingConfig(horizon=1, strategy="local"), 0)
    assert len(set(trace.planned[0])) == 1


def test_angular_separations():
    assert angular_separations([0, 120, 240]) == [120.0, 120.0, 120.0]
    assert angular_separations([350, 10]) == [20.0]
