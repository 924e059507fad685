import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefslap.barrier import ObfParams
from beliefslap.belief import ParticleBelief
from beliefslap.geometry import Ellipsoid, ObstacleTrack
from beliefslap.homotopy import InitialTrajectory
from beliefslap.models import single_integrator
from beliefslap.objective import Objective, PlanningProblem, linearize_along, total_objective
from beliefslap.planner import (InfeasibleSeedError, PolicyConfig, RhcPolicy, SolverConfig, _spg,
                                best_over_homotopy, predict_obstacle_schedule, project, rhc_policy,
                                solve_open_loop)
from beliefslap.sim import plan_first_step
from beliefslap.scenario import load_scenario
from helpers import lq_oracle, random_controls, random_problem


# -- solver ----------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_convex_solve_matches_lq_oracle(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, K=20, n_obstacles=0, info=False)
    r = solve_open_loop(p, np.zeros((p.K, p.n_u)))
    u_star, cost_star = lq_oracle(p)
    # the closed form ignores saturation, so it must be inactive
    assert np.linalg.norm(u_star, axis=1).max() < p.process.max_u
    assert r.cost.effort == pytest.approx(cost_star, rel=1e-4)
    assert r.terminal_error < 1e-3
    np.testing.assert_allclose(r.controls, u_star, atol=1e-3)
    assert r.kkt_residual < 1e-5


def test_seed_already_optimal_is_fixed_point():
    rng = np.random.default_rng(1)
    p = random_problem(rng, n_obstacles=0, info=False)
    u_star, cost_star = lq_oracle(p)
    r = solve_open_loop(p, u_star)
    assert r.iterations <= 1
    assert r.cost.effort == pytest.approx(cost_star, rel=1e-9)


def test_saturation_is_respected():
    rng = np.random.default_rng(2)
    p = random_problem(rng, n_obstacles=2)
    p_far = PlanningProblem(particles=p.particles, x_map=p.x_map, goal=p.x_map + [30.0, 0.0], K=p.K,
                            process=p.process, observation=p.observation)
    for prob in (p, p_far):
        r = solve_open_loop(prob, random_controls(rng, prob, 2.0))
        assert np.all(np.linalg.norm(r.controls, axis=1) <= prob.process.max_u + 1e-12)
        assert min(r.cost.info, r.cost.effort, r.cost.obstacle, r.cost.terminal) >= 0


def test_projection():
    u = np.array([[3.0, 4.0], [0.3, 0.4]])
    np.testing.assert_allclose(project(u, 1.0), [[0.6, 0.8], [0.3, 0.4]])


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_accepted_iterates_never_increase_objective(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, n_obstacles=2)
    u0 = random_controls(rng, p)
    obj = Objective(p, linearize_along(p, u0))
    f0 = obj.value(u0)
    hist = []
    _spg(obj, u0, SolverConfig(max_iter=60), p.process.max_u, hist)
    assert all(b <= a for a, b in zip([f0] + hist, hist))


# an uncapped barrier evaluates to inf/nan at a singular point, which numpy reports
@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_infeasible_seed_raises():
    proc = single_integrator(dt=0.1)
    e = Ellipsoid.circle([0.5, 0.0], 0.3)
    p = PlanningProblem(particles=np.zeros((1, 2)), x_map=np.zeros(2), goal=np.array([1.0, 0.0]), K=10,
                        process=proc, obstacles=[[e]], mode="static", obf=ObfParams(cap=np.inf))
    # a seed that stops exactly at the obstacle's center gives an infinite barrier
    u = np.zeros((10, 2))
    u[:5, 0] = 1.0
    with pytest.raises(InfeasibleSeedError):
        solve_open_loop(p, u)
    with pytest.raises(ValueError):
        solve_open_loop(p, np.zeros((3, 2)))


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(backtrack=1.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)


# -- homotopy ranking ----------------------------------------------------------------

@pytest.fixture(scope="module")
def three_obstacle_first_step():
    return plan_first_step(load_scenario("three_obstacles"))


def test_three_obstacle_seeds_keep_their_classes(three_obstacle_first_step):
    policy, best = three_obstacle_first_step
    assert len(policy.candidates) == 2
    sigs = [r.signature for _, r in policy.candidates]
    assert sigs[0] != sigs[1]
    for seed, r in policy.candidates:
        assert r.signature == seed.signature and r.homotopy_preserved
        assert not r.barrier_violation


def test_best_is_min_total_cost(three_obstacle_first_step):
    policy, best = three_obstacle_first_step
    assert best.total == min(r.total for _, r in policy.candidates)


def test_best_over_homotopy_single_seed_and_errors():
    rng = np.random.default_rng(3)
    p = random_problem(rng, n_obstacles=0, info=False)
    seed = InitialTrajectory(np.zeros((p.K + 1, 2)), np.zeros((p.K, 2)))
    r = best_over_homotopy(p, [seed])
    assert r.total == pytest.approx(solve_open_loop(p, seed).total)
    with pytest.raises(ValueError):
        best_over_homotopy(p, [])


def test_tie_goes_to_shorter_path():
    p = random_problem(np.random.default_rng(4), n_obstacles=0, info=False)
    a, b = np.zeros((p.K, 2)), np.zeros((p.K, 2))
    best, results = best_over_homotopy(p, [a, b], return_all=True)
    assert best is results[0]


def test_winner_consistent_with_reported_costs_in_both_modes():
    s = load_scenario("three_obstacles")
    for info in (True, False):
        policy, best = plan_first_step(s.with_overrides(info_cost=info))
        totals = [r.total for _, r in policy.candidates]
        assert best.total == min(totals)
        for _, r in policy.candidates:
            assert r.total == pytest.approx(r.cost.info + r.cost.effort + r.cost.obstacle
                                            + r.cost.terminal + r.cost.boundary)


# -- policy -------------------------------------------------------------------------------

def point_belief(x, n=20):
    return ParticleBelief(np.tile(x, (n, 1)), np.full(n, 1.0 / n))


def test_belief_at_goal_gives_zero_control():
    proc = single_integrator(dt=0.1)
    u = rhc_policy(point_belief([1.0, 1.0]), [], 5, [1.0, 1.0], proc, seed=0)
    assert np.linalg.norm(u) < 1e-3


@pytest.mark.parametrize("goal", [[0.05, -0.02], [3.0, 4.0]])
def test_one_step_horizon_hand_solution(goal):
    proc = single_integrator(dt=0.1, max_u=1.0)
    cfg = PolicyConfig(lambda_g=1e6, info_cost=False, min_horizon=1)
    u = rhc_policy(point_belief([0.0, 0.0]), [], 1, goal, proc, cfg=cfg, seed=0)
    want = np.asarray(goal) / 0.1
    want = want / max(1.0, np.linalg.norm(want))
    np.testing.assert_allclose(u, want, atol=1e-4)


def test_policy_is_deterministic():
    s = load_scenario("three_obstacles")
    a = plan_first_step(s)[1]
    b = plan_first_step(s)[1]
    np.testing.assert_array_equal(a.controls, b.controls)


def test_warm_start_shifts_previous_plan():
    proc = single_integrator(dt=0.1)
    pol = RhcPolicy(proc, None, [1.0, 0.0], PolicyConfig(horizon=10, info_cost=False, horizon_mode="fixed"))
    pol.act(point_belief([0.0, 0.0]), [], 0)
    prev = pol.prev.copy()
    np.testing.assert_array_equal(pol._warm(10), np.vstack([prev[1:], np.zeros((1, 2))]))


# -- obstacle schedule ----------------------------------------------------------------------

def test_static_schedule_identical_slices():
    tr = ObstacleTrack(Ellipsoid.circle([1.0, 1.0], 0.5))
    sched = predict_obstacle_schedule([tr], 0.0, 5, 0.1)
    assert len(sched) == 7
    for sl in sched:
        np.testing.assert_array_equal(sl[0].center, [1.0, 1.0])
        np.testing.assert_array_equal(sl[0].P, sched[0][0].P)


def test_constant_velocity_schedule():
    tr = ObstacleTrack(Ellipsoid.circle([0.0, 0.0], 0.5), velocity=[1.0, 0.0])
    sched = predict_obstacle_schedule([tr], 0.0, 4, 0.2)
    for k, sl in enumerate(sched):
        np.testing.assert_allclose(sl[0].center, [0.2 * k, 0.0], atol=1e-12)


def test_schedule_reanchors_to_current_pose():
    tr = ObstacleTrack(Ellipsoid.circle([0.0, 0.0], 0.5), velocity=[1.0, 0.0])
    sched = predict_obstacle_schedule([tr], 2.0, 3, 0.5)
    np.testing.assert_allclose(sched[0][0].center, [2.0, 0.0])
    np.testing.assert_allclose(sched[2][0].center, [3.0, 0.0])
