import copy
import json

import numpy as np
import pytest

from beliefslap.errors import ScenarioError
from beliefslap.scenario import bundled_scenarios, load_scenario

BASE = {
    "name": "base",
    "process": {"type": "single_integrator", "dt": 0.1, "noise_std": [0.01, 0.01], "max_u": 1.0},
    "observation": {"landmarks": [[1.0, 1.0]]},
    "belief": {"mean": [0.0, 0.0], "std": [0.1, 0.1], "n": 20},
    "goal": [2.0, 0.0],
    "stopping": {"radius": 0.2},
    "workspace": [[-1.0, -1.0], [3.0, 2.0]],
    "obstacles": [{"polygon": [[0.8, -0.3], [1.2, -0.3], [1.2, 0.3], [0.8, 0.3]]}],
}


def edited(**changes):
    d = copy.deepcopy(BASE)
    for dotted, value in changes.items():
        node = d
        keys = dotted.split("__")
        for k in keys[:-1]:
            node = node[int(k)] if isinstance(node, list) else node[k]
        last = int(keys[-1]) if isinstance(node, list) else keys[-1]
        if value is KeyError:
            del node[last]
        else:
            node[last] = value
    return d


def error_path(data):
    with pytest.raises(ScenarioError) as exc:
        load_scenario(data)
    return exc.value.path


def test_base_scenario_builds():
    s = load_scenario(BASE)
    assert s.mode == "static" and len(s.obstacles) == 1
    np.testing.assert_allclose(s.goal, [2.0, 0.0])


@pytest.mark.parametrize("changes, path", [
    ({"process__dt": -0.1}, "$.process.dt"),
    ({"process__type": "unicycle"}, "$.process.type"),
    ({"goal": KeyError}, "$"),
    ({"stopping__threshold": 1.5}, "$.stopping.threshold"),
    ({"belief__n": 0}, "$.belief.n"),
    ({"obstacles__0__polygon": [[0, 0], [1, 1]]}, "$.obstacles[0].polygon"),
    ({"observation__landmarks__0": [1.0]}, "$.observation.landmarks[0]"),
    ({"solver": {"max_iter": 0}}, "$.solver.max_iter"),
    ({"bogus": 1}, "$"),
])
def test_schema_errors_name_the_field(changes, path):
    assert error_path(edited(**changes)) == path


def test_semantic_errors_name_the_field():
    assert error_path(edited(belief__mean=[0.0, 0.0, 0.0])) == "$.belief.mean"
    assert error_path(edited(goal=[9.0, 0.0])) == "$.goal"
    assert error_path(edited(goal=[1.0, 0.0])) == "$.goal"          # inside the obstacle
    moving = edited(obstacles__0__motion={"velocity": [0.1, 0.0]})
    assert error_path(moving) == "$.mode"
    assert error_path(edited(obstacles__0__polygon=[[0, 0], [1, 1], [1, 0], [0, 1]])) == "$.obstacles[0]"


def test_error_message_has_path_once():
    with pytest.raises(ScenarioError) as exc:
        load_scenario(edited(process__dt=-0.1))
    assert str(exc.value).count("$.process.dt") == 1


def test_unknown_name_and_bad_json(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario("no_such_scenario")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_file_and_dict_loading_agree(tmp_path):
    f = tmp_path / "s.json"
    f.write_text(json.dumps(BASE))
    a, b = load_scenario(f), load_scenario(BASE)
    np.testing.assert_array_equal(a.obstacles[0].planning.base.P, b.obstacles[0].planning.base.P)


def test_planning_obstacle_is_inflated_cover_of_truth():
    s = load_scenario(edited(process__body_radius=0.1))
    truth, plan = s.obstacles[0].truth.base, s.obstacles[0].planning.base
    # every ground-truth boundary point clears the planning ellipse boundary
    pts = truth.boundary(64)
    assert np.all(np.einsum("ni,ij,nj->n", pts - plan.center, plan.P, pts - plan.center) < 1.0)


def test_overrides():
    s = load_scenario(BASE).with_overrides(seed=7, info_cost=False, horizon=12)
    assert s.seed == 7 and s.policy.info_cost is False and s.policy.horizon == 12


@pytest.mark.parametrize("name", ["three_obstacles", "youbot", "four_moving", "spiral"])
def test_bundled_scenarios_load_and_are_labelled(name):
    assert name in bundled_scenarios()
    s = load_scenario(name)
    assert s.data.get("reconstruction")
    for o in s.obstacles:
        if o.truth.is_static:
            assert not any(np.allclose(s.goal[:2], c) for c in [o.truth.base.center])


def test_dynamic_scenarios_respect_planning_limits():
    for name in ("four_moving", "spiral"):
        s = load_scenario(name)
        assert s.mode == "dynamic"
        assert s.policy.max_horizon <= 30 and s.policy.n_plan_particles <= 50
