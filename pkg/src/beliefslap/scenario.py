"""Scenario files: JSON schema, validation and construction of run objects."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .barrier import ObfParams
from .belief import ParticleBelief, StoppingRule
from .errors import ScenarioError
from .geometry import (Ellipsoid, Keyframe, ObstacleTrack, Polygon, contains, inflate,
                       inflate_ellipsoid, mvee)
from .models import RangeBearingModel, single_integrator, youbot
from .planner import PolicyConfig, SolverConfig

_vec2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["process", "belief", "goal", "stopping"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "reconstruction": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "mode": {"enum": ["convex", "static", "dynamic"]},
        "process": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["single_integrator", "youbot"]},
                "dt": _pos,
                "noise_std": _vec,
                "max_u": _pos,
                "body_radius": {"type": "number", "minimum": 0},
                "wheel_radius": _pos,
                "half_length": _pos,
                "half_width": _pos,
                "ball_offset": {"type": "number", "minimum": 0},
                "ball_radius": {"type": "number", "minimum": 0},
            },
        },
        "observation": {
            "type": ["object", "null"],
            "required": ["landmarks"],
            "additionalProperties": False,
            "properties": {
                "landmarks": {"type": "array", "items": _vec2, "minItems": 1},
                "readings": {"type": "array", "items": {"enum": ["range", "bearing"]},
                             "minItems": 1, "uniqueItems": True},
                "range_std": _pos,
                "bearing_std": _pos,
                "weighting": {"enum": ["squared_distance", "unit", "gaussian"]},
            },
        },
        "belief": {
            "type": "object",
            "required": ["mean", "std"],
            "additionalProperties": False,
            "properties": {
                "mean": _vec,
                "std": _vec,
                "n": {"type": "integer", "minimum": 1},
                "true_state": _vec,
            },
        },
        "goal": _vec,
        "stopping": {
            "type": "object",
            "required": ["radius"],
            "additionalProperties": False,
            "properties": {
                "radius": _pos,
                "threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "max_steps": {"type": "integer", "minimum": 1},
            },
        },
        "workspace": {"type": "array", "items": _vec2, "minItems": 2, "maxItems": 2},
        "obstacles": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "polygon": {"type": "array", "items": _vec2, "minItems": 3},
                    "points": {"type": "array", "items": _vec2, "minItems": 3},
                    "ellipse": {
                        "type": "object",
                        "required": ["center", "P"],
                        "additionalProperties": False,
                        "properties": {
                            "center": _vec2,
                            "P": {"type": "array", "items": _vec2, "minItems": 2, "maxItems": 2},
                        },
                    },
                    "appears_at": {"type": "number", "minimum": 0},
                    "motion": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "velocity": _vec2,
                            "rotation_rate": {"type": "number"},
                            "keyframes": {
                                "type": "array",
                                "minItems": 1,
                                "items": {
                                    "type": "object",
                                    "required": ["t", "center"],
                                    "additionalProperties": False,
                                    "properties": {"t": {"type": "number"}, "center": _vec2,
                                                   "angle": {"type": "number"}},
                                },
                            },
                        },
                    },
                },
                "oneOf": [{"required": ["polygon"]}, {"required": ["points"]},
                          {"required": ["ellipse"]}],
            },
        },
        "obstacle_noise_std": {"type": "number", "minimum": 0},
        "safety_margin": {"type": "number", "minimum": 0},
        "obf": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"M": _pos, "q": {"type": "integer", "minimum": 1},
                           "m": {"type": "integer", "minimum": 1}, "cap": _pos,
                           "n_seg": {"type": "integer", "minimum": 1},
                           "interior_points": {"type": "boolean"}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {f.name: ({"type": "integer", "minimum": 1} if f.type == "int" else _pos)
                           for f in fields(SolverConfig)},
        },
        "planning": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": ["integer", "null"], "minimum": 1},
                "horizon_mode": {"enum": ["shrinking", "fixed"]},
                "min_horizon": {"type": "integer", "minimum": 1},
                "max_horizon": {"type": "integer", "minimum": 1},
                "slack": {"type": "number", "minimum": 1},
                "n_plan_particles": {"type": "integer", "minimum": 1},
                "v_eff": _pos,
                "lambda_g": _pos,
                "info_cost": {"type": "boolean"},
            },
        },
        "homotopy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": {"type": ["integer", "null"], "minimum": 1},
                "margin": {"type": "number", "minimum": 0},
                "seed_paths": {"type": "array", "items": {"type": "array", "items": _vec2,
                                                          "minItems": 2}},
            },
        },
    },
}


def _path(err):
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def validate(data):
    """Raise ScenarioError naming the field path of the first schema violation."""
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(data),
                    key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        e = errors[0]
        raise ScenarioError(e.message, _path(e))


@dataclass
class Obstacle:
    """Ground-truth ellipse track plus the inflated track the planner uses."""

    name: str
    truth: ObstacleTrack
    planning: ObstacleTrack
    polygon: np.ndarray | None = None
    appears_at: float = 0.0

    def visible(self, t):
        return t + 1e-9 >= self.appears_at


@dataclass
class Scenario:
    name: str
    data: dict
    process: object
    observation: object
    belief_mean: np.ndarray
    belief_std: np.ndarray
    n_particles: int
    true_state: np.ndarray
    goal: np.ndarray
    stopping: StoppingRule
    obstacles: list
    obf: ObfParams
    solver: SolverConfig
    policy: PolicyConfig
    seed: int = 0
    obstacle_noise_std: float = 0.0
    workspace: tuple | None = None
    description: str = ""

    @property
    def mode(self):
        return self.policy.mode

    @property
    def landmarks(self):
        return np.zeros((0, 2)) if self.observation is None else self.observation.landmarks

    def initial_belief(self, rng):
        return ParticleBelief.sample_gaussian(self.belief_mean, self.belief_std, self.n_particles, rng)

    def truth_at(self, t):
        return [o.truth.ellipsoid_at(t) for o in self.obstacles if o.visible(t)]

    def planning_at(self, t):
        return [o.planning.ellipsoid_at(t) for o in self.obstacles if o.visible(t)]

    def with_overrides(self, seed=None, info_cost=None, horizon=None):
        data = copy.deepcopy(self.data)
        if seed is not None:
            data["seed"] = int(seed)
        if info_cost is not None:
            data.setdefault("planning", {})["info_cost"] = bool(info_cost)
        if horizon is not None:
            data.setdefault("planning", {})["horizon"] = int(horizon)
        return build_scenario(data)


def _motion_track(base: Ellipsoid, motion):
    if not motion:
        return ObstacleTrack(base)
    if "keyframes" in motion:
        frames = [Keyframe(float(k["t"]), tuple(k["center"]), float(k.get("angle", 0.0)))
                  for k in motion["keyframes"]]
        # keyframe centers are absolute; the base shape is re-centered at the origin
        shape = Ellipsoid(np.zeros(2), base.P)
        return ObstacleTrack(shape, keyframes=tuple(frames))
    return ObstacleTrack(base, np.asarray(motion.get("velocity", [0.0, 0.0]), float),
                         float(motion.get("rotation_rate", 0.0)))


def _build_obstacle(i, spec, inflate_by):
    name = spec.get("name", f"o{i + 1}")
    polygon = None
    if "polygon" in spec:
        poly = Polygon(np.asarray(spec["polygon"], float))
        polygon = poly.vertices
        raw = mvee(poly.vertices)
        planned = mvee(inflate(poly, inflate_by).vertices) if inflate_by > 0 else raw
    elif "points" in spec:
        raw = mvee(np.asarray(spec["points"], float))
        planned = inflate_ellipsoid(raw, inflate_by)
    else:
        raw = Ellipsoid(spec["ellipse"]["center"], spec["ellipse"]["P"])
        planned = inflate_ellipsoid(raw, inflate_by)
    motion = spec.get("motion")
    return Obstacle(name, _motion_track(raw, motion), _motion_track(planned, motion), polygon,
                    float(spec.get("appears_at", 0.0)))


def _build_process(ps):
    kind = ps["type"]
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in ps.items() if k != "type"}
    if kind == "single_integrator":
        for key in ("wheel_radius", "half_length", "half_width", "ball_offset", "ball_radius"):
            if key in kw:
                raise ScenarioError("only valid for the youbot model",
                                    f"$.process.{key}")
        m = single_integrator(**kw)
    else:
        if "body_radius" in kw:
            kw["ball_radius"] = kw.pop("body_radius")
        m = youbot(**kw)
    if len(m.noise_std) != m.n_x:
        raise ScenarioError(f"expected {m.n_x} entries", "$.process.noise_std")
    return m


def build_scenario(data) -> Scenario:
    validate(data)
    data = copy.deepcopy(data)
    try:
        process = _build_process(data["process"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc), "$.process") from exc
    n_x = process.n_x

    def vec(key, value, n=n_x):
        v = np.asarray(value, float)
        if v.shape != (n,):
            raise ScenarioError(f"expected {n} entries, got {v.size}", key)
        return v

    obs = None
    od = data.get("observation")
    if od:
        obs = RangeBearingModel(np.asarray(od["landmarks"], float),
                                tuple(od.get("readings", ("range", "bearing"))),
                                od.get("range_std", 0.05), od.get("bearing_std", 0.05),
                                process.heading_index, od.get("weighting", "squared_distance"))
    bd = data["belief"]
    mean = vec("$.belief.mean", bd["mean"])
    std = vec("$.belief.std", bd["std"])
    true_state = vec("$.belief.true_state", bd.get("true_state", bd["mean"]))
    goal = vec("$.goal", data["goal"])
    sd = data["stopping"]
    stopping = StoppingRule(sd["radius"], sd.get("threshold", 0.9), sd.get("max_steps", 200))

    workspace = None
    if "workspace" in data:
        lo, hi = (np.asarray(v, float) for v in data["workspace"])
        if np.any(lo >= hi):
            raise ScenarioError("lower corner must be below upper corner", "$.workspace")
        if np.any(goal[:2] < lo) or np.any(goal[:2] > hi):
            raise ScenarioError("goal lies outside the workspace", "$.goal")
        workspace = (tuple(lo), tuple(hi))

    inflate_by = process.body_radius + float(data.get("safety_margin", 0.0))
    obstacles = []
    for i, spec in enumerate(data.get("obstacles", [])):
        try:
            obstacles.append(_build_obstacle(i, spec, inflate_by))
        except ValueError as exc:
            raise ScenarioError(str(exc), f"$.obstacles[{i}]") from exc
    mode = data.get("mode", "static" if obstacles else "convex")
    if mode == "static" and any(not o.truth.is_static for o in obstacles):
        raise ScenarioError("moving obstacles need dynamic mode", "$.mode")
    for o in obstacles:
        if o.appears_at == 0 and contains(o.truth.ellipsoid_at(0.0), goal[:2]) and o.truth.is_static:
            raise ScenarioError(f"goal lies inside obstacle {o.name}", "$.goal")

    try:
        obf = ObfParams(**data.get("obf", {}))
        solver = SolverConfig(**data.get("solver", {}))
    except ValueError as exc:
        raise ScenarioError(str(exc), "$") from exc
    pd = data.get("planning", {})
    hd = data.get("homotopy", {})
    seed_paths = tuple(tuple(map(tuple, sp)) for sp in hd["seed_paths"]) if hd.get("seed_paths") else None
    policy = PolicyConfig(mode=mode, workspace=workspace, homotopy_k=hd.get("k"),
                          margin=hd.get("margin", 0.05), seed_paths=seed_paths, **pd)
    return Scenario(
        name=data.get("name", "scenario"), data=data, process=process, observation=obs,
        belief_mean=mean, belief_std=std, n_particles=int(bd.get("n", 200)),
        true_state=true_state, goal=goal, stopping=stopping, obstacles=obstacles, obf=obf,
        solver=solver, policy=policy, seed=int(data.get("seed", 0)),
        obstacle_noise_std=float(data.get("obstacle_noise_std", 0.0)), workspace=workspace,
        description=data.get("description", ""))


def bundled_scenarios():
    """Names of the scenarios shipped with the package."""
    root = resources.files("beliefslap") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(source) -> Scenario:
    """Load from a path, a bundled scenario name, or an already-parsed dict."""
    if isinstance(source, dict):
        return build_scenario(source)
    path = Path(source)
    if not path.exists():
        bundled = resources.files("beliefslap") / "scenarios" / f"{source}.json"
        if not bundled.is_file():
            raise ScenarioError(f"no scenario file or bundled scenario named {source!r}", "$")
        text = bundled.read_text()
    else:
        text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON ({exc})", "$") from exc
    return build_scenario(data)
