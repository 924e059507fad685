"""Closed-loop simulation: plan, execute, observe, filter, repeat."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .belief import effective_sample_size, goal_probability, map_estimate, predict, resample, update
from .errors import SlapError
from .geometry import ball_intersects, contains
from .planner import RhcPolicy, predict_obstacle_schedule

STATUSES = ("goal-reached", "max-steps", "error")
LOG_VERSION = 1


def _list(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


@dataclass
class StepRecord:
    step: int
    time: float
    true_state: list
    map_estimate: list
    goal_probability: float
    control: list
    observation: list | None
    cost: dict
    horizon: int
    planned: list
    obstacles: list
    collision: bool
    plan_violation: bool
    covariance_trace: float
    ess: float
    solve_time: float = field(default=0.0, compare=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("solve_time")
        return d


@dataclass
class RunLog:
    scenario: str
    seed: int
    info_cost: bool
    status: str = "max-steps"
    message: str = ""
    initial_state: list = field(default_factory=list)
    initial_map: list = field(default_factory=list)
    initial_covariance_trace: float = 0.0
    initial_particles: list = field(default_factory=list)
    seed_path: list = field(default_factory=list)
    final_particles: list = field(default_factory=list)
    final_covariance_trace: float = 0.0
    final_goal_probability: float = 0.0
    records: list = field(default_factory=list)

    @property
    def steps(self):
        return len(self.records)

    @property
    def collided(self):
        return any(r.collision for r in self.records)

    @property
    def reached(self):
        return self.status == "goal-reached"

    @property
    def trajectory(self):
        pts = [self.initial_state] + [r.true_state for r in self.records]
        return np.asarray(pts, dtype=float)

    @property
    def solve_times(self):
        return [r.solve_time for r in self.records]

    def header(self):
        d = {k: v for k, v in asdict(self).items() if k != "records"}
        d["version"] = LOG_VERSION
        return d

    def to_dict(self):
        d = self.header()
        d["records"] = [r.to_dict() for r in self.records]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_jsonl(self):
        lines = [json.dumps({"type": "header", **self.header()}, sort_keys=True)]
        lines += [json.dumps({"type": "step", **r.to_dict()}, sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("version", None)
        d.pop("type", None)
        records = [StepRecord(**r) for r in d.pop("records", [])]
        return cls(records=records, **d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_jsonl(cls, text):
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        head = lines[0]
        head.pop("type")
        recs = []
        for rec in lines[1:]:
            rec.pop("type")
            recs.append(rec)
        return cls.from_dict({**head, "records": recs})

    def timing(self):
        return {"scenario": self.scenario, "seed": self.seed, "solve_times": self.solve_times}

    def write(self, out_dir, stem=None):
        """Write <stem>.json, <stem>.jsonl and <stem>.timing.json; returns the paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or f"{self.scenario}_seed{self.seed}"
        paths = (out / f"{stem}.json", out / f"{stem}.jsonl", out / f"{stem}.timing.json")
        paths[0].write_text(self.to_json())
        paths[1].write_text(self.to_jsonl())
        paths[2].write_text(json.dumps(self.timing(), indent=1))
        return paths


def body_collides(process, x, obstacles):
    """True if any body ball of state x touches one of the ellipses."""
    pts = process.body_points(np.asarray(x, dtype=float))
    r = process.body_radius
    for e in obstacles:
        for q in pts:
            if (ball_intersects(e, q, r) if r > 0 else contains(e, q)):
                return True
    return False


class _Streams:
    """Independent generators for each source of randomness in a run."""

    names = ("belief", "policy", "process", "observation", "filter", "resample", "obstacles")

    def __init__(self, seed):
        children = np.random.SeedSequence(seed).spawn(len(self.names))
        for name, child in zip(self.names, children):
            setattr(self, name, np.random.default_rng(child))


def _schedule(s, t, horizon, rng):
    dt = s.process.dt
    if s.mode == "dynamic":
        tracks = [o.planning for o in s.obstacles if o.visible(t)]
        if s.obstacle_noise_std > 0:
            # noisy estimates of the current poses, extrapolated from there
            tracks = [tr.at(t, s.obstacle_noise_std, rng) for tr in tracks]
            return predict_obstacle_schedule(tracks, 0.0, horizon, dt)
        return predict_obstacle_schedule(tracks, t, horizon, dt)
    if s.mode == "static":
        return [s.planning_at(t)]
    return []


def run_simulation(s, policy: RhcPolicy | None = None) -> RunLog:
    """Simulate the closed loop until the stopping rule fires or the step cap is hit."""
    rng = _Streams(s.seed)
    b = s.initial_belief(rng.belief)
    x = np.array(s.true_state, dtype=float)
    model, obs = s.process, s.observation
    policy = policy or RhcPolicy(model, obs, s.goal, s.policy, s.solver, s.obf)
    log = RunLog(s.name, s.seed, s.policy.info_cost, initial_state=x.tolist(),
                 initial_map=map_estimate(b).tolist(),
                 initial_covariance_trace=float(np.trace(b.covariance())),
                 initial_particles=b.particles.tolist())
    t = 0.0
    horizon = s.policy.max_horizon
    try:
        for step in range(s.stopping.max_steps + 1):
            if s.stopping.reached(b, s.goal):
                log.status = "goal-reached"
                break
            if step == s.stopping.max_steps:
                log.status = "max-steps"
                break
            schedule = _schedule(s, t, horizon, rng.obstacles)
            t0 = time.perf_counter()
            u, plan = policy.act(b, schedule, rng.policy)
            solve_time = time.perf_counter() - t0
            if step == 0 and getattr(policy, "seed_trajectory", None) is not None:
                log.seed_path = policy.seed_trajectory.waypoints.tolist()
            x = model.step(x, u, rng.process.standard_normal(model.n_x))
            z = None
            b = predict(b, model, u, rng.filter)
            if obs is not None:
                z = obs.observe(x, rng.observation.standard_normal(obs.n_z) * obs.noise_std)
                b = update(b, obs, z)
            if effective_sample_size(b) < 0.5 * b.n:
                b = resample(b, rng.resample)
            t = (step + 1) * model.dt
            truth = s.truth_at(t)
            log.records.append(StepRecord(
                step=step, time=t, true_state=x.tolist(), map_estimate=map_estimate(b).tolist(),
                goal_probability=goal_probability(b, s.goal, s.stopping.radius),
                control=u.tolist(), observation=_list(z), cost=plan.cost.to_dict(),
                horizon=int(plan.controls.shape[0]), planned=plan.nominal.tolist(),
                obstacles=[e.to_dict() for e in truth],
                collision=body_collides(model, x, truth),
                plan_violation=bool(plan.barrier_violation),
                covariance_trace=float(np.trace(b.covariance())),
                ess=effective_sample_size(b), solve_time=solve_time))
    except SlapError as exc:
        log.status = "error"
        log.message = f"{type(exc).__name__}: {exc}"
    log.final_particles = b.particles.tolist()
    log.final_covariance_trace = float(np.trace(b.covariance()))
    log.final_goal_probability = goal_probability(b, s.goal, s.stopping.radius)
    return log


def plan_first_step(s):
    """The policy's first open-loop solve for scenario s; returns (policy, PlanResult).

    Uses the same random streams as ``run_simulation``, so the result equals the
    plan behind the first step of a run with the same seed.
    """
    rng = _Streams(s.seed)
    b = s.initial_belief(rng.belief)
    policy = RhcPolicy(s.process, s.observation, s.goal, s.policy, s.solver, s.obf)
    _, plan = policy.act(b, _schedule(s, 0.0, s.policy.max_horizon, rng.obstacles), rng.policy)
    return policy, plan


def min_landmark_distance(log: RunLog, landmarks):
    L = np.asarray(landmarks, dtype=float).reshape(-1, 2)
    traj = log.trajectory[:, :2]
    return float(np.min(np.linalg.norm(traj[:, None, :] - L[None], axis=-1)))


def run_comparison(s, seed=None):
    """Paired runs with the info cost on and off; everything else shared.

    Returns (log_on, log_off, summary).
    """
    if s.observation is None or len(s.landmarks) == 0:
        raise ValueError("comparison needs at least one landmark")
    on = run_simulation(s.with_overrides(seed=seed, info_cost=True))
    off = run_simulation(s.with_overrides(seed=seed, info_cost=False))
    summary = {
        "seed": on.seed,
        "min_landmark_distance": {"info_on": min_landmark_distance(on, s.landmarks),
                                  "info_off": min_landmark_distance(off, s.landmarks)},
        "terminal_spread": {"info_on": on.final_covariance_trace,
                            "info_off": off.final_covariance_trace},
        "status": {"info_on": on.status, "info_off": off.status},
        "steps": {"info_on": on.steps, "info_off": off.steps},
    }
    return on, off, summary
