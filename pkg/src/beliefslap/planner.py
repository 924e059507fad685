"""Open-loop solver, homotopy ranking and the receding-horizon policy."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .belief import ParticleBelief, map_estimate, resample
from .errors import DiscretizationError, InfeasibleSeedError, NoPathError
from .geometry import contains, predict_obstacle
from .homotopy import (InitialTrajectory, InsideObstacleError, PathSignature, auto_horizon,
                       build_visibility_graph, discretize, enumerate_paths, path_length,
                       resample_polyline, signature)
from .objective import (CostBreakdown, Objective, PlanningProblem, linearize_along,
                        nominal_trajectory, terminal_sensitivity)


@dataclass(frozen=True)
class SolverConfig:
    """Projected-gradient settings.

    ``step_cap`` limits every control coordinate's change per accepted step to
    ``step_cap * max_u``.  The terminal condition x_K = goal is enforced with
    multiplier updates on top of the quadratic penalty; ``max_outer`` bounds
    those updates, each of which re-linearizes about the incumbent.
    ``max_total_iter`` caps inner iterations summed over all updates, which
    bounds the solve time when a predicted obstacle makes the terminal
    condition hard to meet.
    """

    max_outer: int = 30
    max_iter: int = 400
    max_total_iter: int = 100000
    initial_step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    step_cap: float = 0.1
    rtol: float = 1e-9
    gtol: float = 1e-6
    terminal_tol: float = 1e-6
    lambda_max: float = 1e6
    max_target_shift: float = 0.25
    relinearize_every: int = 1

    def __post_init__(self):
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        for name in ("max_outer", "max_iter", "max_total_iter", "initial_step", "armijo", "step_cap",
                     "rtol", "gtol", "terminal_tol", "lambda_max", "max_target_shift", "relinearize_every"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class PlanResult:
    controls: np.ndarray
    nominal: np.ndarray
    cost: CostBreakdown
    iterations: int
    outer_iterations: int
    barrier_violation: bool
    signature: PathSignature | None
    seed_signature: PathSignature | None
    wall_time: float
    terminal_error: float
    kkt_residual: float
    history: list = field(default_factory=list)

    @property
    def homotopy_preserved(self):
        if self.seed_signature is None or self.signature is None:
            return None
        return self.signature == self.seed_signature

    @property
    def total(self):
        return self.cost.total


def project(u, max_u):
    """Scale every row of u back onto the ball ||u_t|| <= max_u."""
    n = np.linalg.norm(u, axis=1, keepdims=True)
    scale = np.minimum(1.0, max_u / np.maximum(n, 1e-300))
    return u * scale


def _spg(obj: Objective, u, cfg: SolverConfig, max_u, history, max_iter=None):
    """Projected gradient with Barzilai-Borwein trial steps and monotone Armijo search."""
    f, g = obj.value_and_grad(u)
    if not np.isfinite(f):
        raise InfeasibleSeedError("objective is not finite at the seed")
    cap = cfg.step_cap * max_u
    alpha = cfg.initial_step
    stall = 0
    it = 0
    for it in range(1, (cfg.max_iter if max_iter is None else max_iter) + 1):
        pg = project(u - g, max_u) - u
        if np.linalg.norm(pg) < cfg.gtol:
            it -= 1
            break
        d = project(u - alpha * g, max_u) - u
        m = np.max(np.abs(d))
        if m > cap:
            d *= cap / m
        slope = float(np.sum(g * d))
        if slope >= 0:
            it -= 1
            break
        t = 1.0
        while True:
            u_new = u + t * d
            f_new, g_new = obj.value_and_grad(u_new)
            if np.isfinite(f_new) and f_new <= f + cfg.armijo * t * slope:
                break
            t *= cfg.backtrack
            if t < 1e-14:
                return u, f, g, it - 1
        s = (u_new - u).ravel()
        y = (g_new - g).ravel()
        sy = s @ y
        alpha = float(np.clip(s @ s / sy, 1e-10, 1e10)) if sy > 0 else 1e10
        stall = stall + 1 if f - f_new <= cfg.rtol * max(1.0, abs(f)) else 0
        u, f, g = u_new, f_new, g_new
        history.append(f)
        if stall >= 3:
            break
    return u, f, g, it


def _seed_controls(p: PlanningProblem, seed):
    if isinstance(seed, InitialTrajectory):
        return np.array(seed.controls, dtype=float), seed.signature
    return np.array(seed, dtype=float), None


def _violation(p: PlanningProblem, X, capped):
    if capped:
        return True
    pts = p.process.body_points(X)
    for t in range(1, p.K + 1):
        for e in p.obstacles_at(t - 1):
            if any(contains(e, q) for q in pts[t]):
                return True
    return False


def solve_open_loop(p: PlanningProblem, seed, cfg: SolverConfig = SolverConfig()) -> PlanResult:
    t0 = time.perf_counter()
    u, seed_sig = _seed_controls(p, seed)
    if u.shape != (p.K, p.n_u):
        raise ValueError(f"seed has shape {u.shape}, expected {(p.K, p.n_u)}")
    max_u = p.process.max_u
    u = project(u, max_u)
    lin = linearize_along(p, u)
    goal = p.goal
    weight = p.lambda_g

    # least-squares multiplier estimate for x_K = goal from the unpenalized gradient
    base = Objective(p, lin, weight=0.0)
    f0, g0 = base.value_and_grad(u)
    if not np.isfinite(f0):
        raise InfeasibleSeedError("objective is not finite at the seed")
    J = terminal_sensitivity(p, lin)
    mu = -np.linalg.lstsq(J.T, g0.ravel(), rcond=None)[0]

    history = []
    iters = 0
    err_prev = np.inf
    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        shift = mu / (2 * weight)
        n = np.linalg.norm(shift)
        if n > cfg.max_target_shift:
            shift *= cfg.max_target_shift / n
            mu = 2 * weight * shift
        obj = Objective(p, lin, target=goal - shift, weight=weight)
        u, _, _, k = _spg(obj, u, cfg, max_u, history, min(cfg.max_iter, cfg.max_total_iter - iters))
        iters += k
        X = nominal_trajectory(p, u, lin)
        err = X[-1] - goal
        en = float(np.linalg.norm(err))
        if en < cfg.terminal_tol or iters >= cfg.max_total_iter:
            break
        mu = mu + 2 * weight * err
        if en > 0.25 * err_prev:
            weight = min(2 * weight, cfg.lambda_max)
        err_prev = en
        if outer % cfg.relinearize_every == 0:
            lin = linearize_along(p, u)

    # stationarity of the Lagrangian: gradient with the multiplier-shifted target
    g = obj.value_and_grad(u)[1]
    kkt = float(np.linalg.norm(project(u - g, max_u) - u))
    br, _, diag = Objective(p, lin).evaluate(u, gradient=False)
    X = diag["nominal"]
    sig = signature(X, p.obstacles_at(0)) if p.mode == "static" and p.obstacles_at(0) else None
    return PlanResult(
        controls=u, nominal=X, cost=br, iterations=iters, outer_iterations=outer,
        barrier_violation=_violation(p, X, diag["capped"]), signature=sig,
        seed_signature=seed_sig, wall_time=time.perf_counter() - t0,
        terminal_error=float(np.linalg.norm(X[-1] - goal)), kkt_residual=kkt, history=history)


def best_over_homotopy(p: PlanningProblem, seeds, cfg: SolverConfig = SolverConfig(),
                       return_all=False):
    """Optimize every seed; lowest total cost wins, shorter path on ties."""
    if not seeds:
        raise ValueError("at least one seed required")
    results = []
    for seed in seeds:
        try:
            results.append(solve_open_loop(p, seed, cfg))
        except InfeasibleSeedError:
            continue
    if not results:
        raise InfeasibleSeedError("every seed is infeasible")
    best = min(results, key=lambda r: (r.total, path_length(r.nominal)))
    return (best, results) if return_all else best


def predict_obstacle_schedule(tracks, t, K, dt):
    """Obstacles predicted 0..K+1 steps ahead of absolute time t.

    Each track is re-anchored to its pose at t before extrapolating, so the
    schedule follows the latest obstacle estimate.
    """
    anchored = [tr.at(t) for tr in tracks]
    return [[predict_obstacle(a, k * dt) for a in anchored] for k in range(K + 2)]


@dataclass(frozen=True)
class PolicyConfig:
    """Receding-horizon settings.

    ``horizon`` None picks K from the seed path length.  In ``shrinking`` mode
    K decreases by one per step but never below what the remaining distance
    needs (times ``slack``) nor below ``min_horizon``.
    """

    mode: str = "convex"
    horizon: int | None = None
    horizon_mode: str = "shrinking"
    min_horizon: int = 3
    max_horizon: int = 60
    slack: float = 1.3
    n_plan_particles: int = 50
    v_eff: float = 1.0
    lambda_g: float = 1e3
    info_cost: bool = True
    workspace: tuple | None = None
    homotopy_k: int | None = None
    margin: float = 0.05
    seed_paths: tuple | None = None


class RhcPolicy:
    """Stateful policy: remembers the previous plan for warm starts."""

    def __init__(self, process, observation, goal, cfg: PolicyConfig = PolicyConfig(),
                 solver: SolverConfig = SolverConfig(), obf=None):
        from .barrier import ObfParams
        self.process = process
        self.observation = observation
        self.goal = np.asarray(goal, dtype=float)
        self.cfg = cfg
        self.solver = solver
        self.obf = obf if obf is not None else ObfParams()
        self.prev = None
        self.last = None
        self.seed_trajectory = None
        self.candidates = []

    def reset(self):
        self.prev = None
        self.last = None

    # -- horizon ---------------------------------------------------------
    def _needed(self, x, slack=None):
        dist = float(np.linalg.norm(self.goal[:2] - x[:2]))
        slack = self.cfg.slack if slack is None else slack
        return auto_horizon(dist, self.process, slack, self.cfg.min_horizon)

    def _horizon(self, x, seed_len=None):
        c = self.cfg
        if self.prev is None:
            if c.horizon is not None:
                return c.horizon
            if seed_len is not None:
                return min(max(c.min_horizon, auto_horizon(seed_len, self.process, c.slack)), c.max_horizon)
            return min(self._needed(x), c.max_horizon)
        if c.horizon_mode == "fixed":
            return self.prev.shape[0]
        # slack is spent on the first plan; later steps only keep K reachable
        K = max(self.prev.shape[0] - 1, self._needed(x, 1.0))
        cap = c.horizon if c.horizon is not None else c.max_horizon
        return max(c.min_horizon, min(K, cap))

    # -- seeds -----------------------------------------------------------
    def _straight(self, x, K):
        return discretize(np.array([x[:2], self.goal[:2]]), self.process, K, x, self.goal)

    def _first_seeds(self, x, schedule):
        """Candidate seeds and the horizon they imply for the first call."""
        c = self.cfg
        if c.seed_paths:
            paths = [np.vstack([x[:2], np.asarray(sp, float)[1:-1].reshape(-1, 2), self.goal[:2]])
                     for sp in c.seed_paths]
        elif c.mode == "static" and schedule and schedule[0]:
            try:
                g = build_visibility_graph(x[:2], self.goal[:2], schedule[0], c.margin)
                paths = [cp.points for cp in enumerate_paths(g, c.homotopy_k)]
            except (NoPathError, InsideObstacleError):
                paths = [np.array([x[:2], self.goal[:2]])]
        else:
            paths = [np.array([x[:2], self.goal[:2]])]
        K = self._horizon(x, max(path_length(pt) for pt in paths))
        obstacles = schedule[0] if c.mode == "static" and schedule else None
        seeds = []
        for pt in paths:
            try:
                seeds.append(discretize(pt, self.process, K, x, self.goal, obstacles=obstacles))
            except DiscretizationError:
                seeds.append(self._clipped(pt, K, x, obstacles))
        return K, seeds

    def _clipped(self, path, K, x, obstacles=None):
        W = np.empty((K + 1, self.process.n_x))
        W[:, :2] = resample_polyline(path, K + 1)
        if self.process.n_x > 2:
            W[:, 2:] = x[2:] + np.linspace(0, 1, K + 1)[:, None] * \
                self.process.state_difference(self.goal, x)[2:]
        U = project(self.process.controls_for_displacement(np.diff(W, axis=0)), self.process.max_u)
        return InitialTrajectory(W, U, signature(W, obstacles) if obstacles else None)

    def _warm(self, K):
        u = self.prev[1:]
        if u.shape[0] >= K:
            return u[:K].copy()
        return np.vstack([u, np.zeros((K - u.shape[0], self.process.n_u))])

    def _blocked_steps(self, p, u):
        X = nominal_trajectory(p, u)
        pts = self.process.body_points(X)
        bad = [t for t in range(1, p.K + 1)
               if any(contains(e, q) for e in p.obstacles_at(t - 1) for q in pts[t])]
        return X, bad

    def _repair(self, p, u, x):
        """Local detour for a blocked span of the warm start, else a fresh seed.

        In static mode detours and fresh seeds keep the warm start's crossing
        word when some candidate allows it.
        """
        X, bad = self._blocked_steps(p, u)
        if not bad:
            return u
        static = p.mode == "static" and p.obstacles_at(0)
        target = signature(X, p.obstacles_at(0)) if static else None
        a, b = bad[0], bad[-1]
        if b - a + 1 == len(bad) and b < p.K:
            obstacles = [e for k in range(a - 1, b + 1) for e in p.obstacles_at(k)]
            for path in self._paths(X[a - 1, :2], X[b + 1, :2], obstacles, static):
                W = X.copy()
                W[a - 1:b + 2, :2] = resample_polyline(path, b - a + 3)
                if target is not None and signature(W, p.obstacles_at(0)) != target:
                    continue
                U = u.copy()
                U[a - 1:b + 1] = project(
                    self.process.controls_for_displacement(np.diff(W[a - 1:b + 2], axis=0)),
                    self.process.max_u)
                return U
        return self._replan_seed(p, x, target)

    def _paths(self, start, end, obstacles, several):
        try:
            g = build_visibility_graph(start, end, obstacles, self.cfg.margin)
            return [c.points for c in enumerate_paths(g, None if several else 1)]
        except (NoPathError, InsideObstacleError):
            return []

    def _replan_seed(self, p, x, target=None):
        if p.mode == "static":
            candidates = [p.obstacles_at(0)]
        else:
            # every few steps of the predicted schedule, then the current slice alone
            stride = max(1, p.K // 6)
            union = [e for k in range(0, p.K, stride) for e in p.obstacles_at(k)]
            candidates = [union, p.obstacles_at(0)]
        for obstacles in candidates:
            paths = self._paths(x[:2], self.goal[:2], obstacles, target is not None)
            if target is not None:
                keep = [pt for pt in paths if signature(pt, p.obstacles_at(0)) == target]
                paths = keep or paths
            for pt in paths:
                try:
                    return discretize(pt, self.process, p.K, x, self.goal).controls
                except DiscretizationError:
                    return self._clipped(pt, p.K, x).controls
        return self._clipped(np.array([x[:2], self.goal[:2]]), p.K, x).controls

    # -- main ------------------------------------------------------------
    def problem(self, particles, x_map, K, schedule):
        c = self.cfg
        obstacles = list(schedule) if schedule else []
        if c.mode == "static":
            obstacles = obstacles[:1]
        return PlanningProblem(
            particles=particles, x_map=x_map, goal=self.goal, K=K, process=self.process,
            observation=self.observation, v_eff=c.v_eff, obstacles=obstacles, obf=self.obf,
            mode=c.mode, lambda_g=c.lambda_g, info_cost=c.info_cost, workspace=c.workspace)

    def act(self, b: ParticleBelief, schedule=None, rng=None):
        """First control of the optimized plan for belief b.

        ``schedule`` lists per-step obstacle sets (static mode uses entry 0).
        """
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        x_map = map_estimate(b)
        rs = resample(b, rng)
        n = min(self.cfg.n_plan_particles, rs.n)
        idx = np.sort(rng.choice(rs.n, size=n, replace=False))
        particles = rs.particles[idx]
        schedule = schedule or []
        if self.prev is None:
            K, seeds = self._first_seeds(x_map, schedule)
            p = self.problem(particles, x_map, K, self._fit(schedule, K))
            if p.mode == "dynamic":
                # a straight seed may run through predicted obstacle poses
                fixed = [self._repair(p, sd.controls, x_map) for sd in seeds]
                seeds = [replace(sd, controls=u, waypoints=nominal_trajectory(p, u))
                         for sd, u in zip(seeds, fixed)]
            best, results = best_over_homotopy(p, seeds, self.solver, return_all=True)
            self.candidates = list(zip(seeds, results))
            self.seed_trajectory = next(s for s, r in self.candidates if r is best)
        else:
            K = self._horizon(x_map)
            p = self.problem(particles, x_map, K, self._fit(schedule, K))
            u0 = self._warm(K)
            if p.mode != "convex":
                u0 = self._repair(p, u0, x_map)
            best = solve_open_loop(p, u0, self.solver)
        self.prev = best.controls
        self.last = best
        return best.controls[0].copy(), best

    def _fit(self, schedule, K):
        if self.cfg.mode != "dynamic":
            return schedule
        if len(schedule) >= K:
            return schedule
        if not schedule:
            return [[] for _ in range(K)]
        return list(schedule) + [schedule[-1]] * (K - len(schedule))


def rhc_policy(b: ParticleBelief, schedule, K, goal, process, observation=None,
               cfg: PolicyConfig = PolicyConfig(), solver: SolverConfig = SolverConfig(),
               obf=None, seed=None):
    """One stateless policy evaluation: a fresh RhcPolicy with horizon K."""
    pol = RhcPolicy(process, observation, goal, replace(cfg, horizon=K), solver, obf)
    return pol.act(b, schedule, seed)[0]
