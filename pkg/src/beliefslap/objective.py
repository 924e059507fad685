"""Open-loop planning objective and its gradient with respect to the controls.

The decision variable is a (K, n_u) control array.  The MAP state is propagated
through the affine model linearized about a nominal trajectory; particles enter
only through their deviations from the MAP, which are propagated noiselessly
with the same state-transition matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barrier import ObfParams, ObstacleField

MODES = ("convex", "static", "dynamic")


@dataclass(eq=False)
class PlanningProblem:
    """One open-loop instance.

    ``obstacles`` is a list of per-time obstacle lists.  In static mode only the
    first entry is used; in dynamic mode entry k holds the obstacles predicted
    k steps ahead and the segment ending at step t uses entry t - 1.
    """

    particles: np.ndarray
    x_map: np.ndarray
    goal: np.ndarray
    K: int
    process: object
    observation: object = None
    v_eff: object = 1.0
    obstacles: list = field(default_factory=list)
    obf: ObfParams = field(default_factory=ObfParams)
    mode: str = "convex"
    lambda_g: float = 1e3
    info_cost: bool = True
    workspace: tuple | None = None
    workspace_weight: float = 1e3

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        self.x_map = np.asarray(self.x_map, dtype=float)
        goal = np.array(self.goal, dtype=float)
        n_x = self.process.n_x
        if self.K < 1:
            raise ValueError("horizon K must be at least 1")
        if self.particles.shape[0] < 1 or self.particles.shape[1] != n_x:
            raise ValueError("particles must be a non-empty (N, n_x) array")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.lambda_g <= 0:
            raise ValueError("lambda_g must be positive")
        h = self.process.heading_index
        if h is not None:
            # express the goal heading on the branch closest to the MAP heading
            goal[h] = self.x_map[h] + self.process.state_difference(goal, self.x_map)[h]
        self.goal = goal
        V = np.asarray(self.v_eff, dtype=float)
        n_u = self.process.n_u
        if V.ndim == 0:
            V = np.broadcast_to(V * np.eye(n_u), (self.K, n_u, n_u))
        elif V.ndim == 2:
            V = np.broadcast_to(V, (self.K, n_u, n_u))
        V = np.array(V)
        if np.any(np.linalg.eigvalsh(0.5 * (V + V.transpose(0, 2, 1)))[:, 0] <= 0):
            raise ValueError("effort weights must be positive definite")
        self.V = V
        if self.mode == "dynamic" and len(self.obstacles) < self.K:
            raise ValueError("dynamic schedule must cover the horizon")
        self._field = None

    @property
    def n_u(self):
        return self.process.n_u

    @property
    def n_x(self):
        return self.process.n_x

    @property
    def deviations(self):
        return self.process.state_difference(self.particles, self.x_map)

    @property
    def field(self):
        if self._field is None:
            if self.mode == "static":
                self._field = ObstacleField.static(self.obstacles[0] if self.obstacles else [], self.obf)
            elif self.mode == "dynamic":
                self._field = ObstacleField(self.obstacles[: self.K], self.obf)
        return self._field

    def obstacles_at(self, k):
        if self.mode == "convex" or not self.obstacles:
            return []
        return self.obstacles[0] if self.mode == "static" else self.obstacles[min(k, len(self.obstacles) - 1)]


@dataclass(frozen=True)
class TrajectoryLinearization:
    A: np.ndarray   # (K, n_x, n_x)
    B: np.ndarray   # (K, n_x, n_u)
    fp: np.ndarray  # (K, n_x)


@dataclass
class CostBreakdown:
    info: float
    effort: float
    obstacle: float
    terminal: float
    boundary: float = 0.0

    @property
    def total(self):
        return self.info + self.effort + self.obstacle + self.terminal + self.boundary

    def to_dict(self):
        return {"info": self.info, "effort": self.effort, "obstacle": self.obstacle,
                "terminal": self.terminal, "boundary": self.boundary, "total": self.total}


def rollout(p: PlanningProblem, u):
    """Noise-free propagation of the MAP state through the process model."""
    X = np.empty((p.K + 1, p.n_x))
    X[0] = p.x_map
    for t in range(p.K):
        X[t + 1] = X[t] + p.process.input_matrix @ u[t] * p.process.dt
    return X


def linearize_along(p: PlanningProblem, u, X=None) -> TrajectoryLinearization:
    """Linearize the process model about (X, u); X defaults to the rollout of u."""
    u = np.asarray(u, dtype=float).reshape(p.K, p.n_u)
    if X is None:
        X = rollout(p, u)
    lins = [p.process.linearize(X[t], u[t]) for t in range(p.K)]
    return TrajectoryLinearization(
        np.array([l.A for l in lins]), np.array([l.B for l in lins]), np.array([l.fp for l in lins]))


def nominal_trajectory(p: PlanningProblem, u, lin: TrajectoryLinearization | None = None):
    """MAP-state trajectory (K+1, n_x) under the affine model."""
    u = np.asarray(u, dtype=float).reshape(p.K, p.n_u)
    if lin is None:
        lin = linearize_along(p, u)
    X = np.empty((p.K + 1, p.n_x))
    X[0] = p.x_map
    if _is_identity(lin):
        X[1:] = p.x_map + np.cumsum(np.einsum("tij,tj->ti", lin.B, u) + lin.fp, axis=0)
        return X
    for t in range(p.K):
        X[t + 1] = lin.A[t] @ X[t] + lin.B[t] @ u[t] + lin.fp[t]
    return X


def _is_identity(lin):
    flag = getattr(lin, "_identity", None)
    if flag is None:
        flag = bool(np.array_equal(lin.A, np.broadcast_to(np.eye(lin.A.shape[1]), lin.A.shape)))
        object.__setattr__(lin, "_identity", flag)
    return flag


def deviation_bundle(p: PlanningProblem, lin: TrajectoryLinearization | None = None):
    """Scaled particle deviations e_t, shape (K+1, N, n_x)."""
    if lin is None:
        lin = linearize_along(p, np.zeros((p.K, p.n_u)))
    N = p.particles.shape[0]
    E = np.empty((p.K + 1, N, p.n_x))
    E[0] = p.deviations / np.sqrt(N)
    for t in range(p.K):
        E[t + 1] = E[t] @ lin.A[t].T
    return E


def _info_terms(obs, X, E, n_x):
    # X (T, n_x), E (T, N, n_x) -> cost (T,), grad (T, n_x)
    H, Hess = obs.jacobian_and_hessian(X, n_x)
    R = obs.weights(X)
    dR = obs.weights_gradient(X, n_x)
    G = E @ H.transpose(0, 2, 1)                      # (T, N, n_z)
    G2 = np.sum(G * G, axis=1)                        # (T, n_z)
    cost = np.sum(R * G2, axis=1)
    S = G.transpose(0, 2, 1) @ E                      # (T, n_z, n_x)
    HS = (Hess @ S[..., None])[..., 0]                # (T, n_z, n_x)
    grad = (G2[:, None, :] @ dR)[:, 0] + 2 * (R[:, None, :] @ HS)[:, 0]
    return cost, grad


def cost_info(observation, x_hat, e, n_x=None) -> float:
    """sum_i sum_j R_j(x) (e_i . H_j(x))^2 for one time step."""
    x_hat = np.asarray(x_hat, dtype=float)
    e = np.atleast_2d(np.asarray(e, dtype=float))
    n_x = n_x or x_hat.size
    return float(_info_terms(observation, x_hat[None], e[None], n_x)[0][0])


def cost_eff(u, V) -> float:
    u = np.asarray(u, dtype=float)
    return float(u @ np.asarray(V, dtype=float) @ u)


class Objective:
    """Objective with a frozen linearization and terminal target.

    The solver shifts ``target`` away from the goal to implement
    multiplier updates for the terminal constraint; ``weight`` is the
    quadratic terminal weight.
    """

    def __init__(self, p: PlanningProblem, lin=None, target=None, weight=None, u_ref=None):
        self.p = p
        self.lin = lin if lin is not None else linearize_along(
            p, np.zeros((p.K, p.n_u)) if u_ref is None else u_ref)
        self.target = p.goal if target is None else np.asarray(target, dtype=float)
        self.weight = p.lambda_g if weight is None else weight
        self.E = deviation_bundle(p, self.lin)
        self.use_info = p.info_cost and p.observation is not None

    def evaluate(self, u, gradient=True):
        """Returns (breakdown, grad (K, n_u) or None, diagnostics dict)."""
        p, lin = self.p, self.lin
        u = np.asarray(u, dtype=float).reshape(p.K, p.n_u)
        X = nominal_trajectory(p, u, lin)
        gX = np.zeros_like(X)

        info = 0.0
        if self.use_info:
            c, g = _info_terms(p.observation, X[1:], self.E[1:], p.n_x)
            info = float(np.sum(c))
            gX[1:] += g

        Vu = np.einsum("tij,tj->ti", p.V, u)
        effort = float(np.sum(u * Vu))

        err = X[-1] - self.target
        terminal = float(self.weight * err @ err)
        gX[-1] += 2 * self.weight * err

        obstacle = 0.0
        capped = False
        if p.mode != "convex" and p.field is not None and p.field.nb > 0:
            pts = p.process.body_points(X)
            cost, dA, dB, cap = p.field.segment_costs(pts[:-1], pts[1:])
            obstacle = float(np.sum(cost))
            capped = bool(np.any(cap))
            J = p.process.body_jacobian(X)
            gX[:-1] += np.einsum("tgc,tgcn->tn", dA, J[:-1])
            gX[1:] += np.einsum("tgc,tgcn->tn", dB, J[1:])

        boundary = 0.0
        if p.workspace is not None:
            lo, hi = (np.asarray(v, dtype=float) for v in p.workspace)
            pos = X[1:, :2]
            viol = np.maximum(lo - pos, 0.0) - np.maximum(pos - hi, 0.0)
            boundary = float(p.workspace_weight * np.sum(viol * viol))
            gX[1:, :2] += -2 * p.workspace_weight * viol

        br = CostBreakdown(info, effort, obstacle, terminal, boundary)
        diag = {"nominal": X, "capped": capped}
        if not gradient:
            return br, None, diag
        if _is_identity(lin):
            lam = np.cumsum(gX[:0:-1], axis=0)[::-1]
            grad = np.einsum("tji,tj->ti", lin.B, lam)
        else:
            lam = np.zeros(p.n_x)
            grad = np.empty_like(u)
            for t in range(p.K - 1, -1, -1):
                lam = gX[t + 1] + (lin.A[t + 1].T @ lam if t + 1 < p.K else 0.0)
                grad[t] = lin.B[t].T @ lam
        grad += 2 * Vu
        return br, grad, diag

    def value(self, u):
        return self.evaluate(u, gradient=False)[0].total

    def value_and_grad(self, u):
        br, g, _ = self.evaluate(u)
        return br.total, g


def total_objective(p: PlanningProblem, u) -> CostBreakdown:
    return Objective(p, u_ref=np.asarray(u, dtype=float).reshape(p.K, p.n_u)).evaluate(u, gradient=False)[0]


def objective_gradient(p: PlanningProblem, u):
    """Flat gradient of the total objective, length K * n_u."""
    u = np.asarray(u, dtype=float).reshape(p.K, p.n_u)
    return Objective(p, u_ref=u).evaluate(u)[1].ravel()


def check_info_convexity(p: PlanningProblem, u_a, u_b, tol=1e-8) -> bool:
    """Midpoint convexity of info + effort + terminal along [u_a, u_b]."""
    u_a = np.asarray(u_a, dtype=float).reshape(p.K, p.n_u)
    u_b = np.asarray(u_b, dtype=float).reshape(p.K, p.n_u)
    obj = Objective(p, u_ref=u_a)

    def f(u):
        br = obj.evaluate(u, gradient=False)[0]
        return br.info + br.effort + br.terminal

    return f(0.5 * (u_a + u_b)) <= 0.5 * (f(u_a) + f(u_b)) + tol


def terminal_sensitivity(p: PlanningProblem, lin: TrajectoryLinearization):
    """d x_K / d u as an (n_x, K * n_u) matrix."""
    J = np.empty((p.n_x, p.K, p.n_u))
    Phi = np.eye(p.n_x)
    for t in range(p.K - 1, -1, -1):
        J[:, t] = Phi @ lin.B[t]
        Phi = Phi @ lin.A[t]
    return J.reshape(p.n_x, -1)
