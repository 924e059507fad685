"""Shared problem factories and independent oracles for the test suite."""
import numpy as np

# criterion number -> (passed, title, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE = {}

from beliefslap.barrier import ObfParams
from beliefslap.geometry import Ellipsoid
from beliefslap.models import RangeBearingModel, single_integrator, youbot
from beliefslap.objective import Objective, PlanningProblem


def random_problem(rng, K=10, N=50, n_obstacles=2, model="single_integrator", info=True,
                   mode="static", v_eff=1.0):
    proc = single_integrator(dt=0.1, noise_std=(0.02, 0.02), max_u=1.0) if model == "single_integrator" \
        else youbot(dt=0.2, max_u=20.0, ball_offset=0.15, ball_radius=0.0)
    x_map = np.zeros(proc.n_x)
    x_map[:2] = rng.uniform(-0.5, 0.5, 2)
    particles = x_map + rng.normal(0, 0.15, (N, proc.n_x))
    goal = x_map.copy()
    goal[:2] += rng.uniform(0.3, 0.8, 2)
    obs = RangeBearingModel(rng.uniform(-1, 2, (2, 2)), heading_index=proc.heading_index) if info else None
    obstacles = []
    for _ in range(n_obstacles):
        c = rng.uniform(-1.5, 2.0, 2)
        A = rng.normal(size=(2, 2))
        obstacles.append(Ellipsoid(c, A @ A.T + 2.0 * np.eye(2)))
    sched = [obstacles] if mode == "static" else [obstacles] * K
    return PlanningProblem(particles=particles, x_map=x_map, goal=goal, K=K, process=proc,
                           observation=obs, v_eff=v_eff, obstacles=sched if n_obstacles else [],
                           obf=ObfParams(M=1.0), mode=mode if n_obstacles else "convex")


def random_controls(rng, p, scale=0.6):
    return rng.uniform(-scale, scale, (p.K, p.n_u)) * p.process.max_u


def fd_gradient(f, u, h=1e-6):
    g = np.zeros_like(u)
    flat = u.ravel()
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        g.ravel()[i] = (f((flat + e).reshape(u.shape)) - f((flat - e).reshape(u.shape))) / (2 * h)
    return g


def gradient_rel_error(p, u):
    """Relative error of the analytic gradient against central differences, or None if capped."""
    obj = Objective(p, u_ref=u)
    _, g, diag = obj.evaluate(u)
    if diag["capped"]:
        return None
    ref = fd_gradient(obj.value, u)
    return float(np.linalg.norm(g - ref) / max(np.linalg.norm(ref), 1e-12))


def lq_oracle(p):
    """Closed-form min sum u'Vu subject to x_K = goal for a constant linear model.

    x_K = x_0 + sum_t B u_t, so with J = [B ... B] the optimum is
    u = V^-1 J' (J V^-1 J')^-1 (goal - x_0).
    """
    B = p.process.input_matrix * p.process.dt
    Vinv = np.linalg.inv(p.V)                          # (K, n_u, n_u)
    S = sum(B @ Vinv[t] @ B.T for t in range(p.K))
    lam = np.linalg.solve(S, p.goal - p.x_map)
    u = np.stack([Vinv[t] @ B.T @ lam for t in range(p.K)])
    return u, float(np.sum(np.einsum("ti,tij,tj->t", u, p.V, u)))


def lq_penalty_oracle(p):
    """Closed-form minimizer of sum u'Vu + lambda |x_K - goal|^2 (stacked normal equations)."""
    B = p.process.input_matrix * p.process.dt
    J = np.hstack([B] * p.K)
    Vbar = np.zeros((p.K * p.n_u, p.K * p.n_u))
    for t in range(p.K):
        Vbar[t * p.n_u:(t + 1) * p.n_u, t * p.n_u:(t + 1) * p.n_u] = p.V[t]
    lhs = Vbar + p.lambda_g * J.T @ J
    return np.linalg.solve(lhs, p.lambda_g * J.T @ (p.goal - p.x_map)).reshape(p.K, p.n_u)


class PositionObservation:
    """z = x + v: a linear observation so that a Kalman filter is exact."""

    def __init__(self, std):
        self.noise_std = np.asarray(std, dtype=float)

    def predict(self, X):
        return np.asarray(X, dtype=float)[..., :2]

    def residual(self, z, zhat):
        return np.asarray(z) - np.asarray(zhat)


def kalman(mean, cov, us, zs, dt, q_std, r_std):
    Q = np.diag(np.asarray(q_std) ** 2 * dt)
    R = np.diag(np.asarray(r_std) ** 2)
    for u, z in zip(us, zs):
        mean = mean + u * dt
        cov = cov + Q
        K = cov @ np.linalg.inv(cov + R)
        mean = mean + K @ (z - mean)
        cov = (np.eye(2) - K) @ cov
    return mean
