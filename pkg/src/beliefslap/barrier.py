"""Obstacle barrier function and its line-integral cost.

Each ellipse contributes an exponential "territory" term plus inverse-square
singular points spread along both of its axes.  The singular terms are capped
so every evaluation stays finite; inside a capped region the gradient of that
term is taken as zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import axis_endpoints


@dataclass(frozen=True)
class ObfParams:
    M: float = 10.0
    q: int = 2
    m: int = 10
    cap: float = 1e9
    n_seg: int = 5
    interior_points: bool = False

    def __post_init__(self):
        if self.M <= 0 or self.q < 1 or self.m < 1 or self.n_seg < 1:
            raise ValueError("M, q, m and n_seg must be positive")
        if self.cap < 1e6 * self.M:
            raise ValueError("cap must be at least 1e6 * M")


def singular_points(e, params: ObfParams):
    """Points on the major and minor axes (theta = 0, 1/m, ..., 1)."""
    z1, z2, x1, x2 = axis_endpoints(e)
    theta = np.linspace(0.0, 1.0, params.m + 1)[:, None]
    major = theta * z1 + (1 - theta) * z2
    minor = theta * x1 + (1 - theta) * x2
    pts = [major, minor]
    if params.interior_points:
        pts.append(0.5 * (major[:, None, :] + minor[None, :, :]).reshape(-1, 2))
    return np.vstack(pts)


class ObstacleField:
    """Packed obstacle sets for T time slices (T = 1 for a static map).

    Slices may hold different numbers of obstacles; short slices are padded
    with masked entries.
    """

    def __init__(self, schedule, params: ObfParams):
        self.params = params
        T = len(schedule)
        nb = max((len(s) for s in schedule), default=0)
        S = 2 * (params.m + 1) + ((params.m + 1) ** 2 if params.interior_points else 0)
        self.T, self.nb = T, nb
        self.centers = np.zeros((T, nb, 2))
        self.P = np.tile(np.eye(2), (T, nb, 1, 1))
        self.sing = np.full((T, nb, S, 2), 1e6)
        self.mask = np.zeros((T, nb))
        for t, obstacles in enumerate(schedule):
            for i, e in enumerate(obstacles):
                self.centers[t, i] = e.center
                self.P[t, i] = e.P
                self.sing[t, i] = singular_points(e, params)
                self.mask[t, i] = 1.0
        self.sing_rel = self.sing - self.centers[:, :, None, :]
        self.sing_sq = np.sum(self.sing_rel ** 2, axis=-1)

    @classmethod
    def static(cls, obstacles, params):
        return cls([list(obstacles)], params)

    def evaluate(self, X, gradient=True):
        """Barrier value (and gradient) at points X of shape (T or 1, Q, 2).

        Returns (value (T, Q), grad (T, Q, 2) or None, capped (T, Q) bool).
        """
        X = np.asarray(X, dtype=float)
        p = self.params
        if self.nb == 0:
            T, Q = max(X.shape[0], self.T), X.shape[1]
            z = np.zeros((T, Q))
            return z, (np.zeros((T, Q, 2)) if gradient else None), z.astype(bool)
        d = X[:, :, None, :] - self.centers[:, None, :, :]
        Pd = (self.P[:, None] @ d[..., None])[..., 0]
        s = np.sum(d * Pd, axis=-1)
        E = np.exp(-s ** p.q)
        mask = self.mask[:, None, :]
        value = np.sum(mask * E, axis=-1)

        # |d - o|^2 expanded about the obstacle center, o = singular point offset;
        # laid out as (T, nb, Q, S) so the cross term is a batched matmul
        T = d.shape[0]
        rel = np.broadcast_to(self.sing_rel, (T,) + self.sing_rel.shape[1:])
        dt = np.ascontiguousarray(d.transpose(0, 2, 1, 3))
        dd = np.sum(dt * dt, axis=-1)
        r2 = dd[..., None] + self.sing_sq[:, :, None, :] - 2 * (dt @ rel.transpose(0, 1, 3, 2))
        limit = p.cap / p.M
        capped_pts = r2 * limit <= 1.0
        any_cap = bool(capped_pts.any())
        if any_cap:
            inv = np.where(capped_pts, limit, 1.0 / np.where(capped_pts, 1.0, r2))
        else:
            inv = 1.0 / r2
        mask_b = self.mask[:, :, None]
        value = value + np.sum(inv.sum(axis=-1) * mask_b, axis=1)
        if any_cap:
            capped = np.any(capped_pts & (mask_b[..., None] > 0), axis=(1, 3))
        else:
            capped = np.zeros(value.shape, dtype=bool)
        value = p.M * value
        if not gradient:
            return value, None, capped
        dE = (-2.0 * p.q) * (E * s ** (p.q - 1))[..., None] * Pd
        coef = -2.0 * inv * inv
        if any_cap:
            coef[capped_pts] = 0.0
        coef *= mask_b[..., None]
        gsing = dt * coef.sum(axis=-1)[..., None] - coef @ rel
        grad = np.sum(mask[..., None] * dE, axis=-2) + gsing.sum(axis=1)
        return value, p.M * grad, capped

    def segment_costs(self, A, B):
        """Midpoint-rule line integrals along segments A -> B.

        A, B have shape (T or 1, G, 2).  Returns cost (T, G), d cost/dA,
        d cost/dB (T, G, 2) and a (T, G) flag marking capped samples.
        """
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        n = self.params.n_seg
        s = (np.arange(n) + 0.5) / n
        D = B - A
        T, G = D.shape[0], D.shape[1]
        X = A[:, :, None, :] + s[:, None] * D[:, :, None, :]
        phi, grad, capped = self.evaluate(X.reshape(T, G * n, 2))
        T = phi.shape[0]
        phi = phi.reshape(T, G, n)
        grad = grad.reshape(T, G, n, 2)
        L = np.linalg.norm(D, axis=-1)
        mean_phi = phi.mean(axis=-1)
        unit = np.divide(D, L[..., None], out=np.zeros_like(D), where=L[..., None] > 0)
        cost = L * mean_phi
        w_b = s[:, None]
        dA = -unit * mean_phi[..., None] + L[..., None] * np.mean((1 - w_b) * grad, axis=-2)
        dB = unit * mean_phi[..., None] + L[..., None] * np.mean(w_b * grad, axis=-2)
        return cost, dA, dB, capped.reshape(T, G, n).any(axis=-1)


def obf_value(obstacles, params: ObfParams, x) -> float:
    field = ObstacleField.static(obstacles, params)
    return float(field.evaluate(np.asarray(x, dtype=float).reshape(1, 1, 2), gradient=False)[0][0, 0])


def obf_gradient(obstacles, params: ObfParams, x):
    field = ObstacleField.static(obstacles, params)
    return field.evaluate(np.asarray(x, dtype=float).reshape(1, 1, 2))[1][0, 0]


def obstacle_cost(obstacles, params: ObfParams, x1, x2) -> float:
    field = ObstacleField.static(obstacles, params)
    a = np.asarray(x1, dtype=float).reshape(1, 1, 2)
    b = np.asarray(x2, dtype=float).reshape(1, 1, 2)
    return float(field.segment_costs(a, b)[0][0, 0])


def obstacle_cost_gradient(obstacles, params: ObfParams, x1, x2):
    """Gradients of ``obstacle_cost`` with respect to both endpoints."""
    field = ObstacleField.static(obstacles, params)
    a = np.asarray(x1, dtype=float).reshape(1, 1, 2)
    b = np.asarray(x2, dtype=float).reshape(1, 1, 2)
    _, dA, dB, _ = field.segment_costs(a, b)
    return dA[0, 0], dB[0, 0]


def obstacle_cost_dynamic(schedule, params: ObfParams, x1, x2, t: int) -> float:
    """Line integral using the obstacle set predicted for time index t."""
    if not 0 <= t < len(schedule):
        raise IndexError(f"time index {t} outside schedule of length {len(schedule)}")
    return obstacle_cost(schedule[t], params, x1, x2)
