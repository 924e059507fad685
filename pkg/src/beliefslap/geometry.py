"""Planar obstacle geometry: polygons, enclosing ellipsoids and their motion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateGeometryError


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """The set ``{x : (x - c)^T P (x - c) <= 1}``."""

    center: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(2)
        P = np.asarray(self.P, dtype=float).reshape(2, 2)
        P = 0.5 * (P + P.T)
        if np.linalg.eigvalsh(P)[0] <= 0:
            raise DegenerateGeometryError("ellipsoid shape matrix must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "P", P)

    @classmethod
    def circle(cls, center, radius):
        return cls(center, np.eye(2) / radius ** 2)

    def quad(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", d, self.P, d)

    @property
    def semi_axes(self):
        """Semi-axis lengths, longest first."""
        return 1.0 / np.sqrt(np.linalg.eigvalsh(self.P))

    def endpoints(self):
        return axis_endpoints(self)

    def transformed(self, R, center):
        return Ellipsoid(center, R @ self.P @ R.T)

    def boundary(self, n=64):
        """n points on the boundary, counter-clockwise."""
        lam, V = np.linalg.eigh(self.P)
        phi = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        circ = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return self.center + (circ / np.sqrt(lam)) @ V.T

    def to_dict(self):
        return {"center": self.center.tolist(), "P": self.P.tolist()}

    def __repr__(self):
        return f"Ellipsoid(center={self.center.tolist()}, P={self.P.tolist()})"


def axis_endpoints(e: Ellipsoid):
    """Return (zeta1, zeta2, xi1, xi2): major-axis then minor-axis endpoints."""
    lam, V = np.linalg.eigh(e.P)
    # eigh sorts ascending, so column 0 (smallest eigenvalue) is the major axis
    major = V[:, 0] / np.sqrt(lam[0])
    minor = V[:, 1] / np.sqrt(lam[1])
    c = e.center
    return c + major, c - major, c + minor, c - minor


def contains(e: Ellipsoid, x) -> bool:
    return bool(e.quad(x) <= 1.0)


def segment_intersects(e: Ellipsoid, a, b) -> bool:
    """True iff the closed segment [a, b] meets the closed ellipsoid."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    r = a - e.center
    qa = d @ e.P @ d
    if qa <= 0:
        raise ValueError("segment endpoints must differ")
    qb = 2 * (r @ e.P @ d)
    qc = r @ e.P @ r
    s = np.clip(-qb / (2 * qa), 0.0, 1.0)
    return bool(qa * s * s + qb * s + qc <= 1.0)


def segments_intersect(centers, Ps, A, B):
    """Vectorized ``segment_intersects``: (n_e,) ellipses against (n_s,) segments.

    Returns an (n_s, n_e) boolean array.  Zero-length segments reduce to a
    containment test of their endpoint.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    Ps = np.asarray(Ps, dtype=float).reshape(-1, 2, 2)
    A = np.asarray(A, dtype=float).reshape(-1, 2)
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    d = (B - A)[:, None, :]
    r = A[:, None, :] - centers[None]
    Pd = np.einsum("eij,sej->sei", Ps, np.broadcast_to(d, r.shape))
    Pr = np.einsum("eij,sej->sei", Ps, r)
    qa = np.sum(d * Pd, axis=-1)
    qb = 2 * np.sum(r * Pd, axis=-1)
    qc = np.sum(r * Pr, axis=-1)
    s = np.clip(np.divide(-qb, 2 * qa, out=np.zeros_like(qa), where=qa > 0), 0.0, 1.0)
    return qa * s * s + qb * s + qc <= 1.0


def distance_to(e: Ellipsoid, x) -> float:
    """Euclidean distance from x to the ellipsoid (0 inside)."""
    x = np.asarray(x, dtype=float)
    if e.quad(x) <= 1.0:
        return 0.0
    lam, V = np.linalg.eigh(e.P)
    ax = 1.0 / np.sqrt(lam)

    def dist(phi):
        p = e.center + V @ (ax * np.array([np.cos(phi), np.sin(phi)]))
        return np.linalg.norm(p - x)

    grid = np.linspace(0, 2 * np.pi, 73)
    vals = [dist(g) for g in grid]
    k = int(np.argmin(vals))
    res = minimize_scalar(dist, bounds=(grid[k] - 0.1, grid[k] + 0.1), method="bounded",
                          options={"xatol": 1e-10})
    return float(min(res.fun, vals[k]))


def ball_intersects(e: Ellipsoid, x, radius) -> bool:
    if radius <= 0:
        return contains(e, x)
    return distance_to(e, x) <= radius


# -- minimum volume enclosing ellipsoid ---------------------------------------

def mvee(points, tol=1e-7, max_iter=10000) -> Ellipsoid:
    """Minimum-volume enclosing ellipse of a planar point set.

    Khachiyan's barycentric coordinate-ascent with Todd-Yildirim away steps.
    Iteration stops once the duality gap ``max_j g_j / (d+1) - 1`` is below
    ``tol``; the result is then scaled so that every point lies inside.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise DegenerateGeometryError("points must be an (n, 2) array")
    X = np.unique(X, axis=0)
    n, d = X.shape
    if n < d + 1 or np.linalg.matrix_rank(X - X.mean(axis=0), tol=1e-10) < d:
        raise DegenerateGeometryError("points are not affinely independent")
    if tol <= 0:
        raise ValueError("tol must be positive")

    Q = np.vstack([X.T, np.ones(n)])
    u = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        M = Q @ (u[:, None] * Q.T)
        g = np.einsum("ij,ji->i", Q.T, np.linalg.solve(M, Q))
        j = int(np.argmax(g))
        if g[j] / (d + 1) - 1.0 <= tol:
            break
        support = np.flatnonzero(u > 0)
        k = support[int(np.argmin(g[support]))]
        if g[j] - (d + 1) >= (d + 1) - g[k]:
            step = (g[j] - d - 1) / ((d + 1) * (g[j] - 1))
            u *= 1 - step
            u[j] += step
        else:
            # away step, capped so u[k] stays non-negative
            step = min((d + 1 - g[k]) / ((d + 1) * (g[k] - 1)), u[k] / (1 - u[k]))
            u *= 1 + step
            u[k] -= step
            u[k] = max(u[k], 0.0)
    c = X.T @ u
    S = (X.T * u) @ X - np.outer(c, c)
    P = np.linalg.inv(S) / d
    scale = np.max(np.einsum("ij,jk,ik->i", X - c, P, X - c))
    if scale > 1.0:
        P = P / scale
    return Ellipsoid(c, P)


# -- polygons -----------------------------------------------------------------

def _signed_area(V):
    x, y = V[:, 0], V[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


def is_simple(V) -> bool:
    n = len(V)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(V[i], V[(i + 1) % n], V[j], V[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True, eq=False)
class Polygon:
    vertices: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or V.shape[0] < 3:
            raise DegenerateGeometryError("a polygon needs at least 3 planar vertices")
        if abs(_signed_area(V)) < 1e-14 or not is_simple(V):
            raise DegenerateGeometryError("polygon must be simple with non-zero area")
        object.__setattr__(self, "vertices", V)

    def edges(self):
        return zip(self.vertices, np.roll(self.vertices, -1, axis=0))


def inflate(poly: Polygon, radius: float) -> Polygon:
    """Push every vertex outward along its bisector so edges move out by ``radius``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return Polygon(poly.vertices.copy())
    V = poly.vertices
    sign = 1.0 if _signed_area(V) > 0 else -1.0
    edge = np.roll(V, -1, axis=0) - V
    edge /= np.linalg.norm(edge, axis=1)[:, None]
    # outward normal of a counter-clockwise edge (dx, dy) is (dy, -dx)
    normal = sign * np.stack([edge[:, 1], -edge[:, 0]], axis=1)
    n_prev, n_next = np.roll(normal, 1, axis=0), normal
    denom = 1.0 + np.sum(n_prev * n_next, axis=1)
    if np.any(denom < 1e-9):
        raise DegenerateGeometryError("polygon has a zero-angle spike")
    out = V + radius * (n_prev + n_next) / denom[:, None]
    if not is_simple(out) or np.sign(_signed_area(out)) != sign:
        raise DegenerateGeometryError("inflation makes the polygon self-intersect")
    return Polygon(out)


def inflate_ellipsoid(e: Ellipsoid, radius: float, n=64) -> Ellipsoid:
    """Enclosing ellipse of the boundary offset outward by ``radius``."""
    if radius <= 0:
        return e
    pts = e.boundary(n)
    normal = (pts - e.center) @ e.P
    normal /= np.linalg.norm(normal, axis=1)[:, None]
    # a chord between samples can cut inside the offset curve; pad by the sagitta
    return mvee(pts + (radius + _sagitta(e, n)) * normal)


def _sagitta(e, n):
    return float(e.semi_axes[0] * (1 - np.cos(np.pi / n)))


# -- moving obstacles ---------------------------------------------------------

@dataclass(frozen=True)
class Keyframe:
    t: float
    center: tuple
    angle: float = 0.0


@dataclass(frozen=True, eq=False)
class ObstacleTrack:
    """An obstacle with constant-velocity/rotation motion or keyframed motion.

    ``base`` is the ellipse at time 0.  With keyframes, the pose at time t is
    linearly interpolated (held constant outside the keyframe range) and the
    instantaneous velocity is that of the active keyframe interval.
    """

    base: Ellipsoid
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    rotation_rate: float = 0.0
    keyframes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(2))
        object.__setattr__(self, "keyframes", tuple(sorted(self.keyframes, key=lambda k: k.t)))

    @property
    def is_static(self):
        return not self.keyframes and not np.any(self.velocity) and self.rotation_rate == 0

    def pose(self, t):
        """(center, angle, velocity, rotation_rate) at absolute time t."""
        if not self.keyframes:
            c = self.base.center + self.velocity * t
            return c, self.rotation_rate * t, self.velocity, self.rotation_rate
        ks = self.keyframes
        if t <= ks[0].t or len(ks) == 1:
            k = ks[0]
            return np.asarray(k.center, float), k.angle, np.zeros(2), 0.0
        if t >= ks[-1].t:
            k = ks[-1]
            return np.asarray(k.center, float), k.angle, np.zeros(2), 0.0
        i = int(np.searchsorted([k.t for k in ks], t, side="right")) - 1
        a, b = ks[i], ks[i + 1]
        span = b.t - a.t
        s = (t - a.t) / span
        ca, cb = np.asarray(a.center, float), np.asarray(b.center, float)
        return ca + s * (cb - ca), a.angle + s * (b.angle - a.angle), (cb - ca) / span, (b.angle - a.angle) / span

    def at(self, t, noise_std=0.0, rng=None) -> "ObstacleTrack":
        """Re-anchor at time t: current pose becomes the base, rates are frozen."""
        c, ang, v, w = self.pose(t)
        if noise_std > 0:
            c = c + rng.normal(0.0, noise_std, 2)
        return ObstacleTrack(self.base.transformed(rotation(ang), c), v, w)

    def ellipsoid_at(self, t) -> Ellipsoid:
        c, ang, _, _ = self.pose(t)
        return self.base.transformed(rotation(ang), c)


def predict_obstacle(track: ObstacleTrack, dt: float) -> Ellipsoid:
    """Constant-velocity, constant-rotation extrapolation of ``track.base``.

    The shape is rotated by the similarity ``R P R^T`` so it stays symmetric
    positive definite.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return track.base
    R = rotation(track.rotation_rate * dt)
    return track.base.transformed(R, track.base.center + track.velocity * dt)
