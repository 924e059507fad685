"""Process and observation models.

Process models are holonomic and of the form ``x' = x + B u dt + G w sqrt(dt)``
(the single integrator and the omnidirectional youBot base are both
instances).  The observation model returns range and/or bearing readings to a
set of point landmarks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateObservationError, DimensionError

TWO_PI = 2.0 * np.pi

# youBot base geometry (vendor datasheet values, meters)
YOUBOT_WHEEL_RADIUS = 0.0475
YOUBOT_HALF_LENGTH = 0.235
YOUBOT_HALF_WIDTH = 0.15


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    return -((-np.asarray(a, dtype=float) + np.pi) % TWO_PI - np.pi)


def _as_vector(v, n, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise DimensionError(f"{name} must have shape ({n},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


@dataclass(frozen=True)
class Linearization:
    """Affine model ``x' = A x + B u + fp + G w`` about a nominal point."""

    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    fp: np.ndarray


@dataclass(eq=False)
class HolonomicModel:
    """Holonomic process model ``x' = x + B u dt + G w sqrt(dt)``.

    ``input_matrix`` is the continuous-time B, ``noise_std`` the diagonal of G
    (``w`` is standard normal).  The robot body is covered by balls whose
    centers sit at ``body_offsets`` in the body frame; with no heading the
    offsets are applied in the world frame.
    """

    input_matrix: np.ndarray
    noise_std: np.ndarray
    dt: float
    max_u: float
    heading_index: int | None = None
    body_offsets: np.ndarray = field(default_factory=lambda: np.zeros((1, 2)))
    body_radius: float = 0.0
    kind: str = "holonomic"

    def __post_init__(self):
        self.input_matrix = np.atleast_2d(np.asarray(self.input_matrix, dtype=float))
        self.noise_std = np.asarray(self.noise_std, dtype=float)
        self.body_offsets = np.atleast_2d(np.asarray(self.body_offsets, dtype=float))
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_u <= 0:
            raise ValueError("max_u must be positive")
        if self.noise_std.shape != (self.n_x,):
            raise DimensionError("noise_std must have one entry per state")
        if np.any(self.noise_std < 0):
            raise ValueError("noise_std must be non-negative")

    @property
    def n_x(self):
        return self.input_matrix.shape[0]

    @property
    def n_u(self):
        return self.input_matrix.shape[1]

    @property
    def G(self):
        return np.diag(self.noise_std)

    @property
    def max_speed(self):
        """Largest planar speed reachable with ``||u|| <= max_u``."""
        return float(np.linalg.norm(self.input_matrix[:2], 2) * self.max_u)

    def step(self, x, u, w=None):
        x = _as_vector(x, self.n_x, "x")
        u = _as_vector(u, self.n_u, "u")
        out = x + self.input_matrix @ u * self.dt
        if w is not None:
            w = _as_vector(w, self.n_x, "w")
            out = out + self.noise_std * w * np.sqrt(self.dt)
        return self.normalize(out)

    def step_many(self, X, u, W):
        """Vectorized ``step`` for an (N, n_x) particle array."""
        out = X + (self.input_matrix @ u) * self.dt + W * self.noise_std * np.sqrt(self.dt)
        return self.normalize(out)

    def normalize(self, X):
        X = np.array(X, dtype=float, copy=True)
        if self.heading_index is not None:
            X[..., self.heading_index] = wrap_angle(X[..., self.heading_index])
        return X

    def jacobians(self, x, u):
        """A, B, G of the discrete step at (x, u, 0)."""
        return (
            np.eye(self.n_x),
            self.input_matrix * self.dt,
            self.G * np.sqrt(self.dt),
        )

    def linearize(self, x_p, u_p) -> Linearization:
        x_p = _as_vector(x_p, self.n_x, "x_p")
        u_p = _as_vector(u_p, self.n_u, "u_p")
        A, B, G = self.jacobians(x_p, u_p)
        # offset is computed without heading wrap so that the affine model is exact
        f0 = x_p + self.input_matrix @ u_p * self.dt
        return Linearization(A, B, G, f0 - A @ x_p - B @ u_p)

    def body_points(self, X):
        """Ball centers for states X (..., n_x) -> (..., n_balls, 2)."""
        X = np.asarray(X, dtype=float)
        pos = X[..., None, :2]
        if self.heading_index is None:
            return pos + self.body_offsets
        th = X[..., self.heading_index]
        c, s = np.cos(th)[..., None], np.sin(th)[..., None]
        ox, oy = self.body_offsets[:, 0], self.body_offsets[:, 1]
        rot = np.stack([c * ox - s * oy, s * ox + c * oy], axis=-1)
        return pos + rot

    def body_jacobian(self, X):
        """d(ball center)/dx for states X (..., n_x) -> (..., n_balls, 2, n_x)."""
        X = np.asarray(X, dtype=float)
        nb = self.body_offsets.shape[0]
        J = np.zeros(X.shape[:-1] + (nb, 2, self.n_x))
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = 1.0
        if self.heading_index is not None:
            th = X[..., self.heading_index]
            c, s = np.cos(th)[..., None], np.sin(th)[..., None]
            ox, oy = self.body_offsets[:, 0], self.body_offsets[:, 1]
            J[..., 0, self.heading_index] = -s * ox - c * oy
            J[..., 1, self.heading_index] = c * ox - s * oy
        return J

    def state_difference(self, a, b):
        """a - b with the heading entry wrapped."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        if self.heading_index is not None:
            d = np.array(d, copy=True)
            d[..., self.heading_index] = wrap_angle(d[..., self.heading_index])
        return d

    def controls_for_displacement(self, dx):
        """Least-norm u with ``B u dt = dx`` (exact when B has full row rank)."""
        dx = np.asarray(dx, dtype=float)
        sol, *_ = np.linalg.lstsq(self.input_matrix * self.dt, dx.T, rcond=None)
        return sol.T


def single_integrator(dt=0.1, noise_std=(0.01, 0.01), max_u=1.0, body_radius=0.0):
    noise_std = np.asarray(noise_std, dtype=float)
    n = noise_std.size
    return HolonomicModel(
        input_matrix=np.eye(n),
        noise_std=noise_std,
        dt=dt,
        max_u=max_u,
        body_radius=body_radius,
        kind="single_integrator",
    )


def youbot_input_matrix(wheel_radius=YOUBOT_WHEEL_RADIUS,
                        half_length=YOUBOT_HALF_LENGTH,
                        half_width=YOUBOT_HALF_WIDTH):
    """Maps the four mecanum wheel rates to (vx, vy, omega)."""
    k = 1.0 / (half_length + half_width)
    return (wheel_radius / 4.0) * np.array([
        [1.0, 1.0, 1.0, 1.0],
        [-1.0, 1.0, -1.0, 1.0],
        [-k, k, k, -k],
    ])


def youbot(dt=0.1, noise_std=(0.005, 0.005, 0.005), max_u=20.0,
           wheel_radius=YOUBOT_WHEEL_RADIUS, half_length=YOUBOT_HALF_LENGTH,
           half_width=YOUBOT_HALF_WIDTH, ball_offset=0.15, ball_radius=0.24):
    """KUKA youBot base; the body is covered by two balls along its long axis."""
    return HolonomicModel(
        input_matrix=youbot_input_matrix(wheel_radius, half_length, half_width),
        noise_std=np.asarray(noise_std, dtype=float),
        dt=dt,
        max_u=max_u,
        heading_index=2,
        body_offsets=np.array([[ball_offset, 0.0], [-ball_offset, 0.0]]),
        body_radius=ball_radius,
        kind="youbot",
    )


# -- observation model ------------------------------------------------------

WEIGHTINGS = ("squared_distance", "unit", "gaussian")


@dataclass(eq=False)
class RangeBearingModel:
    """Range and/or bearing readings to point landmarks.

    Readings are ordered landmark-major: for each landmark, one entry per
    reading type in ``readings``.  Bearings are world-frame ``atan2`` minus
    the heading (zero heading for point robots).
    """

    landmarks: np.ndarray
    readings: tuple = ("range", "bearing")
    range_std: float = 0.05
    bearing_std: float = 0.05
    heading_index: int | None = None
    weighting: str = "squared_distance"

    def __post_init__(self):
        self.landmarks = np.atleast_2d(np.asarray(self.landmarks, dtype=float))
        self.readings = tuple(self.readings)
        if self.landmarks.shape[0] < 1 or self.landmarks.shape[1] != 2:
            raise DimensionError("landmarks must be an (n, 2) array with n >= 1")
        if not self.readings or any(r not in ("range", "bearing") for r in self.readings):
            raise ValueError("readings must be a non-empty subset of ('range', 'bearing')")
        if self.range_std <= 0 or self.bearing_std <= 0:
            raise ValueError("noise std devs must be positive")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}")
        # per-reading lookups, built once; the planner evaluates them many times per solve
        self._index = np.repeat(np.arange(self.landmarks.shape[0]), len(self.readings))
        self._bearing = np.tile([r == "bearing" for r in self.readings], self.landmarks.shape[0])
        self._points = self.landmarks[self._index]

    @property
    def n_z(self):
        return self.landmarks.shape[0] * len(self.readings)

    @property
    def reading_landmark(self):
        return self._index

    @property
    def is_bearing(self):
        return self._bearing

    @property
    def noise_std(self):
        return np.where(self.is_bearing, self.bearing_std, self.range_std)

    def _offsets(self, X):
        # (..., n_z, 2): state position minus the reading's landmark
        X = np.asarray(X, dtype=float)
        return X[..., None, :2] - self._points

    def predict(self, X):
        """Noise-free readings for states X (..., n_x) -> (..., n_z)."""
        X = np.asarray(X, dtype=float)
        d = self._offsets(X)
        rng = np.hypot(d[..., 0], d[..., 1])
        bearing = np.arctan2(-d[..., 1], -d[..., 0])
        if self.heading_index is not None:
            bearing = bearing - X[..., self.heading_index][..., None]
        return np.where(self.is_bearing, wrap_angle(bearing), rng)

    def observe(self, x, nu=None):
        x = np.asarray(x, dtype=float)
        if np.any(np.all(np.isclose(self.landmarks, x[:2], rtol=0, atol=1e-12), axis=1)):
            raise DegenerateObservationError(f"state {x[:2]} coincides with a landmark")
        z = self.predict(x)
        if nu is not None:
            z = z + np.asarray(nu, dtype=float)
        return np.where(self.is_bearing, wrap_angle(z), z)

    def residual(self, z, zhat):
        r = np.asarray(z, dtype=float) - np.asarray(zhat, dtype=float)
        return np.where(self.is_bearing, wrap_angle(r), r)

    def _derivatives(self, X, n_x):
        """Jacobian rows and Hessians; zero at landmark coincidence."""
        X = np.asarray(X, dtype=float)
        d = self._offsets(X)
        dx, dy = d[..., 0], d[..., 1]
        r2 = dx * dx + dy * dy
        ok = r2 > 1e-18
        r2s = np.where(ok, r2, 1.0)
        r = np.sqrt(r2s)
        bear = self.is_bearing
        shape = X.shape[:-1] + (self.n_z, n_x)
        H = np.zeros(shape)
        H[..., 0] = np.where(bear, -dy / r2s, dx / r)
        H[..., 1] = np.where(bear, dx / r2s, dy / r)
        if self.heading_index is not None:
            H[..., self.heading_index] = np.where(bear, -1.0, 0.0)
        Hess = np.zeros(shape + (n_x,))
        r3 = r2s * r
        r4 = r2s * r2s
        Hess[..., 0, 0] = np.where(bear, 2 * dx * dy / r4, dy * dy / r3)
        Hess[..., 1, 1] = np.where(bear, -2 * dx * dy / r4, dx * dx / r3)
        off = np.where(bear, (dy * dy - dx * dx) / r4, -dx * dy / r3)
        Hess[..., 0, 1] = off
        Hess[..., 1, 0] = off
        H = np.where(ok[..., None], H, 0.0)
        Hess = np.where(ok[..., None, None], Hess, 0.0)
        return H, Hess

    def jacobian(self, x, n_x=None):
        x = np.asarray(x, dtype=float)
        if np.any(np.all(np.isclose(self.landmarks, x[:2], rtol=0, atol=1e-12), axis=1)):
            raise DegenerateObservationError(f"state {x[:2]} coincides with a landmark")
        return self._derivatives(x, n_x or x.shape[-1])[0]

    def jacobian_and_hessian(self, X, n_x):
        return self._derivatives(X, n_x)

    def weights(self, X):
        """Diagonal of the weighting matrix R(x) for states X -> (..., n_z)."""
        d = self._offsets(X)
        r2 = d[..., 0] ** 2 + d[..., 1] ** 2
        if self.weighting == "squared_distance":
            return r2
        if self.weighting == "gaussian":
            return np.exp(-r2)
        return np.ones_like(r2)

    def weights_gradient(self, X, n_x):
        """dR_j/dx -> (..., n_z, n_x)."""
        X = np.asarray(X, dtype=float)
        d = self._offsets(X)
        g = np.zeros(X.shape[:-1] + (self.n_z, n_x))
        if self.weighting == "squared_distance":
            g[..., :2] = 2 * d
        elif self.weighting == "gaussian":
            r2 = d[..., 0] ** 2 + d[..., 1] ** 2
            g[..., :2] = -2 * d * np.exp(-r2)[..., None]
        return g

    def weighting_matrix(self, x):
        return np.diag(self.weights(x))
