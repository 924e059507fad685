"""Weighted-particle belief and the Bayes filter used in the closed loop."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FilterDivergenceError

# log of the smallest positive double; likelihoods below this underflow
_LOG_TINY = np.log(np.finfo(float).tiny)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class ParticleBelief:
    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.particles, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if p.shape[0] < 1:
            raise ValueError("belief needs at least one particle")
        if w.shape != (p.shape[0],):
            raise ValueError("one weight per particle required")
        if np.any(w < 0) or not np.all(np.isfinite(p)):
            raise ValueError("weights must be non-negative and particles finite")
        s = w.sum()
        if not abs(s - 1.0) < 1e-9:
            if s <= 0:
                raise ValueError("weights sum to zero")
            w = w / s
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "particles", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, particles):
        particles = np.atleast_2d(np.asarray(particles, dtype=float))
        n = particles.shape[0]
        return cls(particles, np.full(n, 1.0 / n))

    @classmethod
    def sample_gaussian(cls, mean, std, n, seed=None):
        rng = _rng(seed)
        mean = np.asarray(mean, dtype=float)
        pts = mean + rng.standard_normal((n, mean.size)) * np.asarray(std, dtype=float)
        return cls.uniform(pts)

    @property
    def n(self):
        return self.particles.shape[0]

    def mean(self):
        return self.weights @ self.particles

    def covariance(self):
        d = self.particles - self.mean()
        return (d * self.weights[:, None]).T @ d


def predict(b: ParticleBelief, model, u, seed=None) -> ParticleBelief:
    """Propagate every particle through the process model with fresh noise."""
    rng = _rng(seed)
    W = rng.standard_normal(b.particles.shape)
    return ParticleBelief(model.step_many(b.particles, np.asarray(u, dtype=float), W), b.weights)


def update(b: ParticleBelief, model, z) -> ParticleBelief:
    """Reweight by the Gaussian observation likelihood (bearing residuals wrapped)."""
    res = model.residual(z, model.predict(b.particles))
    loglik = -0.5 * np.sum((res / model.noise_std) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        logw = np.log(b.weights) + loglik
    top = np.max(logw)
    if not np.isfinite(top) or top < _LOG_TINY:
        raise FilterDivergenceError("all particle likelihoods underflow")
    w = np.exp(logw - top)
    return ParticleBelief(b.particles, w / w.sum())


def systematic_indices(weights, rng):
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions, side="right")


def resample(b: ParticleBelief, seed=None) -> ParticleBelief:
    """Systematic (low-variance) resampling to uniform weights."""
    idx = systematic_indices(b.weights, _rng(seed))
    return ParticleBelief.uniform(b.particles[idx])


def effective_sample_size(b: ParticleBelief) -> float:
    return float(1.0 / np.sum(b.weights ** 2))


def map_estimate(b: ParticleBelief):
    """Particle with the largest weighted Gaussian-KDE density.

    Bandwidths follow Silverman's rule per axis, using the weighted standard
    deviation and the effective sample size.
    """
    X, w = b.particles, b.weights
    n, d = X.shape
    std = np.sqrt(np.maximum(w @ (X - w @ X) ** 2, 0.0))
    n_eff = effective_sample_size(b)
    h = std * (4.0 / ((d + 2) * n_eff)) ** (1.0 / (d + 4))
    live = h > 1e-12
    if not np.any(live):
        return X[int(np.argmax(w))].copy()
    Z = X[:, live] / h[live]
    sq = np.sum(Z * Z, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * Z @ Z.T, 0.0)
    density = np.exp(-0.5 * d2) @ w
    # argmax picks the lowest index among exact ties
    return X[int(np.argmax(density))].copy()


def goal_probability(b: ParticleBelief, goal, radius) -> float:
    """Weight mass of particles whose position lies within ``radius`` of the goal."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    goal = np.asarray(goal, dtype=float)
    dist = np.linalg.norm(b.particles[:, :2] - goal[:2], axis=1)
    return float(np.sum(b.weights[dist <= radius]))


@dataclass(frozen=True)
class StoppingRule:
    radius: float
    threshold: float = 0.9
    max_steps: int = 200

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")

    def reached(self, b, goal):
        return goal_probability(b, goal, self.radius) > self.threshold
