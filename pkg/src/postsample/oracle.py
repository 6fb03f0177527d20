"""Exact posteriors for Gaussian-mixture priors under additive white Gaussian noise.

These are the ground truth the Langevin chains are checked against, so the
code here deliberately shares nothing with :mod:`postsample.denoisers`
beyond the input spec types.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import RandomStream, ShapeError, Signal
from .denoisers import GaussianPrior, GMMPrior
from .schedule import NoiseSchedule, step_size


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d)
    variances: np.ndarray  # (k,) isotropic per component

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        mu = np.asarray(self.means, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
        var = np.asarray(self.variances, dtype=float).ravel()
        if not (w.size == mu.shape[0] == var.size):
            raise ShapeError("one weight, mean and variance per component")
        if np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(var < 0):
            raise ValueError("variances must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @classmethod
    def from_spec(cls, spec, dim: int | None = None) -> "GaussianMixture":
        if isinstance(spec, GaussianPrior):
            w, mu, var = np.ones(1), spec.mean[None, :], np.array([spec.variance])
        elif isinstance(spec, GMMPrior):
            w, mu, var = spec.weights, spec.means, spec.variances
        else:
            raise TypeError(f"no mixture form for {type(spec).__name__}")
        if dim is not None and mu.shape[1] != dim:
            if mu.shape[1] != 1:
                raise ShapeError(f"prior has dimension {mu.shape[1]}, need {dim}")
            mu = np.repeat(mu, dim, axis=1)
        return cls(w, mu, var)


def _as_vector(y) -> np.ndarray:
    return y.values if isinstance(y, Signal) else np.atleast_1d(np.asarray(y, dtype=float)).ravel()


def exact_posterior(prior: GaussianMixture, y, sigma0: float) -> GaussianMixture:
    """p(x | y) for y = x + N(0, sigma0^2 I); again a mixture of isotropic Gaussians."""
    y = _as_vector(y)
    if prior.dim != y.size:
        if prior.dim != 1:
            raise ShapeError(f"prior dimension {prior.dim} != observation length {y.size}")
        prior = GaussianMixture(prior.weights, np.repeat(prior.means, y.size, axis=1), prior.variances)
    d = y.size
    s0sq = sigma0 * sigma0
    tot = prior.variances + s0sq
    r = y[None, :] - prior.means
    logw = (
        np.log(prior.weights)
        - 0.5 * d * np.log(2 * np.pi * tot)
        - 0.5 * np.einsum("kd,kd->k", r, r) / tot
    )
    w = np.exp(logw - logsumexp(logw))
    w /= w.sum()
    gain = prior.variances / tot
    means = prior.means + gain[:, None] * r
    var = prior.variances * s0sq / tot
    return GaussianMixture(w, means, var)


def posterior_moments(post: GaussianMixture) -> tuple[np.ndarray, np.ndarray]:
    """Mean and per-coordinate variance by the law of total variance."""
    w = post.weights[:, None]
    mean = np.sum(w * post.means, axis=0)
    second = np.sum(w * (post.variances[:, None] + post.means**2), axis=0)
    return mean, second - mean**2


def direct_posterior_draws(post: GaussianMixture, stream: RandomStream, n: int) -> np.ndarray:
    """n exact draws, shape (n, d): n uniforms pick components, then n*d normals."""
    if n <= 0:
        raise ValueError("n must be positive")
    u = stream.uniform(n)
    cdf = np.cumsum(post.weights)
    cdf[-1] = 1.0
    comp = np.searchsorted(cdf, u, side="right")
    z = stream.normal(n * post.dim).reshape(n, post.dim)
    return post.means[comp] + np.sqrt(post.variances[comp])[:, None] * z


def direct_posterior_sample(
    post: GaussianMixture, stream: RandomStream, n: int, shape: tuple[int, int, int] | None = None
) -> list[Signal]:
    shape = shape or (post.dim, 1, 1)
    return [Signal(x, shape) for x in direct_posterior_draws(post, stream, n)]


QUAD_POINTS = 200_000
QUAD_SPAN = 10.0


def quadrature_moments_1d(prior: GaussianMixture, y: float, sigma0: float) -> tuple[float, float, np.ndarray]:
    """Posterior mean, variance and component-free normaliser by brute-force quadrature.

    Integrates prior(x) * N(y; x, sigma0^2) on a uniform grid of 2e5 points
    spanning +-10 combined standard deviations around the extreme prior means.
    Returns (mean, variance, grid_density) with the density normalised on the grid.
    """
    if prior.dim != 1:
        raise ShapeError("quadrature oracle is one-dimensional")
    mu = prior.means[:, 0]
    spread = QUAD_SPAN * np.sqrt(prior.variances.max() + sigma0**2)
    lo = min(mu.min(), y) - spread
    hi = max(mu.max(), y) + spread
    x = np.linspace(lo, hi, QUAD_POINTS)
    logp = logsumexp(
        np.log(prior.weights)[:, None]
        - 0.5 * np.log(2 * np.pi * prior.variances)[:, None]
        - 0.5 * (x[None, :] - mu[:, None]) ** 2 / prior.variances[:, None],
        axis=0,
    )
    logp = logp - 0.5 * (y - x) ** 2 / sigma0**2
    dens = np.exp(logp - logp.max())
    z = np.trapezoid(dens, x)
    dens /= z
    mean = np.trapezoid(x * dens, x)
    var = np.trapezoid((x - mean) ** 2 * dens, x)
    return float(mean), float(var), dens


def gaussian_chain_law(
    schedule: NoiseSchedule,
    prior_mean: float,
    prior_var: float,
    y: float,
    *,
    observed: bool = True,
    mode: str = "denoise",
) -> tuple[float, float]:
    """Exact mean and variance of one coordinate after the Langevin recursion.

    With a Gaussian prior every update is affine in x plus independent noise,
    x' = (1 - a P) x + a c + sqrt(2a) z, so the output law is Gaussian and its
    moments follow exactly. This separates discretisation/annealing bias from
    Monte Carlo noise. Inpainting starts from N(0, sigma_{-K}^2).
    """
    s0sq = schedule.sigma0**2
    if mode == "denoise":
        m, v = y, 0.0
        levels = range(1, schedule.L + 1)
    else:
        m, v = 0.0, float(schedule.sigmas[0]) ** 2
        levels = list(range(-schedule.K, 0)) + list(range(1, schedule.L + 1))
    for i in levels:
        s = schedule.sigma(i)
        a = step_size(schedule, i)
        pv = prior_var + s * s
        if i < 0:
            if observed:
                P, c = 1 / (s * s - s0sq), y / (s * s - s0sq)
            else:
                P, c = 1 / pv, prior_mean / pv
        else:
            P, c = 1 / pv, prior_mean / pv
            if observed:
                P += 1 / (s0sq - s * s)
                c += y / (s0sq - s * s)
        for _ in range(schedule.steps_per_level):
            m = (1 - a * P) * m + a * c
            v = (1 - a * P) ** 2 * v + 2 * a
    return m, v
