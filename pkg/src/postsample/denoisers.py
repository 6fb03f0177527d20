"""MMSE denoisers with closed-form posteriors, and the denoiser-to-score bridge.

Any object with a ``denoise(x, sigma)`` method mapping an array of shape
``(..., d)`` to the posterior mean E[x | x + N(0, sigma^2 I)] can drive the
samplers. The prior score at noise level sigma then follows from Tweedie's
identity::

    grad log p_sigma(x) = (denoise(x, sigma) - x) / sigma^2
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from .core import PostsampleError, ShapeError, Signal


class DenoiserSpecError(PostsampleError, ValueError):
    pass


@runtime_checkable
class Denoiser(Protocol):
    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray: ...


def _check_dim(x: np.ndarray, dim: int):
    if dim != 1 and x.shape[-1] != dim:
        raise ShapeError(f"denoiser expects dimension {dim}, got {x.shape[-1]}")


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    """Isotropic Gaussian prior N(mean, variance * I); ``mean`` may be a scalar."""

    mean: np.ndarray
    variance: float
    kind = "gaussian_prior"

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64)).ravel()
        if not np.all(np.isfinite(mean)):
            raise DenoiserSpecError("prior mean must be finite")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise DenoiserSpecError("prior variance must be positive")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def dim(self) -> int:
        return self.mean.size

    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        _check_dim(x, self.dim)
        shrink = self.variance / (self.variance + sigma * sigma)
        return self.mean + shrink * (x - self.mean)

    def to_dict(self) -> dict:
        mean = float(self.mean[0]) if self.mean.size == 1 else self.mean.tolist()
        return {"kind": self.kind, "mean": mean, "variance": self.variance}


@dataclass(frozen=True, eq=False)
class GMMPrior:
    """Mixture of isotropic Gaussians sum_k pi_k N(mu_k, s_k^2 I).

    ``means`` has shape (k, d); a single column (d == 1) broadcasts to any
    signal length as a constant vector.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    kind = "gmm_prior"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        mu = np.asarray(self.means, dtype=np.float64)
        if mu.ndim == 1:
            mu = mu[:, None]
        var = np.asarray(self.variances, dtype=np.float64).ravel()
        k = w.size
        if k == 0 or mu.shape[0] != k or var.size != k:
            raise DenoiserSpecError("weights, means and variances must have one entry per component")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DenoiserSpecError(f"weights must be positive and sum to 1 (sum = {w.sum()!r})")
        if np.any(~np.isfinite(var)) or np.any(var <= 0):
            raise DenoiserSpecError("component variances must be positive")
        if not np.all(np.isfinite(mu)):
            raise DenoiserSpecError("component means must be finite")
        for a in (w, mu, var):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.weights.size

    def _log_terms(self, x: np.ndarray, sigma: float) -> np.ndarray:
        # log pi_k + log N(x; mu_k, (s_k^2 + sigma^2) I), shape (..., k)
        d = x.shape[-1]
        tot = self.variances + sigma * sigma
        # one component at a time keeps temporaries at the size of x
        sq = np.stack([np.sum(np.square(x - m), axis=-1) for m in self.means], axis=-1)
        return np.log(self.weights) - 0.5 * d * np.log(2 * np.pi * tot) - 0.5 * sq / tot

    def responsibilities(self, x: np.ndarray, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        _check_dim(x, self.dim)
        logp = self._log_terms(x, sigma)
        logp = logp - logp.max(axis=-1, keepdims=True)
        w = np.exp(logp)
        return w / w.sum(axis=-1, keepdims=True)

    def log_marginal(self, x: np.ndarray, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        logp = self._log_terms(x, sigma)
        top = logp.max(axis=-1)
        return top + np.log(np.exp(logp - top[..., None]).sum(axis=-1))

    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        w = self.responsibilities(x, sigma)
        shrink = self.variances / (self.variances + sigma * sigma)
        # sum_k w_k (mu_k + shrink_k (x - mu_k)) = (sum_k w_k shrink_k) x + sum_k w_k (1 - shrink_k) mu_k
        out = np.sum(w * shrink, axis=-1)[..., None] * x
        coef = w * (1.0 - shrink)
        for k, m in enumerate(self.means):
            out += coef[..., k, None] * m
        return out

    def to_dict(self) -> dict:
        means = self.means[:, 0].tolist() if self.dim == 1 else self.means.tolist()
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "means": means,
            "variances": self.variances.tolist(),
        }


DenoiserSpec = GaussianPrior | GMMPrior


class CallableDenoiser:
    """Adapter for a plain ``f(x, sigma) -> x_hat`` function."""

    def __init__(self, fn: Callable[[np.ndarray, float], np.ndarray]):
        self.fn = fn

    def denoise(self, x, sigma):
        return self.fn(x, sigma)


def as_denoiser(obj) -> Denoiser:
    if isinstance(obj, Denoiser):
        return obj
    if callable(obj):
        return CallableDenoiser(obj)
    raise TypeError(f"{obj!r} is neither a denoiser nor a callable")


def spec_from_dict(d: dict) -> DenoiserSpec:
    kind = d.get("kind")
    if kind == "gaussian_prior":
        return GaussianPrior(d["mean"], d["variance"])
    if kind == "gmm_prior":
        return GMMPrior(d["weights"], d["means"], d["variances"])
    raise DenoiserSpecError(f"unknown denoiser kind {kind!r}")


def spec_to_json(spec: DenoiserSpec) -> str:
    return json.dumps(spec.to_dict())


def spec_from_json(text: str) -> DenoiserSpec:
    return spec_from_dict(json.loads(text))


def score_array(denoiser: Denoiser, x: np.ndarray, sigma: float) -> np.ndarray:
    return (denoiser.denoise(x, sigma) - x) / (sigma * sigma)


def denoise(spec: Denoiser, x_tilde: Signal, sigma: float) -> Signal:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return x_tilde.with_values(spec.denoise(x_tilde.values, sigma))


def prior_score(spec: Denoiser, x_tilde: Signal, sigma: float) -> Signal:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return x_tilde.with_values(score_array(spec, x_tilde.values, sigma))
