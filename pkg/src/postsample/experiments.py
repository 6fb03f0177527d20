"""Seeded desk-scale experiments shared by the acceptance tests and scripts/.

Run ``r`` of an experiment with base seed ``b`` uses seed ``b + r`` for
everything: the clean draw (sub-stream 2), the injected noise (sub-stream 1)
and the Langevin chain (sub-stream 0). All runs of one experiment are
vectorised into a single batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RandomStream, Signal
from .oracle import GaussianMixture, direct_posterior_draws, exact_posterior, posterior_moments
from .run import NOISE_STREAM, SYNTH_STREAM
from .sampler import sample_batch
from .schedule import NoiseSchedule
from .stats import ResidualReport, StatsError, Thresholds, mse_ratio, validate_residual


def noisy_draws(spec, shape, sigma0: float, base_seed: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(clean, noisy) arrays of shape (n, h*w*c): x ~ prior, y = x + N(0, sigma0^2 I)."""
    d = int(np.prod(shape))
    prior = GaussianMixture.from_spec(spec, d)
    X = np.stack([direct_posterior_draws(prior, RandomStream(base_seed + r, SYNTH_STREAM), 1)[0] for r in range(n)])
    N = np.stack([RandomStream(base_seed + r, NOISE_STREAM).normal(d) for r in range(n)])
    return X, X + sigma0 * N


@dataclass
class ProtocolResult:
    sigma0: float
    reports: list[ResidualReport | None]

    @property
    def n(self) -> int:
        return len(self.reports)

    def rate(self, verdict: str = "passed") -> float:
        return sum(bool(r is not None and getattr(r, verdict)) for r in self.reports) / self.n


def residual_protocol(
    spec,
    shape: tuple[int, int, int],
    schedule: NoiseSchedule,
    n_runs: int,
    base_seed: int = 0,
    thresholds: Thresholds = Thresholds(),
) -> ProtocolResult:
    """Denoise ``n_runs`` synthetic noisy signals (one chain each) and validate every residual."""
    sigma0 = schedule.sigma0
    _, Y = noisy_draws(spec, shape, sigma0, base_seed, n_runs)
    streams = [RandomStream(base_seed + r) for r in range(n_runs)]
    S, _ = sample_batch(Y, schedule, spec, streams)
    reports = []
    for y, s in zip(Y, S):
        try:
            reports.append(validate_residual(Signal(y, shape), Signal(s, shape), sigma0, thresholds))
        except StatsError:
            reports.append(None)
    return ProtocolResult(sigma0, reports)


def sample_vs_mmse_ratio(spec, dim: int, schedule: NoiseSchedule, n_runs: int, base_seed: int = 0) -> float:
    """Pooled E||x - sample||^2 / E||x - E[x|y]||^2 over ``n_runs`` independent (x, y) pairs."""
    sigma0 = schedule.sigma0
    X, Y = noisy_draws(spec, (dim, 1, 1), sigma0, base_seed, n_runs)
    S, _ = sample_batch(Y, schedule, spec, [RandomStream(base_seed + r) for r in range(n_runs)])
    prior = GaussianMixture.from_spec(spec, dim)
    M = np.stack([posterior_moments(exact_posterior(prior, y, sigma0))[0] for y in Y])
    shape = (n_runs * dim, 1, 1)
    return mse_ratio(Signal(X.ravel(), shape), Signal(S.ravel(), shape), Signal(M.ravel(), shape))
