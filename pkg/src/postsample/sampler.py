"""Annealed Langevin posterior samplers for denoising and noisy inpainting.

Both samplers run the update ``x <- x + a_i * delta + sqrt(2 a_i) z`` with
``a_i = eps * sigma_i^2 / sigma_L^2`` and ``T`` inner steps per level.

Denoising (levels i = 1..L, starting from x = y)::

    delta = s(x, sigma_i) + (y - x) / (sigma_0^2 - sigma_i^2)

Inpainting starts from x ~ N(0, sigma_{-K}^2 I) and runs two phases. On the
observed set M and the rest R:

    i = -K..-1:  delta_M = (y_M - x_M) / (sigma_i^2 - sigma_0^2)
                 delta_R = s(x, sigma_i)_R
    i =  1..L:   delta_M = s(x, sigma_i)_M + (y_M - x_M) / (sigma_0^2 - sigma_i^2)
                 delta_R = s(x, sigma_i)_R

The first-phase update on M drops the gradient of log p(x_R | x_M) with
respect to x_M, i.e. it assumes E[x_M | x] ~= E[x_M | x_M]. Level sigma_0
itself is never iterated.

Chains are vectorised over a leading batch axis, but every chain owns its
RandomStream and consumes it in the same order as a lone chain would: the
initial draw (inpainting only), then ``T * d`` normals per level. Results are
therefore independent of how chains are grouped into batches.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import DivergenceError, Mask, PostsampleError, RandomStream, ShapeError, Signal
from .denoisers import as_denoiser, score_array
from .schedule import NoiseSchedule, ScheduleError, step_size

DIVERGENCE_BOUND = 1e6


@dataclass
class ChainTrace:
    final: Signal
    snapshots: list[tuple[int, int, Signal]] = field(default_factory=list)
    seed: int | None = None
    meta: dict = field(default_factory=dict)


def _levels(schedule: NoiseSchedule, mode: str) -> list[int]:
    if mode == "denoise":
        if schedule.K != 0:
            raise ScheduleError("denoising needs a schedule starting at sigma_0 (sigma0_index == 0)")
        if schedule.L < 1:
            raise ScheduleError("denoising needs at least one level below sigma_0")
        return list(range(1, schedule.L + 1))
    if mode == "inpaint":
        if schedule.K < 1:
            raise ScheduleError("inpainting needs K >= 1 levels above sigma_0")
        return list(range(-schedule.K, 0)) + list(range(1, schedule.L + 1))
    raise ValueError(f"unknown mode {mode!r}")


def sample_batch(
    Y: np.ndarray,
    schedule: NoiseSchedule,
    denoiser,
    streams: Sequence[RandomStream],
    *,
    mode: str = "denoise",
    observed: np.ndarray | None = None,
    trace_stride: int = 0,
    chain_offset: int = 0,
) -> tuple[np.ndarray, list[list[tuple[int, int, np.ndarray]]]]:
    """Run ``len(streams)`` chains on observations ``Y`` of shape (C, d).

    ``observed`` is a boolean vector of length d (inpainting only; ``None``
    means every coordinate is observed). Returns the final iterates (C, d)
    and, per chain, the ``(level, step, x)`` snapshots taken every
    ``trace_stride`` inner steps.
    """
    denoiser = as_denoiser(denoiser)
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    C, d = Y.shape
    if len(streams) != C:
        raise ShapeError(f"{C} observations but {len(streams)} random streams")
    if trace_stride < 0:
        raise ValueError("trace_stride must be nonnegative")
    levels = _levels(schedule, mode)
    T = schedule.steps_per_level
    s0sq = schedule.sigma0**2

    if observed is None:
        obs = np.ones(d, dtype=bool)
    else:
        obs = np.asarray(observed, dtype=bool).ravel()
        if obs.size != d:
            raise ShapeError(f"mask length {obs.size} does not match signal length {d}")
    all_obs = bool(obs.all())
    none_obs = not obs.any()

    if mode == "inpaint":
        top = schedule.sigmas[0]
        X = np.stack([top * st.normal(d) for st in streams])
    else:
        X = Y.copy()

    traces: list[list] = [[] for _ in range(C)]
    g = 0
    for i in levels:
        s = schedule.sigma(i)
        ssq = s * s
        a = step_size(schedule, i)
        noise_scale = math.sqrt(2.0 * a)
        if i > 0 and not s0sq - ssq > 0:
            raise ScheduleError(f"level {i}: sigma_i={s} is not below sigma_0")
        if i < 0 and not ssq - s0sq > 0:
            raise ScheduleError(f"level {i}: sigma_i={s} is not above sigma_0")
        Z = np.stack([st.normal(T * d).reshape(T, d) for st in streams])
        for t in range(T):
            if i > 0:
                delta = score_array(denoiser, X, s)
                if all_obs:
                    delta = delta + (Y - X) / (s0sq - ssq)
                elif not none_obs:
                    delta = delta + np.where(obs, (Y - X) / (s0sq - ssq), 0.0)
            else:
                pull = (Y - X) / (ssq - s0sq)
                if all_obs:
                    delta = pull
                else:
                    delta = np.where(obs, pull, score_array(denoiser, X, s))
            X = X + a * delta + noise_scale * Z[:, t]
            ok = np.abs(X) <= DIVERGENCE_BOUND
            if not ok.all():
                c, j = np.argwhere(~ok)[0]
                raise DivergenceError(i, t + 1, chain_offset + int(c), float(X[c, j]))
            g += 1
            if trace_stride and g % trace_stride == 0:
                for c in range(C):
                    traces[c].append((i, t + 1, X[c].copy()))
    return X, traces


def _mask_meta(observed: np.ndarray | None) -> dict:
    if observed is None:
        return {}
    n = int(np.count_nonzero(observed))
    return {
        "n_observed": n,
        "no_observations": n == 0,
        "all_observed": n == observed.size,
    }


def _wrap(final: np.ndarray, snaps, shape, seed, meta) -> ChainTrace:
    snapshots = [(i, t, Signal(x, shape)) for i, t, x in snaps]
    return ChainTrace(Signal(final, shape), snapshots, seed, dict(meta))


def denoise_sample(
    y: Signal,
    schedule: NoiseSchedule,
    spec,
    stream: RandomStream,
    trace_stride: int = 0,
) -> ChainTrace:
    """One chain of the stochastic denoiser started at the noisy input ``y``."""
    X, traces = sample_batch(y.values[None], schedule, spec, [stream], mode="denoise", trace_stride=trace_stride)
    return _wrap(X[0], traces[0], y.shape, stream.seed, {})


def inpaint_sample(
    y_masked: Signal,
    mask: Mask,
    schedule: NoiseSchedule,
    spec,
    stream: RandomStream,
    trace_stride: int = 0,
) -> ChainTrace:
    """One chain of the noisy-inpainting sampler; ``y_masked`` is read only on ``mask``."""
    if mask.total_len != y_masked.size:
        raise ShapeError("mask and observation sizes differ")
    obs = mask.as_bool()
    X, traces = sample_batch(
        y_masked.values[None], schedule, spec, [stream], mode="inpaint", observed=obs, trace_stride=trace_stride
    )
    return _wrap(X[0], traces[0], y_masked.shape, stream.seed, _mask_meta(obs))


def run_chains(
    mode: str,
    y: Signal | Sequence[Signal],
    schedule: NoiseSchedule,
    spec,
    base_seed: int,
    n_chains: int,
    *,
    mask: Mask | None = None,
    trace_stride: int = 0,
    batch_size: int = 64,
    workers: int = 1,
) -> list[ChainTrace]:
    """Run ``n_chains`` independent chains; chain c uses seed ``base_seed + c``.

    ``y`` is either one observation shared by all chains or one per chain.
    Chains are split into batches of ``batch_size`` and the batches may run
    on ``workers`` threads; output order and values do not depend on either.
    """
    if n_chains < 1:
        raise ValueError("n_chains must be positive")
    ys = [y] * n_chains if isinstance(y, Signal) else list(y)
    if len(ys) != n_chains:
        raise ShapeError("need one observation per chain")
    shape = ys[0].shape
    if any(s.shape != shape for s in ys):
        raise ShapeError("all observations must share a shape")
    obs = None
    if mode == "inpaint":
        if mask is None:
            raise PostsampleError("inpainting needs a mask")
        if mask.total_len != ys[0].size:
            raise ShapeError("mask and observation sizes differ")
        obs = mask.as_bool()
    Y = np.stack([s.values for s in ys])
    starts = list(range(0, n_chains, max(1, batch_size)))

    def run(start):
        stop = min(start + batch_size, n_chains)
        streams = [RandomStream(base_seed + c) for c in range(start, stop)]
        return sample_batch(
            Y[start:stop], schedule, spec, streams,
            mode=mode, observed=obs, trace_stride=trace_stride, chain_offset=start,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]

    meta = _mask_meta(obs)
    out = []
    for start, (X, traces) in zip(starts, results):
        for j in range(X.shape[0]):
            out.append(_wrap(X[j], traces[j], shape, base_seed + start + j, meta))
    return out
