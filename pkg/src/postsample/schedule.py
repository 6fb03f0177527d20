"""Geometric noise-level schedules and Langevin step sizes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import PostsampleError


class ScheduleError(PostsampleError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Strictly decreasing noise levels sigma_{-K} > ... > sigma_0 > ... > sigma_L.

    ``sigmas`` is stored in that order, so level ``i`` (``-K <= i <= L``) lives
    at position ``i + sigma0_index`` and ``K == sigma0_index``. The terminal
    zero level is never stored.
    """

    sigmas: np.ndarray
    sigma0_index: int
    epsilon: float
    steps_per_level: int

    def __post_init__(self):
        sig = np.array(self.sigmas, dtype=np.float64).ravel()
        if sig.size == 0:
            raise ScheduleError("schedule needs at least one level")
        if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
            raise ScheduleError("noise levels must be finite and positive")
        if np.any(np.diff(sig) >= 0):
            raise ScheduleError("noise levels must be strictly decreasing")
        if not 0 <= int(self.sigma0_index) < sig.size:
            raise ScheduleError("sigma0_index out of range")
        if not self.epsilon > 0:
            raise ScheduleError("epsilon must be positive")
        if int(self.steps_per_level) < 1:
            raise ScheduleError("steps_per_level must be a positive integer")
        sig.setflags(write=False)
        object.__setattr__(self, "sigmas", sig)
        object.__setattr__(self, "sigma0_index", int(self.sigma0_index))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "steps_per_level", int(self.steps_per_level))

    @property
    def K(self) -> int:
        return self.sigma0_index

    @property
    def L(self) -> int:
        return self.sigmas.size - 1 - self.sigma0_index

    @property
    def sigma0(self) -> float:
        return float(self.sigmas[self.sigma0_index])

    @property
    def sigma_last(self) -> float:
        return float(self.sigmas[-1])

    @property
    def n_levels(self) -> int:
        """Levels actually iterated (L + K; sigma_0 itself is skipped)."""
        return self.L + self.K

    @property
    def ratio(self) -> float:
        if self.sigmas.size < 2:
            return math.nan
        return float(self.sigmas[1] / self.sigmas[0])

    def sigma(self, i: int) -> float:
        if not -self.K <= i <= self.L:
            raise ScheduleError(f"level {i} outside [-{self.K}, {self.L}]")
        return float(self.sigmas[i + self.sigma0_index])

    def to_dict(self) -> dict:
        return {
            "sigmas": [float(s) for s in self.sigmas],
            "sigma0_index": self.sigma0_index,
            "epsilon": self.epsilon,
            "steps_per_level": self.steps_per_level,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return cls(np.asarray(d["sigmas"], dtype=float), d["sigma0_index"], d["epsilon"], d["steps_per_level"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "NoiseSchedule":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, NoiseSchedule):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def level_count(sigma_start: float, sigma_last: float, ratio: float) -> int:
    """L = round(ln(sigma_last / sigma_start) / ln(ratio))."""
    return int(round(math.log(sigma_last / sigma_start) / math.log(ratio)))


def geometric_schedule(
    sigma_start: float,
    sigma_last: float = 0.01,
    ratio: float = 0.982,
    epsilon: float = 3.3e-6,
    steps_per_level: int = 5,
) -> NoiseSchedule:
    if not 0 < ratio < 1:
        raise ScheduleError(f"ratio must lie in (0, 1), got {ratio}")
    if not (sigma_last > 0 and sigma_start >= sigma_last):
        raise ScheduleError("need sigma_start >= sigma_last > 0")
    L = level_count(sigma_start, sigma_last, ratio) if sigma_start > sigma_last else 0
    sigmas = sigma_start * ratio ** np.arange(L + 1)
    return NoiseSchedule(sigmas, 0, epsilon, steps_per_level)


def extend_for_inpainting(base: NoiseSchedule, sigma_minus_k: float) -> NoiseSchedule:
    """Prepend sigma_0 / r, sigma_0 / r^2, ... until a level reaches sigma_minus_k.

    K = ceil(ln(sigma_minus_k / sigma_0) / ln(1 / r)); the top level is the
    first geometric level >= sigma_minus_k, so it may overshoot by < one ratio
    step. The extension is applied above the base schedule's current top.
    """
    sigma0 = base.sigma0
    if not sigma_minus_k > sigma0:
        raise ScheduleError(f"sigma_minus_k={sigma_minus_k} must exceed sigma_0={sigma0}")
    r = base.ratio
    if not 0 < r < 1:
        raise ScheduleError("base schedule must have at least two levels to define the ratio")
    top = float(base.sigmas[0])
    if top >= sigma_minus_k:
        return base
    k_new = math.ceil(math.log(sigma_minus_k / top) / math.log(1.0 / r) - 1e-12)
    above = top * (1.0 / r) ** np.arange(k_new, 0, -1)
    sigmas = np.concatenate([above, base.sigmas])
    return NoiseSchedule(sigmas, base.sigma0_index + k_new, base.epsilon, base.steps_per_level)


def step_size(schedule: NoiseSchedule, i: int) -> float:
    """alpha_i = epsilon * sigma_i^2 / sigma_L^2."""
    s = schedule.sigma(i)
    return schedule.epsilon * s * s / (schedule.sigma_last**2)
