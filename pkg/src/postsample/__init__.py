"""Posterior-sampling image denoising and noisy inpainting with annealed Langevin dynamics."""

__version__ = "0.1.0"

from .core import Mask, RandomStream, Signal, gaussian_vector, make_signal  # noqa: E402
from .denoisers import GaussianPrior, GMMPrior, denoise, prior_score  # noqa: E402
from .sampler import ChainTrace, denoise_sample, inpaint_sample, run_chains  # noqa: E402
from .schedule import NoiseSchedule, extend_for_inpainting, geometric_schedule, step_size  # noqa: E402

__all__ = [
    "ChainTrace", "GMMPrior", "GaussianPrior", "Mask", "NoiseSchedule", "RandomStream", "Signal",
    "denoise", "denoise_sample", "extend_for_inpainting", "gaussian_vector", "geometric_schedule",
    "inpaint_sample", "make_signal", "prior_score", "run_chains", "step_size",
]
