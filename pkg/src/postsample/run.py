"""Reproducible denoise/inpaint runs: configuration, execution and artifacts.

A run writes, into its output directory:

- ``chain_NNN.pgm`` / ``.ppm``: one image per chain
- ``residuals.csv``: one residual report (and PSNR, when the clean signal is known) per chain
- ``manifest.json``: the full :class:`RunConfig`, resolved schedule, per-chain seeds and file hashes
- ``noisy``/``clean`` images and ``noise.npy`` when noise was injected
- ``trace_NNN.npz`` when ``trace_stride > 0``

The manifest's ``config`` block is itself a valid run configuration, so a run
can be replayed from it.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__, pnm
from .core import Mask, PostsampleError, RandomStream, ShapeError, Signal
from .denoisers import spec_from_dict
from .oracle import GaussianMixture, direct_posterior_draws
from .sampler import run_chains
from .schedule import NoiseSchedule, extend_for_inpainting, geometric_schedule
from .stats import CSV_SCHEMA_VERSION, REPORT_FIELDS, StatsError, Thresholds, psnr, validate_residual

CSV_HEADER = ("chain", "seed", "psnr") + REPORT_FIELDS
NOISE_STREAM = 1
SYNTH_STREAM = 2


class ConfigError(PostsampleError, ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    sigma0: float
    denoiser: dict
    input: str = "synthetic"
    shape: tuple[int, int, int] | None = None
    add_noise: bool = False
    ratio: float = 0.982
    sigma_last: float = 0.01
    epsilon: float = 3.3e-6
    steps_per_level: int = 5
    sigma_minus_k: float | None = None
    mask: str | None = None
    seed: int = 0
    chains: int = 1
    trace_stride: int = 0
    thresholds: dict = field(default_factory=lambda: dataclasses.asdict(Thresholds()))
    binary: bool = True
    maxval: int = 255

    def validate(self) -> None:
        if self.mode not in ("denoise", "inpaint"):
            raise ConfigError(f"mode must be 'denoise' or 'inpaint', got {self.mode!r}")
        if not (isinstance(self.sigma0, (int, float)) and math.isfinite(self.sigma0) and self.sigma0 > 0):
            raise ConfigError(f"sigma0 must be positive, got {self.sigma0}")
        if not self.sigma_last > 0 or self.sigma_last >= self.sigma0:
            raise ConfigError("need 0 < sigma_last < sigma0")
        if not 0 < self.ratio < 1:
            raise ConfigError("ratio must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.steps_per_level < 1:
            raise ConfigError("steps must be a positive integer")
        if self.chains < 1:
            raise ConfigError("chains must be a positive integer")
        if self.trace_stride < 0:
            raise ConfigError("trace stride must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.mode == "inpaint":
            if self.mask is None:
                raise ConfigError("inpainting needs a mask")
            if self.sigma_minus_k is None or not self.sigma_minus_k > self.sigma0:
                raise ConfigError("inpainting needs sigma_minus_k > sigma0")
        if self.input == "synthetic" and self.shape is None:
            raise ConfigError("synthetic input needs a shape")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["shape"] is not None:
            d["shape"] = list(d["shape"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d.get("config", d))
        if d.get("shape") is not None:
            d["shape"] = tuple(d["shape"])
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**d)

    def schedule(self) -> NoiseSchedule:
        base = geometric_schedule(self.sigma0, self.sigma_last, self.ratio, self.epsilon, self.steps_per_level)
        if self.mode == "inpaint":
            return extend_for_inpainting(base, self.sigma_minus_k)
        return base


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _load_input(cfg: RunConfig, spec) -> tuple[Signal, str | None]:
    if cfg.input == "synthetic":
        h, w, c = cfg.shape
        prior = GaussianMixture.from_spec(spec, h * w * c)
        x = direct_posterior_draws(prior, RandomStream(cfg.seed, SYNTH_STREAM), 1)[0]
        return Signal(x, (h, w, c)), None
    with open(cfg.input, "rb") as fh:
        data = fh.read()
    sig = pnm.read_pnm(data)
    if cfg.shape is not None and tuple(cfg.shape) != sig.shape:
        raise ShapeError(f"input shape {sig.shape} differs from configured {tuple(cfg.shape)}")
    return sig, _sha256(data)


def _load_mask(cfg: RunConfig, shape) -> tuple[Mask, str]:
    with open(cfg.mask, "rb") as fh:
        data = fh.read()
    m = pnm.read_pnm(data)
    if m.shape[:2] != shape[:2]:
        raise ShapeError(f"mask is {m.shape[0]}x{m.shape[1]}, input is {shape[0]}x{shape[1]}")
    pixel_obs = (m.grid() > 0).any(axis=2).ravel()
    return Mask.from_bool(np.repeat(pixel_obs, shape[2])), _sha256(data)


def _image_ext(sig: Signal) -> str:
    return ".pgm" if sig.channels == 1 else ".ppm"


def prepare(cfg: RunConfig):
    """Resolve config into (spec, schedule, clean, y, noise, input_hash, mask, mask_hash)."""
    cfg.validate()
    spec = spec_from_dict(cfg.denoiser)
    schedule = cfg.schedule()
    sig, input_hash = _load_input(cfg, spec)
    if spec.dim not in (1, sig.size):
        raise ShapeError(f"denoiser dimension {spec.dim} does not match input size {sig.size}")
    if cfg.input == "synthetic" or cfg.add_noise:
        clean = sig
    else:
        clean = None
    noise = None
    if cfg.add_noise:
        noise = cfg.sigma0 * RandomStream(cfg.seed, NOISE_STREAM).normal(sig.size)
        y = Signal(sig.values + noise, sig.shape)
    else:
        y = sig
    mask = mask_hash = None
    if cfg.mode == "inpaint":
        mask, mask_hash = _load_mask(cfg, sig.shape)
    return spec, schedule, clean, y, noise, input_hash, mask, mask_hash


def execute(cfg: RunConfig, out_dir: str, batch_size: int = 64, workers: int = 1) -> dict:
    """Run all chains, then write every artifact. Returns the manifest."""
    spec, schedule, clean, y, noise, input_hash, mask, mask_hash = prepare(cfg)
    traces = run_chains(
        cfg.mode, y, schedule, spec, cfg.seed, cfg.chains,
        mask=mask, trace_stride=cfg.trace_stride, batch_size=batch_size, workers=workers,
    )
    th = Thresholds(**cfg.thresholds)
    observed = mask.as_bool() if mask is not None else None

    files: dict[str, bytes] = {}
    rows = []
    reports = []
    for c, tr in enumerate(traces):
        name = f"chain_{c:03d}{_image_ext(tr.final)}"
        files[name] = pnm.write_pnm(tr.final, cfg.binary, cfg.maxval)
        try:
            if mask is not None and mask.n_observed == 0:
                raise StatsError("no observed pixels")
            rep = validate_residual(y, tr.final, cfg.sigma0, th, observed)
            vals = rep.csv_values()
            reports.append(rep.to_dict())
        except (StatsError, ShapeError) as exc:
            vals = [""] * (len(REPORT_FIELDS) - 1) + ["0"]
            reports.append({"error": str(exc)})
        p = psnr(clean, tr.final) if clean is not None else None
        rows.append([str(c), str(tr.seed), "" if p is None else f"{p:.6f}"] + vals)
        if cfg.trace_stride:
            buf = io.BytesIO()
            np.savez(
                buf,
                level=np.array([s[0] for s in tr.snapshots], dtype=np.int64),
                step=np.array([s[1] for s in tr.snapshots], dtype=np.int64),
                values=np.array([s[2].values for s in tr.snapshots]).reshape(-1, y.size),
                shape=np.array(y.shape),
            )
            files[f"trace_{c:03d}.npz"] = buf.getvalue()

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(rows)
    files["residuals.csv"] = buf.getvalue().encode()

    injected = None
    if clean is not None and y.channels in (1, 3):
        files[f"clean{_image_ext(clean)}"] = pnm.write_pnm(clean, cfg.binary, cfg.maxval)
    if y.channels in (1, 3):
        files[f"noisy{_image_ext(y)}"] = pnm.write_pnm(y, cfg.binary, cfg.maxval)
    if noise is not None:
        buf = io.BytesIO()
        np.save(buf, noise.reshape(y.shape))
        files["noise.npy"] = buf.getvalue()
        injected = {"std": float(np.std(noise, ddof=1))}
        try:
            injected["report"] = validate_residual(y, clean, cfg.sigma0, th, observed).to_dict()
        except (StatsError, ShapeError) as exc:
            injected["report"] = {"error": str(exc)}

    manifest = {
        "tool": "postsample",
        "version": __version__,
        "csv_schema": CSV_SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "schedule": schedule.to_dict(),
        "levels": {"L": schedule.L, "K": schedule.K, "total": schedule.n_levels},
        "chain_seeds": [tr.seed for tr in traces],
        "rng": RandomStream.algorithm,
        "input_sha256": input_hash,
        "mask_sha256": mask_hash,
        "mask": None if mask is None else {
            "n_observed": mask.n_observed,
            "no_observations": mask.n_observed == 0,
            "all_observed": mask.n_observed == mask.total_len,
        },
        "injected_noise": injected,
        "reports": reports,
    }
    manifest["files"] = {k: _sha256(v) for k, v in sorted(files.items())}
    files["manifest.json"] = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
    _write_all(out_dir, files)
    return manifest


def _write_all(out_dir: str, files: dict[str, bytes]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    try:
        for name, data in files.items():
            path = os.path.join(out_dir, name)
            with open(path, "wb") as fh:
                fh.write(data)
            written.append(path)
    except OSError:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))
