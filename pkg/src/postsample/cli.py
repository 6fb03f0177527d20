"""Command-line interface.

Exit codes: 0 success, 1 verdict failure, 2 usage or validation error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import pnm
from .core import DivergenceError, PostsampleError, RandomStream, Signal
from .denoisers import spec_from_dict
from .oracle import GaussianMixture, direct_posterior_draws, exact_posterior, posterior_moments
from .run import RunConfig, execute, load_config
from .sampler import run_chains
from .schedule import geometric_schedule
from .stats import StatsError, Thresholds, validate_residual

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3
DIRECT_STREAM = 3


def _shape(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.lower().split("x")]
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3 or min(parts) <= 0:
        raise argparse.ArgumentTypeError(f"shape must look like HxW or HxWxC, got {text!r}")
    return tuple(parts)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_schedule_flags(p, steps_default=5):
    p.add_argument("--sigma0", type=float, required=True, help="observation noise std (pixel range [0,1])")
    p.add_argument("--ratio", type=float, default=0.982, help="geometric ratio sigma_{i+1}/sigma_i")
    p.add_argument("--sigma-last", type=float, default=0.01)
    p.add_argument("--epsilon", type=float, default=3.3e-6)
    p.add_argument("--steps", type=int, default=steps_default, help="Langevin steps per noise level")
    p.add_argument("--seed", type=int, default=0, help="base seed; chain c uses seed + c")
    p.add_argument("--chains", type=int, default=1)


def _add_threshold_flags(p):
    t = Thresholds()
    p.add_argument("--rho-max", type=float, default=t.rho_max)
    p.add_argument("--p-min", type=float, default=t.p_min)
    p.add_argument("--std-rel-tol", type=float, default=t.std_rel_tol)


def _add_run_flags(p):
    p.add_argument("--input", required=True, help="PNM path, or 'synthetic' to draw a clean signal from the prior")
    p.add_argument("--shape", type=_shape, help="HxWxC for synthetic input")
    p.add_argument("--denoiser", required=True, help="denoiser spec JSON path")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trace-stride", type=int, default=0, help="snapshot every N inner steps (0: final only)")
    p.add_argument("--add-noise", action="store_true", help="corrupt the input with N(0, sigma0^2) first")
    p.add_argument("--ascii", action="store_true", help="write P2/P3 instead of P5/P6")
    p.add_argument("--maxval", type=int, default=255)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--workers", type=int, default=1)
    _add_schedule_flags(p)
    _add_threshold_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="postsample", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="stochastic denoising by posterior sampling")
    _add_run_flags(p)

    p = sub.add_parser("inpaint", help="noisy inpainting by posterior sampling")
    _add_run_flags(p)
    p.add_argument("--mask", required=True, help="PNM mask; nonzero pixels are observed")
    p.add_argument("--sigma-minus-k", type=float, default=90.0, help="top noise level of the extended schedule")

    p = sub.add_parser("validate", help="residual whiteness/normality/energy test")
    p.add_argument("--noisy", required=True)
    p.add_argument("--restored", required=True)
    p.add_argument("--sigma0", type=float, required=True)
    p.add_argument("--mask", help="optional PNM mask restricting the test to observed pixels")
    _add_threshold_flags(p)

    p = sub.add_parser("oracle-compare", help="Langevin chains vs exact GMM posterior")
    p.add_argument("--denoiser", required=True)
    p.add_argument("--y", type=_floats, required=True, help="comma-separated observation values")
    _add_schedule_flags(p, steps_default=50)
    p.add_argument("--mean-se", type=float, default=3.0, help="max |mean error| in standard errors")
    p.add_argument("--var-rel", type=float, default=0.07, help="max relative variance error")
    p.add_argument("--balance-tol", type=float, default=0.15, help="max basin-fraction gap vs direct samples")
    p.add_argument("--batch-size", type=int, default=512)

    p = sub.add_parser("replay", help="re-run from a manifest or run-config JSON")
    p.add_argument("config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _config_from_args(args) -> RunConfig:
    if args.sigma0 is None or not args.sigma0 > 0:
        raise PostsampleError(f"--sigma0 must be positive, got {args.sigma0}")
    with open(args.denoiser) as fh:
        denoiser = json.load(fh)
    return RunConfig(
        mode=args.command,
        sigma0=args.sigma0,
        denoiser=denoiser,
        input=args.input,
        shape=args.shape,
        add_noise=args.add_noise,
        ratio=args.ratio,
        sigma_last=args.sigma_last,
        epsilon=args.epsilon,
        steps_per_level=args.steps,
        sigma_minus_k=getattr(args, "sigma_minus_k", None),
        mask=getattr(args, "mask", None),
        seed=args.seed,
        chains=args.chains,
        trace_stride=args.trace_stride,
        thresholds={"rho_max": args.rho_max, "p_min": args.p_min, "std_rel_tol": args.std_rel_tol},
        binary=not args.ascii,
        maxval=args.maxval,
    )


def cmd_run(args) -> int:
    cfg = _config_from_args(args) if args.command != "replay" else load_config(args.config)
    manifest = execute(cfg, args.out_dir, batch_size=args.batch_size, workers=args.workers)
    summary = {
        "out_dir": args.out_dir,
        "chains": len(manifest["chain_seeds"]),
        "levels": manifest["levels"],
        "passed": sum(1 for r in manifest["reports"] if r.get("passed")),
    }
    print(json.dumps(summary))
    return EXIT_OK


cmd_denoise = cmd_inpaint = cmd_replay = cmd_run


def cmd_validate(args) -> int:
    noisy = pnm.load(args.noisy)
    restored = pnm.load(args.restored)
    observed = None
    if args.mask:
        m = pnm.load(args.mask)
        observed = (m.grid() > 0).any(axis=2).ravel()
    th = Thresholds(args.rho_max, args.p_min, args.std_rel_tol)
    try:
        rep = validate_residual(noisy, restored, args.sigma0, th, observed)
    except StatsError as exc:
        print(json.dumps({"error": str(exc), "passed": False}))
        return EXIT_VERDICT
    print(rep.to_json())
    return EXIT_OK if rep.passed else EXIT_VERDICT


def _basin_fractions(samples: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((samples[:, None, :] - centers[None]) ** 2).sum(axis=-1)
    idx = d2.argmin(axis=1)
    return np.bincount(idx, minlength=centers.shape[0]) / samples.shape[0]


def cmd_oracle_compare(args) -> int:
    with open(args.denoiser) as fh:
        spec = spec_from_dict(json.load(fh))
    y = np.asarray(args.y, dtype=float)
    d = y.size
    n = args.chains
    if n < 2:
        raise PostsampleError("need at least two chains to estimate moments")
    schedule = geometric_schedule(args.sigma0, args.sigma_last, args.ratio, args.epsilon, args.steps)
    traces = run_chains("denoise", Signal(y, (d, 1, 1)), schedule, spec, args.seed, n, batch_size=args.batch_size)
    lang = np.stack([t.final.values for t in traces])

    post = exact_posterior(GaussianMixture.from_spec(spec, d), y, args.sigma0)
    mean, var = posterior_moments(post)
    direct = direct_posterior_draws(post, RandomStream(args.seed, DIRECT_STREAM), n)

    def summary(s):
        m, v = s.mean(axis=0), s.var(axis=0, ddof=1)
        return {
            "mean": m.tolist(),
            "var": v.tolist(),
            "z_mean": ((m - mean) / np.sqrt(v / n)).tolist(),
            "var_rel_err": (v / var - 1).tolist(),
        }

    out = {
        "exact": {"mean": mean.tolist(), "var": var.tolist(), "weights": post.weights.tolist()},
        "langevin": summary(lang),
        "direct": summary(direct),
        "levels": schedule.L,
    }
    ok = (
        max(abs(z) for z in out["langevin"]["z_mean"]) <= args.mean_se
        and max(abs(e) for e in out["langevin"]["var_rel_err"]) <= args.var_rel
    )
    if post.weights.size > 1:
        fl = _basin_fractions(lang, post.means)
        fd = _basin_fractions(direct, post.means)
        out["basin_fraction"] = {"langevin": fl.tolist(), "direct": fd.tolist()}
        ok = ok and bool(np.max(np.abs(fl - fd)) <= args.balance_tol)
    out["passed"] = bool(ok)
    print(json.dumps(out, indent=2))
    return EXIT_OK if ok else EXIT_VERDICT


COMMANDS = {
    "denoise": cmd_denoise,
    "inpaint": cmd_inpaint,
    "replay": cmd_replay,
    "validate": cmd_validate,
    "oracle-compare": cmd_oracle_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (PostsampleError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
