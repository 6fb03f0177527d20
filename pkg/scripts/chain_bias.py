"""Separate discretisation bias from Monte Carlo noise on the conjugate Gaussian fixture.

For a Gaussian prior the Langevin recursion is affine, so its output law is
known exactly. This prints that law's relative bias against the true
posterior for several step counts T, then checks a simulation against it.
"""

import argparse

import numpy as np

from postsample.core import RandomStream
from postsample.denoisers import GaussianPrior
from postsample.oracle import gaussian_chain_law
from postsample.sampler import sample_batch
from postsample.schedule import extend_for_inpainting, geometric_schedule


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma0", type=float, default=0.5)
    ap.add_argument("--prior-var", type=float, default=1.0)
    ap.add_argument("--y", type=float, default=0.5)
    ap.add_argument("--steps", type=int, nargs="+", default=[1, 3, 5, 10, 20, 50])
    ap.add_argument("--chains", type=int, default=0, help="also simulate this many chains at the last T")
    ap.add_argument("--sigma-minus-k", type=float, default=3.0, help="for the inpainting rows")
    args = ap.parse_args()

    s0, pv, y = args.sigma0, args.prior_var, args.y
    post_m, post_v = pv * y / (pv + s0**2), pv * s0**2 / (pv + s0**2)
    print(f"posterior mean {post_m:.5f} var {post_v:.5f}")
    print(f"{'T':>4} {'mean bias':>10} {'var bias':>10} {'inp obs var':>12} {'inp unobs var':>14}")
    for T in args.steps:
        sch = geometric_schedule(s0, steps_per_level=T)
        m, v = gaussian_chain_law(sch, 0.0, pv, y)
        ext = extend_for_inpainting(sch, args.sigma_minus_k)
        _, vo = gaussian_chain_law(ext, 0.0, pv, y, observed=True, mode="inpaint")
        _, vu = gaussian_chain_law(ext, 0.0, pv, y, observed=False, mode="inpaint")
        print(f"{T:4d} {m / post_m - 1:+10.4f} {v / post_v - 1:+10.4f} {vo / post_v - 1:+12.4f} {vu / pv - 1:+14.4f}")

    if args.chains:
        n = args.chains
        sch = geometric_schedule(s0, steps_per_level=args.steps[-1])
        m, v = gaussian_chain_law(sch, 0.0, pv, y)
        X, _ = sample_batch(np.full((n, 1), y), sch, GaussianPrior(0.0, pv), [RandomStream(c) for c in range(n)])
        x = X[:, 0]
        print(f"simulated {n} chains: mean z vs law {(x.mean() - m) / np.sqrt(v / n):+.2f}, "
              f"var rel vs law {x.var(ddof=1) / v - 1:+.4f} (se {np.sqrt(2 / n):.4f})")


if __name__ == "__main__":
    main()
