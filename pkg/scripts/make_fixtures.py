"""Write a small set of demo inputs for the CLI: a textured prior, a clean image and a text mask."""

import argparse
import json
import os

import numpy as np

from postsample import pnm
from postsample.core import RandomStream, Signal
from postsample.fixtures import text_mask, textured_gmm
from postsample.oracle import GaussianMixture, direct_posterior_draws


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir")
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--channels", type=int, choices=(1, 3), default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    shape = (args.size, args.size, args.channels)
    spec = textured_gmm(shape, seed=args.seed)
    with open(os.path.join(args.out_dir, "textured_gmm.json"), "w") as fh:
        json.dump(spec.to_dict(), fh)

    x = direct_posterior_draws(GaussianMixture.from_spec(spec), RandomStream(args.seed, 2), 1)[0]
    ext = ".pgm" if args.channels == 1 else ".ppm"
    pnm.save(os.path.join(args.out_dir, "clean" + ext), Signal(x, shape))

    observed = text_mask(args.size, args.size, "TEXT", scale=max(1, args.size // 32)).as_bool()
    pnm.save(os.path.join(args.out_dir, "text_mask.pgm"), Signal(observed.astype(float), (args.size, args.size, 1)))

    with open(os.path.join(args.out_dir, "gaussian.json"), "w") as fh:
        json.dump({"kind": "gaussian_prior", "mean": 0.5, "variance": 0.04}, fh)
    print(f"wrote fixtures for a {shape} signal to {args.out_dir}")
    print(f"observed pixels in mask: {int(np.sum(observed))} of {observed.size}")


if __name__ == "__main__":
    main()
