"""Print level counts and step sizes for the published denoising/inpainting settings."""

import argparse
import math

from postsample.schedule import extend_for_inpainting, geometric_schedule, step_size

DENOISE = [
    # dataset, ratio, epsilon, T, sigma0 values
    ("CelebA", 0.982, 3.3e-6, 5, [0.100, 0.203, 0.406, 0.607, 0.702]),
    ("LSUN", 0.991, 1.8e-6, 3, [0.198, 0.406]),
    ("FFHQ", 0.995, 1.8e-6, 3, [0.198, 0.406]),
]
INPAINT = [
    # dataset, ratio, epsilon, T, sigma_{-K}, tabulated L+K
    ("CelebA", 0.982, 3.3e-6, 5, 90.0, 500),
    ("LSUN", 0.991, 1.8e-6, 3, 190.0, 1086),
    ("FFHQ", 0.995, 1.8e-6, 5, 348.0, 2311),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma-last", type=float, default=0.01)
    ap.add_argument("--inpaint-sigma0", type=float, default=0.1)
    args = ap.parse_args()

    print(f"{'dataset':8} {'sigma0':>7} {'L':>5} {'K':>5} {'L+K':>5} {'alpha_1':>10}")
    for name, ratio, eps, T, sigmas in DENOISE:
        for s0 in sigmas:
            sch = geometric_schedule(s0, args.sigma_last, ratio, eps, T)
            print(f"{name:8} {s0:7.3f} {sch.L:5d} {'':>5} {'':>5} {step_size(sch, 1):10.3e}")

    print(f"\ninpainting, sigma0={args.inpaint_sigma0}")
    print(f"{'dataset':8} {'s_-K':>6} {'L':>5} {'K':>5} {'L+K':>5} {'table':>6} {'direct':>7}")
    for name, ratio, eps, T, top, tabulated in INPAINT:
        ext = extend_for_inpainting(geometric_schedule(args.inpaint_sigma0, args.sigma_last, ratio, eps, T), top)
        direct = math.log(top / args.sigma_last) / math.log(1 / ratio)
        print(f"{name:8} {top:6.0f} {ext.L:5d} {ext.K:5d} {ext.n_levels:5d} {tabulated:6d} {direct:7.1f}")


if __name__ == "__main__":
    main()
