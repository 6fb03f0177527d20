"""The nine acceptance criteria, each at its stated tolerance.

Each test records one PASS/FAIL line (printed, and repeated in the pytest
terminal summary) before asserting. Moment tests use T=50 steps per level;
the residual protocol uses T=10. The package default T=5 carries a
discretisation bias that the exact Gaussian chain law makes visible (see
``gaussian_chain_law``), and the tighter tolerances here would otherwise
measure that bias rather than the sampler's correctness.
"""

import json
import math
import os

import numpy as np
import pytest

from postsample import pnm
from postsample.cli import main
from postsample.core import RandomStream, Signal
from postsample.denoisers import GaussianPrior, GMMPrior, score_array
from postsample.experiments import residual_protocol, sample_vs_mmse_ratio
from postsample.fixtures import textured_gmm
from postsample.oracle import GaussianMixture, exact_posterior, posterior_moments
from postsample.sampler import sample_batch
from postsample.schedule import extend_for_inpainting, geometric_schedule
from postsample.stats import normality_p, whiteness_rho

FINE = dict(sigma_last=0.01, ratio=0.982, epsilon=3.3e-6, steps_per_level=50)
RESIDUAL_STEPS = 10
N = 2000
# 5% variance tolerances at 2000 chains sit 1.6 SE from the truth; see criterion 6
N_REDUCTION = 20_000
# every experiment gets its own block of chain seeds so no two share noise
SEED = {
    "conjugate": 0, "gmm1d": 100_000, "gmm2d": 200_000, "bimodal": 300_000,
    "inpaint_all": 400_000, "denoise_ref": 500_000, "inpaint_empty": 600_000,
    "inpaint_partial": 700_000, "mse_ratio": 800_000, "residual": 900_000,
}


def chains(spec, y, schedule, n=N, seed=0, **kw):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    X, _ = sample_batch(np.tile(y, (n, 1)), schedule, spec, [RandomStream(seed + c) for c in range(n)], **kw)
    return X


def moment_check(X, mean, var, se_mult, var_tol):
    m = X.mean(axis=0)
    v = X.var(axis=0, ddof=1)
    z = (m - mean) / np.sqrt(v / X.shape[0])
    rel = v / var - 1
    ok = bool(np.all(np.abs(z) <= se_mult) and np.all(np.abs(rel) <= var_tol))
    return ok, z, rel


def fmt(a):
    return "[" + ", ".join(f"{float(v):+.3f}" for v in np.atleast_1d(a)) + "]"


# 1


def test_criterion_1_schedule_fidelity(acceptance):
    expected = {0.100: 127, 0.203: 166, 0.406: 204, 0.607: 226, 0.702: 234}
    got = {s: geometric_schedule(s, 0.01, 0.982).L for s in expected}
    ok = all(abs(got[s] - expected[s]) <= 1 for s in expected)
    acceptance.record(1, "schedule fidelity", ok, f"L = {list(got.values())}, expected {list(expected.values())} +/-1")
    assert ok


# 2


def _log_marginal(spec, x, sigma):
    from scipy.special import logsumexp

    if isinstance(spec, GaussianPrior):
        w, mu, var = np.ones(1), spec.mean[None, :], np.array([spec.variance])
    else:
        w, mu, var = spec.weights, spec.means, spec.variances
    tot = var + sigma**2
    sq = np.array([np.sum((x - np.broadcast_to(m, x.shape)) ** 2) for m in mu])
    return logsumexp(np.log(w) - 0.5 * x.size * np.log(2 * np.pi * tot) - 0.5 * sq / tot)


def test_criterion_2_tweedie_bridge(acceptance):
    rng = np.random.default_rng(2)
    worst = 0.0
    h = 1e-5
    for case in range(200):
        d = int(rng.integers(1, 6))
        if case % 4 == 0:
            spec = GaussianPrior(rng.normal(size=d), rng.uniform(0.05, 2.0))
        else:
            k = int(rng.integers(1, 6))
            w = rng.uniform(0.1, 1.0, k)
            w /= w.sum()
            w[-1] = 1.0 - w[:-1].sum()
            spec = GMMPrior(w, rng.normal(size=(k, d)), rng.uniform(0.01, 1.0, k))
        sigma = float(rng.uniform(0.05, 1.0))
        x = 1.5 * rng.normal(size=d)
        fd = np.array([
            (_log_marginal(spec, x + h * e, sigma) - _log_marginal(spec, x - h * e, sigma)) / (2 * h)
            for e in np.eye(d)
        ])
        got = score_array(spec, x, sigma)
        worst = max(worst, np.linalg.norm(got - fd) / max(np.linalg.norm(fd), 1e-3))
    ok = worst < 1e-4
    acceptance.record(2, "Tweedie bridge", ok, f"worst relative error {worst:.2e} over 200 cases, limit 1e-4")
    assert ok


# 3


def test_criterion_3_conjugate_gaussian(acceptance):
    sch = geometric_schedule(0.5, **FINE)
    X = chains(GaussianPrior(0.0, 1.0), 0.5, sch, seed=SEED["conjugate"])
    ok, z, rel = moment_check(X, np.array([0.4]), np.array([0.2]), 3.0, 0.05)
    acceptance.record(3, "conjugate Gaussian", ok, f"mean z {fmt(z)} (|z|<=3), variance rel err {fmt(rel)} (<=5%)")
    assert ok


# 4

GMM_1D = (GMMPrior([0.3, 0.7], [-1.0, 1.0], [0.04, 0.04]), [-0.2], 0.5)
GMM_2D = (GMMPrior([0.2, 0.5, 0.3], [[-1.0, 0.5], [1.0, 1.0], [0.3, -1.0]], [0.05, 0.1, 0.02]), [0.2, 0.1], 0.6)


def test_criterion_4_gmm_posteriors(acceptance):
    details = []
    ok = True
    for name, key, (spec, y, s0) in (("1-D", "gmm1d", GMM_1D), ("2-D", "gmm2d", GMM_2D)):
        d = len(y)
        post = exact_posterior(GaussianMixture.from_spec(spec, d), y, s0)
        mean, var = posterior_moments(post)
        X = chains(spec, y, geometric_schedule(s0, **FINE), seed=SEED[key])
        good, z, rel = moment_check(X, mean, var, 3.0, 0.07)
        ok &= good
        details.append(f"{name} z {fmt(z)} var {fmt(rel)}")
    X = chains(GMMPrior([0.5, 0.5], [-1.0, 1.0], [0.01, 0.01]), 0.0, geometric_schedule(0.75, **FINE), seed=SEED["bimodal"])
    frac = float(np.mean(X[:, 0] > 0))
    ok &= 0.35 <= frac <= 0.65
    details.append(f"bimodal positive fraction {frac:.3f}")
    acceptance.record(4, "GMM posteriors", ok, "; ".join(details) + " (|z|<=3, var<=7%, balance in [0.35,0.65])")
    assert ok


# 5


@pytest.mark.slow
def test_criterion_5_residual_protocol(acceptance):
    shape = (32, 32, 3)
    spec = textured_gmm(shape)
    rates = {}
    for s0 in (0.2, 0.4, 0.6):
        res = residual_protocol(spec, shape, geometric_schedule(s0, steps_per_level=RESIDUAL_STEPS), 200, base_seed=SEED["residual"])
        rates[s0] = (res.rate(), res.rate("white"), res.rate("gaussian"), res.rate("energy_ok"))
    ok = all(r[0] >= 0.90 for r in rates.values())
    detail = ", ".join(
        f"sigma0={s}: {r[0]:.1%} (white {r[1]:.1%}, gaussian {r[2]:.1%}, energy {r[3]:.1%})" for s, r in rates.items()
    )
    acceptance.record(5, "residual protocol", ok, detail + "; need >= 90% at each sigma0")
    assert ok


# 6


def test_criterion_6_inpainting_reductions(acceptance):
    # Seven sub-checks, three of them 5% variance checks. At 2000 chains the
    # variance estimate has a 3.2% standard error, so an exact sampler would
    # pass all seven only about 60% of the time. 20000 chains keep the
    # tolerances and make the verdict reflect bias rather than luck.
    base = geometric_schedule(0.5, **FINE)
    ext = extend_for_inpainting(base, 3.0)
    spec = GaussianPrior(0.0, 1.0)

    # all observed vs denoising, 500 chains each
    A = chains(spec, 0.5, ext, n=500, seed=SEED["inpaint_all"], mode="inpaint", observed=np.array([True]))[:, 0]
    D = chains(spec, 0.5, base, n=500, seed=SEED["denoise_ref"])[:, 0]
    pooled = math.sqrt(A.var(ddof=1) / 500 + D.var(ddof=1) / 500)
    z_all = (A.mean() - D.mean()) / pooled
    ok_all = abs(z_all) < 3

    # nothing observed: prior N(0, 1)
    E = chains(spec, 0.5, ext, n=N_REDUCTION, seed=SEED["inpaint_empty"], mode="inpaint", observed=np.array([False]))
    ok_empty, z_e, rel_e = moment_check(E, np.array([0.0]), np.array([1.0]), 3.0, 0.05)

    # 2-D independent prior, coordinate 0 observed at 0.6 with sigma0 = 0.3
    ext2 = extend_for_inpainting(geometric_schedule(0.3, **FINE), 3.0)
    P = chains(GaussianPrior([0.0, 0.0], 1.0), [0.6, 0.0], ext2, n=N_REDUCTION, seed=SEED["inpaint_partial"], mode="inpaint", observed=np.array([True, False]))
    m, v = P.mean(axis=0), P.var(axis=0, ddof=1)
    post_m, post_v = 0.6 / 1.09, 0.09 / 1.09
    ok_part = (
        abs(m[0] / post_m - 1) <= 0.05 and abs(v[0] / post_v - 1) <= 0.05
        # zero target mean: 5% of the prior standard deviation
        and abs(m[1]) <= 0.05 and abs(v[1] - 1) <= 0.05
    )
    ok = ok_all and ok_empty and ok_part
    acceptance.record(
        6, "inpainting reductions", ok,
        f"all-observed vs denoise z {z_all:+.2f}; empty z {fmt(z_e)} var {fmt(rel_e)}; "
        f"partial observed mean {m[0]:.4f}/{post_m:.4f} var {v[0]:.4f}/{post_v:.4f}, "
        f"unobserved mean {m[1]:+.4f} var {v[1]:.4f}",
    )
    assert ok


# 7


def test_criterion_7_mse_ratio(acceptance):
    d = 64
    ratio = sample_vs_mmse_ratio(GaussianPrior(np.zeros(d), 1.0), d, geometric_schedule(0.5, **FINE), N, base_seed=SEED["mse_ratio"])
    ok = abs(ratio - 2.0) <= 0.1
    acceptance.record(7, "MSE ratio", ok, f"sample/MMSE MSE ratio {ratio:.4f}, target 2.0 +/- 0.1")
    assert ok


# 8


def test_criterion_8_statistics_calibration(acceptance):
    ps = np.sort([normality_p(RandomStream(s, 8).normal(10_000)) for s in range(1000)])
    i = np.arange(1, 1001)
    sup = float(max(np.max(i / 1000 - ps), np.max(ps - (i - 1) / 1000)))
    rhos = np.array([abs(whiteness_rho(Signal(RandomStream(s, 9).normal(128 * 128), (128, 128, 1)))[0]) for s in range(1000)])
    frac = float(np.mean(rhos < 0.03))
    ok = sup < 0.04 and frac > 0.99
    acceptance.record(8, "statistics calibration", ok, f"p-value KS sup {sup:.4f} (<0.04); |rho|<0.03 in {frac:.1%} (>99%)")
    assert ok


# 9


def test_criterion_9_determinism_and_io(acceptance, tmp_path):
    spec = textured_gmm((12, 12, 3), seed=1)
    den = tmp_path / "den.json"
    den.write_text(json.dumps(spec.to_dict()))
    args = ["denoise", "--input", "synthetic", "--shape", "12x12x3", "--add-noise", "--sigma0", "0.3",
            "--chains", "3", "--seed", "5", "--denoiser", str(den), "--trace-stride", "50"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(["replay", str(tmp_path / "a" / "manifest.json"), "--out-dir", str(tmp_path / "b")]) == 0

    def files(d):
        return {n: (d / n).read_bytes() for n in sorted(os.listdir(d))}

    replay_ok = files(tmp_path / "a") == files(tmp_path / "b")

    rng = np.random.default_rng(9)
    io_ok = True
    for binary in (False, True):
        for c in (1, 3):
            for maxval in (255, 65535):
                sig = Signal(rng.uniform(-0.1, 1.1, 7 * 5 * c), (7, 5, c))
                once = pnm.write_pnm(sig, binary, maxval)
                io_ok &= pnm.write_pnm(pnm.read_pnm(once), binary, maxval) == once
    ok = replay_ok and io_ok
    acceptance.record(9, "determinism and I/O", ok, f"replay byte-identical {replay_ok}; P2/P3/P5/P6 idempotent {io_ok}")
    assert ok
