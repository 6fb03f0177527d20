import csv
import json
import os

import numpy as np
import pytest

from postsample import pnm
from postsample.cli import main
from postsample.core import RandomStream, Signal
from postsample.denoisers import GaussianPrior, GMMPrior
from postsample.fixtures import text_mask, textured_gmm
from postsample.oracle import GaussianMixture, direct_posterior_draws


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def read_dir(d):
    return {name: (d / name).read_bytes() for name in sorted(os.listdir(d))}


@pytest.fixture
def gray_setup(tmp_path):
    spec = textured_gmm((16, 16, 1), seed=3)
    x = direct_posterior_draws(GaussianMixture.from_spec(spec), RandomStream(1), 1)[0]
    clean = tmp_path / "clean.pgm"
    pnm.save(str(clean), Signal(x, (16, 16, 1)))
    den = write_json(tmp_path / "gmm.json", spec.to_dict())
    return str(clean), den


def run_denoise(clean, den, out, *extra):
    return main(["denoise", "--input", clean, "--add-noise", "--sigma0", "0.406", "--chains", "4",
                 "--seed", "7", "--denoiser", den, "--out-dir", str(out), *extra])


def test_denoise_outputs_and_manifest(tmp_path, gray_setup, capsys):
    clean, den = gray_setup
    out = tmp_path / "run1"
    assert run_denoise(clean, den, out) == 0
    files = read_dir(out)
    chains = [files[f"chain_{c:03d}.pgm"] for c in range(4)]
    assert len(set(chains)) == 4
    m = json.loads(files["manifest.json"])
    assert m["levels"]["L"] == 204 and m["levels"]["K"] == 0
    assert m["chain_seeds"] == [7, 8, 9, 10]
    assert m["config"]["steps_per_level"] == 5 and m["config"]["epsilon"] == 3.3e-6
    assert len(m["schedule"]["sigmas"]) == 205
    rows = list(csv.reader(files["residuals.csv"].decode().splitlines()))
    assert rows[0][:3] == ["chain", "seed", "psnr"]
    assert len(rows) == 5 and [r[1] for r in rows[1:]] == ["7", "8", "9", "10"]
    assert all(float(r[2]) > 0 for r in rows[1:])
    assert "noise.npy" in files and "noisy.pgm" in files
    for name, digest in m["files"].items():
        import hashlib
        assert hashlib.sha256(files[name]).hexdigest() == digest
    summary = json.loads(capsys.readouterr().out)
    assert summary["chains"] == 4


def test_denoise_rerun_is_byte_identical(tmp_path, gray_setup):
    clean, den = gray_setup
    assert run_denoise(clean, den, tmp_path / "a") == 0
    assert run_denoise(clean, den, tmp_path / "b", "--batch-size", "1", "--workers", "3") == 0
    assert read_dir(tmp_path / "a") == read_dir(tmp_path / "b")


def test_replay_from_manifest(tmp_path, gray_setup):
    clean, den = gray_setup
    assert run_denoise(clean, den, tmp_path / "a", "--trace-stride", "200") == 0
    first = read_dir(tmp_path / "a")
    assert "trace_000.npz" in first
    assert main(["replay", str(tmp_path / "a" / "manifest.json"), "--out-dir", str(tmp_path / "b")]) == 0
    assert read_dir(tmp_path / "b") == first


def test_sigma0_zero_is_rejected_before_compute(tmp_path, gray_setup, capsys):
    clean, den = gray_setup
    out = tmp_path / "none"
    rc = main(["denoise", "--input", clean, "--sigma0", "0", "--denoiser", den, "--out-dir", str(out)])
    assert rc == 2
    assert not out.exists()
    assert "sigma0" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main([]) == 2
    assert main(["denoise", "--sigma0", "0.1"]) == 2
    assert main(["bogus"]) == 2


def test_missing_input_file(tmp_path, gray_setup):
    _, den = gray_setup
    rc = main(["denoise", "--input", str(tmp_path / "nope.pgm"), "--sigma0", "0.1",
               "--denoiser", den, "--out-dir", str(tmp_path / "o")])
    assert rc == 2


def test_shape_mismatch_between_denoiser_and_input(tmp_path, gray_setup):
    clean, _ = gray_setup
    den = write_json(tmp_path / "g.json", GaussianPrior([0.0, 0.0], 1.0).to_dict())
    rc = main(["denoise", "--input", clean, "--sigma0", "0.1", "--denoiser", den, "--out-dir", str(tmp_path / "o")])
    assert rc == 2


# inpainting


def mask_file(tmp_path, name, observed_grid):
    path = tmp_path / name
    pnm.save(str(path), Signal(observed_grid.astype(float).ravel(), observed_grid.shape + (1,)))
    return str(path)


def run_inpaint(tmp_path, den, mask, out, seed=0, sigma0="0.2", shape="8x8", steps="2"):
    return main(["inpaint", "--input", "synthetic", "--shape", shape, "--add-noise", "--sigma0", sigma0,
                 "--denoiser", den, "--mask", mask, "--sigma-minus-k", "3", "--steps", steps,
                 "--seed", str(seed), "--out-dir", str(out)])


def test_inpaint_mask_flags(tmp_path):
    den = write_json(tmp_path / "g.json", GaussianPrior(0.5, 0.04).to_dict())
    full = mask_file(tmp_path, "white.pgm", np.ones((8, 8)))
    empty = mask_file(tmp_path, "black.pgm", np.zeros((8, 8)))
    assert run_inpaint(tmp_path, den, full, tmp_path / "full") == 0
    assert run_inpaint(tmp_path, den, empty, tmp_path / "empty") == 0
    mf = json.loads((tmp_path / "full" / "manifest.json").read_text())
    me = json.loads((tmp_path / "empty" / "manifest.json").read_text())
    assert mf["mask"]["all_observed"] and not mf["mask"]["no_observations"]
    assert me["mask"]["no_observations"] and me["mask"]["n_observed"] == 0
    assert mf["levels"]["K"] > 0
    assert set(mf) == set(me)
    assert "error" in me["reports"][0]


def test_inpaint_mask_shape_mismatch(tmp_path):
    den = write_json(tmp_path / "g.json", GaussianPrior(0.5, 0.04).to_dict())
    bad = mask_file(tmp_path, "m.pgm", np.ones((4, 8)))
    assert run_inpaint(tmp_path, den, bad, tmp_path / "o") == 2


def test_inpaint_requires_sigma_minus_k_above_sigma0(tmp_path):
    den = write_json(tmp_path / "g.json", GaussianPrior(0.5, 0.04).to_dict())
    m = mask_file(tmp_path, "m.pgm", np.ones((8, 8)))
    rc = main(["inpaint", "--input", "synthetic", "--shape", "8x8", "--sigma0", "0.2", "--denoiser", den,
               "--mask", m, "--sigma-minus-k", "0.1", "--out-dir", str(tmp_path / "o")])
    assert rc == 2


@pytest.mark.slow
def test_text_mask_residuals_pass_in_90_percent_of_runs(tmp_path):
    shape = (32, 32, 3)
    spec = textured_gmm(shape)
    den = write_json(tmp_path / "tex.json", spec.to_dict())
    mask = text_mask(32, 32, "TEXT", scale=1, channels=1)
    observed = mask.as_bool().reshape(32, 32)
    assert 0 < observed.sum() < observed.size
    mpath = mask_file(tmp_path, "text.pgm", observed)
    passed = 0
    for seed in range(20):
        out = tmp_path / f"r{seed}"
        assert run_inpaint(tmp_path, den, mpath, out, seed=seed, shape="32x32x3", steps="10") == 0
        rep = json.loads((out / "manifest.json").read_text())["reports"][0]
        passed += bool(rep.get("passed"))
    assert passed >= 18


# validate


def test_validate_exit_codes(tmp_path, capsys):
    h = w = 64
    x = np.full(h * w, 0.5)
    noise = 0.1 * RandomStream(0).normal(h * w)
    clean = tmp_path / "clean.pgm"
    noisy = tmp_path / "noisy.pgm"
    pnm.save(str(clean), Signal(x, (h, w, 1)), maxval=65535)
    pnm.save(str(noisy), Signal(x + noise, (h, w, 1)), maxval=65535)
    assert main(["validate", "--noisy", str(noisy), "--restored", str(clean), "--sigma0", "0.1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"]

    uni = tmp_path / "uni.pgm"
    u = 0.1 * np.sqrt(3) * (2 * RandomStream(1).uniform(h * w) - 1)
    pnm.save(str(uni), Signal(x + u, (h, w, 1)), maxval=65535)
    assert main(["validate", "--noisy", str(uni), "--restored", str(clean), "--sigma0", "0.1"]) == 1
    rep = json.loads(capsys.readouterr().out)
    assert not rep["gaussian"]

    assert main(["validate", "--noisy", str(noisy), "--restored", str(noisy), "--sigma0", "0.1"]) == 1
    assert "error" in json.loads(capsys.readouterr().out)


def test_validate_shape_mismatch(tmp_path):
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    pnm.save(str(a), Signal(np.zeros(64), (8, 8, 1)))
    pnm.save(str(b), Signal(np.zeros(32), (4, 8, 1)))
    assert main(["validate", "--noisy", str(a), "--restored", str(b), "--sigma0", "0.1"]) == 2


# oracle-compare


def test_oracle_compare_conjugate(tmp_path, capsys):
    den = write_json(tmp_path / "g.json", GaussianPrior(0.0, 1.0).to_dict())
    rc = main(["oracle-compare", "--denoiser", den, "--y", "0.5", "--sigma0", "0.5", "--chains", "2000", "--seed", "0"])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0, out
    assert out["exact"]["mean"][0] == pytest.approx(0.4)
    assert out["exact"]["var"][0] == pytest.approx(0.2)


def test_oracle_compare_bimodal(tmp_path, capsys):
    den = write_json(tmp_path / "b.json", GMMPrior([0.5, 0.5], [-1.0, 1.0], [0.01, 0.01]).to_dict())
    rc = main(["oracle-compare", "--denoiser", den, "--y", "0", "--sigma0", "0.75", "--chains", "2000", "--seed", "0"])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0, out
    assert all(0.35 <= f <= 0.65 for f in out["basin_fraction"]["langevin"])


def test_oracle_compare_divergence(tmp_path, capsys):
    den = write_json(tmp_path / "g.json", GaussianPrior(0.0, 1.0).to_dict())
    rc = main(["oracle-compare", "--denoiser", den, "--y", "0.5", "--sigma0", "0.5", "--chains", "4",
               "--epsilon", "100", "--steps", "5"])
    assert rc == 3
    assert "diverged" in capsys.readouterr().err.lower()
