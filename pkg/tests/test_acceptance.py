"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line (also repeated in the
terminal summary) and enforces its runtime budget.
"""

import json
import math
import struct

import numpy as np
import pytest

from extremecast import cli, evt_core, exbooster, exloss, grid, lab, metrics
from extremecast.errors import GridFormatError

from acceptance_log import criterion
from oracles import block_max_moments, oracle_s1, quad_area_over, quad_area_under, sedi_reference


@criterion("1", "scaling solver consistency", budget=5)
def test_criterion_1_solver_consistency():
    rng = np.random.default_rng(2024)
    worst_res = worst_area = worst_quad = 0.0
    for _ in range(100):
        e, s2, sig = rng.uniform(0.01, 1), rng.uniform(0.5, 2), rng.uniform(0.1, 10)
        sol = exloss.solve_scaling(e * sig, s2 * sig, sig)
        assert abs(sol.residual) < 1e-12
        assert abs(sol.area_r1 - sol.area_r2) < 1e-10 * sig
        q1 = quad_area_under(e * sig, sol.s1, sig)
        q2 = quad_area_over(e * sig, s2 * sig, sig)
        rel = max(abs(sol.area_r1 - q1) / q1, abs(sol.area_r2 - q2) / q2)
        assert rel < 1e-8
        worst_res = max(worst_res, abs(sol.residual))
        worst_area = max(worst_area, abs(sol.area_r1 - sol.area_r2) / sig)
        worst_quad = max(worst_quad, rel)
    return f"max residual {worst_res:.1e}, max area gap/scale {worst_area:.1e}, max quad rel err {worst_quad:.1e}"


@criterion("2", "published constant reconciliation", budget=10)
def test_criterion_2_constant_reconciliation(capsys):
    s1 = exloss.solve_scaling(0.1, 1.0).s1
    ref = oracle_s1(0.1, 1.0)
    assert abs(s1 - ref) < 1e-10
    assert s1 == pytest.approx(0.983, abs=5e-4)
    assert cli.main(["solve-scaling", "--epsilon", "0.1", "--s2", "1.0"]) == 0
    report = json.loads(capsys.readouterr().out)
    eps = report["published_reference"]["epsilon_giving_stated_s1"]
    assert eps == pytest.approx(0.59, abs=0.02)
    assert report["published_reference"]["stated_s1"] == 0.9
    assert "does not solve" in report["published_reference"]["note"]
    # the sweep brackets s1 = 0.9
    sweep = {r["epsilon"]: r["s1"] for r in report["sweep"]}
    assert sweep[0.5] > 0.9 > sweep[0.7]
    assert exloss.solve_scaling(eps, 1.0).s1 == pytest.approx(0.9, abs=1e-10)
    return f"s1(0.1) = {s1:.10f} (oracle {ref:.10f}); s1 = 0.9 at epsilon = {eps:.6f}"


@criterion("3", "EVT objective suite", budget=5)
def test_criterion_3_objectives():
    rng = np.random.default_rng(3)
    for _ in range(100):
        y, s = rng.uniform(-10, 10), rng.uniform(0.1, 5)
        for obj in (evt_core.obj_max, evt_core.obj_min):
            x, fx = evt_core.golden_section_minimize(lambda m: obj(m, y, s), y - 10 * s, y + 10 * s)
            assert abs(x - y) < 1e-6
            assert abs(fx - (1 + math.log(s))) < 1e-8
    worst = 0.0
    for _ in range(100):
        y, s = rng.uniform(-5, 5), rng.uniform(0.2, 5)
        mu = y + rng.uniform(-2, 2) * s
        h = 1e-5 * s
        fd = (evt_core.obj_max(mu + h, y, s) - evt_core.obj_max(mu - h, y, s)) / (2 * h)
        g = evt_core.obj_max_grad(mu, y, s)
        if abs(fd) > 1e-3:
            err = abs(g - fd) / abs(fd)
            assert err < 1e-6
            worst = max(worst, err)
    for _ in range(1000):
        y, s = rng.uniform(-100, 100), rng.uniform(0.01, 100)
        d = s * 10 ** rng.uniform(-3, 1.5)
        assert evt_core.obj_max(y - d, y, s) < evt_core.obj_max(y + d, y, s)
    return f"worst gradient rel err {worst:.1e}"


@criterion("4", "estimator bias correction (20 seeds, N = 1e5)", budget=60)
def test_criterion_4_estimator_bias():
    shifts = []
    for seed in range(20):
        r = lab.run_estimator_bias(lab.ExperimentConfig(seed=seed, n_samples=100_000))
        s, f = r.scalars, r.flags
        assert abs(s["theta_mse"] - s["sample_mean"]) < 1e-3
        assert s["shift"] > 0, f"seed {seed}: shift {s['shift']}"
        assert f["mse_grid_descent_agree"] and f["exloss_grid_descent_agree"], f"seed {seed}"
        shifts.append(s["shift"])
    return f"shift range [{min(shifts):.4f}, {max(shifts):.4f}], 20/20 positive"


@criterion("5", "ExBooster fidelity", budget=30)
def test_criterion_5_booster_fidelity():
    noise = np.array([[0.1, -0.1, 0.1, -0.1], [-0.1, 0.1, -0.1, 0.1]])
    assert exbooster.boost_slice([1.0, 2.0, 3.0, 4.0], noise).tolist() == [0.9, 1.9, 2.9, 3.9]
    rng = np.random.default_rng(5)
    for seed in range(50):
        n = int(rng.integers(4, 200))
        f = (rng.permutation(n) + rng.uniform(0, 0.5)).reshape(1, n).astype(float)
        assert np.array_equal(exbooster.ex_booster(f, exbooster.BoosterConfig(10, 0.0, seed)), f)
    for trial in range(100):
        h, w = rng.integers(2, 20, size=2)
        f = rng.normal(size=(h, w))
        cfg = exbooster.BoosterConfig(int(rng.integers(2, 60)), float(rng.uniform(0, 2)), trial)
        out = exbooster.ex_booster(f, cfg)
        assert np.array_equal(exbooster.sort_index(out.ravel()), exbooster.sort_index(f.ravel()))
    cfg = exbooster.BoosterConfig()
    assert (cfg.sampling_nums, cfg.noise_scale, cfg.k) == (50, 0.1, 25)
    exbooster.ex_booster(rng.normal(size=(1, 2, 8, 8)), cfg)


@criterion("6", "booster RQE recovery (20 seeds)", budget=60)
def test_criterion_6_booster_recovery():
    before, after = [], []
    for seed in range(20):
        r = lab.run_booster_study(lab.ExperimentConfig(seed=seed))
        s = r.scalars
        assert abs(s["rqe_boosted"]) < abs(s["rqe_smoothed"]), f"seed {seed}"
        assert s["sedi_90th_boosted"] >= s["sedi_90th_smoothed"], f"seed {seed}"
        before.append(s["rqe_smoothed"])
        after.append(s["rqe_boosted"])
    return f"mean RQE {np.mean(before):+.3f} -> {np.mean(after):+.3f}"


@criterion("7", "metrics identities", budget=5)
def test_criterion_7_metrics():
    rng = np.random.default_rng(7)
    x = rng.uniform(1, 5, size=(3, 16, 32))
    lat = np.linspace(90, -90, 16)
    assert metrics.rqe(x, x) == 0.0
    assert np.all(metrics.weighted_rmse(x, x, lat) == 0)
    v = metrics.sedi_from_rates(0.8, 0.1)
    assert abs(v - 0.845) <= 5e-4
    assert v == pytest.approx(sedi_reference(0.8, 0.1), abs=1e-14)
    for h in (0.05, 0.5, 0.9):
        assert metrics.sedi_from_rates(h, h) == pytest.approx(0.0, abs=1e-14)
    assert metrics.rqe(0.8 * x, x) < 0 < metrics.rqe(1.2 * x, x)
    return f"SEDI(0.8, 0.1) = {v:.6f}"


def _block_maxima_check(n_blocks, skew_band, mean_band):
    r = lab.run_max_histogram(lab.ExperimentConfig(seed=0, n_blocks=n_blocks, block_size=10_000))
    sk, mu = r.scalars["maxima_skewness"], r.scalars["maxima_mean"]
    note = f"seed 0: skewness {sk:.4f} in {list(skew_band)}, mean {mu:.4f} in {list(mean_band)}"
    assert skew_band[0] <= sk <= skew_band[1], note
    assert mean_band[0] <= mu <= mean_band[1], note
    return note


@criterion("8", "block maxima statistics, 1e4 x 1e4", budget=120)
def test_criterion_8_block_maxima_full():
    note = _block_maxima_check(10_000, (0.9, 1.4), (3.7, 4.0))
    # the band sits above the exact skewness, so passing depends on sampling noise
    return note + "; exact skewness 0.8625 is below this band"


@criterion("8r", "block maxima statistics, reduced 1e3 x 1e4", budget=15)
def test_criterion_8_block_maxima_reduced():
    return _block_maxima_check(1_000, (0.65, 1.65), (3.6, 4.1))


def test_block_maxima_against_exact_moments():
    # the exact skewness of the maximum of 1e4 standard normals is 0.862; the
    # sample estimate at 1e4 blocks has a standard error of roughly 0.03-0.04
    mean, sd, skew = block_max_moments(10_000)
    assert skew == pytest.approx(0.8625, abs=1e-3)
    r = lab.run_max_histogram(lab.ExperimentConfig(seed=0))
    assert r.scalars["maxima_mean"] == pytest.approx(mean, abs=4 * sd / 100)
    assert r.scalars["maxima_var"] == pytest.approx(sd**2, rel=0.05)
    assert r.scalars["maxima_skewness"] == pytest.approx(skew, abs=0.15)


@criterion("9", "XGRID1 round trip and corruption codes", budget=10)
def test_criterion_9_format():
    rng = np.random.default_rng(9)
    for _ in range(200):
        c, h, w = rng.integers(1, 9), rng.integers(1, 65), rng.integers(1, 129)
        f = grid.GriddedField(rng.normal(size=(c, h, w)).astype(np.float32), [f"c{i}" for i in range(c)])
        g = grid.decode_grid(grid.encode_grid(f))
        assert g.identical(f) and g.data.tobytes() == f.data.tobytes()
    buf = grid.encode_grid(grid.GriddedField(np.ones((2, 3, 4), np.float32), ["a", "b"]))
    n_meta = struct.unpack_from("<I", buf, 18)[0]
    cases = {
        "bad_magic": b"XGRIDX" + buf[6:],
        "truncated": buf[:-3],
        "dim_overflow": buf[:6] + struct.pack("<IIII", 2**20, 2**20, 1, n_meta) + buf[22:],
        "non_finite": buf[:-4] + struct.pack("<f", float("inf")),
        "bad_metadata": buf[:22] + b"\xff" * n_meta + buf[22 + n_meta :],
        "trailing_data": buf + b"\x00\x00",
    }
    for code, bad in cases.items():
        with pytest.raises(GridFormatError) as err:
            grid.decode_grid(bad)
        assert err.value.code == code
    return f"200 round trips bitwise equal; {len(cases)} corruption codes distinct"
