"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import filecmp
import json
import math
import time
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from entropy_cpd.bounds import be_error_term, kappa, twosample_bound, twosample_sigma
from entropy_cpd.categorical import CategoricalDistribution
from entropy_cpd.cli import main
from entropy_cpd.detect import delta_aic_counts
from entropy_cpd.divergence import (
    kl_rows,
    l1_distance,
    relative_entropy,
    reverse_pinsker_coefficient,
    triangle_surrogate_bound,
)
from entropy_cpd.harness import ExperimentConfig, run_experiment
from entropy_cpd.numerics import chi2_cdf, chi2_quantile, solve_cubic

GOLDEN = Path(__file__).parent / "golden"
U2, U4 = CategoricalDistribution.uniform(2), CategoricalDistribution.uniform(4)


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return _report


def test_criterion_01_chi2(report):
    t0 = time.perf_counter()
    table = abs(chi2_cdf(7.814728, 3) - 0.95)
    worst = 0.0
    for dof in range(1, 21):
        for p in np.linspace(0.01, 0.99, 25):
            worst = max(worst, abs(chi2_cdf(chi2_quantile(float(p), dof), dof) - p))
    dt = time.perf_counter() - t0
    ok = table <= 1e-5 and worst <= 1e-8 and dt < 1
    report(1, ok, f"|cdf - 0.95| = {table:.2e}, round-trip max {worst:.2e}, {dt:.2f}s")


def test_criterion_02_cubic(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    a = rng.choice([-1.0, 1.0], 10**5) * 10 ** rng.uniform(-8, 2, 10**5)
    d = 10 ** rng.uniform(-3, 3, 10**5)
    bad, worst_a = 0, None
    for ai, di in zip(a.tolist(), d.tolist()):
        for r in solve_cubic(ai, di):
            if abs(ai * r**3 + r * r - di) >= 1e-9 * max(1.0, di):
                bad += 1
                worst_a = ai if worst_a is None or abs(ai) > abs(worst_a) else worst_a
    single = solve_cubic(1.0, 2.0).roots
    fact = len(single) == 1 and abs(single[0] - 1.0) <= 1e-12
    bnd = solve_cubic(1.0, 4.0 / 27.0).roots
    boundary = abs(bnd[0] - 1 / 3) <= 1e-9 and all(abs(r + 2 / 3) <= 1e-9 for r in bnd[1:])
    dt = time.perf_counter() - t0
    ok = bad == 0 and fact and boundary and dt < 5
    detail = (f"{bad} roots over the residual tolerance in 10^5 draws with |a| in [1e-8, 1e2]"
              f" (largest offending |a| = {abs(worst_a) if worst_a else 0:.1e}; the far root near -1/a"
              f" has a float64 residual of order eps/a^2), factorization {fact}, boundary {boundary}, {dt:.1f}s")
    report(2, ok, detail)


def test_criterion_03_constants(report):
    t0 = time.perf_counter()
    # E_{3364,2} = 58 / sqrt(3364) = 1 exactly; the float value sits one ulp above
    ulp4 = 4 * np.finfo(float).eps
    e2_ok = be_error_term(3364, U2) <= 1.0 + ulp4 and be_error_term(3363, U2) > 1.0 + ulp4
    c4 = be_error_term(1, U4)
    n4 = math.ceil(c4 * c4)
    e4_ok = be_error_term(n4, U4) <= 1.0 < be_error_term(n4 - 1, U4) and round(n4, -3) == 137_000
    excess = (kappa(10.0, 2 * 10**6, 0.5, "up") - 10.0) / 10.0
    dt = time.perf_counter() - t0
    ok = e2_ok and e4_ok and abs(excess - 0.00316) <= 0.00005 and dt < 1
    report(3, ok, f"E_n,2 crosses at 3364: {e2_ok}; E_n,4 crosses at n = {n4}: {e4_ok};"
                  f" kappa excess {100 * excess:.4f}%, {dt:.3f}s")


def test_criterion_04_orderings(report):
    t0 = time.perf_counter()
    cfg = ExperimentConfig("quantile_vs_n", k=4, levels=(0.75, 0.95), trials=10_000, seed=4,
                           methods=("agrawal1", "agrawal2", "agrawal3", "mardia", "sanov_binom", "sanov_simple"))
    t = run_experiment(cfg)
    chain = np.vstack([t[m] for m in cfg.methods])
    order = bool(np.all(np.diff(chain, axis=0) >= -1e-12 * np.abs(chain[1:])))
    below = bool(np.all(t["empirical_one"] <= t["agrawal3"]))
    big = np.asarray(t["n"]) >= 100
    rel = np.abs(t["asymptotic1"][big] / t["empirical_one"][big] - 1)
    dt = time.perf_counter() - t0
    ok = order and below and rel.max() <= 0.10 and dt < 120
    report(4, ok, f"chain {order}, empirical <= agrawal3 {below},"
                  f" asymptotic vs empirical max {100 * rel.max():.1f}%, {dt:.1f}s")


def test_criterion_05_envelope(report):
    t0 = time.perf_counter()
    t = run_experiment(ExperimentConfig("cdf_envelope", k=2, n=10**5, trials=2000, grid_points=50, seed=5))
    emp, se = t["empirical_cdf"], t["se"]
    inside = (emp >= t["lower"] - 3 * se) & (emp <= t["upper"] + 3 * se)
    dt = time.perf_counter() - t0
    ok = len(emp) == 50 and bool(inside.all()) and dt < 60
    report(5, ok, f"{int(inside.sum())}/50 grid points inside the envelope, {dt:.1f}s")


def test_criterion_06_calibration(report):
    t0 = time.perf_counter()
    cfg = ExperimentConfig("power_vs_psi", k=4, n=100, psi_grid=(0.0,), trials=10_000, seed=6,
                           methods=("asymptotic2", "twosample3", "aic", "f"))
    t = run_experiment(cfg)
    r = {m: float(t[m][0]) for m in cfg.methods}
    dt = time.perf_counter() - t0
    ok = (0.04 <= r["asymptotic2"] <= 0.06 and r["twosample3"] <= 0.05 and r["aic"] > 0.06
          and r["f"] <= 0.055 and dt < 120)
    report(6, ok, ", ".join(f"{m} {100 * v:.2f}%" for m, v in r.items()) + f", {dt:.1f}s")


def test_criterion_07_power(report):
    t0 = time.perf_counter()
    cfg = ExperimentConfig("power_vs_psi", k=4, n=100, trials=10_000, seed=7, methods=("asymptotic2",))
    t = run_experiment(cfg)
    psi, rate, se = np.asarray(t["psi"]), t["asymptotic2"], t["asymptotic2_se"]
    tol = 2 * se.max()
    mono = True
    for side in (psi >= 0, psi <= 0):
        idx = np.flatnonzero(side)
        seq = rate[idx[np.argsort(np.abs(psi[idx]))]]
        mono &= bool(np.all(np.diff(seq) >= -tol))
    top = float(rate[np.isclose(psi, 0.8)][0])
    dt = time.perf_counter() - t0
    ok = mono and top >= 0.5 and dt < 120
    report(7, ok, f"monotone in |psi| within 2 SE: {mono}, power at 0.8 = {top:.4f}, {dt:.1f}s")


def test_criterion_08_equal_mean(report):
    t0 = time.perf_counter()
    cfg = ExperimentConfig("equal_mean_power", trials=10_000, seed=8, methods=("t", "asymptotic2"))
    t = run_experiment(cfg)
    tr = t["t"]
    top = float(t["asymptotic2"][np.isclose(t["p1"], 0.4)][0])
    dt = time.perf_counter() - t0
    ok = bool(np.all((tr >= 0.035) & (tr <= 0.065))) and top >= 0.8 and dt < 120
    report(8, ok, f"t-test rates in [{100 * tr.min():.2f}%, {100 * tr.max():.2f}%],"
                  f" asymptotic2 power at p1 = 0.4: {top:.4f}, {dt:.1f}s")


def _property_violations(rng, count=2000):
    out = {}
    k = rng.integers(2, 9, count)
    pairs = [(rng.dirichlet(np.ones(ki)), rng.dirichlet(np.ones(ki))) for ki in k]

    bad = 0
    for p, q in pairs:
        l1, d = l1_distance(p, q), relative_entropy(p, q).value
        beta = reverse_pinsker_coefficient(p, q)
        bad += not (l1 * l1 <= 2 * d + 1e-12 and d <= beta * l1 * l1 / 4 * (1 + 1e-12) + 1e-15)
    out["pinsker sandwich"] = bad

    bad = 0
    for (p, q), ki in zip(pairs, k):
        r = rng.dirichlet(np.ones(ki))
        bad += not triangle_surrogate_bound(p, q, r) >= relative_entropy(p, q).value * (1 - 1e-12)
    out["reverse-Pinsker surrogate"] = bad

    out["beta >= 2(k-1)"] = sum(reverse_pinsker_coefficient(p, q) < 2 * (ki - 1) * (1 - 1e-12)
                                for (p, q), ki in zip(pairs, k))

    # third-order residual of the affine AIC link, k = 4 with q_hat drawn on the full simplex
    n, bad, drawn = 100, 0, 0
    while drawn < count:
        q = rng.dirichlet(np.ones(4))
        eps = rng.normal(size=4)
        eps -= eps.mean()
        eps *= 0.05 * rng.uniform() / np.abs(eps).sum()
        p = q + eps
        if p.min() <= 0:
            continue
        drawn += 1
        value = delta_aic_counts(n * q[None], n * p[None])[0]
        lin = -6 + n * kl_rows(p[None], q[None])[0]
        bad += abs(value - lin) > 5 * n * np.sum(eps**2) ** 1.5
    out["delta-AIC third-order residual"] = bad

    bad = 0
    for _ in range(count):
        n, m = (int(v) for v in rng.integers(2, 5000, 2))
        ki, beta = int(rng.integers(2, 12)), float(rng.uniform(1, 40))
        x = beta * (ki - 1) * (m + n) / (m * n) * float(10 ** rng.uniform(1e-6, 3))
        s = twosample_sigma(x, n, m, ki, beta)
        bad += not 0 <= s < min(m, n)
    out["sigma in [0, min(m, n))"] = bad

    bad = 0
    for _ in range(count):
        n, ki, beta = int(rng.integers(10, 2000)), int(rng.integers(2, 9)), float(rng.uniform(1, 30))
        x = beta * (ki - 1) / n * float(rng.uniform(1.05, 20))
        lim = -n * x / beta + (ki - 1) * math.log(math.e * n * x / (beta * (ki - 1)))
        got = twosample_bound(x, n, 10**9, ki, beta, "t3")
        ref = math.exp(lim)
        bad += not abs(got - ref) <= 1e-4 * ref + 1e-300
    out["two-sample m -> infinity limit"] = bad
    return out


def test_criterion_09_properties(report):
    t0 = time.perf_counter()
    out = _property_violations(np.random.default_rng(9))
    dt = time.perf_counter() - t0
    ok = all(v == 0 for v in out.values()) and dt < 30
    report(9, ok, "; ".join(f"{name}: {v}/2000 violations" for name, v in out.items()) + f", {dt:.1f}s")


def test_criterion_10_determinism(report, tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "power.json"
    cfg.write_text(json.dumps({"experiment": "power_vs_psi", "trials": 2000, "psi_grid": [0.0, 0.4],
                               "methods": ["asymptotic2", "twosample3:rp", "aic", "t", "f"]}))
    series = resources.files("entropy_cpd") / "data" / "synthetic_change.csv"
    same = True
    for name, argv in (("sim", ["simulate", "power", "--config", str(cfg), "--seed", "10"]),
                       ("scan", ["scan", "--input", str(series), "--window", "250", "--k", "4",
                                 "--methods", "asymptotic2,aic,twosample3,twosample3:rp", "--alpha", "0.01"])):
        outs = []
        for threads in (1, 4):
            out = tmp_path / f"{name}{threads}.csv"
            assert main(argv + ["--out", str(out), "--threads", str(threads)]) == 0
            outs.append(out)
        same &= filecmp.cmp(*outs, shallow=False)
        same &= filecmp.cmp(*(o.with_suffix(".json") for o in outs), shallow=False)

    golden = tmp_path / "golden.csv"
    assert main(["scan", "--input", str(series), "--window", "250", "--k", "4", "--preprocess", "quantile",
                 "--reference", "previous", "--methods", "asymptotic2,aic,twosample3", "--alpha", "0.01",
                 "--out", str(golden)]) == 0
    matches = (golden.read_bytes() == (GOLDEN / "synthetic_scan.csv").read_bytes()
               and golden.with_suffix(".json").read_bytes() == (GOLDEN / "synthetic_scan.json").read_bytes())

    data = json.loads(golden.with_suffix(".json").read_text())
    w = data["meta"]["window"]
    stat = np.array([math.inf if v == "inf" else v for v in data["re_prev"]], dtype=float)
    boundary = 2 * w + np.arange(stat.size) - w  # start of the later window
    peak = int(np.argmax(stat))
    detected = bool(data["detections"]["asymptotic2"][peak])
    at_junction = abs(boundary[peak] - 1000) <= w
    dt = time.perf_counter() - t0
    ok = same and matches and detected and at_junction
    report(10, ok, f"threads 1 vs 4 identical: {same}; golden match: {matches};"
                   f" peak boundary {boundary[peak]} (junction 1000, window {w}) detected: {detected}, {dt:.1f}s")
