"""Acceptance criteria, run at full replicate counts.

Each test records one PASS/FAIL line; the lines are printed together at the
end of the pytest session (see conftest.py) and also when this file is run
as a script: ``python tests/test_acceptance.py``.

Set ``MVML_MNIST_DIR`` to a directory holding the four MNIST IDX files to
enable criterion 11; without it that criterion is skipped.
"""

import functools
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from mvml import harness as h
from mvml.kmeans import init_random, kmeans_fit, miscluster_rate
from mvml.model import build_model, sample_multiview
from mvml.sampleid import estimate_threshold
from mvml.spectral import (
    MahalanobisMetric,
    compute_rhat_linear,
    compute_rhat_ustat,
    metric_discrepancy,
    spectral_learn,
    sym_eig_top_k,
)

pytestmark = pytest.mark.acceptance

RESULTS = []
SEED = 0


def record(number, title, passed, detail, seconds, budget):
    within = seconds < budget
    status = "PASS" if passed and within else "FAIL"
    line = f"[{status}] criterion {number:>2}: {title} | {detail} | {seconds:.1f}s (budget {budget:.0f}s)"
    RESULTS.append(line)
    print(line)
    return passed and within


def timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


# ---------------------------------------------------------------------------
# shared experiment runs


@functools.lru_cache(maxsize=None)
def fig4_null_and_alt():
    cfg = h.default_config("fig4").with_overrides(r_grid=(0.0, 0.3), seed=SEED)
    return timed(lambda: h.run_experiment(cfg))


# ---------------------------------------------------------------------------


def test_c01_estimator_equivalence():
    def run():
        rng = np.random.default_rng(SEED)
        worst = 0.0
        for _ in range(100):
            m, n, d = rng.integers(2, 9), rng.integers(2, 6), rng.integers(1, 7)
            X = rng.standard_normal((m, n, d)) * rng.uniform(0.1, 10)
            worst = max(worst, float(np.abs(compute_rhat_ustat(X) - compute_rhat_linear(X)).max()))
        return worst

    worst, sec = timed(run)
    assert record(1, "R_hat pair form == linear form", worst < 1e-9, f"max abs diff {worst:.2e} (< 1e-9)", sec, 5)


def test_c02_unbiasedness():
    def run():
        model = build_model(6, 2, 1.0, 1.0, rng=SEED)
        target = model.B @ model.B.T
        draws = np.empty((2000, 6, 6))
        for rep in range(2000):
            draws[rep] = compute_rhat_linear(sample_multiview(model, 50, 3, h.replicate_rng(SEED, rep)))
        se = draws.std(axis=0, ddof=1) / math.sqrt(len(draws))
        return float((np.abs(draws.mean(axis=0) - target) / se).max())

    z, sec = timed(run)
    assert record(2, "R_hat unbiased for BB^T", z <= 4, f"max |mean - BB^T| = {z:.2f} MC SE (<= 4)", sec, 30)


def test_c03_rate_decay():
    def run():
        model = build_model(50, 10, 4.0, 1.0, rng=SEED)
        P = model.U @ model.U.T
        med = []
        for m in (250, 1000, 4000):
            errs = [
                metric_discrepancy(spectral_learn(sample_multiview(model, m, 10, h.replicate_rng(SEED + m, s)), 10).m_star_star, P)
                for s in range(50)
            ]
            med.append(float(np.median(errs)))
        return med

    med, sec = timed(run)
    ok = med[0] > med[1] > med[2] and med[2] < med[0] / 2.5
    detail = "median Delta at m=250/1000/4000: " + " / ".join(f"{v:.3f}" for v in med) + f" (need decreasing, last < {med[0] / 2.5:.3f})"
    assert record(3, "spectral rate decay", ok, detail, sec, 120)


TABLE3_K10 = {
    "euclid": {2: 0.21, 3: 0.42, 4: 0.77},
    "dstar_hat_m1000": {2: 0.24, 3: 0.64, 4: 0.95},
    "dstar_hat_m5000": {2: 0.27, 3: 0.65, 4: 0.96},
    "dstar_true": {2: 0.27, 3: 0.67, 4: 0.97},
    "dss_hat_m1000": {2: 0.47, 3: 0.90, 4: 0.99},
    "dss_hat_m5000": {2: 0.48, 3: 0.90, 4: 1.00},
    "dss_true": {2: 0.47, 3: 0.90, 4: 1.00},
}


def test_c04_table3_regression():
    cfg = h.default_config("table3").with_overrides(K=(10,), dz_norms=(2.0, 3.0, 4.0), seed=SEED)
    table, sec = timed(lambda: h.run_experiment(cfg))
    misses = []
    worst = 0.0
    for dist, row in TABLE3_K10.items():
        for t, printed in row.items():
            got = table.estimate(dist, "K=10/dz_norm", t)
            worst = max(worst, abs(got - printed))
            if abs(got - printed) > 0.06:
                misses.append(f"{dist}@{t}: {got:.3f} vs {printed:.2f}")
    detail = f"21 cells, max |diff| {worst:.3f} (<= 0.06)" + (f"; off: {', '.join(misses)}" if misses else "")
    assert record(4, "table3 K=10 powers", not misses, detail, sec, 300)


def test_c05_table5_regression():
    cfg = h.default_config("table5").with_overrides(r_grid=(1.0,), seed=SEED)
    table, sec = timed(lambda: h.run_experiment(cfg))
    perfect = {d: table.estimate(d, "start=perfect/r", 1.0) for d in ("euclid", "dss_true", "dstar_true")}
    rand_e = table.estimate("euclid", "start=random/r", 1.0)
    rand_dss = table.estimate("dss_true", "start=random/r", 1.0)
    checks = {
        "perfect euclid 0.05+-0.03": abs(perfect["euclid"] - 0.05) <= 0.03,
        "perfect D** 0.05+-0.03": abs(perfect["dss_true"] - 0.05) <= 0.03,
        "perfect D* 0.15+-0.05": abs(perfect["dstar_true"] - 0.15) <= 0.05,
        "random D** <= euclid + 0.02": rand_dss <= rand_e + 0.02,
    }
    detail = (
        f"perfect: euclid {perfect['euclid']:.3f}, D** {perfect['dss_true']:.3f}, D* {perfect['dstar_true']:.3f}; "
        f"random: D** {rand_dss:.3f} vs euclid {rand_e:.3f}; "
        + ", ".join(f"{k}={'ok' if v else 'MISS'}" for k, v in checks.items())
    )
    assert record(5, "table5 r=1 mis-clustering", all(checks.values()), detail, sec, 600)


def test_c06_fig4_ordering():
    table, sec = fig4_null_and_alt()
    dss = table.estimate("dss_hat_m5000", "setting=1/r", 0.3)
    euc = table.estimate("euclid", "setting=1/r", 0.3)
    sizes = {r.distance: r for r in table.rows if r.condition_value == 0.0}
    over = [f"{d}={r.estimate:.3f}" for d, r in sizes.items() if r.estimate > 0.05 + 2 * math.sqrt(0.05 * 0.95 / r.reps)]
    ok = dss - euc >= 0.05 and not over
    detail = f"r=0.3 power D_hat** m5000 {dss:.3f} vs euclid {euc:.3f} (gap >= 0.05); r=0 max size {max(r.estimate for r in sizes.values()):.3f}"
    if over:
        detail += f"; oversize: {', '.join(over)}"
    assert record(6, "fig4 power ordering", ok, detail, sec, 600)


def test_c07_fig5_ordering():
    cfg = h.default_config("fig5").with_overrides(s_list=(500, 2000, 5000), r_grid=(), seed=SEED)
    table, sec = timed(lambda: h.run_experiment(cfg))
    cond = "excess_risk/r=0.9/s"
    dss = table.get("dss_hat_m5000", cond, 2000.0)
    euc = table.get("euclid", cond, 2000.0)
    bad = []
    for dist in h.DISTANCES:
        rows = [table.get(dist, "misclass/r=0.9/s", float(s)) for s in (500, 2000, 5000)]
        for a, b in zip(rows, rows[1:]):
            if b.estimate > a.estimate + 2 * math.hypot(a.se, b.se):
                bad.append(f"{dist} {a.condition_value:g}->{b.condition_value:g}")
    ok = euc.estimate - dss.estimate >= 0.01 and not bad
    dss1k = table.get("dss_hat_m1000", cond, 2000.0).estimate
    detail = (
        f"s=2000 excess risk D_hat** m5000 {dss.estimate:.4f} (m1000 {dss1k:.4f}) vs euclid {euc.estimate:.4f} (gap >= 0.01); "
        + ("misclassification non-increasing in s for all distances" if not bad else "increase: " + ", ".join(bad))
    )
    assert record(7, "fig5 k-NN ordering", ok, detail, sec, 900)


def test_c08_permutation_size():
    table, sec = fig4_null_and_alt()
    sizes = {r.distance: r for r in table.rows if r.condition_value == 0.0}
    limit = 0.05 + 2 * math.sqrt(0.05 * 0.95 / 500)
    worst = max(sizes.values(), key=lambda r: r.estimate)
    ok = all(r.estimate <= limit for r in sizes.values()) and all(r.reps == 500 for r in sizes.values())
    detail = f"max size {worst.estimate:.3f} ({worst.distance}) <= {limit:.3f} over 7 distances, 500 reps"
    assert record(8, "permutation test size under alpha=0", ok, detail, sec, 300)


def test_c09_sampleid_size():
    def run():
        cfg = h.default_config("table3").with_overrides(seed=SEED)
        model = h.make_model(h.experiment_basis(cfg, 10), 4.0, 1.0)
        rng = np.random.default_rng(np.random.SeedSequence(SEED, spawn_key=(9,)))
        metrics, _ = h.all_metrics(model, 10, (1000, 5000), rng)
        rates = {}
        for name, metric in metrics.items():
            thr = estimate_threshold(sample_multiview(model, 10_000, 2, rng), metric)
            fresh = sample_multiview(model, 10_000, 2, rng).data
            rates[name] = float(np.mean(metric.pair_sq(fresh[:, 0], fresh[:, 1]) > thr.value))
        return rates

    rates, sec = timed(run)
    ok = all(abs(r - 0.05) <= 0.02 for r in rates.values())
    detail = "same-sample rejection " + ", ".join(f"{k}={v:.4f}" for k, v in rates.items()) + " (0.05 +- 0.02)"
    assert record(9, "sample identification size", ok, detail, sec, 60)


def test_c10_kmeans_invariants():
    def run():
        rng = np.random.default_rng(SEED)
        monotone = flip = True
        for _ in range(100):
            s, d = int(rng.integers(4, 80)), int(rng.integers(1, 8))
            X = rng.standard_normal((s, d)) + rng.integers(0, 2, (s, 1)) * rng.uniform(0, 4)
            G = rng.standard_normal((d, int(rng.integers(1, d + 1))))
            metric = MahalanobisMetric(factor=G) if rng.random() < 0.7 else None
            res = kmeans_fit(X, metric, init_random(X, rng))
            trace = np.array(res.objective_trace)
            monotone &= bool(np.all(np.diff(trace) <= 1e-12 * max(1.0, trace[0])))
            truth = np.where(rng.random(s) < 0.5, 1, -1)
            flip &= miscluster_rate(res.labels, truth) == miscluster_rate(-res.labels, truth)
            flip &= miscluster_rate(truth, truth) == 0.0 and miscluster_rate(-truth, truth) == 0.0
        return monotone, flip

    (monotone, flip), sec = timed(run)
    assert record(10, "k-means invariants", monotone and flip, f"objective non-increasing: {monotone}; flip invariance exact: {flip}", sec, 10)


def _mnist_dir():
    for candidate in (os.environ.get("MVML_MNIST_DIR"), "data/mnist", str(Path.home() / "data" / "mnist")):
        if candidate and Path(candidate).is_dir():
            try:
                from mvml.mnist import find_split

                find_split(candidate, "train")
                find_split(candidate, "test")
                return candidate
            except FileNotFoundError:
                continue
    return None


def test_c11_table6_mnist():
    directory = _mnist_dir()
    if directory is None:
        RESULTS.append("[SKIP] criterion 11: table6 MNIST ordering | MNIST IDX files not found (set MVML_MNIST_DIR)")
        pytest.skip("MNIST files not on disk")
    cfg = h.default_config("table6").with_overrides(mnist_dir=directory, s_list=(1000,), seed=SEED)
    table, sec = timed(lambda: h.run_experiment(cfg))
    e = {d: table.estimate(d, "mnist/s", 1000.0) for d in ("euclid", "dstar_hat", "dss_hat")}
    ok = e["dss_hat"] < e["euclid"] < e["dstar_hat"]
    soft = abs(e["dss_hat"] - 0.094) <= 0.03
    detail = f"errors D_hat** {e['dss_hat']:.3f} < euclid {e['euclid']:.3f} < D_hat* {e['dstar_hat']:.3f}; soft target 0.094+-0.03: {'met' if soft else 'missed'}"
    assert record(11, "table6 MNIST ordering", ok, detail, sec, 1200)


def _power_iteration(A, tol=1e-15, max_iter=200_000):
    v = np.ones(A.shape[0]) / math.sqrt(A.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        v = w / np.linalg.norm(w)
        new = float(v @ A @ v)
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    return lam


def test_c12_eigensolver():
    def run():
        rng = np.random.default_rng(SEED)
        worst = {"lapack": 0.0, "jacobi": 0.0}
        for _ in range(100):
            d = int(rng.integers(1, 17))
            G = rng.standard_normal((d, d))
            A = G + G.T
            for method in worst:
                w, V = sym_eig_top_k(A, d, method=method)
                worst[method] = max(worst[method], float(np.abs(A - (V * w) @ V.T).max()))
        G = rng.standard_normal((100, 100))
        A = G @ G.T / 100
        top = _power_iteration(A)
        gaps = {m: abs(sym_eig_top_k(A, 1, method=m)[0][0] - top) for m in worst}
        return worst, gaps

    (worst, gaps), sec = timed(run)
    ok = max(worst.values()) < 1e-9 and max(gaps.values()) < 1e-8
    detail = ", ".join(f"{m}: recon {worst[m]:.1e}, top-eig vs power {gaps[m]:.1e}" for m in worst) + " (< 1e-9, < 1e-8)"
    assert record(12, "eigensolver accuracy", ok, detail, sec, 5)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
