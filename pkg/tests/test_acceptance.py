"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Runtime budgets are asserted alongside the numeric bounds. Ensemble-heavy
criteria run the default network with every ``n_estimators`` scaled down
(1/10 for the stacking-dominance check, 1/20 for the permutation null); the
wiring, depths and model count are unchanged.
"""

import json
import time

import numpy as np
import pytest

from gfstack import _accel
from gfstack.bundle import load_bundle
from gfstack.cli import main
from gfstack.harness import compare_models, run_cv_experiment
from gfstack.importance import compute_importance
from gfstack.learners import REGISTRY, BayesianRidge, Estimator, EstimatorSpec, GradientBoosting, KernelRidge, Ridge, fit_cart
from gfstack.metrics import baseline_mse, mse
from gfstack.preprocess import FittedPipeline, PcaState, SelectorState, StandardizerState, f_regression, fit_pca, fit_pipeline
from gfstack.stacknet import StackNetConfig, default_config, fit_stacknet
from gfstack.synthetic import make_benchmark, make_volume_table
from gfstack.table import FeatureTable, FoldPlan, SeededRng, split_indices, write_csv


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line straight to the terminal, then assert."""

    def emit(number, title, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail} ({elapsed:.1f}s / {budget:g}s)")
        assert ok, f"criterion {number}: {detail}, {elapsed:.1f}s (budget {budget}s)"

    return emit


def test_01_baseline_identity(verdict):
    t0 = time.perf_counter()
    y = np.random.default_rng(20190).normal(0.0, 9.19, 4154)
    base = baseline_mse(y)
    exact = base == mse(np.full_like(y, y.mean()), y) and base == pytest.approx(np.var(y), rel=1e-14)
    verdict(1, "baseline identity", exact and 80 <= base <= 89, f"baseline={base:.3f}, in [80, 89], identity={exact}", time.perf_counter() - t0, 1)


def test_02_linear_oracles(verdict):
    t0 = time.perf_counter()
    worst_stat = worst_dual = 0.0
    for seed in range(20):
        g = np.random.default_rng(seed)
        n, d = int(g.integers(2, 31)), int(g.integers(1, 31))
        X, y = g.normal(size=(n, d)), g.normal(size=n)
        alpha = float(g.uniform(0.05, 20))
        w = Ridge(alpha).fit(X, y).coef_
        xc, yc = X - X.mean(0), y - y.mean()
        rhs = xc.T @ yc
        worst_stat = max(worst_stat, np.max(np.abs((xc.T @ xc + alpha * np.eye(d)) @ w - rhs)) / (1 + np.max(np.abs(rhs))))
        Q = g.normal(size=(10, d))
        dual = KernelRidge(alpha).fit(X, y).predict(Q)
        primal = Ridge(alpha, fit_intercept=False).fit(X, y).predict(Q)
        worst_dual = max(worst_dual, np.max(np.abs(dual - primal)))
    ok = worst_stat < 1e-8 and worst_dual < 1e-8
    verdict(2, "ridge stationarity and KRR duality", ok, f"stationarity {worst_stat:.1e}, duality {worst_dual:.1e}", time.perf_counter() - t0, 5)


def test_03_bayesian_shrinkage(verdict):
    t0 = time.perf_counter()
    wins = 0
    for seed in range(20):
        g = np.random.default_rng(seed)
        X, y = g.normal(size=(200, 5)), g.normal(size=200)
        ols = np.linalg.lstsq(np.column_stack([X, np.ones(200)]), y, rcond=None)[0][:5]
        wins += np.linalg.norm(BayesianRidge().fit(X, y).coef_) < 0.1 * np.linalg.norm(ols)
    verdict(3, "Bayesian ridge shrinkage on noise", wins >= 18, f"{wins}/20 seeds below 0.1 x OLS norm (need 18)", time.perf_counter() - t0, 10)


def brute_force_gap(x, y):
    xs = np.unique(x)
    best, gap = np.inf, None
    for a, b in zip(xs[:-1], xs[1:]):
        left = x <= a
        sse = ((y[left] - y[left].mean()) ** 2).sum() + ((y[~left] - y[~left].mean()) ** 2).sum()
        if sse < best - 1e-12:
            best, gap = sse, (a, b)
    return gap


def test_04_tree_correctness(verdict):
    t0 = time.perf_counter()
    hits = 0
    constraints = True
    for seed in range(50):
        g = np.random.default_rng(seed)
        x = g.uniform(0, 1, 80)
        step = g.uniform(0.2, 0.8)
        y = np.where(x > step, g.uniform(1, 3), g.uniform(-3, -1)) + 0.1 * g.normal(size=80)
        tree = fit_cart(x[:, None], y, max_depth=1)
        lo, hi = brute_force_gap(x, y)
        hits += lo <= tree.threshold[0] < hi and lo <= step < hi
        depth, leaf = int(g.integers(1, 8)), int(g.integers(1, 6))
        X = g.normal(size=(120, 4))
        for random_split in (False, True):
            t = fit_cart(X, X[:, 0] + g.normal(size=120), depth, leaf, random_thresholds=random_split, seed=seed)
            leaves = t.apply(X)
            counts = np.bincount(leaves, minlength=t.node_count)[np.unique(leaves)]
            constraints &= t.max_depth <= depth and counts.min() >= leaf
    verdict(4, "CART threshold recovery", hits == 50 and constraints, f"{hits}/50 gaps recovered, constraints respected={constraints}", time.perf_counter() - t0, 10)


def test_05_boosting_monotone(verdict):
    t0 = time.perf_counter()
    good = 0
    for seed in range(10):
        g = np.random.default_rng(seed)
        X = g.normal(size=(200, 8))
        y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + g.normal(size=200)
        loss = np.array(GradientBoosting(40, 3).fit(X, y).train_loss_)
        good += len(loss) == 41 and bool(np.all(np.diff(loss) <= 0))
    verdict(5, "boosting loss non-increasing", good == 10, f"{good}/10 datasets monotone over 40 stages", time.perf_counter() - t0, 10)


def test_06_minka_rank(verdict):
    t0 = time.perf_counter()
    hits = 0
    for seed in range(100):
        g = np.random.default_rng(seed)
        basis = np.linalg.qr(g.normal(size=(50, 3)))[0]
        x = (g.normal(size=(1000, 3)) * np.sqrt([10.0, 6.0, 3.0])) @ basis.T + g.normal(size=(1000, 50))
        hits += fit_pca(x).r == 3
    verdict(6, "Minka rank recovery", hits >= 95, f"{hits}/100 seeds recover rank 3", time.perf_counter() - t0, 30)


def test_07_f_test_oracle(verdict):
    t0 = time.perf_counter()
    g = np.random.default_rng(7)
    y = g.normal(size=60)
    X = g.normal(size=(60, 100)) + np.outer(y, g.uniform(-1, 1, 100))
    f = f_regression(X, y)
    worst = 0.0
    for j in range(100):
        A = np.column_stack([np.ones(60), X[:, j]])
        beta = np.linalg.lstsq(A, y, rcond=None)[0]
        rss1 = np.sum((y - A @ beta) ** 2)
        oracle = (np.sum((y - y.mean()) ** 2) - rss1) / (rss1 / 58)
        worst = max(worst, abs(f[j] - oracle) / abs(oracle))
    verdict(7, "F statistic vs one-predictor OLS", worst < 1e-8, f"max relative error {worst:.1e}", time.perf_counter() - t0, 2)


@pytest.mark.slow
def test_08_stacking_dominance(verdict):
    t0 = time.perf_counter()
    X, y = make_benchmark(n=800, k=24, r2=0.1, seed=0)
    report = compare_models(default_config().scaled(0.1), X, y, k_folds=10, seed=0)
    singles = {label: value for label, value in report.model_rows if label != "StackNet"}
    best_label = min(singles, key=singles.get)
    best = singles[best_label]
    ok = report.pooled_mse <= 1.02 * best and report.pooled_mse < report.baseline_mse
    detail = f"StackNet {report.pooled_mse:.2f} vs best single {best:.2f} ({best_label}) x1.02, baseline {report.baseline_mse:.2f}"
    verdict(8, "stacking dominance (n_estimators/10)", ok, detail, time.perf_counter() - t0, 600)


class _Memorizer(Estimator):
    kind = "memorizer"

    def hyperparams(self):
        return {}

    def fit(self, X, y):
        self.seen = set(np.asarray(X)[:, 0].tolist())
        self.train_shape_ = np.shape(X)
        return self

    def predict(self, X):
        return np.array([1.0 if v in self.seen else -1.0 for v in np.asarray(X)[:, 0]])


def test_09_leakage_audits(verdict, monkeypatch):
    t0 = time.perf_counter()
    monkeypatch.setitem(REGISTRY, "memorizer", _Memorizer)
    g = np.random.default_rng(9)
    n = 120
    X = np.column_stack([np.arange(n, dtype=float), g.normal(size=(n, 4))])
    y = X[:, 1] + g.normal(size=n)
    mem = EstimatorSpec("memorizer")
    cfg = StackNetConfig([[mem, EstimatorSpec("ridge")], [mem, EstimatorSpec("extra_trees", {"n_estimators": 5, "max_depth": 3})], [EstimatorSpec("ridge")]])
    net = fit_stacknet(cfg, X, y, SeededRng(0))
    clean = all(np.all(meta[:, 0] == -1.0) for meta in net.oof_meta[:2])
    for assign in net.oof_assignments:
        plan = FoldPlan(cfg.oof_folds, assign)
        covered = np.zeros(n, dtype=int)
        for f in range(plan.k):
            train, test = split_indices(plan, f)
            clean &= not np.intersect1d(train, test).size
            covered[test] += 1
        clean &= bool(np.all(covered == 1))
    table = make_volume_table(n=200, p=30, n_factors=12, seed=2)
    small = StackNetConfig([[EstimatorSpec("bayesian_ridge"), EstimatorSpec("random_forest", {"n_estimators": 5, "max_depth": 4})], [EstimatorSpec("ridge")]])
    report = run_cv_experiment(table, small, k_folds=5, select_k=6, seed=0)
    distinct = len(set(report.pipeline_digests)) == 5
    verdict(9, "leakage audits", clean and distinct, f"OOF rows never self-trained={clean}, per-fold pipeline digests distinct={distinct}", time.perf_counter() - t0, 60)


def _importance_oracle(pipe):
    sel = [int(j) for j in pipe.selector.selected]
    f = [float(pipe.selector.f_values[j]) for j in sel]
    lam = [float(pipe.pca.eigenvalues[j]) for j in sel]
    rows = []
    for i in range(pipe.pca.components.shape[0]):
        rows.append(sum(abs(f[a] / sum(f) * lam[a] / sum(lam) * float(pipe.pca.components[i, j])) for a, j in enumerate(sel)))
    return np.array([100.0 * r / sum(rows) for r in rows])


def _axis_pipeline(columns, f_values):
    p = 6
    comps = np.eye(p)[:, columns]
    r = len(columns)
    return FittedPipeline(
        StandardizerState(np.zeros(p), np.ones(p)),
        PcaState(np.zeros(p), comps, np.ones(r)),
        SelectorState(np.ones(r, dtype=bool), f_values, np.arange(r)),
        r,
    )


def test_10_importance_fidelity(verdict):
    t0 = time.perf_counter()
    table = make_volume_table(n=150, p=10, n_factors=6, seed=10)
    pipe = fit_pipeline(table, 4, rank=8)
    iv = compute_importance(pipe)
    err = float(np.max(np.abs(iv.values - _importance_oracle(pipe))))
    total = abs(iv.values.sum() - 100)
    axis1 = compute_importance(_axis_pipeline([3], [2.0])).values.tolist() == [0, 0, 0, 100, 0, 0]
    axis2 = compute_importance(_axis_pipeline([0, 1], [4.0, 4.0])).values.tolist() == [50, 50, 0, 0, 0, 0]
    ok = err < 1e-10 and total < 1e-6 and axis1 and axis2
    verdict(10, "importance formula fidelity", ok, f"oracle error {err:.1e}, sum error {total:.1e}, axis cases={axis1 and axis2}", time.perf_counter() - t0, 1)


def test_11_determinism_and_persistence(verdict, tmp_path, capsys):
    t0 = time.perf_counter()
    table = make_volume_table(n=150, p=40, n_factors=20, r2=0.4, seed=11)
    write_csv(table, tmp_path / "data.csv")
    cfg = default_config().scaled(0.01)
    (tmp_path / "cfg.json").write_text(json.dumps(cfg.to_dict()))
    common = ["--data", str(tmp_path / "data.csv"), "--target", "gf", "--config", str(tmp_path / "cfg.json"), "--select-k", "12"]
    codes = [main(["train", *common, "--out", str(tmp_path / "m.json")])]
    codes.append(main(["predict", "--bundle", str(tmp_path / "m.json"), "--data", str(tmp_path / "data.csv"), "--out", str(tmp_path / "p.csv")]))
    written = np.loadtxt(tmp_path / "p.csv", delimiter=",", skiprows=1, usecols=1)
    reloaded = load_bundle(tmp_path / "m.json").predict(table.values)
    probe = np.random.default_rng(0).normal(table.values.mean(0), table.values.std(0), size=(100, 40))
    bitwise = np.array_equal(written, reloaded)
    pipe = fit_pipeline(table, 12)
    from gfstack.preprocess import transform
    from gfstack.stacknet import predict_stacknet

    net = fit_stacknet(cfg, transform(pipe, table.values), table.target, SeededRng(0))
    bitwise &= np.array_equal(load_bundle(tmp_path / "m.json").predict(probe), predict_stacknet(net, transform(pipe, probe)))
    reports = [
        run_cv_experiment(table, cfg.scaled(0.5), k_folds=5, select_k=12, seed=4).to_json() for _ in range(2)
    ]
    capsys.readouterr()
    ok = codes == [0, 0] and bitwise and reports[0] == reports[1]
    verdict(11, "end-to-end determinism and persistence", ok, f"exit codes {codes}, bitwise round trip={bitwise}, identical CV reports={reports[0] == reports[1]}", time.perf_counter() - t0, 60)


@pytest.mark.slow
def test_12_permutation_null(verdict):
    t0 = time.perf_counter()
    table = make_volume_table(n=400, seed=12)
    shuffled = FeatureTable(table.subject_ids, table.columns, table.values, np.random.default_rng(12).permutation(table.target), "gf")
    report = run_cv_experiment(shuffled, default_config().scaled(0.05), k_folds=10, seed=0)
    ratio = report.pooled_mse / report.baseline_mse
    verdict(12, "permutation null (n_estimators/20)", abs(ratio - 1) < 0.1, f"pooled {report.pooled_mse:.2f} / baseline {report.baseline_mse:.2f} = {ratio:.3f}", time.perf_counter() - t0, 600)
