import json
import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from gfstack.preprocess import (
    FittedPipeline,
    PcaState,
    StandardizerState,
    apply_pca,
    apply_standardizer,
    f_regression,
    fit_pca,
    fit_pipeline,
    fit_standardizer,
    fit_variance_mask,
    log_evidence_curve,
    minka_rank,
    select_top_k,
    transform,
)
from gfstack.synthetic import make_volume_table
from gfstack.table import DataError, FeatureTable


def table_from(values, target=None):
    values = np.asarray(values, dtype=float)
    return FeatureTable(
        tuple(f"s{i}" for i in range(values.shape[0])),
        tuple(f"c{j}" for j in range(values.shape[1])),
        values,
        target=target,
        target_name=None if target is None else "y",
    )


# standardizer


def test_standardizer_hand_values():
    st_ = fit_standardizer(np.array([[2.0, 5.0], [4.0, 5.0]]))
    np.testing.assert_array_equal(st_.mu, [3.0, 5.0])
    np.testing.assert_array_equal(st_.sigma, [1.0, 0.0])
    assert st_.degenerate.tolist() == [False, True]
    out = apply_standardizer(st_, [[2.0, 5.0], [4.0, 7.0]])
    np.testing.assert_array_equal(out, [[-1.0, 0.0], [1.0, 0.0]])


def test_standardizer_shape_and_self_application(rng):
    x = rng.normal(3.0, 7.0, size=(60, 122)) * rng.uniform(0.1, 100, 122)
    x[:, 5] = 4.0
    state = fit_standardizer(table_from(x))
    assert state.mu.shape == (122,) and state.sigma.shape == (122,)
    z = apply_standardizer(state, x)
    assert np.all(np.abs(z.mean(axis=0)) < 1e-10)
    live = ~state.degenerate
    np.testing.assert_allclose(z[:, live].std(axis=0), 1.0, atol=1e-12)
    assert np.all(z[:, 5] == 0.0)


def test_standardizer_width_mismatch():
    state = StandardizerState([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(DataError):
        apply_standardizer(state, np.ones((2, 3)))


# PCA


def test_pca_on_line():
    t = np.linspace(-2, 2, 9)
    state = fit_pca(np.column_stack([t, t]), rank=2)
    np.testing.assert_allclose(state.components[:, 0], [1 / math.sqrt(2)] * 2, atol=1e-12)
    assert abs(state.eigenvalues[1]) < 1e-12


def test_pca_properties_against_covariance(rng):
    x = rng.normal(size=(50, 5)) @ rng.normal(size=(5, 5))
    state = fit_pca(x, rank=5)
    u = state.components
    np.testing.assert_allclose(u.T @ u, np.eye(5), atol=1e-10)
    assert np.all(np.diff(state.eigenvalues) <= 0)
    # independent route: eigendecomposition of the n-1 covariance
    evals, evecs = np.linalg.eigh(np.cov(x, rowvar=False))
    np.testing.assert_allclose(state.eigenvalues, evals[::-1], rtol=1e-10)
    for j in range(5):
        assert abs(abs(evecs[:, ::-1][:, j] @ u[:, j]) - 1.0) < 1e-8
    # sign convention
    idx = np.argmax(np.abs(u), axis=0)
    assert np.all(u[idx, np.arange(5)] > 0)


def test_pca_full_rank_reconstruction(rng):
    x = rng.normal(size=(20, 4))
    state = fit_pca(x, rank=4)
    scores = apply_pca(state, x)
    np.testing.assert_allclose(scores @ state.components.T + state.center, x, atol=1e-8)


def test_apply_pca_examples():
    state = PcaState(center=[1.0, 2.0], components=np.eye(2), eigenvalues=[2.0, 1.0])
    np.testing.assert_array_equal(apply_pca(state, [[1.0, 2.0]]), [[0.0, 0.0]])
    np.testing.assert_array_equal(apply_pca(state, [[3.0, 5.0]]), [[2.0, 3.0]])


def test_pca_degenerate():
    with pytest.raises(DataError, match="degenerate"):
        fit_pca(np.ones((5, 3)))


# Minka evidence


def evidence_oracle(lam, k, n):
    """Direct transcription of the Laplace evidence, scalar loops only."""
    q = len(lam)
    pu = -k * math.log(2)
    for i in range(1, k + 1):
        h = (q - i + 1) / 2
        pu += float(gammaln(h)) - h * math.log(math.pi)
    pl = -n / 2 * sum(math.log(lam[i]) for i in range(k))
    s2 = sum(lam[k:]) / (q - k)
    pv = -n * (q - k) / 2 * math.log(s2)
    m = q * k - k * (k + 1) / 2
    pp = (m + k + 1) / 2 * math.log(2 * math.pi)
    lt = [lam[i] if i < k else s2 for i in range(q)]
    pa = 0.0
    for i in range(k):
        for j in range(i + 1, q):
            pa += math.log(1 / lt[j] - 1 / lt[i]) + math.log(lam[i] - lam[j]) + math.log(n)
    return pu + pl + pv + pp - k / 2 * math.log(n) - pa / 2


def test_log_evidence_matches_scalar_oracle(rng):
    lam = np.sort(rng.uniform(0.1, 5.0, 8))[::-1]
    curve = log_evidence_curve(lam, 300)
    for k in range(1, 8):
        assert curve[k - 1] == pytest.approx(evidence_oracle(list(lam), k, 300), rel=1e-12)


def test_minka_spiked_spectrum():
    # three spikes of variance 10 over 97 noise directions of variance 0.01
    g = np.random.default_rng(21)
    basis = np.linalg.qr(g.normal(size=(100, 3)))[0]
    x = g.normal(size=(1000, 3)) @ basis.T * math.sqrt(10.0) + 0.1 * g.normal(size=(1000, 100))
    lam = np.linalg.svd(x - x.mean(0), compute_uv=False) ** 2 / 999
    assert minka_rank(lam, 1000) == (3, False)


def test_minka_two_equal_eigenvalues():
    assert minka_rank([1.0, 1.0], 100)[0] == 1


def test_minka_skips_zero_tail():
    lam = np.array([5.0, 2.0, 1.0, 0.0])
    curve = log_evidence_curve(lam, 50)
    assert np.isnan(curve[2])
    r, flagged = minka_rank(lam, 50)
    assert not flagged
    assert r == int(np.nanargmax(curve)) + 1


def test_minka_all_inadmissible_falls_back():
    with pytest.warns(RuntimeWarning):
        assert minka_rank([0.0, 0.0, 0.0], 10) == (1, True)


def spiked_data(seed, n=1000, q=50, rank=3):
    g = np.random.default_rng(seed)
    basis = np.linalg.qr(g.normal(size=(q, rank)))[0]
    latent = g.normal(size=(n, rank)) * np.sqrt([10.0, 6.0, 3.0][:rank])
    return latent @ basis.T + 0.1 * g.normal(size=(n, q))


@pytest.mark.parametrize("seed", range(5))
def test_minka_recovers_planted_rank(seed):
    assert fit_pca(spiked_data(seed)).r == 3


# variance mask, F test, selection


def test_variance_mask_examples():
    g = np.random.default_rng(0)
    base = g.normal(size=(200, 3))
    base = (base - base.mean(0)) / base.std(0)
    scores = base * np.sqrt([2.0, 0.5, 1e-12])
    assert fit_variance_mask(scores, 1e-8).tolist() == [True, True, False]
    assert fit_variance_mask(base, 0.0).all()
    const = np.column_stack([base[:, 0], np.full(200, 3.0)])
    assert fit_variance_mask(const, 0.0).tolist() == [True, False]


def ols_f_oracle(x, y):
    """F statistic of the one-predictor OLS fit, via explicit least squares."""
    n = len(y)
    design = np.column_stack([np.ones(n), x])
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    rss1 = np.sum((y - design @ beta) ** 2)
    rss0 = np.sum((y - y.mean()) ** 2)
    return (rss0 - rss1) / (rss1 / (n - 2))


def test_f_regression_matches_ols(rng):
    y = rng.normal(size=40)
    x = rng.normal(size=(40, 30)) + np.outer(y, rng.normal(size=30))
    f = f_regression(x, y)
    oracle = np.array([ols_f_oracle(x[:, j], y) for j in range(30)])
    np.testing.assert_allclose(f, oracle, rtol=1e-8)


def test_f_regression_examples():
    y = np.arange(10.0)
    f = f_regression(np.column_stack([y, np.ones(10)]), y)
    assert f[0] == sys.float_info.max and f[1] == 0.0
    # a column orthogonal to the centred target
    y2 = np.array([1.0, -1.0, 1.0, -1.0])
    assert f_regression(np.array([[1.0], [1.0], [-1.0], [-1.0]]), y2)[0] == 0.0
    # construct r = 0.5 exactly with n = 10
    g = np.random.default_rng(3)
    yc = g.normal(size=10)
    yc -= yc.mean()
    yc /= np.linalg.norm(yc)
    e = g.normal(size=10)
    e -= e.mean()
    e -= (e @ yc) * yc
    e /= np.linalg.norm(e)
    col = 0.5 * yc + math.sqrt(0.75) * e
    assert f_regression(col[:, None], yc)[0] == pytest.approx(8.0 / 3.0, rel=1e-12)
    with pytest.raises(DataError):
        f_regression(np.ones((5, 1)), np.ones(5))


def test_select_top_k_examples():
    everything = [True, True, True]
    assert select_top_k([5, 1, 3], everything, 2).selected.tolist() == [0, 2]
    assert select_top_k([5, 1, 3], [False, True, True], 1).selected.tolist() == [2]
    assert select_top_k([2, 2, 1], everything, 1).selected.tolist() == [0]
    with pytest.raises(DataError):
        select_top_k([1, 2], [True, False], 2)


@settings(max_examples=60, deadline=None)
@given(
    f=st.lists(st.integers(0, 5).map(float), min_size=1, max_size=12),
    data=st.data(),
)
def test_select_top_k_brute_force(f, data):
    mask = data.draw(st.lists(st.booleans(), min_size=len(f), max_size=len(f)))
    live = [j for j in range(len(f)) if mask[j]]
    if not live:
        return
    k = data.draw(st.integers(1, len(live)))
    chosen = select_top_k(f, mask, k).selected.tolist()
    oracle = sorted(sorted(live, key=lambda j: (-f[j], j))[:k])
    assert chosen == oracle


# pipeline


@pytest.fixture(scope="module")
def volume_table():
    return make_volume_table(n=300, p=122, seed=4)


def test_pipeline_output_width(volume_table):
    pipe = fit_pipeline(volume_table, 24)
    p, r, surviving, k = pipe.dims
    assert (p, k) == (122, 24) and r >= surviving >= 24
    out = transform(pipe, volume_table.values)
    assert out.shape == (300, 24)
    np.testing.assert_array_equal(out, transform(pipe, volume_table.values))
    assert transform(pipe, volume_table.values[:1]).shape == (1, 24)


def test_pipeline_k_equals_surviving(volume_table):
    pipe = fit_pipeline(volume_table, 24)
    full = pipe.dims[2]
    pipe_all = fit_pipeline(volume_table, full)
    assert pipe_all.selector.selected.tolist() == np.flatnonzero(pipe_all.selector.variance_mask).tolist()


def test_pipeline_needs_target(volume_table):
    bare = FeatureTable(volume_table.subject_ids, volume_table.columns, volume_table.values)
    with pytest.raises(DataError):
        fit_pipeline(bare, 5)


def test_pipeline_serialisation_round_trip(volume_table):
    pipe = fit_pipeline(volume_table, 12)
    back = FittedPipeline.from_dict(json.loads(json.dumps(pipe.to_dict())))
    assert back.digest() == pipe.digest()
    np.testing.assert_array_equal(transform(back, volume_table.values), transform(pipe, volume_table.values))


def test_transform_uses_only_fit_rows(volume_table):
    train = volume_table.take(np.arange(200))
    pipe = fit_pipeline(train, 10)
    held = volume_table.values[200:]
    before = transform(pipe, held)
    # perturbing held-out rows changes only those rows' outputs; fitted state is untouched
    digest = pipe.digest()
    shuffled = held[::-1]
    np.testing.assert_array_equal(transform(pipe, shuffled), before[::-1])
    assert pipe.digest() == digest


def test_fitted_state_is_immutable(volume_table):
    pipe = fit_pipeline(volume_table, 5)
    with pytest.raises(ValueError):
        pipe.pca.components[0, 0] = 1.0


def test_fit_ignores_memory_layout(volume_table):
    fortran = np.asfortranarray(volume_table.values)
    pipe_c = fit_pipeline(volume_table, 8)
    pipe_f = fit_pipeline(FeatureTable(volume_table.subject_ids, volume_table.columns, fortran, volume_table.target, "gf"), 8)
    assert pipe_c.digest() == pipe_f.digest()
    np.testing.assert_array_equal(transform(pipe_c, fortran), transform(pipe_c, volume_table.values))
