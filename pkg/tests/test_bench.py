import numpy as np
import pytest

from ssc.bench import (
    METHODS,
    MixtureSpec,
    evaluate_pipelines,
    fit_exponent,
    gen_mixture,
    grid_search,
    item_groups,
    quantile_bandwidth_from,
    run_backend_bench,
    run_pipelines,
    run_scaling_bench,
    run_speed_bench,
    ssc_weights,
)
from ssc.trainer import TrainConfig


# -- data --------------------------------------------------------------------

def test_mixture_shape_and_labels():
    X, y = gen_mixture(MixtureSpec(7, 3.0, 50, 0))
    assert X.shape == (7, 100)
    assert np.array_equal(y, np.repeat([0, 1], 50))


def test_mixture_mean_separation():
    X, y = gen_mixture(MixtureSpec(100, 3.0, 1000, 0))
    gap = np.linalg.norm(X[:, y == 0].mean(axis=1) - X[:, y == 1].mean(axis=1))
    assert abs(gap - 3.0) <= 0.5


def test_mixture_seeded():
    a = gen_mixture(MixtureSpec(5, 2.0, 20, 7))[0]
    assert np.array_equal(a, gen_mixture(MixtureSpec(5, 2.0, 20, 7))[0])
    assert not np.array_equal(a, gen_mixture(MixtureSpec(5, 2.0, 20, 8))[0])


def test_mixture_zero_separation_same_law():
    X, y = gen_mixture(MixtureSpec(3, 0.0, 4000, 1))
    assert np.abs(X[:, y == 0].mean(axis=1) - X[:, y == 1].mean(axis=1)).max() < 0.15


@pytest.mark.parametrize("kw", [dict(dim=0), dict(separation=-1.0), dict(n_per_class=0)])
def test_mixture_validation(kw):
    with pytest.raises(ValueError):
        MixtureSpec(**kw)


def test_bandwidth_quantile_and_weights(rng):
    X = rng.standard_normal((3, 30))
    W, h = ssc_weights(X, "tricube", 0.1)
    from scipy.spatial.distance import pdist

    assert h == pytest.approx(np.quantile(pdist(X.T), 0.1), rel=1e-12)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
    assert quantile_bandwidth_from(np.array([[0.0, 2.0], [2.0, 0.0]]), 0.5) == 2.0


def test_fit_exponent():
    K = np.array([128, 256, 512, 1024])
    assert fit_exponent(K, 3e-7 * K ** 1.5) == pytest.approx(1.5, rel=1e-12)


def test_item_groups_same_class():
    y = np.repeat([0, 1], [12, 7])
    groups, labels = item_groups(y, 5, seed=0)
    assert len(groups) == 3
    for g, c in zip(groups, labels):
        assert len(g) == 5 and set(y[g]) == {c}
    flat = [i for g in groups for i in g]
    assert len(flat) == len(set(flat))


# -- speed -------------------------------------------------------------------

def test_speed_bench_small():
    spec = MixtureSpec(6, 3.0, 40, 0)
    base = TrainConfig(K=8, lam=50.0, lasso_tol=1e-4, lasso_max_iter=200, max_outer_iters=5)
    rep = run_speed_bench(spec, K=8, target_rel_err=0.5, repeats=2, base=base, bandwidth_quantile=0.05)
    rows = rep.rows()
    assert [r["method"] for r in rows] == list(METHODS)
    for r in rows:
        assert r["mean_time_s"] > 0
        assert r["dnf"] in (0, 1)
    assert rep.speedup(True) > 0 and rep.speedup(False) > 0


def test_speed_bench_marks_dnf():
    spec = MixtureSpec(20, 3.0, 20, 0)
    base = TrainConfig(K=4, lam=0.5, max_outer_iters=2)
    rep = run_speed_bench(spec, K=4, target_rel_err=0.01, repeats=1, base=base, methods=("SC+MR",))
    assert rep.any_dnf and rep.rows()[0]["dnf"] == 1


def test_speed_bench_rejects_zero_repeats():
    with pytest.raises(ValueError):
        run_speed_bench(MixtureSpec(3, 1.0, 5, 0), K=2, repeats=0)


def test_scaling_bench_small():
    res = run_scaling_bench(MixtureSpec(10, 3.0, 50, 0), (8, 16), lasso_tol=1e-6, lasso_max_iter=500, mr_repeats=2,
                            lasso_repeats=1)
    assert [r["K"] for r in res["rows"]] == [8, 16]
    assert np.isfinite(res["mr_exponent"]) and np.isfinite(res["lasso_exponent"])


# -- pipelines ---------------------------------------------------------------

PIPE = TrainConfig(K=16, lam=5.0, max_outer_iters=5, rel_err_tol=0.01)


def test_pipelines_well_separated():
    r = run_pipelines(MixtureSpec(20, 6.0, 200, 0), PIPE)
    assert r.accuracy_sc >= 0.9 and r.accuracy_ssc >= 0.9
    assert r.scores_sc.shape == r.scores_ssc.shape == (16,)
    assert r.bandwidth > 0


def test_pipelines_chance_without_separation():
    accs = [run_pipelines(MixtureSpec(20, 0.0, 200, s), PIPE) for s in range(5)]
    for attr in ("accuracy_sc", "accuracy_ssc"):
        assert abs(np.median([getattr(r, attr) for r in accs]) - 0.5) <= 0.1


def test_pipelines_deterministic():
    a = run_pipelines(MixtureSpec(10, 3.0, 60, 2), PIPE)
    b = run_pipelines(MixtureSpec(10, 3.0, 60, 2), PIPE)
    assert a.accuracy_ssc == b.accuracy_ssc
    assert np.array_equal(a.scores_ssc, b.scores_ssc)


def test_pipelines_label_length():
    with pytest.raises(ValueError):
        evaluate_pipelines(np.ones((2, 5)), np.zeros(4), PIPE)


# -- grid --------------------------------------------------------------------

def test_grid_search_rows():
    X, _ = gen_mixture(MixtureSpec(6, 3.0, 30, 0))
    cfg = TrainConfig(K=5, lam=1.0, max_outer_iters=3)
    rows = grid_search(X, cfg, [1.0, 4.0], [1.0, 3.0])
    assert [(r["lambda"], r["h1"]) for r in rows] == [(1.0, 1.0), (1.0, 3.0), (4.0, 1.0), (4.0, 3.0)]
    for r in rows:
        assert 0 <= r["rel_err"] <= 1 + 1e-12
        assert r["status"] in ("converged", "max_iter", "stalled")
    # the bigger budget reconstructs better at every bandwidth
    assert rows[2]["rel_err"] < rows[0]["rel_err"] and rows[3]["rel_err"] < rows[1]["rel_err"]


def test_grid_search_no_smoothing_ignores_bandwidth():
    X, _ = gen_mixture(MixtureSpec(6, 3.0, 30, 0))
    rows = grid_search(X, TrainConfig(K=5, lam=2.0, smoothing="none", max_outer_iters=2), [2.0], [1.0, 5.0])
    assert len(rows) == 1 and np.isnan(rows[0]["h1"])


# -- backends ----------------------------------------------------------------

def test_backend_bench_rows():
    rows = run_backend_bench(K=32, n=40, d=5, repeats=1)
    kernels = {r["kernel"] for r in rows}
    assert kernels == {"budget_threshold", "project_l1", "kernel_values", "pairwise_euclidean"}
    assert all(r["time_s"] > 0 for r in rows)
