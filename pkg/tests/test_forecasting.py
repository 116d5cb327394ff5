import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from techprox.errors import ConfigurationError
from techprox.forecasting.backtest import (
    BacktestReport,
    ForecastSeries,
    PooledContext,
    ReportEntry,
    SplitConfig,
    error_histogram,
    expanding_window_cv,
    expanding_window_forecasts,
    histogram_to_csv,
    randomized_labels,
    read_series_corpus,
    run_regime,
    split_series,
    window_ends,
)
from techprox.forecasting.metrics import smape
from techprox.forecasting.models import ForecastModelSpec, expand_grid
from techprox.forecasting.regression import forecast_regression, make_supervised, train_regression
from techprox.forecasting.statistical import InsufficientHistory, forecast_statistical, naive_seasonal, theta
from techprox.forecasting.trees import GradientBoosting, RandomForest, RegressionTree
from techprox.indices import IndexKind

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_smape_hand_cases():
    assert smape([1], [3]) == 100.0
    assert smape([0, 0], [1, 0]) == 100.0
    assert smape([0, 0], [0, 0]) == 0.0
    assert smape([2, -4], [2, -4]) == 0.0
    assert smape([1], [-1]) == 200.0


def test_smape_errors():
    with pytest.raises(ValueError):
        smape([], [])
    with pytest.raises(ValueError):
        smape([1, 2], [1])


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30))
def test_smape_properties(pairs):
    a, f = (np.array(v) for v in zip(*pairs))
    s = smape(a, f)
    assert 0 <= s <= 200
    assert s == pytest.approx(smape(f, a), abs=1e-9)
    assert smape(a, a) == 0


def test_naive_seasonal_examples():
    np.testing.assert_array_equal(naive_seasonal([1, 3, 7], 3, K=1), [7, 7, 7])
    np.testing.assert_array_equal(naive_seasonal([1, 2, 3, 4], 5, K=2), [3, 4, 3, 4, 3])
    with pytest.raises(InsufficientHistory, match="at least 12"):
        naive_seasonal(np.arange(5), 3, K=12)


def test_naive_seasonal_on_periodic_series_is_exact():
    base = np.random.default_rng(0).uniform(1, 5, size=12)
    y = np.tile(base, 10)
    spec = ForecastModelSpec("naive_seasonal", K=12)
    assert forecast_statistical(spec, y[:60], 12).tolist() == y[60:72].tolist()
    assert expanding_window_cv(y, spec, 12) == [0.0] * 4


def test_exp_smoothing_is_flat_at_final_level():
    fc = forecast_statistical(ForecastModelSpec("exp_smoothing", alpha=0.1), [10.0, 20.0, 20.0], 3)
    level = 0.1 * 20 + 0.9 * (0.1 * 20 + 0.9 * 10)
    np.testing.assert_allclose(fc, [level] * 3)


@pytest.mark.parametrize("slope,intercept", [(3.0, 1.0), (-0.5, 40.0), (0.0, 2.0)])
def test_theta_continues_lines(slope, intercept):
    t = np.arange(30)
    fc = theta(intercept + slope * t, 12)
    np.testing.assert_allclose(fc, intercept + slope * np.arange(30, 42), atol=1e-6)


def test_theta_classic_variant_runs_and_is_bounded_on_constant():
    np.testing.assert_allclose(theta(np.full(20, 4.0), 6, variant="classic"), np.full(6, 4.0))


def test_linear_regression_learns_identity_recursion():
    # every sample satisfies y_t = y_{t-1}; distinct levels make the fit identifiable
    series = [np.full(20, level) for level in (1.0, 2.5, 4.0, 7.0)]
    fitted = train_regression(ForecastModelSpec("linear_regression", lags=1), series)
    assert fitted.model.coef_[0] == pytest.approx(1.0, abs=1e-6)
    assert fitted.model.intercept_ == pytest.approx(0.0, abs=1e-6)


def test_linear_regression_arithmetic_continuation():
    y = np.arange(40, dtype=float) * 1.0 + 3
    fitted = train_regression(ForecastModelSpec("linear_regression", lags=3), [y])
    np.testing.assert_allclose(forecast_regression(fitted, y, 6), y[-1] + np.arange(1, 7), atol=1e-4)


def test_constant_history_forecasts_constant():
    y = np.full(30, 5.0)
    for family in ("linear_regression", "random_forest", "gbt"):
        fitted = train_regression(ForecastModelSpec(family, lags=4, n_trees=3), [y])
        np.testing.assert_allclose(forecast_regression(fitted, y, 7), np.full(7, 5.0))
        assert len(forecast_regression(fitted, y, 1)) == 1


def test_degenerate_forest_predicts_target_mean():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(20, 3)), rng.normal(size=20)
    rf = RandomForest(n_trees=1, max_depth=0, bootstrap=False).fit(X, y)
    np.testing.assert_allclose(rf.predict(X[:4]), np.full(4, y.mean()))


def test_tree_fits_a_step():
    X = np.arange(10, dtype=float)[:, None]
    y = (X[:, 0] >= 5).astype(float)
    tree = RegressionTree(max_depth=1).fit(X, y)
    np.testing.assert_array_equal(tree.predict(X), y)


def test_tree_ensembles_ignore_sample_order():
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(40, 4)), rng.normal(size=40)
    perm = rng.permutation(40)
    for model in (lambda: RandomForest(5, 3, 0.5, seed=4), lambda: GradientBoosting(5, 0.3, 2, 0.5, seed=4)):
        np.testing.assert_array_equal(model().fit(X, y).predict(X), model().fit(X[perm], y[perm]).predict(X))


def test_same_seed_same_predictions():
    rng = np.random.default_rng(3)
    series = [rng.normal(size=50) for _ in range(3)]
    spec = ForecastModelSpec("random_forest", lags=5, n_trees=4, max_features=0.6, seed=8)
    a = forecast_regression(train_regression(spec, series), series[0], 6)
    b = forecast_regression(train_regression(spec, series), series[0], 6)
    np.testing.assert_array_equal(a, b)


def test_make_supervised_windows():
    X, y = make_supervised([np.arange(5.0), np.arange(2.0)], 2)
    np.testing.assert_array_equal(X, [[0, 1], [1, 2], [2, 3]])
    np.testing.assert_array_equal(y, [2, 3, 4])


def test_folds_and_bounds():
    y = np.abs(np.sin(np.arange(100) / 7.0)) + 0.1
    assert window_ends(100, 5) == [20, 40, 60, 80]
    scores = expanding_window_cv(y, ForecastModelSpec("theta"), 6)
    assert len(scores) == 4 and all(0 <= s <= 200 for s in scores)


@pytest.mark.parametrize("family", ["theta", "exp_smoothing", "naive_seasonal", "linear_regression", "random_forest", "gbt"])
def test_no_fold_reads_past_its_window(family):
    rng = np.random.default_rng(5)
    y = rng.uniform(1, 2, size=100)
    spec = ForecastModelSpec(family, K=12, lags=6, n_trees=3)
    base = expanding_window_forecasts(y, spec, 12)
    for fold in base:
        perturbed = y.copy()
        perturbed[fold.window_end:] = rng.uniform(50, 60, size=100 - fold.window_end)
        again = {f.window_end: f for f in expanding_window_forecasts(perturbed, spec, 12)}
        np.testing.assert_array_equal(again[fold.window_end].forecast, fold.forecast)


def test_pooled_training_is_cut_at_window_end():
    rng = np.random.default_rng(6)
    pool = [rng.uniform(1, 2, size=100) for _ in range(4)]
    spec = ForecastModelSpec("linear_regression", lags=4)
    base = expanding_window_forecasts(pool[0], spec, 6, context=PooledContext(pool))
    end = base[1].window_end
    changed = [s.copy() for s in pool]
    for s in changed:
        s[end:] = 1000.0
    again = expanding_window_forecasts(changed[0], spec, 6, context=PooledContext(changed))
    np.testing.assert_array_equal(again[1].forecast, base[1].forecast)
    np.testing.assert_array_equal(again[0].forecast, base[0].forecast)


def synthetic_series(n_series=10, length=120, seed=0):
    rng = np.random.default_rng(seed)
    kinds = list(IndexKind)
    out = []
    for i in range(n_series):
        t = np.arange(length)
        y = 0.5 + 0.4 * np.sin(2 * np.pi * t / rng.integers(12, 40)) + rng.normal(0, 0.02, length)
        out.append(ForecastSeries(f"s{i}", kinds[i % 5], np.clip(y, 0, None)))
    return out


def test_global_regime_report():
    rep = run_regime(synthetic_series(), ForecastModelSpec("linear_regression"), "global", 3)
    assert {e.kind for e in rep.entries} == set(IndexKind)
    for e in rep.entries:
        assert 0 <= e.median <= 200
        assert e.median == float(np.median(e.smapes))
        assert e.fold_count == 2 * 4


def test_cluster_randomized_is_reproducible():
    series = synthetic_series()
    labels = {s.series_id: i % 3 for i, s in enumerate(series)}
    a = randomized_labels(labels, list(labels), seed=4)
    assert a == randomized_labels(labels, list(labels), seed=4)
    assert sorted(a.values()) == sorted(labels.values())
    spec = ForecastModelSpec("linear_regression")
    r1 = run_regime(series, spec, "cluster-rand", 3, SplitConfig(seed=4), assignment=labels)
    r2 = run_regime(series, spec, "cluster-rand", 3, SplitConfig(seed=4), assignment=labels)
    assert r1.to_json() == r2.to_json()


def test_regime_preconditions():
    series = synthetic_series()
    spec = ForecastModelSpec("linear_regression")
    with pytest.raises(ConfigurationError):
        run_regime(series, spec, "cluster", 3)
    with pytest.raises(ConfigurationError):
        run_regime(series, spec, "transfer", 3)
    with pytest.raises(ConfigurationError):
        run_regime(series, ForecastModelSpec("theta"), "global", 3)
    with pytest.raises(ConfigurationError):
        run_regime(series, spec, "bogus", 3)


def test_transfer_regime_uses_external_pool():
    external = [np.clip(0.5 + 0.4 * np.sin(np.arange(200) / 5.0), 0, None)]
    rep = run_regime(synthetic_series(), ForecastModelSpec("linear_regression"), "transfer", 6, external=external)
    assert all(0 <= e.median <= 200 for e in rep.entries)


def test_tuning_picks_from_grid_and_report_round_trips():
    grid = expand_grid(ForecastModelSpec("naive_seasonal"), {"K": [1, 12]})
    assert [g.K for g in grid] == [1, 12]
    rep = run_regime(synthetic_series(), grid, "local", 6)
    back = BacktestReport.from_json(rep.to_json())
    for a, b in zip(rep.entries, back.entries):
        assert a.median == b.median and a.smapes == b.smapes
    table = rep.median_table("local").splitlines()
    assert table[0] == "algorithm,horizon,index1,index2,index3,index4,index5"
    assert len(table) == 2


def test_split_is_over_series_and_disjoint():
    ids = [f"s{i}" for i in range(20)]
    fit, val, test = split_series(ids, SplitConfig(seed=1))
    assert len(test) == 4 and len(val) == 3 and len(fit) == 13
    assert set(fit) | set(val) | set(test) == set(ids)
    assert not (set(fit) & set(val)) and not (set(val) & set(test))


def test_histogram_conservation():
    rep = run_regime(synthetic_series(), ForecastModelSpec("theta"), "local", 3)
    hist = error_histogram(rep, 10.0)
    total = sum(e.fold_count for e in rep.entries)
    assert sum(c for b in hist.values() for _, _, c in b) == total
    buckets = next(iter(hist.values()))
    assert buckets[0][0] == 0 and buckets[-1][1] == 200
    assert all(a[1] == b[0] for a, b in zip(buckets, buckets[1:]))
    assert histogram_to_csv(hist).splitlines()[0] == "model,bucket_lo,bucket_hi,count"


def test_histogram_all_zero_and_top_edge():
    rep = BacktestReport()
    rep.entries.append(ReportEntry(IndexKind.KEYWORD, "m", "local", 3, [0.0, 0.0, 200.0]))
    (buckets,) = error_histogram(rep, 50.0).values()
    assert [c for _, _, c in buckets] == [2, 0, 0, 1]


def test_read_series_corpus(tmp_path):
    path = tmp_path / "ext.csv"
    path.write_text("a,1,2,3\nb,4,5\n")
    corpus = read_series_corpus(path)
    assert corpus["a"].tolist() == [1, 2, 3] and corpus["b"].tolist() == [4, 5]
    path.write_text("a,1,x\n")
    with pytest.raises(ValueError, match=":1:"):
        read_series_corpus(path)


@given(arrays(float, st.integers(30, 80), elements=st.floats(0, 10)), st.sampled_from([3, 6]))
def test_fold_smapes_bounded(y, h):
    for s in expanding_window_cv(y, ForecastModelSpec("exp_smoothing"), h):
        assert 0 <= s <= 200
