import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from pricecast import armax, stats, synth
from pricecast.dataset import Dataset
from pricecast.stats import StatsError

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_describe_symmetric_sequence():
    s = stats.describe([1, 2, 3, 4])
    assert s.count == 4 and s.mean == 2.5 and s.q50 == 2.5
    assert s.q25 == 1.75 and s.q75 == 3.25
    assert s.std == pytest.approx(np.sqrt(5 / 3))


def test_describe_constant():
    s = stats.describe([7, 7, 7])
    assert s.std == 0.0
    assert s.min == s.q25 == s.q50 == s.q75 == s.max == 7.0


def test_describe_single_value_and_empty():
    assert stats.describe([3.0]).std == 0.0
    with pytest.raises(StatsError):
        stats.describe([])


def test_describe_table_layout():
    s = stats.describe(np.arange(100.0), percentiles=(0.05, 0.5, 0.95))
    assert [k for k, _ in s.rows()] == ["count", "mean", "std", "min", "5%", "50%", "95%", "max"]
    assert s.to_dict()["count"] == 100


@settings(max_examples=60)
@given(st.lists(finite, min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_describe_matches_numpy_and_is_permutation_invariant(xs, rnd):
    s = stats.describe(xs)
    for q in (0.25, 0.5, 0.75):
        assert s.quantiles[q] == pytest.approx(np.quantile(xs, q), rel=1e-12, abs=1e-9)
    assert s.min <= s.q25 <= s.q50 <= s.q75 <= s.max
    assert s.std >= 0
    shuffled = list(xs)
    rnd.shuffle(shuffled)
    t = stats.describe(shuffled)
    assert t.quantiles == s.quantiles and t.min == s.min and t.max == s.max


def test_pearson_trivial_cases(rng):
    x = rng.normal(size=50)
    assert stats.pearson_corr(x, x) == pytest.approx(1.0, abs=1e-15)
    assert stats.pearson_corr(x, -x) == pytest.approx(-1.0, abs=1e-15)
    y = rng.normal(size=50)
    assert stats.pearson_corr(x, y) == pytest.approx(sps.pearsonr(x, y)[0], abs=1e-12)
    with pytest.raises(StatsError, match="constant"):
        stats.pearson_corr(x, np.ones(50))
    with pytest.raises(StatsError):
        stats.pearson_corr([1.0], [2.0])


def test_correlation_matrix_properties(rng):
    cols = {f"c{i}": rng.normal(size=200) + (i % 2) * np.arange(200) / 50 for i in range(5)}
    names, m = stats.correlation_matrix(cols)
    assert names == list(cols)
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == 1.0)
    assert np.all(np.abs(m) <= 1.0)


def test_acf_lag_zero_and_numpy_oracle(rng):
    x = rng.normal(size=300).cumsum()
    r = stats.acf(x, 20)
    assert r.values[0] == 1.0
    assert list(r.lags) == list(range(21))
    d = x - x.mean()
    full = np.correlate(d, d, mode="full")[len(x) - 1 :] / np.dot(d, d)
    assert np.allclose(r.values, full[:21], atol=1e-12)


def test_acf_white_noise_band():
    n = 10_000
    x = np.random.default_rng(2024).normal(size=n)
    r = stats.acf(x, 50).values[1:]
    assert np.mean(np.abs(r) < 2 / np.sqrt(n)) >= 0.95


def test_acf_ar1_geometric_decay():
    m = armax.ArmaxModel.from_coefficients(phi=(0.8,), sigma2=1.0)
    y = armax.simulate(m, None, 50_000, seed=17)
    r = stats.acf(y, 2).values
    assert abs(r[1] - 0.8) < 0.02
    assert abs(r[2] - 0.64) < 0.03


@settings(max_examples=40)
@given(
    st.floats(min_value=1e-3, max_value=1e3),
    st.floats(min_value=-1e3, max_value=1e3),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_acf_affine_invariance(a, b, seed):
    x = np.random.default_rng(seed).normal(size=200)
    assert np.allclose(stats.acf(a * x + b, 10).values, stats.acf(x, 10).values, rtol=0, atol=1e-9)


def test_acf_errors():
    with pytest.raises(StatsError, match="constant"):
        stats.acf([5.0] * 10, 3)
    with pytest.raises(StatsError):
        stats.acf([1.0, 2.0], 2)


def _hourly_dataset(price):
    n = len(price)
    ts = np.datetime64("2012-01-01T00", "h") + np.arange(n).astype("timedelta64[h]")
    return Dataset(ts, np.asarray(price, float), np.full(n, 100.0), np.full(n, 50.0))


def test_hourly_acf_extracts_one_value_per_day():
    days = 30
    rng = np.random.default_rng(1)
    daily = rng.normal(size=days) + 10
    price = np.repeat(daily[:, None], 24, axis=1)
    price[:, 5] = np.arange(days) + 1.0
    ds = _hourly_dataset(price.reshape(-1))
    assert np.allclose(stats.hourly_acf(ds, 0, 5).values, stats.acf(daily, 5).values)
    assert np.allclose(stats.hourly_acf(ds, 5, 5).values, stats.acf(np.arange(days) + 1.0, 5).values)


def test_hourly_acf_periodic_series_is_degenerate():
    # an exactly 24h-periodic price makes each hour's series constant
    price = np.tile(np.arange(24) + 20.0, 20)
    with pytest.raises(StatsError, match="constant"):
        stats.hourly_acf(_hourly_dataset(price), 3, 5)


def test_hourly_acf_errors():
    ds = _hourly_dataset(np.arange(24 * 5) + 1.0)
    with pytest.raises(StatsError):
        stats.hourly_acf(ds, 24, 2)
    with pytest.raises(StatsError, match="at least"):
        stats.hourly_acf(ds, 3, 4)


def test_hourly_acf_night_persistence():
    ds = synth.generate(synth.SynthConfig(n_days=400, seed=7))
    night = stats.hourly_acf(ds, 3, 7).values[1:].mean()
    day = stats.hourly_acf(ds, 15, 7).values[1:].mean()
    assert night > day


def test_histogram_examples():
    edges, counts = stats.histogram([0, 1, 2, 3], 2)
    assert list(edges) == [0.0, 1.5, 3.0]
    assert list(counts) == [2, 2]
    edges, counts = stats.histogram([4.0] * 6, 5)
    assert sorted(counts)[-1] == 6 and np.count_nonzero(counts) == 1
    with pytest.raises(StatsError):
        stats.histogram([], 3)
    with pytest.raises(StatsError):
        stats.histogram([1.0], 0)


@settings(max_examples=60)
@given(st.lists(finite, min_size=1, max_size=100), st.integers(min_value=1, max_value=30))
def test_histogram_conserves_count(xs, bins):
    edges, counts = stats.histogram(xs, bins)
    assert counts.sum() == len(xs)
    assert len(edges) == bins + 1
    if min(xs) < max(xs):
        assert edges[0] == min(xs) and edges[-1] == max(xs)


def test_csv_writers(tmp_path):
    s = {"a": stats.describe([1, 2, 3, 4]), "b": stats.describe([5, 5, 5, 5])}
    stats.write_summary_csv(s, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "statistic,a,b"
    assert lines[1] == "count,4,4" and lines[2] == "mean,2.5,5"
    stats.write_acf_csv(stats.acf([1.0, 3.0, 2.0, 5.0], 1), tmp_path / "acf.csv")
    assert (tmp_path / "acf.csv").read_text().splitlines()[:2] == ["lag,value", "0,1"]
    stats.write_histogram_csv({"p": stats.histogram([0, 1, 2, 3], 2)}, tmp_path / "h.csv", with_variable=True)
    assert (tmp_path / "h.csv").read_text().splitlines() == [
        "variable,left_edge,right_edge,count", "p,0,1.5,2", "p,1.5,3,2",
    ]
