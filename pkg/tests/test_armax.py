import json

import numpy as np
import pytest

from pricecast import armax
from pricecast.armax import ArmaxError, ArmaxModel, ArmaxSpec
from pricecast.rng import SplitMix64

TRUTH = dict(phi=(0.5, -0.2), theta=(0.3,), eta=(1.0, -0.5))


def ols_normal_equations(y, X):
    return np.linalg.solve(X.T @ X, X.T @ y)


def lagged_design_oracle(y, exog, p, intercept=True):
    """Rows t = p..n-1 of [1, y[t-1..t-p], exog[t]] built with an explicit loop."""
    rows = []
    for t in range(p, len(y)):
        row = [1.0] if intercept else []
        row += [y[t - i] for i in range(1, p + 1)]
        row += list(exog[t])
        rows.append(row)
    return np.array(rows), y[p:]


def _truth_sample(n, seed, sigma2=1.0):
    X = SplitMix64(1000 + seed).normal(2 * n).reshape(n, 2)
    truth = ArmaxModel.from_coefficients(**TRUTH, intercept=0.0, sigma2=sigma2)
    return armax.simulate(truth, X, n, seed=seed), X


def test_exog_only_is_plain_ols(rng):
    n, k = 300, 3
    X = rng.normal(size=(n, k))
    y = X @ [1.0, -2.0, 0.5] + 3.0 + rng.normal(size=n)
    m = armax.fit(y, X, ArmaxSpec(0, 0, k))
    ref = ols_normal_equations(y, np.column_stack([np.ones(n), X]))
    assert m.converged
    assert np.allclose(np.concatenate([[m.intercept], m.eta]), ref, rtol=0, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_q0_equals_lagged_ols(seed):
    rng = np.random.default_rng(seed)
    n, p, b = 400, 2, 2
    exog = rng.normal(size=(n, b))
    y = np.zeros(n)
    for t in range(2, n):
        y[t] = 0.4 * y[t - 1] - 0.1 * y[t - 2] + exog[t] @ [0.7, 0.2] + rng.normal()
    m = armax.fit(y, exog, ArmaxSpec(p, 0, b))
    Xo, yo = lagged_design_oracle(y, exog, p)
    ref = ols_normal_equations(yo, Xo)
    got = np.concatenate([[m.intercept], m.phi, m.eta])
    assert np.allclose(got, ref, rtol=0, atol=1e-9)
    assert m.sigma2 == pytest.approx(np.mean((yo - Xo @ ref) ** 2), rel=1e-9)


def test_ar1_recovery_against_lagged_ols_oracle():
    truth = ArmaxModel.from_coefficients(phi=(0.8,), sigma2=1.0)
    y = armax.simulate(truth, None, 2000, seed=5)
    m = armax.fit(y, None, ArmaxSpec(1, 0, 0))
    Xo, yo = lagged_design_oracle(y, np.empty((len(y), 0)), 1)
    ref = ols_normal_equations(yo, Xo)
    assert abs(m.phi[0] - 0.8) < 0.05
    assert m.phi[0] == pytest.approx(ref[1], abs=1e-9)


def test_constant_series_does_not_converge():
    m = armax.fit(np.full(100, 3.0), None, ArmaxSpec(1, 0, 0))
    assert not m.converged
    with pytest.raises(ArmaxError):
        armax.forecast(m, [3.0], [], None, 3)
    m = armax.fit(np.full(300, 3.0), None, ArmaxSpec(1, 1, 0))
    assert not m.converged


def test_collinear_exog_does_not_converge(rng):
    x = rng.normal(size=300)
    exog = np.column_stack([x, 2 * x])
    m = armax.fit(rng.normal(size=300), exog, ArmaxSpec(1, 0, 2))
    assert not m.converged
    assert m.condition_number > armax.COND_LIMIT


def test_fit_errors(rng):
    with pytest.raises(ArmaxError, match="insufficient"):
        armax.fit(rng.normal(size=30), None, ArmaxSpec(2, 1, 0))
    with pytest.raises(ArmaxError, match="shape"):
        armax.fit(rng.normal(size=100), rng.normal(size=(99, 1)), ArmaxSpec(1, 0, 1))
    with pytest.raises(ArmaxError):
        ArmaxSpec(0, 0, 0, include_intercept=False)


def test_simulate_fit_round_trip():
    y, X = _truth_sample(5000, seed=21)
    m = armax.fit(y, X, ArmaxSpec(2, 1, 2))
    got = np.concatenate([m.phi, m.theta, m.eta])
    want = np.concatenate([TRUTH["phi"], TRUTH["theta"], TRUTH["eta"]])
    assert np.all(np.abs(got - want) < 0.1)


def test_refine_stage_keeps_estimates_close():
    y, X = _truth_sample(3000, seed=4)
    a = armax.fit(y, X, ArmaxSpec(2, 1, 2))
    b = armax.fit(y, X, ArmaxSpec(2, 1, 2), refine=True)
    assert b.converged
    assert np.all(np.abs(b.theta - 0.3) < 0.1)
    assert np.all(np.abs(a.eta - b.eta) < 0.05)


def test_estimator_consistency():
    want = np.concatenate([TRUTH["phi"], TRUTH["theta"], TRUTH["eta"]])

    def median_error(n):
        errs = []
        for seed in range(20):
            y, X = _truth_sample(n, seed)
            m = armax.fit(y, X, ArmaxSpec(2, 1, 2))
            errs.append(np.abs(np.concatenate([m.phi, m.theta, m.eta]) - want))
        return np.median(np.concatenate(errs))

    assert median_error(5000) < median_error(500)


def test_forecast_intercept_only():
    m = ArmaxModel.from_coefficients(intercept=4.2)
    assert np.all(armax.forecast(m, [], [], None, 5) == 4.2)


def test_forecast_ar1_hand_recursion():
    m = ArmaxModel.from_coefficients(phi=(0.5,), intercept=0.0)
    assert list(armax.forecast(m, [8.0], [], None, 3)) == [4.0, 2.0, 1.0]


def test_forecast_empty_horizon():
    m = ArmaxModel.from_coefficients(phi=(0.5,), theta=(0.2,), eta=(1.0,))
    assert armax.forecast(m, [1.0], [0.1], np.empty((0, 1)), 0).size == 0


def test_forecast_ma_term_only_enters_first_step():
    m = ArmaxModel.from_coefficients(theta=(0.5,), intercept=1.0)
    assert list(armax.forecast(m, [], [2.0], None, 3)) == [2.0, 1.0, 1.0]


def test_one_step_forecast_equals_regression_formula():
    y, X = _truth_sample(1500, seed=8)
    m = armax.fit(y, X, ArmaxSpec(2, 1, 2))
    n = len(y)
    eps = m.resid
    one = armax.forecast(m, y[: n - 1], eps[: n - 1], X[n - 1 :], 1)[0]
    row = np.concatenate([[1.0], y[n - 2 : n - 4 : -1], eps[n - 2 : n - 3 : -1], X[n - 1]])
    coef = np.concatenate([[m.intercept], m.phi, m.theta, m.eta])
    assert one == pytest.approx(float(row @ coef), abs=1e-10)


def test_simulate_noiseless_constant():
    m = ArmaxModel.from_coefficients(intercept=2.5, sigma2=0.0)
    assert np.all(armax.simulate(m, None, 50, seed=1) == 2.5)


def test_simulate_is_deterministic():
    m = ArmaxModel.from_coefficients(phi=(0.6,), theta=(0.2,), sigma2=1.0)
    a = armax.simulate(m, None, 500, seed=3)
    assert np.array_equal(a, armax.simulate(m, None, 500, seed=3))
    assert not np.array_equal(a, armax.simulate(m, None, 500, seed=4))


def test_simulated_ar1_lag1_autocorrelation():
    m = ArmaxModel.from_coefficients(phi=(0.8,), sigma2=1.0)
    y = armax.simulate(m, None, 50_000, seed=17)
    d = y - y.mean()
    r1 = np.dot(d[:-1], d[1:]) / np.dot(d, d)
    assert abs(r1 - 0.8) < 0.02


def test_simulate_rejects_unstable_ar():
    with pytest.raises(ArmaxError, match="stable"):
        armax.simulate(ArmaxModel.from_coefficients(phi=(1.0,)), None, 10, seed=0)
    with pytest.raises(ArmaxError, match="stable"):
        armax.simulate(ArmaxModel.from_coefficients(phi=(0.5, 0.6)), None, 10, seed=0)
    assert armax.is_stable([0.5, -0.2])


def test_json_round_trip():
    y, X = _truth_sample(800, seed=2)
    m = armax.fit(y, X, ArmaxSpec(2, 1, 2))
    doc = json.loads(m.to_json())
    assert set(doc) == {
        "p", "q", "b", "include_intercept", "intercept", "phi", "theta", "eta",
        "sigma2", "converged", "condition_number",
    }
    back = ArmaxModel.from_dict(doc)
    assert np.array_equal(back.phi, m.phi) and np.array_equal(back.eta, m.eta)
    assert back.sigma2 == m.sigma2 and back.converged
    failed = armax.fit(np.full(100, 1.0), None, ArmaxSpec(1, 0, 0))
    assert json.loads(failed.to_json())["phi"] == [None]
