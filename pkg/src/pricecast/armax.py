"""ARMAX(p, q; b) estimation, forecasting and simulation.

The model is

    y_t = c + sum_i phi_i y_{t-i} + sum_j theta_j e_{t-j} + eta . x_t + e_t

and is estimated with the two-stage Hannan-Rissanen least-squares procedure:
a long autoregression supplies residual estimates, which then enter an
ordinary least-squares regression as stand-ins for the unobserved errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .rng import SplitMix64

COND_LIMIT = 1e10
BURN_IN = 200


class ArmaxError(ValueError):
    pass


@dataclass(frozen=True)
class ArmaxSpec:
    p: int = 2
    q: int = 1
    b: int = 0
    include_intercept: bool = True

    def __post_init__(self):
        if min(self.p, self.q, self.b) < 0:
            raise ArmaxError("orders must be non-negative")
        if not self.include_intercept and self.p + self.q + self.b < 1:
            raise ArmaxError("model without intercept needs at least one term")

    @property
    def long_ar_order(self) -> int:
        return max(20, 2 * (self.p + self.q))

    @property
    def n_params(self) -> int:
        return int(self.include_intercept) + self.p + self.q + self.b


@dataclass(frozen=True, eq=False)
class ArmaxModel:
    spec: ArmaxSpec
    phi: np.ndarray
    theta: np.ndarray
    eta: np.ndarray
    intercept: float
    sigma2: float
    converged: bool = True
    condition_number: float = 1.0
    resid: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        s = self.spec
        if (len(self.phi), len(self.theta), len(self.eta)) != (s.p, s.q, s.b):
            raise ArmaxError("coefficient counts do not match the orders")

    @classmethod
    def from_coefficients(cls, phi=(), theta=(), eta=(), intercept=0.0, sigma2=1.0) -> "ArmaxModel":
        phi, theta, eta = (np.asarray(v, dtype=np.float64).reshape(-1) for v in (phi, theta, eta))
        spec = ArmaxSpec(len(phi), len(theta), len(eta), include_intercept=True)
        return cls(spec, phi, theta, eta, float(intercept), float(sigma2))

    def to_dict(self) -> dict:
        def num(x):
            x = float(x)
            return x if np.isfinite(x) else None

        return {
            "p": self.spec.p,
            "q": self.spec.q,
            "b": self.spec.b,
            "include_intercept": self.spec.include_intercept,
            "intercept": num(self.intercept),
            "phi": [num(v) for v in self.phi],
            "theta": [num(v) for v in self.theta],
            "eta": [num(v) for v in self.eta],
            "sigma2": num(self.sigma2),
            "converged": bool(self.converged),
            "condition_number": num(self.condition_number),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArmaxModel":
        def arr(v):
            return np.array([np.nan if x is None else x for x in v], dtype=np.float64)

        spec = ArmaxSpec(d["p"], d["q"], d["b"], d["include_intercept"])
        return cls(
            spec,
            arr(d["phi"]),
            arr(d["theta"]),
            arr(d["eta"]),
            np.nan if d["intercept"] is None else d["intercept"],
            np.nan if d["sigma2"] is None else d["sigma2"],
            d["converged"],
            np.inf if d["condition_number"] is None else d["condition_number"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _lagged(v: np.ndarray, rows: np.ndarray, k: int) -> np.ndarray:
    """Columns v[t-1], ..., v[t-k] for each t in rows."""
    if k == 0:
        return np.empty((len(rows), 0))
    return np.column_stack([v[rows - i] for i in range(1, k + 1)])


def _lstsq(X: np.ndarray, y: np.ndarray) -> tuple[Optional[np.ndarray], float]:
    """QR least squares on column-equilibrated X; returns (beta, condition number)."""
    norms = np.linalg.norm(X, axis=0)
    if X.shape[0] < X.shape[1] or np.any(norms == 0) or not np.all(np.isfinite(X)):
        return None, np.inf
    Xs = X / norms
    Q, R = np.linalg.qr(Xs)
    cond = float(np.linalg.cond(R))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        return None, cond
    beta = solve_triangular(R, Q.T @ y) / norms
    if not np.all(np.isfinite(beta)):
        return None, cond
    return beta, cond


def _design(y, eps, exog, rows, spec: ArmaxSpec) -> np.ndarray:
    parts = []
    if spec.include_intercept:
        parts.append(np.ones((len(rows), 1)))
    parts.append(_lagged(y, rows, spec.p))
    parts.append(_lagged(eps, rows, spec.q))
    parts.append(exog[rows])
    return np.hstack(parts)


def _failed(spec: ArmaxSpec, cond: float, n: int) -> ArmaxModel:
    nan = np.full
    return ArmaxModel(
        spec, nan(spec.p, np.nan), nan(spec.q, np.nan), nan(spec.b, np.nan),
        np.nan, np.nan, converged=False, condition_number=cond, resid=np.full(n, np.nan),
    )


def _unpack(beta, spec: ArmaxSpec):
    k = int(spec.include_intercept)
    c = float(beta[0]) if k else 0.0
    phi = beta[k : k + spec.p]
    theta = beta[k + spec.p : k + spec.p + spec.q]
    eta = beta[k + spec.p + spec.q :]
    return c, phi, theta, eta


def fit(y, exog, spec: ArmaxSpec, refine: bool = False) -> ArmaxModel:
    """Hannan-Rissanen estimate of an ARMAX model.

    Ill-conditioned regressions do not raise; they return a model with
    ``converged=False`` so callers can count and skip them.
    ``refine=True`` runs one extra regression on residuals re-filtered through
    the stage-two coefficients.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = len(y)
    exog = np.empty((n, 0)) if exog is None else np.asarray(exog, dtype=np.float64)
    if exog.ndim == 1:
        exog = exog[:, None]
    if exog.shape != (n, spec.b):
        raise ArmaxError(f"exog must have shape ({n}, {spec.b}), got {exog.shape}")
    need = 10 * (spec.p + spec.q + spec.b + 1)
    if n < need:
        raise ArmaxError(f"insufficient data: {n} observations, need at least {need}")

    eps = np.full(n, np.nan)
    cond1 = 1.0
    if spec.q > 0:
        m = spec.long_ar_order
        rows = np.arange(m, n)
        long_spec = ArmaxSpec(m, 0, spec.b, spec.include_intercept)
        X1 = _design(y, eps, exog, rows, long_spec)
        beta1, cond1 = _lstsq(X1, y[rows])
        if beta1 is None:
            return _failed(spec, cond1, n)
        eps[rows] = y[rows] - X1 @ beta1
        start = max(spec.p, m + spec.q)
    else:
        start = spec.p

    rows = np.arange(start, n)
    X2 = _design(y, eps, exog, rows, spec)
    beta, cond = _lstsq(X2, y[rows])
    if beta is None:
        return _failed(spec, cond, n)

    if refine and spec.q > 0:
        c, phi, theta, eta = _unpack(beta, spec)
        eps = _filter_residuals(y, exog, c, phi, theta, eta, start=max(spec.p, spec.q))
        rows = np.arange(max(spec.p, spec.q) + spec.q, n)
        X2 = _design(y, eps, exog, rows, spec)
        beta, cond = _lstsq(X2, y[rows])
        if beta is None:
            return _failed(spec, cond, n)

    resid = np.full(n, np.nan)
    resid[rows] = y[rows] - X2 @ beta
    c, phi, theta, eta = _unpack(beta, spec)
    return ArmaxModel(
        spec, phi.copy(), theta.copy(), eta.copy(), c,
        float(np.mean(resid[rows] ** 2)), converged=True, condition_number=max(cond, cond1), resid=resid,
    )


def _filter_residuals(y, exog, c, phi, theta, eta, start: int) -> np.ndarray:
    n = len(y)
    e = np.zeros(n)
    xb = exog @ eta
    for t in range(start, n):
        pred = c + xb[t]
        for i, f in enumerate(phi, 1):
            pred += f * y[t - i]
        for j, th in enumerate(theta, 1):
            pred += th * e[t - j]
        e[t] = y[t] - pred
    e[:start] = np.nan
    return e


def forecast(model: ArmaxModel, history_y, history_eps, future_exog, horizon: int) -> np.ndarray:
    """Iterated multi-step forecast; future errors are set to zero."""
    if not model.converged:
        raise ArmaxError("cannot forecast with a non-converged model")
    if horizon == 0:
        return np.empty(0)
    spec = model.spec
    hy = list(np.asarray(history_y, dtype=np.float64).reshape(-1))
    he = list(np.nan_to_num(np.asarray(history_eps, dtype=np.float64).reshape(-1), nan=0.0))
    if len(hy) < spec.p:
        raise ArmaxError(f"history_y needs at least {spec.p} values")
    if len(he) < spec.q:
        raise ArmaxError(f"history_eps needs at least {spec.q} values")
    fx = np.asarray(future_exog, dtype=np.float64).reshape(horizon, -1) if spec.b else np.zeros((horizon, 0))
    if fx.shape != (horizon, spec.b):
        raise ArmaxError(f"future_exog must have shape ({horizon}, {spec.b})")
    xb = fx @ model.eta
    ys = hy[len(hy) - spec.p :] if spec.p else []
    es = he[len(he) - spec.q :] if spec.q else []
    out = np.empty(horizon)
    for h in range(horizon):
        v = model.intercept + xb[h]
        for i, f in enumerate(model.phi, 1):
            v += f * ys[-i]
        for j, th in enumerate(model.theta, 1):
            v += th * es[-j]
        out[h] = v
        if spec.p:
            ys.append(v)
        if spec.q:
            es.append(0.0)
    return out


def is_stable(phi) -> bool:
    phi = np.asarray(phi, dtype=np.float64)
    if len(phi) == 0:
        return True
    roots = np.roots(np.concatenate(([1.0], -phi)))
    return bool(np.all(np.abs(roots) < 1.0))


def simulate(model: ArmaxModel, exog, n: int, seed: int) -> np.ndarray:
    """Simulate ``n`` values with Gaussian errors N(0, sigma2).

    A burn-in of 200 draws (driven by the first exogenous row) is discarded.
    """
    spec = model.spec
    coefs = np.concatenate([model.phi, model.theta, model.eta, [model.intercept, model.sigma2]])
    if not np.all(np.isfinite(coefs)):
        raise ArmaxError("simulation needs finite coefficients")
    if not is_stable(model.phi):
        raise ArmaxError("AR polynomial is not stable (a characteristic root lies on or inside the unit circle)")
    if spec.b:
        exog = np.asarray(exog, dtype=np.float64).reshape(n, spec.b)
        xb = exog @ model.eta
    else:
        xb = np.zeros(n)
    x0 = xb[0] if n else 0.0
    xb = np.concatenate([np.full(BURN_IN, x0), xb])
    noise = SplitMix64(seed).normal(BURN_IN + n) * np.sqrt(model.sigma2)
    level = (model.intercept + x0) / (1.0 - float(np.sum(model.phi)))
    phi, theta = [float(v) for v in model.phi], [float(v) for v in model.theta]
    ys = [level] * spec.p
    es = [0.0] * spec.q
    out = np.empty(BURN_IN + n)
    c = model.intercept
    for t in range(BURN_IN + n):
        e = float(noise[t])
        v = c + xb[t] + e
        for i in range(spec.p):
            v += phi[i] * ys[-1 - i]
        for j in range(spec.q):
            v += theta[j] * es[-1 - j]
        out[t] = v
        if spec.p:
            ys.append(v)
        if spec.q:
            es.append(e)
    return out[BURN_IN:]
