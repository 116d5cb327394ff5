"""Lagged-window autoregression with recursive multi-step forecasts."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from techprox.forecasting.models import ForecastModelSpec
from techprox.forecasting.trees import GradientBoosting, RandomForest

log = logging.getLogger(__name__)


def make_supervised(series: Sequence[np.ndarray], lags: int) -> tuple[np.ndarray, np.ndarray]:
    """Samples (y[t-lags..t-1] -> y[t]) from every series longer than ``lags``."""
    X, y = [], []
    for s in series:
        s = np.asarray(s, dtype=float)
        if len(s) <= lags:
            continue
        windows = np.lib.stride_tricks.sliding_window_view(s, lags + 1)
        X.append(windows[:, :-1])
        y.append(windows[:, -1])
    if not X:
        return np.empty((0, lags)), np.empty(0)
    return np.vstack(X), np.concatenate(y)


class LinearModel:
    def __init__(self):
        self.coef_ = None
        self.intercept_ = 0.0

    def fit(self, X, y) -> "LinearModel":
        A = np.column_stack([X, np.ones(len(X))])
        sol, *_ = np.linalg.lstsq(A, y, rcond=None)
        self.coef_ = sol[:-1]
        self.intercept_ = float(sol[-1])
        return self

    def predict(self, X) -> np.ndarray:
        return np.atleast_2d(X) @ self.coef_ + self.intercept_


class ConstantModel:
    def __init__(self, value: float):
        self.value = value

    def predict(self, X) -> np.ndarray:
        return np.full(len(np.atleast_2d(X)), self.value)


@dataclass
class FittedRegressor:
    spec: ForecastModelSpec
    model: object
    degenerate: bool = False
    n_samples: int = 0

    @property
    def lags(self) -> int:
        return self.spec.lags

    def predict_next(self, window: np.ndarray) -> float:
        return float(self.model.predict(window[None, :])[0])


def _build(spec: ForecastModelSpec):
    if spec.family == "linear_regression":
        return LinearModel()
    if spec.family == "random_forest":
        return RandomForest(spec.n_trees, spec.max_depth, spec.max_features,
                            spec.min_samples_leaf, spec.bootstrap, spec.seed)
    if spec.family == "gbt":
        return GradientBoosting(spec.n_trees, spec.learning_rate, spec.max_depth,
                                spec.max_features, spec.min_samples_leaf, spec.seed)
    raise ValueError(f"{spec.family} is not a regression model")


def train_regression(spec: ForecastModelSpec, training: Sequence[np.ndarray]) -> FittedRegressor:
    X, y = make_supervised(training, spec.lags)
    if not len(y):
        raise ValueError(f"no training series longer than the lag window ({spec.lags})")
    if np.all(X == X[0]) and np.all(y == y[0]):
        log.info("degenerate design (%d identical samples): constant predictor", len(y))
        return FittedRegressor(spec, ConstantModel(float(y[0])), degenerate=True, n_samples=len(y))
    return FittedRegressor(spec, _build(spec).fit(X, y), n_samples=len(y))


def forecast_regression(fitted: FittedRegressor, history, horizon: int) -> np.ndarray:
    y = np.asarray(history, dtype=float)
    if len(y) < fitted.lags:
        raise ValueError(f"need at least {fitted.lags} observations, got {len(y)}")
    window = y[len(y) - fitted.lags:].copy()
    out = np.empty(horizon)
    for i in range(horizon):
        out[i] = fitted.predict_next(window)
        window = np.roll(window, -1)
        window[-1] = out[i]
    return out
