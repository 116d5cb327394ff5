"""Per-series baselines: seasonal naive, simple exponential smoothing, Theta."""
from __future__ import annotations

import numpy as np

from techprox.forecasting.models import ForecastModelSpec
from techprox.processing import exp_smooth

ALPHA_GRID = np.round(np.arange(0.01, 1.0, 0.01), 2)


class InsufficientHistory(ValueError):
    pass


def _check(history: np.ndarray, minimum: int) -> None:
    if len(history) < minimum:
        raise InsufficientHistory(f"need at least {minimum} observations, got {len(history)}")


def naive_seasonal(history, horizon: int, K: int = 1) -> np.ndarray:
    """Repeat the last K observations."""
    y = np.asarray(history, dtype=float)
    _check(y, max(K, 3))
    last = y[len(y) - K:]
    return np.array([last[i % K] for i in range(horizon)])


def ses_forecast(history, horizon: int, alpha: float) -> np.ndarray:
    level = exp_smooth(np.asarray(history, dtype=float), alpha)[-1]
    return np.full(horizon, level)


def _ses_sse(z: np.ndarray, alpha: float) -> tuple[float, float]:
    level = z[0]
    sse = 0.0
    for v in z[1:]:
        sse += (v - level) ** 2
        level = alpha * v + (1 - alpha) * level
    return sse, level


def fit_ses(z: np.ndarray) -> tuple[float, float]:
    """Grid-searched alpha minimising one-step SSE; returns (alpha, final level)."""
    best = None
    for a in ALPHA_GRID:
        sse, level = _ses_sse(z, a)
        if best is None or sse < best[0]:
            best = (sse, a, level)
    return float(best[1]), float(best[2])


def theta(history, horizon: int, variant: str = "drift") -> np.ndarray:
    """Two-line Theta forecast.

    The theta=0 line is the least-squares trend; the theta=2 line doubles the
    curvature around it. ``classic`` extrapolates the theta=2 line with flat
    SES; ``drift`` extrapolates it along its own trend plus SES of the
    deviations, which keeps linear series exact. The forecast is the mean of
    the two extrapolated lines.
    """
    y = np.asarray(history, dtype=float)
    _check(y, 3)
    t = np.arange(len(y), dtype=float)
    slope, intercept = np.polyfit(t, y, 1)
    trend = intercept + slope * t
    future = intercept + slope * np.arange(len(y), len(y) + horizon)
    z2 = 2 * y - trend
    if variant == "classic":
        _, level = fit_ses(z2)
        z2_future = np.full(horizon, level)
    else:
        s2, i2 = np.polyfit(t, z2, 1)
        resid = z2 - (i2 + s2 * t)
        _, level = fit_ses(resid)
        z2_future = i2 + s2 * np.arange(len(y), len(y) + horizon) + level
    return 0.5 * (future + z2_future)


def forecast_statistical(model: ForecastModelSpec, history, horizon: int) -> np.ndarray:
    y = np.asarray(history, dtype=float)
    _check(y, model.min_history())
    if model.family == "naive_seasonal":
        return naive_seasonal(y, horizon, model.K)
    if model.family == "exp_smoothing":
        return ses_forecast(y, horizon, model.alpha)
    if model.family == "theta":
        return theta(y, horizon, model.theta_variant)
    raise ValueError(f"{model.family} is not a statistical model")
