"""Forecasting models and expanding-window SMAPE backtests.

Submodules are imported explicitly (``techprox.forecasting.backtest`` etc.);
only the metric is re-exported here because series processing depends on it.
"""
from techprox.forecasting.metrics import smape

__all__ = ["smape"]
