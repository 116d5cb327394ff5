from __future__ import annotations

import numpy as np


def smape(actual, forecast) -> float:
    """Symmetric MAPE in percent, bounded by 200.

    Terms where actual and forecast are both zero contribute zero.

    >>> smape([1.0], [3.0])
    100.0
    >>> smape([0.0, 0.0], [1.0, 0.0])
    100.0
    """
    a = np.asarray(actual, dtype=float)
    f = np.asarray(forecast, dtype=float)
    if a.shape != f.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {f.shape}")
    if a.size == 0:
        raise ValueError("smape of empty series")
    denom = (np.abs(f) + np.abs(a)) / 2
    num = np.abs(f - a)
    terms = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    return float(100.0 * terms.sum() / a.size)
