"""Gap filling, polynomial trend fitting, normalisation, smoothing and flags.

Order per series: fill gaps (local cubic inside, linear at the edges, clip
negatives), fit the SMAPE-best polynomial of degree 0..10 on the filled
values, min-max normalise, exponentially smooth, then flag the series as
excluded (too much of it interpolated) or flat (normalised mean tiny).
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from techprox.corpus import MonthKey
from techprox.errors import ConfigurationError
from techprox.forecasting.metrics import smape
from techprox.indices import IndexKind, IndexSeries, TechPair

log = logging.getLogger(__name__)

MAX_DEGREE = 10
# SMAPE values (in percent) closer than this count as a tie; lowest degree wins.
TIE_TOLERANCE = 1e-9
DEFAULT_ALPHA = 0.1
EXCLUDE_RATE = 0.5
FLAT_MEAN = 0.02


def newton_interpolate(xs: Sequence[float], ys: Sequence[float], x: float) -> float:
    """Evaluate the interpolating polynomial through (xs, ys) at x by divided differences."""
    xs = [float(v) for v in xs]
    coef = [float(v) for v in ys]
    n = len(xs)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - j])
    result = coef[-1]
    for i in range(n - 2, -1, -1):
        result = result * (x - xs[i]) + coef[i]
    return result


def _interior_knots(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    nl = min(2, len(left))
    nr = min(2, len(right))
    if nl < 2:
        nr = min(3, len(right))
    if nr < 2:
        nl = min(3, len(left))
    return np.concatenate([left[len(left) - nl:], right[:nr]])


def interpolate(series: IndexSeries | np.ndarray) -> tuple[np.ndarray, float]:
    """Fill NaN months; returns (filled values, fraction of months filled).

    Interior gaps use the cubic through the two nearest known months on each
    side (three and one when a side has a single known month). Leading and
    trailing gaps extend the line through the two nearest known months.
    Negative fills become zero. With fewer than two known months nothing can
    be interpolated and the rate is reported as 1.0.
    """
    values = np.asarray(series.values if isinstance(series, IndexSeries) else series, dtype=float)
    n = len(values)
    if n == 0:
        return values.copy(), 1.0
    known = np.flatnonzero(~np.isnan(values))
    if len(known) < 2:
        fill = values[known[0]] if len(known) else 0.0
        out = np.where(np.isnan(values), fill, values)
        return np.maximum(out, 0.0), 1.0
    out = values.copy()
    missing = np.flatnonzero(np.isnan(values))
    for i in missing:
        pos = np.searchsorted(known, i)
        left, right = known[:pos], known[pos:]
        if len(left) and len(right):
            knots = _interior_knots(left, right)
        elif len(right):
            knots = right[:2]
        else:
            knots = left[-2:]
        out[i] = newton_interpolate(knots, values[knots], i)
    out[missing] = np.maximum(out[missing], 0.0)
    return out, len(missing) / n


@dataclass
class PolynomialFit:
    degree: int
    fit_smape: float
    curve: Chebyshev = field(repr=False)
    smapes: dict[int, float] = field(default_factory=dict)
    skipped: list[int] = field(default_factory=list)

    @property
    def coefficients(self) -> np.ndarray:
        """a_0..a_d of the power series in the 0-based month ordinal."""
        return self.curve.convert(kind=Polynomial, domain=self.curve.domain, window=self.curve.domain).coef

    def evaluate(self, x) -> np.ndarray:
        return self.curve(np.asarray(x, dtype=float))


def fit_best_polynomial(values: Sequence[float], max_degree: int = MAX_DEGREE) -> PolynomialFit:
    """Least-squares fits of every degree 0..max_degree; keep the lowest-SMAPE one."""
    y = np.asarray(values, dtype=float)
    x = np.arange(len(y), dtype=float)
    domain = [0.0, max(len(y) - 1, 1.0)]
    fits: dict[int, tuple[Chebyshev, float]] = {}
    skipped = []
    for deg in range(max_degree + 1):
        if len(y) < deg + 1:
            skipped.append(deg)
            continue
        curve, (_, rank, _, _) = Chebyshev.fit(x, y, deg, domain=domain, full=True)
        if rank < deg + 1:
            skipped.append(deg)
            continue
        fits[deg] = (curve, smape(y, curve(x)))
    if not fits:
        raise ValueError("no polynomial degree could be fitted")
    best = min(s for _, s in fits.values())
    degree = min(d for d, (_, s) in fits.items() if s <= best + TIE_TOLERANCE)
    if skipped:
        log.debug("skipped polynomial degrees %s", skipped)
    return PolynomialFit(
        degree=degree,
        fit_smape=fits[degree][1],
        curve=fits[degree][0],
        smapes={d: s for d, (_, s) in fits.items()},
        skipped=skipped,
    )


def minmax_normalize(values: Sequence[float]) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return x.copy()
    shifted = x - x.min()
    top = shifted.max()
    if top == 0:
        return np.zeros_like(x)
    return shifted / top


def exp_smooth(values: Sequence[float], alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """F_1 = x_1, F_t = alpha * x_t + (1 - alpha) * F_{t-1}."""
    if not 0 < alpha < 1:
        raise ConfigurationError(f"smoothing alpha must lie in (0, 1), got {alpha}")
    x = np.asarray(values, dtype=float)
    out = np.empty_like(x)
    if x.size == 0:
        return out
    out[0] = x[0]
    for t in range(1, len(x)):
        # same recurrence, written so a constant input stays exactly constant
        out[t] = out[t - 1] + alpha * (x[t] - out[t - 1])
    return out


@dataclass(frozen=True)
class SeriesFlags:
    excluded: bool
    flat: bool


def classify(
    interpolation_rate: float,
    normalized: Sequence[float],
    exclude_rate: float = EXCLUDE_RATE,
    flat_mean: float = FLAT_MEAN,
) -> SeriesFlags:
    """Excluded when strictly more than ``exclude_rate`` was filled; flat when mean <= ``flat_mean``."""
    if interpolation_rate > exclude_rate:
        return SeriesFlags(excluded=True, flat=False)
    return SeriesFlags(excluded=False, flat=bool(np.mean(normalized) <= flat_mean))


@dataclass
class ProcessedSeries:
    pair: TechPair
    kind: IndexKind
    start: MonthKey
    raw: np.ndarray
    filled: np.ndarray
    interpolation_rate: float
    fit: PolynomialFit
    normalized: np.ndarray
    smoothed: np.ndarray
    flags: SeriesFlags

    @property
    def series_id(self) -> str:
        return f"{self.pair.t1}|{self.pair.t2}|{self.kind.value}"

    @property
    def excluded(self) -> bool:
        return self.flags.excluded

    @property
    def flat(self) -> bool:
        return self.flags.flat

    @property
    def months(self) -> list[MonthKey]:
        return [self.start.shift(i) for i in range(len(self.filled))]

    @property
    def fitted(self) -> np.ndarray:
        return self.fit.evaluate(np.arange(len(self.filled)))

    def metadata(self) -> dict:
        return {
            "series_id": self.series_id,
            "t1": self.pair.t1,
            "t2": self.pair.t2,
            "kind": self.kind.value,
            "interpolation_rate": self.interpolation_rate,
            "degree": self.fit.degree,
            "fit_smape": self.fit.fit_smape,
            "coefficients": [float(c) for c in self.fit.coefficients],
            "skipped_degrees": self.fit.skipped,
            "excluded": self.flags.excluded,
            "flat": self.flags.flat,
        }


def process_series(
    series: IndexSeries,
    alpha: float = DEFAULT_ALPHA,
    exclude_rate: float = EXCLUDE_RATE,
    flat_mean: float = FLAT_MEAN,
    max_degree: int = MAX_DEGREE,
) -> ProcessedSeries:
    filled, rate = interpolate(series)
    fit = fit_best_polynomial(filled, max_degree)
    normalized = minmax_normalize(filled)
    smoothed = exp_smooth(normalized, alpha)
    return ProcessedSeries(
        pair=series.pair,
        kind=series.kind,
        start=series.start,
        raw=np.asarray(series.values, dtype=float).copy(),
        filled=filled,
        interpolation_rate=rate,
        fit=fit,
        normalized=normalized,
        smoothed=smoothed,
        flags=classify(rate, normalized, exclude_rate, flat_mean),
    )


def processed_to_csv(items: Iterable[ProcessedSeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t1", "t2", "kind", "stage", "year", "month", "value"])
    for s in items:
        months = s.months
        for stage, arr in (("filled", s.filled), ("fitted", s.fitted),
                           ("normalized", s.normalized), ("smoothed", s.smoothed)):
            for m, v in zip(months, arr):
                w.writerow([s.pair.t1, s.pair.t2, s.kind.value, stage, m.year, m.month, repr(float(v))])
    return buf.getvalue()


def metadata_to_json(items: Iterable[ProcessedSeries]) -> str:
    return json.dumps([s.metadata() for s in items], indent=1) + "\n"


def retained(items: Iterable[ProcessedSeries]) -> list[ProcessedSeries]:
    """Series that go on to clustering: neither excluded nor flat."""
    return [s for s in items if not s.excluded and not s.flat]
