"""Expanding-window backtests under the local, cluster, global and transfer regimes."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from techprox.errors import ConfigurationError
from techprox.forecasting.metrics import smape
from techprox.forecasting.models import ForecastModelSpec
from techprox.forecasting.regression import FittedRegressor, forecast_regression, train_regression
from techprox.forecasting.statistical import forecast_statistical
from techprox.indices import IndexKind

log = logging.getLogger(__name__)

REGIMES = ("local", "cluster-rand", "cluster", "global", "transfer")


class SeriesTooShort(ValueError):
    pass


@dataclass
class ForecastSeries:
    series_id: str
    kind: IndexKind
    values: np.ndarray


@dataclass(frozen=True)
class SplitConfig:
    n_sections: int = 5
    test_fraction: float = 0.2
    validation_fraction: float = 0.2
    seed: int = 0


def window_ends(n: int, n_sections: int) -> list[int]:
    """End index (exclusive) of the training window for each of the n_sections - 1 folds."""
    if n_sections < 2:
        raise ValueError("need at least two sections")
    return [i * n // n_sections for i in range(1, n_sections)]


class LocalContext:
    """Each series is modelled from its own window only."""

    def forecast(self, model: ForecastModelSpec, history: np.ndarray, horizon: int, window_end: int):
        if model.is_statistical:
            return forecast_statistical(model, history, horizon)
        return forecast_regression(train_regression(model, [history]), history, horizon)


class PooledContext:
    """A regression model trained on a fixed set of series, cut at the fold's window end.

    With ``truncate=False`` the pool is used whole (an external corpus that
    shares no timeline with the evaluated series).
    """

    def __init__(self, training: Sequence[np.ndarray], truncate: bool = True):
        self.training = [np.asarray(s, dtype=float) for s in training]
        self.truncate = truncate
        self._cache: dict[tuple, FittedRegressor] = {}

    def fitted(self, model: ForecastModelSpec, window_end: int) -> FittedRegressor:
        key = (model, window_end if self.truncate else None)
        if key not in self._cache:
            pool = [s[:window_end] for s in self.training] if self.truncate else self.training
            self._cache[key] = train_regression(model, pool)
        return self._cache[key]

    def forecast(self, model: ForecastModelSpec, history: np.ndarray, horizon: int, window_end: int):
        if model.is_statistical:
            raise ConfigurationError("statistical models are fitted per series; use the local regime")
        return forecast_regression(self.fitted(model, window_end), history, horizon)


@dataclass
class Fold:
    window_end: int
    forecast: np.ndarray
    actual: np.ndarray

    @property
    def smape(self) -> float:
        return smape(self.actual, self.forecast)


def expanding_window_forecasts(
    values: Sequence[float],
    model: ForecastModelSpec,
    horizon: int,
    n_sections: int = 5,
    context=None,
) -> list[Fold]:
    y = np.asarray(values, dtype=float)
    context = context or LocalContext()
    ends = window_ends(len(y), n_sections)
    if ends[-1] + horizon > len(y):
        raise SeriesTooShort(f"series of length {len(y)} leaves fewer than {horizon} actuals after the last window")
    if ends[0] < model.min_history():
        raise SeriesTooShort(f"first window has {ends[0]} points, model needs {model.min_history()}")
    folds = []
    for end in ends:
        history = y[:end]
        fc = np.asarray(context.forecast(model, history, horizon, end), dtype=float)
        folds.append(Fold(end, fc, y[end:end + horizon]))
    return folds


def expanding_window_cv(values, model: ForecastModelSpec, horizon: int, n_sections: int = 5, context=None) -> list[float]:
    """One SMAPE per fold; the training window grows by one section per fold."""
    return [f.smape for f in expanding_window_forecasts(values, model, horizon, n_sections, context)]


# -- reports --------------------------------------------------------------------

@dataclass
class ReportEntry:
    kind: IndexKind
    model: str
    regime: str
    horizon: int
    smapes: list[float] = field(default_factory=list)
    series_ids: list[str] = field(default_factory=list)
    seconds: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def median(self) -> float:
        return float(np.median(self.smapes)) if self.smapes else float("nan")

    @property
    def mean(self) -> float:
        return float(np.mean(self.smapes)) if self.smapes else float("nan")

    @property
    def fold_count(self) -> int:
        return len(self.smapes)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "model": self.model,
            "regime": self.regime,
            "horizon": self.horizon,
            "median": self.median,
            "mean": self.mean,
            "folds": self.fold_count,
            "params": self.params,
            "smapes": self.smapes,
            "series_ids": self.series_ids,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReportEntry":
        return cls(IndexKind(d["kind"]), d["model"], d["regime"], int(d["horizon"]),
                   [float(v) for v in d["smapes"]], list(d["series_ids"]), 0.0, dict(d.get("params", {})))


@dataclass
class BacktestReport:
    entries: list[ReportEntry] = field(default_factory=list)
    skipped: dict[str, int] = field(default_factory=lambda: defaultdict(int))
    metadata: dict = field(default_factory=dict)

    def merge(self, other: "BacktestReport") -> "BacktestReport":
        self.entries.extend(other.entries)
        for k, v in other.skipped.items():
            self.skipped[k] += v
        return self

    def select(self, **criteria) -> list[ReportEntry]:
        out = []
        for e in self.entries:
            if all(getattr(e, k) == v for k, v in criteria.items() if v is not None):
                out.append(e)
        return out

    def to_json(self) -> str:
        """Deterministic report body; wall-clock timings live in ``timings_json``."""
        return json.dumps({
            "metadata": self.metadata,
            "skipped": dict(sorted(self.skipped.items())),
            "entries": [e.to_dict() for e in self.entries],
        }, indent=1) + "\n"

    def timings_json(self) -> str:
        return json.dumps([
            {"kind": e.kind.value, "model": e.model, "regime": e.regime, "horizon": e.horizon,
             "seconds": e.seconds, "median": e.median}
            for e in self.entries
        ], indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BacktestReport":
        d = json.loads(text)
        rep = cls([ReportEntry.from_dict(e) for e in d["entries"]], metadata=d.get("metadata", {}))
        for k, v in d.get("skipped", {}).items():
            rep.skipped[k] = v
        return rep

    def median_table(self, regime: str) -> str:
        """CSV with one row per (algorithm, horizon) and one column per index kind."""
        rows: dict[tuple[str, int], dict[IndexKind, float]] = {}
        for e in self.select(regime=regime):
            rows.setdefault((e.model, e.horizon), {})[e.kind] = e.median
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["algorithm", "horizon"] + [f"index{k.number}" for k in IndexKind])
        for (model, horizon), cells in rows.items():
            w.writerow([model, horizon] + [
                "" if k not in cells or np.isnan(cells[k]) else f"{cells[k]:.2f}" for k in IndexKind
            ])
        return buf.getvalue()


def error_histogram(
    report: BacktestReport, width: float = 10.0, **criteria
) -> dict[str, list[tuple[float, float, int]]]:
    """Counts of fold SMAPEs per model over [0, 200] in buckets of ``width``.

    Buckets are half-open except the last, which includes 200.
    """
    edges = np.append(np.arange(0.0, 200.0, width), 200.0)
    per_model: dict[str, list[float]] = defaultdict(list)
    for e in report.select(**criteria):
        per_model[e.model].extend(e.smapes)
    out = {}
    for model, values in per_model.items():
        counts, _ = np.histogram(values, bins=edges)
        out[model] = [(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    return out


def histogram_to_csv(hist: Mapping[str, list[tuple[float, float, int]]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "bucket_lo", "bucket_hi", "count"])
    for model, buckets in hist.items():
        for lo, hi, c in buckets:
            w.writerow([model, f"{lo:g}", f"{hi:g}", c])
    return buf.getvalue()


def read_series_corpus(path) -> dict[str, np.ndarray]:
    """External corpus: ``series_id,v1,v2,...`` per line, lengths may differ."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not row[0].strip():
                continue
            try:
                out[row[0]] = np.array([float(v) for v in row[1:] if v.strip()])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
    return out


# -- regimes --------------------------------------------------------------------

def split_series(ids: Sequence[str], split: SplitConfig) -> tuple[list[str], list[str], list[str]]:
    """Seeded (fit, validation, test) partition of series ids; test is never used for tuning."""
    ids = sorted(ids)
    perm = [ids[i] for i in np.random.default_rng(split.seed).permutation(len(ids))]
    n_train = max(1, int(round((1 - split.test_fraction) * len(perm))))
    train, test = perm[:n_train], perm[n_train:]
    n_val = int(round(split.validation_fraction * len(train)))
    if len(train) >= 2:
        n_val = max(1, n_val)
    return train[:len(train) - n_val], train[len(train) - n_val:], test


def randomized_labels(assignment: Mapping[str, int], ids: Sequence[str], seed: int) -> dict[str, int]:
    """Shuffle cluster labels over the series, keeping every cluster's size."""
    ids = sorted(ids)
    labels = [assignment.get(i) for i in ids]
    perm = np.random.default_rng(seed).permutation(len(ids))
    return {ids[i]: labels[j] for i, j in enumerate(perm)}


def _groups(series: Sequence[ForecastSeries], regime: str, assignment, seed: int) -> dict:
    ids = [s.series_id for s in series]
    if regime == "global":
        return {"all": ids}
    if regime in ("cluster", "cluster-rand"):
        if assignment is None:
            raise ConfigurationError(f"regime {regime!r} needs a cluster assignment")
        labels = {i: assignment.get(i) for i in ids}
        if regime == "cluster-rand":
            labels = randomized_labels(assignment, ids, seed)
        groups: dict = defaultdict(list)
        for i in sorted(ids):
            groups[labels[i]].append(i)
        return dict(groups)
    raise ValueError(regime)


def _contexts(series, regime, assignment, external, seed) -> dict[str, object]:
    by_id = {s.series_id: s for s in series}
    if regime == "local":
        ctx = LocalContext()
        return {s.series_id: ctx for s in series}
    if regime == "transfer":
        if not external:
            raise ConfigurationError("transfer regime needs an external series corpus")
        ctx = PooledContext(external, truncate=False)
        return {s.series_id: ctx for s in series}
    out = {}
    for _, members in _groups(series, regime, assignment, seed).items():
        ctx = PooledContext([by_id[i].values for i in members])
        for i in members:
            out[i] = ctx
    return out


def _median_cv(series, model, regime, horizon, split, assignment, external, skipped) -> tuple[dict, float]:
    contexts = _contexts(series, regime, assignment, external, split.seed)
    per_kind: dict[IndexKind, list] = defaultdict(list)
    elapsed = 0.0
    for s in series:
        t0 = time.perf_counter()
        try:
            folds = expanding_window_cv(s.values, model, horizon, split.n_sections, contexts[s.series_id])
        except SeriesTooShort:
            skipped["too_short"] += 1
            continue
        finally:
            elapsed += time.perf_counter() - t0
        per_kind[s.kind].append((s.series_id, folds))
    return per_kind, elapsed


def tune(
    series: Sequence[ForecastSeries],
    candidates: Sequence[ForecastModelSpec],
    regime: str,
    horizon: int,
    split: SplitConfig,
    assignment=None,
    external=None,
) -> ForecastModelSpec:
    """Pick the candidate with the lowest median validation SMAPE.

    Models are trained on the fit split only (the external corpus for the
    transfer regime) and scored on the validation split.
    """
    if len(candidates) == 1:
        return candidates[0]
    fit_ids, val_ids, _ = split_series([s.series_id for s in series], split)
    if not val_ids:
        return candidates[0]
    by_id = {s.series_id: s for s in series}
    best = None
    for cand in candidates:
        if regime == "local":
            ctx = LocalContext()
        elif regime == "transfer":
            ctx = PooledContext(external or [], truncate=False)
        else:
            ctx = PooledContext([by_id[i].values for i in fit_ids])
        scores = []
        for i in val_ids:
            try:
                scores.extend(expanding_window_cv(by_id[i].values, cand, horizon, split.n_sections, ctx))
            except (SeriesTooShort, ValueError):
                continue
        if not scores:
            continue
        med = float(np.median(scores))
        if best is None or med < best[0]:
            best = (med, cand)
    return best[1] if best else candidates[0]


def run_regime(
    series: Sequence[ForecastSeries],
    model: ForecastModelSpec | Sequence[ForecastModelSpec],
    regime: str,
    horizon: int,
    split: SplitConfig = SplitConfig(),
    assignment: Mapping[str, int] | None = None,
    external: Sequence[np.ndarray] | None = None,
) -> BacktestReport:
    """Backtest one model family under one regime and horizon.

    ``model`` may be a list of candidate specs (a hyperparameter grid); the
    winner on the validation split is then evaluated on every series.
    """
    if regime not in REGIMES:
        raise ConfigurationError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    candidates = [model] if isinstance(model, ForecastModelSpec) else list(model)
    if regime != "local" and any(c.is_statistical for c in candidates):
        raise ConfigurationError(f"{candidates[0].label} is per-series only; use the local regime")
    if regime in ("cluster", "cluster-rand") and assignment is None:
        raise ConfigurationError(f"regime {regime!r} needs a cluster assignment")
    if regime == "transfer" and not external:
        raise ConfigurationError("transfer regime needs an external series corpus")
    chosen = tune(series, candidates, regime, horizon, split, assignment, external)
    report = BacktestReport(metadata={
        "split": "tuning over series (fit/validation/test); evaluation over time (expanding window)",
        "n_sections": split.n_sections,
    })
    per_kind, elapsed = _median_cv(series, chosen, regime, horizon, split, assignment, external, report.skipped)
    n_done = sum(len(v) for v in per_kind.values()) or 1
    for kind in IndexKind:
        if kind not in per_kind:
            continue
        entry = ReportEntry(kind, chosen.label, regime, horizon, params=chosen.to_dict())
        for sid, folds in per_kind[kind]:
            entry.smapes.extend(folds)
            entry.series_ids.extend([sid] * len(folds))
        entry.seconds = elapsed * len(per_kind[kind]) / n_done
        report.entries.append(entry)
    return report
