"""Stage runner: ingest -> refine -> annotate -> index -> process -> cluster -> forecast -> report.

Each stage reads its predecessors' files from the output directory, writes
its own files atomically and records input/output hashes in
``manifest.json``. A stage whose parameters, inputs and outputs all match
the manifest is skipped.
"""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from filelock import FileLock, Timeout

from techprox import __version__
from techprox.clustering import (
    FLAT_LABEL, ClusterAssignment, LayoutPoint, assign_nearest, assignment_from_json, assignment_to_json,
    centroid_layout, cluster, layout_to_csv, resample, silhouette, silhouette_sweep,
)
from techprox.config import PipelineConfig
from techprox.corpus import (
    MonthKey, iter_raw_works, raw_to_jsonl, read_records, records_to_jsonl, refine_corpus,
)
from techprox.errors import ConfigurationError, TechproxError
from techprox.forecasting.backtest import (
    BacktestReport, ForecastSeries, SplitConfig, error_histogram, histogram_to_csv,
    read_series_corpus, run_regime,
)
from techprox.forecasting.models import STATISTICAL
from techprox.hindex import build_all_tables, tables_to_csv
from techprox.indices import CitationTally, IndexKind, IndexSeries, build_all_series, series_from_csv, series_to_csv
from techprox.keywords import ExtractorSpec, annotate_corpus, export_assignments, load_assignments
from techprox.openalex import OpenAlexClient
from techprox.plots import render_histogram, render_layout, render_series_plot
from techprox.processing import (
    ProcessedSeries, exp_smooth, metadata_to_json, minmax_normalize, process_series, processed_to_csv,
)

log = logging.getLogger(__name__)

STAGES = ("ingest", "refine", "annotate", "index", "process", "cluster", "forecast", "report")
STAGE_VERSION = {s: 1 for s in STAGES}
MANIFEST = "manifest.json"


class StageOrderError(TechproxError):
    pass


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(data.encode("utf-8") if isinstance(data, str) else data)
    os.replace(tmp, path)


@dataclass
class StageResult:
    outputs: dict[str, str | bytes]
    notes: dict = field(default_factory=dict)


class Workspace:
    """The output directory and its manifest."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.manifest_path = self.root / MANIFEST
        self.manifest = self._load()

    def _load(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {"stages": {}}

    def save(self) -> None:
        atomic_write(self.manifest_path, json.dumps(self.manifest, indent=1, sort_keys=True) + "\n")

    def path(self, rel: str) -> Path:
        return self.root / rel

    def entry(self, stage: str) -> dict | None:
        return self.manifest["stages"].get(stage)

    def outputs_intact(self, stage: str) -> bool:
        e = self.entry(stage)
        if e is None:
            return False
        for rel, digest in e["outputs"].items():
            p = self.path(rel)
            if not p.exists() or sha256_file(p) != digest:
                return False
        return True

    def tracked_files(self) -> set[str]:
        return {rel for e in self.manifest["stages"].values() for rel in e["outputs"]}


# -- helpers shared by stages ------------------------------------------------------------

def _series_from_index(ws: Workspace) -> list[IndexSeries]:
    return series_from_csv(ws.path("index/series.csv").read_text(encoding="utf-8"))


def _truncate(series: IndexSeries, end: MonthKey | None) -> IndexSeries:
    if end is None:
        return series
    n = end - series.start + 1
    return replace(series, values=series.values[:n].copy())


def load_processed(ws: Workspace, cfg: PipelineConfig) -> list[ProcessedSeries]:
    """Processed series, recomputed from the index table (processing is pure)."""
    t = cfg.thresholds
    return [
        process_series(_truncate(s, cfg.series_end), cfg.alpha, t.exclude_rate, t.flat_mean, cfg.max_degree)
        for s in _series_from_index(ws)
    ]


def load_external(cfg: PipelineConfig) -> dict[str, np.ndarray]:
    """External series, normalised and smoothed like the project's own."""
    path = cfg.paths.external_corpus
    if path is None:
        return {}
    if not path.exists():
        raise ConfigurationError(f"external corpus not found: {path}")
    return {sid: exp_smooth(minmax_normalize(v), cfg.alpha)
            for sid, v in read_series_corpus(path).items() if len(v) >= 2}


def final_third_slope(values: np.ndarray) -> float:
    """Least-squares slope (per month) over the last third of a curve."""
    n = len(values)
    start = n - n // 3
    x = np.arange(start, n, dtype=float)
    if len(x) < 2:
        return 0.0
    return float(np.polyfit(x, values[start:], 1)[0])


# -- stages ----------------------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig, ws: Workspace) -> StageResult:
    if cfg.paths.dumps:
        works = []
        for dump in cfg.paths.dumps:
            if not dump.exists():
                raise ConfigurationError(f"dump file not found: {dump}")
            works.extend(iter_raw_works(dump))
        return StageResult({"raw/works.jsonl": raw_to_jsonl(works)},
                           {"source": "dumps", "works": len(works)})
    if not len(cfg.catalog):
        raise ConfigurationError("technology catalog is empty")
    client = OpenAlexClient(
        endpoint=cfg.api.endpoint, cache_dir=cfg.paths.cache_dir, per_page=cfg.api.per_page,
        max_retries=cfg.api.max_retries, backoff=cfg.api.backoff,
    )
    works = list(client.iter_works(cfg.catalog))
    return StageResult({"raw/works.jsonl": raw_to_jsonl(works)}, {
        "source": "api", "works": len(works),
        "requests": client.requests_made, "cache_hits": client.cache_hits,
    })


def stage_refine(cfg: PipelineConfig, ws: Workspace) -> StageResult:
    works = iter_raw_works(ws.path("raw/works.jsonl"))
    records, stats = refine_corpus(works, cfg.catalog, cfg.seed, cfg.thresholds.relatedness)
    return StageResult({
        "corpus/records.jsonl": records_to_jsonl(records),
        "corpus/stats.json": json.dumps(stats.to_dict(), indent=1, sort_keys=True) + "\n",
    }, {"survivors": stats.survivors})


def stage_annotate(cfg: PipelineConfig, ws: Workspace) -> StageResult:
    records = read_records(ws.path("corpus/records.jsonl"))
    notes = {}
    if cfg.paths.assignments is not None:
        annotated, stats = load_assignments(cfg.paths.assignments, records)
        notes = {"mode": "load-file", "rows": stats.rows, "attached": stats.attached,
                 "unknown_work": stats.unknown_work, "out_of_range": stats.out_of_range}
    else:
        spec = (ExtractorSpec.with_stopword_file(cfg.paths.stopwords, top_k=cfg.top_k)
                if cfg.paths.stopwords else ExtractorSpec(top_k=cfg.top_k))
        annotated = annotate_corpus(records, spec)
        notes = {"mode": spec.mode, "top_k": spec.top_k}
    return StageResult({
        "corpus/annotated.jsonl": records_to_jsonl(annotated),
        "corpus/keywords.csv": export_assignments(annotated),
    }, notes)


def stage_index(cfg: PipelineConfig, ws: Workspace) -> StageResult:
    records = read_records(ws.path("corpus/annotated.jsonl"))
    tables = build_all_tables(records)
    tally = CitationTally()
    series = build_all_series(records, cfg.catalog, tables, tally)
    return StageResult({
        "index/h_index.csv": tables_to_csv(tables),
        "index/series.csv": series_to_csv(series),
    }, {"series": len(series), "references_outside_corpus": tally.outside_corpus})


def stage_process(cfg: PipelineConfig, ws: Workspace) -> StageResult:
    items = load_processed(ws, cfg)
    rates = [p.interpolation_rate for p in items]
    return StageResult({
        "processed/series.csv": processed_to_csv(items),
        "processed/metadata.json": metadata_to_json(items),
    }, {
        "series": len(items),
        "excluded": sum(p.excluded for p in items),
        "flat": sum(p.flat for p in items),
        "mean_interpolation_rate": float(np.mean(rates)) if rates else None,
    })


def _cluster_assignment(cfg: PipelineConfig, items: list[ProcessedSeries], k: int) -> ClusterAssignment:
    active = [p for p in items if not p.excluded and not p.flat]
    flat_ids = sorted(p.series_id for p in items if p.flat and not p.excluded)
    c = cfg.clustering
    ids = [p.series_id for p in active]
    X = np.array([p.smoothed for p in active])
    if c.train_on == "external":
        external = load_external(cfg)
        if not external:
            raise ConfigurationError("clustering.train_on = 'external' needs paths.external_corpus")
        E = np.array([resample(v, X.shape[1]) for _, v in sorted(external.items())])
        trained = cluster(E, c.algorithm, k, cfg.seed, c.max_iters)
        labels = assign_nearest(X, trained.centroids, c.algorithm)
        return ClusterAssignment(c.algorithm, k, ids, labels, trained.centroids, trained.iterations,
                                 cfg.seed, trained.costs, flat_ids, trained.constant_series)
    a = cluster(dict(zip(ids, X)), c.algorithm, k, cfg.seed, c.max_iters)
    a.flat_ids = flat_ids
    return a


def stage_cluster(cfg: PipelineConfig, ws: Workspace) -> StageResult:
    items = load_processed(ws, cfg)
    active = [p for p in items if not p.excluded and not p.flat]
    c = cfg.clustering
    k = min(c.k, len(active))
    notes = {"active": len(active), "k_requested": c.k, "k": k}
    if k < 1:
        empty = ClusterAssignment(c.algorithm, 0, [], np.zeros(0, dtype=int), np.zeros((0, 0)), 0, cfg.seed,
                                  [], sorted(p.series_id for p in items if p.flat and not p.excluded), 0)
        return StageResult({
            "cluster/assignment.json": assignment_to_json(empty),
            "cluster/assignment.csv": empty.to_csv(),
            "cluster/silhouette.json": json.dumps({"k": 0, "note": "no series to cluster"}, indent=1) + "\n",
        }, notes)
    if k < c.k:
        log.warning("only %d series to cluster; using k=%d instead of %d", len(active), k, c.k)
    a = _cluster_assignment(cfg, items, k)
    X = np.array([p.smoothed for p in active])
    sil: dict = {"k": k, "algorithm": c.algorithm}
    if len(set(a.labels.tolist())) >= 2:
        sil.update(silhouette(X, a.labels).to_dict())
    else:
        sil["note"] = "silhouette undefined for a single cluster"
    sil["sweep"] = {str(kk): v for kk, v in silhouette_sweep(X, c.sweep, c.algorithm, cfg.seed).items()}
    outputs = {
        "cluster/assignment.json": assignment_to_json(a),
        "cluster/assignment.csv": a.to_csv(),
        "cluster/silhouette.json": json.dumps(sil, indent=1, sort_keys=True) + "\n",
    }
    if len(a.centroids) >= 2:
        points, degenerate = centroid_layout(a)
        outputs["cluster/layout.csv"] = layout_to_csv(points)
        notes["layout_degenerate"] = degenerate
    return StageResult(outputs, notes)


def forecast_series(items: list[ProcessedSeries]) -> list[ForecastSeries]:
    """Every series that survives the interpolation-rate rule, flat ones included."""
    return [ForecastSeries(p.series_id, p.kind, p.smoothed) for p in items if not p.excluded]


def stage_forecast(cfg: PipelineConfig, ws: Workspace) -> StageResult:
    items = load_processed(ws, cfg)
    series = forecast_series(items)
    assignment = assignment_from_json(ws.path("cluster/assignment.json").read_text(encoding="utf-8"))
    labels = assignment.label_map()
    external = list(load_external(cfg).values()) if "transfer" in cfg.forecasting.regimes else []
    f = cfg.forecasting
    split = SplitConfig(f.n_sections, f.test_fraction, f.validation_fraction, cfg.seed)
    report = BacktestReport(metadata={
        "series": len(series),
        "split": "tuning over series (fit/validation/test); evaluation over time (expanding window)",
        "n_sections": f.n_sections,
        "seed": cfg.seed,
    })
    skipped_runs = []
    timings = {}
    for regime in f.regimes:
        for family in f.models:
            if family in STATISTICAL and regime != "local":
                continue
            if regime == "transfer" and not external:
                skipped_runs.append(f"{regime}/{family}: no external corpus")
                continue
            if not series:
                continue
            for h in f.horizons:
                t0 = time.perf_counter()
                part = run_regime(series, f.candidates(family, cfg.seed), regime, h, split,
                                  labels if regime.startswith("cluster") else None, external)
                timings[f"{regime}/{family}/h{h}"] = round(time.perf_counter() - t0, 3)
                part.metadata = {}
                report.merge(part)
    report.metadata["not_run"] = skipped_runs
    return StageResult({"forecast/report.json": report.to_json()}, {"seconds": timings})


def _pair_ids(cfg: PipelineConfig, pair: tuple[str, str]) -> tuple[str, str]:
    """Accept catalog ids or labels (case-insensitive)."""
    by_label = {label.lower(): tid for tid, label in cfg.catalog.technologies}
    out = []
    for name in pair:
        name = name.strip()
        if name in cfg.catalog.ids:
            out.append(name)
        elif name.lower() in by_label:
            out.append(by_label[name.lower()])
        else:
            out.append(name)
    return out[0], out[1]


def _pair_title(cfg: PipelineConfig, t1: str, t2: str) -> str:
    def label(t):
        return cfg.catalog.label(t) if t in cfg.catalog.ids else t
    return f"Indices of proximity between {label(t1)} and {label(t2)}"


def _trends_csv(items: list[ProcessedSeries]) -> str:
    lines = ["t1,t2,kind,slope_final_third,interpolation_rate,degree,excluded,flat"]
    for p in items:
        lines.append(f"{p.pair.t1},{p.pair.t2},{p.kind.value},{final_third_slope(p.fitted)!r},"
                     f"{p.interpolation_rate!r},{p.fit.degree},{int(p.excluded)},{int(p.flat)}")
    return "\n".join(lines) + "\n"


def _case_study_page(cfg, t1, t2, pair_items, svg, report: BacktestReport | None, labels) -> str:
    title = _pair_title(cfg, t1, t2)
    rows = []
    for p in pair_items:
        cl = labels.get(p.series_id)
        cl_text = "flat" if cl == FLAT_LABEL else ("excluded" if p.excluded else ("" if cl is None else str(cl)))
        rows.append(
            f"<tr><td>{p.kind.number}</td><td>{p.kind.value}</td><td>{p.interpolation_rate:.0%}</td>"
            f"<td>{p.fit.degree}</td><td>{final_third_slope(p.fitted):.6g}</td><td>{cl_text}</td></tr>"
        )
    fc_rows = []
    if report is not None:
        ids = {p.series_id for p in pair_items}
        for e in report.entries:
            vals = [s for s, sid in zip(e.smapes, e.series_ids) if sid in ids]
            if vals:
                fc_rows.append(f"<tr><td>{e.regime}</td><td>{e.model}</td><td>{e.horizon}</td>"
                               f"<td>{e.kind.number}</td><td>{float(np.median(vals)):.2f}</td></tr>")
    rates = [p.interpolation_rate for p in pair_items]
    parts = [
        "<!DOCTYPE html>",
        '<html><head><meta charset="utf-8">',
        f"<title>{title}</title>",
        "<style>body{font-family:Helvetica,Arial,sans-serif;max-width:1000px;margin:2em auto}"
        "table{border-collapse:collapse}td,th{border:1px solid #bbb;padding:3px 8px;text-align:right}</style>",
        "</head><body>",
        f"<h1>{title}</h1>",
        f"<p>Monthly series from {pair_items[0].start} over {len(pair_items[0].filled)} months. "
        f"Mean interpolation rate {float(np.mean(rates)):.0%}.</p>",
        svg,
        "<h2>Series</h2>",
        "<table><tr><th>index</th><th>kind</th><th>interpolation rate</th><th>fit degree</th>"
        "<th>fitted slope, final third (per month)</th><th>cluster</th></tr>",
        *rows,
        "</table>",
    ]
    if fc_rows:
        parts += ["<h2>Median fold SMAPE for this pair</h2>",
                  "<table><tr><th>regime</th><th>model</th><th>horizon</th><th>index</th><th>median SMAPE</th></tr>",
                  *fc_rows, "</table>"]
    parts.append("</body></html>")
    return "\n".join(parts) + "\n"


def stage_report(cfg: PipelineConfig, ws: Workspace, pair: tuple[str, str] | None = None) -> StageResult:
    items = load_processed(ws, cfg)
    outputs: dict[str, str] = {"report/trends.csv": _trends_csv(items)}
    by_pair: dict[tuple[str, str], list[ProcessedSeries]] = {}
    for p in items:
        by_pair.setdefault((p.pair.t1, p.pair.t2), []).append(p)

    case = pair or cfg.case_study
    if case is not None:
        case = _pair_ids(cfg, case)
        if case not in by_pair:
            raise ConfigurationError(
                f"no series for pair {case[0]},{case[1]}; pairs are ordered catalog ids or labels"
            )

    ids = cfg.catalog.ids
    for i, t1 in enumerate(ids):
        for t2 in ids[i + 1:]:
            if (t1, t2) in by_pair:
                outputs[f"report/plots/{t1}__{t2}.svg"] = render_series_plot(
                    by_pair[(t1, t2)], _pair_title(cfg, t1, t2))

    report = None
    if ws.path("forecast/report.json").exists():
        report = BacktestReport.from_json(ws.path("forecast/report.json").read_text(encoding="utf-8"))
        for regime in sorted({e.regime for e in report.entries}):
            outputs[f"report/tables/{regime}.csv"] = report.median_table(regime)
            hist = error_histogram(report, cfg.forecasting.histogram_width, regime=regime)
            outputs[f"report/histograms/{regime}.csv"] = histogram_to_csv(hist)
            outputs[f"report/histograms/{regime}.svg"] = render_histogram(
                hist, f"Fold SMAPE distribution, {regime} regime")

    labels = {}
    if ws.path("cluster/assignment.json").exists():
        labels = assignment_from_json(ws.path("cluster/assignment.json").read_text(encoding="utf-8")).label_map()
    if ws.path("cluster/layout.csv").exists():
        rows = list(csv.DictReader(ws.path("cluster/layout.csv").read_text(encoding="utf-8").splitlines()))
        pts = [LayoutPoint(int(r["cluster"]), float(r["x"]), float(r["y"]), int(r["size"])) for r in rows]
        outputs["report/cluster_layout.svg"] = render_layout(pts, "Cluster centroids")

    if case is not None:
        t1, t2 = case
        svg = outputs.get(f"report/plots/{t1}__{t2}.svg") or render_series_plot(
            by_pair[case], _pair_title(cfg, t1, t2))
        outputs[f"report/case_study_{t1}__{t2}.html"] = _case_study_page(
            cfg, t1, t2, by_pair[case], svg, report, labels)
    return StageResult(outputs, {"files": len(outputs)})


# -- orchestration -----------------------------------------------------------------------

STAGE_FUNCS: dict[str, Callable] = {
    "ingest": stage_ingest, "refine": stage_refine, "annotate": stage_annotate, "index": stage_index,
    "process": stage_process, "cluster": stage_cluster, "forecast": stage_forecast, "report": stage_report,
}
PARAM_SECTIONS = {
    "ingest": ("catalog", "api"),
    "refine": ("catalog", "thresholds", "seed"),
    "annotate": ("top_k",),
    "index": ("catalog",),
    "process": ("series_end", "thresholds", "alpha", "max_degree"),
    "cluster": ("clustering", "seed"),
    "forecast": ("forecasting", "seed"),
    "report": ("catalog", "case_study", "forecasting"),
}
# Predecessor files each stage reads (relative to the output dir).
STAGE_INPUTS = {
    "ingest": (),
    "refine": ("raw/works.jsonl",),
    "annotate": ("corpus/records.jsonl",),
    "index": ("corpus/annotated.jsonl",),
    "process": ("index/series.csv",),
    "cluster": ("index/series.csv", "processed/metadata.json"),
    "forecast": ("index/series.csv", "processed/metadata.json", "cluster/assignment.json"),
    "report": ("index/series.csv", "processed/metadata.json", "cluster/assignment.json",
               "forecast/report.json"),
}


def _external_inputs(cfg: PipelineConfig, stage: str) -> list[Path]:
    p = cfg.paths
    if stage == "ingest":
        return list(p.dumps)
    if stage == "annotate":
        return [x for x in (p.assignments, p.stopwords) if x is not None]
    if stage in ("cluster", "forecast") and p.external_corpus is not None:
        return [p.external_corpus]
    return []


def _predecessor(stage: str) -> str | None:
    i = STAGES.index(stage)
    return STAGES[i - 1] if i else None


class Pipeline:
    def __init__(self, cfg: PipelineConfig, echo: Callable[[str], None] = print, force: bool = False):
        self.cfg = cfg
        self.ws = Workspace(cfg.output_dir)
        self.echo = echo
        self.force = force

    def _params(self, stage: str, extra: dict | None = None) -> str:
        d = self.cfg.to_dict()
        payload = {k: d[k] for k in PARAM_SECTIONS[stage]}
        payload["version"] = STAGE_VERSION[stage]
        if extra:
            payload["extra"] = extra
        return sha256_bytes(json.dumps(payload, sort_keys=True, default=str).encode())

    def _input_hashes(self, stage: str) -> dict[str, str]:
        out = {}
        for rel in STAGE_INPUTS[stage]:
            p = self.ws.path(rel)
            if p.exists():
                out[rel] = sha256_file(p)
        for p in _external_inputs(self.cfg, stage):
            if not p.exists():
                raise ConfigurationError(f"{stage}: input file not found: {p}")
            out[str(p)] = sha256_file(p)
        return out

    def _check_predecessor(self, stage: str) -> None:
        prev = _predecessor(stage)
        if prev is None:
            return
        src = self.cfg.source or "<config>"
        if self.ws.entry(prev) is None or not self.ws.outputs_intact(prev):
            raise StageOrderError(
                f"stage '{stage}' needs the outputs of '{prev}'; run `techprox {prev} --config {src}` first"
            )

    def up_to_date(self, stage: str, extra: dict | None = None) -> bool:
        e = self.ws.entry(stage)
        if e is None or self.force:
            return False
        return (e.get("params") == self._params(stage, extra)
                and e.get("inputs") == self._input_hashes(stage)
                and self.ws.outputs_intact(stage))

    def run_stage(self, stage: str, **kwargs) -> str:
        self._check_predecessor(stage)
        extra = {k: v for k, v in kwargs.items() if v is not None} or None
        if self.up_to_date(stage, extra):
            self.echo(f"{stage}: skipped (up-to-date)")
            return "skipped"
        inputs = self._input_hashes(stage)
        t0 = time.perf_counter()
        result = STAGE_FUNCS[stage](self.cfg, self.ws, **kwargs)
        elapsed = time.perf_counter() - t0
        old = self.ws.entry(stage)
        for rel, data in sorted(result.outputs.items()):
            atomic_write(self.ws.path(rel), data)
        if old:
            for rel in set(old["outputs"]) - set(result.outputs):
                self.ws.path(rel).unlink(missing_ok=True)
        self.ws.manifest["stages"][stage] = {
            "version": STAGE_VERSION[stage],
            "params": self._params(stage, extra),
            "inputs": inputs,
            "outputs": {rel: sha256_file(self.ws.path(rel)) for rel in sorted(result.outputs)},
            "notes": result.notes,
            "seconds": round(elapsed, 3),
            "completed_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        }
        self.ws.manifest["config_hash"] = self.cfg.section_hash()
        self.ws.manifest["techprox_version"] = __version__
        self.ws.save()
        self.echo(f"{stage}: done ({elapsed:.1f}s, {len(result.outputs)} file(s))")
        return "done"

    def run(self, stages=STAGES, **report_kwargs) -> dict[str, str]:
        out = {}
        for stage in stages:
            kwargs = report_kwargs if stage == "report" else {}
            out[stage] = self.run_stage(stage, **kwargs)
        return out


def lock_for(cfg: PipelineConfig, timeout: float = 0.0) -> FileLock:
    """One run at a time per output directory; the lock file sits beside it."""
    out = cfg.output_dir
    out.parent.mkdir(parents=True, exist_ok=True)
    return FileLock(str(out.parent / f".{out.name}.lock"), timeout=timeout)


def run_locked(cfg: PipelineConfig, stages, echo=print, force=False, **report_kwargs) -> dict[str, str]:
    lock = lock_for(cfg)
    try:
        with lock:
            cfg.output_dir.mkdir(parents=True, exist_ok=True)
            return Pipeline(cfg, echo, force).run(stages, **report_kwargs)
    except Timeout:
        raise TechproxError(f"another run holds the lock on {cfg.output_dir}") from None
