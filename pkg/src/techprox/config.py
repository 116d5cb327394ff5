"""Pipeline configuration loaded from a TOML file.

Relative paths are resolved against the directory holding the config file.
Every random choice in the pipeline derives from ``run.seed``.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from techprox.corpus import MonthKey, TechnologyCatalog
from techprox.errors import ConfigurationError
from techprox.forecasting.models import FAMILIES, ForecastModelSpec, expand_grid
from techprox.forecasting.backtest import REGIMES
from techprox.openalex import DEFAULT_ENDPOINT

HORIZONS = (3, 6, 12)
ALGORITHMS = ("kmeans", "kmedoids", "kshape")


@dataclass(frozen=True)
class Paths:
    output_dir: Path
    cache_dir: Path | None = None
    dumps: tuple[Path, ...] = ()
    assignments: Path | None = None
    external_corpus: Path | None = None
    stopwords: Path | None = None


@dataclass(frozen=True)
class ApiSettings:
    endpoint: str = DEFAULT_ENDPOINT
    per_page: int = 200
    max_retries: int = 5
    backoff: float = 1.0


@dataclass(frozen=True)
class Thresholds:
    relatedness: float = 0.0
    flat_mean: float = 0.02
    exclude_rate: float = 0.5


@dataclass(frozen=True)
class ClusterSettings:
    algorithm: str = "kshape"
    k: int = 5
    sweep: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8)
    train_on: str = "own"
    max_iters: int = 100


@dataclass(frozen=True)
class ForecastSettings:
    horizons: tuple[int, ...] = HORIZONS
    regimes: tuple[str, ...] = REGIMES
    models: tuple[str, ...] = FAMILIES
    grids: dict = field(default_factory=dict)
    base: dict = field(default_factory=dict)
    n_sections: int = 5
    test_fraction: float = 0.2
    validation_fraction: float = 0.2
    histogram_width: float = 10.0

    def candidates(self, family: str, seed: int) -> list[ForecastModelSpec]:
        base = ForecastModelSpec(family=family, seed=seed, **self.base.get(family, {}))
        return expand_grid(base, self.grids.get(family, {}))


@dataclass(frozen=True)
class PipelineConfig:
    paths: Paths
    catalog: TechnologyCatalog
    series_end: MonthKey | None = None
    thresholds: Thresholds = Thresholds()
    alpha: float = 0.1
    max_degree: int = 10
    top_k: int = 5
    api: ApiSettings = ApiSettings()
    clustering: ClusterSettings = ClusterSettings()
    forecasting: ForecastSettings = ForecastSettings()
    case_study: tuple[str, str] | None = None
    seed: int = 0
    source: Path | None = None

    def __post_init__(self):
        t = self.thresholds
        if not 0.0 <= t.relatedness < 1.0:
            raise ConfigurationError(f"relatedness threshold must lie in [0, 1), got {t.relatedness}")
        if not 0.0 <= t.flat_mean <= 1.0:
            raise ConfigurationError(f"flat_mean must lie in [0, 1], got {t.flat_mean}")
        if not 0.0 <= t.exclude_rate <= 1.0:
            raise ConfigurationError(f"exclude_rate must lie in [0, 1], got {t.exclude_rate}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0 <= self.max_degree <= 10:
            raise ConfigurationError("max_degree must lie in 0..10")
        if self.top_k < 1:
            raise ConfigurationError("top_k must be at least 1")
        c = self.clustering
        if c.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown clustering algorithm {c.algorithm!r}; expected one of {ALGORITHMS}")
        if c.k < 1:
            raise ConfigurationError("k must be at least 1")
        if c.train_on not in ("own", "external"):
            raise ConfigurationError("clustering.train_on must be 'own' or 'external'")
        f = self.forecasting
        for h in f.horizons:
            if h not in HORIZONS:
                raise ConfigurationError(f"horizon {h} not in {HORIZONS}")
        for r in f.regimes:
            if r not in REGIMES:
                raise ConfigurationError(f"unknown regime {r!r}; expected one of {REGIMES}")
        for m in f.models:
            if m not in FAMILIES:
                raise ConfigurationError(f"unknown model family {m!r}; expected one of {FAMILIES}")
        if not 0.0 < f.test_fraction < 1.0 or not 0.0 <= f.validation_fraction < 1.0:
            raise ConfigurationError("split fractions must lie in (0, 1)")
        if self.series_end is not None and not (self.catalog.start <= self.series_end <= self.catalog.end):
            raise ConfigurationError(f"series_end {self.series_end} outside the catalog range")
        if self.case_study is not None:
            for tech in self.case_study:
                if tech not in self.catalog.ids:
                    raise ConfigurationError(f"case-study technology {tech!r} is not in the catalog")

    @property
    def output_dir(self) -> Path:
        return self.paths.output_dir

    def with_overrides(self, seed: int | None = None, k: int | None = None,
                       horizons: tuple[int, ...] | None = None,
                       regimes: tuple[str, ...] | None = None) -> "PipelineConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if k is not None:
            cfg = replace(cfg, clustering=replace(cfg.clustering, k=k))
        if horizons is not None:
            cfg = replace(cfg, forecasting=replace(cfg.forecasting, horizons=tuple(horizons)))
        if regimes is not None:
            cfg = replace(cfg, forecasting=replace(cfg.forecasting, regimes=tuple(regimes)))
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return json.loads(json.dumps(d, default=str))

    def section_hash(self, *keys: str) -> str:
        """Hash of the named top-level config sections (all of them if none given)."""
        d = self.to_dict()
        if keys:
            d = {k: d[k] for k in keys}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _path(base: Path, value: str | None) -> Path | None:
    if not value:
        return None
    p = Path(value).expanduser()
    return p if p.is_absolute() else (base / p).resolve()


def _take(section: dict, cls, name: str, **convert) -> Any:
    known = set(cls.__dataclass_fields__)
    unknown = set(section) - known
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    values = {k: convert[k](v) if k in convert else v for k, v in section.items()}
    return cls(**values)


def parse_config(data: dict, base_dir: Path, source: Path | None = None) -> PipelineConfig:
    data = dict(data)
    allowed = {"paths", "catalog", "thresholds", "processing", "keywords", "api",
               "clustering", "forecasting", "report", "run"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigurationError(f"unknown config section(s): {', '.join(sorted(unknown))}")

    plain_sections = {
        "paths": set(Paths.__dataclass_fields__),
        "catalog": {"start", "end", "technologies"},
        "processing": {"alpha", "max_degree", "series_end"},
        "keywords": {"top_k"},
        "report": {"case_study"},
        "run": {"seed"},
    }
    for name, known in plain_sections.items():
        extra = set(data.get(name, {})) - known
        if extra:
            raise ConfigurationError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")

    p = data.get("paths", {})
    if "output_dir" not in p:
        raise ConfigurationError("[paths] output_dir is required")
    paths = Paths(
        output_dir=_path(base_dir, p["output_dir"]),
        cache_dir=_path(base_dir, p.get("cache_dir")),
        dumps=tuple(_path(base_dir, d) for d in p.get("dumps", [])),
        assignments=_path(base_dir, p.get("assignments")),
        external_corpus=_path(base_dir, p.get("external_corpus")),
        stopwords=_path(base_dir, p.get("stopwords")),
    )

    c = data.get("catalog", {})
    techs = c.get("technologies", [])
    try:
        catalog = TechnologyCatalog(
            technologies=tuple((str(t[0]), str(t[1])) for t in techs),
            start=MonthKey.parse(c.get("start", "2002-01")),
            end=MonthKey.parse(c.get("end", "2022-12")),
        )
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"[catalog]: {exc}") from exc

    proc = data.get("processing", {})
    kw = data.get("keywords", {})
    run = data.get("run", {})
    if "seed" not in run:
        raise ConfigurationError("[run] seed is required (no implicit seeds)")
    report = data.get("report", {})
    case = report.get("case_study")

    f = dict(data.get("forecasting", {}))
    tuple_keys = {"horizons": tuple, "regimes": tuple, "models": tuple}
    forecasting = _take(f, ForecastSettings, "forecasting", **tuple_keys)
    clustering = _take(data.get("clustering", {}), ClusterSettings, "clustering", sweep=tuple)

    return PipelineConfig(
        paths=paths,
        catalog=catalog,
        series_end=MonthKey.parse(proc["series_end"]) if proc.get("series_end") else None,
        thresholds=_take(data.get("thresholds", {}), Thresholds, "thresholds"),
        alpha=float(proc.get("alpha", 0.1)),
        max_degree=int(proc.get("max_degree", 10)),
        top_k=int(kw.get("top_k", 5)),
        api=_take(data.get("api", {}), ApiSettings, "api"),
        clustering=clustering,
        forecasting=forecasting,
        case_study=(str(case[0]), str(case[1])) if case else None,
        seed=int(run["seed"]),
        source=source,
    )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return parse_config(data, path.resolve().parent, path.resolve())
