"""Command-line entry point: ``techprox <command> --config <path> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from techprox.config import HORIZONS, load_config
from techprox.errors import TechproxError
from techprox.forecasting.backtest import REGIMES
from techprox.pipeline import STAGES, load_processed, run_locked, Workspace

log = logging.getLogger("techprox")


def _pair(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError("expected two technologies as T1,T2")
    return parts[0], parts[1]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="techprox", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path, help="TOML config file")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--k", type=int, help="override clustering.k")
        p.add_argument("--horizon", type=int, choices=HORIZONS, action="append",
                       help="forecast horizon (repeatable)")
        p.add_argument("--regime", choices=REGIMES, action="append", help="forecasting regime (repeatable)")
        p.add_argument("--pair", type=_pair, help="case-study pair T1,T2 (ids or labels)")
        p.add_argument("--force", action="store_true", help="rerun even when up to date")

    for stage in STAGES:
        common(sub.add_parser(stage, help=f"run the {stage} stage"))
    common(sub.add_parser("run", help="run every stage in order"))
    sweep = sub.add_parser("sweep", help="print mean silhouette per candidate k")
    sweep.add_argument("--config", required=True, type=Path)
    sweep.add_argument("--seed", type=int)
    synth = sub.add_parser("synth", help="write the synthetic fixture corpus")
    synth.add_argument("--out", required=True, type=Path, help="output directory")
    synth.add_argument("--seed", type=int, default=7)
    return parser


def _cmd_synth(args) -> int:
    from techprox.corpus import raw_to_jsonl
    from techprox.synthetic import SyntheticSpec, external_to_csv, generate_external_corpus, generate_works

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "synthetic_works.jsonl").write_text(
        raw_to_jsonl(generate_works(SyntheticSpec(seed=args.seed))), encoding="utf-8")
    (args.out / "synthetic_external.csv").write_text(external_to_csv(generate_external_corpus()), encoding="utf-8")
    print(f"wrote fixture files to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    import numpy as np
    from techprox.clustering import silhouette_sweep

    cfg = load_config(args.config).with_overrides(seed=args.seed)
    ws = Workspace(cfg.output_dir)
    if ws.entry("process") is None:
        raise TechproxError(f"sweep needs processed series; run `techprox process --config {args.config}` first")
    active = [p for p in load_processed(ws, cfg) if not p.excluded and not p.flat]
    X = np.array([p.smoothed for p in active])
    scores = silhouette_sweep(X, cfg.clustering.sweep, cfg.clustering.algorithm, cfg.seed) if len(X) else {}
    print(json.dumps({str(k): v for k, v in scores.items()}, indent=1))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, k=args.k,
            horizons=tuple(args.horizon) if args.horizon else None,
            regimes=tuple(args.regime) if args.regime else None,
        )
        stages = STAGES if args.command == "run" else (args.command,)
        report_kwargs = {"pair": args.pair} if args.pair else {}
        run_locked(cfg, stages, force=args.force, **report_kwargs)
        return 0
    except TechproxError as exc:
        print(f"techprox: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
