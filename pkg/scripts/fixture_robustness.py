"""Check that the planted trend survives different generator seeds.

Generates the synthetic corpus for each seed, runs the stages up to series
processing and prints the final-third slope of the fitted curve for the
planted pair and the control pairs.

    python scripts/fixture_robustness.py --seeds 7 8 9
"""
import argparse
import dataclasses
import tempfile
from pathlib import Path

from techprox.config import load_config
from techprox.corpus import raw_to_jsonl
from techprox.pipeline import Pipeline, Workspace, final_third_slope, load_processed
from techprox.synthetic import SyntheticSpec, generate_works

ROOT = Path(__file__).resolve().parents[1]
KINDS = ("keyword", "collab_incremental", "collab_non_incremental")


def slopes_for_seed(seed: int, tmp: Path) -> dict:
    dump = tmp / f"works_{seed}.jsonl"
    dump.write_text(raw_to_jsonl(generate_works(SyntheticSpec(seed=seed))), encoding="utf-8")
    cfg = load_config(ROOT / "configs" / "synthetic.toml")
    paths = dataclasses.replace(cfg.paths, output_dir=tmp / f"run_{seed}", dumps=(dump,))
    cfg = dataclasses.replace(cfg, paths=paths)
    Pipeline(cfg, echo=lambda s: None).run(["ingest", "refine", "annotate", "index", "process"])
    return {(p.pair.t1, p.pair.t2, p.kind.value): final_third_slope(p.fitted)
            for p in load_processed(Workspace(cfg.output_dir), cfg)}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[7, 8, 9, 10, 11])
    args = parser.parse_args()
    print("seed,kind,planted,control_13,control_23,ok")
    with tempfile.TemporaryDirectory() as tmp:
        for seed in args.seeds:
            s = slopes_for_seed(seed, Path(tmp))
            for kind in KINDS:
                planted = s[("C100001", "C100002", kind)]
                c13, c23 = s[("C100001", "C100003", kind)], s[("C100002", "C100003", kind)]
                ok = planted > 0 and max(abs(c13), abs(c23)) < 0.1 * planted
                print(f"{seed},{kind},{planted:.4g},{c13:.4g},{c23:.4g},{ok}")


if __name__ == "__main__":
    main()
