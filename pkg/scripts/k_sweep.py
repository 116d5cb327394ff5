"""Mean silhouette per candidate k for each clustering algorithm.

Needs the process stage to have run for the given config.

    python scripts/k_sweep.py configs/synthetic.toml
"""
import argparse
from pathlib import Path

import numpy as np

from techprox.clustering import silhouette_sweep
from techprox.config import load_config
from techprox.pipeline import Workspace, load_processed


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config", type=Path)
    parser.add_argument("--k", type=int, nargs="+", default=[2, 3, 4, 5, 6])
    args = parser.parse_args()
    cfg = load_config(args.config)
    active = [p for p in load_processed(Workspace(cfg.output_dir), cfg) if not p.excluded and not p.flat]
    X = np.array([p.smoothed for p in active])
    ks = [k for k in args.k if k <= len(X)]
    print("algorithm," + ",".join(f"k={k}" for k in ks))
    for algorithm in ("kmeans", "kmedoids", "kshape"):
        scores = silhouette_sweep(X, ks, algorithm, cfg.seed)
        cells = ["" if scores[k] is None else f"{scores[k]:.4f}" for k in ks]
        print(algorithm + "," + ",".join(cells))


if __name__ == "__main__":
    main()
