#!/usr/bin/env python3
"""Async training quality as a function of example budget (1x / 4x / 12x).

Shares one graph and one set of sampled records across the sweep, then
prints the comparison table and writes its CSVs.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from walkembed.pipeline import compare_runs, config_from_dict, format_comparison, run_pipeline

BUDGET_MULTIPLIERS = (1, 4, 12)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="runs/sweep")
    ap.add_argument("--base-batches", type=int, default=2000,
                    help="micro-batches in the 1x budget")
    ap.add_argument("--workers", type=int, default=8)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    run_dirs = []
    for mult in BUDGET_MULTIPLIERS:
        run_dir = f"{args.out_dir}/budget-{mult:02d}x"
        cfg = {
            "seed": args.seed,
            "run_dir": run_dir,
            "graph": {"kind": "preset", "name": "sbm-10k"},
            "min_degree": 2,
            "sampler": {"walks_per_node": 128, "walk_length": 3, "num_shards": 8},
            "trainer": {
                "dim": 128,
                "mode": "async",
                "per_replica_batch_size": 1024,
                "negatives_per_positive": 3,
                "num_workers": args.workers,
                "steps": args.base_batches * mult,
                "optimizer": {"kind": "fixed_sgd", "lr": 150.0},
            },
            "eval": {"non_edge_samples": 10_000, "recall_nodes": 100},
        }
        print(f"== budget {mult}x ({cfg['trainer']['steps']} micro-batches)")
        run_pipeline(config_from_dict(cfg))
        run_dirs.append(run_dir)

    rows = compare_runs(run_dirs, out_csv=Path(args.out_dir) / "summary.csv")
    print()
    print(format_comparison(rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
