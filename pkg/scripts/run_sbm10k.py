#!/usr/bin/env python3
"""End-to-end benchmark run on the 10k-node block-model preset.

Generates the graph, prunes, samples walks, trains in the requested mode,
and prints the embedding quality report next to a random-init baseline.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from walkembed.graph import load_csr
from walkembed.metrics import compute_report
from walkembed.model import init_table
from walkembed.pipeline import config_from_dict, run_pipeline


def config(run_dir: str, mode: str, steps: int, seed: int) -> dict:
    trainer = {
        "dim": 128,
        "mode": mode,
        "per_replica_batch_size": 1024,
        "negatives_per_positive": 3,
        "steps": steps,
    }
    if mode == "sync":
        trainer["num_replicas"] = 2
        trainer["optimizer"] = {
            "kind": "warmup_decay_sgd",
            "warmup_steps": max(1, steps // 10),
            "peak_lr": 400.0,
            "decay_steps": max(1, steps - steps // 10),
            "final_lr": 40.0,
        }
    else:
        trainer["num_workers"] = 8
        trainer["optimizer"] = {"kind": "fixed_sgd", "lr": 150.0}
    return {
        "seed": seed,
        "run_dir": run_dir,
        "graph": {"kind": "preset", "name": "sbm-10k"},
        "min_degree": 2,
        "sampler": {"walks_per_node": 128, "walk_length": 3, "num_shards": 8},
        "trainer": trainer,
        "eval": {"non_edge_samples": 10_000, "recall_nodes": 100},
    }


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--run-dir", default="runs/sbm10k")
    ap.add_argument("--mode", choices=["sync", "async"], default="sync")
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    cfg = config(args.run_dir, args.mode, args.steps, args.seed)
    print(json.dumps(cfg, indent=2))
    result = run_pipeline(config_from_dict(cfg))
    report = result.report

    g = load_csr(result.run_dir / "pruned.csr")
    baseline = compute_report(
        g, init_table(g.num_nodes, 128, seed=args.seed), non_edge_samples=10_000,
        recall_nodes=100, seed=args.seed,
    )
    print(f"\nbaseline (random init): snr={baseline.edge_snr:.4f} recall={baseline.mean_recall:.4f}")
    print(f"trained ({args.mode}):    snr={report.edge_snr:.4f} recall={report.mean_recall:.4f}")
    print(f"report: {result.run_dir / 'eval' / 'report.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
