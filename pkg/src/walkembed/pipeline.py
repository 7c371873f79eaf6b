"""End-to-end runs: prepare graph, sample, train, evaluate, compare.

A run directory holds every stage artifact plus a manifest recording input
and output content hashes. Stages whose parameters, inputs, and outputs all
hash-match a previous run are skipped, making reruns idempotent. Per-stage
seeds are derived from the single global seed, never set directly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .errors import StageError, ValidationError
from .graph import Graph, load_csr, load_edge_list, prune_low_degree, save_csr
from .model import FixedSgd, WarmupDecaySchedule, init_table, load_checkpoint, save_checkpoint
from .rng import derive_seed
from .sampler import SamplerConfig, run_sampling
from .shards import shard_path
from .sbm import SbmConfig, generate_sbm, preset_config
from .trainer import TrainConfig, train_async, train_sync

STAGES = ("prune", "sample", "train", "eval")

ENV_SEED = "WALKEMBED_SEED"
ENV_RUN_DIR = "WALKEMBED_RUN_DIR"


@dataclass(frozen=True)
class EvalParams:
    non_edge_samples: int = 10_000
    recall_nodes: int = 100
    label: str = "embedding"

    def __post_init__(self):
        if self.non_edge_samples < 1 or self.recall_nodes < 1:
            raise ValidationError("eval sample counts must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    run_dir: str
    graph: dict  # {"kind": "sbm"|"preset"|"edge_list", ...}
    min_degree: int = 2
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    trainer: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalParams = field(default_factory=EvalParams)

    def __post_init__(self):
        if self.min_degree < 0:
            raise ValidationError("min_degree must be >= 0")
        kind = self.graph.get("kind")
        if kind == "sbm":
            for key in ("nodes", "classes", "p_in", "p_out"):
                if key not in self.graph:
                    raise ValidationError(f"graph config missing {key!r}")
        elif kind == "preset":
            if "name" not in self.graph:
                raise ValidationError("preset graph config missing 'name'")
        elif kind == "edge_list":
            if "path" not in self.graph:
                raise ValidationError("edge_list graph config missing 'path'")
        else:
            raise ValidationError(f"unknown graph kind {kind!r}")


def _optimizer_to_dict(opt) -> dict:
    if isinstance(opt, FixedSgd):
        return {"kind": "fixed_sgd", "lr": opt.lr}
    return {
        "kind": "warmup_decay_sgd",
        "warmup_steps": opt.warmup_steps,
        "peak_lr": opt.peak_lr,
        "decay_steps": opt.decay_steps,
        "final_lr": opt.final_lr,
    }


def _optimizer_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "fixed_sgd":
        return FixedSgd(lr=d["lr"])
    if kind == "warmup_decay_sgd":
        return WarmupDecaySchedule(
            warmup_steps=d["warmup_steps"],
            peak_lr=d["peak_lr"],
            decay_steps=d["decay_steps"],
            final_lr=d["final_lr"],
        )
    raise ValidationError(f"unknown optimizer kind {kind!r}")


def config_to_dict(cfg: PipelineConfig) -> dict:
    sampler = cfg.sampler.to_dict()
    sampler.pop("seed")
    trainer = asdict(cfg.trainer)
    trainer.pop("seed")
    trainer["optimizer"] = _optimizer_to_dict(cfg.trainer.optimizer)
    if trainer["distance_weighting"] is not None:
        trainer["distance_weighting"] = list(trainer["distance_weighting"])
    return {
        "seed": cfg.seed,
        "run_dir": cfg.run_dir,
        "graph": dict(cfg.graph),
        "min_degree": cfg.min_degree,
        "sampler": sampler,
        "trainer": trainer,
        "eval": asdict(cfg.eval),
    }


def config_from_dict(d: dict) -> PipelineConfig:
    d = dict(d)
    for key in ("seed", "run_dir", "graph"):
        if key not in d:
            raise ValidationError(f"pipeline config missing {key!r}")
    for section in ("sampler", "trainer"):
        if "seed" in d.get(section, {}):
            raise ValidationError(f"{section}.seed is derived from the global seed; remove it")
    seed = int(d["seed"])
    sampler_d = dict(d.get("sampler", {}))
    sampler = SamplerConfig(seed=derive_seed(seed, "sample"), **sampler_d)
    trainer_d = dict(d.get("trainer", {}))
    if "optimizer" in trainer_d:
        trainer_d["optimizer"] = _optimizer_from_dict(trainer_d["optimizer"])
    if trainer_d.get("distance_weighting") is not None:
        trainer_d["distance_weighting"] = tuple(trainer_d["distance_weighting"])
    trainer = TrainConfig(seed=derive_seed(seed, "train"), **trainer_d)
    return PipelineConfig(
        seed=seed,
        run_dir=str(d["run_dir"]),
        graph=dict(d["graph"]),
        min_degree=int(d.get("min_degree", 2)),
        sampler=sampler,
        trainer=trainer,
        eval=EvalParams(**d.get("eval", {})),
    )


def load_pipeline_config(path: str | Path, env: dict | None = None) -> PipelineConfig:
    """Read a JSON config; WALKEMBED_SEED / WALKEMBED_RUN_DIR override it."""
    env = os.environ if env is None else env
    with Path(path).open("r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if ENV_SEED in env:
        raw["seed"] = int(env[ENV_SEED])
    if ENV_RUN_DIR in env:
        raw["run_dir"] = env[ENV_RUN_DIR]
    return config_from_dict(raw)


def _hash_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _hash_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _hash_json(obj) -> str:
    return _hash_bytes(json.dumps(obj, sort_keys=True).encode("utf-8"))


@dataclass
class PipelineResult:
    run_dir: Path
    manifest: dict
    skipped: list[str]
    report: metrics_mod.MetricsReport | None = None


def _build_graph(cfg: PipelineConfig) -> Graph:
    src = cfg.graph
    kind = src["kind"]
    gseed = derive_seed(cfg.seed, "graph")
    if kind == "preset":
        return generate_sbm(replace(preset_config(src["name"]), seed=gseed))
    if kind == "sbm":
        return generate_sbm(
            SbmConfig(
                n=int(src["nodes"]),
                k=int(src["classes"]),
                p_in=float(src["p_in"]),
                p_out=float(src["p_out"]),
                seed=gseed,
            )
        )
    return load_edge_list(src["path"], format=src.get("format", "tsv"))


class _ManifestWriter:
    def __init__(self, run_dir: Path, config_hash: str):
        self.path = run_dir / "manifest.json"
        self.previous = {}
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                old = json.load(fh)
            self.previous = {s["name"]: s for s in old.get("stages", [])}
        self.manifest = {"config_hash": config_hash, "stages": []}

    def can_skip(self, name: str, params_hash: str, input_hashes: dict, outputs: dict[str, Path]) -> bool:
        prev = self.previous.get(name)
        if prev is None or prev["params_hash"] != params_hash or prev["input_hashes"] != input_hashes:
            return False
        for key, path in outputs.items():
            if not path.exists() or prev["output_hashes"].get(key) != _hash_file(path):
                return False
        return True

    def record(self, name, params_hash, input_hashes, outputs: dict[str, Path], duration_s, skipped):
        self.manifest["stages"].append(
            {
                "name": name,
                "params_hash": params_hash,
                "input_hashes": input_hashes,
                "output_hashes": {k: _hash_file(p) for k, p in outputs.items()},
                "duration_s": round(duration_s, 6),
                "skipped": skipped,
            }
        )
        with self.path.open("w", encoding="utf-8") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_pipeline(cfg: PipelineConfig, force: bool = False) -> PipelineResult:
    """Execute prune -> sample -> train -> eval inside cfg.run_dir.

    Already-satisfied stages (matching hashes) are skipped unless force.
    Any failure raises StageError naming the stage.
    """
    run_dir = Path(cfg.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg_dict = config_to_dict(cfg)
    (run_dir / "config.json").write_text(json.dumps(cfg_dict, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    writer = _ManifestWriter(run_dir, _hash_json(cfg_dict))
    skipped: list[str] = []

    graph_file = run_dir / "graph.csr"
    pruned_file = run_dir / "pruned.csr"
    records_dir = run_dir / "records"
    ckpt_file = run_dir / "checkpoint.bin"
    progress_file = run_dir / "progress.jsonl"
    eval_dir = run_dir / "eval"

    def stage(name, params, input_hashes, outputs, fn):
        params_hash = _hash_json(params)
        t0 = time.monotonic()
        if not force and writer.can_skip(name, params_hash, input_hashes, outputs):
            skipped.append(name)
            writer.record(name, params_hash, input_hashes, outputs, 0.0, True)
            return
        try:
            fn()
        except Exception as exc:
            raise StageError(name, exc) from exc
        writer.record(name, params_hash, input_hashes, outputs, time.monotonic() - t0, False)

    # prune: acquire the input graph and apply the one-shot degree filter
    graph_params = {"graph": cfg.graph, "min_degree": cfg.min_degree, "seed": cfg.seed}
    ext_hash = {}
    if cfg.graph["kind"] == "edge_list":
        src_path = Path(cfg.graph["path"])
        if not src_path.exists():
            raise StageError("prune", FileNotFoundError(str(src_path)))
        ext_hash["edge_list"] = _hash_file(src_path)

    def do_prune():
        g = _build_graph(cfg)
        save_csr(g, graph_file)
        pruned = prune_low_degree(g, cfg.min_degree)
        save_csr(pruned, pruned_file)

    stage("prune", graph_params, ext_hash, {"graph.csr": graph_file, "pruned.csr": pruned_file}, do_prune)

    # sample
    def do_sample():
        run_sampling(load_csr(pruned_file), cfg.sampler, records_dir)

    sample_outputs = {"records/manifest.json": records_dir / "manifest.json"}
    for s in range(cfg.sampler.num_shards):
        p = shard_path(records_dir, s, cfg.sampler.num_shards)
        sample_outputs[f"records/{p.name}"] = p
    stage(
        "sample",
        cfg.sampler.to_dict(),
        {"pruned.csr": _hash_file(pruned_file)},
        sample_outputs,
        do_sample,
    )

    # train
    trainer_params = config_to_dict(cfg)["trainer"]

    def do_train():
        g = load_csr(pruned_file)
        tcfg = cfg.trainer
        table = init_table(g.num_nodes, tcfg.dim, derive_seed(tcfg.seed, "init"), np.dtype(tcfg.table_dtype))
        if tcfg.mode == "sync":
            result = train_sync(records_dir, tcfg, table, log_path=progress_file)
        else:
            result = train_async(records_dir, tcfg, table, log_path=progress_file)
        save_checkpoint(ckpt_file, result.table, tcfg.steps, _hash_json(trainer_params).encode())

    stage(
        "train",
        trainer_params,
        {"records/manifest.json": _hash_file(records_dir / "manifest.json")},
        {"checkpoint.bin": ckpt_file},
        do_train,
    )

    # eval
    def do_eval():
        g = load_csr(pruned_file)
        table, _, _ = load_checkpoint(ckpt_file)
        report = metrics_mod.compute_report(
            g,
            table,
            non_edge_samples=cfg.eval.non_edge_samples,
            recall_nodes=cfg.eval.recall_nodes,
            seed=derive_seed(cfg.seed, "eval"),
        )
        metrics_mod.write_report(report, eval_dir, label=cfg.eval.label)

    stage(
        "eval",
        asdict(cfg.eval),
        {"checkpoint.bin": _hash_file(ckpt_file), "pruned.csr": _hash_file(pruned_file)},
        {"eval/report.json": eval_dir / "report.json"},
        do_eval,
    )

    report = metrics_mod.read_report(eval_dir / "report.json")
    return PipelineResult(run_dir=run_dir, manifest=writer.manifest, skipped=skipped, report=report)


@dataclass
class RunSummary:
    name: str
    edge_snr: float
    mean_recall: float
    mean_edge_distance: float
    mean_non_edge_distance: float
    final_loss: float | None
    snr_within_trend: bool = True  # >= previous run's SNR - 5%


def _final_loss(run_dir: Path) -> float | None:
    path = run_dir / "progress.jsonl"
    if not path.exists():
        return None
    loss = None
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            entry = json.loads(line)
            if "loss" in entry:
                loss = entry["loss"]
    return loss


def compare_runs(run_dirs: list[str | Path], out_csv: str | Path | None = None) -> list[RunSummary]:
    """Aligned metric table across runs, in argument order.

    snr_within_trend flags whether each run's SNR is at least 95% of the
    previous run's, for budget-sweep monotonicity checks.
    """
    if len(run_dirs) < 2:
        raise ValidationError("compare_runs needs at least two run directories")
    rows: list[RunSummary] = []
    reports = []
    for d in run_dirs:
        d = Path(d)
        report_path = d / "eval" / "report.json"
        if not report_path.exists():
            raise ValidationError(f"{d}: missing eval report at {report_path}")
        rep = metrics_mod.read_report(report_path)
        reports.append(rep)
        rows.append(
            RunSummary(
                name=d.name,
                edge_snr=rep.edge_snr,
                mean_recall=rep.mean_recall,
                mean_edge_distance=rep.mean_edge_distance,
                mean_non_edge_distance=rep.mean_non_edge_distance,
                final_loss=_final_loss(d),
            )
        )
    for i in range(1, len(rows)):
        rows[i].snr_within_trend = rows[i].edge_snr >= 0.95 * rows[i - 1].edge_snr
    if out_csv is not None:
        out_csv = Path(out_csv)
        out_csv.parent.mkdir(parents=True, exist_ok=True)
        with out_csv.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["run", "edge_snr", "mean_recall", "mean_edge_distance",
                 "mean_non_edge_distance", "final_loss", "snr_within_trend"]
            )
            for r in rows:
                w.writerow(
                    [r.name, repr(r.edge_snr), repr(r.mean_recall), repr(r.mean_edge_distance),
                     repr(r.mean_non_edge_distance), "" if r.final_loss is None else repr(r.final_loss),
                     r.snr_within_trend]
                )
        # percentile columns side by side, one file per metric family
        for attr, fname in (
            ("edge_distance_percentiles", "compare_edge_distance.csv"),
            ("non_edge_distance_percentiles", "compare_non_edge_distance.csv"),
            ("recall_percentiles", "compare_recall.csv"),
        ):
            with (out_csv.parent / fname).open("w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["Quantiles"] + [r.name for r in rows])
                for q in range(101):
                    w.writerow([f"{q / 100:.2f}"] + [repr(getattr(rep, attr)[q]) for rep in reports])
    return rows


def format_comparison(rows: list[RunSummary]) -> str:
    header = f"{'run':<24} {'edge_snr':>10} {'recall':>8} {'edge_d':>8} {'non_edge_d':>10} {'loss':>10} {'trend_ok':>8}"
    lines = [header, "-" * len(header)]
    for r in rows:
        loss = f"{r.final_loss:.4f}" if r.final_loss is not None else "-"
        lines.append(
            f"{r.name:<24} {r.edge_snr:>10.4f} {r.mean_recall:>8.4f} "
            f"{r.mean_edge_distance:>8.4f} {r.mean_non_edge_distance:>10.4f} {loss:>10} {str(r.snr_within_trend):>8}"
        )
    return "\n".join(lines)
