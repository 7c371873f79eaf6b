"""Skip-gram training over co-occurrence records, sync or async.

Sync mode mirrors replicated data-parallel training: logical replicas each
build a micro-batch, gradients are averaged, and one update is applied per
global step. The trajectory is bitwise-reproducible for a fixed seed and
independent of physical thread count.

Async mode mirrors a parameter-server deployment: worker threads build
batches from disjoint record stripes and apply sparse updates to the shared
table with no locking or ordering. Lost or torn updates are within contract;
only the W=1 case is deterministic.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import (
    EmbeddingTable,
    FixedSgd,
    LossGrads,
    SparseGrad,
    WarmupDecaySchedule,
    init_table,
    loss_and_grad,
)
from .rng import derive_seed
from .shards import RecordBatch, load_all_records


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 128
    mode: str = "sync"  # {"sync", "async"}
    per_replica_batch_size: int = 1024
    negatives_per_positive: int = 3
    num_replicas: int = 1  # sync: logical replicas per global step
    num_workers: int = 1  # async: concurrent worker threads
    steps: int = 1000  # sync: global steps; async: total micro-batches
    optimizer: WarmupDecaySchedule | FixedSgd = FixedSgd(0.001)
    seed: int = 0
    self_pair_filter: bool = True
    distance_weighting: tuple[float, ...] | None = None  # None = all ones
    shuffle_buffer: int = 1 << 16
    dual_table: bool = False
    table_dtype: str = "float32"

    def __post_init__(self):
        if self.mode not in ("sync", "async"):
            raise ValidationError(f"mode must be sync or async, got {self.mode!r}")
        if self.per_replica_batch_size < 1:
            raise ValidationError("per_replica_batch_size must be >= 1")
        if self.negatives_per_positive < 0:
            raise ValidationError("negatives_per_positive must be >= 0")
        if self.num_replicas < 1 or self.num_workers < 1:
            raise ValidationError("replica and worker counts must be >= 1")
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.mode == "async" and not isinstance(self.optimizer, FixedSgd):
            raise ValidationError("async mode requires a fixed learning rate")
        if self.table_dtype not in ("float32", "float64"):
            raise ValidationError("table_dtype must be float32 or float64")

    @property
    def micro_batch_examples(self) -> int:
        return self.per_replica_batch_size * (1 + self.negatives_per_positive)

    @property
    def global_batch_examples(self) -> int:
        replicas = self.num_replicas if self.mode == "sync" else 1
        return self.micro_batch_examples * replicas


@dataclass
class ExampleBatch:
    """Positives and their trailing negatives, flattened in emission order."""

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    positive: np.ndarray

    def __len__(self) -> int:
        return len(self.src)


def prepare_positives(
    records: RecordBatch, cfg: TrainConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse histograms to per-pair weights; drop self-pairs and zero weights."""
    wl = records.walk_length
    weighting = (
        np.asarray(cfg.distance_weighting, dtype=np.float64)
        if cfg.distance_weighting is not None
        else np.ones(wl)
    )
    if len(weighting) != wl:
        raise ValidationError(
            f"distance_weighting has {len(weighting)} entries, records have walk_length {wl}"
        )
    weight = records.co_counts @ weighting
    keep = weight > 0
    if cfg.self_pair_filter:
        keep &= records.source != records.dest
    return (
        records.source[keep],
        records.dest[keep],
        weight[keep].astype(np.float32),
    )


class RecordStream:
    """Endless shuffled stream of positive examples.

    Each epoch visits every record once: positions are consumed through a
    shuffle window of `shuffle_buffer` records (the whole epoch order is
    materialized window by window), with a fresh seeded permutation per
    epoch. Wraps around at epoch end.
    """

    def __init__(self, src, dst, weight, seed: int, shuffle_buffer: int = 1 << 16):
        if len(src) == 0:
            raise ValidationError("record stream is empty after filtering")
        self.src, self.dst, self.weight = src, dst, weight
        self.seed = seed
        self.shuffle_buffer = max(1, shuffle_buffer)
        self.epochs_completed = 0
        self._order = self._epoch_order(0)
        self._pos = 0

    def __len__(self) -> int:
        return len(self.src)

    def _epoch_order(self, epoch: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, epoch)))
        n = len(self.src)
        order = np.arange(n, dtype=np.int64)
        for lo in range(0, n, self.shuffle_buffer):
            window = order[lo : lo + self.shuffle_buffer]
            rng.shuffle(window)
        # rotate window boundaries across epochs so records can cross windows
        return np.roll(order, (epoch * self.shuffle_buffer) // 2)

    def take(self, count: int) -> np.ndarray:
        """Next `count` record indices, wrapping into the next epoch."""
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            got = min(count - filled, len(self._order) - self._pos)
            out[filled : filled + got] = self._order[self._pos : self._pos + got]
            self._pos += got
            filled += got
            if self._pos == len(self._order):
                self.epochs_completed += 1
                self._order = self._epoch_order(self.epochs_completed)
                self._pos = 0
        return out


def build_batch(
    stream: RecordStream, cfg: TrainConfig, rng: np.random.Generator, num_nodes: int
) -> ExampleBatch:
    """One micro-batch: B positives, each followed by its uniform negatives.

    Negative destinations are drawn uniformly from the whole vocabulary with
    no rejection, so a negative may coincide with a true edge.
    """
    b = cfg.per_replica_batch_size
    k = cfg.negatives_per_positive
    idx = stream.take(b)
    src_p, dst_p, w_p = stream.src[idx], stream.dst[idx], stream.weight[idx]
    width = 1 + k
    src = np.repeat(src_p, width)
    dst = np.empty(b * width, dtype=np.int64)
    weight = np.ones(b * width, dtype=np.float32)
    positive = np.zeros(b * width, dtype=bool)
    dst[::width] = dst_p
    weight[::width] = w_p
    positive[::width] = True
    if k:
        negs = rng.integers(0, num_nodes, size=b * k, dtype=np.int64)
        mask = ~positive
        dst[mask] = negs
    return ExampleBatch(src, dst, weight, positive)


@dataclass
class TrainResult:
    table: EmbeddingTable
    log: list[dict] = field(default_factory=list)
    examples_processed: int = 0
    elapsed_s: float = 0.0
    worker_failures: int = 0
    context_table: EmbeddingTable | None = None


def _as_records(records: RecordBatch | str | Path) -> RecordBatch:
    if isinstance(records, RecordBatch):
        return records
    batch, _ = load_all_records(records)
    return batch


def _write_log(log_path: str | Path | None, entries: list[dict]) -> None:
    if log_path is None:
        return
    with Path(log_path).open("w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e) + "\n")


def _merge_grads(grads: list[SparseGrad], scale: float, dim: int, dtype) -> SparseGrad:
    """Fixed-order sum of replica gradients, scaled; deterministic."""
    all_ids = np.concatenate([g.ids for g in grads])
    all_vals = np.concatenate([g.values for g in grads])
    uids, inv = np.unique(all_ids, return_inverse=True)
    acc = np.zeros((len(uids), dim), dtype=dtype)
    np.add.at(acc, inv, all_vals)
    acc *= dtype.type(scale)
    return SparseGrad(uids, acc)


def train_sync(
    records: RecordBatch | str | Path,
    cfg: TrainConfig,
    table: EmbeddingTable | None = None,
    num_nodes: int | None = None,
    log_path: str | Path | None = None,
    log_every: int = 50,
    num_threads: int = 1,
) -> TrainResult:
    """Replicated synchronous training; thread-count-invariant by reduction order."""
    if cfg.mode != "sync":
        raise ValidationError("train_sync requires cfg.mode == 'sync'")
    batch_data = _as_records(records)
    if table is None:
        if num_nodes is None:
            num_nodes = int(max(batch_data.source.max(), batch_data.dest.max())) + 1
        table = init_table(num_nodes, cfg.dim, derive_seed(cfg.seed, "init"), np.dtype(cfg.table_dtype))
    n_nodes = table.num_nodes
    context = (
        init_table(n_nodes, cfg.dim, derive_seed(cfg.seed, "context"), table.values.dtype)
        if cfg.dual_table
        else None
    )
    src, dst, w = prepare_positives(batch_data, cfg)
    stream = RecordStream(src, dst, w, derive_seed(cfg.seed, "stream"), cfg.shuffle_buffer)
    neg_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xB0)))
    log: list[dict] = [
        {
            "event": "config",
            "mode": "sync",
            "micro_batch_examples": cfg.micro_batch_examples,
            "num_replicas": cfg.num_replicas,
            "global_batch_examples": cfg.global_batch_examples,
            "steps": cfg.steps,
        }
    ]
    pool = ThreadPoolExecutor(max_workers=num_threads) if num_threads > 1 else None
    t0 = time.monotonic()
    t_last, ex_last = t0, 0
    examples = 0
    try:
        for step in range(cfg.steps):
            lr = cfg.optimizer.lr_at(step)
            batches = [
                build_batch(stream, cfg, neg_rng, n_nodes) for _ in range(cfg.num_replicas)
            ]
            if pool is not None:
                results: list[LossGrads] = list(
                    pool.map(lambda b: loss_and_grad(table, b, context), batches)
                )
            else:
                results = [loss_and_grad(table, b, context) for b in batches]
            scale = 1.0 / cfg.num_replicas
            merged = _merge_grads([r.main for r in results], scale, table.dim, table.values.dtype)
            merged.apply(table, lr)
            if context is not None:
                merged_ctx = _merge_grads(
                    [r.context for r in results], scale, table.dim, table.values.dtype
                )
                merged_ctx.apply(context, lr)
            examples += cfg.global_batch_examples
            loss = float(np.mean([r.loss for r in results]))
            if step % log_every == 0 or step == cfg.steps - 1:
                now = time.monotonic()
                eps = (examples - ex_last) / max(now - t_last, 1e-9)
                t_last, ex_last = now, examples
                log.append({"step": step, "lr": lr, "loss": loss, "examples_per_sec": eps})
    finally:
        if pool is not None:
            pool.shutdown()
    _write_log(log_path, log)
    return TrainResult(
        table=table,
        log=log,
        examples_processed=examples,
        elapsed_s=time.monotonic() - t0,
        context_table=context,
    )


def _async_worker(
    worker_id: int,
    table: EmbeddingTable,
    context: EmbeddingTable | None,
    stream: RecordStream,
    cfg: TrainConfig,
    num_batches: int,
    shared: dict,
    log_lock: threading.Lock,
    log: list[dict],
    log_every: int,
    max_failures: int,
) -> None:
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xA5, worker_id)))
    lr = cfg.optimizer.lr_at(0)
    failures = 0
    done = 0
    while done < num_batches:
        try:
            batch = build_batch(stream, cfg, rng, table.num_nodes)
            out = loss_and_grad(table, batch, context)
            # unsynchronized read-modify-write on the shared table (by contract)
            out.main.apply(table, lr)
            if context is not None and out.context is not None:
                out.context.apply(context, lr)
        except Exception:
            # stream position survives; retry from the next batch
            failures += 1
            shared["failures"] += 1
            if failures > max_failures:
                raise
            continue
        done += 1
        shared["batches"] += 1
        total = shared["batches"]
        if total % log_every == 0:
            now = time.monotonic()
            with log_lock:
                eps = (
                    total * cfg.micro_batch_examples / max(now - shared["t0"], 1e-9)
                )
                log.append(
                    {"step": total, "lr": lr, "loss": out.loss, "examples_per_sec": eps}
                )


def train_async(
    records: RecordBatch | str | Path,
    cfg: TrainConfig,
    table: EmbeddingTable | None = None,
    num_nodes: int | None = None,
    log_path: str | Path | None = None,
    log_every: int = 50,
    max_failures: int = 3,
) -> TrainResult:
    """Lock-free concurrent training on a shared table.

    cfg.steps counts micro-batches across all workers, so the example budget
    is identical for any worker count.
    """
    if cfg.mode != "async":
        raise ValidationError("train_async requires cfg.mode == 'async'")
    batch_data = _as_records(records)
    if table is None:
        if num_nodes is None:
            num_nodes = int(max(batch_data.source.max(), batch_data.dest.max())) + 1
        table = init_table(num_nodes, cfg.dim, derive_seed(cfg.seed, "init"), np.dtype(cfg.table_dtype))
    context = (
        init_table(table.num_nodes, cfg.dim, derive_seed(cfg.seed, "context"), table.values.dtype)
        if cfg.dual_table
        else None
    )
    src, dst, w = prepare_positives(batch_data, cfg)
    workers = cfg.num_workers
    # stripe records across workers; each worker shuffles its own stripe
    streams = [
        RecordStream(
            src[wk::workers],
            dst[wk::workers],
            w[wk::workers],
            derive_seed(cfg.seed, f"stream-{wk}"),
            cfg.shuffle_buffer,
        )
        for wk in range(workers)
    ]
    quota = [cfg.steps // workers + (1 if wk < cfg.steps % workers else 0) for wk in range(workers)]
    log: list[dict] = [
        {
            "event": "config",
            "mode": "async",
            "micro_batch_examples": cfg.micro_batch_examples,
            "num_workers": workers,
            "global_batch_examples": cfg.global_batch_examples,
            "steps": cfg.steps,
        }
    ]
    shared = {"batches": 0, "failures": 0, "t0": time.monotonic()}
    lock = threading.Lock()
    t0 = time.monotonic()
    if workers == 1:
        _async_worker(0, table, context, streams[0], cfg, quota[0], shared, lock, log, log_every, max_failures)
    else:
        threads = [
            threading.Thread(
                target=_async_worker,
                args=(wk, table, context, streams[wk], cfg, quota[wk], shared, lock, log, log_every, max_failures),
            )
            for wk in range(workers)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    _write_log(log_path, log)
    return TrainResult(
        table=table,
        log=log,
        examples_processed=shared["batches"] * cfg.micro_batch_examples,
        elapsed_s=time.monotonic() - t0,
        worker_failures=shared["failures"],
        context_table=context,
    )
