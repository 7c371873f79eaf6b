"""Random-walk co-occurrence sampling as a staged, sharded pipeline.

Every node seeds a fixed number of walks. Walks advance in lockstep rounds:
each round joins walk endpoints against the adjacency, samples one uniform
neighbor per walk, and records a (seed, endpoint, distance) visit. After the
final round, visits are grouped by (seed, endpoint) and combined into
per-distance count histograms, sharded by source id.

Each walk draws from its own counter-based stream keyed by
(seed, seed_node, replica, round), so output is bitwise-identical for any
worker count or partitioning.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyGraphError, ValidationError
from .graph import Graph
from .rng import HashStream, splitmix64
from .shards import RecordBatch, shard_path, write_manifest, write_shard, write_tsv

FORMAT_VERSION = 1


@dataclass(frozen=True)
class SamplerConfig:
    walks_per_node: int = 128
    walk_length: int = 3
    seed: int = 0
    num_shards: int = 1
    sampling_kind: str = "uniform"

    def __post_init__(self):
        if self.walks_per_node < 1:
            raise ValidationError("walks_per_node must be >= 1")
        if self.walk_length < 1:
            raise ValidationError("walk_length must be >= 1")
        if self.num_shards < 1:
            raise ValidationError("num_shards must be >= 1")
        if self.sampling_kind != "uniform":
            raise ValidationError(f"unsupported sampling_kind {self.sampling_kind!r}")

    def to_dict(self) -> dict:
        return {
            "walks_per_node": self.walks_per_node,
            "walk_length": self.walk_length,
            "seed": self.seed,
            "num_shards": self.num_shards,
            "sampling_kind": self.sampling_kind,
        }


@dataclass
class WalkBatch:
    """Walks in flight, column-oriented; all entries share the same step."""

    seed_node: np.ndarray
    replica: np.ndarray
    current_node: np.ndarray
    step: int = 0

    def __len__(self) -> int:
        return len(self.seed_node)


@dataclass
class SamplingStats:
    total_walks: int = 0
    dead_end_terminations: int = 0
    num_records: int = 0
    co_count_total: int = 0
    elapsed_s: float = 0.0
    shard_record_counts: list[int] = field(default_factory=list)


def init_walks(g: Graph, cfg: SamplerConfig, node_range: tuple[int, int] | None = None) -> WalkBatch:
    """Seed walks_per_node walks at every node (optionally a node sub-range)."""
    if g.num_nodes == 0:
        raise EmptyGraphError("cannot sample an empty graph")
    lo, hi = node_range if node_range is not None else (0, g.num_nodes)
    nodes = np.arange(lo, hi, dtype=np.int64)
    seeds = np.repeat(nodes, cfg.walks_per_node)
    replicas = np.tile(np.arange(cfg.walks_per_node, dtype=np.int64), hi - lo)
    return WalkBatch(seed_node=seeds, replica=replicas, current_node=seeds.copy(), step=0)


def _walk_uid(walks: WalkBatch, cfg: SamplerConfig) -> np.ndarray:
    return walks.seed_node * np.int64(cfg.walks_per_node) + walks.replica


def step_walks(g: Graph, walks: WalkBatch, cfg: SamplerConfig, stream: HashStream) -> WalkBatch:
    """Advance every walk one hop; walks at a neighborless node terminate.

    The endpoint join gathers each walk's CSR row, then one neighbor index is
    drawn per walk from its private stream at counter position step+1.
    """
    if walks.step >= cfg.walk_length:
        raise ValidationError("walks already at full length")
    deg = g.degrees[walks.current_node]
    alive = deg > 0
    if not alive.all():
        walks = WalkBatch(
            seed_node=walks.seed_node[alive],
            replica=walks.replica[alive],
            current_node=walks.current_node[alive],
            step=walks.step,
        )
        deg = deg[alive]
    if len(walks) == 0:
        return WalkBatch(walks.seed_node, walks.replica, walks.current_node, walks.step + 1)
    pick = stream.bounded(_walk_uid(walks, cfg), counter=walks.step + 1, bounds=deg)
    nxt = g.targets[g.offsets[walks.current_node] + pick]
    return WalkBatch(walks.seed_node, walks.replica, nxt, walks.step + 1)


def _combine_visits(
    seeds: np.ndarray, dests: np.ndarray, dists: np.ndarray, num_nodes: int, walk_length: int
) -> RecordBatch:
    """Group visits by (seed, dest) and histogram them by distance."""
    pair = seeds * np.int64(num_nodes) + dests
    key = pair * np.int64(walk_length) + (dists - 1)
    uniq, counts = np.unique(key, return_counts=True)
    pair_keys = uniq // walk_length
    slots = uniq % walk_length
    rec_keys, rec_index = np.unique(pair_keys, return_inverse=True)
    co = np.zeros((len(rec_keys), walk_length), dtype=np.int64)
    co[rec_index, slots] = counts
    return RecordBatch(
        source=rec_keys // num_nodes,
        dest=rec_keys % num_nodes,
        co_counts=co,
    )


def _sample_partition(
    g: Graph, cfg: SamplerConfig, stream: HashStream, node_range: tuple[int, int]
) -> tuple[RecordBatch, int]:
    """Walk one seed-node range to completion; returns records + dead ends."""
    walks = init_walks(g, cfg, node_range)
    started = len(walks)
    seeds_acc, dests_acc, dists_acc = [], [], []
    for _ in range(cfg.walk_length):
        walks = step_walks(g, walks, cfg, stream)
        if len(walks):
            seeds_acc.append(walks.seed_node)
            dests_acc.append(walks.current_node)
            dists_acc.append(np.full(len(walks), walks.step, dtype=np.int64))
        if len(walks) == 0:
            break
    dead = started - len(walks)
    if not seeds_acc:
        empty = np.empty(0, dtype=np.int64)
        return RecordBatch(empty, empty, empty.reshape(0, cfg.walk_length)), dead
    rec = _combine_visits(
        np.concatenate(seeds_acc),
        np.concatenate(dests_acc),
        np.concatenate(dists_acc),
        g.num_nodes,
        cfg.walk_length,
    )
    return rec, dead


def run_sampling(
    g: Graph,
    cfg: SamplerConfig,
    out_dir: str | Path,
    num_workers: int = 1,
    partition_nodes: int = 1 << 14,
    write_debug_tsv: bool = False,
) -> SamplingStats:
    """Full pipeline: seed, walk, group, combine, shard to disk.

    Partitions own disjoint seed ranges, so their record sets are disjoint
    and the merge is pure concatenation. Shard files plus manifest.json land
    in out_dir.
    """
    if g.num_nodes == 0:
        raise EmptyGraphError("cannot sample an empty graph")
    t0 = time.monotonic()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stream = HashStream(cfg.seed)
    bounds = list(range(0, g.num_nodes, partition_nodes)) + [g.num_nodes]
    ranges = list(zip(bounds[:-1], bounds[1:]))

    if num_workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=num_workers) as pool:
            parts = list(pool.map(lambda r: _sample_partition(g, cfg, stream, r), ranges))
    else:
        parts = [_sample_partition(g, cfg, stream, r) for r in ranges]

    dead_ends = sum(d for _, d in parts)
    source = np.concatenate([p.source for p, _ in parts])
    dest = np.concatenate([p.dest for p, _ in parts])
    co = np.concatenate([p.co_counts for p, _ in parts])

    shard_of = (splitmix64(source.astype(np.uint64)) % np.uint64(cfg.num_shards)).astype(np.int64)
    shard_files, shard_counts = [], []
    for s in range(cfg.num_shards):
        mask = shard_of == s
        batch = RecordBatch(source[mask], dest[mask], co[mask])
        order = np.lexsort((batch.dest, batch.source))
        batch = RecordBatch(batch.source[order], batch.dest[order], batch.co_counts[order])
        path = shard_path(out_dir, s, cfg.num_shards)
        write_shard(path, batch)
        if write_debug_tsv:
            write_tsv(path.with_suffix(".tsv"), batch)
        shard_files.append(path.name)
        shard_counts.append(len(batch))

    stats = SamplingStats(
        total_walks=g.num_nodes * cfg.walks_per_node,
        dead_end_terminations=int(dead_ends),
        num_records=int(len(source)),
        co_count_total=int(co.sum()),
        elapsed_s=time.monotonic() - t0,
        shard_record_counts=shard_counts,
    )
    write_manifest(
        out_dir,
        {
            "format_version": FORMAT_VERSION,
            "config": cfg.to_dict(),
            "graph_hash": g.content_hash(),
            "num_nodes": g.num_nodes,
            "shard_files": shard_files,
            "record_counts": shard_counts,
            "stats": {
                "total_walks": stats.total_walks,
                "dead_end_terminations": stats.dead_end_terminations,
                "num_records": stats.num_records,
                "co_count_total": stats.co_count_total,
            },
        },
    )
    return stats
