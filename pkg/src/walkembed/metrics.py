"""Label-free embedding quality metrics and their report artifacts.

All metrics operate on L2-normalized rows, so Euclidean distances live in
[0, 2]. Edge signal-to-noise is mean non-edge distance over mean edge
distance; distributions are summarized as nearest-rank percentiles P0..P100;
recall@k uses k = degree(u) with exact brute-force neighbor search.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import MetricError, ValidationError
from .graph import Graph
from .model import EmbeddingTable

logger = logging.getLogger(__name__)

SNR_CAP = 1.0e12  # reported when mean edge distance is below 1e-12


@dataclass
class MetricsReport:
    edge_snr: float
    edge_distance_percentiles: list[float]
    non_edge_distance_percentiles: list[float]
    recall_percentiles: list[float]
    mean_edge_distance: float
    mean_non_edge_distance: float
    mean_recall: float
    num_edges: int
    num_non_edge_samples: int
    num_recall_nodes: int
    zero_degree_resamples: int
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def count_zero_rows(table: EmbeddingTable) -> int:
    return int(np.sum(~np.any(table.values != 0.0, axis=1)))


def l2_normalize(table: EmbeddingTable) -> EmbeddingTable:
    """Unit-normalize every nonzero row; zero rows pass through unchanged."""
    norms = np.linalg.norm(table.values, axis=1, keepdims=True)
    zeros = int(np.sum(norms == 0.0))
    if zeros:
        logger.warning("l2_normalize: %d zero rows left unnormalized", zeros)
    safe = np.where(norms == 0.0, 1.0, norms)
    return EmbeddingTable(table.values / safe)


def pair_distances(table: EmbeddingTable, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    diff = table.values[u] - table.values[v]
    return np.linalg.norm(diff, axis=1)


def _edge_keys(g: Graph) -> np.ndarray:
    """Sorted u*n+v keys for all directed edges; for membership queries."""
    u = np.repeat(np.arange(g.num_nodes, dtype=np.int64), g.degrees)
    return u * np.int64(g.num_nodes) + g.targets


def sample_non_edges(g: Graph, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform node pairs, rejecting self-pairs and edges, with replacement."""
    if count < 1:
        raise ValidationError("non-edge sample count must be >= 1")
    if g.num_nodes * (g.num_nodes - 1) // 2 <= g.num_edges:
        raise MetricError("graph has no non-edges to sample")
    keys = _edge_keys(g)
    n = g.num_nodes
    out_u, out_v = [], []
    got = 0
    while got < count:
        m = max(1024, int((count - got) * 1.2))
        u = rng.integers(0, n, size=m, dtype=np.int64)
        v = rng.integers(0, n, size=m, dtype=np.int64)
        q = u * np.int64(n) + v
        pos = np.searchsorted(keys, q)
        pos = np.minimum(pos, len(keys) - 1) if len(keys) else pos
        is_edge = keys[pos] == q if len(keys) else np.zeros(m, dtype=bool)
        ok = (u != v) & ~is_edge
        out_u.append(u[ok])
        out_v.append(v[ok])
        got += int(ok.sum())
    u = np.concatenate(out_u)[:count]
    v = np.concatenate(out_v)[:count]
    return u, v


def edge_snr(
    g: Graph,
    table: EmbeddingTable,
    non_edge_samples: int = 10_000,
    rng: np.random.Generator | None = None,
    max_exact_edges: int = 100_000_000,
) -> float:
    """Mean sampled non-edge distance over mean edge distance.

    Expects a normalized table. The edge mean is exact up to max_exact_edges
    edges, then a uniform subsample of that size.
    """
    if g.num_edges == 0:
        raise MetricError("edge SNR undefined on a graph with no edges")
    rng = rng if rng is not None else np.random.default_rng(0)
    edges = g.edge_array()
    if len(edges) > max_exact_edges:
        pick = rng.choice(len(edges), size=max_exact_edges, replace=False)
        edges = edges[pick]
    mean_edge = float(np.mean(pair_distances(table, edges[:, 0], edges[:, 1]), dtype=np.float64))
    u, v = sample_non_edges(g, non_edge_samples, rng)
    mean_non = float(np.mean(pair_distances(table, u, v), dtype=np.float64))
    if mean_edge < 1e-12:
        return SNR_CAP
    return mean_non / mean_edge


def nearest_rank_percentiles(values: np.ndarray) -> np.ndarray:
    """P0..P100 by the nearest-rank rule; P0 is the minimum."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValidationError("cannot take percentiles of an empty sample")
    s = np.sort(values)
    q = np.arange(101, dtype=np.float64)
    idx = np.ceil(q / 100.0 * len(s)).astype(np.int64) - 1
    idx = np.clip(idx, 0, len(s) - 1)
    return s[idx]


def distance_percentiles(pairs: np.ndarray, table: EmbeddingTable) -> np.ndarray:
    """101-entry percentile vector of pairwise distances for an (m, 2) array."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        raise ValidationError("empty pair stream")
    return nearest_rank_percentiles(pair_distances(table, pairs[:, 0], pairs[:, 1]))


@dataclass
class RecallResult:
    nodes: np.ndarray
    recalls: np.ndarray
    zero_degree_resamples: int


def edge_recall(
    g: Graph,
    table: EmbeddingTable,
    num_sampled_nodes: int = 100,
    rng: np.random.Generator | None = None,
) -> RecallResult:
    """Per-node recall@deg(u) over a uniform node sample.

    For each sampled u the deg(u) nearest rows (excluding u, ties broken by
    node id) are compared against the true neighbor set. Exact brute-force
    search; no approximation.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    deg = g.degrees
    if not np.any(deg > 0):
        raise MetricError("edge recall undefined: every node has degree 0")
    perm = rng.permutation(g.num_nodes)
    ok = deg[perm] > 0
    # walk the permutation until num_sampled_nodes eligible nodes are found;
    # zero-degree draws along the way count as resamples
    enough = np.searchsorted(np.cumsum(ok), num_sampled_nodes) + 1
    scanned = min(int(enough), g.num_nodes)
    chosen = perm[:scanned][ok[:scanned]]
    resamples = scanned - len(chosen)
    recalls = np.empty(len(chosen), dtype=np.float64)
    values = table.values
    for i, u in enumerate(chosen):
        d = np.linalg.norm(values - values[u], axis=1)
        order = np.lexsort((np.arange(g.num_nodes), d))
        order = order[order != u]
        k = int(deg[u])
        top = order[:k]
        hits = np.intersect1d(top, g.neighbors(u), assume_unique=True)
        recalls[i] = len(hits) / k
    return RecallResult(nodes=chosen, recalls=recalls, zero_degree_resamples=resamples)


def compute_report(
    g: Graph,
    table: EmbeddingTable,
    non_edge_samples: int = 10_000,
    recall_nodes: int = 100,
    seed: int = 0,
) -> MetricsReport:
    """Normalize, then compute SNR, both distance distributions, and recall."""
    normalized = l2_normalize(table)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xE7)))
    if g.num_edges == 0:
        raise MetricError("metrics undefined on a graph with no edges")
    edges = g.edge_array()
    edge_d = pair_distances(normalized, edges[:, 0], edges[:, 1])
    nu, nv = sample_non_edges(g, non_edge_samples, rng)
    non_d = pair_distances(normalized, nu, nv)
    mean_edge = float(np.mean(edge_d, dtype=np.float64))
    mean_non = float(np.mean(non_d, dtype=np.float64))
    snr = SNR_CAP if mean_edge < 1e-12 else mean_non / mean_edge
    rec = edge_recall(g, normalized, recall_nodes, rng)
    return MetricsReport(
        edge_snr=snr,
        edge_distance_percentiles=nearest_rank_percentiles(edge_d).tolist(),
        non_edge_distance_percentiles=nearest_rank_percentiles(non_d).tolist(),
        recall_percentiles=nearest_rank_percentiles(rec.recalls).tolist(),
        mean_edge_distance=mean_edge,
        mean_non_edge_distance=mean_non,
        mean_recall=float(np.mean(rec.recalls, dtype=np.float64)),
        num_edges=g.num_edges,
        num_non_edge_samples=non_edge_samples,
        num_recall_nodes=len(rec.nodes),
        zero_degree_resamples=rec.zero_degree_resamples,
        seed=seed,
    )


def _write_percentile_csv(path: Path, label: str, values: list[float]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Quantiles", label])
        for q, v in enumerate(values):
            writer.writerow([f"{q / 100:.2f}", repr(float(v))])


def write_report(report: MetricsReport, out_dir: str | Path, label: str = "embedding") -> Path:
    """report.json plus the three percentile CSVs used for plotting."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(report.to_json() + "\n", encoding="utf-8")
    _write_percentile_csv(out_dir / "edge_distance.csv", label, report.edge_distance_percentiles)
    _write_percentile_csv(out_dir / "non_edge_distance.csv", label, report.non_edge_distance_percentiles)
    _write_percentile_csv(out_dir / "recall.csv", label, report.recall_percentiles)
    return path


def read_report(path: str | Path) -> MetricsReport:
    return MetricsReport.from_json(Path(path).read_text(encoding="utf-8"))
