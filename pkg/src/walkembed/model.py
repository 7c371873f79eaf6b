"""Embedding table, learning-rate schedule, and the skip-gram loss.

One table serves both endpoint roles by default; an optional context table
supports the dual-table ablation. Loss is the standard logistic contrastive
objective: positives maximize sigma(e_u . e_v) with a per-pair weight,
uniform negatives minimize it, mean-reduced over all examples in a batch.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericError, ValidationError

CKPT_MAGIC = b"WEEMB01\n"


@dataclass
class EmbeddingTable:
    values: np.ndarray  # (num_nodes, dim)

    @property
    def num_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.values.copy())


def init_table(num_nodes: int, dim: int, seed: int, dtype=np.float32) -> EmbeddingTable:
    """Seeded uniform init in [-1/(2*dim), +1/(2*dim)] per entry."""
    if num_nodes < 1 or dim < 1:
        raise ValidationError("num_nodes and dim must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), num_nodes, dim)))
    half = 1.0 / (2.0 * dim)
    values = rng.uniform(-half, half, size=(num_nodes, dim)).astype(dtype)
    return EmbeddingTable(values)


@dataclass(frozen=True)
class WarmupDecaySchedule:
    """SGD learning rate: linear ramp 0 -> peak, linear decay to final, hold."""

    warmup_steps: int
    peak_lr: float
    decay_steps: int
    final_lr: float

    def __post_init__(self):
        if self.warmup_steps < 0 or self.decay_steps < 0:
            raise ValidationError("schedule step counts must be >= 0")
        if not self.peak_lr > self.final_lr > 0:
            raise ValidationError("schedule requires peak_lr > final_lr > 0")

    def lr_at(self, step: int) -> float:
        return lr_at(self, step)


@dataclass(frozen=True)
class FixedSgd:
    lr: float = 0.001

    def __post_init__(self):
        if self.lr <= 0:
            raise ValidationError("learning rate must be positive")

    def lr_at(self, step: int) -> float:
        return self.lr


def lr_at(schedule: WarmupDecaySchedule, step: int) -> float:
    """Piecewise-linear rate; continuous at both phase boundaries."""
    if step < 0:
        raise ValidationError("step must be >= 0")
    if step < schedule.warmup_steps:
        return schedule.peak_lr * step / schedule.warmup_steps
    t = step - schedule.warmup_steps
    if t < schedule.decay_steps:
        frac = t / schedule.decay_steps
        return schedule.peak_lr + (schedule.final_lr - schedule.peak_lr) * frac
    return schedule.final_lr


@dataclass
class SparseGrad:
    """Gradient restricted to the rows touched by a batch."""

    ids: np.ndarray  # unique node ids, ascending
    values: np.ndarray  # (len(ids), dim)

    def apply(self, table: EmbeddingTable, lr: float) -> None:
        # keeps the table finite after every step
        if not np.all(np.isfinite(self.values)):
            bad = self.ids[~np.all(np.isfinite(self.values), axis=1)][0]
            raise NumericError(f"non-finite gradient for row {bad}")
        table.values[self.ids] -= lr * self.values


@dataclass
class LossGrads:
    loss: float
    main: SparseGrad
    context: SparseGrad | None = None


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def _check_ids(ids: np.ndarray, num_nodes: int) -> None:
    if len(ids) and (ids.min() < 0 or ids.max() >= num_nodes):
        bad = ids[(ids < 0) | (ids >= num_nodes)][0]
        raise IndexError(f"node id {bad} out of range [0, {num_nodes})")


def loss_and_grad(table: EmbeddingTable, batch, context: EmbeddingTable | None = None) -> LossGrads:
    """Weighted logistic loss and sparse gradients for one example batch.

    batch provides src, dst, weight, positive arrays. Rows are gathered once
    per unique id; the returned gradient touches only those rows. Loss is the
    example mean, accumulated in float64.
    """
    src, dst = batch.src, batch.dst
    _check_ids(src, table.num_nodes)
    _check_ids(dst, (context or table).num_nodes)
    n = len(src)
    if n == 0:
        raise ValidationError("empty batch")
    dtype = table.values.dtype
    w = np.where(batch.positive, batch.weight, 1.0).astype(dtype)

    dst_table = context if context is not None else table
    if context is None:
        ids = np.concatenate([src, dst])
        uids, inv = np.unique(ids, return_inverse=True)
        rows = table.values[uids]
        iu, iv = inv[:n], inv[n:]
        e_src, e_dst = rows[iu], rows[iv]
    else:
        u_src, iu = np.unique(src, return_inverse=True)
        u_dst, iv = np.unique(dst, return_inverse=True)
        e_src = table.values[u_src][iu]
        e_dst = context.values[u_dst][iv]

    scores = np.einsum("ij,ij->i", e_src, e_dst)
    sign = np.where(batch.positive, 1.0, -1.0).astype(dtype)
    per_example = w * np.logaddexp(0.0, -sign * scores)
    loss = float(np.sum(per_example, dtype=np.float64) / n)
    if not np.isfinite(loss):
        bad = int(src[~np.isfinite(per_example)][0]) if np.any(~np.isfinite(per_example)) else -1
        raise NumericError(f"non-finite loss; first offending source row {bad}")

    # d(loss)/d(score): positives w*(sigma-1)/n, negatives sigma/n
    coef = (w * sign * (_sigmoid(sign * scores) - 1.0) / n).astype(dtype)

    if context is None:
        acc = np.zeros_like(rows)
        np.add.at(acc, iu, coef[:, None] * e_dst)
        np.add.at(acc, iv, coef[:, None] * e_src)
        return LossGrads(loss, SparseGrad(uids, acc))
    g_src = np.zeros((len(u_src), table.dim), dtype=dtype)
    g_dst = np.zeros((len(u_dst), dst_table.dim), dtype=dtype)
    np.add.at(g_src, iu, coef[:, None] * e_dst)
    np.add.at(g_dst, iv, coef[:, None] * e_src)
    return LossGrads(loss, SparseGrad(u_src, g_src), SparseGrad(u_dst, g_dst))


def save_checkpoint(path: str | Path, table: EmbeddingTable, step: int, config_hash: bytes = b"") -> None:
    """Header (magic, u64 num_nodes, u64 dim, u64 step, 32-byte config hash)
    followed by row-major float32 values, little-endian."""
    digest = hashlib.sha256(config_hash).digest() if len(config_hash) != 32 else config_hash
    with Path(path).open("wb") as fh:
        fh.write(CKPT_MAGIC)
        np.array([table.num_nodes, table.dim, step], dtype="<u8").tofile(fh)
        fh.write(digest)
        np.ascontiguousarray(table.values, dtype="<f4").tofile(fh)


def load_checkpoint(path: str | Path) -> tuple[EmbeddingTable, int, bytes]:
    with Path(path).open("rb") as fh:
        if fh.read(len(CKPT_MAGIC)) != CKPT_MAGIC:
            raise ValidationError(f"{path} is not an embedding checkpoint")
        n, d, step = (int(x) for x in np.fromfile(fh, dtype="<u8", count=3))
        digest = fh.read(32)
        values = np.fromfile(fh, dtype="<f4", count=n * d)
    if values.size != n * d:
        raise ValidationError(f"{path} truncated")
    return EmbeddingTable(values.reshape(n, d).astype(np.float32)), step, digest
