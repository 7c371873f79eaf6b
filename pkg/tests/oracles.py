"""Independent brute-force references the fast paths are checked against.

Everything here is deliberately naive: explicit trajectory enumeration,
quadratic nearest-neighbor search, exhaustive pair scans, and central finite
differences. None of it shares code with the implementations under test.
"""

import math

import numpy as np


def visit_probabilities(g, walk_length: int) -> np.ndarray:
    """prob[u, d, v]: chance a walk from u sits at v after d+1 uniform steps.

    Enumerates every trajectory of length walk_length, multiplying uniform
    transition probabilities; walks stop at neighborless nodes.
    """
    n = g.num_nodes
    prob = np.zeros((n, walk_length, n), dtype=np.float64)

    def extend(seed, cur, depth, p):
        if depth == walk_length:
            return
        ns = g.neighbors(cur)
        if len(ns) == 0:
            return
        q = p / len(ns)
        for v in ns:
            prob[seed, depth, int(v)] += q
            extend(seed, int(v), depth + 1, q)

    for u in range(n):
        extend(u, u, 0, 1.0)
    return prob


def recall_reference(g, values: np.ndarray, node: int) -> float:
    """Quadratic recall@degree with (distance, id) tie-breaking."""
    ranked = sorted(
        (math.dist(values[node], values[v]), v)
        for v in range(g.num_nodes)
        if v != node
    )
    k = g.degree(node)
    top = {v for _, v in ranked[:k]}
    return len(top & set(int(x) for x in g.neighbors(node))) / k


def exhaustive_non_edge_distances(g, values: np.ndarray) -> np.ndarray:
    """Distances of every unordered non-adjacent distinct pair."""
    out = []
    for u in range(g.num_nodes):
        nbrs = set(int(x) for x in g.neighbors(u))
        for v in range(u + 1, g.num_nodes):
            if v not in nbrs:
                out.append(math.dist(values[u], values[v]))
    return np.asarray(out)


def finite_difference_grad(loss_fn, values: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar loss over every table entry."""
    grad = np.zeros_like(values, dtype=np.float64)
    it = np.nditer(values, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = values[idx]
        values[idx] = orig + eps
        hi = loss_fn(values)
        values[idx] = orig - eps
        lo = loss_fn(values)
        values[idx] = orig
        grad[idx] = (hi - lo) / (2 * eps)
        it.iternext()
    return grad


def binomial_bound(n: int, p: float, sigmas: float = 4.0) -> float:
    """Allowed absolute deviation of a Binomial(n, p) count from its mean."""
    return sigmas * math.sqrt(n * p * (1.0 - p))


def within_binomial(count: int, n: int, p: float, sigmas: float = 4.0) -> bool:
    if p <= 0.0:
        return count == 0
    if p >= 1.0:
        return count == n
    return abs(count - n * p) <= binomial_bound(n, p, sigmas)
