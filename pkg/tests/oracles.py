"""Independent reference implementations used to cross-check the package.

Everything here is deliberately naive (loops, enumeration, truncated
series) and shares no code with the implementations under test.
"""

from __future__ import annotations

import numpy as np


def matmul_loops(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def taylor_trace_expm(b: np.ndarray, terms: int = 30) -> float:
    """Tr(e^B) by direct Taylor summation (no scaling), for small matrices."""
    n = b.shape[0]
    power = np.eye(n)
    total = float(np.trace(power))
    fact = 1.0
    for k in range(1, terms + 1):
        power = power @ b
        fact *= k
        total += float(np.trace(power)) / fact
    return total


def has_cycle(support: np.ndarray) -> bool:
    """DFS cycle detection on the boolean adjacency matrix ``support``."""
    n = support.shape[0]
    color = [0] * n  # 0 unvisited, 1 on stack, 2 done

    def visit(u: int) -> bool:
        color[u] = 1
        for v in range(n):
            if support[u, v]:
                if color[v] == 1:
                    return True
                if color[v] == 0 and visit(v):
                    return True
        color[u] = 2
        return False

    return any(color[u] == 0 and visit(u) for u in range(n))


def topological_order(support: np.ndarray) -> list[int] | None:
    """Kahn's algorithm; returns None when the graph has a cycle."""
    n = support.shape[0]
    indeg = [int(support[:, j].sum()) for j in range(n)]
    queue = [j for j in range(n) if indeg[j] == 0]
    order = []
    while queue:
        u = queue.pop(0)
        order.append(u)
        for v in range(n):
            if support[u, v]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
    return order if len(order) == n else None


def metapath_neighbors_dfs(edges_by_relation: dict, relation_seq: list, node: int) -> set:
    """Terminal nodes of all paths from ``node`` along ``relation_seq``.

    ``edges_by_relation`` maps relation name -> list of (src, dst) pairs.
    Enumerates every concrete path depth-first, then dedups terminals.
    """
    terminals: set[int] = set()

    def walk(current: int, depth: int) -> None:
        if depth == len(relation_seq):
            terminals.add(current)
            return
        for src, dst in edges_by_relation[relation_seq[depth]]:
            if src == current:
                walk(dst, depth + 1)

    walk(node, 0)
    return terminals


def confusion_matrix_loops(truth: np.ndarray, pred: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((n_classes, n_classes), dtype=int)
    for t, p in zip(truth, pred):
        out[int(t), int(p)] += 1
    return out
