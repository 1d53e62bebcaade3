"""Independent reference implementations used to check the real code.

Everything here deliberately avoids the package's own algorithms:
the strength fit goes through a generic gradient optimizer, graph
metrics come from naive recursion, and similarity rankings from
exhaustive pairwise scans.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize


def smoothed_matrix(win_matrix: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    w = np.asarray(win_matrix, dtype=float).copy()
    n = w.shape[0]
    w += alpha * (1.0 - np.eye(n))
    return w


def pairwise_log_likelihood(beta: np.ndarray, win_matrix: np.ndarray) -> float:
    """Log-likelihood of the preference model P(i beats j) = e^bi/(e^bi+e^bj)."""
    n = len(beta)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j or win_matrix[i, j] == 0:
                continue
            diff = beta[j] - beta[i]
            # log P(i beats j) = -log(1 + e^(bj - bi)), computed stably
            total += win_matrix[i, j] * -np.logaddexp(0.0, diff)
    return float(total)


def direct_mle_beta(win_matrix: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """Maximize the smoothed log-likelihood with BFGS, then center.

    Parameterized over the first N-1 strengths with the last fixed at 0;
    the returned vector is shifted to zero mean.
    """
    w = smoothed_matrix(win_matrix, alpha)
    n = w.shape[0]

    def objective(theta: np.ndarray) -> float:
        beta = np.append(theta, 0.0)
        return -pairwise_log_likelihood(beta, w)

    def gradient(theta: np.ndarray) -> np.ndarray:
        beta = np.append(theta, 0.0)
        grad = np.zeros(n)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                n_ij = w[i, j] + w[j, i]
                p_ij = 1.0 / (1.0 + np.exp(beta[j] - beta[i]))
                grad[i] += w[i, j] - n_ij * p_ij
        return -grad[:-1]

    result = minimize(
        objective,
        np.zeros(n - 1),
        jac=gradient,
        method="BFGS",
        options={"gtol": 1e-12, "maxiter": 10_000},
    )
    beta = np.append(result.x, 0.0)
    return beta - beta.mean()


def exhaustive_top_similar(
    query_vec: list[float], entries: list[tuple[str, list[float]]], n: int
) -> list[tuple[str, float]]:
    """Brute-force cosine ranking over all entries (unit vectors assumed)."""
    scored = [
        (key, float(sum(a * b for a, b in zip(query_vec, vec)))) for key, vec in entries
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:n]


def longest_chain_nodes(nodes: list[str], edges: list[tuple[str, str]]) -> int:
    """Longest path length in nodes, by memo-free recursive search."""
    successors: dict[str, list[str]] = {node: [] for node in nodes}
    for u, v in edges:
        successors[u].append(v)

    def depth_from(node: str) -> int:
        best = 1
        for nxt in successors[node]:
            best = max(best, 1 + depth_from(nxt))
        return best

    return max((depth_from(node) for node in nodes), default=0)


def layer_histogram(nodes: list[str], edges: list[tuple[str, str]]) -> dict[int, int]:
    """Layer sizes under earliest-possible layering, computed by fixpoint."""
    preds: dict[str, list[str]] = {node: [] for node in nodes}
    for u, v in edges:
        preds[v].append(u)
    layer = {node: 0 for node in nodes}
    changed = True
    while changed:
        changed = False
        for node in nodes:
            want = max((layer[p] + 1 for p in preds[node]), default=0)
            if want != layer[node]:
                layer[node] = want
                changed = True
    histogram: dict[int, int] = {}
    for value in layer.values():
        histogram[value] = histogram.get(value, 0) + 1
    return histogram


def transitive_dependents(start: str, edges: list[tuple[str, str]]) -> set[str]:
    """All nodes reachable from start along edges (start excluded)."""
    successors: dict[str, set[str]] = {}
    for u, v in edges:
        successors.setdefault(u, set()).add(v)
    seen: set[str] = set()
    stack = [start]
    while stack:
        node = stack.pop()
        for nxt in successors.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen
