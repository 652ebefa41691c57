"""Slow, independent reference minimizers used to validate :mod:`dagfuse.solver`.

None of these share code with the splitting solver beyond the graph arrays.
"""
from __future__ import annotations

import numba
import numpy as np

from .errors import EmptyInput, TooLarge
from .graph import Dag
from .solver import PenaltyConfig, _as_signal

__all__ = ["grid_oracle", "subgradient_oracle", "pava_chain"]

GRID_MAX_VERTICES = 3


@numba.njit(cache=True)
def _grid_search3(q0, q1, q2, t01, t02, t12):
    # q*: unary costs per lattice point; t**: pairwise edge costs.  Lexicographic
    # scan with strict improvement keeps the first minimizer.
    best = np.inf
    arg = (0, 0, 0)
    for i0 in range(q0.size):
        for i1 in range(q1.size):
            base = q0[i0] + q1[i1] + t01[i0, i1]
            for i2 in range(q2.size):
                f = base + q2[i2] + t02[i0, i2] + t12[i1, i2]
                if f < best:
                    best = f
                    arg = (i0, i1, i2)
    return arg


def _pair_table(dag: Dag, a: int, b: int, la: np.ndarray, lb: np.ndarray, pen: PenaltyConfig) -> np.ndarray:
    table = np.zeros((la.size, lb.size))
    for i, j in dag.edges:
        if (i, j) == (a, b):
            d = la[:, None] - lb[None, :]
        elif (i, j) == (b, a):
            d = lb[None, :] - la[:, None]
        else:
            continue
        table += pen.lambda_fused * np.abs(d) + pen.lambda_ni * np.maximum(d, 0.0)
    return table


def grid_oracle(y, dag: Dag, pen: PenaltyConfig, lo: float, hi: float, step: float) -> np.ndarray:
    """Exhaustive minimization over the lattice ``{lo, lo+step, ..., hi}^n``.

    Only for ``n <= 3``.  Ties resolve to the lexicographically smallest point.
    """
    y = _as_signal(y, dag)
    if dag.n_vertices > GRID_MAX_VERTICES:
        raise TooLarge(f"grid oracle supports at most {GRID_MAX_VERTICES} vertices")
    if not (lo < hi and step > 0):
        raise ValueError("need lo < hi and step > 0")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    lattice = lo + step * np.arange(count)
    n = dag.n_vertices
    # Absent coordinates (n < 3) get a single dummy point with zero cost.
    lat = [lattice if c < n else np.zeros(1) for c in range(GRID_MAX_VERTICES)]
    q = [0.5 * (y[c] - lat[c]) ** 2 if c < n else np.zeros(1) for c in range(GRID_MAX_VERTICES)]
    t01 = _pair_table(dag, 0, 1, lat[0], lat[1], pen)
    t02 = _pair_table(dag, 0, 2, lat[0], lat[2], pen)
    t12 = _pair_table(dag, 1, 2, lat[1], lat[2], pen)
    idx = _grid_search3(q[0], q[1], q[2], t01, t02, t12)
    return np.array([lattice[idx[c]] for c in range(n)])


@numba.njit(cache=True)
def _subgradient(y, src, tgt, lf, lni, iters, a):
    n = y.size
    b = y.copy()
    avg = b.copy()
    wsum = 0.0
    g = np.empty(n)
    for k in range(1, iters + 1):
        for i in range(n):
            g[i] = b[i] - y[i]
        for e in range(src.size):
            d = b[src[e]] - b[tgt[e]]
            if d > 0.0:
                s = lf + lni
            elif d < 0.0:
                s = -lf
            else:
                # midpoint of [-lf, lf] plus midpoint of [0, lni]
                s = 0.5 * lni
            g[src[e]] += s
            g[tgt[e]] -= s
        step = a / k
        for i in range(n):
            b[i] -= step * g[i]
        # k-weighted running average of the iterates
        wsum += k
        w = k / wsum
        for i in range(n):
            avg[i] += w * (b[i] - avg[i])
    return avg


def subgradient_oracle(y, dag: Dag, pen: PenaltyConfig, iters: int = 1_000_000, a: float = 1.0) -> np.ndarray:
    """Diminishing-step subgradient descent, step ``a/k``, returning the averaged iterate."""
    y = _as_signal(y, dag)
    if iters < 1:
        raise ValueError("iters must be >= 1")
    return _subgradient(y, dag.sources, dag.targets, float(pen.lambda_fused), float(pen.lambda_ni), int(iters), float(a))


def pava_chain(y) -> np.ndarray:
    """Isotonic regression on the total order ``0 < 1 < ... < n-1`` by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise EmptyInput("pava_chain needs a nonempty 1-D input")
    sums: list[float] = []
    counts: list[int] = []
    for v in y.tolist():
        sums.append(v)
        counts.append(1)
        while len(sums) > 1 and sums[-2] / counts[-2] > sums[-1] / counts[-1]:
            s, c = sums.pop(), counts.pop()
            sums[-1] += s
            counts[-1] += c
    return np.repeat([s / c for s, c in zip(sums, counts)], counts)
