"""Directed acyclic graphs encoding partial orders, and their incidence matrices."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from graphlib import CycleError, TopologicalSorter
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components as _cc

from .errors import CycleDetected, DuplicateEdge, GraphError, SelfLoop, VertexOutOfRange

__all__ = [
    "Dag",
    "IncidenceMatrix",
    "from_edge_list",
    "build_chain",
    "build_grid2d",
    "incidence",
    "connected_components",
    "topological_order",
]


@dataclass(frozen=True)
class IncidenceMatrix:
    """Oriented incidence matrix in triplet form.

    Row ``e`` holds ``+1`` at the source and ``-1`` at the target of edge ``e``,
    so ``D @ beta`` lists the differences ``beta[src] - beta[tgt]``.
    """

    n_rows: int
    n_cols: int
    sources: np.ndarray
    targets: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def triplets(self) -> list[tuple[int, int, int]]:
        out = []
        for e, (i, j) in enumerate(zip(self.sources.tolist(), self.targets.tolist())):
            out.append((e, i, 1))
            out.append((e, j, -1))
        return out

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        m = self.n_rows
        rows = np.repeat(np.arange(m), 2)
        cols = np.empty(2 * m, dtype=np.int64)
        cols[0::2] = self.sources
        cols[1::2] = self.targets
        vals = np.tile([1.0, -1.0], m)
        return sparse.csr_matrix((vals, (rows, cols)), shape=self.shape)

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def matvec(self, beta: np.ndarray) -> np.ndarray:
        """Return ``D @ beta``."""
        return beta[self.sources] - beta[self.targets]

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        """Return ``D.T @ v``."""
        out = np.zeros(self.n_cols)
        np.add.at(out, self.sources, v)
        np.subtract.at(out, self.targets, v)
        return out

    def __matmul__(self, beta):
        return self.matvec(np.asarray(beta, dtype=float))


@dataclass(frozen=True)
class Dag:
    """A validated DAG; edge order is part of its identity."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    order: tuple[int, ...] = field(repr=False, compare=False, default=())

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def sources(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.int64)

    @cached_property
    def targets(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.int64)

    @cached_property
    def D(self) -> IncidenceMatrix:
        return incidence(self)

    def subgraph(self, edge_ids: Iterable[int]) -> "Dag":
        """Same vertex set, keeping only the given edges (in their original order)."""
        keep = sorted(set(int(e) for e in edge_ids))
        return Dag(self.n_vertices, tuple(self.edges[e] for e in keep), self.order)

    def to_dict(self) -> dict:
        return {"n_vertices": self.n_vertices, "edges": [list(e) for e in self.edges]}


def topological_order(n_vertices: int, edges: Sequence[tuple[int, int]]) -> tuple[int, ...]:
    ts = TopologicalSorter({v: () for v in range(n_vertices)})
    for i, j in edges:
        ts.add(j, i)
    try:
        ts.prepare()
    except CycleError as exc:
        raise CycleDetected(f"edge set contains a cycle through {exc.args[1]}") from None
    # Emit ready vertices smallest-first so the order is deterministic.
    order: list[int] = []
    while ts.is_active():
        ready = sorted(ts.get_ready())
        order.extend(ready)
        ts.done(*ready)
    return tuple(order)


def from_edge_list(n_vertices: int, edges: Iterable[Sequence[int]]) -> Dag:
    """Validate an edge list and build a :class:`Dag`.

    Raises :class:`VertexOutOfRange`, :class:`SelfLoop`, :class:`DuplicateEdge`
    or :class:`CycleDetected`.
    """
    if int(n_vertices) != n_vertices or n_vertices < 1:
        raise GraphError(f"n_vertices must be a positive integer, got {n_vertices!r}")
    n_vertices = int(n_vertices)
    clean: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for k, e in enumerate(edges):
        if len(e) != 2:
            raise GraphError(f"edge {k} is not a pair: {e!r}")
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < n_vertices and 0 <= j < n_vertices):
            raise VertexOutOfRange(f"edge {k} = ({i}, {j}) outside [0, {n_vertices})")
        if i == j:
            raise SelfLoop(f"edge {k} is a self-loop on vertex {i}")
        if (i, j) in seen:
            raise DuplicateEdge(f"edge {k} = ({i}, {j}) appears twice")
        seen.add((i, j))
        clean.append((i, j))
    order = topological_order(n_vertices, clean)
    return Dag(n_vertices, tuple(clean), order)


def build_chain(s: int) -> Dag:
    if s < 1:
        raise GraphError("chain length must be >= 1")
    return from_edge_list(s, [(k, k + 1) for k in range(s - 1)])


def build_grid2d(s1: int, s2: int) -> Dag:
    """Bimonotone grid with ``s1`` rows and ``s2`` columns, row-major vertex ids.

    Horizontal edges ``(l, k) -> (l, k+1)`` come first, then vertical edges
    ``(l, k) -> (l+1, k)``, each block in lexicographic order.
    """
    if s1 < 1 or s2 < 1:
        raise GraphError("grid dimensions must be >= 1")

    def vid(l: int, k: int) -> int:
        return l * s2 + k

    edges = [(vid(l, k), vid(l, k + 1)) for l in range(s1) for k in range(s2 - 1)]
    edges += [(vid(l, k), vid(l + 1, k)) for l in range(s1 - 1) for k in range(s2)]
    return from_edge_list(s1 * s2, edges)


def incidence(dag: Dag) -> IncidenceMatrix:
    return IncidenceMatrix(dag.n_edges, dag.n_vertices, dag.sources, dag.targets)


def connected_components(dag: Dag, keep_edge: Callable[[int], bool] | None = None) -> list[list[int]]:
    """Undirected connected components over the retained edges.

    Groups are sorted internally and ordered by their smallest vertex.
    """
    if keep_edge is None:
        kept = np.arange(dag.n_edges)
    else:
        kept = np.array([e for e in range(dag.n_edges) if keep_edge(e)], dtype=np.int64)
    return _components_from_mask(dag, kept)


def _components_from_mask(dag: Dag, kept: np.ndarray) -> list[list[int]]:
    n = dag.n_vertices
    if kept.size:
        adj = sparse.coo_matrix(
            (np.ones(kept.size), (dag.sources[kept], dag.targets[kept])), shape=(n, n)
        )
    else:
        adj = sparse.coo_matrix((n, n))
    _, labels = _cc(adj, directed=False)
    groups: dict[int, list[int]] = {}
    for v, lab in enumerate(labels.tolist()):
        groups.setdefault(lab, []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])
