"""Metric star graphs, per-edge sampled functions, and graph-wide integrals.

Every edge is parametrised by ``x in [0, l_k]`` with ``x = 0`` at the central
vertex. Edges carry their own uniform grid, so node counts may differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fracops import Series, UniformGrid, trapezoid_weights

__all__ = [
    "StarGraph",
    "GraphSeries",
    "Coefficients",
    "integrate_graph",
    "graph_l2_norm",
    "graph_inner",
]


@dataclass(frozen=True)
class StarGraph:
    """Star graph with ``n >= 2`` edges glued at coordinate 0."""

    grids: tuple[UniformGrid, ...]

    def __post_init__(self):
        grids = tuple(self.grids)
        if len(grids) < 2:
            raise ValueError(f"a star graph needs at least 2 edges, got {len(grids)}")
        object.__setattr__(self, "grids", grids)

    @classmethod
    def uniform(cls, lengths: Sequence[float], cells: int | Sequence[int]) -> "StarGraph":
        if np.isscalar(cells):
            cells = [int(cells)] * len(lengths)
        if len(cells) != len(lengths):
            raise ValueError("lengths and cells must have the same number of entries")
        return cls(tuple(UniformGrid(l, n) for l, n in zip(lengths, cells)))

    @property
    def edge_count(self) -> int:
        return len(self.grids)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(g.length for g in self.grids)

    @property
    def total_nodes(self) -> int:
        return sum(g.node_count for g in self.grids)

    def refine(self, factor: int) -> "StarGraph":
        return StarGraph(tuple(g.refine(factor) for g in self.grids))


@dataclass(frozen=True, eq=False)
class GraphSeries:
    """One sampled function per edge of a star graph."""

    graph: StarGraph
    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.values) != self.graph.edge_count:
            raise ValueError(
                f"expected {self.graph.edge_count} edge arrays, got {len(self.values)}"
            )
        frozen = []
        for k, (grid, v) in enumerate(zip(self.graph.grids, self.values)):
            arr = np.array(v, dtype=float)
            if arr.shape != (grid.node_count,):
                raise ValueError(
                    f"edge {k}: expected {grid.node_count} values, got shape {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"edge {k}: values must be finite")
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "values", tuple(frozen))

    @classmethod
    def sample(cls, graph: StarGraph, fn: Callable[[np.ndarray, int], np.ndarray]) -> "GraphSeries":
        """Sample ``fn(x, k)`` on every edge (``k`` is the 0-based edge index)."""
        return cls(
            graph,
            tuple(np.broadcast_to(fn(g.nodes, k), (g.node_count,)) for k, g in enumerate(graph.grids)),
        )

    @classmethod
    def zeros(cls, graph: StarGraph) -> "GraphSeries":
        return cls(graph, tuple(np.zeros(g.node_count) for g in graph.grids))

    @classmethod
    def from_flat(cls, graph: StarGraph, flat: np.ndarray) -> "GraphSeries":
        splits = np.cumsum([g.node_count for g in graph.grids])[:-1]
        return cls(graph, tuple(np.split(np.asarray(flat, dtype=float), splits)))

    def flat(self) -> np.ndarray:
        return np.concatenate(self.values)

    def edge(self, k: int) -> Series:
        return Series(self.graph.grids[k], self.values[k])

    def map(self, fn: Callable[[np.ndarray, int], np.ndarray]) -> "GraphSeries":
        return GraphSeries(self.graph, tuple(fn(v, k) for k, v in enumerate(self.values)))

    def __add__(self, other: "GraphSeries") -> "GraphSeries":
        _check_same_graph(self, other)
        return GraphSeries(self.graph, tuple(a + b for a, b in zip(self.values, other.values)))

    def __sub__(self, other: "GraphSeries") -> "GraphSeries":
        _check_same_graph(self, other)
        return GraphSeries(self.graph, tuple(a - b for a, b in zip(self.values, other.values)))

    def __mul__(self, c: float) -> "GraphSeries":
        return GraphSeries(self.graph, tuple(c * v for v in self.values))

    __rmul__ = __mul__


def _check_same_graph(f: GraphSeries, g: GraphSeries) -> None:
    if f.graph != g.graph:
        raise ValueError("graph series live on different graphs")


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Diffusion coefficient ``gamma_k`` sampled on each edge, with bounds ``p1 <= gamma <= p2``.

    Only strictly positive coefficients are accepted; the energy estimates the
    solvers rely on need a sign.
    """

    gamma: GraphSeries
    p1: float
    p2: float
    fn: Callable[[np.ndarray, int], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        p1, p2 = float(self.p1), float(self.p2)
        if not 0 < p1 <= p2:
            raise ValueError(f"need 0 < p1 <= p2, got p1={p1}, p2={p2}")
        for k, v in enumerate(self.gamma.values):
            if np.any(v <= 0):
                raise ValueError(f"edge {k}: gamma must be strictly positive (sign-changing gamma is not supported)")
            lo, hi = float(v.min()), float(v.max())
            if lo < p1 or hi > p2:
                raise ValueError(
                    f"edge {k}: gamma range [{lo}, {hi}] violates bounds [{p1}, {p2}]"
                )
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)

    @property
    def graph(self) -> StarGraph:
        return self.gamma.graph

    @classmethod
    def from_function(cls, graph: StarGraph, fn, p1: float | None = None, p2: float | None = None) -> "Coefficients":
        """Sample ``fn(x, k)``; bounds default to the sampled min and max."""
        gamma = GraphSeries.sample(graph, fn)
        lo = min(float(v.min()) for v in gamma.values)
        hi = max(float(v.max()) for v in gamma.values)
        return cls(gamma, lo if p1 is None else p1, hi if p2 is None else p2, fn)

    @classmethod
    def constant(cls, graph: StarGraph, value: float = 1.0) -> "Coefficients":
        return cls.from_function(graph, lambda x, k: np.full_like(x, value))

    def inverse_integrals(self) -> np.ndarray:
        """Trapezoidal ``int_0^{l_k} dx / gamma_k`` for every edge."""
        return np.array([
            trapezoid_weights(g.cells, g.h) @ (1.0 / v)
            for g, v in zip(self.graph.grids, self.gamma.values)
        ])


def integrate_graph(f: GraphSeries) -> float:
    """Sum over edges of the trapezoidal integral of ``f_k`` on ``[0, l_k]``."""
    return float(sum(
        trapezoid_weights(g.cells, g.h) @ v for g, v in zip(f.graph.grids, f.values)
    ))


def graph_inner(f: GraphSeries, g: GraphSeries) -> float:
    _check_same_graph(f, g)
    return float(sum(
        trapezoid_weights(grid.cells, grid.h) @ (a * b)
        for grid, a, b in zip(f.graph.grids, f.values, g.values)
    ))


def graph_l2_norm(f: GraphSeries) -> float:
    return float(np.sqrt(graph_inner(f, f)))
