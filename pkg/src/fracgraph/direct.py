"""L1-implicit time stepping for the direct problem and its a-priori monitors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fracops import (
    Series,
    UniformGrid,
    caputo_matrix,
    caputo_weights,
    frac_integral_matrix,
    trapezoid_weights,
    validate_order,
)
from .graph import Coefficients, GraphSeries, StarGraph
from .spatial import SingularRepresentation, SteppingOperator, assemble_stepping, singular_profile

__all__ = [
    "TimeGrid",
    "TimeSeries",
    "SourceFn",
    "DirectProblem",
    "DirectSolution",
    "solve_direct",
    "SampledSource",
    "sample_source",
    "stepping_operator",
    "stepping_coefficient",
    "discrete_L",
    "energy_monitor",
    "alikhanov_margins",
    "friedrichs_ratio",
    "friedrichs_check",
    "FriedrichsReport",
]

# time grids and time series share the spatial grid machinery
TimeGrid = UniformGrid
TimeSeries = Series

#: ``source(x, t, k) -> values`` on the nodes ``x`` of edge ``k``.
SourceFn = Callable[[np.ndarray, float, int], np.ndarray]


def zero_source(x: np.ndarray, t: float, k: int) -> np.ndarray:
    return np.zeros_like(x)


SingularSourceFn = Callable[[float], float]


@dataclass(frozen=True)
class DirectProblem:
    """Data of the direct problem with zero initial state.

    ``source`` gives the regular part of the right-hand side at every node,
    including the vertex; ``singular_source(t)`` optionally adds
    ``s(t) x^(beta-1)/Gamma(beta)``, which cannot be sampled at ``x = 0``.
    """

    coeff: Coefficients
    alpha: float
    beta: float
    time_grid: TimeGrid
    source: SourceFn = zero_source
    singular_source: SingularSourceFn | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", validate_order(self.alpha, "alpha"))
        object.__setattr__(self, "beta", validate_order(self.beta, "beta", spatial=True))

    @property
    def graph(self) -> StarGraph:
        return self.coeff.graph

    def with_source(self, source: SourceFn, singular_source: SingularSourceFn | None = None) -> "DirectProblem":
        return DirectProblem(self.coeff, self.alpha, self.beta, self.time_grid, source, singular_source)


@dataclass(frozen=True, eq=False)
class SampledSource:
    """Right-hand side on the space-time grid.

    ``nodes[m]`` is the regular part at every graph node (flat edge order) and
    ``singular[m]`` the coefficient of ``x^(beta-1)/Gamma(beta)`` at ``t_m``.
    """

    nodes: np.ndarray
    singular: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        singular = np.array(self.singular, dtype=float)
        if nodes.ndim != 2 or singular.shape != (nodes.shape[0],):
            raise ValueError("nodes must be (steps+1, total_nodes) and singular (steps+1,)")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(singular))):
            raise ValueError("source is not finite")
        nodes.flags.writeable = False
        singular.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "singular", singular)

    def scaled(self, f: np.ndarray) -> "SampledSource":
        """Multiply time level ``m`` by ``f[m]``."""
        f = np.asarray(f, dtype=float)
        return SampledSource(f[:, None] * self.nodes, f * self.singular)

    def __add__(self, other: "SampledSource") -> "SampledSource":
        return SampledSource(self.nodes + other.nodes, self.singular + other.singular)

    def __mul__(self, c: float) -> "SampledSource":
        return SampledSource(c * self.nodes, c * self.singular)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DirectSolution:
    """All time levels of the solution, stored as representation vectors.

    ``states[m]`` is ``[b, phi_1, ..., phi_n]`` at ``t_m``; ``collocated[m]``
    holds the node values at the nodes ``1..N_k`` of every edge, and
    ``source_collocated[m]`` the right-hand side there.
    """

    problem: DirectProblem
    operator: SteppingOperator = field(repr=False)
    states: np.ndarray = field(repr=False)
    collocated: np.ndarray = field(repr=False)
    source_collocated: np.ndarray = field(repr=False)

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    def state(self, m: int) -> SingularRepresentation:
        return SingularRepresentation.from_vector(self.problem.graph, self.problem.beta, self.states[m])

    def __iter__(self):
        return (self.state(m) for m in range(self.steps + 1))

    def diagnostics(self) -> dict:
        """Computable L2(G_T) pieces of the solution norm plus invariant residuals."""
        p = self.problem
        w = _collocation_weights(p.graph)
        dt = p.time_grid.h
        cap = _time_caputo(self.collocated, p.time_grid, p.alpha)
        Lu = discrete_L(self)
        phi_sq = np.array([_phi_norm_sq(p.graph, z) for z in self.states])
        boundary = max(float(np.abs(s.boundary_residuals()).max()) for s in self)
        flux = max(abs(s.flux_residual(p.coeff)) for s in self)
        return {
            "norm_u": float(np.sqrt(dt * np.sum(self.collocated**2 @ w))),
            "norm_caputo_u": float(np.sqrt(dt * np.sum(cap**2 @ w))),
            "norm_D_beta_u": float(np.sqrt(dt * np.sum(phi_sq))),
            "norm_L_u": float(np.sqrt(dt * np.sum(Lu**2 @ w))),
            "max_boundary_residual": boundary,
            "max_flux_residual": flux,
            "condition": self.operator.condition,
        }


def _collocation_weights(graph: StarGraph) -> np.ndarray:
    """Trapezoid weights of nodes ``1..N_k`` on every edge (the vertex node is dropped)."""
    return np.concatenate([trapezoid_weights(g.cells, g.h)[1:] for g in graph.grids])


def _phi_norm_sq(graph: StarGraph, z: np.ndarray) -> float:
    total, offset = 0.0, 1
    for g in graph.grids:
        v = z[offset:offset + g.node_count]
        total += trapezoid_weights(g.cells, g.h) @ (v * v)
        offset += g.node_count
    return float(total)


def _time_caputo(values: np.ndarray, time_grid: TimeGrid, alpha: float) -> np.ndarray:
    """L1 Caputo derivative along axis 0 of ``values``."""
    return caputo_matrix(time_grid, alpha) @ values


def evaluate_source(problem: DirectProblem, source: SourceFn, t: float) -> GraphSeries:
    vals = []
    for k, g in enumerate(problem.graph.grids):
        v = np.broadcast_to(np.asarray(source(g.nodes, t, k), dtype=float), (g.node_count,))
        if not np.all(np.isfinite(v)):
            raise ValueError(
                f"source is not finite on edge {k} at t={t}; a vertex singularity "
                "must be passed as singular_source"
            )
        vals.append(v)
    return GraphSeries(problem.graph, tuple(vals))


def sample_source(p: DirectProblem, source: SourceFn | None = None,
                  singular_source: SingularSourceFn | None = None) -> SampledSource:
    """Sample a source on the space-time grid; level 0 is never used and stays zero.

    Without arguments the problem's own source is sampled.
    """
    if source is None:
        source, singular_source = p.source, p.singular_source
    t = p.time_grid.nodes
    nodes = np.zeros((p.time_grid.node_count, p.graph.total_nodes))
    singular = np.zeros(p.time_grid.node_count)
    for m in range(1, p.time_grid.node_count):
        nodes[m] = evaluate_source(p, source, t[m]).flat()
        if singular_source is not None:
            singular[m] = float(singular_source(float(t[m])))
    return SampledSource(nodes, singular)


def stepping_coefficient(p: DirectProblem) -> float:
    return p.time_grid.h ** (-p.alpha) / math.gamma(2.0 - p.alpha)


def stepping_operator(p: DirectProblem) -> SteppingOperator:
    return assemble_stepping(stepping_coefficient(p), p.coeff, p.beta)


def solve_direct(p: DirectProblem, operator: SteppingOperator | None = None,
                 source: SampledSource | None = None) -> DirectSolution:
    """L1 in time with the spatial stepping operator, zero initial data.

    Step ``m`` solves ``(d0 + L) u^m = h^m + d0 * sum_{j=1}^{m-1} (a_{j-1} - a_j) u^{m-j}``
    with ``d0 = dt^-alpha / Gamma(2 - alpha)``; the ``u^0`` term vanishes.
    ``source`` may supply the right-hand side already sampled.
    """
    tg = p.time_grid
    M = tg.cells
    d0 = stepping_coefficient(p)
    if operator is None:
        operator = assemble_stepping(d0, p.coeff, p.beta)
    elif operator.d != d0 or operator.graph != p.graph or operator.beta != p.beta:
        raise ValueError("stepping operator was assembled for a different problem")
    if source is None:
        source = sample_source(p)
    elif source.nodes.shape != (M + 1, p.graph.total_nodes):
        raise ValueError(f"source has shape {source.nodes.shape}, expected {(M + 1, p.graph.total_nodes)}")

    forcing = operator.integrate(source.nodes, source.singular)
    a = caputo_weights(p.alpha, M)
    drop = a[:-1] - a[1:]  # a_{j-1} - a_j for j = 1..M-1

    states = np.zeros((M + 1, operator.dimension))
    for m in range(1, M + 1):
        rhs = forcing[m]
        if m > 1:
            # history u^{m-1}, ..., u^1 paired with (a_0 - a_1), ..., (a_{m-2} - a_{m-1})
            rhs = rhs + d0 * operator.history_term(drop[: m - 1] @ states[m - 1:0:-1])
        states[m] = operator.solve_integrated(rhs)
    colloc = operator.values_at_collocation(states)
    col_nodes = np.concatenate([g.nodes[1:] for g in p.graph.grids])
    src = source.nodes[:, operator.collocation] + source.singular[:, None] * singular_profile(col_nodes, p.beta)
    for arr in (states, colloc, src):
        arr.flags.writeable = False
    return DirectSolution(p, operator, states, colloc, src)


def energy_monitor(sol: DirectSolution, p: DirectProblem | None = None) -> tuple[TimeSeries, TimeSeries]:
    """Both sides of the discrete a-priori estimate.

    ``lhs(t_m) = sum_{j<=m} dt * int[(d^alpha y)^2 + (L y)^2] + p1 * I^{1-alpha}(||D^beta y||^2)(t_m)``
    and ``rhs(t_m) = sum_{j<=m} dt * int (A y)^2``.
    """
    p = sol.problem if p is None else p
    tg = p.time_grid
    w = _collocation_weights(p.graph)
    cap = _time_caputo(sol.collocated, tg, p.alpha)
    Ly = discrete_L(sol)
    Ay = cap + Ly
    dt = tg.h
    inst = (cap**2 + Ly**2) @ w
    inst[0] = 0.0
    energy = np.array([_phi_norm_sq(p.graph, z) for z in sol.states])
    lhs = dt * np.cumsum(inst) + p.coeff.p1 * (frac_integral_matrix(tg, 1.0 - p.alpha) @ energy)
    ay = (Ay**2) @ w
    ay[0] = 0.0
    rhs = dt * np.cumsum(ay)
    return TimeSeries(tg, lhs), TimeSeries(tg, rhs)


def discrete_L(sol: DirectSolution) -> np.ndarray:
    """``L u^m`` at the collocation nodes as enforced by the scheme, ``h^m - d^alpha u^m``.

    The scheme imposes the equation in integrated form, so this is the
    operator it actually applies; an L1 difference of ``gamma phi`` would
    miss the ``(l - x)^beta`` layer at the far end of every edge.
    """
    p = sol.problem
    return sol.source_collocated - _time_caputo(sol.collocated, p.time_grid, p.alpha)


def alikhanov_margins(sol: DirectSolution) -> np.ndarray:
    """``int u (d^alpha u) - 1/2 d^alpha int u^2`` at every step (should be >= 0)."""
    p = sol.problem
    w = _collocation_weights(p.graph)
    u = sol.collocated
    cap = _time_caputo(u, p.time_grid, p.alpha)
    lhs = (u * cap) @ w
    rhs = 0.5 * (caputo_matrix(p.time_grid, p.alpha) @ ((u * u) @ w))
    return lhs - rhs


def friedrichs_ratio(values: np.ndarray, time_grid: TimeGrid, alpha: float,
                     caputo: np.ndarray | None = None) -> np.ndarray:
    """``||u||_{L2(0,t_m)} / (t_m^alpha/Gamma(alpha+1) ||d^alpha u||_{L2(0,t_m)})`` for ``m >= 1``.

    ``caputo`` defaults to the L1 derivative of ``values``. Entries where both
    norms vanish are reported as 0.
    """
    values = np.asarray(values, dtype=float)
    cap = caputo_matrix(time_grid, alpha) @ values if caputo is None else np.asarray(caputo)
    dt = time_grid.h
    # cumulative trapezoid of the squares
    def cum_sq(v):
        s = v * v
        out = np.zeros_like(s)
        out[1:] = np.cumsum(0.5 * dt * (s[1:] + s[:-1]), axis=0)
        return np.sqrt(out)

    nu, ncap = cum_sq(values), cum_sq(cap)
    t = time_grid.nodes
    const = (t ** alpha / math.gamma(alpha + 1.0))
    if values.ndim > 1:
        const = const[:, None]
    bound = const * ncap
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, nu / bound, np.where(nu > 0, np.inf, 0.0))
    return ratio[1:]


@dataclass(frozen=True)
class FriedrichsReport:
    worst_ratio: float
    slack: float
    passed: bool
    trajectories: int


def friedrichs_check(sol: DirectSolution, p: DirectProblem | None = None,
                     sample: int = 64, slack: float = 0.02) -> FriedrichsReport:
    """Check the Friedrichs-type inequality on up to ``sample`` node trajectories."""
    p = sol.problem if p is None else p
    u = sol.collocated
    idx = np.unique(np.linspace(0, u.shape[1] - 1, min(sample, u.shape[1])).astype(int))
    ratios = friedrichs_ratio(u[:, idx], p.time_grid, p.alpha)
    worst = float(ratios.max()) if ratios.size else 0.0
    return FriedrichsReport(worst, slack, worst <= 1.0 + slack, len(idx))
