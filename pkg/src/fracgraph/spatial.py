"""The fractional Sturm-Liouville operator on a star graph and its inverse.

A graph function is stored through its singular representation

    u_k(x) = b * x**(beta-1) / Gamma(beta) + I^beta_{0,x} phi_k(x),

so that ``I^{1-beta} u_k(0) = b`` on every edge (vertex continuity holds by
construction), ``I^{1-beta} u_k(l_k) = b + int phi_k`` and ``D^beta u_k = phi_k``.
The operator is ``(L u)_k = right Caputo derivative of gamma_k * phi_k``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy import integrate

from .fracops import (
    Side,
    UniformGrid,
    caputo_matrix,
    frac_integral_matrix,
    power_weight_quadrature,
    trapezoid_weights,
    validate_order,
)
from .graph import Coefficients, GraphSeries, StarGraph

__all__ = [
    "SingularSystemError",
    "SingularRepresentation",
    "VertexSystem",
    "SteppingOperator",
    "node_values",
    "apply_L",
    "pair_with",
    "assemble_vertex_system",
    "det_P_closed_form",
    "invert_L",
    "assemble_stepping",
    "stepping_solve",
    "right_integral_l1",
    "right_singular_column",
]

log = logging.getLogger(__name__)

MAX_CONDITION = 1e12


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a vertex or stepping system is singular or too ill-conditioned."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


def singular_profile(x: np.ndarray, beta: float) -> np.ndarray:
    """``x**(beta-1)/Gamma(beta)`` with the vertex node set to 0."""
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = x[pos] ** (beta - 1.0) / math.gamma(beta)
    return out


@dataclass(frozen=True, eq=False)
class SingularRepresentation:
    """Graph function ``b x^(beta-1)/Gamma(beta) + I^beta phi_k`` on each edge."""

    beta: float
    b: float
    phi: GraphSeries

    def __post_init__(self):
        object.__setattr__(self, "beta", validate_order(self.beta, "beta", spatial=True))
        b = float(self.b)
        if not math.isfinite(b):
            raise ValueError("vertex coefficient b must be finite")
        object.__setattr__(self, "b", b)

    @property
    def graph(self) -> StarGraph:
        return self.phi.graph

    @property
    def singular_at_vertex(self) -> bool:
        return self.b != 0.0

    @classmethod
    def zeros(cls, graph: StarGraph, beta: float) -> "SingularRepresentation":
        return cls(beta, 0.0, GraphSeries.zeros(graph))

    @classmethod
    def from_vector(cls, graph: StarGraph, beta: float, z: np.ndarray) -> "SingularRepresentation":
        """Inverse of :meth:`vector`: ``z = [b, phi_1..., phi_n...]``."""
        return cls(beta, float(z[0]), GraphSeries.from_flat(graph, z[1:]))

    def vector(self) -> np.ndarray:
        return np.concatenate([[self.b], self.phi.flat()])

    def regular_part(self) -> GraphSeries:
        """``I^beta phi_k`` at the nodes (product-trapezoidal)."""
        return GraphSeries(self.graph, tuple(
            frac_integral_matrix(g, self.beta) @ v for g, v in zip(self.graph.grids, self.phi.values)
        ))

    def trace(self) -> float:
        """``I^{1-beta} u_k(0)``, identical on every edge."""
        return self.b

    def boundary_residuals(self) -> np.ndarray:
        """``I^{1-beta} u_k(l_k) = b + int phi_k`` per edge (trapezoid)."""
        return np.array([
            self.b + trapezoid_weights(g.cells, g.h) @ v
            for g, v in zip(self.graph.grids, self.phi.values)
        ])

    def flux_residual(self, coeff: Coefficients) -> float:
        """``sum_k gamma_k(0) D^beta u_k(0)``."""
        return float(sum(gam[0] * v[0] for gam, v in zip(coeff.gamma.values, self.phi.values)))

    def __add__(self, other: "SingularRepresentation") -> "SingularRepresentation":
        return SingularRepresentation(self.beta, self.b + other.b, self.phi + other.phi)

    def __sub__(self, other: "SingularRepresentation") -> "SingularRepresentation":
        return SingularRepresentation(self.beta, self.b - other.b, self.phi - other.phi)

    def __mul__(self, c: float) -> "SingularRepresentation":
        return SingularRepresentation(self.beta, c * self.b, c * self.phi)

    __rmul__ = __mul__


def node_values(u: SingularRepresentation) -> GraphSeries:
    """Node values of ``u``.

    The singular term is not evaluated at the vertex node; there the returned
    value is the regular part only and ``u.singular_at_vertex`` tells whether
    the true value is unbounded.
    """
    reg = u.regular_part()
    if u.b == 0.0:
        return reg
    return reg.map(lambda v, k: v + u.b * singular_profile(u.graph.grids[k].nodes, u.beta))


def apply_L(u: SingularRepresentation, coeff: Coefficients) -> GraphSeries:
    """Right Caputo derivative (L1) of ``gamma_k * phi_k`` on each edge."""
    if coeff.graph != u.graph:
        raise ValueError("coefficients and representation live on different graphs")
    return GraphSeries(u.graph, tuple(
        caputo_matrix(g, u.beta, Side.RIGHT) @ (gam * v)
        for g, gam, v in zip(u.graph.grids, coeff.gamma.values, u.phi.values)
    ))


def pair_with(f: GraphSeries, u: SingularRepresentation) -> float:
    """``sum_k int f_k u_k dx`` for sampled ``f``, integrating the singular term exactly."""
    if f.graph != u.graph:
        raise ValueError("series and representation live on different graphs")
    reg = u.regular_part()
    total = 0.0
    for g, fv, rv in zip(u.graph.grids, f.values, reg.values):
        total += trapezoid_weights(g.cells, g.h) @ (fv * rv)
        if u.b != 0.0:
            total += u.b / math.gamma(u.beta) * (power_weight_quadrature(g, u.beta - 1.0) @ fv)
    return float(total)


def right_integral_l1(grid, beta: float, omega: np.ndarray) -> np.ndarray:
    """Right fractional integral realised as the exact inverse of the right L1 derivative.

    Returns ``g`` with ``g[-1] = 0`` and ``L1_right(g) = omega`` at nodes ``0..N-1``.
    """
    n = grid.cells
    d = caputo_matrix(grid, beta, Side.RIGHT)
    g = np.zeros(grid.node_count)
    g[:n] = sla.solve_triangular(d[:n, :n], omega[:n], lower=False)
    return g


def _right_integral(grid, beta: float, omega: np.ndarray, integral: str) -> np.ndarray:
    if integral == "product":
        return frac_integral_matrix(grid, beta, Side.RIGHT) @ omega
    if integral == "l1":
        return right_integral_l1(grid, beta, omega)
    raise ValueError(f"integral must be 'product' or 'l1', got {integral!r}")


@dataclass(frozen=True, eq=False)
class VertexSystem:
    """Linear system ``P mu = M`` for ``mu = (b, a_1, ..., a_n)``.

    ``M`` is derived by applying the discrete boundary and flux functionals to
    the particular solution; ``printed_M`` carries the same vector with the
    flux entry forced to 0, which is only correct when the right integrals of
    ``omega`` vanish at the vertex.
    """

    P: np.ndarray
    M: np.ndarray
    printed_M: np.ndarray
    particular: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def flux_discrepancy(self) -> float:
        return float(self.M[0] - self.printed_M[0])

    def solve(self) -> np.ndarray:
        cond = float(np.linalg.cond(self.P))
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise SingularSystemError("vertex system is singular", cond)
        return np.linalg.solve(self.P, self.M)


def _vertex_matrix(coeff: Coefficients) -> np.ndarray:
    c = coeff.inverse_integrals()
    n = len(c)
    P = np.zeros((n + 1, n + 1))
    P[0, 1:] = 1.0
    P[1:, 0] = 1.0
    P[np.arange(1, n + 1), np.arange(1, n + 1)] = c
    return P


def assemble_vertex_system(
    omega: GraphSeries, coeff: Coefficients, beta: float, integral: str = "l1"
) -> VertexSystem:
    """Assemble ``P mu = M`` for ``L w = omega``.

    With ``G_k = I^beta_{x,l_k} omega_k`` the solution has ``gamma_k phi_k = G_k + a_k``.
    Boundary rows read ``b + a_k int(1/gamma_k) = -int(G_k / gamma_k)`` and the
    flux row reads ``sum a_k = -sum G_k(0)``.
    """
    beta = validate_order(beta, "beta", spatial=True)
    if omega.graph != coeff.graph:
        raise ValueError("omega and coefficients live on different graphs")
    P = _vertex_matrix(coeff)
    particular = tuple(
        _right_integral(g, beta, w, integral) for g, w in zip(omega.graph.grids, omega.values)
    )
    n = omega.graph.edge_count
    M = np.zeros(n + 1)
    M[0] = -sum(G[0] for G in particular)
    for k, (g, G, gam) in enumerate(zip(omega.graph.grids, particular, coeff.gamma.values)):
        M[k + 1] = -(trapezoid_weights(g.cells, g.h) @ (G / gam))
    printed = M.copy()
    printed[0] = 0.0
    if M[0] != 0.0:
        log.debug("vertex system: derived flux entry %.6e differs from printed 0", M[0])
    return VertexSystem(P, M, printed, particular)


def det_P_closed_form(coeff: Coefficients) -> float:
    """``-sum_i prod_{j != i} c_j`` with ``c_j = int_0^{l_j} dx/gamma_j``."""
    c = coeff.inverse_integrals()
    return float(-sum(np.prod(np.delete(c, i)) for i in range(len(c))))


def invert_L(
    omega: GraphSeries, coeff: Coefficients, beta: float, integral: str = "l1"
) -> SingularRepresentation:
    """Solve ``L w = omega`` subject to the vertex and boundary conditions.

    By default the right fractional integral is the exact inverse of the
    discrete L1 operator, so ``apply_L`` undoes ``invert_L`` at nodes
    ``0..N_k-1``. ``integral="product"`` uses the product-trapezoidal rule
    instead, which is what the stepping operator uses with ``d = 0``; it is
    more accurate as a quadrature but L1 then sees the ``(l-x)^beta`` layer
    and the forward residual only decays like ``h^(1/2)``.
    """
    system = assemble_vertex_system(omega, coeff, beta, integral)
    mu = system.solve()
    b, a = mu[0], mu[1:]
    phi = tuple((G + a_k) / gam for G, a_k, gam in zip(system.particular, a, coeff.gamma.values))
    return SingularRepresentation(beta, b, GraphSeries(omega.graph, phi))


@lru_cache(maxsize=32)
def _right_singular_column(length: float, cells: int, beta: float) -> np.ndarray:
    """``I^beta_{x,l}`` of ``x^(beta-1)/Gamma(beta)`` at the nodes, by adaptive quadrature."""
    grid = UniformGrid(length, cells)
    gb = math.gamma(beta)
    out = np.zeros(grid.node_count)
    out[0] = length ** (2 * beta - 1) / ((2 * beta - 1) * gb * gb)
    for i, x in enumerate(grid.nodes[1:-1], start=1):
        val, _ = integrate.quad(lambda s: s ** (beta - 1.0), x, length, weight="alg",
                                wvar=(beta - 1.0, 0.0), epsabs=1e-15, epsrel=1e-13, limit=200)
        out[i] = val / (gb * gb)
    out.flags.writeable = False
    return out


def right_singular_column(grid: UniformGrid, beta: float) -> np.ndarray:
    return _right_singular_column(grid.length, grid.cells, float(beta))


@dataclass(frozen=True, eq=False)
class SteppingOperator:
    """Factored discrete ``d * Id + L`` over the unknowns ``(b, phi)``.

    Each step is solved in integrated form: on every node of edge ``k``

        gamma_k phi_k + d I^beta_{x,l_k} u_k - a_k = I^beta_{x,l_k} F_k,

    with one free constant ``a_k`` per edge, closed by the boundary rows
    ``b + int phi_k = 0`` and the flux row ``sum gamma_k(0) phi_k(0) = 0``.
    Differentiating removes ``a_k`` and gives back ``d u + L u = F``;
    solving the integrated form keeps ``phi_k(0)`` and the ``(l_k - x)^beta``
    layer at the far end consistent with the continuous problem. The
    singular term of ``u`` and of ``F`` is integrated exactly.
    """

    d: float
    beta: float
    graph: StarGraph
    matrix: np.ndarray = field(repr=False)
    lu: tuple = field(repr=False)
    integrated_values: np.ndarray = field(repr=False)
    right: tuple[np.ndarray, ...] = field(repr=False)
    singular_column: np.ndarray = field(repr=False)
    collocation: np.ndarray = field(repr=False)
    value_map: np.ndarray = field(repr=False)
    condition: float
    row_scale: np.ndarray = field(repr=False, default=None)

    @property
    def dimension(self) -> int:
        """Length of a representation vector ``[b, phi]``."""
        return 1 + self.graph.total_nodes

    def collocated(self, f: GraphSeries) -> np.ndarray:
        """Values of ``f`` at the nodes ``1..N_k`` of every edge."""
        return f.flat()[self.collocation]

    def integrate(self, nodes: np.ndarray, singular: np.ndarray | float = 0.0) -> np.ndarray:
        """``I^beta_{x,l}`` of ``F = regular + singular * x^(beta-1)/Gamma(beta)``.

        ``nodes`` has the regular part at every node (last axis); leading axes
        are broadcast, e.g. one row per time level.
        """
        nodes = np.asarray(nodes, dtype=float)
        out = np.empty_like(nodes)
        offset = 0
        for g, R in zip(self.graph.grids, self.right):
            sl = slice(offset, offset + g.node_count)
            out[..., sl] = nodes[..., sl] @ R.T
            offset += g.node_count
        singular = np.asarray(singular, dtype=float)
        return out + singular[..., None] * self.singular_column

    def history_term(self, z: np.ndarray) -> np.ndarray:
        """``I^beta_{x,l} u`` for a representation vector (or rows of them)."""
        return np.asarray(z) @ self.integrated_values.T

    def solve_integrated(self, rhs_nodes: np.ndarray) -> np.ndarray:
        """Representation vector ``[b, phi]`` for an integrated right-hand side."""
        rhs = np.zeros(self.matrix.shape[0])
        rhs[: self.graph.total_nodes] = rhs_nodes
        return sla.lu_solve(self.lu, self.row_scale * rhs)[: self.dimension]

    def values_at_collocation(self, z: np.ndarray) -> np.ndarray:
        """Node values of the representation ``z`` at the collocation nodes."""
        return np.asarray(z) @ self.value_map.T


def assemble_stepping(d: float, coeff: Coefficients, beta: float) -> SteppingOperator:
    """Assemble and LU-factor ``d * Id + L`` with boundary and flux rows appended.

    With ``d = 0`` this reproduces ``invert_L(..., integral="product")``.
    """
    d = float(d)
    if d < 0 or not math.isfinite(d):
        raise ValueError(f"stepping coefficient must be finite and >= 0, got {d}")
    beta = validate_order(beta, "beta", spatial=True)
    graph = coeff.graph
    n = graph.edge_count
    n_nodes = graph.total_nodes
    n_rep = 1 + n_nodes
    size = n_rep + n

    integrated = np.zeros((n_nodes, n_rep))
    value_rows = []
    constraint = np.zeros((n + 1, size))
    node_rows = np.zeros((n_nodes, size))
    rights, singular_cols, colloc_index = [], [], []

    offset = 0
    for k, (g, gam) in enumerate(zip(graph.grids, coeff.gamma.values)):
        rows = slice(offset, offset + g.node_count)
        cols = slice(1 + offset, 1 + offset + g.node_count)
        R = frac_integral_matrix(g, beta, Side.RIGHT)
        S = right_singular_column(g, beta)
        integrated[rows, 0] = S
        integrated[rows, cols] = R @ frac_integral_matrix(g, beta)
        node_rows[rows, cols] = np.diag(gam)
        node_rows[rows, n_rep + k] = -1.0

        vals = np.zeros((g.cells, n_rep))
        vals[:, 0] = singular_profile(g.nodes[1:], beta)
        vals[:, cols] = frac_integral_matrix(g, beta)[1:]
        value_rows.append(vals)

        constraint[k, 0] = 1.0
        constraint[k, cols] = trapezoid_weights(g.cells, g.h)
        constraint[-1, 1 + offset] = gam[0]
        rights.append(R)
        singular_cols.append(S)
        colloc_index.append(np.arange(offset + 1, offset + g.node_count))
        offset += g.node_count

    node_rows[:, :n_rep] += d * integrated
    matrix = np.vstack([node_rows, constraint])
    # equilibrate rows: for large d the node rows are dominated by d * I^beta
    row_scale = 1.0 / np.abs(matrix).max(axis=1)
    scaled = row_scale[:, None] * matrix
    lu = sla.lu_factor(scaled, check_finite=True)
    anorm = np.linalg.norm(scaled, 1)
    rcond, _ = sla.lapack.dgecon(lu[0], anorm, norm="1")
    condition = math.inf if rcond == 0 else 1.0 / rcond
    if condition > MAX_CONDITION:
        raise SingularSystemError("stepping operator is singular", condition)
    value_map = np.vstack(value_rows)
    for arr in (matrix, integrated, value_map, row_scale):
        arr.flags.writeable = False
    return SteppingOperator(
        d, beta, graph, matrix, lu, integrated, tuple(rights), np.concatenate(singular_cols),
        np.concatenate(colloc_index), value_map, condition, row_scale,
    )


def stepping_solve(op: SteppingOperator, rhs: GraphSeries, singular: float = 0.0) -> SingularRepresentation:
    """Solve ``(d Id + L) u = rhs`` with the boundary and flux conditions.

    ``rhs`` holds the regular part at every node; ``singular`` is the
    coefficient of an extra ``x^(beta-1)/Gamma(beta)`` term.
    """
    if rhs.graph != op.graph:
        raise ValueError("right-hand side lives on a different graph")
    z = op.solve_integrated(op.integrate(rhs.flat(), singular))
    return SingularRepresentation.from_vector(op.graph, op.beta, z)
