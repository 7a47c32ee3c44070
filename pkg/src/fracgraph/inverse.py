"""Recovery of the time-dependent source amplitude from an integral measurement.

The unknown ``f`` enters the source as ``f(t) g(x, t) + h(x, t)``; the data
are ``psi(t) = sum_k int eta_k u_k dx``. Splitting ``u = z + y``, where ``y``
carries ``h`` and ``z`` carries ``f g``, turns the problem into the
fixed-point equation ``f = B f + r`` with ``r = d^alpha E / g*``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .direct import (
    DirectProblem,
    DirectSolution,
    SourceFn,
    TimeGrid,
    TimeSeries,
    SampledSource,
    sample_source,
    solve_direct,
    stepping_operator,
    zero_source,
)
from .fracops import caputo_matrix, frac_integral_matrix, power_weight_quadrature, trapezoid_weights, validate_order
from .graph import Coefficients, GraphSeries, StarGraph, graph_l2_norm
from .spatial import SingularRepresentation, SteppingOperator, pair_with

__all__ = [
    "InverseProblem",
    "K1Report",
    "InverseSolution",
    "CompatibilityError",
    "InfeasibleProblemError",
    "DivergenceError",
    "compute_g_star",
    "check_K1",
    "overdetermination_moment",
    "moment_functional",
    "compute_E",
    "apply_B",
    "solve_inverse",
    "neumann_tail",
    "iteration_bound",
    "time_l2_norm",
]

log = logging.getLogger(__name__)

B_FORMS = ("energy", "moment")


class CompatibilityError(ValueError):
    """``E(0)`` does not vanish although the solution starts from zero."""

    def __init__(self, measured: float, tolerance: float):
        super().__init__(f"|E(0)| = {measured:.3e} exceeds the compatibility tolerance {tolerance:.3e}")
        self.measured = measured
        self.tolerance = tolerance


class InfeasibleProblemError(ValueError):
    def __init__(self, report: "K1Report"):
        super().__init__("inverse problem is infeasible: " + ", ".join(report.violations))
        self.report = report


class DivergenceError(RuntimeError):
    """The fixed-point iteration did not meet the tolerance within ``max_iter`` steps."""

    def __init__(self, message: str, residual_history: list[float], neumann_bound: float,
                 iteration_bound: int | None):
        super().__init__(message)
        self.residual_history = residual_history
        self.neumann_bound = neumann_bound
        self.iteration_bound = iteration_bound


def time_l2_norm(values: np.ndarray, time_grid: TimeGrid) -> float:
    """Trapezoidal ``L2(0, T)`` norm of samples on the time grid."""
    w = trapezoid_weights(time_grid.cells, time_grid.h)
    return float(np.sqrt(w @ (np.asarray(values, dtype=float) ** 2)))


@dataclass(frozen=True, eq=False)
class InverseProblem:
    """Data of the source-recovery problem.

    ``eta`` must be given in singular representation so its fractional
    derivative and traces are available exactly; the side conditions on
    ``eta`` and the ``psi(0)`` compatibility are reported by :func:`check_K1`
    rather than enforced here.
    """

    coeff: Coefficients
    alpha: float
    beta: float
    time_grid: TimeGrid
    g: SourceFn
    eta: SingularRepresentation
    psi: TimeSeries
    h: SourceFn = zero_source

    def __post_init__(self):
        object.__setattr__(self, "alpha", validate_order(self.alpha, "alpha"))
        object.__setattr__(self, "beta", validate_order(self.beta, "beta", spatial=True))
        if not isinstance(self.eta, SingularRepresentation):
            raise TypeError("eta must be a SingularRepresentation; node-sampled weights are not accepted")
        if self.eta.graph != self.coeff.graph:
            raise ValueError("eta lives on a different graph than the coefficients")
        if self.eta.beta != self.beta:
            raise ValueError(f"eta was built for beta={self.eta.beta}, problem has beta={self.beta}")
        if self.psi.grid != self.time_grid:
            raise ValueError("psi is sampled on a different time grid")

    @property
    def graph(self) -> StarGraph:
        return self.coeff.graph

    def direct(self, source: SourceFn = zero_source) -> DirectProblem:
        return DirectProblem(self.coeff, self.alpha, self.beta, self.time_grid, source)

    @cached_property
    def operator(self) -> SteppingOperator:
        return stepping_operator(self.direct())

    @cached_property
    def g_sampled(self) -> SampledSource:
        return sample_source(self.direct(), self.g)

    @cached_property
    def h_sampled(self) -> SampledSource:
        return sample_source(self.direct(), self.h)

    def g_at(self, m: int) -> GraphSeries:
        t = float(self.time_grid.nodes[m])
        return GraphSeries.sample(self.graph, lambda x, k: self.g(x, t, k))


# ---------------------------------------------------------------------------
# moments and feasibility


def _check_pair(u: SingularRepresentation, eta: SingularRepresentation) -> None:
    if u.graph != eta.graph:
        raise ValueError("u and eta live on different graphs")
    if u.beta != eta.beta:
        raise ValueError("u and eta use different beta")


def overdetermination_moment(u: SingularRepresentation, eta: SingularRepresentation) -> float:
    """``sum_k int eta_k u_k dx`` with the vertex singularities integrated exactly.

    The singular-singular product is integrated in closed form, the mixed
    products with the power-weight rule and the regular product with the
    trapezoid rule.
    """
    _check_pair(u, eta)
    beta = u.beta
    gb = math.gamma(beta)
    ru, re = u.regular_part(), eta.regular_part()
    total = 0.0
    for k, g in enumerate(u.graph.grids):
        w = trapezoid_weights(g.cells, g.h)
        total += w @ (ru.values[k] * re.values[k])
        if u.b != 0.0 or eta.b != 0.0:
            pw = power_weight_quadrature(g, beta - 1.0)
            total += (u.b * (pw @ re.values[k]) + eta.b * (pw @ ru.values[k])) / gb
        if u.b != 0.0 and eta.b != 0.0:
            total += u.b * eta.b * g.length ** (2 * beta - 1) / ((2 * beta - 1) * gb**2)
    return float(total)


def moment_functional(eta: SingularRepresentation) -> np.ndarray:
    """Vector ``v`` with ``v @ u.vector() == overdetermination_moment(u, eta)``."""
    beta = eta.beta
    gb = math.gamma(beta)
    re = eta.regular_part()
    head = 0.0
    blocks = []
    for k, g in enumerate(eta.graph.grids):
        w = trapezoid_weights(g.cells, g.h)
        pw = power_weight_quadrature(g, beta - 1.0)
        J = frac_integral_matrix(g, beta)
        head += (pw @ re.values[k]) / gb + eta.b * g.length ** (2 * beta - 1) / ((2 * beta - 1) * gb**2)
        blocks.append(J.T @ (w * re.values[k] + eta.b * pw / gb))
    return np.concatenate([[head], *blocks])


def compute_g_star(p: InverseProblem) -> TimeSeries:
    """``g*(t_m) = sum_k int eta_k g_k(., t_m) dx`` at every time node."""
    return TimeSeries(p.time_grid, np.array([
        pair_with(p.g_at(m), p.eta) for m in range(p.time_grid.node_count)
    ]))


@dataclass(frozen=True)
class K1Report:
    """Discrete proxies of the feasibility constants.

    ``c``, ``q`` are the max of ``||g(., t)||`` and the min of ``|g*(t)|`` over
    the time nodes ``t_1..t_M`` (the scheme never uses ``t_0``).
    """

    c: float
    m: float
    q: float
    C: float
    p1: float
    p2: float
    feasible: bool
    violations: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "c": self.c, "m": self.m, "q": self.q, "C": self.C, "p1": self.p1, "p2": self.p2,
            "feasible": self.feasible, "violations": list(self.violations),
        }


def _contraction_constant(p1: float, p2: float, m: float, c: float, q: float) -> float:
    if q <= 0:
        return math.inf
    return p2**2 * m**2 * c**2 / (p1 * q**2)


def check_K1(p: InverseProblem, eta_tol: float = 1e-6, psi_tol: float = 1e-8) -> K1Report:
    violations = []
    nt = p.time_grid.node_count
    c = max(graph_l2_norm(p.g_at(j)) for j in range(1, nt))
    m = graph_l2_norm(p.eta.phi)
    gstar = compute_g_star(p).values
    q = float(np.min(np.abs(gstar[1:])))
    eta_scale = graph_l2_norm(p.eta.phi) + abs(p.eta.b)
    if q <= 1e-12 * max(c * eta_scale, 1e-300):
        violations.append("q = 0")
        q = 0.0 if q <= 1e-300 else q
    if m == 0.0:
        violations.append("m = 0")
    boundary = np.abs(p.eta.boundary_residuals())
    if boundary.max() > eta_tol * max(eta_scale, 1.0):
        violations.append("eta boundary condition")
    psi = p.psi.values
    # zero initial data: the moment of the solution at t = 0 is 0
    if abs(psi[0]) > psi_tol * max(float(np.abs(psi).max()), 1.0):
        violations.append("psi compatibility")
    C = _contraction_constant(p.coeff.p1, p.coeff.p2, m, c, q) if "q = 0" not in violations else math.inf
    return K1Report(float(c), float(m), float(q), float(C), p.coeff.p1, p.coeff.p2,
                    not violations, tuple(violations))


# ---------------------------------------------------------------------------
# fixed-point operator


def compute_E(p: InverseProblem, y: DirectSolution, tol: float = 1e-8) -> TimeSeries:
    """``E(t_m) = psi(t_m) - moment(y^m, eta)``; rejects ``|E(0)| > tol * max|psi|``."""
    v = moment_functional(p.eta)
    E = p.psi.values - y.states @ v
    limit = tol * max(float(np.abs(p.psi.values).max()), 1e-300)
    if abs(E[0]) > limit:
        raise CompatibilityError(float(abs(E[0])), limit)
    return TimeSeries(p.time_grid, E)


def _solve_z(f: np.ndarray, p: InverseProblem) -> DirectSolution:
    return solve_direct(p.direct(), operator=p.operator, source=p.g_sampled.scaled(f))


def _energy_functional(p: InverseProblem) -> np.ndarray:
    """Vector ``w`` with ``w @ z.vector() = sum_k trap(gamma_k phi_z phi_eta)``."""
    blocks = [trapezoid_weights(g.cells, g.h) * gam * eta_phi
              for g, gam, eta_phi in zip(p.graph.grids, p.coeff.gamma.values, p.eta.phi.values)]
    return np.concatenate([[0.0], *blocks])


def apply_B(f: TimeSeries | np.ndarray, p: InverseProblem, form: str = "energy",
            g_star: np.ndarray | None = None) -> np.ndarray:
    """``(B f)(t_m)`` on the time grid; entry 0 repeats entry 1.

    ``form="energy"`` pairs ``gamma D^beta z`` with ``D^beta eta``;
    ``form="moment"`` uses the equivalent ``f - d^alpha moment(z) / g*``,
    whose fixed point reproduces the measured moments up to the iteration
    tolerance.
    """
    if form not in B_FORMS:
        raise ValueError(f"form must be one of {B_FORMS}, got {form!r}")
    values = f.values if isinstance(f, TimeSeries) else np.asarray(f, dtype=float)
    if values.shape != (p.time_grid.node_count,):
        raise ValueError(f"f has shape {values.shape}, expected {(p.time_grid.node_count,)}")
    gs = compute_g_star(p).values if g_star is None else g_star
    z = _solve_z(values, p)
    out = np.zeros_like(values)
    if form == "energy":
        out[1:] = (z.states[1:] @ _energy_functional(p)) / gs[1:]
    else:
        mom = z.states @ moment_functional(p.eta)
        dmom = caputo_matrix(p.time_grid, p.alpha) @ mom
        out[1:] = values[1:] - dmom[1:] / gs[1:]
    out[0] = out[1]
    return out


# ---------------------------------------------------------------------------
# Neumann series


def neumann_tail(C: float, alpha: float, T: float, j_max: int = 20_000) -> tuple[np.ndarray, bool]:
    """Partial sums of ``sum_j (sqrt(C) T^alpha)^j / sqrt(Gamma(j alpha + 1))``.

    Summation stops once a term past the peak drops below ``1e-15``; the
    second return value says whether that happened before ``j_max``.
    """
    if not C >= 0 or not math.isfinite(C):
        raise ValueError(f"C must be finite and nonnegative, got {C}")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if C == 0:
        return np.array([1.0]), True
    logx = 0.5 * math.log(C) + alpha * math.log(T)
    sums = []
    total = 0.0
    prev = -math.inf
    for j in range(j_max + 1):
        term = math.exp(j * logx - 0.5 * math.lgamma(j * alpha + 1.0))
        total += term
        sums.append(total)
        if term < 1e-15 and term < prev:
            return np.array(sums), True
        prev = term
    return np.array(sums), False


def _terms(partial_sums: np.ndarray) -> np.ndarray:
    return np.diff(np.concatenate([[0.0], partial_sums]))


def iteration_bound(C: float, alpha: float, T: float, ratio: float, j_max: int = 20_000) -> int | None:
    """Smallest ``K`` with ``sum_{j > K} term_j < ratio``; ``None`` if the series did not converge."""
    sums, converged = neumann_tail(C, alpha, T, j_max)
    if not converged:
        return None
    terms = _terms(sums)
    tails = np.concatenate([np.cumsum(terms[::-1])[::-1][1:], [0.0]])
    hits = np.nonzero(tails < ratio)[0]
    return int(hits[0]) if hits.size else None


# ---------------------------------------------------------------------------
# solver


@dataclass(frozen=True, eq=False)
class InverseSolution:
    f: TimeSeries
    z: DirectSolution = field(repr=False)
    iterations: int
    residual_history: tuple[float, ...]
    neumann_bound: float
    neumann_partial_sums: tuple[float, ...] = field(repr=False)
    iteration_bound: int | None
    overdetermination_residual: float
    source_norm: float
    report: K1Report
    form: str

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual_history": list(self.residual_history),
            "neumann_bound": self.neumann_bound,
            "neumann_partial_sums": list(self.neumann_partial_sums),
            "iteration_bound": self.iteration_bound,
            "overdetermination_residual": self.overdetermination_residual,
            "r_norm": self.source_norm,
            "B_form": self.form,
            "k1": self.report.as_dict(),
        }


def solve_inverse(p: InverseProblem, tol: float = 1e-8, max_iter: int = 200, form: str = "moment",
                  initial: str = "r", compat_tol: float = 1e-8) -> InverseSolution:
    """Fixed-point iteration ``f <- B f + r`` started from ``r`` (or from 0).

    Stops when the increment ``||f_{k+1} - f_k||_{L2(0,T)}`` falls below
    ``tol``. On success the direct problem with source ``f g + h`` is solved
    once more and the largest mismatch with ``psi`` is reported.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if initial not in ("r", "zero"):
        raise ValueError("initial must be 'r' or 'zero'")
    report = check_K1(p)
    if not report.feasible:
        raise InfeasibleProblemError(report)
    tg = p.time_grid
    y = solve_direct(p.direct(), operator=p.operator, source=p.h_sampled)
    E = compute_E(p, y, compat_tol)
    gs = compute_g_star(p).values
    r = np.zeros(tg.node_count)
    r[1:] = (caputo_matrix(tg, p.alpha) @ E.values)[1:] / gs[1:]
    r[0] = r[1]
    r_norm = time_l2_norm(r, tg)

    sums, _ = neumann_tail(report.C, p.alpha, tg.length)
    bound = float(sums[-1])
    K = iteration_bound(report.C, p.alpha, tg.length, tol / r_norm) if r_norm > 0 else 0

    f = r.copy() if initial == "r" else np.zeros_like(r)
    history: list[float] = []
    for k in range(1, max_iter + 1):
        f_next = apply_B(f, p, form, gs) + r
        inc = time_l2_norm(f_next - f, tg)
        history.append(inc)
        f = f_next
        if not math.isfinite(inc):
            break
        if inc < tol:
            u = solve_direct(p.direct(), operator=p.operator,
                             source=p.g_sampled.scaled(f) + p.h_sampled)
            moments = u.states @ moment_functional(p.eta)
            resid = float(np.max(np.abs(moments - p.psi.values)))
            log.info("inverse: converged in %d iterations, residual %.3e", k, resid)
            return InverseSolution(
                TimeSeries(tg, f), u, k, tuple(history), bound, tuple(float(s) for s in sums),
                K, resid, r_norm, report, form,
            )
    raise DivergenceError(
        f"fixed-point iteration did not reach tol={tol:g} in {len(history)} iterations "
        f"(last increment {history[-1]:.3e}, Neumann bound {bound:.3e})",
        history, bound, K,
    )
