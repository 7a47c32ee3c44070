"""Manufactured solutions, refined-grid oracles and convergence studies.

Manufactured spatial profiles are built from ``g_k = gamma_k * phi_k`` chosen
as a polynomial in ``(l_k - x)``, so that ``L U`` has a closed form. The
regular part ``I^beta phi_k`` is evaluated by adaptive quadrature with the
algebraic weight, independently of the product rule used by the solver.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
from scipy import integrate

from . import fracops
from .direct import DirectProblem, DirectSolution, SourceFn, TimeGrid, TimeSeries, sample_source, solve_direct
from .fracops import Series, Side, UniformGrid, trapezoid_weights
from .graph import Coefficients, GraphSeries, StarGraph
from .spatial import SingularRepresentation, apply_L, pair_with, singular_profile

if TYPE_CHECKING:
    from .inverse import InverseProblem

__all__ = [
    "SpatialProfile",
    "manufactured_profile",
    "ManufacturedDirect",
    "manufactured_direct",
    "relative_error",
    "ManufacturedInverse",
    "manufactured_inverse",
    "synthesize_psi",
    "direct_family",
    "manufactured_run",
    "smooth_eta",
    "ConvergenceTable",
    "convergence_study",
    "refined_oracle",
    "Check",
    "operator_checks",
    "semigroup_error",
    "inversion_error",
    "adjointness_residual",
    "green_residual",
    "time_ibp_residual",
    "smooth_random_function",
]

GammaFn = Callable[[np.ndarray, int], np.ndarray]


def _quad(fn, a: float, b: float, **kw) -> float:
    val, _ = integrate.quad(fn, a, b, limit=200, epsabs=1e-14, epsrel=1e-13, **kw)
    return val


@dataclass(frozen=True, eq=False)
class SpatialProfile:
    """Continuous conforming function ``U_k = b x^(beta-1)/Gamma(beta) + I^beta phi_k``.

    ``gamma_k phi_k = sum_j c[k, j] (l_k - x)^(j+1) + a_k``; the constants ``b``
    and ``a_k`` make the boundary and flux conditions hold exactly.
    """

    lengths: tuple[float, ...]
    gamma: GammaFn
    beta: float
    poly: np.ndarray
    a: np.ndarray
    b: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def g(self, x: np.ndarray, k: int) -> np.ndarray:
        s = self.lengths[k] - np.asarray(x, dtype=float)
        out = np.full_like(s, self.a[k])
        for j, c in enumerate(self.poly[k]):
            out = out + c * s ** (j + 1)
        return out

    def phi(self, x: np.ndarray, k: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.g(x, k) / self.gamma(x, k)

    def L(self, x: np.ndarray, k: int) -> np.ndarray:
        """Closed-form right Caputo derivative of ``g_k``."""
        s = np.maximum(self.lengths[k] - np.asarray(x, dtype=float), 0.0)
        out = np.zeros_like(s)
        for j, c in enumerate(self.poly[k]):
            p = j + 1
            out = out + c * math.gamma(p + 1) / math.gamma(p + 1 - self.beta) * s ** (p - self.beta)
        return out

    def regular(self, x: np.ndarray, k: int) -> np.ndarray:
        """``I^beta phi_k`` by adaptive quadrature (cached per node array)."""
        x = np.asarray(x, dtype=float)
        key = ("regular", k, x.tobytes())
        if key not in self._cache:
            gb = math.gamma(self.beta)
            vals = np.array([
                0.0 if xi <= 0 else
                _quad(lambda t: float(self.phi(np.array([t]), k)[0]), 0.0, xi,
                      weight="alg", wvar=(0.0, self.beta - 1.0)) / gb
                for xi in x
            ])
            vals.flags.writeable = False
            self._cache[key] = vals
        return self._cache[key]

    def values(self, x: np.ndarray, k: int) -> np.ndarray:
        """``U_k`` at ``x``; the singular term is dropped at ``x = 0``."""
        return self.regular(x, k) + self.b * singular_profile(np.asarray(x, dtype=float), self.beta)

    def representation(self, graph: StarGraph) -> SingularRepresentation:
        return SingularRepresentation(
            self.beta, self.b, GraphSeries.sample(graph, self.phi)
        )

    def boundary_residuals(self) -> np.ndarray:
        """Continuous ``b + int phi_k`` (quadrature)."""
        return np.array([
            self.b + _quad(lambda t: float(self.phi(np.array([t]), k)[0]), 0.0, l)
            for k, l in enumerate(self.lengths)
        ])

    def flux_residual(self) -> float:
        return float(sum(self.g(np.array([0.0]), k)[0] for k in range(len(self.lengths))))


def manufactured_profile(lengths: Sequence[float], gamma: GammaFn, beta: float,
                         seed: int | None = 0, degree: int = 3, scale: float = 1.0) -> SpatialProfile:
    """Random conforming profile; ``seed=None`` gives the zero profile."""
    beta = fracops.validate_order(beta, "beta", spatial=True)
    lengths = tuple(float(l) for l in lengths)
    n = len(lengths)
    if seed is None:
        return SpatialProfile(lengths, gamma, beta, np.zeros((n, degree)), np.zeros(n), 0.0)
    rng = np.random.default_rng(seed)
    poly = scale * rng.uniform(-1.0, 1.0, size=(n, degree))
    inv = np.array([_quad(lambda t: 1.0 / float(gamma(np.array([t]), k)[0]), 0.0, l)
                    for k, l in enumerate(lengths)])
    base = SpatialProfile(lengths, gamma, beta, poly, np.zeros(n), 0.0)
    rhs = np.zeros(n + 1)
    rhs[0] = -sum(base.g(np.array([0.0]), k)[0] for k in range(n))
    for k, l in enumerate(lengths):
        rhs[k + 1] = -_quad(lambda t: float(base.phi(np.array([t]), k)[0]), 0.0, l)
    P = np.zeros((n + 1, n + 1))
    P[0, 1:] = 1.0
    P[1:, 0] = 1.0
    P[np.arange(1, n + 1), np.arange(1, n + 1)] = inv
    mu = np.linalg.solve(P, rhs)
    profile = SpatialProfile(lengths, gamma, beta, poly, mu[1:], float(mu[0]))
    if not np.any(profile.poly) and profile.b == 0.0:
        raise ValueError("seed produced an identically zero profile")
    return profile


@dataclass(frozen=True, eq=False)
class ManufacturedDirect:
    """Exact solution ``u = t^sigma U(x)`` and its assembled source."""

    problem: DirectProblem
    profile: SpatialProfile
    sigma: float

    def time_factor(self, t):
        return np.asarray(t, dtype=float) ** self.sigma

    def caputo_time_factor(self, t):
        s, a = self.sigma, self.problem.alpha
        return math.gamma(s + 1) / math.gamma(s + 1 - a) * np.asarray(t, dtype=float) ** (s - a)

    def source(self, x: np.ndarray, t: float, k: int) -> np.ndarray:
        """Regular part of the source at every node."""
        return self.caputo_time_factor(t) * self.profile.regular(x, k) + self.time_factor(t) * self.profile.L(x, k)

    def singular_source(self, t: float) -> float:
        """Coefficient of ``x^(beta-1)/Gamma(beta)`` in the source."""
        return float(self.caputo_time_factor(t)) * self.profile.b

    def exact_values(self, graph: StarGraph) -> GraphSeries:
        return GraphSeries.sample(graph, self.profile.values)


def manufactured_direct(coeff: Coefficients, alpha: float, beta: float, time_grid: TimeGrid,
                        sigma: float = 2.0, spatial_seed: int | None = 0) -> ManufacturedDirect:
    if sigma < 2:
        raise ValueError("sigma must be >= 2 to keep L1 at full order")
    if coeff.fn is None:
        raise ValueError("manufactured solutions need coefficients built from a function")
    graph = coeff.graph
    profile = manufactured_profile(graph.lengths, coeff.fn, beta, spatial_seed)
    base = DirectProblem(coeff, alpha, beta, time_grid)
    md = ManufacturedDirect(base, profile, float(sigma))
    return ManufacturedDirect(base.with_source(md.source, md.singular_source), profile, float(sigma))


def relative_error(sol: DirectSolution, md: ManufacturedDirect) -> float:
    """Relative discrete L2(G_T) error at the collocation nodes (vertex node excluded)."""
    p = sol.problem
    exact_nodes = md.exact_values(p.graph).flat()[sol.operator.collocation]
    w = np.concatenate([trapezoid_weights(g.cells, g.h)[1:] for g in p.graph.grids])
    tw = trapezoid_weights(p.time_grid.cells, p.time_grid.h)
    tau = md.time_factor(p.time_grid.nodes)
    exact = tau[:, None] * exact_nodes[None, :]
    err = sol.collocated - exact
    num = tw @ ((err**2) @ w)
    den = tw @ ((exact**2) @ w)
    if den == 0:
        return float(np.sqrt(num))
    return float(np.sqrt(num / den))


# ---------------------------------------------------------------------------
# inverse problem instances


def smooth_eta(graph: StarGraph, beta: float, b: float = 1.0, wiggle: float = 0.3) -> SingularRepresentation:
    """Weight ``eta`` with ``I^{1-beta} eta_k(x) = b (1 - x/l_k) + small periodic term``.

    ``phi_k = -b/l_k + wiggle cos(2 pi x / l_k)`` has exactly zero trapezoid
    integral for its periodic part, so the boundary rows hold on every grid.
    """
    def phi(x, k):
        l = graph.lengths[k]
        return -b / l + wiggle * np.cos(2.0 * np.pi * x / l + 0.0 * k)
    return SingularRepresentation(beta, b, GraphSeries.sample(graph, phi))


@dataclass(frozen=True, eq=False)
class ManufacturedInverse:
    problem: "InverseProblem"
    f_true: TimeSeries
    reference: DirectSolution = field(repr=False)


def synthesize_psi(coeff: Coefficients, alpha: float, beta: float, time_grid: TimeGrid,
                   g: SourceFn, eta_builder: Callable[[StarGraph], SingularRepresentation],
                   f_true: Callable[[np.ndarray], np.ndarray], refinement: int = 2,
                   h: SourceFn | None = None) -> tuple[TimeSeries, DirectSolution]:
    """Measurements ``psi(t_m)`` from a direct solve refined ``refinement`` times in space and time.

    The source is ``f_true(t) g + h``; ``eta_builder`` rebuilds the weight on
    the refined graph so its representation is exact there as well.
    """
    if coeff.fn is None:
        raise ValueError("synthetic data need coefficients built from a function")
    r = int(refinement)
    fine_graph = coeff.graph.refine(r)
    fine_coeff = Coefficients.from_function(fine_graph, coeff.fn)
    fine_time = time_grid.refine(r)
    f_fine = np.asarray(f_true(fine_time.nodes), dtype=float) * np.ones(fine_time.node_count)
    problem = DirectProblem(fine_coeff, alpha, beta, fine_time)
    source = sample_source(problem, g).scaled(f_fine)
    if h is not None:
        source = source + sample_source(problem, h)
    ref = solve_direct(problem, source=source)
    from .inverse import moment_functional

    psi = ref.states[::r] @ moment_functional(eta_builder(fine_graph))
    return TimeSeries(time_grid, psi), ref


def manufactured_inverse(coeff: Coefficients, alpha: float, beta: float, time_grid: TimeGrid,
                         f_true: Callable[[np.ndarray], np.ndarray], spatial_seed: int = 0,
                         refinement: int = 2, eta_b: float = 1.0) -> ManufacturedInverse:
    """Consistent instance of the inverse problem with known amplitude ``f_true``.

    ``g_k(x, t) = G_k(x)`` is a random positive profile, ``h = 0``, and
    ``psi`` comes from :func:`synthesize_psi`. If the instance fails the
    feasibility check, ``G`` is shifted upwards and the instance rebuilt.
    """
    from .inverse import InverseProblem, check_K1

    rng = np.random.default_rng(spatial_seed)
    graph = coeff.graph
    n = graph.edge_count
    amp = rng.uniform(0.1, 0.4, size=n)
    phase = rng.uniform(0.0, np.pi, size=n)

    for shift in (1.0, 2.0, 4.0, 8.0):
        def G(x, t, k, shift=shift):
            l = graph.lengths[k]
            return shift + amp[k] * np.sin(np.pi * np.asarray(x) / l + phase[k])

        psi, ref = synthesize_psi(coeff, alpha, beta, time_grid, G,
                                  lambda gr: smooth_eta(gr, beta, eta_b), f_true, refinement)
        problem = InverseProblem(coeff, alpha, beta, time_grid, G, eta=smooth_eta(graph, beta, eta_b), psi=psi)
        if check_K1(problem).feasible:
            f_vals = np.asarray(f_true(time_grid.nodes), dtype=float) * np.ones(time_grid.node_count)
            return ManufacturedInverse(problem, TimeSeries(time_grid, f_vals), ref)
    raise ValueError("could not generate a feasible manufactured instance")


# ---------------------------------------------------------------------------
# convergence studies


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows ``(N, M, error, observed_order)``; the first order is ``None``."""

    levels: tuple[tuple[int, int, float, float | None], ...]

    @property
    def errors(self) -> np.ndarray:
        return np.array([lv[2] for lv in self.levels])

    @property
    def orders(self) -> list[float | None]:
        return [lv[3] for lv in self.levels]

    @property
    def monotone(self) -> bool:
        e = self.errors
        return bool(np.all(e[1:] <= e[:-1]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["N", "M", "error", "order"])
        for N, M, err, order in self.levels:
            writer.writerow([N, M, repr(float(err)), "n/a" if order is None else repr(float(order))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConvergenceTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(tuple(
            (int(r["N"]), int(r["M"]), float(r["error"]), None if r["order"] == "n/a" else float(r["order"]))
            for r in rows
        ))


def convergence_study(family: Callable[[int, int], float], levels: Sequence[tuple[int, int]]) -> ConvergenceTable:
    """Evaluate ``family(N, M) -> error`` on each level; orders are ``log2(e_prev / e)``."""
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    rows = []
    prev = None
    for N, M in levels:
        err = float(family(int(N), int(M)))
        if err < 0 or not math.isfinite(err):
            raise ValueError(f"invalid error {err} at level {(N, M)}")
        order = None
        if prev is not None and prev > 0 and err > 0:
            order = math.log2(prev / err)
        rows.append((int(N), int(M), err, order))
        prev = err
    return ConvergenceTable(tuple(rows))


def manufactured_run(profile: SpatialProfile, alpha: float, N: int, M: int, T: float = 1.0,
                     sigma: float = 2.0) -> tuple[DirectSolution, ManufacturedDirect]:
    """Solve the manufactured direct problem for ``profile`` with ``N`` cells per edge and ``M`` steps."""
    graph = StarGraph.uniform(profile.lengths, N)
    coeff = Coefficients.from_function(graph, profile.gamma)
    base = DirectProblem(coeff, alpha, profile.beta, UniformGrid(T, M))
    md = ManufacturedDirect(base, profile, sigma)
    md = ManufacturedDirect(base.with_source(md.source, md.singular_source), profile, sigma)
    return solve_direct(md.problem), md


def direct_family(lengths: Sequence[float], gamma: GammaFn, alpha: float, beta: float,
                  T: float = 1.0, sigma: float = 2.0, seed: int | None = 0) -> Callable[[int, int], float]:
    """``(N, M) -> relative error`` of the manufactured direct problem; the profile is shared."""
    profile = manufactured_profile(lengths, gamma, beta, seed)

    def run(N: int, M: int) -> float:
        return relative_error(*manufactured_run(profile, alpha, N, M, T, sigma))

    return run


# ---------------------------------------------------------------------------
# refined-grid oracle


def refined_oracle(op_name: str, refinement: int, **inputs):
    """Re-evaluate an operator on a grid refined by ``refinement`` and restrict to the coarse nodes.

    ``frac_integral`` / ``caputo_derivative``: ``fn``, ``grid``, ``mu``, ``side``.
    ``singular_quadrature``: ``fn``, ``grid``, ``beta``.
    ``apply_L``: ``graph``, ``gamma`` (callable), ``phi`` (callable), ``beta``; ``b`` is irrelevant.
    """
    r = int(refinement)
    if r < 1:
        raise ValueError("refinement must be a positive integer")
    if op_name in ("frac_integral", "caputo_derivative"):
        grid: UniformGrid = inputs["grid"]
        fine = grid.refine(r)
        f = Series.sample(fine, inputs["fn"])
        op = fracops.frac_integral if op_name == "frac_integral" else fracops.caputo_derivative
        out = op(f, inputs["mu"], inputs.get("side", Side.LEFT))
        return Series(grid, out.values[::r])
    if op_name == "singular_quadrature":
        fine = inputs["grid"].refine(r)
        return fracops.singular_quadrature(Series.sample(fine, inputs["fn"]), inputs["beta"])
    if op_name == "apply_L":
        graph: StarGraph = inputs["graph"]
        fine = graph.refine(r)
        coeff = Coefficients.from_function(fine, inputs["gamma"])
        u = SingularRepresentation(inputs["beta"], inputs.get("b", 0.0), GraphSeries.sample(fine, inputs["phi"]))
        Lu = apply_L(u, coeff)
        return GraphSeries(graph, tuple(v[::r] for v in Lu.values))
    raise ValueError(f"no refined oracle for {op_name!r}")


# ---------------------------------------------------------------------------
# operator property checks


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {"value": self.value, "tolerance": self.tolerance, "passed": self.passed}


def smooth_random_function(rng: np.random.Generator, length: float, terms: int = 4) -> Callable[[np.ndarray], np.ndarray]:
    """Random low-frequency trigonometric polynomial on ``[0, length]``."""
    a = rng.normal(size=terms)
    b = rng.normal(size=terms)
    c0 = rng.normal()

    def f(x):
        s = np.asarray(x, dtype=float) / length
        out = np.full_like(s, c0)
        for j in range(terms):
            out = out + (a[j] * np.cos(np.pi * (j + 1) * s) + b[j] * np.sin(np.pi * (j + 1) * s)) / (j + 1)
        return out

    return f


def _rel(a: np.ndarray, b: np.ndarray, grid: UniformGrid) -> float:
    w = trapezoid_weights(grid.cells, grid.h)
    den = math.sqrt(w @ (b * b))
    return math.sqrt(w @ ((a - b) ** 2)) / den if den > 0 else math.sqrt(w @ ((a - b) ** 2))


def semigroup_error(f: Series, mu1: float, mu2: float, side: Side | str = Side.LEFT) -> float:
    """Relative L2 gap between ``I^mu1 I^mu2 f`` and ``I^(mu1+mu2) f``."""
    lhs = fracops.frac_integral(fracops.frac_integral(f, mu2, side), mu1, side).values
    rhs = fracops.frac_integral(f, mu1 + mu2, side).values
    return _rel(lhs, rhs, f.grid)


def inversion_error(f: Series, mu: float, side: Side | str = Side.LEFT) -> float:
    """Relative L2 gap between ``d^mu I^mu f`` and ``f``.

    Meaningful for ``f`` vanishing at the start of the integral (``f(0) = 0``
    on the left, ``f(l) = 0`` on the right); otherwise the ``t^mu`` term of
    ``I^mu f`` meets the O(1) local defect of L1 next to that endpoint.
    """
    back = fracops.caputo_derivative(fracops.frac_integral(f, mu, side), mu, side).values
    return _rel(back, f.values, f.grid)


def adjointness_residual(graph: StarGraph, coeff: Coefficients, profile: SpatialProfile,
                         eta: SingularRepresentation) -> float:
    """``|sum int eta L u - sum int gamma D^beta u D^beta eta|`` for a conforming ``u``."""
    u = profile.representation(graph)
    lhs = pair_with(apply_L(u, coeff), eta)
    rhs = sum(
        trapezoid_weights(g.cells, g.h) @ (gam * pu * pe)
        for g, gam, pu, pe in zip(graph.grids, coeff.gamma.values, u.phi.values, eta.phi.values)
    )
    return abs(lhs - rhs)


def green_residual(graph: StarGraph, coeff: Coefficients, first: SpatialProfile,
                   second: SpatialProfile) -> float:
    """``|sum int (L y) w - sum int y (L w)|`` for two conforming profiles.

    For functions meeting the vertex, flux and boundary conditions every
    boundary term of the fractional Green formula cancels across the edges.
    """
    y, w = first.representation(graph), second.representation(graph)
    return abs(pair_with(apply_L(y, coeff), w) - pair_with(apply_L(w, coeff), y))


def time_ibp_residual(f: Series, g: Series, alpha: float) -> float:
    """Residual of ``int D^a f g = int f d^a_{t,T} g + [g I^(1-a) f]_0^T`` on the grid."""
    grid = f.grid
    w = trapezoid_weights(grid.cells, grid.h)
    D = fracops.rl_derivative_left(f, alpha).values
    dg = fracops.caputo_derivative(g, alpha, Side.RIGHT).values
    I = fracops.frac_integral(f, 1.0 - alpha).values
    boundary = g.values[-1] * I[-1] - g.values[0] * I[0]
    return abs(w @ (D * g.values) - w @ (f.values * dg) - boundary)


def operator_checks(graph: StarGraph, coeff: Coefficients, beta: float, seed: int = 0,
                    samples: int = 5) -> list[Check]:
    """Property checks on the discrete operators.

    The one-dimensional identities run on a grid with at least 512 cells (the
    resolution their tolerances refer to); the graph checks use ``graph``.
    """
    from .spatial import det_P_closed_form, invert_L, _vertex_matrix

    rng = np.random.default_rng(seed)
    grid = UniformGrid(graph.grids[0].length, max(512, graph.grids[0].cells))
    checks = []
    semi = inv = 0.0
    bound = 0.0
    const_zero = True
    for _ in range(samples):
        fn = smooth_random_function(rng, grid.length)
        f = Series.sample(grid, fn)
        for side, anchor in ((Side.LEFT, 0.0), (Side.RIGHT, grid.length)):
            semi = max(semi, semigroup_error(f, 0.3, 0.4, side))
            # the inversion identity needs f to vanish where the integral starts
            anchored = Series.sample(grid, lambda x: fn(x) - fn(anchor))
            inv = max(inv, inversion_error(anchored, 0.5, side))
            for a in (0.3, 0.5, 0.8):
                val = fracops.frac_integral(f, a, side).l2_norm()
                bound = max(bound, val / (grid.length**a / math.gamma(a + 1) * f.l2_norm()))
        c = Series(grid, np.full(grid.node_count, rng.normal()))
        for side in (Side.LEFT, Side.RIGHT):
            const_zero &= bool(np.all(fracops.caputo_derivative(c, 0.5, side).values == 0.0))
    checks.append(Check("semigroup", semi, 0.02, semi <= 0.02))
    checks.append(Check("inversion", inv, 0.02, inv <= 0.02))
    checks.append(Check("caputo_of_constant", 0.0 if const_zero else 1.0, 0.0, const_zero))
    checks.append(Check("integral_bound", bound, 1.02, bound <= 1.02))

    det = float(np.linalg.det(_vertex_matrix(coeff)))
    closed = det_P_closed_form(coeff)
    rel = abs(det - closed) / abs(closed)
    checks.append(Check("vertex_determinant", rel, 1e-10, rel <= 1e-10))

    worst = 0.0
    for _ in range(samples):
        omega = GraphSeries.sample(graph, lambda x, k: smooth_random_function(rng, graph.lengths[k])(x))
        back = apply_L(invert_L(omega, coeff, beta), coeff)
        num = sum(float(np.sum((b[:-1] - o[:-1]) ** 2 * trapezoid_weights(g.cells, g.h)[:-1]))
                  for g, b, o in zip(graph.grids, back.values, omega.values))
        den = sum(float(np.sum(o[:-1] ** 2 * trapezoid_weights(g.cells, g.h)[:-1]))
                  for g, o in zip(graph.grids, omega.values))
        worst = max(worst, math.sqrt(num / den))
    checks.append(Check("L_inversion", worst, 1e-2, worst <= 1e-2))

    if coeff.fn is not None:
        profile = manufactured_profile(graph.lengths, coeff.fn, beta, seed)
        res = [adjointness_residual(gr, Coefficients.from_function(gr, coeff.fn), profile, smooth_eta(gr, beta))
               for gr in (graph, graph.refine(2))]
        ratio = res[0] / res[1] if res[1] > 0 else math.inf
        checks.append(Check("adjointness_refinement_ratio", ratio, 1.5, ratio >= 1.5))
    return checks
