"""Worked examples with known values, one test per example, grouped by module."""

import json
import math
from pathlib import Path

import numpy as np
import numpy.testing as npt
import pytest
from scipy import integrate

from fracgraph.cli import main, read_field
from fracgraph.config import ConfigError, parse_config
from fracgraph.direct import DirectProblem, TimeSeries, alikhanov_margins, energy_monitor, solve_direct
from fracgraph.expr import eval_expression
from fracgraph.fracops import Series, UniformGrid, caputo_derivative, rl_derivative_left, singular_quadrature
from fracgraph.graph import Coefficients, GraphSeries, StarGraph, graph_inner, graph_l2_norm, integrate_graph
from fracgraph.inverse import (
    CompatibilityError,
    InverseProblem,
    _contraction_constant,
    apply_B,
    check_K1,
    compute_E,
    compute_g_star,
    moment_functional,
    neumann_tail,
    overdetermination_moment,
    solve_inverse,
)
from fracgraph.spatial import (
    SingularRepresentation,
    _vertex_matrix,
    apply_L,
    assemble_stepping,
    assemble_vertex_system,
    invert_L,
    node_values,
    stepping_solve,
)
from fracgraph.verify import convergence_study, manufactured_direct, manufactured_inverse, smooth_eta

from conftest import smooth_gamma

CONFIGS = Path(__file__).parent.parent / "configs"
UNIT2 = (1.0, 1.0)


def ones(graph):
    return GraphSeries.sample(graph, lambda x, k: np.ones_like(x))


# -- fracops ---------------------------------------------------------------


def test_rl_derivative_of_constant():
    g = UniformGrid(1.0, 512)
    out = rl_derivative_left(Series(g, np.ones(513)), 0.5).values[-1]
    assert out == pytest.approx(0.5641895835, rel=2e-3)


def test_rl_derivative_annihilates_power_under_refinement():
    mu = 0.6
    peaks = []
    for N in (400, 1600, 6400):
        g = UniformGrid(1.0, N)
        v = np.zeros(N + 1)
        v[1:] = g.nodes[1:] ** (mu - 1)
        peaks.append(np.abs(rl_derivative_left(Series(g, v), mu).values[N // 4:-1]).max())
    assert peaks[0] > peaks[1] > peaks[2]
    assert peaks[2] < 0.02


def test_rl_matches_caputo_when_start_value_vanishes():
    g = UniformGrid(1.0, 512)
    f = Series.sample(g, lambda t: t)
    rl = rl_derivative_left(f, 0.5).values[-1]
    assert rl == pytest.approx(caputo_derivative(f, 0.5).values[-1], rel=1e-4)
    assert rl == pytest.approx(1.1283791671, rel=1e-4)


def test_singular_quadrature_sine_reference():
    ref, _ = integrate.quad(lambda x: x**-0.4 * np.sin(x), 0, 1, points=[1e-6, 1e-3], limit=1000)
    g = UniformGrid(1.0, 2048)
    assert singular_quadrature(Series.sample(g, np.sin), 0.6) == pytest.approx(ref, abs=1e-6)


# -- graph -----------------------------------------------------------------


def test_graph_integrals():
    g3 = StarGraph.uniform((1.0, 2.0, 3.0), 4)
    assert integrate_graph(ones(g3)) == 6.0
    assert integrate_graph(GraphSeries.zeros(g3)) == 0.0
    g2 = StarGraph.uniform(UNIT2, 4)
    assert integrate_graph(GraphSeries.sample(g2, lambda x, k: x)) == 1.0
    assert graph_l2_norm(ones(g2)) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert graph_l2_norm(GraphSeries.zeros(g2)) == 0.0
    assert graph_inner(ones(g2), 2.0 * ones(g2)) == pytest.approx(4.0, rel=1e-15)
    signs = GraphSeries.sample(g2, lambda x, k: np.full_like(x, 1.0 - 2.0 * k))
    assert graph_inner(signs, ones(g2)) == 0.0


# -- spatial ---------------------------------------------------------------


def test_node_values_examples():
    g = StarGraph.uniform(UNIT2, 64)
    assert np.all(node_values(SingularRepresentation.zeros(g, 0.75)).flat() == 0.0)
    u = SingularRepresentation(0.75, math.gamma(0.75), GraphSeries.zeros(g))
    npt.assert_allclose(node_values(u).values[0][1:], g.grids[0].nodes[1:] ** -0.25, rtol=1e-14)
    v = SingularRepresentation(0.75, 0.0, ones(g))
    # x^beta / Gamma(beta + 1) at x = 1
    assert node_values(v).values[0][-1] == pytest.approx(1.0880652521, rel=1e-9)
    assert node_values(v).values[0][-1] == pytest.approx(1.0 / math.gamma(1.75), rel=1e-14)


def test_apply_L_examples():
    g = StarGraph.uniform(UNIT2, 512)
    coeff = Coefficients.constant(g)
    u = SingularRepresentation(0.75, 3.0, GraphSeries.zeros(g))
    assert np.all(apply_L(u, coeff).flat() == 0.0)
    lin = SingularRepresentation(0.75, 0.0, GraphSeries.sample(g, lambda x, k: 1.0 - x))
    assert apply_L(lin, coeff).values[0][0] == pytest.approx(1.1033049847, rel=1e-3)


def test_vertex_system_homogeneous():
    g = StarGraph.uniform((1.0, 0.8, 1.2), 16)
    sys = assemble_vertex_system(GraphSeries.zeros(g), Coefficients.from_function(g, smooth_gamma), 0.75)
    assert np.all(sys.M == 0.0)
    assert np.all(sys.solve() == 0.0)


@pytest.mark.parametrize("lengths, value, expected", [
    ((1.0, 1.0), 1.0, -2.0),
    ((2.0, 2.0, 2.0), 2.0, -3.0),
])
def test_determinant_examples(lengths, value, expected):
    coeff = Coefficients.constant(StarGraph.uniform(lengths, 8), value)
    assert np.linalg.det(_vertex_matrix(coeff)) == pytest.approx(expected, rel=1e-13)


def test_determinant_mixed_coefficients():
    g = StarGraph.uniform((1.0, 2.0), 8)
    coeff = Coefficients.from_function(g, lambda x, k: np.full_like(x, 1.0 + k))
    assert np.linalg.det(_vertex_matrix(coeff)) == pytest.approx(-2.0, rel=1e-13)


def test_invert_L_examples():
    g = StarGraph.uniform(UNIT2, 32)
    coeff = Coefficients.constant(g)
    w = invert_L(GraphSeries.zeros(g), coeff, 0.75)
    assert w.b == 0.0 and np.all(w.phi.flat() == 0.0)
    sym = GraphSeries.sample(g, lambda x, k: np.cos(x))
    w = invert_L(sym, coeff, 0.75)
    npt.assert_allclose(w.phi.values[0], w.phi.values[1], rtol=0, atol=1e-14)


def test_stepping_examples():
    g = StarGraph.uniform(UNIT2, 4)
    op = assemble_stepping(1.0, Coefficients.constant(g), 0.75)
    assert op.dimension == 11
    # the integrated system also carries one free constant per edge
    assert op.matrix.shape == (13, 13)
    zero = stepping_solve(op, GraphSeries.zeros(g))
    assert zero.b == 0.0 and np.all(zero.phi.flat() == 0.0)

    g = StarGraph.uniform(UNIT2, 256)
    d = 1e8
    op = assemble_stepping(d, Coefficients.constant(g), 0.75)
    r = GraphSeries.sample(g, lambda x, k: 1.0 + np.sin(3 * x + k))
    u = node_values(stepping_solve(op, r))
    # away from the vertex and from the boundary layer at x = l
    for uv, rv in zip(u.values, r.values):
        npt.assert_allclose(uv[16:200] * d, rv[16:200], rtol=1e-3)


# -- direct ----------------------------------------------------------------


def test_zero_solution_monitors():
    g = StarGraph.uniform(UNIT2, 8)
    sol = solve_direct(DirectProblem(Coefficients.constant(g), 0.5, 0.75, UniformGrid(1.0, 8)))
    lhs, rhs = energy_monitor(sol)
    assert np.all(lhs.values == 0.0) and np.all(rhs.values == 0.0)
    assert np.all(alikhanov_margins(sol) == 0.0)


# -- inverse ---------------------------------------------------------------


def test_g_star_of_constant_source():
    # phi = Gamma(beta + 2) gives I^beta phi = (beta + 1) x^beta with unit mean on each unit edge
    beta = 0.75
    g = StarGraph.uniform(UNIT2, 1024)
    eta = SingularRepresentation(beta, 0.0, GraphSeries.sample(g, lambda x, k: np.full_like(x, math.gamma(beta + 2))))
    tg = UniformGrid(1.0, 4)
    p = InverseProblem(Coefficients.constant(g), 0.5, beta, tg, lambda x, t, k: np.full_like(x, 2.0), eta,
                       TimeSeries(tg, np.zeros(5)))
    npt.assert_allclose(compute_g_star(p).values, 4.0, rtol=1e-5)
    q = InverseProblem(p.coeff, 0.5, beta, tg, lambda x, t, k: np.zeros_like(x), eta, p.psi)
    assert np.all(compute_g_star(q).values == 0.0)
    assert "q = 0" in check_K1(q).violations


def test_contraction_constant_example():
    assert _contraction_constant(1.0, 1.0, 1.0, 1.0, 2.0) == 0.25


def test_moment_examples():
    beta = 0.75
    g = StarGraph.uniform(UNIT2, 16)
    rng = np.random.default_rng(0)
    a = GraphSeries.from_flat(g, rng.normal(size=g.total_nodes))
    b = GraphSeries.from_flat(g, rng.normal(size=g.total_nodes))
    u, e = SingularRepresentation(beta, 0.0, a), SingularRepresentation(beta, 0.0, b)
    assert overdetermination_moment(u, e) == pytest.approx(graph_inner(u.regular_part(), e.regular_part()), rel=1e-13)
    s = SingularRepresentation(beta, 1.0, GraphSeries.zeros(g))
    per_edge = overdetermination_moment(s, s) / 2
    assert per_edge == pytest.approx(1.0 / (0.5 * math.gamma(0.75) ** 2), rel=1e-12)
    ref, _ = integrate.quad(lambda x: 1.0, 0, 1, weight="alg", wvar=(2 * beta - 2, 0.0))
    assert per_edge == pytest.approx(ref / math.gamma(beta) ** 2, rel=1e-8)


@pytest.fixture(scope="module")
def small_inverse():
    g = StarGraph.uniform((1.0, 0.8, 1.2), 16)
    c = Coefficients.from_function(g, smooth_gamma)
    return manufactured_inverse(c, 0.5, 0.75, UniformGrid(1.0, 16), lambda t: 1.0 + t)


def test_E_examples(small_inverse):
    p = small_inverse.problem
    h = lambda x, t, k: t * np.cos(x)  # noqa: E731
    q = InverseProblem(p.coeff, p.alpha, p.beta, p.time_grid, p.g, p.eta, p.psi, h)
    y = solve_direct(q.direct(h), operator=q.operator)
    matched = InverseProblem(q.coeff, q.alpha, q.beta, q.time_grid, q.g, q.eta,
                             TimeSeries(q.time_grid, y.states @ moment_functional(q.eta)), h)
    assert np.abs(compute_E(matched, y).values).max() < 1e-14
    bad = matched.psi.values.copy()
    bad[0] = 1.0
    with pytest.raises(CompatibilityError):
        compute_E(InverseProblem(q.coeff, q.alpha, q.beta, q.time_grid, q.g, q.eta,
                                 TimeSeries(q.time_grid, bad), h), y)
    sol = solve_inverse(matched)
    assert sol.iterations == 1 and np.all(sol.f.values == 0.0)


def test_B_of_zero(small_inverse):
    for form in ("energy", "moment"):
        assert np.all(apply_B(np.zeros(17), small_inverse.problem, form) == 0.0)


def test_neumann_examples():
    assert neumann_tail(0.0, 0.5, 2.0)[0].tolist() == [1.0]
    sums, ok = neumann_tail(1.0, 1.0, 1.0)
    direct = sum(1.0 / math.sqrt(math.factorial(j)) for j in range(60))
    assert ok and sums[-1] == pytest.approx(direct, rel=1e-14)


# -- verify ----------------------------------------------------------------


def test_zero_manufactured_cases():
    g = StarGraph.uniform((1.0, 0.8, 1.2), 8)
    c = Coefficients.from_function(g, smooth_gamma)
    md = manufactured_direct(c, 0.5, 0.75, UniformGrid(1.0, 8), spatial_seed=None)
    assert np.all(md.exact_values(g).flat() == 0.0)
    assert np.all(md.source(g.grids[0].nodes, 0.5, 0) == 0.0)
    zero = manufactured_inverse(c, 0.5, 0.75, UniformGrid(1.0, 8), lambda t: np.zeros_like(t))
    assert np.all(zero.problem.psi.values == 0.0)
    assert np.all(solve_inverse(zero.problem).f.values == 0.0)
    table = convergence_study(lambda N, M: 0.0, [(8, 8), (16, 16), (32, 32)])
    assert np.all(table.errors == 0.0) and table.orders == [None, None, None]
    assert "n/a" in table.to_csv()


# -- cli -------------------------------------------------------------------

MINIMAL = """
edges:
  - {length: 1.0, nodes: 8}
  - {length: 1.0, nodes: 8}
alpha: 0.5
beta: 0.75
T: 1.0
time_steps: 8
"""


def test_config_examples():
    cfg = parse_config(MINIMAL)
    assert cfg.options.tol == 1e-8 and cfg.options.max_iter == 200
    with pytest.raises(ConfigError, match="alpha"):
        parse_config(MINIMAL.replace("alpha: 0.5", "alpha: 1.5"))
    gamma = parse_config(MINIMAL.replace("nodes: 8}", 'nodes: 8, gamma: "1 + 0.5*sin(pi*x)"}', 1))
    assert gamma.coefficients().gamma.values[0][0] == 1.0


def test_expression_examples():
    assert eval_expression("sin(pi*x)", {"x": 0.5}) == 1.0
    assert eval_expression("2^3^2", {}) == 512.0
    assert eval_expression("x*t + k", {"x": 2, "t": 3, "k": 1}) == 7.0


def test_cli_zero_source_snapshots(tmp_path):
    cfg = tmp_path / "zero.yaml"
    cfg.write_text(MINIMAL)
    assert main(["solve-direct", str(cfg), "--out", str(tmp_path)]) == 0
    fields = [read_field(p) for p in tmp_path.glob("field_*.csv")]
    assert fields
    assert all(np.all(f["u_regular"] == 0.0) and np.all(f["phi"] == 0.0) and f["b"] == 0.0 for f in fields)


def test_cli_manufactured_inverse_config(tmp_path):
    assert main(["solve-inverse", str(CONFIGS / "inverse_manufactured.yaml"), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["relative_error_vs_f_true"] <= 0.02
    assert (tmp_path / "f.csv").exists()
