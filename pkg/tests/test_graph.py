import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracgraph.graph import Coefficients, GraphSeries, StarGraph, graph_inner, graph_l2_norm, integrate_graph


def test_uniform_and_refine():
    g = StarGraph.uniform((1.0, 2.0), (4, 8))
    assert g.edge_count == 2
    assert g.total_nodes == 5 + 9
    assert g.refine(2).total_nodes == 9 + 17
    assert g.lengths == (1.0, 2.0)


@pytest.mark.parametrize("lengths, cells", [((1.0,), 4), ((1.0, 1.0), (4,))])
def test_invalid_graphs(lengths, cells):
    with pytest.raises(ValueError):
        StarGraph.uniform(lengths, cells)


def test_series_shape_and_finiteness(star3):
    with pytest.raises(ValueError, match="expected 3 edge arrays"):
        GraphSeries(star3, (np.zeros(33), np.zeros(33)))
    with pytest.raises(ValueError, match="edge 1"):
        GraphSeries(star3, (np.zeros(33), np.zeros(30), np.zeros(33)))
    with pytest.raises(ValueError, match="finite"):
        GraphSeries(star3, (np.zeros(33), np.full(33, np.inf), np.zeros(33)))


def test_flat_round_trip(star3, rng):
    flat = rng.normal(size=star3.total_nodes)
    npt.assert_array_equal(GraphSeries.from_flat(star3, flat).flat(), flat)


def test_integrals_of_polynomials(star3):
    one = GraphSeries.sample(star3, lambda x, k: np.ones_like(x))
    assert integrate_graph(one) == pytest.approx(3.0, rel=1e-14)
    lin = GraphSeries.sample(star3, lambda x, k: x)
    assert integrate_graph(lin) == pytest.approx(0.5 * (1 + 0.64 + 1.44), rel=1e-14)
    assert graph_l2_norm(one) == pytest.approx(np.sqrt(3.0), rel=1e-14)


@given(st.integers(0, 10_000))
def test_inner_product_is_symmetric_bilinear(seed):
    rng = np.random.default_rng(seed)
    g = StarGraph.uniform((1.0, 0.5, 2.0), (5, 7, 3))
    a, b, c = (GraphSeries.from_flat(g, rng.normal(size=g.total_nodes)) for _ in range(3))
    s = rng.normal()
    assert graph_inner(a, b) == pytest.approx(graph_inner(b, a), abs=1e-12)
    assert graph_inner(a * s + c, b) == pytest.approx(s * graph_inner(a, b) + graph_inner(c, b), abs=1e-10)
    assert graph_inner(a, a) >= 0


def test_mismatched_graphs_rejected(star3):
    other = StarGraph.uniform((1.0, 0.8, 1.2), 16)
    with pytest.raises(ValueError):
        GraphSeries.zeros(star3) + GraphSeries.zeros(other)


class TestCoefficients:
    def test_bounds_default_to_samples(self, star3):
        c = Coefficients.from_function(star3, lambda x, k: 1.0 + x)
        assert c.p1 == 1.0
        assert c.p2 == pytest.approx(2.2)

    def test_rejects_nonpositive(self, star3):
        with pytest.raises(ValueError):
            Coefficients.from_function(star3, lambda x, k: x - 0.5)
        with pytest.raises(ValueError, match="strictly positive"):
            Coefficients.from_function(star3, lambda x, k: x - 0.5, p1=0.1, p2=1.0)

    def test_rejects_bound_violation(self, star3):
        with pytest.raises(ValueError, match="violates"):
            Coefficients.from_function(star3, lambda x, k: 1.0 + x, p1=1.0, p2=1.5)
        with pytest.raises(ValueError):
            Coefficients.constant(star3, 0.0)

    def test_inverse_integrals(self, star3):
        c = Coefficients.constant(star3, 2.0)
        npt.assert_allclose(c.inverse_integrals(), np.array(star3.lengths) / 2.0, rtol=1e-14)
