import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corner_moser.errors import DomainError, ResolutionError
from corner_moser.geometry import (
    HIGH, LOW, Domain, Stratum, boundary_mask, interior_mask, make_grid, quadrature_weights,
    strata, stratum_mask, stratum_nodes,
)


def test_cube_nodes_1d():
    g = make_grid(Domain.cube(1), 5)
    np.testing.assert_array_equal(g.axes[0], [0, 0.25, 0.5, 0.75, 1])


def test_quadrant_3x3():
    g = make_grid(Domain.quadrant(2, 2, (1, 1)), (3, 3))
    assert g.points().shape == (9, 2)
    assert g.h == (0.5, 0.5)


def test_too_few_nodes():
    with pytest.raises(ResolutionError):
        make_grid(Domain.cube(1), 2)


def test_free_axes_are_symmetric():
    d = Domain.quadrant(3, 1, (1, 2, 3))
    assert d.lower == (0.0, -2.0, -3.0)
    assert d.truncation_faces() == [(0, HIGH), (1, LOW), (1, HIGH), (2, LOW), (2, HIGH)]


@pytest.mark.parametrize("m,p", [(0, 0), (4, 1), (2, 3)])
def test_bad_quadrants(m, p):
    with pytest.raises(DomainError):
        Domain.quadrant(m, p)


def test_trapezoid_weights():
    w = quadrature_weights(make_grid(Domain.cube(1), 3))
    np.testing.assert_allclose(w, [0.25, 0.5, 0.25])


def test_unit_square_volume():
    assert quadrature_weights(make_grid(Domain.cube(2), 7)).sum() == pytest.approx(1.0, abs=1e-14)


def test_quadrant_volume():
    g = make_grid(Domain.quadrant(2, 2, (2, 3)), (5, 9))
    assert np.sum(quadrature_weights(g)) == pytest.approx(6.0, abs=1e-12)


def test_simpson_needs_odd_count():
    with pytest.raises(ResolutionError):
        quadrature_weights(make_grid(Domain.cube(1), 4), "simpson")
    w = quadrature_weights(make_grid(Domain.cube(1), 5), "simpson")
    x = np.linspace(0, 1, 5)
    assert w @ x**3 == pytest.approx(0.25, abs=1e-15)


def test_edge_stratum_excludes_corners():
    g = make_grid(Domain.cube(2), 5)
    idx = stratum_nodes(g, Stratum(((0, LOW),)))
    pts = g.points()[idx]
    assert len(idx) == 3
    assert np.all(pts[:, 0] == 0) and np.all((pts[:, 1] > 0) & (pts[:, 1] < 1))


def test_corner_stratum():
    g = make_grid(Domain.cube(2), 5)
    idx = stratum_nodes(g, Stratum(((0, LOW), (1, LOW))))
    np.testing.assert_array_equal(g.points()[idx], [[0, 0]])


def test_quadrant_origin():
    g = make_grid(Domain.quadrant(2, 2), 5)
    (s,) = strata(g.domain, 2)
    np.testing.assert_array_equal(g.points()[stratum_nodes(g, s)], [[0, 0]])


def test_invalid_strata():
    g = make_grid(Domain.quadrant(2, 1), 5)
    with pytest.raises(DomainError):
        stratum_nodes(g, Stratum(((1, LOW),)))
    with pytest.raises(DomainError):
        stratum_nodes(g, Stratum(((0, HIGH),)))


def test_face_counts():
    assert len(strata(Domain.cube(3), 1)) == 6
    assert len(strata(Domain.quadrant(3, 2), 1)) == 2
    assert len(strata(Domain.quadrant(3, 0))) == 0


domains = st.one_of(
    st.integers(1, 3).map(Domain.cube),
    st.integers(1, 3).flatmap(lambda m: st.integers(0, m).map(lambda p: Domain.quadrant(m, p))),
)


@given(domains, st.integers(3, 6))
def test_strata_partition_the_nodes(dom, n):
    g = make_grid(dom, n)
    count = np.zeros(g.shape, dtype=int)
    for s in strata(dom):
        count += stratum_mask(g, s)
    count += interior_mask(g)
    assert np.all(count == 1)
    assert np.array_equal(boundary_mask(g, 1), ~interior_mask(g))


@given(domains, st.integers(3, 7), st.lists(st.floats(-3, 3), min_size=8, max_size=8))
def test_trapezoid_exact_on_multilinear(dom, n, coef):
    g = make_grid(dom, n)
    coords = g.coords()
    vals = np.zeros(g.shape)
    exact = 0.0
    for k, subset in enumerate(itertools.chain.from_iterable(
            itertools.combinations(range(dom.m), r) for r in range(dom.m + 1))):
        term = np.ones(g.shape)
        integral = 1.0
        for i in range(dom.m):
            lo, hi = dom.lower[i], dom.upper[i]
            if i in subset:
                term = term * coords[i]
                integral *= (hi**2 - lo**2) / 2
            else:
                integral *= hi - lo
        vals += coef[k] * term
        exact += coef[k] * integral
    w = quadrature_weights(g)
    assert np.all(w > 0)
    assert abs(np.sum(w * vals) - exact) <= 1e-12 * max(1.0, abs(exact))


def test_refine_halves_spacing():
    g = make_grid(Domain.cube(2), 9)
    assert g.refine().h == (0.0625, 0.0625)
