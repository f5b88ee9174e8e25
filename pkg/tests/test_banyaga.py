import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from corner_moser.banyaga import (
    banyaga, banyaga_1d, banyaga_cube, banyaga_quadrant, banyaga_tilde, change_omega,
    corner_correction, cube_atlas, identity_residual, reference_form,
)
from corner_moser.bump import BumpSpec, eval_bump
from corner_moser.errors import DomainError, ParameterError, SupportError
from corner_moser.forms import ChartMap, FormField, integrate_top, max_trace, pullback_chart
from corner_moser.geometry import Domain, boundary_mask, make_grid
from corner_moser.verify import corner_free_form, cube_test_form, quadrant_test_form
from conftest import orders
from oracles import exp_bump

WIDE = (0.07, 0.93)


def quadrant(m, p, n, clamped=WIDE, free=(-0.85, 0.85)):
    g = make_grid(Domain.quadrant(m, p), n)
    specs = [BumpSpec.unit(*(clamped if i < p else free)) for i in range(m)]
    return g, reference_form(g, specs)


def random_form(g, seed):
    """Smooth top form with seeded random trig coefficients, compactly supported on the box."""
    rng = np.random.default_rng(seed)
    coords = g.coords()
    vals = np.zeros(g.shape)
    for _ in range(4):
        k = rng.integers(1, 4, size=g.m)
        ph = rng.uniform(0, np.pi, size=g.m)
        term = rng.normal()
        for u, kk, pp in zip(coords, k, ph):
            term = term * np.cos(kk * u + pp)
        vals = vals + term
    cut = quadrant_test_form(g).values
    return FormField.top(g, (2 + vals) * cut)


# -- 1D base case -----------------------------------------------------------

def test_1d_zero_and_reference():
    g = make_grid(Domain.quadrant(1, 1), 65)
    spec = BumpSpec.unit(0.2, 0.8)
    assert banyaga_1d(FormField.zero(g, 1), spec).sup() == 0
    om = reference_form(g, [spec]).omega
    assert banyaga_1d(om, spec).sup() <= 1e-15


def test_1d_linear_density():
    spec = BumpSpec.unit(0.2, 0.8)
    g_exact = exp_bump(0.2, 0.8)
    for n in (65, 257):
        g = make_grid(Domain.quadrant(1, 1), n)
        u = g.axes[0]
        I = banyaga_1d(FormField.top(g, 2 * u), spec, p=1).values
        G = np.array([integrate.quad(lambda t: float(g_exact(t)), 0, v, epsabs=1e-14)[0] for v in u])
        assert I[0] == 0.0 and abs(I[-1]) <= 1e-14
        assert np.max(np.abs(I - (u**2 - G))) <= 5 * g.h[0] ** 2 * 250


def test_1d_free_axis_support_check():
    g = make_grid(Domain.quadrant(1, 0), 33)
    with pytest.raises(SupportError):
        banyaga_1d(FormField.top(g, 1.0), BumpSpec.unit(-0.5, 0.5))


# -- auxiliary operator and corner correction ------------------------------

@pytest.mark.parametrize("p", [0, 1, 2])
def test_tilde_kills_reference(p):
    g, ref = quadrant(2, p, 33)
    assert banyaga_tilde(FormField.zero(g, 2), ref, p).sup() == 0
    assert banyaga_tilde(ref.omega, ref, p).sup() <= 1e-15


def test_tilde_order_for_random_form():
    res = []
    for n in (33, 65, 129):
        g, ref = quadrant(2, 2, n)
        a = random_form(g, 7)
        res.append(identity_residual(a, banyaga_tilde(a, ref, 2), ref.omega).sup())
    assert np.all((orders(res) >= 1.7) & (orders(res) <= 2.3)), res


def test_corner_correction_without_bottom_slice():
    g, ref = quadrant(2, 2, 33)
    x, y = g.coords()
    a = FormField.top(g, y * quadrant_test_form(g).values)
    assert corner_correction(a, ref).allclose(banyaga_tilde(a, ref, 2), atol=1e-15)


def test_corner_correction_of_reference():
    g, ref = quadrant(2, 2, 33)
    assert corner_correction(ref.omega, ref).sup() <= 1e-15


def test_corner_correction_needs_full_quadrant():
    g, ref = quadrant(2, 1, 33)
    with pytest.raises(DomainError):
        corner_correction(quadrant_test_form(g), ref)


def test_corner_vanishing_on_q22():
    res = []
    for n in (33, 65, 129):
        g, ref = quadrant(2, 2, n)
        a = corner_free_form(g)
        assert a.values[0, 0] == 0 and np.max(np.abs(a.values[0, :])) > 0.1
        I = banyaga_quadrant(a, ref)
        res.append(I.sup(boundary_mask(g)))
    # zero to rounding at every resolution, which is stronger than decay
    assert max(res) <= 1e-12, res


# -- quadrant operator ------------------------------------------------------

@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2))
def test_linearity_is_exact(s, t, p):
    g, ref = quadrant(2, p, 17, clamped=(0.15, 0.85), free=(-0.7, 0.7))
    a, b = random_form(g, 1), random_form(g, 2)
    lhs = banyaga_quadrant(a * s + b * t, ref)
    rhs = banyaga_quadrant(a, ref) * s + banyaga_quadrant(b, ref) * t
    scale = max(1.0, lhs.sup())
    assert lhs.allclose(rhs, atol=1e-13 * scale)


def test_zero_mass_form():
    res = []
    for n in (33, 65, 129):
        g, ref = quadrant(2, 2, n)
        a = quadrant_test_form(g)
        a = a - ref.omega * integrate_top(a)
        assert abs(integrate_top(a)) <= 1e-12
        from corner_moser.forms import exterior_derivative

        res.append((exterior_derivative(banyaga_quadrant(a, ref)) - a).sup())
    assert res[-1] < res[0] / 8


@pytest.mark.parametrize("c", [1.0, -2.5])
def test_multiple_of_reference(c):
    g, ref = quadrant(2, 2, 65)
    I = banyaga_quadrant(ref.omega * c, ref)
    assert I.sup() <= 1e-14
    assert identity_residual(ref.omega * c, I, ref.omega).sup() <= 1e-13


def test_change_of_reference():
    g, ref = quadrant(2, 2, 33)
    a = quadrant_test_form(g)
    Ia = banyaga_quadrant(a, ref)
    assert change_omega(Ia, banyaga_quadrant(ref.omega, ref), integrate_top(a)).allclose(Ia, atol=1e-15)
    assert change_omega(Ia, banyaga_quadrant(a, ref), 0.0).allclose(Ia, atol=0)
    res = []
    for n in (33, 65, 129):
        g, ref = quadrant(2, 2, n)
        a = random_form(g, 3)
        other = reference_form(g, [BumpSpec.unit(0.08, 0.8), BumpSpec.unit(0.2, 0.92)]).omega
        I_new = change_omega(banyaga_quadrant(a, ref), banyaga_quadrant(other, ref), integrate_top(a))
        res.append(identity_residual(a, I_new, other).sup())
    assert np.all(orders(res) >= 1.7), res


def test_support_of_result():
    g, ref = quadrant(2, 0, 65, free=(-0.3, 0.2))
    x, y = g.coords()
    bump = reference_form(g, [BumpSpec.unit(0.1, 0.7), BumpSpec.unit(-0.6, 0.0)]).omega
    I = banyaga_quadrant(bump, ref)
    inside = (x > -0.3 - 1e-12) & (x < 0.7 + 1e-12) & (y > -0.6 - 1e-12) & (y < 0.2 + 1e-12)
    assert I.sup(~inside) <= 1e-10
    assert I.sup(inside) > 1e-3


QUADRANTS = [(1, 1), (1, 0), (2, 0), (2, 1), (2, 2), (3, 3)]


@pytest.mark.parametrize("m,p", QUADRANTS)
def test_identity_and_trace_orders_on_quadrants(m, p):
    res = []
    for n in (33, 65, 129):
        g, ref = quadrant(m, p, n)
        a = quadrant_test_form(g)
        I = banyaga_quadrant(a, ref)
        res.append(identity_residual(a, I, ref.omega).sup())
        assert max_trace(I) <= 10 * g.hmax**2
    assert np.all(orders(res) >= 1.7), res


@pytest.mark.parametrize("m", [1, 2])
def test_identity_and_trace_orders_on_cube(m):
    res = []
    for n in (65, 129, 257):
        g = make_grid(Domain.cube(m), n)
        atlas = cube_atlas(m, radius=0.249)
        a = cube_test_form(g)
        I = banyaga_cube(a, atlas)
        res.append(identity_residual(a, I, atlas.reference(g).omega).sup())
        assert max_trace(I) <= 10 * g.hmax**2
    assert np.all(orders(res) >= 1.7), res


# -- atlas and glued operator -----------------------------------------------

def test_atlas_1d():
    atlas = cube_atlas(1)
    assert [c.reflect for c in atlas.charts] == [(False,), (True,)]
    g = make_grid(Domain.cube(1), 65)
    lam = atlas.partition(g)
    assert np.max(np.abs(sum(lam) - 1)) <= 1e-12


def test_atlas_2d_covers_and_respects_margin():
    atlas = cube_atlas(2, delta=0.25)
    g = make_grid(Domain.cube(2), 65)
    lam = atlas.partition(g)
    assert len(lam) == 4
    assert np.max(np.abs(sum(lam) - 1)) <= 1e-12
    assert all(np.all(l >= 0) for l in lam)
    assert np.all(sum((l > 0).astype(int) for l in lam) >= 1)
    h = g.h[0]
    for chart, l in zip(atlas.charts, lam):
        local = pullback_chart(ChartMap(chart.reflect), FormField.top(g, l)).values
        v = np.abs(local)
        # far faces v^i = 1 of the chart: zero on a two-cell band
        assert v[-3:, :].max() == 0 and v[:, -3:].max() == 0
        assert 1 - atlas.delta <= 1 - 2 * h


def test_reference_interior_in_every_chart():
    atlas = cube_atlas(2, radius=0.2)
    g = make_grid(Domain.cube(2), 33)
    om = atlas.reference(g).omega
    for chart in atlas.charts:
        local = pullback_chart(ChartMap(chart.reflect), om).values
        assert np.all(local[:2, :] == 0) and np.all(local[-2:, :] == 0)
        assert np.all(local[:, :2] == 0) and np.all(local[:, -2:] == 0)


@pytest.mark.parametrize("kw", [{"delta": 0.0}, {"delta": 0.5}, {"delta": 0.1, "radius": 0.1}, {"radius": 0.25}])
def test_atlas_parameters(kw):
    with pytest.raises(ParameterError):
        cube_atlas(2, **kw)


def test_cube_operator_in_1d_matches_running_integral():
    atlas = cube_atlas(1, radius=0.2)
    g_exact = exp_bump(0.3, 0.7)
    a_fun = lambda t: 1 + np.sin(3 * t) + t**2
    total = integrate.quad(a_fun, 0, 1)[0]
    for n in (129, 513):
        g = make_grid(Domain.cube(1), n)
        u = g.axes[0]
        I = banyaga_cube(FormField.top(g, a_fun(u)), atlas).values
        exact = np.array([integrate.quad(lambda t: a_fun(t) - float(g_exact(t)) * total, 0, v, points=[0.3, 0.7])[0] for v in u])
        assert np.max(np.abs(I - exact)) <= 50 * g.h[0] ** 2 * 10


def test_cube_reference_in_1d():
    atlas = cube_atlas(1)
    g = make_grid(Domain.cube(1), 129)
    om = atlas.reference(g).omega
    I = banyaga_cube(om, atlas)
    assert I.sup() <= 1e-14
    assert identity_residual(om, I, om).sup() <= 1e-12


def test_cube_dxdy_order():
    res = []
    for n in (65, 129, 257):
        g = make_grid(Domain.cube(2), n)
        atlas = cube_atlas(2, radius=0.249)
        a = FormField.top(g, 1.0)
        res.append(identity_residual(a, banyaga_cube(a, atlas), atlas.reference(g).omega).sup())
    assert np.all((orders(res) >= 1.7) & (orders(res) <= 2.3)), res


def test_cube_zero_and_workers():
    g = make_grid(Domain.cube(2), 33)
    atlas = cube_atlas(2)
    assert banyaga_cube(FormField.zero(g, 2), atlas).sup() == 0
    a = cube_test_form(g)
    one, four = banyaga_cube(a, atlas), banyaga_cube(a, atlas, workers=4)
    for I in one.components:
        assert np.array_equal(one[I], four[I])


def test_cube_corner_vanishing():
    res = []
    for n in (33, 65, 129):
        g = make_grid(Domain.cube(2), n)
        a = corner_free_form(g)
        res.append(banyaga(a, cube_atlas(2)).sup(boundary_mask(g)))
    assert max(res) <= 1e-12, res


def test_cutoff_must_start_at_one():
    g, ref = quadrant(2, 2, 33)
    with pytest.raises(ParameterError):
        banyaga_quadrant(quadrant_test_form(g), ref, cutoff=BumpSpec.cutoff(-0.1, 0.5))
    assert eval_bump(BumpSpec.cutoff(0.25, 0.75), 0.0) == 1.0
