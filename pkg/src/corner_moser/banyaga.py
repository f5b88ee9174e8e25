"""Primitive operator ``I^omega`` with ``d I^omega(alpha) = alpha - omega * int(alpha)``.

The quadrant operator is built by recursion on the dimension.  A top form is
split into slices ``alpha = alpha_1(u^m) ^ du^m``; the slices go through the
``(m-1)``-dimensional operator (acting on all slices at once through trailing
batch axes) and the leftover mass of each slice is transported along the
last axis by a running integral.  On fully clamped quadrants the slice at
``u^m = 0`` is peeled off first and handled after swapping the last two axes,
which keeps the result zero on the whole boundary whenever ``alpha`` vanishes
on the corners of codimension >= 2.

On the cube the quadrant operators of the ``2^m`` reflection charts are glued
with a partition of unity.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .bump import BumpSpec, UNIT, CUTOFF, eval_bump
from .errors import ConfigurationError, DegreeError, DomainError, ParameterError, SupportError
from .forms import ChartMap, FormField, exterior_derivative, integrate_top, pull_array, pull_components
from .geometry import Grid

_SUPPORT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ReferenceForm:
    """Product reference form ``g_1(u^1) du^1 ^ ... ^ g_m(u^m) du^m``.

    ``factors`` are the per-axis bump samples rescaled so that each has unit
    trapezoid mass on the grid; ``raw_mass`` is the mass before rescaling.
    """

    grid: Grid
    specs: tuple
    factors: tuple
    omega: FormField
    raw_mass: float

    @property
    def mass(self) -> float:
        w = 1.0
        for f, h in zip(self.factors, self.grid.h):
            w *= _trap(f, h, 0)
        return float(w)


def reference_form(grid: Grid, specs, margin_cells: int = 2) -> ReferenceForm:
    """Sample a product of unit bumps and normalize it on ``grid``."""
    specs = tuple(specs)
    if len(specs) != grid.m:
        raise ConfigurationError(f"need {grid.m} bump specs, got {len(specs)}")
    factors = []
    raw = 1.0
    for axis, (spec, coord, h) in enumerate(zip(specs, grid.axes, grid.h)):
        if spec.kind != UNIT:
            raise ConfigurationError(f"axis {axis}: reference factors must be unit bumps")
        lo, hi = grid.domain.lower[axis], grid.domain.upper[axis]
        if spec.a < lo + margin_cells * h or spec.b > hi - margin_cells * h:
            raise SupportError(
                f"axis {axis}: reference support [{spec.a}, {spec.b}] is closer than "
                f"{margin_cells} cells to the faces of [{lo}, {hi}]"
            )
        g = eval_bump(spec, coord)
        mass = _trap(g, h, 0)
        raw *= mass
        g = g / mass
        g.flags.writeable = False
        factors.append(g)
    vals = np.array(1.0)
    for g in factors:
        vals = np.multiply.outer(vals, g)
    return ReferenceForm(grid, specs, tuple(factors), FormField.top(grid, vals), float(raw))


def _trap(f, h, axis):
    return np.trapezoid(f, dx=h, axis=axis)


def _running(f, h, axis):
    return cumulative_trapezoid(f, dx=h, axis=axis, initial=0)


def _along(vec, axis, ndim):
    shape = [1] * ndim
    shape[axis] = vec.shape[0]
    return vec.reshape(shape)


class _Kernel:
    """Array-level recursion shared by every public entry point."""

    def __init__(self, hs, factors, cutoffs):
        self.hs = tuple(hs)
        self.factors = tuple(factors)
        self.cutoffs = tuple(cutoffs)

    def base(self, c):
        h, g = self.hs[0], self.factors[0]
        total = _trap(c, h, 0)
        integrand = c - _along(g, 0, c.ndim) * total[None]
        return {(): _running(integrand, h, 0)}

    def tilde(self, c, d, p):
        sub = self.apply(c, d - 1, min(p, d - 1))
        out = {J + (d - 1,): v for J, v in sub.items()}
        slice_mass = c
        for i in range(d - 1):
            slice_mass = _trap(slice_mass, self.hs[i], 0)
        h_last, g_last = self.hs[d - 1], self.factors[d - 1]
        total = _trap(slice_mass, h_last, 0)
        flux = _running(slice_mass - _along(g_last, 0, slice_mass.ndim) * total[None], h_last, 0)
        omega_lower = np.array(1.0)
        for g in self.factors[: d - 1]:
            omega_lower = np.multiply.outer(omega_lower, g)
        omega_lower = omega_lower.reshape(omega_lower.shape + (1,) * (c.ndim - d + 1))
        flux = flux.reshape((1,) * (d - 1) + flux.shape)
        out[tuple(range(d - 1))] = (-1.0) ** (d - 1) * omega_lower * flux
        return out

    def corner(self, c, d):
        first = c[(slice(None),) * (d - 1) + (0,)]
        beta = _along(self.cutoffs[d - 1], d - 1, c.ndim) * np.expand_dims(first, d - 1)
        gamma = c - beta
        # rho^* of a top form: swap the last two spatial axes, flip the sign
        rho_beta = -np.swapaxes(beta, d - 2, d - 1)
        main = self.tilde(gamma, d, d)
        swapped = self.tilde(rho_beta, d, d)
        perm = list(range(d))
        perm[d - 2], perm[d - 1] = d - 1, d - 2
        swapped = pull_components(swapped, d, perm, (False,) * d)
        return {J: main[J] + swapped[J] for J in main}

    def apply(self, c, d, p):
        if d == 1:
            return self.base(c)
        if p < d:
            return self.tilde(c, d, p)
        return self.corner(c, d)


def _check_top(alpha: FormField):
    if alpha.degree != alpha.m:
        raise DegreeError(f"expected a top form, got degree {alpha.degree}")


def _check_lower_support(alpha: FormField):
    """Free axes start their running integrals at ``-L``: alpha must vanish there."""
    dom = alpha.grid.domain
    vals = alpha.values
    for axis in range(alpha.m):
        if dom.clamped_low[axis]:
            continue
        face = np.take(vals, 0, axis=axis)
        worst = float(np.max(np.abs(face))) if face.size else 0.0
        if worst > _SUPPORT_TOL:
            raise SupportError(
                f"alpha is {worst:.3e} on the truncation face u^{axis + 1} = {dom.lower[axis]}"
            )


def _check_reference(alpha: FormField, omega) -> ReferenceForm:
    if not isinstance(omega, ReferenceForm):
        raise ConfigurationError("omega must be a product ReferenceForm")
    if omega.grid != alpha.grid:
        raise ConfigurationError("omega and alpha live on different grids")
    return omega


def default_cutoff(grid: Grid) -> BumpSpec:
    """Corner cutoff on a clamped axis ``[0, L]``: 1 up to ``L/4``, 0 from ``3L/4``."""
    length = grid.domain.upper[0]
    return BumpSpec.cutoff(0.25 * length, 0.75 * length)


def _cutoff_samples(grid: Grid, cutoff: BumpSpec | None):
    cutoff = cutoff or default_cutoff(grid)
    if cutoff.kind == UNIT:
        raise ParameterError("the corner correction needs a cutoff, not a unit bump")
    if cutoff.transition[0] < 0:
        raise ParameterError("the corner cutoff must equal 1 at u = 0")
    return tuple(eval_bump(cutoff, a) for a in grid.axes)


def _check_corner_symmetry(ref: ReferenceForm, grid: Grid, count: int):
    """Axes ``0..count-1`` must agree: every swap in the recursion maps the grid to itself."""
    dom = grid.domain
    last = count - 1
    for i in range(last):
        same_grid = (
            grid.n[i] == grid.n[last]
            and dom.lower[i] == dom.lower[last]
            and dom.upper[i] == dom.upper[last]
        )
        if not same_grid:
            raise DomainError("the corner correction needs identical clamped axes")
        if not np.allclose(ref.factors[i], ref.factors[last], rtol=0, atol=1e-14):
            raise ConfigurationError("the corner correction needs the same bump on every clamped axis")


def _wrap(grid, comps):
    return FormField(grid, grid.m - 1, comps)


def banyaga_1d(alpha: FormField, g: BumpSpec, p: int | None = None) -> FormField:
    """Running integral of ``a - g * int(a)`` on ``Q^1_p``; zero at the lower end."""
    _check_top(alpha)
    if alpha.m != 1:
        raise DegreeError("banyaga_1d works in one dimension")
    if p is not None and p != alpha.grid.domain.p:
        raise DomainError(f"grid is clamped on {alpha.grid.domain.p} axes, p={p} given")
    _check_lower_support(alpha)
    ref = reference_form(alpha.grid, (g,))
    kernel = _Kernel(alpha.grid.h, ref.factors, ())
    return _wrap(alpha.grid, kernel.base(np.asarray(alpha.values)))


def banyaga_tilde(alpha: FormField, omega: ReferenceForm, p: int | None = None, cutoff=None) -> FormField:
    """Auxiliary operator (no corner correction at the top level)."""
    _check_top(alpha)
    if alpha.m < 2:
        raise DegreeError("banyaga_tilde needs m >= 2")
    ref = _check_reference(alpha, omega)
    grid = alpha.grid
    p = grid.domain.p if p is None else p
    _check_lower_support(alpha)
    _check_corner_symmetry(ref, grid, min(p, grid.m - 1))
    kernel = _Kernel(grid.h, ref.factors, _cutoff_samples(grid, cutoff))
    return _wrap(grid, kernel.tilde(np.asarray(alpha.values), grid.m, p))


def corner_correction(alpha: FormField, omega: ReferenceForm, cutoff: BumpSpec | None = None) -> FormField:
    """``I~(gamma) + rho^* I~(rho^* beta)`` on ``Q^m_m`` with ``beta = h(u^m) alpha_1(0) ^ du^m``."""
    _check_top(alpha)
    grid = alpha.grid
    if grid.m < 2:
        raise DegreeError("corner_correction needs m >= 2")
    if grid.domain.p != grid.m:
        raise DomainError(f"corner_correction needs p = m, got p = {grid.domain.p}")
    ref = _check_reference(alpha, omega)
    _check_corner_symmetry(ref, grid, grid.m)
    kernel = _Kernel(grid.h, ref.factors, _cutoff_samples(grid, cutoff))
    return _wrap(grid, kernel.corner(np.asarray(alpha.values), grid.m))


def banyaga_quadrant(alpha: FormField, omega: ReferenceForm, cutoff: BumpSpec | None = None) -> FormField:
    """``I^omega`` on a truncated partial quadrant.

    Dispatches to the 1D base case, the auxiliary operator (``p < m``) or the
    corner-corrected operator (``p = m``).
    """
    _check_top(alpha)
    grid = alpha.grid
    ref = _check_reference(alpha, omega)
    _check_lower_support(alpha)
    p = grid.domain.p
    _check_corner_symmetry(ref, grid, p)
    kernel = _Kernel(grid.h, ref.factors, _cutoff_samples(grid, cutoff))
    return _wrap(grid, kernel.apply(np.asarray(alpha.values), grid.m, p))


def change_omega(I_of_alpha: FormField, I_of_omega_tilde: FormField, integral_alpha: float) -> FormField:
    """``I^{omega~}(alpha) = I^omega(alpha) - I^omega(omega~) * int(alpha)``."""
    return I_of_alpha - I_of_omega_tilde * float(integral_alpha)


@dataclass(frozen=True)
class Atlas:
    """Reflection charts of the cube, one per corner, with a product partition of unity.

    Chart ``y`` reflects the axes flagged in ``charts[y].reflect`` so that its
    corner lands on the origin of ``Q^m_m``.  Its partition function is the
    product over axes of ``chi(v) / (chi(v) + chi(1 - v))`` with ``chi`` a
    cutoff from ``1/2`` to ``1 - delta`` in chart coordinates.
    """

    m: int
    delta: float
    radius: float
    charts: tuple
    cutoff: BumpSpec

    @property
    def chi(self) -> BumpSpec:
        return BumpSpec.cutoff(0.5, 1.0 - self.delta)

    @property
    def reference_specs(self) -> tuple:
        return (BumpSpec.unit(0.5 - self.radius, 0.5 + self.radius),) * self.m

    def check_grid(self, grid: Grid) -> None:
        if grid.domain.kind != "cube" or grid.m != self.m:
            raise DomainError(f"atlas expects the {self.m}-cube")
        if self.delta < 2 * grid.hmax - 1e-12:
            raise DomainError(f"margin delta={self.delta} is under two cells (h={grid.hmax})")

    def partition(self, grid: Grid) -> list[np.ndarray]:
        """``lambda_y`` at the nodes, in chart order."""
        self.check_grid(grid)
        chi = self.chi
        per_axis = []
        for coord in grid.axes:
            lo, hi = eval_bump(chi, coord), eval_bump(chi, 1.0 - coord)
            per_axis.append((lo / (lo + hi), hi / (lo + hi)))
        out = []
        for chart in self.charts:
            lam = np.array(1.0)
            for axis, flipped in enumerate(chart.reflect):
                lam = np.multiply.outer(lam, per_axis[axis][1 if flipped else 0])
            out.append(lam)
        return out

    def reference(self, grid: Grid) -> ReferenceForm:
        self.check_grid(grid)
        return reference_form(grid, self.reference_specs)


def cube_atlas(m: int, delta: float = 0.25, radius: float | None = None, cutoff: BumpSpec | None = None) -> Atlas:
    """Corner-chart atlas of ``[0, 1]^m`` with a midpoint reference form."""
    if not 1 <= m <= 3:
        raise DomainError(f"m must be in 1..3, got {m}")
    if not 0 < delta < 0.5:
        raise ParameterError(f"delta must lie in (0, 1/2), got {delta}")
    limit = min(delta, 0.25)
    if radius is None:
        radius = 0.8 * limit
    if not 0 < radius < limit:
        raise ParameterError(f"reference radius must lie in (0, {limit}), got {radius}")
    charts = tuple(ChartMap(tuple(flags)) for flags in itertools.product((False, True), repeat=m))
    if cutoff is None:
        cutoff = BumpSpec.cutoff(0.25, 0.75)
    if cutoff.kind != CUTOFF or cutoff.b > 1.0:
        raise ParameterError("corner cutoff must be a cutoff vanishing inside [0, 1]")
    return Atlas(m, float(delta), float(radius), charts, cutoff)


def _chart_term(alpha_vals, lam, chart, ref, grid, cutoffs):
    m = grid.m
    perm = tuple(range(m))
    local = pull_array(lam * alpha_vals, m, perm, chart.reflect)
    if sum(chart.reflect) % 2:
        local = -local
    factors = tuple(g[::-1] if f else g for g, f in zip(ref.factors, chart.reflect))
    kernel = _Kernel(grid.h, factors, cutoffs)
    comps = kernel.apply(local, m, m)
    return pull_components(comps, m, perm, chart.reflect)


def banyaga_cube(alpha: FormField, atlas: Atlas, workers: int | None = None) -> FormField:
    """Glued operator ``sum_y phi_y^* I_m((phi_y^{-1})^*(lambda_y alpha))`` on the cube.

    In each chart the reference is the positive product bump, so that
    orientation-reversing reflections need no extra sign bookkeeping.
    Chart terms are summed in chart order, so the result does not depend on
    ``workers``.
    """
    _check_top(alpha)
    grid = alpha.grid
    atlas.check_grid(grid)
    ref = atlas.reference(grid)
    lams = atlas.partition(grid)
    cutoffs = tuple(eval_bump(atlas.cutoff, a) for a in grid.axes)
    vals = np.asarray(alpha.values)
    args = [(vals, lam, chart, ref, grid, cutoffs) for lam, chart in zip(lams, atlas.charts)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            terms = list(pool.map(lambda a: _chart_term(*a), args))
    else:
        terms = [_chart_term(*a) for a in args]
    total = {J: np.zeros(grid.shape) for J in terms[0]}
    for term in terms:
        for J, v in term.items():
            total[J] += v
    return _wrap(grid, total)


def banyaga(alpha: FormField, omega_or_atlas, **kwargs) -> FormField:
    """Dispatch on the domain: glued operator on the cube, quadrant operator otherwise."""
    if alpha.grid.domain.kind == "cube":
        if not isinstance(omega_or_atlas, Atlas):
            raise ConfigurationError("the cube operator needs an Atlas")
        return banyaga_cube(alpha, omega_or_atlas, **kwargs)
    return banyaga_quadrant(alpha, omega_or_atlas, **kwargs)


def identity_residual(alpha: FormField, I_alpha: FormField, omega: FormField) -> FormField:
    """``d I(alpha) - alpha + omega * int(alpha)``."""
    return exterior_derivative(I_alpha) - alpha + omega * integrate_top(alpha)
