"""Collocated discrete differential forms on tensor grids.

A degree-``k`` form stores one node-value array per strictly increasing
index tuple ``I`` (0-based axes), i.e. ``sum_I a_I du^I``.  Derivatives use
second-order central differences inside and second-order one-sided
stencils on boundary nodes (``numpy.gradient(..., edge_order=2)``).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .bump import UNIT, eval_bump
from .errors import DegreeError, DomainError, SupportError
from .geometry import Grid, Stratum, quadrature_weights, LOW

AXIS_NAMES = "xyz"


def index_sets(m: int, k: int) -> list[tuple[int, ...]]:
    """Increasing index tuples of length ``k`` in lexicographic order."""
    return list(itertools.combinations(range(m), k))


def component_label(index: tuple[int, ...]) -> str:
    if not index:
        return "1"
    return "^".join("d" + AXIS_NAMES[i] for i in index)


def parse_component_label(label: str) -> tuple[int, ...]:
    label = label.strip()
    if label in ("1", ""):
        return ()
    out = []
    for part in label.split("^"):
        part = part.strip()
        if len(part) != 2 or part[0] != "d" or part[1] not in AXIS_NAMES:
            raise ValueError(f"bad component label {label!r}")
        out.append(AXIS_NAMES.index(part[1]))
    if out != sorted(set(out)):
        raise ValueError(f"component indices must increase: {label!r}")
    return tuple(out)


def _permutation_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass(frozen=True, eq=False)
class FormField:
    grid: Grid
    degree: int
    components: dict

    def __post_init__(self):
        m = self.grid.m
        if not 0 <= self.degree <= m:
            raise DegreeError(f"degree {self.degree} outside 0..{m}")
        keys = index_sets(m, self.degree)
        if set(self.components) != set(keys):
            raise DegreeError(
                f"expected components {keys}, got {sorted(self.components)}"
            )
        comps = {}
        for key in keys:
            arr = np.array(self.components[key], dtype=float)
            if arr.shape != self.grid.shape:
                arr = np.broadcast_to(arr, self.grid.shape).copy()
            arr.flags.writeable = False
            comps[key] = arr
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, grid: Grid, degree: int) -> "FormField":
        return cls(grid, degree, {I: np.zeros(grid.shape) for I in index_sets(grid.m, degree)})

    @classmethod
    def top(cls, grid: Grid, values) -> "FormField":
        return cls(grid, grid.m, {tuple(range(grid.m)): values})

    @classmethod
    def build(cls, grid: Grid, degree: int, partial: dict) -> "FormField":
        """Like the constructor, but missing components are zero."""
        comps = {I: partial.get(I, np.zeros(grid.shape)) for I in index_sets(grid.m, degree)}
        unknown = set(partial) - set(comps)
        if unknown:
            raise DegreeError(f"components {sorted(unknown)} do not fit degree {degree}")
        return cls(grid, degree, comps)

    @classmethod
    def from_functions(cls, grid: Grid, degree: int, funcs: dict) -> "FormField":
        """Sample ``{index: f(*coords)}``; missing components are zero."""
        coords = grid.coords()
        comps = {}
        for I in index_sets(grid.m, degree):
            f = funcs.get(I)
            comps[I] = np.zeros(grid.shape) if f is None else f(*coords)
        unknown = set(funcs) - set(comps)
        if unknown:
            raise DegreeError(f"components {sorted(unknown)} do not fit degree {degree}")
        return cls(grid, degree, comps)

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def values(self) -> np.ndarray:
        """The single component of a top form (or of a 0-form)."""
        if len(self.components) != 1:
            raise DegreeError("values is only defined for forms with one component")
        return next(iter(self.components.values()))

    def __getitem__(self, index) -> np.ndarray:
        return self.components[tuple(index)]

    def _check(self, other: "FormField"):
        if other.degree != self.degree or other.grid != self.grid:
            raise DegreeError("forms live on different grids or have different degrees")

    def __add__(self, other):
        self._check(other)
        return FormField(self.grid, self.degree, {I: v + other.components[I] for I, v in self.components.items()})

    def __sub__(self, other):
        self._check(other)
        return FormField(self.grid, self.degree, {I: v - other.components[I] for I, v in self.components.items()})

    def __mul__(self, scalar):
        if isinstance(scalar, FormField):
            return NotImplemented
        return FormField(self.grid, self.degree, {I: v * scalar for I, v in self.components.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def multiply(self, field) -> "FormField":
        """Multiply every component by a scalar node field."""
        return FormField(self.grid, self.degree, {I: v * field for I, v in self.components.items()})

    def sup(self, mask=None) -> float:
        """Max absolute node value over all components (optionally masked)."""
        best = 0.0
        for v in self.components.values():
            vals = v if mask is None else v[mask]
            if vals.size:
                best = max(best, float(np.max(np.abs(vals))))
        return best

    def allclose(self, other, atol=1e-12) -> bool:
        self._check(other)
        return all(np.allclose(v, other.components[I], rtol=0, atol=atol) for I, v in self.components.items())


def exterior_derivative(a: FormField) -> FormField:
    """``d(sum_I a_I du^I) = sum_I sum_j d_j a_I du^j ^ du^I``."""
    m, k = a.m, a.degree
    if k >= m:
        raise DegreeError(f"cannot differentiate a degree-{k} form in dimension {m}")
    out = {J: np.zeros(a.grid.shape) for J in index_sets(m, k + 1)}
    for I, vals in a.components.items():
        if not np.any(vals):
            continue
        for j in range(m):
            if j in I:
                continue
            sign = -1.0 if sum(1 for i in I if i < j) % 2 else 1.0
            J = tuple(sorted(I + (j,)))
            out[J] += sign * np.gradient(vals, a.grid.h[j], axis=j, edge_order=2)
    return FormField(a.grid, k + 1, out)


def integrate_top(a: FormField, rule: str = "trapezoid") -> float:
    """Integral of a top form, ``du^1 ^ ... ^ du^m`` positively oriented."""
    if a.degree != a.m:
        raise DegreeError(f"integrate_top needs degree {a.m}, got {a.degree}")
    return float(np.sum(quadrature_weights(a.grid, rule) * a.values))


def interior_product(X, mu: FormField) -> FormField:
    """``i_X mu`` for a top form ``mu``; ``X`` is a sequence of ``m`` node fields."""
    m = mu.m
    if mu.degree != m:
        raise DegreeError("interior_product expects a top form")
    if len(X) != m:
        raise DegreeError(f"vector field needs {m} components, got {len(X)}")
    rho = mu.values
    comps = {}
    for i in range(m):
        I = tuple(j for j in range(m) if j != i)
        comps[I] = (-1.0) ** i * np.asarray(X[i], dtype=float) * rho
    return FormField(mu.grid, m - 1, comps)


def trace_on_stratum(a: FormField, s: Stratum) -> FormField:
    """Pullback of ``a`` to the closed stratum ``s`` (a form on the face grid).

    Components involving a constrained axis are dropped; the others are
    restricted to the face nodes.
    """
    s.validate(a.grid.domain)
    free = s.free_axes(a.m)
    if a.degree > len(free):
        raise DegreeError(f"degree {a.degree} exceeds stratum dimension {len(free)}")
    index = [slice(None)] * a.m
    for axis, side in s.constraints:
        index[axis] = a.grid.index_of(axis, side)
    index = tuple(index)
    relabel = {ax: pos for pos, ax in enumerate(free)}
    comps = {}
    for I, vals in a.components.items():
        if set(I) & set(s.axes):
            continue
        comps[tuple(relabel[i] for i in I)] = vals[index]
    return FormField(a.grid.face_grid(s), a.degree, comps)


@dataclass(frozen=True)
class ChartMap:
    """Affine chart ``u -> v``: reflect the flagged axes, then swap two axes.

    Reflection sends ``u^i`` to ``lo_i + hi_i - u^i`` (``1 - u^i`` on the
    unit cube).  ``swap=(i, j)`` exchanges the coordinates ``v^i`` and
    ``v^j``; ``ChartMap.rho(m)`` swaps the last two axes.
    """

    reflect: tuple[bool, ...]
    swap: tuple[int, int] | None = None

    @classmethod
    def identity(cls, m: int) -> "ChartMap":
        return cls((False,) * m)

    @classmethod
    def rho(cls, m: int) -> "ChartMap":
        if m < 2:
            raise DomainError("rho needs at least two axes")
        return cls((False,) * m, (m - 2, m - 1))

    @property
    def m(self) -> int:
        return len(self.reflect)

    @property
    def permutation(self) -> tuple[int, ...]:
        perm = list(range(self.m))
        if self.swap is not None:
            i, j = self.swap
            perm[i], perm[j] = perm[j], perm[i]
        return tuple(perm)

    @property
    def is_involution(self) -> bool:
        if self.swap is None:
            return True
        i, j = self.swap
        return self.reflect[i] == self.reflect[j]

    @property
    def orientation(self) -> int:
        sign = -1 if sum(self.reflect) % 2 else 1
        return -sign if self.swap is not None and self.swap[0] != self.swap[1] else sign

    def apply(self, grid: Grid, points: np.ndarray) -> np.ndarray:
        """Image of ``(N, m)`` points."""
        pts = np.array(points, dtype=float, copy=True)
        lo, hi = np.array(grid.domain.lower), np.array(grid.domain.upper)
        refl = np.array(self.reflect)
        pts[:, refl] = (lo + hi)[refl] - pts[:, refl]
        return pts[:, list(self.permutation)]


def check_chart(phi: ChartMap, grid: Grid) -> None:
    if phi.m != grid.m:
        raise DomainError(f"chart dimension {phi.m} != grid dimension {grid.m}")
    if phi.swap is not None:
        i, j = phi.swap
        dom = grid.domain
        if grid.n[i] != grid.n[j] or dom.lower[i] != dom.lower[j] or dom.upper[i] != dom.upper[j]:
            raise DomainError("swapped axes must carry identical node sets")


def pull_array(values: np.ndarray, m: int, perm, reflect) -> np.ndarray:
    """``b[u] = a[v(u)]`` for node arrays with optional trailing batch axes."""
    inv = [0] * m
    for k, s in enumerate(perm):
        inv[s] = k
    axes = inv + list(range(m, values.ndim))
    out = np.transpose(values, axes)
    flip = tuple(i for i in range(m) if reflect[i])
    if flip:
        out = np.flip(out, axis=flip)
    return out


def pull_components(comps: dict, m: int, perm, reflect) -> dict:
    """Pull back a component dict under ``v^k = R(u^{perm[k]})``."""
    out = {}
    for I, vals in comps.items():
        image = [perm[k] for k in I]
        sign = _permutation_sign(image)
        for src in image:
            if reflect[src]:
                sign = -sign
        out[tuple(sorted(image))] = sign * pull_array(vals, m, perm, reflect)
    return out


def pullback_chart(phi: ChartMap, a: FormField) -> FormField:
    """``phi^* a`` for a form ``a`` given in the chart coordinates ``v``."""
    check_chart(phi, a.grid)
    # reflect[] refers to source axes u; perm maps target index k to source axis
    comps = pull_components(a.components, a.m, phi.permutation, phi.reflect)
    return FormField(a.grid, a.degree, comps)


def slice_last_axis(a: FormField) -> list[FormField]:
    """Write a top form as ``alpha_1(u^m) ^ du^m``; one slice per last-axis node."""
    if a.degree != a.m:
        raise DegreeError("slice_last_axis expects a top form")
    sub = a.grid.drop_last_axis()
    vals = a.values
    return [FormField.top(sub, vals[..., k]) for k in range(a.grid.n[-1])]


def assemble_slices(slices, grid: Grid) -> FormField:
    """Inverse of :func:`slice_last_axis`."""
    vals = np.stack([s.values for s in slices], axis=-1)
    return FormField.top(grid, vals)


def product_bump(grid: Grid, specs) -> FormField:
    """Top form whose component is the product of per-axis unit bumps."""
    specs = list(specs)
    if len(specs) != grid.m:
        raise DegreeError(f"need {grid.m} bump specs, got {len(specs)}")
    vals = np.array(1.0)
    for axis, (spec, coord) in enumerate(zip(specs, grid.axes)):
        if spec.kind != UNIT:
            raise SupportError(f"axis {axis}: product_bump needs unit bumps")
        lo, hi = grid.domain.lower[axis], grid.domain.upper[axis]
        if not (lo < spec.a and spec.b < hi):
            raise SupportError(
                f"axis {axis}: bump support [{spec.a}, {spec.b}] must lie in ({lo}, {hi})"
            )
        vals = np.multiply.outer(vals, eval_bump(spec, coord))
    return FormField.top(grid, vals)


def interpolate(grid: Grid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of node values (trailing axes allowed)."""
    interp = RegularGridInterpolator(grid.axes, values, method="linear", bounds_error=False, fill_value=None)
    return interp(points)


def truncation_sup(a: FormField) -> float:
    """Largest node value on the truncation (non-boundary) faces of the box."""
    best = 0.0
    for axis, side in a.grid.domain.truncation_faces():
        idx = [slice(None)] * a.m
        idx[axis] = 0 if side == LOW else -1
        for v in a.components.values():
            best = max(best, float(np.max(np.abs(v[tuple(idx)]))))
    return best


def check_compact_support(a: FormField, tol: float = 1e-12) -> None:
    worst = truncation_sup(a)
    if worst > tol:
        raise SupportError(f"form is {worst:.3e} on a truncation face (tolerance {tol:g})")


def max_trace(a: FormField) -> float:
    """Largest trace value of ``a`` over every boundary stratum that can carry it."""
    from .geometry import strata

    best = 0.0
    for s in strata(a.grid.domain):
        if a.m - s.codim >= a.degree:
            best = max(best, trace_on_stratum(a, s).sup())
    return best
