"""Numerical checks of Stokes' theorem, the mollifier estimate, the two
cohomology statements, and a refinement-order estimator.

Named refinement studies live in :data:`STUDIES`; each maps a node count
``n`` to one residual, and :func:`convergence_study` turns a sequence of
node counts into observed orders.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .banyaga import banyaga, cube_atlas, identity_residual, reference_form
from .bump import BumpSpec, eval_bump, eval_bump_derivative, smooth_step
from .errors import DegreeError, MassError, ResolutionError
from .forms import FormField, exterior_derivative, integrate_top, max_trace
from .geometry import Domain, Grid, LOW, Stratum, boundary_mask, make_grid, quadrature_weights

#: Residuals at or below this level count as exact.
EXACT_TOL = 1e-12


# -- Stokes ---------------------------------------------------------------

@dataclass(frozen=True)
class StokesResult:
    lhs: float
    rhs: float
    residual: float
    faces: dict = field(default_factory=dict)


def face_sign(axis: int, side: str) -> int:
    """Outward orientation sign of the face ``u^axis = const`` (0-based axis)."""
    s = -1 if axis % 2 else 1
    return -s if side == LOW else s


def stokes_check(omega: FormField) -> StokesResult:
    """Compare ``int d omega`` with the signed sum of face integrals.

    Every face of the (truncated) box is summed, so the check is the box
    Stokes formula; for compactly supported forms on quadrants the
    truncation faces contribute nothing.
    """
    grid = omega.grid
    m = grid.m
    if omega.degree != m - 1:
        raise DegreeError(f"stokes_check needs an (m-1)-form, got degree {omega.degree}")
    lhs = integrate_top(exterior_derivative(omega))
    rhs = 0.0
    faces = {}
    for axis in range(m):
        for side in (LOW, "high"):
            face = Stratum(((axis, side),))
            # trace_on_stratum validates against clamping; slice directly so
            # truncation faces are included too
            index = [slice(None)] * m
            index[axis] = grid.index_of(axis, side)
            I = tuple(j for j in range(m) if j != axis)
            vals = omega[I][tuple(index)]
            w = quadrature_weights(grid.face_grid(face))
            flux = face_sign(axis, side) * float(np.sum(w * vals))
            faces[f"u{axis + 1}={side}"] = flux
            rhs += flux
    return StokesResult(float(lhs), float(rhs), abs(lhs - rhs), faces)


# -- mollifier estimate ---------------------------------------------------

@dataclass(frozen=True)
class MollifierCheck:
    m: int
    eps: float
    cartesian: float
    radial: float
    by_parts: float
    c_m: float
    bound: float
    tail_integral: float
    rel_tol: float = 1e-6

    @property
    def chain_gaps(self) -> dict:
        """Relative mismatch of each equality in the chain."""
        return {
            "cartesian_vs_radial": abs(self.cartesian - self.c_m * abs(self.radial)) / self.cartesian,
            "radial_vs_by_parts": abs(abs(self.radial) - self.by_parts) / self.by_parts,
        }

    @property
    def passed(self) -> bool:
        ok_chain = all(v <= self.rel_tol for v in self.chain_gaps.values())
        return ok_chain and self.cartesian <= self.bound * (1 + self.rel_tol) and self.tail_integral < self.eps


def octant_area(m: int) -> float:
    """Measure of ``S^{m-1}`` inside the closed positive orthant, by quadrature."""
    if m == 1:
        return 1.0
    if m == 2:
        return integrate.quad(lambda t: 1.0, 0, math.pi / 2)[0]
    if m == 3:
        return integrate.dblquad(lambda th, ph: math.sin(th), 0, math.pi / 2, 0, math.pi / 2)[0]
    raise ValueError("m must be 1, 2 or 3")


def _gauss_box(fun, m: int, b: float, panels: int = 32, order: int = 8) -> float:
    """Composite Gauss-Legendre tensor rule on ``[0, b]^m`` for ``fun(|x|)``.

    The first axis is looped over so memory stays at one slice.
    """
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0, b, panels + 1)
    half = np.diff(edges) / 2
    nodes = ((edges[:-1] + half)[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    rest = np.meshgrid(*([nodes] * (m - 1)), indexing="ij")
    r2 = sum(g**2 for g in rest)
    w_rest = np.array(1.0)
    for _ in range(m - 1):
        w_rest = np.multiply.outer(w_rest, weights)
    total = 0.0
    for x, wx in zip(nodes, weights):
        total += wx * float(np.sum(w_rest * fun(np.sqrt(x * x + r2))))
    return total


def mollifier_bound_check(m: int, eps: float, rel_tol: float = 1e-6) -> MollifierCheck:
    """Evaluate each step of ``|int_Q f'(|x|)| = C_m int f (r^{m-1})' <= C_m eps^{m-1}``."""
    if m not in (2, 3):
        raise ValueError("the estimate is checked for m = 2, 3")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    f = BumpSpec.mollifier(eps)
    fp = lambda r: eval_bump_derivative(f, r)
    # f' lives on the shell eps/2 <= r <= eps, which the box [0, eps]^m contains
    cart = abs(_gauss_box(fp, m, eps))
    pts = [eps / 2, eps]
    radial = integrate.quad(lambda r: float(fp(r)) * r ** (m - 1), 0, eps, points=pts, epsabs=0, epsrel=1e-13, limit=200)[0]
    parts = integrate.quad(lambda r: float(eval_bump(f, r)) * (m - 1) * r ** (m - 2), 0, eps, points=pts, epsabs=0, epsrel=1e-13, limit=200)[0]
    tail = integrate.quad(lambda r: float(eval_bump(f, r)), 0, eps, points=pts, epsabs=0, epsrel=1e-13)[0]
    c = octant_area(m)
    return MollifierCheck(m, eps, cart, radial, parts, c, c * eps ** (m - 1), tail, rel_tol)


# -- cohomology -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Witness:
    primitive: FormField
    residual: float
    trace: float = 0.0


def _operator(alpha: FormField, omega_or_atlas):
    return banyaga(alpha, omega_or_atlas)


def omega_primitive(grid: Grid, omega_or_atlas) -> FormField:
    """An ``(m-1)``-form ``P`` with ``dP = omega`` (up to discretization).

    Start from ``b0 = u^1 du^2 ^ ... ^ du^m`` (``u`` when ``m = 1``), whose
    differential has total integral 1, and correct it with the operator:
    ``P = (b0 - I(d b0)) / int d b0``.
    """
    m = grid.m
    x = grid.coords()[0]
    b0 = FormField.build(grid, m - 1, {tuple(range(1, m)): x})
    db0 = exterior_derivative(b0)
    return (b0 - _operator(db0, omega_or_atlas)) * (1.0 / integrate_top(db0))


def cohomology_top_vanishes(alpha: FormField, omega_or_atlas) -> Witness:
    """Primitive ``beta = I(alpha) + int(alpha) P`` of an arbitrary top form."""
    total = integrate_top(alpha)
    beta = _operator(alpha, omega_or_atlas)
    if total != 0.0:
        beta = beta + omega_primitive(alpha.grid, omega_or_atlas) * total
    res = (exterior_derivative(beta) - alpha).sup()
    return Witness(beta, res)


def relative_class_check(alpha: FormField, beta: FormField, omega_or_atlas, tol: float = 1e-8) -> Witness:
    """Relative primitive ``gamma = I(alpha) - I(beta)`` of ``alpha - beta``."""
    gap = integrate_top(alpha) - integrate_top(beta)
    if abs(gap) > tol:
        raise MassError(f"integrals differ by {gap:.3e}")
    gamma = _operator(alpha, omega_or_atlas) - _operator(beta, omega_or_atlas)
    res = (exterior_derivative(gamma) - (alpha - beta)).sup()
    return Witness(gamma, res, max_trace(gamma))


# -- refinement studies ---------------------------------------------------

@dataclass
class ConvergenceReport:
    name: str
    grids: list
    residuals: list
    orders: list
    status: str
    non_monotone: bool
    fitted_order: float | None = None

    def passes(self, lo: float, hi: float | None = None) -> bool:
        """Every per-step order inside ``[lo, hi]`` (exact studies pass)."""
        if self.status == "exact":
            return True
        if any(o is None or not np.isfinite(o) for o in self.orders):
            return False
        return all(o >= lo and (hi is None or o <= hi) for o in self.orders)

    def to_dict(self) -> dict:
        return asdict(self)


def observed_orders(hs, residuals) -> list:
    out = []
    for k in range(len(residuals) - 1):
        r0, r1 = residuals[k], residuals[k + 1]
        if r0 > 0 and r1 > 0:
            out.append(math.log(r0 / r1) / math.log(hs[k] / hs[k + 1]))
        else:
            out.append(None)
    return out


def convergence_study(check, grids, name: str | None = None) -> ConvergenceReport:
    """Run ``check`` (a name from :data:`STUDIES` or a callable ``n -> residual``).

    ``grids`` are node counts per axis, each step halving the spacing
    (``n -> 2n - 1``; a 1% slack allows ``n -> 2n`` too).
    """
    if isinstance(check, str):
        name = name or check
        check = STUDIES[check]
    grids = [int(n) for n in grids]
    if len(grids) < 3:
        raise ResolutionError("a refinement study needs at least 3 grids")
    hs = [1.0 / (n - 1) for n in grids]
    for a, b in zip(hs, hs[1:]):
        if abs(a / b - 2) > 0.02:
            raise ResolutionError(f"grids {grids} do not halve the spacing")
    res = [float(check(n)) for n in grids]
    non_mono = any(b > a for a, b in zip(res, res[1:]))
    if max(res) <= EXACT_TOL:
        return ConvergenceReport(name or "study", grids, res, [None] * (len(res) - 1), "exact", False)
    orders = observed_orders(hs, res)
    fit = None
    if min(res) > 0:
        fit = float(np.polyfit(np.log(hs), np.log(res), 1)[0])
    return ConvergenceReport(name or "study", grids, res, orders, "measured", non_mono, fit)


# Test forms for the named studies.  All are smooth closed-form expressions.

#: Widest admissible reference on the unit-length quadrant: at n = 33 the
#: two-cell margin is 0.0625.
Q22_REFERENCE = (0.07, 0.93)
#: Reference radius on the cube, just under the 1/4 cap.
CUBE_RADIUS = 0.249


def quadrant_test_form(grid: Grid) -> FormField:
    """Smooth top form on a unit-length quadrant, nonzero on the clamped faces."""
    coords = grid.coords()
    dom = grid.domain
    vals = np.ones(grid.shape)
    for i, u in enumerate(coords):
        L = dom.upper[i]
        vals = vals * (1 - smooth_step((u - 0.4 * L) / (0.45 * L)))
        if not dom.clamped_low[i]:
            vals = vals * (1 - smooth_step((-u - 0.4 * L) / (0.45 * L)))
    x = coords[0]
    y = coords[1] if grid.m > 1 else 0.0
    return FormField.top(grid, (1 + 0.5 * np.sin(2 * x) * np.cos(3 * y) + x * y) * vals)


def cube_test_form(grid: Grid) -> FormField:
    coords = grid.coords()
    x = coords[0]
    y = coords[1] if grid.m > 1 else 0.3
    z = coords[2] if grid.m > 2 else 0.0
    return FormField.top(grid, 1 + 0.5 * np.sin(np.pi * x) * np.cos(2 * y) + x * y + 0.2 * z)


def corner_free_form(grid: Grid) -> FormField:
    """Smooth top form vanishing on every corner stratum (codim >= 2) but not on faces.

    With ``b_i`` a defining function of the clamped faces of axis ``i``
    (``u`` or ``u (1 - u)``), the factor ``sum over (p-1)-subsets S of
    prod_{i in S} b_i`` is zero wherever two clamped coordinates sit on
    their faces.
    """
    dom = grid.domain
    coords = grid.coords()
    clamped = [i for i in range(grid.m) if dom.clamped_low[i] or dom.clamped_high[i]]
    defining = {}
    for i in clamped:
        u = coords[i]
        defining[i] = u * (1 - u) if dom.clamped_high[i] else u
    factor = np.zeros(grid.shape)
    for S in itertools.combinations(clamped, max(len(clamped) - 1, 0)):
        term = np.ones(grid.shape)
        for i in S:
            term = term * defining[i]
        factor = factor + term
    base = cube_test_form(grid) if dom.kind == "cube" else quadrant_test_form(grid)
    return FormField.top(grid, base.values * factor)


def _q22(n):
    g = make_grid(Domain.quadrant(2, 2), n)
    return g, reference_form(g, [BumpSpec.unit(*Q22_REFERENCE)] * 2)


def _square(n, m=2):
    g = make_grid(Domain.cube(m), n)
    return g, cube_atlas(m, radius=CUBE_RADIUS)


def _identity_q22(n):
    g, ref = _q22(n)
    a = quadrant_test_form(g)
    return identity_residual(a, banyaga(a, ref), ref.omega).sup()


def _identity_square(n):
    g, atlas = _square(n)
    a = cube_test_form(g)
    return identity_residual(a, banyaga(a, atlas), atlas.reference(g).omega).sup()


def _trace_q22(n):
    g, ref = _q22(n)
    return max_trace(banyaga(quadrant_test_form(g), ref))


def _trace_square(n):
    g, atlas = _square(n)
    return max_trace(banyaga(cube_test_form(g), atlas))


def corner_vanishing_residual(alpha: FormField, omega_or_atlas) -> float:
    """Largest component of ``I(alpha)`` over all boundary nodes."""
    out = banyaga(alpha, omega_or_atlas)
    mask = boundary_mask(alpha.grid, 1)
    return max(float(np.max(np.abs(v[mask]))) for v in out.components.values())


def _corner_q22(n):
    g, ref = _q22(n)
    return corner_vanishing_residual(corner_free_form(g), ref)


def _corner_square(n):
    g, atlas = _square(n)
    return corner_vanishing_residual(corner_free_form(g), atlas)


def _stokes_affine(n):
    g = make_grid(Domain.cube(2), n)
    x, _ = g.coords()
    return stokes_check(FormField.build(g, 1, {(1,): x})).residual


def _stokes_smooth(n):
    g = make_grid(Domain.cube(2), n)
    x, y = g.coords()
    om = FormField(g, 1, {(0,): np.sin(2 * x + y) * np.exp(y), (1,): np.cos(3 * x * y)})
    return stokes_check(om).residual


def _cohomology_top(n):
    g, atlas = _square(n)
    return cohomology_top_vanishes(cube_test_form(g), atlas).residual


def _cohomology_omega(n):
    g, atlas = _square(n)
    return cohomology_top_vanishes(atlas.reference(g).omega, atlas).residual


def _relative_class(n):
    g, atlas = _square(n)
    a = reference_form(g, [BumpSpec.unit(0.1, 0.6), BumpSpec.unit(0.3, 0.9)]).omega
    b = reference_form(g, [BumpSpec.unit(0.35, 0.93), BumpSpec.unit(0.07, 0.7)]).omega
    return relative_class_check(a, b, atlas).residual


def _moser_1d(n):
    from .moser import moser_map

    g = make_grid(Domain.cube(1), n)
    (x,) = g.coords()
    steps = max(10, int(round(200 * (n - 1) / 512)))
    _, _, flow = moser_map(FormField.top(g, np.ones(n)), FormField.top(g, 0.5 + x), cube_atlas(1), steps=steps)
    u = flow.points[:, 0]
    return float(np.max(np.abs(flow.phi[:, 0] - (-1 + np.sqrt(1 + 8 * u)) / 2)))


def _pullback_2d(n):
    from .moser import moser_map, pullback_residual, renormalize

    g = make_grid(Domain.cube(2), n)
    x, y = g.coords()
    mu1 = renormalize(FormField.top(g, 1 + 0.3 * np.sin(np.pi * x) * np.sin(np.pi * y)), 1.0)
    path, _, flow = moser_map(FormField.top(g, np.ones(g.shape)), mu1, cube_atlas(2), steps=100)
    return pullback_residual(flow, path)["sup"]


def _boundary_displacement(n):
    from .moser import boundary_identity_check, moser_map

    g = make_grid(Domain.cube(2), n)
    x, y = g.coords()
    mu1 = FormField.top(g, 1 + 0.3 * np.sin(np.pi * x) * np.sin(2 * np.pi * y))
    path, _, flow = moser_map(FormField.top(g, np.ones(g.shape)), mu1, cube_atlas(2), steps=50)
    return boundary_identity_check(flow, path)["max_displacement"]


STUDIES = {
    "banyaga-identity-q22": _identity_q22,
    "banyaga-identity-square": _identity_square,
    "trace-q22": _trace_q22,
    "trace-square": _trace_square,
    "corner-vanishing-q22": _corner_q22,
    "corner-vanishing-square": _corner_square,
    "stokes-affine": _stokes_affine,
    "stokes-smooth": _stokes_smooth,
    "cohomology-top": _cohomology_top,
    "cohomology-omega": _cohomology_omega,
    "relative-class": _relative_class,
    "moser-1d": _moser_1d,
    "pullback-2d": _pullback_2d,
    "boundary-displacement": _boundary_displacement,
}


# -- reports --------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def check_report(name: str, inputs: dict, residuals, tolerances: dict, passed: bool, orders=None) -> dict:
    return {
        "name": name,
        "inputs": inputs,
        "residuals": residuals,
        "orders": orders,
        "tolerances": tolerances,
        "passed": bool(passed),
    }


def dumps(report) -> str:
    """Deterministic JSON text."""
    return json.dumps(_plain(report), indent=2, sort_keys=True) + "\n"


def write_json(path, report) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(report))
