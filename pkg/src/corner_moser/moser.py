"""Moser flow between two positive densities of equal mass.

Along the straight path ``mu_t = mu0 + t (mu1 - mu0)`` the primitive
``psi = I(mu1 - mu0)`` is fixed, and the field ``eta_t`` solves
``i_{eta_t} mu_t = -psi``.  Its time-1 flow ``phi`` satisfies
``phi^* mu1 = mu0``.  (The map carrying ``mu0`` onto ``mu1`` in the other
direction is ``phi^{-1}``.)
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .banyaga import Atlas, banyaga
from .errors import DegeneracyError, DomainError, IntegrationError, MassError, PositivityError
from .forms import FormField, integrate_top, interpolate
from .geometry import Grid, boundary_mask, quadrature_weights, strata, stratum_mask

log = logging.getLogger(__name__)

#: Relative mass gap below which ``mu1`` is silently rescaled onto ``mu0``.
RENORMALIZE_TOL = 1e-6
#: Mass gap tolerated by the primitive solve.
MASS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DensityPath:
    """Linear path of top forms; ``scale`` is the factor applied to ``mu1``."""

    mu0: FormField
    mu1: FormField
    scale: float = 1.0

    @property
    def grid(self) -> Grid:
        return self.mu0.grid

    @property
    def difference(self) -> FormField:
        return self.mu1 - self.mu0

    def rho(self, t: float) -> np.ndarray:
        """Density of ``mu_t`` at the nodes."""
        r0, r1 = np.asarray(self.mu0.values), np.asarray(self.mu1.values)
        return r0 + t * (r1 - r0)

    def at(self, t: float) -> FormField:
        return FormField.top(self.grid, self.rho(t))

    def masses(self) -> tuple[float, float]:
        return integrate_top(self.mu0), integrate_top(self.mu1)


def _first_nonpositive(form: FormField, name: str):
    vals = np.asarray(form.values)
    bad = np.flatnonzero(~(vals > 0))
    if bad.size:
        k = int(bad[0])
        node = form.grid.points()[k]
        raise PositivityError(f"{name} is {vals.flat[k]:.6g} at node {k} {tuple(node)}", node=k)


def renormalize(mu1: FormField, mass: float) -> FormField:
    """Rescale ``mu1`` to the given mass (explicit opt-in, any gap size)."""
    return mu1 * (mass / integrate_top(mu1))


def build_path(mu0: FormField, mu1: FormField) -> DensityPath:
    """Check positivity and masses, then return the linear density path.

    A relative mass gap up to ``RENORMALIZE_TOL`` is treated as quadrature
    noise and removed by rescaling ``mu1``; anything larger is rejected.
    """
    for f, name in ((mu0, "mu0"), (mu1, "mu1")):
        if f.degree != f.m:
            raise DomainError(f"{name} must be a top form")
    if mu0.grid != mu1.grid:
        raise DomainError("mu0 and mu1 live on different grids")
    _first_nonpositive(mu0, "mu0")
    _first_nonpositive(mu1, "mu1")
    m0, m1 = integrate_top(mu0), integrate_top(mu1)
    gap = abs(m1 - m0) / m0
    if gap > RENORMALIZE_TOL:
        raise MassError(f"masses differ: {m0:.12g} vs {m1:.12g} (relative gap {gap:.3e})")
    scale = m0 / m1
    if scale != 1.0:
        log.debug("rescaling mu1 by %.15g", scale)
        mu1 = mu1 * scale
    return DensityPath(mu0, mu1, scale)


def solve_psi(path: DensityPath, omega_or_atlas, workers: int | None = None) -> FormField:
    """``psi = I(mu1 - mu0)``; on the cube pass an :class:`Atlas`."""
    diff = path.difference
    gap = integrate_top(diff)
    if abs(gap) > MASS_TOL:
        raise MassError(f"mu1 - mu0 integrates to {gap:.3e}")
    if np.max(np.abs(diff.values)) == 0:
        return FormField.zero(path.grid, path.grid.m - 1)
    kw = {"workers": workers} if isinstance(omega_or_atlas, Atlas) else {}
    return banyaga(diff, omega_or_atlas, **kw)


def solve_eta(psi: FormField, path: DensityPath, t: float) -> np.ndarray:
    """Nodal ``eta_t`` with ``i_eta mu_t = -psi``, shape ``(m,) + grid.shape``.

    With ``psi_i`` the component omitting axis ``i`` (0-based),
    ``eta^i = -(-1)^i psi_i / rho_t``.
    """
    rho = path.rho(t)
    if not np.all(rho > 0):
        k = int(np.flatnonzero(~(rho > 0))[0])
        raise DegeneracyError(f"mu_t is not positive at node {k} (t={t})")
    m = path.grid.m
    eta = np.empty((m,) + rho.shape)
    for i in range(m):
        I = tuple(j for j in range(m) if j != i)
        eta[i] = -((-1.0) ** i) * psi[I] / rho
    return eta


class TimeVectorField:
    """``eta_t`` sampled on ``slabs + 1`` uniform times, linear in between.

    Each slab also stores the nodal gradient of ``eta`` (second-order
    differences), so that the variational equation can be integrated by
    the same interpolation.  Slabs are built lazily and cached.
    """

    def __init__(self, psi: FormField, path: DensityPath, slabs: int):
        if slabs < 1:
            raise ValueError("need at least one time slab")
        self.psi = psi
        self.path = path
        self.slabs = int(slabs)
        self.grid = path.grid
        self._cache: dict[int, RegularGridInterpolator] = {}
        self.trivial = all(not np.any(v) for v in psi.components.values())

    @property
    def m(self) -> int:
        return self.grid.m

    def slab(self, k: int) -> RegularGridInterpolator:
        interp = self._cache.get(k)
        if interp is None:
            eta = solve_eta(self.psi, self.path, k / self.slabs)
            m = self.m
            grads = np.gradient(eta, *self.grid.h, axis=tuple(range(1, m + 1)), edge_order=2)
            if m == 1:
                grads = [grads]
            # channels: eta^0..eta^{m-1}, then d eta^i / d u^j in row-major order
            chans = [eta[i] for i in range(m)] + [grads[j][i] for i in range(m) for j in range(m)]
            data = np.stack(chans, axis=-1)
            interp = RegularGridInterpolator(self.grid.axes, data, method="linear", bounds_error=False, fill_value=None)
            self._cache[k] = interp
        return interp

    def nodal(self, t: float) -> np.ndarray:
        """``eta_t`` at the nodes, shape ``(m,) + grid.shape``."""
        return solve_eta(self.psi, self.path, t)

    def __call__(self, t: float, x: np.ndarray):
        """Field and Jacobian at points ``x`` (shape ``(n, m)``)."""
        m = self.m
        if self.trivial:
            return np.zeros_like(x), np.zeros((x.shape[0], m, m))
        s = min(max(t, 0.0), 1.0) * self.slabs
        k = min(int(np.floor(s)), self.slabs - 1)
        w = s - k
        vals = self.slab(k)(x)
        if w > 0:
            vals = (1 - w) * vals + w * self.slab(k + 1)(x)
        return vals[:, :m], vals[:, m:].reshape(-1, m, m)


@dataclass(frozen=True, eq=False)
class FlowMap:
    """Endpoints ``phi(x)`` of the seeds and Jacobian estimates.

    ``jacobian`` comes from the variational equation; ``det_fd`` from
    differences of ``phi`` over the node grid (only when every node is a seed).
    """

    grid: Grid
    seeds: np.ndarray
    points: np.ndarray
    phi: np.ndarray
    jacobian: np.ndarray
    steps: int
    det_fd: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.jacobian)

    @property
    def full(self) -> bool:
        return self.seeds.size == int(np.prod(self.grid.shape))

    def displacement(self) -> np.ndarray:
        return np.linalg.norm(self.phi - self.points, axis=1)


def _rk4_chunk(eta: TimeVectorField, x: np.ndarray, steps: int, lo, hi, offset: int):
    m = eta.m
    n = x.shape[0]
    J = np.broadcast_to(np.eye(m), (n, m, m)).copy()
    dt = 1.0 / steps

    def rhs(t, y, Jy):
        v, G = eta(t, y)
        return v, G @ Jy

    for k in range(steps):
        t = k * dt
        k1, j1 = rhs(t, x, J)
        x2 = np.clip(x + 0.5 * dt * k1, lo, hi)
        k2, j2 = rhs(t + 0.5 * dt, x2, J + 0.5 * dt * j1)
        x3 = np.clip(x + 0.5 * dt * k2, lo, hi)
        k3, j3 = rhs(t + 0.5 * dt, x3, J + 0.5 * dt * j2)
        x4 = np.clip(x + dt * k3, lo, hi)
        k4, j4 = rhs(t + dt, x4, J + dt * j3)
        x = np.clip(x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), lo, hi)
        J = J + dt / 6 * (j1 + 2 * j2 + 2 * j3 + j4)
        bad = ~(np.isfinite(x).all(axis=1) & np.isfinite(J).all(axis=(1, 2)))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise IntegrationError(f"trajectory of seed {offset + i} is not finite at t={t + dt:.4g}", seed=offset + i)
    return x, J


def integrate_flow(eta: TimeVectorField, seeds=None, steps: int | None = None, workers: int | None = None) -> FlowMap:
    """RK4 from ``t = 0`` to ``1`` for every seed, with the variational equation.

    ``seeds`` are flat node indices (default: every node).  Points are
    projected onto the closed box after each stage.  Seeds are split into
    contiguous chunks for ``workers`` threads; the arithmetic per seed is
    the same, so the result does not depend on the worker count.
    """
    steps = eta.slabs if steps is None else int(steps)
    if steps < 10:
        raise ValueError(f"need at least 10 RK4 steps, got {steps}")
    grid = eta.grid
    pts_all = grid.points()
    seeds = np.arange(pts_all.shape[0]) if seeds is None else np.asarray(seeds, dtype=int).ravel()
    x0 = pts_all[seeds]
    lo, hi = np.array(grid.domain.lower), np.array(grid.domain.upper)
    if workers and workers > 1 and len(seeds) > 1:
        bounds = np.linspace(0, len(seeds), min(workers, len(seeds)) + 1).astype(int)
        # build the slabs up front so worker threads only read the cache
        for k in range(eta.slabs + 1):
            if not eta.trivial:
                eta.slab(k)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda ab: _rk4_chunk(eta, x0[ab[0]:ab[1]], steps, lo, hi, ab[0]),
                zip(bounds[:-1], bounds[1:]),
            ))
        phi = np.concatenate([p[0] for p in parts])
        jac = np.concatenate([p[1] for p in parts])
    else:
        phi, jac = _rk4_chunk(eta, x0, steps, lo, hi, 0)
    det_fd = None
    if len(seeds) == pts_all.shape[0]:
        det_fd = fd_jacobian_det(grid, phi)
    return FlowMap(grid, seeds, x0, phi, jac, steps, det_fd)


def fd_jacobian_det(grid: Grid, phi: np.ndarray) -> np.ndarray:
    """Determinant of ``D phi`` from second-order differences over the node grid."""
    m = grid.m
    comps = phi.reshape(grid.shape + (m,))
    D = np.empty(grid.shape + (m, m))
    for i in range(m):
        g = np.gradient(comps[..., i], *grid.h, edge_order=2)
        if m == 1:
            g = [g]
        for j in range(m):
            D[..., i, j] = g[j]
    return np.linalg.det(D).ravel()


def pullback_residual(flow: FlowMap, path: DensityPath) -> dict:
    """``r(x) = det D phi(x) rho1(phi(x)) - rho0(x)`` at the seeds, with norms.

    Nodes with ``det D phi <= 0`` are listed: the map is then not a
    diffeomorphism at this resolution.
    """
    rho0 = np.asarray(path.mu0.values).ravel()[flow.seeds]
    rho1_phi = interpolate(path.grid, np.asarray(path.mu1.values), flow.phi)
    det = flow.det
    r = det * rho1_phi - rho0
    out = {
        "residual": r,
        "sup": float(np.max(np.abs(r))),
        "relative_sup": float(np.max(np.abs(r)) / np.max(np.abs(rho0))),
        "min_det": float(np.min(det)),
        "nonpositive_det": [int(k) for k in flow.seeds[det <= 0]],
    }
    if flow.full:
        w = quadrature_weights(path.grid).ravel()
        mass0 = float(w @ rho0)
        transported = float(w @ (det * rho1_phi))
        out.update(
            l1=float(w @ np.abs(r)),
            mass0=mass0,
            transported_mass=transported,
            mass_error=abs(transported - mass0),
            det_estimator_gap=float(np.max(np.abs(det - flow.det_fd))),
        )
        out["residual_fd"] = float(np.max(np.abs(flow.det_fd * rho1_phi - rho0)))
    return out


def boundary_identity_check(flow: FlowMap, path: DensityPath, tol: float = 1e-12) -> dict:
    """Largest boundary displacement, when ``mu1 - mu0`` vanishes on the corners.

    The criterion needs ``mu0 = mu1`` on every stratum of codimension >= 2;
    otherwise the report says it does not apply.
    """
    grid = path.grid
    diff = np.abs(np.asarray(path.difference.values))
    corners = boundary_mask(grid, 2)
    scale = max(1.0, float(np.max(np.abs(path.mu0.values))))
    worst = float(np.max(diff[corners])) if corners.any() else 0.0
    if worst > tol * scale:
        return {"applicable": False, "reason": f"mu1 - mu0 reaches {worst:.3e} on a corner stratum"}
    on_boundary = boundary_mask(grid, 1).ravel()[flow.seeds]
    disp = flow.displacement()[on_boundary]
    return {
        "applicable": True,
        "boundary_seeds": int(on_boundary.sum()),
        "max_displacement": float(np.max(disp)) if disp.size else 0.0,
    }


def tangency_report(flow: FlowMap) -> dict:
    """Distance of face seeds from their faces, and motion of corner seeds.

    A seed on the closed face ``u^i = c`` should end on it; ``face`` is the
    largest ``|phi^i - c|`` over all such seeds, ``corner`` the largest
    displacement of a seed on a stratum of codimension ``m``.
    """
    grid = flow.grid
    face = 0.0
    for s in strata(grid.domain, 1):
        (axis, side), = s.constraints
        on = np.zeros(grid.shape, dtype=bool)
        for t in strata(grid.domain):
            if set(s.constraints) <= set(t.constraints):
                on |= stratum_mask(grid, t)
        sel = on.ravel()[flow.seeds]
        if sel.any():
            c = grid.domain.bound(axis, side)
            face = max(face, float(np.max(np.abs(flow.phi[sel, axis] - c))))
    corner = 0.0
    for s in strata(grid.domain, grid.m):
        sel = stratum_mask(grid, s).ravel()[flow.seeds]
        if sel.any():
            corner = max(corner, float(np.max(flow.displacement()[sel])))
    return {"face": face, "corner": corner}


def moser_map(mu0: FormField, mu1: FormField, omega_or_atlas, steps: int = 100,
              workers: int | None = None, seeds=None):
    """Whole pipeline: path, ``psi``, ``eta``, flow.  Returns ``(path, psi, flow)``."""
    path = build_path(mu0, mu1)
    psi = solve_psi(path, omega_or_atlas, workers=workers)
    eta = TimeVectorField(psi, path, steps)
    flow = integrate_flow(eta, seeds=seeds, steps=steps, workers=workers)
    return path, psi, flow


def knothe_1d(rho0: np.ndarray, rho1: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Increasing map with ``F1(phi(u)) = F0(u)`` by cumulative trapezoid and inversion.

    This is the one-dimensional map any density-matching diffeomorphism
    fixing the endpoints must equal.
    """
    from scipy.integrate import cumulative_trapezoid

    F0 = cumulative_trapezoid(rho0, x, initial=0)
    F1 = cumulative_trapezoid(rho1, x, initial=0)
    F0 *= F1[-1] / F0[-1]
    return np.interp(F0, F1, x)


__all__ = [
    "DensityPath", "TimeVectorField", "FlowMap", "build_path", "renormalize", "solve_psi",
    "solve_eta", "integrate_flow", "fd_jacobian_det", "pullback_residual",
    "boundary_identity_check", "tangency_report", "moser_map", "knothe_1d",
]
