"""Model domains, tensor grids, quadrature weights and boundary strata.

Axes are 0-based throughout the package: axis ``i`` carries the coordinate
usually written ``u^{i+1}``.  A partial quadrant ``Q^m_p`` clamps the first
``p`` axes at 0 from below; its unbounded directions are truncated to
``[0, L]`` (clamped) or ``[-L, L]`` (free) so that compactly supported forms
can be sampled.  The cube clamps every axis on both sides.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, ResolutionError

LOW = "low"
HIGH = "high"


@dataclass(frozen=True)
class Domain:
    """A box with per-side clamping flags.

    Use :meth:`quadrant` and :meth:`cube` to build model domains; ``kind ==
    "face"`` is produced internally for stratum grids and slices.
    """

    kind: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    clamped_low: tuple[bool, ...]
    clamped_high: tuple[bool, ...]

    def __post_init__(self):
        m = len(self.lower)
        if not (len(self.upper) == len(self.clamped_low) == len(self.clamped_high) == m):
            raise DomainError("inconsistent per-axis data")
        if m > 3:
            raise DomainError(f"dimension {m} not supported (m <= 3)")
        if self.kind in ("quadrant", "cube") and m < 1:
            raise DomainError("model domains need 1 <= m <= 3")
        for lo, hi in zip(self.lower, self.upper):
            if not hi > lo:
                raise DomainError(f"empty axis [{lo}, {hi}]")

    @classmethod
    def quadrant(cls, m: int, p: int, lengths=None) -> "Domain":
        """Partial quadrant ``R^p_{>=0} x R^{m-p}`` truncated by ``lengths``."""
        if not 1 <= m <= 3:
            raise DomainError(f"m must be in 1..3, got {m}")
        if not 0 <= p <= m:
            raise DomainError(f"p must be in 0..{m}, got {p}")
        if lengths is None:
            lengths = (1.0,) * m
        elif np.isscalar(lengths):
            lengths = (float(lengths),) * m
        lengths = tuple(float(v) for v in lengths)
        if len(lengths) != m or any(v <= 0 for v in lengths):
            raise DomainError(f"need {m} positive box lengths, got {lengths}")
        lower = tuple(0.0 if i < p else -lengths[i] for i in range(m))
        return cls(
            "quadrant",
            lower,
            lengths,
            tuple(i < p for i in range(m)),
            (False,) * m,
        )

    @classmethod
    def cube(cls, m: int) -> "Domain":
        if not 1 <= m <= 3:
            raise DomainError(f"m must be in 1..3, got {m}")
        return cls("cube", (0.0,) * m, (1.0,) * m, (True,) * m, (True,) * m)

    @property
    def m(self) -> int:
        return len(self.lower)

    @property
    def p(self) -> int:
        """Number of axes clamped from below."""
        return sum(self.clamped_low)

    @property
    def lengths(self) -> tuple[float, ...]:
        """Box lengths ``L_i`` (for free quadrant axes the half-width)."""
        if self.kind == "quadrant":
            return self.upper
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))

    def is_clamped(self, axis: int, side: str) -> bool:
        return (self.clamped_low if side == LOW else self.clamped_high)[axis]

    def bound(self, axis: int, side: str) -> float:
        return (self.lower if side == LOW else self.upper)[axis]

    def truncation_faces(self):
        """(axis, side) pairs of box faces that are not part of the boundary."""
        out = []
        for i in range(self.m):
            for side in (LOW, HIGH):
                if not self.is_clamped(i, side):
                    out.append((i, side))
        return out

    def subdomain(self, axes) -> "Domain":
        """The box restricted to the given axes (used for faces and slices)."""
        axes = tuple(axes)
        return Domain(
            "face",
            tuple(self.lower[i] for i in axes),
            tuple(self.upper[i] for i in axes),
            tuple(self.clamped_low[i] for i in axes),
            tuple(self.clamped_high[i] for i in axes),
        )

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "m": self.m,
            "p": self.p,
            "L": list(self.lengths),
            "lower": list(self.lower),
            "upper": list(self.upper),
        }


@dataclass(frozen=True)
class Stratum:
    """Relatively open boundary stratum given by active clamp constraints.

    ``constraints`` is a sorted tuple of ``(axis, side)``; the codimension is
    the number of constraints.
    """

    constraints: tuple[tuple[int, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(sorted(self.constraints)))

    @property
    def codim(self) -> int:
        return len(self.constraints)

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.constraints)

    def validate(self, domain: Domain) -> None:
        axes = self.axes
        if not axes:
            raise DomainError("a stratum needs at least one constraint")
        if len(set(axes)) != len(axes):
            raise DomainError(f"repeated axis in stratum {self.constraints}")
        for axis, side in self.constraints:
            if side not in (LOW, HIGH) or not 0 <= axis < domain.m:
                raise DomainError(f"bad constraint {(axis, side)}")
            if not domain.is_clamped(axis, side):
                raise DomainError(f"axis {axis} is not clamped on the {side} side")

    def free_axes(self, m: int) -> tuple[int, ...]:
        fixed = set(self.axes)
        return tuple(i for i in range(m) if i not in fixed)

    def __str__(self):
        names = "xyz"
        parts = [f"{names[a]}={'0' if s == LOW else 'max'}" for a, s in self.constraints]
        return "{" + ", ".join(parts) + "}"


def strata(domain: Domain, codim: int | None = None) -> list[Stratum]:
    """All boundary strata of ``domain``, optionally of a single codimension."""
    choices = []
    for i in range(domain.m):
        sides = [s for s in (LOW, HIGH) if domain.is_clamped(i, s)]
        choices.append([None] + [(i, s) for s in sides])
    out = []
    for combo in itertools.product(*choices):
        cons = tuple(c for c in combo if c is not None)
        if not cons or (codim is not None and len(cons) != codim):
            continue
        out.append(Stratum(cons))
    out.sort(key=lambda s: (s.codim, s.constraints))
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on the closed (truncated) domain."""

    domain: Domain
    n: tuple[int, ...]

    @property
    def m(self) -> int:
        return self.domain.m

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @cached_property
    def h(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (k - 1) for lo, hi, k in zip(self.domain.lower, self.domain.upper, self.n)
        )

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        out = []
        for lo, hi, k in zip(self.domain.lower, self.domain.upper, self.n):
            a = np.linspace(lo, hi, k)
            a.flags.writeable = False
            out.append(a)
        return tuple(out)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates, one array of shape ``self.shape`` per axis."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates as an ``(N, m)`` array in C order."""
        if self.m == 0:
            return np.zeros((1, 0))
        return np.stack([c.ravel() for c in self.coords()], axis=-1)

    @property
    def hmax(self) -> float:
        return max(self.h) if self.h else 0.0

    def subgrid(self, axes) -> "Grid":
        axes = tuple(axes)
        return Grid(self.domain.subdomain(axes), tuple(self.n[i] for i in axes))

    def face_grid(self, s: Stratum) -> "Grid":
        return self.subgrid(s.free_axes(self.m))

    def drop_last_axis(self) -> "Grid":
        return self.subgrid(range(self.m - 1))

    def refine(self) -> "Grid":
        """Halve every spacing."""
        return Grid(self.domain, tuple(2 * k - 1 for k in self.n))

    def index_of(self, axis: int, side: str) -> int:
        return 0 if side == LOW else self.n[axis] - 1


def make_grid(domain: Domain, n) -> Grid:
    """Uniform grid with ``n[i]`` nodes on axis ``i`` (an int applies to all)."""
    if np.isscalar(n):
        n = (int(n),) * domain.m
    n = tuple(int(k) for k in n)
    if len(n) != domain.m:
        raise ResolutionError(f"need {domain.m} node counts, got {len(n)}")
    if any(k < 3 for k in n):
        raise ResolutionError(f"every axis needs at least 3 nodes, got {n}")
    return Grid(domain, n)


def _weights_1d(k: int, h: float, rule: str) -> np.ndarray:
    if rule == "trapezoid":
        w = np.full(k, h)
        w[0] = w[-1] = h / 2
        return w
    if rule == "simpson":
        if k % 2 == 0:
            raise ResolutionError("composite Simpson needs an odd node count")
        w = np.full(k, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return w * h / 3
    raise ValueError(f"unknown quadrature rule {rule!r}")


def quadrature_weights(grid: Grid, rule: str = "trapezoid") -> np.ndarray:
    """Tensor-product composite weights; they sum to the box volume."""
    w = np.array(1.0)
    for k, h in zip(grid.n, grid.h):
        w = np.multiply.outer(w, _weights_1d(k, h, rule))
    return w


def stratum_mask(grid: Grid, s: Stratum) -> np.ndarray:
    """Boolean node mask of the relatively open stratum ``s``."""
    s.validate(grid.domain)
    dom = grid.domain
    mask = np.ones(grid.shape, dtype=bool)
    active = set(s.constraints)
    for i in range(grid.m):
        idx = np.arange(grid.n[i])
        for side in (LOW, HIGH):
            if not dom.is_clamped(i, side):
                continue
            on_face = idx == grid.index_of(i, side)
            shape = [1] * grid.m
            shape[i] = grid.n[i]
            on_face = on_face.reshape(shape)
            mask &= on_face if (i, side) in active else ~on_face
    return mask


def stratum_nodes(grid: Grid, s: Stratum) -> np.ndarray:
    """Flat (C-order) indices of the nodes of the relatively open stratum."""
    return np.flatnonzero(stratum_mask(grid, s))


def boundary_mask(grid: Grid, min_codim: int = 1) -> np.ndarray:
    """Nodes lying on some stratum of codimension ``>= min_codim``."""
    mask = np.zeros(grid.shape, dtype=bool)
    for s in strata(grid.domain):
        if s.codim >= min_codim:
            mask |= stratum_mask(grid, s)
    return mask


def interior_mask(grid: Grid) -> np.ndarray:
    return ~boundary_mask(grid, 1)
