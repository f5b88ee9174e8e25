"""Smooth auxiliary functions: unit-mass bump, cutoff and mollifier.

All three share the ``exp(-1/x)`` profile, so every one of them is C^infinity
and flat to all orders where it reaches 0 (or 1).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from .errors import ParameterError

UNIT = "unit"
CUTOFF = "cutoff"
MOLLIFIER = "mollifier"

#: Node count of the composite Simpson rule that fixes the bump normalization.
NORMALIZATION_NODES = 10_001


@dataclass(frozen=True)
class BumpSpec:
    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in (UNIT, CUTOFF, MOLLIFIER):
            raise ParameterError(f"unknown bump kind {self.kind!r}")
        if self.kind == MOLLIFIER:
            if not self.b > 0:
                raise ParameterError(f"mollifier width must be positive, got {self.b}")
        elif not self.a < self.b:
            raise ParameterError(f"need a < b, got ({self.a}, {self.b})")

    @classmethod
    def unit(cls, a: float, b: float) -> "BumpSpec":
        """``c exp(-1/(1-s^2))`` on ``(a, b)`` with unit integral."""
        return cls(UNIT, float(a), float(b))

    @classmethod
    def cutoff(cls, t1: float, t2: float) -> "BumpSpec":
        """Equal to 1 on ``(-inf, t1]`` and 0 on ``[t2, inf)``."""
        return cls(CUTOFF, float(t1), float(t2))

    @classmethod
    def mollifier(cls, eps: float) -> "BumpSpec":
        """Cutoff from ``eps/2`` to ``eps``."""
        return cls(MOLLIFIER, 0.0, float(eps))

    @property
    def eps(self) -> float:
        return self.b

    @property
    def transition(self) -> tuple[float, float]:
        """Interval where a cutoff or mollifier moves from 1 to 0."""
        if self.kind == MOLLIFIER:
            return self.b / 2, self.b
        return self.a, self.b

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == UNIT:
            return self.a, self.b
        return -np.inf, self.transition[1]


def _raw_bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def _flat(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _flat_prime(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos]) / x[pos] ** 2
    return out


def smooth_step(s):
    """0 for ``s <= 0``, 1 for ``s >= 1``, C^infinity in between."""
    num = _flat(s)
    return num / (num + _flat(1.0 - np.asarray(s, dtype=float)))


def smooth_step_prime(s):
    s = np.asarray(s, dtype=float)
    p, q = _flat(s), _flat(1.0 - s)
    dp, dq = _flat_prime(s), _flat_prime(1.0 - s)
    return (dp * q + p * dq) / (p + q) ** 2


@lru_cache(maxsize=None)
def normalization(a: float, b: float) -> float:
    """Constant making the bump on ``(a, b)`` integrate to 1 (Simpson, cached)."""
    t = np.linspace(a, b, NORMALIZATION_NODES)
    return 1.0 / simpson(_raw_bump((2 * t - a - b) / (b - a)), x=t)


def eval_bump(spec: BumpSpec, t):
    """Evaluate the function described by ``spec`` at ``t`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    if spec.kind == UNIT:
        a, b = spec.a, spec.b
        return normalization(a, b) * _raw_bump((2 * t - a - b) / (b - a))
    t1, t2 = spec.transition
    return 1.0 - smooth_step((t - t1) / (t2 - t1))


def eval_bump_derivative(spec: BumpSpec, t):
    """Analytic first derivative of :func:`eval_bump`."""
    t = np.asarray(t, dtype=float)
    if spec.kind == UNIT:
        a, b = spec.a, spec.b
        s = (2 * t - a - b) / (b - a)
        out = np.zeros_like(s)
        inside = np.abs(s) < 1
        si = s[inside]
        out[inside] = -2 * si / (1 - si**2) ** 2 * np.exp(-1.0 / (1 - si**2))
        return normalization(a, b) * out * 2 / (b - a)
    t1, t2 = spec.transition
    return -smooth_step_prime((t - t1) / (t2 - t1)) / (t2 - t1)
