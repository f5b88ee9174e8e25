"""CSV exchange of grid fields and flow maps, with a JSON sidecar descriptor.

Field CSV rows are ``axis1,...,axism,component,value`` with ``component``
the label of a form component (``dx^dy``; ``1`` for a 0-form).  Floats are
written with ``repr`` so that identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .forms import FormField, component_label, parse_component_label
from .geometry import Domain, Grid, make_grid


def descriptor(grid: Grid, **extra) -> dict:
    dom = grid.domain
    out = {"kind": dom.kind, "m": dom.m, "p": dom.p, "n": list(grid.n), "L": list(dom.lengths)}
    out.update(extra)
    return out


def _sidecar(path) -> Path:
    path = Path(path)
    return path.with_suffix(".json")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_field_csv(path, form: FormField) -> None:
    grid = form.grid
    pts = grid.points()
    header = [f"axis{i + 1}" for i in range(grid.m)] + ["component", "value"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for I, vals in form.components.items():
            label = component_label(I)
            for p, v in zip(pts, vals.ravel()):
                w.writerow([_fmt(c) for c in p] + [label, _fmt(v)])
    with open(_sidecar(path), "w", encoding="utf-8") as fh:
        json.dump(descriptor(grid, degree=form.degree), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_field_csv(path) -> FormField:
    """Inverse of :func:`write_field_csv` (nodes must appear in C order)."""
    with open(_sidecar(path), encoding="utf-8") as fh:
        desc = json.load(fh)
    if desc["kind"] == "cube":
        dom = Domain.cube(desc["m"])
    elif desc["kind"] == "quadrant":
        dom = Domain.quadrant(desc["m"], desc["p"], desc["L"])
    else:
        raise ConfigurationError(f"unknown domain kind {desc['kind']!r}")
    grid = make_grid(dom, desc["n"])
    comps: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        next(rows)
        for row in rows:
            comps.setdefault(parse_component_label(row[grid.m]), []).append(float(row[grid.m + 1]))
    return FormField(grid, desc["degree"], {I: np.reshape(v, grid.shape) for I, v in comps.items()})


def write_map_csv(path, flow, residual: np.ndarray, params: dict | None = None) -> None:
    """Rows ``x1..xm, phi1..phim, detJ, residual`` per seed, plus the descriptor."""
    m = flow.grid.m
    header = [f"x{i + 1}" for i in range(m)] + [f"phi{i + 1}" for i in range(m)] + ["detJ", "residual"]
    det = flow.det
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(flow.seeds)):
            row = list(flow.points[k]) + list(flow.phi[k]) + [det[k], residual[k]]
            w.writerow([_fmt(v) for v in row])
    with open(_sidecar(path), "w", encoding="utf-8") as fh:
        json.dump(descriptor(flow.grid, steps=flow.steps, **(params or {})), fh, indent=2, sort_keys=True)
        fh.write("\n")
