"""Batch front end.

    corner-moser stokes --config run.toml --out-dir out/
    corner-moser banyaga-check --config run.toml
    corner-moser match --config run.toml --threads 4
    corner-moser convergence --config run.toml

Exit status: 0 when every check passes, 1 on a tolerance failure, 2 on a
configuration or input error.  ``CORNER_MOSER_LOG`` sets the log level
(``DEBUG``, ``INFO``, ... or a number).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import densexpr
from .banyaga import banyaga, cube_atlas, identity_residual, reference_form
from .bump import BumpSpec
from .errors import ConfigurationError, CornerMoserError
from .fieldio import write_field_csv, write_map_csv
from .forms import FormField, index_sets, integrate_top, max_trace, parse_component_label
from .geometry import Domain, make_grid
from .moser import (
    boundary_identity_check, build_path, integrate_flow, knothe_1d, pullback_residual,
    renormalize, solve_psi, tangency_report, TimeVectorField,
)
from .verify import STUDIES, convergence_study, observed_orders, stokes_check, write_json

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("corner_moser")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

DEFAULT_TOLERANCES = {
    "stokes": 1e-12,
    "identity": 5e-3,
    "trace_factor": 10.0,
    "linearity": 1e-12,
    "min_order": 1.7,
    "max_order": 2.3,
    "oracle": 1e-3,
    "pullback": 1e-2,
    "mass": 1e-3,
}


def load_config(path) -> dict:
    path = Path(path)
    try:
        if path.suffix == ".json":
            return json.loads(path.read_text(encoding="utf-8"))
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc


def tolerances(cfg: dict) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    extra = cfg.get("tolerances", {})
    unknown = set(extra) - set(tol)
    if unknown:
        raise ConfigurationError(f"unknown tolerance keys {sorted(unknown)}")
    tol.update({k: float(v) for k, v in extra.items()})
    return tol


def domain_from(cfg: dict) -> Domain:
    d = cfg.get("domain")
    if not isinstance(d, dict):
        raise ConfigurationError("missing [domain] table")
    kind = d.get("kind", "cube")
    m = int(d.get("m", 1))
    if kind == "cube":
        return Domain.cube(m)
    if kind == "quadrant":
        return Domain.quadrant(m, int(d.get("p", m)), d.get("L", 1.0))
    raise ConfigurationError(f"unknown domain kind {kind!r}")


def grid_sizes(cfg: dict) -> list[int]:
    g = cfg.get("grid", {})
    if "grids" in g:
        return [int(n) for n in g["grids"]]
    if "n" in g:
        return [int(g["n"])]
    raise ConfigurationError("[grid] needs n or grids")


def operator_for(cfg: dict, grid):
    """Atlas on the cube, product reference form on a quadrant."""
    ref = cfg.get("reference", {})
    if grid.domain.kind == "cube":
        return cube_atlas(grid.m, delta=float(ref.get("delta", 0.25)), radius=ref.get("radius"))
    L = grid.domain.upper
    specs = []
    for i in range(grid.m):
        lo = grid.domain.lower[i]
        a = float(ref.get("a", lo + 0.2 * (L[i] - lo)))
        b = float(ref.get("b", L[i] - 0.2 * (L[i] - lo)))
        specs.append(BumpSpec.unit(a, b))
    return reference_form(grid, specs)


def form_from(cfg: dict, grid, degree: int, key: str = "form") -> FormField:
    table = cfg.get(key)
    if not isinstance(table, dict) or not table:
        raise ConfigurationError(f"missing [{key}] table of component expressions")
    comps = {}
    for label, src in table.items():
        try:
            I = parse_component_label(label)
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"bad component label {label!r}") from exc
        if I not in index_sets(grid.m, degree):
            raise ConfigurationError(f"component {label!r} does not fit a {degree}-form in m={grid.m}")
        comps[I] = densexpr.sample(densexpr.parse(str(src)), grid)
    return FormField.build(grid, degree, comps)


def _report(out_dir: Path, name: str, report: dict) -> Path:
    path = out_dir / f"{name}_report.json"
    write_json(path, report)
    log.info("wrote %s", path)
    return path


def cmd_stokes(cfg: dict, out_dir: Path, workers=None) -> bool:
    tol = tolerances(cfg)
    dom = domain_from(cfg)
    rows = []
    for n in grid_sizes(cfg):
        grid = make_grid(dom, n)
        res = stokes_check(form_from(cfg, grid, dom.m - 1))
        rows.append({"n": n, "lhs": res.lhs, "rhs": res.rhs, "residual": res.residual, "faces": res.faces})
    passed = all(r["residual"] <= tol["stokes"] for r in rows)
    _report(out_dir, "stokes", {"name": "stokes", "domain": dom.describe(), "results": rows,
                                "tolerances": {"stokes": tol["stokes"]}, "passed": passed})
    return passed


def cmd_banyaga_check(cfg: dict, out_dir: Path, workers=None) -> bool:
    tol = tolerances(cfg)
    dom = domain_from(cfg)
    sizes = grid_sizes(cfg)
    rows = []
    for n in sizes:
        grid = make_grid(dom, n)
        op = operator_for(cfg, grid)
        kw = {"workers": workers} if dom.kind == "cube" else {}
        omega = op.reference(grid).omega if dom.kind == "cube" else op.omega
        alpha = form_from(cfg, grid, dom.m)
        I_alpha = banyaga(alpha, op, **kw)
        extra = omega * 0.7
        lin = (banyaga(alpha + extra, op, **kw) - I_alpha - banyaga(extra, op, **kw)).sup()
        rows.append({
            "n": n,
            "h": grid.hmax,
            "identity": identity_residual(alpha, I_alpha, omega).sup(),
            "trace": max_trace(I_alpha),
            "trace_bound": tol["trace_factor"] * grid.hmax**2,
            "linearity": lin,
            "linearity_bound": tol["linearity"] * max(1.0, I_alpha.sup()),
            "integral": integrate_top(alpha),
        })
        if n == sizes[-1]:
            write_field_csv(out_dir / "banyaga_I.csv", I_alpha)
    checks = {
        "identity": rows[-1]["identity"] <= tol["identity"],
        "trace": all(r["trace"] <= r["trace_bound"] for r in rows),
        "linearity": all(r["linearity"] <= r["linearity_bound"] for r in rows),
    }
    orders = None
    if len(rows) >= 3:
        res = [r["identity"] for r in rows]
        orders = observed_orders([r["h"] for r in rows], res)
        if max(res) > 1e-12:
            checks["order"] = all(o is not None and tol["min_order"] <= o <= tol["max_order"] for o in orders)
    passed = all(checks.values())
    _report(out_dir, "banyaga_check", {"name": "banyaga-check", "domain": dom.describe(), "results": rows,
                                      "orders": orders, "checks": checks, "tolerances": tol, "passed": passed})
    return passed


def cmd_match(cfg: dict, out_dir: Path, workers=None) -> bool:
    tol = tolerances(cfg)
    dom = domain_from(cfg)
    n = grid_sizes(cfg)[-1]
    grid = make_grid(dom, n)
    dens = cfg.get("densities", {})
    if "mu0" not in dens or "mu1" not in dens:
        raise ConfigurationError("[densities] needs mu0 and mu1")
    mu0 = FormField.top(grid, densexpr.sample_positive(densexpr.parse(str(dens["mu0"])), grid))
    mu1 = FormField.top(grid, densexpr.sample_positive(densexpr.parse(str(dens["mu1"])), grid))
    if dens.get("normalize", False):
        mu1 = renormalize(mu1, integrate_top(mu0))
    steps = int(cfg.get("flow", {}).get("steps", 100))
    path = build_path(mu0, mu1)
    psi = solve_psi(path, operator_for(cfg, grid), workers=workers)
    flow = integrate_flow(TimeVectorField(psi, path, steps), steps=steps, workers=workers)
    pb = pullback_residual(flow, path)
    write_map_csv(out_dir / "match_map.csv", flow, pb["residual"], {"mu0": dens["mu0"], "mu1": dens["mu1"]})
    write_field_csv(out_dir / "match_psi.csv", psi)
    summary = {k: v for k, v in pb.items() if k != "residual"}
    checks = {
        "pullback": pb["relative_sup"] <= tol["pullback"],
        "diffeomorphism": not pb["nonpositive_det"],
    }
    if "mass_error" in pb:
        checks["mass"] = pb["mass_error"] <= tol["mass"]
    report = {"name": "match", "domain": dom.describe(), "n": n, "steps": steps,
              "pullback": summary, "tangency": tangency_report(flow),
              "boundary_identity": boundary_identity_check(flow, path), "scale_mu1": path.scale}
    if dom.m == 1:
        x = grid.axes[0]
        oracle = knothe_1d(np.asarray(path.mu0.values), np.asarray(path.mu1.values), x)
        report["oracle_error"] = float(np.max(np.abs(flow.phi[:, 0] - oracle)))
        checks["oracle"] = report["oracle_error"] <= tol["oracle"]
    passed = all(checks.values())
    report.update(checks=checks, tolerances=tol, passed=passed)
    _report(out_dir, "match", report)
    return passed


def cmd_convergence(cfg: dict, out_dir: Path, workers=None) -> bool:
    tol = tolerances(cfg)
    conv = cfg.get("convergence", {})
    names = conv.get("studies")
    if not names:
        raise ConfigurationError("[convergence] needs a list of studies")
    unknown = [s for s in names if s not in STUDIES]
    if unknown:
        raise ConfigurationError(f"unknown studies {unknown}; known: {sorted(STUDIES)}")
    grids = [int(n) for n in conv.get("grids", [33, 65, 129])]
    bounds = conv.get("orders", {})
    results = []
    for name in names:
        lo, hi = bounds.get(name, [tol["min_order"], tol["max_order"]])
        rep = convergence_study(name, grids)
        d = rep.to_dict()
        d.update(min_order=lo, max_order=hi, passed=rep.passes(lo, hi))
        results.append(d)
    passed = all(r["passed"] for r in results)
    _report(out_dir, "convergence", {"name": "convergence", "studies": results, "passed": passed})
    return passed


COMMANDS = {
    "stokes": cmd_stokes,
    "banyaga-check": cmd_banyaga_check,
    "match": cmd_match,
    "convergence": cmd_convergence,
}


def _setup_logging():
    level = os.environ.get("CORNER_MOSER_LOG", "WARNING").strip()
    value = int(level) if level.isdigit() else getattr(logging, level.upper(), logging.WARNING)
    logging.basicConfig(level=value, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML (or .json) run configuration")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--out-dir", default=".", help="directory for reports and CSV output")
    parser = argparse.ArgumentParser(prog="corner-moser", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out_dir)
    try:
        cfg = load_config(args.config)
        out_dir.mkdir(parents=True, exist_ok=True)
        passed = COMMANDS[args.command](cfg, out_dir, workers=max(1, args.threads))
    except (CornerMoserError, OSError, KeyError, TypeError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.command}: {'pass' if passed else 'FAIL'}")
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
