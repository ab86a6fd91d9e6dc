"""Command-line front end: ``parasusy {verify-algebra,spectrum,index,classify}``.

Exit codes: 0 pass, 1 scientific failure, 2 configuration error,
3 indeterminate normalizability.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from . import __version__
from .algebra import (
    check_hermitian_form,
    coarsening_grids,
    commuting_set_relations,
    numeric_suite,
    relations_for,
    symbolic_suite,
)
from .grid import Grid
from .index import (
    IndexWindowError,
    analytic_index,
    enumerate_outcomes,
    index_json,
    kernel_profile,
    trace_index,
)
from .operators import build_operators
from .spectral import (
    continuum_threshold,
    decompose,
    default_tol_group,
    eigensolve_blocks,
    group_degeneracies,
    plot_data_csv,
    spectrum_csv,
)
from .superpotential import (
    ConstraintParams,
    RiccatiBlowUp,
    SuperpotentialError,
    SuperpotentialSet,
    descriptor_from_json,
    preset,
    residual_constraints,
    solve_p2,
    solve_p3_riccati,
)

log = logging.getLogger("parasusy")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INDETERMINATE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def load_schema(name: str) -> dict:
    return json.loads(resources.files("parasusy").joinpath("schemas", name).read_text())


# ---------------------------------------------------------------------------
# configuration


def load_config(path: Optional[str]) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, load_schema("config.schema.json"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def build_grid(cfg: dict) -> Grid:
    g = cfg["grid"]
    try:
        return Grid(float(g["x_min"]), float(g["x_max"]), int(g["n"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_model(cfg: dict, grid: Grid) -> SuperpotentialSet:
    """Superpotential set described by the config, solving derived descriptors on ``grid``."""
    if "preset" in cfg:
        pr = cfg["preset"]
        if cfg.get("p", 3) != 3:
            raise ConfigError("presets are order-3 models")
        try:
            S = preset(pr["kind"], pr["k1"], pr.get("k2", 0.0), pr.get("alpha", 0.0))
        except SuperpotentialError as exc:
            raise ConfigError(str(exc)) from exc
        return S.flipped() if pr.get("flip") else S

    W: list = []
    params: dict = {}
    for desc in cfg["superpotentials"]:
        kind = desc["kind"]
        if kind == "p2_closed_form":
            K = descriptor_from_json(desc["K"], grid)
            W += list(solve_p2(K, desc["c"], desc["c0"], grid))
            params.update(c=desc["c"], c0=desc["c0"], K=desc["K"]["kind"])
        elif kind == "riccati":
            if not W:
                raise ConfigError("a riccati descriptor needs a preceding superpotential")
            W.append(solve_p3_riccati(W[-1], desc["d"], desc["d0"], grid, bound=desc.get("bound", 1e6)))
            params.update(d=desc["d"], d0=desc["d0"])
        else:
            try:
                W.append(descriptor_from_json(desc, grid))
            except SuperpotentialError as exc:
                raise ConfigError(str(exc)) from exc
    p = cfg.get("p", len(W))
    if p != len(W):
        raise ConfigError(f"p = {p} but the descriptors define {len(W)} superpotentials")
    try:
        return SuperpotentialSet(p, tuple(W), ConstraintParams(**params))
    except SuperpotentialError as exc:
        raise ConfigError(str(exc)) from exc


def _tol(cfg: dict, name: str):
    return cfg.get("tolerances", {}).get(name)


# ---------------------------------------------------------------------------
# commands


def cmd_verify_algebra(cfg: dict, args) -> tuple[dict, int]:
    grid = build_grid(cfg)
    S = build_model(cfg, grid)
    report: dict = {"command": "verify-algebra", "p": S.p, "constraints": [], "verdicts": []}
    failures = []
    if S.p >= 2:
        cons = residual_constraints(S, grid)
        report["constraints"] = [c.to_json() for c in cons]
        failures += [c.name for c in cons if not c.valid]
    if failures:
        report.update(failures=failures, passed=False)
        return report, EXIT_FAIL

    backend = args.backend
    if backend == "symbolic" and not S.is_polynomial:
        raise ConfigError("the symbolic backend needs linear superpotentials")
    if backend in ("symbolic", "both") and S.is_polynomial:
        report["verdicts"] += [v.to_json() for v in symbolic_suite(S)]
    if backend in ("numeric", "both"):
        grids = coarsening_grids(grid, cfg.get("refinements", 3))
        seed, trials = args.seed, cfg.get("trials", 4)
        rels = relations_for(S.p) + (commuting_set_relations() if S.p == 3 else [])
        cache: dict = {}
        numeric = numeric_suite(rels, S, grids, trials, seed, cache)
        if S.p == 3:
            herm = check_hermitian_form(S, grids, trials, seed)
            numeric += herm.hermitian
            report["hermitian_equivalent"] = herm.equivalent
            if not herm.equivalent:
                failures.append("hermitian_equivalence")
        limit = _tol(cfg, "residual")
        for v in numeric:
            if limit is not None and v.residual > limit:
                v.passed = False
        report["verdicts"] += [v.to_json() for v in numeric]
    failures += [v["relation"] + "/" + v["backend"] for v in report["verdicts"] if not v["pass"]]
    report.update(failures=failures, passed=not failures)
    return report, EXIT_OK if not failures else EXIT_FAIL


def _solve_spectrum(cfg: dict, grid: Grid, S: SuperpotentialSet):
    ops = build_operators(S, grid)
    tol_group = _tol(cfg, "tol_group") or default_tol_group(grid)
    k = cfg.get("num_eigenvalues")
    if k is not None:
        spec = eigensolve_blocks(ops.H, k=k, tol_group=tol_group)
        complete = min(max(l.energy for l in spec.block_levels(r)) for r in range(S.p + 1))
        E_cut = min(cfg.get("E_cut", complete), complete)
    else:
        E_cut = cfg.get("E_cut")
        if E_cut is None:
            raise ConfigError("give E_cut or num_eigenvalues")
        spec = eigensolve_blocks(ops.H, E_cut=E_cut, tol_group=tol_group)
    return ops, spec, E_cut


def _bound_state_count(S: SuperpotentialSet, grid: Grid, threshold: float) -> int:
    ops = build_operators(S, grid, check=False)
    return len(eigensolve_blocks(ops.H, E_cut=threshold).levels)


def window_check(S: SuperpotentialSet, grid: Grid, ops, E_cut: float) -> tuple[float, list]:
    """Effective cutoff below the continuum threshold, and warnings about the window."""
    thr = continuum_threshold(ops.H)
    warnings = []
    if E_cut <= thr:
        return E_cut, warnings
    base = _bound_state_count(S, grid, thr)
    c, half = 0.5 * (grid.x_min + grid.x_max), 0.75 * grid.length
    wide = Grid(c - half, c + half, int(round(1.5 * (grid.n + 1))) - 1)
    wide_ops = build_operators(S, wide, check=False)
    wide_thr = continuum_threshold(wide_ops.H)
    extended = _bound_state_count(S, wide, wide_thr)
    warnings.append(
        f"window reaches the continuum threshold {thr:.6g}: levels above it are box states and are excluded"
    )
    if base == extended:
        warnings.append(f"bound-state count {base} is stable under a 1.5x wider window")
    else:
        warnings.append(f"bound-state count changes from {base} to {extended} under a 1.5x wider window; enlarge it")
    return thr, warnings


def cmd_spectrum(cfg: dict, args) -> tuple[dict, int]:
    grid = build_grid(cfg)
    S = build_model(cfg, grid)
    ops, spec, E_cut = _solve_spectrum(cfg, grid, S)
    E_eff, warnings = window_check(S, grid, ops, E_cut)
    for w in warnings:
        log.warning(w)
    dec = decompose(spec, ops, E_eff, tol_null=_tol(cfg, "tol_null"))
    groups = group_degeneracies(spec)
    report = {
        "command": "spectrum",
        "p": S.p,
        "grid": {"x_min": grid.x_min, "x_max": grid.x_max, "n": grid.n},
        "E_cut": E_cut,
        "E_cut_effective": E_eff,
        "num_levels": len(spec.levels),
        "groups": [{"energy": g.energy, "multiplicity": g.multiplicity} for g in groups],
        "families": [
            {"id": i, "energy": f.energy, "form": f.label, "dim": f.dim, "strata": f.strata, "generic": f.generic}
            for i, f in enumerate(dec.families)
        ],
        "problems": dec.problems,
        "warnings": warnings,
        "passed": dec.passed,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "spectrum.csv").write_text(spectrum_csv(spec, dec))
        (out / "plot_data.csv").write_text(plot_data_csv(spec, dec))
    return report, EXIT_OK if dec.passed else EXIT_FAIL


def cmd_index(cfg: dict, args) -> tuple[dict, int]:
    grid = build_grid(cfg)
    S = build_model(cfg, grid)
    prof, verdicts = kernel_profile(S, grid)
    report: dict = {
        "command": "index",
        "p": S.p,
        "classifier_verdicts": [v.to_json() for v in verdicts],
        "kernel_profile": prof.to_json(),
        "ind_A": None,
        "trace_index": None,
        "agree": False,
    }
    if not prof.reliable:
        report["passed"] = False
        report["error"] = {"type": "indeterminate", "message": "a normalizability verdict is indeterminate"}
        return report, EXIT_INDETERMINATE
    ind_a = analytic_index(prof)
    report["ind_A"] = index_json(ind_a)
    ops, spec, E_cut = _solve_spectrum(cfg, grid, S)
    E_eff, warnings = window_check(S, grid, ops, E_cut)
    report.update(E_cut=E_eff, warnings=warnings)
    dec = decompose(spec, ops, E_eff, tol_null=_tol(cfg, "tol_null"))
    if not dec.passed:
        report.update(passed=False, problems=dec.problems)
        return report, EXIT_FAIL
    E_min = min((l.energy for l in spec.levels), default=E_eff)
    try:
        tr = trace_index(dec.families, E_eff, S.p, E_min=E_min)
    except IndexWindowError as exc:
        report.update(passed=False, error={"type": "window", "message": str(exc)})
        return report, EXIT_FAIL
    report["trace_index"] = index_json(tr)
    report["agree"] = tr == ind_a
    report["passed"] = report["agree"]
    return report, EXIT_OK if report["agree"] else EXIT_FAIL


def cmd_classify(cfg: Optional[dict], args) -> tuple[dict, int]:
    table = enumerate_outcomes()
    values = sorted(table.values, key=lambda v: (v.re, v.im))
    antisym = all(-v in table.values for v in values)
    report = {
        "command": "classify",
        "rows": len(table.rows),
        "distinct": len(values),
        "values": [v.to_json() for v in values],
        "antisymmetric": antisym,
        "table": [
            {"verdicts": list(verdicts), "kernel_profile": prof.to_json(), "value": v.to_json()}
            for verdicts, prof, v in table.rows
        ],
        "passed": antisym,
    }
    text = table.to_csv()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "classification.csv").write_text(text)
    else:
        sys.stderr.write(text)
    return report, EXIT_OK if antisym else EXIT_FAIL


COMMANDS = {
    "verify-algebra": (cmd_verify_algebra, "verify_algebra.schema.json"),
    "spectrum": (cmd_spectrum, "spectrum.schema.json"),
    "index": (cmd_index, "index.schema.json"),
    "classify": (cmd_classify, "classify.schema.json"),
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parasusy", description="Order-p parasupersymmetric quantum mechanics toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="directory for the JSON report and data files")
    common.add_argument("--seed", type=int, help="seed for test vectors (overrides the config)")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from the report")
    common.add_argument("--backend", choices=("symbolic", "numeric", "both"), default="both")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify-algebra", parents=[common], help="check the algebra relations")
    sub.add_parser("spectrum", parents=[common], help="block spectra, degeneracies and families")
    sub.add_parser("index", parents=[common], help="analytic and trace index")
    cl = sub.add_parser("classify", parents=[common], help="the 27 kernel profiles of the order-3 index")
    cl.add_argument("--p3", action="store_true", help="order 3 (the only supported table)")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("PARASUSY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def emit(report: dict, args, schema: str) -> None:
    if not args.no_timestamp:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    report["version"] = __version__
    jsonschema.validate(report, load_schema(schema))
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{report['command'].replace('-', '_')}.json").write_text(text)
    sys.stdout.write(text)


def main(argv: Optional[list] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    func, schema = COMMANDS[args.command]
    try:
        cfg = None
        if args.command != "classify" or args.config:
            cfg = load_config(args.config)
        if cfg is not None and args.seed is None:
            args.seed = cfg.get("seed", 0)
        elif args.seed is None:
            args.seed = 0
        report, code = func(cfg, args)
    except ConfigError as exc:
        log.error("%s", exc)
        report = {"command": args.command, "passed": False, "error": {"type": "config", "message": str(exc)}}
        code = EXIT_CONFIG
    except RiccatiBlowUp as exc:
        report = {
            "command": args.command,
            "passed": False,
            "error": {"type": "riccati_blow_up", "message": str(exc), "x": exc.x},
        }
        code = EXIT_FAIL
    except SuperpotentialError as exc:
        report = {"command": args.command, "passed": False, "error": {"type": type(exc).__name__, "message": str(exc)}}
        if exc.x is not None:
            report["error"]["x"] = exc.x
        code = EXIT_FAIL
    emit(report, args, schema)
    return code


if __name__ == "__main__":
    sys.exit(main())
