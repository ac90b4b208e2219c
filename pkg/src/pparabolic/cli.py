"""Command-line runner: ``pparabolic <kind> [--config PATH] [--override KEY=VALUE ...]``.

Each run writes three kinds of output into ``--out``:

``report.json``
    Deterministic results and checks (no timings, no absolute paths).
``manifest.json``
    The resolved config, library versions, timings and the exit status.
``*.csv``
    Tables: per-step solver diagnostics, estimate summaries, sweep rows.

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid config and 3 for a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import difflib
import json
import logging
import math
import platform
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__, proptest
from .grid import Cylinder, SpaceTimeGrid, make_cutoff, write_csv
from .jets import Params
from .problems import Problem, affine_problem, counterexample_problem, heat_problem, interior_error
from .solver import SCHEMES, BoundaryData, SolverConfig, SolverError, weak_form_residual
from .verify import (
    caccioppoli_report,
    pointwise_suite,
    regularized_estimate_report,
    sharpness_sweep,
    testfn_estimate_report,
    time_derivative_report,
)

log = logging.getLogger("pparabolic")

KINDS = ("solve", "verify-estimate", "sharpness", "jet-proptest", "time-derivative")
PROBLEMS = ("counterexample", "heat", "affine")
ESTIMATES = ("caccioppoli", "regularized", "testfn")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and, if known, the line."""


# -- config schema -------------------------------------------------------------

_NUMBER = "number"
_INT = "integer"
_BOOL = "boolean"
_STR = "string"
_NUMBERS = "list of numbers"
_INTS = "list of integers"
_STRS = "list of strings"


@dataclass(frozen=True)
class Key:
    kind: str
    default: object = None
    doc: str = ""
    choices: tuple = ()


SCHEMA = {
    "kind": Key(_STR, None, "experiment kind; normally set by the subcommand", KINDS),
    "p": Key(_NUMBER, None, "exponent p > 1 (required except for jet-proptest)"),
    "s": Key(_NUMBER, 0.0, "exponent s of V_s"),
    "eps": Key(_NUMBER, 0.0, "regularization eps >= 0"),
    "problem": Key(_STR, "counterexample", "field to solve or sample", PROBLEMS),
    "field": Key(_STR, "solve", "'solve' the problem or sample its 'exact' solution", ("solve", "exact")),
    "nx": Key(_INT, 32, "cells per spatial axis"),
    "t_end": Key(_NUMBER, None, "final time (problem default if unset)"),
    "nt": Key(_INT, None, "stored time levels (problem default if unset)"),
    "scheme": Key(_STR, None, "time integrator (problem default if unset)", SCHEMES),
    "cfl_safety": Key(_NUMBER, None, "explicit CFL factor (problem default if unset)"),
    "picard_tol": Key(_NUMBER, 1e-8, "Picard stopping tolerance"),
    "picard_max_iters": Key(_INT, 50, "Picard iteration cap"),
    "cylinder_x0": Key(_NUMBERS, None, "cylinder center (problem default if unset)"),
    "cylinder_t0": Key(_NUMBER, None, "cylinder center time"),
    "cylinder_r": Key(_NUMBER, None, "cylinder radius r"),
    "estimates": Key(_STRS, list(ESTIMATES), "reports for verify-estimate", ESTIMATES),
    "pointwise": Key(_BOOL, False, "also run the pointwise margin suite on the field"),
    "constant_max": Key(_NUMBER, None, "optional upper bound on every empirical constant"),
    "error_tol": Key(_NUMBER, 1e-2, "solve: max interior error against the exact solution"),
    "residual_tol": Key(_NUMBER, None, "time-derivative: optional bound on the pointwise residual"),
    "s_list": Key(_NUMBERS, [-1.25, -1.0, -0.5, 0.0, 0.5], "sharpness: exponents s to sweep"),
    "levels": Key(_INTS, [32, 64, 128, 256, 512], "sharpness: refinement levels nx"),
    "sweep_r": Key(_NUMBER, 0.5, "sharpness: cylinder radius"),
    "oracle_tol": Key(_NUMBER, 0.02, "sharpness: relative tolerance against the oracle"),
    "samples": Key(_INT, 100_000, "jet-proptest: jets per dimension and inequality"),
    "dims": Key(_INTS, [1, 2, 3, 4], "jet-proptest: spatial dimensions"),
    "snapshot": Key(_BOOL, False, "write the final field level as CSV"),
    "seed": Key(_INT, 0, "seed for every random draw of the run"),
}

PROBLEM_DEFAULTS = {
    "heat": {"t_end": 0.2, "nt": None, "scheme": "explicit", "cfl_safety": 0.5, "x0": [0.5, 0.5], "t0": 0.1, "r": 0.15},
    "counterexample": {"t_end": 0.6, "nt": 31, "scheme": "implicit_picard", "cfl_safety": 0.2, "x0": [0.0, 0.0], "t0": 0.3, "r": 0.25},
    "affine": {"t_end": 0.2, "nt": 21, "scheme": "implicit_picard", "cfl_safety": 0.2, "x0": [0.5, 0.5], "t0": 0.1, "r": 0.15},
}


def _where(source: str, line: int | None) -> str:
    return f"{source}:{line}" if line else source


def _as_number(v):
    # YAML 1.1 reads exponent literals without a dot (1e-4) as strings
    if isinstance(v, bool):
        return None
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return None
    return None


def _check_value(key: str, value, where: str):
    entry = SCHEMA[key]
    if value is None:
        return None

    def bad(expected):
        return ConfigError(f"{where}: key '{key}': expected {expected}, got {value!r}")

    def number(v):
        return _as_number(v) is not None

    if entry.kind == _NUMBER:
        if not number(value):
            raise bad("a number")
        value = _as_number(value)
        if not math.isfinite(value):
            raise bad("a finite number")
    elif entry.kind == _INT:
        if not isinstance(value, int) or isinstance(value, bool):
            raise bad("an integer")
    elif entry.kind == _BOOL:
        if not isinstance(value, bool):
            raise bad("true or false")
    elif entry.kind == _STR:
        if not isinstance(value, str):
            raise bad("a string")
    elif entry.kind in (_NUMBERS, _INTS, _STRS):
        if not isinstance(value, list) or not value:
            raise bad(f"a non-empty {entry.kind}")
        item_ok = {_NUMBERS: number, _INTS: lambda v: isinstance(v, int) and not isinstance(v, bool), _STRS: lambda v: isinstance(v, str)}[entry.kind]
        if not all(item_ok(v) for v in value):
            raise bad(f"a {entry.kind}")
        if entry.kind == _NUMBERS:
            value = [_as_number(v) for v in value]
    if entry.choices:
        items = value if isinstance(value, list) else [value]
        for v in items:
            if v not in entry.choices:
                raise ConfigError(f"{where}: key '{key}': {v!r} is not one of {list(entry.choices)}")
    return value


def _unknown(key: str, where: str) -> ConfigError:
    close = difflib.get_close_matches(key, SCHEMA, n=1)
    hint = f" (did you mean '{close[0]}'?)" if close else ""
    return ConfigError(f"{where}: unknown key '{key}'{hint}")


def read_config_file(path: Path) -> tuple[dict, dict]:
    """Parse a flat YAML mapping; return ``(values, key -> line number)``."""
    source = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{source}: cannot read config: {exc.strerror}") from exc
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else None
        raise ConfigError(f"{_where(source, line)}: YAML syntax error: {getattr(exc, 'problem', exc)}") from exc
    if node is None:
        return {}, {}
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{_where(source, node.start_mark.line + 1)}: config must be a flat mapping of key: value")
    lines = {}
    for key_node, value_node in node.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key in lines:
            raise ConfigError(f"{_where(source, line)}: key '{key}' repeated (first on line {lines[key]})")
        if isinstance(value_node, yaml.MappingNode):
            raise ConfigError(f"{_where(source, line)}: key '{key}': nested mappings are not allowed in the flat config")
        lines[key] = line
    return yaml.safe_load(text), lines


def parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"--override {text}: expected KEY=VALUE")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"--override {text}: key '{key}': cannot parse value") from exc
    return key, value


def resolve_config(kind: str, path: Path | None, overrides: list[str], seed: int | None) -> dict:
    """Merge file values, overrides and ``--seed`` over the defaults and validate."""
    raw, lines = ({}, {}) if path is None else read_config_file(path)
    source = str(path) if path is not None else "config"
    merged = {}
    for key, value in raw.items():
        where = _where(source, lines.get(key))
        if key not in SCHEMA:
            raise _unknown(key, where)
        merged[key] = _check_value(key, value, where)
    for text in overrides:
        key, value = parse_override(text)
        where = f"--override {text}"
        if key not in SCHEMA:
            raise _unknown(key, where)
        merged[key] = _check_value(key, value, where)
    if seed is not None:
        merged["seed"] = seed
    file_kind = merged.get("kind")
    if file_kind is not None and file_kind != kind:
        raise ConfigError(f"{_where(source, lines.get('kind'))}: key 'kind': config says {file_kind!r} but the subcommand is {kind!r}")
    cfg = {k: entry.default for k, entry in SCHEMA.items()}
    cfg.update(merged)
    cfg["kind"] = kind
    if kind != "jet-proptest" and cfg["p"] is None:
        raise ConfigError(f"{source}: missing required key 'p'")
    _fill_problem_defaults(cfg)
    _check_ranges(cfg, source, lines)
    return cfg


def _check_ranges(cfg: dict, source: str, lines: dict):
    def fail(key, msg):
        raise ConfigError(f"{_where(source, lines.get(key))}: key '{key}': {msg}")

    if cfg["p"] is not None and not cfg["p"] > 1:
        fail("p", f"must exceed 1, got {cfg['p']}")
    if cfg["eps"] < 0:
        fail("eps", "must be non-negative")
    if cfg["nx"] < 8:
        fail("nx", "must be at least 8")
    if cfg["nt"] is not None and cfg["nt"] < 3:
        fail("nt", "must be at least 3")
    if cfg["samples"] < 1:
        fail("samples", "must be positive")
    if any(d < 1 or d > 4 for d in cfg["dims"]):
        fail("dims", "dimensions must lie in 1..4")
    if any(n < 8 for n in cfg["levels"]):
        fail("levels", "every level must be at least 8")
    if cfg["problem"] == "heat" and cfg["p"] is not None and cfg["p"] != 2:
        fail("p", "the heat problem is only a solution for p = 2")
    if cfg["cylinder_r"] <= 0:
        fail("cylinder_r", "must be positive")
    if cfg["scheme"] == "explicit" and cfg["p"] is not None and cfg["p"] < 2 and cfg["eps"] == 0:
        fail("eps", "the explicit scheme with p < 2 needs eps > 0")


def _fill_problem_defaults(cfg: dict):
    d = PROBLEM_DEFAULTS[cfg["problem"]]
    for key, dkey in (("t_end", "t_end"), ("nt", "nt"), ("scheme", "scheme"), ("cfl_safety", "cfl_safety"),
                      ("cylinder_x0", "x0"), ("cylinder_t0", "t0"), ("cylinder_r", "r")):
        if cfg[key] is None:
            cfg[key] = d[dkey]


# -- building blocks -------------------------------------------------------------


def build_problem(cfg: dict) -> Problem:
    p, eps, nx = cfg["p"], cfg["eps"], cfg["nx"]
    solver_kw = {"picard_tol": cfg["picard_tol"], "picard_max_iters": cfg["picard_max_iters"], "cfl_safety": cfg["cfl_safety"]}
    if cfg["problem"] == "heat":
        if cfg["scheme"] == "explicit" and cfg["nt"] is None:
            prob = heat_problem(nx, t_end=cfg["t_end"], eps=eps)
            config = SolverConfig(prob.config.params, prob.grid, "explicit", **solver_kw)
            return Problem(config, prob.boundary, prob.exact)
        grid = SpaceTimeGrid.square(0.0, 1.0, nx, 0.0, cfg["t_end"], cfg["nt"] or 41)
        prob = heat_problem(8)
        return Problem(SolverConfig(Params(2.0, 0.0, eps), grid, cfg["scheme"], **solver_kw), prob.boundary, prob.exact)
    if cfg["problem"] == "counterexample":
        return counterexample_problem(p, nx, eps, cfg["t_end"], cfg["nt"], cfg["scheme"], **solver_kw)
    prob = affine_problem(p=p, nx=nx, eps=eps)
    grid = SpaceTimeGrid.square(0.0, 1.0, nx, 0.0, cfg["t_end"], cfg["nt"])
    return Problem(SolverConfig(prob.config.params, grid, cfg["scheme"], **solver_kw), BoundaryData(prob.exact.u), prob.exact)


def cylinder_of(cfg: dict) -> Cylinder:
    return Cylinder(tuple(cfg["cylinder_x0"]), cfg["cylinder_t0"], cfg["cylinder_r"])


def obtain_field(cfg: dict, timings: dict):
    prob = build_problem(cfg)
    start = time.perf_counter()
    steps = []
    if cfg["field"] == "exact":
        field, info = prob.exact.sample(prob.grid), {"source": "exact"}
    else:
        res = prob.solve()
        field, steps = res.field, res.diagnostics
        info = {"source": "solve", "picard_warnings": res.picard_warnings, "steps": len(steps)}
    timings["field"] = time.perf_counter() - start
    return prob, field, info, steps


def _check(name, value, tolerance, passed) -> dict:
    return {"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed)}


def _clean(obj):
    """Make results JSON-safe: non-finite floats become strings, keys strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_rows(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


# -- runners: each returns (results, checks, artifact names) -------------------------


def run_solve(cfg, out: Path, timings):
    prob, field, info, steps = obtain_field({**cfg, "field": "solve"}, timings)
    res_err = interior_error(field, prob.exact)
    results = {"solver": prob.config.describe(), "interior_max_error": res_err, **info}
    checks = [
        _check("interior_max_error", res_err, cfg["error_tol"], res_err <= cfg["error_tol"]),
        _check("picard_warnings", info["picard_warnings"], 0, info["picard_warnings"] == 0),
    ]
    header = list(steps[0]) if steps else ["step", "t"]
    _write_rows(out / "steps.csv", header, [[d[k] for k in header] for d in steps])
    artifacts = ["steps.csv"]
    if cfg["snapshot"]:
        write_csv(field, out / "field_final.csv", time_indices=[field.grid.nt - 1])
        artifacts.append("field_final.csv")
    return results, checks, artifacts


def _report_checks(rep, cfg):
    finite = all(math.isfinite(v) for v in (rep.lhs, *rep.rhs_terms.values()))
    nonneg = rep.lhs >= 0 and all(v >= 0 for v in rep.rhs_terms.values())
    checks = [
        _check(f"{rep.name}.integrals_nonnegative", rep.lhs, 0.0, finite and nonneg),
        _check(f"{rep.name}.constant_finite", rep.empirical_constant, None, math.isfinite(rep.empirical_constant) or rep.rhs_total == 0),
    ]
    if cfg["constant_max"] is not None:
        checks.append(_check(f"{rep.name}.constant_max", rep.empirical_constant, cfg["constant_max"], rep.empirical_constant <= cfg["constant_max"]))
    return checks


def run_verify_estimate(cfg, out: Path, timings):
    _, field, info, _ = obtain_field(cfg, timings)
    params = Params(cfg["p"], cfg["s"], cfg["eps"])
    cyl = cylinder_of(cfg)
    makers = {"caccioppoli": caccioppoli_report, "regularized": regularized_estimate_report, "testfn": testfn_estimate_report}
    flags = {"picard_warnings": info.get("picard_warnings", 0)}
    start = time.perf_counter()
    reports = [makers[name](field, params, cyl, flags) for name in cfg["estimates"]]
    results = {"field": info, "reports": [r.to_dict() for r in reports]}
    checks = [c for r in reports for c in _report_checks(r, cfg)]
    phi = make_cutoff(field.grid, cyl)
    results["weak_form_residual"] = weak_form_residual(field, phi, params)
    if cfg["pointwise"]:
        results["pointwise"] = pointwise_suite(field, params)
        m = results["pointwise"]["min_scaled"]
        checks.append(_check("pointwise.min_scaled", m, -1e-9, m is None or m >= -1e-9))
    timings["reports"] = time.perf_counter() - start
    rows = [(r.name, r.lhs, r.rhs_total, r.empirical_constant) for r in reports]
    _write_rows(out / "estimates.csv", ["report", "lhs", "rhs_total", "empirical_constant"], rows)
    for r in reports:
        (out / f"{r.name}.txt").write_text(r.to_text() + "\n")
    artifacts = ["estimates.csv"] + [f"{r.name}.txt" for r in reports]
    if cfg["snapshot"]:
        write_csv(field, out / "field_final.csv", time_indices=[field.grid.nt - 1])
        artifacts.append("field_final.csv")
    return results, checks, artifacts


def run_time_derivative(cfg, out: Path, timings):
    _, field, info, _ = obtain_field(cfg, timings)
    params = Params(cfg["p"], cfg["s"], cfg["eps"])
    start = time.perf_counter()
    rep = time_derivative_report(field, params, cylinder_of(cfg), {"picard_warnings": info.get("picard_warnings", 0)})
    timings["report"] = time.perf_counter() - start
    results = {"field": info, "report": rep.to_dict()}
    checks = _report_checks(rep, cfg)
    sup = rep.extras["residual_sup"]
    checks.append(_check("residual_sup_finite", sup, None, math.isfinite(sup)))
    if cfg["residual_tol"] is not None:
        checks.append(_check("residual_sup", sup, cfg["residual_tol"], sup <= cfg["residual_tol"]))
    (out / "time_derivative.txt").write_text(rep.to_text() + "\n")
    return results, checks, ["time_derivative.txt"]


def run_sharpness(cfg, out: Path, timings):
    start = time.perf_counter()
    sweep = sharpness_sweep(cfg["p"], cfg["s_list"], tuple(cfg["levels"]), cfg["sweep_r"])
    timings["sweep"] = time.perf_counter() - start
    checks = []
    for s, info in sweep["summary"].items():
        checks.append(_check(f"s={s:g}.classification", info["classification"], info["expected"], info["classification"] == info["expected"]))
        if info["expected"] == "convergent" and "oracle_rel_error" in info:
            err = info["oracle_rel_error"]
            checks.append(_check(f"s={s:g}.oracle_rel_error", err, cfg["oracle_tol"], err < cfg["oracle_tol"]))
    cls = {s: info["classification"] for s, info in sweep["summary"].items()}
    rows = [(r["p"], r["s"], r["nx"], r["h"], r["lhs"], cls[r["s"]]) for r in sweep["rows"]]
    _write_rows(out / "sharpness.csv", ["p", "s", "nx", "h", "lhs", "classification"], rows)
    summary = {f"{s:g}": info for s, info in sweep["summary"].items()}
    return {"summary": summary}, checks, ["sharpness.csv"]


def run_jet_proptest(cfg, out: Path, timings):
    seed, n, dims = cfg["seed"], cfg["samples"], tuple(cfg["dims"])
    start = time.perf_counter()
    margins = proptest.margin_suite(seed, n, dims)
    decomposition = proptest.decomposition_suite(seed + 1, n, dims)
    ellipticity = proptest.ellipticity_suite(seed + 2, max(1, n // 10), dims)
    timings["proptest"] = time.perf_counter() - start
    if max(dims) < 2:
        margins.pop("full_fundamental")
    checks = [_check(f"margin.{k}", v["min_scaled"], -proptest.MARGIN_TOL, v["passed"]) for k, v in margins.items()]
    checks.append(_check("decomposition", decomposition["max_rel_defect"], 1e-12, decomposition["passed"]))
    checks.append(_check("ellipticity", ellipticity["max_violation"], 1e-12, ellipticity["passed"]))
    rows = [(k, v["min_scaled"], v["count"], v["passed"]) for k, v in margins.items()]
    _write_rows(out / "margins.csv", ["inequality", "min_scaled_margin", "count", "passed"], rows)
    results = {"margins": margins, "decomposition": decomposition, "ellipticity": ellipticity}
    return results, checks, ["margins.csv"]


RUNNERS = {
    "solve": run_solve,
    "verify-estimate": run_verify_estimate,
    "sharpness": run_sharpness,
    "jet-proptest": run_jet_proptest,
    "time-derivative": run_time_derivative,
}


# -- entry point -------------------------------------------------------------------


def versions() -> dict:
    return {
        "pparabolic": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
    }


def _dump(path: Path, data):
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def run(kind: str, config_path: Path | None, overrides: list[str], seed: int | None, out: Path) -> int:
    """Run one experiment; returns the exit status."""
    started = datetime.now(timezone.utc).isoformat()
    manifest = {"kind": kind, "config_file": str(config_path) if config_path else None, "overrides": list(overrides), "versions": versions(), "started": started}
    try:
        cfg = resolve_config(kind, config_path, overrides, seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest["config"] = cfg
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    start = time.perf_counter()
    try:
        results, checks, artifacts = RUNNERS[kind](cfg, out, timings)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ValueError, FloatingPointError) as exc:
        manifest.update(status="numerical_failure", exit_code=EXIT_NUMERICAL, error=f"{type(exc).__name__}: {exc}")
        timings["total"] = time.perf_counter() - start
        manifest["timings"] = timings
        _dump(out / "manifest.json", manifest)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    timings["total"] = time.perf_counter() - start
    passed = all(c["passed"] for c in checks)
    code = EXIT_OK if passed else EXIT_CHECK_FAILED
    _dump(out / "report.json", {"kind": kind, "config": cfg, "results": results, "checks": checks, "passed": passed})
    manifest.update(
        status="passed" if passed else "checks_failed",
        exit_code=code,
        checks=checks,
        artifacts=["report.json", *artifacts],
        timings=timings,
        finished=datetime.now(timezone.utc).isoformat(),
    )
    if kind == "jet-proptest":
        manifest["minimum_margins"] = {k: v["min_scaled"] for k, v in results["margins"].items()}
    _dump(out / "manifest.json", manifest)
    for c in checks:
        log.info("%s %s value=%s tol=%s", "PASS" if c["passed"] else "FAIL", c["name"], c["value"], c["tolerance"])
    return code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat YAML file of key: value pairs")
    common.add_argument("--seed", type=int, help="seed for all random draws (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="set one config key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true", help="log every check to stderr")
    parser = argparse.ArgumentParser(prog="pparabolic", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="{" + ",".join(KINDS) + "}")
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run a {kind} experiment")
    parser.epilog = "config keys: " + ", ".join(SCHEMA)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return run(args.kind, args.config, args.override, args.seed, args.out)


if __name__ == "__main__":
    sys.exit(main())
