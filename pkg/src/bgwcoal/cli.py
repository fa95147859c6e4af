"""Command-line entry point: ``bgwcoal <command> --config job.json``.

Exit codes: 0 success, 1 validation failure, 2 bad config, 3 domain error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .coalescence import (Variant, multivariate_bin_masses, multivariate_joint_density, no_common_ancestor,
                          pair_cdf, pair_density_point)
from .empirical import law_report, multivariate_estimate, pair_report
from .errors import DomainError, NumericalError
from .offspring import OffspringMeasure
from .psi import SolverConfig, psi_grid, psi_series
from .qsd import qsd_pair_cdf, qsd_pair_point, yaglom
from .report import CSV_COLUMNS, CoalescenceReport, fmt_number
from .simulate import DEFAULT_CAP, run_replicas
from .validate import run_validation

log = logging.getLogger("bgwcoal")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_DOMAIN, EXIT_NUMERICAL = 0, 1, 2, 3, 4

COMMON_KEYS = {"command", "measure", "output", "format", "seed", "threads", "solver"}
COMMAND_KEYS = {
    "psi": ({"t", "s"}, set()),
    "series": ({"t"}, set()),
    "pair-cdf": ({"x", "t", "t1"}, set()),
    "pair-density": ({"t1", "t2", "y", "p"}, {"t"}),
    "multivariate": ({"x", "t"}, {"times", "edges", "k"}),
    "qsd": ({"h"}, {"x", "p", "horizon_cap"}),
    "simulate": ({"x", "t", "N"}, {"k", "t1", "edges", "cap", "records"}),
    "validate": ({"x", "t", "N"}, {"k", "t1", "edges", "cap"}),
}
SOLVER_KEYS = {"abs_tol", "rel_tol", "max_step", "series_order"}
ALPHA_FLOOR = 1e-15


class ConfigError(Exception):
    pass


# -- config parsing -------------------------------------------------------------


def _number(job, key, *, low=None, low_open=False, default=None):
    if key not in job:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return default
    v = job[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key!r} must be a finite number, got {v!r}")
    if low is not None and (v < low or (low_open and v == low)):
        raise ConfigError(f"{key!r} must be {'>' if low_open else '>='} {low:g}, got {v!r}")
    return float(v)


def _integer(job, key, *, low=0, default=None):
    v = _number(job, key, low=low, default=default)
    if v != int(v):
        raise ConfigError(f"{key!r} must be an integer, got {job[key]!r}")
    return int(v)


def _numbers(job, key, *, default=None):
    if key not in job:
        if default is None:
            raise ConfigError(f"missing key {key!r}")
        return list(default)
    v = job[key]
    items = v if isinstance(v, list) else [v]
    if not items:
        raise ConfigError(f"{key!r} must not be empty")
    return [_number({key: item}, key) for item in items]


def _integers(job, key):
    values = _numbers(job, key)
    if any(v != int(v) for v in values):
        raise ConfigError(f"{key!r} must hold integers")
    return [int(v) for v in values]


def load_job(command: str, text: str, *, seed=None, threads=None, output=None) -> dict:
    """Parse and check a JSON job; command-line overrides win over the file."""
    try:
        job = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(job, dict):
        raise ConfigError("config must be a JSON object")
    if command not in COMMAND_KEYS:
        raise ConfigError(f"unknown command {command!r}")
    if job.get("command", command) != command:
        raise ConfigError(f"config is for command {job['command']!r}, not {command!r}")
    required, optional = COMMAND_KEYS[command]
    unknown = set(job) - COMMON_KEYS - required - optional
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {sorted(unknown)}")
    if "measure" not in job:
        raise ConfigError("missing key 'measure'")
    if not isinstance(job["measure"], dict):
        raise ConfigError("'measure' must be an object mapping offspring counts to rates")
    for key in required:
        if key not in job:
            raise ConfigError(f"missing key {key!r} for {command}")
    solver = job.get("solver", {})
    if not isinstance(solver, dict) or set(solver) - SOLVER_KEYS:
        raise ConfigError(f"'solver' accepts only {sorted(SOLVER_KEYS)}")
    job = dict(job, command=command)
    if seed is not None:
        job["seed"] = seed
    if threads is not None:
        job["threads"] = threads
    if output is not None:
        job["output"] = output
    fmt = job.get("format")
    if fmt is None:
        fmt = "json" if str(job.get("output", "")).endswith(".json") else "csv"
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    job["format"] = fmt
    for key in ("output", "records"):
        if key in job and not (isinstance(job[key], str) and job[key]):
            raise ConfigError(f"{key!r} must be a file path")
    for key in ("seed", "threads"):
        if key in job:
            _integer(job, key)
    return job


def _solver(job) -> SolverConfig:
    raw = job.get("solver", {})
    kw = {}
    for key in ("abs_tol", "rel_tol", "max_step"):
        if key in raw:
            kw[key] = _number(raw, key, low=0, low_open=True)
    if "series_order" in raw:
        kw["series_order"] = _integer(raw, "series_order", low=8)
    return SolverConfig(**kw)


# where results go and how many workers compute them do not change the results
ECHO_EXCLUDED = {"output", "threads"}


def echo(job) -> dict:
    return {k: v for k, v in job.items() if k not in ECHO_EXCLUDED}


def canonical(job) -> str:
    return json.dumps(echo(job), sort_keys=True, separators=(",", ":"))


# -- commands -------------------------------------------------------------------
# each returns (columns, rows, passed)


def _cmd_psi(m, job, cfg):
    times = sorted(set(_numbers(job, "t")))
    s = _numbers(job, "s")
    g = psi_grid(m, times, s, cfg)
    rows = []
    for i, t in enumerate(times):
        for j, sv in enumerate(s):
            rows.append([t, sv, g.psi[i, j], g.psi_d1[i, j], g.psi_d2[i, j]])
    return ["t", "s", "psi", "psi_d1", "psi_d2"], rows, True


def _cmd_series(m, job, cfg):
    rows = []
    for t in _numbers(job, "t"):
        pgf = psi_series(m, t, cfg)
        rows.extend([t, p, c] for p, c in enumerate(pgf.coeffs))
        rows.append([t, "truncation_mass", pgf.truncation_mass])
    return ["t", "p", "probability"], rows, True


def _cmd_pair_cdf(m, job, cfg):
    x = _integer(job, "x", low=1)
    t = _number(job, "t", low=0)
    rows = []
    for t1 in _numbers(job, "t1"):
        rows.append([x, t, t1, pair_cdf(m, x, t, t1, cfg)])
    rows.append([x, t, "no_common_ancestor", no_common_ancestor(m, x, t, cfg)])
    return ["x", "t", "t1", "probability"], rows, True


def _cmd_pair_density(m, job, cfg):
    t1 = _number(job, "t1", low=0, low_open=True)
    t2 = _number(job, "t2", low=0, low_open=True)
    y = _integer(job, "y", low=1)
    t = _number(job, "t", low=0) if "t" in job else None
    rows = [[p, t1, t2, y, pair_density_point(m, p, t1, t2, y, cfg, t=t)] for p in _integers(job, "p")]
    return ["p", "t1", "t2", "y", "density"], rows, True


def _cmd_multivariate(m, job, cfg):
    x = _integer(job, "x", low=1)
    t = _number(job, "t", low=0, low_open=True)
    if "times" not in job and "edges" not in job:
        raise ConfigError("multivariate needs 'times' (density) or 'edges' (bin masses)")
    rows = []
    for variant in Variant:
        if "times" in job:
            times = _numbers(job, "times")
            label = "(" + ",".join(fmt_number(v) for v in times) + ")"
            rows.append([variant.value, "density", label, multivariate_joint_density(m, x, t, times, variant, cfg)])
        if "edges" in job:
            edges = _numbers(job, "edges")
            n = _integer(job, "k", low=2, default=3) - 1
            for b, mass in multivariate_bin_masses(m, x, t, edges, n, variant, cfg).items():
                label = "(" + ",".join(f"{fmt_number(edges[i])}-{fmt_number(edges[i + 1])}" for i in b) + ")"
                rows.append([variant.value, "bin_mass", label, mass])
    return ["variant", "kind", "where", "value"], rows, True


def _cmd_qsd(m, job, cfg):
    ylim = yaglom(m, cfg, x=_integer(job, "x", low=1, default=1),
                  horizon_cap=_number(job, "horizon_cap", low=0, low_open=True) if "horizon_cap" in job else None)
    rows = [["chi0", "", ylim.chi0], ["horizon_used", "", ylim.t_used], ["g_d1_at_1", "", ylim.g_d1_at_1],
            ["truncation_mass", "", ylim.truncation_mass]]
    for j, a in enumerate(ylim.alphas):
        if j >= 1 and a > ALPHA_FLOOR:
            rows.append(["alpha", j, float(a)])
    for h in _numbers(job, "h"):
        rows.append(["qsd_pair_cdf", h, qsd_pair_cdf(m, ylim, h, cfg)])
        if "p" in job:
            for p in _integers(job, "p"):
                rows.append([f"qsd_pair_point[p={p}]", h, qsd_pair_point(m, ylim, h, p, cfg)])
    return ["quantity", "h_or_j", "value"], rows, True


def _sim_args(job):
    x = _integer(job, "x", low=1)
    t = _number(job, "t", low=0, low_open=True)
    n = _integer(job, "N", low=1)
    seed = _integer(job, "seed", default=0) if "seed" in job else 0
    edges = _numbers(job, "edges") if "edges" in job else None
    t1 = _numbers(job, "t1", default=[t / 4, t / 2, t])
    cap = _number(job, "cap", low=1, default=DEFAULT_CAP) if "cap" in job else DEFAULT_CAP
    threads = _integer(job, "threads", default=1) if "threads" in job else 1
    return x, t, n, seed, edges, t1, cap, threads


def _report_rows(report: CoalescenceReport):
    return [list(r.cells()) for r in report], report.passed


def _write_records(path, batch):
    k1 = batch.k - 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replica", "Z", "pair_T", "cross_founder"] + [f"T_{i + 1}" for i in range(k1)]
                   + [f"T*_{i + 1}" for i in range(k1)])
        for r in range(batch.n):
            w.writerow([batch.first + r, int(batch.z[r]), fmt_number(batch.pair_T[r]), int(batch.pair_cross[r])]
                       + [fmt_number(v) for v in batch.T_vector[r]] + [fmt_number(v) for v in batch.T_star[r]])


def _cmd_simulate(m, job, cfg):
    x, t, n, seed, edges, t1, cap, threads = _sim_args(job)
    k = _integer(job, "k", low=2, default=2) if "k" in job else 2
    batch = run_replicas(m, x, t, n, seed, k=k, cap=cap, threads=threads)
    report = pair_report(m, batch, t1, cfg)
    report.extend(law_report(m, batch, cfg))
    if k >= 3:
        report.extend(multivariate_estimate(m, batch, edges, cfg).report)
    if "records" in job:
        _write_records(job["records"], batch)
    rows, _ = _report_rows(report)
    return list(CSV_COLUMNS), rows, True


def _cmd_validate(m, job, cfg):
    x, t, n, seed, edges, t1, cap, threads = _sim_args(job)
    k = _integer(job, "k", low=2, default=3) if "k" in job else 3
    report = run_validation(m, x, t, n, seed, k=k, t1_grid=t1, edges=edges, cfg=cfg, threads=threads, cap=cap)
    rows, passed = _report_rows(report)
    return list(CSV_COLUMNS), rows, passed


COMMANDS = {
    "psi": _cmd_psi,
    "series": _cmd_series,
    "pair-cdf": _cmd_pair_cdf,
    "pair-density": _cmd_pair_density,
    "multivariate": _cmd_multivariate,
    "qsd": _cmd_qsd,
    "simulate": _cmd_simulate,
    "validate": _cmd_validate,
}


# -- output ---------------------------------------------------------------------


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (np.integer, np.floating)):
        v = v.item()
    return fmt_number(v)


def _json_value(v):
    if isinstance(v, (np.integer, np.floating)):
        v = v.item()
    if isinstance(v, float):
        if math.isnan(v):
            raise ValueError("refusing to emit NaN")
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
    return v


def render(job, columns, rows, passed) -> str:
    meta = {"version": __version__, "command": job["command"], "seed": job.get("seed"), "config": echo(job),
            "passed": passed}
    if job["format"] == "json":
        body = {"meta": meta, "columns": columns, "rows": [dict(zip(columns, map(_json_value, r))) for r in rows]}
        return json.dumps(body, sort_keys=True, indent=1, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# bgwcoal {__version__}\n")
    buf.write(f"# command: {job['command']}\n")
    if "seed" in job:
        buf.write(f"# seed: {job['seed']}\n")
    buf.write(f"# config: {canonical(job)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def run(command: str, text: str, *, seed=None, threads=None, output=None) -> tuple[int, str, str | None]:
    """Execute one job; returns ``(exit status, rendered output, output path or None)``."""
    job = {}
    try:
        job = load_job(command, text, seed=seed, threads=threads, output=output)
        for key, value in job["measure"].items():
            if not key.isdigit() or isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"bad measure entry {key!r}: {value!r}")
        m = OffspringMeasure.from_json({"measure": job["measure"]})
        cfg = _solver(job)
        columns, rows, passed = COMMANDS[command](m, job, cfg)
        text_out = render(job, columns, rows, passed)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG, "", None
    except DomainError as exc:
        log.error("domain error: %s", exc)
        return EXIT_DOMAIN, "", None
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL, "", None
    return (EXIT_OK if passed else EXIT_VALIDATION), text_out, job.get("output")


def _setup_logging():
    level = os.environ.get("BGWCOAL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="bgwcoal", description="Coalescence times in continuous-time branching processes")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON job file ('-' for stdin)")
    parser.add_argument("--output", help="output file (default stdout); a .json suffix selects JSON")
    parser.add_argument("--seed", type=int, help="master seed for simulation commands")
    parser.add_argument("--threads", type=int, help="worker processes for replicas (0 = all CPUs)")
    args = parser.parse_args(argv)
    try:
        if args.config == "-":
            text = sys.stdin.read()
        else:
            with open(args.config) as fh:
                text = fh.read()
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    status, out, path = run(args.command, text, seed=args.seed, threads=args.threads, output=args.output)
    if out:
        if path:
            with open(path, "w", newline="") as fh:
                fh.write(out)
        else:
            sys.stdout.write(out)
    if status == EXIT_VALIDATION:
        log.error("validation failed")
    return status


if __name__ == "__main__":
    sys.exit(main())
