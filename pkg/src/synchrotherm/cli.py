"""Command-line front end.

Exit status: 0 on success, 2 on validation or truncation errors, 3 on
numerical failures (integration problems, stationarity not certified, or
failed invariant checks).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .artifacts import csv_text, json_text, write_atomic
from .blockade import MODES, BlockadeConfig, fit_log_slope, run_blockade
from .config import ConfigError, RunConfig, parse_float_list
from .dynamics import distance_to, evolve, null_space_steady_state, relaxation_rate_estimate, restrict
from .errors import IntegrationError, SynchrothermError, TruncationError, ValidationError
from .fock import FockTruncation, displacement_matrix, oracle_displacement_matrix
from .rate_graph import build_rate_matrix, connectivity, predict_steady_state, verify_stationarity

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
NULL_SPACE_TOL = 1e-8


class _Parser(argparse.ArgumentParser):
    """Argument errors become :class:`ConfigError` instead of ``SystemExit``."""

    def error(self, message):
        raise ConfigError([message])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="synchrotherm", description="Thermalization of partially coupled composite systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="rate graph, connectivity and predicted steady state")
    p.add_argument("config", type=Path)
    p.add_argument("-o", "--output", type=Path, help="JSON report path (default: stdout)")
    p.add_argument("--edges", type=Path, help="also write the edge list (i, f, delta, W) as CSV")

    p = sub.add_parser("evolve", help="integrate the Pauli master equation")
    p.add_argument("config", type=Path)
    p.add_argument("--times", help="comma-separated sample times")
    p.add_argument("--t-max", type=float, help="final time (default: 50 / smallest component spectral gap)")
    p.add_argument("--samples", type=int, help="number of equally spaced samples on [0, t-max] (default 101)")
    p.add_argument("--method", choices=("auto", "exact", "rk"), default="auto")
    p.add_argument("-o", "--output", type=Path, help="CSV path (default: stdout)")

    p = sub.add_parser("fc-table", help="displacement matrix elements <m|D(alpha)|n>")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--max-index", type=int, help="only emit m, n <= this index")
    p.add_argument("--abs", action="store_true", help="emit magnitudes")
    p.add_argument("--method", choices=("analytic", "oracle"), default="analytic")
    p.add_argument("-o", "--output", type=Path)

    p = sub.add_parser("blockade", help="Franck-Condon blockade scan over mode count")
    p.add_argument("--groups", type=int, default=6)
    p.add_argument("--m-max", type=int, default=10)
    p.add_argument("--range", default="-4,4", help="lo,hi of the uniform displacement draw")
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--mode", choices=MODES, default="nested")
    p.add_argument("-o", "--output", type=Path, help="CSV path (default: stdout)")
    p.add_argument("--summary", type=Path, help="JSON summary with per-group slope fits")

    sub.add_parser("validate", help="run the bundled invariant suite")
    return parser


def parse_config(argv, files=None) -> RunConfig:
    """Parse arguments (and the referenced config file) into a validated :class:`RunConfig`.

    ``files`` maps config paths to already-loaded documents, bypassing the
    filesystem. All schema violations are reported together.
    """
    args = build_parser().parse_args(argv)
    opts = {k: v for k, v in vars(args).items() if k not in ("command", "config", "output")}
    if args.command in ("analyze", "evolve"):
        key = str(args.config)
        doc = files[key] if files and key in files else cfgmod.load_document(args.config)
        run_cfg = cfgmod.config_from_document(doc, args.command)
    else:
        run_cfg = RunConfig(command=args.command)
    run_cfg.output = getattr(args, "output", None)
    run_cfg.fmt = "json" if args.command == "analyze" else "csv"
    run_cfg.options = opts

    problems = []
    if args.command == "evolve":
        if args.times is not None and (args.t_max is not None or args.samples is not None):
            problems.append("--times conflicts with --t-max/--samples; give one or the other")
        if args.times is not None:
            opts["times"] = parse_float_list(args.times)
        if args.t_max is not None and not args.t_max > 0:
            problems.append("--t-max must be positive")
        if args.samples is not None and args.samples < 2:
            problems.append("--samples must be at least 2")
    if args.command == "fc-table" and args.n_max < 1:
        problems.append("--n-max must be >= 1")
    if args.command == "blockade":
        rng = parse_float_list(args.range)
        if len(rng) != 2:
            problems.append(f"--range expects lo,hi, got {args.range!r}")
        else:
            opts["range"] = tuple(rng)
    if problems:
        raise ConfigError(problems)
    return run_cfg


def _emit(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


def _rates(run_cfg: RunConfig):
    built = cfgmod.build_system(run_cfg.model)
    rm = build_rate_matrix(built.system, built.couplings, run_cfg.bath, **run_cfg.thresholds)
    return built, rm


def _analyze(run_cfg: RunConfig) -> int:
    built, rm = _rates(run_cfg)
    report = connectivity(rm)
    p0 = cfgmod.initial_populations(run_cfg.initial_state, rm.energies, built.labels)
    pred = predict_steady_state(rm, report, p0)
    check = verify_stationarity(rm, pred)
    discrepancy = distance_to(pred.populations, null_space_steady_state(rm, p0))
    gap = None
    if report.connected and rm.n_edges and not run_cfg.bath.zero_temperature:
        gap = relaxation_rate_estimate(rm)
    labels = built.labels or [None] * rm.n_levels
    out = {
        "version": cfgmod.SCHEMA_VERSION,
        "model_kind": built.kind,
        "n_levels": rm.n_levels,
        "levels": [
            {"index": k, "energy": float(e), "label": cfgmod.json_label(lab)}
            for k, (e, lab) in enumerate(zip(rm.energies, labels))
        ],
        "kind": pred.kind,
        "connected": report.connected,
        "components": [list(map(int, c)) for c in report.components],
        "component_weights": pred.component_weights.tolist(),
        "populations": pred.populations.tolist(),
        "residual": check.residual,
        "residual_bound": check.bound,
        "stationary": check.accepted,
        "null_space_discrepancy": discrepancy,
        "edge_threshold": rm.edge_threshold,
        "gap_tol": rm.gap_tol,
        "degenerate_pairs": [list(p) for p in rm.degenerate_pairs],
        "warnings": list(rm.warnings),
        "spectral_gap": gap,
    }
    if run_cfg.options.get("edges") is not None:
        rows = [(i, f, d, w) for i, f, d, w in rm.edges()]
        write_atomic(run_cfg.options["edges"], csv_text(["i", "f", "delta", "W"], rows))
    _emit(run_cfg.output, json_text(out))
    for w in rm.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not check.accepted or discrepancy > NULL_SPACE_TOL:
        print(
            f"error: steady state not certified (residual {check.residual:.3e}, "
            f"null-space discrepancy {discrepancy:.3e})",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    return EXIT_OK


def _default_t_max(rm) -> float:
    report = connectivity(rm, include_degenerate=False)
    gaps = [relaxation_rate_estimate(restrict(rm, c)) for c in report.components if len(c) > 1]
    gaps = [g for g in gaps if g > 0]
    if not gaps:
        raise ValidationError("no relaxing component; give --t-max or --times explicitly")
    return 50.0 / min(gaps)


def _evolve(run_cfg: RunConfig) -> int:
    built, rm = _rates(run_cfg)
    opts = run_cfg.options
    p0 = cfgmod.initial_populations(run_cfg.initial_state, rm.energies, built.labels)
    if opts.get("times") is not None:
        times = np.asarray(opts["times"], dtype=float)
    else:
        t_max = opts.get("t_max") or _default_t_max(rm)
        times = np.linspace(0.0, t_max, opts.get("samples") or 101)
    target = predict_steady_state(rm, connectivity(rm), p0)
    traj = evolve(rm, p0, times, method=opts.get("method", "auto"), target=target)
    header = ["time"] + [f"P_{k}" for k in range(rm.n_levels)] + ["tv_distance"]
    # roundoff negatives are clamped for reporting only
    rows = [[s.time, *s.clamped(), d] for s, d in zip(traj.samples, traj.distances)]
    _emit(run_cfg.output, csv_text(header, rows))
    return EXIT_OK


def fc_table_rows(alpha: float, n_max: int, max_index=None, magnitude=False, method="analytic"):
    if method == "oracle":
        entries = oracle_displacement_matrix(alpha, n_max)
    else:
        table = displacement_matrix(alpha, FockTruncation(n_max))
        entries = table.entries
        uncertified = np.flatnonzero(~table.certified)
        if uncertified.size and (max_index is None or uncertified[0] <= max_index):
            print(
                f"warning: columns n >= {uncertified[0]} leak more than {table.trunc.leakage_tol:g} "
                "outside the table",
                file=sys.stderr,
            )
    top = n_max if max_index is None else min(max_index, n_max)
    block = entries[: top + 1, : top + 1]
    if magnitude:
        block = np.abs(block)
    return [(m, n, block[m, n]) for m in range(top + 1) for n in range(top + 1)]


def _fc_table(run_cfg: RunConfig) -> int:
    o = run_cfg.options
    rows = fc_table_rows(o["alpha"], o["n_max"], o.get("max_index"), o.get("abs", False), o.get("method", "analytic"))
    _emit(run_cfg.output, csv_text(["m", "n", "value"], rows))
    return EXIT_OK


def _blockade(run_cfg: RunConfig) -> int:
    o = run_cfg.options
    cfg = BlockadeConfig(
        m_values=tuple(range(1, o["m_max"] + 1)),
        n_groups=o["groups"],
        alpha_range=o["range"],
        seed=o["seed"],
        mode=o["mode"],
    )
    res = run_blockade(cfg)
    rows = [(g, m, res.log_factors[g, k]) for g in range(cfg.n_groups) for k, m in enumerate(cfg.m_values)]
    _emit(run_cfg.output, csv_text(["group", "M", "log_factor"], rows))
    if o.get("summary") is not None:
        groups = []
        for g, row in enumerate(res.log_factors):
            entry = {"group": g, "strictly_decreasing": bool(np.all(np.diff(row) < 0))}
            if len(cfg.m_values) >= 3:
                slope, intercept, r2 = fit_log_slope(cfg.m_values, row)
                entry.update(slope=slope, intercept=intercept, r_squared=r2)
            groups.append(entry)
        summary = {
            "seed": cfg.seed,
            "mode": cfg.mode,
            "alpha_range": list(cfg.alpha_range),
            "m_values": list(cfg.m_values),
            "groups": groups,
        }
        write_atomic(o["summary"], json_text(summary))
    return EXIT_OK


def _validate(run_cfg: RunConfig) -> int:
    from .validation import run_suite

    results = run_suite()
    for r in results:
        print(r.line)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return EXIT_OK if passed == len(results) else EXIT_NUMERICAL


_DISPATCH = {
    "analyze": _analyze,
    "evolve": _evolve,
    "fc-table": _fc_table,
    "blockade": _blockade,
    "validate": _validate,
}


def _report_error(exc: Exception) -> None:
    problems = getattr(exc, "problems", None)
    if problems:
        print(f"error: {len(problems)} problem(s) in configuration:", file=sys.stderr)
        for p in problems:
            print(f"  {p}", file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


def run(run_cfg: RunConfig) -> int:
    try:
        return _DISPATCH[run_cfg.command](run_cfg)
    except (ValidationError, TruncationError) as exc:
        _report_error(exc)
        return EXIT_INVALID
    except (IntegrationError, SynchrothermError, np.linalg.LinAlgError) as exc:
        _report_error(exc)
        return EXIT_NUMERICAL


def main(argv=None) -> int:
    try:
        run_cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except SynchrothermError as exc:
        _report_error(exc)
        return EXIT_INVALID
    return run(run_cfg)


if __name__ == "__main__":
    sys.exit(main())
