"""Command line driver for simulation campaigns and analysis.

Subcommands:

* ``simulate``      sweep (d, p) cells, decode, and emit CSV rate rows
* ``fit-threshold`` finite-size crossing fit over a results CSV
* ``fit-distance``  log-log slope fit over a results CSV
* ``verify-tables`` re-derive the fault tables and diff them against the
  built-in data; exits nonzero on any mismatch
* ``inject``        exhaustive deterministic fault-injection report

A flat JSON config file (``--config``) may supply any flag of the same
subcommand; explicit command line flags win.  ``simulate`` resumes: cells
whose run id is already present in ``--out`` are skipped, so interrupted
campaigns can simply be re-invoked.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from .lattice import FIVE_CNOT, VARIANTS, build_layout
from .noise import DETECT_BOTH, DETECT_ONE_TYPE
from .engine import derive_fault_tables
from .matching import DECODERS
from .analysis import fit_distance, fit_threshold
from .experiment import (
    RunConfig,
    append_rows,
    curves_by_distance,
    existing_run_ids,
    filter_rows,
    parse_fault,
    rate_points,
    read_rows,
    run_cell,
    run_inject,
)

__all__ = ["main", "build_parser"]

# --detect flag spelling -> NoiseConfig detection mode
DETECT_FLAG = {"both": DETECT_BOTH, "one": DETECT_ONE_TYPE}


def _add_noise_flags(sub, shots_default=1000):
    """Flags shared by every subcommand that builds a noise model."""
    sub.add_argument("--rounds", type=int, default=0,
                     help="syndrome rounds per shot (default: d)")
    sub.add_argument("--re", type=float, default=1.0,
                     help="decay fraction R_e of the physical error rate")
    sub.add_argument("--eta", type=float, default=0.0,
                     help="conditional Pauli-Z rate on decay neighbors")
    sub.add_argument("--variant", choices=VARIANTS, default=FIVE_CNOT)
    sub.add_argument("--detect", choices=sorted(DETECT_FLAG), default="both",
                     help="decay detection mode of the measurement")
    sub.add_argument("--detect-ratio", type=float, default=1.0,
                     help="detection probability of a single decayed atom")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swaplru",
        description="Toric code Monte Carlo with SWAP-based leakage removal")
    cmds = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = {}

    def add_parser(name, **kw):
        sub = cmds.add_parser(name, **kw)
        parser.subcommands[name] = sub
        return sub

    sim = add_parser(
        "simulate", help="run (d, p) cells and append CSV rate rows")
    sim.add_argument("--config", help="flat JSON file of flag defaults")
    sim.add_argument("--d", type=int, nargs="+", default=[3],
                     help="code distances to sweep")
    sim.add_argument("--p", type=float, nargs="+", required=True,
                     help="physical error rates to sweep")
    _add_noise_flags(sim)
    sim.add_argument("--decoder", choices=DECODERS, default="trivial")
    sim.add_argument("--shots", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0, help="master seed")
    sim.add_argument("--workers", type=int, default=None,
                     help="parallel workers (default: $SWAPLRU_WORKERS or 1)")
    sim.add_argument("--out", default=None,
                     help="CSV to append to (default: CSV on stdout)")
    sim.add_argument("--timing", action="store_true",
                     help="record wall_seconds (breaks byte determinism)")
    sim.set_defaults(func=cmd_simulate)

    for name, func in (("fit-threshold", cmd_fit_threshold),
                       ("fit-distance", cmd_fit_distance)):
        fit = add_parser(name, help=f"{name.split('-')[1]} fit from CSV")
        fit.add_argument("--config", help="flat JSON file of flag defaults")
        fit.add_argument("--data", nargs="+", required=True,
                         help="results CSV file(s) to read")
        fit.add_argument("--decoder", choices=DECODERS, default=None,
                         help="keep only rows of this decoder")
        fit.add_argument("--variant", choices=VARIANTS, default=None)
        fit.add_argument("--re", type=float, default=None)
        fit.add_argument("--eta", type=float, default=None)
        fit.add_argument("--detect", choices=sorted(DETECT_FLAG), default=None)
        fit.add_argument("--detect-ratio", type=float, default=None)
        fit.add_argument("--out", default=None,
                         help="CSV to append the fit row to")
        if name == "fit-distance":
            fit.add_argument("--d", type=int, default=None,
                             help="keep only rows of this distance")
            fit.add_argument("--p-ref", type=float, required=True,
                             help="reference rate anchoring the fit window")
            fit.add_argument("--account", choices=("x2", "both"), default="x2")
        else:
            fit.add_argument("--account", choices=("x2", "both"),
                             default="both")
        fit.set_defaults(func=func)

    ver = add_parser(
        "verify-tables", help="re-derive fault tables against built-in data")
    ver.add_argument("--d", type=int, default=3)
    ver.add_argument("--rounds", type=int, default=6)
    ver.add_argument("--variant", choices=VARIANTS, default=None,
                     help="default: check both variants")
    ver.set_defaults(func=cmd_verify_tables)

    inj = add_parser(
        "inject", help="decode every realization of injected faults")
    inj.add_argument("--config", help="flat JSON file of flag defaults")
    inj.add_argument("--d", type=int, default=3)
    inj.add_argument("--fault", action="append", required=True,
                     metavar="ROUND:KIND:STAB:GATE:PAULI:PP|ROUND:KIND:STAB:GATE:LEAK:SIDE",
                     help="fault spec; repeat for multi-fault scenarios")
    inj.add_argument("--decoder", action="append", choices=DECODERS,
                     default=None, help="repeatable (default: all three)")
    inj.add_argument("--p", type=float, default=0.005,
                     help="nominal rate setting the decoder edge weights")
    _add_noise_flags(inj)
    inj.set_defaults(func=cmd_inject)

    return parser


def _config_path(argv):
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def _apply_config(parser, command, path):
    """Install JSON-file values as flag defaults; explicit flags win.

    Values carry JSON types (lists for the sweep flags, numbers for
    numeric flags).  Keys may use flag spelling or underscores.
    """
    with open(path, encoding="utf-8") as fh:
        overrides = json.load(fh)
    sub = parser.subcommands[command]
    valid = {a.dest for a in sub._actions} - {"help"}
    defaults = {}
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in valid:
            raise SystemExit(f"config key {key!r} matches no {command} flag")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    for action in sub._actions:
        if action.dest in defaults:
            action.required = False


def cmd_simulate(args) -> int:
    existing = existing_run_ids(args.out) if args.out else set()
    stdout_rows = []
    for d in args.d:
        for p in args.p:
            cfg = RunConfig(d=d, p=p, rounds=args.rounds, r_e=args.re,
                            eta=args.eta, decoder=args.decoder,
                            variant=args.variant,
                            detection_mode=DETECT_FLAG[args.detect],
                            detect_ratio=args.detect_ratio,
                            shots=args.shots, seed=args.seed)
            if cfg.run_id in existing:
                print(f"{cfg.run_id}  d={d} p={p}  skipped (present in "
                      f"{args.out})", file=sys.stderr)
                continue
            row = run_cell(cfg, workers=args.workers, timing=args.timing)
            if args.out:
                append_rows(args.out, [row])
                print(f"{cfg.run_id}  d={d} p={p}  fail_X2="
                      f"{row['fail_X2']}/{row['shots']}")
            else:
                stdout_rows.append(row)
    if stdout_rows:
        print(_csv_text(stdout_rows), end="")
    return 0


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _filtered_rows(args):
    rows = []
    for path in args.data:
        rows.extend(read_rows(path))
    match = {}
    if args.decoder is not None:
        match["decoder"] = args.decoder
    if args.variant is not None:
        match["variant"] = args.variant
    if args.re is not None:
        match["R_e"] = repr(float(args.re))
    if args.eta is not None:
        match["eta"] = repr(float(args.eta))
    if args.detect is not None:
        match["detect_mode"] = DETECT_FLAG[args.detect]
    if args.detect_ratio is not None:
        match["detect_ratio"] = repr(float(args.detect_ratio))
    if getattr(args, "d", None) is not None:
        match["d"] = str(args.d)
    rows = filter_rows(rows, **match)
    if not rows:
        raise SystemExit("no rows left after filtering")
    return rows


def _emit_fit(pairs, out) -> None:
    for key, value in pairs:
        print(f"{key} = {value}")
    row = {k: str(v) for k, v in pairs}
    print(_csv_text([row]), end="")
    if out:
        fresh = not os.path.exists(out)
        with open(out, "a", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row))
            if fresh:
                writer.writeheader()
            writer.writerow(row)


def cmd_fit_threshold(args) -> int:
    curves = curves_by_distance(_filtered_rows(args), account=args.account)
    if len(curves) < 2:
        raise SystemExit("threshold fit needs rows from >= 2 distances")
    fit = fit_threshold(curves)
    _emit_fit([
        ("kind", "threshold"),
        ("account", args.account),
        ("n_points", fit.n_points),
        ("p_th", repr(fit.p_th)),
        ("nu", repr(fit.nu)),
        ("chi2", repr(fit.chi2)),
    ], args.out)
    return 0


def cmd_fit_distance(args) -> int:
    points = rate_points(_filtered_rows(args), account=args.account)
    fit = fit_distance(points, args.p_ref)
    _emit_fit([
        ("kind", "distance"),
        ("account", args.account),
        ("p_ref", repr(args.p_ref)),
        ("n_used", len(fit.used)),
        ("n_dropped", len(fit.dropped)),
        ("slope", repr(fit.slope)),
        ("slope_err", repr(fit.slope_err)),
        ("intercept", repr(fit.intercept)),
    ], args.out)
    return 0


def cmd_verify_tables(args) -> int:
    layout = build_layout(args.d)
    status = 0
    for variant in ([args.variant] if args.variant else list(VARIANTS)):
        try:
            entries = derive_fault_tables(layout, variant, rounds=args.rounds)
        except AssertionError as exc:
            print(f"{variant}: MISMATCH  {exc}")
            status = 1
            continue
        n_gates = 5 if variant == FIVE_CNOT else 4
        n_depol = 2 * layout.n_stab * 3 * n_gates * 3
        print(f"{variant}: ok  {len(entries)} decay rows and "
              f"{n_depol} depolarizing classes re-derived")
    return status


def cmd_inject(args) -> int:
    try:
        faults = [parse_fault(text) for text in args.fault]
    except ValueError as exc:
        raise SystemExit(f"bad fault spec: {exc}")
    decoders = tuple(dict.fromkeys(args.decoder)) if args.decoder else DECODERS
    report = run_inject(args.d, faults, decoders=decoders, rounds=args.rounds,
                        p_nominal=args.p, r_e=args.re, eta=args.eta,
                        detection_mode=DETECT_FLAG[args.detect],
                        detect_ratio=args.detect_ratio, variant=args.variant)
    print(f"d={report.d} rounds={report.rounds} faults={len(faults)}")
    for text in args.fault:
        print(f"  fault {text}")
    for name in decoders:
        out = report.outcomes[name]
        verdict = "FAILS" if report.failing(name) else "clean"
        print(f"{name:9s} realizations={out.n_realizations} "
              f"patterns={out.n_patterns} fail_X1={out.n_fail_x1} "
              f"fail_X2={out.n_fail_x2}  {verdict}")
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    path = _config_path(argv)
    if path is not None and argv and argv[0] in parser.subcommands:
        _apply_config(parser, argv[0], path)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
