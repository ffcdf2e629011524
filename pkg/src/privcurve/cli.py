"""Command-line front end.

Exit status: 0 on success, 1 on invalid input, 2 when a verification or
constraint check fails.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from .curve import build_curve, tabulate
from .estimator import mmse_estimator_for_mechanism
from .linmap import MatrixFormatError, load_linear_map, svd_ascending
from .mechanism import (
    CoordinateMode,
    mechanism_from_svd,
    sample_joint,
    write_batch_binary,
    write_batch_csv,
)
from .montecarlo import (
    COMPARE_HEADER,
    SWEEP_HEADER,
    compare_mechanisms,
    shard_count,
    simulate,
)
from .verify import run_identity_suite

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2
SIG_DIGITS = 12


class UsageError(Exception):
    pass


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.{SIG_DIGITS}g}"


def _round(obj):
    """Round floats to 12 significant digits for stable JSON; NaN -> null."""
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return None
        return float(f"{float(obj):.{SIG_DIGITS}g}")
    return obj


def dump_json(obj) -> str:
    return json.dumps(_round(obj), indent=2) + "\n"


def dump_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def parse_sweep(spec: str) -> np.ndarray:
    try:
        start_s, stop_s, count_s = spec.split(":")
        start, stop, count = float(start_s), float(stop_s), int(count_s)
    except ValueError:
        raise UsageError(f"invalid sweep {spec!r}; expected start:stop:count") from None
    if start < 0 or stop < 0:
        raise UsageError("rho must be nonnegative")
    if start > stop:
        raise UsageError("sweep start must not exceed stop")
    if count < 2:
        raise UsageError("sweep count must be >= 2")
    return np.linspace(start, stop, count)


def rho_values(args, required: bool = True) -> Optional[np.ndarray]:
    if args.rho is not None:
        if not args.rho >= 0:
            raise UsageError("rho must be nonnegative")
        return np.array([args.rho])
    if args.rho_sweep is not None:
        return parse_sweep(args.rho_sweep)
    if required:
        raise UsageError("one of --rho or --rho-sweep is required")
    return None


def single_rho(args) -> float:
    if args.rho_sweep is not None:
        raise UsageError(f"{args.command} takes a single --rho, not a sweep")
    return float(rho_values(args)[0])


@contextlib.contextmanager
def open_output(path: Optional[str], binary: bool = False):
    if path in (None, "-"):
        yield sys.stdout.buffer if binary else sys.stdout
    else:
        with open(path, "wb" if binary else "w", encoding=None if binary else "utf-8",
                  newline=None if binary else "") as fh:
            yield fh


def write_text(args, text: str) -> None:
    with open_output(args.out) as fh:
        fh.write(text)


def _load(args):
    linear_map = load_linear_map(args.matrix)
    return linear_map, svd_ascending(linear_map, args.rank_tol)


def cmd_curve(args) -> int:
    linear_map, svd = _load(args)
    grid = rho_values(args, required=False)
    curve = build_curve(svd, linear_map.n)
    table = tabulate(curve, () if grid is None else grid)
    if args.format == "csv":
        write_text(args, dump_csv(["rho", "pi"], table))
    else:
        doc = curve.to_dict()
        doc["table"] = table.tolist()
        write_text(args, dump_json(doc))
    return EXIT_OK


def cmd_mechanism(args) -> int:
    linear_map, svd = _load(args)
    mech = mechanism_from_svd(linear_map, svd, single_rho(args), args.mode)
    doc = mech.to_dict()
    if args.format == "csv":
        raise UsageError("mechanism export is JSON only")
    doc["estimator"] = mmse_estimator_for_mechanism(mech).to_dict()
    write_text(args, dump_json(doc))
    return EXIT_OK


def cmd_sample(args) -> int:
    linear_map, svd = _load(args)
    mech = mechanism_from_svd(linear_map, svd, single_rho(args), args.mode)
    batch = sample_joint(mech, args.trials, args.seed, shard_count())
    if args.format == "bin":
        with open_output(args.out, binary=True) as fh:
            write_batch_binary(batch, fh)
    elif args.format == "csv":
        with open_output(args.out) as fh:
            write_batch_csv(batch, fh)
    else:
        raise UsageError("sample supports --format csv or bin")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.trials < 2:
        raise UsageError("trials must be ≥ 2")
    linear_map, svd = _load(args)
    rhos = rho_values(args)
    reports = [simulate(mechanism_from_svd(linear_map, svd, rho, args.mode), args.trials,
                        args.seed) for rho in rhos]
    if args.format == "csv":
        write_text(args, dump_csv(SWEEP_HEADER, [r.csv_row() for r in reports]))
    elif len(reports) == 1:
        write_text(args, dump_json(reports[0].to_dict()))
    else:
        write_text(args, dump_json([r.to_dict() for r in reports]))
    return EXIT_OK if all(r.all_pass for r in reports) else EXIT_FAILED


def cmd_compare(args) -> int:
    if args.trials < 2:
        raise UsageError("trials must be ≥ 2")
    linear_map, _ = _load(args)
    rho = single_rho(args)
    rows = compare_mechanisms(linear_map, rho, trials=args.trials, seed=args.seed)
    if args.format == "csv":
        write_text(args, dump_csv(COMPARE_HEADER, [
            [r.name, r.empirical_distortion, r.distortion_se, r.empirical_mmse, r.mmse_se,
             r.closed_form_mmse, r.pi_closed, r.feasible, r.converse_ok] for r in rows]))
    else:
        write_text(args, dump_json({"rho": rho, "candidates": [r.to_dict() for r in rows]}))
    return EXIT_OK if all(r.converse_ok for r in rows) else EXIT_FAILED


def cmd_verify(args) -> int:
    linear_map = load_linear_map(args.matrix)
    checks = run_identity_suite(linear_map, args.seed, args.rank_tol)
    lines = [f"{'check':<32} {'result':<6} {'worst':>12} {'tolerance':>12}"]
    for c in checks:
        lines.append(f"{c.name:<32} {'PASS' if c.passed else 'FAIL':<6} "
                     f"{fmt(c.worst):>12} {fmt(c.tolerance):>12}")
    failures = sum(not c.passed for c in checks)
    lines.append(f"{failures} failures")
    write_text(args, "\n".join(lines) + "\n")
    return EXIT_OK if failures == 0 else EXIT_FAILED


COMMANDS = {
    "curve": cmd_curve,
    "mechanism": cmd_mechanism,
    "sample": cmd_sample,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privcurve",
        description="Maximum privacy of Gaussian data under linear-function recoverability.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--matrix", required=True, help="matrix JSON file")
        group = p.add_mutually_exclusive_group()
        group.add_argument("--rho", type=float)
        group.add_argument("--rho-sweep", metavar="A:B:K")
        p.add_argument("--trials", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", default="-")
        p.add_argument("--format", choices=["json", "csv", "bin"])
        p.add_argument("--mode", choices=[m.value for m in CoordinateMode],
                       default=CoordinateMode.ORIGINAL.value)
        p.add_argument("--rank-tol", type=float, default=0.0)
    return parser


def _glue_values(argv: Sequence[str]) -> list[str]:
    # keep "--rho-sweep -1:5:3" from being read as an option
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in ("--rho-sweep", "--rho"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def default_format(args) -> str:
    if args.command in ("curve", "sample"):
        return "csv"
    if args.command == "simulate" and args.rho_sweep is not None:
        return "csv"
    return "json"


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parser.parse_args(_glue_values(argv))
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if args.format is None:
        args.format = default_format(args)
    if args.format == "bin" and args.command != "sample":
        print("error: --format bin is only valid for sample", file=sys.stderr)
        return EXIT_INVALID
    if args.rank_tol < 0:
        print("error: rank tolerance must be nonnegative", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except (UsageError, MatrixFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
