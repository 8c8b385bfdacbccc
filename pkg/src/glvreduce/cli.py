"""glvreduce command-line interface.

Species numbers on the command line and in every file are 1-based.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import reducibility
from .errors import EXIT_CODES, IO_EXIT_CODE, GlvError, InfeasibleReductionError, UsageError
from .integrate import integrate_fixed, read_csv
from .memory import reduce, reduced_system_from_json, solve_reduced
from .model import load_model
from .verify import (
    TOL_RECONSTRUCTED,
    TOL_RESIDUAL,
    TOL_RETAINED,
    VerificationReport,
    compare_columns,
    lorenz_report,
    modifications_of,
    verify_algebraic,
    verify_memory,
)

log = logging.getLogger("glvreduce")


def write_atomic(path, data):
    """Write text or bytes to ``path`` via a temp file and rename; '-' is stdout."""
    if path is None or str(path) == "-":
        sys.stdout.write(data.decode() if isinstance(data, bytes) else data)
        return
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _species_list(text):
    try:
        values = [int(v) - 1 for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated species numbers, got {text!r}")
    if not values or min(values) < 0:
        raise argparse.ArgumentTypeError("species numbers start at 1")
    return values


def _entry(text):
    vals = _species_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected an entry i,j, got {text!r}")
    return tuple(vals)


def _triple(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three numbers, got {text!r}")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three numbers, got {text!r}")
    return vals


def _read_model(args):
    try:
        data = Path(args.model).read_bytes()
    except OSError as exc:
        raise _IOFailure(str(exc))
    model = load_model(data)
    if getattr(args, "zero", None):
        model = model.with_zeroed(args.zero)
        for i, j, v in model.zeroed:
            log.warning("zeroed a(%d,%d) (was %r)", i + 1, j + 1, v)
    return model


def _check_retained(model, retained):
    bad = [r + 1 for r in retained if r >= model.S]
    if bad:
        raise UsageError(f"retained species {bad} out of range 1..{model.S}")


class _IOFailure(Exception):
    pass


# -- commands ---------------------------------------------------------------

def cmd_simulate(args):
    model = _read_model(args)
    traj = integrate_fixed(model, args.t_end, args.dt)
    write_atomic(args.output, traj.to_csv())
    return 0


def _memory_report(model, args):
    return verify_memory(
        model, args.retain, args.t_end, args.dt,
        tol_retained=args.tol, tol_reconstructed=args.tol_reconstructed,
        fp_tol=args.fp_tol, fp_max_iter=args.fp_max_iter,
        heuristic=args.heuristic, timing=args.timing,
    )[0]


def cmd_verify(args):
    model = _read_model(args)
    if args.method == "algebraic":
        if model.S != 2 or args.retain != [0]:
            raise UsageError("the algebraic method is available for S=2 retaining species 1")
        report, _ = verify_algebraic(
            model, args.t_end, args.dt, tol=args.residual_tol, stride=args.stride,
            solve_demo=args.solve_demo, timing=args.timing,
        )
        write_atomic(args.output, report.to_json())
        return 0 if report.passed else 1

    _check_retained(model, args.retain)
    try:
        report = _memory_report(model, args)
    except InfeasibleReductionError as exc:
        report = VerificationReport(
            mode="memory",
            settings={"method": "memory", "retained": [r + 1 for r in sorted(args.retain)]},
            passed=False,
            modifications=modifications_of(model),
            error={"kind": "infeasible", "message": str(exc), "violations": exc.violations},
        )
        write_atomic(args.output, report.to_json())
        raise
    write_atomic(args.output, report.to_json())
    return 0 if report.passed else 1


def _batch_one(job):
    path, argv = job
    args = build_parser().parse_args(argv)
    try:
        return str(path), main_args(args)
    except SystemExit as exc:  # pragma: no cover - parse errors already checked
        return str(path), int(exc.code or 0)


def cmd_batch_verify(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = ["--t-end", repr(args.t_end), "--dt", repr(args.dt),
            "--retain", ",".join(str(r + 1) for r in args.retain),
            "--tol", repr(args.tol), "--tol-reconstructed", repr(args.tol_reconstructed)]
    jobs = [
        (p, ["verify", str(p), *base, "-o", str(out_dir / (Path(p).stem + ".report.json"))])
        for p in args.models
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_one, jobs))
    else:
        results = [_batch_one(j) for j in jobs]
    summary = {path: code for path, code in results}
    write_atomic(out_dir / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return max(summary.values(), default=0)


def cmd_analyze(args):
    model = _read_model(args)
    _check_retained(model, args.retain)
    report = reducibility.check_reducible(model, args.retain, heuristic=args.heuristic)
    doc = report.to_dict()
    doc["modifications"] = modifications_of(model)
    write_atomic(args.output, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_rho(args):
    if args.curve is not None:
        write_atomic(args.output, reducibility.rho_curve_csv(args.curve))
    elif args.limit is not None:
        write_atomic(args.output, f"{reducibility.rho_limit(args.limit)!r}\n")
    else:
        if args.S is None or args.s is None:
            raise UsageError("rho needs --S and --s, or --limit, or --curve")
        write_atomic(args.output, reducibility.format_rho(reducibility.rho(args.S, args.s)) + "\n")
    return 0


def cmd_reduce(args):
    model = _read_model(args)
    _check_retained(model, args.retain)
    rs = reduce(model, args.retain, heuristic=args.heuristic)
    write_atomic(args.output, rs.to_json())
    return 0


def cmd_solve_reduced(args):
    try:
        text = Path(args.reduced).read_text(encoding="utf-8")
    except OSError as exc:
        raise _IOFailure(str(exc))
    rs = reduced_system_from_json(text)
    rt = solve_reduced(rs, args.t_end, args.dt, fp_tol=args.fp_tol, fp_max_iter=args.fp_max_iter)
    write_atomic(args.output, rt.to_csv())
    return 0


def cmd_compare(args):
    try:
        det_header, det = read_csv(Path(args.detailed).read_text(encoding="utf-8"))
        red_header, red = read_csv(Path(args.reduced).read_text(encoding="utf-8"))
    except OSError as exc:
        raise _IOFailure(str(exc))
    comparison = compare_columns(
        det[:, 0], {lab: det[:, i] for i, lab in enumerate(det_header) if i},
        red[:, 0], {lab: red[:, i] for i, lab in enumerate(red_header) if i},
        tol_retained=args.tol, tol_reconstructed=args.tol_reconstructed,
    )
    report = VerificationReport(
        mode="memory",
        settings={"method": "memory", "detailed": str(args.detailed), "reduced": str(args.reduced),
                  "tol_retained": args.tol, "tol_reconstructed": args.tol_reconstructed},
        passed=comparison["pass"],
        comparison=comparison,
    )
    write_atomic(args.output, report.to_json())
    return 0 if report.passed else 1


def cmd_lorenz(args):
    doc = lorenz_report(args.alpha, args.beta, args.gamma, args.x0, args.t_end, args.dt,
                        stride=args.stride, tol=args.tol)
    write_atomic(args.output, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0 if doc["summary"]["pass"] else 1


# -- parser -----------------------------------------------------------------

def _epilog():
    lines = ["exit codes:"] + [f"  {code:>2}  {text}" for code, text in sorted(EXIT_CODES.items())]
    lines.append("environment: GLVREDUCE_LOG sets log verbosity (DEBUG, INFO, WARNING, ...)")
    return "\n".join(lines)


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    p = argparse.ArgumentParser(prog="glvreduce", description=__doc__, epilog=_epilog(),
                                formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True)

    def grid(sp):
        sp.add_argument("--t-end", type=float, default=10.0)
        sp.add_argument("--dt", type=float, default=1e-3)

    def output(sp):
        sp.add_argument("-o", "--output", default="-", help="output path ('-' for stdout)")

    def zero(sp):
        sp.add_argument("--zero", type=_entry, action="append", metavar="I,J",
                        help="set a(I,J) to 0 before analysis (recorded in reports)")

    def fixed_point(sp):
        sp.add_argument("--fp-tol", type=float, default=1e-12)
        sp.add_argument("--fp-max-iter", type=int, default=50)

    def tolerances(sp):
        sp.add_argument("--tol", type=float, default=TOL_RETAINED,
                        help="L-inf relative tolerance for retained species")
        sp.add_argument("--tol-reconstructed", type=float, default=TOL_RECONSTRUCTED)

    sp = sub.add_parser("simulate", help="integrate the detailed model to CSV", epilog=_epilog(),
                        formatter_class=fmt)
    sp.add_argument("model")
    grid(sp), output(sp), zero(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="check a reduction against the detailed model",
                        epilog=_epilog(), formatter_class=fmt)
    sp.add_argument("model")
    sp.add_argument("--retain", type=_species_list, required=True, metavar="I[,J...]")
    sp.add_argument("--method", choices=("memory", "algebraic"), default="memory")
    sp.add_argument("--residual-tol", type=float, default=TOL_RESIDUAL)
    sp.add_argument("--stride", type=int, default=0,
                    help="algebraic mode: include every STRIDE-th state in the report")
    sp.add_argument("--solve-demo", action="store_true",
                    help="algebraic mode: also integrate the equivalent first-order pair")
    sp.add_argument("--heuristic", action="store_true")
    sp.add_argument("--timing", action="store_true", help="add wall time (reports become non-reproducible)")
    grid(sp), output(sp), zero(sp), fixed_point(sp), tolerances(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("batch-verify", help="verify many models, one report each")
    sp.add_argument("models", nargs="+")
    sp.add_argument("--retain", type=_species_list, required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--jobs", type=int, default=1)
    grid(sp), tolerances(sp)
    sp.set_defaults(func=cmd_batch_verify)

    sp = sub.add_parser("analyze", help="reducibility search for a retained set")
    sp.add_argument("model")
    sp.add_argument("--retain", type=_species_list, required=True)
    sp.add_argument("--heuristic", action="store_true")
    output(sp), zero(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("rho", help="fraction of interaction terms that must vanish")
    sp.add_argument("--S", type=int)
    sp.add_argument("--s", type=int)
    sp.add_argument("--limit", type=float, metavar="ALPHA")
    sp.add_argument("--curve", type=int, metavar="N")
    output(sp)
    sp.set_defaults(func=cmd_rho)

    sp = sub.add_parser("reduce", help="build the memory-method reduced system as JSON")
    sp.add_argument("model")
    sp.add_argument("--retain", type=_species_list, required=True)
    sp.add_argument("--heuristic", action="store_true")
    output(sp), zero(sp)
    sp.set_defaults(func=cmd_reduce)

    sp = sub.add_parser("solve-reduced", help="integrate a reduced-system JSON to CSV")
    sp.add_argument("reduced")
    grid(sp), output(sp), fixed_point(sp)
    sp.set_defaults(func=cmd_solve_reduced)

    sp = sub.add_parser("compare", help="compare detailed and reduced trajectory CSVs")
    sp.add_argument("detailed")
    sp.add_argument("reduced")
    output(sp), tolerances(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("lorenz", help="third-order Lorenz residual report")
    sp.add_argument("--alpha", type=float, default=10.0)
    sp.add_argument("--beta", type=float, default=28.0)
    sp.add_argument("--gamma", type=float, default=8.0 / 3.0)
    sp.add_argument("--x0", type=_triple, default=[1.0, 1.0, 1.0])
    sp.add_argument("--stride", type=int, default=10)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--t-end", type=float, default=20.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    output(sp)
    sp.set_defaults(func=cmd_lorenz)
    return p


def main_args(args):
    try:
        return args.func(args)
    except GlvError as exc:
        print(f"glvreduce: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except _IOFailure as exc:
        print(f"glvreduce: I/O error: {exc}", file=sys.stderr)
        return IO_EXIT_CODE
    except OSError as exc:
        print(f"glvreduce: I/O error: {exc}", file=sys.stderr)
        return IO_EXIT_CODE


def main(argv=None):
    logging.basicConfig(level=os.environ.get("GLVREDUCE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return main_args(args)


if __name__ == "__main__":
    sys.exit(main())
