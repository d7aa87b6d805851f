"""Command-line front end.

Exit codes: 0 success (including a structured "not found" answer), 1 file or
parse error, 2 invalid parameters or options, 3 numerical failure, 4 no
R0 = 1 crossing in a sweep whose report was requested.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import sys
import warnings
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import io
from .bifurcation import (
    SWEEPABLE,
    detect_transcritical,
    find_hopf,
    locate_tbt_point,
    sweep_branch,
    unfolding,
)
from .dynamics import DormandPrince, find_limit_cycle, homoclinic_proximity
from .equilibria import NoEndemic, disease_free_equilibrium, endemic_closed_form, newton_equilibrium, r0
from .errors import NoCrossing, ParameterError, RiskbifError
from .model import REFERENCE_PARAMS, ModelParams, full_field, reduced_field
from .normal_form import bt_report

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERIC, EXIT_NOT_FOUND = 0, 1, 2, 3, 4

log = logging.getLogger("riskbif")


class UsageError(ValueError):
    pass


def _floats(text: str, n: int | Sequence[int] | None = None, name: str = "value") -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{name}: values must be finite")
    allowed = (n,) if isinstance(n, int) else n
    if allowed is not None and len(vals) not in allowed:
        raise UsageError(f"{name}: expected {' or '.join(map(str, allowed))} numbers, got {len(vals)}")
    return vals


def _finite(x: float | None, name: str) -> None:
    if x is not None and not math.isfinite(x):
        raise UsageError(f"{name} must be finite")


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _emit(args, doc: dict) -> None:
    with _output(args.out) as fh:
        fh.write(io.dumps(doc))


# ---------------------------------------------------------------------------
# commands


def cmd_equilibria(args, params: ModelParams) -> int:
    tol = args.tol
    d = unfolding(params)
    e0 = disease_free_equilibrium(params)
    e1 = endemic_closed_form(params, tol=tol)
    if not isinstance(e1, NoEndemic) and e1.note == "closed-form":
        # Newton refinement as an independent check of the closed form
        try:
            ref = newton_equilibrium(e1.x, params, tol=tol)
            e1.note = f"closed-form; newton shift {float(np.max(np.abs(ref.x - e1.x))):.3e}"
        except RiskbifError as exc:
            e1.note = f"closed-form; newton failed: {exc}"
    doc = {
        "command": "equilibria",
        "params": params.to_dict(),
        "R0": r0(params),
        "delta1": d.delta1,
        "delta2": d.delta2,
        "E0": e0.to_dict(),
        "E1": None if isinstance(e1, NoEndemic) else e1.to_dict(),
    }
    if isinstance(e1, NoEndemic):
        doc["E1_reason"] = e1.reason
    _emit(args, doc)
    return EXIT_OK


def cmd_simulate(args, params: ModelParams) -> int:
    T = params.T_total
    t0, t1 = _floats(args.t_span, 2, "--t-span")
    if t1 < t0:
        raise UsageError("--t-span must have t0 <= t1")
    if args.x0 is None:
        e1 = endemic_closed_form(params)
        base = disease_free_equilibrium(params).x if isinstance(e1, NoEndemic) else e1.x
        x = base + np.array([0.01 * T, 0.0, 0.0])
    else:
        x = np.array(_floats(args.x0, (3, 4) if args.full else 3, "--x0"))
    if np.any(x[:3] < 0):
        raise UsageError("initial state must be nonnegative")
    if args.full:
        if x.size == 3:
            x = np.append(x, T - x.sum())
        S, I, U, P = x
        y0 = np.array([P, S, I, U])
        f = full_field(params)
        order = [1, 2, 3, 0]
        header = "t,S,I,U,P"
    else:
        if x.sum() <= 0:
            raise UsageError("initial state needs N > 0")
        y0 = x
        f = reduced_field(params)
        order = [0, 1, 2]
        header = "t,S,I,U"
    rtol = args.tol if args.tol is not None else 1e-10
    atol = 1e-12 * T
    dt = args.dt
    if dt is not None and not dt > 0:
        raise UsageError("--dt must be positive")

    k_I = 2 if args.full else 1
    level = None
    if args.events:
        e1 = endemic_closed_form(params)
        if isinstance(e1, NoEndemic):
            raise UsageError("--events needs an endemic equilibrium to anchor the section I = I1")
        level = e1.coords.I
        header += ",event"

    with _output(args.out) as fh:
        fh.write(header + "\n")

        def row(t, y, event=None):
            cells = [t, *(y[i] for i in order)]
            if level is not None:
                cells.append(event or "")
            io.write_csv_row(fh, cells)

        row(t0, y0)
        status = None
        try:
            stepper = DormandPrince(f, y0, t0, t1, rtol, atol, floor=-100 * atol)
            k = 1
            for step in stepper.steps():
                rows = []
                if level is not None and step.y0[k_I] < level < step.y1[k_I]:
                    tc = brentq(lambda t: step(t)[k_I] - level, step.t0, step.t1, xtol=1e-12)
                    rows.append((tc, step(tc), "section"))
                if dt is None:
                    rows.append((step.t1, step.y1, None))
                else:
                    while t0 + k * dt <= step.t1 + 1e-12 * max(1.0, abs(step.t1)):
                        tk = min(t0 + k * dt, step.t1)
                        rows.append((tk, step.y1 if tk == step.t1 else step(tk), None))
                        k += 1
                for t, y, ev in sorted(rows, key=lambda r: r[0]):
                    row(t, y, ev)
        except RiskbifError as exc:
            status = f"{type(exc).__name__}: {exc}"
        if status is not None:
            fh.write(f"# status: {status}\n")
            fh.flush()
            print(f"riskbif: integration failed: {status}", file=sys.stderr)
            return EXIT_NUMERIC
    return EXIT_OK


def cmd_sweep(args, params: ModelParams) -> int:
    if args.param not in SWEEPABLE:
        raise UsageError(f"--param must be one of {', '.join(SWEEPABLE)}")
    _finite(args.start, "--from")
    _finite(args.stop, "--to")
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    values = np.linspace(args.start, args.stop, args.steps)
    rows = sweep_branch(params, args.param, values, max_workers=args.workers)
    for r in rows:
        if r.error:
            print(f"riskbif: {args.param} = {io.fmt(r.value)}: {r.error}", file=sys.stderr)
    with _output(args.out) as fh:
        io.branch_rows_csv(rows, fh)
    if args.report:
        try:
            rep = detect_transcritical(rows, params, args.param)
        except NoCrossing as exc:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(io.dumps({"command": "sweep", "found": False, "reason": str(exc)}))
            return EXIT_NOT_FOUND
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(io.dumps({"command": "sweep", "found": True, **rep.to_dict()}))
    return EXIT_OK


def cmd_hopf(args, params: ModelParams) -> int:
    if args.param not in SWEEPABLE:
        raise UsageError(f"--param must be one of {', '.join(SWEEPABLE)}")
    _finite(args.start, "--from")
    _finite(args.stop, "--to")
    tol = args.tol if args.tol is not None else 1e-10
    res = find_hopf(params, args.param, (args.start, args.stop), tol=tol)
    _emit(args, {"command": "hopf", "param": args.param, "bracket": [args.start, args.stop], **res.to_dict()})
    return EXIT_OK


def cmd_cycle(args, params: ModelParams) -> int:
    kw = {}
    if args.tol is not None:
        kw["tol"] = args.tol
    if args.ramp_param:
        if args.ramp_param not in SWEEPABLE:
            raise UsageError(f"--ramp-param must be one of {', '.join(SWEEPABLE)}")
        if not args.ramp_values:
            raise UsageError("--ramp-values is required with --ramp-param")
        values = _floats(args.ramp_values, None, "--ramp-values")
        table = homoclinic_proximity(params, args.ramp_param, values, **kw)
        _emit(args, {"command": "cycle", "ramp": table.to_dict()})
        return EXIT_OK
    seed = _floats(args.seed, 3, "--seed") if args.seed else None
    res = find_limit_cycle(params, seed_state=seed, **kw)
    doc = res.to_dict()
    doc.pop("history", None)
    _emit(args, {"command": "cycle", "params": params.to_dict(), **doc})
    return EXIT_OK


def cmd_tbt(args, params: ModelParams) -> int:
    p, diag = locate_tbt_point(params)
    _emit(args, {"command": "tbt", **diag.to_dict()})
    return EXIT_OK


def cmd_normal_form(args, params: ModelParams) -> int:
    p = params if args.as_is else locate_tbt_point(params)[0]
    rep = bt_report(p, richardson=args.richardson)
    _emit(args, {"command": "normal-form", **rep.to_dict()})
    return EXIT_OK


COMMANDS = {
    "equilibria": cmd_equilibria,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "hopf": cmd_hopf,
    "cycle": cmd_cycle,
    "tbt": cmd_tbt,
    "normal-form": cmd_normal_form,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="JSON parameter file (default: built-in reference set)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--tol", type=float, help="command-specific tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="riskbif", description="Bifurcation analysis of the risk-perception epidemic model.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("equilibria", parents=[common], help="equilibria, R0 and stability")

    sp = sub.add_parser("simulate", parents=[common], help="integrate a trajectory to CSV")
    sp.add_argument("--x0", help="initial S,I,U (with --full optionally S,I,U,P)")
    sp.add_argument("--t-span", default="0,500", help="t0,t1 (default 0,500)")
    sp.add_argument("--dt", type=float, help="uniform output spacing (default: every accepted step)")
    sp.add_argument("--full", action="store_true", help="integrate the 4D system and add a P column")
    sp.add_argument("--events", action="store_true", help="add rows for upward crossings of I = I1 (event column)")

    for name, helptext in (("sweep", "equilibrium branches along a parameter"), ("hopf", "locate a Hopf point")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--param", required=True, choices=SWEEPABLE)
        sp.add_argument("--from", dest="start", type=float, required=True)
        sp.add_argument("--to", dest="stop", type=float, required=True)
        if name == "sweep":
            sp.add_argument("--steps", type=int, default=101)
            sp.add_argument("--workers", type=int, default=None)
            sp.add_argument("--report", help="write the R0 = 1 crossing report (JSON) here")

    sp = sub.add_parser("cycle", parents=[common], help="find a limit cycle or ramp toward a homoclinic loop")
    sp.add_argument("--seed", help="seed state S,I,U")
    sp.add_argument("--ramp-param", choices=SWEEPABLE)
    sp.add_argument("--ramp-values", help="comma-separated ramp values")

    sub.add_parser("tbt", parents=[common], help="impose the double-zero point and check its structure")
    sp = sub.add_parser("normal-form", parents=[common], help="quadratic normal-form coefficients")
    sp.add_argument("--as-is", action="store_true", help="use the parameters unchanged (must already be a double-zero point)")
    sp.add_argument("--richardson", action="store_true", help="Richardson-refine the second derivatives")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        _finite(args.tol, "--tol")
        if args.tol is not None and args.tol <= 0:
            raise UsageError("--tol must be positive")
        params = io.load_params(args.params) if args.params else ModelParams(**REFERENCE_PARAMS)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"riskbif: cannot read parameters: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParameterError, UsageError, TypeError) as exc:
        print(f"riskbif: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args, params)
    except (UsageError, ParameterError) as exc:
        print(f"riskbif: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"riskbif: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RiskbifError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"riskbif: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
