"""Command-line surface: every computation, with reproducible file outputs.

Conventions shared by all subcommands: CSV output is comma-separated with a
header row and 17 significant digits (round-trip safe); JSON objects are
flat, with log-space quantities emitted as {log_abs, sign} pairs; files are
written atomically (temp + rename); identical invocations produce
byte-identical output.  ``m`` is given either directly (--m) or as
--sign {minus,plus} meaning m = -sqrt(eps) / +sqrt(eps).  A --config JSON
file, when given, overrides the corresponding flags.  The only environment
variable consulted is PWLCANARD_THREADS (branch sweep workers).

Exit codes: 0 success, 2 usage or parameter-domain error, 3 numerical
failure (diagnostic JSON on standard error).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

from .acceptance import run_all
from .canard import (
    R3z,
    R4z,
    a_tilde_series,
    hstar_root,
    hstar_series,
    maximal_canard,
    params_on_branch,
    saddle_node_k_for_width,
    tau_C_series,
)
from .continuation import default_width_grid, detect_folds, hopf_check, trace_branch
from .errors import NumericalError
from .linflow import integrate_orbit
from .model import Params, equilibrium_stability, landmarks
from .poincare import fixed_points

__all__ = ["main"]

#: Figure 6(a) caption parameters (the three-cycle regime).
_FIG6A = dict(a=0.2305968812, k=2.5, m=-math.sqrt(0.1), eps=0.1)


class UsageError(Exception):
    pass


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".pwl-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _atomic_write(out, text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_g17(v) if isinstance(v, float) else str(v) for v in row])
    return buf.getvalue()


def _json_text(obj: dict) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _logpair(log_abs: float, sign: int) -> dict:
    return {"log_abs": log_abs, "sign": sign}


def _m_value(args) -> float:
    if args.m is not None and args.sign is not None:
        raise UsageError("--m and --sign are mutually exclusive")
    if args.m is not None:
        return args.m
    if args.sign is not None:
        return math.sqrt(args.eps) * (-1.0 if args.sign == "minus" else 1.0)
    raise UsageError("one of --m or --sign is required")


def _m_sign(args) -> int:
    """Sign of m for commands restricted to the branch m = -+sqrt(eps)."""
    if args.m is not None and args.sign is not None:
        raise UsageError("--m and --sign are mutually exclusive")
    if args.sign is not None:
        return -1 if args.sign == "minus" else 1
    if args.m is not None:
        se = math.sqrt(args.eps)
        if abs(abs(args.m) - se) <= 1e-12 * se:
            return -1 if args.m < 0 else 1
        raise UsageError("this command needs m = -sqrt(eps) or +sqrt(eps); prefer --sign")
    raise UsageError("one of --sign or --m is required")


def _apply_config(args: argparse.Namespace) -> None:
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise UsageError("--config must hold a JSON object of flag values")
    for key, val in data.items():
        attr = key.replace("-", "_")
        if attr == "config" or not hasattr(args, attr):
            raise UsageError(f"unknown config key {key!r} for this command")
        if attr == "sign" and val not in ("minus", "plus"):
            raise UsageError("config sign must be 'minus' or 'plus'")
        setattr(args, attr, val)


def cmd_model(args) -> int:
    p = Params(a=args.a, k=args.k, m=_m_value(args), eps=args.eps)
    lm = landmarks(p)
    eq = equilibrium_stability(p)
    obj: dict = {"a": p.a, "k": p.k, "m": p.m, "eps": p.eps}
    for name in ("p_LL", "p_L", "p_R", "q0_L", "q1_L", "q1_R", "q1_LL", "q0_RR"):
        pt = getattr(lm, name)
        obj[f"{name}_x"], obj[f"{name}_y"] = pt
    for name in ("x_r", "x_s", "x_u", "h_r", "h_s", "h_u", "h_M"):
        obj[name] = getattr(lm, name)
    obj["a_H"] = lm.a_H
    obj["equilibrium_x"], obj["equilibrium_y"] = eq.point
    obj["equilibrium_zone"] = eq.zone
    obj["equilibrium_kind"] = eq.kind
    for label, pt in zip(("tl", "tr", "br", "bl"), lm.rhomboid):
        obj[f"rhomboid_{label}_x"], obj[f"rhomboid_{label}_y"] = pt
    _emit(_json_text(obj), args.out)
    return 0


def cmd_simulate(args) -> int:
    p = Params(a=args.a, k=args.k, m=_m_value(args), eps=args.eps)
    orbit = integrate_orbit((args.x0, args.y0), p, max_events=args.crossings)
    rows = [
        [ev.zone, ev.entry[0], ev.entry[1], ev.exit[0], ev.exit[1], ev.flight_time]
        for ev in orbit.events
    ]
    _emit(_csv_text(["zone", "entry_x", "entry_y", "exit_x", "exit_y", "flight_time"], rows), args.out)
    return 0


def cmd_connect(args) -> int:
    s = _m_sign(args)
    conn = maximal_canard(args.k, args.eps, s)
    a_ser = a_tilde_series(args.k, args.eps, s)
    t_ser = tau_C_series(args.k, args.eps, s)
    obj = {
        "k": args.k,
        "eps": args.eps,
        "m_sign": s,
        "a_tilde": conn.a_tilde,
        "tau_C": conn.tau_C,
        "residual_F": conn.residual[0],
        "residual_G": conn.residual[1],
        "valid": conn.valid,
        "a_tilde_series": a_ser,
        "a_remainder_over_eps2": abs(conn.a_tilde - a_ser) / args.eps**2,
        "tau_C_series": t_ser,
        "tau_remainder_over_eps": abs(conn.tau_C - t_ser) / args.eps,
    }
    _emit(_json_text(obj), args.out)
    return 0


_BRANCH_COLS = ["x0", "h", "a", "log_multiplier", "stability", "kind", "window_flag"]


def _branch_rows(br) -> list[list]:
    return [
        [q.x0, q.h, q.a, q.log_multiplier, q.stability, q.kind, "true" if q.window_flag else "false"]
        for q in br.points
    ]


def cmd_branch(args) -> int:
    s = _m_sign(args)
    grid = default_width_grid(args.k, args.eps, s, n=args.n)
    br = trace_branch(args.k, args.eps, s, grid=grid)
    folds = detect_folds(br)
    if args.out:
        _atomic_write(args.out, _csv_text(_BRANCH_COLS, _branch_rows(br)))
    if args.folds:
        rows = [[f.x_star, f.a_star, f.side, f.multiplier_residual] for f in folds]
        _atomic_write(args.folds, _csv_text(["x_star", "a_star", "side", "residual"], rows))
    summary = {
        "k": args.k,
        "eps": args.eps,
        "m_sign": s,
        "a_tilde": br.a_tilde,
        "n_points": len(br.points),
        "n_failures": len(br.failures),
        "n_folds": len(folds),
    }
    for i, f in enumerate(folds, 1):
        summary[f"fold{i}_x_star"] = f.x_star
        summary[f"fold{i}_a_star"] = f.a_star
        summary[f"fold{i}_side"] = f.side
    sys.stdout.write(_json_text(summary))
    return 0


def cmd_rzero(args) -> int:
    s = _m_sign(args)
    lm = landmarks(params_on_branch(args.k, args.eps, s))
    lo, hi = (lm.h_s, lm.h_M) if args.family == "3z" else (lm.h_r, lm.h_u)
    root = hstar_root(args.family, args.k, args.eps, s)
    series = hstar_series(args.family, args.k, args.eps, s)
    rfun = R3z if args.family == "3z" else R4z
    inset = 0.01 * (hi - lo)
    r_lo = rfun(lo + inset, args.k, args.eps, s)
    r_hi = rfun(hi - inset, args.k, args.eps, s)
    obj = {
        "family": args.family,
        "k": args.k,
        "eps": args.eps,
        "m_sign": s,
        "root": root,
        "series": series,
        "window_lo": lo,
        "window_hi": hi,
        "r_near_lo": _logpair(r_lo.log_abs, r_lo.sign),
        "r_near_hi": _logpair(r_hi.log_abs, r_hi.sign),
    }
    _emit(_json_text(obj), args.out)
    return 0


def cmd_snk(args) -> int:
    s = _m_sign(args)
    k_star = saddle_node_k_for_width(args.x0, args.eps, s)
    _emit(_json_text({"x0": args.x0, "eps": args.eps, "m_sign": s, "k_star": k_star}), args.out)
    return 0


def cmd_hopf(args) -> int:
    s = _m_sign(args)
    hc = hopf_check(args.k, args.eps, s)
    obj = {
        "k": args.k,
        "eps": args.eps,
        "m_sign": s,
        "a_H": hc.a_H,
        "slope": hc.slope,
        "r_squared": hc.r_squared,
        "n_samples": len(hc.samples),
    }
    sys.stdout.write(_json_text(obj))
    if args.out:
        _atomic_write(args.out, _csv_text(["a", "amplitude"], [list(s_) for s_ in hc.samples]))
    return 0


def _root_curve(families: list[str], eps: float, s: int, k_lo: float, k_hi: float, n: int) -> str:
    header = ["k"]
    for fam in families:
        header += [f"root_{fam}", f"series_{fam}"]
    rows = []
    for i in range(n):
        k = k_lo + (k_hi - k_lo) * i / (n - 1)
        row: list = [k]
        for fam in families:
            try:
                root = hstar_root(fam, k, eps, s)
                series = hstar_series(fam, k, eps, s)
            except (NumericalError, ValueError):
                root, series = None, None
            row += ["" if root is None else root, "" if series is None else series]
        rows.append(row)
    return _csv_text(header, rows)


def cmd_figures(args) -> int:
    s = -1 if args.sign in (None, "minus") else 1
    if args.id == "fig6a":
        p = Params(**_FIG6A)
        y_land = landmarks(p).q1_R[1]
        found = fixed_points(p, y_land - 0.2, y_land + 0.2, section="right")
        rows = [[c.y_fix, c.x0, c.h, c.log_multiplier, c.stability] for c in found]
        text = _csv_text(["y_fix", "x0", "h", "log_multiplier", "stability"], rows)
    elif args.id == "fig3":
        eps = args.eps if args.eps is not None else 0.05
        k = args.k if args.k is not None else 2.5
        br = trace_branch(k, eps, s)
        text = _csv_text(_BRANCH_COLS, _branch_rows(br))
    elif args.id in ("fig4", "fig5"):
        eps = args.eps if args.eps is not None else 0.01
        fam = "3z" if args.id == "fig4" else "4z"
        text = _root_curve([fam], eps, s, 0.3, 3.0, 41)
    elif args.id == "fig7":
        eps = args.eps if args.eps is not None else 1e-5
        text = _root_curve(["3z", "4z"], eps, s, 0.3, 3.0, 41)
    else:  # pragma: no cover - argparse choices guard this
        raise UsageError(f"unknown figure id {args.id!r}")
    _emit(text, args.out)
    return 0


def cmd_verify(args) -> int:
    results = run_all()
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def _add_params(sp, with_a: bool = True) -> None:
    if with_a:
        sp.add_argument("--a", type=float, required=True, help="parameter a")
    sp.add_argument("--k", type=float, required=True, help="left-zone slope k > 0")
    sp.add_argument("--eps", type=float, required=True, help="time-scale parameter, 0 < eps <= 0.25")
    sp.add_argument("--m", type=float, default=None, help="central slope m, |m| < 2 sqrt(eps)")
    sp.add_argument("--sign", choices=("minus", "plus"), default=None,
                    help="shorthand for m = -sqrt(eps) / +sqrt(eps)")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pwlcanard",
        description="Canard cycles of a 4-zone piecewise-linear slow-fast oscillator.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("model", help="landmark points, heights and equilibrium as JSON")
    _add_params(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_model)

    sp = sub.add_parser("simulate", help="event-by-event orbit CSV")
    _add_params(sp)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--y0", type=float, required=True)
    sp.add_argument("--crossings", type=int, default=20, help="number of zone events to emit")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("connect", help="maximal-canard connection and series comparison")
    _add_params(sp, with_a=False)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_connect)

    sp = sub.add_parser("branch", help="trace the explosion branch, detect folds")
    _add_params(sp, with_a=False)
    sp.add_argument("--n", type=int, default=200, help="width grid size")
    sp.add_argument("--out", default=None, help="branch CSV path")
    sp.add_argument("--folds", default=None, help="fold CSV path")
    sp.set_defaults(func=cmd_branch)

    sp = sub.add_parser("rzero", help="saddle-node height: R-function root vs series")
    _add_params(sp, with_a=False)
    sp.add_argument("--family", choices=("3z", "4z"), required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_rzero)

    sp = sub.add_parser("snk", help="slope k at which the cycle of a given width is a saddle-node")
    sp.add_argument("--x0", type=float, required=True, help="cycle width (turn abscissa)")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--m", type=float, default=None)
    sp.add_argument("--sign", choices=("minus", "plus"), default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_snk)

    sp = sub.add_parser("hopf", help="corner bifurcation: amplitude growth fit")
    _add_params(sp, with_a=False)
    sp.add_argument("--out", default=None, help="samples CSV path")
    sp.set_defaults(func=cmd_hopf)

    sp = sub.add_parser("figures", help="datasets behind the survey figures")
    sp.add_argument("--id", choices=("fig3", "fig4", "fig5", "fig6a", "fig7"), required=True)
    sp.add_argument("--eps", type=float, default=None, help="override the preset eps")
    sp.add_argument("--k", type=float, default=None, help="override the preset k (fig3)")
    sp.add_argument("--sign", choices=("minus", "plus"), default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_figures)

    sp = sub.add_parser("verify", help="run the acceptance suite")
    sp.set_defaults(func=cmd_verify)

    for name, spx in sub.choices.items():
        if name != "verify":
            spx.add_argument("--config", default=None, help="JSON file overriding flags")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as se:
        return int(se.code or 0)
    try:
        _apply_config(args)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(diag), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
