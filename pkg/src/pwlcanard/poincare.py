"""Poincare half maps, the full return map, and cycle location.

The working section is the inward half-line

    Sigma  = { x = +sqrt(eps), y < p_R_y, x' < 0 }     (section="right")
    SigmaL = { x = -sqrt(eps), y < p_L_y, x' < 0 }     (section="left"),

i.e. points about to enter the central / left band moving left.  The right
section sees every canard and relaxation cycle; the left one exists for the
small cycles born at the subcritical corner, which never reach x=+sqrt(eps).

A full return decomposes into half maps named by zone and direction:
Cd and Cu cross the central band leftward/rightward, L is the in-and-out
excursion in the left band, Ld/Lu are the downward/upward transits of the
left band, LL the deep excursion past x=-1, and R the excursion on the
right.  Times of unnamed legs (a band entered and left through the same
boundary) still count toward the total time and the multiplier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CaptureError, ConvergenceError
from .linflow import Orbit, OrbitEvent, advance, crossing_time, field, flow, integrate_orbit, x_turning_time
from .logreal import safe_exp
from .model import Landmarks, Params, landmarks, nullcline_f, zone_data, zones_at

__all__ = [
    "CycleRecord",
    "HALF_MAP_KINDS",
    "HalfMapResult",
    "ReturnResult",
    "fd_multiplier",
    "fixed_points",
    "fixed_point_tol",
    "half_map",
    "multiplier",
    "phi",
    "phi_inverse",
    "return_map",
    "section_line",
]

HALF_MAP_KINDS = ("Cd", "L", "Cu", "R", "Ld", "LL", "Lu")

#: Fixed points are accepted when |Pi(y) - y| <= FIXED_POINT_RTOL * (1 + |y|).
FIXED_POINT_RTOL = 1e-11

#: |multiplier - 1| below this classifies a cycle as nonhyperbolic.
NONHYP_BAND = 1e-6


def fixed_point_tol(y: float) -> float:
    return FIXED_POINT_RTOL * (1.0 + abs(y))


def section_line(section: str, p: Params) -> tuple[float, float]:
    """(abscissa, top ordinate) of the chosen section half-line."""
    lm = landmarks(p)
    if section == "right":
        return p.sqrt_eps, lm.p_R[1]
    if section == "left":
        return -p.sqrt_eps, lm.p_L[1]
    raise ValueError(f"section must be 'right' or 'left', got {section!r}")


@dataclass(frozen=True)
class HalfMapResult:
    y_out: float
    tau: float


@dataclass(frozen=True)
class ReturnResult:
    """One full turn of the return map.

    ``times`` holds (tau_Cd, tau_L, tau_Cu, tau_R, tau_Ld, tau_LL, tau_Lu);
    legs that the orbit skipped are 0.  ``multiplier_div`` is the cycle
    multiplier exp(sum trace_i * tau_i) predicted by the divergence; its
    logarithm is kept alongside because the float value may over/underflow
    on relaxation loops.
    """

    y_out: float
    times: tuple[float, float, float, float, float, float, float]
    visited_LL: bool
    multiplier_div: float
    log_multiplier: float
    orbit: Orbit


@dataclass(frozen=True)
class CycleRecord:
    """A located periodic orbit, keyed by its section ordinate y_fix."""

    y_fix: float
    x0: float
    h: float
    multiplier: float
    log_multiplier: float
    stability: str
    kind: str
    section: str


def _entry_point(kind: str, y: float, p: Params) -> tuple[tuple[float, float], str, float, int]:
    """Start point, zone, expected exit line, and required sign of x'."""
    r = p.sqrt_eps
    table = {
        "Cd": ((r, y), "C", -r, -1),
        "Cu": ((-r, y), "C", r, +1),
        "L": ((-r, y), "L", -r, -1),
        "Ld": ((-r, y), "L", -1.0, -1),
        "Lu": ((-1.0, y), "L", -r, +1),
        "LL": ((-1.0, y), "LL", -1.0, -1),
        "R": ((r, y), "R", r, +1),
    }
    if kind not in table:
        raise ValueError(f"unknown half map {kind!r}; expected one of {HALF_MAP_KINDS}")
    return table[kind]


def half_map(kind: str, y: float, p: Params) -> HalfMapResult:
    """Apply one named half map to the ordinate y on its entry line.

    Raises ValueError when the starting point moves against the map's
    direction, and ConvergenceError when the orbit exits through a boundary
    other than the one the map name promises.
    """
    q, zone, exit_line, want_sign = _entry_point(kind, y, p)
    vx = field(q, p)[0]
    if vx * want_sign <= 0:
        raise ValueError(f"point {q} does not enter the {kind} half map (x' = {vx:g})")
    ev = advance(q, p)
    if ev.zone != zone or ev.exit[0] != exit_line:
        raise ConvergenceError(
            f"half map {kind}: orbit left zone {ev.zone} through x = {ev.exit[0]:g}, "
            f"expected x = {exit_line:g}"
        )
    return HalfMapResult(ev.exit[1], ev.flight_time)


def _classify_leg(ev: OrbitEvent, p: Params) -> str | None:
    r = p.sqrt_eps
    xi, xo = ev.entry[0], ev.exit[0]
    if ev.zone == "C":
        if xi == r and xo == -r:
            return "Cd"
        if xi == -r and xo == r:
            return "Cu"
        return None
    if ev.zone == "L":
        if xi == -r and xo == -r:
            return "L"
        if xi == -r and xo == -1.0:
            return "Ld"
        if xi == -1.0 and xo == -r:
            return "Lu"
        return None
    if ev.zone == "LL":
        return "LL"
    return "R"


def return_map(y0: float, p: Params, section: str = "right") -> ReturnResult:
    """First return of (section_x, y0) to the section, with leg bookkeeping."""
    sx, y_top = section_line(section, p)
    if y0 >= y_top:
        raise ValueError(f"y0 = {y0:g} is not on the section (needs y < {y_top:g})")

    def is_return(ev: OrbitEvent) -> bool:
        if ev.exit[0] != sx:
            return False
        return field(ev.exit, p)[0] < 0

    orbit = integrate_orbit((sx, y0), p, stop=is_return, max_events=64)
    if orbit.truncated:
        raise ConvergenceError(f"no return to the {section} section within 64 events")
    times = dict.fromkeys(HALF_MAP_KINDS, 0.0)
    log_mult = 0.0
    visited_ll = False
    for ev in orbit.events:
        log_mult += zone_data(ev.zone, p).trace * ev.flight_time
        visited_ll = visited_ll or ev.zone == "LL"
        leg = _classify_leg(ev, p)
        if leg is not None:
            times[leg] += ev.flight_time
    return ReturnResult(
        y_out=orbit.events[-1].exit[1],
        times=tuple(times[k] for k in HALF_MAP_KINDS),
        visited_LL=visited_ll,
        multiplier_div=safe_exp(log_mult),
        log_multiplier=log_mult,
        orbit=orbit,
    )


def _min_x_turn(orbit: Orbit, p: Params) -> float:
    """Leftmost horizontal turning point over all legs of a closed orbit."""
    best = math.inf
    for ev in orbit.events:
        t = x_turning_time(ev.zone, ev.entry, p)
        if t is not None and t < ev.flight_time:
            if zone_data(ev.zone, p).trace > 0.0:
                # Expanding zone: entry-based errors grow like exp(trace*t),
                # so evaluate the turn backward from the exit, which contracts
                # onto it.  The O(dt) slip in the turning time only moves the
                # evaluated point quadratically (x' = 0 there).
                x = flow(ev.zone, ev.exit, t - ev.flight_time, p)[0]
            else:
                x = flow(ev.zone, ev.entry, t, p)[0]
            best = min(best, x)
    if not math.isfinite(best):
        raise ConvergenceError("closed orbit has no horizontal turning point")
    return best


def _chart_height(orbit: Orbit, visited_ll: bool, p: Params) -> float:
    """Section ordinate of the cycle in its width chart (nan if it has none)."""
    r = p.sqrt_eps
    for ev in orbit.events:
        if visited_ll:
            if ev.zone == "LL":
                return ev.entry[1]
        elif ev.zone == "L" and ev.entry[0] == -r and ev.exit[0] == -r:
            return ev.exit[1]
    return math.nan


def _window_kind(x0: float, lm: Landmarks, visited_ll: bool, sqrt_eps: float) -> str:
    if lm.x_u < x0 < -1.0 or lm.x_s < x0 < -sqrt_eps:
        return "transitory-window"
    return "with-head" if visited_ll else "headless"


def _record(y_fix: float, p: Params, section: str, lm: Landmarks) -> CycleRecord:
    rr = return_map(y_fix, p, section)
    x0 = _min_x_turn(rr.orbit, p)
    h = _chart_height(rr.orbit, rr.visited_LL, p)
    if abs(rr.log_multiplier) <= NONHYP_BAND:
        stab = "nonhyperbolic"
    else:
        stab = "stable" if rr.log_multiplier < 0 else "unstable"
    kind = _window_kind(x0, lm, rr.visited_LL, p.sqrt_eps)
    return CycleRecord(
        y_fix=y_fix,
        x0=x0,
        h=h,
        multiplier=safe_exp(rr.log_multiplier),
        log_multiplier=rr.log_multiplier,
        stability=stab,
        kind=kind,
        section=section,
    )


def _scan_grid(y_lo: float, y_hi: float, cluster: float, n_uniform: int) -> list[float]:
    """Uniform coverage plus geometric refinement toward the cluster point."""
    ys = {y_lo + (y_hi - y_lo) * i / (n_uniform - 1) for i in range(n_uniform)}
    span = y_hi - y_lo
    u = 1e-13 * (1.0 + abs(cluster))
    while u < span:
        for s in (cluster - u, cluster + u):
            if y_lo <= s <= y_hi:
                ys.add(s)
        # ratio tight enough to land a sample between saddle-node partners,
        # whose ordinate gaps above the landmark shrink toward ratio one
        u *= 1.3
    return sorted(ys)


def fixed_points(
    p: Params,
    y_lo: float,
    y_hi: float,
    section: str = "right",
    n_grid: int = 64,
) -> list[CycleRecord]:
    """Locate return-map fixed points with section ordinate in [y_lo, y_hi].

    The grid is uniform plus a geometric cascade toward the slow-manifold
    landmark (q1_R or q0_L), where canard fixed points pile up exponentially
    close together.  Sign changes of Pi(y) - y between valid neighbours are
    refined by secant/bisection; a refined point is kept only if the
    residual actually meets fixed_point_tol (sign flips across template
    discontinuities are discarded).
    """
    sx, y_top = section_line(section, p)
    lm = landmarks(p)
    y_hi = min(y_hi, y_top - 1e-12 * (1.0 + abs(y_top)))
    if y_hi <= y_lo:
        return []
    cluster = lm.q1_R[1] if section == "right" else lm.q0_L[1]

    def disp(y: float) -> float | None:
        try:
            return return_map(y, p, section).y_out - y
        except (ConvergenceError, CaptureError, ValueError):
            return None

    grid = _scan_grid(y_lo, y_hi, cluster, n_grid)
    vals = [(y, disp(y)) for y in grid]
    roots: list[tuple[float, float]] = []  # (ordinate, |residual|)
    prev: tuple[float, float] | None = None
    for y, d in vals:
        if d is None:
            prev = None
            continue
        if abs(d) <= fixed_point_tol(y):
            roots.append((y, abs(d)))
            prev = (y, d)
            continue
        if prev is not None and math.copysign(1.0, d) != math.copysign(1.0, prev[1]):
            y_star = _refine_root(disp, prev[0], prev[1], y, d)
            if y_star is not None:
                d_star = disp(y_star)
                roots.append((y_star, abs(d_star) if d_star is not None else 0.0))
        prev = (y, d)

    # merge near-duplicates, keeping the best-certified member of each clump
    roots.sort()
    out: list[CycleRecord] = []
    clump: list[tuple[float, float]] = []

    def flush() -> None:
        if clump:
            y_best = min(clump, key=lambda t: t[1])[0]
            out.append(_record(y_best, p, section, lm))

    for y, ad in roots:
        if clump and abs(y - clump[-1][0]) > 4 * fixed_point_tol(y):
            flush()
            clump = []
        clump.append((y, ad))
    flush()
    return out


def _refine_root(disp, ya: float, da: float, yb: float, db: float) -> float | None:
    """Secant with bisection safeguard on a bracketed sign change of disp."""
    for _ in range(200):
        if abs(yb - ya) <= 1e-15 * (1.0 + abs(yb)):
            break
        y_mid = yb - db * (yb - ya) / (db - da)
        if not (min(ya, yb) < y_mid < max(ya, yb)):
            y_mid = 0.5 * (ya + yb)
        d_mid = disp(y_mid)
        if d_mid is None:
            d_mid = math.inf  # fall toward bisection on the valid side
            y_mid = 0.5 * (ya + yb)
            d_mid = disp(y_mid)
            if d_mid is None:
                return None
        if abs(d_mid) <= fixed_point_tol(y_mid):
            return y_mid
        if math.copysign(1.0, d_mid) == math.copysign(1.0, da):
            ya, da = y_mid, d_mid
        else:
            yb, db = y_mid, d_mid
    y_fin = 0.5 * (ya + yb)
    d_fin = disp(y_fin)
    if d_fin is not None and abs(d_fin) <= 100 * fixed_point_tol(y_fin):
        return y_fin
    return None  # converged onto a jump, not a root


def multiplier(cycle: CycleRecord, p: Params) -> float:
    """Return-map derivative at a fixed point, from the divergence integral.

    For a continuous PWL field the derivative of the Poincare map along a
    cycle is exactly exp(sum over legs of trace_i * tau_i); the sum is
    accumulated in log space (cycle.log_multiplier carries it too) and
    exponentiated here, saturating to 0 / inf past the float range.
    """
    rr = return_map(cycle.y_fix, p, cycle.section)
    return safe_exp(rr.log_multiplier)


def fd_multiplier(cycle: CycleRecord, p: Params) -> float:
    """Finite-difference cross-check of the multiplier (never the primary).

    Central differences starting at delta = 1e-6 (1+|y|), Richardson
    extrapolated; the step keeps shrinking (x1/4) until two extrapolants
    agree, because near a fold the linear zone of a canard fixed point can
    be orders of magnitude narrower than the default step.
    """
    y0 = cycle.y_fix
    sec = cycle.section

    def pi(y: float) -> float:
        return return_map(y, p, sec).y_out

    prev_fd: float | None = None
    prev_rich: float | None = None
    best = math.nan
    delta = 1e-6 * (1.0 + abs(y0))
    for _ in range(10):
        try:
            fd = (pi(y0 + delta) - pi(y0 - delta)) / (2 * delta)
        except (ConvergenceError, CaptureError, ValueError):
            delta *= 0.25
            continue
        if prev_fd is not None:
            rich = (4 * fd - prev_fd) / 3  # prev used 2*delta -> O(delta^2) cancels
            if prev_rich is not None and abs(rich - prev_rich) <= 1e-6 * (1.0 + abs(rich)):
                return rich
            prev_rich, best = rich, rich
        prev_fd = fd
        if math.isnan(best):
            best = fd
        delta *= 0.25
    return best


def phi(x0: float, p: Params) -> float:
    """Width chart: section height of the orbit turning at (x0, f(x0)).

    For x0 in [-1, -sqrt(eps)) this is the forward L-flow ordinate on
    {x = -sqrt(eps)}; for x0 < -1 the backward LL-flow ordinate on {x = -1}.
    The degenerate width x0 = -sqrt(eps) maps to the tangency ordinate.
    """
    if x0 == -p.sqrt_eps:
        return nullcline_f(x0, p)
    if x0 > -p.sqrt_eps:
        raise ValueError(f"width must satisfy x0 <= -sqrt(eps) = {-p.sqrt_eps:g}, got {x0:g}")
    q = (x0, nullcline_f(x0, p))
    if x0 >= -1.0:
        cr = crossing_time("L", q, -p.sqrt_eps, p)
    else:
        cr = crossing_time("LL", q, -1.0, p, direction=-1)
    if cr.kind == "none":
        raise ConvergenceError(f"width chart orbit from x0 = {x0:g} does not reach its line")
    return cr.point[1]


def phi_inverse(h: float, branch: str, p: Params) -> float:
    """Invert the width chart on one monotone branch ("3z" or "4z")."""
    lm = landmarks(p)
    r = p.sqrt_eps
    if branch == "3z":
        lo, hi = -1.0, -r - 1e-12 * (1.0 + r)
    elif branch == "4z":
        lo, hi = lm.x_r, -1.0 - 1e-12
    else:
        raise ValueError(f"branch must be '3z' or '4z', got {branch!r}")
    flo, fhi = phi(lo, p) - h, phi(hi, p) - h
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise ValueError(f"h = {h:g} is outside the range of the {branch} chart")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * (1.0 + abs(mid)):
            return mid
        fm = phi(mid, p) - h
        if fm == 0.0:
            return mid
        if math.copysign(1.0, fm) == math.copysign(1.0, flo):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi)
