"""Exact zone flows, first-crossing solves, and event-driven orbit integration.

Inside one zone the field is affine with matrix [[t, 1], [-eps, 0]], so the
flow is closed-form (node, focus, or Jordan branch).  Any scalar functional
w . phi(t) - c along an orbit is then a two-term exponential, a polynomial
times an exponential, or a damped rotation -- each with an enumerable set
of critical points.  Boundary crossings are located by splitting time at
those critical points into monotone arcs and bracketing sign changes, which
cannot skip a crossing, then polishing with safeguarded Newton.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CaptureError, ConvergenceError
from .logreal import safe_exp
from .model import Params, ZoneData, nullcline_f, zone_data, zones_at

__all__ = [
    "CrossingResult",
    "Orbit",
    "OrbitEvent",
    "advance",
    "crossing_time",
    "field",
    "flow",
    "integrate_orbit",
    "rk4_oracle",
    "x_turning_time",
    "zone_at",
]

#: Relative tolerance on crossing times: |dt| <= TIME_RTOL * (1 + t).
TIME_RTOL = 1e-14

#: A crossing with |x'| below GRAZE_TOL * (1 + |field|) counts as grazing.
GRAZE_TOL = 1e-10

# Vertical boundary lines of each zone; None marks an unbounded side.
def _zone_lines(zone: str, p: Params) -> tuple[float, ...]:
    r = p.sqrt_eps
    return {
        "LL": (-1.0,),
        "L": (-1.0, -r),
        "C": (-r, r),
        "R": (r,),
    }[zone]


def field(q: tuple[float, float], p: Params) -> tuple[float, float]:
    """The (continuous) vector field at q."""
    x, y = q
    return (y - nullcline_f(x, p), p.eps * (p.a - x))


def _delta(q: tuple[float, float], zd: ZoneData) -> tuple[float, float]:
    return (q[0] - zd.equilibrium[0], q[1] - zd.equilibrium[1])


def flow(zone: str, q: tuple[float, float], t: float, p: Params) -> tuple[float, float]:
    """Evaluate the exact affine flow of ``zone`` at time t (any sign).

    The spectrum dictates the branch: distinct real eigenvalues use the
    eigenbasis expansion with per-term scaled exponentials (the uniform
    cosh/sinh form cancels catastrophically for |lam_q t| large), a double
    eigenvalue uses the Jordan form, and a complex pair the rotation form.
    """
    zd = zone_data(zone, p)
    ex, ey = zd.equilibrium
    dx, dy = _delta(q, zd)
    if zd.is_real:
        ls, lq = zd.lam_s, zd.lam_q
        if ls == lq:  # Jordan block
            e = math.exp(ls * t) if ls * t <= 709 else math.inf
            px = dx + t * (ls * dx + dy)
            py = dy + t * (-zd.det * dx - ls * dy)
            return (ex + e * px if px or e != math.inf else ex,
                    ey + e * py if py or e != math.inf else ey)
        al = (dx + lq * dy / zd.det) / (ls - lq)
        be = (dx + ls * dy / zd.det) / (lq - ls)
        es = 0.0 if al == 0.0 else al * safe_exp(ls * t)
        eq_ = 0.0 if be == 0.0 else be * safe_exp(lq * t)
        return (ex + ls * es + lq * eq_, ey - zd.det * (es + eq_))
    s, w = zd.sigma, zd.omega
    e = safe_exp(s * t)
    c, sn = math.cos(w * t), math.sin(w * t)
    return (
        ex + e * (dx * c + (s * dx + dy) / w * sn),
        ey + e * (dy * c + (-zd.det * dx - s * dy) / w * sn),
    )


# --------------------------------------------------------------------------
# Scalar functionals g(t) = w . phi(t) - c along an oriented flow.


@dataclass
class _Scalar:
    """One of three closed forms, with analytic derivative and extrema."""

    kind: str  # "real" | "jordan" | "rot"
    D: float
    # real: D + C1 e^(l1 t) + C2 e^(l2 t);  jordan: D + e^(l t)(P + Q t)
    # rot:  D + e^(s t)(P cos(w t) + Q sin(w t))
    C1: float = 0.0
    C2: float = 0.0
    l1: float = 0.0
    l2: float = 0.0
    P: float = 0.0
    Q: float = 0.0
    s: float = 0.0
    w: float = 0.0

    def g(self, t: float) -> float:
        if self.kind == "real":
            a = 0.0 if self.C1 == 0.0 else self.C1 * safe_exp(self.l1 * t)
            b = 0.0 if self.C2 == 0.0 else self.C2 * safe_exp(self.l2 * t)
            return self.D + a + b
        if self.kind == "jordan":
            pq = self.P + self.Q * t
            return self.D + (0.0 if pq == 0.0 else pq * safe_exp(self.l1 * t))
        e = safe_exp(self.s * t)
        tr = self.P * math.cos(self.w * t) + self.Q * math.sin(self.w * t)
        return self.D + (0.0 if tr == 0.0 else e * tr)

    def dg(self, t: float) -> float:
        if self.kind == "real":
            a = 0.0 if self.C1 == 0.0 else self.C1 * self.l1 * safe_exp(self.l1 * t)
            b = 0.0 if self.C2 == 0.0 else self.C2 * self.l2 * safe_exp(self.l2 * t)
            return a + b
        if self.kind == "jordan":
            pq = self.l1 * (self.P + self.Q * t) + self.Q
            return (0.0 if pq == 0.0 else pq * safe_exp(self.l1 * t))
        A = self.s * self.P + self.w * self.Q
        B = self.s * self.Q - self.w * self.P
        tr = A * math.cos(self.w * t) + B * math.sin(self.w * t)
        return (0.0 if tr == 0.0 else tr * safe_exp(self.s * t))

    def coeff_scale(self) -> float:
        return abs(self.D) + abs(self.C1) + abs(self.C2) + abs(self.P) + abs(self.Q)

    def sign_at_zero_plus(self) -> int:
        """Sign of g just after t=0, resolving g(0)=0 by derivatives.

        "Zero" is relative to the coefficient scale: g(0) is a sum of the
        raw coefficients, so starting exactly on the line leaves a few ulps
        of cancellation junk that must not be mistaken for a side.
        """
        g0 = self.g(0.0)
        if abs(g0) > 64 * 2.220446049250313e-16 * self.coeff_scale():
            return 1 if g0 > 0 else -1
        d1 = self.dg(0.0)
        if d1 != 0.0:
            return 1 if d1 > 0 else -1
        # second derivative at 0
        if self.kind == "real":
            d2 = self.C1 * self.l1 ** 2 + self.C2 * self.l2 ** 2
        elif self.kind == "jordan":
            d2 = self.l1 * self.l1 * self.P + 2 * self.l1 * self.Q
        else:
            A = self.s * self.P + self.w * self.Q
            B = self.s * self.Q - self.w * self.P
            d2 = self.s * A + self.w * B
        if d2 > 0:
            return 1
        if d2 < 0:
            return -1
        return 0

    def extrema(self, t_max: float, cap: int = 512) -> list[float]:
        """Interior critical points of g in (0, t_max), in increasing order."""
        out: list[float] = []
        if self.kind == "real":
            a, b = self.C1 * self.l1, self.C2 * self.l2
            if a != 0.0 and b != 0.0 and self.l1 != self.l2:
                ratio = -b / a
                if ratio > 0:
                    ts = math.log(ratio) / (self.l1 - self.l2)
                    if 0 < ts < t_max:
                        out.append(ts)
        elif self.kind == "jordan":
            if self.l1 != 0.0 and self.Q != 0.0:
                ts = -(self.l1 * self.P + self.Q) / (self.l1 * self.Q)
                if 0 < ts < t_max:
                    out.append(ts)
        else:
            A = self.s * self.P + self.w * self.Q
            B = self.s * self.Q - self.w * self.P
            if A == 0.0 and B == 0.0:
                return out
            th0 = math.atan2(B, A) + math.pi / 2
            n0 = math.ceil((0 - th0) / math.pi)
            for j in range(cap):
                ts = (th0 + (n0 + j) * math.pi) / self.w
                if ts <= 0:
                    continue
                if ts >= t_max:
                    break
                out.append(ts)
        return out

    def tail_sign(self) -> int:
        """Sign of g(t) for t large (0 when g tends to 0 monotonically)."""
        if self.kind == "real":
            terms = [(l, c) for l, c in ((self.l1, self.C1), (self.l2, self.C2)) if c != 0.0]
            if not terms:
                return _sgn(self.D)
            l_dom, c_dom = max(terms)
            if l_dom > 0 or (self.D == 0.0 and all(l < 0 for l, _ in terms)):
                return _sgn(c_dom)
            if l_dom == 0.0:
                return _sgn(self.D + c_dom)
            return _sgn(self.D)
        if self.kind == "jordan":
            lead = self.Q if self.Q != 0.0 else self.P
            if lead == 0.0:
                return _sgn(self.D)
            if self.l1 > 0 or (self.l1 == 0.0 and self.Q != 0.0):
                return _sgn(lead)
            if self.l1 == 0.0:
                return _sgn(self.D + self.P)
            return _sgn(self.D) if self.D != 0.0 else _sgn(lead)
        # rotation: no single-sign tail unless the oscillation dies out
        if self.P == 0.0 and self.Q == 0.0:
            return _sgn(self.D)
        if self.s < 0 and self.D != 0.0:
            return _sgn(self.D)
        return 0  # oscillatory tail; handled by the extrema scan


def _sgn(x: float) -> int:
    return (x > 0) - (x < 0)


def _functional(
    zd: ZoneData,
    q: tuple[float, float],
    w: tuple[float, float],
    c: float,
    direction: int = 1,
) -> _Scalar:
    """Coefficients of g(t) = w . phi(direction * t) - c for t >= 0.

    Backward time is the same closed form with negated exponents; the odd
    part of the Jordan/rotation branch (the Q coefficient) flips with it.
    """
    dx, dy = _delta(q, zd)
    ex, ey = zd.equilibrium
    D = w[0] * ex + w[1] * ey - c
    if zd.is_real:
        ls, lq = zd.lam_s, zd.lam_q
        if ls == lq:
            P = w[0] * dx + w[1] * dy
            Q = w[0] * (ls * dx + dy) + w[1] * (-zd.det * dx - ls * dy)
            return _Scalar("jordan", D, P=P, Q=direction * Q, l1=direction * ls)
        al = (dx + lq * dy / zd.det) / (ls - lq)
        be = (dx + ls * dy / zd.det) / (lq - ls)
        C1 = al * (w[0] * ls - w[1] * zd.det)
        C2 = be * (w[0] * lq - w[1] * zd.det)
        return _Scalar("real", D, C1=C1, C2=C2, l1=direction * ls, l2=direction * lq)
    s, om = zd.sigma, zd.omega
    P = w[0] * dx + w[1] * dy
    Q = w[0] * (s * dx + dy) / om + w[1] * (-zd.det * dx - s * dy) / om
    return _Scalar("rot", D, P=P, Q=direction * Q, s=direction * s, w=om)


def _scan_horizon(sc: _Scalar) -> float:
    """A time beyond which the extrema scan may hand over to the tail logic."""
    if sc.kind != "rot":
        return math.inf  # at most one extremum; no horizon needed
    period = 2 * math.pi / sc.w
    amp = math.hypot(sc.P, sc.Q)
    if amp == 0.0:
        return period
    if sc.s > 0:
        # grow until the envelope clears |D|, then two more turns
        t_env = max(0.0, math.log(abs(sc.D) / amp) / sc.s) if sc.D != 0.0 else 0.0
        return t_env + 2 * period
    if sc.s < 0:
        return 10.0 / abs(sc.s) + period
    return 2 * period


def _polish(sc: _Scalar, lo: float, hi: float, s_lo: int) -> float:
    """Newton-bisection on a bracketed sign change of g."""
    t = 0.5 * (lo + hi)
    for _ in range(200):
        if hi - lo <= TIME_RTOL * (1.0 + hi):
            break
        gt = sc.g(t)
        if gt == 0.0:
            return t
        if _sgn(gt) == s_lo:
            lo = t
        else:
            hi = t
        d = sc.dg(t)
        t_new = t - gt / d if d != 0.0 else 0.5 * (lo + hi)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        t = t_new
    return 0.5 * (lo + hi)


def _first_root(sc: _Scalar) -> float | None:
    """Smallest t > 0 with g(t) = 0, ignoring a root at t = 0 itself."""
    s_prev = sc.sign_at_zero_plus()
    if s_prev == 0:
        return None  # g vanishes identically along the orbit
    horizon = _scan_horizon(sc)
    knots = sc.extrema(horizon if math.isfinite(horizon) else math.inf)
    if math.isfinite(horizon):
        knots = knots + [horizon]
    t_prev = 0.0
    for tk in knots:
        gk = sc.g(tk)
        if gk == 0.0:
            return tk
        s_k = _sgn(gk)
        if s_k != s_prev:
            return _polish(sc, t_prev, tk, s_prev)
        t_prev, s_prev = tk, s_k
    tail = sc.tail_sign()
    if tail == 0 or tail == s_prev:
        return None
    # doubling extension: a sign change is guaranteed on some finite interval
    step = max(t_prev, 1.0)
    lo = t_prev
    for _ in range(400):
        hi = lo + step
        gh = sc.g(hi)
        if gh == 0.0:
            return hi
        if _sgn(gh) != s_prev:
            return _polish(sc, lo, hi, s_prev)
        lo = hi
        step *= 2.0
    raise ConvergenceError("tail bracket for a boundary crossing did not close")


# --------------------------------------------------------------------------
# Crossings, events, orbits.


@dataclass(frozen=True)
class CrossingResult:
    """First crossing of a vertical line; kind is transversal/grazing/none."""

    time: float
    point: tuple[float, float] | None
    kind: str


@dataclass(frozen=True)
class OrbitEvent:
    zone: str
    entry: tuple[float, float]
    exit: tuple[float, float]
    flight_time: float


@dataclass(frozen=True)
class Orbit:
    events: tuple[OrbitEvent, ...]
    total_time: float
    truncated: bool


def crossing_time(
    zone: str,
    q: tuple[float, float],
    c: float,
    p: Params,
    direction: int = 1,
) -> CrossingResult:
    """First time the zone flow from q meets the line {x = c}.

    ``direction=-1`` searches in backward time; the returned time is the
    positive elapsed duration either way.  A root at t=0 (starting on the
    line) is skipped by resolving the outgoing sign analytically.
    """
    zd = zone_data(zone, p)
    sc = _functional(zd, q, (1.0, 0.0), c, direction)
    t = _first_root(sc)
    if t is None:
        return CrossingResult(math.inf, None, "none")
    pt = flow(zone, q, direction * t, p)
    pt = (c, pt[1])  # snap the abscissa onto the line exactly
    vx, vy = field(pt, p)
    kind = "grazing" if abs(vx) <= GRAZE_TOL * (1.0 + math.hypot(vx, vy)) else "transversal"
    return CrossingResult(t, pt, kind)


def x_turning_time(
    zone: str,
    q: tuple[float, float],
    p: Params,
    direction: int = 1,
) -> float | None:
    """First positive time at which x' vanishes along the zone flow from q.

    x' = trace * x + y + b_x is itself a linear functional of the state, so
    the same monotone-arc solver applies.  Returns None when the orbit
    keeps a one-signed horizontal velocity.
    """
    zd = zone_data(zone, p)
    sc = _functional(zd, q, (zd.trace, 1.0), -zd.b[0], direction)
    return _first_root(sc)


def zone_at(q: tuple[float, float], p: Params, direction: int = 1) -> str:
    """Zone the orbit through q is about to traverse.

    On a switching line the continuous field decides: the orbit belongs to
    the side it is moving into; at a tangency (x' = 0) the curvature
    x'' = eps (a - x) breaks the tie.
    """
    zs = zones_at(q[0], p)
    if len(zs) == 1:
        return zs[0]
    vx = direction * field(q, p)[0]
    if vx == 0.0:
        vx = direction * p.eps * (p.a - q[0])
    return zs[1] if vx > 0 else zs[0]


def advance(q: tuple[float, float], p: Params, direction: int = 1) -> OrbitEvent:
    """Flow from q to the first exit from its current zone."""
    if field(q, p) == (0.0, 0.0):
        raise CaptureError(f"initial point {q} is an equilibrium")
    zone = zone_at(q, p, direction)
    best: CrossingResult | None = None
    for line in _zone_lines(zone, p):
        cr = crossing_time(zone, q, line, p, direction)
        if cr.kind != "none" and (best is None or cr.time < best.time):
            best = cr
    if best is None:
        raise CaptureError(f"orbit from {q} stays in zone {zone} (attracted to its equilibrium)")
    return OrbitEvent(zone, q, best.point, best.time)


def integrate_orbit(
    q: tuple[float, float],
    p: Params,
    stop: Callable[[OrbitEvent], bool] | None = None,
    direction: int = 1,
    max_events: int = 1000,
    max_time: float = math.inf,
) -> Orbit:
    """Chain zone-exit events from q until ``stop`` fires or limits are hit.

    ``stop`` is evaluated on each completed event; returning True ends the
    orbit cleanly (truncated=False).  Hitting max_events/max_time instead
    marks the orbit truncated.
    """
    events: list[OrbitEvent] = []
    total = 0.0
    cur = q
    for _ in range(max_events):
        ev = advance(cur, p, direction)
        events.append(ev)
        total += ev.flight_time
        if stop is not None and stop(ev):
            return Orbit(tuple(events), total, False)
        if total >= max_time:
            break
        cur = ev.exit
    return Orbit(tuple(events), total, True)


def _rk4(A, b, q, t, n):
    """Fixed-step RK4 for q' = A q + b on (m, 2)-shaped states."""
    qs = np.atleast_2d(np.asarray(q, dtype=float))
    h = t / n
    for _ in range(n):
        k1 = qs @ A.T + b
        k2 = (qs + 0.5 * h * k1) @ A.T + b
        k3 = (qs + 0.5 * h * k2) @ A.T + b
        k4 = (qs + h * k3) @ A.T + b
        qs = qs + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return qs


def rk4_oracle(zone, q, t, n, p: Params):
    """Classic fixed-step RK4 on one zone's affine field (reference only).

    ``q`` may be a single point (length-2 sequence) or an (m, 2) array of
    points integrated in lockstep.  Slow by design; used to cross-check the
    closed-form flow.
    """
    zd = zone_data(zone, p)
    A = np.array([[zd.trace, 1.0], [-zd.det, 0.0]])
    b = np.array(zd.b)
    qs = _rk4(A, b, q, t, n)
    if np.ndim(q) == 1 or isinstance(q, tuple):
        return (float(qs[0, 0]), float(qs[0, 1]))
    return qs
