"""Maximal-canard connection, explosion asymptotics, and stability functions.

The connection solve finds (a, tau) such that the central-band flow carries
the end of the attracting slow manifold, q1_R, onto the start of the
repelling one, q0_L.  Everything downstream is parameterized by that
branch: the canard cycle of prescribed width x0 exists at a = a_hat(x0)
exponentially close to a_tilde, and the saddle-node structure along the
family is governed by the sign of the divergence functions R_3z / R_4z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import CaptureError, ConvergenceError
from .linflow import Orbit, OrbitEvent, field, flow, integrate_orbit
from .logreal import LogReal, safe_exp
from .model import Landmarks, Params, landmarks, nullcline_f, zone_data
from .poincare import CycleRecord

__all__ = [
    "Connection",
    "FlightTimes",
    "HalfMapAsymptotic",
    "RFunctionValue",
    "WidthSolve",
    "R3z",
    "R4z",
    "a_tilde_series",
    "connection_residual",
    "cycle_for_width",
    "flight_times",
    "halfmap_asymptotic",
    "hstar_root",
    "hstar_series",
    "maximal_canard",
    "params_on_branch",
    "saddle_node_k_for_width",
    "tau_C_series",
]

# Constants of the singular (eps -> 0) connection problem.
_E3 = math.exp(math.pi / math.sqrt(3.0))
C0 = (_E3 - 1.0) / (_E3 + 1.0)
C1 = _E3 / (1.0 + _E3) ** 2
TAU_BAR_0 = 2.0 * math.pi / math.sqrt(3.0)

#: Residual target for the connection Newton iteration (rescaled variables).
CONNECTION_TOL = 1e-13


def _check_sign(m_sign: int) -> int:
    if m_sign not in (-1, 1):
        raise ValueError(f"m_sign must be -1 (supercritical) or +1 (subcritical), got {m_sign}")
    return m_sign


def a_tilde_series(k: float, eps: float, m_sign: int) -> float:
    """Two-term expansion of the connection value of a."""
    _check_sign(m_sign)
    se = math.sqrt(eps)
    return -m_sign * C0 * se - C1 * ((1.0 - k * k) / (k * k)) * eps * se


def tau_C_series(k: float, eps: float, m_sign: int) -> float:
    """Three-term expansion of the connection time of flight."""
    _check_sign(m_sign)
    se = math.sqrt(eps)
    return TAU_BAR_0 / se - (1.0 + k) / k + m_sign * ((1.0 - k * k) / (2.0 * k * k)) * se


@dataclass(frozen=True)
class Connection:
    """Solved connection: a_tilde, tau_C, the raw (F, G) residual, validity."""

    a_tilde: float
    tau_C: float
    residual: tuple[float, float]
    valid: bool
    k: float
    eps: float
    m_sign: int


def connection_residual(tau: float, a: float, k: float, eps: float, m_sign: int) -> tuple[float, float]:
    """Unscaled closure functions (F, G) of the connection problem.

    F is the x-distance of the flown q1_R from the line {x = -sqrt(eps)}
    after time tau in the central band; G the y-distance from q0_L.
    """
    m = m_sign * math.sqrt(eps)
    p = Params(a=a, k=k, m=m, eps=eps)
    lm = landmarks(p)
    xt, yt = flow("C", lm.q1_R, tau, p)
    return (xt + p.sqrt_eps, yt - lm.q0_L[1])


def _connection_jacobian(tau: float, a: float, k: float, eps: float, m_sign: int):
    """Analytic Jacobian of (F, G) w.r.t. (tau, a)."""
    m = m_sign * math.sqrt(eps)
    p = Params(a=a, k=k, m=m, eps=eps)
    lm = landmarks(p)
    zc = zone_data("C", p)
    s, w = zc.sigma, zc.omega
    lam_rs = zone_data("R", p).lam_s
    lam_ls = zone_data("L", p).lam_s

    xt, yt = flow("C", lm.q1_R, tau, p)
    dF_dtau = zc.trace * xt + yt + zc.b[0]
    dG_dtau = eps * (a - xt)

    # phi(tau) = e_C + M(tau) (q1_R - e_C) with d(q1_R - e_C)/da = (-1, -(m+lam_R_s))
    e = math.exp(s * tau)
    c, sn = math.cos(w * tau), math.sin(w * tau)
    m11 = e * (c + s * sn / w)
    m12 = e * sn / w
    m21 = -e * eps * sn / w
    m22 = e * (c - s * sn / w)
    dvx, dvy = -1.0, -(m + lam_rs)
    dF_da = m11 * dvx + m12 * dvy + 1.0
    dG_da = m21 * dvx + m22 * dvy + (m + lam_ls)
    return dF_dtau, dF_da, dG_dtau, dG_da


@lru_cache(maxsize=512)
def maximal_canard(k: float, eps: float, m_sign: int) -> Connection:
    """Solve the slow-manifold connection by damped Newton in rescaled form.

    Variables are tau_bar = tau sqrt(eps), a_bar = a / sqrt(eps), where the
    problem has an O(1) nondegenerate limit (singular Jacobian determinant
    -6 e^(2 pi / sqrt 3)); the expansion seeds land within the Newton basin
    for every eps in the admissible range.
    """
    _check_sign(m_sign)
    se = math.sqrt(eps)
    tau = tau_C_series(k, eps, m_sign)
    a = a_tilde_series(k, eps, m_sign)
    if tau <= 0:
        tau = TAU_BAR_0 / se

    def rescaled(tau_: float, a_: float) -> tuple[float, float]:
        f, g = connection_residual(tau_, a_, k, eps, m_sign)
        return f / se, g / eps

    fb, gb = rescaled(tau, a)
    res = max(abs(fb), abs(gb))
    for _ in range(50):
        if res <= CONNECTION_TOL:
            break
        dF_dt, dF_da, dG_dt, dG_da = _connection_jacobian(tau, a, k, eps, m_sign)
        # rescale rows/columns: F->F/se, G->G/eps, tau->tau_bar/se, a->a_bar*se
        j11 = dF_dt / eps
        j12 = dF_da
        j21 = dG_dt / (eps * se)
        j22 = dG_da / se
        det = j11 * j22 - j12 * j21
        if det == 0.0:
            raise ConvergenceError("singular Jacobian in the connection solve")
        dtb = -(fb * j22 - gb * j12) / det
        dab = -(j11 * gb - j21 * fb) / det
        # damped update in the rescaled variables
        tb, ab = tau * se, a / se
        step = 1.0
        for _ in range(9):
            tau_n = (tb + step * dtb) / se
            a_n = (ab + step * dab) * se
            if tau_n > 0:
                fb_n, gb_n = rescaled(tau_n, a_n)
                res_n = max(abs(fb_n), abs(gb_n))
                if res_n < res or step < 1e-2:
                    tau, a, fb, gb, res = tau_n, a_n, fb_n, gb_n, res_n
                    break
            step *= 0.5
        else:
            raise ConvergenceError("connection Newton step stalled")
    if res > 1e-12:
        raise ConvergenceError(f"connection residual {res:.3e} did not reach 1e-12")

    f, g = connection_residual(tau, a, k, eps, m_sign)
    m = m_sign * se
    p = Params(a=a, k=k, m=m, eps=eps)
    lm = landmarks(p)
    valid = True
    for i in range(1, 1001):
        x = flow("C", lm.q1_R, tau * i / 1001.0, p)[0]
        if not (-se < x < se):
            valid = False
            break
    return Connection(a_tilde=a, tau_C=tau, residual=(f, g), valid=valid,
                      k=k, eps=eps, m_sign=m_sign)


def params_on_branch(k: float, eps: float, m_sign: int) -> Params:
    """Parameters with a set to the connection value a_tilde."""
    conn = maximal_canard(k, eps, m_sign)
    return Params(a=conn.a_tilde, k=k, m=m_sign * math.sqrt(eps), eps=eps)


# --------------------------------------------------------------------------
# Asymptotic flight times and the divergence functions.


@dataclass(frozen=True)
class FlightTimes:
    """Leading-order zone flight times for a cycle of height h.

    Fields are None when h lies outside the log-domain of that leg's
    formula (the corresponding excursion does not happen at this height).
    """

    tau_R: float | None
    tau_L: float | None
    tau_Ld: float | None
    tau_LL: float | None
    tau_RR: float | None


def _log1p_or_none(u: float) -> float | None:
    return math.log1p(u) if u > -1.0 else None


def flight_times(h: float, p: Params) -> FlightTimes:
    lm = landmarks(p)
    r, a, k, m = p.sqrt_eps, p.a, p.k, p.m
    zl, zll, zr = zone_data("L", p), zone_data("LL", p), zone_data("R", p)

    u_r = ((m + zr.lam_s) * (r - a) - h) / ((zr.lam_q - zr.lam_s) * (r - a))
    u_l = (h + (m + zl.lam_s) * (r + a)) / ((zl.lam_q - zl.lam_s) * (r + a))
    u_ld = (h + m * (r + a) + zl.lam_s * (2 * r + a - 1)) / ((zl.lam_q - zl.lam_s) * (r + a))
    u_ll = (h + m * (r + a) + k * (r - 1) + zll.lam_s * (1 + a)) / ((zll.lam_q - zll.lam_s) * (1 + a))
    h0 = lm.q1_LL[1]
    u_rr = ((m + zr.lam_s) * (r - a) - h0) / ((zr.lam_q - zr.lam_s) * (r - a))

    lt = _log1p_or_none
    tau_r = lt(u_r)
    tau_l = lt(u_l)
    tau_ld = lt(u_ld)
    tau_ll = lt(u_ll)
    tau_rr = lt(u_rr)
    return FlightTimes(
        tau_R=None if tau_r is None else -tau_r / zr.lam_s,
        tau_L=None if tau_l is None else tau_l / zl.lam_s,
        tau_Ld=None if tau_ld is None else tau_ld / zl.lam_s,
        tau_LL=None if tau_ll is None else -tau_ll / zll.lam_s,
        tau_RR=None if tau_rr is None else -tau_rr / zr.lam_s,
    )


@dataclass(frozen=True)
class RFunctionValue:
    family: str
    h: float
    value: float
    log_abs: float
    sign: int
    in_window: bool


def _r_function(family: str, h: float, k: float, eps: float, m_sign: int,
                tau_C: float | None) -> RFunctionValue:
    conn = maximal_canard(k, eps, m_sign)
    p = params_on_branch(k, eps, m_sign)
    lm = landmarks(p)
    tc = conn.tau_C if tau_C is None else tau_C
    ft = flight_times(h, p)
    if family == "3z":
        if ft.tau_L is None or ft.tau_R is None:
            raise ValueError(f"h = {h:g} outside the natural 3z domain")
        log_p = k * ft.tau_L - ft.tau_R
        in_window = lm.h_s < h <= lm.h_M
    else:
        if ft.tau_Ld is None or ft.tau_LL is None or ft.tau_RR is None:
            raise ValueError(f"h = {h:g} outside the natural 4z domain")
        log_p = k * ft.tau_Ld - ft.tau_LL - ft.tau_RR
        in_window = lm.h_r < h < lm.h_u
    r = LogReal(log_p, 1) - LogReal(p.m * tc, 1)
    return RFunctionValue(family=family, h=h, value=r.to_float(),
                          log_abs=r.log_abs, sign=r.sign, in_window=in_window)


def R3z(h: float, k: float, eps: float, m_sign: int, tau_C: float | None = None) -> RFunctionValue:
    """Divergence function of the headless family at height h.

    Equal to exp(t_L tau_L + t_R tau_R) - exp(m tau_C) in log-safe form,
    evaluated on the connection branch a = a_tilde.  Its simple zeros are
    the saddle-node canard heights.
    """
    return _r_function("3z", h, k, eps, m_sign, tau_C)


def R4z(h: float, k: float, eps: float, m_sign: int, tau_C: float | None = None) -> RFunctionValue:
    """Divergence function of the with-head family at height h on {x = -1}."""
    return _r_function("4z", h, k, eps, m_sign, tau_C)


def _window(family: str, lm: Landmarks) -> tuple[float, float]:
    if family == "3z":
        return lm.h_s, lm.h_M
    if family == "4z":
        return lm.h_r, lm.h_u
    raise ValueError(f"family must be '3z' or '4z', got {family!r}")


def hstar_root(family: str, k: float, eps: float, m_sign: int, n_grid: int = 80) -> float | None:
    """Zero of R_3z/R_4z inside its window, or None when the sign is constant.

    The bracketing grid works on the sign/log representation, so the search
    is immune to float overflow of the function value far from the root.
    Where the propositions claim a definite slope at the root (increasing
    for the supercritical 3z k>1 case and the 4z saddle-node cases,
    decreasing for the subcritical 3z k<1 case), the crossing direction is
    checked against that claim.
    """
    p = params_on_branch(k, eps, m_sign)
    lm = landmarks(p)
    lo, hi = _window(family, lm)
    if not lo < hi:
        return None
    pad = 1e-9 * (hi - lo)
    hs = [lo + pad + (hi - lo - 2 * pad) * i / (n_grid - 1) for i in range(n_grid)]

    def val(h: float) -> RFunctionValue:
        return _r_function(family, h, k, eps, m_sign, None)

    prev: RFunctionValue | None = None
    prev_h = hs[0]
    for h in hs:
        try:
            cur = val(h)
        except ValueError:
            # window edge pokes outside the natural domain of the flight
            # times (h_r < 0 cases): pair sign changes across gaps anew
            prev = None
            continue
        if cur.sign == 0:
            return h
        if prev is not None and prev.sign != cur.sign:
            _check_root_slope(family, k, m_sign, cur.sign)
            return _bisect_r(val, prev_h, prev.sign, h)
        prev, prev_h = cur, h
    return None


def _check_root_slope(family: str, k: float, m_sign: int, sign_hi: int) -> None:
    """Crossing direction (sign above the root) vs the claimed dR/dh sign."""
    if family == "3z" and m_sign < 0 and k > 1:
        expected = 1
    elif family == "3z" and m_sign > 0 and k < 1:
        expected = -1
    elif family == "4z" and (k > 1 or (k == 1 and m_sign > 0)):
        expected = 1
    else:
        return  # no slope claim for this combination
    if sign_hi != expected:
        raise ConvergenceError(
            f"R_{family} crosses zero with the wrong slope for k = {k:g}, "
            f"m_sign = {m_sign:+d}"
        )


def _bisect_r(val, lo: float, sign_lo: int, hi: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-12 * (1.0 + abs(mid)):
            return mid
        s = val(mid).sign
        if s == 0:
            return mid
        if s == sign_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def hstar_series(family: str, k: float, eps: float, m_sign: int) -> float:
    """Leading-order saddle-node height, evaluated exactly as printed.

    The 3z expansion is singular at k = 1 (ValueError); which printed form
    applies is decided by the sign of m.  The 4z expansion accepts any
    k > 0, with the k = 1 limit value 2/(1 + e^(pi/sqrt 3)).
    """
    _check_sign(m_sign)
    se = math.sqrt(eps)
    if family == "3z":
        if k == 1.0:
            raise ValueError("the 3z expansion is singular at k = 1")
        pref = 2.0 / (1.0 + math.exp(m_sign * math.pi / math.sqrt(3.0)))
        return (pref * k ** (k * k / (k * k - 1.0))
                * math.exp((math.pi / math.sqrt(3.0)) * (1.0 - 2.0 * eps) / (m_sign * (1.0 - k * k)))
                * se)
    if family == "4z":
        if not k > 0:
            raise ValueError(f"k must be positive, got {k}")
        if k == 1.0:
            return 2.0 / (1.0 + _E3)
        return (k + 1.0) * math.exp((2.0 - k * k) / 2.0) * se ** ((k * k - 1.0) / (k * k))
    raise ValueError(f"family must be '3z' or '4z', got {family!r}")


# --------------------------------------------------------------------------
# Canard cycles of prescribed width.


@dataclass(frozen=True)
class WidthSolve:
    """Canard cycle pinned at a prescribed width x0.

    ``gap_to_a_tilde`` is a_hat - a_tilde as a float when the closure solve
    resolves it, and a LogReal magnitude estimate from the exponential gap
    bound when it does not (underflow_dominated=True; a_hat is then
    reported as a_tilde itself).  ``in_window`` is False for widths outside
    the ranges where the hyperbolicity analysis applies.
    """

    x0: float
    a_hat: float
    cycle: CycleRecord
    gap_to_a_tilde: float | LogReal
    underflow_dominated: bool
    in_window: bool


def _closure_legs(x0: float, p: Params) -> tuple[Orbit, Orbit]:
    """Forward and backward orbits from the turn to {x = -sqrt(eps), x' < 0}.

    The turning point (x0, f(x0)) splits the would-be cycle into two legs
    that both avoid traversing the repelling manifold in its expanding
    direction -- the forward leg goes around the loop, the backward leg
    descends the repelling segment in (stable) reversed time -- so each
    arrival ordinate on the directed section is well conditioned.  The
    cycle closes exactly when the two ordinates agree.
    """
    se = p.sqrt_eps
    q = (x0, nullcline_f(x0, p))

    def on_section(ev: OrbitEvent) -> bool:
        return ev.exit[0] == -se and field(ev.exit, p)[0] < 0

    fwd = integrate_orbit(q, p, stop=on_section, max_events=24)
    if fwd.truncated:
        raise ConvergenceError(f"forward closure leg from x0 = {x0:g} missed the section")
    bwd = integrate_orbit(q, p, stop=on_section, direction=-1, max_events=24)
    if bwd.truncated:
        raise ConvergenceError(f"backward closure leg from x0 = {x0:g} missed the section")
    return fwd, bwd


def _closure_gap(x0: float, p: Params) -> float:
    fwd, bwd = _closure_legs(x0, p)
    return fwd.events[-1].exit[1] - bwd.events[-1].exit[1]


def _gap_estimate(x0: float, x_r: float, eps: float) -> LogReal:
    """Magnitude of a_hat - a_tilde from the exponential gap bound."""
    if x0 >= -1.0:
        scale = abs(x0)
        rate = scale / eps**1.5
    else:
        scale = abs(x0 - x_r)
        rate = scale / eps
    return LogReal(math.log(scale) - rate, 1)


def cycle_for_width(x0: float, k: float, eps: float, m_sign: int) -> WidthSolve:
    """Find a = a_hat(x0) so that the orbit turning at (x0, f(x0)) closes.

    Probes the closure mismatch c(a) outward from a_tilde, bisecting the
    evaluability edges where an off-cycle leg stops returning to the
    section, and runs a safeguarded secant inside the tightest sign
    change.  When the root cannot be separated from a_tilde at double
    precision (deep canard regime), a_hat is reported as a_tilde with
    underflow_dominated set and the gap replaced by its exponential-bound
    estimate.
    """
    conn = maximal_canard(k, eps, m_sign)
    m = m_sign * math.sqrt(eps)
    at = conn.a_tilde
    lm_branch = landmarks(params_on_branch(k, eps, m_sign))
    in_window = lm_branch.x_r < x0 < lm_branch.x_u or -1.0 <= x0 < lm_branch.x_s

    def c_of(a: float) -> float | None:
        try:
            return _closure_gap(x0, Params(a=a, k=k, m=m, eps=eps))
        except (ConvergenceError, CaptureError):
            return None

    ulp = math.ulp(abs(at) or 1.0)
    cap = 2.0 * math.sqrt(eps)
    pts: list[tuple[float, float]] = []  # evaluable (a, c) probes, kept sorted

    def bracket_in() -> tuple[float, float, float, float] | None:
        best = None
        for (a1, c1), (a2, c2) in zip(pts, pts[1:]):
            if math.copysign(1.0, c1) != math.copysign(1.0, c2):
                score = min(abs(c1), abs(c2))
                if best is None or score < best[0]:
                    best = (score, a1, c1, a2, c2)
        return None if best is None else best[1:]

    def squeeze_edge(a_ok: float, a_bad: float) -> None:
        # The closure root often presses against the evaluability boundary:
        # just past it one leg grazes the basin of the focus and never
        # returns to the section.  Bisect the boundary, keeping every good
        # probe, and stop as soon as the collected points bracket a root.
        for _ in range(64):
            if abs(a_bad - a_ok) <= max(4 * ulp, 1e-13):
                return
            mid = 0.5 * (a_ok + a_bad)
            cm = c_of(mid)
            if cm is None:
                a_bad = mid
                continue
            a_ok = mid
            pts.append((mid, cm))
            pts.sort()
            if bracket_in() is not None:
                return

    c0 = c_of(at)
    if c0 is not None:
        pts.append((at, c0))
    for side in (-1.0, 1.0):
        if bracket_in() is not None:
            break
        prev_ok = at if c0 is not None else None
        delta = 64 * ulp
        while delta <= cap:
            a_probe = at + side * delta
            cp = c_of(a_probe)
            if cp is None:
                if prev_ok is not None:
                    squeeze_edge(prev_ok, a_probe)
                break
            pts.append((a_probe, cp))
            pts.sort()
            prev_ok = a_probe
            if bracket_in() is not None:
                break
            delta *= 8.0

    if bracket_in() is None:
        # Fallback sweep: at large eps the root detaches O(1) from a_tilde
        # (deep widths), or the evaluable set is an island not containing
        # a_tilde at all (shallow subcritical widths).  Walk the whole cap
        # range uniformly, squeezing every evaluability edge encountered.
        n_sweep = 96
        prev_a: float | None = None
        prev_c: float | None = None
        for i in range(n_sweep + 1):
            a_probe = at - cap + 2.0 * cap * i / n_sweep
            cp = c_of(a_probe)
            if cp is not None:
                pts.append((a_probe, cp))
                pts.sort()
            if prev_a is not None and (cp is None) != (prev_c is None):
                if cp is None:
                    squeeze_edge(prev_a, a_probe)
                else:
                    squeeze_edge(a_probe, prev_a)
            if bracket_in() is not None:
                break
            prev_a, prev_c = a_probe, cp

    br = bracket_in()
    if br is None:
        if pts:
            a_best, c_best = min(pts, key=lambda t: abs(t[1]))
            if abs(c_best) <= 2e-11:
                # root squeezed against the evaluability edge, or below
                # a-resolution entirely: accept the best closure found
                if abs(a_best - at) < 64 * ulp:
                    return _finish_width(x0, at, _gap_estimate(x0, lm_branch.x_r, eps),
                                         True, in_window, k, m, eps)
                return _finish_width(x0, a_best, a_best - at, False,
                                     in_window, k, m, eps)
        raise ConvergenceError(
            f"no closure bracket for x0 = {x0:g} within a in "
            f"[{at - cap:.6g}, {at + cap:.6g}]"
        )
    lo, c_lo, hi, c_hi = br

    # safeguarded secant on [lo, hi]
    a_prev, c_prev = lo, c_lo
    a_cur, c_cur = hi, c_hi
    for _ in range(200):
        if hi - lo <= 4 * ulp:
            break
        if c_cur != c_prev:
            a_next = a_cur - c_cur * (a_cur - a_prev) / (c_cur - c_prev)
        else:
            a_next = 0.5 * (lo + hi)
        if not lo < a_next < hi:
            a_next = 0.5 * (lo + hi)
        c_next = c_of(a_next)
        if c_next is None:
            break
        if c_next == 0.0:
            lo = hi = a_next
            break
        if math.copysign(1.0, c_next) == math.copysign(1.0, c_lo):
            lo, c_lo = a_next, c_next
        else:
            hi, c_hi = a_next, c_next
        a_prev, c_prev = a_cur, c_cur
        a_cur, c_cur = a_next, c_next
    a_hat = lo if abs(c_lo) <= abs(c_hi) else hi
    if abs(a_hat - at) < 64 * ulp:
        # root indistinguishable from a_tilde at working precision
        return _finish_width(x0, at, _gap_estimate(x0, lm_branch.x_r, eps),
                             True, in_window, k, m, eps)
    return _finish_width(x0, a_hat, a_hat - at, False, in_window, k, m, eps)


def _finish_width(x0: float, a_hat: float, gap: float | LogReal, underflow: bool,
                  in_window: bool, k: float, m: float, eps: float) -> WidthSolve:
    """Assemble the cycle record from the two shooting legs.

    Re-running the return map from the section would have to traverse the
    repelling slow branch forward in time, which amplifies rounding by
    exp(k * t_canard) and is numerically captured for all but the smallest
    cycles.  The legs already tile one full period while integrating the
    canard segment only in its contracting direction, so the divergence
    multiplier exp(sum t_i tau_i) and the section ordinate come straight
    from their events.
    """
    from .poincare import NONHYP_BAND, _window_kind, phi

    p = Params(a=a_hat, k=k, m=m, eps=eps)
    fwd, bwd = _closure_legs(x0, p)
    log_mult = 0.0
    visited_ll = False
    for ev in (*fwd.events, *bwd.events):
        log_mult += ev.flight_time * zone_data(ev.zone, p).trace
        visited_ll = visited_ll or ev.zone == "LL"
    y_fix = 0.5 * (fwd.events[-1].exit[1] + bwd.events[-1].exit[1])
    if abs(log_mult) <= NONHYP_BAND:
        stab = "nonhyperbolic"
    else:
        stab = "stable" if log_mult < 0.0 else "unstable"
    try:
        h = phi(x0, p)
    except (ValueError, ConvergenceError, CaptureError):
        h = math.nan
    rec = CycleRecord(
        y_fix=y_fix,
        x0=x0,
        h=h,
        multiplier=safe_exp(log_mult),
        log_multiplier=log_mult,
        stability=stab,
        kind=_window_kind(x0, landmarks(p), visited_ll, p.sqrt_eps),
        section="left",
    )
    return WidthSolve(x0=x0, a_hat=a_hat, cycle=rec, gap_to_a_tilde=gap,
                      underflow_dominated=underflow, in_window=in_window)


def saddle_node_k_for_width(x0: float, eps: float, m_sign: int) -> float:
    """Steepness k at which the cycle of width x0 is the saddle-node canard.

    Solves hstar_root(family, k) = Phi(x0) over k by grid bracketing plus
    secant, with the family chosen by the side of x0 relative to x = -1.
    Grid points where the R-function has no root are skipped, so the
    bracket can only form inside the family's existence range.
    """
    from .poincare import phi

    _check_sign(m_sign)
    family = "3z" if x0 >= -1.0 else "4z"
    k_lo, k_hi = 2 * math.sqrt(eps) * 1.05, 8.0

    def g(k: float) -> float | None:
        try:
            root = hstar_root(family, k, eps, m_sign)
        except (ValueError, ConvergenceError):
            return None
        if root is None:
            return None
        return root - phi(x0, params_on_branch(k, eps, m_sign))

    def edge_probe(k_none: float, k_ok: float, g_ok: float) -> tuple[float, float]:
        # The R-function root exists at k_ok but not at k_none; squeeze the
        # existence boundary so a sign change pressed against it (h* runs to
        # a window edge there) is not stepped over by the coarse grid.
        bad, good, g_good = k_none, k_ok, g_ok
        for _ in range(60):
            if abs(good - bad) <= 1e-12 * (1.0 + abs(good)):
                break
            mid = 0.5 * (bad + good)
            gm = g(mid)
            if gm is None:
                bad = mid
            else:
                good, g_good = mid, gm
                if math.copysign(1.0, gm) != math.copysign(1.0, g_ok):
                    break
        return good, g_good

    n = 33
    grid = [k_lo + (k_hi - k_lo) * i / (n - 1) for i in range(n)]
    prev: tuple[float, float] | None = None
    last_none: float | None = None
    for kk in grid:
        gk = g(kk)
        if gk is None:
            if prev is not None:
                edge_k, edge_g = edge_probe(kk, prev[0], prev[1])
                if math.copysign(1.0, edge_g) != math.copysign(1.0, prev[1]):
                    return _secant_k(g, prev[0], prev[1], edge_k, edge_g)
            prev = None
            last_none = kk
            continue
        if prev is None and last_none is not None:
            edge_k, edge_g = edge_probe(last_none, kk, gk)
            if math.copysign(1.0, edge_g) != math.copysign(1.0, gk):
                return _secant_k(g, edge_k, edge_g, kk, gk)
            prev = (edge_k, edge_g)
        if gk == 0.0:
            return kk
        if prev is not None and math.copysign(1.0, gk) != math.copysign(1.0, prev[1]):
            return _secant_k(g, prev[0], prev[1], kk, gk)
        prev = (kk, gk)
    raise ConvergenceError(
        f"no saddle-node bracket for width x0 = {x0:g} with k scanned over "
        f"[{k_lo:.4g}, {k_hi:.4g}]"
    )


def _secant_k(g, lo: float, g_lo: float, hi: float, g_hi: float) -> float:
    """Bracketed secant for the saddle-node k equation."""
    k_prev, g_prev = lo, g_lo
    k_cur, g_cur = hi, g_hi
    for _ in range(100):
        if hi - lo <= 1e-10 * (1.0 + hi):
            break
        if g_cur != g_prev:
            k_next = k_cur - g_cur * (k_cur - k_prev) / (g_cur - g_prev)
        else:
            k_next = 0.5 * (lo + hi)
        if not lo < k_next < hi:
            k_next = 0.5 * (lo + hi)
        g_next = g(k_next)
        if g_next is None or g_next == 0.0:
            return k_next
        if math.copysign(1.0, g_next) == math.copysign(1.0, g_lo):
            lo, g_lo = k_next, g_next
        else:
            hi, g_hi = k_next, g_next
        k_prev, g_prev = k_cur, g_cur
        k_cur, g_cur = k_next, g_next
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# Boundary-layer half-map asymptotics.


@dataclass(frozen=True)
class HalfMapAsymptotic:
    """Landing ordinate and its exponentially small correction term.

    The correction is kept as a signed log-magnitude so it never flushes
    to zero; ``y_out`` folds it into the landing ordinate in plain floats
    (where it may well round away entirely).
    """

    kind: str
    y_out: float
    correction: LogReal
    threshold_ok: bool


def halfmap_asymptotic(kind: str, h: float, p: Params) -> HalfMapAsymptotic:
    """Leading-order half maps near the slow-manifold landing points.

    Supported kinds: "R" (excursion exit near q1_R), "L_inv" (inverse of
    the left in-out map near q0_L), "LL" (deep excursion exit near q1_LL),
    and "Ld_inv" (inverse of the downward transit near q0_L).  These are
    crude outer bounds: the exponents overshoot once h is O(1), so they are
    meant for domain reasoning, not precision work.
    """
    lm = landmarks(p)
    r, a, k, m, eps = p.sqrt_eps, p.a, p.k, p.m, p.eps
    blf = eps ** (-0.5)
    lam_ls = zone_data("L", p).lam_s
    lam_lls = zone_data("LL", p).lam_s
    lam_rs = zone_data("R", p).lam_s
    p2 = k * (1 - r) - m * (r + a)

    def mag(pref: float, exponent: float) -> LogReal:
        if pref == 0.0:
            return LogReal.zero()
        return LogReal(math.log(abs(pref)) + exponent, 1 if pref > 0 else -1)

    if kind == "R":
        corr = mag(h, -h / (eps * (r - a)))
        return HalfMapAsymptotic(kind, lm.q1_R[1] + corr.to_float(), corr,
                                 h > (m - blf * lam_rs) * (r - a))
    if kind == "L_inv":
        corr = mag(h, -k * h / (eps * (r - a)))
        return HalfMapAsymptotic(kind, lm.q0_L[1] + corr.to_float(), corr,
                                 h > (-m + blf * lam_ls) * (r + a))
    if kind == "LL":
        corr = mag(k - h, -k * (k - h) / (eps * (1 + a)))
        return HalfMapAsymptotic(kind, lm.q1_LL[1] - corr.to_float(), corr,
                                 h < p2 + blf * lam_lls * (1 + a))
    if kind == "Ld_inv":
        corr = mag(k - h, -(k * k / eps) * math.log((1 + a) / (a + r)))
        return HalfMapAsymptotic(kind, lm.q0_L[1] - corr.to_float(), corr,
                                 p2 - zone_data("L", p).lam_q * (1 + a) < h < p2)
    raise ValueError(f"unknown asymptotic half map {kind!r}")
