"""Branch tracing, fold detection, and Hopf-side checks.

The canard explosion is parametrized by the cycle width x0 rather than by
the parameter a: along the branch, a collapses onto the maximal-canard
value exponentially fast in 1/eps, so a-space is numerically degenerate
while width space stays well conditioned.  Folds (saddle-node cycles) are
located from direction reversals of a(x0) where those are resolvable and
from multiplier-through-one crossings where they are not.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .canard import R3z, R4z, _closure_gap, cycle_for_width, hstar_root, maximal_canard, params_on_branch
from .errors import CaptureError, ConvergenceError, NumericalError
from .logreal import safe_exp
from .model import Params, landmarks
from .poincare import fixed_points, phi, section_line

__all__ = [
    "Branch",
    "BranchPoint",
    "Fold",
    "HopfCheck",
    "default_width_grid",
    "detect_folds",
    "hopf_check",
    "thread_count",
    "trace_branch",
]

#: |log multiplier| target when a fold is polished by the multiplier=1 solve.
MULT_REFINE_TOL = 1e-9


def thread_count() -> int:
    """Worker count for branch sweeps, from PWLCANARD_THREADS (default 1)."""
    raw = os.environ.get("PWLCANARD_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return n if n > 1 else 1


@dataclass(frozen=True)
class BranchPoint:
    """One verified cycle on the explosion branch."""

    x0: float
    h: float
    a: float
    log_multiplier: float
    stability: str
    kind: str
    window_flag: bool
    y_fix: float
    section: str
    residual: float
    underflow_dominated: bool


@dataclass(frozen=True)
class Branch:
    """Explosion branch: verified cycles ordered by decreasing width."""

    k: float
    eps: float
    m_sign: int
    a_H: float | None
    a_tilde: float
    points: tuple[BranchPoint, ...]
    failures: tuple[tuple[float, str], ...]


@dataclass(frozen=True)
class Fold:
    """Saddle-node canard cycle: a turning point of a(x0) along the branch.

    ``coarse`` marks folds located only by the quadratic vertex of a(x0)
    (the multiplier variation was not resolvable); ``hstar_gap`` is the
    relative distance between the fold height Phi(x*) and the R-function
    root, None when that root is unavailable.
    """

    x_star: float
    a_star: float
    side: str
    multiplier_residual: float
    coarse: bool
    hstar_gap: float | None


def default_width_grid(k: float, eps: float, m_sign: int, n: int = 200) -> list[float]:
    """Width grid over (x_r, -sqrt(eps)), geometric near both edges.

    The parameter a moves fastest where the cycle leaves the canard regime
    (next to the relaxation depth x_r and next to the Hopf-side width), so
    a fifth of the points pile up geometrically at each edge and the rest
    are uniform.  Returned in decreasing order, the branch convention.
    """
    p = params_on_branch(k, eps, m_sign)
    lm = landmarks(p)
    lo = lm.x_r + 0.04 * (-1.0 - lm.x_r)
    hi = -p.sqrt_eps - 0.004 * (-p.sqrt_eps - lm.x_r)
    span = hi - lo
    n_edge = max(2, n // 5)
    n_uni = max(2, n - 2 * n_edge)
    xs = {lo + span * i / (n_uni - 1) for i in range(n_uni)}
    for j in range(n_edge):
        t = 1e-4 * (0.2 / 1e-4) ** (j / (n_edge - 1))
        xs.add(lo + t * span)
        xs.add(hi - t * span)
    nodes = sorted(xs, reverse=True)
    # the geometric tails can land within an ulp of a uniform node; keep one
    out = [nodes[0]]
    for x in nodes[1:]:
        if out[-1] - x > 1e-12 * span:
            out.append(x)
    return out


def _r_sign_stability(kind: str, h: float, k: float, eps: float, m_sign: int) -> str:
    try:
        rv = (R3z if kind == "headless" else R4z)(h, k, eps, m_sign)
    except (ValueError, ConvergenceError):
        return "unclassified"
    if rv.sign > 0:
        return "unstable"
    if rv.sign < 0:
        return "stable"
    return "non-hyperbolic"


def _solve_point(
    x0: float,
    k: float,
    eps: float,
    m_sign: int,
    lm,
    r_eps: float,
    use_exact_stability: bool,
) -> BranchPoint:
    ws = cycle_for_width(x0, k, eps, m_sign)
    rec = ws.cycle
    p_hat = Params(a=ws.a_hat, k=k, m=m_sign * r_eps, eps=eps)
    # Independent re-verification: re-shoot both legs at the accepted a and
    # record the section mismatch.  Rounding a_hat to a double leaves this
    # at the conditioning floor |dc/da| * ulp(a), which mid-explosion can
    # exceed any fixed ordinate tolerance, so the residual is reported
    # rather than thresholded; the solve itself certified a sign bracket
    # of width <= 4 ulp around a_hat.
    residual = abs(_closure_gap(x0, p_hat))
    if not math.isfinite(residual):
        raise ConvergenceError(f"cycle at width {x0:g} failed re-verification")
    kind = "with-head" if x0 < -1.0 else "headless"
    window_flag = lm.x_u < x0 < -1.0 or lm.x_s < x0 < -r_eps
    h = phi(x0, p_hat)
    if use_exact_stability:
        stability = rec.stability
    else:
        # Multipliers degenerate to exp(+-huge) for small eps; the
        # asymptotic divergence functions carry the sign instead.
        stability = _r_sign_stability(kind, h, k, eps, m_sign)
    return BranchPoint(
        x0=x0,
        h=h,
        a=ws.a_hat,
        log_multiplier=rec.log_multiplier,
        stability=stability,
        kind=kind,
        window_flag=window_flag,
        y_fix=rec.y_fix,
        section=rec.section,
        residual=residual,
        underflow_dominated=ws.underflow_dominated,
    )


def trace_branch(
    k: float,
    eps: float,
    m_sign: int,
    grid: list[float] | None = None,
) -> Branch:
    """Solve the cycle family width-by-width and verify each fixed point.

    Widths come from ``default_width_grid`` unless an explicit list is
    given.  Per-width failures (capture, no bracket, verification miss)
    are collected in Branch.failures and do not abort the sweep.  Points
    are solved independently -- concurrently when PWLCANARD_THREADS > 1 --
    and assembled in decreasing-width order, so output is deterministic.
    """
    conn = maximal_canard(k, eps, m_sign)
    p0 = params_on_branch(k, eps, m_sign)
    lm = landmarks(p0)
    if grid is None:
        widths = default_width_grid(k, eps, m_sign)
    else:
        widths = sorted({float(x) for x in grid}, reverse=True)
    use_exact = eps >= 0.05

    def work(x0: float):
        try:
            return _solve_point(x0, k, eps, m_sign, lm, p0.sqrt_eps, use_exact)
        except (ConvergenceError, CaptureError, NumericalError, ValueError) as exc:
            return (x0, f"{type(exc).__name__}: {exc}")

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, widths))
    else:
        results = [work(x0) for x0 in widths]
    points = tuple(r for r in results if isinstance(r, BranchPoint))
    failures = tuple(r for r in results if not isinstance(r, BranchPoint))
    return Branch(
        k=k,
        eps=eps,
        m_sign=m_sign,
        a_H=lm.a_H,
        a_tilde=conn.a_tilde,
        points=points,
        failures=failures,
    )


def _merge_intervals(cands: list[tuple[int, int]]) -> list[tuple[int, int]]:
    if not cands:
        return []
    cands.sort()
    merged = [list(cands[0])]
    for lo, hi in cands[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def _fold_candidates(run: list[BranchPoint]) -> list[tuple[int, int]]:
    """Index intervals of ``run`` bracketing a turning point of the branch."""
    cands: list[tuple[int, int]] = []
    for i in range(len(run) - 1):
        l0, l1 = run[i].log_multiplier, run[i + 1].log_multiplier
        if l0 != 0.0 and l1 != 0.0 and math.copysign(1.0, l0) != math.copysign(1.0, l1):
            cands.append((i, i + 1))
    da = [run[i + 1].a - run[i].a for i in range(len(run) - 1)]
    prev: int | None = None
    for i, d in enumerate(da):
        if d == 0.0:
            continue  # a below resolution here; the multiplier scan covers it
        if prev is not None and math.copysign(1.0, d) != math.copysign(1.0, da[prev]):
            # reversals whose steps sit at the ulp floor are rounding
            # wiggles on an a-plateau, not turning points
            noise = 1e3 * math.ulp(abs(run[i].a) or 1.0)
            if min(abs(d), abs(da[prev])) > noise:
                cands.append((prev, i + 1))
        prev = i
    return _merge_intervals(cands)


def _parabola_vertex(q0: BranchPoint, q1: BranchPoint, q2: BranchPoint) -> tuple[float, float]:
    x0, x1, x2 = q0.x0, q1.x0, q2.x0
    d1 = (q1.a - q0.a) / (x1 - x0)
    d2 = (q2.a - q1.a) / (x2 - x1)
    c = (d2 - d1) / (x2 - x0)
    if c == 0.0:
        return x1, q1.a
    xv = 0.5 * (x0 + x1 - d1 / c)
    av = q0.a + d1 * (xv - x0) + c * (xv - x0) * (xv - x1)
    return xv, av


def _solve_mult_one(
    x_lo: float,
    g_lo: float,
    x_hi: float,
    g_hi: float,
    k: float,
    eps: float,
    m_sign: int,
) -> tuple[float, float, float] | None:
    """Bracketed secant on log_multiplier(x0) = 0; (x*, log mult, a*)."""

    def g(x0: float) -> tuple[float, float]:
        ws = cycle_for_width(x0, k, eps, m_sign)
        return ws.cycle.log_multiplier, ws.a_hat

    xa, ga = x_lo, g_lo
    xb, gb = x_hi, g_hi
    best: tuple[float, float, float] | None = None
    for _ in range(60):
        if abs(xb - xa) <= 1e-13 * (1.0 + abs(xb)):
            break
        if best is not None and abs(best[1]) <= MULT_REFINE_TOL:
            break
        x_mid = xb - gb * (xb - xa) / (gb - ga) if gb != ga else 0.5 * (xa + xb)
        if not (min(xa, xb) < x_mid < max(xa, xb)):
            x_mid = 0.5 * (xa + xb)
        try:
            g_mid, a_mid = g(x_mid)
        except (ConvergenceError, CaptureError, NumericalError):
            return best
        if best is None or abs(g_mid) < abs(best[1]):
            best = (x_mid, g_mid, a_mid)
        if g_mid == 0.0:
            break
        if math.copysign(1.0, g_mid) == math.copysign(1.0, ga):
            xa, ga = x_mid, g_mid
        else:
            xb, gb = x_mid, g_mid
    return best


def _fold_hstar_gap(x_star: float, side: str, k: float, eps: float, m_sign: int) -> float | None:
    family = "3z" if side == "headless" else "4z"
    try:
        root = hstar_root(family, k, eps, m_sign)
    except (ConvergenceError, ValueError):
        return None
    if root is None:
        return None
    try:
        h_fold = phi(x_star, params_on_branch(k, eps, m_sign))
    except (ConvergenceError, ValueError):
        return None
    return abs(h_fold - root) / abs(root)


def _refine_fold(
    branch: Branch, run: list[BranchPoint], i_lo: int, i_hi: int, side: str
) -> Fold:
    k, eps, s = branch.k, branch.eps, branch.m_sign
    pa, pb = run[i_lo], run[i_hi]
    la, lb = pa.log_multiplier, pb.log_multiplier
    if la != 0.0 and lb != 0.0 and math.copysign(1.0, la) != math.copysign(1.0, lb):
        polished = _solve_mult_one(pa.x0, la, pb.x0, lb, k, eps, s)
        if polished is not None:
            x_star, logm, a_star = polished
            return Fold(
                x_star=x_star,
                a_star=a_star,
                side=side,
                multiplier_residual=abs(safe_exp(logm) - 1.0),
                coarse=False,
                hstar_gap=_fold_hstar_gap(x_star, side, k, eps, s),
            )
    j = min(max((i_lo + i_hi) // 2, 1), len(run) - 2)
    x_star, a_star = _parabola_vertex(run[j - 1], run[j], run[j + 1])
    x_star = min(max(x_star, run[-1].x0), run[0].x0)
    try:
        ws = cycle_for_width(x_star, k, eps, s)
        res = abs(safe_exp(ws.cycle.log_multiplier) - 1.0)
    except (ConvergenceError, CaptureError, NumericalError):
        nearest = min(run[i_lo : i_hi + 1], key=lambda q: abs(q.x0 - x_star))
        res = abs(safe_exp(nearest.log_multiplier) - 1.0)
    return Fold(
        x_star=x_star,
        a_star=a_star,
        side=side,
        multiplier_residual=res,
        coarse=True,
        hstar_gap=_fold_hstar_gap(x_star, side, k, eps, s),
    )


def detect_folds(branch: Branch) -> list[Fold]:
    """Locate and polish the saddle-node cycles of a traced branch.

    Candidates come from direction reversals of a(x0) and from sign
    changes of the log multiplier (the two coincide at a true fold, but
    only the latter survives when the a-gaps underflow).  Transitory-window
    points never seed a candidate, mirroring the hyperbolicity theorems'
    exclusions.  Sorted by decreasing width; empty list when the branch is
    monotone.
    """
    folds: list[Fold] = []
    for kind in ("headless", "with-head"):
        run = [q for q in branch.points if q.kind == kind and not q.window_flag]
        if len(run) < 3:
            continue
        for i_lo, i_hi in _fold_candidates(run):
            folds.append(_refine_fold(branch, run, i_lo, i_hi, kind))
    folds.sort(key=lambda f: -f.x_star)
    return folds


@dataclass(frozen=True)
class HopfCheck:
    """Amplitude scaling of the small cycles born at the corner value a_H."""

    a_H: float
    slope: float
    r_squared: float
    samples: tuple[tuple[float, float], ...]


def _linear_fit(xs: list[float], ys: list[float]) -> tuple[float, float]:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    ss_res = sum((y - my - slope * (x - mx)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - my) ** 2 for y in ys)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return slope, r2


def _corner_cycle_turn(p: Params, r: float) -> float:
    """Turn abscissa of the unstable corner cycle (m = +sqrt(eps) side).

    Probing this cycle through the forward return map is hopeless: its left
    arc climbs the repelling branch, so rounding is amplified by exp(k t)
    over the climb and any computed capture boundary lands somewhere inside
    a noise band wider than the cycle itself.  Shooting the two closure legs
    from a trial turn point instead keeps every integration contracting, and
    the section mismatch is then a well-conditioned function of the turn
    abscissa whose root is the cycle.
    """
    delta = p.a + r

    def gap(x0: float) -> float | None:
        try:
            return _closure_gap(x0, p)
        except (CaptureError, ConvergenceError, ValueError):
            return None

    # Trial turns outside the cycle land the forward leg below the backward
    # one (c < 0, spiralling out), with c -> 0 at the cycle.  Inside, either
    # the mismatch flips positive in a thin band or the forward spiral
    # contracts below section reach before crossing (not evaluable); both
    # outcomes mean "inside", so a single bisection on that classification
    # pins the turn.
    step = 0.5 * delta
    lo_lim = max(-1.0 + 1e-6, -r - 80.0 * delta)
    xa = -r
    xb = None
    x = -r - 0.25 * delta
    while x > lo_lim:
        g = gap(x)
        if g is not None and g <= 0.0:
            xb = x
            break
        xa = x
        x -= step
    if xb is None:
        raise ConvergenceError(
            f"no corner-cycle bracket at a = {p.a:.8g} (a_H = {-r:.8g})"
        )
    while abs(xa - xb) > 1e-13 * (1.0 + abs(xb)):
        mid = 0.5 * (xa + xb)
        g = gap(mid)
        if g is not None and g <= 0.0:
            xb = mid
        else:
            xa = mid
    return 0.5 * (xa + xb)


def hopf_check(k: float, eps: float, m_sign: int) -> HopfCheck:
    """Verify the linear growth of cycle amplitude across a_H.

    Ten parameter samples are taken on the bifurcating side of the corner
    value (below a_H = +sqrt(eps) for m = -sqrt(eps), above -sqrt(eps) for
    the opposite sign) and amplitude measured as the horizontal reach
    a - x_turn.  The stable cycle (supercritical side) comes from a
    fixed-point scan; the unstable one is pinned by closing the shooting
    legs over the turn abscissa, since its repelling canard arc rules out
    forward probing.  Raises ConvergenceError when no cycle exists at a
    sample (wrong side of the corner value).
    """
    if m_sign not in (-1, 1):
        raise ValueError(f"m_sign must be -1 or +1, got {m_sign!r}")
    r = math.sqrt(eps)
    a_h = r if m_sign < 0 else -r
    section = "right" if m_sign < 0 else "left"
    samples: list[tuple[float, float]] = []
    for j in range(1, 11):
        delta = 0.2 * r * j / 10.0
        a = a_h - delta if m_sign < 0 else a_h + delta
        p = Params(a=a, k=k, m=m_sign * r, eps=eps)
        _, y_top = section_line(section, p)
        if m_sign < 0:
            found = fixed_points(p, y_top - 0.5 * r, y_top, section=section, n_grid=48)
            if not found:
                raise ConvergenceError(
                    f"no small cycle on the {section} section at a = {a:.8g} "
                    f"(wrong side of a_H = {a_h:.8g}?)"
                )
            rec = max(found, key=lambda c: c.y_fix)  # closest to the corner
            x_turn = rec.x0
        else:
            x_turn = _corner_cycle_turn(p, r)
        samples.append((a, p.a - x_turn))
    xs = [abs(a - a_h) for a, _ in samples]
    ys = [amp for _, amp in samples]
    slope, r2 = _linear_fit(xs, ys)
    return HopfCheck(a_H=a_h, slope=slope, r_squared=r2, samples=tuple(samples))
