"""Model definition: a planar slow-fast oscillator with a 4-piece linear nullcline.

The system is

    x' = y - f(x),      y' = eps (a - x),

where ``f`` is continuous and piecewise linear on four zones separated by
the switching lines x = -1, x = -sqrt(eps) and x = +sqrt(eps):

    LL  (x <= -1):              f = x + 1 - k (sqrt(eps) - 1) - m (sqrt(eps) + a)
    L   (-1 <= x <= -sqrt(eps)): f = -k (x + sqrt(eps)) - m (sqrt(eps) + a)
    C   (|x| <= sqrt(eps)):      f = m (x - a)
    R   (x >= sqrt(eps)):        f = x - sqrt(eps) + m (sqrt(eps) - a)

Inside each zone the vector field is affine, (x', y') = A (x, y) + b with
A = [[t, 1], [-eps, 0]], so every trajectory is known in closed form; all
numerics in this package ride on that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "EPS_MAX",
    "NU",
    "ZONES",
    "EquilibriumInfo",
    "Landmarks",
    "Params",
    "SlowManifold",
    "SlowManifoldSegment",
    "ZoneData",
    "equilibrium_stability",
    "landmarks",
    "nullcline_f",
    "slow_manifold",
    "zone_data",
    "zones_at",
]

EPS_MAX = 0.25

#: Exponent of the eps^(-nu) boundary-layer factor in the h_s/h_u landmarks.
NU = 0.5

ZONES = ("LL", "L", "C", "R")


@dataclass(frozen=True)
class Params:
    """Parameter tuple (a, k, m, eps).

    Constraints: k > 0, 0 < eps <= EPS_MAX and |m| < 2 sqrt(eps) (the
    central zone keeps a complex spectrum).  The canard analysis sets
    m = +-sqrt(eps), well inside the allowed band.
    """

    a: float
    k: float
    m: float
    eps: float

    def __post_init__(self) -> None:
        if not (self.k > 0):
            raise ValueError(f"k must be positive, got {self.k}")
        if not (0 < self.eps <= EPS_MAX):
            raise ValueError(f"eps must lie in (0, {EPS_MAX}], got {self.eps}")
        if not (abs(self.m) < 2 * math.sqrt(self.eps)):
            raise ValueError(
                f"|m| must be < 2 sqrt(eps) = {2 * math.sqrt(self.eps)}, got {self.m}"
            )

    @property
    def sqrt_eps(self) -> float:
        return math.sqrt(self.eps)


def nullcline_f(x: float, p: Params) -> float:
    """The piecewise-linear fast nullcline y = f(x)."""
    r = p.sqrt_eps
    if x < -1:
        return x + 1 - p.k * (r - 1) - p.m * (r + p.a)
    if x < -r:
        return -p.k * (x + r) - p.m * (r + p.a)
    if x <= r:
        return p.m * (x - p.a)
    return x - r + p.m * (r - p.a)


def zones_at(x: float, p: Params) -> tuple[str, ...]:
    """Zones whose closure contains x (two on a switching line, else one)."""
    r = p.sqrt_eps
    if x < -1:
        return ("LL",)
    if x == -1:
        return ("LL", "L")
    if x < -r:
        return ("L",)
    if x == -r:
        return ("L", "C")
    if x < r:
        return ("C",)
    if x == r:
        return ("C", "R")
    return ("R",)


@dataclass(frozen=True)
class ZoneData:
    """Affine data and spectrum of one zone.

    The flow matrix is A = [[trace, 1], [-eps, 0]] and the affine part is
    ``b``; det A = eps always.  For a real spectrum (delta >= 0), ``lam_s``
    is the slow eigenvalue (smaller modulus) and ``lam_q`` the fast one,
    with eigenvectors (lam, -eps); equal values signal a Jordan block.
    For delta < 0 the eigenvalues are sigma +- i omega.
    """

    zone: str
    trace: float
    det: float
    b: tuple[float, float]
    equilibrium: tuple[float, float]
    delta: float
    lam_s: float | None
    lam_q: float | None
    sigma: float | None
    omega: float | None

    @property
    def is_real(self) -> bool:
        return self.lam_s is not None


_ZONE_TRACE = {"LL": lambda p: -1.0, "L": lambda p: p.k, "C": lambda p: -p.m, "R": lambda p: -1.0}


def _zone_bx(zone: str, p: Params) -> float:
    r = p.sqrt_eps
    if zone == "LL":
        return (p.k + p.m) * r + p.m * p.a - (p.k + 1)
    if zone == "L":
        return (p.k + p.m) * r + p.m * p.a
    if zone == "C":
        return p.m * p.a
    if zone == "R":
        return r * (1 - p.m) + p.m * p.a
    raise ValueError(f"unknown zone {zone!r}")


def zone_data(zone: str, p: Params) -> ZoneData:
    """Assemble the affine system and its spectrum for one zone."""
    if zone not in ZONES:
        raise ValueError(f"unknown zone {zone!r}")
    t = _ZONE_TRACE[zone](p)
    bx = _zone_bx(zone, p)
    b = (bx, p.eps * p.a)
    eq = (p.a, -t * p.a - bx)
    delta = t * t - 4 * p.eps
    if delta >= 0:
        if delta == 0:
            lam_s = lam_q = t / 2
        else:
            # Take the non-cancelling branch for the fast eigenvalue,
            # then the slow one via the product lam_s lam_q = eps.
            lam_q = (t + math.copysign(math.sqrt(delta), t)) / 2
            lam_s = p.eps / lam_q
        return ZoneData(zone, t, p.eps, b, eq, delta, lam_s, lam_q, None, None)
    return ZoneData(zone, t, p.eps, b, eq, delta, None, None, t / 2, math.sqrt(-delta) / 2)


@dataclass(frozen=True)
class Landmarks:
    """Distinguished points and heights used throughout the cycle analysis.

    Corner points of the nullcline (p_LL, p_L, p_R), endpoints of the slow
    manifold segments (q0_L, q1_L, q1_R, q1_LL, and q0_RR across from
    q1_LL at the same height), the width bounds
    x_r < x_u < -1 < x_s < -sqrt(eps), the section heights h_r < h_s (left)
    and h_u < h_M (on x = -1), the Hopf-like critical value a_H when
    m = -+sqrt(eps), the equilibrium (a, f(a)), and the invariant-rhomboid
    vertices (top-left, top-right, bottom-right, bottom-left; the slanted
    sides run parallel to the common LL/R slow eigenvector).
    """

    p_LL: tuple[float, float]
    p_L: tuple[float, float]
    p_R: tuple[float, float]
    q0_L: tuple[float, float]
    q1_L: tuple[float, float]
    q1_R: tuple[float, float]
    q1_LL: tuple[float, float]
    q0_RR: tuple[float, float]
    x_r: float
    x_s: float
    x_u: float
    h_r: float
    h_s: float
    h_u: float
    h_M: float
    a_H: float | None
    equilibrium: tuple[float, float]
    rhomboid: tuple[
        tuple[float, float],
        tuple[float, float],
        tuple[float, float],
        tuple[float, float],
    ]


def landmarks(p: Params) -> Landmarks:
    """Compute all landmark points/heights for parameters ``p``.

    Raises ValueError unless k > 2 sqrt(eps): the L-zone spectrum must be
    real and separated for the slow manifold (and the heights built from
    lam_L_s) to exist.
    """
    r = p.sqrt_eps
    if p.k <= 2 * r:
        raise ValueError("landmarks need a real L spectrum: require k > 2 sqrt(eps)")
    zl = zone_data("L", p)
    zll = zone_data("LL", p)
    zr = zone_data("R", p)
    lam_ls, lam_lq = zl.lam_s, zl.lam_q
    lam_lls = zll.lam_s
    lam_rs = zr.lam_s

    p_ll = (-1.0, p.k * (1 - r) - p.m * (r + p.a))
    p_l = (-r, -p.m * (r + p.a))
    p_r = (r, p.m * (r - p.a))
    q0_l = (-r, -(p.m + lam_ls) * (r + p.a))
    q1_l = (-1.0, -(p.m + p.k) * (r + p.a) + lam_lq * (1 + p.a))
    q1_r = (r, (p.m + lam_rs) * (r - p.a))
    q1_ll = (-1.0, p_ll[1] - lam_lls * (1 + p.a))

    x_r = -(1 + p.k) + p.k * r - lam_ls * (r + p.a)
    x_s = -r - lam_ls * (r + p.a)
    x_u = -1 + lam_lls * (1 + p.a)

    blf = p.eps ** (-NU)
    h_r = q0_l[1]
    h_s = -(p.m - blf * lam_ls) * (r + p.a)
    h_u = p_ll[1] + blf * lam_lls * (1 + p.a)
    h_m = p_ll[1]

    a_h: float | None = None
    if abs(p.m + r) < 1e-12:
        a_h = r
    elif abs(p.m - r) < 1e-12:
        a_h = -r

    q0_rr = (r, q1_ll[1])
    e_ll = zll.equilibrium
    e_r = zr.equilibrium
    dy = e_ll[1] - e_r[1]
    slant = abs(zll.lam_q)  # slope of the sides parallel to v_LL^s = v_R^s
    rhomboid = (
        e_ll,
        (p.a + dy / slant, e_ll[1]),
        e_r,
        (p.a - dy / slant, e_r[1]),
    )

    return Landmarks(
        p_LL=p_ll, p_L=p_l, p_R=p_r, q0_L=q0_l, q1_L=q1_l, q1_R=q1_r, q1_LL=q1_ll,
        q0_RR=q0_rr,
        x_r=x_r, x_s=x_s, x_u=x_u, h_r=h_r, h_s=h_s, h_u=h_u, h_M=h_m, a_H=a_h,
        equilibrium=(p.a, nullcline_f(p.a, p)),
        rhomboid=rhomboid,
    )


@dataclass(frozen=True)
class SlowManifoldSegment:
    """One straight piece of the slow manifold: base + r * direction.

    ``r_range`` may be unbounded above (math.inf); ``branch`` tells whether
    nearby fast dynamics contracts onto the segment or escapes from it.
    """

    zone: str
    base: tuple[float, float]
    direction: tuple[float, float]
    r_range: tuple[float, float]
    branch: str

    def point(self, r: float) -> tuple[float, float]:
        return (self.base[0] + r * self.direction[0], self.base[1] + r * self.direction[1])


@dataclass(frozen=True)
class SlowManifold:
    mu_LL: SlowManifoldSegment
    mu_L: SlowManifoldSegment
    mu_R: SlowManifoldSegment


def slow_manifold(p: Params) -> SlowManifold:
    """Segments of the slow manifold through the outer-zone equilibria.

    mu_LL runs along +v_LL_s from e_LL and reaches x = -1 at
    r = -(1+a)/lam_LL_s (the point q1_LL); mu_L and mu_R run along the
    negated slow eigenvectors of their zones, so that mu_L spans exactly
    q0_L..q1_L and mu_R starts from q1_R at r = (a-sqrt(eps))/lam_R_s.
    mu_LL and mu_R attract, mu_L repels.
    """
    r = p.sqrt_eps
    if p.k <= 2 * r:
        raise ValueError("slow manifold needs a real L spectrum: require k > 2 sqrt(eps)")
    zll, zl, zr = zone_data("LL", p), zone_data("L", p), zone_data("R", p)
    mu_ll = SlowManifoldSegment(
        zone="LL",
        base=zll.equilibrium,
        direction=(zll.lam_s, -p.eps),
        r_range=(-(1 + p.a) / zll.lam_s, math.inf),
        branch="attracting",
    )
    mu_l = SlowManifoldSegment(
        zone="L",
        base=zl.equilibrium,
        direction=(-zl.lam_s, p.eps),
        r_range=((r + p.a) / zl.lam_s, (1 + p.a) / zl.lam_s),
        branch="repelling",
    )
    mu_r = SlowManifoldSegment(
        zone="R",
        base=zr.equilibrium,
        direction=(-zr.lam_s, p.eps),
        r_range=((p.a - r) / zr.lam_s, math.inf),
        branch="attracting",
    )
    return SlowManifold(mu_LL=mu_ll, mu_L=mu_l, mu_R=mu_r)


@dataclass(frozen=True)
class EquilibriumInfo:
    point: tuple[float, float]
    zone: str | None
    kind: str
    trace: float | None
    delta: float | None


def equilibrium_stability(p: Params) -> EquilibriumInfo:
    """Classify the unique equilibrium (a, f(a)).

    det A = eps > 0 in every zone, so the type is decided by the trace and
    the discriminant alone.  When ``a`` falls exactly on a switching line
    the linearization is ambiguous and the kind is "non-generic".
    """
    pt = (p.a, nullcline_f(p.a, p))
    zs = zones_at(p.a, p)
    if len(zs) > 1:
        return EquilibriumInfo(pt, None, "non-generic", None, None)
    zd = zone_data(zs[0], p)
    if zd.trace == 0:
        kind = "center"
    else:
        shape = "node" if zd.delta >= 0 else "focus"
        kind = f"{'stable' if zd.trace < 0 else 'unstable'}-{shape}"
    return EquilibriumInfo(pt, zs[0], kind, zd.trace, zd.delta)
