"""Two further families with random matching.

Random alpha-continued fractions: the Nakada map T0(x) = 1/|x| - floor(1/|x| + 1 - alpha)
and the Ito-Tanaka map T1(x) = 1/x - floor(1/x + 1 - alpha) on [alpha - 1, alpha],
both fixing 0.  Random golden-mean beta-transformations: two slope-beta maps on
[-beta, beta] with intercepts in {alpha, 0, -alpha}.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor as ifloor
from typing import Sequence

import numpy as np

from .density import DensityResult, invariant_density
from .exactnum import QuadExt, Scalar, qsqrt, sign
from .matching import (MatchingCertificate, OrbitTree, alternative_stopping, find_matching,
                       strong_certificate_exists)
from .pwmaps import Branch, LazyPiecewiseMap, Moebius, PiecewiseMap, affine_branch
from .randsys import RandomSystem

__all__ = [
    "BETA",
    "BetaParams",
    "CFParams",
    "beta_certificates",
    "beta_density",
    "beta_orbit_nodes",
    "beta_system",
    "cf_alternative_certificate",
    "cf_certificates",
    "cf_float_map",
    "cf_m3_certificate",
    "cf_negative_certificate",
    "cf_orbit_nodes_m3",
    "cf_orbit_nodes_m4",
    "cf_pre_matching_points",
    "cf_system",
    "check_nodes",
    "find_jn",
    "i_nk",
    "jn_interval",
    "positive_critical",
]

BETA = QuadExt(Fraction(1, 2), Fraction(1, 2), 5)


# -- continued fractions -----------------------------------------------------------------
@dataclass(frozen=True)
class CFParams:
    alpha: Fraction
    p0: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        object.__setattr__(self, "p0", Fraction(self.p0))
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.p0 < 1:
            raise ValueError("p0 must lie in (0, 1)")


def _cf_digit(t: Fraction, side: str, increasing_t: bool) -> int:
    """floor of t, as seen from ``side`` of x where t moves with x as given."""
    if side == "at":
        return ifloor(t)
    # t' just above t when x' moves in the direction that increases t
    above = (side == "right") == increasing_t
    return ifloor(t) if above else ceil(t) - 1


def _cf_locate(alpha: Fraction, nakada: bool):
    lo, hi = alpha - 1, alpha

    def locate(x: Fraction, side: str) -> Branch:
        if x > 0:
            # 1/x - n on (1/(alpha+n), 1/(alpha+n-1)]; 1/x falls as x grows
            n = _cf_digit(1 / x + 1 - alpha, side, False)
            left = 1 / (alpha + n)
            right = min(hi, 1 / (alpha + n - 1))
            return Branch(left, right, False, True, Moebius(-n, 1, 1, 0))
        if nakada:
            # -1/x - n on [-1/(alpha+n-1), -1/(alpha+n)); -1/x grows with x
            n = _cf_digit(-1 / x + 1 - alpha, side, True)
            left = max(lo, -1 / (alpha + n - 1))
            return Branch(left, -1 / (alpha + n), True, False, Moebius(-n, -1, 1, 0))
        # 1/x + n on (1/(alpha-n), 1/(alpha-n-1)]; 1/x falls as x grows
        n = -_cf_digit(1 / x + 1 - alpha, side, False)
        left = 1 / (alpha - n)
        closed = left <= lo
        return Branch(max(lo, left), 1 / (alpha - n - 1), closed, True, Moebius(n, 1, 1, 0))

    return locate


def cf_float_map(alpha: float, nakada: bool):
    def f(x: np.ndarray):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        lab = np.zeros(x.shape, dtype=np.int64)
        nz = x != 0
        inv = 1.0 / (np.abs(x[nz]) if nakada else x[nz])
        n = np.floor(inv + 1.0 - alpha)
        out[nz] = inv - n
        lab[nz] = n.astype(np.int64)
        return out, lab
    return f


def cf_system(alpha, p0=Fraction(1, 2)) -> RandomSystem:
    """T0 (Nakada) with probability p0 and T1 (Ito-Tanaka) with 1 - p0."""
    prm = alpha if isinstance(alpha, CFParams) else CFParams(alpha, p0)
    a = prm.alpha
    maps = [LazyPiecewiseMap([a - 1, a], _cf_locate(a, nak), cf_float_map(float(a), nak),
                             name=nm, singular=[Fraction(0)])
            for nak, nm in ((True, "Nakada"), (False, "Ito-Tanaka"))]
    return RandomSystem(maps, [prm.p0, 1 - prm.p0], name=f"cf alpha={a}")


def jn_interval(n: int) -> tuple[Scalar, Scalar]:
    """(l_n, r_n) with l_n = (n+1-sqrt(n^2-2n+5))/2 and r_n = sqrt((n-2)/n)."""
    if n < 4:
        raise ValueError("n must be at least 4")
    left = Fraction(n + 1, 2) - qsqrt(n * n - 2 * n + 5) / 2
    right = qsqrt(Fraction(n - 2, n))
    return left, right


def i_nk(n: int, k: int) -> Scalar:
    if n < 4 or not 2 <= k <= n:
        raise ValueError("need n >= 4 and 2 <= k <= n")
    den = 2 * (n - 1)
    return (Fraction(-4 + 2 * n - k * n + k) + qsqrt(k * k * n * n - 2 * k * k * n + k * k + 4)) / den


def find_jn(alpha, n_cap: int = 200) -> tuple[int, int] | None:
    """(n, k) with alpha in J_n and alpha in (i_{n,k+1}, i_{n,k}], compared exactly."""
    a = Fraction(alpha)
    for n in range(4, n_cap + 1):
        left, right = jn_interval(n)
        if sign(a - left) > 0 and sign(right - a) > 0:
            for k in range(2, n):
                if sign(a - i_nk(n, k + 1)) > 0 and sign(i_nk(n, k) - a) >= 0:
                    return n, k
            return n, -1
    return None


def positive_critical(alpha, order: int = 0) -> Fraction:
    """The (order+1)-th largest critical point 1/(alpha+n) inside (0, alpha)."""
    a = Fraction(alpha)
    n = 1
    while 1 / (a + n) >= a:
        n += 1
    return 1 / (a + n + order)


def _cf_y(a: Fraction, n: int, k: int) -> Fraction:
    return (1 - 2 * k + k * n - a * (k * n - k + 1)) / (a * (n - 1) + 2 - n)


def cf_orbit_nodes_m4(alpha, n: int, k: int) -> list[tuple[str, str, Fraction]]:
    """Orbit points of alpha and alpha - 1 for alpha in J_n with index k.

    Rows are (root, word, value); '*' in a word stands for either map.
    """
    a = Fraction(alpha)
    A = (a * (n - 1) + 2 - n) / (1 - a)
    Y = _cf_y(a, n, k)
    return [
        ("alpha", "", a),
        ("alpha", "*", (1 - a) / a),
        ("alpha", "**", A),
        ("alpha", "***", Y),
        ("alpha-1", "", a - 1),
        ("alpha-1", "0", A),
        ("alpha-1", "0*", Y),
        ("alpha-1", "1", (n * (a - 1) + 1) / (a - 1)),
        ("alpha-1", "1*", (a * (n - 1) + 2 - n) / (-1 - n * (a - 1))),
        ("alpha-1", "1**", Y),
    ]


def cf_pre_matching_points(alpha, n: int, k: int) -> list[Fraction]:
    """Distinct orbit points of alpha and alpha - 1 strictly before matching.

    Endpoints of the domain and the matching point itself are excluded, so
    what remains are the interior abscissae where the density may jump.
    """
    a = Fraction(alpha)
    Y = _cf_y(a, n, k)
    pts = {v for _, _, v in cf_orbit_nodes_m4(a, n, k) if v != Y and a - 1 < v < a}
    return sorted(pts)


def cf_orbit_nodes_m3(alpha) -> list[tuple[str, str, Fraction]]:
    """Orbit points of alpha and alpha - 1 for alpha in ((sqrt 10 - 2)/2, 2 - sqrt 2)."""
    a = Fraction(alpha)
    C = (5 * a - 3) / (1 - 2 * a)
    K = (4 - 7 * a) / (1 - 2 * a)
    return [
        ("alpha", "", a),
        ("alpha", "*", (1 - 2 * a) / a),
        ("alpha", "*0", C),
        ("alpha", "*1", K),
        ("alpha-1", "", a - 1),
        ("alpha-1", "0", (1 - 2 * a) / (a - 1)),
        ("alpha-1", "0*", C),
        ("alpha-1", "1", (2 * a - 1) / (a - 1)),
        ("alpha-1", "10", C),
        ("alpha-1", "11", K),
    ]


def _expand_word(word: str, r: int) -> list[tuple[int, ...]]:
    out = [()]
    for ch in word:
        letters = range(r) if ch == "*" else (int(ch),)
        out = [w + (j,) for w in out for j in letters]
    return out


def check_nodes(system: RandomSystem, roots: dict, nodes: Sequence) -> list[tuple]:
    """Compare each (root, word, value) row with the exact orbit; returns the mismatches.

    ``roots`` maps a root label to (point, side).
    """
    trees = {name: OrbitTree(system, pt, side) for name, (pt, side) in roots.items()}
    bad = []
    for root, word, value in nodes:
        for w in _expand_word(word, system.size):
            got = trees[root].node(w)[0]
            if sign(got - value) != 0:
                bad.append((root, w, value, got))
    return bad


def in_m3_regime(alpha) -> bool:
    a = Fraction(alpha)
    lo = qsqrt(10) / 2 - 1
    hi = 2 - qsqrt(2)
    return sign(a - lo) > 0 and sign(hi - a) > 0


@dataclass
class CFReport:
    n: int
    k: int
    c: Fraction
    certificate: MatchingCertificate
    predicted_Y: tuple
    predicted_balance: Fraction


def cf_certificates(alpha, p0, negative: Sequence[Fraction] = ()) -> list[CFReport]:
    """M = 4 strong certificates at the largest positive critical point and at given negative ones.

    For c < 0 the first step carries a sign, so only |balance| follows the
    closed form c^2 (alpha(n-1) + 2 - n)^2.
    """
    a = Fraction(alpha)
    loc = find_jn(a)
    if loc is None or loc[1] < 0:
        raise ValueError("alpha is not covered by any J_n cell up to the search cap")
    n, k = loc
    system = cf_system(a, p0)
    Y = _cf_y(a, n, k)
    out = []
    for c in (positive_critical(a), *map(Fraction, negative)):
        cert = find_matching(system, c, M_max=4)
        pred_Y = (Y,) if c > 0 else tuple(sorted({Y, 1 - a}))
        bal = c * c * (a * (n - 1) + 2 - n) ** 2
        out.append(CFReport(n, k, c, cert, pred_Y, bal))
    return out


def cf_m3_certificate(alpha, p0) -> tuple[MatchingCertificate, dict]:
    """First-entry certificate at the largest positive critical point c with M = 3 and the two-point Y.

    Returns the certificate and the closed-form sums for the point
    (4 - 7 alpha)/(1 - 2 alpha): minus side -p1^2 c^2 (2 alpha - 1)^2,
    plus side -p1 c^2 (2 alpha - 1)^2.
    """
    a = Fraction(alpha)
    if not in_m3_regime(a):
        raise ValueError("alpha outside ((sqrt 10 - 2)/2, 2 - sqrt 2)")
    p1 = 1 - Fraction(p0)
    system = cf_system(a, p0)
    c = positive_critical(a)
    Y = {(5 * a - 3) / (1 - 2 * a), (4 - 7 * a) / (1 - 2 * a)}
    stub = MatchingCertificate(c, 3, tuple(Y), None, None, {}, False)
    cert = alternative_stopping(system, stub, Y, M=3)
    K = (4 - 7 * a) / (1 - 2 * a)
    pred = {K: (-p1 * p1 * c * c * (2 * a - 1) ** 2, -p1 * c * c * (2 * a - 1) ** 2)}
    return cert, pred


def cf_alternative_certificate(alpha, p0) -> MatchingCertificate:
    """Two-point Y at the largest positive critical point, with mixed stop depths."""
    a = Fraction(alpha)
    n, k = find_jn(a)
    system = cf_system(a, p0)
    c = positive_critical(a)
    A = (a * (n - 1) + 2 - n) / (1 - a)
    B = _cf_y(a, n, k)
    stub = MatchingCertificate(c, 4, (A, B), None, None, {}, False)
    # the first step from c is common to both maps, hence the leading '*'
    stops = {"minus": {A: ["*0"], B: ["*1**"]}, "plus": {A: ["**0"], B: ["**1*"]}}
    return alternative_stopping(system, stub, {A, B}, M=4, stops=stops)


def cf_negative_certificate(alpha, p0, c) -> MatchingCertificate:
    """Certificate at a negative critical point with Y = {y, 1 - alpha}.

    At c = -1/(alpha+n) only T0 jumps and T1 sends both limits to 1 - alpha;
    at c = 1/(alpha-n) the roles of the maps swap.
    """
    a, c = Fraction(alpha), Fraction(c)
    n, k = find_jn(a)
    system = cf_system(a, p0)
    y = _cf_y(a, n, k)
    t0_jumps = system.maps[0].is_critical(c)
    J, L = ("0", "1") if t0_jumps else ("1", "0")
    if t0_jumps:
        minus, plus = [J + "***"], [J + "0*", J + "1**"]
    else:
        minus, plus = [J + "0*", J + "1**"], [J + "***"]
    stops = {"minus": {1 - a: [L], y: minus}, "plus": {1 - a: [L], y: plus}}
    stub = MatchingCertificate(c, 4, (y, 1 - a), None, None, {}, False)
    return alternative_stopping(system, stub, {y, 1 - a}, M=4, stops=stops)


def no_strong_below(alpha, p0, c, K: int) -> bool:
    """True when no strong certificate with stops at depth <= K exists for c."""
    return not strong_certificate_exists(cf_system(alpha, p0), c, K)[0]


# -- golden-mean beta-transformations ----------------------------------------------------
@dataclass(frozen=True)
class BetaParams:
    alpha: Scalar
    p0: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "p0", Fraction(self.p0))
        lo = (3 * BETA - 2) / 2
        hi = 4 * BETA - 5
        if not (sign(self.alpha - lo) > 0 and sign(hi - self.alpha) > 0):
            raise ValueError("alpha must lie in ((3 beta - 2)/2, 4 beta - 5)")
        if not 0 < self.p0 < 1:
            raise ValueError("p0 must lie in (0, 1)")


def beta_system(alpha, p0=Fraction(1, 2)) -> RandomSystem:
    """Boundary points are owned by the middle branch of each map."""
    prm = alpha if isinstance(alpha, BetaParams) else BetaParams(alpha, p0)
    a, b = prm.alpha, BETA
    ib = 1 / b
    t0 = PiecewiseMap([-b, b], [
        affine_branch(-b, -ib, True, False, b, a),
        affine_branch(-ib, 1, True, True, b, 0),
        affine_branch(1, b, False, True, b, -a),
    ], name="B0")
    t1 = PiecewiseMap([-b, b], [
        affine_branch(-b, -1, True, False, b, a),
        affine_branch(-1, ib, True, True, b, 0),
        affine_branch(ib, b, False, True, b, -a),
    ], name="B1")
    return RandomSystem([t0, t1], [prm.p0, 1 - prm.p0], name="golden beta")


def beta_orbit_nodes(alpha) -> list[tuple[str, str, Scalar]]:
    """Orbit of 1 - alpha with the two coincidences written both ways."""
    a, b = alpha, BETA
    u = b - a
    v = 1 - a
    return [
        ("1-alpha", "", v),
        ("1-alpha", "*", b * v),
        ("1-alpha", "*0", b * u),
        ("1-alpha", "*0*", b ** 2 * u),
        ("1-alpha", "*0**", b ** 3 * u),
        ("1-alpha", "*0**0", b ** 4 * u),
        ("1-alpha", "*0**0*", b ** 5 * u - a),
        ("1-alpha", "*0**1", b ** 4 * u - a),
        ("1-alpha", "*0**1*", b ** 5 * u - b * a),
        ("1-alpha", "*1", b ** 2 * v),
        ("1-alpha", "*1*", b ** 3 * v + a),
        ("1-alpha", "*1**", b ** 4 * v + b * a),
        ("1-alpha", "*1**1", b ** 5 * v + b ** 2 * a),
        ("1-alpha", "*1**1*", b ** 6 * v + b ** 3 * a + a),
        ("1-alpha", "*1**1*", b ** 5 * u - b * a),
        ("1-alpha", "*1**1*", b ** 6 - 3 * b ** 3 * a),
        ("1-alpha", "*1**0", b ** 5 * v + b ** 2 * a + a),
        ("1-alpha", "*1**0*", b ** 6 * v + b ** 3 * a + b * a),
        ("1-alpha", "*1**0*", b ** 5 * u - a),
    ]


@dataclass
class BetaReport:
    c: Scalar
    certificate: MatchingCertificate
    predicted_Y: tuple
    predicted_balance: dict


def beta_certificates(alpha, p0) -> list[BetaReport]:
    """Certificates at c = 1 (M = 3) and c = 1/beta (M = 7)."""
    system = beta_system(alpha, p0)
    a, b, p0 = alpha, BETA, Fraction(p0)
    u = b - a
    cert1 = find_matching(system, Fraction(1), M_max=3)
    y1 = b ** 2 * u
    r1 = BetaReport(Fraction(1), cert1, (y1,), {})
    ya, yb = b ** 5 * u - a, b ** 5 * u - b * a
    cert2 = find_matching(system, 1 / b, M_max=7)
    r2 = BetaReport(1 / b, cert2, (ya, yb), {ya: p0 / b ** 7})
    return [r1, r2]


def beta_density(alpha, p0, depth_cap: int = 24) -> DensityResult:
    return invariant_density(beta_system(alpha, p0), "auto", depth_cap)
