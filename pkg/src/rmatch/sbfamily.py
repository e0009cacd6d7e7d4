"""Random symmetric doubling maps and the signed binary expansions they generate.

T_{alpha,0} and T_{alpha,1} act on [-1, 1] with slope 2 and intercepts in
{alpha, 0, -alpha}; they differ only where the middle branch ends.  A step
x -> 2x - s*alpha emits the digit s, so x = alpha * sum_n s_n / 2^n.
"""
from __future__ import annotations

import bisect
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from gmpy2 import mpq

from .density import DensityError, DensityResult, StepDensity, invariant_density
from .exactnum import format_scalar, to_decimal
from .linalg import KernelDimensionError
from .pwmaps import PiecewiseMap, affine_branch
from .randsys import RandomSystem

__all__ = [
    "AffineInAlpha",
    "DoublingParams",
    "MatchingInterval",
    "NoMatching",
    "ScanResult",
    "b_word",
    "digits",
    "doubling_density",
    "m_alpha",
    "make_system",
    "pi0_exact",
    "pi0_surface",
    "s_map",
    "s_orbit",
    "scan_matching_intervals",
    "surface_csv",
]

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class DoublingParams:
    alpha: Fraction
    p: Fraction = HALF

    def __post_init__(self):
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        object.__setattr__(self, "p", Fraction(self.p))
        if not 1 <= self.alpha <= 2:
            raise ValueError("alpha must lie in [1, 2]")
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")


def _params(alpha, p) -> DoublingParams:
    if isinstance(alpha, DoublingParams):
        return alpha
    return DoublingParams(Fraction(alpha), HALF if p is None else Fraction(p))


def doubling_maps(alpha) -> tuple[PiecewiseMap, PiecewiseMap]:
    a = Fraction(alpha)
    t0 = PiecewiseMap([-1, 1], [
        affine_branch(-1, (1 - a) / 2, True, True, 2, a),
        affine_branch((1 - a) / 2, HALF, False, True, 2, 0),
        affine_branch(HALF, 1, False, True, 2, -a),
    ], name="T0")
    t1 = PiecewiseMap([-1, 1], [
        affine_branch(-1, -HALF, True, False, 2, a),
        affine_branch(-HALF, (a - 1) / 2, True, False, 2, 0),
        affine_branch((a - 1) / 2, 1, True, True, 2, -a),
    ], name="T1")
    return t0, t1


def make_system(alpha, p=None) -> RandomSystem:
    """R_alpha with P(T0) = p and P(T1) = 1 - p."""
    prm = _params(alpha, p)
    t0, t1 = doubling_maps(prm.alpha)
    return RandomSystem([t0, t1], [prm.p, 1 - prm.p],
                        name=f"doubling alpha={format_scalar(prm.alpha)} p={format_scalar(prm.p)}")


def s_map(alpha) -> PiecewiseMap:
    """The deterministic symmetric doubling map S_alpha."""
    a = Fraction(alpha)
    return PiecewiseMap([-1, 1], [
        affine_branch(-1, -HALF, True, False, 2, a),
        affine_branch(-HALF, HALF, True, True, 2, 0),
        affine_branch(HALF, 1, False, True, 2, -a),
    ], name="S")


def _s_step(a: Fraction, x: Fraction) -> Fraction:
    if x < -HALF:
        return 2 * x + a
    if x <= HALF:
        return 2 * x
    return 2 * x - a


def s_orbit(alpha, n: int, x=1) -> list[Fraction]:
    """[x, S x, ..., S^n x]."""
    a = Fraction(alpha)
    out = [Fraction(x)]
    for _ in range(n):
        out.append(_s_step(a, out[-1]))
    return out


@dataclass(frozen=True)
class NoMatching:
    alpha: Fraction
    cycle: tuple | None      # periodic part of the orbit of 1, if found
    reason: str              # "cycle" or "cap"


def _orbit_fast(a, n: int):
    """S^n(1) in gmpy2 rationals."""
    half = mpq(1, 2)
    x = mpq(1)
    for _ in range(n):
        x = 2 * x + a if x < -half else (2 * x if x <= half else 2 * x - a)
    return x


def m_alpha(alpha, cap: int = 24) -> int | NoMatching:
    """1 + first n with 1/2 < S^n(1) < alpha - 1/2, strict on both sides."""
    a = mpq(Fraction(alpha))
    half = mpq(1, 2)
    x = mpq(1)
    seen: dict = {}
    for n in range(cap):
        if half < x < a - half:
            return n + 1
        if x in seen:
            orbit = list(seen)
            return NoMatching(Fraction(alpha), tuple(_to_fraction(q) for q in orbit[seen[x]:]), "cycle")
        seen[x] = n
        x = 2 * x + a if x < -half else (2 * x if x <= half else 2 * x - a)
    return NoMatching(Fraction(alpha), None, "cap")


def b_word(alpha, k: int) -> tuple[int, ...]:
    """Letters 1 where S^i(1) > 1/2 and 0 elsewhere, for i < k."""
    return tuple(1 if x > HALF else 0 for x in s_orbit(alpha, k - 1)[:k])


def digits(alpha, omega: Sequence[int], x, n: int) -> tuple[list[int], Fraction]:
    """First n signed digits of x along the map sequence omega, and the remainder.

    x = alpha * sum_{i<=n} s_i / 2^i + remainder / 2^n.
    """
    maps = doubling_maps(alpha)
    a = Fraction(alpha)
    x = Fraction(x)
    if not -1 <= x <= 1:
        raise ValueError("x must lie in [-1, 1]")
    if len(omega) < n:
        raise ValueError("omega shorter than the number of digits requested")
    out = []
    for j in omega[:n]:
        b = maps[j].branch(x)
        out.append(int(-b.form.d / a))
        x = b.form(x)
    return out, x


def pi0_exact(alpha, p, density: StepDensity) -> Fraction:
    """Stationary frequency of the digit 0.

    A step emits 0 on the middle branch: ((1-alpha)/2, 1/2] for T0 and
    [-1/2, (alpha-1)/2) for T1.
    """
    a, p = Fraction(alpha), Fraction(p)
    lo, hi = (1 - a) / 2, (a - 1) / 2
    return p * density.integrate(lo, HALF) + (1 - p) * density.integrate(-HALF, hi)


def doubling_density(alpha, p, depth_cap: int = 24, closure_cap: int = 4000) -> DensityResult:
    return invariant_density(make_system(alpha, p), "auto", depth_cap, closure_cap)


# -- symbolic scan of the orbit of 1 ------------------------------------------------
@dataclass(frozen=True)
class AffineInAlpha:
    """The point m + n * alpha."""

    m: Fraction
    n: Fraction

    def at(self, alpha) -> Fraction:
        return self.m + self.n * Fraction(alpha)

    def shift(self, s: int) -> "AffineInAlpha":
        """x -> 2x - s*alpha."""
        return AffineInAlpha(2 * self.m, 2 * self.n - s)

    def __str__(self):
        return f"{format_scalar(self.m)}+({format_scalar(self.n)})*alpha"


@dataclass(slots=True)
class MatchingInterval:
    left: Fraction
    right: Fraction
    left_closed: bool
    right_closed: bool
    M: int
    word: tuple          # digits of the orbit of 1 before entering the matching window
    Y: AffineInAlpha     # S^{M_alpha}(1)

    def contains(self, alpha) -> bool:
        a = Fraction(alpha)
        if self.left < a < self.right:
            return True
        return (a == self.left and self.left_closed) or (a == self.right and self.right_closed)

    def interior_samples(self, k: int = 3) -> list[Fraction]:
        return [self.left + (self.right - self.left) * Fraction(i, k + 1) for i in range(1, k + 1)]


@dataclass
class ScanResult:
    intervals: list
    unresolved: list = field(default_factory=list)   # open cells (lo, hi) left at the cap
    points: list = field(default_factory=list)       # (alpha, M or NoMatching) at split points

    def resolved_fraction(self, grid: Iterable, cap: int = 24) -> float:
        grid = list(grid)
        ivs = sorted(self.intervals, key=lambda iv: iv.left)
        lefts = [iv.left for iv in ivs]
        hit = 0
        for a in grid:
            a = Fraction(a)
            i = bisect.bisect_right(lefts, a)
            if any(iv.contains(a) for iv in ivs[max(i - 2, 0):i]):
                hit += 1
            elif isinstance(r := m_alpha(a, cap), int) or r.reason == "cycle":
                hit += 1
        return hit / len(grid)

    def _covers_endpoint(self, a) -> bool:
        if not hasattr(self, "_closed_ends"):
            self._closed_ends = {iv.left for iv in self.intervals if iv.left_closed}
            self._closed_ends |= {iv.right for iv in self.intervals if iv.right_closed}
        return a in self._closed_ends

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("left,right,left_closed,right_closed,status,M,Y\n")
        rows = [(iv.left, iv.right, iv.left_closed, iv.right_closed, "matching", iv.M, str(iv.Y))
                for iv in self.intervals]
        rows += [(lo, hi, False, False, "unresolved", "", "") for lo, hi in self.unresolved]
        rows += [(a, a, True, True, "markov" if isinstance(r, NoMatching) and r.reason == "cycle"
                  else ("unresolved" if isinstance(r, NoMatching) else "matching"),
                  r if isinstance(r, int) else "", "") for a, r in self.points
                 if not self._covers_endpoint(a)]
        rows.sort(key=lambda t: (t[0], t[1]))
        for lo, hi, lc, rc, st, M, Y in rows:
            out.write(f"{format_scalar(lo)},{format_scalar(hi)},{int(lc)},{int(rc)},{st},{M},{Y}\n")
        return out.getvalue()


def _to_fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


def scan_matching_intervals(lo=1, hi=2, cap: int = 24) -> ScanResult:
    """Split [lo, hi] into parameter cells on which the orbit of 1 follows one branch word.

    Every comparison of S^k(1) = m + n*alpha with 1/2, -1/2 or alpha - 1/2
    is linear in alpha, so the cells have rational endpoints.  Cells where
    the orbit enters (1/2, alpha - 1/2) become matching intervals with
    M = k + 1 <= cap.  Since m = 2^k, no symbolic cycle can occur inside
    an open cell; periodic parameters show up only at split points.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    result = ScanResult([])
    half = mpq(1, 2)
    points = {mpq(lo), mpq(hi)}
    stack = [(mpq(lo), mpq(hi), 1, 0, 0, ())]
    while stack:
        a, b, m, n, k, word = stack.pop()
        # roots of m + n*alpha = +-1/2 and of m + (n-1)*alpha = -1/2
        roots = []
        for num, den in ((half - m, n), (-half - m, n), (-half - m, n - 1)):
            if den:
                r = num / den
                if a < r < b:
                    roots.append(r)
        if roots:
            pts = [a, *sorted(set(roots)), b]
            points.update(pts[1:-1])
            for u, v in zip(pts, pts[1:]):
                stack.append((u, v, m, n, k, word))
            continue
        mid = (a + b) / 2
        xv = m + n * mid
        if half < xv < mid - half:
            result.intervals.append(MatchingInterval(
                _to_fraction(a), _to_fraction(b), False, False, k + 1, word,
                AffineInAlpha(Fraction(2 * m), Fraction(2 * n - 1))))
            continue
        if k + 1 >= cap:
            result.unresolved.append((_to_fraction(a), _to_fraction(b)))
            continue
        s = -1 if xv < -half else (0 if xv <= half else 1)
        stack.append((a, b, 2 * m, 2 * n - s, k + 1, word + (s,)))
    result.intervals.sort(key=lambda iv: iv.left)
    result.unresolved.sort()
    ends: dict = {}
    for iv in result.intervals:
        ends.setdefault(iv.left, []).append((iv, "left_closed"))
        ends.setdefault(iv.right, []).append((iv, "right_closed"))
    for pt in sorted(ends):
        r = m_alpha(pt, cap)
        result.points.append((pt, r))
        if not isinstance(r, int):
            continue
        y = _orbit_fast(mpq(pt), r)
        for iv, attr in ends[pt]:
            if iv.M == r and mpq(iv.Y.at(pt)) == y:
                setattr(iv, attr, True)
    return result


# -- frequency surface -----------------------------------------------------------------
@dataclass
class SurfacePoint:
    alpha: Fraction
    p: Fraction
    pi0: Fraction | None
    status: str
    M: int | None


def pi0_surface(alphas: Iterable, ps: Iterable, depth_cap: int = 24,
                closure_cap: int = 4000) -> list[SurfacePoint]:
    rows = []
    ps = [Fraction(p) for p in ps]
    for a in alphas:
        a = Fraction(a)
        ma = m_alpha(a, depth_cap)
        M = ma if isinstance(ma, int) else None
        for p in ps:
            try:
                res = doubling_density(a, p, depth_cap, closure_cap)
            except (DensityError, KernelDimensionError) as exc:
                rows.append(SurfacePoint(a, p, None, f"failed: {exc}", M))
                continue
            status = "matching" if all(r == "matching" for r in res.routes) else "markov"
            rows.append(SurfacePoint(a, p, pi0_exact(a, p, res.density), status, M))
    return rows


def surface_csv(rows: Sequence[SurfacePoint]) -> str:
    out = io.StringIO()
    out.write("alpha,p,pi0_exact,pi0_decimal,status,M\n")
    for r in sorted(rows, key=lambda r: (r.alpha, r.p)):
        exact = "" if r.pi0 is None else format_scalar(r.pi0)
        dec = "" if r.pi0 is None else to_decimal(r.pi0)
        out.write(f"{format_scalar(r.alpha)},{format_scalar(r.p)},{exact},{dec},"
                  f"{r.status},{'' if r.M is None else r.M}\n")
    return out.getvalue()
