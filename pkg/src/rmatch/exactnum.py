"""Exact scalars: rationals and elements of real quadratic fields Q(sqrt d).

Rationals are plain :class:`fractions.Fraction` values.  Elements with a
nonzero irrational part are :class:`QuadExt`; every arithmetic result whose
irrational part vanishes is normalized back to a ``Fraction``, so equality is
always componentwise and hashing is consistent.
"""
from __future__ import annotations

import decimal
import enum
import functools
import math
import re
from fractions import Fraction
from typing import Union

__all__ = [
    "FieldMismatchError",
    "Ordering",
    "QuadExt",
    "Scalar",
    "OpenInterval",
    "as_scalar",
    "cmp",
    "field_of",
    "floor",
    "format_scalar",
    "is_squarefree",
    "parse_scalar",
    "qsqrt",
    "quad",
    "sign",
    "sqrt_contains",
    "to_decimal",
    "to_float",
]


class FieldMismatchError(ValueError):
    """Raised when values from two different quadratic fields are combined."""


class Ordering(enum.IntEnum):
    LT = -1
    EQ = 0
    GT = 1


@functools.lru_cache(maxsize=None)
def is_squarefree(n: int) -> bool:
    if n < 1:
        return False
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


def _split_square(n: int) -> tuple[int, int]:
    """Return (s, d) with n = s*s*d and d square-free."""
    s, d, k = 1, n, 2
    while k * k <= d:
        while d % (k * k) == 0:
            d //= k * k
            s *= k
        k += 1
    return s, d


def _coerce_rational(x) -> Fraction | None:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return None


class QuadExt:
    """a + b*sqrt(d) with rational a, b, b != 0 and square-free d >= 2.

    Construct through :func:`quad` to get automatic normalization to
    ``Fraction`` when ``b == 0``.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b, d: int):
        a, b = Fraction(a), Fraction(b)
        if b == 0:
            raise ValueError("irrational part must be nonzero; use quad()")
        if not is_squarefree(d) or d < 2:
            raise ValueError(f"d={d} must be square-free and >= 2")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):
        raise AttributeError("QuadExt is immutable")

    # -- helpers -----------------------------------------------------------
    def _parts(self, other):
        """Return (a, b) of ``other`` in this field, or None if foreign type."""
        r = _coerce_rational(other)
        if r is not None:
            return r, Fraction(0)
        if isinstance(other, QuadExt):
            if other.d != self.d:
                raise FieldMismatchError(f"Q(sqrt {self.d}) vs Q(sqrt {other.d})")
            return other.a, other.b
        return None

    def conjugate(self) -> "QuadExt":
        return QuadExt(self.a, -self.b, self.d)

    def norm(self) -> Fraction:
        return self.a * self.a - self.d * self.b * self.b

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        p = self._parts(other)
        if p is None:
            return NotImplemented
        return quad(self.a + p[0], self.b + p[1], self.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadExt(-self.a, -self.b, self.d)

    def __pos__(self):
        return self

    def __sub__(self, other):
        p = self._parts(other)
        if p is None:
            return NotImplemented
        return quad(self.a - p[0], self.b - p[1], self.d)

    def __rsub__(self, other):
        p = self._parts(other)
        if p is None:
            return NotImplemented
        return quad(p[0] - self.a, p[1] - self.b, self.d)

    def __mul__(self, other):
        p = self._parts(other)
        if p is None:
            return NotImplemented
        c, e = p
        return quad(self.a * c + self.d * self.b * e, self.a * e + self.b * c, self.d)

    __rmul__ = __mul__

    def _inverse(self):
        n = self.norm()  # nonzero because d is not a square
        return QuadExt(self.a / n, -self.b / n, self.d)

    def __truediv__(self, other):
        p = self._parts(other)
        if p is None:
            return NotImplemented
        c, e = p
        if e == 0:
            if c == 0:
                raise ZeroDivisionError("division by zero")
            return QuadExt(self.a / c, self.b / c, self.d)
        return self * QuadExt(c, e, self.d)._inverse()

    def __rtruediv__(self, other):
        p = self._parts(other)
        if p is None:
            return NotImplemented
        return quad(p[0], p[1], self.d) * self._inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return (1 / self) ** (-n)
        result: Scalar = Fraction(1)
        base: Scalar = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- comparison --------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, QuadExt):
            return (self.a, self.b, self.d) == (other.a, other.b, other.d)
        if isinstance(other, (int, Fraction)):
            return False
        return NotImplemented

    def __hash__(self):
        return hash(("QuadExt", self.a, self.b, self.d))

    def _cmp(self, other) -> int:
        p = self._parts(other)
        if p is None:
            raise TypeError(f"cannot compare QuadExt with {type(other).__name__}")
        return _sign_parts(self.a - p[0], self.b - p[1], self.d)

    def __lt__(self, other):
        return self._cmp(other) < 0 if self._parts(other) is not None else NotImplemented

    def __le__(self, other):
        return self._cmp(other) <= 0 if self._parts(other) is not None else NotImplemented

    def __gt__(self, other):
        return self._cmp(other) > 0 if self._parts(other) is not None else NotImplemented

    def __ge__(self, other):
        return self._cmp(other) >= 0 if self._parts(other) is not None else NotImplemented

    def __abs__(self):
        return -self if self._cmp(0) < 0 else self

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def __repr__(self):
        return f"QuadExt({self.a}, {self.b}, {self.d})"

    def __str__(self):
        return format_scalar(self)


Scalar = Union[Fraction, QuadExt]


def _sign_rational(x: Fraction) -> int:
    return (x > 0) - (x < 0)


def _sign_parts(a: Fraction, b: Fraction, d: int) -> int:
    """Sign of a + b*sqrt(d) using only rational (integer) comparisons."""
    sa, sb = _sign_rational(a), _sign_rational(b)
    if sb == 0:
        return sa
    if sa == 0 or sa == sb:
        return sb
    # opposite signs: the larger magnitude wins; a*a == b*b*d is impossible
    return sa if a * a > b * b * d else sb


def quad(a, b, d: int) -> Scalar:
    """Build a + b*sqrt(d), returning a Fraction when b == 0."""
    a, b = Fraction(a), Fraction(b)
    if b == 0:
        return a
    return QuadExt(a, b, d)


def qsqrt(r) -> Scalar:
    """Exact square root of a nonnegative rational, as Fraction or QuadExt."""
    r = Fraction(r)
    if r < 0:
        raise ValueError("square root of a negative rational")
    s, d = _split_square(r.numerator * r.denominator)
    coeff = Fraction(s, r.denominator)
    return coeff if d == 1 else QuadExt(0, coeff, d)


def as_scalar(x) -> Scalar:
    if isinstance(x, (Fraction, QuadExt)):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_scalar(x)
    raise TypeError(f"not an exact scalar: {x!r}")


def field_of(*xs) -> int | None:
    """Common field discriminant of the arguments (None for all-rational)."""
    d = None
    for x in xs:
        if isinstance(x, QuadExt):
            if d is None:
                d = x.d
            elif d != x.d:
                raise FieldMismatchError(f"Q(sqrt {d}) vs Q(sqrt {x.d})")
    return d


def sign(x: Scalar) -> int:
    if isinstance(x, QuadExt):
        return _sign_parts(x.a, x.b, x.d)
    return _sign_rational(Fraction(x))


def cmp(x: Scalar, y: Scalar) -> Ordering:
    field_of(x, y)
    return Ordering(sign(x - y))


def floor(x: Scalar) -> int:
    """Exact floor; a float estimate is corrected by exact comparisons."""
    if not isinstance(x, QuadExt):
        return math.floor(Fraction(x))
    n = math.floor(float(x))
    while sign(x - n) < 0:
        n -= 1
    while sign(x - (n + 1)) >= 0:
        n += 1
    return n


def to_float(x: Scalar) -> float:
    return float(x)


def to_decimal(x: Scalar, digits: int = 20) -> str:
    """Decimal text with ``digits`` significant digits."""
    ctx = decimal.Context(prec=digits + 10)
    if isinstance(x, QuadExt):
        val = ctx.divide(decimal.Decimal(x.a.numerator), decimal.Decimal(x.a.denominator))
        root = ctx.sqrt(decimal.Decimal(x.d))
        b = ctx.divide(decimal.Decimal(x.b.numerator), decimal.Decimal(x.b.denominator))
        val = ctx.add(val, ctx.multiply(b, root))
    else:
        x = Fraction(x)
        val = ctx.divide(decimal.Decimal(x.numerator), decimal.Decimal(x.denominator))
    out = decimal.Context(prec=digits).plus(val)
    return format(out, "g") if out != 0 else "0"


def _format_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def format_scalar(x: Scalar) -> str:
    """Canonical text: ``p/q`` or ``(p/q)+(r/s)*sqrt(d)``."""
    if isinstance(x, QuadExt):
        return f"({_format_rational(x.a)})+({_format_rational(x.b)})*sqrt({x.d})"
    return _format_rational(Fraction(x))


_RAT = r"-?\d+(?:/\d+)?"
_QUAD_RE = re.compile(rf"^\(({_RAT})\)\+\(({_RAT})\)\*sqrt\((\d+)\)$")
_RAT_RE = re.compile(rf"^{_RAT}$")


def parse_scalar(text: str) -> Scalar:
    """Inverse of :func:`format_scalar`; plain integers are accepted too."""
    s = text.strip().replace(" ", "")
    if _RAT_RE.match(s):
        return Fraction(s)
    m = _QUAD_RE.match(s)
    if m:
        return quad(Fraction(m.group(1)), Fraction(m.group(2)), int(m.group(3)))
    raise ValueError(f"not a canonical scalar: {text!r}")


def _sign_diff_any(x: Scalar, y: Scalar) -> int:
    """Sign of x - y where x and y may live in different quadratic fields."""
    if not (isinstance(x, QuadExt) and isinstance(y, QuadExt)) or x.d == y.d:
        return sign(x - y)
    # x - y = u - v with u = (x.a - y.a) + x.b*sqrt(x.d) and v = y.b*sqrt(y.d)
    u = quad(x.a - y.a, x.b, x.d)
    v_sign = _sign_rational(y.b)
    u_sign = sign(u)
    if u_sign != v_sign:
        return (u_sign > v_sign) - (u_sign < v_sign)
    if u_sign == 0:
        return 0
    mag = sign(u * u - y.b * y.b * y.d)
    return mag if u_sign > 0 else -mag


class OpenInterval:
    """Open interval (lo, hi) with exact endpoints, possibly from different fields."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Scalar, hi: Scalar):
        if _sign_diff_any(hi, lo) <= 0:
            raise ValueError("empty interval: need lo < hi")
        self.lo = lo
        self.hi = hi

    def __contains__(self, x: Scalar) -> bool:
        return _sign_diff_any(x, self.lo) > 0 and _sign_diff_any(self.hi, x) > 0

    def __repr__(self):
        return f"OpenInterval({format_scalar(self.lo)}, {format_scalar(self.hi)})"


def sqrt_contains(lo: Scalar, hi: Scalar, x: Scalar) -> bool:
    """Decide lo < x < hi exactly; an empty interval is rejected."""
    return x in OpenInterval(lo, hi)
