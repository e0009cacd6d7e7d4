"""Exact dense linear algebra over the rationals and over a quadratic field."""
from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Sequence

from .exactnum import QuadExt, Scalar, sign

__all__ = ["KernelDimensionError", "nullspace", "rank", "solve"]


class KernelDimensionError(ValueError):
    """Kernel has the wrong dimension for the requested operation."""


def _is_rational_matrix(A) -> bool:
    return all(not isinstance(x, QuadExt) for row in A for x in row)


def _bareiss_rref(A: Sequence[Sequence[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form via fraction-free elimination on integer rows.

    Rows are scaled to integers first; elimination uses Bareiss' exact
    division so entries stay integral, with the pivot of largest magnitude
    in each column.  Only the final normalization introduces fractions.
    """
    rows = []
    for row in A:
        den = lcm(*(Fraction(x).denominator for x in row)) if row else 1
        rows.append([int(Fraction(x) * den) for x in row])
    m = len(rows)
    n = len(rows[0]) if m else 0
    pivots: list[int] = []
    prev = 1
    r = 0
    for col in range(n):
        if r >= m:
            break
        best = max(range(r, m), key=lambda i: (abs(rows[i][col]), -i))
        if rows[best][col] == 0:
            continue
        rows[r], rows[best] = rows[best], rows[r]
        piv = rows[r][col]
        for i in range(m):
            if i == r:
                continue
            f = rows[i][col]
            new = []
            for a, b in zip(rows[i], rows[r]):
                q, rem = divmod(piv * a - f * b, prev)
                if rem:
                    raise ArithmeticError("inexact fraction-free step")
                new.append(q)
            rows[i] = new
        prev = piv
        pivots.append(col)
        r += 1
    out = []
    for i, col in enumerate(pivots):
        p = rows[i][col]
        out.append([Fraction(a, p) for a in rows[i]])
    return out, pivots


def _gauss_rref(A: Sequence[Sequence[Scalar]]) -> tuple[list[list[Scalar]], list[int]]:
    rows = [list(r) for r in A]
    m = len(rows)
    n = len(rows[0]) if m else 0
    pivots: list[int] = []
    r = 0
    for col in range(n):
        if r >= m:
            break
        cand = [i for i in range(r, m) if sign(rows[i][col]) != 0]
        if not cand:
            continue
        best = max(cand, key=lambda i: (abs(float(rows[i][col])), -i))
        rows[r], rows[best] = rows[best], rows[r]
        piv = rows[r][col]
        rows[r] = [x / piv for x in rows[r]]
        for i in range(m):
            if i != r and sign(rows[i][col]) != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
    return rows[:r], pivots


def rref(A):
    if _is_rational_matrix(A):
        return _bareiss_rref(A)
    return _gauss_rref(A)


def rank(A) -> int:
    return len(rref(A)[1])


def nullspace(A) -> list[list[Scalar]]:
    """Basis of {x : A x = 0}, one vector per free column."""
    n = len(A[0])
    R, pivots = rref(A)
    free = [j for j in range(n) if j not in pivots]
    basis = []
    for f in free:
        v: list[Scalar] = [Fraction(0)] * n
        v[f] = Fraction(1)
        for row, pc in zip(R, pivots):
            v[pc] = -row[f]
        basis.append(v)
    return basis


def solve(A, B):
    """Solve A X = B for square nonsingular A; B is a list of right-hand-side columns."""
    n = len(A)
    aug = [list(A[i]) + [b[i] for b in B] for i in range(n)]
    R, pivots = _gauss_rref(aug)
    if pivots[:n] != list(range(n)) or len(pivots) > n:
        raise KernelDimensionError("singular system")
    return [[R[i][n + k] for i in range(n)] for k in range(len(B))]
