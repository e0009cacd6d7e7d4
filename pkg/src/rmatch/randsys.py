"""Random systems: finitely many interval maps chosen i.i.d. with fixed probabilities."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .exactnum import Scalar, format_scalar, parse_scalar, sign
from .pwmaps import DomainError, IntervalMap, PiecewiseMap, normalize_side

__all__ = [
    "DegenerateOrbitError",
    "HypothesisReport",
    "RandomSystem",
    "step",
]

Word = tuple[int, ...]


class DegenerateOrbitError(ValueError):
    """An orbit reached a point where it cannot be continued unambiguously."""


_SIDE_CODE = {"left": -1, "at": 0, "right": 1}
_CODE_SIDE = {-1: "left", 0: "at", 1: "right"}


def step(tmap: IntervalMap, x: Scalar, side: int) -> tuple[Scalar, Scalar, int]:
    """One exact step of a one-sided orbit.

    ``side`` is -1, 0 or +1 (approach from the left, exact point, from the
    right).  Returns (image, derivative, side of the image); an increasing
    branch keeps the side, a decreasing one flips it.
    """
    try:
        b = tmap.branch(x, _CODE_SIDE[side])
    except DomainError as exc:
        raise DegenerateOrbitError(str(exc)) from exc
    k = b.form.derivative(x)
    return b.form(x), k, side * sign(k)


@dataclass
class HypothesisReport:
    a1: bool
    a2: tuple[bool, Scalar]
    a3: bool
    c1: bool | None
    c2: bool | None
    c3: bool | None
    c2_witness: tuple | None = None
    fixed_points: list | None = None

    @property
    def in_affine_class(self) -> bool:
        return bool(self.a1 and self.a2[0] and self.a3 and self.c1 and self.c2 and self.c3)


class RandomSystem:
    """Maps T_0..T_{r-1} on a common ambient interval with probabilities p_j."""

    def __init__(self, maps: Sequence[IntervalMap], probs: Sequence, name: str = ""):
        if not maps:
            raise ValueError("a random system needs at least one map")
        if len(maps) != len(probs):
            raise ValueError("one probability per map")
        probs = tuple(Fraction(p) for p in probs)
        if any(p <= 0 for p in probs):
            raise ValueError("probabilities must be strictly positive")
        if sum(probs) != 1:
            raise ValueError("probabilities must sum to 1")
        ambient = maps[0].ambient
        if any(m.ambient != ambient for m in maps):
            raise ValueError("all maps must share the ambient interval")
        self.maps = tuple(maps)
        self.probs = probs
        self.ambient = ambient
        self.name = name
        self.finite = all(isinstance(m, PiecewiseMap) for m in maps)
        if self.finite:
            pts = sorted({c for m in maps for c in m.critical_points})
            self.critical_set: tuple[Scalar, ...] | None = tuple(pts)
            self.partition: tuple[Scalar, ...] | None = (ambient[0], *pts, ambient[1])
        else:
            self.critical_set = None
            self.partition = None

    @property
    def size(self) -> int:
        return len(self.maps)

    @property
    def all_affine(self) -> bool:
        return all(m.all_affine for m in self.maps)

    def is_critical(self, x: Scalar) -> bool:
        return any(m.is_critical(x) for m in self.maps)

    # -- words ----------------------------------------------------------------
    def word_weight(self, word: Sequence[int]) -> Fraction:
        w = Fraction(1)
        for j in word:
            w *= self.probs[j]
        return w

    def apply_word(self, word: Sequence[int], x: Scalar, side="at", propagate: bool = True):
        """Apply T_{u_1} first, then T_{u_2}, and so on.

        With ``propagate`` the one-sided nature of the start is carried along
        the orbit (the image side flips on decreasing branches), so the result
        is the exact limit lim T_u(x') as x' approaches x from ``side``.
        Without it, only the first step uses ``side`` and later steps evaluate
        at the point itself; reaching a critical point then raises
        :class:`DegenerateOrbitError`.
        Returns (point, derivative product, final side code).
        """
        s = _SIDE_CODE[normalize_side(side)]
        deriv: Scalar = Fraction(1)
        for n, j in enumerate(word):
            tmap = self.maps[j]
            if n > 0 and not propagate:
                if tmap.is_critical(x):
                    raise DegenerateOrbitError(
                        f"orbit meets critical point {format_scalar(x)} of map {j}")
                s = 0
            x, k, s = step(tmap, x, s)
            deriv = deriv * k
        return x, deriv, s

    # -- hypotheses -------------------------------------------------------------
    def cells(self):
        if self.partition is None:
            raise ValueError("cell data needs a finite partition")
        return list(zip(self.partition, self.partition[1:]))

    def branch_data(self) -> list[list[tuple[Scalar, Scalar]]]:
        """(k_ij, d_ij) for every cell i and map j (affine systems only)."""
        out = []
        for lo, hi in self.cells():
            row = []
            for m in self.maps:
                f = m.branch(lo, "right").form
                row.append((f.k, f.d))
            out.append(row)
        return out

    def check_hypotheses(self) -> HypothesisReport:
        a1 = True  # branch forms are C^1 and strictly monotone by construction
        a3 = True  # bounded variation is automatic for affine and Moebius branches
        rho = self._expansion_rate()
        if not (self.finite and self.all_affine):
            return HypothesisReport(a1, (rho < 1, rho), a3, None, None, None)
        data = self.branch_data()
        c3 = all(sum(p / k for p, (k, _) in zip(self.probs, row)) != 0 for row in data)
        fixed = []
        for row in data:
            s = sum(p / k for p, (k, _) in zip(self.probs, row))
            fixed.append(None if s == 1 else sum(p * d / k for p, (k, d) in zip(self.probs, row)) / (1 - s))
        c2, witness = True, None
        for i, fi in enumerate(fixed):
            partner = next((n for n, fn in enumerate(fixed) if fn != fi), None)
            if partner is None:
                c2 = False
                break
            if witness is None:
                witness = ((i + 1, fi), (partner + 1, fixed[partner]))
        return HypothesisReport(a1, (rho < 1, rho), a3, True, c2, c3, witness, fixed)

    def _expansion_rate(self) -> Scalar:
        """max over cells of sum_j p_j / inf|T_j'| (exact).

        On a Moebius branch |T'| is monotone, so its infimum sits at a cell
        end.  Without a finite partition the ambient endpoints are used,
        which is exact for the continued-fraction maps where 1/|T'(x)| = x^2.
        """
        if self.partition is not None:
            cells = self.cells()
        else:
            lo, hi = self.ambient
            cells = [(lo, lo), (hi, hi)]
        best = None
        for lo, hi in cells:
            total: Scalar = Fraction(0)
            for p, m in zip(self.probs, self.maps):
                if lo == hi:
                    side = "right" if lo == self.ambient[0] else "left"
                    mags = [abs(m.deriv(lo, side))]
                else:
                    b = m.branch(lo, "right")
                    mags = [abs(b.form.derivative(lo)), abs(b.form.derivative(hi))]
                total = total + p / min(mags)
            if best is None or total > best:
                best = total
        return best

    # -- serialization ------------------------------------------------------------
    def to_json(self) -> dict:
        if not self.finite:
            raise ValueError("only finite systems serialize to JSON")
        return {"name": self.name,
                "maps": [m.to_json() for m in self.maps],
                "probs": [format_scalar(p) for p in self.probs]}

    @classmethod
    def from_json(cls, obj) -> "RandomSystem":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls([PiecewiseMap.from_json(m) for m in obj["maps"]],
                   [parse_scalar(p) for p in obj["probs"]], obj.get("name", ""))

    def __repr__(self):
        return f"RandomSystem({self.name!r}, {self.size} maps)"
