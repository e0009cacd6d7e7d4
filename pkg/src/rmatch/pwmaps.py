"""Piecewise monotone interval maps with affine or Moebius branches.

Boundary ownership is explicit: every branch carries closed flags for its two
endpoints, and one-sided limits are read off from the adjacent branch formula.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .exactnum import Scalar, as_scalar, format_scalar, parse_scalar, sign

__all__ = [
    "Affine",
    "Branch",
    "DomainError",
    "IntervalMap",
    "LazyPiecewiseMap",
    "Moebius",
    "PiecewiseMap",
    "UnsupportedError",
    "normalize_side",
]


class DomainError(ValueError):
    """Point outside the ambient interval, or a limit that does not exist."""


class UnsupportedError(TypeError):
    """Operation not available for the branch types present."""


_SIDES = {
    "at": "at", 0: "at", None: "at",
    "left": "left", "left_limit": "left", "-": "left", -1: "left",
    "right": "right", "right_limit": "right", "+": "right", 1: "right",
}


def normalize_side(side) -> str:
    try:
        return _SIDES[side]
    except (KeyError, TypeError):
        raise ValueError(f"unknown side {side!r}") from None


@dataclass(frozen=True)
class Affine:
    k: Scalar
    d: Scalar

    def __call__(self, x: Scalar) -> Scalar:
        return self.k * x + self.d

    def derivative(self, x: Scalar) -> Scalar:
        return self.k

    def to_json(self) -> dict:
        return {"type": "affine", "k": format_scalar(self.k), "d": format_scalar(self.d)}


@dataclass(frozen=True)
class Moebius:
    """x -> (a x + b) / (c x + e)."""

    a: Scalar
    b: Scalar
    c: Scalar
    e: Scalar

    def __post_init__(self):
        if sign(self.a * self.e - self.b * self.c) == 0:
            raise ValueError("degenerate Moebius form: ae - bc = 0")

    def __call__(self, x: Scalar) -> Scalar:
        return (self.a * x + self.b) / (self.c * x + self.e)

    def derivative(self, x: Scalar) -> Scalar:
        den = self.c * x + self.e
        return (self.a * self.e - self.b * self.c) / (den * den)

    def to_json(self) -> dict:
        return {"type": "moebius", **{k: format_scalar(getattr(self, k)) for k in "abce"}}


Form = Union[Affine, Moebius]


def _form_from_json(obj: dict) -> Form:
    if obj["type"] == "affine":
        return Affine(parse_scalar(obj["k"]), parse_scalar(obj["d"]))
    if obj["type"] == "moebius":
        return Moebius(*(parse_scalar(obj[k]) for k in "abce"))
    raise ValueError(f"unknown branch type {obj['type']!r}")


@dataclass(frozen=True)
class Branch:
    domain_left: Scalar
    domain_right: Scalar
    left_closed: bool
    right_closed: bool
    form: Form

    def __post_init__(self):
        if not self.domain_left < self.domain_right:
            raise ValueError("branch domain must have domain_left < domain_right")
        f = self.form
        if isinstance(f, Moebius) and sign(f.c) != 0:
            pole = -f.e / f.c
            if self.domain_left <= pole <= self.domain_right:
                raise ValueError("Moebius pole inside the closed branch domain")

    def owns(self, x: Scalar) -> bool:
        lo, hi = self.domain_left, self.domain_right
        if lo < x < hi:
            return True
        return (x == lo and self.left_closed) or (x == hi and self.right_closed)

    @property
    def is_affine(self) -> bool:
        return isinstance(self.form, Affine)

    def to_json(self) -> dict:
        return {
            "left": format_scalar(self.domain_left),
            "right": format_scalar(self.domain_right),
            "left_closed": self.left_closed,
            "right_closed": self.right_closed,
            "form": self.form.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Branch":
        return cls(parse_scalar(obj["left"]), parse_scalar(obj["right"]),
                   bool(obj["left_closed"]), bool(obj["right_closed"]),
                   _form_from_json(obj["form"]))


class IntervalMap:
    """Common interface: subclasses implement :meth:`branch`."""

    ambient: tuple[Scalar, Scalar]

    def branch(self, x: Scalar, side="at") -> Branch:
        raise NotImplementedError

    def _check(self, x: Scalar, side: str) -> None:
        lo, hi = self.ambient
        if x < lo or x > hi:
            raise DomainError(f"{format_scalar(x)} outside the ambient interval")
        if side == "left" and x == lo:
            raise DomainError("no left limit at the left end of the ambient interval")
        if side == "right" and x == hi:
            raise DomainError("no right limit at the right end of the ambient interval")

    def eval(self, x: Scalar, side="at") -> Scalar:
        return self.branch(x, side).form(x)

    def deriv(self, x: Scalar, side="at") -> Scalar:
        return self.branch(x, side).form.derivative(x)

    def __call__(self, x: Scalar) -> Scalar:
        return self.eval(x)

    def is_critical(self, x: Scalar) -> bool:
        """True when T or T' is discontinuous at the interior point x."""
        lo, hi = self.ambient
        if not lo < x < hi:
            return False
        return self.branch(x, "left").form != self.branch(x, "right").form

    @property
    def all_affine(self) -> bool:
        raise NotImplementedError

    def float_eval(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized float evaluation; returns images and branch intercepts."""
        raise NotImplementedError


class PiecewiseMap(IntervalMap):
    """Finitely many branches tiling the ambient interval."""

    def __init__(self, ambient: Sequence, branches: Iterable[Branch], name: str = ""):
        lo, hi = as_scalar(ambient[0]), as_scalar(ambient[1])
        self.ambient = (lo, hi)
        self.branches: tuple[Branch, ...] = tuple(branches)
        self.name = name
        self._validate()

    def _validate(self) -> None:
        bs = self.branches
        if not bs:
            raise ValueError("a map needs at least one branch")
        lo, hi = self.ambient
        if bs[0].domain_left != lo or bs[-1].domain_right != hi:
            raise ValueError("branches must span the ambient interval")
        if not (bs[0].left_closed and bs[-1].right_closed):
            raise ValueError("ambient endpoints must be owned")
        for left, right in zip(bs, bs[1:]):
            if left.domain_right != right.domain_left:
                raise ValueError("branch domains must be contiguous")
            if left.right_closed == right.left_closed:
                raise ValueError(
                    f"boundary {format_scalar(left.domain_right)} must have exactly one owner")
        for b in bs:
            for end, closed in ((b.domain_left, b.left_closed), (b.domain_right, b.right_closed)):
                y = b.form(end)
                if y < lo or y > hi:
                    raise ValueError("branch image leaves the ambient interval")

    @property
    def all_affine(self) -> bool:
        return all(b.is_affine for b in self.branches)

    @property
    def breakpoints(self) -> list[Scalar]:
        return [b.domain_right for b in self.branches[:-1]]

    @property
    def critical_points(self) -> list[Scalar]:
        return [x for x in self.breakpoints if self.is_critical(x)]

    def branch_index(self, x: Scalar, side="at") -> int:
        side = normalize_side(side)
        self._check(x, side)
        for i, b in enumerate(self.branches):
            lo, hi = b.domain_left, b.domain_right
            if side == "at" and b.owns(x):
                return i
            if side == "left" and lo < x <= hi:
                return i
            if side == "right" and lo <= x < hi:
                return i
        raise DomainError(f"no branch for {format_scalar(x)}")  # unreachable after validation

    def branch(self, x: Scalar, side="at") -> Branch:
        return self.branches[self.branch_index(x, side)]

    def preimages(self, y: Scalar) -> list[tuple[Scalar, int]]:
        """All x with T(x) = y, each with the index of its owning branch."""
        if not self.all_affine:
            raise UnsupportedError("preimages need affine branches")
        lo, hi = self.ambient
        if y < lo or y > hi:
            return []
        out = []
        for i, b in enumerate(self.branches):
            x = (y - b.form.d) / b.form.k
            if b.owns(x):
                out.append((x, i))
        return out

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "name": self.name,
            "ambient": [format_scalar(self.ambient[0]), format_scalar(self.ambient[1])],
            "branches": [b.to_json() for b in self.branches],
        }

    @classmethod
    def from_json(cls, obj) -> "PiecewiseMap":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls([parse_scalar(s) for s in obj["ambient"]],
                   [Branch.from_json(b) for b in obj["branches"]], obj.get("name", ""))

    # -- float backend -------------------------------------------------------
    def _float_tables(self):
        if not hasattr(self, "_ftab"):
            if not self.all_affine:
                raise UnsupportedError("float tables need affine branches")
            edges = np.array([float(b.domain_right) for b in self.branches[:-1]])
            owner_right = np.array([not b.right_closed for b in self.branches[:-1]])
            k = np.array([float(b.form.k) for b in self.branches])
            d = np.array([float(b.form.d) for b in self.branches])
            self._ftab = (edges, owner_right, k, d)
        return self._ftab

    def float_eval(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        edges, owner_right, k, d = self._float_tables()
        idx = np.searchsorted(edges, x, side="left")
        # x equal to an edge: searchsorted puts it in the left branch; move it
        # right when the right-hand branch owns that edge
        hit = idx < len(edges)
        safe = np.minimum(idx, max(len(edges) - 1, 0))
        if len(edges):
            on_edge = hit & (x == edges[safe]) & owner_right[safe]
            idx = idx + on_edge
        return k[idx] * x + d[idx], d[idx]

    def __repr__(self):
        return f"PiecewiseMap({self.name!r}, {len(self.branches)} branches)"


class LazyPiecewiseMap(IntervalMap):
    """Map with countably many branches materialized on demand.

    ``locate(x, side)`` must return the :class:`Branch` governing x from the
    requested side; ``float_fn`` is the vectorized float version of the map,
    returning images and an integer label per sample.
    """

    def __init__(self, ambient: Sequence, locate: Callable[[Scalar, str], Branch],
                 float_fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None,
                 name: str = "", singular: Iterable[Scalar] = ()):
        self.ambient = (as_scalar(ambient[0]), as_scalar(ambient[1]))
        self._locate = locate
        self._float_fn = float_fn
        self.name = name
        # points where no one-sided continuation exists
        self.singular = frozenset(singular)
        self._cache: dict = {}

    @property
    def all_affine(self) -> bool:
        return False

    def branch(self, x: Scalar, side="at") -> Branch:
        side = normalize_side(side)
        self._check(x, side)
        if x in self.singular:
            raise DomainError(f"{format_scalar(x)} is a singular point of {self.name}")
        key = (x, side)
        b = self._cache.get(key)
        if b is None:
            b = self._locate(x, side)
            self._cache[key] = b
        return b

    def is_critical(self, x: Scalar) -> bool:
        if x in self.singular:
            return True
        return super().is_critical(x)

    def float_eval(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self._float_fn is None:
            raise UnsupportedError("no float evaluator supplied")
        return self._float_fn(x)

    def __repr__(self):
        return f"LazyPiecewiseMap({self.name!r})"


def affine_branch(lo, hi, left_closed: bool, right_closed: bool, k, d) -> Branch:
    """Shorthand used by the family constructors."""
    return Branch(as_scalar(lo), as_scalar(hi), left_closed, right_closed,
                  Affine(as_scalar(k), as_scalar(d)))
