"""Piecewise-constant invariant densities of piecewise affine random systems.

For a critical point c_i let nu_i be the signed measure
    sum_j p_j/T_j'(c_i^-) delta_{T_j(c_i^-)} - p_j/T_j'(c_i^+) delta_{T_j(c_i^+)}
and let W push a point mass at x to sum_j p_j/T_j'(x^-) delta_{T_j(x^-)}.
The visit measure V_i = nu_i + W nu_i + W^2 nu_i + ... is a finite sum when
the pushes cancel after finitely many steps (matching), or the solution of
a finite linear system when the supports stay in a finite set (Markov).  The
invariant density is

    f = sum_i gamma_i sum_z V_i(z) 1_[c_0, z),

where gamma spans the kernel of the cells-by-critical-points matrix A.
Splitting P 1_[c_0, z) into the push of z and the jumps at the critical
points left of z shows that f is invariant exactly when gamma_i equals the
mass of f's measure to the right of c_i, which is the equation A gamma = 0.
This needs the total mass of each V_i to vanish, which holds when all
branches share one slope magnitude.
"""
from __future__ import annotations

import bisect
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .exactnum import Scalar, format_scalar, parse_scalar, sign, to_decimal
from .linalg import KernelDimensionError, nullspace, solve
from .pwmaps import PiecewiseMap, UnsupportedError
from .randsys import RandomSystem

__all__ = [
    "DensityError",
    "DensityResult",
    "KColumn",
    "StepDensity",
    "assemble_density",
    "build_A",
    "invariant_density",
    "k_differences",
    "normalize_gamma",
    "null_vector",
    "orbit_closure",
    "pair_k_difference",
    "solve_markov_K",
    "transfer",
    "transfer_residual",
]


class DensityError(RuntimeError):
    """The density pipeline cannot produce a valid density."""


# -- step functions ---------------------------------------------------------------
@dataclass(frozen=True)
class StepDensity:
    """Values on the cells [b_k, b_{k+1}); the last cell is closed."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bps, vals = self.breakpoints, self.values
        if len(bps) < 2 or len(vals) != len(bps) - 1:
            raise ValueError("need one value per cell")
        if any(not a < b for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must increase strictly")

    @property
    def cells(self):
        return list(zip(self.breakpoints, self.breakpoints[1:], self.values))

    def value_at(self, x: Scalar) -> Scalar:
        bps = self.breakpoints
        if x < bps[0] or x > bps[-1]:
            return Fraction(0)
        k = bisect.bisect_right(bps, x) - 1
        return self.values[min(k, len(self.values) - 1)]

    def integrate(self, a: Scalar | None = None, b: Scalar | None = None) -> Scalar:
        lo = self.breakpoints[0] if a is None else a
        hi = self.breakpoints[-1] if b is None else b
        total: Scalar = Fraction(0)
        for l, r, v in self.cells:
            u, w = max(l, lo), min(r, hi)
            if u < w:
                total = total + (w - u) * v
        return total

    def canonical(self) -> "StepDensity":
        """Merge neighbouring cells with equal values."""
        bps = [self.breakpoints[0]]
        vals: list = []
        for r, v in zip(self.breakpoints[1:], self.values):
            if vals and vals[-1] == v:
                bps[-1] = r
            else:
                vals.append(v)
                bps.append(r)
        return StepDensity(tuple(bps), tuple(vals))

    def mirror(self) -> "StepDensity":
        """x -> f(-x)."""
        return StepDensity(tuple(-b for b in reversed(self.breakpoints)),
                           tuple(reversed(self.values)))

    def scaled(self, s: Scalar) -> "StepDensity":
        return StepDensity(self.breakpoints, tuple(v * s for v in self.values))

    def min_value(self) -> Scalar:
        return min(self.values)

    def same_function(self, other: "StepDensity") -> bool:
        a, b = self.canonical(), other.canonical()
        return a.breakpoints == b.breakpoints and a.values == b.values

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("left,right,value,value_decimal\n")
        for l, r, v in self.cells:
            out.write(f"{format_scalar(l)},{format_scalar(r)},{format_scalar(v)},{to_decimal(v)}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "StepDensity":
        lines = [ln for ln in text.strip().splitlines()[1:] if ln]
        rows = [ln.split(",") for ln in lines]
        bps = [parse_scalar(rows[0][0])] + [parse_scalar(r[1]) for r in rows]
        return cls(tuple(bps), tuple(parse_scalar(r[2]) for r in rows))


def step_from_indicators(lo: Scalar, hi: Scalar, coeffs: dict) -> StepDensity:
    """sum_z coeffs[z] 1_[lo, z) as a step function on [lo, hi]."""
    pts = sorted({lo, hi, *coeffs})
    if pts[0] < lo or pts[-1] > hi:
        raise ValueError("indicator endpoint outside the ambient interval")
    vals = []
    tail: Scalar = Fraction(0)
    suffix = []
    for z in reversed(pts[1:]):
        tail = tail + coeffs.get(z, 0)
        suffix.append(tail)
    vals = list(reversed(suffix))
    return StepDensity(tuple(pts), tuple(vals))


# -- pushes ---------------------------------------------------------------------------
def _left_step(system: RandomSystem, j: int, x: Scalar) -> tuple[Scalar, Scalar]:
    """(T_j(x^-), T_j'(x^-)); at the left end of the ambient interval use x itself."""
    side = "at" if x == system.ambient[0] else "left"
    b = system.maps[j].branch(x, side)
    return b.form(x), b.form.derivative(x)


def _add(meas: dict, z, w) -> None:
    v = meas.get(z, 0) + w
    if v == 0:
        meas.pop(z, None)
    else:
        meas[z] = v


def first_level(system: RandomSystem, c: Scalar) -> dict:
    meas: dict = {}
    for p, tmap in zip(system.probs, system.maps):
        for side, sgn in (("left", 1), ("right", -1)):
            b = tmap.branch(c, side)
            _add(meas, b.form(c), sgn * p / b.form.derivative(c))
    return meas


def push(system: RandomSystem, meas: dict) -> dict:
    out: dict = {}
    for x, w in meas.items():
        for j, p in enumerate(system.probs):
            y, k = _left_step(system, j, x)
            _add(out, y, w * p / k)
    return out


def orbit_closure(system: RandomSystem, seeds, cap: int = 4000) -> list:
    """Forward closure of the seeds under x -> T_j(x^-)."""
    seen = set(seeds)
    todo = list(seen)
    while todo:
        x = todo.pop()
        for j in range(system.size):
            y, _ = _left_step(system, j, x)
            if y not in seen:
                if len(seen) >= cap:
                    raise DensityError(f"orbit closure exceeds {cap} points")
                seen.add(y)
                todo.append(y)
    return sorted(seen)


def cell_of(system: RandomSystem, z: Scalar) -> int:
    """1-based cell n with c_{n-1} < z <= c_n; the left end belongs to cell 1."""
    part = system.partition
    if z == part[0]:
        return 1
    return bisect.bisect_left(part, z)


@dataclass
class KColumn:
    c: Scalar
    route: str                 # "matching" or "markov"
    depth: int | None          # pushes until cancellation (matching route)
    visits: dict | None        # V_i as point -> weight (matching route)
    dk: list                   # K_n(a) - K_n(b) summed over maps, per cell n


def _truncated_visits(system: RandomSystem, c: Scalar, depth_cap: int):
    nu = first_level(system, c)
    total: dict = {}
    for depth in range(1, depth_cap + 1):
        if not nu:
            return total, depth - 1
        for z, w in nu.items():
            _add(total, z, w)
        nu = push(system, nu)
        if len(nu) > 100_000:
            break
    if not nu:
        return total, depth_cap
    return None, None


def _dk_from_visits(system: RandomSystem, visits: dict) -> list:
    N = len(system.partition) - 1
    dk: list = [Fraction(0)] * N
    for z, w in visits.items():
        n = cell_of(system, z)
        dk[n - 1] = dk[n - 1] + w
    return dk


def solve_markov_K(system: RandomSystem, seeds, cap: int = 4000):
    """K_n(y) on the forward closure of the seeds, from K = e_cell + W K.

    K_n(y) = sum_{k>=0} sum_{|u|=k} p_u/T_u'(y^-) 1_{I_n}(T_u(y^-)), with the
    cell of a point read from the left (see :func:`cell_of`).  Returns
    (points, {point: [K_1, ..., K_N]}).
    """
    pts = orbit_closure(system, seeds, cap)
    index = {z: i for i, z in enumerate(pts)}
    m = len(pts)
    N = len(system.partition) - 1
    A = [[Fraction(0)] * m for _ in range(m)]
    for i, y in enumerate(pts):
        A[i][i] = A[i][i] + 1
        for j, p in enumerate(system.probs):
            z, k = _left_step(system, j, y)
            A[i][index[z]] = A[i][index[z]] - p / k
    rhs = [[Fraction(1) if cell_of(system, y) == n else Fraction(0) for y in pts]
           for n in range(1, N + 1)]
    cols = solve(A, rhs)
    return pts, {y: [cols[n][i] for n in range(N)] for i, y in enumerate(pts)}


def k_differences(system: RandomSystem, route: str = "auto", depth_cap: int = 24,
                  closure_cap: int = 4000) -> list[KColumn]:
    """One column per critical point: sum_j K(a_ij) weighted minus K(b_ij) weighted."""
    if system.partition is None or not system.all_affine:
        raise UnsupportedError("K-sums need finitely many affine branches")
    if route not in ("auto", "matching", "markov"):
        raise ValueError(f"unknown route {route!r}")
    cols: list[KColumn | None] = []
    for c in system.critical_set:
        if route == "markov":
            cols.append(None)
            continue
        visits, depth = _truncated_visits(system, c, depth_cap)
        if visits is None:
            if route == "matching":
                raise DensityError(f"no cancellation within {depth_cap} pushes at c={format_scalar(c)}")
            cols.append(None)
        else:
            cols.append(KColumn(c, "matching", depth, visits, _dk_from_visits(system, visits)))
    if any(col is None for col in cols):
        todo = [c for c, col in zip(system.critical_set, cols) if col is None]
        seeds = {z for c in todo for z in first_level(system, c)} | set(system.partition)
        _, K = solve_markov_K(system, seeds, closure_cap)
        N = len(system.partition) - 1
        for idx, (c, col) in enumerate(zip(system.critical_set, cols)):
            if col is None:
                dk: list = [Fraction(0)] * N
                for z, w in first_level(system, c).items():
                    dk = [a + w * b for a, b in zip(dk, K[z])]
                cols[idx] = KColumn(c, "markov", None, None, dk)
    for col in cols:
        if sum(col.dk) != 0:
            raise UnsupportedError(
                "K-differences do not telescope; the branches need a common slope magnitude")
    return cols


def pair_k_difference(system: RandomSystem, a: Scalar, b: Scalar, depth_cap: int = 24) -> list:
    """[K_n(a) - K_n(b) for each cell n] with the next-step weighted K-sum.

    K_n(y) = sum_{k>=0} sum_{|u|=k} sum_j p_u p_j / (T_u'(y) T_j'(T_u y)) 1_{I_n}(T_u y),
    i.e. each visit also carries the derivative of the step leaving it.
    Raises DensityError unless the difference cancels within ``depth_cap`` pushes.
    """
    nu: dict = {}
    _add(nu, a, Fraction(1))
    _add(nu, b, Fraction(-1))
    N = len(system.partition) - 1
    dk: list = [Fraction(0)] * N
    for _ in range(depth_cap + 1):
        if not nu:
            return dk
        for z, w in nu.items():
            out = sum(p / _left_step(system, j, z)[1] for j, p in enumerate(system.probs))
            n = cell_of(system, z)
            dk[n - 1] = dk[n - 1] + w * out
        nu = push(system, nu)
    if nu:
        raise DensityError(f"K-difference does not cancel within {depth_cap} pushes")
    return dk


def build_A(system: RandomSystem, kcols: Sequence[KColumn]) -> list[list[Scalar]]:
    """A[n][i] = dK_n(c_i) + [n = i] - [n = i+1] (cells and critical points 1-based)."""
    N = len(system.partition) - 1
    total = sum(system.probs)
    A = [[col.dk[n] for col in kcols] for n in range(N)]
    for i in range(len(kcols)):
        A[i][i] = A[i][i] + total
        A[i + 1][i] = A[i + 1][i] - total
    return A


def null_vector(A) -> list[Scalar]:
    basis = nullspace(A)
    if len(basis) != 1:
        raise KernelDimensionError(f"kernel has dimension {len(basis)}, expected 1")
    return basis[0]


def _markov_visits(system: RandomSystem, c: Scalar, cap: int) -> dict:
    """V_i on the finite closure: solve V = nu + W V."""
    nu = first_level(system, c)
    pts = orbit_closure(system, nu.keys(), cap)
    index = {z: i for i, z in enumerate(pts)}
    m = len(pts)
    A = [[Fraction(0)] * m for _ in range(m)]
    for i in range(m):
        A[i][i] = Fraction(1)
    for i, x in enumerate(pts):
        for j, p in enumerate(system.probs):
            y, k = _left_step(system, j, x)
            A[index[y]][i] = A[index[y]][i] - p / k
    rhs = [nu.get(z, Fraction(0)) for z in pts]
    (sol,) = solve(A, [rhs])
    return {z: v for z, v in zip(pts, sol) if v != 0}


def _raw_density(system, gamma, kcols, closure_cap) -> StepDensity:
    lo, hi = system.ambient
    coeffs: dict = {}
    for g, col in zip(gamma, kcols):
        visits = col.visits if col.visits is not None else _markov_visits(system, col.c, closure_cap)
        for z, w in visits.items():
            _add(coeffs, z, g * w)
    return step_from_indicators(lo, hi, coeffs)


def normalize_gamma(system: RandomSystem, gamma: Sequence[Scalar], kcols: Sequence[KColumn],
                    closure_cap: int = 4000) -> list:
    """Scale a kernel vector so that the density it defines has total mass 1."""
    mass = _raw_density(system, gamma, kcols, closure_cap).integrate()
    if sign(mass) == 0:
        raise DensityError("density candidate has zero total mass")
    return [g / mass for g in gamma]


def assemble_density(system: RandomSystem, gamma: Sequence[Scalar], kcols: Sequence[KColumn],
                     closure_cap: int = 4000, require_nonnegative: bool = True) -> StepDensity:
    """Normalized step density defined by a kernel vector (any scaling)."""
    f = _raw_density(system, gamma, kcols, closure_cap)
    mass = f.integrate()
    if sign(mass) == 0:
        raise DensityError("density candidate has zero total mass")
    f = f.scaled(1 / mass)
    if require_nonnegative and sign(f.min_value()) < 0:
        raise DensityError("assembled density takes negative values")
    return f


# -- transfer operator ------------------------------------------------------------------
def transfer(system: RandomSystem, f: StepDensity) -> StepDensity:
    """(Pf)(x) = sum_j p_j sum_{T_j y = x} f(y) / |T_j'(y)| for affine branches."""
    events: dict = {}
    for p, tmap in zip(system.probs, system.maps):
        if not isinstance(tmap, PiecewiseMap) or not tmap.all_affine:
            raise UnsupportedError("transfer operator needs affine branches")
        for b in tmap.branches:
            for l, r, v in f.cells:
                u, w = max(l, b.domain_left), min(r, b.domain_right)
                if not u < w or sign(v) == 0:
                    continue
                y1, y2 = b.form(u), b.form(w)
                a, c = (y1, y2) if y1 < y2 else (y2, y1)
                val = p * v / abs(b.form.k)
                _add(events, a, val)
                _add(events, c, -val)
    lo, hi = system.ambient
    pts = sorted({lo, hi, *events})
    vals = []
    run: Scalar = Fraction(0)
    for z in pts[:-1]:
        run = run + events.get(z, 0)
        vals.append(run)
    return StepDensity(tuple(pts), tuple(vals))


def transfer_residual(system: RandomSystem, f: StepDensity) -> Scalar:
    """max |Pf - f| over the common refinement of both step functions."""
    g = transfer(system, f)
    pts = sorted(set(f.breakpoints) | set(g.breakpoints))
    worst: Scalar = Fraction(0)
    for z in pts[:-1]:
        d = abs(g.value_at(z) - f.value_at(z))
        if d > worst:
            worst = d
    return worst


@dataclass
class DensityResult:
    density: StepDensity
    gamma: list
    A: list
    columns: list
    residual: Scalar | None = None
    routes: list = field(default_factory=list)


def invariant_density(system: RandomSystem, route: str = "auto", depth_cap: int = 24,
                      closure_cap: int = 4000, check: bool = True) -> DensityResult:
    """Full pipeline: K-differences, fundamental matrix, kernel, normalized density."""
    cols = k_differences(system, route, depth_cap, closure_cap)
    A = build_A(system, cols)
    gamma = normalize_gamma(system, null_vector(A), cols, closure_cap)
    f = assemble_density(system, gamma, cols, closure_cap)
    res = transfer_residual(system, f) if check else None
    return DensityResult(f, gamma, A, cols, res, [c.route for c in cols])
