"""Random orbit trees of one-sided critical values and matching certificates.

Orbit trees are stored level by level as a DAG of value classes: all words of
the same length whose one-sided orbits reach the same exact point from the
same side are merged.  A class keeps the probability-weighted reciprocal
derivative sum of its words, which is all the balance condition needs.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .exactnum import Scalar, format_scalar, parse_scalar
from .randsys import DegenerateOrbitError, RandomSystem, step

__all__ = [
    "CoverageError",
    "MatchingCertificate",
    "NoMatchingWithinDepth",
    "OrbitTree",
    "SearchSpaceExceeded",
    "alternative_stopping",
    "expand_tree",
    "find_matching",
    "pattern_cover_ok",
    "strong_certificate_exists",
    "verify_strong",
]

Key = tuple  # (value, side)


class CoverageError(ValueError):
    """Stop rule leaves some ray without a stop within the depth bound."""


class SearchSpaceExceeded(RuntimeError):
    """Exhaustive search would exceed its size cap."""


def value_key(v: Scalar):
    """Deterministic sort key for exact values."""
    return (float(v), format_scalar(v))


@dataclass(eq=False)
class TreeClass:
    depth: int
    value: Scalar
    side: int
    weight: Scalar = Fraction(0)   # sum of p_u / T_u' over merged words
    prob: Fraction = Fraction(0)   # sum of p_u
    count: int = 0                 # number of merged words
    edges: dict = field(default_factory=dict)  # letter -> (child class, derivative)
    degenerate: bool = False
    boundary: bool = False         # value is a critical point of the system

    @property
    def key(self) -> Key:
        return (self.value, self.side)


class OrbitTree:
    """Level-aggregated random orbit tree of c from one side."""

    def __init__(self, system: RandomSystem, c: Scalar, side: int, depth: int = 0):
        if side not in (-1, 1, 0):
            raise ValueError("side must be -1, 0 or +1")
        self.system = system
        self.c = c
        self.side = side
        root = TreeClass(0, c, side, Fraction(1), Fraction(1), 1)
        self.levels: list[dict[Key, TreeClass]] = [{root.key: root}]
        self.extend(depth)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def root(self) -> TreeClass:
        return self.levels[0][(self.c, self.side)]

    def extend(self, depth: int) -> "OrbitTree":
        sys = self.system
        while self.depth < depth:
            d = self.depth + 1
            nxt: dict[Key, TreeClass] = {}
            for node in self.levels[-1].values():
                if node.degenerate:
                    continue
                moves = []
                try:
                    for j, tmap in enumerate(sys.maps):
                        moves.append((j, *step(tmap, node.value, node.side)))
                except DegenerateOrbitError:
                    node.degenerate = True
                    continue
                for j, y, k, s in moves:
                    p = sys.probs[j]
                    child = nxt.get((y, s))
                    if child is None:
                        child = TreeClass(d, y, s, boundary=s != 0 and sys.is_critical(y))
                        nxt[(y, s)] = child
                    child.weight = child.weight + node.weight * p / k
                    child.prob += node.prob * p
                    child.count += node.count
                    node.edges[j] = (child, k)
            self.levels.append(nxt)
        return self

    # -- queries --------------------------------------------------------------
    def node(self, word: Sequence[int]) -> tuple[Scalar, Scalar, Scalar]:
        """(point, derivative product, p_u / T_u') for a single word."""
        self.extend(len(word))
        cls = self.root
        deriv: Scalar = Fraction(1)
        prob = Fraction(1)
        for j in word:
            if cls.degenerate:
                raise DegenerateOrbitError("word passes a degenerate point")
            cls, k = cls.edges[j]
            deriv = deriv * k
            prob *= self.system.probs[j]
        return cls.value, deriv, prob / deriv

    def values_at(self, depth: int) -> list[Scalar]:
        self.extend(depth)
        return sorted({c.value for c in self.levels[depth].values()}, key=value_key)

    def measure_at(self, depth: int) -> dict:
        """Signed measure sum_u (p_u/T_u') delta_{T_u c} over words of the given length."""
        self.extend(depth)
        out: dict = {}
        for c in self.levels[depth].values():
            out[c.value] = out.get(c.value, 0) + c.weight
        return out

    def has_degenerate(self, upto: int) -> bool:
        return any(c.degenerate for lvl in self.levels[:upto] for c in lvl.values())

    def has_boundary(self, upto: int) -> bool:
        return any(c.boundary for lvl in self.levels[1:upto + 1] for c in lvl.values())

    def depths_of_values(self, upto: int) -> dict:
        out: dict = {}
        for d in range(1, upto + 1):
            for c in self.levels[d].values():
                out.setdefault(c.value, set()).add(d)
        return out

    def class_count(self) -> int:
        return sum(len(lvl) for lvl in self.levels)


def expand_tree(system: RandomSystem, c: Scalar, side, depth: int) -> OrbitTree:
    side = {"-": -1, "+": 1, "left": -1, "right": 1}.get(side, side)
    if depth < 1:
        raise ValueError("depth must be at least 1")
    return OrbitTree(system, c, side, depth)


# -- stop patterns -------------------------------------------------------------
# A pattern is a string over the letters 0..r-1 and '*', one character per
# step; it stands for the set of words matching it letter by letter.


def _pattern_prob(system: RandomSystem, pat: str) -> Fraction:
    w = Fraction(1)
    for ch in pat:
        if ch != "*":
            w *= system.probs[int(ch)]
    return w


def pattern_cover_ok(patterns: Iterable[str], alphabet: int) -> bool:
    """True iff the cylinders of the patterns partition the full shift."""
    plist = list(patterns)
    pats = tuple(sorted(set(plist)))
    if len(pats) != len(plist):
        return False  # a repeated pattern overlaps itself
    memo: dict = {}

    def rec(group: tuple, pos: int) -> bool:
        key = (group, pos)
        if key in memo:
            return memo[key]
        if not group:
            res = False
        elif any(len(p) == pos for p in group):
            res = len(group) == 1
        elif all(p[pos] == "*" for p in group):
            res = rec(group, pos + 1)
        else:
            res = all(rec(tuple(p for p in group if p[pos] in (str(j), "*")), pos + 1)
                      for j in range(alphabet))
        memo[key] = res
        return res

    return rec(pats, 0)


def _walk_pattern(tree: OrbitTree, pat: str):
    """Classes reached by the words of a pattern, with their summed weights."""
    tree.extend(len(pat))
    probs = tree.system.probs
    states = {tree.root: Fraction(1)}
    for ch in pat:
        letters = range(len(probs)) if ch == "*" else (int(ch),)
        nxt: dict = {}
        for cls, w in states.items():
            if cls.degenerate:
                raise DegenerateOrbitError(f"pattern {pat} passes a degenerate point")
            for j in letters:
                child, k = cls.edges[j]
                nxt[child] = nxt.get(child, 0) + w * probs[j] / k
        states = nxt
    return states


_PATTERN_CAP = 4096


def _compress_patterns(tree: OrbitTree, stops: set, M: int) -> dict | None:
    """Star patterns of the stopped rays, grouped by stop value.

    ``stops`` holds the stopping classes.  Returns None when the pattern
    lists would exceed the cap.
    """
    alphabet = tree.system.size
    memo: dict = {}

    def rec(cls: TreeClass) -> dict:
        if cls in memo:
            return memo[cls]
        if cls in stops:
            res = {cls.value: ("",)}
        elif cls.depth >= M or cls.degenerate:
            res = {}
        else:
            per_letter = [rec(cls.edges[j][0]) for j in range(alphabet)]
            res = {}
            ys = {y for pl in per_letter for y in pl}
            for y in ys:
                lists = [pl.get(y, ()) for pl in per_letter]
                if all(lst == lists[0] for lst in lists):
                    res[y] = tuple("*" + s for s in lists[0])
                else:
                    res[y] = tuple(str(j) + s for j, lst in enumerate(lists) for s in lst)
                if len(res[y]) > _PATTERN_CAP:
                    raise SearchSpaceExceeded
        memo[cls] = res
        return res

    try:
        out = rec(tree.root)
    except SearchSpaceExceeded:
        return None
    return {y: list(v) for y, v in out.items()}


# -- certificates ----------------------------------------------------------------
@dataclass
class MatchingCertificate:
    c: Scalar
    M: int
    Y: tuple
    stops_minus: dict | None        # y -> list of star patterns
    stops_plus: dict | None
    balance: dict                    # y -> (sum over minus stops, sum over plus stops)
    strong: bool
    stop_depths: dict = field(default_factory=dict)  # side -> {y: sorted depths}
    rule: str = "first-entry"
    boundary_hits: bool = False

    def to_json(self) -> dict:
        fmt = format_scalar

        def stops(d):
            return None if d is None else {fmt(y): v for y, v in sorted(d.items(), key=lambda t: value_key(t[0]))}

        return {
            "c": fmt(self.c),
            "M": self.M,
            "Y": [fmt(y) for y in self.Y],
            "strong": self.strong,
            "rule": self.rule,
            "boundary_hits": self.boundary_hits,
            "stops_minus": stops(self.stops_minus),
            "stops_plus": stops(self.stops_plus),
            "balance": {fmt(y): [fmt(a), fmt(b)] for y, (a, b) in
                        sorted(self.balance.items(), key=lambda t: value_key(t[0]))},
        }

    def to_text(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, obj) -> "MatchingCertificate":
        if isinstance(obj, str):
            obj = json.loads(obj)
        p = parse_scalar

        def stops(d):
            return None if d is None else {p(y): list(v) for y, v in d.items()}

        return cls(p(obj["c"]), int(obj["M"]), tuple(p(y) for y in obj["Y"]),
                   stops(obj["stops_minus"]), stops(obj["stops_plus"]),
                   {p(y): (p(a), p(b)) for y, (a, b) in obj["balance"].items()},
                   bool(obj["strong"]), rule=obj.get("rule", ""),
                   boundary_hits=bool(obj.get("boundary_hits", False)))


@dataclass
class NoMatchingWithinDepth:
    c: Scalar
    M_max: int
    frontier_minus: list
    frontier_plus: list
    degenerate: bool = False
    reason: str = ""

    def to_json(self) -> dict:
        return {"c": format_scalar(self.c), "M_max": self.M_max, "degenerate": self.degenerate,
                "reason": self.reason,
                "frontier_minus": [format_scalar(v) for v in self.frontier_minus],
                "frontier_plus": [format_scalar(v) for v in self.frontier_plus]}


def _stop_dp(tree: OrbitTree, M: int, rule) -> set | None:
    """Propagate live rays and stop them according to ``rule(depth, cls)``.

    Returns the set of stopping classes, or None when some ray survives past
    depth M or meets a degenerate point while alive.  Only reachability
    matters here, so no weights are carried.
    """
    alive = {tree.root}
    stops: set = set()
    for d in range(0, M):
        nxt: set = set()
        for cls in alive:
            if cls.degenerate:
                return None
            nxt.update(child for child, _ in cls.edges.values())
        alive = set()
        for cls in nxt:
            if rule(d + 1, cls):
                stops.add(cls)
            else:
                alive.add(cls)
        if not alive:
            break
    if alive:
        return None
    return stops


def _stopped_weights(tree: OrbitTree, stops: set, M: int) -> dict:
    """Sum of p_u/T_u' over stopped words, per stop value, along the DAG."""
    probs = tree.system.probs
    live = {tree.root: Fraction(1)}
    out: dict = {}
    for _ in range(0, M):
        nxt: dict = {}
        for cls, w in live.items():
            for j, (child, k) in cls.edges.items():
                nxt[child] = nxt.get(child, 0) + w * probs[j] / k
        live = {}
        for cls, w in nxt.items():
            if cls in stops:
                out[cls.value] = out.get(cls.value, 0) + w
            else:
                live[cls] = w
    return out


def _depths_by_value(stops: set) -> dict:
    out: dict = {}
    for cls in stops:
        out.setdefault(cls.value, set()).add(cls.depth)
    return {y: sorted(v) for y, v in out.items()}


def _build_certificate(c, M, tm: OrbitTree, tp: OrbitTree, sm: set, sp: set, rule: str,
                       require_strong: bool = False):
    bm = _stopped_weights(tm, sm, M)
    bp = _stopped_weights(tp, sp, M)
    if require_strong and _nonzero(bm) != _nonzero(bp):
        return None
    Y = tuple(sorted(set(bm) | set(bp), key=value_key))
    balance = {y: (bm.get(y, Fraction(0)), bp.get(y, Fraction(0))) for y in Y}
    strong = all(a == b for a, b in balance.values())
    boundary = any(cls.boundary for cls in sm | sp)
    return MatchingCertificate(
        c, M, Y, _compress_patterns(tm, sm, M), _compress_patterns(tp, sp, M), balance, strong,
        {"minus": _depths_by_value(sm), "plus": _depths_by_value(sp)}, rule,
        boundary or tm.has_boundary(M) or tp.has_boundary(M))


def _nonzero(meas: dict) -> dict:
    return {v: w for v, w in meas.items() if w != 0}


def _depth_unique(tm: OrbitTree, tp: OrbitTree, M: int) -> bool:
    dm, dp = tm.depths_of_values(M), tp.depths_of_values(M)
    for v in set(dm) | set(dp):
        if len(dm.get(v, set()) | dp.get(v, set())) > 1:
            return False
    return True


def _uniform_cut(c, M, tm, tp, strong):
    """All rays stop at depth M."""
    if tm.has_degenerate(M) or tp.has_degenerate(M):
        return None
    mm, mp = tm.measure_at(M), tp.measure_at(M)
    if set(mm) != set(mp):
        return None
    if strong and _nonzero(mm) != _nonzero(mp):
        return None
    sm = set(tm.levels[M].values())
    sp = set(tp.levels[M].values())
    return _build_certificate(c, M, tm, tp, sm, sp, "uniform-depth")


def _first_entry_rule(Y: set, allowed: dict | None = None):
    def rule(depth, cls):
        if cls.value not in Y:
            return False
        if allowed is None or allowed.get(cls.value) is None:
            return True
        return depth in allowed[cls.value]
    return rule


def _try_rule(c, M, tm, tp, rule_m, rule_p, label, strong=False):
    sm = _stop_dp(tm, M, rule_m)
    if sm is None:
        return None
    sp = _stop_dp(tp, M, rule_p)
    if sp is None:
        return None
    return _build_certificate(c, M, tm, tp, sm, sp, label, strong)


def _search_depth(c, M, tm, tp, strong, max_y, budget=500):
    uni = _uniform_cut(c, M, tm, tp, strong)
    if strong and _depth_unique(tm, tp, M) \
            and not (tm.has_boundary(M) or tp.has_boundary(M)):
        # with every value at a single depth, stops at different depths never
        # share a value, so a strong rule exists iff the level measures agree
        return uni
    dm, dp = tm.depths_of_values(M), tp.depths_of_values(M)
    common = sorted(set(dm) & set(dp), key=lambda v: (-max(dm[v] | dp[v]), value_key(v)))
    tries = 0
    for size in range(1, max_y + 1):
        if uni is not None and len(uni.Y) <= size:
            return uni
        for Yt in itertools.combinations(common, size):
            tries += 1
            if tries > budget:
                return uni
            Y = set(Yt)
            cert = _try_rule(c, M, tm, tp, _first_entry_rule(Y), _first_entry_rule(Y),
                             "first-entry", strong)
            if cert is not None and len(cert.Y) == size and (cert.strong or not strong):
                return cert
            if not strong or size > 2:
                continue
            # delay: stop only at one chosen depth per value and side
            opts_m = [[None] + [{y: {d}} for d in sorted(dm[y])] for y in Yt]
            opts_p = [[None] + [{y: {d}} for d in sorted(dp[y])] for y in Yt]
            for om in itertools.product(*opts_m):
                am = {k: v for o in om if o for k, v in o.items()}
                for op in itertools.product(*opts_p):
                    tries += 1
                    if tries > budget:
                        return uni
                    ap = {k: v for o in op if o for k, v in o.items()}
                    if not am and not ap:
                        continue
                    cert = _try_rule(c, M, tm, tp, _first_entry_rule(Y, am),
                                     _first_entry_rule(Y, ap), "delayed", True)
                    if cert is not None and cert.strong and len(cert.Y) == size:
                        return cert
    return uni


def find_matching(system: RandomSystem, c: Scalar, M_max: int = 24, strong: bool = True,
                  max_y: int = 3, budget: int = 500) -> MatchingCertificate | NoMatchingWithinDepth:
    """Smallest M admitting a (strong, by default) matching certificate for c.

    At each depth the uniform cut (every ray stops at depth M) is tried
    first.  If some value occurs at several depths, or an orbit meets a
    critical point, candidate sets Y of common values are then enumerated,
    smallest first, with first-entry stops and then single-depth delays.
    ``budget`` caps the number of stop rules tried per depth.
    """
    tm = OrbitTree(system, c, -1)
    tp = OrbitTree(system, c, 1)
    for M in range(1, M_max + 1):
        tm.extend(M)
        tp.extend(M)
        cert = _search_depth(c, M, tm, tp, strong, max_y, budget)
        if cert is not None:
            return cert
        if not tm.levels[M] and not tp.levels[M]:
            break  # every ray died at a degenerate point
    degenerate = tm.has_degenerate(tm.depth + 1) or tp.has_degenerate(tp.depth + 1)
    return NoMatchingWithinDepth(c, M_max, tm.values_at(tm.depth), tp.values_at(tp.depth),
                                 degenerate, "degenerate orbit" if degenerate else "depth cap")


def verify_strong(system: RandomSystem, cert: MatchingCertificate) -> MatchingCertificate:
    """Recompute coverage and balance sums from the stop patterns alone."""
    if cert.stops_minus is None or cert.stops_plus is None:
        raise ValueError("certificate carries no stop patterns to verify")
    balance = {}
    for side, stops in ((-1, cert.stops_minus), (1, cert.stops_plus)):
        tree = OrbitTree(system, cert.c, side)
        pats = [p for v in stops.values() for p in v]
        if any(len(p) > cert.M for p in pats):
            raise CoverageError("stop word longer than M")
        if sum(_pattern_prob(system, p) for p in pats) != 1 or not pattern_cover_ok(pats, system.size):
            raise CoverageError("stop words do not partition the shift space")
        for y, plist in stops.items():
            total: Scalar = Fraction(0)
            for pat in plist:
                for cls, w in _walk_pattern(tree, pat).items():
                    if cls.value != y:
                        raise CoverageError(f"pattern {pat} does not end at {format_scalar(y)}")
                    total = total + w
            a, b = balance.get(y, (Fraction(0), Fraction(0)))
            balance[y] = (total, b) if side == -1 else (a, total)
    Y = tuple(sorted(balance, key=value_key))
    strong = all(a == b for a, b in balance.values())
    return MatchingCertificate(cert.c, cert.M, Y, cert.stops_minus, cert.stops_plus, balance,
                               strong, cert.stop_depths, cert.rule, cert.boundary_hits)


def alternative_stopping(system: RandomSystem, cert: MatchingCertificate, Y: Iterable[Scalar],
                         M: int | None = None, stops: dict | None = None) -> MatchingCertificate:
    """Certificate for a user-chosen Y.

    Without ``stops`` every ray stops at its first entry into Y.  ``stops``
    may give explicit patterns as {"minus": {y: [...]}, "plus": {y: [...]}}.
    """
    M = cert.M if M is None else M
    Y = set(Y)
    if stops is not None:
        new = MatchingCertificate(cert.c, M, tuple(sorted(Y, key=value_key)),
                                  {y: list(v) for y, v in stops["minus"].items()},
                                  {y: list(v) for y, v in stops["plus"].items()},
                                  {}, False, rule="explicit")
        if not (set(new.stops_minus) <= Y and set(new.stops_plus) <= Y):
            raise ValueError("stop patterns reference points outside Y")
        return verify_strong(system, new)
    tm = OrbitTree(system, cert.c, -1, M)
    tp = OrbitTree(system, cert.c, 1, M)
    rule = _first_entry_rule(Y)
    out = _try_rule(cert.c, M, tm, tp, rule, rule, "first-entry")
    if out is None:
        raise CoverageError("Y does not catch every ray within depth M")
    return out


# -- exhaustive existence check ---------------------------------------------------
def _scale(meas: frozenset, f) -> frozenset:
    return frozenset((v, w * f) for v, w in meas)


def _msum(parts: Sequence[frozenset]) -> frozenset:
    acc: dict = {}
    for m in parts:
        for v, w in m:
            acc[v] = acc.get(v, 0) + w
    return frozenset((v, w) for v, w in acc.items() if w != 0)


def _achievable(tree: OrbitTree, K: int, cap: int):
    """Measures of stopped rays achievable by some stop rule within depth K."""
    probs = tree.system.probs
    memo: dict = {}

    def rec(cls: TreeClass) -> frozenset:
        if cls in memo:
            return memo[cls]
        depth = cls.depth
        opts = set()
        if depth > 0:
            opts.add(frozenset({(cls.value, Fraction(1))}))
        if depth < K and not cls.degenerate:
            parts = [[_scale(m, probs[j] / kk) for m in rec(child)]
                     for j, (child, kk) in sorted(cls.edges.items())]
            n = 1
            for p in parts:
                n *= len(p)
            if n > cap:
                raise SearchSpaceExceeded(f"more than {cap} stop measures at depth {depth}")
            for combo in itertools.product(*parts):
                opts.add(_msum(combo))
        res = frozenset(opts)
        if len(res) > cap:
            raise SearchSpaceExceeded(f"more than {cap} stop measures at depth {depth}")
        memo[cls] = res
        return res

    return rec(tree.root)


def strong_certificate_exists(system: RandomSystem, c: Scalar, K: int,
                              cap: int = 200_000) -> tuple[bool, str]:
    """Decide whether some strong certificate with all stops at depth <= K exists.

    Returns (answer, method).  When every value occurs at a single depth and
    no orbit meets a critical point, stops at different depths never share a
    value and the balance reduces to equality of whole level measures.
    Otherwise all stop rules are enumerated, class by class.
    """
    tm = OrbitTree(system, c, -1, K)
    tp = OrbitTree(system, c, 1, K)
    if _depth_unique(tm, tp, K) and not (tm.has_boundary(K) or tp.has_boundary(K)):
        for k in range(1, K + 1):
            if tm.has_degenerate(k) or tp.has_degenerate(k):
                break
            if _nonzero(tm.measure_at(k)) == _nonzero(tp.measure_at(k)):
                return True, "level-measure"
        return False, "level-measure"
    am = _achievable(tm, K, cap)
    ap = _achievable(tp, K, cap)
    return bool(am & ap), "enumeration"
