"""Seeded floating-point Monte-Carlo for random interval maps.

Every sample point i draws from its own Philox stream keyed by
seed XOR splitmix64(i), so results do not depend on how points are chunked.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .density import StepDensity
from .exactnum import to_float
from .randsys import RandomSystem

__all__ = [
    "BirkhoffEstimate",
    "Histogram",
    "SimConfig",
    "bin_edges",
    "birkhoff_pi0",
    "histogram_z_scores",
    "jump_profile",
    "simulate_density",
    "splitmix64",
]

MASK64 = (1 << 64) - 1
DITHER = 2.0 ** -50
_CHUNK = 1024


def splitmix64(i: int) -> int:
    z = (i + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def point_rng(seed: int, i: int) -> np.random.Generator:
    key = (seed & MASK64) ^ splitmix64(i)
    # an explicit uint64 array keeps all 64 bits; a plain int list may not
    return np.random.Generator(np.random.Philox(key=np.array([key, 0], dtype=np.uint64)))


@dataclass
class SimConfig:
    system: RandomSystem
    seed: int = 0
    n_points: int = 1000
    n_iterations: int = 2000
    burn_in: int = 1000
    n_bins: int = 100
    n_batches: int = 50
    dither: float = DITHER
    extra_edges: tuple = ()

    def __post_init__(self):
        if self.burn_in >= self.n_iterations:
            raise ValueError("need at least one iteration after burn-in")
        if self.n_bins < 10:
            raise ValueError("n_bins must be at least 10")
        if self.n_points < self.n_batches or self.n_batches < 2:
            raise ValueError("need 2 <= n_batches <= n_points")

    @property
    def n_samples(self) -> int:
        return self.n_points * (self.n_iterations - self.burn_in)


def _run_chunk(cfg: SimConfig, start: int, stop: int, visit):
    """Iterate points start..stop-1 in lockstep and call visit(t, x, labels) after burn-in.

    Map choice uses the point's uniform u < cumulative p; a dither of
    relative size ``cfg.dither`` keeps float orbits of expanding maps from
    collapsing onto dyadic grids.  Points are clipped to the ambient interval.
    """
    sys = cfg.system
    lo, hi = (to_float(v) for v in sys.ambient)
    cum = np.cumsum([float(p) for p in sys.probs])[:-1]
    n = stop - start
    rngs = [point_rng(cfg.seed, i) for i in range(start, stop)]
    x = np.array([r.uniform(lo, hi) for r in rngs])
    choice_u = np.empty((n, cfg.n_iterations))
    noise = np.empty((n, cfg.n_iterations))
    for row, r in enumerate(rngs):
        choice_u[row] = r.random(cfg.n_iterations)
        noise[row] = r.uniform(-1.0, 1.0, cfg.n_iterations)
    width = hi - lo
    for t in range(cfg.n_iterations):
        j = np.searchsorted(cum, choice_u[:, t], side="right")
        y = np.empty_like(x)
        lab = np.empty(x.shape)
        for m, tmap in enumerate(sys.maps):
            sel = j == m
            if sel.any():
                y[sel], lab[sel] = tmap.float_eval(x[sel])
        if cfg.dither:
            y = y + cfg.dither * width * noise[:, t]
        x = np.clip(y, lo, hi)
        # labels describe the step just taken from the previous point
        if t >= cfg.burn_in:
            visit(t, x, lab, j)


def _batch_ids(cfg: SimConfig, start: int, stop: int) -> np.ndarray:
    return np.arange(start, stop) * cfg.n_batches // cfg.n_points


@dataclass
class Histogram:
    edges: np.ndarray
    mass: np.ndarray
    stderr: np.ndarray

    @property
    def density(self) -> np.ndarray:
        return self.mass / np.diff(self.edges)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("left,right,mass,density_estimate,stderr\n")
        dens = self.density
        for i in range(len(self.mass)):
            out.write(f"{self.edges[i]!r},{self.edges[i + 1]!r},{self.mass[i]!r},{dens[i]!r},"
                      f"{self.stderr[i]!r}\n")
        return out.getvalue()


def bin_edges(cfg: SimConfig) -> np.ndarray:
    """Uniform edges over the ambient interval plus any ``extra_edges`` inside it."""
    lo, hi = (to_float(v) for v in cfg.system.ambient)
    edges = np.linspace(lo, hi, cfg.n_bins + 1)
    extra = [float(e) for e in cfg.extra_edges if lo < float(e) < hi]
    return np.unique(np.concatenate([edges, extra]))


def simulate_density(cfg: SimConfig) -> Histogram:
    """Histogram of orbit points after burn-in with batch-means standard errors.

    Points are split into ``n_batches`` contiguous groups; the spread of the
    per-group bin frequencies gives the standard error.
    """
    edges = bin_edges(cfg)
    nb = len(edges) - 1
    per_batch = np.zeros((cfg.n_batches, nb))
    for s in range(0, cfg.n_points, _CHUNK):
        e = min(s + _CHUNK, cfg.n_points)
        flat0 = _batch_ids(cfg, s, e) * nb

        def visit(t, x, lab, j):
            idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, nb - 1)
            per_batch.ravel()[:] += np.bincount(flat0 + idx, minlength=per_batch.size)

        _run_chunk(cfg, s, e, visit)
    total = per_batch.sum(axis=0)
    mass = total / total.sum()
    frac = per_batch / per_batch.sum(axis=1, keepdims=True)
    stderr = frac.std(axis=0, ddof=1) / np.sqrt(cfg.n_batches)
    return Histogram(edges, mass, stderr)


def exact_bin_masses(density: StepDensity, edges: np.ndarray) -> np.ndarray:
    """Bin masses of a step density, integrated exactly in floats cell by cell."""
    bps = [to_float(b) for b in density.breakpoints]
    vals = [to_float(v) for v in density.values]
    out = np.zeros(len(edges) - 1)
    for i in range(len(edges) - 1):
        a, b = edges[i], edges[i + 1]
        acc = 0.0
        for (l, r), v in zip(zip(bps, bps[1:]), vals):
            w = min(b, r) - max(a, l)
            if w > 0:
                acc += w * v
        out[i] = acc
    return out


def histogram_z_scores(hist: Histogram, density: StepDensity) -> np.ndarray:
    exact = exact_bin_masses(density, hist.edges)
    se = np.where(hist.stderr > 0, hist.stderr, np.nan)
    return (hist.mass - exact) / se


@dataclass
class BirkhoffEstimate:
    value: float
    stderr: float
    n_samples: int


def birkhoff_pi0(cfg: SimConfig) -> BirkhoffEstimate:
    """Fraction of steps that emit the digit 0, i.e. use a branch with zero intercept."""
    zeros = np.zeros(cfg.n_batches)
    steps = np.zeros(cfg.n_batches)
    for s in range(0, cfg.n_points, _CHUNK):
        e = min(s + _CHUNK, cfg.n_points)
        bid = _batch_ids(cfg, s, e)

        def visit(t, x, lab, j):
            zeros[:] += np.bincount(bid, weights=(lab == 0), minlength=cfg.n_batches)
            steps[:] += np.bincount(bid, minlength=cfg.n_batches)

        _run_chunk(cfg, s, e, visit)
    fracs = zeros / steps
    return BirkhoffEstimate(float(zeros.sum() / steps.sum()),
                            float(fracs.std(ddof=1) / np.sqrt(cfg.n_batches)), int(steps.sum()))


def jump_profile(hist: Histogram, points: Sequence[float], window: int = 5) -> tuple[np.ndarray, float]:
    """Density jumps across ``points`` and the median jump between adjacent bins.

    Each point should be a bin edge (see ``SimConfig.extra_edges``).  A line
    is fitted to the density over ``window`` bins on each side and both fits
    are evaluated at the point, so a smooth slope does not count as a jump.
    """
    dens = hist.density
    mids = (hist.edges[:-1] + hist.edges[1:]) / 2
    med = float(np.median(np.abs(np.diff(dens))))
    at = []
    for p in points:
        i = int(np.argmin(np.abs(hist.edges - p)))
        lsl, rsl = slice(max(i - window, 0), i), slice(i, i + window)
        if i - lsl.start < 2 or len(dens[rsl]) < 2:
            at.append(np.nan)
            continue
        lv = np.polyval(np.polyfit(mids[lsl], dens[lsl], 1), p)
        rv = np.polyval(np.polyfit(mids[rsl], dens[rsl], 1), p)
        at.append(abs(float(rv - lv)))
    return np.array(at), med
