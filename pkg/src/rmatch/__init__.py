"""Exact detection of random matching and invariant step densities for random interval maps."""
from .exactnum import QuadExt, Scalar, cmp, format_scalar, parse_scalar, qsqrt, quad
from .pwmaps import Affine, Branch, LazyPiecewiseMap, Moebius, PiecewiseMap
from .randsys import RandomSystem

__version__ = "0.1.0"

__all__ = [
    "Affine",
    "Branch",
    "LazyPiecewiseMap",
    "Moebius",
    "PiecewiseMap",
    "QuadExt",
    "RandomSystem",
    "Scalar",
    "cmp",
    "format_scalar",
    "parse_scalar",
    "qsqrt",
    "quad",
]
