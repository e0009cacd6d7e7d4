"""Command-line front end: match, density, freq, surface, scan, simulate.

Exit codes: 0 success, 1 bad arguments or input, 2 no matching within the
depth cap or a failed density pipeline, 3 degenerate orbit.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import exemplars, mcsim, sbfamily
from .density import DensityError, invariant_density
from .exactnum import format_scalar, parse_scalar, to_decimal, to_float
from .linalg import KernelDimensionError
from .matching import MatchingCertificate, NoMatchingWithinDepth, find_matching
from .pwmaps import UnsupportedError
from .randsys import DegenerateOrbitError, RandomSystem
from .svg import heatmap_svg, step_plot_svg

EXIT_OK, EXIT_USAGE, EXIT_NO_MATCH, EXIT_DEGENERATE = 0, 1, 2, 3
FAMILIES = ("doubling", "cf", "beta")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _exact(text: str):
    try:
        return parse_scalar(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _loose(text: str) -> Fraction:
    """Canonical scalar or decimal literal, converted exactly to a rational."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {text!r}") from None


def threads() -> int:
    raw = os.environ.get("RMATCH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"RMATCH_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(n, os.cpu_count() or 1))


# -- families -------------------------------------------------------------------------
def build_system(args, loose: bool = False) -> RandomSystem:
    conv = _loose if loose else _exact
    fam = args.family
    if fam not in FAMILIES:
        path = Path(fam)
        if not path.is_file():
            raise UsageError(f"family must be one of {FAMILIES} or a JSON file, got {fam!r}")
        try:
            return RandomSystem.from_json(path.read_text())
        except (ValueError, KeyError) as exc:
            raise UsageError(f"bad system JSON: {exc}") from None
    if args.alpha is None:
        raise UsageError("--alpha is required for built-in families")
    alpha = conv(args.alpha)
    p = None if args.p is None else conv(args.p)
    try:
        if fam == "doubling":
            return sbfamily.make_system(alpha, p)
        if fam == "cf":
            return exemplars.cf_system(alpha, Fraction(1, 2) if p is None else p)
        return exemplars.beta_system(alpha, Fraction(1, 2) if p is None else p)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def default_critical_points(args, system: RandomSystem) -> list:
    if args.family == "cf":
        return [exemplars.positive_critical(_exact(args.alpha))]
    if args.family == "beta":
        return [Fraction(1), 1 / exemplars.BETA]
    if system.critical_set is None:
        raise UsageError("this system has infinitely many critical points; pass --c")
    return list(system.critical_set)


# -- output -----------------------------------------------------------------------------
def _emit(args, name: str, text: str) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)


def _cert_summary(cert: MatchingCertificate) -> str:
    ys = ", ".join(format_scalar(y) for y in cert.Y)
    lines = [f"c={format_scalar(cert.c)}: M={cert.M}, Y={{{ys}}}, "
             f"{'strong' if cert.strong else 'not strong'}"]
    for y, (a, b) in cert.balance.items():
        lines.append(f"  balance at {format_scalar(y)}: minus={format_scalar(a)} plus={format_scalar(b)}")
    if cert.boundary_hits:
        lines.append("  note: some rays pass through a critical point")
    return "\n".join(lines)


# -- subcommands --------------------------------------------------------------------------
def cmd_match(args) -> int:
    system = build_system(args)
    cs = [_exact(c) for c in args.c] if args.c else default_critical_points(args, system)
    code = EXIT_OK
    results, text = [], []
    for c in cs:
        try:
            r = find_matching(system, c, M_max=args.depth_cap)
        except DegenerateOrbitError as exc:
            text.append(f"c={format_scalar(c)}: degenerate orbit ({exc})")
            results.append({"c": format_scalar(c), "degenerate": True, "reason": str(exc)})
            code = max(code, EXIT_DEGENERATE)
            continue
        if isinstance(r, NoMatchingWithinDepth):
            code = max(code, EXIT_DEGENERATE if r.degenerate else EXIT_NO_MATCH)
            text.append(f"c={format_scalar(c)}: no matching within depth {r.M_max}"
                        + (f" ({r.reason})" if r.reason else ""))
        else:
            text.append(_cert_summary(r))
        results.append(r.to_json())
    if args.family == "doubling" and code == EXIT_NO_MATCH:
        ma = sbfamily.m_alpha(_exact(args.alpha), args.depth_cap)
        if isinstance(ma, sbfamily.NoMatching):
            cyc = ", ".join(format_scalar(v) for v in ma.cycle)
            text.append(f"orbit of 1 under S_alpha: {ma.reason} [{cyc}]")
    if args.format == "json":
        _emit(args, "match.json", json.dumps(results, indent=2) + "\n")
    else:
        _emit(args, "match.txt", "\n".join(text) + "\n")
    return code


def cmd_density(args) -> int:
    system = build_system(args)
    try:
        res = invariant_density(system, args.route, args.depth_cap)
    except (DensityError, KernelDimensionError, UnsupportedError, DegenerateOrbitError) as exc:
        print(f"density pipeline failed: {exc}", file=sys.stderr)
        return EXIT_NO_MATCH
    f = res.density
    if args.format == "svg":
        _emit(args, "density.svg", step_plot_svg(f, title=system.name))
    elif args.format == "json":
        obj = {"breakpoints": [format_scalar(b) for b in f.breakpoints],
               "values": [format_scalar(v) for v in f.values],
               "gamma": [format_scalar(g) for g in res.gamma],
               "routes": res.routes,
               "transfer_residual": format_scalar(res.residual)}
        _emit(args, "density.json", json.dumps(obj, indent=2) + "\n")
    else:
        _emit(args, "density.csv", f.to_csv())
    print(f"transfer_residual={format_scalar(res.residual)}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_freq(args) -> int:
    if args.family != "doubling":
        raise UsageError("freq is defined for the doubling family")
    alpha = _exact(args.alpha) if args.alpha is not None else None
    if alpha is None:
        raise UsageError("--alpha is required")
    ps = [_exact(p) for p in (args.p.split(",") if args.p else ["1/2"])]
    rows = ["alpha,p,pi0_exact,pi0_decimal,routes"]
    for p in ps:
        try:
            res = sbfamily.doubling_density(alpha, p, args.depth_cap)
        except (DensityError, KernelDimensionError) as exc:
            print(f"density pipeline failed at p={format_scalar(p)}: {exc}", file=sys.stderr)
            return EXIT_NO_MATCH
        pi0 = sbfamily.pi0_exact(alpha, p, res.density)
        rows.append(f"{format_scalar(alpha)},{format_scalar(p)},{format_scalar(pi0)},"
                    f"{to_decimal(pi0)},{'|'.join(res.routes)}")
    _emit(args, "freq.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def _grid(spec: str) -> list[Fraction]:
    """Either "lo:hi:n" (n evenly spaced points, both ends included) or a comma list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid must be lo:hi:n, got {spec!r}")
        lo, hi, n = _exact(parts[0]), _exact(parts[1]), int(parts[2])
        if n < 2:
            return [lo]
        return [lo + (hi - lo) * Fraction(i, n - 1) for i in range(n)]
    return [_exact(s) for s in spec.split(",")]


def _surface_row(task):
    alpha, ps, cap = task
    return sbfamily.pi0_surface([alpha], ps, cap)


def cmd_surface(args) -> int:
    alphas, ps = _grid(args.alphas), _grid(args.ps)
    tasks = [(a, ps, args.depth_cap) for a in alphas]
    n = threads()
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as ex:
            chunks = list(ex.map(_surface_row, tasks))
    else:
        chunks = [_surface_row(t) for t in tasks]
    rows = [r for ch in chunks for r in ch]
    if args.format == "svg":
        ai = {a: i for i, a in enumerate(alphas)}
        pj = {p: j for j, p in enumerate(ps)}
        vals = {(ai[r.alpha], pj[r.p]): None if r.pi0 is None else to_float(r.pi0) for r in rows}
        _emit(args, "surface.svg", heatmap_svg([float(a) for a in alphas], [float(p) for p in ps],
                                               vals, title="pi0(alpha, p)"))
    else:
        _emit(args, "surface.csv", sbfamily.surface_csv(rows))
    return EXIT_OK


def cmd_scan(args) -> int:
    res = sbfamily.scan_matching_intervals(_exact(args.lo), _exact(args.hi), args.depth_cap)
    _emit(args, "scan.csv", res.to_csv())
    return EXIT_OK


def _marks(args) -> list[float]:
    """Pre-matching orbit points of the CF family, drawn as dashed lines."""
    if args.family != "cf":
        return []
    alpha = _loose(args.alpha)
    loc = exemplars.find_jn(alpha)
    if loc is None or loc[1] < 0:
        return []
    return [float(v) for v in exemplars.cf_pre_matching_points(alpha, *loc)]


def cmd_simulate(args) -> int:
    system = build_system(args, loose=True)
    marks = _marks(args)
    try:
        cfg = mcsim.SimConfig(system, seed=args.seed, n_points=args.points,
                              n_iterations=args.iterations, burn_in=args.burn_in,
                              n_bins=args.bins, extra_edges=tuple(marks))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    hist = mcsim.simulate_density(cfg)
    if args.format == "svg":
        exact = None
        if system.partition is not None and system.all_affine:
            try:
                exact = invariant_density(system, "auto", args.depth_cap).density
            except (DensityError, KernelDimensionError, UnsupportedError, DegenerateOrbitError):
                exact = None
        _emit(args, "simulate.svg", step_plot_svg(exact, title=system.name,
                                                  histogram=(list(hist.edges), list(hist.density)),
                                                  marks=marks))
    else:
        _emit(args, "simulate.csv", hist.to_csv())
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------
def _family_args(p, p_help="probability of the first map"):
    p.add_argument("--family", default="doubling",
                   help="doubling, cf, beta, or a path to a system JSON file")
    p.add_argument("--alpha", help="parameter as canonical text, e.g. 7/5")
    p.add_argument("--p", help=p_help)


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write outputs into this directory instead of stdout")
    common.add_argument("--depth-cap", type=int, default=24)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    common.add_argument("--config", help="JSON file whose keys mirror the command-line options")

    top = _Parser(prog="rmatch", description=__doc__.splitlines()[0], parents=[common])
    sub = top.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    m = sub.add_parser("match", parents=[common], help="certify (strong) random matching")
    _family_args(m)
    m.add_argument("--c", action="append", help="critical point (repeatable)")
    m.set_defaults(func=cmd_match)

    d = sub.add_parser("density", parents=[common], help="exact invariant step density")
    _family_args(d)
    d.add_argument("--route", choices=("auto", "matching", "markov"), default="auto")
    d.set_defaults(func=cmd_density)

    f = sub.add_parser("freq", parents=[common], help="exact frequency of the digit 0")
    _family_args(f, "comma-separated probabilities")
    f.set_defaults(func=cmd_freq)

    s = sub.add_parser("surface", parents=[common], help="grid of digit-0 frequencies")
    s.add_argument("--alphas", default="1:2:11", help="lo:hi:n or a comma list")
    s.add_argument("--ps", default="1/10:9/10:9", help="lo:hi:n or a comma list")
    s.set_defaults(func=cmd_surface)

    sc = sub.add_parser("scan", parents=[common], help="matching intervals of the doubling family")
    sc.add_argument("--lo", default="1")
    sc.add_argument("--hi", default="2")
    sc.set_defaults(func=cmd_scan)

    sim = sub.add_parser("simulate", parents=[common], help="seeded Monte-Carlo histogram")
    _family_args(sim)
    sim.add_argument("--points", type=int, default=1000)
    sim.add_argument("--iterations", type=int, default=2000)
    sim.add_argument("--burn-in", type=int, default=1000)
    sim.add_argument("--bins", type=int, default=100)
    sim.set_defaults(func=cmd_simulate)
    return top


def _config_argv(argv: list[str]) -> list[str]:
    """Expand --config FILE into arguments; explicit arguments after it still win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a file")
    path = Path(argv[i + 1])
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"bad config JSON: {exc}") from None
    rest = argv[:i] + argv[i + 2:]
    sub = cfg.pop("subcommand", None)
    expanded = []
    for key, val in cfg.items():
        flag = "--" + key.replace("_", "-")
        for v in (val if isinstance(val, list) else [val]):
            expanded += [flag, str(v)]
    if sub is not None and sub not in rest:
        rest = [sub] + rest
    # options must follow the subcommand to reach its parser
    if rest and not rest[0].startswith("-"):
        return [rest[0]] + expanded + rest[1:]
    return rest + expanded


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = make_parser().parse_args(_config_argv(argv))
        return args.func(args)
    except UsageError as exc:
        print(f"rmatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
