"""Command-line entry point: ``dhap verify | decompose | render | gen | paraproduct``.

Exit status is 0 on success, 1 when a check or hypothesis fails and 2 for
malformed input or configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import decompositions as dec
from . import grid
from . import paraproducts as pp
from . import serialize as ser
from .errors import ConfigInvalid, DhapError, FormatError, GridError, HypothesisFail
from .functions import CoefficientMap, DyadicFunction, maximal_size, tile_averages
from .generate import KINDS, gen_random, rng_for

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(path: str | None, *types):
    if not path:
        names = " or ".join(t.__name__ for t in types) or "input"
        raise ConfigInvalid(f"missing input file ({names})")
    obj = ser.load_any(ser.read_json(path))
    if types and not isinstance(obj, types):
        names = " or ".join(t.__name__ for t in types)
        raise FormatError(f"{path}: expected {names}, got {type(obj).__name__}")
    return obj


def _tau_rel() -> float:
    raw = os.environ.get("DHAP_TOL")
    if raw:
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigInvalid(f"DHAP_TOL={raw!r} is not a number") from exc
    return 1e-9


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    from .suites import RunConfig, run_suite, write_report

    config = RunConfig(M=args.m, seed=args.seed, trials=args.trials, tau_rel=_tau_rel(),
                       c_acc=args.c_acc, out_dir=args.out)
    report = run_suite(args.suite, config)
    paths = write_report(report, args.out)
    text = report.to_text()
    if not args.quiet:
        sys.stdout.write(text)
    else:
        sys.stdout.write(text.splitlines()[0] + "\n")
    for c in report.failures:
        sys.stderr.write(f"failed: {c.name} (seed {c.seed}) {c.detail}\n")
    sys.stdout.write(f"report written to {paths['report.json']}\n")
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# decompose


def cmd_decompose(args) -> int:
    obj = _load(args.input, CoefficientMap, DyadicFunction)
    M = obj.M
    top = grid.complete_tree(grid.tile_from_index(0, M))
    kind = args.kind
    if kind in ("tree_slice", "tree_select") and not isinstance(obj, CoefficientMap):
        raise FormatError(f"{kind} needs a weights JSON (a coefficient map)")
    if kind in ("mean_select", "atoms") and not isinstance(obj, DyadicFunction):
        raise FormatError(f"{kind} needs a function JSON")
    if kind == "tree_slice":
        delta = args.delta if args.delta is not None else 1.0
        C0 = args.c0 if args.c0 is not None else max(maximal_size(obj), delta)
        algorithm = args.algorithm.replace("-", "_")
        out = dec.tree_slice(top, obj, C0, delta, algorithm)
    elif kind == "tree_select":
        n = args.n if args.n is not None else _ceil_log2(maximal_size(obj))
        out = dec.tree_select(top.members, obj, n)
    elif kind == "mean_select":
        n = args.n if args.n is not None else _ceil_log2(float(np.abs(tile_averages(abs(obj))).max()))
        out = dec.mean_select(top.members, obj, n)
    else:
        out = dec.atomic_decompose(obj, args.p)
    doc = ser.decomposition_to_json(out, M, kind)
    _emit(ser.dumps(doc), args.output)
    if args.output:
        side = Path(args.output).with_suffix(".measured.json")
        side.write_text(ser.dumps(doc["measured"]), encoding="utf-8")
    return EXIT_OK


def _ceil_log2(x: float) -> int:
    return math.ceil(math.log2(x)) if x > 0 else 0


# ---------------------------------------------------------------------------
# render


def cmd_render(args) -> int:
    from .render import render_object

    doc = ser.read_json(args.input)
    if not isinstance(doc, dict) or "M" not in doc:
        raise FormatError("render input must carry its grid exponent M")
    obj = ser.load_any(doc)
    drawable = (dec.TreeDecomposition, dec.Selection, dec.AtomicDecomposition, grid.TileSet, grid.Tree)
    if not isinstance(obj, drawable):
        raise FormatError("render needs a decomposition or tile set")
    svg = render_object(obj, int(doc["M"]), half_plane=args.half_plane, title=args.title)
    _emit(svg, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    try:
        grid.check_m(args.m)
    except GridError as exc:
        raise ConfigInvalid(str(exc)) from exc
    obj = gen_random(args.kind, args.m, args.seed)
    _emit(ser.dumps(ser.to_json(obj)), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# paraproduct


def cmd_paraproduct(args) -> int:
    if args.op == "report":
        if args.f and args.g:
            f = _load(args.f, DyadicFunction)
            g = _load(args.g, DyadicFunction)
            rep = pp.paraproduct_bound_report(args.kind, f, g, p=args.p, q=args.q, which=args.which)
            doc = {"kind": rep.kind, "trials": 1, "max_ratio": rep.ratio, "per_trial": [rep.ratio],
                   "details": rep.details}
        else:
            pairs = []
            for t in range(args.trials):
                rng = rng_for(args.seed, t)
                f = gen_random("mean_zero_function", args.m, int(rng.integers(2**63)))
                g = gen_random("function", args.m, int(rng.integers(2**63)))
                pairs.append((f, g))
            doc = pp.batch_report(args.kind, pairs, p=args.p, q=args.q, which=args.which)
        _emit(ser.dumps(doc), args.output)
        return EXIT_OK
    f = _load(args.f, DyadicFunction)
    if args.op == "multiplier":
        a = _load(args.symbol, CoefficientMap)
        _emit(ser.dumps(ser.function_to_json(pp.multiplier_apply(a, f))), args.output)
        return EXIT_OK
    g = _load(args.g, DyadicFunction)
    if args.op in ("hl", "lh", "hh"):
        out = {"hl": pp.pi_hl, "lh": pp.pi_lh, "hh": pp.pi_hh}[args.op](f, g)
        _emit(ser.dumps(ser.function_to_json(out)), args.output)
        return EXIT_OK
    if args.op == "identity":
        r = pp.product_identity_residual(f, g)
        _emit(ser.dumps({"residual": r}), args.output)
        return EXIT_OK
    if args.op == "permute":
        h = _load(args.h, DyadicFunction)
        rep = pp.permute_check(f, g, h)
        doc = {"pairings": {k: ser.complex_to_json(v) for k, v in rep.pairings.items()},
               "common": ser.complex_to_json(rep.common), "discrepancy": rep.discrepancy,
               "hh_multiplier": rep.hh_mult, "triple_sum": rep.tril, "scale": rep.scale}
        _emit(ser.dumps(doc), args.output)
        return EXIT_OK
    raise ConfigInvalid(f"unknown operation {args.op!r}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .suites import SUITES

    parser = argparse.ArgumentParser(prog="dhap", description="Finite dyadic harmonic analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites and write a report")
    v.add_argument("--suite", default="all", choices=("all", *SUITES))
    v.add_argument("--m", type=int, default=4)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--c-acc", type=float, default=0.5)
    v.add_argument("--out", default="dhap-report", help="output directory")
    v.add_argument("--quiet", action="store_true", help="print only the summary line")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("decompose", help="run a stopping-time decomposition on a JSON input")
    d.add_argument("--kind", required=True, choices=("tree_slice", "tree_select", "mean_select", "atoms"))
    d.add_argument("--input", required=True)
    d.add_argument("--delta", type=float)
    d.add_argument("--c0", type=float, help="size bound C0 for tree_slice (default: measured)")
    d.add_argument("--algorithm", default="garnett", choices=("garnett", "heavy-light", "heavy_light"))
    d.add_argument("--n", type=int, help="selection level (default: smallest admissible)")
    d.add_argument("--p", type=float, default=1.0, help="H^p exponent for atoms")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_decompose)

    r = sub.add_parser("render", help="draw a decomposition or tile set as SVG")
    r.add_argument("--input", required=True)
    r.add_argument("-o", "--output")
    r.add_argument("--half-plane", action="store_true", help="Carleson-box view")
    r.add_argument("--title")
    r.set_defaults(func=cmd_render)

    g = sub.add_parser("gen", help="emit a seeded random instance as JSON")
    g.add_argument("--kind", required=True, choices=KINDS)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    p = sub.add_parser("paraproduct", help="paraproducts, identities and bound reports")
    p.add_argument("--op", required=True,
                   choices=("hl", "lh", "hh", "multiplier", "identity", "permute", "report"))
    p.add_argument("--f")
    p.add_argument("--g")
    p.add_argument("--h")
    p.add_argument("--symbol")
    p.add_argument("--kind", default="hh_L2BMO",
                   choices=("hl_L2Linf", "lh_L2BMO", "hh_L2BMO", "hh_BMOBMO", "weak_LpLq"))
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--which", default="hh", choices=("hl", "lh", "hh"))
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_paraproduct)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, ConfigInvalid, json.JSONDecodeError, OSError) as exc:
        sys.stderr.write(f"dhap: {exc}\n")
        return EXIT_INPUT
    except HypothesisFail as exc:
        sys.stderr.write(f"dhap: hypothesis failed: {exc}\n")
        return EXIT_FAIL
    except DhapError as exc:
        sys.stderr.write(f"dhap: {type(exc).__name__}: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
