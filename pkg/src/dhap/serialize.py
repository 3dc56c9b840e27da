"""JSON encoding for every data type the command line reads or writes.

Complex numbers travel as ``[re, im]`` pairs.  Functions whose imaginary
parts are all exactly zero use the compact ``"real": true`` form.  Every
``*_to_json`` has a matching ``*_from_json`` and the pair round-trips exactly.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from . import grid
from .czop import AccretiveSystem, PerfectDyadicKernel
from .decompositions import Atom, AtomicDecomposition, Selection, TreeDecomposition
from .errors import FormatError, GridError, TruncationViolation
from .functions import CoefficientMap, DyadicFunction
from .grid import DyadicInterval, Tile, TileKind, TileSet, Tree


def dumps(obj: Any) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _default(x):
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return complex_to_json(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (Tile, DyadicInterval)):
        return repr(x)
    raise TypeError(f"cannot encode {type(x).__name__}")


def _require(obj: dict, *keys):
    if not isinstance(obj, dict):
        raise FormatError(f"expected an object, got {type(obj).__name__}")
    missing = [k for k in keys if k not in obj]
    if missing:
        raise FormatError(f"missing field(s): {', '.join(missing)}")


def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if not (isinstance(x, list) and len(x) == 2):
        raise FormatError(f"complex values are [re, im] pairs, got {x!r}")
    return complex(float(x[0]), float(x[1]))


# ---------------------------------------------------------------------------
# grid objects


def interval_to_json(I: DyadicInterval) -> dict:
    return {"k": I.k, "j": I.j}


def interval_from_json(obj, M: int) -> DyadicInterval:
    _require(obj, "k", "j")
    try:
        return DyadicInterval(int(obj["k"]), int(obj["j"]), M)
    except GridError as exc:
        raise FormatError(str(exc)) from exc


def tile_to_json(P: Tile) -> dict:
    return {"interval": interval_to_json(P.interval), "kind": P.kind.value}


def tile_from_json(obj, M: int) -> Tile:
    _require(obj, "interval")
    kind = obj.get("kind", "lacunary")
    try:
        return Tile(interval_from_json(obj["interval"], M), TileKind(kind))
    except ValueError as exc:
        raise FormatError(f"unknown tile kind {kind!r}") from exc


def tileset_to_json(S, M: int) -> dict:
    out = {"M": M, "tiles": [tile_to_json(P) for P in TileSet(S)]}
    if isinstance(S, Tree):
        out["top"] = tile_to_json(S.top)
    return out


def tileset_from_json(obj) -> TileSet | Tree:
    _require(obj, "M", "tiles")
    M = int(obj["M"])
    tiles = TileSet(tile_from_json(t, M) for t in obj["tiles"])
    if "top" in obj:
        try:
            return Tree(tile_from_json(obj["top"], M), tiles)
        except GridError as exc:
            raise FormatError(str(exc)) from exc
    return tiles


# ---------------------------------------------------------------------------
# functions and coefficient maps


def function_to_json(f: DyadicFunction) -> dict:
    if not np.any(f.values.imag):
        return {"M": f.M, "real": True, "values": [float(v) for v in f.values.real]}
    return {"M": f.M, "values": [complex_to_json(v) for v in f.values]}


def function_from_json(obj) -> DyadicFunction:
    _require(obj, "M", "values")
    M = int(obj["M"])
    if obj.get("real"):
        vals = np.array([float(v) for v in obj["values"]], dtype=np.complex128)
    else:
        vals = np.array([complex_from_json(v) for v in obj["values"]], dtype=np.complex128)
    try:
        return DyadicFunction(M, vals)
    except GridError as exc:
        raise FormatError(str(exc)) from exc


def coefficients_to_json(c: CoefficientMap) -> dict:
    entries = [{"tile": tile_to_json(P), "value": complex_to_json(v)} for P, v in c.entries()]
    return {"M": c.M, "complex": bool(np.iscomplexobj(c.values)), "entries": entries}


def coefficients_from_json(obj) -> CoefficientMap:
    _require(obj, "M", "entries")
    M = int(obj["M"])
    is_complex = bool(obj.get("complex", False))
    vals = np.zeros(grid.GridConfig(M).n_tiles, dtype=np.complex128 if is_complex else float)
    for e in obj["entries"]:
        _require(e, "tile", "value")
        P = tile_from_json(e["tile"], M)
        if not P.lacunary:
            raise FormatError("coefficient maps live on lacunary tiles")
        z = complex_from_json(e["value"])
        vals[P.index] = z if is_complex else z.real
    return CoefficientMap(M, vals)


# ---------------------------------------------------------------------------
# kernels and systems


def kernel_to_json(K: PerfectDyadicKernel) -> dict:
    consts = [{"k": I.k, "j": I.j, "lr": complex_to_json(a), "rl": complex_to_json(b)}
              for I, a, b in K.sibling_constants()]
    return {"M": K.M, "sibling_constants": consts}


def kernel_from_json(obj) -> PerfectDyadicKernel:
    _require(obj, "M", "sibling_constants")
    M = int(obj["M"])
    entries = {}
    for e in obj["sibling_constants"]:
        _require(e, "k", "j")
        I = interval_from_json(e, M)
        a = complex_from_json(e.get("lr", [0.0, 0.0]))
        b = complex_from_json(e.get("rl", [0.0, 0.0]))
        if I.k == M and (a != 0 or b != 0):
            raise TruncationViolation("top-scale sibling constants must vanish")
        entries[I] = (a, b)
    try:
        return PerfectDyadicKernel.from_entries(M, entries)
    except GridError as exc:
        raise FormatError(str(exc)) from exc


def system_to_json(sys: AccretiveSystem) -> dict:
    spec = sys.spec
    kind = spec["kind"]
    if kind == "constant":
        return {"M": sys.M, "kind": "constant"}
    if kind == "random":
        return {"M": sys.M, "kind": "random", "seed": spec["seed"], "sigma": spec["sigma"]}
    if kind == "global":
        return {"M": sys.M, "kind": "global", "b1": function_to_json(spec["b1"]),
                "b2": function_to_json(spec["b2"])}
    n = grid.GridConfig(sys.M).n_tiles
    fams = {}
    for side in ("b1", "b2"):
        fams[side] = [{"tile": tile_to_json(grid.tile_from_index(i, sys.M)),
                       "function": function_to_json(sys.get(side, grid.tile_from_index(i, sys.M)))}
                      for i in range(n)]
    return {"M": sys.M, "kind": "explicit", **fams}


def system_from_json(obj) -> AccretiveSystem:
    from .generate import random_accretive_system

    _require(obj, "M", "kind")
    M = int(obj["M"])
    kind = obj["kind"]
    if kind == "constant":
        return AccretiveSystem.constant(M)
    if kind == "random":
        return random_accretive_system(M, int(obj["seed"]), float(obj.get("sigma", 0.5)))
    if kind == "global":
        return AccretiveSystem.from_global(function_from_json(obj["b1"]), function_from_json(obj["b2"]))
    if kind == "explicit":
        tables = {}
        for side in ("b1", "b2"):
            _require(obj, side)
            tables[side] = {tile_from_json(e["tile"], M): function_from_json(e["function"])
                            for e in obj[side]}
        return AccretiveSystem(M, tables["b1"], tables["b2"])
    raise FormatError(f"unknown system kind {kind!r}")


# ---------------------------------------------------------------------------
# decompositions


def _clean(x):
    """Plain JSON values for a measured-constants mapping."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return complex_to_json(x)
    if isinstance(x, (Tile, DyadicInterval)):
        return repr(x)
    return x


def _tree_to_json(T: Tree, M: int) -> dict:
    return {"top": tile_to_json(T.top), "tiles": [tile_to_json(P) for P in T.members]}


def _tree_from_json(obj, M: int) -> Tree:
    _require(obj, "top", "tiles")
    return Tree(tile_from_json(obj["top"], M), TileSet(tile_from_json(t, M) for t in obj["tiles"]))


def decomposition_to_json(dec, M: int, kind: str | None = None) -> dict:
    if isinstance(dec, TreeDecomposition):
        out = {
            "kind": kind or "tree_slice",
            "M": M,
            "trees": [{"label": label, **_tree_to_json(T, M)} for label, T in dec.trees],
            "exceptional": [tile_to_json(P) for P in dec.exceptional_tiles],
            "exceptional_label": dec.exceptional_label,
            "measured": _clean(dec.measured),
        }
        if dec.trace:
            out["trace"] = {
                key: ([_tree_to_json(T, M) for T in val] if isinstance(val, list)
                      else [tile_to_json(P) for P in val])
                for key, val in dec.trace.items()
            }
        return out
    if isinstance(dec, Selection):
        return {
            "kind": kind or "tree_select",
            "M": M,
            "trees": [_tree_to_json(T, M) for T in dec.trees],
            "remainder": [tile_to_json(P) for P in dec.remainder],
            "measured": _clean(dec.measured),
        }
    if isinstance(dec, AtomicDecomposition):
        return {
            "kind": kind or "atoms",
            "M": M,
            "p": dec.p,
            "atoms": [{"interval": interval_to_json(a.interval), "coefficient": a.coefficient,
                       "n": a.n, "function": function_to_json(a.function)} for a in dec.atoms],
            "measured": _clean(dec.measured),
        }
    raise TypeError(f"cannot encode {type(dec).__name__}")


def decomposition_from_json(obj):
    _require(obj, "kind", "M")
    M = int(obj["M"])
    kind = obj["kind"]
    if kind == "tree_slice":
        trees = [(t["label"], _tree_from_json(t, M)) for t in obj["trees"]]
        exc = TileSet(tile_from_json(t, M) for t in obj["exceptional"])
        trace = {}
        for key, val in obj.get("trace", {}).items():
            if val and isinstance(val[0], dict) and "top" in val[0]:
                trace[key] = [_tree_from_json(t, M) for t in val]
            elif key == "buffer":
                trace[key] = TileSet(tile_from_json(t, M) for t in val)
            else:
                trace[key] = []
        return TreeDecomposition(trees, exc, obj.get("measured", {}),
                                 obj.get("exceptional_label", "exceptional"), trace)
    if kind in ("tree_select", "mean_select"):
        return Selection([_tree_from_json(t, M) for t in obj["trees"]],
                         TileSet(tile_from_json(t, M) for t in obj["remainder"]),
                         obj.get("measured", {}))
    if kind == "atoms":
        atoms = [Atom(interval_from_json(a["interval"], M), float(a["coefficient"]),
                      function_from_json(a["function"]), int(a["n"])) for a in obj["atoms"]]
        return AtomicDecomposition(atoms, float(obj["p"]), obj.get("measured", {}))
    raise FormatError(f"unknown decomposition kind {kind!r}")


# ---------------------------------------------------------------------------
# dispatch on the JSON shape


def to_json(obj) -> dict:
    if isinstance(obj, DyadicFunction):
        return function_to_json(obj)
    if isinstance(obj, CoefficientMap):
        return coefficients_to_json(obj)
    if isinstance(obj, PerfectDyadicKernel):
        return kernel_to_json(obj)
    if isinstance(obj, AccretiveSystem):
        return system_to_json(obj)
    if isinstance(obj, (TileSet, Tree)):
        M = obj.top.M if isinstance(obj, Tree) else next(iter(obj)).M
        return tileset_to_json(obj, M)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def load_any(obj):
    """Parse a JSON document into whichever object its fields describe."""
    if not isinstance(obj, dict):
        raise FormatError("top-level JSON value must be an object")
    if "sibling_constants" in obj:
        return kernel_from_json(obj)
    if "entries" in obj:
        return coefficients_from_json(obj)
    if "values" in obj:
        return function_from_json(obj)
    if "tiles" in obj:
        return tileset_from_json(obj)
    if obj.get("kind") in ("constant", "random", "global", "explicit"):
        return system_from_json(obj)
    if "kind" in obj:
        return decomposition_from_json(obj)
    raise FormatError("unrecognised JSON document")


def read_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def finite_or_none(x: float):
    return x if isinstance(x, float) and math.isfinite(x) else None
