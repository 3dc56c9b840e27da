import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dhap import czop, decompositions as dec, grid, serialize as ser
from dhap.errors import FormatError, TruncationViolation
from dhap.functions import CoefficientMap, DyadicFunction
from dhap.generate import gen_random, random_convex_tree, random_tileset

from conftest import seeds, tile

KINDS = ("function", "mean_zero_function", "weights", "carleson_weights", "kernel", "accretive_b")


def round_trip(obj):
    doc = json.loads(ser.dumps(ser.to_json(obj)))
    back = ser.load_any(doc)
    assert ser.to_json(back) == ser.to_json(obj)
    return back


def test_complex_encoding():
    assert ser.complex_to_json(1 - 2j) == [1.0, -2.0]
    assert ser.complex_from_json([1.5, 0.25]) == 1.5 + 0.25j
    assert ser.complex_from_json(3) == 3
    with pytest.raises(FormatError):
        ser.complex_from_json([1, 2, 3])


def test_compact_real_form():
    f = DyadicFunction(1, [1.0, 2.0, 3.0, 4.0])
    doc = ser.function_to_json(f)
    assert doc == {"M": 1, "real": True, "values": [1.0, 2.0, 3.0, 4.0]}
    g = DyadicFunction(1, [1.0, 2.0, 3.0, 4.0 + 1e-300j])
    assert "real" not in ser.function_to_json(g)
    assert ser.function_from_json(ser.function_to_json(g)).values[3] == 4.0 + 1e-300j


def test_dumps_is_canonical():
    assert ser.dumps({"b": 1, "a": [1, 2]}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'


@given(seed=seeds, M=st.integers(1, 4), kind=st.sampled_from(KINDS))
def test_generated_round_trip(seed, M, kind):
    obj = gen_random(kind, M, seed)
    back = round_trip(obj)
    if isinstance(obj, czop.PerfectDyadicKernel):
        assert np.array_equal(back.lr, obj.lr) and np.array_equal(back.rl, obj.rl)
    else:
        assert np.array_equal(back.values, obj.values)


@given(seed=seeds, M=st.integers(1, 4))
def test_tileset_and_tree_round_trip(seed, M):
    rng = np.random.default_rng(seed)
    S = random_tileset(M, rng)
    if len(S):
        assert round_trip(S) == S
    T = random_convex_tree(M, rng)
    back = round_trip(T)
    assert back.top == T.top and set(back.members) == set(T.members)


@pytest.mark.parametrize("kind", ["constant", "random", "global", "explicit"])
def test_system_round_trip(kind):
    M = 1
    if kind == "constant":
        sys = czop.AccretiveSystem.constant(M)
    elif kind == "random":
        sys = gen_random("accretive_system", M, 7)
    elif kind == "global":
        b = gen_random("accretive_b", M, 1)
        sys = czop.AccretiveSystem.from_global(b, b)
    else:
        table = {P: DyadicFunction.indicator(P.interval) * (1 + 0.5j) for P in grid.all_tiles(M)}
        sys = czop.AccretiveSystem(M, table, table)
    back = round_trip(sys)
    for P in grid.all_tiles(M):
        for side in ("b1", "b2"):
            assert np.array_equal(back.get(side, P).values, sys.get(side, P).values)


def test_decomposition_round_trips():
    M = 2
    a = gen_random("carleson_weights", M, 3)
    top = grid.complete_tree(grid.tile_from_index(0, M))
    f = gen_random("mean_zero_function", M, 3)
    outs = [
        (dec.tree_slice(top, a, 1.0, 1.0, "garnett"), "tree_slice"),
        (dec.tree_slice(top, a, 1.0, 1.0, "heavy_light"), "tree_slice"),
        (dec.tree_select(top.members, a, 1), "tree_select"),
        (dec.atomic_decompose(f, 1.0), "atoms"),
    ]
    for out, kind in outs:
        doc = json.loads(ser.dumps(ser.decomposition_to_json(out, M, kind)))
        back = ser.load_any(doc)
        assert ser.decomposition_to_json(back, M, kind) == doc


def test_kernel_parse_rules():
    doc = {"M": 1, "sibling_constants": [{"k": 0, "j": 0, "lr": [1, 0]}]}
    K = ser.load_any(doc)
    assert K.lr[tile(0, 0, 1).index] == 1 and K.rl[tile(0, 0, 1).index] == 0
    with pytest.raises(TruncationViolation):
        ser.load_any({"M": 1, "sibling_constants": [{"k": 1, "j": 0, "lr": [1, 0]}]})


@pytest.mark.parametrize("doc", [
    [],
    {"unexpected": 1},
    {"M": 1, "values": [1, 2]},
    {"M": 1, "values": [[1, 2, 3], 0, 0, 0]},
    {"M": 1, "tiles": [{"interval": {"k": 5, "j": 0}}]},
    {"M": 1, "tiles": [{"interval": {"k": 0, "j": 0}, "kind": "sideways"}]},
    {"M": 1, "entries": [{"tile": {"interval": {"k": 0, "j": 0}, "kind": "nonlacunary"}, "value": 1}]},
    {"M": 1, "kind": "mystery"},
    {"M": 1, "tiles": [], "top": {"interval": {"k": 0, "j": 0}}},
])
def test_malformed_documents(doc):
    with pytest.raises(FormatError):
        ser.load_any(doc)


def test_read_json_rejects_bad_text(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json", encoding="utf-8")
    with pytest.raises(FormatError):
        ser.read_json(p)
