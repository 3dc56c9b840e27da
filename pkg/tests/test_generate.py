import numpy as np
import pytest
from hypothesis import given, strategies as st

from dhap import czop, grid, serialize as ser
from dhap.functions import maximal_size, tile_averages
from dhap.generate import KINDS, gen_random, random_convex_tree, rng_for

from conftest import seeds


@pytest.mark.parametrize("kind", KINDS)
def test_same_seed_same_bytes(kind):
    a = ser.dumps(ser.to_json(gen_random(kind, 3, 11)))
    b = ser.dumps(ser.to_json(gen_random(kind, 3, 11)))
    assert a == b
    assert a != ser.dumps(ser.to_json(gen_random(kind, 3, 12)))


def test_unknown_kind():
    with pytest.raises(ValueError):
        gen_random("nothing", 2, 0)


def test_streams_are_independent():
    assert rng_for(1, 0).integers(2**62) != rng_for(1, 1).integers(2**62)


@pytest.mark.parametrize("seed", range(5))
def test_carleson_weights_normalized(seed):
    a = gen_random("carleson_weights", 4, seed)
    assert abs(maximal_size(a) - 1) <= 1e-9
    assert np.all(a.values >= 0)


@given(seed=seeds, M=st.integers(1, 5))
def test_kernel_admissibility_one(seed, M):
    K = gen_random("kernel", M, seed)
    assert czop.kernel_admissibility(K) == pytest.approx(1.0, rel=1e-12)


@given(seed=seeds, M=st.integers(1, 5))
def test_accretive_b_margin(seed, M):
    b = gen_random("accretive_b", M, seed)
    assert b.values.real.min() >= 0.5
    assert np.abs(tile_averages(b)).min() >= 0.5
    assert czop.accretivity(b).margin >= 0.5


@given(seed=seeds, M=st.integers(1, 4))
def test_mean_zero(seed, M):
    f = gen_random("mean_zero_function", M, seed)
    assert abs(f.integral()) <= 1e-9 * max(1.0, np.abs(f.values).sum())


@given(seed=seeds, M=st.integers(1, 3))
def test_system_pieces_normalized(seed, M):
    sys = gen_random("accretive_system", M, seed)
    P = grid.tile_from_index(seed % grid.GridConfig(M).n_tiles, M)
    for side in ("b1", "b2"):
        f = sys.get(side, P)
        a, c = P.interval.cell_range
        assert np.all(np.delete(f.values, np.s_[a:c]) == 0)
        assert f.values[a:c].mean() == pytest.approx(1.0)
    assert np.array_equal(sys.get("b1", P).values, gen_random("accretive_system", M, seed).get("b1", P).values)


@given(seed=seeds, M=st.integers(1, 4))
def test_random_trees_convex(seed, M):
    T = random_convex_tree(M, np.random.default_rng(seed))
    assert grid.is_convex(grid.TileSet(T.members))
    assert all(grid.tile_leq(P, T.top) for P in T.members)
