import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dhap import grid, oracles
from dhap.errors import BottomScale, GridError, TopScale
from dhap.generate import random_convex_tree, random_tileset

from conftest import seeds, tile


def iv(k, j, M):
    return grid.DyadicInterval(k, j, M)


# -- examples ---------------------------------------------------------------

def test_parent_examples():
    assert grid.parent(iv(0, 0, 1)) == iv(1, 0, 1)
    assert grid.parent(iv(-1, 1, 1)) == iv(0, 0, 1)
    with pytest.raises(TopScale):
        grid.parent(iv(1, 0, 1))


def test_children_examples():
    assert grid.children(iv(1, 0, 1)) == (iv(0, 0, 1), iv(0, 1, 1))
    assert grid.children(iv(0, 0, 1)) == (iv(-1, 0, 1), iv(-1, 1, 1))
    with pytest.raises(BottomScale):
        grid.children(iv(-1, 0, 1))


def test_tile_leq_examples():
    assert grid.tile_leq(tile(0, 0, 1), tile(1, 0, 1))
    assert not grid.tile_leq(tile(0, 0, 1), tile(0, 1, 1))
    assert grid.tile_leq(tile(1, 0, 1), tile(1, 0, 1))


def test_tile_leq_rejects_nonlacunary():
    with pytest.raises(GridError):
        grid.tile_leq(grid.nonlacunary(0, 0, 1), tile(1, 0, 1))


def test_complete_tree_examples():
    T = grid.complete_tree(tile(0, 0, 1))
    assert set(T.members) == {tile(0, 0, 1), tile(-1, 0, 1), tile(-1, 1, 1)}
    assert set(grid.complete_tree(tile(-1, 0, 1)).members) == {tile(-1, 0, 1)}
    within = grid.TileSet([tile(1, 0, 1), tile(0, 0, 1)])
    assert grid.complete_tree(tile(1, 0, 1), within).members == within


def test_is_convex_examples():
    assert not grid.is_convex(grid.TileSet([tile(1, 0, 1), tile(-1, 0, 1)]))
    assert grid.is_convex(grid.complete_tree(tile(1, 0, 1)))
    assert grid.is_convex(grid.TileSet())


def test_packing_examples():
    T = grid.complete_tree(tile(2, 0, 2))
    assert grid.packing_constant(grid.TileSet([T.top]), T) == 1
    assert grid.packing_constant(grid.TileSet(), T) == 0
    S = grid.TileSet([tile(0, 0, 2), tile(0, 1, 2), tile(1, 0, 2)])
    assert grid.packing_constant(S, T) == 1
    assert grid.packing_constant(S, T, uniform=True) == 2


def test_doubled_examples():
    assert grid.doubled_tiles([tile(-1, 0, 1), tile(-1, 1, 1)]) == grid.TileSet([tile(0, 0, 1)])
    assert grid.doubled_tiles(grid.TileSet()) == grid.TileSet()
    with pytest.raises(TopScale):
        grid.doubled_tiles([tile(1, 0, 1)])


def test_area_is_one():
    for P in grid.all_tiles(2):
        for kind in grid.TileKind:
            lo, hi = grid.Tile(P.interval, kind).frequency_band
            assert (hi - lo) * P.interval.length == 1


def test_grid_bounds():
    for M in (0, 13):
        with pytest.raises(GridError):
            grid.GridConfig(M)
    with pytest.raises(GridError):
        iv(0, 2, 1)


def test_canonical_order():
    S = grid.TileSet(grid.all_tiles(2))
    keys = [(-P.interval.k, P.interval.j) for P in S]
    assert keys == sorted(keys)


def test_heap_index_round_trip():
    M = 3
    for i in range(grid.GridConfig(M).n_tiles):
        assert grid.interval_from_index(i, M).index == i


# -- exhaustive order properties --------------------------------------------

@pytest.mark.parametrize("M", [1, 2, 3])
def test_partial_order_and_nesting(M):
    tiles = grid.all_tiles(M)
    leq = np.array([[grid.tile_leq(P, Q) for Q in tiles] for P in tiles])
    assert leq.diagonal().all()
    assert not (leq & leq.T & ~np.eye(len(tiles), dtype=bool)).any()
    two_step = (leq.astype(int) @ leq.astype(int)) > 0
    assert not (two_step & ~leq).any()
    for I, J in itertools.product(grid.all_intervals(M), repeat=2):
        a0, a1 = I.cell_range
        b0, b1 = J.cell_range
        overlap = min(a1, b1) > max(a0, b0)
        assert overlap == I.intersects(J)


# -- randomized properties --------------------------------------------------

@given(seed=seeds, M=st.integers(1, 3))
def test_convexity_matches_pairwise_definition(seed, M):
    S = random_tileset(M, np.random.default_rng(seed), density=0.4)
    assert grid.is_convex(S) == oracles.is_convex_pairwise(set(S.members))


@given(seed=seeds, M=st.integers(1, 4))
def test_complete_and_random_trees_convex(seed, M):
    rng = np.random.default_rng(seed)
    T = random_convex_tree(M, rng)
    assert grid.is_convex(T)
    top = grid.tile_from_index(int(rng.integers(grid.GridConfig(M).n_tiles)), M)
    assert grid.is_convex(grid.complete_tree(top))


@given(seed=seeds, M=st.integers(1, 3))
def test_uniform_packing_matches_enumeration(seed, M):
    rng = np.random.default_rng(seed)
    T = grid.complete_tree(grid.tile_from_index(0, M))
    S = random_tileset(M, rng, density=0.3)
    got = grid.packing_constant(S, T, uniform=True)
    assert got == pytest.approx(oracles.uniform_packing_all_intervals(set(S.members), M), abs=1e-12)


@given(seed=seeds, M=st.integers(1, 4), uniform=st.booleans())
def test_doubling_at_most_doubles_packing(seed, M, uniform):
    rng = np.random.default_rng(seed)
    T = grid.complete_tree(grid.tile_from_index(0, M))
    S = grid.TileSet(P for P in random_tileset(M, rng, 0.3) if P.interval.k < M)
    before = grid.packing_constant(S, T, uniform)
    after = grid.packing_constant(grid.doubled_tiles(S), T, uniform)
    assert after <= 2 * before + 1e-12


@given(seed=seeds, M=st.integers(1, 4))
def test_maximal_tiles_disjoint(seed, M):
    S = random_tileset(M, np.random.default_rng(seed), 0.3)
    top = list(grid.maximal_tiles(S))
    for P, Q in itertools.combinations(top, 2):
        assert not P.interval.intersects(Q.interval)
    for P in S:
        assert any(grid.tile_leq(P, Q) for Q in top)
