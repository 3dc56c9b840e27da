import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dhap import decompositions as dec, grid
from dhap.generate import gen_random
from dhap.render import labelled_tiles, render_constants, render_object

from conftest import tile


def parse(svg):
    return ET.fromstring(svg.encode("utf-8"))


def test_empty_tileset_has_axes_only():
    M = 2
    svg = render_object(grid.TileSet(), M)
    parse(svg)
    for k in range(-M, M + 1):
        assert f"k={k}" in svg
    assert "tiles" not in svg
    assert labelled_tiles(grid.TileSet(), M) == ({}, [])


def test_tree_on_zero_two_at_m1():
    M = 1
    T = grid.complete_tree(tile(1, 0, M))
    layers, tops = labelled_tiles(T, M)
    mask = layers["tiles"]
    assert tops == [tile(1, 0, M).index]
    levels = sorted({grid.interval_from_index(int(i), M).level for i in np.flatnonzero(mask)})
    assert levels == [0, 1, 2]
    # each row is fully covered: widths 2, 1 + 1, and four halves
    for level in levels:
        widths = [float(grid.interval_from_index(int(i), M).length)
                  for i in np.flatnonzero(mask) if grid.interval_from_index(int(i), M).level == level]
        assert sum(widths) == 2.0
    parse(render_object(T, M))


def test_rendering_is_deterministic():
    M = 3
    a = gen_random("carleson_weights", M, 0)
    out = dec.tree_slice(grid.complete_tree(grid.tile_from_index(0, M)), a, 1.0, 1.0, "heavy_light")
    first = render_object(out, M, title="slices")
    assert first == render_object(out, M, title="slices")
    assert first != render_object(out, M, half_plane=True, title="slices")
    assert not re.search(r"<dc:date>", first)


def test_heavy_light_layers_use_categories():
    M = 4
    a = gen_random("carleson_weights", M, 1)
    out = dec.tree_slice(grid.complete_tree(grid.tile_from_index(0, M)), a, 1.0, 1.0, "heavy_light")
    layers, _ = labelled_tiles(out, M)
    assert set(layers) <= {"small", "heavy", "light", "buffer", "exceptional"}
    assert set(layers) & {"small", "heavy", "light", "buffer"}
    svg = render_object(out, M)
    for label in layers:
        assert label in svg


def test_half_plane_view():
    M = 2
    svg = render_object(grid.complete_tree(grid.tile_from_index(0, M)), M, half_plane=True)
    parse(svg)
    assert "Carleson" in svg


def test_constants_chart():
    svg = render_constants({"a": 1.0, "b": 0.0, "c": float("inf")}, title="t")
    parse(svg)
    assert svg == render_constants({"c": float("inf"), "b": 0.0, "a": 1.0}, title="t")
    parse(render_constants({}))


def test_rejects_other_objects():
    with pytest.raises(TypeError):
        labelled_tiles(object(), 1)
