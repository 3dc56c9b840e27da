"""Deterministic SVG pictures of tile families and of measured constants.

The default view has one row per dyadic scale: a tile over ``I`` is the
rectangle ``I x [row, row + 1]``, coarse scales at the top.  The half-plane
view draws each tile as the top half of its Carleson box, ``I x [|I|/2, |I|]``,
on a logarithmic height axis.

Output is byte-identical for identical input: the SVG hash salt is fixed and
no date is written.
"""

from __future__ import annotations

import io
import math

import matplotlib

matplotlib.use("Agg")

from matplotlib.collections import PatchCollection  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Patch, Rectangle  # noqa: E402

import numpy as np  # noqa: E402

from . import grid  # noqa: E402
from .decompositions import AtomicDecomposition, Selection, TreeDecomposition  # noqa: E402
from .grid import TileSet, Tree  # noqa: E402

COLORS = {
    "small": "#4c72b0",
    "heavy": "#c44e52",
    "light": "#dd8452",
    "buffer": "#8172b3",
    "exceptional": "#937860",
    "selected": "#55a868",
    "remainder": "#bbbbbb",
    "tiles": "#64b5cd",
}

_RC = {"svg.hashsalt": "dhap", "svg.fonttype": "none", "font.size": 8}


def _svg(fig: Figure) -> str:
    buf = io.StringIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def _corner(b):
    x, y, w, h = b
    return (x, y), w, h


def labelled_tiles(obj, M: int) -> tuple[dict[str, np.ndarray], list[int]]:
    """Map a decomposition or tile family to ``label -> heap mask`` and tree tops.

    A heavy-light slicing with a recorded first pass is drawn by its heavy,
    light, small and buffer categories.  Later labels win where masks overlap.
    """
    n = grid.GridConfig(M).n_tiles
    layers: dict[str, np.ndarray] = {}
    tops: list[int] = []

    def add(label, tiles):
        mask = layers.setdefault(label, np.zeros(n, dtype=bool))
        for P in tiles:
            mask[P.index] = True

    if isinstance(obj, TreeDecomposition):
        trace = obj.trace or {}
        if trace:
            for label in ("small", "light", "heavy"):
                for T in trace.get(label, []):
                    add(label, T.members)
                    tops.append(T.top.index)
            add("buffer", trace.get("buffer", TileSet()))
        else:
            for label, T in obj.trees:
                add(label, T.members)
                tops.append(T.top.index)
        add(obj.exceptional_label, obj.exceptional_tiles)
    elif isinstance(obj, Selection):
        for T in obj.trees:
            add("selected", T.members)
            tops.append(T.top.index)
        add("remainder", obj.remainder)
    elif isinstance(obj, AtomicDecomposition):
        for atom in obj.atoms:
            T = grid.complete_tree(grid.Tile(atom.interval))
            add("selected", T.members)
            tops.append(T.top.index)
    elif isinstance(obj, Tree):
        add("tiles", obj.members)
        tops.append(obj.top.index)
    elif isinstance(obj, TileSet):
        add("tiles", obj)
    else:
        raise TypeError(f"cannot render {type(obj).__name__}")
    return {k: v for k, v in layers.items() if v.any()}, sorted(set(tops))


def render_tiles(M: int, layers: dict[str, np.ndarray], tops=(), half_plane: bool = False,
                 title: str | None = None) -> str:
    """SVG for labelled heap masks on the grid with exponent ``M``."""
    grid.check_m(M)
    width = 2.0**M
    n_levels = 2 * M + 1
    fig = Figure(figsize=(7.0, 1.2 + 0.35 * n_levels))
    ax = fig.add_subplot()
    ax.set_xlim(0, width)
    ax.set_xlabel("x")
    if half_plane:
        ax.set_yscale("log", base=2)
        ax.set_ylim(2.0 ** (-M - 1), width)
        ax.set_ylabel("height (Carleson box)")
    else:
        ax.set_ylim(0, n_levels)
        ax.set_yticks([n_levels - level - 0.5 for level in range(n_levels)])
        ax.set_yticklabels([f"k={M - level}" for level in range(n_levels)])
        ax.set_ylabel("scale")

    def box(index):
        I = grid.interval_from_index(index, M)
        x0, w = I.j * 2.0**I.k, 2.0**I.k
        if half_plane:
            return x0, w / 2, w, w / 2
        row = n_levels - I.level - 1
        return x0, row, w, 1.0

    handles = []
    for label in sorted(layers):
        color = COLORS.get(label, "#999999")
        rects = [Rectangle(*_corner(box(int(i)))) for i in np.flatnonzero(layers[label])]
        ax.add_collection(PatchCollection(rects, facecolor=color, edgecolor="black",
                                          linewidth=0.3))
        handles.append(Patch(facecolor=color, edgecolor="black", label=label))
    if len(tops):
        rects = [Rectangle(*_corner(box(int(i)))) for i in tops]
        ax.add_collection(PatchCollection(rects, facecolor="none", edgecolor="black",
                                          linewidth=1.4))
    if handles:
        ax.legend(handles=handles, loc="upper left", bbox_to_anchor=(1.01, 1.0), frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _svg(fig)


def render_object(obj, M: int, half_plane: bool = False, title: str | None = None) -> str:
    layers, tops = labelled_tiles(obj, M)
    return render_tiles(M, layers, tops, half_plane=half_plane, title=title)


def render_constants(constants: dict[str, float], title: str | None = None) -> str:
    """Horizontal bar chart of named nonnegative constants on a log axis.

    Zero or non-finite values are listed but drawn without a bar.
    """
    names = sorted(constants)
    fig = Figure(figsize=(7.0, 1.0 + 0.22 * max(len(names), 1)))
    ax = fig.add_subplot()
    if names:
        vals = [constants[k] for k in names]
        shown = [v if (isinstance(v, (int, float)) and math.isfinite(v) and v > 0) else 0.0
                 for v in vals]
        ys = np.arange(len(names))
        ax.barh(ys, shown, color="#4c72b0")
        ax.set_yticks(ys)
        ax.set_yticklabels(names)
        ax.invert_yaxis()
        if any(v > 0 for v in shown):
            ax.set_xscale("log")
    ax.set_xlabel("measured value")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _svg(fig)
