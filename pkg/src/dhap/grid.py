"""Dyadic intervals, tiles, trees and packings on the truncated grid.

The grid with exponent ``M`` covers ``[0, 2^M]`` with finest cells of width
``2^-M``.  An interval is the integer pair ``(k, j)`` meaning
``[j 2^k, (j + 1) 2^k]``.  Geometry here uses integers only.

Tiles are numbered in *heap order*: the top interval has index 0 and the
children of index ``i`` are ``2i + 1`` and ``2i + 2``.  Heap order coincides
with the canonical order (decreasing scale, then increasing offset), which
makes dense numpy masks over tiles convenient for the numeric modules.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

from .errors import BottomScale, GridError, NonConvexTree, TopScale

MAX_M = 12


@dataclass(frozen=True)
class GridConfig:
    M: int

    def __post_init__(self):
        if not isinstance(self.M, (int, np.integer)) or not 1 <= self.M <= MAX_M:
            raise GridError(f"M must be an integer in 1..{MAX_M}, got {self.M!r}")

    @property
    def n_cells(self) -> int:
        return 1 << (2 * self.M)

    @property
    def n_tiles(self) -> int:
        return (1 << (2 * self.M + 1)) - 1

    @property
    def n_levels(self) -> int:
        return 2 * self.M + 1

    @property
    def cell_width(self) -> float:
        return 2.0 ** -self.M


def check_m(M: int) -> int:
    GridConfig(M)
    return int(M)


# ---------------------------------------------------------------------------
# intervals


@dataclass(frozen=True, order=False)
class DyadicInterval:
    """The dyadic interval ``[j 2^k, (j + 1) 2^k]`` of the grid with exponent ``M``."""

    k: int
    j: int
    M: int

    def __post_init__(self):
        check_m(self.M)
        if not -self.M <= self.k <= self.M:
            raise GridError(f"scale k={self.k} outside [-{self.M}, {self.M}]")
        if self.j < 0 or self.j >= (1 << (self.M - self.k)):
            raise GridError(f"offset j={self.j} out of range at scale k={self.k}")

    @property
    def level(self) -> int:
        """Depth below the top interval, ``M - k``."""
        return self.M - self.k

    @property
    def index(self) -> int:
        return (1 << self.level) - 1 + self.j

    @property
    def length(self) -> Fraction:
        return Fraction(2) ** self.k

    @property
    def width_cells(self) -> int:
        return 1 << (self.k + self.M)

    @property
    def cell_range(self) -> tuple[int, int]:
        """Half-open range of finest cells covered by this interval."""
        w = self.width_cells
        return self.j * w, (self.j + 1) * w

    @property
    def left(self) -> Fraction:
        return self.j * self.length

    @property
    def right(self) -> Fraction:
        return (self.j + 1) * self.length

    def contains(self, other: "DyadicInterval") -> bool:
        return other.k <= self.k and (other.j >> (self.k - other.k)) == self.j

    def intersects(self, other: "DyadicInterval") -> bool:
        return self.contains(other) or other.contains(self)

    def sort_key(self) -> tuple[int, int]:
        return (-self.k, self.j)

    def __lt__(self, other: "DyadicInterval") -> bool:
        return self.sort_key() < other.sort_key()

    def __repr__(self) -> str:
        return f"[{self.left}, {self.right}]"


def interval_from_index(index: int, M: int) -> DyadicInterval:
    level = (index + 1).bit_length() - 1
    return DyadicInterval(M - level, index - ((1 << level) - 1), M)


def parent(interval: DyadicInterval) -> DyadicInterval:
    if interval.k == interval.M:
        raise TopScale(f"{interval} is at the top scale")
    return DyadicInterval(interval.k + 1, interval.j >> 1, interval.M)


def children(interval: DyadicInterval) -> tuple[DyadicInterval, DyadicInterval]:
    if interval.k == -interval.M:
        raise BottomScale(f"{interval} is at the finest scale")
    k, j, M = interval.k - 1, 2 * interval.j, interval.M
    return DyadicInterval(k, j, M), DyadicInterval(k, j + 1, M)


def all_intervals(M: int) -> Iterator[DyadicInterval]:
    """Every interval of the grid in canonical order."""
    for k in range(M, -M - 1, -1):
        for j in range(1 << (M - k)):
            yield DyadicInterval(k, j, M)


# ---------------------------------------------------------------------------
# tiles


class TileKind(str, Enum):
    LACUNARY = "lacunary"
    NONLACUNARY = "nonlacunary"


@dataclass(frozen=True)
class Tile:
    interval: DyadicInterval
    kind: TileKind = TileKind.LACUNARY

    @property
    def lacunary(self) -> bool:
        return self.kind is TileKind.LACUNARY

    @property
    def M(self) -> int:
        return self.interval.M

    @property
    def index(self) -> int:
        return self.interval.index

    @property
    def frequency_band(self) -> tuple[Fraction, Fraction]:
        inv = 1 / self.interval.length
        return (inv, 2 * inv) if self.lacunary else (Fraction(0), inv)

    def sort_key(self) -> tuple[int, int, int]:
        return (*self.interval.sort_key(), 0 if self.lacunary else 1)

    def __lt__(self, other: "Tile") -> bool:
        return self.sort_key() < other.sort_key()

    def __repr__(self) -> str:
        sign = "+" if self.lacunary else "0"
        return f"P{sign}{self.interval!r}"


def lacunary(k: int, j: int, M: int) -> Tile:
    return Tile(DyadicInterval(k, j, M), TileKind.LACUNARY)


def nonlacunary(k: int, j: int, M: int) -> Tile:
    return Tile(DyadicInterval(k, j, M), TileKind.NONLACUNARY)


def tile_from_index(index: int, M: int) -> Tile:
    return Tile(interval_from_index(index, M))


def parent_tile(P: Tile) -> Tile:
    return Tile(parent(P.interval), P.kind)


def child_tiles(P: Tile) -> tuple[Tile, Tile]:
    left, right = children(P.interval)
    return Tile(left, P.kind), Tile(right, P.kind)


def tile_leq(P: Tile, Q: Tile) -> bool:
    """The order ``P <=' Q``: spatial containment of lacunary tiles."""
    if not (P.lacunary and Q.lacunary):
        raise GridError("the tile order is defined on lacunary tiles only")
    return Q.interval.contains(P.interval)


def all_tiles(M: int) -> list[Tile]:
    return [Tile(I) for I in all_intervals(M)]


# ---------------------------------------------------------------------------
# collections


class TileSet:
    """An immutable collection of lacunary tiles iterated in canonical order."""

    __slots__ = ("_members", "_sorted")

    def __init__(self, tiles: Iterable[Tile] = ()):
        members = frozenset(tiles)
        for P in members:
            if not isinstance(P, Tile) or not P.lacunary:
                raise GridError(f"TileSet members must be lacunary tiles, got {P!r}")
        self._members = members
        self._sorted = None

    @classmethod
    def from_mask(cls, mask: np.ndarray, M: int) -> "TileSet":
        return cls(tile_from_index(int(i), M) for i in np.flatnonzero(mask))

    def mask(self, M: int) -> np.ndarray:
        out = np.zeros(GridConfig(M).n_tiles, dtype=bool)
        if self._members:
            out[[P.index for P in self._members]] = True
        return out

    @property
    def members(self) -> frozenset:
        return self._members

    def __iter__(self) -> Iterator[Tile]:
        if self._sorted is None:
            self._sorted = tuple(sorted(self._members))
        return iter(self._sorted)

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, P) -> bool:
        return P in self._members

    def __eq__(self, other) -> bool:
        if isinstance(other, TileSet):
            return self._members == other._members
        if isinstance(other, (set, frozenset)):
            return self._members == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._members)

    def __or__(self, other) -> "TileSet":
        return TileSet(self._members | _members_of(other))

    def __and__(self, other) -> "TileSet":
        return TileSet(self._members & _members_of(other))

    def __sub__(self, other) -> "TileSet":
        return TileSet(self._members - _members_of(other))

    def __le__(self, other) -> bool:
        return self._members <= _members_of(other)

    def __repr__(self) -> str:
        return "TileSet(" + ", ".join(repr(P) for P in self) + ")"


def _members_of(x) -> frozenset:
    if isinstance(x, TileSet):
        return x.members
    if isinstance(x, Tree):
        return x.members.members
    return frozenset(x)


@dataclass(frozen=True)
class Tree:
    """A collection of lacunary tiles lying below a distinguished top tile."""

    top: Tile
    members: TileSet

    def __post_init__(self):
        if not isinstance(self.members, TileSet):
            object.__setattr__(self, "members", TileSet(self.members))
        if self.top not in self.members:
            raise GridError("the top tile must belong to the tree")
        for P in self.members:
            if not tile_leq(P, self.top):
                raise GridError(f"{P!r} does not lie below the top {self.top!r}")

    @property
    def width(self) -> Fraction:
        return self.top.interval.length

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, P) -> bool:
        return P in self.members


def complete_tree(P: Tile, within: TileSet | None = None) -> Tree:
    """``Tree(P)``, intersected with ``within`` when given."""
    if not P.lacunary:
        raise GridError("trees have lacunary tops")
    if within is not None and P not in within:
        raise GridError(f"{P!r} is not in the given collection")
    k0, j0, M = P.interval.k, P.interval.j, P.M
    tiles = []
    for k in range(k0, -M - 1, -1):
        span = 1 << (k0 - k)
        for j in range(j0 * span, (j0 + 1) * span):
            Q = lacunary(k, j, M)
            if within is None or Q in within:
                tiles.append(Q)
    return Tree(P, TileSet(tiles))


def is_convex(S) -> bool:
    """Whether every chain between two comparable members stays inside ``S``.

    A gap exists exactly when some member has an ancestor in ``S`` but its
    parent is missing, so it suffices to test that.
    """
    members = _members_of(S)
    for P in members:
        I = P.interval
        if I.k == I.M:
            continue
        if Tile(parent(I)) in members:
            continue
        A = parent(I)
        while A.k < A.M:
            A = parent(A)
            if Tile(A) in members:
                return False
    return True


def maximal_tiles(S) -> TileSet:
    """Members of ``S`` with no strict ancestor in ``S``."""
    members = _members_of(S)
    out = []
    for P in members:
        I = P.interval
        covered = False
        while I.k < I.M:
            I = parent(I)
            if Tile(I) in members:
                covered = True
                break
        if not covered:
            out.append(P)
    return TileSet(out)


def packing_constant(S, T: Tree, uniform: bool = False) -> float:
    """Least ``alpha`` for which ``S`` is an (optionally uniform) ``alpha``-packing of ``T``."""
    members = _members_of(S)
    if not members <= T.members.members:
        raise GridError("the collection must be contained in the tree")
    if not members:
        return 0.0
    top = T.top.interval
    if not uniform:
        total = sum(P.interval.width_cells for P in members)
        return float(Fraction(total, top.width_cells))
    # accumulate the mass of every tile into all of its ancestors up to I_T
    mass: dict[DyadicInterval, int] = {}
    for P in members:
        I = P.interval
        w = I.width_cells
        while True:
            mass[I] = mass.get(I, 0) + w
            if I == top:
                break
            I = parent(I)
    return float(max(Fraction(m, J.width_cells) for J, m in mass.items()))


def doubled_tiles(S) -> TileSet:
    return TileSet(parent_tile(P) for P in _members_of(S))


# ---------------------------------------------------------------------------
# heap-index helpers used by the numeric modules


def level_slice(level: int) -> slice:
    return slice((1 << level) - 1, (1 << (level + 1)) - 1)


def tile_lengths(M: int) -> np.ndarray:
    """``|I_P|`` for every tile in heap order."""
    out = np.empty(GridConfig(M).n_tiles)
    for level in range(2 * M + 1):
        out[level_slice(level)] = 2.0 ** (M - level)
    return out


def tile_levels(M: int) -> np.ndarray:
    out = np.empty(GridConfig(M).n_tiles, dtype=np.int64)
    for level in range(2 * M + 1):
        out[level_slice(level)] = level
    return out


def parent_index(index):
    return (index - 1) // 2


def subtree_mask(index: int, M: int) -> np.ndarray:
    """Heap mask of ``Tree(P)`` for the tile with the given index."""
    out = np.zeros(GridConfig(M).n_tiles, dtype=bool)
    level = (index + 1).bit_length() - 1
    j = index - ((1 << level) - 1)
    for depth in range(0, 2 * M + 1 - level):
        lvl = level + depth
        start = (1 << lvl) - 1 + (j << depth)
        out[start : start + (1 << depth)] = True
    return out


def ancestors_mask_any(mask: np.ndarray, M: int) -> np.ndarray:
    """For each tile, whether some strict ancestor lies in ``mask``."""
    out = np.zeros_like(mask)
    for level in range(1, 2 * M + 1):
        sl = level_slice(level)
        up = level_slice(level - 1)
        above = mask[up] | out[up]
        out[sl] = np.repeat(above, 2)
    return out


def maximal_mask(mask: np.ndarray, M: int) -> np.ndarray:
    return mask & ~ancestors_mask_any(mask, M)


def downward_closure(mask: np.ndarray, M: int) -> np.ndarray:
    """Union of ``Tree(P)`` over tiles ``P`` in ``mask``."""
    return mask | ancestors_mask_any(mask, M)


def convex_mask(mask: np.ndarray, M: int) -> bool:
    has_parent = np.zeros_like(mask)
    for level in range(1, 2 * M + 1):
        has_parent[level_slice(level)] = np.repeat(mask[level_slice(level - 1)], 2)
    anc = ancestors_mask_any(mask, M)
    return not bool(np.any(mask & anc & ~has_parent))


def require_convex(S) -> None:
    if not is_convex(S):
        raise NonConvexTree("the collection is not convex")
