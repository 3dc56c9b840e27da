"""Dyadic test functions, Haar wavelets and the norms built from them.

A :class:`DyadicFunction` stores one complex value per finest cell.  A
:class:`CoefficientMap` stores one number per lacunary tile, densely, in heap
order (see :mod:`dhap.grid`).  All pairings are the bilinear
``<f, g> = integral of f * g`` with no complex conjugation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import grid
from .errors import BottomScale, DisjointnessViolation, GridError, HypothesisFail
from .grid import DyadicInterval, GridConfig, Tile, TileSet, Tree, level_slice
from .tolerance import TAU_ABS


class DyadicFunction:
    """A function on ``[0, 2^M]`` that is constant on each finest cell."""

    __slots__ = ("M", "values")

    def __init__(self, M: int, values):
        grid.check_m(M)
        arr = np.asarray(values, dtype=np.complex128)
        if arr.shape != (1 << (2 * M),):
            raise GridError(f"expected {1 << (2 * M)} cell values, got shape {arr.shape}")
        self.M = int(M)
        self.values = arr

    @classmethod
    def zeros(cls, M: int) -> "DyadicFunction":
        return cls(M, np.zeros(1 << (2 * M)))

    @classmethod
    def constant(cls, M: int, c: complex) -> "DyadicFunction":
        return cls(M, np.full(1 << (2 * M), c, dtype=np.complex128))

    @classmethod
    def indicator(cls, I: DyadicInterval) -> "DyadicFunction":
        v = np.zeros(1 << (2 * I.M))
        a, b = I.cell_range
        v[a:b] = 1.0
        return cls(I.M, v)

    @property
    def grid(self) -> GridConfig:
        return GridConfig(self.M)

    @property
    def cell_width(self) -> float:
        return 2.0 ** -self.M

    def integral(self) -> complex:
        return complex(self.values.sum() * self.cell_width)

    def is_real(self) -> bool:
        return bool(np.all(self.values.imag == 0))

    def restrict(self, I: DyadicInterval) -> "DyadicFunction":
        a, b = I.cell_range
        out = np.zeros_like(self.values)
        out[a:b] = self.values[a:b]
        return DyadicFunction(self.M, out)

    def _coerce(self, other):
        if isinstance(other, DyadicFunction):
            if other.M != self.M:
                raise GridError("functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return DyadicFunction(self.M, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return DyadicFunction(self.M, self.values - self._coerce(other))

    def __rsub__(self, other):
        return DyadicFunction(self.M, self._coerce(other) - self.values)

    def __mul__(self, other):
        return DyadicFunction(self.M, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return DyadicFunction(self.M, self.values / self._coerce(other))

    def __neg__(self):
        return DyadicFunction(self.M, -self.values)

    def __abs__(self):
        return DyadicFunction(self.M, np.abs(self.values))

    def conj(self):
        return DyadicFunction(self.M, np.conj(self.values))

    def __eq__(self, other):
        if not isinstance(other, DyadicFunction):
            return NotImplemented
        return self.M == other.M and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"DyadicFunction(M={self.M}, values={self.values!r})"


class CoefficientMap:
    """Numbers attached to lacunary tiles, stored densely in heap order.

    Tiles missing from the map are zero.  Finest-scale entries of a wavelet
    transform are always zero because no wavelet lives there.
    """

    __slots__ = ("M", "values")

    def __init__(self, M: int, values=None):
        n = GridConfig(M).n_tiles
        if values is None:
            values = np.zeros(n)
        arr = np.asarray(values)
        if arr.shape != (n,):
            raise GridError(f"expected {n} tile values, got shape {arr.shape}")
        if not np.iscomplexobj(arr):
            arr = arr.astype(np.float64)
        self.M = int(M)
        self.values = arr

    @classmethod
    def from_entries(cls, M: int, entries) -> "CoefficientMap":
        items = list(entries.items() if hasattr(entries, "items") else entries)
        complex_valued = any(np.iscomplexobj(v) or isinstance(v, complex) for _, v in items)
        vals = np.zeros(GridConfig(M).n_tiles, dtype=np.complex128 if complex_valued else float)
        for P, v in items:
            if not P.lacunary or P.M != M:
                raise GridError(f"{P!r} is not a lacunary tile of the grid")
            vals[P.index] = v
        return cls(M, vals)

    def __getitem__(self, P: Tile):
        return self.values[P.index]

    def entries(self):
        """Nonzero entries in canonical order."""
        for i in np.flatnonzero(self.values):
            yield grid.tile_from_index(int(i), self.M), self.values[i]

    def is_nonnegative(self) -> bool:
        if np.iscomplexobj(self.values) and np.any(self.values.imag != 0):
            return False
        return bool(np.all(self.values.real >= 0))

    def nonnegative(self) -> np.ndarray:
        """Real nonnegative view of the values; raises when that is not valid."""
        if not self.is_nonnegative():
            raise GridError("coefficient map is not nonnegative")
        return np.asarray(self.values.real, dtype=np.float64)

    def restrict(self, S) -> "CoefficientMap":
        return CoefficientMap(self.M, np.where(as_mask(S, self.M), self.values, 0))

    def __eq__(self, other):
        if not isinstance(other, CoefficientMap):
            return NotImplemented
        return self.M == other.M and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"CoefficientMap(M={self.M}, nonzero={np.count_nonzero(self.values)})"


def as_mask(S, M: int) -> np.ndarray:
    """Heap mask for a TileSet, a Tree, an iterable of tiles, or a mask."""
    if isinstance(S, np.ndarray) and S.dtype == bool:
        return S
    if isinstance(S, Tree):
        return S.members.mask(M)
    if isinstance(S, TileSet):
        return S.mask(M)
    if S is None:
        return np.ones(GridConfig(M).n_tiles, dtype=bool)
    return TileSet(S).mask(M)


# ---------------------------------------------------------------------------
# averages and integrals per level


def level_integrals(f: DyadicFunction) -> list[np.ndarray]:
    """``level_integrals(f)[l][j]`` is the integral of ``f`` over interval ``j`` of level ``l``."""
    M = f.M
    out = [None] * (2 * M + 1)
    cur = f.values * f.cell_width
    out[2 * M] = cur
    for level in range(2 * M - 1, -1, -1):
        cur = cur[0::2] + cur[1::2]
        out[level] = cur
    return out


def tile_integrals(f: DyadicFunction) -> np.ndarray:
    return np.concatenate(level_integrals(f))


def tile_averages(f: DyadicFunction) -> np.ndarray:
    """``[f]_I`` for every interval, in heap order."""
    return tile_integrals(f) / grid.tile_lengths(f.M)


def average(f: DyadicFunction, I: DyadicInterval) -> complex:
    a, b = I.cell_range
    return complex(f.values[a:b].mean())


def spread(level_values: np.ndarray, level: int, M: int) -> np.ndarray:
    """Broadcast one value per interval of ``level`` to the finest cells."""
    return np.repeat(level_values, 1 << (2 * M - level))


# ---------------------------------------------------------------------------
# Haar system


def haar(P: Tile) -> DyadicFunction:
    I = P.interval
    M = I.M
    v = np.zeros(1 << (2 * M))
    a, b = I.cell_range
    norm = 2.0 ** (-I.k / 2)
    if P.lacunary:
        if I.k == -M:
            raise BottomScale("no lacunary wavelet at the finest scale")
        mid = (a + b) // 2
        v[a:mid] = norm
        v[mid:b] = -norm
    else:
        v[a:b] = norm
    return DyadicFunction(M, v)


def inner(f: DyadicFunction, g: DyadicFunction) -> complex:
    """Bilinear pairing ``integral f g``."""
    return complex(np.dot(f.values, g.values) * f.cell_width)


def l2_norm_sq(f: DyadicFunction) -> float:
    return float(np.sum(np.abs(f.values) ** 2) * f.cell_width)


def wavelet_transform(f: DyadicFunction) -> CoefficientMap:
    M = f.M
    ints = level_integrals(f)
    out = np.zeros(GridConfig(M).n_tiles, dtype=np.complex128)
    for level in range(2 * M):
        k = M - level
        child = ints[level + 1]
        out[level_slice(level)] = 2.0 ** (-k / 2) * (child[0::2] - child[1::2])
    return CoefficientMap(M, out)


def reconstruct(c: CoefficientMap) -> DyadicFunction:
    M = c.M
    vals = np.zeros(1 << (2 * M), dtype=np.complex128)
    coeffs = np.asarray(c.values, dtype=np.complex128)
    for level in range(2 * M):
        k = M - level
        lv = coeffs[level_slice(level)] * 2.0 ** (-k / 2)
        if not np.any(lv):
            continue
        halves = np.stack([lv, -lv], axis=1).ravel()
        vals += spread(halves, level + 1, M)
    return DyadicFunction(M, vals)


def _check_disjoint(tiles: list[Tile]) -> None:
    lac = {P.interval for P in tiles if P.lacunary}
    non = {P.interval for P in tiles if not P.lacunary}
    for I in non:
        A = I
        while A.k < A.M:
            A = grid.parent(A)
            if A in lac:
                raise DisjointnessViolation(f"P0{I!r} lies inside the lacunary tile P+{A!r}")
            if A in non:
                raise DisjointnessViolation(f"P0{I!r} overlaps P0{A!r}")


def project(f: DyadicFunction, S: Iterable[Tile]) -> DyadicFunction:
    """Orthogonal projection onto the span of the wavelets of ``S``."""
    tiles = list(S.members if isinstance(S, (TileSet, Tree)) else S)
    _check_disjoint(tiles)
    M = f.M
    lac_mask = np.zeros(GridConfig(M).n_tiles, dtype=bool)
    for P in tiles:
        if P.lacunary:
            lac_mask[P.index] = True
    coeffs = wavelet_transform(f).values * lac_mask
    out = reconstruct(CoefficientMap(M, coeffs)).values
    for P in tiles:
        if not P.lacunary:
            a, b = P.interval.cell_range
            out[a:b] += f.values[a:b].mean()
    return DyadicFunction(M, out)


# ---------------------------------------------------------------------------
# size, BMO, mean


def chain_sums(a: np.ndarray, mask: np.ndarray, M: int) -> np.ndarray:
    """For each tile ``Q`` in ``mask``, the sum of ``a`` over the tiles ``P <=' Q``
    whose whole chain up to ``Q`` lies in ``mask``; zero outside ``mask``."""
    acc = np.where(mask, a, 0.0)
    for level in range(2 * M - 1, -1, -1):
        sl = level_slice(level)
        below = acc[level_slice(level + 1)]
        acc[sl] = np.where(mask[sl], acc[sl] + below[0::2] + below[1::2], 0.0)
    return acc


def _weights(a) -> np.ndarray:
    if isinstance(a, CoefficientMap):
        return a.nonnegative()
    arr = np.asarray(a, dtype=np.float64)
    if np.any(arr < 0):
        raise GridError("weights must be nonnegative")
    return arr


def size(a: CoefficientMap, T: Tree) -> float:
    grid.require_convex(T)
    w = _weights(a)
    idx = [P.index for P in T.members]
    return float(w[idx].sum() / float(T.top.interval.length))


def sum_over(a: CoefficientMap, S) -> float:
    w = _weights(a)
    return float(w[as_mask(S, a.M)].sum())


def maximal_size(a: CoefficientMap, S=None) -> float:
    """Supremum of ``size(a, T)`` over convex trees ``T`` inside ``S`` (default: all tiles)."""
    w = _weights(a)
    M = a.M
    mask = as_mask(S, M)
    if not mask.any():
        return 0.0
    acc = chain_sums(w, mask, M)
    return float(np.max(acc[mask] / grid.tile_lengths(M)[mask]))


def maximal_size_argmax(a: CoefficientMap, S=None) -> tuple[float, Tile | None]:
    w = _weights(a)
    M = a.M
    mask = as_mask(S, M)
    if not mask.any():
        return 0.0, None
    ratios = np.where(mask, chain_sums(w, mask, M) / grid.tile_lengths(M), -1.0)
    i = int(np.argmax(ratios))
    return float(ratios[i]), grid.tile_from_index(i, M)


def energy_weights(f: DyadicFunction) -> CoefficientMap:
    """``|Wf(P)|^2`` as a nonnegative coefficient map."""
    return CoefficientMap(f.M, np.abs(wavelet_transform(f).values) ** 2)


def bmo_norm(f: DyadicFunction) -> float:
    return float(np.sqrt(maximal_size(energy_weights(f))))


def mean(f: DyadicFunction, P: Tile) -> float:
    a, b = P.interval.cell_range
    return float(np.abs(f.values[a:b]).mean())


def maximal_mean(f: DyadicFunction, S=None) -> float:
    mask = as_mask(S, f.M)
    if not mask.any():
        return 0.0
    return float(np.max(tile_averages(abs(f)).real[mask]))


# ---------------------------------------------------------------------------
# square and maximal functions


def square_function(f: DyadicFunction) -> DyadicFunction:
    M = f.M
    energy = np.abs(wavelet_transform(f).values) ** 2 / grid.tile_lengths(M)
    total = np.zeros(1 << (2 * M))
    for level in range(2 * M):
        total += spread(energy[level_slice(level)], level, M)
    return DyadicFunction(M, np.sqrt(total))


def cancellative_maximal(f: DyadicFunction) -> DyadicFunction:
    M = f.M
    ints = level_integrals(f)
    best = np.zeros(1 << (2 * M))
    for level in range(2 * M + 1):
        avg = np.abs(ints[level]) / 2.0 ** (M - level)
        best = np.maximum(best, spread(avg, level, M))
    return DyadicFunction(M, best)


def hardy_littlewood_maximal(f: DyadicFunction) -> DyadicFunction:
    return cancellative_maximal(abs(f))


# ---------------------------------------------------------------------------
# Lebesgue norms


def lp_norm(f: DyadicFunction, p: float) -> float:
    mags = np.abs(f.values)
    if np.isinf(p):
        return float(mags.max())
    if p <= 0:
        raise ValueError("p must be positive")
    return float((np.sum(mags**p) * f.cell_width) ** (1.0 / p))


def weak_lp_norm(f: DyadicFunction, p: float) -> float:
    """``sup_lambda lambda |{|f| >= lambda}|^(1/p)``, scanning the values |f| attains."""
    if p <= 0:
        raise ValueError("p must be positive")
    mags = np.sort(np.abs(f.values))[::-1]
    if mags.size == 0 or mags[0] == 0:
        return 0.0
    # number of cells with |f| >= each value; ties share the largest count
    last = np.searchsorted(-mags, -mags, side="right")
    measures = last * f.cell_width
    positive = mags > 0
    return float(np.max(mags[positive] * measures[positive] ** (1.0 / p)))


@dataclass(frozen=True)
class WeakWitness:
    E_prime: np.ndarray
    C: float
    doublings: int
    pairing: float
    bound: float

    @property
    def ratio(self) -> float:
        if self.bound == 0:
            return 0.0 if self.pairing <= TAU_ABS else float("inf")
        return self.pairing / self.bound


def weak_lp_witness(f: DyadicFunction, E: np.ndarray, p: float, A: float,
                    max_doublings: int = 60) -> WeakWitness:
    """Remove from ``E`` the cells where ``|f|`` is large, doubling the cutoff
    until at least half of ``E`` survives."""
    E = np.asarray(E, dtype=bool)
    measure_E = float(E.sum()) * f.cell_width
    if measure_E <= 0:
        raise ValueError("E must have positive measure")
    mags = np.abs(f.values)
    C = 1.0
    for doublings in range(max_doublings + 1):
        E_prime = E & (mags < C * A * measure_E ** (-1.0 / p))
        if E_prime.sum() * 2 >= E.sum():
            pairing = abs(complex(f.values[E_prime].sum() * f.cell_width))
            bound = A * measure_E ** (1.0 - 1.0 / p)
            return WeakWitness(E_prime, C, doublings, pairing, bound)
        C *= 2.0
    raise HypothesisFail(f"no cutoff up to 2^{max_doublings} keeps half of E")


def cells_of(I: DyadicInterval) -> np.ndarray:
    m = np.zeros(1 << (2 * I.M), dtype=bool)
    a, b = I.cell_range
    m[a:b] = True
    return m
