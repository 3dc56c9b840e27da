"""Slow, independent reference computations for small grids.

Nothing here shares code paths with the fast implementations beyond the
data types: each routine works from definitions (explicit tile
enumeration, pointwise kernels, dense matrices).
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .grid import DyadicInterval, Tile, all_intervals, lacunary


def cell_interval_chain(cell: int, M: int) -> list[DyadicInterval]:
    """All dyadic intervals containing a finest cell, finest first."""
    return [DyadicInterval(k, cell >> (k + M), M) for k in range(-M, M + 1)]


def haar_vector(P: Tile) -> np.ndarray:
    """Cell values of a Haar function, written from the definition."""
    I = P.interval
    M = I.M
    n = 1 << (2 * M)
    length = 2.0 ** I.k
    out = np.zeros(n)
    for c in range(n):
        x = (c + 0.5) * 2.0 ** -M
        if not (float(I.left) <= x < float(I.right)):
            continue
        if not P.lacunary:
            out[c] = length ** -0.5
        else:
            mid = float(I.left) + length / 2
            out[c] = length ** -0.5 if x < mid else -(length ** -0.5)
    return out


def wavelet_coefficients(values: np.ndarray, M: int) -> dict[Tile, complex]:
    """``<f, phi_P>`` for every lacunary tile with children, by direct quadrature."""
    w = 2.0 ** -M
    out = {}
    for I in all_intervals(M):
        if I.k == -M:
            continue
        P = Tile(I)
        out[P] = complex(np.sum(values * haar_vector(P)) * w)
    return out


def rooted_tree_sums(weights: dict[Tile, float], allowed: set[Tile], top: Tile, M: int,
                     limit: int = 2_000_000) -> np.ndarray:
    """Sum of weights for every convex tree with the given top inside ``allowed``.

    A convex tree with a top is a set containing the top that is closed under
    moving up towards the top, so it is described recursively by choosing, for
    each child, either nothing or one such tree rooted at that child.
    """

    def sums(P: Tile) -> np.ndarray:
        own = weights.get(P, 0.0)
        I = P.interval
        if I.k == -M:
            return np.array([own])
        options = []
        for k, j in ((I.k - 1, 2 * I.j), (I.k - 1, 2 * I.j + 1)):
            C = lacunary(k, j, M)
            if C in allowed:
                options.append(np.concatenate([[0.0], sums(C)]))
            else:
                options.append(np.array([0.0]))
        if options[0].size * options[1].size > limit:
            raise OverflowError("too many convex trees to enumerate")
        total = options[0][:, None] + options[1][None, :]
        return own + total.ravel()

    return sums(top)


def count_rooted_trees(allowed: set[Tile], top: Tile, M: int) -> int:
    I = top.interval
    if I.k == -M:
        return 1
    n = 1
    for k, j in ((I.k - 1, 2 * I.j), (I.k - 1, 2 * I.j + 1)):
        C = lacunary(k, j, M)
        n *= 1 + (count_rooted_trees(allowed, C, M) if C in allowed else 0)
    return n


def maximal_size_enumerated(weights: dict[Tile, float], allowed: set[Tile], M: int) -> float:
    """Maximal size by evaluating every convex tree inside ``allowed``."""
    best = 0.0
    for P in allowed:
        vals = rooted_tree_sums(weights, allowed, P, M)
        best = max(best, float(vals.max()) / float(P.interval.length))
    return best


def is_convex_pairwise(tiles: set[Tile]) -> bool:
    """Convexity straight from the definition: test every comparable pair."""
    for P1, P2 in combinations(tiles, 2):
        lo, hi = (P1, P2) if P2.interval.contains(P1.interval) else (P2, P1)
        if not hi.interval.contains(lo.interval):
            continue
        for I in all_intervals(lo.M):
            if hi.interval.contains(I) and I.contains(lo.interval) and Tile(I) not in tiles:
                return False
    return True


def uniform_packing_all_intervals(tiles: set[Tile], M: int) -> float:
    best = 0.0
    for J in all_intervals(M):
        mass = sum(float(P.interval.length) for P in tiles if J.contains(P.interval))
        best = max(best, mass / float(J.length))
    return best


def bmo_dual_form(values: np.ndarray, M: int) -> float:
    """``sup_I |I|^(-1/2) ||(f - [f]_I) chi_I||_2`` by direct evaluation."""
    best = 0.0
    for I in all_intervals(M):
        a, b = I.cell_range
        seg = values[a:b]
        osc = float(np.mean(np.abs(seg - seg.mean()) ** 2))
        best = max(best, osc)
    return float(np.sqrt(best))


def weak_norm_scan(values: np.ndarray, p: float, M: int) -> float:
    """Quadratic scan over the values |f| takes."""
    mags = np.abs(values)
    w = 2.0 ** -M
    best = 0.0
    for v in mags:
        if v <= 0:
            continue
        measure = np.count_nonzero(mags >= v) * w
        best = max(best, v * measure ** (1.0 / p))
    return best


def maximal_function_pointwise(values: np.ndarray, M: int) -> np.ndarray:
    out = np.zeros(values.shape[0])
    for c in range(values.shape[0]):
        for I in cell_interval_chain(c, M):
            a, b = I.cell_range
            out[c] = max(out[c], abs(values[a:b].mean()))
    return out


# ---------------------------------------------------------------------------
# kernels


def kernel_value(lr: np.ndarray, rl: np.ndarray, x: int, y: int, M: int) -> complex:
    """``K(x, y)`` for finest cells ``x`` and ``y`` from the sibling constants.

    The smallest dyadic interval holding both points decides the value:
    ``x`` in its left half and ``y`` in its right half gives the ``lr`` entry.
    """
    if x == y:
        return 0.0
    for k in range(-M + 1, M + 1):
        if (x >> (k + M)) == (y >> (k + M)):
            I = DyadicInterval(k, x >> (k + M), M)
            half = 1 << (k + M - 1)
            x_left = (x - I.cell_range[0]) < half
            return lr[I.index] if x_left else rl[I.index]
    raise AssertionError("cells always share the top interval")


def kernel_matrix(lr: np.ndarray, rl: np.ndarray, M: int) -> np.ndarray:
    """Dense matrix acting on cell values: ``(A f)[x] = sum_y K(x, y) f[y] 2^-M``."""
    n = 1 << (2 * M)
    A = np.zeros((n, n), dtype=np.complex128)
    for x in range(n):
        for y in range(n):
            A[x, y] = kernel_value(lr, rl, x, y, M)
    return A * 2.0 ** -M
