"""Seeded random instances for the verification suites and the ``gen`` command.

Every generator takes a :class:`numpy.random.Generator`; :func:`gen_random`
wraps them behind a kind name and a 64-bit seed.
"""

from __future__ import annotations

import numpy as np

from . import grid
from .czop import AccretiveSystem, PerfectDyadicKernel, kernel_admissibility
from .functions import CoefficientMap, DyadicFunction, maximal_size

KINDS = (
    "function",
    "mean_zero_function",
    "weights",
    "carleson_weights",
    "kernel",
    "accretive_b",
    "accretive_system",
)


def rng_for(seed: int, *labels) -> np.random.Generator:
    """Independent stream for a seed and any integer labels."""
    return np.random.default_rng([int(seed) & (2**64 - 1), *[int(x) for x in labels]])


def random_function(M: int, rng, complex_valued: bool = False) -> DyadicFunction:
    n = 1 << (2 * M)
    v = rng.normal(size=n)
    if complex_valued:
        v = v + 1j * rng.normal(size=n)
    return DyadicFunction(M, v)


def random_mean_zero_function(M: int, rng, complex_valued: bool = False) -> DyadicFunction:
    f = random_function(M, rng, complex_valued)
    return f - f.values.mean()


def random_weights(M: int, rng, density: float = 0.6) -> CoefficientMap:
    """Nonnegative tile weights, roughly proportional to ``|I_P|`` and partly zero."""
    lengths = grid.tile_lengths(M)
    vals = rng.exponential(size=lengths.size) * lengths
    vals[rng.random(lengths.size) > density] = 0.0
    return CoefficientMap(M, vals)


def random_carleson_weights(M: int, rng, density: float = 0.6) -> CoefficientMap:
    """Random weights rescaled so that their maximal size is exactly 1."""
    a = random_weights(M, rng, density)
    s = maximal_size(a)
    if s == 0:
        vals = np.zeros_like(a.values)
        vals[0] = grid.tile_lengths(M)[0]
        return CoefficientMap(M, vals)
    return CoefficientMap(M, a.values / s)


def random_kernel(M: int, rng, density: float = 1.0) -> PerfectDyadicKernel:
    """Complex sibling constants of order ``1/|I|``, rescaled to admissibility 1."""
    lengths = grid.tile_lengths(M)
    n = lengths.size
    lr = (rng.normal(size=n) + 1j * rng.normal(size=n)) / lengths
    rl = (rng.normal(size=n) + 1j * rng.normal(size=n)) / lengths
    off = rng.random(n) > density
    lr[off] = 0
    rl[off] = 0
    lr[0] = rl[0] = 0
    lr[grid.level_slice(2 * M)] = 0
    rl[grid.level_slice(2 * M)] = 0
    K = PerfectDyadicKernel(M, lr, rl)
    c = kernel_admissibility(K)
    return K.scaled(1.0 / c) if c > 0 else K


def random_accretive_b(M: int, rng) -> DyadicFunction:
    """Complex function with real part at least 1/2 everywhere."""
    n = 1 << (2 * M)
    return DyadicFunction(M, 0.5 + rng.exponential(size=n) + 1j * rng.normal(size=n))


def _system_piece(M: int, P, rng, sigma: float) -> DyadicFunction:
    I = P.interval
    a, c = I.cell_range
    v = np.zeros(1 << (2 * M), dtype=np.complex128)
    seg = 1 + sigma * (rng.normal(size=c - a) + 0.5j * rng.normal(size=c - a))
    total = seg.mean()
    if abs(total) < 1e-3:
        seg = seg - total + 1
        total = seg.mean()
    v[a:c] = seg / total
    return DyadicFunction(M, v)


def random_accretive_system(M: int, seed: int, sigma: float = 0.5) -> AccretiveSystem:
    """Per-tile test functions ``chi_P (1 + sigma noise)`` rescaled to mean one.

    Each tile draws from its own stream, so the system is built lazily and
    still reproducible.
    """
    def factory(side):
        def make(P):
            return _system_piece(M, P, rng_for(seed, side, P.index), sigma)
        return make
    return AccretiveSystem(M, factory(1), factory(2), name="random",
                           spec={"kind": "random", "seed": int(seed), "sigma": float(sigma)})


def gen_random(kind: str, M: int, seed: int, **params):
    """Instance of the named kind; identical ``(kind, M, seed)`` give identical output."""
    grid.check_m(M)
    if kind == "accretive_system":
        return random_accretive_system(M, seed, **params)
    rng = rng_for(seed)
    makers = {
        "function": random_function,
        "mean_zero_function": random_mean_zero_function,
        "weights": random_weights,
        "carleson_weights": random_carleson_weights,
        "kernel": random_kernel,
        "accretive_b": random_accretive_b,
    }
    if kind not in makers:
        raise ValueError(f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    return makers[kind](M, rng, **params)


def random_convex_tree(M: int, rng, keep: float | None = None) -> grid.Tree:
    """A convex tree: a random top and a random chain-closed set of tiles below it."""
    n = grid.GridConfig(M).n_tiles
    top = int(rng.integers(0, n))
    p = rng.uniform(0.3, 1.0) if keep is None else keep
    below = grid.subtree_mask(top, M)
    alive = below & (rng.random(n) < p)
    alive[top] = True
    chain = np.zeros(n, dtype=bool)
    chain[top] = True
    for level in range(1, 2 * M + 1):
        sl = grid.level_slice(level)
        chain[sl] |= alive[sl] & np.repeat(chain[grid.level_slice(level - 1)], 2)
    return grid.Tree(grid.tile_from_index(top, M), grid.TileSet.from_mask(chain, M))


def random_tileset(M: int, rng, density: float = 0.3) -> grid.TileSet:
    n = grid.GridConfig(M).n_tiles
    return grid.TileSet.from_mask(rng.random(n) < density, M)
