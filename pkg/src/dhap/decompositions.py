"""Stopping-time decompositions of tile collections.

The public functions take and return :class:`~dhap.grid.Tree` and
:class:`~dhap.grid.TileSet` values.  Internally every algorithm runs on
boolean heap masks (see :mod:`dhap.grid`), which keeps the per-tile work
vectorised where the algorithm allows it.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import grid
from .errors import (
    HypothesisFail,
    MeanHypothesisFail,
    NotMeanZero,
    SizeHypothesisFail,
    WitnessInvalid,
)
from .functions import (
    CoefficientMap,
    DyadicFunction,
    as_mask,
    cancellative_maximal,
    chain_sums,
    energy_weights,
    lp_norm,
    maximal_size,
    reconstruct,
    square_function,
    tile_averages,
    wavelet_transform,
)
from .grid import DyadicInterval, Tile, TileSet, Tree, level_slice, subtree_mask
from .tolerance import TAU_ABS, leq, tau_rel


# ---------------------------------------------------------------------------
# mask helpers


def _tree_from_mask(top: int, mask: np.ndarray, M: int) -> Tree:
    return Tree(grid.tile_from_index(top, M), TileSet.from_mask(mask, M))


def _lengths(M: int) -> np.ndarray:
    return grid.tile_lengths(M)


def _children_in(mask: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Per tile: (left child in mask, right child in mask); False at the finest level."""
    left = np.zeros_like(mask)
    right = np.zeros_like(mask)
    for level in range(2 * M):
        below = mask[level_slice(level + 1)]
        left[level_slice(level)] = below[0::2]
        right[level_slice(level)] = below[1::2]
    return left, right


def _parent_in(mask: np.ndarray, M: int) -> np.ndarray:
    out = np.zeros_like(mask)
    for level in range(1, 2 * M + 1):
        out[level_slice(level)] = np.repeat(mask[level_slice(level - 1)], 2)
    return out


def _assign_to_tops(mask: np.ndarray, tops: np.ndarray, M: int) -> np.ndarray:
    """Label each tile of ``mask`` with the index of its nearest ancestor-or-self in ``tops``.

    Tiles whose chain leaves ``mask`` before reaching a top get ``-1``.
    """
    label = np.full(mask.shape, -1, dtype=np.int64)
    idx = np.arange(mask.size)
    for level in range(2 * M + 1):
        sl = level_slice(level)
        inherited = np.full(1 << level, -1, dtype=np.int64)
        if level > 0:
            inherited = np.repeat(label[level_slice(level - 1)], 2)
        lv = np.where(tops[sl], idx[sl], inherited)
        label[sl] = np.where(mask[sl], lv, -1)
    return label


def _split_by_label(label: np.ndarray, tops: np.ndarray) -> list[tuple[int, np.ndarray]]:
    out = []
    for t in np.flatnonzero(tops):
        out.append((int(t), label == t))
    return out


def _top_of(mask: np.ndarray, M: int) -> int:
    tops = np.flatnonzero(grid.maximal_mask(mask, M))
    if tops.size != 1:
        raise HypothesisFail("collection is not a tree with a single top")
    return int(tops[0])


def _weights(a) -> np.ndarray:
    if isinstance(a, CoefficientMap):
        return a.nonnegative()
    return np.asarray(a, dtype=float)


# ---------------------------------------------------------------------------
# tree-sampling and good-lambda verifiers


@dataclass
class VerifiedBound:
    measured: float
    bound: float
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.bound - self.measured

    @property
    def holds(self) -> bool:
        return leq(self.measured, self.bound)


def tree_samp_bound(S, a: CoefficientMap, witnesses: dict, eta: float) -> VerifiedBound:
    """Check the sampling hypothesis on every complete tree and conclude the size bound.

    ``witnesses`` maps a top tile ``Q`` of ``S`` to ``(A_Q, subtrees)``; tops
    missing from the map get ``(0, [])``.  Each complete tree
    ``Tree(Q) & S`` must satisfy ``size(a, T minus subtrees) <= A`` with
    subtree tops forming a ``(1 - eta)``-packing.  The conclusion is
    ``maximal_size(a, S) <= A / eta``.
    """
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    M = a.M
    w = _weights(a)
    mask = as_mask(S, M)
    lengths = _lengths(M)
    A = max([float(v[0]) for v in witnesses.values()] or [0.0])
    worst_packing = 0.0
    for q in np.flatnonzero(mask):
        Q = grid.tile_from_index(int(q), M)
        A_q, subtrees = witnesses.get(Q, (0.0, []))
        tree = subtree_mask(int(q), M) & mask
        removed = np.zeros_like(mask)
        top_mass = 0.0
        for sub in subtrees:
            sm = sub.members.mask(M)
            if np.any(sm & ~tree):
                raise WitnessInvalid(f"a witness subtree leaves Tree({Q!r})")
            removed |= sm
            top_mass += float(sub.top.interval.length)
        packing = top_mass / lengths[q]
        worst_packing = max(worst_packing, packing)
        if packing > 1 - eta + tau_rel():
            raise WitnessInvalid(f"witness tops under {Q!r} pack to {packing} > 1 - eta")
        rest = float(w[tree & ~removed].sum()) / lengths[q]
        if not leq(rest, A_q):
            raise WitnessInvalid(f"remaining size {rest} under {Q!r} exceeds A={A_q}")
    measured = maximal_size(a, mask)
    out = VerifiedBound(measured, A / eta, {"A": A, "eta": eta, "witness_packing": worst_packing})
    if not out.holds:
        raise AssertionError(f"maximal size {measured} exceeds A/eta = {A / eta}")
    return out


def _counting_function(w: np.ndarray, tree: np.ndarray, M: int) -> np.ndarray:
    """Cell values of ``sum_{P in tree} a(P) chi_{I_P} / |I_P|``."""
    vals = np.zeros(1 << (2 * M))
    dens = np.where(tree, w, 0.0) / _lengths(M)
    for level in range(2 * M + 1):
        vals += np.repeat(dens[level_slice(level)], 1 << (2 * M - level))
    return vals


def good_lambda_witnesses(S, a: CoefficientMap, A: float) -> dict:
    """Subtrees rooted at the maximal tiles whose upward partial sums reach ``A``."""
    M = a.M
    w = _weights(a)
    mask = as_mask(S, M)
    dens = np.where(mask, w, 0.0) / _lengths(M)
    out = {}
    for q in np.flatnonzero(mask):
        tree = subtree_mask(int(q), M) & mask
        # partial sums along the chain from the top down to each tile
        partial = np.where(tree, dens, 0.0)
        for level in range(1, 2 * M + 1):
            sl = level_slice(level)
            partial[sl] = np.where(tree[sl], partial[sl] + np.repeat(partial[level_slice(level - 1)], 2), 0.0)
        big = tree & (partial >= A)
        tops = grid.maximal_mask(big, M)
        subs = [_tree_from_mask(int(t), subtree_mask(int(t), M) & tree, M) for t in np.flatnonzero(tops)]
        out[grid.tile_from_index(int(q), M)] = (A, subs)
    return out


def good_lambda(S, a: CoefficientMap, A: float, eta: float) -> VerifiedBound:
    """Verify the level-set hypothesis on complete trees, then conclude ``size* <= A/eta``.

    The conclusion is also re-derived through :func:`tree_samp_bound` with the
    witnesses from :func:`good_lambda_witnesses`.
    """
    M = a.M
    w = _weights(a)
    mask = as_mask(S, M)
    cw = 2.0 ** -M
    worst = 0.0
    for q in np.flatnonzero(mask):
        tree = subtree_mask(int(q), M) & mask
        vals = _counting_function(w, tree, M)
        Q = grid.tile_from_index(int(q), M)
        lo, hi = Q.interval.cell_range
        frac = np.count_nonzero(vals[lo:hi] >= A) * cw / float(Q.interval.length)
        worst = max(worst, frac)
        if frac > 1 - eta:
            raise HypothesisFail(f"level set of Tree({Q!r}) covers {frac} of its interval", witness=Q)
    witnesses = good_lambda_witnesses(mask, a, A)
    via = tree_samp_bound(mask, a, witnesses, eta)
    via.details["level_set_fraction"] = worst
    return via


def markov_level_fraction(S, a: CoefficientMap, A: float) -> tuple[float, float]:
    """Largest level-set fraction over complete trees, and the Markov bound ``size*/A``."""
    M = a.M
    w = _weights(a)
    mask = as_mask(S, M)
    cw = 2.0 ** -M
    worst = 0.0
    for q in np.flatnonzero(mask):
        tree = subtree_mask(int(q), M) & mask
        vals = _counting_function(w, tree, M)
        Q = grid.tile_from_index(int(q), M)
        lo, hi = Q.interval.cell_range
        worst = max(worst, np.count_nonzero(vals[lo:hi] >= A) * cw / float(Q.interval.length))
    return worst, maximal_size(a, mask) / A


# ---------------------------------------------------------------------------
# John-Nirenberg


@dataclass
class DistributionReport:
    bmo: float
    levels: list  # (n, measure, bound)
    p_ratios: dict

    @property
    def holds(self) -> bool:
        return all(m <= b for _, m, b in self.levels)

    @property
    def worst_ratio(self) -> float:
        return max((m / b for _, m, b in self.levels), default=0.0)


def john_nirenberg_check(f: DyadicFunction, I: DyadicInterval,
                         p_grid=(1.0, 2.0, 4.0, 8.0)) -> DistributionReport:
    from .errors import DhapError

    scale = max(float(np.abs(f.values).max()), 1.0) * float(I.length)
    lo, hi = I.cell_range
    if np.any(f.values[:lo]) or np.any(f.values[hi:]):
        raise NotMeanZero("f must be supported on I")
    if abs(f.integral()) > TAU_ABS * scale:
        raise NotMeanZero("f must have mean zero on I")
    if np.any(np.abs(f.values.imag) > TAU_ABS):
        raise DhapError("NotReal: John-Nirenberg check needs a real function")
    vals = f.values.real[lo:hi]
    norm = maximal_size(energy_weights(f)) ** 0.5
    length = float(I.length)
    levels = []
    if norm > 0:
        n = 1
        while True:
            thresh = 2 * n * norm
            measure = np.count_nonzero(vals > thresh) * f.cell_width
            levels.append((n, measure, 2.0 ** (1 - n) * length))
            if thresh >= vals.max():
                break
            n += 1
    else:
        levels.append((1, 0.0, length))
    ratios = {}
    for p in p_grid:
        denom = (1 + p) * length ** (1 / p) * norm
        ratios[p] = 0.0 if denom == 0 else lp_norm(f, p) / denom
    return DistributionReport(norm, levels, ratios)


# ---------------------------------------------------------------------------
# Calderon-Zygmund selections


@dataclass
class Selection:
    trees: list
    remainder: TileSet
    measured: dict = field(default_factory=dict)


def _select_masks(mask: np.ndarray, eligible: np.ndarray, M: int):
    tops = grid.maximal_mask(mask & eligible, M)
    covered = grid.downward_closure(tops, M) & mask
    label = _assign_to_tops(covered, tops, M)
    return tops, covered, _split_by_label(label, tops)


def tree_select(P_n, a: CoefficientMap, n: int) -> Selection:
    """Remove maximal trees of size at least ``2^(n-1)`` from a convex collection."""
    M = a.M
    w = _weights(a)
    mask = as_mask(P_n, M)
    if not grid.convex_mask(mask, M):
        from .errors import NonConvexTree

        raise NonConvexTree("the collection must be convex")
    sizes = chain_sums(w, mask, M) / _lengths(M)
    top_size = float(sizes[mask].max()) if mask.any() else 0.0
    if not leq(top_size, 2.0**n):
        raise SizeHypothesisFail(f"maximal size {top_size} exceeds 2^{n}")
    tops, covered, parts = _select_masks(mask, sizes >= 2.0 ** (n - 1), M)
    trees = [_tree_from_mask(t, m, M) for t, m in parts]
    rem = mask & ~covered
    measured = {
        "tree_sizes": [float(sizes[t]) for t, _ in parts],
        "remainder_maximal_size": maximal_size(a, rem),
    }
    return Selection(trees, TileSet.from_mask(rem, M), measured)


def mean_select(P_n, f: DyadicFunction, n: int) -> Selection:
    """Remove maximal trees whose top has mean at least ``2^(n-1)``."""
    M = f.M
    mask = as_mask(P_n, M)
    if not grid.convex_mask(mask, M):
        from .errors import NonConvexTree

        raise NonConvexTree("the collection must be convex")
    means = tile_averages(abs(f)).real
    top_mean = float(means[mask].max()) if mask.any() else 0.0
    if not leq(top_mean, 2.0**n):
        raise MeanHypothesisFail(f"maximal mean {top_mean} exceeds 2^{n}")
    tops, covered, parts = _select_masks(mask, means >= 2.0 ** (n - 1), M)
    trees = [_tree_from_mask(t, m, M) for t, m in parts]
    rem = mask & ~covered
    width = float(_lengths(M)[tops].sum())
    mags = np.abs(f.values)
    tail = float(mags[mags >= 2.0 ** (n - 2)].sum() * f.cell_width)
    cheb = 0.0 if width == 0 else width / (2.0 ** -n * tail)
    measured = {
        "top_means": [float(means[t]) for t, _ in parts],
        "remainder_maximal_mean": float(means[rem].max()) if rem.any() else 0.0,
        "total_width": width,
        "cheb_constant": cheb,
        "cheb_bound": 4.0,
    }
    return Selection(trees, TileSet.from_mask(rem, M), measured)


# ---------------------------------------------------------------------------
# convexify


def _convexify_masks(tree: np.ndarray, removed: np.ndarray, M: int) -> list[tuple[int, np.ndarray]]:
    rest = tree & ~removed
    tops = rest & ~_parent_in(rest, M)
    label = _assign_to_tops(rest, tops, M)
    return _split_by_label(label, tops)


def convexify(T: Tree, P) -> list[Tree]:
    """Split ``T \\ P`` into convex trees rooted at tiles whose parent left ``T \\ P``."""
    M = T.top.M
    grid.require_convex(T)
    tmask = T.members.mask(M)
    pmask = as_mask(P, M)
    if np.any(pmask & ~tmask):
        raise HypothesisFail("P must be contained in T")
    return [_tree_from_mask(t, m, M) for t, m in _convexify_masks(tmask, pmask, M)]


# ---------------------------------------------------------------------------
# tree slicing


@dataclass
class TreeDecomposition:
    trees: list  # list of (label, Tree)
    exceptional_tiles: TileSet
    measured: dict = field(default_factory=dict)
    exceptional_label: str = "exceptional"
    trace: dict = field(default_factory=dict)

    def tree_list(self) -> list[Tree]:
        return [t for _, t in self.trees]


def _greedy_tree(top: int, w: np.ndarray, delta: float, M: int, lengths: np.ndarray) -> np.ndarray:
    """Grow a maximal rooted subtree with every ancestor-rooted size below ``delta/2``,
    then add the tiles just above it."""
    half = delta / 2
    tree = np.zeros(w.size, dtype=bool)
    tree[top] = True
    if w[top] >= half * lengths[top]:
        return tree
    acc = {top: float(w[top])}
    above = []
    last = w.size - 1
    queue = deque([2 * top + 1, 2 * top + 2] if 2 * top + 2 <= last else [])
    while queue:
        p = queue.popleft()
        wp = float(w[p])
        ok = wp < half * lengths[p]
        if ok:
            q = (p - 1) // 2
            while True:
                if acc[q] + wp >= half * lengths[q]:
                    ok = False
                    break
                if q == top:
                    break
                q = (q - 1) // 2
        if ok:
            q = (p - 1) // 2
            while True:
                acc[q] += wp
                if q == top:
                    break
                q = (q - 1) // 2
            acc[p] = wp
            tree[p] = True
            if 2 * p + 2 <= last:
                queue.extend((2 * p + 1, 2 * p + 2))
        else:
            above.append(p)
    tree[above] = True
    return tree


def _garnett_complete(top: int, w: np.ndarray, delta: float, M: int) -> list[tuple[int, np.ndarray]]:
    """Iterate the greedy selection over a complete tree whose weights are padded."""
    lengths = _lengths(M)
    out = []
    pending = deque([top])
    while pending:
        r = pending.popleft()
        t = _greedy_tree(r, w, delta, M, lengths)
        out.append((r, t))
        left, right = _children_in(t, M)
        boundary = np.flatnonzero(t & ~(left & right))
        last = w.size - 1
        for b in boundary:
            for c in (2 * b + 1, 2 * b + 2):
                if c <= last and not t[c]:
                    pending.append(int(c))
    return out


def _garnett(mask: np.ndarray, w: np.ndarray, C0: float, delta: float, M: int, record: dict):
    lengths = _lengths(M)
    exceptional = mask & (w >= delta / 2 * lengths)
    subtrees = _convexify_masks(mask, exceptional, M)
    finest = grid.tile_levels(M) == 2 * M
    trees = []
    raises = 0.0
    chain_ok = True
    worst_chain = 0.0
    for s_top, s_mask in subtrees:
        completion = subtree_mask(s_top, M)
        padded = np.where(s_mask, w, 0.0)
        target = delta / 2 * lengths
        lift = completion & finest
        raises += float(np.sum(np.maximum(target[lift] - padded[lift], 0.0)))
        padded[lift] = target[lift]
        padded[~completion] = 0.0
        c_local = maximal_size(CoefficientMap(M, padded), completion)
        pieces = _garnett_complete(s_top, padded, delta, M)
        tops_here = np.zeros_like(mask)
        for r, t in pieces:
            full_size = float(padded[t].sum()) / lengths[r]
            if full_size < delta / 2 * (1 - tau_rel()):
                chain_ok = False
            tops_here[r] = True
            kept = t & s_mask
            if kept.any():
                if not kept[r]:
                    raise AssertionError("restricted greedy tree lost its top")
                trees.append(("selected", r, kept))
        # packing of this subtree's greedy tops against its completion
        alpha = grid.packing_constant(
            TileSet.from_mask(tops_here, M), Tree(grid.tile_from_index(s_top, M), TileSet.from_mask(completion, M)), True
        )
        bound = 2 * c_local / delta
        worst_chain = max(worst_chain, alpha / bound if bound > 0 else 0.0)
        if not leq(alpha, bound):
            chain_ok = False
    record["end_padding_total"] = raises
    record["garnett_chain_ok"] = chain_ok
    record["garnett_chain_ratio"] = worst_chain
    record["subtree_count"] = len(subtrees)
    return trees, exceptional


def _slice_once(mask: np.ndarray, w: np.ndarray, delta: float, M: int, record: list):
    """One application of the slicing lemma to a convex tree.

    Returns heavy trees (to iterate), small trees, light trees, and the buffer.
    """
    lengths = _lengths(M)
    top = _top_of(mask, M)
    sizes = chain_sums(w, mask, M) / lengths
    c = float(sizes[top])
    dev = sizes - c
    fluct = mask & (np.abs(dev) >= delta / 2)
    tops = grid.maximal_mask(fluct, M)
    heavy_tops = tops & (dev > 0)
    light_tops = tops & (dev < 0)
    covered = grid.downward_closure(tops, M) & mask
    label = _assign_to_tops(covered, tops, M)
    heavy = _split_by_label(label, heavy_tops)
    light = _split_by_label(label, light_tops)
    t1 = mask & ~covered
    left, right = _children_in(t1, M)
    buffer = t1 & ~(left & right)
    small = _convexify_masks(t1, buffer, M)
    heavy_width = float(lengths[heavy_tops].sum())
    bound = c / (c + delta / 2) * lengths[top]
    record.append({"c": c, "heavy_width": heavy_width, "t2_bound": bound,
                   "t2_ok": bool(leq(heavy_width, bound))})
    return heavy, small, light, buffer


def _slice_weak(mask, w, delta, M, record, trace=None):
    heavy, small, light, buffer = _slice_once(mask, w, delta, M, record)
    if trace is not None and not trace:
        trace.update(heavy=heavy, light=light, small=small, buffer=buffer)
    iterate = list(heavy)
    smalls = list(small)
    exc = buffer.copy()
    for _, lmask in light:
        it, sm, ex = _slice_weak(lmask, w, delta, M, record)
        iterate += it
        smalls += sm
        exc |= ex
    return iterate, smalls, exc


def _heavy_light(mask, w, delta, M, record: dict, trace: dict):
    levels = []
    queue = deque([mask])
    smalls = []
    exc = np.zeros_like(mask)
    first = True
    while queue:
        m = queue.popleft()
        it, sm, ex = _slice_weak(m, w, delta, M, levels, trace if first else None)
        first = False
        smalls += sm
        exc |= ex
        queue.extend(t for _, t in it)
    record["t2_checks"] = len(levels)
    record["t2_ok"] = all(r["t2_ok"] for r in levels)
    record["t2_worst_ratio"] = max(
        (r["heavy_width"] / r["t2_bound"] for r in levels if r["t2_bound"] > 0), default=0.0
    )
    return [("small", t, m) for t, m in smalls], exc


def tree_slice(T0: Tree, a: CoefficientMap, C0: float, delta: float,
               algorithm: str = "garnett") -> TreeDecomposition:
    """Partition a convex tree into trees of maximal size at most ``delta`` plus sparse tiles."""
    M = a.M
    grid.require_convex(T0)
    if not 0 < delta <= C0:
        raise HypothesisFail("need 0 < delta <= C0")
    w = _weights(a)
    mask = T0.members.mask(M)
    measured_c0 = maximal_size(a, mask)
    if not leq(measured_c0, C0):
        raise HypothesisFail(f"maximal size {measured_c0} exceeds C0={C0}")
    record: dict = {"C0": C0, "delta": delta, "input_maximal_size": measured_c0}
    trace: dict = {}
    if algorithm == "garnett":
        triples, exc = _garnett(mask, w, C0, delta, M, record)
        exc_label = "exceptional"
    elif algorithm in ("heavy_light", "heavy-light"):
        triples, exc = _heavy_light(mask, w, delta, M, record, trace)
        exc_label = "buffer"
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    trees = [(label, _tree_from_mask(t, m, M)) for label, t, m in triples]
    out = TreeDecomposition(trees, TileSet.from_mask(exc, M), record, exc_label)
    if trace:
        out.trace = {
            "heavy": [_tree_from_mask(t, m, M) for t, m in trace["heavy"]],
            "light": [_tree_from_mask(t, m, M) for t, m in trace["light"]],
            "small": [_tree_from_mask(t, m, M) for t, m in trace["small"]],
            "buffer": TileSet.from_mask(trace["buffer"], M),
        }
    check_tree_decomposition(T0, a, C0, delta, out)
    return out


def check_tree_decomposition(T0: Tree, a: CoefficientMap, C0: float, delta: float,
                             dec: TreeDecomposition) -> dict:
    """Re-verify a slicing output from scratch; raises AssertionError on a violation
    and records the measured constants in ``dec.measured``."""
    M = a.M
    w = _weights(a)
    lengths = _lengths(M)
    target = T0.members.mask(M)
    seen = np.zeros_like(target)
    worst_size = 0.0
    for _, T in dec.trees:
        m = T.members.mask(M)
        if np.any(seen & m):
            raise AssertionError("trees overlap")
        seen |= m
        if not grid.convex_mask(m, M):
            raise AssertionError(f"tree rooted at {T.top!r} is not convex")
        s = maximal_size(a, m)
        worst_size = max(worst_size, s)
        if not leq(s, delta):
            raise AssertionError(f"tree rooted at {T.top!r} has maximal size {s} > delta")
    exc = dec.exceptional_tiles.mask(M)
    if np.any(seen & exc):
        raise AssertionError("exceptional tiles overlap the trees")
    if not np.array_equal(seen | exc, target):
        raise AssertionError("output is not a partition of the input tree")
    ratio = w[exc] / lengths[exc]
    worst_exc = float(ratio.max()) if exc.any() else 0.0
    if not leq(worst_exc, C0):
        raise AssertionError("an exceptional tile carries more than C0 |I_P|")
    tops = TileSet(T.top for _, T in dec.trees)
    dec.measured.update(
        trees=len(dec.trees),
        exceptional=int(exc.sum()),
        worst_tree_maximal_size=worst_size,
        worst_exceptional_density=worst_exc,
        exceptional_packing=grid.packing_constant(dec.exceptional_tiles, T0, True),
        top_packing=grid.packing_constant(tops, T0, True),
    )
    r = C0 / delta
    dec.measured["poly_bound"] = (2 * r + 1) * (2 * r + 2)
    return dec.measured


# ---------------------------------------------------------------------------
# extrapolation


def _random_convex_trees(rng, M: int, count: int):
    for _ in range(count):
        top = int(rng.integers(0, grid.GridConfig(M).n_tiles))
        full = subtree_mask(top, M)
        keep = full & (rng.random(full.size) < rng.uniform(0.3, 1.0))
        keep[top] = True
        # keep only tiles whose chain to the top survives
        chain = np.zeros_like(keep)
        chain[top] = True
        for level in range(1, 2 * M + 1):
            sl = level_slice(level)
            chain[sl] = keep[sl] & np.repeat(chain[level_slice(level - 1)], 2)
        yield top, chain


def extrapolate_check(mu: CoefficientMap, mu_prime: CoefficientMap, delta: float,
                      C1: float, C2: float, samples: int = 64, seed: int = 0) -> VerifiedBound:
    """Bound the maximal size of ``mu_prime`` from its behaviour on trees where ``mu`` is small.

    For every complete tree the garnett slicing of ``mu`` supplies trees on
    which the hypothesis is tested, and the exceptional tiles are bounded by
    ``C1``.  Summing the two gives the bound per complete tree.
    """
    M = mu.M
    w = _weights(mu)
    wp = _weights(mu_prime)
    lengths = _lengths(M)
    if np.any(wp > C1 * lengths * (1 + tau_rel()) + TAU_ABS):
        raise HypothesisFail("mu' exceeds C1 |I_P| somewhere")

    def hyp_check(tree_mask, top):
        s = float(wp[tree_mask].sum()) / lengths[top]
        if not leq(s, C2):
            raise HypothesisFail(f"size of mu' is {s} > C2 on a tree where mu is small",
                                 witness=grid.tile_from_index(top, M))

    rng = np.random.default_rng(seed)
    for top, tmask in _random_convex_trees(rng, M, samples):
        if maximal_size(mu, tmask) <= delta:
            hyp_check(tmask, top)

    C = 0.0
    worst_ratio = 0.0
    for q in range(grid.GridConfig(M).n_tiles):
        full = subtree_mask(q, M)
        c0 = maximal_size(mu, full)
        if c0 <= delta:
            parts = [(q, full)]
            exc = np.zeros_like(full)
        else:
            rec: dict = {}
            triples, exc = _garnett(full, np.where(full, w, 0.0), c0, delta, M, rec)
            parts = [(t, m) for _, t, m in triples]
        for t, m in parts:
            hyp_check(m, t)
        tops_mass = float(sum(lengths[t] for t, _ in parts))
        c_trees = tops_mass / lengths[q]
        c_exc = float(lengths[exc].sum()) / lengths[q]
        C = max(C, c_trees, c_exc)
        local = float(wp[full].sum()) / lengths[q]
        local_bound = c_trees * C2 + c_exc * C1
        if not leq(local, local_bound):
            raise AssertionError(f"extrapolated bound fails at tile {q}")
        if local_bound > 0:
            worst_ratio = max(worst_ratio, local / local_bound)
    measured = maximal_size(mu_prime)
    out = VerifiedBound(measured, C * (C1 + C2),
                        {"C": C, "C1": C1, "C2": C2, "C1_part": C * C1, "C2_part": C * C2,
                         "worst_local_ratio": worst_ratio})
    if not out.holds:
        raise AssertionError("maximal size of mu' exceeds C (C1 + C2)")
    return out


# ---------------------------------------------------------------------------
# atomic decomposition


@dataclass
class Atom:
    interval: DyadicInterval
    coefficient: float
    function: DyadicFunction
    n: int


@dataclass
class AtomicDecomposition:
    atoms: list
    p: float
    measured: dict = field(default_factory=dict)


def atomic_decompose(f: DyadicFunction, p: float, max_steps: int = 4096) -> AtomicDecomposition:
    """Split ``f`` into H^p atoms by repeated size selection on ``|Wf|^2``."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    M = f.M
    scale = max(float(np.abs(f.values).max()), 1.0) * 2.0**M
    if abs(f.integral()) > TAU_ABS * scale:
        raise NotMeanZero("atomic decomposition needs a mean-zero function")
    coeffs = wavelet_transform(f).values
    energy = np.abs(coeffs) ** 2
    lengths = _lengths(M)
    remaining = np.ones(energy.size, dtype=bool)
    atoms = []
    top = maximal_size(CoefficientMap(M, energy))
    steps = 0
    if top > 0:
        n = math.ceil(math.log2(top))
        while steps < max_steps:
            live = remaining & (energy > 0)
            if not live.any():
                break
            sizes = chain_sums(energy, remaining, M) / lengths
            tops = grid.maximal_mask(remaining & (sizes >= 2.0 ** (n - 1)), M)
            covered = grid.downward_closure(tops, M) & remaining
            label = _assign_to_tops(covered, tops, M)
            for t, m in _split_by_label(label, tops):
                interval = grid.interval_from_index(t, M)
                c = 2.0 ** (n / 2) * lengths[t] ** (1 / p)
                part = reconstruct(CoefficientMap(M, np.where(m, coeffs, 0.0)))
                atoms.append(Atom(interval, c, part / c, n))
            remaining &= ~covered
            n -= 1
            steps += 1
    total = DyadicFunction.zeros(M)
    for at in atoms:
        total = total + at.function * at.coefficient
    residual = float(np.abs(total.values - f.values).max())
    sum_cp = float(sum(at.coefficient**p for at in atoms))
    s_norm = lp_norm(square_function(f), p) ** p
    m_norm = lp_norm(cancellative_maximal(f), p) ** p
    worst_atom = 0.0
    for at in atoms:
        l2 = float(np.sqrt(np.sum(np.abs(at.function.values) ** 2) * f.cell_width))
        bound = float(at.interval.length) ** (0.5 - 1 / p)
        worst_atom = max(worst_atom, l2 / bound)
    denom = min(s_norm, m_norm)
    measured = {
        "residual": residual,
        "sum_cp": sum_cp,
        "square_norm_p": s_norm,
        "maximal_norm_p": m_norm,
        "ratio": 0.0 if denom == 0 else sum_cp / denom,
        "atom_norm_ratio": worst_atom,
        "steps": steps,
    }
    return AtomicDecomposition(atoms, p, measured)
