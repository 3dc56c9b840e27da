"""Wavelet multipliers, the three dyadic paraproducts, and their estimates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid
from .errors import ExponentRange, GridError, NotMeanZero
from .functions import (
    CoefficientMap,
    DyadicFunction,
    as_mask,
    bmo_norm,
    hardy_littlewood_maximal,
    inner,
    l2_norm_sq,
    level_integrals,
    lp_norm,
    maximal_size,
    reconstruct,
    spread,
    tile_averages,
    wavelet_transform,
    weak_lp_norm,
)
from .grid import level_slice
from .tolerance import TAU_ABS

MultiplierSymbol = CoefficientMap


def _no_finest(a: CoefficientMap) -> np.ndarray:
    vals = np.asarray(a.values, dtype=np.complex128).copy()
    vals[level_slice(2 * a.M)] = 0
    return vals


def multiplier_apply(a: MultiplierSymbol, f: DyadicFunction) -> DyadicFunction:
    """``sum_P a_P Wf(P) phi_P``."""
    if a.M != f.M:
        raise GridError("symbol and function live on different grids")
    return reconstruct(CoefficientMap(f.M, _no_finest(a) * wavelet_transform(f).values))


def averages_symbol(f: DyadicFunction) -> MultiplierSymbol:
    """The symbol ``P -> [f]_{I_P}``."""
    return CoefficientMap(f.M, tile_averages(f))


def pi_hl(f: DyadicFunction, g: DyadicFunction) -> DyadicFunction:
    coeffs = wavelet_transform(f).values * tile_averages(g)
    return reconstruct(CoefficientMap(f.M, coeffs))


def pi_lh(f: DyadicFunction, g: DyadicFunction) -> DyadicFunction:
    coeffs = tile_averages(f) * wavelet_transform(g).values
    return reconstruct(CoefficientMap(f.M, coeffs))


def pi_hh(f: DyadicFunction, g: DyadicFunction) -> DyadicFunction:
    """``sum_P Wf(P) Wg(P) chi_{I_P} / |I_P|``."""
    M = f.M
    prod = wavelet_transform(f).values * wavelet_transform(g).values / grid.tile_lengths(M)
    out = np.zeros(1 << (2 * M), dtype=np.complex128)
    for level in range(2 * M):
        out += spread(prod[level_slice(level)], level, M)
    return DyadicFunction(M, out)


def _require_mean_zero(*fs: DyadicFunction) -> None:
    for f in fs:
        scale = max(float(np.abs(f.values).max()), 1.0) * 2.0**f.M
        if abs(f.integral()) > TAU_ABS * scale:
            raise NotMeanZero("input must have mean zero")


def product_identity_residual(f: DyadicFunction, g: DyadicFunction) -> float:
    """``||fg - pi_hl - pi_lh - pi_hh||_2`` for mean-zero ``f`` and ``g``."""
    _require_mean_zero(f, g)
    diff = f * g - pi_hl(f, g) - pi_lh(f, g) - pi_hh(f, g)
    return float(np.sqrt(l2_norm_sq(diff)))


@dataclass
class PermuteReport:
    pairings: dict
    common: complex
    discrepancy: float
    hh_mult: float
    tril: float
    scale: float

    @property
    def worst(self) -> float:
        return max(self.discrepancy, self.hh_mult, self.tril)


def permute_check(f: DyadicFunction, g: DyadicFunction, h: DyadicFunction,
                  symbol: MultiplierSymbol | None = None) -> PermuteReport:
    """Evaluate the six pairings that should all equal ``sum Wf Wg [h]_P``.

    Also compares the two ways of moving a multiplier through ``pi_hh`` and
    the triple sum over lacunary and non-lacunary pairings.
    """
    M = f.M
    pairings = {
        "hh(f,g).h": inner(pi_hh(f, g), h),
        "hh(g,f).h": inner(pi_hh(g, f), h),
        "hl(f,h).g": inner(pi_hl(f, h), g),
        "hl(g,h).f": inner(pi_hl(g, h), f),
        "lh(h,f).g": inner(pi_lh(h, f), g),
        "lh(h,g).f": inner(pi_lh(h, g), f),
    }
    Wf = wavelet_transform(f).values
    Wg = wavelet_transform(g).values
    common = complex(np.sum(Wf * Wg * tile_averages(h)))
    disc = max(abs(v - common) for v in pairings.values())

    if symbol is None:
        rng = np.random.default_rng(0)
        symbol = CoefficientMap(M, rng.normal(size=grid.GridConfig(M).n_tiles))
    lhs = pi_hh(multiplier_apply(symbol, f), g)
    rhs = pi_hh(f, multiplier_apply(symbol, g))
    hh_mult = float(np.abs(lhs.values - rhs.values).max())

    # father pairings <h, phi_{P0(I)}> = |I|^(-1/2) integral_I h
    lengths = grid.tile_lengths(M)
    father = np.concatenate(level_integrals(h)) / np.sqrt(lengths)
    triple = complex(np.sum(lengths ** -0.5 * Wf * Wg * father))
    tril = abs(inner(pi_hh(f, g), h) - triple)

    norms = [np.sqrt(l2_norm_sq(x)) for x in (f, g)]
    scale = float(norms[0] * norms[1] * np.abs(h.values).max()) + TAU_ABS
    return PermuteReport(pairings, common, float(disc), hh_mult, float(tril), scale)


def carleson_embed_report(S, a: CoefficientMap, f: DyadicFunction, p: float) -> float:
    """``sum_{P in S} a(P) |[f]_P|^p`` divided by ``size*(a, S) ||f||_p^p``."""
    if not 1 < p < np.inf:
        raise ExponentRange("embedding needs 1 < p < infinity")
    M = a.M
    mask = as_mask(S, M)
    w = a.nonnegative()
    L = float(np.sum(w[mask] * np.abs(tile_averages(f)[mask]) ** p))
    R = maximal_size(a, mask) * lp_norm(f, p) ** p
    if L == 0:
        return 0.0
    if R == 0:
        return float("inf")
    return L / R


# ---------------------------------------------------------------------------
# bound reports


@dataclass
class BoundReport:
    kind: str
    ratio: float
    details: dict = field(default_factory=dict)


def _ratio(num: float, den: float) -> float:
    if num <= TAU_ABS * max(den, 1.0):
        return 0.0
    return num / den if den > 0 else float("inf")


def _l2(f: DyadicFunction) -> float:
    return float(np.sqrt(l2_norm_sq(f)))


def paraproduct_bound_report(kind: str, f: DyadicFunction, g: DyadicFunction,
                             p: float = 2.0, q: float = 2.0, which: str = "hh",
                             E: np.ndarray | None = None) -> BoundReport:
    """Measured ratio of a paraproduct norm to the product of input norms."""
    if kind == "hl_L2Linf":
        return BoundReport(kind, _ratio(_l2(pi_hl(f, g)), _l2(f) * lp_norm(g, np.inf)))
    if kind == "lh_L2BMO":
        return BoundReport(kind, _ratio(_l2(pi_lh(f, g)), _l2(f) * bmo_norm(g)))
    if kind == "hh_L2BMO":
        return BoundReport(kind, _ratio(_l2(pi_hh(f, g)), _l2(f) * bmo_norm(g)))
    if kind == "hh_BMOBMO":
        return BoundReport(kind, _ratio(bmo_norm(pi_hh(f, g)), bmo_norm(f) * bmo_norm(g)))
    if kind == "weak_LpLq":
        return _weak_report(f, g, p, q, which, E)
    raise ValueError(f"unknown report kind {kind!r}")


_PARAPRODUCTS = {"hl": pi_hl, "lh": pi_lh, "hh": pi_hh}


def _weak_report(f, g, p, q, which, E, max_doublings: int = 60) -> BoundReport:
    if not (1 < p < np.inf and 1 < q < np.inf):
        raise ExponentRange("weak-type estimate needs 1 < p, q < infinity")
    r = 1.0 / (1.0 / p + 1.0 / q)
    out = _PARAPRODUCTS[which](f, g)
    nf, ng = lp_norm(f, p), lp_norm(g, q)
    ratio = _ratio(weak_lp_norm(out, r), nf * ng)
    details = {"r": r, "which": which}
    if nf > 0 and ng > 0:
        mags = np.abs(out.values)
        if E is None:
            # the level set at the threshold realising the weak norm
            order = np.sort(mags)[::-1]
            meas = np.searchsorted(-order, -order, side="right") * out.cell_width
            i = int(np.argmax(order * meas ** (1.0 / r)))
            E = mags >= order[i]
        E = np.asarray(E, dtype=bool)
        measure_E = E.sum() * out.cell_width
        if measure_E > 0:
            control = (hardy_littlewood_maximal(abs(f) / nf).values.real ** p
                       + hardy_littlewood_maximal(abs(g) / ng).values.real ** q)
            C = 1.0
            for doublings in range(max_doublings + 1):
                E_prime = E & (control < C / measure_E)
                if 2 * E_prime.sum() >= E.sum():
                    break
                C *= 2.0
            pairing = abs(complex(out.values[E_prime].sum() * out.cell_width))
            details.update(
                doublings=doublings,
                C=C,
                E_measure=float(measure_E),
                E_prime_measure=float(E_prime.sum() * out.cell_width),
                pairing_ratio=_ratio(pairing, measure_E ** (1 - 1 / r) * nf * ng),
            )
    return BoundReport("weak_LpLq", ratio, details)


def batch_report(kind: str, pairs, **kwargs) -> dict:
    """Run a report over many input pairs and collect the maximum ratio."""
    per = [paraproduct_bound_report(kind, f, g, **kwargs).ratio for f, g in pairs]
    return {"kind": kind, "trials": len(per), "max_ratio": max(per, default=0.0), "per_trial": per}
