"""Seeded verification suites and the report they produce.

Each suite draws ``config.trials`` instances per item, each from its own
logged seed, and records the worst value of every measured quantity together
with the seed that produced it.  A quantity with a bound fails when any trial
exceeds the bound; a quantity without a bound only has to stay finite.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import czop, grid, oracles, paraproducts as pp
from . import decompositions as dec
from . import generate as gen
from .errors import ConfigInvalid, DhapError, HypothesisFail, TopScale, BottomScale
from .functions import (
    CoefficientMap,
    DyadicFunction,
    as_mask,
    bmo_norm,
    cancellative_maximal,
    energy_weights,
    inner,
    l2_norm_sq,
    lp_norm,
    maximal_size,
    project,
    reconstruct,
    size,
    square_function,
    tile_averages,
    wavelet_transform,
    weak_lp_norm,
    weak_lp_witness,
)
from .grid import TileSet
from .tolerance import TAU_ABS, leq, relative_tolerance

SUITES = ("core", "norms", "decompose", "extrapolate", "atoms", "paraproduct", "embed", "t1", "tb")


@dataclass(frozen=True)
class RunConfig:
    M: int = 4
    seed: int = 0
    trials: int = 20
    tau_rel: float = 1e-9
    tau_abs: float = 1e-12
    c_acc: float = 0.5
    out_dir: str | None = None

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigInvalid("trials must be a positive integer")
        if not isinstance(self.M, int) or not 1 <= self.M <= grid.MAX_M:
            raise ConfigInvalid(f"M must lie in [1, {grid.MAX_M}]")
        if not (self.tau_rel > 0 and self.tau_abs > 0):
            raise ConfigInvalid("tolerances must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")
        if not self.c_acc > 0:
            raise ConfigInvalid("c_acc must be positive")

    def report_fields(self) -> dict:
        out = asdict(self)
        out.pop("out_dir")
        return out


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    bound: float | None = None
    seed: int | None = None
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    config: RunConfig
    checks: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)

    def check(self, name: str, passed: bool, value=None, bound=None, seed=None, detail: str = ""):
        self.checks.append(Check(name, bool(passed), _num(value), _num(bound), seed, detail))

    def record(self, name: str, value) -> None:
        self.constants[name] = _num(value)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def extend(self, other: "SuiteReport") -> None:
        self.checks.extend(other.checks)
        self.constants.update(other.constants)
        self.seeds.update(other.seeds)
        self.timings.update(other.timings)
        self.figures.update(other.figures)

    def to_dict(self) -> dict:
        checks = sorted(self.checks, key=lambda c: c.name)
        return {
            "suite": self.suite,
            "config": self.config.report_fields(),
            "passed": self.passed,
            "summary": {"checks": len(checks), "failed": len(self.failures)},
            "checks": [asdict(c) for c in checks],
            "constants": {k: self.constants[k] for k in sorted(self.constants)},
            "trial_seeds": {k: self.seeds[k] for k in sorted(self.seeds)},
        }

    def to_text(self) -> str:
        lines = [f"suite {self.suite}: {'PASS' if self.passed else 'FAIL'} "
                 f"({len(self.checks) - len(self.failures)}/{len(self.checks)} checks)",
                 "config: " + ", ".join(f"{k}={v}" for k, v in self.config.report_fields().items()),
                 ""]
        for c in sorted(self.checks, key=lambda c: c.name):
            tag = "pass" if c.passed else "FAIL"
            val = "" if c.value is None else f" value={c.value:.6g}"
            bnd = "" if c.bound is None else f" bound={c.bound:.6g}"
            seed = "" if c.seed is None else f" seed={c.seed}"
            extra = f"  ({c.detail})" if c.detail else ""
            lines.append(f"[{tag}] {c.name}{val}{bnd}{seed}{extra}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value"])
        for k in sorted(self.constants):
            v = self.constants[k]
            w.writerow([k, "" if v is None else repr(v)])
        return buf.getvalue()


def _num(x):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return float(x)
    x = float(x)
    return x if math.isfinite(x) else (None if math.isnan(x) else x)


def trial_seeds(config: RunConfig, label: str, trials: int | None = None) -> list[int]:
    """Per-trial seeds for one suite item, derived from the run seed and the item name."""
    n = config.trials if trials is None else trials
    ss = np.random.SeedSequence([config.seed, zlib.crc32(label.encode())])
    return [int(s) for s in ss.generate_state(n, dtype=np.uint64)]


_CAUGHT = (DhapError, AssertionError, ValueError, FloatingPointError, ZeroDivisionError)


def sweep(report: SuiteReport, label: str, trial: Callable[[int], dict], bounds: dict,
          trials: int | None = None) -> dict:
    """Run ``trial`` on each seed and fold its named values into checks.

    ``bounds`` maps a value name to its upper bound; names not listed are
    recorded and only required to be finite.  Returns the worst values.
    """
    config = report.config
    seeds = trial_seeds(config, label, trials)
    report.seeds[label] = seeds
    worst: dict[str, tuple[float, int]] = {}
    offending: dict[str, int] = {}
    error = None
    for s in seeds:
        try:
            vals = trial(s)
        except _CAUGHT as exc:
            if error is None:
                error = (s, f"{type(exc).__name__}: {exc}")
            continue
        for key, v in vals.items():
            v = float(v)
            if key not in worst or not (v <= worst[key][0]):
                worst[key] = (v, s)
            b = bounds.get(key)
            if key not in offending and not _within(v, b, config):
                offending[key] = s
    report.check(f"{label}.runs", error is None, seed=error[0] if error else None,
                 detail=error[1] if error else "")
    for key in sorted(worst):
        v, s = worst[key]
        b = bounds.get(key)
        report.check(f"{label}.{key}", key not in offending, v, b, offending.get(key, s))
        report.record(f"{label}.{key}", v)
    return {k: v for k, (v, _) in worst.items()}


def _within(v: float, bound, config: RunConfig) -> bool:
    if math.isnan(v):
        return False
    if bound is None:
        return math.isfinite(v)
    return v <= bound + config.tau_rel * max(abs(bound), 1.0) + config.tau_abs


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)), float(np.abs(a).max(initial=0.0)))
    return float(np.abs(a - b).max(initial=0.0) / scale)


def _l2(f: DyadicFunction) -> float:
    return float(np.sqrt(l2_norm_sq(f)))


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# core: orders, nesting and packings


def suite_core(report: SuiteReport) -> None:
    cfg = report.config
    Me = min(cfg.M, 4)
    tiles = grid.all_tiles(Me)
    n = len(tiles)
    report.check("core.heap_order", tiles == sorted(tiles)
                 and all(grid.tile_from_index(i, Me) == P for i, P in enumerate(tiles)))
    L = np.array([[grid.tile_leq(P, Q) for Q in tiles] for P in tiles])
    ks = np.array([P.interval.k for P in tiles])
    js = np.array([P.interval.j for P in tiles])
    lo = js * 2.0**ks
    hi = (js + 1) * 2.0**ks
    meet = (np.maximum.outer(lo, lo) < np.minimum.outer(hi, hi))
    contains = (ks[:, None] <= ks[None, :]) & (lo[:, None] >= lo[None, :]) & (hi[:, None] <= hi[None, :])
    report.check("core.order_matches_containment", np.array_equal(L, contains))
    report.check("core.order_reflexive", bool(L.diagonal().all()))
    report.check("core.order_antisymmetric", np.array_equal(L & L.T, np.eye(n, dtype=bool)))
    Li = L.astype(np.int64)
    report.check("core.order_transitive", not np.any(((Li @ Li) > 0) & ~L))
    report.check("core.nesting", np.array_equal(meet, L | L.T))

    ok_family = True
    for I in grid.all_intervals(Me):
        if I.k > -Me:
            l, r = grid.children(I)
            ok_family &= grid.parent(l) == I and grid.parent(r) == I
            ok_family &= l.length + r.length == I.length
    report.check("core.parent_children", ok_family)
    top = grid.interval_from_index(0, Me)
    finest = grid.interval_from_index(n - 1, Me)
    report.check("core.top_has_no_parent", _raises(lambda: grid.parent(top), TopScale))
    report.check("core.finest_has_no_children", _raises(lambda: grid.children(finest), BottomScale))
    report.check("core.complete_trees_convex",
                 all(grid.is_convex(grid.complete_tree(P)) for P in tiles))
    report.check("core.empty_set_conventions",
                 grid.is_convex(TileSet()) and grid.packing_constant(TileSet(), grid.complete_tree(tiles[0])) == 0)

    Mo = min(cfg.M, 3)

    def trial(seed):
        rng = _rng(seed)
        T = gen.random_convex_tree(Mo, rng)
        S = gen.random_tileset(Mo, rng, rng.uniform(0.05, 0.6))
        inside = TileSet(P for P in S if P in T)
        convex_gap = float(grid.is_convex(S) != oracles.is_convex_pairwise(set(S)))
        u = grid.packing_constant(inside, T, True)
        u_oracle = oracles.uniform_packing_all_intervals(set(inside), Mo) if len(inside) else 0.0
        # restrict the oracle to intervals inside the top: tiles lie in T so
        # intervals outside I_T carry no mass
        no_top = TileSet(P for P in inside if P.interval.k < Mo and P != T.top)
        out = {"convex_vs_oracle": convex_gap, "uniform_packing_vs_oracle": abs(u - u_oracle)}
        if len(no_top) and T.top.interval.k < Mo:
            big = grid.complete_tree(grid.tile_from_index(0, Mo))
            d = grid.packing_constant(grid.doubled_tiles(no_top), big, True)
            out["doubling_ratio"] = d / grid.packing_constant(no_top, big, True)
        maxi = sorted(grid.maximal_tiles(S))
        overl = sum(1 for a in range(len(maxi)) for b in range(a + 1, len(maxi))
                    if maxi[a].interval.intersects(maxi[b].interval))
        out["maximal_overlaps"] = float(overl)
        return out

    sweep(report, "core.random_sets", trial, {"convex_vs_oracle": 0.0,
                                              "uniform_packing_vs_oracle": 0.0,
                                              "doubling_ratio": 2.0, "maximal_overlaps": 0.0})


def _raises(fn, exc) -> bool:
    try:
        fn()
    except exc:
        return True
    return False


# ---------------------------------------------------------------------------
# norms: transforms, sizes and function norms


def suite_norms(report: SuiteReport) -> None:
    cfg = report.config
    M = cfg.M
    Mo = min(M, 4)
    tau = cfg.tau_rel

    def trial(seed):
        rng = _rng(seed)
        f = gen.random_mean_zero_function(M, rng, complex_valued=bool(rng.integers(2)))
        Wf = wavelet_transform(f).values
        norm2 = l2_norm_sq(f)
        out = {
            "parseval": abs(np.sum(np.abs(Wf) ** 2) - norm2) / norm2,
            "reconstruction": _rel(reconstruct(wavelet_transform(f)).values, f.values),
            "square_isometry": abs(_l2(square_function(f)) - np.sqrt(norm2)) / np.sqrt(norm2),
        }
        T = gen.random_convex_tree(M, rng)
        I = T.top.interval
        length = float(I.length)
        proj = project(f, T.members)
        s = size(energy_weights(f), T)
        fI = f.restrict(I)
        osc = l2_norm_sq(fI - DyadicFunction.indicator(I) * (fI.integral() / length)) / length
        out["size_equals_projection"] = abs(s - l2_norm_sq(proj) / length) / max(s, 1e-300) if s > 0 else 0.0
        out["size_over_oscillation"] = s / osc if osc > 0 else 0.0
        out["oscillation_over_energy"] = osc / (l2_norm_sq(fI) / length) if l2_norm_sq(fI) > 0 else 0.0
        cm = cancellative_maximal(f).values.real
        out["projection_over_maximal"] = float(np.max(np.abs(proj.values) / np.where(cm > 0, 2 * cm, np.inf)))
        out["projection_as_difference"] = _difference_gap(f, T)
        P2 = project(proj, T.members)
        out["projection_idempotent"] = _rel(P2.values, proj.values)

        g = gen.random_function(Mo, rng)
        out["bmo_vs_dual_form"] = abs(bmo_norm(g) - oracles.bmo_dual_form(g.values, Mo)) / max(bmo_norm(g), 1.0)
        p = float(rng.choice([0.5, 1.0, 1.5, 2.0, 3.0]))
        wk = weak_lp_norm(g, p)
        out["weak_vs_scan"] = abs(wk - oracles.weak_norm_scan(g.values, p, Mo)) / max(wk, 1.0)
        out["weak_over_strong"] = wk / lp_norm(g, p)
        out["maximal_vs_pointwise"] = _rel(cancellative_maximal(abs(g)).values.real,
                                           oracles.maximal_function_pointwise(np.abs(g.values), Mo))

        a = gen.random_weights(2, rng)
        w = {P: float(a[P]) for P in grid.all_tiles(2)}
        enum = oracles.maximal_size_enumerated(w, set(grid.all_tiles(2)), 2)
        out["maximal_size_vs_enumeration"] = abs(maximal_size(a) - enum) / max(enum, 1.0)

        aw = gen.random_carleson_weights(Mo, rng)
        A = float(rng.uniform(0.5, 4.0))
        frac, markov = dec.markov_level_fraction(None, aw, A)
        out["markov_ratio"] = frac / markov if markov > 0 else 0.0

        E = rng.random(g.values.size) < rng.uniform(0.2, 1.0)
        if E.any():
            wit = weak_lp_witness(g, E, p, wk)
            out["witness_half_kept"] = float(2 * wit.E_prime.sum() < E.sum())
            out["witness_ratio_over_C"] = wit.ratio / wit.C
            small = wk * 2.0**-80
            try:
                weak_lp_witness(g, E, p, small)
                out["witness_converse"] = float(not wk > small)
            except HypothesisFail:
                out["witness_converse"] = 0.0
        return out

    sweep(report, "norms", trial, {
        "parseval": tau, "reconstruction": tau, "square_isometry": tau,
        "size_equals_projection": tau, "size_over_oscillation": 1.0,
        "oscillation_over_energy": 1.0, "projection_over_maximal": 1.0,
        "projection_as_difference": tau, "projection_idempotent": tau,
        "bmo_vs_dual_form": 1e-12, "weak_vs_scan": 1e-12, "weak_over_strong": 1.0,
        "maximal_vs_pointwise": 1e-12, "maximal_size_vs_enumeration": 1e-12,
        "markov_ratio": 1.0, "witness_half_kept": 0.0, "witness_ratio_over_C": 1.0,
        "witness_converse": 0.0,
    })


def _difference_gap(f: DyadicFunction, T) -> float:
    """Largest distance from the projection at a cell to the nearest candidate
    ``[f]_J - [f]_{I_T}`` with ``J`` between the cell and ``I_T``."""
    M = f.M
    proj = project(f, T.members).values
    avgs = tile_averages(f)
    top = T.top.interval
    a, c = top.cell_range
    cells = np.arange(a, c)
    best = np.full(cells.size, np.inf)
    for level in range(top.level, 2 * M + 1):
        shift = 2 * M - level
        idx = (1 << level) - 1 + (cells >> shift)
        cand = avgs[idx] - avgs[top.index]
        best = np.minimum(best, np.abs(proj[a:c] - cand))
    scale = max(1.0, float(np.abs(f.values).max()))
    return float(best.max() / scale)


# ---------------------------------------------------------------------------
# decompose: selections, slicing, convexify, accretive selection, pruning


def suite_decompose(report: SuiteReport) -> None:
    cfg = report.config
    M = cfg.M
    top = grid.complete_tree(grid.tile_from_index(0, M))
    lengths = grid.tile_lengths(M)

    def tree_select_trial(seed):
        rng = _rng(seed)
        n = int(rng.integers(-2, 3))
        base = gen.random_carleson_weights(M, rng)
        a = CoefficientMap(M, base.values * 2.0**n * rng.uniform(0.5, 1.0))
        P_n = top if rng.random() < 0.5 else gen.random_convex_tree(M, rng)
        sel = dec.tree_select(P_n.members, a, n)
        return _selection_measures(sel, P_n, M) | {
            "size_above_upper": max([s / 2.0**n for s in sel.measured["tree_sizes"]], default=0.0),
            "size_below_lower": max([2.0 ** (n - 1) / s for s in sel.measured["tree_sizes"]], default=0.0),
            "tree_maximal_size": max([maximal_size(a, T.members) / 2.0**n for T in sel.trees], default=0.0),
            "remainder_size": sel.measured["remainder_maximal_size"] / 2.0 ** (n - 1),
        }

    sweep(report, "decompose.tree_select", tree_select_trial, {
        "partition": 0.0, "convex": 0.0, "disjoint_tops": 0.0, "size_above_upper": 1.0,
        "size_below_lower": 1.0, "tree_maximal_size": 1.0, "remainder_size": 1.0})

    def mean_select_trial(seed):
        rng = _rng(seed)
        f = gen.random_function(M, rng, complex_valued=True) * float(2.0 ** rng.integers(-2, 3))
        P_n = top if rng.random() < 0.5 else gen.random_convex_tree(M, rng)
        means = tile_averages(abs(f)).real[as_mask(P_n, M)]
        n = math.ceil(math.log2(means.max()))
        sel = dec.mean_select(P_n.members, f, n)
        tm = sel.measured["top_means"]
        return _selection_measures(sel, P_n, M) | {
            "mean_above_upper": max([m / 2.0**n for m in tm], default=0.0),
            "mean_below_lower": max([2.0 ** (n - 1) / m for m in tm], default=0.0),
            "remainder_mean": sel.measured["remainder_maximal_mean"] / 2.0 ** (n - 1),
            "cheb_constant": sel.measured["cheb_constant"] / sel.measured["cheb_bound"],
        }

    sweep(report, "decompose.mean_select", mean_select_trial, {
        "partition": 0.0, "convex": 0.0, "disjoint_tops": 0.0, "mean_above_upper": 1.0,
        "mean_below_lower": 1.0, "remainder_mean": 1.0, "cheb_constant": 1.0})

    def convexify_trial(seed):
        rng = _rng(seed)
        T = gen.random_convex_tree(M, rng)
        P = TileSet(Q for Q in T.members if rng.random() < rng.uniform(0.05, 0.5))
        alpha = grid.packing_constant(P, T, True)
        parts = dec.convexify(T, P)
        masks = [as_mask(S, M) for S in parts]
        cover = np.sum(masks, axis=0) if masks else np.zeros(lengths.size, dtype=int)
        target = as_mask(T, M) & ~as_mask(P, M)
        tops = TileSet(S.top for S in parts)
        return {
            "partition": float(not np.array_equal(cover, target.astype(int))),
            "convex": float(not all(grid.is_convex(S) for S in parts)),
            "top_packing_over_alpha_plus_one": grid.packing_constant(tops, T, True) / (alpha + 1),
        }

    sweep(report, "decompose.convexify", convexify_trial, {
        "partition": 0.0, "convex": 0.0, "top_packing_over_alpha_plus_one": 1.0})

    for algorithm in ("garnett", "heavy_light"):
        def slice_trial(seed, algorithm=algorithm):
            rng = _rng(seed)
            a = gen.random_carleson_weights(M, rng)
            delta = float(rng.choice([0.5, 0.25, 0.125]))
            out = dec.tree_slice(top, a, 1.0, delta, algorithm)   # re-checks its own output
            m = out.measured
            res = {"top_packing": m["top_packing"], "exceptional_packing": m["exceptional_packing"],
                   "tree_size_over_delta": m["worst_tree_maximal_size"] / delta,
                   "exceptional_density": m["worst_exceptional_density"],
                   "top_packing_over_poly": m["top_packing"] / m["poly_bound"]}
            if algorithm == "garnett":
                res["top_packing_over_2C0_delta"] = m["top_packing"] / (2.0 / delta)
            return res

        bounds = {"tree_size_over_delta": 1.0, "exceptional_density": 1.0,
                  "top_packing_over_poly": 1.0}
        if algorithm == "garnett":
            bounds["top_packing_over_2C0_delta"] = 1.0
        sweep(report, f"decompose.tree_slice_{algorithm}", slice_trial, bounds)

    def accrete_trial(seed):
        rng = _rng(seed)
        T0 = gen.random_convex_tree(M, rng, keep=1.0)
        sigma = float(rng.uniform(0.5, 3.0))
        n = 1 << (2 * M)
        b = DyadicFunction(M, 1 + sigma * (rng.normal(size=n) + 1j * rng.normal(size=n)))
        length = float(T0.top.interval.length)
        C0 = max(np.sqrt(l2_norm_sq(project(b, T0.members)) / length), 1e-3)
        delta = float(abs(tile_averages(b)[T0.top.index]))
        if delta <= 1e-6:
            return {}
        sel = czop.accrete_select(T0, b, C0, delta)
        return {"packing_over_one_minus_eps": sel.packing / (1 - sel.epsilon),
                "epsilon": sel.epsilon, "retried": float(sel.retried)}

    sweep(report, "decompose.accrete_select", accrete_trial,
          {"packing_over_one_minus_eps": 1.0})

    Mp = min(M, 4)

    def prune_trial(seed):
        rng = _rng(seed)
        K = gen.random_kernel(Mp, rng)
        sys = gen.random_accretive_system(Mp, seed, float(rng.choice([0.5, 1.0, 2.0])))
        P = grid.tile_from_index(int(rng.integers(0, (1 << (2 * Mp)) - 1)), Mp)
        side = "b1" if rng.random() < 0.5 else "b2"
        f = gen.random_function(Mp, rng, complex_valued=True)
        res = czop.subtree_prune(K, P, side, sys, f)
        verdicts = czop.check_prune(res)
        out = {f"{k}_violation": float(not v) for k, v in verdicts.items()}
        m = res.measured
        out.update(residual=res.residual,
                   buffer_packing=m["buffer_packing"],
                   removed_packing_ratio=m["removed_packing"] / max(m["removed_packing_bound"], 1e-300),
                   removed_trees=float(len(res.removed)))
        return out

    bounds = {f"{k}_violation": 0.0 for k in ("reconstruction", "removed_packing", "buffer_packing",
                                              "strong_T1", "pseudo_T3", "mean_bound", "convex")}
    bounds.update(residual=cfg.tau_rel, buffer_packing=2.0, removed_packing_ratio=1.0)
    sweep(report, "decompose.subtree_prune", prune_trial, bounds)

    def lambda_trial(seed):
        rng = _rng(seed)
        a = gen.random_carleson_weights(M, rng)
        A = float(rng.uniform(1.0, 6.0))
        frac, _ = dec.markov_level_fraction(None, a, A)
        if frac >= 1:
            return {}
        eta = 1 - frac
        vb = dec.good_lambda(None, a, A, eta)
        return {"size_over_A_eta": vb.measured / (A / eta)}

    sweep(report, "decompose.good_lambda", lambda_trial, {"size_over_A_eta": 1.0})

    def jn_trial(seed):
        rng = _rng(seed)
        f = gen.random_mean_zero_function(M, rng)
        rep = dec.john_nirenberg_check(f, grid.interval_from_index(0, M))
        return {"distribution_ratio": rep.worst_ratio,
                **{f"lp_ratio_p{p:g}": r for p, r in rep.p_ratios.items()}}

    sweep(report, "decompose.john_nirenberg", jn_trial, {"distribution_ratio": 1.0})

    # one rendered instance for the report
    rng = _rng(trial_seeds(cfg, "decompose.figure", 1)[0])
    a = gen.random_carleson_weights(M, rng)
    from .render import render_object

    fig = dec.tree_slice(top, a, 1.0, 0.25, "heavy_light")
    report.figures["decomposition.svg"] = render_object(fig, M, title=f"heavy-light slicing, M={M}")


def _selection_measures(sel, P_n, M: int) -> dict:
    target = as_mask(P_n, M)
    masks = [as_mask(T, M) for T in sel.trees] + [as_mask(sel.remainder, M)]
    cover = np.sum(masks, axis=0)
    tops = [T.top.interval for T in sel.trees]
    overl = sum(1 for i in range(len(tops)) for j in range(i + 1, len(tops)) if tops[i].intersects(tops[j]))
    convex = all(grid.convex_mask(m, M) for m in masks)
    return {"partition": float(not np.array_equal(cover, target.astype(int))),
            "convex": float(not convex), "disjoint_tops": float(overl)}


# ---------------------------------------------------------------------------
# extrapolate


def suite_extrapolate(report: SuiteReport) -> None:
    cfg = report.config
    M = min(cfg.M, 4)
    lengths = grid.tile_lengths(M)

    def trial(seed):
        rng = _rng(seed)
        mu = gen.random_carleson_weights(M, rng)
        C1 = float(rng.uniform(0.05, 1.0))
        mu_p = CoefficientMap(M, np.minimum(C1 * lengths, mu.values))
        delta = float(rng.choice([0.5, 0.25]))
        vb = dec.extrapolate_check(mu, mu_p, delta, C1, delta, samples=16, seed=seed)
        return {"ratio_to_bound": vb.measured / vb.bound if vb.bound > 0 else 0.0,
                "packing_constant": vb.details["C"],
                "worst_local_ratio": vb.details["worst_local_ratio"]}

    sweep(report, "extrapolate", trial, {"ratio_to_bound": 1.0, "worst_local_ratio": 1.0})
    zero = CoefficientMap(M, np.zeros(lengths.size))
    mu = gen.random_carleson_weights(M, _rng(cfg.seed))
    vb = dec.extrapolate_check(mu, zero, 0.5, 1.0, 0.5, samples=4)
    report.check("extrapolate.zero_measure", vb.measured == 0.0, vb.measured, 0.0)


# ---------------------------------------------------------------------------
# atoms


def atom_trial_measures(f: DyadicFunction, p: float) -> dict:
    ad = dec.atomic_decompose(f, p)
    M = f.M
    total = np.zeros_like(f.values)
    support_bad = 0
    for at in ad.atoms:
        total = total + at.function.values * at.coefficient
        Wa = np.abs(wavelet_transform(at.function).values)
        outside = Wa[~grid.subtree_mask(at.interval.index, M)]
        if outside.size and outside.max() > TAU_ABS * max(1.0, float(Wa.max())):
            support_bad += 1
    m = ad.measured
    return {"reconstruction": _rel(total, f.values), "atom_norm_ratio": m["atom_norm_ratio"],
            "support_violations": float(support_bad), "ratio": m["ratio"]}


def suite_atoms(report: SuiteReport) -> None:
    cfg = report.config
    worst = {}
    for Mx in sorted({max(cfg.M - 1, 1), cfg.M}):
        for p in (0.5, 1.0):
            def trial(seed, p=p, Mx=Mx):
                f = gen.random_mean_zero_function(Mx, _rng(seed))
                return atom_trial_measures(f, p)

            w = sweep(report, f"atoms.M{Mx}.p{p:g}", trial, {
                "reconstruction": cfg.tau_rel, "atom_norm_ratio": 1.0, "support_violations": 0.0})
            worst[(Mx, p)] = w.get("ratio", float("nan"))
    if cfg.M > 1:
        for p in (0.5, 1.0):
            r0, r1 = worst[(cfg.M - 1, p)], worst[(cfg.M, p)]
            spread = max(r0 / r1, r1 / r0) if r0 > 0 and r1 > 0 else float("inf")
            report.check(f"atoms.stability.p{p:g}", spread <= 2.0, spread, 2.0)
    ad = dec.atomic_decompose(DyadicFunction.zeros(cfg.M), 1.0)
    report.check("atoms.zero_function_empty", len(ad.atoms) == 0)


# ---------------------------------------------------------------------------
# paraproduct


def suite_paraproduct(report: SuiteReport) -> None:
    cfg = report.config
    M = cfg.M
    tau = cfg.tau_rel
    n_tiles = grid.GridConfig(M).n_tiles

    def trial(seed):
        rng = _rng(seed)
        cplx = bool(rng.integers(2))
        f = gen.random_mean_zero_function(M, rng, cplx)
        g = gen.random_mean_zero_function(M, rng, cplx)
        h = gen.random_function(M, rng, cplx)
        fg = _l2(f * g)
        rep = pp.permute_check(f, g, h, CoefficientMap(M, rng.normal(size=n_tiles)))
        sym = rng.normal(size=n_tiles) + 1j * rng.normal(size=n_tiles)
        Tf = pp.multiplier_apply(CoefficientMap(M, sym), f)
        inner_max = float(np.abs(sym[: (1 << (2 * M)) - 1]).max())
        lh = pp.pi_lh(f, g)
        orth = float(np.sum(np.abs(wavelet_transform(g).values) ** 2 * np.abs(tile_averages(f)) ** 2))
        return {
            "product_identity": pp.product_identity_residual(f, g) / max(fg, 1.0),
            "permute": rep.discrepancy / rep.scale,
            "hh_multiplier": rep.hh_mult / rep.scale,
            "triple_sum": rep.tril / rep.scale,
            "hl_as_multiplier": _rel(pp.pi_hl(f, g).values, pp.multiplier_apply(pp.averages_symbol(g), f).values),
            "lh_as_multiplier": _rel(lh.values, pp.multiplier_apply(pp.averages_symbol(f), g).values),
            "lh_orthogonality": abs(l2_norm_sq(abs(lh)) - orth) / max(orth, 1.0),
            "multiplier_bound": _l2(Tf) / (inner_max * _l2(f)),
            "identity_symbol": _rel(pp.multiplier_apply(CoefficientMap(M, np.ones(n_tiles)), f).values, f.values),
        }

    sweep(report, "paraproduct.identities", trial, {
        "product_identity": tau, "permute": tau, "hh_multiplier": tau, "triple_sum": tau,
        "hl_as_multiplier": tau, "lh_as_multiplier": tau, "lh_orthogonality": tau,
        "multiplier_bound": 1.0, "identity_symbol": tau})

    def bounds_trial(seed):
        rng = _rng(seed)
        f = gen.random_mean_zero_function(M, rng)
        g = gen.random_function(M, rng)
        out = {}
        for kind in ("hl_L2Linf", "lh_L2BMO", "hh_L2BMO", "hh_BMOBMO"):
            out[kind] = pp.paraproduct_bound_report(kind, f, g).ratio
        weak = pp.paraproduct_bound_report("weak_LpLq", f, g, p=2.0, q=2.0, which="hh")
        out["weak_LpLq"] = weak.ratio
        out["weak_pairing"] = weak.details.get("pairing_ratio", 0.0)
        out["weak_doublings"] = weak.details.get("doublings", 0)
        return out

    sweep(report, "paraproduct.bounds", bounds_trial, {"weak_doublings": 60.0})


# ---------------------------------------------------------------------------
# embed


def suite_embed(report: SuiteReport) -> None:
    cfg = report.config
    M = cfg.M

    def trial(seed):
        rng = _rng(seed)
        a = gen.random_carleson_weights(M, rng)
        f = gen.random_function(M, rng)
        S = None if rng.random() < 0.5 else gen.random_convex_tree(M, rng).members
        return {f"ratio_p{p:g}": pp.carleson_embed_report(S, a, f, p) for p in (1.5, 2.0, 3.0)}

    sweep(report, "embed", trial, {"ratio_p2": 8.0})
    zero = CoefficientMap(M, np.zeros(grid.GridConfig(M).n_tiles))
    r = pp.carleson_embed_report(None, zero, DyadicFunction.constant(M, 1.0), 2.0)
    report.check("embed.zero_weights", r == 0.0, r, 0.0)


# ---------------------------------------------------------------------------
# t1


def suite_t1(report: SuiteReport) -> None:
    cfg = report.config
    M = cfg.M
    Mo = min(M, 3)
    tau = cfg.tau_rel

    def oracle_trial(seed):
        rng = _rng(seed)
        K = gen.random_kernel(Mo, rng)
        A = oracles.kernel_matrix(K.lr, K.rl, Mo)
        f = gen.random_function(Mo, rng, complex_valued=True)
        diag_or = np.zeros(grid.GridConfig(Mo).n_tiles, dtype=np.complex128)
        w = 2.0**-Mo
        for P in grid.all_tiles(Mo):
            if P.interval.k > -Mo:
                v = oracles.haar_vector(P)
                diag_or[P.index] = v @ (A @ v) * w
        return {
            "dense_matrix": _rel(czop.dense_matrix(K), A),
            "apply": _rel(czop.apply(K, f).values, A @ f.values),
            "adjoint": _rel(czop.apply_adjoint(K, f).values, A.T @ f.values),
            "t_one": _rel(czop.t_one(K).values, A @ np.ones(A.shape[0])),
            "diagonal": _rel(czop.diagonal(K).values, diag_or),
        }

    sweep(report, "t1.oracle", oracle_trial, {k: 1e-12 for k in
                                              ("dense_matrix", "apply", "adjoint", "t_one", "diagonal")})

    def trial(seed):
        rng = _rng(seed)
        K = gen.random_kernel(M, rng, density=float(rng.uniform(0.3, 1.0)))
        f = gen.random_function(M, rng, complex_valued=True)
        g = gen.random_function(M, rng, complex_valued=True)
        I = grid.interval_from_index(int(rng.integers(0, grid.GridConfig(M).n_tiles)), M)
        h = gen.random_mean_zero_function(M, rng).restrict(I)
        h = h - DyadicFunction.indicator(I) * (h.integral() / float(I.length))
        a, c = I.cell_range
        Th = czop.apply(K, h).values
        lam = float(rng.uniform(0.1, 3.0))
        norm = czop.operator_norm(K)
        g_cert = czop.t1_certificate(K, "global", norm=norm)
        l_cert = czop.t1_certificate(K, "local", norm=norm)
        out = {
            "splitting": czop.splitting_residual(K, f),
            "support_outside": float(np.abs(np.concatenate([Th[:a], Th[c:]])).max(initial=0.0)),
            "adjoint_pairing": abs(inner(czop.apply(K, f), g) - inner(f, czop.apply_adjoint(K, g)))
            / max(1.0, abs(inner(czop.apply(K, f), g))),
            "admissibility_homogeneity": abs(czop.kernel_admissibility(K.scaled(lam))
                                             - lam * czop.kernel_admissibility(K)) / lam,
            "certificate_verdict_failures": float(not (g_cert.passed and l_cert.passed)),
        }
        for cert in (g_cert, l_cert):
            for key, v in cert.constants.items():
                if key.startswith("converse_"):
                    out[key] = v
        if M <= 4 and norm > 0:
            dense = czop.operator_norm(K, "dense")
            out["norm_lanczos_vs_dense"] = abs(czop.operator_norm(K, "lanczos") - dense) / dense
            out["norm_power_gap"] = (dense - czop.operator_norm(K, "power")) / dense
            out["norm_power_excess"] = max(0.0, czop.operator_norm(K, "power") - dense) / dense
        return out

    sweep(report, "t1.random_kernels", trial, {
        "splitting": tau, "support_outside": 0.0, "adjoint_pairing": tau,
        "admissibility_homogeneity": tau, "certificate_verdict_failures": 0.0,
        "converse_wbp": 1.0, "converse_bmo_T1": 1.0, "converse_bmo_Tstar1": 1.0,
        "converse_local_t1": 1.0, "converse_local_t1_star": 1.0, "norm_lanczos_vs_dense": tau,
        "norm_power_gap": 1e-3, "norm_power_excess": tau})


# ---------------------------------------------------------------------------
# tb


def suite_tb(report: SuiteReport) -> None:
    cfg = report.config
    M = min(cfg.M, 4)
    tau = cfg.tau_rel

    zero = czop.PerfectDyadicKernel.zero(M)
    cert = czop.local_tb_certificate(zero, czop.AccretiveSystem.constant(M), seed=cfg.seed)
    skip = {"B_sys", "normalization_error"}
    worst = max(abs(v) for k, v in cert.constants.items() if k not in skip)
    report.check("tb.zero_kernel_certificates", worst == 0.0 and cert.passed, worst, 0.0)

    def constant_trial(seed):
        rng = _rng(seed)
        K = gen.random_kernel(M, rng)
        norm = czop.operator_norm(K)
        loc = czop.t1_certificate(K, "local", norm=norm)
        tb = czop.local_tb_certificate(K, czop.AccretiveSystem.constant(M), max_tops=4,
                                       pairs_per_top=1, seed=seed, norm=norm)
        c = tb.constants
        same = (leq(c["system_local_t1"], norm) == loc.verdicts["converse_local_t1"]
                and leq(c["system_local_t1_star"], norm) == loc.verdicts["converse_local_t1_star"])
        return {
            "system_vs_local_t1": abs(c["system_local_t1"] - loc.constants["local_t1"]) / max(1.0, loc.constants["local_t1"]),
            "system_vs_local_t1_star": abs(c["system_local_t1_star"] - loc.constants["local_t1_star"]) / max(1.0, loc.constants["local_t1_star"]),
            "verdict_mismatch": float(not same),
        }

    sweep(report, "tb.constant_system", constant_trial, {
        "system_vs_local_t1": tau, "system_vs_local_t1_star": tau, "verdict_mismatch": 0.0})

    def adapted_trial(seed):
        rng = _rng(seed)
        Ma = min(M, 3)
        b = gen.random_accretive_b(Ma, rng)
        f = gen.random_function(Ma, rng, complex_valued=True)
        inner_tiles = [grid.tile_from_index(i, Ma) for i in range((1 << (2 * Ma)) - 1)]
        phis = np.stack([czop.adapted_wavelet(b, P).values for P in inner_tiles])
        psis = np.stack([czop.adapted_dual(b, P).values for P in inner_tiles])
        w = 2.0**-Ma
        gram = psis @ phis.T * w
        means = np.abs(phis @ b.values * w)
        energies = np.array([czop.adapted_energy(b, P) for P in inner_tiles])
        direct = np.einsum("ij,j,ij->i", phis, b.values, phis) * w
        coeffs = czop.adapted_transform(b, f)
        back = czop.adapted_synthesis(b, coeffs) + b * (f.integral() / b.integral())
        dual = czop.adapted_dual_transform(b, f).values[: len(inner_tiles)]
        K = gen.random_kernel(Ma, rng)
        Q = inner_tiles[int(rng.integers(0, len(inner_tiles)))]
        l, r = grid.children(Q.interval)
        F = gen.random_function(Ma, rng, complex_valued=True)
        for J in (l, r):
            F = F - DyadicFunction.indicator(J) * (F.restrict(J).integral() / float(J.length))
        return {
            "biorthogonality": _rel(gram, np.eye(len(inner_tiles))),
            "weighted_mean": float(means.max()) / max(1.0, float(np.abs(phis).max())),
            "energy_closed_form": _rel(energies, direct),
            "expansion_round_trip": _rel(back.values, f.values),
            "dual_transform": _rel(dual, psis @ f.values * w),
            "commutator": czop.commutator_residual(K, b, Q, F),
        }

    sweep(report, "tb.adapted_system", adapted_trial, {k: tau for k in (
        "biorthogonality", "weighted_mean", "energy_closed_form", "expansion_round_trip",
        "dual_transform", "commutator")})

    def cert_trial(seed):
        rng = _rng(seed)
        K = gen.random_kernel(M, rng)
        sys = gen.random_accretive_system(M, seed, float(rng.choice([0.25, 0.5, 1.0])))
        norm = czop.operator_norm(K)
        two = czop.local_tb_certificate(K, sys, "two_sided", max_tops=6, pairs_per_top=2,
                                        seed=seed, norm=norm)
        one = czop.local_tb_certificate(K, sys, "one_sided", max_tops=4, seed=seed, norm=norm)
        b = gen.random_accretive_b(M, rng)
        _, semmes = czop.semmes_t1(K, b, cfg.c_acc)
        P = grid.tile_from_index(int(rng.integers(0, (1 << (2 * M)) - 1)), M)
        below = np.flatnonzero(grid.subtree_mask(P.index, M))
        Q = grid.tile_from_index(int(rng.choice(below)), M)
        f = gen.random_function(M, rng, complex_valued=True)
        spl = czop.split_lemma_check(P, f, sys)
        trc = czop.trunc_check(K, P, Q, sys)
        T = gen.random_convex_tree(M, rng)
        o1, o2 = czop.ortho_check(T, b, f, gen.random_function(M, rng, complex_valued=True))
        out = {
            "two_sided_failures": float(not two.passed),
            "one_sided_failures": float(not one.passed),
            "semmes": semmes,
            "split_ratio_over_bound": spl.ratio / spl.bound,
            "trunc_ratio_over_bound": trc.ratio / trc.bound,
            "ortho1_over_bound": o1.ratio / o1.bound if o1.bound else 0.0,
            "ortho2_over_bound": o2.ratio / o2.bound if o2.bound else 0.0,
        }
        for key in ("B_sys", "pointwise", "tcarl", "dual_1", "dual_2", "dual_3", "dual_4"):
            out[key] = two.constants[key]
        out["weak_targ"] = one.constants["weak_targ"]
        return out

    sweep(report, "tb.local_certificates", cert_trial, {
        "two_sided_failures": 0.0, "one_sided_failures": 0.0, "semmes": tau,
        "split_ratio_over_bound": 1.0, "trunc_ratio_over_bound": 1.0,
        "ortho1_over_bound": 1.0, "ortho2_over_bound": 1.0})

    def global_trial(seed):
        rng = _rng(seed)
        Mg = min(M, 3)
        K = gen.random_kernel(Mg, rng)
        b1 = gen.random_accretive_b(Mg, rng)
        b2 = gen.random_accretive_b(Mg, rng)
        rep = czop.global_tb_certificate(K, b1, b2, theta=0.25, c_acc=cfg.c_acc,
                                         max_tops=4, pairs_per_top=1, seed=seed)
        return {"failures": float(not rep.passed),
                "l2_identity_ratio": rep.constants["l2_identity_ratio"],
                "mwbp": rep.constants["mwbp"], "pointwise": rep.constants["pointwise"]}

    sweep(report, "tb.global_certificates", global_trial, {"failures": 0.0, "l2_identity_ratio": 1.0},
          trials=max(1, cfg.trials // 2))


# ---------------------------------------------------------------------------
# driver


RUNNERS = {
    "core": suite_core,
    "norms": suite_norms,
    "decompose": suite_decompose,
    "extrapolate": suite_extrapolate,
    "atoms": suite_atoms,
    "paraproduct": suite_paraproduct,
    "embed": suite_embed,
    "t1": suite_t1,
    "tb": suite_tb,
}


def run_suite(name: str, config: RunConfig) -> SuiteReport:
    """Run one suite (or ``all``, in name order) under the configured tolerance."""
    if name != "all" and name not in RUNNERS:
        raise ConfigInvalid(f"unknown suite {name!r}; choose from all, {', '.join(SUITES)}")
    names = sorted(RUNNERS) if name == "all" else [name]
    report = SuiteReport(name, config)
    with relative_tolerance(config.tau_rel), np.errstate(all="ignore"):
        for n in names:
            part = SuiteReport(n, config)
            start = time.perf_counter()
            try:
                RUNNERS[n](part)
            except _CAUGHT as exc:
                part.check(f"{n}.completed", False, detail=f"{type(exc).__name__}: {exc}")
            part.timings[n] = time.perf_counter() - start
            report.extend(part)
    return report


def write_report(report: SuiteReport, out_dir) -> dict:
    """Write report.json, report.txt, constants.csv, figure.svg, any extra
    figures, and timings.json (kept apart so the rest is reproducible)."""
    from .render import render_constants

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    def put(name, text):
        path = out / name
        path.write_text(text, encoding="utf-8")
        paths[name] = str(path)

    put("report.json", json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    put("report.txt", report.to_text())
    put("constants.csv", report.to_csv())
    shown = {k: v for k, v in report.constants.items() if v is not None and v > 0}
    put("figure.svg", render_constants(shown, title=f"suite {report.suite}: worst measured values"))
    for name in sorted(report.figures):
        put(name, report.figures[name])
    put("timings.json", json.dumps({k: round(v, 6) for k, v in sorted(report.timings.items())},
                                   sort_keys=True, indent=2) + "\n")
    return paths
