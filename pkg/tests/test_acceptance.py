"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in an
"acceptance criteria" section at the end of the terminal report.
"""
from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import record_criterion
from eastlab import bottleneck as bn
from eastlab import exact, graphical, network
from eastlab.core import Configuration, ModelParams, all_states, decode, spin_of, stationary_weights
from eastlab.kernels import det_final_all
from eastlab.lab import Grid, run_scenario

QS = (0.05, 0.1, 0.2, 0.3, 0.4)
REL = 1e-9


def le(a: float, b: float, rel: float = REL) -> bool:
    return a <= b + rel * max(abs(a), abs(b))


@lru_cache(maxsize=None)
def ts(L: int, q: float) -> exact.TimescaleReport:
    return exact.timescales(ModelParams(L, q))


def one_zero(L: int) -> int:
    return (1 << (L - 1)) - 1


# ---------------------------------------------------------------------------

def _chain_failures():
    bad = []
    for L in range(1, 9):
        for q in QS:
            r = ts(L, q)
            links = {
                "(1-q)^L T_hit <= T_rel": le((1 - q) ** L * r.thit, r.trel),
                "T_rel <= T_mix": le(r.trel, r.tmix),
                "T_mix <= 4 T_hit": le(r.tmix, 4 * r.thit),
            }
            bad += [(L, q, name) for name, ok in links.items() if not ok]
    return bad


@pytest.mark.xfail(strict=True, reason="T_rel = 1 exceeds T_mix = ln(2.4) at L=1, q=0.4; the chain is false there")
def test_criterion_1_time_scale_chain():
    t0 = time.perf_counter()
    bad = _chain_failures()
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 120
    record_criterion(1, ok, "(1-q)^L T_hit <= T_rel <= T_mix <= 4 T_hit on L 1..8 x q grid",
                     f"{elapsed:.1f}s; failing links: {bad}" if bad else f"{elapsed:.1f}s")
    assert not bad
    assert elapsed < 120


def test_time_scale_chain_failure_is_isolated():
    # the only broken link is T_rel <= T_mix at the two-state point with q = 0.4,
    # and the weaker general bound ln(2) T_rel <= T_mix holds everywhere
    assert _chain_failures() == [(1, 0.4, "T_rel <= T_mix")]
    assert math.log(2.4) < 1.0
    for L in range(1, 9):
        for q in QS:
            assert le(math.log(2) * ts(L, q).trel, ts(L, q).tmix)


def test_criterion_2_closed_form_anchors():
    P = ModelParams(1, 0.3)
    r = ts(1, 0.3)
    got = {
        "T_rel": (r.trel, 1.0),
        "T_hit": (r.thit, 1 / 0.7),
        "T_mix": (r.tmix, math.log(2.8)),
        "T(1)": (r.tquant, math.log(4) / 0.7),
        "C": (network.capacity(P, "0", (1, 1)), 0.21),
    }
    bad = {k: v for k, v in got.items() if abs(v[0] - v[1]) > 1e-8 * abs(v[1])}
    record_criterion(2, not bad, "two-state anchors within 1e-8 relative", str(bad) if bad else "")
    assert not bad


def test_criterion_3_hitting_comparisons():
    t0 = time.perf_counter()
    bad = []
    for L in range(2, 9):
        for q in QS:
            P = ModelParams(L, q)
            r = ts(L, q)
            hat = exact.mean_hitting_time(P, (1 << L) - 1, (L - 1, 0))
            if not (le(hat, r.thit) and le(r.thit, 5 * hat)):
                bad.append((L, q, "mean domination"))
            if not (le(r.thit / 4, r.tquant) and le(r.tquant, 4 * r.thit)):
                bad.append((L, q, "quantile vs mean"))
            if not le(r.tmix, r.tquant):
                bad.append((L, q, "quantile vs mixing"))
            tg = np.linspace(0.0, 5.0 * r.tquant, 21)
            S = exact.survival_curve(P, one_zero(L), (L, 1), tg)
            if np.any(S > 0.25 ** np.floor(tg / r.tquant) + 1e-10):
                bad.append((L, q, "geometric decay"))
            if np.any(1.0 - S[1:] > math.e * tg[1:] / r.thit + 1e-10):
                bad.append((L, q, "small-time bound"))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 120
    record_criterion(3, ok, "hitting-time domination, quantile bounds, survival decay; L 2..8",
                     f"{elapsed:.1f}s" + (f"; {bad}" if bad else ""))
    assert ok


def test_criterion_4_submultiplicative_survival():
    bad = []
    fr = np.array([0.1, 0.3, 0.7, 1.5, 3.0])
    for L in range(1, 7):
        for q in QS:
            P = ModelParams(L, q)
            thit = ts(L, q).thit
            grid = fr * thit
            S = exact.survival_curve(P, one_zero(L), (L, 1), grid)
            pair = exact.survival_curve(P, one_zero(L), (L, 1), (grid[:, None] + grid[None, :]).ravel()).reshape(5, 5)
            if np.any(pair > S[:, None] * S[None, :] + 1e-10):
                bad.append((L, q, "submultiplicative"))
            if np.any(1.0 - S > math.e * grid / thit + 1e-10):
                bad.append((L, q, "P(tau<t) <= e t / E tau"))
    record_criterion(4, not bad, "survival submultiplicative on 5x5 grids and small-time bound, L <= 6",
                     str(bad) if bad else "")
    assert not bad


def test_criterion_5_monotone_in_length():
    bad = []
    for q in QS:
        for L in range(2, 9):
            a, b = ts(L - 1, q), ts(L, q)
            for name in ("trel", "tmix", "thit"):
                if not le(getattr(a, name), getattr(b, name)):
                    bad.append((L, q, name))
    q = 0.2
    prev, worst_res = 0.0, 0.0
    for L in range(2, 17):
        g = exact.spectral_gap(ModelParams(L, q), "iterative")
        worst_res = max(worst_res, g.residual)
        if not le(prev, g.trel):
            bad.append((L, q, "iterative trel"))
        prev = g.trel
    if worst_res >= 1e-8:
        bad.append(("residual", worst_res))
    record_criterion(5, not bad, "T_rel, T_mix, T_hit nondecreasing in L (exact L <= 8, iterative T_rel to L = 16)",
                     f"largest eigen-residual {worst_res:.2e}" + (f"; {bad}" if bad else ""))
    assert not bad


def test_criterion_6_astar_exhaustive():
    t0 = time.perf_counter()
    bad = []
    for L in range(1, 17):
        m = bn.astar_mask(L)
        last = spin_of(all_states(L), L) == 1
        if not m[one_zero(L)]:
            bad.append((L, "1...10 not in A*"))
        if np.any(m & last):
            bad.append((L, "A* meets eta_L = 1"))
        if not np.array_equal(det_final_all(L, passes=False), det_final_all(L, passes=True)):
            bad.append((L, "stage and pass dynamics differ"))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 300
    record_criterion(6, ok, "A* contains 1...10, avoids eta_L = 1, stage = pass dynamics; all states, L <= 16",
                     f"{elapsed:.1f}s" + (f"; {bad}" if bad else ""))
    assert ok


def test_criterion_7_boundary_structure():
    bad = []
    for L in range(2, 11):
        rep = bn.boundary_astar(L)
        for eta, zs in rep.members():
            vac = set(eta.zeros())
            for z0 in zs:
                ch = bn.delta_chain(eta, z0)
                inside = {z for z in ch.z if z >= 1}
                if len(inside) != ch.K - 1 or not (vac == inside or vac == inside | {z0}):
                    bad.append((L, str(eta), z0, "vacancies"))
                if any(ch.d[k] > sum(ch.d[:k]) for k in range(1, ch.K)):
                    bad.append((L, str(eta), z0, "step lengths"))
        for q in QS:
            P = ModelParams(L, q)
            for g in bn.gamma_summary(P, rep):
                if not g.inclusion_ok:
                    bad.append((L, q, g.z0, "inclusion"))
                if not (le(g.mass0, g.mass_bound) and le(q * g.mass1, g.mass_bound)):
                    bad.append((L, q, g.z0, "mass bound"))
    record_criterion(7, not bad, "boundary vacancies match chains, step lengths, family inclusion, mass bound; L <= 10",
                     str(bad[:5]) if bad else "")
    assert not bad


def test_criterion_8_dirichlet_gamma_bound():
    bad = []
    for L in range(2, 11):
        rep = bn.boundary_astar(L)
        for q in QS:
            P = ModelParams(L, q)
            sizes = sum(len(bn.enumerate_gamma(z, P.n, L)) for z in range(1, L + 1))
            D = exact.dirichlet_form(P, rep.astar.astype(float))
            if not le(D, q ** (P.n + 1) * sizes):
                bad.append((L, q))
    record_criterion(8, not bad, "D(1_A*) <= q^(n+1) sum |Gamma_z0|; L <= 10, grid q", str(bad) if bad else "")
    assert not bad


def test_criterion_9_variational_bound():
    bad = []
    for L in range(2, 9):
        for q in QS:
            P = ModelParams(L, q)
            trel = ts(L, q).trel
            pi = stationary_weights(P)
            sets = {"A*": bn.astar_mask(L),
                    "closure": bn.reachable_set(Configuration.one_zero(L), P.n + 1, L).mask()}
            rng = np.random.default_rng([L, int(round(q * 100))])
            k = 0
            while k < 50:
                m = rng.random(1 << L) < rng.uniform(0.05, 0.95)
                if m.any() and not m.all() and pi[m].sum() <= 0.5:
                    sets[f"random{k}"] = m
                    k += 1
            for name, m in sets.items():
                if m.all() or not m.any():
                    continue
                b = bn.bottleneck_lower_bound(P, m)
                if not (b.consistent and le(b.value, trel)):
                    bad.append((L, q, name))
    record_criterion(9, not bad, "bottleneck ratio <= T_rel for A*, closure of 1...10, 50 random sets; L <= 8",
                     str(bad[:5]) if bad else "")
    assert not bad


def test_criterion_10_reachable_sets():
    bad = []
    for n in range(1, 5):
        sets, escaped = bn.v_sets(n)
        if escaped or any(max(z) > 2**n - 1 for z in sets):
            bad.append(("support", n))
        if n == 1 and len(sets) != 1:
            bad.append(("|V_1|", len(sets)))
        if n == 2 and len(sets) != 2:
            bad.append(("|V_2|", len(sets)))
    L = 5
    A = bn.reachable_set(Configuration.one_zero(L), 3, L).mask()
    got = sorted((frozenset(decode(int(s), L).zeros()) for s in np.flatnonzero(bn.internal_boundary(A, L))), key=sorted)
    if got != bn.u_sets(2, L) or got != [frozenset({1, 2, 5}), frozenset({2, 3, 5})]:
        bad.append(("boundary of the closure", [sorted(z) for z in got]))
    record_criterion(10, not bad, "V_n support, |V_1| = 1, |V_2| = 2, boundary of the closure equals U_2",
                     str(bad) if bad else "")
    assert not bad


def test_criterion_11_block_ladder():
    bad = []
    if bn.ladder_lengths(3) != [3, 5, 8]:
        bad.append("lengths at r=3")
    for r in range(3, 21):
        for i, ell in enumerate(bn.ladder_lengths(r), start=1):
            if not (2**i * (1 - 1 / r) ** i <= ell <= 2 ** (i + 1)):
                bad.append((r, i, ell))
    for q in (0.1, 0.2, 0.3):
        lad = bn.block_ladder(3, q)
        if not lad.certificates or lad.certificates[0][0] != 2 or not lad.holds():
            bad.append(("one-step bound", q, lad.certificates[:1]))
    record_criterion(11, not bad, "ladder (3, 5, 8), length bounds for r <= 20, one-step gap bound 3 -> 5",
                     str(bad) if bad else "")
    assert not bad


def test_criterion_12_networks():
    bad = []
    for L in range(1, 9):
        for q in QS:
            P = ModelParams(L, q)
            if network.hitting_capacity_identity(P, one_zero(L), (L, 1))["residual"] >= 1e-8:
                bad.append((L, q, "identity"))
            if not network.capacity_sandwich(P).holds:
                bad.append((L, q, "sandwich"))
            ones = (1 << L) - 1
            f = network.equilibrium_flow(P, ones, (L, 0))
            R = network.effective_resistance(P, ones, (L, 0))
            if abs(f.energy() - R) > 1e-8 * R:
                bad.append((L, q, "energy"))
    for q in (0.1, 0.2, 0.3):
        _, c = network.recursive_flow(1, 3, q)
        if not (c.unit_flow_ok and c.interior_divergence < 1e-12):
            bad.append((q, "unit flow"))
        if not (c.thomson_ok and c.recursion_ok and le(c.R_next, 4 * c.R_i + 6 * c.R_i / (q * c.N))):
            bad.append((q, "recursion"))
    record_criterion(12, not bad, "capacity identity, capacity sandwich, energy = resistance, recursive flow at i=1",
                     str(bad) if bad else "")
    assert not bad


def test_criterion_13_monte_carlo_and_coupling():
    t0 = time.perf_counter()
    P = ModelParams(6, 0.2)
    x = graphical.sample_hitting_many(one_zero(6), (6, 1), P, range(20_000))
    se = x.std(ddof=1) / math.sqrt(x.size)
    z = (x.mean() - exact.hit_time(P)) / se
    P8 = ModelParams(8, 0.2)
    violations = sum(graphical.couple_all(P8, graphical.sample_noise(P8, 50.0, s), 50.0, np.linspace(1.0, 50.0, 50)).violations
                     for s in range(100))
    elapsed = time.perf_counter() - t0
    ok = abs(z) <= 4 and violations == 0 and elapsed < 180
    record_criterion(13, ok, "MC mean of tau_6 within 4 SE, coupling over 2^8 starts x 100 seeds",
                     f"z={z:.3f}, violations={violations}, {elapsed:.1f}s")
    assert ok


def test_criterion_14_desk_scale_substitutes():
    parts = {}
    sep = run_scenario("separation")
    pair45 = [r["ratio"] for r in sep.rows if r["kind"] == "pair" and (r["L"], r["L2"]) == (4, 5)]
    parts["separation across log2 classes"] = all(b > a for a, b in zip(pair45, pair45[1:]))
    g1 = [r for r in sep.rows if r["kind"] == "gamma1" and r["d"] == 2.0]
    parts["gamma=1 ratios < 20"] = all(r["ratio"] < 20 for r in g1) and min(r["q"] for r in g1) == 0.125 \
        and max(r["L2"] for r in g1) <= 16
    exp = run_scenario("exponential_law")
    smallest = min(exp.rows, key=lambda r: r["q"])
    parts["KS < 0.1 at smallest q"] = smallest["ks"] < 0.1 and smallest["trials"] == 100_000
    het = run_scenario("heterogeneity", Grid(q=[0.1], gamma=[0.5], d=[1.0], trials=10_000))
    row = next(r for r in het.rows if r["part"] == "ii")
    parts["rightmost vacancy survives >= 0.9"] = row["mc"] >= 0.9 and row["trials"] == 10_000
    ok = all(parts.values())
    detail = (f"ratios(4,5)={[round(v, 3) for v in pair45]}, max gamma1 ratio={max(r['ratio'] for r in g1):.3f}, "
              f"ks={smallest['ks']:.4f} at q={smallest['q']}, survival={row['mc']:.4f}; soft/trend criterion")
    record_criterion(14, ok, "desk-scale substitutes: separation trend, bounded gamma=1 ratios, exponential law, "
                     "persistence", detail + ("" if ok else f"; {parts}"))
    assert ok
