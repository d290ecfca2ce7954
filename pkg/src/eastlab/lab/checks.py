"""Batteries of exact checks, one function per topic.

Each battery appends :class:`Verdict` entries to a :class:`Report` and
returns it.  Tolerances: inequalities between time scales are checked with
a relative slack of ``1e-9``; survival inequalities with absolute slack
``1e-10``; identities between two solver paths at ``1e-8`` relative;
structural flow conditions at ``1e-12`` absolute.
"""
from __future__ import annotations

import math

import numpy as np

from .. import bottleneck as bn
from .. import exact, graphical, kernels, network
from .._accel import backend
from ..core import (Configuration, ModelParams, all_states, constraint, decode, encode, flip,
                    stationary_weights, target_mask, transitions, weight)
from .report import Report

__all__ = [
    "DEFAULT_Q",
    "SLACK",
    "check_core",
    "check_coupling",
    "check_mc_mean",
    "check_equivalence",
    "check_anchors",
    "check_monotone",
    "check_hitting_comparisons",
    "check_survival_laws",
    "check_variational",
    "check_ladder",
    "check_astar",
    "check_boundary",
    "check_dirichlet_gamma_bound",
    "check_reachable_sets",
    "check_flows",
    "check_recursive_flow",
    "check_capacity",
]

DEFAULT_Q = (0.05, 0.1, 0.2, 0.3, 0.4)
SLACK = 1e-9
SURV_TOL = 1e-10
IDENT_TOL = 1e-8
STRUCT_TOL = 1e-12


def _le(a: float, b: float, slack: float = SLACK) -> bool:
    """``a <= b`` up to a relative slack."""
    return a <= b + slack * max(abs(a), abs(b))


def _params(L: int, q: float) -> ModelParams:
    return ModelParams(L, q, allow_large_q=True)


def _fail_list(points) -> str:
    pts = list(points)
    if not pts:
        return ""
    shown = ", ".join(str(p) for p in pts[:6])
    return f"fails at {shown}" + (f" (+{len(pts) - 6} more)" if len(pts) > 6 else "")


# ---------------------------------------------------------------------------
# model and generator

def check_core(report: Report, Ls=range(1, 9), qs=(0.1, 0.3)) -> Report:
    rt_bad, tr_bad, w_bad, gen_bad, rev_bad = [], [], [], [], []
    for L in Ls:
        for s in range(1 << L):
            eta = decode(s, L)
            if encode(eta) != s or decode(encode(eta), L) != eta:
                rt_bad.append((L, s))
        for q in qs:
            P = _params(L, q)
            total = 0.0
            count = 0
            for s in range(1 << L):
                eta = decode(s, L)
                total += weight(eta, P)
                ts = transitions(eta, P)
                count += len(ts)
                legal = [x for x in range(1, L + 1) if constraint(eta, x)]
                if sorted(t.site for t in ts) != legal or any(t.target != flip(eta, t.site) for t in ts):
                    tr_bad.append((L, q, s))
            if abs(total - 1.0) > 1e-12:
                w_bad.append((L, q))
            gen = exact.build_generator(P)
            if gen.n_transitions != count:
                gen_bad.append((L, q))
            if gen.reversibility_residual() > 1e-14:
                rev_bad.append((L, q))
    report.add("encode-decode round trip", "state encoding is a bijection", not rt_bad, detail=_fail_list(rt_bad))
    report.add("transitions match the constraint", "East constraint and heat-bath rates", not tr_bad, detail=_fail_list(tr_bad))
    report.add("product measure normalised", "stationary product Bernoulli(p) measure", not w_bad, detail=_fail_list(w_bad))
    report.add("generator transition count", "generator assembly", not gen_bad, detail=_fail_list(gen_bad))
    report.add("detailed balance", "reversibility of the generator", not rev_bad, detail=_fail_list(rev_bad))
    return report


# ---------------------------------------------------------------------------
# graphical construction

def check_coupling(report: Report, L: int = 8, q: float = 0.2, seeds=range(100), horizon: float = 50.0) -> Report:
    """Shared-noise coupling of all ``2^L`` starts, audited per seed."""
    P = _params(L, q)
    viol = []
    checks = np.linspace(0.0, horizon, 11)[1:]
    for seed in seeds:
        noise = graphical.sample_noise(P, horizon, seed)
        rep = graphical.couple_all(P, noise, horizon, checks)
        if rep.violations:
            viol.append((seed, rep.violations))
        # before the first legal ring at L the runs cannot all agree on L
        bad = rep.coupling_time_exceeds & ~rep.uncoupled
        if bad.any():
            viol.append((seed, "coalesced early"))
    report.add(f"basic coupling over 2^{L} starts x {len(list(seeds))} seeds", "basic coupling of all initial states",
               not viol, detail=_fail_list(viol))
    # hitting-time kernel equals replay of the same noise
    mism = []
    for seed in range(20):
        P6 = _params(6, 0.3)
        t_hit = graphical.sample_hitting("111110", (6, 1), P6, seed)
        noise = graphical.sample_noise(P6, t_hit + 1.0, seed)
        tr = graphical.evolve(Configuration.from_string("111110"), noise, t_hit + 1.0)
        hit = tr.times[(tr.sites == 6) & tr.legal & (tr.newspin == 1)]
        if not hit.size or hit[0] != t_hit:
            mism.append(seed)
    report.add("hitting kernel equals trajectory replay", "graphical construction", not mism, detail=_fail_list(mism))
    return report


def check_mc_mean(report: Report, L: int = 6, q: float = 0.2, trials: int = 20000, seed: int = 0) -> Report:
    """Monte Carlo mean of the hitting time against the exact value (soft)."""
    P = _params(L, q)
    thit = exact.hit_time(P)
    x = graphical.sample_hitting_many((1 << (L - 1)) - 1, (L, 1), P, range(seed, seed + trials))
    se = float(x.std(ddof=1) / math.sqrt(trials))
    z = (float(x.mean()) - thit) / se
    report.add(f"MC mean hitting time L={L} q={q}", "Monte Carlo vs exact mean hitting time",
               abs(z) <= 4.0, hard=False, detail=f"mean={x.mean():.6g} exact={thit:.6g} z={z:.3f}")
    return report


# ---------------------------------------------------------------------------
# time scales

def timescale_table(Ls, qs) -> dict:
    out = {}
    for L in Ls:
        for q in qs:
            P = _params(L, q)
            out[(L, q)] = exact.timescales(P)
    return out


def check_equivalence(report: Report, Ls=range(1, 9), qs=DEFAULT_Q, table=None) -> Report:
    """``(1-q)^L T_hit <= T_rel <= T_mix <= 4 T_hit`` at every grid point."""
    table = timescale_table(Ls, qs) if table is None else table
    low, mid, high, ln2 = [], [], [], []
    for (L, q), ts in table.items():
        if not _le((1 - q) ** L * ts.thit, ts.trel):
            low.append((L, q))
        if not _le(ts.trel, ts.tmix):
            mid.append((L, q))
        if not _le(ts.tmix, 4 * ts.thit):
            high.append((L, q))
        if not _le(math.log(2) * ts.trel, ts.tmix):
            ln2.append((L, q))
    report.add("(1-q)^L T_hit <= T_rel", "equivalence of time scales, lower link", not low, detail=_fail_list(low))
    report.add("T_rel <= T_mix", "equivalence of time scales, middle link", not mid, detail=_fail_list(mid))
    report.add("T_mix <= 4 T_hit", "equivalence of time scales, upper link", not high, detail=_fail_list(high))
    report.add("ln2 T_rel <= T_mix", "spectral lower bound on mixing (reversible chains)", not ln2, detail=_fail_list(ln2))
    return report


def check_anchors(report: Report, q: float = 0.3) -> Report:
    """Two-state closed forms at ``L = 1``."""
    P = _params(1, q)
    p = 1 - q
    ts = exact.timescales(P)
    cap = network.capacity(P, 1, 0)
    values = {
        "T_rel": (ts.trel, 1.0),
        "T_hit": (ts.thit, 1.0 / p),
        "T_mix": (ts.tmix, math.log(4 * p)),
        "T(1)": (ts.tquant, math.log(4) / p),
        "capacity": (cap, p * q),
    }
    for name, (got, want) in values.items():
        report.add(f"L=1 anchor {name}", "two-state closed form", abs(got - want) <= 1e-8 * abs(want),
                   detail=f"got {got!r}, closed form {want!r}")
    return report


def check_monotone(report: Report, qs=(0.1, 0.2, 0.3), L_max: int = 8,
                   iterative_q: float = 0.2, iterative_L_max: int = 16) -> Report:
    bad = {"T_rel": [], "T_mix": [], "T_hit": []}
    for q in qs:
        prev = None
        for L in range(1, L_max + 1):
            ts = exact.timescales(_params(L, q))
            cur = {"T_rel": ts.trel, "T_mix": ts.tmix, "T_hit": ts.thit}
            if prev is not None:
                for k in cur:
                    if not _le(prev[k], cur[k]):
                        bad[k].append((L, q))
            prev = cur
    for k, pts in bad.items():
        report.add(f"{k} non-decreasing in L (L<={L_max})", "monotonicity of time scales in L", not pts,
                   detail=_fail_list(pts))
    if iterative_L_max > L_max:
        prev, pts, res = None, [], []
        for L in range(L_max, iterative_L_max + 1):
            g = exact.spectral_gap(_params(L, iterative_q), "iterative" if L > 2 else "dense")
            if g.residual >= 1e-8:
                res.append((L, g.residual))
            if prev is not None and not _le(prev, g.trel):
                pts.append(L)
            prev = g.trel
        report.add(f"T_rel non-decreasing up to L={iterative_L_max} (iterative)", "monotonicity of time scales in L",
                   not pts, detail=_fail_list(pts))
        report.add("iterative eigen-residual < 1e-8", "spectral gap solver accuracy", not res, detail=_fail_list(res))
    return report


def _tau_hat_mean(P: ModelParams) -> float:
    """Mean time, from all ones, to create a vacancy at ``L - 1``."""
    return exact.mean_hitting_time(P, (1 << P.L) - 1, (P.L - 1, 0))


def check_hitting_comparisons(report: Report, Ls=range(2, 9), qs=(0.1, 0.2, 0.3), table=None) -> Report:
    """Domination of hitting-time means and the quantile bounds."""
    hat_bad, quant_bad, tmix_bad = [], [], []
    for L in Ls:
        for q in qs:
            P = _params(L, q)
            ts = table[(L, q)] if table is not None and (L, q) in table else exact.timescales(P)
            hat = _tau_hat_mean(P)
            if not (_le(hat, ts.thit) and _le(ts.thit, 5 * hat)):
                hat_bad.append((L, q))
            if not (_le(ts.thit / 4, ts.tquant) and _le(ts.tquant, 4 * ts.thit)):
                quant_bad.append((L, q))
            if not _le(ts.tmix, ts.tquant):
                tmix_bad.append((L, q))
    report.add("E[hat tau_{L-1}] <= T_hit <= 5 E[hat tau_{L-1}]", "domination of hitting times by the shorter ones",
               not hat_bad, detail=_fail_list(hat_bad))
    report.add("T_hit/4 <= T(L) <= 4 T_hit", "quantile time versus mean hitting time", not quant_bad,
               detail=_fail_list(quant_bad))
    report.add("T(L) >= T_mix", "quantile time dominates mixing time", not tmix_bad, detail=_fail_list(tmix_bad))
    return report


def check_survival_laws(report: Report, Ls=range(2, 7), qs=(0.1, 0.2, 0.3)) -> Report:
    """Submultiplicativity of survival, its consequences, and the spectral tail bound."""
    submult_bad, geom_bad, small_t_bad, zanz_hat, prim = [], [], [], [], []
    fr = np.array([0.1, 0.3, 0.7, 1.5, 3.0])
    for L in Ls:
        for q in qs:
            P = _params(L, q)
            start = (1 << (L - 1)) - 1
            target = (L, 1)
            thit = exact.hit_time(P)
            T = exact.quantile_time(P)
            grid = fr * thit
            S = exact.survival_curve(P, start, target, grid)
            pair = exact.survival_curve(P, start, target, (grid[:, None] + grid[None, :]).ravel()).reshape(5, 5)
            if np.any(pair > S[:, None] * S[None, :] + SURV_TOL):
                submult_bad.append((L, q))
            tg = np.linspace(0.0, 5.0 * T, 21)
            St = exact.survival_curve(P, start, target, tg)
            if np.any(St > 0.25 ** np.floor(tg / T) + SURV_TOL):
                geom_bad.append((L, q))
            if np.any(1.0 - St[1:] > math.e * tg[1:] / thit + SURV_TOL):
                small_t_bad.append((L, q))
            # same chain of bounds for the time to create a vacancy at L from all ones
            ones = (1 << L) - 1
            hat_mean = exact.mean_hitting_time(P, ones, (L, 0))
            Sh = exact.survival_curve(P, ones, (L, 0), fr * hat_mean)
            Sh2 = exact.survival_curve(P, ones, (L, 0), (fr[:, None] + fr[None, :]).ravel() * hat_mean).reshape(5, 5)
            if np.any(Sh2 > Sh[:, None] * Sh[None, :] + SURV_TOL) or np.any(1.0 - Sh > math.e * fr + SURV_TOL):
                zanz_hat.append((L, q))
            # tail bound from the spectral gap
            pi = stationary_weights(P)
            mask = target_mask(target, L)
            trel = exact.relaxation_time(P)
            piA = float(pi[mask].sum())
            rng = np.random.default_rng(L * 1000 + int(q * 100))
            starts = [start] + [int(s) for s in rng.choice(np.flatnonzero(~mask), size=min(4, int((~mask).sum())), replace=False)]
            for s in starts:
                Ss = exact.survival_curve(P, s, mask, grid)
                bound = (1 - piA) / pi[s] * np.exp(-grid * piA / trel)
                if np.any(Ss > bound + SURV_TOL):
                    prim.append((L, q, s))
    report.add("P(tau>t+s) <= P(tau>t)P(tau>s)", "submultiplicativity of survival", not submult_bad, detail=_fail_list(submult_bad))
    report.add("P(tau>t) <= (1/4)^floor(t/T(L))", "geometric decay of survival", not geom_bad, detail=_fail_list(geom_bad))
    report.add("P(tau<t) <= e t / T_hit", "small-time bound for submultiplicative tails", not small_t_bad,
               detail=_fail_list(small_t_bad))
    report.add("same bounds for the time to empty site L from all ones", "survival of the all-ones hitting time",
               not zanz_hat, detail=_fail_list(zanz_hat))
    report.add("P_s(tau_A>t) <= pi(A^c)/pi(s) exp(-t pi(A)/T_rel)", "spectral tail bound for hitting times", not prim,
               detail=_fail_list(prim))
    return report


# ---------------------------------------------------------------------------
# bottleneck lower bounds and the block ladder

def check_variational(report: Report, Ls=range(2, 9), qs=(0.1, 0.2, 0.3), n_random: int = 50, seed: int = 0) -> Report:
    bad_a, bad_z, bad_r, incons = [], [], [], []
    for L in Ls:
        for q in qs:
            P = _params(L, q)
            trel = exact.relaxation_time(P)
            b = bn.bottleneck_lower_bound(P, bn.astar_mask(L))
            if not b.consistent:
                incons.append((L, q))
            if not _le(b.value, trel):
                bad_a.append((L, q))
            z = bn.reachable_set(Configuration.one_zero(L), P.n + 1, L).mask()
            if 0 < z.sum() < z.size and not _le(bn.bottleneck_lower_bound(P, z).value, trel):
                bad_z.append((L, q))
            rng = np.random.default_rng([seed, L, int(round(q * 1000))])
            for k in range(n_random):
                m = rng.random(1 << L) < rng.uniform(0.05, 0.95)
                if m.all() or not m.any():
                    continue
                if not _le(bn.bottleneck_lower_bound(P, m).value, trel):
                    bad_r.append((L, q, k))
    report.add("bottleneck ratio of A* <= T_rel", "variational lower bound on the relaxation time", not bad_a,
               detail=_fail_list(bad_a))
    report.add("bottleneck ratio of the reachable closure of 1...10 <= T_rel", "variational lower bound on the relaxation time",
               not bad_z, detail=_fail_list(bad_z))
    report.add(f"bottleneck ratio of {n_random} random sets <= T_rel", "variational lower bound on the relaxation time",
               not bad_r, detail=_fail_list(bad_r))
    report.add("boundary measure equals Dirichlet form of the indicator", "Dirichlet form of an indicator",
               not incons, detail=_fail_list(incons))
    return report


def check_ladder(report: Report, r_max: int = 20, qs=(0.1, 0.2, 0.3)) -> Report:
    report.add("block lengths (3, 5, 8) at r = 3", "recursive block lengths", bn.ladder_lengths(3) == [3, 5, 8],
               detail=str(bn.ladder_lengths(3)))
    bad = []
    for r in range(3, r_max + 1):
        ell = bn.ladder_lengths(r)
        for i, li in enumerate(ell, start=1):
            if not (2**i * (1 - 1 / r) ** i <= li <= 2 ** (i + 1)):
                bad.append((r, i, li))
    report.add(f"2^i (1-1/r)^i <= l_i <= 2^(i+1), r <= {r_max}", "growth of the block lengths", not bad,
               detail=_fail_list(bad))
    step = []
    for q in qs:
        lad = bn.block_ladder(3, q, exact_max_L=5)
        _, g3, g5, bound = lad.certificates[0]
        if not _le(g5, bound):
            step.append((q, g5, bound))
    report.add("T_rel(5) <= 2/(1-sqrt(eps_1)) T_rel(3)", "one step of the block-dynamics recursion", not step,
               detail=_fail_list(step))
    return report


# ---------------------------------------------------------------------------
# A* and its boundary

def check_astar(report: Report, L_max: int = 16) -> Report:
    bad_in, bad_out, bad_agree = [], [], []
    for L in range(1, L_max + 1):
        mask = bn.astar_mask(L)
        if not mask[(1 << (L - 1)) - 1]:
            bad_in.append(L)
        if np.any(mask & (((all_states(L) >> (L - 1)) & 1) == 1)):
            bad_out.append(L)
        stage = kernels.det_final_all(L)
        passes = kernels.det_final_all(L, passes=True)
        if not np.array_equal(stage, passes):
            bad_agree.append(L)
    report.add("1...10 lies in A*", "definition of A*", not bad_in, detail=_fail_list(bad_in))
    report.add("A* avoids {eta_L = 1}", "definition of A*", not bad_out, detail=_fail_list(bad_out))
    report.add(f"stage and pass deterministic dynamics agree, L <= {L_max}", "deterministic vacancy-removal dynamics",
               not bad_agree, detail=_fail_list(bad_agree))
    return report


def check_boundary(report: Report, L_max: int = 10, qs=DEFAULT_Q) -> Report:
    vac_bad, step_bad, incl, mass_bad = [], [], [], []
    for L in range(1, L_max + 1):
        rep = bn.boundary_astar(L)
        for eta, zs in rep.members():
            vac = set([0] + eta.zeros())
            for z0 in zs:
                ch = bn.delta_chain(eta, z0)
                if vac - {z0} != set(ch.z) or sum(1 for z in ch.z if z >= 1) != ch.K - 1:
                    vac_bad.append((L, str(eta), z0))
                if any(ch.d[k] > sum(ch.d[:k]) for k in range(1, ch.K)):
                    step_bad.append((L, str(eta), z0))
        for q in qs:
            P = _params(L, q)
            for g in bn.gamma_summary(P, rep):
                if not g.inclusion_ok:
                    incl.append((L, g.z0))
                ok = (_le(g.mass0, g.mass_mid0) and _le(g.mass_mid0, g.mass_bound)
                      and _le(q * g.mass1, g.mass_mid1) and _le(g.mass_mid1, g.mass_bound))
                if not ok:
                    mass_bad.append((L, q, g.z0))
    report.add("boundary vacancies are the chain points, K-1 of them in [1, L]", "vacancies of boundary configurations",
               not vac_bad, detail=_fail_list(vac_bad))
    report.add("d_k <= d_1 + ... + d_(k-1)", "admissible step lengths of the chain", not step_bad, detail=_fail_list(step_bad))
    report.add("boundary chains covered by the enumerated families", "decomposition of the boundary by witness",
               not sorted(set(incl)), detail=_fail_list(sorted(set(incl))))
    report.add("boundary mass per witness <= q^(n+1) |Gamma|", "mass bound per witness", not mass_bad,
               detail=_fail_list(mass_bad))
    return report


def check_dirichlet_gamma_bound(report: Report, L_max: int = 10, qs=DEFAULT_Q) -> Report:
    bad, dec = [], []
    for L in range(1, L_max + 1):
        rep = bn.boundary_astar(L)
        for q in qs:
            P = _params(L, q)
            D = exact.dirichlet_form(P, rep.astar.astype(float))
            D2 = bn.dirichlet_astar_decomposed(P, rep)
            sizes = sum(len(bn.enumerate_gamma(z0, P.n, L)) for z0 in range(1, L + 1))
            if not _le(D, q ** (P.n + 1) * sizes):
                bad.append((L, q))
            if abs(D - D2) > 1e-12 * max(D, 1e-300):
                dec.append((L, q))
    report.add("D(1_A*) <= q^(n+1) sum |Gamma_z0|", "Dirichlet form of A* bounded by the families", not bad,
               detail=_fail_list(bad))
    report.add("D(1_A*) equals the per-witness decomposition", "Dirichlet form of A* by witness", not dec,
               detail=_fail_list(dec))
    return report


def check_reachable_sets(report: Report) -> Report:
    bad = []
    for n in range(1, 5):
        sets, escaped = bn.v_sets(n)
        if escaped or any(max(s) > 2**n - 1 or min(s) < 1 for s in sets):
            bad.append(n)
    report.add("V_n zeros within [1, 2^n - 1], n <= 4", "reachable sets with n vacancies", not bad, detail=_fail_list(bad))
    sizes = (len(bn.v_sets(1)[0]), len(bn.v_sets(2)[0]))
    report.add("|V_1| = 1 and |V_2| = 2", "reachable sets with n vacancies", sizes == (1, 2), detail=str(sizes))
    r = bn.reachable_set(Configuration.one_zero(5), 3, 5)
    b = bn.internal_boundary(r.mask(), 5)
    got = sorted(tuple(decode(int(s), 5).zeros()) for s in np.flatnonzero(b))
    u2 = sorted(tuple(sorted(s)) for s in bn.u_sets(2, 5))
    want = [(1, 2, 5), (2, 3, 5)]
    report.add("boundary of the 3-vacancy closure of 1...10 at L=5 equals U_2", "bottleneck of the reachable closure",
               got == want and u2 == want, detail=f"boundary={got} U_2={u2}")
    return report


# ---------------------------------------------------------------------------
# networks

def check_flows(report: Report, Ls=range(1, 9), qs=(0.1, 0.2, 0.3), seed: int = 0) -> Report:
    energy_bad, div_bad = [], []
    for L in Ls:
        for q in qs:
            P = _params(L, q)
            A, B = (1 << L) - 1, (L, 0)
            cap = network.capacity(P, A, B)
            fl = network.equilibrium_flow(P, A, B)
            if abs(fl.energy() * cap - 1.0) > IDENT_TOL:
                energy_bad.append((L, q))
            chk = fl.check(STRUCT_TOL)
            if not chk["is_flow"] or abs(chk["strength"] - 1.0) > STRUCT_TOL * 100:
                div_bad.append((L, q, chk["interior_divergence"]))
    report.add("equilibrium flow energy equals resistance", "Thomson principle at the optimum", not energy_bad,
               detail=_fail_list(energy_bad))
    report.add("equilibrium flow is a unit flow", "flow conditions", not div_bad, detail=_fail_list(div_bad))

    # duality: random unit flows and random potentials bracket the capacity
    rng = np.random.default_rng(seed)
    dual_bad, combo_bad = [], []
    for L in range(2, 6):
        P = _params(L, 0.3)
        A, B = (1 << L) - 1, (L, 0)
        cap = network.capacity(P, A, B)
        f, _ = network.harmonic_potential(P, A, B)
        bmask = target_mask(B, L)
        flows = [network.random_unit_flow(P, A, B, rng, n_paths=4) for _ in range(6)]
        for th in flows:
            if not _le(1.0 / th.energy(), cap, IDENT_TOL):
                dual_bad.append((L, "flow"))
        for _ in range(6):
            g = rng.random(1 << L)
            g[A] = 1.0
            g[bmask] = 0.0
            if not _le(cap, exact.dirichlet_form_edges(P, g), IDENT_TOL):
                dual_bad.append((L, "potential"))
        if abs(exact.dirichlet_form_edges(P, f) - cap) > IDENT_TOL * cap:
            dual_bad.append((L, "optimum"))
        net = flows[0].network
        e = [th.energy() for th in flows]
        avg = sum(flows[1:], flows[0]).scaled(1.0 / len(flows))
        if not _le(avg.energy(), max(e)):
            combo_bad.append((L, "average"))
        if not _le((flows[0] + flows[1]).energy(), 2 * (e[0] + e[1])):
            combo_bad.append((L, "sum"))
        # disjoint supports: energies add
        v1 = np.where(np.arange(net.n_edges) % 2 == 0, flows[0].values, 0.0)
        v2 = np.where(np.arange(net.n_edges) % 2 == 1, flows[1].values, 0.0)
        if abs(network.flow_energy(net, v1 + v2) - network.flow_energy(net, v1) - network.flow_energy(net, v2)) > 1e-12 * (1 + network.flow_energy(net, v1 + v2)):
            combo_bad.append((L, "disjoint"))
    report.add("1/E(unit flow) <= C <= D(g) for feasible g", "Thomson and Dirichlet principles", not dual_bad,
               detail=_fail_list(dual_bad))
    report.add("energy of averages and sums of flows", "energy inequalities for combined flows", not combo_bad,
               detail=_fail_list(combo_bad))

    mono = []
    for q in qs:
        P = _params(8, q)
        ones = (1 << 8) - 1
        R = {ell: network.effective_resistance(P, ones, network.sink_set(ell, 8)) for ell in range(1, 9)}
        for L in range(1, 9):
            for ell in range(L, 9):
                if not _le(R[L], R[ell]):
                    mono.append((q, L, ell))
    report.add("R(1, B_L) <= R(1, B_l) for l >= L", "resistance grows with the distance of the sink", not mono,
               detail=_fail_list(mono))
    return check_recursive_flow(report, qs=qs)


def check_recursive_flow(report: Report, qs=(0.1, 0.2, 0.3), i: int = 1, r: int = 3) -> Report:
    bad_flow, bad_thom, bad_rec, slack = [], [], [], []
    for q in qs:
        _, cert = network.recursive_flow(i, r, q)
        if not cert.unit_flow_ok:
            bad_flow.append((q, cert.interior_divergence))
        if not cert.thomson_ok:
            bad_thom.append(q)
        if not cert.recursion_ok:
            bad_rec.append(q)
        slack.append(f"q={q}: bound/energy={cert.slack:.3g}")
    report.add(f"recursive flow (i={i}, r={r}) is a unit flow", "recursive flow construction", not bad_flow,
               detail=_fail_list(bad_flow))
    report.add("R_(i+1) <= E(Theta)", "Thomson principle for the recursive flow", not bad_thom, detail=_fail_list(bad_thom))
    report.add("E(Theta) <= 4 R_i + 6 R_i/(qN)", "recursion for resistances", not bad_rec,
               detail=_fail_list(bad_rec) or "; ".join(slack))
    return report


def check_capacity(report: Report, Ls=range(1, 9), qs=(0.05, 0.1, 0.2, 0.3)) -> Report:
    ident, two_way, cich, appx, single = [], [], [], [], []
    for L in Ls:
        for q in qs:
            P = _params(L, q)
            start = (1 << (L - 1)) - 1
            h = network.hitting_capacity_identity(P, start, (L, 1))
            if h["residual"] >= IDENT_TOL:
                ident.append((L, q, h["residual"]))
            c1 = network.capacity(P, start, (L, 1))
            c2 = network.capacity_dirichlet(P, start, (L, 1))
            if abs(c1 - c2) > IDENT_TOL * c1:
                two_way.append((L, q))
            cc = network.capacity_sandwich(P)
            if not cc.holds:
                cich.append((L, q))
            ones = (1 << L) - 1
            t0 = exact.mean_hitting_time(P, ones, (L, 0))
            if not _le(t0, network.effective_resistance(P, ones, (L, 0))):
                appx.append((L, q))
            if L <= 4:
                rest = ~target_mask([start], L)
                hold = exact.build_generator(P).holding[start]
                t1 = exact.mean_hitting_time(P, start, rest)
                if abs(t1 * hold - 1.0) > IDENT_TOL:
                    single.append((L, q))
    report.add("E_a[tau_B] = (1/C) sum pi P(tau_a < tau_B)", "hitting time and capacity identity", not ident,
               detail=_fail_list(ident))
    report.add("jump-chain capacity equals Dirichlet value", "capacity via escape probabilities and Dirichlet principle",
               not two_way, detail=_fail_list(two_way))
    report.add("q p^(L-1) <= T_hit C <= q (and the q^-gamma form)", "hitting time times capacity sandwich", not cich,
               detail=_fail_list(cich))
    report.add("E_1[tau_(eta_L=0)] <= R(1, B_L)", "mean emptying time bounded by resistance", not appx,
               detail=_fail_list(appx))
    report.add("single-step exit: E_a[tau] = 1/R(a)", "hitting time and capacity identity, trivial case", not single,
               detail=_fail_list(single))
    return report


def with_numpy_backend(fn, *args, **kwargs):
    """Run ``fn`` with the pure-numpy kernels."""
    with backend("numpy"):
        return fn(*args, **kwargs)
