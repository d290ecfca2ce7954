"""Electrical-network view of the East chain.

Each allowed transition ``sigma <-> sigma^x`` is an edge with conductance
``pi(sigma) K(sigma, sigma^x)``.  This module computes capacities two
ways (escape probabilities of the jump chain and the Dirichlet principle),
equilibrium potentials and flows, flow energies, the identity linking
mean hitting times to capacities, and the recursive flow used to bound
resistances block by block.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import exact
from .bottleneck import ladder_lengths
from .core import Configuration, ModelParams, all_states, as_state, constraint_mask, spin_of, target_mask

__all__ = [
    "Network",
    "Flow",
    "RecursiveFlowCertificate",
    "CapacitySandwich",
    "build_network",
    "capacity",
    "capacity_dirichlet",
    "harmonic_potential",
    "equilibrium_flow",
    "flow_energy",
    "effective_resistance",
    "random_unit_flow",
    "hitting_capacity_identity",
    "capacity_sandwich",
    "sink_set",
    "recursive_flow",
]

NETWORK_MAX_L = 16


@dataclass(frozen=True)
class Network:
    """Undirected edges ``u < v`` (state ids) with their conductances."""

    params: ModelParams
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    conductance: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return 1 << self.params.L

    @property
    def n_edges(self) -> int:
        return int(self.u.size)

    @property
    def resistance(self) -> np.ndarray:
        return 1.0 / self.conductance

    def edge_index(self, a, b) -> np.ndarray:
        """Index of each undirected edge ``{a, b}``; ``-1`` where there is none."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key = lo * self.n_states + hi
        keys = self.u * self.n_states + self.v
        i = np.searchsorted(keys, key)
        i = np.minimum(i, keys.size - 1)
        return np.where(keys[i] == key, i, -1)


@lru_cache(maxsize=32)
def build_network(params: ModelParams) -> Network:
    if params.L > NETWORK_MAX_L:
        raise ValueError(f"network capped at L={NETWORK_MAX_L}")
    gen = exact.build_generator(params)
    K = gen.rates.tocoo()
    keep = K.row < K.col
    u, v = K.row[keep].astype(np.int64), K.col[keep].astype(np.int64)
    c = gen.pi[u] * K.data[keep]
    order = np.lexsort((v, u))
    return Network(params, u[order], v[order], c[order])


@dataclass
class Flow:
    """Antisymmetric edge function; ``values[e]`` flows from ``u[e]`` to ``v[e]``."""

    network: Network
    values: np.ndarray
    sources: np.ndarray = field(repr=False)
    sinks: np.ndarray = field(repr=False)

    def divergence(self) -> np.ndarray:
        n = self.network.n_states
        return (np.bincount(self.network.u, weights=self.values, minlength=n)
                - np.bincount(self.network.v, weights=self.values, minlength=n))

    @property
    def strength(self) -> float:
        return float(self.divergence()[self.sources].sum())

    def value(self, a: int, b: int) -> float:
        """Flow along the oriented edge ``a -> b`` (zero off the edge set)."""
        e = int(self.network.edge_index(a, b))
        if e < 0:
            return 0.0
        return float(self.values[e] if a < b else -self.values[e])

    def energy(self) -> float:
        return flow_energy(self.network, self)

    def check(self, tol: float = 1e-12) -> dict:
        """Flow conditions: zero divergence off sources and sinks, signs on them."""
        div = self.divergence()
        mask = np.ones(div.size, dtype=bool)
        mask[self.sources] = False
        mask[self.sinks] = False
        interior = float(np.max(np.abs(div[mask]))) if mask.any() else 0.0
        return {
            "interior_divergence": interior,
            "source_ok": bool(np.all(div[self.sources] >= -tol)),
            "sink_ok": bool(np.all(div[self.sinks] <= tol)),
            "strength": self.strength,
            "is_flow": interior <= tol and bool(np.all(div[self.sources] >= -tol)) and bool(np.all(div[self.sinks] <= tol)),
        }

    def scaled(self, factor: float) -> "Flow":
        return Flow(self.network, factor * self.values, self.sources, self.sinks)

    def __add__(self, other: "Flow") -> "Flow":
        if other.network is not self.network:
            raise ValueError("flows live on different networks")
        return Flow(self.network, self.values + other.values,
                    np.union1d(self.sources, other.sources), np.union1d(self.sinks, other.sinks))

    def to_text(self, stream=None, tol: float = 0.0) -> str:
        """``fromid toid value`` lines, oriented along positive flow."""
        buf = io.StringIO()
        for a, b, val in zip(self.network.u.tolist(), self.network.v.tolist(), self.values.tolist()):
            if abs(val) <= tol:
                continue
            if val >= 0:
                buf.write(f"{a} {b} {val!r}\n")
            else:
                buf.write(f"{b} {a} {-val!r}\n")
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def flow_energy(network: Network, flow) -> float:
    """Sum over undirected edges of resistance times squared flow."""
    values = flow.values if isinstance(flow, Flow) else np.asarray(flow, dtype=float)
    if values.shape != network.conductance.shape:
        raise ValueError("flow is not indexed by the network's edges")
    return float(np.sum(values**2 / network.conductance))


def _as_mask(item, L: int) -> np.ndarray:
    if isinstance(item, (int, np.integer, str, Configuration)):
        return target_mask([as_state(item, L)], L)
    return target_mask(item, L)


def _masks(params: ModelParams, A, B):
    a, b = _as_mask(A, params.L), _as_mask(B, params.L)
    if not a.any() or not b.any():
        raise ValueError("both sets must be nonempty")
    if np.any(a & b):
        raise ValueError("the two sets overlap")
    return a, b


def capacity(params: ModelParams, A, B) -> float:
    """``sum over a in A of pi(a) R(a) P_a(tau_B < return to A)``.

    Escape probabilities are solved on the embedded jump chain.
    """
    a, b = _masks(params, A, B)
    gen = exact.build_generator(params)
    P = (sp.diags(1.0 / gen.holding) @ gen.rates).tocsr()
    free = np.flatnonzero(~(a | b))
    h = b.astype(float)
    if free.size:
        M = sp.identity(free.size, format="csc") - P[free][:, free].tocsc()
        rhs = np.asarray(P[free][:, np.flatnonzero(b)].sum(axis=1)).ravel()
        h[free] = spla.spsolve(M, rhs)
    escape = P[np.flatnonzero(a)] @ h
    return float(np.sum(gen.pi[a] * gen.holding[a] * escape))


def harmonic_potential(params: ModelParams, A, B) -> tuple[np.ndarray, float]:
    """``f = 1`` on ``A``, ``0`` on ``B``, annihilated by the generator elsewhere.

    Returns ``f`` and the largest generator residual off ``A`` and ``B``.
    """
    a, b = _masks(params, A, B)
    gen = exact.build_generator(params)
    Q = gen.matrix()
    f = a.astype(float)
    free = np.flatnonzero(~(a | b))
    if free.size:
        M = (-Q[free][:, free]).tocsc()
        rhs = np.asarray(Q[free][:, np.flatnonzero(a)].sum(axis=1)).ravel()
        sol = spla.spsolve(M, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError("potential system is singular")
        f[free] = sol
    res = float(np.max(np.abs((Q @ f)[free]))) if free.size else 0.0
    return f, res


def capacity_dirichlet(params: ModelParams, A, B) -> float:
    """Dirichlet form of the equilibrium potential (the infimum in the Dirichlet principle)."""
    f, _ = harmonic_potential(params, A, B)
    return exact.dirichlet_form_edges(params, f)


def effective_resistance(params: ModelParams, A, B) -> float:
    return 1.0 / capacity(params, A, B)


def equilibrium_flow(params: ModelParams, A, B) -> Flow:
    """Unit flow ``c (f(u) - f(v)) / C`` along each edge, ``f`` the equilibrium potential."""
    a, b = _masks(params, A, B)
    net = build_network(params)
    f, _ = harmonic_potential(params, a, b)
    cap = float(np.sum(net.conductance * (f[net.u] - f[net.v]) ** 2))
    if cap <= 0:
        raise ValueError("zero capacity between the two sets")
    vals = net.conductance * (f[net.u] - f[net.v]) / cap
    return Flow(net, vals, np.flatnonzero(a), np.flatnonzero(b))


def random_unit_flow(params: ModelParams, A, B, rng: np.random.Generator, n_paths: int = 8) -> Flow:
    """Average of ``n_paths`` unit path flows, each the edge crossings of a
    jump-chain walk from a uniformly chosen state of ``A`` until it hits ``B``."""
    a, b = _masks(params, A, B)
    net = build_network(params)
    gen = exact.build_generator(params)
    rates = gen.rates.tocsr()
    sources = np.flatnonzero(a)
    vals = np.zeros(net.n_edges)
    for _ in range(n_paths):
        s = int(rng.choice(sources))
        cur_u, cur_v = [], []
        while not b[s]:
            lo, hi = rates.indptr[s], rates.indptr[s + 1]
            w = rates.data[lo:hi]
            nxt = int(rates.indices[lo + rng.choice(w.size, p=w / w.sum())])
            cur_u.append(s)
            cur_v.append(nxt)
            s = nxt
        if cur_u:
            u = np.array(cur_u)
            v = np.array(cur_v)
            e = net.edge_index(u, v)
            np.add.at(vals, e, np.where(u < v, 1.0, -1.0))
    return Flow(net, vals / n_paths, sources, np.flatnonzero(b))


def hitting_capacity_identity(params: ModelParams, a, B) -> dict:
    """Both sides of ``E_a[tau_B] = (1 / C_{a,B}) sum_{s not in B} pi(s) P_s(tau_a < tau_B)``."""
    L = params.L
    s = as_state(a, L)
    bmask = _as_mask(B, L)
    if bmask[s]:
        raise ValueError("a lies in B")
    lhs = exact.mean_hitting_time(params, s, bmask)
    cap = capacity(params, s, bmask)
    f, _ = harmonic_potential(params, s, bmask)
    pi = exact.build_generator(params).pi
    rhs = float(np.sum(pi[~bmask] * f[~bmask]) / cap)
    return {"hitting_time": lhs, "capacity": cap, "formula": rhs, "residual": abs(lhs - rhs) / lhs}


@dataclass(frozen=True)
class CapacitySandwich:
    """Sandwich for ``T_hit * C`` between ``q * const`` and ``q``.

    ``lower_exact`` is ``pi(1...10) = q p^{L-1}``, always valid;
    ``lower_gamma`` is ``q (1/2)^{2^gamma}`` with ``L = q^{-gamma}``, valid
    when ``gamma`` lies in ``(0, 1]``.
    """

    L: int
    q: float
    product: float
    upper: float
    lower_exact: float
    gamma: float | None
    lower_gamma: float | None

    @property
    def holds(self) -> bool:
        ok = self.lower_exact <= self.product * (1 + 1e-10) and self.product <= self.upper * (1 + 1e-10)
        if self.lower_gamma is not None:
            ok = ok and self.lower_gamma <= self.product * (1 + 1e-10)
        return ok


def capacity_sandwich(params: ModelParams) -> CapacitySandwich:
    L, q, p = params.L, params.q, params.p
    start = (1 << (L - 1)) - 1
    B = (L, 1)
    thit = exact.mean_hitting_time(params, start, B)
    cap = capacity(params, start, B)
    gamma = math.log(L) / math.log(1.0 / q) if L > 1 else None
    lower_gamma = q * 0.5 ** (2.0**gamma) if gamma is not None and 0 < gamma <= 1 else None
    return CapacitySandwich(L, q, thit * cap, q, q * p ** (L - 1), gamma if lower_gamma is not None else None, lower_gamma)


def sink_set(ell: int, L: int) -> np.ndarray:
    """``{eta_ell = 0 and every site right of ell occupied}`` as a mask on ``[1, L]``."""
    states = all_states(L)
    right = ((1 << L) - 1) ^ ((1 << ell) - 1)
    return (spin_of(states, ell) == 0) & ((states & right) == right)


# ---------------------------------------------------------------------------
# recursive flow construction

@dataclass
class RecursiveFlowCertificate:
    i: int
    r: int
    q: float
    lengths: tuple
    N: int
    R_i: float
    R_next: float
    energy: float
    bound: float
    interior_divergence: float
    strength: float
    per_j: list

    @property
    def thomson_ok(self) -> bool:
        return self.R_next <= self.energy * (1 + 1e-10)

    @property
    def recursion_ok(self) -> bool:
        return self.energy <= self.bound * (1 + 1e-10)

    @property
    def unit_flow_ok(self) -> bool:
        return self.interior_divergence < 1e-12 and abs(self.strength - 1.0) < 1e-12

    @property
    def slack(self) -> float:
        return self.bound / self.energy


def _hat(phi: Flow, ell: int) -> np.ndarray:
    """Mirror of ``phi`` onto edges inside ``{eta_ell = 0, ones right of ell}``, orientation reversed."""
    net = phi.network
    L = net.params.L
    inside = sink_set(ell, L)
    sel = inside[net.u] & inside[net.v]
    bit = 1 << (ell - 1)
    e = net.edge_index(net.u[sel] | bit, net.v[sel] | bit)
    if np.any(e < 0):
        raise AssertionError("projected pair is not an edge")
    out = np.zeros(net.n_edges)
    out[sel] = -phi.values[e]
    return out


def _shift_map(states: np.ndarray, ell: int, width: int, L: int) -> np.ndarray:
    """Sites ``ell+1 .. ell+width`` moved to ``1 .. width``; all other sites set to one."""
    low = (states >> ell) & ((1 << width) - 1)
    high = ((1 << L) - 1) ^ ((1 << width) - 1)
    return low | high


def _tilde(phi_other: Flow, ell: int, width: int) -> np.ndarray:
    net = phi_other.network
    L = net.params.L
    states = all_states(L)
    left = (1 << (ell - 1)) - 1
    in_c = (spin_of(states, ell) == 0) & ((states & left) == left)
    sel = in_c[net.u] & in_c[net.v]
    su = _shift_map(net.u[sel], ell, width, L)
    sv = _shift_map(net.v[sel], ell, width, L)
    out = np.zeros(net.n_edges)
    same = su == sv
    e = net.edge_index(su[~same], sv[~same])
    if np.any(e < 0):
        raise AssertionError("shifted pair is not an edge")
    idx = np.flatnonzero(sel)[~same]
    out[idx] = phi_other.values[e]
    return out


def recursive_flow(i: int, r: int, q: float) -> tuple[Flow, RecursiveFlowCertificate]:
    """Build the averaged flow from all ones to ``B_{l_{i+1}}`` out of equilibrium flows
    toward the sites of the overlap, and certify it.

    Everything lives on the network of ``[1, l_{i+1}]``; moving to a longer
    interval multiplies every resistance involved by the same power of
    ``1/p``, so the certified inequality does not depend on that choice.
    """
    lengths = ladder_lengths(r)
    if not 1 <= i < r:
        raise ValueError("need 1 <= i < r")
    l_i, l_next = lengths[i - 1], lengths[i]
    if l_next > 12:
        raise ValueError(f"l_(i+1)={l_next} too large for exact networks")
    N = math.ceil(l_i / r)
    params = ModelParams(l_next, q, allow_large_q=True)
    net = build_network(params)
    ones = (1 << l_next) - 1
    ell = [l_i - N + j for j in range(N + 1)]
    phis = [equilibrium_flow(params, ones, sink_set(e, l_next)) for e in ell]
    target = sink_set(l_next, l_next)
    total = np.zeros(net.n_edges)
    per_j = []
    for j in range(1, N + 1):
        hat = _hat(phis[j], ell[j])
        til = _tilde(phis[N - j], ell[j], ell[N - j])
        theta = Flow(net, phis[j].values + hat + til, np.array([ones]), np.flatnonzero(target))
        chk = theta.check()
        per_j.append({
            "j": j,
            "ell": ell[j],
            "interior_divergence": chk["interior_divergence"],
            "strength": chk["strength"],
            "energy_phi": phis[j].energy(),
            "energy_hat": flow_energy(net, hat),
            "energy_tilde": flow_energy(net, til),
            "disjoint": bool(np.all((phis[j].values != 0).astype(int) + (hat != 0) + (til != 0) <= 1)),
        })
        total += theta.values
    Theta = Flow(net, total / N, np.array([ones]), np.flatnonzero(target))
    chk = Theta.check()
    R_i = phis[N].energy()
    R_next = effective_resistance(params, ones, target)
    energy = Theta.energy()
    cert = RecursiveFlowCertificate(
        i=i, r=r, q=q, lengths=tuple(lengths), N=N, R_i=R_i, R_next=R_next, energy=energy,
        bound=4 * R_i + 6 * R_i / (q * N), interior_divergence=chk["interior_divergence"],
        strength=chk["strength"], per_j=per_j,
    )
    return Theta, cert
