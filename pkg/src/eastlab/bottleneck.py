"""Bottleneck machinery behind lower bounds on the relaxation time.

The deterministic dynamics removes vacancies in order of increasing gap,
sweeping sites right to left at each gap level.  Configurations it sends
to ``1...10`` form the set ``A*``; the boundary of ``A*`` is a narrow
bottleneck whose measure is controlled through the nested-interval chains
built by :func:`delta_chain` and the families enumerated by
:func:`enumerate_gamma`.  Reachable sets with a vacancy budget and the
block-length ladder of the matching upper bound live here too.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache, total_ordering
from typing import Iterator

import numpy as np

from . import exact, kernels
from .core import Configuration, ModelParams, all_states, constraint_mask, decode, encode, gap, stationary_weights

__all__ = [
    "StageIndex",
    "DetResult",
    "DeltaChain",
    "ReachableSet",
    "BoundaryReport",
    "GammaSummary",
    "BottleneckBound",
    "BlockLadder",
    "stage",
    "stage_number",
    "det_step",
    "det_dynamics",
    "det_dynamics_passes",
    "in_astar",
    "astar_mask",
    "boundary_astar",
    "internal_boundary",
    "boundary_measure",
    "delta_chain",
    "reach_condition",
    "enumerate_gamma",
    "count_d_strings",
    "reachable_set",
    "v_sets",
    "u_sets",
    "gamma_summary",
    "dirichlet_astar_decomposed",
    "bottleneck_lower_bound",
    "block_ladder",
    "ladder_lengths",
    "BOUNDARY_MAX_L",
]

BOUNDARY_MAX_L = 16
REACHABLE_MAX_L = 20


@total_ordering
@dataclass(frozen=True)
class StageIndex:
    """A stage ``(d, x)``: gap level ``d`` acting on site ``x``.

    Stages are ordered by ``d`` first and, within a level, by decreasing site.
    """

    d: int
    x: int

    def __lt__(self, other: "StageIndex") -> bool:
        if self.d != other.d:
            return self.d < other.d
        return self.x > other.x


def stage(k: int, L: int) -> StageIndex:
    """The ``k``-th stage (``k`` from 1) on ``[1, L]``."""
    if not 1 <= k <= L * L:
        raise ValueError(f"stage number {k} outside [1, {L * L}]")
    return StageIndex(-(-k // L), ((L - k) % L) + 1)


def stage_number(s: StageIndex, L: int) -> int:
    return (s.d - 1) * L + (L - s.x + 1)


def det_step(eta: Configuration, d: int, x: int) -> Configuration:
    """Fill the vacancy at ``x`` if its gap is exactly ``d``."""
    if eta[x] == 0 and gap(eta, x) == d:
        return eta.with_spin(x, 1)
    return eta


@dataclass(frozen=True)
class DetResult:
    final: Configuration
    trace: tuple


def det_dynamics(eta: Configuration, d_max: int | None = None, *, check: bool = True) -> DetResult:
    """Run the stages in order through ``(d_max, 1)`` (default ``d_max = L - 1``).

    ``trace`` lists the stages that changed the configuration.  With
    ``check`` the level-by-level formulation is run too and must agree.
    """
    L = eta.L
    d_max = L - 1 if d_max is None else d_max
    trace = []
    cur = eta
    for k in range(1, d_max * L + 1):
        s = stage(k, L)
        nxt = det_step(cur, s.d, s.x)
        if nxt is not cur:
            trace.append(s)
        cur = nxt
    if check:
        other = det_dynamics_passes(eta, d_max)
        if other != cur:
            raise AssertionError(f"stage and pass formulations disagree on {eta}")
    return DetResult(cur, tuple(trace))


def det_dynamics_passes(eta: Configuration, d_max: int | None = None) -> Configuration:
    """For ``d = 1..d_max`` erase at once every vacancy whose gap is ``d``."""
    L = eta.L
    d_max = L - 1 if d_max is None else d_max
    cur = eta
    for d in range(1, d_max + 1):
        drop = [x for x in cur.zeros() if gap(cur, x) == d]
        for x in drop:
            cur = cur.with_spin(x, 1)
    return cur


def in_astar(eta: Configuration) -> bool:
    return det_dynamics(eta).final == Configuration.one_zero(eta.L)


@lru_cache(maxsize=32)
def _astar_mask_cached(L: int) -> np.ndarray:
    final = kernels.det_final_all(L)
    mask = final == (1 << (L - 1)) - 1
    mask.setflags(write=False)
    return mask


def astar_mask(L: int) -> np.ndarray:
    """Membership in ``A*`` for every state id."""
    if L > 24:
        raise ValueError("state space too large")
    return _astar_mask_cached(int(L))


def internal_boundary(mask: np.ndarray, L: int) -> np.ndarray:
    """Members of the set with a legal flip leading outside it."""
    states = all_states(L)
    out = np.zeros(mask.shape, dtype=bool)
    for x in range(1, L + 1):
        out |= mask & constraint_mask(states, x) & ~mask[states ^ (1 << (x - 1))]
    return out


def boundary_measure(params: ModelParams, mask: np.ndarray) -> float:
    """``sum over eta in A, sigma outside A of pi(eta) K(eta, sigma)``."""
    L = params.L
    states = all_states(L)
    pi = stationary_weights(params)
    total = 0.0
    for x in range(1, L + 1):
        bit = 1 << (x - 1)
        leaving = mask & constraint_mask(states, x) & ~mask[states ^ bit]
        rate = np.where((states & bit) != 0, params.q, params.p)
        total += float(np.sum(pi[leaving] * rate[leaving]))
    return total


@dataclass
class BoundaryReport:
    """Boundary of ``A*`` split by witness site.

    ``witness[z - 1]`` flags the states with a legal flip at ``z`` that
    leaves ``A*``.
    """

    L: int
    astar: np.ndarray = field(repr=False)
    witness: np.ndarray = field(repr=False)

    @property
    def boundary(self) -> np.ndarray:
        return self.witness.any(axis=0)

    def members(self) -> Iterator[tuple[Configuration, list[int]]]:
        for s in np.flatnonzero(self.boundary):
            zs = [z + 1 for z in np.flatnonzero(self.witness[:, s])]
            yield decode(int(s), self.L), zs

    def split(self, z0: int, i: int) -> np.ndarray:
        """States of the boundary with witness ``z0`` and spin ``i`` at ``z0``."""
        spin = (all_states(self.L) >> (z0 - 1)) & 1
        return self.witness[z0 - 1] & (spin == i)


def boundary_astar(L: int) -> BoundaryReport:
    if L > BOUNDARY_MAX_L:
        raise ValueError(f"boundary scan capped at L={BOUNDARY_MAX_L}")
    mask = astar_mask(L)
    states = all_states(L)
    wit = np.zeros((L, states.size), dtype=bool)
    for z in range(1, L + 1):
        wit[z - 1] = mask & constraint_mask(states, z) & ~mask[states ^ (1 << (z - 1))]
    return BoundaryReport(L, mask, wit)


# ---------------------------------------------------------------------------
# nested-interval chains

@dataclass(frozen=True)
class DeltaChain:
    """Vacancy positions extracted from a boundary configuration and witness.

    ``z`` holds ``z_1..z_K``, ``d`` holds ``d_1..d_K`` (``d_1 = 1``), ``eps``
    holds the sides ``eps_2..eps_K`` and ``intervals`` the nested
    ``(a, b)`` pairs; the last interval is ``[0, L]``.
    """

    z0: int
    z: tuple
    d: tuple
    eps: tuple
    intervals: tuple

    @property
    def K(self) -> int:
        return len(self.z)

    @property
    def lengths(self) -> tuple:
        return tuple(b - a for a, b in self.intervals)


def _vacancies(eta: Configuration) -> list[int]:
    return [0] + eta.zeros()


def _side_vacancies(vac, a: int, b: int, L: int):
    ell = b - a
    return [y for y in vac if (a - ell < y < a) or (b < y <= min(b + ell, L))]


def reach_condition(eta: Configuration, z: int) -> bool:
    """Every interval of ``[0, L]`` holding ``z - 1`` and ``z`` is either the
    whole of ``[0, L]`` or sees a vacancy within its own length on one side."""
    L = eta.L
    vac = _vacancies(eta)
    for a in range(0, z):
        for b in range(z, L + 1):
            if a == 0 and b == L:
                continue
            if not _side_vacancies(vac, a, b, L):
                return False
    return True


def delta_chain(eta: Configuration, z0: int) -> DeltaChain:
    """Grow ``[z0 - 1, z0]`` vacancy by vacancy until it covers ``[0, L]``.

    At each step the vacancy within reach (distance at most the current
    length) nearest to the interval is added, the leftmost on ties.
    """
    L = eta.L
    if not 1 <= z0 <= L:
        raise ValueError(f"witness {z0} outside [1, {L}]")
    sigma = eta.with_spin(z0, 1 - eta[z0])
    if not (eta[z0 - 1] == 0 and in_astar(eta) and not in_astar(sigma)):
        raise ValueError(f"{eta} is not a boundary configuration of A* with witness {z0}")
    vac = _vacancies(eta)
    a, b = z0 - 1, z0
    zs, ds, eps, ints = [z0 - 1], [1], [], [(a, b)]
    while not (a == 0 and b == L):
        cand = _side_vacancies(vac, a, b, L)
        if not cand:
            raise AssertionError(f"no vacancy within reach of [{a}, {b}] in {eta}")
        y = min(cand, key=lambda y: (a - y if y < a else y - b, y))
        if y < a:
            ds.append(a - y)
            eps.append(-1)
            a = y
        else:
            ds.append(y - b)
            eps.append(1)
            b = y
        zs.append(y)
        ints.append((a, b))
    return DeltaChain(z0, tuple(zs), tuple(ds), tuple(eps), tuple(ints))


def count_d_strings(n: int) -> int:
    """Strings ``d_2..d_{n+1}`` of positive integers with each term at most
    the sum of all earlier ones, ``d_1 = 1`` included."""
    if n < 0:
        raise ValueError("n must be nonnegative")

    @lru_cache(maxsize=None)
    def f(m: int, total: int) -> int:
        if m == 0:
            return 1
        return sum(f(m - 1, total + d) for d in range(1, total + 1))

    return f(n, 1)


def enumerate_gamma(z0: int, n: int, L: int) -> set[frozenset]:
    """Point sets ``{z_1..z_{n+1}}`` in ``[0, L]`` produced by admissible
    distance/side sequences starting from ``[z0 - 1, z0]``."""
    if not 1 <= z0 <= L:
        raise ValueError(f"z0={z0} outside [1, {L}]")
    out: set[frozenset] = set()

    def grow(a: int, b: int, pts: tuple):
        if len(pts) == n + 1:
            out.add(frozenset(pts))
            return
        ell = b - a
        for d in range(1, ell + 1):
            if a - d >= 0:
                grow(a - d, b, pts + (a - d,))
            if b + d <= L:
                grow(a, b + d, pts + (b + d,))

    grow(z0 - 1, z0, (z0 - 1,))
    return out


# ---------------------------------------------------------------------------
# reachable sets under a vacancy budget

@dataclass(frozen=True)
class ReachableSet:
    origin: int
    budget: int
    L: int
    members: np.ndarray = field(repr=False)

    def mask(self) -> np.ndarray:
        m = np.zeros(1 << self.L, dtype=bool)
        m[self.members] = True
        return m

    def __contains__(self, item) -> bool:
        s = encode(item) if isinstance(item, Configuration) else int(item)
        i = np.searchsorted(self.members, s)
        return bool(i < self.members.size and self.members[i] == s)

    def __len__(self) -> int:
        return int(self.members.size)


def reachable_set(origin, budget: int, L: int) -> ReachableSet:
    """Closure of ``origin`` under legal flips that keep at most ``budget`` vacancies."""
    if L > REACHABLE_MAX_L:
        raise ValueError(f"reachable-set search capped at L={REACHABLE_MAX_L}")
    s0 = encode(origin) if isinstance(origin, Configuration) else int(origin)
    if L - bin(s0).count("1") > budget:
        raise ValueError("origin already exceeds the vacancy budget")
    seen = {s0}
    todo = deque([s0])
    while todo:
        s = todo.popleft()
        zeros = L - bin(s).count("1")
        for x in range(1, L + 1):
            if x > 1 and (s >> (x - 2)) & 1:
                continue
            t = s ^ (1 << (x - 1))
            if t & (1 << (x - 1)) == 0 and zeros + 1 > budget:
                continue
            if t not in seen:
                seen.add(t)
                todo.append(t)
    return ReachableSet(s0, budget, L, np.array(sorted(seen), dtype=np.int64))


def _zero_set(s: int, L: int) -> frozenset:
    return frozenset(x for x in range(1, L + 1) if not (s >> (x - 1)) & 1)


def v_sets(n: int) -> tuple[list[frozenset], bool]:
    """Zero sets of the exactly-``n``-vacancy configurations reachable from all ones
    with at most ``n`` vacancies.

    The search runs on ``[1, 2^n]``, one site beyond the claimed support
    ``[1, 2^n - 1]``; the flag reports whether any member used that extra site.
    """
    if n < 1:
        raise ValueError("n must be positive")
    L = 1 << n
    r = reachable_set((1 << L) - 1, n, L)
    sets = sorted((_zero_set(int(s), L) for s in r.members if L - bin(int(s)).count("1") == n),
                  key=lambda z: sorted(z))
    escaped = any(L in z for z in sets)
    return sets, escaped


def u_sets(n: int, L: int) -> list[frozenset]:
    """``v_sets(n)`` with an extra vacancy written at ``L``."""
    sets, escaped = v_sets(n)
    if escaped:
        raise AssertionError("a reachable zero left the claimed support")
    if L < (1 << n):
        raise ValueError("L must be at least 2^n")
    return [z | {L} for z in sets]


# ---------------------------------------------------------------------------
# measures and bounds

@dataclass(frozen=True)
class GammaSummary:
    """Per-witness figures used in the bound on the Dirichlet form of ``A*``."""

    z0: int
    gamma_size: int
    mass0: float
    mass1: float
    mass_mid0: float
    mass_mid1: float
    mass_bound: float
    inclusion_ok: bool

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def gamma_summary(params: ModelParams, report: BoundaryReport | None = None) -> list[GammaSummary]:
    """For each witness ``z0``: enumerated family size, boundary masses by spin
    at ``z0``, the intermediate sums and whether every boundary member is covered."""
    L = params.L
    n = params.n
    report = boundary_astar(L) if report is None else report
    pi = stationary_weights(params)
    q, p = params.q, params.p
    out = []
    for z0 in range(1, L + 1):
        fam = enumerate_gamma(z0, n, L)
        masses, mids = [], []
        ok = True
        for i in (0, 1):
            sel = report.split(z0, i)
            masses.append(float(pi[sel].sum()))
            spin_prob = q if i == 0 else p
            mids.append(q**i * sum(spin_prob * q ** len([z for z in W if z >= 1]) for W in fam))
            for s in np.flatnonzero(sel):
                eta = decode(int(s), L)
                ch = delta_chain(eta, z0)
                W = frozenset(ch.z[: n + 1])
                if W not in fam or any(eta[z] != 0 for z in W if z >= 1):
                    ok = False
        out.append(GammaSummary(z0, len(fam), masses[0], masses[1], mids[0], mids[1],
                                q ** (n + 1) * len(fam), ok))
    return out


def dirichlet_astar_decomposed(params: ModelParams, report: BoundaryReport | None = None) -> float:
    """Dirichlet form of the indicator of ``A*`` summed witness by witness."""
    report = boundary_astar(params.L) if report is None else report
    pi = stationary_weights(params)
    return float(sum(params.p * pi[report.split(z, 0)].sum() + params.q * pi[report.split(z, 1)].sum()
                     for z in range(1, params.L + 1)))


@dataclass(frozen=True)
class BottleneckBound:
    value: float
    pi_a: float
    dirichlet: float
    dirichlet_generic: float

    @property
    def consistent(self) -> bool:
        return abs(self.dirichlet - self.dirichlet_generic) <= 1e-12 * max(1.0, self.dirichlet)


def bottleneck_lower_bound(params: ModelParams, mask: np.ndarray) -> BottleneckBound:
    """``pi(A) pi(A^c) / D(1_A)``, a lower bound on the relaxation time."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any() or mask.all():
        raise ValueError("the set must be neither empty nor everything")
    pi = stationary_weights(params)
    pa = float(pi[mask].sum())
    dirichlet = boundary_measure(params, mask)
    generic = exact.dirichlet_form(params, mask.astype(float))
    return BottleneckBound(pa * (1.0 - pa) / dirichlet, pa, dirichlet, generic)


# ---------------------------------------------------------------------------
# block lengths for the recursive upper bound

def ladder_lengths(r: int) -> list[int]:
    if r <= 2:
        raise ValueError("r must exceed 2")
    ell = [3]
    for _ in range(2, r + 1):
        ell.append(2 * ell[-1] - math.ceil(ell[-1] / r))
    return ell


@dataclass
class BlockLadder:
    r: int
    q: float
    lengths: list
    overlaps: list
    eps: list
    # (i, gamma_{i-1}, gamma_i, bound) for each step where both gaps are computable
    certificates: list

    def holds(self) -> bool:
        return all(g <= b * (1 + 1e-12) for _, _, g, b in self.certificates)


def block_ladder(r: int, q: float, *, exact_max_L: int = 12) -> BlockLadder:
    """Lengths ``l_i``, overlaps ``ceil(l_i / r)``, ``eps_i = p^{overlap}`` and
    the one-step bound on relaxation times checked with exact gaps."""
    lengths = ladder_lengths(r)
    p = 1.0 - q
    overlaps = [math.ceil(ell / r) for ell in lengths]
    eps = [p**m for m in overlaps]
    certs = []
    for i in range(1, len(lengths)):
        if lengths[i] > exact_max_L:
            break
        g_prev = exact.relaxation_time(ModelParams(lengths[i - 1], q, allow_large_q=True))
        g = exact.relaxation_time(ModelParams(lengths[i], q, allow_large_q=True))
        certs.append((i + 1, g_prev, g, 2.0 / (1.0 - math.sqrt(eps[i - 1])) * g_prev))
    return BlockLadder(r, q, lengths, overlaps, eps, certs)
