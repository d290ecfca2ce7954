"""Graphical construction: Poisson rings, coins, trajectories and couplings.

Each site owns a rate-one Poisson clock and a stream of Bernoulli(p) coins.
At a ring the spin is overwritten by the coin if the East constraint holds
just before the ring (a legal ring); otherwise nothing happens.  Because
the same noise can drive any initial configuration, the construction
gives a grand coupling of all runs.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import Configuration, ModelParams, as_state, decode, encode, target_mask

__all__ = [
    "NoiseField",
    "Trajectory",
    "ZeroPath",
    "CouplingReport",
    "CapExceeded",
    "sample_noise",
    "evolve",
    "couple_all",
    "sample_hitting",
    "sample_hitting_many",
    "states_at",
    "distinguished_zero",
    "DEFAULT_CAP",
    "MAX_COUPLING_L",
]

DEFAULT_CAP = 1e6
CAP_WIDENING = 10.0
CAP_RETRIES = 3
MAX_COUPLING_L = 12


class CapExceeded(RuntimeError):
    """The target was not reached before the (widened) time cap."""


@dataclass
class NoiseField:
    """Ring times and coins for every site, materialised up to ``horizon``.

    Streams are keyed by ``(seed, site)`` so extending the horizon, in any
    order or in any number of steps, reproduces the same numbers.
    """

    params: ModelParams
    seed: int
    horizon: float = 0.0
    times: list = field(default_factory=list)
    coins: list = field(default_factory=list)

    def __post_init__(self):
        self._keys = kernels.site_keys(self.seed, self.params.L)
        if not self.times:
            self.times = [np.empty(0) for _ in range(self.params.L)]
            self.coins = [np.empty(0, dtype=np.int8) for _ in range(self.params.L)]
        target, self.horizon = self.horizon, 0.0
        self.extend(target)

    @property
    def L(self) -> int:
        return self.params.L

    def extend(self, horizon: float) -> None:
        """Materialise every stream at least up to ``horizon``."""
        if horizon <= self.horizon and self.horizon > 0:
            return
        p = self.params.p
        for i in range(self.L):
            t, c = self.times[i], self.coins[i]
            while not t.size or t[-1] <= horizon:
                k0 = t.size
                chunk = max(16, int(1.2 * (horizon - (t[-1] if t.size else 0.0))) + 16)
                inc = kernels.ring_increments(self._keys[i], k0, chunk)
                last = t[-1] if t.size else 0.0
                # prepend the last time so the running sum continues exactly
                new = np.cumsum(np.concatenate(([last], inc)))[1:]
                t = np.concatenate((t, new))
                c = np.concatenate((c, kernels.ring_coins(self._keys[i], k0, chunk, p)))
            self.times[i], self.coins[i] = t, c
        self.horizon = max(self.horizon, float(horizon))

    def site_rings(self, x: int, horizon: float | None = None):
        """Ring times and coins of site ``x`` up to ``horizon``."""
        horizon = self.horizon if horizon is None else horizon
        self.extend(horizon)
        t = self.times[x - 1]
        n = int(np.searchsorted(t, horizon, side="right"))
        return t[:n], self.coins[x - 1][:n]

    def events(self, horizon: float | None = None):
        """All rings up to ``horizon`` merged in (time, site) order."""
        horizon = self.horizon if horizon is None else horizon
        ts, xs, cs = [], [], []
        for x in range(1, self.L + 1):
            t, c = self.site_rings(x, horizon)
            ts.append(t)
            xs.append(np.full(t.size, x, dtype=np.int64))
            cs.append(c)
        t = np.concatenate(ts)
        x = np.concatenate(xs)
        c = np.concatenate(cs)
        order = np.lexsort((x, t))
        return t[order], x[order], c[order]


def sample_noise(params: ModelParams, horizon: float, seed: int) -> NoiseField:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    return NoiseField(params, int(seed), float(horizon))


@dataclass
class Trajectory:
    """Ring-by-ring record of one run.

    ``times``, ``sites``, ``newspin`` and ``legal`` are parallel arrays; for
    an illegal ring ``newspin`` repeats the unchanged spin.
    """

    initial: Configuration
    times: np.ndarray
    sites: np.ndarray
    newspin: np.ndarray
    legal: np.ndarray
    final: Configuration
    horizon: float
    after: np.ndarray | None = None

    @property
    def events(self):
        return list(zip(self.times.tolist(), self.sites.tolist(), self.newspin.tolist(), self.legal.tolist()))

    def state_at(self, t: float) -> int:
        """State id at time ``t`` (right-continuous)."""
        n = int(np.searchsorted(self.times, t, side="right"))
        return encode(self.initial) if n == 0 else int(self.after[n - 1])

    def to_tsv(self, stream=None) -> str:
        """Write ``time site newspin legal`` lines; returns the text."""
        buf = io.StringIO()
        for t, x, s, g in zip(self.times.tolist(), self.sites.tolist(), self.newspin.tolist(), self.legal.tolist()):
            buf.write(f"{t!r}\t{x}\t{s}\t{int(g)}\n")
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def evolve(eta0: Configuration, noise: NoiseField, horizon: float, *, legal_only: bool = False) -> Trajectory:
    """Drive ``eta0`` with ``noise`` up to ``horizon``."""
    if eta0.L != noise.L:
        raise ValueError("configuration and noise have different lengths")
    t, x, c = noise.events(horizon)
    s0 = encode(eta0)
    legal, after = kernels.replay(s0, x, c)
    newspin = ((after >> (x - 1)) & 1).astype(np.int8)
    if legal_only:
        t, x, newspin, legal, after = t[legal], x[legal], newspin[legal], legal[legal], after[legal]
    final = decode(int(after[-1]), eta0.L) if after.size else eta0
    return Trajectory(eta0, t, x, newspin, legal, final, float(horizon), after)


@dataclass
class CouplingReport:
    """Outcome of running all ``2^L`` initial states on one noise field.

    ``tau[x - 1]`` is the first legal ring at ``x`` for the run from all
    ones (``inf`` if none before the horizon).  ``violations`` counts the
    (ring, state) pairs where a run disagreed with that reference on a site
    ``y <= x`` although ``tau`` at ``x`` had already passed.
    """

    L: int
    tau: np.ndarray
    violations: int
    check_times: np.ndarray
    uncoupled: np.ndarray
    horizon: float

    @property
    def coupling_time_exceeds(self) -> np.ndarray:
        """Whether the first legal ring at ``L`` is later than each check time."""
        return self.tau[-1] > self.check_times


def couple_all(params: ModelParams, noise: NoiseField, horizon: float, check_times=None) -> CouplingReport:
    """Replay every initial state on shared noise and audit the coupling."""
    L = params.L
    if L > MAX_COUPLING_L:
        raise ValueError(f"couple_all enumerates 2^L states; L={L} exceeds the cap {MAX_COUPLING_L}")
    t, x, c = noise.events(horizon)
    ref_legal, _ = kernels.replay((1 << L) - 1, x, c)
    check_times = np.sort(np.asarray([] if check_times is None else check_times, dtype=float))
    # index of the last ring at or before each check time; -1 means no ring yet
    idx = np.searchsorted(t, check_times, side="right") - 1
    valid = idx >= 0
    violations, tau_idx, unc = kernels.couple_replay(L, x, c, ref_legal, idx[valid])
    uncoupled = np.ones(check_times.size, dtype=bool)
    uncoupled[valid] = unc
    tau = np.where(tau_idx >= 0, t[np.maximum(tau_idx, 0)] if t.size else np.inf, np.inf)
    return CouplingReport(L, tau.astype(float), int(violations), check_times, uncoupled, float(horizon))


def _resolve_target(target, L):
    return target_mask(target, L)


def sample_hitting_many(start, target, params: ModelParams, seeds, cap: float = DEFAULT_CAP,
                        *, retries: int = CAP_RETRIES, strict: bool = True) -> np.ndarray:
    """Hitting times of ``target`` for many seeds.

    Runs that pass ``cap`` are retried with the cap widened tenfold, at
    most ``retries`` times.  With ``strict`` a still-unresolved run raises
    :class:`CapExceeded`; otherwise it is reported as ``inf``.
    """
    if not cap > 0:
        raise ValueError("cap must be positive")
    L = params.L
    mask = _resolve_target(target, L)
    s0 = as_state(start, L)
    keys = kernels.seed_keys(list(seeds), L)
    out = kernels.hitting_times_batch(keys, params.p, s0, mask, cap)
    for _ in range(retries):
        bad = out < 0
        if not bad.any():
            break
        cap *= CAP_WIDENING
        out[bad] = kernels.hitting_times_batch(keys[bad], params.p, s0, mask, cap)
    bad = out < 0
    if bad.any():
        if strict:
            raise CapExceeded(f"{int(bad.sum())} runs did not hit the target before t={cap:g}")
        out[bad] = np.inf
    return out


def sample_hitting(start, target, params: ModelParams, seed: int, cap: float = DEFAULT_CAP,
                   *, retries: int = CAP_RETRIES) -> float:
    """First entrance time of ``target`` from ``start`` under noise ``seed``.

    The result equals the first legal ring that lands in ``target`` when
    the same seed's :class:`NoiseField` is replayed with :func:`evolve`.
    """
    return float(sample_hitting_many(start, target, params, [seed], cap, retries=retries)[0])


def states_at(starts, params: ModelParams, seeds, times) -> np.ndarray:
    """State ids of each seed's run at the sorted ``times``; shape ``(len(seeds), len(times))``."""
    L = params.L
    seeds = list(seeds)
    if isinstance(starts, (str, Configuration, int, np.integer)):
        starts = [starts] * len(seeds)
    ids = np.array([as_state(s, L) for s in starts], dtype=np.int64)
    keys = kernels.seed_keys(seeds, L)
    return kernels.states_at_batch(keys, params.p, ids, np.asarray(times, dtype=float))


@dataclass(frozen=True)
class ZeroPath:
    """Position of a tracked vacancy; drops by one at each of its jump times."""

    x0: int
    jump_times: tuple
    horizon: float

    def at(self, s: float) -> int:
        return self.x0 - int(np.searchsorted(np.asarray(self.jump_times), s, side="right"))

    @property
    def sites(self) -> list[int]:
        return [self.x0 - k for k in range(len(self.jump_times) + 1)]


def distinguished_zero(eta0: Configuration, x0: int, noise: NoiseField, horizon: float) -> ZeroPath:
    """Track the vacancy initially at ``x0``.

    It stays put until the first legal ring at its current site; that ring
    is legal only because the site to its left is vacant, and the tracked
    vacancy moves there.  Site 0 absorbs it.
    """
    if not 1 <= x0 <= eta0.L or eta0[x0] != 0:
        raise ValueError(f"no vacancy at site {x0}")
    traj = evolve(eta0, noise, horizon)
    jumps = []
    pos = x0
    for t, x, g in zip(traj.times.tolist(), traj.sites.tolist(), traj.legal.tolist()):
        if pos == 0:
            break
        if g and x == pos:
            jumps.append(t)
            pos -= 1
    return ZeroPath(x0, tuple(jumps), float(horizon))
