"""Hot loops, each in a numba flavour and a pure-numpy flavour.

The public wrappers at the bottom dispatch on :func:`eastlab._accel.numba_enabled`.
Both flavours must return identical results; the test-suite checks this.

Noise is counter based: the ``k``-th ring of site ``x`` under seed ``s``
uses the splitmix64 outputs ``2k`` (waiting time) and ``2k + 1`` (coin) of
the stream keyed by ``(s, x)``.  Any ring can be recomputed without
replaying other sites, which is what makes noise extension reproducible.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import njit, numba_enabled

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SITE = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO = np.uint64(2)
_INV53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# counter-based random numbers

@njit
def _mix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def _uniform(key, j):
    return float(_mix(key + np.uint64(j) * _GOLDEN) >> _S11) * _INV53


@njit
def _wait(key, k):
    return -math.log(1.0 - _uniform(key, 2 * k))


@njit
def _coin(key, k, p):
    return 1 if _uniform(key, 2 * k + 1) < p else 0


def _mix_np(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def _uniform_np(keys: np.ndarray, j: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = keys.astype(np.uint64) + np.asarray(j).astype(np.uint64) * _GOLDEN
    return (_mix_np(z) >> _S11).astype(np.float64) * _INV53


_LIBM_LOG = np.frompyfunc(math.log, 1, 1)


def _log_np(x: np.ndarray) -> np.ndarray:
    # libm log, bit-identical to the numba kernels; numpy's SIMD log can
    # differ in the last place
    return np.asarray(_LIBM_LOG(x), dtype=np.float64).reshape(np.shape(x))


def site_keys(seed: int, L: int) -> np.ndarray:
    """Stream keys for sites ``1..L`` (array index ``x - 1``)."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must lie in [0, 2^64)")
    s = _mix_np(np.array([int(seed)], dtype=np.uint64))[0]
    sites = np.arange(1, L + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix_np(s ^ (sites * _SITE))


def seed_keys(seeds, L: int) -> np.ndarray:
    """Keys for many seeds at once, shape ``(len(seeds), L)``."""
    seeds = np.asarray([int(s) for s in seeds], dtype=np.uint64)
    s = _mix_np(seeds)[:, None]
    sites = np.arange(1, L + 1, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        return _mix_np(s ^ (sites * _SITE))


def ring_increments(key: np.uint64, k0: int, count: int) -> np.ndarray:
    k = np.arange(k0, k0 + count, dtype=np.uint64)
    return -_log_np(1.0 - _uniform_np(np.full(count, key, dtype=np.uint64), _TWO * k))


def ring_coins(key: np.uint64, k0: int, count: int, p: float) -> np.ndarray:
    k = np.arange(k0, k0 + count, dtype=np.uint64)
    u = _uniform_np(np.full(count, key, dtype=np.uint64), _TWO * k + _ONE)
    return (u < p).astype(np.int8)


# ---------------------------------------------------------------------------
# hitting times straight from the counter streams

@njit
def _hit_batch_numba(keys, p, start, target, cap):
    n_trials, L = keys.shape
    out = np.empty(n_trials)
    next_t = np.empty(L)
    counter = np.zeros(L, dtype=np.int64)
    for i in range(n_trials):
        state = start
        if target[state]:
            out[i] = 0.0
            continue
        for x in range(L):
            counter[x] = 0
            next_t[x] = _wait(keys[i, x], 0)
        result = -1.0
        while True:
            x = 0
            t = next_t[0]
            for y in range(1, L):
                if next_t[y] < t:
                    t = next_t[y]
                    x = y
            if t > cap:
                break
            k = counter[x]
            if x == 0 or ((state >> (x - 1)) & 1) == 0:
                if _coin(keys[i, x], k, p) == 1:
                    state |= 1 << x
                else:
                    state &= ~(1 << x)
                if target[state]:
                    result = t
                    break
            counter[x] = k + 1
            next_t[x] = t + _wait(keys[i, x], k + 1)
        out[i] = result
    return out


def _hit_batch_numpy(keys, p, start, target, cap):
    n_trials, L = keys.shape
    out = np.full(n_trials, -1.0)
    if target[start]:
        out[:] = 0.0
        return out
    counter = np.zeros((n_trials, L), dtype=np.uint64)
    next_t = -_log_np(1.0 - _uniform_np(keys, np.zeros_like(keys)))
    state = np.full(n_trials, start, dtype=np.int64)
    active = np.arange(n_trials)
    while active.size:
        nt = next_t[active]
        x = np.argmin(nt, axis=1)
        t = nt[np.arange(active.size), x]
        keep = t <= cap
        active, x, t = active[keep], x[keep], t[keep]
        if not active.size:
            break
        st = state[active]
        k = counter[active, x]
        kk = keys[active, x]
        left = np.where(x == 0, 0, (st >> np.maximum(x - 1, 0)) & 1)
        legal = left == 0
        coin = _uniform_np(kk, _TWO * k + _ONE) < p
        bit = np.int64(1) << x
        new = np.where(coin, st | bit, st & ~bit)
        st = np.where(legal, new, st)
        state[active] = st
        hit = legal & target[st]
        out[active[hit]] = t[hit]
        counter[active, x] = k + _ONE
        next_t[active, x] = t - _log_np(1.0 - _uniform_np(kk, _TWO * (k + _ONE)))
        active = active[~hit]
    return out


def hitting_times_batch(keys: np.ndarray, p: float, start: int, target: np.ndarray, cap: float) -> np.ndarray:
    """First time each trial enters ``target``; ``-1`` where ``cap`` was reached first."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    target = np.ascontiguousarray(target, dtype=np.bool_)
    if numba_enabled():
        return _hit_batch_numba(keys, float(p), int(start), target, float(cap))
    return _hit_batch_numpy(keys, float(p), int(start), target, float(cap))


# ---------------------------------------------------------------------------
# state at fixed times, many trials

@njit
def _states_at_numba(keys, p, starts, times):
    n_trials, L = keys.shape
    n_t = times.shape[0]
    out = np.empty((n_trials, n_t), dtype=np.int64)
    next_t = np.empty(L)
    counter = np.zeros(L, dtype=np.int64)
    for i in range(n_trials):
        state = starts[i]
        for x in range(L):
            counter[x] = 0
            next_t[x] = _wait(keys[i, x], 0)
        j = 0
        while j < n_t:
            x = 0
            t = next_t[0]
            for y in range(1, L):
                if next_t[y] < t:
                    t = next_t[y]
                    x = y
            while j < n_t and times[j] < t:
                out[i, j] = state
                j += 1
            if j == n_t:
                break
            k = counter[x]
            if x == 0 or ((state >> (x - 1)) & 1) == 0:
                if _coin(keys[i, x], k, p) == 1:
                    state |= 1 << x
                else:
                    state &= ~(1 << x)
            counter[x] = k + 1
            next_t[x] = t + _wait(keys[i, x], k + 1)
    return out


def _states_at_numpy(keys, p, starts, times):
    n_trials, L = keys.shape
    n_t = times.shape[0]
    out = np.empty((n_trials, n_t), dtype=np.int64)
    counter = np.zeros((n_trials, L), dtype=np.uint64)
    next_t = -_log_np(1.0 - _uniform_np(keys, np.zeros_like(keys)))
    state = starts.astype(np.int64).copy()
    j = np.zeros(n_trials, dtype=np.int64)
    active = np.arange(n_trials)
    while active.size:
        nt = next_t[active]
        x = np.argmin(nt, axis=1)
        t = nt[np.arange(active.size), x]
        # record every observation time that precedes the next ring
        while True:
            jj = j[active]
            rec = jj < n_t
            rec[rec] = times[jj[rec]] < t[rec]
            if not rec.any():
                break
            out[active[rec], jj[rec]] = state[active[rec]]
            j[active[rec]] += 1
        done = j[active] == n_t
        active, x, t = active[~done], x[~done], t[~done]
        if not active.size:
            break
        st = state[active]
        k = counter[active, x]
        kk = keys[active, x]
        left = np.where(x == 0, 0, (st >> np.maximum(x - 1, 0)) & 1)
        coin = _uniform_np(kk, _TWO * k + _ONE) < p
        bit = np.int64(1) << x
        new = np.where(coin, st | bit, st & ~bit)
        state[active] = np.where(left == 0, new, st)
        counter[active, x] = k + _ONE
        next_t[active, x] = t - _log_np(1.0 - _uniform_np(kk, _TWO * (k + _ONE)))
    return out


def states_at_batch(keys: np.ndarray, p: float, starts: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Configuration of every trial at each (sorted) observation time."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    times = np.ascontiguousarray(times, dtype=np.float64)
    if np.any(np.diff(times) < 0):
        raise ValueError("observation times must be sorted")
    if numba_enabled():
        return _states_at_numba(keys, float(p), starts, times)
    return _states_at_numpy(keys, float(p), starts, times)


# ---------------------------------------------------------------------------
# replay of a materialised event list

@njit
def _replay_numba(state, sites, coins):
    n = sites.shape[0]
    legal = np.zeros(n, dtype=np.bool_)
    after = np.empty(n, dtype=np.int64)
    for i in range(n):
        x = sites[i] - 1
        if x == 0 or ((state >> (x - 1)) & 1) == 0:
            legal[i] = True
            if coins[i] == 1:
                state |= 1 << x
            else:
                state &= ~(1 << x)
        after[i] = state
    return legal, after


def _replay_numpy(state, sites, coins):
    n = sites.shape[0]
    legal = np.zeros(n, dtype=bool)
    after = np.empty(n, dtype=np.int64)
    state = int(state)
    for i in range(n):
        x = int(sites[i]) - 1
        if x == 0 or ((state >> (x - 1)) & 1) == 0:
            legal[i] = True
            state = state | (1 << x) if coins[i] else state & ~(1 << x)
        after[i] = state
    return legal, after


def replay(state: int, sites: np.ndarray, coins: np.ndarray):
    """Apply a time-ordered ring list; returns per-ring legality and state after each ring."""
    sites = np.ascontiguousarray(sites, dtype=np.int64)
    coins = np.ascontiguousarray(coins, dtype=np.int8)
    if numba_enabled():
        return _replay_numba(int(state), sites, coins)
    return _replay_numpy(int(state), sites, coins)


def _couple_numpy(L, sites, coins, ref_legal, check_idx):
    states = np.arange(1 << L, dtype=np.int64)
    ref = (1 << L) - 1
    tau_idx = np.full(L, -1, dtype=np.int64)
    violations = 0
    uncoupled = np.zeros(check_idx.shape[0], dtype=bool)
    c = 0
    m = 0
    for i in range(sites.shape[0]):
        x = int(sites[i]) - 1
        bit = np.int64(1) << x
        legal = np.ones(states.shape, dtype=bool) if x == 0 else ((states >> (x - 1)) & 1) == 0
        states = np.where(legal, states | bit if coins[i] else states & ~bit, states)
        if ref_legal[i] and tau_idx[x] < 0:
            tau_idx[x] = i
            m = max(m, x + 1)
        mask = (1 << m) - 1
        violations += int(np.count_nonzero((states & mask) != (states[ref] & mask)))
        while c < check_idx.shape[0] and check_idx[c] == i:
            uncoupled[c] = bool(np.any(states != states[0]))
            c += 1
    return violations, tau_idx, uncoupled


@njit
def _couple_numba_impl(L, sites, coins, ref_legal, check_idx):
    n_states = 1 << L
    states = np.arange(n_states)
    ref = n_states - 1
    tau_idx = np.full(L, -1, dtype=np.int64)
    violations = 0
    uncoupled = np.zeros(check_idx.shape[0], dtype=np.bool_)
    c = 0
    m = 0
    for i in range(sites.shape[0]):
        x = sites[i] - 1
        bit = 1 << x
        for s in range(n_states):
            st = states[s]
            if x == 0 or ((st >> (x - 1)) & 1) == 0:
                if coins[i] == 1:
                    states[s] = st | bit
                else:
                    states[s] = st & ~bit
        if ref_legal[i] and tau_idx[x] < 0:
            tau_idx[x] = i
            if x + 1 > m:
                m = x + 1
        mask = (1 << m) - 1
        r = states[ref] & mask
        for s in range(n_states):
            if (states[s] & mask) != r:
                violations += 1
        while c < check_idx.shape[0] and check_idx[c] == i:
            first = states[0]
            for s in range(1, n_states):
                if states[s] != first:
                    uncoupled[c] = True
                    break
            c += 1
    return violations, tau_idx, uncoupled


def couple_replay(L: int, sites: np.ndarray, coins: np.ndarray, ref_legal: np.ndarray, check_idx: np.ndarray):
    """Run every initial state on one event list.

    ``ref_legal`` flags the legal rings of the run started from all ones;
    the first legal ring at each site fixes how many leading sites must
    already agree across all runs.  ``check_idx`` lists event indices after
    which to record whether any two runs still differ.
    """
    sites = np.ascontiguousarray(sites, dtype=np.int64)
    coins = np.ascontiguousarray(coins, dtype=np.int8)
    ref_legal = np.ascontiguousarray(ref_legal, dtype=np.bool_)
    check_idx = np.ascontiguousarray(check_idx, dtype=np.int64)
    if numba_enabled():
        v, tau, unc = _couple_numba_impl(L, sites, coins, ref_legal, check_idx)
        return int(v), tau, unc
    return _couple_numpy(L, sites, coins, ref_legal, check_idx)


# ---------------------------------------------------------------------------
# deterministic vacancy-removal dynamics over every state

@njit
def _gap_scalar(state, x):
    for d in range(1, x):
        if ((state >> (x - d - 1)) & 1) == 0:
            return d
    return x


@njit
def _det_stage_numba(L, d_max):
    n = 1 << L
    out = np.empty(n, dtype=np.int64)
    for s in range(n):
        st = s
        for d in range(1, d_max + 1):
            for x in range(L, 0, -1):
                if ((st >> (x - 1)) & 1) == 0 and _gap_scalar(st, x) == d:
                    st |= 1 << (x - 1)
        out[s] = st
    return out


@njit
def _det_pass_numba(L, d_max):
    n = 1 << L
    out = np.empty(n, dtype=np.int64)
    for s in range(n):
        st = s
        for d in range(1, d_max + 1):
            remove = 0
            for x in range(1, L + 1):
                if ((st >> (x - 1)) & 1) == 0 and _gap_scalar(st, x) == d:
                    remove |= 1 << (x - 1)
            st |= remove
        out[s] = st
    return out


def _gap_vec(states, x):
    below = (~states) & ((1 << (x - 1)) - 1)
    _, e = np.frexp(below.astype(np.float64))
    return np.where(below == 0, x, x - e.astype(np.int64))


def _det_stage_numpy(L, d_max):
    st = np.arange(1 << L, dtype=np.int64)
    for d in range(1, d_max + 1):
        for x in range(L, 0, -1):
            bit = np.int64(1) << (x - 1)
            hit = ((st & bit) == 0) & (_gap_vec(st, x) == d)
            st = np.where(hit, st | bit, st)
    return st


def _det_pass_numpy(L, d_max):
    st = np.arange(1 << L, dtype=np.int64)
    for d in range(1, d_max + 1):
        remove = np.zeros_like(st)
        for x in range(1, L + 1):
            bit = np.int64(1) << (x - 1)
            hit = ((st & bit) == 0) & (_gap_vec(st, x) == d)
            remove |= np.where(hit, bit, 0)
        st = st | remove
    return st


def det_final_all(L: int, d_max: int | None = None, *, passes: bool = False) -> np.ndarray:
    """Outcome of the deterministic dynamics through gap level ``d_max`` for every state.

    ``passes=False`` runs the stage order (gap ascending, sites right to
    left, one site per stage); ``passes=True`` erases each gap level at once.
    ``d_max`` defaults to ``L - 1``.
    """
    d_max = L - 1 if d_max is None else int(d_max)
    if numba_enabled():
        return (_det_pass_numba if passes else _det_stage_numba)(L, d_max)
    return (_det_pass_numpy if passes else _det_stage_numpy)(L, d_max)
