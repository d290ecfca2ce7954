from __future__ import annotations

import numpy as np
import pytest

from eastlab import kernels
from eastlab._accel import HAS_NUMBA, backend, numba_enabled
from eastlab.core import ModelParams, spin_of, all_states
from eastlab.graphical import couple_all, sample_noise

pytestmark = pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")


def both(fn):
    with backend("numba"):
        a = fn()
    with backend("numpy"):
        b = fn()
    return a, b


def test_backend_switch_restores():
    before = numba_enabled()
    with backend("numpy"):
        assert not numba_enabled()
    assert numba_enabled() == before
    with pytest.raises(ValueError):
        with backend("cuda"):
            pass


@pytest.mark.parametrize("L,q", [(1, 0.3), (4, 0.2), (7, 0.1)])
def test_hitting_parity(L, q):
    keys = kernels.seed_keys(range(300), L)
    target = spin_of(all_states(L), L) == 1
    a, b = both(lambda: kernels.hitting_times_batch(keys, 1 - q, (1 << (L - 1)) - 1, target, 1e6))
    assert np.array_equal(a, b)
    # small cap forces the "not reached" flag on some trials in both flavours
    a, b = both(lambda: kernels.hitting_times_batch(keys, 1 - q, (1 << (L - 1)) - 1, target, 0.5))
    assert np.array_equal(a, b)


def test_states_at_parity():
    L = 6
    keys = kernels.seed_keys(range(200), L)
    starts = np.arange(200, dtype=np.int64) % (1 << L)
    times = np.array([0.0, 0.3, 1.0, 4.0, 20.0])
    a, b = both(lambda: kernels.states_at_batch(keys, 0.8, starts, times))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        kernels.states_at_batch(keys, 0.8, starts, times[::-1])


def test_replay_parity():
    rng = np.random.default_rng(0)
    sites = rng.integers(1, 9, size=5000)
    coins = rng.integers(0, 2, size=5000)
    a, b = both(lambda: kernels.replay(37, sites, coins))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@pytest.mark.parametrize("seed", range(5))
def test_coupling_parity(seed):
    P = ModelParams(7, 0.2)
    noise = sample_noise(P, 40.0, seed)
    checks = np.linspace(0.5, 40, 10)
    a, b = both(lambda: couple_all(P, noise, 40.0, checks))
    assert a.violations == b.violations == 0
    assert np.array_equal(a.tau, b.tau)
    assert np.array_equal(a.uncoupled, b.uncoupled)


@pytest.mark.parametrize("L", [1, 3, 6, 9])
@pytest.mark.parametrize("passes", [False, True])
def test_det_dynamics_parity(L, passes):
    for d_max in range(0, L):
        a, b = both(lambda: kernels.det_final_all(L, d_max, passes=passes))
        assert np.array_equal(a, b)


def test_noise_streams_match_hitting_kernel():
    # the kernel regenerates the same counter streams as NoiseField
    P = ModelParams(3, 0.2)
    keys = kernels.site_keys(5, 3)
    assert np.array_equal(keys, kernels.seed_keys([5], 3)[0])
    noise = sample_noise(P, 10.0, 5)
    inc = kernels.ring_increments(keys[0], 0, 3)
    assert np.allclose(np.cumsum(inc), noise.times[0][:3], rtol=0, atol=0)
