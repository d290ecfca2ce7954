from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from eastlab import exact, network
from eastlab.bottleneck import ladder_lengths
from eastlab.core import ModelParams, all_states, spin_of
from eastlab.network import (Flow, build_network, capacity, capacity_dirichlet, capacity_sandwich,
                             effective_resistance, equilibrium_flow, flow_energy, harmonic_potential,
                             hitting_capacity_identity, random_unit_flow, recursive_flow, sink_set)


def ones(L):
    return (1 << L) - 1


def one_zero(L):
    return (1 << (L - 1)) - 1


# --- network --------------------------------------------------------------

@pytest.mark.parametrize("L", [1, 4, 7])
def test_network_edges(L):
    params = ModelParams(L, 0.2)
    net = build_network(params)
    gen = exact.build_generator(params)
    assert net.n_edges * 2 == gen.n_transitions
    assert np.all(net.u < net.v)
    K = gen.rates.toarray()
    assert np.allclose(net.conductance, gen.pi[net.u] * K[net.u, net.v], rtol=0, atol=1e-17)
    assert np.allclose(net.conductance, gen.pi[net.v] * K[net.v, net.u], rtol=1e-13, atol=0)
    assert np.array_equal(net.edge_index(net.v, net.u), np.arange(net.n_edges))
    assert net.edge_index(0, ones(L)) == -1 or L == 1


# --- capacity -------------------------------------------------------------

def test_two_state_capacity():
    params = ModelParams(1, 0.3)
    assert capacity(params, 0, (1, 1)) == pytest.approx(0.21, rel=1e-12)
    assert capacity_dirichlet(params, 0, (1, 1)) == pytest.approx(0.21, rel=1e-12)


@pytest.mark.parametrize("L,q", oracle.POINTS)
def test_capacity_two_ways_and_oracle(L, q):
    params = ModelParams(L, q)
    want = oracle.capacity(L, q, one_zero(L), oracle.site_mask(L, L, 1))
    assert capacity(params, one_zero(L), (L, 1)) == pytest.approx(want, rel=1e-10)
    assert capacity_dirichlet(params, one_zero(L), (L, 1)) == pytest.approx(want, rel=1e-10)


@pytest.mark.parametrize("L", range(1, 9))
@pytest.mark.parametrize("q", (0.05, 0.2, 0.3))
def test_hitting_capacity_identity(L, q):
    out = hitting_capacity_identity(ModelParams(L, q), one_zero(L), (L, 1))
    assert out["residual"] < 1e-8


def test_harmonic_potential_boundary_values():
    params = ModelParams(5, 0.2)
    f, res = harmonic_potential(params, one_zero(5), (5, 1))
    assert res < 1e-10
    assert f[one_zero(5)] == 1.0
    assert np.all(f[spin_of(all_states(5), 5) == 1] == 0.0)
    assert np.all((f >= -1e-14) & (f <= 1 + 1e-14))


@pytest.mark.parametrize("L", range(1, 9))
@pytest.mark.parametrize("q", (0.05, 0.1, 0.2, 0.3))
def test_capacity_sandwich(L, q):
    cs = capacity_sandwich(ModelParams(L, q))
    assert cs.holds


def test_sandwich_constant_regime():
    # L = q^-gamma with gamma in (0, 1]
    cs = capacity_sandwich(ModelParams(4, 0.2))
    assert cs.gamma is not None and 0 < cs.gamma <= 1
    assert cs.lower_gamma == pytest.approx(0.2 * 0.5 ** (2**cs.gamma))
    assert cs.lower_gamma <= cs.product


# --- flows ----------------------------------------------------------------

@pytest.mark.parametrize("L", range(1, 8))
def test_equilibrium_flow_energy_is_resistance(L):
    params = ModelParams(L, 0.2)
    flow = equilibrium_flow(params, ones(L), (L, 0))
    chk = flow.check()
    assert chk["is_flow"]
    assert chk["strength"] == pytest.approx(1.0, abs=1e-12)
    assert flow.energy() == pytest.approx(effective_resistance(params, ones(L), (L, 0)), rel=1e-8)


@given(st.integers(2, 6), st.floats(0.05, 0.45), st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_thomson_principle(L, q, seed):
    params = ModelParams(L, q)
    rng = np.random.default_rng(seed)
    R = effective_resistance(params, ones(L), (L, 0))
    flow = random_unit_flow(params, ones(L), (L, 0), rng, n_paths=4)
    assert flow.check(1e-12)["is_flow"]
    assert flow.strength == pytest.approx(1.0, abs=1e-12)
    assert flow.energy() >= R * (1 - 1e-10)


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_dirichlet_principle(L, seed):
    # any potential equal to 1 on A and 0 on B has Dirichlet value >= capacity
    params = ModelParams(L, 0.2)
    net = build_network(params)
    B = spin_of(all_states(L), L) == 0
    f = np.random.default_rng(seed).random(1 << L)
    f[ones(L)] = 1.0
    f[B] = 0.0
    value = float(np.sum(net.conductance * (f[net.u] - f[net.v]) ** 2))
    assert value >= capacity(params, ones(L), (L, 0)) * (1 - 1e-10)


def test_flow_combinations():
    params = ModelParams(5, 0.2)
    rng = np.random.default_rng(1)
    a = random_unit_flow(params, ones(5), (5, 0), rng)
    b = random_unit_flow(params, ones(5), (5, 0), rng)
    avg = (a + b).scaled(0.5)
    assert avg.energy() <= 0.5 * (a.energy() + b.energy()) + 1e-12
    assert (a + b).energy() <= 2 * (a.energy() + b.energy()) + 1e-12
    assert flow_energy(a.network, a.values) == a.energy()


def test_flow_value_orientation():
    params = ModelParams(3, 0.2)
    flow = equilibrium_flow(params, ones(3), (3, 0))
    u, v = int(flow.network.u[0]), int(flow.network.v[0])
    assert flow.value(u, v) == -flow.value(v, u)
    assert flow.value(0, 7) == 0.0


def test_flow_export():
    params = ModelParams(3, 0.2)
    flow = equilibrium_flow(params, ones(3), (3, 0))
    buf = io.StringIO()
    text = flow.to_text(buf)
    assert buf.getvalue() == text
    for line in text.splitlines():
        a, b, val = line.split()
        assert float(val) >= 0
        assert flow.value(int(a), int(b)) == pytest.approx(float(val), abs=0)


# --- recursive construction ----------------------------------------------

def test_sink_set():
    m = sink_set(2, 4)
    got = sorted(int(s) for s in np.flatnonzero(m))
    # site 2 vacant, sites 3 and 4 occupied, site 1 free
    assert got == [0b1100, 0b1101]


@pytest.mark.parametrize("r", [3, 4, 5])
def test_projection_and_shift_are_injective(r):
    lengths = ladder_lengths(r)
    l_i, l_next = lengths[0], lengths[1]
    N = math.ceil(l_i / r)
    states = all_states(l_next)
    for j in range(1, N + 1):
        ell = l_i - N + j
        width = l_i - j
        assert ell + width == l_next
        inside = np.flatnonzero(sink_set(ell, l_next))
        lifted = inside | (1 << (ell - 1))
        assert np.unique(lifted).size == inside.size
        left = (1 << (ell - 1)) - 1
        in_c = np.flatnonzero((spin_of(states, ell) == 0) & ((states & left) == left))
        shifted = network._shift_map(in_c, ell, width, l_next)
        assert np.unique(shifted).size == in_c.size


@pytest.mark.parametrize("q", (0.1, 0.2, 0.3))
@pytest.mark.parametrize("r", (3, 4, 5))
def test_recursive_flow_step_one(q, r):
    flow, cert = recursive_flow(1, r, q)
    assert cert.unit_flow_ok
    assert cert.interior_divergence < 1e-12
    assert cert.thomson_ok and cert.recursion_ok
    assert cert.R_next <= 4 * cert.R_i + 6 * cert.R_i / (q * cert.N)
    assert all(pj["disjoint"] for pj in cert.per_j)
    assert flow.energy() == pytest.approx(cert.energy)


def test_recursive_flow_step_two():
    _, cert = recursive_flow(2, 3, 0.2)
    assert cert.unit_flow_ok and cert.thomson_ok and cert.recursion_ok


def test_recursive_flow_errors():
    with pytest.raises(ValueError):
        recursive_flow(0, 3, 0.2)
    with pytest.raises(ValueError):
        recursive_flow(3, 4, 0.2)
