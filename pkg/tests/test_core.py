from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eastlab.core import (Configuration, ModelParams, SiteError, all_states, constraint, constraint_mask, decode,
                          encode, flip, gap, gap_of, stationary_weights, transitions, weight)


def cfg(text: str) -> Configuration:
    return Configuration.from_string(text)


@st.composite
def configs(draw, max_L=10):
    L = draw(st.integers(1, max_L))
    s = draw(st.integers(0, (1 << L) - 1))
    return decode(s, L)


# --- params ---------------------------------------------------------------

def test_params_validation():
    assert ModelParams(4, 0.3).p == pytest.approx(0.7)
    assert ModelParams(5, 0.1).n == 3
    assert ModelParams(1, 0.1).n == 0
    with pytest.raises(ValueError):
        ModelParams(3, 0.6)
    with pytest.raises(ValueError):
        ModelParams(0, 0.3)
    assert ModelParams(3, 0.6, allow_large_q=True).q == 0.6
    with pytest.raises(ValueError):
        ModelParams(3, 1.0, allow_large_q=True)


# --- constraint -----------------------------------------------------------

@pytest.mark.parametrize("text,x,want", [("111", 1, True), ("011", 2, True), ("101", 2, False)])
def test_constraint_examples(text, x, want):
    assert constraint(cfg(text), x) is want


def test_site_errors():
    eta = cfg("0110")
    for bad in (0, 5, -1):
        with pytest.raises(SiteError):
            constraint(eta, bad)
        with pytest.raises(SiteError):
            flip(eta, bad)
        with pytest.raises(SiteError):
            gap(eta, bad)


def test_site_zero_reads_zero():
    assert cfg("111")[0] == 0
    with pytest.raises(SiteError):
        cfg("111").with_spin(0, 1)


# --- flip -----------------------------------------------------------------

def test_flip_examples():
    assert flip(cfg("11"), 2) == cfg("10")
    assert flip(cfg("0000"), 1) == cfg("1000")


@given(configs(), st.data())
def test_flip_involution(eta, data):
    x = data.draw(st.integers(1, eta.L))
    assert flip(flip(eta, x), x) == eta
    assert flip(eta, x)[x] == 1 - eta[x]


# --- gap ------------------------------------------------------------------

@pytest.mark.parametrize("text,x,want", [("1011", 4, 2), ("1110", 4, 4), ("0110", 1, 1)])
def test_gap_examples(text, x, want):
    assert gap(cfg(text), x) == want


@given(configs(), st.data())
def test_gap_and_constraint(eta, data):
    x = data.draw(st.integers(1, eta.L))
    g = gap(eta, x)
    assert 1 <= g <= x
    assert eta[x - g] == 0
    assert all(eta[y] == 1 for y in range(x - g + 1, x))
    assert constraint(eta, x) == (g == 1)
    assert constraint(eta, x) == (x == 1 or eta[x - 1] == 0)


def test_vectorized_helpers_match_scalar():
    L = 7
    states = all_states(L)
    for x in range(1, L + 1):
        cm = constraint_mask(states, x)
        gm = gap_of(states, x)
        for s in range(0, 1 << L, 5):
            eta = decode(s, L)
            assert cm[s] == constraint(eta, x)
            assert gm[s] == gap(eta, x)


# --- weight ---------------------------------------------------------------

def test_weight_examples():
    P = ModelParams(3, 0.3)
    assert weight(Configuration.ones(3), P) == pytest.approx(0.343, abs=1e-15)
    assert weight(Configuration.one_zero(3), P) == pytest.approx(0.147, abs=1e-15)
    P4 = ModelParams(4, 0.2)
    assert sum(weight(decode(s, 4), P4) for s in range(16)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("L", range(1, 13))
def test_weights_normalised(L):
    assert stationary_weights(ModelParams(L, 0.27)).sum() == pytest.approx(1.0, abs=1e-12)


# --- transitions ----------------------------------------------------------

def test_transition_examples():
    P = ModelParams(2, 0.3)
    ts = transitions(cfg("11"), P)
    assert [(t.site, str(t.target), t.rate) for t in ts] == [(1, "01", 0.3)]
    ts = transitions(cfg("01"), P)
    assert [(t.site, str(t.target)) for t in ts] == [(1, "11"), (2, "00")]
    assert [t.rate for t in ts] == pytest.approx([0.7, 0.3])


@pytest.mark.parametrize("L", [5, 10])
def test_detailed_balance_exhaustive(L):
    P = ModelParams(L, 0.2)
    worst = 0.0
    for s in range(1 << L):
        eta = decode(s, L)
        for t in transitions(eta, P):
            back = [u for u in transitions(t.target, P) if u.site == t.site]
            assert len(back) == 1
            worst = max(worst, abs(weight(eta, P) * t.rate - weight(t.target, P) * back[0].rate))
    assert worst < 1e-14


@given(configs(), st.floats(0.01, 0.49))
def test_transition_rates(eta, q):
    P = ModelParams(eta.L, q)
    for t in transitions(eta, P):
        assert constraint(eta, t.site)
        assert t.rate == pytest.approx(q * eta[t.site] + (1 - q) * (1 - eta[t.site]))
        assert t.source == eta


# --- encoding -------------------------------------------------------------

def test_encode_examples():
    assert encode(cfg("111")) == 7
    assert encode(Configuration.one_zero(4)) == 7
    assert str(decode(7, 4)) == "1110"
    with pytest.raises(ValueError):
        decode(16, 4)


@pytest.mark.parametrize("L", range(1, 11))
def test_encode_decode_bijection(L):
    seen = set()
    for s in range(1 << L):
        eta = decode(s, L)
        assert encode(eta) == s
        seen.add(str(eta))
    assert len(seen) == 1 << L


def test_printing():
    eta = cfg("0110")
    assert str(eta) == "0110"
    assert eta.verbose() == "[0]0110"
    assert cfg("[0]0110") == eta
    assert eta.zeros() == [1, 4]
    assert Configuration.from_zeros(4, [1, 4]) == eta
