"""Configurations, constraints and rates of the East chain on ``[1, L]``.

Sites are numbered ``1..L``; site ``0`` carries a frozen vacancy that is
never stored.  A configuration maps to an integer state id by putting the
spin of site ``x`` on bit ``x - 1``, so ``"1110"`` (site 1 first) is id 7.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ModelParams",
    "Configuration",
    "Transition",
    "SiteError",
    "constraint",
    "flip",
    "gap",
    "weight",
    "transitions",
    "encode",
    "decode",
    "all_states",
    "spin_of",
    "constraint_mask",
    "gap_of",
    "zero_count",
    "stationary_weights",
    "target_mask",
    "as_state",
    "format_state",
    "words",
]


class SiteError(IndexError):
    """A site outside ``[1, L]`` was addressed."""


@dataclass(frozen=True)
class ModelParams:
    """Chain length ``L`` and vacancy density ``q``.

    ``q`` must lie in ``(0, 1/2)``; pass ``allow_large_q=True`` to accept
    any ``q`` in ``(0, 1)``.
    """

    L: int
    q: float
    allow_large_q: bool = False

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))
        q = float(self.q)
        upper = 1.0 if self.allow_large_q else 0.5
        if not 0.0 < q < upper:
            raise ValueError(f"q must lie in (0, {upper}), got {q!r}")
        object.__setattr__(self, "q", q)

    @property
    def p(self) -> float:
        return 1.0 - self.q

    @property
    def n(self) -> int:
        """``ceil(log2 L)``."""
        return (self.L - 1).bit_length()

    @property
    def n_states(self) -> int:
        return 1 << self.L


@dataclass(frozen=True)
class Configuration:
    """A spin word on ``[1, L]``; ``spins[0]`` is the spin of site 1."""

    spins: tuple[int, ...]

    def __post_init__(self):
        spins = tuple(int(s) for s in self.spins)
        if not spins:
            raise ValueError("a configuration needs at least one site")
        if any(s not in (0, 1) for s in spins):
            raise ValueError(f"spins must be 0 or 1, got {self.spins!r}")
        object.__setattr__(self, "spins", spins)

    @classmethod
    def from_string(cls, text: str) -> "Configuration":
        text = text.strip()
        if text.startswith("[0]"):
            text = text[3:]
        return cls(tuple(int(c) for c in text))

    @classmethod
    def ones(cls, L: int) -> "Configuration":
        return cls((1,) * L)

    @classmethod
    def one_zero(cls, L: int) -> "Configuration":
        """All ones except a single vacancy at site ``L``."""
        return cls((1,) * (L - 1) + (0,))

    @classmethod
    def from_zeros(cls, L: int, zeros: Iterable[int]) -> "Configuration":
        spins = [1] * L
        for x in zeros:
            if not 1 <= x <= L:
                raise SiteError(f"site {x} outside [1, {L}]")
            spins[x - 1] = 0
        return cls(tuple(spins))

    @property
    def L(self) -> int:
        return len(self.spins)

    def __getitem__(self, x: int) -> int:
        if x == 0:
            return 0
        if not 1 <= x <= self.L:
            raise SiteError(f"site {x} outside [0, {self.L}]")
        return self.spins[x - 1]

    def zeros(self) -> list[int]:
        """Vacancy sites in ``[1, L]`` (the frozen zero is not listed)."""
        return [x for x, s in enumerate(self.spins, start=1) if s == 0]

    def with_spin(self, x: int, value: int) -> "Configuration":
        _check_site(x, self.L)
        spins = list(self.spins)
        spins[x - 1] = int(value)
        return Configuration(tuple(spins))

    @property
    def id(self) -> int:
        return encode(self)

    def __str__(self) -> str:
        return "".join(str(s) for s in self.spins)

    def verbose(self) -> str:
        return "[0]" + str(self)


@dataclass(frozen=True)
class Transition:
    site: int
    source: Configuration
    target: Configuration
    rate: float


def _check_site(x: int, L: int) -> None:
    if not 1 <= x <= L:
        raise SiteError(f"site {x} outside [1, {L}]")


def constraint(eta: Configuration, x: int) -> bool:
    """True iff the spin at ``x`` may refresh: ``x == 1`` or ``eta[x-1] == 0``."""
    _check_site(x, eta.L)
    return x == 1 or eta.spins[x - 2] == 0


def flip(eta: Configuration, x: int) -> Configuration:
    _check_site(x, eta.L)
    return eta.with_spin(x, 1 - eta.spins[x - 1])


def gap(eta: Configuration, x: int) -> int:
    """Distance from ``x`` to the nearest vacancy on its left, frozen zero included."""
    _check_site(x, eta.L)
    for d in range(1, x + 1):
        if eta[x - d] == 0:
            return d
    raise AssertionError("unreachable: site 0 is always vacant")


def weight(eta: Configuration, params: ModelParams) -> float:
    k = eta.spins.count(0)
    return params.q**k * params.p ** (eta.L - k)


def transitions(eta: Configuration, params: ModelParams) -> list[Transition]:
    """All allowed single-site moves out of ``eta`` with their heat-bath rates."""
    out = []
    for x in range(1, eta.L + 1):
        if constraint(eta, x):
            rate = params.q if eta.spins[x - 1] == 1 else params.p
            out.append(Transition(x, eta, flip(eta, x), rate))
    return out


def encode(eta: Configuration) -> int:
    s = 0
    for i, v in enumerate(eta.spins):
        s |= v << i
    return s


def decode(state: int, L: int) -> Configuration:
    if L < 1:
        raise ValueError("L must be positive")
    if not 0 <= state < (1 << L):
        raise ValueError(f"state id {state} outside [0, 2^{L})")
    return Configuration(tuple((state >> i) & 1 for i in range(L)))


# ---------------------------------------------------------------------------
# vectorised helpers over arrays of state ids

def all_states(L: int) -> np.ndarray:
    return np.arange(1 << L, dtype=np.int64)


def spin_of(states: np.ndarray, x: int) -> np.ndarray:
    """Spin at site ``x`` (0 for the frozen site ``x = 0``)."""
    if x == 0:
        return np.zeros_like(states)
    return (states >> (x - 1)) & 1


def constraint_mask(states: np.ndarray, x: int) -> np.ndarray:
    if x == 1:
        return np.ones(states.shape, dtype=bool)
    return ((states >> (x - 2)) & 1) == 0


def gap_of(states: np.ndarray, x: int) -> np.ndarray:
    """Vectorised :func:`gap` at site ``x``."""
    below = (~states) & ((1 << (x - 1)) - 1)
    # highest vacancy below x sits at bit index e - 1
    _, e = np.frexp(below.astype(np.float64))
    return np.where(below == 0, x, x - e.astype(np.int64))


def zero_count(states: np.ndarray, L: int) -> np.ndarray:
    ones = np.zeros(states.shape, dtype=np.int64)
    for i in range(L):
        ones += (states >> i) & 1
    return L - ones


def stationary_weights(params: ModelParams) -> np.ndarray:
    """Product measure on every state id, normalised to one."""
    L = params.L
    k = zero_count(all_states(L), L)
    w = np.exp(k * math.log(params.q) + (L - k) * math.log(params.p))
    return w / w.sum()


def target_mask(target, L: int) -> np.ndarray:
    """Turn a target description into a boolean mask over state ids.

    Accepts a boolean mask, a ``(site, value)`` pair, a callable taking a
    :class:`Configuration`, or an iterable of state ids / configurations.
    """
    n = 1 << L
    if isinstance(target, np.ndarray) and target.dtype == bool:
        if target.shape != (n,):
            raise ValueError("mask has the wrong length")
        return target
    if isinstance(target, tuple) and len(target) == 2 and all(isinstance(t, (int, np.integer)) for t in target):
        site, value = target
        _check_site(int(site), L)
        return spin_of(all_states(L), int(site)) == int(value)
    if callable(target):
        return np.array([bool(target(decode(s, L))) for s in range(n)], dtype=bool)
    mask = np.zeros(n, dtype=bool)
    for item in target:
        mask[encode(item) if isinstance(item, Configuration) else int(item)] = True
    return mask


def as_state(item, L: int) -> int:
    if isinstance(item, Configuration):
        if item.L != L:
            raise ValueError(f"configuration has length {item.L}, expected {L}")
        return encode(item)
    if isinstance(item, str):
        return as_state(Configuration.from_string(item), L)
    s = int(item)
    if not 0 <= s < (1 << L):
        raise ValueError(f"state id {s} outside [0, 2^{L})")
    return s


def format_state(state: int, L: int) -> str:
    return str(decode(state, L))


def words(L: int) -> Sequence[Configuration]:
    return [decode(s, L) for s in range(1 << L)]
