"""Independent reference implementation used to freeze expected values.

Everything here is written from the model definition with dense linear
algebra and shares no code with the package.  Run this file to print the
values frozen in ``test_oracles.py``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import linalg, optimize


def spins(s: int, L: int) -> list[int]:
    return [(s >> i) & 1 for i in range(L)]


def generator(L: int, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Dense generator ``Q`` and stationary vector for the East chain on ``[1, L]``."""
    p = 1 - q
    n = 1 << L
    Q = np.zeros((n, n))
    pi = np.zeros(n)
    for s in range(n):
        eta = spins(s, L)
        pi[s] = math.prod(p if e else q for e in eta)
        for x in range(L):
            left = 0 if x == 0 else eta[x - 1]
            if left == 0:
                t = s ^ (1 << x)
                Q[s, t] = q if eta[x] == 1 else p
        Q[s, s] = -Q[s].sum()
    return Q, pi


def relaxation_time(L: int, q: float) -> float:
    Q, pi = generator(L, q)
    d = np.sqrt(pi)
    S = (d[:, None] * Q) / d[None, :]
    ev = np.sort(np.linalg.eigvalsh(-(S + S.T) / 2))
    return 1.0 / ev[1]


def _hit_vector(L: int, q: float, target: np.ndarray) -> np.ndarray:
    Q, _ = generator(L, q)
    keep = ~target
    h = np.zeros(1 << L)
    h[keep] = np.linalg.solve(-Q[np.ix_(keep, keep)], np.ones(keep.sum()))
    return h


def site_mask(L: int, x: int, value: int) -> np.ndarray:
    return np.array([((s >> (x - 1)) & 1) == value for s in range(1 << L)])


def hit_time(L: int, q: float) -> float:
    return float(_hit_vector(L, q, site_mask(L, L, 1))[(1 << (L - 1)) - 1])


def survival(L: int, q: float, t: float) -> float:
    Q, _ = generator(L, q)
    keep = ~site_mask(L, L, 1)
    idx = int(np.flatnonzero(keep).tolist().index((1 << (L - 1)) - 1))
    E = linalg.expm(t * Q[np.ix_(keep, keep)])
    return float(E[idx].sum())


def quantile_time(L: int, q: float, level: float = 0.25) -> float:
    hi = 100 * hit_time(L, q)
    return optimize.brentq(lambda t: survival(L, q, t) - level, 0.0, hi, rtol=1e-13, xtol=1e-300)


def mixing_time(L: int, q: float, eps: float = 0.25) -> float:
    Q, pi = generator(L, q)

    def tv(t):
        P = linalg.expm(t * Q)
        return 0.5 * np.abs(P - pi).sum(axis=1).max() - eps

    hi = 1.0
    while tv(hi) > 0:
        hi *= 2
    return optimize.brentq(tv, 0.0, hi, rtol=1e-13, xtol=1e-300)


def capacity(L: int, q: float, a: int, bmask: np.ndarray) -> float:
    """Dirichlet value of the harmonic potential, by a dense solve."""
    Q, pi = generator(L, q)
    n = 1 << L
    amask = np.zeros(n, dtype=bool)
    amask[a] = True
    free = ~(amask | bmask)
    f = amask.astype(float)
    f[free] = np.linalg.solve(-Q[np.ix_(free, free)], Q[np.ix_(free, amask)].sum(axis=1))
    C = pi[:, None] * np.where(np.eye(n, dtype=bool), 0.0, Q)
    return float(0.5 * np.sum(C * (f[None, :] - f[:, None]) ** 2))


POINTS = [(3, 0.2), (4, 0.1), (5, 0.3), (6, 0.15)]


if __name__ == "__main__":
    for L, q in POINTS:
        print(f"({L}, {q}): dict(trel={float(relaxation_time(L, q))!r}, thit={hit_time(L, q)!r}, "
              f"tmix={mixing_time(L, q)!r}, tquant={quantile_time(L, q)!r}, "
              f"cap={capacity(L, q, (1 << (L - 1)) - 1, site_mask(L, L, 1))!r}),")
