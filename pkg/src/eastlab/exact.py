"""Exact finite-volume quantities of the East chain.

Everything here works on the full ``2^L`` state space: generator assembly,
spectral gap, total-variation mixing time, mean hitting times, survival
functions of hitting times, the survival quantile ``T(L)``, Dirichlet forms
and variances.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .core import ModelParams, as_state, constraint_mask, spin_of, stationary_weights, target_mask

__all__ = [
    "Generator",
    "GapResult",
    "TimescaleReport",
    "build_generator",
    "spectral_gap",
    "relaxation_time",
    "mean_hitting_time",
    "hitting_times",
    "hit_time",
    "survival",
    "survival_curve",
    "quantile_time",
    "mixing_time",
    "tv_distance",
    "semigroup",
    "dirichlet_form",
    "dirichlet_form_edges",
    "variance",
    "timescales",
    "SPARSE_MAX_L",
    "DENSE_MAX_L",
]

SPARSE_MAX_L = 24
DENSE_MAX_L = 12
DIRECT_SOLVE_MAX_L = 14
MIXING_MAX_L = 10
SERIES_TOL = 1e-12
SOLVE_TOL = 1e-10


@dataclass(frozen=True)
class Generator:
    """Sparse rates of the chain together with its reversible measure.

    ``rates`` holds the off-diagonal entries ``K(sigma, sigma')``;
    ``holding`` is the total exit rate of each state.
    """

    params: ModelParams
    rates: sp.csr_matrix
    holding: np.ndarray
    pi: np.ndarray

    @property
    def n_states(self) -> int:
        return self.pi.size

    @property
    def n_transitions(self) -> int:
        return int(self.rates.nnz)

    def matrix(self) -> sp.csr_matrix:
        """The generator ``K - diag(holding)``."""
        return (self.rates - sp.diags(self.holding)).tocsr()

    def symmetrized(self) -> sp.csr_matrix:
        """``D^{1/2} (-generator) D^{-1/2}`` with ``D = diag(pi)``; symmetric PSD."""
        r = np.sqrt(self.pi)
        off = sp.diags(r) @ self.rates @ sp.diags(1.0 / r)
        return (sp.diags(self.holding) - off).tocsr()

    def reversibility_residual(self) -> float:
        flux = sp.diags(self.pi) @ self.rates
        return float(abs(flux - flux.T).max()) if flux.nnz else 0.0

    def uniformization_rate(self) -> float:
        return float(self.holding.max()) + 1.0


@lru_cache(maxsize=64)
def build_generator(params: ModelParams) -> Generator:
    L = params.L
    if L > SPARSE_MAX_L:
        raise ValueError(f"L={L} exceeds the sparse state-space cap {SPARSE_MAX_L}")
    n = 1 << L
    states = np.arange(n, dtype=np.int64)
    rows, cols, vals = [], [], []
    holding = np.zeros(n)
    for x in range(1, L + 1):
        s = states[constraint_mask(states, x)]
        rate = np.where(spin_of(s, x) == 1, params.q, params.p)
        rows.append(s)
        cols.append(s ^ (1 << (x - 1)))
        vals.append(rate)
        holding[s] += rate
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    rates = sp.csr_matrix((v, (r, c)), shape=(n, n))
    return Generator(params, rates, holding, stationary_weights(params))


# ---------------------------------------------------------------------------
# spectral gap

@dataclass(frozen=True)
class GapResult:
    gap: float
    vector: np.ndarray = field(repr=False)
    residual: float
    method: str

    @property
    def trel(self) -> float:
        return 1.0 / self.gap


def _gap_dense(gen: Generator) -> GapResult:
    S = gen.symmetrized().toarray()
    w, v = sla.eigh(S, subset_by_index=[0, 1])
    vec = v[:, 1]
    # guard against a numerically mixed kernel vector
    u = np.sqrt(gen.pi)
    vec = vec - u * (u @ vec)
    vec /= np.linalg.norm(vec)
    g = float(vec @ (S @ vec))
    res = float(np.linalg.norm(S @ vec - g * vec))
    return GapResult(g, vec, res, "dense-eigen")


def _gap_iterative(gen: Generator, tol: float = 1e-12) -> GapResult:
    S = gen.symmetrized()
    n = S.shape[0]
    u = np.sqrt(gen.pi)
    # lift the kernel direction above the gap (the gap never exceeds 1)
    lift = 2.0
    Sc = spla.LinearOperator((n, n), matvec=lambda v: S @ v + lift * u * (u @ v), dtype=float)
    dinv = 1.0 / (S.diagonal() + lift * u * u)
    pre = spla.LinearOperator((n, n), matvec=lambda v: dinv * v, dtype=float)

    def inverse(b):
        x, info = spla.cg(Sc, b, rtol=1e-13, atol=0.0, M=pre, maxiter=50 * n)
        if info != 0:
            raise RuntimeError(f"inner conjugate-gradient solve failed (info={info})")
        return x

    op = spla.LinearOperator((n, n), matvec=inverse, dtype=float)
    v0 = np.random.default_rng(0).standard_normal(n)
    v0 -= u * (u @ v0)
    _, vecs = spla.eigsh(op, k=1, which="LA", tol=tol, ncv=20, v0=v0)
    vec = vecs[:, 0]
    vec -= u * (u @ vec)
    vec /= np.linalg.norm(vec)
    g = float(vec @ (S @ vec))
    res = float(np.linalg.norm(S @ vec - g * vec))
    return GapResult(g, vec, res, "iterative-eigen")


@lru_cache(maxsize=64)
def _gap_cached(params: ModelParams, method: str) -> GapResult:
    gen = build_generator(params)
    if method == "dense":
        if params.L > DENSE_MAX_L:
            raise ValueError(f"dense eigensolve capped at L={DENSE_MAX_L}")
        return _gap_dense(gen)
    return _gap_iterative(gen)


def spectral_gap(params: ModelParams, method: str = "auto") -> GapResult:
    """Smallest positive eigenvalue of minus the generator.

    ``method`` is ``"dense"``, ``"iterative"`` or ``"auto"`` (dense up to
    ``L = 12``).  The iterative path runs Lanczos on the inverse of the
    symmetrized operator with the stationary direction lifted out of the
    kernel; inverses come from preconditioned conjugate gradients.
    """
    if method == "auto":
        method = "dense" if params.L <= DENSE_MAX_L else "iterative"
    if method not in ("dense", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    if params.L == 1:
        # 2x2 case: eigenvalues 0 and q + p = 1
        vec = np.array([math.sqrt(params.p), -math.sqrt(params.q)])
        return GapResult(1.0, vec, 0.0, "dense-eigen")
    return _gap_cached(params, method)


def relaxation_time(params: ModelParams, method: str = "auto") -> float:
    return spectral_gap(params, method).trel


# ---------------------------------------------------------------------------
# hitting times

def _restricted(gen: Generator, mask: np.ndarray):
    keep = np.flatnonzero(~mask)
    A = (sp.diags(gen.holding) - gen.rates).tocsr()[keep][:, keep]
    return keep, A


def hitting_times(params: ModelParams, target) -> tuple[np.ndarray, float]:
    """Mean hitting time of ``target`` from every state, plus the solve residual.

    Direct sparse elimination up to ``L = 14``; beyond that conjugate
    gradients on the symmetrized restricted system.
    """
    gen = build_generator(params)
    mask = target_mask(target, params.L)
    if not mask.any():
        raise ValueError("target set is empty")
    keep, A = _restricted(gen, mask)
    h = np.zeros(gen.n_states)
    if keep.size == 0:
        return h, 0.0
    ones = np.ones(keep.size)
    if params.L <= DIRECT_SOLVE_MAX_L:
        sol = spla.spsolve(A.tocsc(), ones)
    else:
        r = np.sqrt(gen.pi[keep])
        As = (sp.diags(r) @ A @ sp.diags(1.0 / r)).tocsr()
        pre = spla.LinearOperator(As.shape, matvec=lambda v: v / As.diagonal(), dtype=float)
        y, info = spla.cg(As, r, rtol=1e-14, atol=0.0, M=pre, maxiter=100 * keep.size)
        if info != 0:
            raise RuntimeError(f"conjugate-gradient hitting-time solve failed (info={info})")
        sol = y / r
    if not np.all(np.isfinite(sol)):
        raise np.linalg.LinAlgError("restricted generator is singular: target unreachable")
    res = float(np.max(np.abs(A @ sol - ones)))
    h[keep] = sol
    return h, res


def mean_hitting_time(params: ModelParams, start, target) -> float:
    """``E_start[tau_target]`` by solving the absorbing-chain system."""
    s = as_state(start, params.L)
    mask = target_mask(target, params.L)
    if mask[s]:
        raise ValueError("start already lies in the target")
    h, res = hitting_times(params, mask)
    if res > SOLVE_TOL * max(1.0, float(np.max(h))):
        raise RuntimeError(f"hitting-time residual {res:.3e} above tolerance")
    return float(h[s])


def hit_time(params: ModelParams) -> float:
    """``T_hit(L)``: mean time to place a one at ``L`` from all ones but a vacancy at ``L``."""
    L = params.L
    return mean_hitting_time(params, (1 << (L - 1)) - 1, (L, 1))


# ---------------------------------------------------------------------------
# semigroups by uniformization and squaring

def _poisson_series(A: np.ndarray, lam: float, h: float, tol: float) -> np.ndarray:
    """``exp(h A)`` for ``A`` with ``I + A/lam`` substochastic, via the uniformized series."""
    n = A.shape[0]
    P = np.eye(n) + A / lam
    mu = lam * h
    term = math.exp(-mu)
    out = term * np.eye(n)
    power = np.eye(n)
    k = 0
    # with mu <= 1 the neglected tail is below twice the next term
    while 2.0 * term * mu / (k + 1) > tol:
        k += 1
        power = power @ P
        term *= mu / k
        out += term * power
        if k > 200:
            raise RuntimeError("uniformization series did not converge")
    return out


def _expm_uniformized(A: np.ndarray, lam: float, t: float, tol: float = SERIES_TOL) -> np.ndarray:
    """``exp(t A)``: one short series at ``t / 2^k`` then ``k`` squarings.

    Each squaring at most doubles the error, so the series is truncated at
    ``tol / 2^k`` to keep the total below ``tol``.
    """
    if t == 0:
        return np.eye(A.shape[0])
    k = max(0, math.ceil(math.log2(lam * t))) if lam * t > 1 else 0
    E = _poisson_series(A, lam, t / 2**k, tol / 2 ** (k + 1))
    for _ in range(k):
        E = E @ E
    return E


def semigroup(params: ModelParams, t: float) -> np.ndarray:
    """Dense transition matrix ``P_t``."""
    if params.L > MIXING_MAX_L:
        raise ValueError(f"dense semigroup capped at L={MIXING_MAX_L}")
    gen = build_generator(params)
    return _expm_uniformized(gen.matrix().toarray(), gen.uniformization_rate(), float(t))


def _absorbing(params: ModelParams, target):
    gen = build_generator(params)
    mask = target_mask(target, params.L)
    keep, A = _restricted(gen, mask)
    if params.L > MIXING_MAX_L:
        raise ValueError(f"dense survival capped at L={MIXING_MAX_L}")
    return gen, mask, keep, -A.toarray()


def survival(params: ModelParams, start, target, t: float) -> float:
    """``P_start(tau_target > t)``."""
    return float(survival_curve(params, start, target, [t])[0])


def survival_curve(params: ModelParams, start, target, times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    gen, mask, keep, A = _absorbing(params, target)
    s = as_state(start, params.L)
    if mask[s]:
        return np.zeros(times.size)
    i = int(np.searchsorted(keep, s))
    lam = gen.uniformization_rate()
    out = np.empty(times.size)
    for j, t in enumerate(times):
        E = _expm_uniformized(A, lam, float(t))
        out[j] = min(1.0, max(0.0, float(E[i].sum())))
    return out


def quantile_time(params: ModelParams, level: float = 0.25, start=None, target=None,
                  rtol: float = 1e-12) -> float:
    """Time at which the survival of ``tau_L`` from all ones but a vacancy at ``L`` equals ``level``.

    Root bracketed in ``[0, 100 T_hit]`` and refined by Brent's method.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    L = params.L
    start = (1 << (L - 1)) - 1 if start is None else start
    target = (L, 1) if target is None else target
    hi = 100.0 * mean_hitting_time(params, start, target)
    gen, mask, keep, A = _absorbing(params, target)
    i = int(np.searchsorted(keep, as_state(start, L)))
    lam = gen.uniformization_rate()

    def f(t):
        return _expm_uniformized(A, lam, t)[i].sum() - level

    if f(hi) > 0:
        hi *= 10.0
        if f(hi) > 0:
            raise RuntimeError("quantile bracket failure")
    return float(brentq(f, 0.0, hi, xtol=1e-300, rtol=rtol, maxiter=500))


def tv_distance(params: ModelParams, t: float) -> float:
    """Worst-case total-variation distance to equilibrium over all initial states."""
    P = semigroup(params, t)
    pi = build_generator(params).pi
    return float(0.5 * np.abs(P - pi[None, :]).sum(axis=1).max())


def mixing_time(params: ModelParams, threshold: float = 0.25, rtol: float = 1e-12) -> float:
    """Smallest ``t`` with worst-case TV distance at most ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if params.L > MIXING_MAX_L:
        raise ValueError(f"mixing time capped at L={MIXING_MAX_L}")
    gen = build_generator(params)
    A = gen.matrix().toarray()
    lam = gen.uniformization_rate()
    pi = gen.pi

    def f(t):
        P = _expm_uniformized(A, lam, t)
        return 0.5 * np.abs(P - pi[None, :]).sum(axis=1).max() - threshold
    if f(0.0) <= 0:
        return 0.0
    hi = relaxation_time(params)
    while f(hi) > 0:
        hi *= 2.0
    return float(brentq(f, 0.0, hi, xtol=1e-300, rtol=rtol, maxiter=500))


# ---------------------------------------------------------------------------
# Dirichlet forms

def variance(params: ModelParams, f) -> float:
    f = np.asarray(f, dtype=float)
    f = f - f[0]  # shift first so constants give exactly zero
    pi = stationary_weights(params)
    m = pi @ f
    return float(max(0.0, pi @ (f - m) ** 2))


def dirichlet_form(params: ModelParams, f) -> float:
    """Sum over sites of the constrained local variances, averaged under ``pi``."""
    f = np.asarray(f, dtype=float)
    L = params.L
    states = np.arange(1 << L, dtype=np.int64)
    pi = stationary_weights(params)
    total = 0.0
    for x in range(1, L + 1):
        bit = 1 << (x - 1)
        grad = f[states | bit] - f[states & ~bit]
        local = params.p * params.q * grad**2
        total += float(pi @ (constraint_mask(states, x) * local))
    return total


def dirichlet_form_edges(params: ModelParams, f) -> float:
    """Half the sum over ordered pairs of ``pi(s) K(s, s') (f(s') - f(s))^2``."""
    f = np.asarray(f, dtype=float)
    gen = build_generator(params)
    K = gen.rates.tocoo()
    return float(0.5 * np.sum(gen.pi[K.row] * K.data * (f[K.col] - f[K.row]) ** 2))


# ---------------------------------------------------------------------------
# reports

CSV_COLUMNS = [
    "L", "q", "trel", "tmix", "thit", "tquant",
    "method_trel", "resid_trel", "method_tmix", "tol_tmix",
    "method_thit", "resid_thit", "method_tquant", "tol_tquant",
]


@dataclass
class TimescaleReport:
    L: int
    q: float
    trel: float
    tmix: float | None
    thit: float
    tquant: float | None
    method_trel: str
    resid_trel: float
    method_tmix: str
    tol_tmix: float
    method_thit: str
    resid_thit: float
    method_tquant: str
    tol_tquant: float

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([_fmt(getattr(self, c)) for c in CSV_COLUMNS])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def timescales(params: ModelParams, *, with_mixing: bool | None = None, method: str = "auto") -> TimescaleReport:
    """All four time scales of one ``(L, q)`` point.

    Mixing time and quantile need the dense semigroup and are skipped
    (``None``) above ``L = 10`` unless forced.
    """
    L = params.L
    dense_ok = L <= MIXING_MAX_L if with_mixing is None else with_mixing
    gr = spectral_gap(params, method)
    h, res = hitting_times(params, (L, 1))
    thit = float(h[(1 << (L - 1)) - 1])
    tmix = mixing_time(params) if dense_ok else None
    tq = quantile_time(params) if dense_ok else None
    return TimescaleReport(
        L=L, q=params.q, trel=gr.trel, tmix=tmix, thit=thit, tquant=tq,
        method_trel=gr.method, resid_trel=gr.residual,
        method_tmix="bisection" if dense_ok else "skipped", tol_tmix=SERIES_TOL,
        method_thit="linear-solve", resid_thit=res,
        method_tquant="bisection" if dense_ok else "skipped", tol_tquant=SERIES_TOL,
    )
