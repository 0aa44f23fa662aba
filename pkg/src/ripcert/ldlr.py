"""Squared norm of the degree-D likelihood ratio for the spiked Wishart model.

For spikes drawn from a prior ``X`` the squared norm is

    E_{v, v' ~ X} phi_{m, floor(D/2)}(beta^2 <v, v'>^2 / 4),

with ``phi_{m,k}`` the degree-``k`` Taylor polynomial of ``(1 - 4x)^(-m/2)``,
whose ``d``-th coefficient is ``prod_{a<d} (2m + 4a) / d!``. The prior is the
sparse Rademacher prior, optionally truncated to zero whenever
``(1 - eps) ||v||^2 > 1``.

Two routes are provided: a Monte-Carlo average over sampled spike pairs and
an exact sum over the law of the support overlap. Everything is accumulated
in log space; only the final value is exponentiated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp

from . import _rng
from .errors import EnumerationRefused, ParameterError, PhiOverflow
from .sampling import (
    SparseRademacherParams,
    WishartParams,
    _entries_from_uniform,
    is_truncated,
)

LOG_FLOAT_MAX = math.log(np.finfo(np.float64).max)
EXACT_TERM_CEILING = 10**8
# Overlap values whose contribution is provably below exp(-PRUNE) times the
# largest one are skipped in the exact sum.
PRUNE = 80.0
MC_ENTRIES_PER_CHUNK = 1 << 20

CSV_FIELDS = (
    "n", "m", "rho", "beta", "eps", "D", "method", "value", "stderr", "samples", "q_ratio", "bound",
)


def phi_log_coefficients(m: int, k: int) -> np.ndarray:
    """``log(prod_{a<d}(2m + 4a) / d!)`` for ``d = 0..k``."""
    if k < 0:
        raise ParameterError("truncation degree must be >= 0")
    if m < 1:
        raise ParameterError("m must be positive")
    d = np.arange(k + 1)
    steps = np.log(2.0 * m + 4.0 * np.arange(k))
    return np.concatenate([[0.0], np.cumsum(steps)]) - gammaln(d + 1)


@dataclass(frozen=True)
class PhiSeries:
    """Truncated Taylor series of ``(1 - 4x)^(-m/2)`` around 0."""

    m: int
    k: int

    def __post_init__(self):
        if self.k < 0 or self.m < 1:
            raise ParameterError("need m >= 1 and k >= 0")

    def coefficients(self) -> np.ndarray:
        return np.exp(phi_log_coefficients(self.m, self.k))

    def log_eval(self, x) -> np.ndarray:
        """``log phi_{m,k}(x)`` for ``x >= 0``, elementwise."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if np.any(x < 0):
            raise ParameterError("log_eval needs x >= 0")
        logc = phi_log_coefficients(self.m, self.k)
        zero = x == 0
        logx = np.log(np.where(zero, 1.0, x))
        terms = logc[None, :] + np.arange(self.k + 1)[None, :] * logx[:, None]
        terms[zero, 1:] = -np.inf
        return logsumexp(terms, axis=1)

    def __call__(self, x):
        return phi_truncated(self.m, self.k, x)


def _overflow(m: int, k: int, x: float) -> PhiOverflow:
    logc = phi_log_coefficients(m, k)
    d = int(np.argmax(logc + np.arange(k + 1) * math.log(abs(x)))) if x else 0
    return PhiOverflow(f"phi_(m={m}, k={k})({x!r}) overflows float64 (dominant degree {d})")


def phi_truncated(m: int, k: int, x):
    """``sum_{d<=k} x^d prod_{a<d}(2m+4a) / d!``.

    Nonnegative ``x`` is summed in log space; negative ``x`` gives an
    alternating series summed with ``math.fsum``.
    """
    series = PhiSeries(m, k)
    arr = np.asarray(x, dtype=np.float64)
    flat = arr.reshape(-1)
    out = np.empty(flat.shape)
    pos = flat >= 0
    if pos.any():
        logv = series.log_eval(flat[pos])
        if np.any(logv > LOG_FLOAT_MAX):
            raise _overflow(m, k, float(flat[pos][np.argmax(logv)]))
        out[pos] = np.exp(logv)
    if (~pos).any():
        logc = phi_log_coefficients(m, k)
        d = np.arange(k + 1)
        for i in np.flatnonzero(~pos):
            logt = logc + d * math.log(-flat[i])
            if np.any(logt > LOG_FLOAT_MAX):
                raise _overflow(m, k, float(flat[i]))
            out[i] = math.fsum(np.where(d % 2 == 0, 1.0, -1.0) * np.exp(logt))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


@dataclass(frozen=True)
class LdlrEstimate:
    degree: int
    value: float
    stderr: float
    samples: int
    method: str
    prior: str
    log_value: float = 0.0
    n: int = 0
    m: int = 0
    rho: float = 0.0
    beta: float = 0.0
    eps: Optional[float] = None

    def csv_row(self, q_ratio=None, bound=None) -> list:
        fmt = lambda v: "" if v is None else repr(float(v))  # noqa: E731
        return [
            self.n, self.m, repr(self.rho), repr(self.beta), fmt(self.eps), self.degree,
            self.method, repr(self.value), repr(self.stderr), self.samples, fmt(q_ratio), fmt(bound),
        ]


def _check_eps(eps: Optional[float]) -> None:
    if eps is not None and not (0.0 < eps <= 1.0):
        raise ParameterError(f"eps must lie in (0, 1], got {eps}")


def _check_degree(D: int) -> None:
    if int(D) != D or D < 0:
        raise ParameterError(f"degree must be a non-negative integer, got {D}")


def ldlr_norm_mc(
    params: WishartParams,
    eps: Optional[float],
    D: int,
    num_pairs: int,
    seed: int,
    workers: int | None = 1,
) -> LdlrEstimate:
    """Monte-Carlo estimate over ``num_pairs`` independent spike pairs.

    ``eps=None`` uses the raw prior. Pair chunk ``c`` draws its two spike
    batches from streams ``(seed, 4, c, 0)`` and ``(seed, 4, c, 1)``.
    """
    _check_degree(D)
    _check_eps(eps)
    if num_pairs < 2:
        raise ParameterError("need at least 2 pairs for a standard error")
    prior = params.prior
    n, rho, amp = params.n, prior.rho, prior.amplitude
    k = D // 2
    series = PhiSeries(params.m, k)
    b2 = params.beta**2
    chunk_pairs = max(1, MC_ENTRIES_PER_CHUNK // n)

    def draw(c, side, size):
        v = _entries_from_uniform(_rng.stream(seed, 4, c, side).random((size, n)), rho, amp)
        if eps is not None:
            v[is_truncated(np.count_nonzero(v, axis=1) / (rho * n), eps)] = 0.0
        return v

    def chunk(c):
        size = min(chunk_pairs, num_pairs - c * chunk_pairs)
        inner = np.einsum("ij,ij->i", draw(c, 0, size), draw(c, 1, size))
        y = b2 * inner * inner / 4.0
        uniq, inv = np.unique(y, return_inverse=True)
        logv = series.log_eval(uniq)
        if np.any(logv > LOG_FLOAT_MAX):
            bad = float(np.sqrt(uniq[np.argmax(logv)] * 4.0 / b2))
            raise PhiOverflow(f"phi overflow at overlap <v, v'> = {bad!r}")
        vals = np.exp(logv)[inv]
        return float(vals.sum()), float((vals * vals).sum())

    n_chunks = -(-num_pairs // chunk_pairs)
    sums = _rng.ordered_map(chunk, range(n_chunks), workers)
    total = math.fsum(s for s, _ in sums)
    total_sq = math.fsum(q for _, q in sums)
    mean = total / num_pairs
    var = max(total_sq / num_pairs - mean * mean, 0.0) * num_pairs / (num_pairs - 1)
    return LdlrEstimate(
        degree=D,
        value=mean,
        stderr=math.sqrt(var / num_pairs),
        samples=num_pairs,
        method="monte-carlo",
        prior="raw" if eps is None else "truncated",
        log_value=math.log(mean),
        n=n, m=params.m, rho=rho, beta=params.beta, eps=eps,
    )


def max_kept_count(n: int, rho: float, eps: Optional[float]) -> int:
    """Largest support size the (possibly truncated) prior keeps nonzero."""
    if eps is None:
        return n
    counts = np.arange(n + 1)
    kept = ~is_truncated(counts / (rho * n), eps)
    return int(counts[kept].max())


def _log_binom(k, j):
    return gammaln(k + 1) - gammaln(j + 1) - gammaln(k - j + 1)


def _log_mean_phi_given_overlap(k: int, log_phi_by_w: np.ndarray) -> float:
    """``log E phi`` when the inner product is a sum of ``k`` Rademachers (scaled)."""
    j = np.arange(k + 1)
    return float(logsumexp(_log_binom(k, j) - k * math.log(2.0) + log_phi_by_w[np.abs(k - 2 * j)]))


def _log_both_kept_given_overlap(k: int, n: int, rho: float, cap: int) -> float:
    """``log P(|S1| <= cap, |S2| <= cap | |S1 & S2| = k)``.

    Given ``k`` shared coordinates, each of the other ``n - k`` lies in
    only S1, only S2 or neither with probabilities ``rho/(1+rho)``,
    ``rho/(1+rho)``, ``(1-rho)/(1+rho)``. So ``|S1| - k`` is
    Binomial(n-k, rho/(1+rho)) and, given it equals ``a``, ``|S2| - k``
    is Binomial(n-k-a, rho).
    """
    room = cap - k
    a = np.arange(room + 1)
    terms = stats.binom.logpmf(a, n - k, rho / (1 + rho)) + stats.binom.logcdf(room, n - k - a, rho)
    return float(logsumexp(terms))


def ldlr_norm_exact(
    params: WishartParams,
    eps: Optional[float],
    D: int,
    ceiling: int = EXACT_TERM_CEILING,
) -> LdlrEstimate:
    """Exact value by summing over the overlap ``K = |S1 & S2|``.

    ``K ~ Binomial(n, rho^2)`` and given ``K = k`` the inner product is
    ``W_k / (rho n)`` with ``W_k`` a sum of ``k`` Rademachers. For the
    truncated prior a truncated spike contributes ``phi(0) = 1`` and the
    remaining mass conditions on both support sizes staying below the
    truncation threshold.
    """
    _check_degree(D)
    _check_eps(eps)
    n, m, beta = params.n, params.m, params.beta
    rho = params.prior.rho
    cap = max_kept_count(n, rho, eps)
    cost = (cap + 1) * (cap + 2) // 2
    if cost > ceiling:
        raise EnumerationRefused(cost, ceiling, "overlap terms")
    k_deg = D // 2
    prior = "raw" if eps is None else "truncated"
    meta = dict(n=n, m=m, rho=rho, beta=beta, eps=eps)
    if k_deg == 0 or beta == 0.0:
        return LdlrEstimate(D, 1.0, 0.0, 0, "exact-overlap", prior, 0.0, **meta)

    w = np.arange(cap + 1)
    log_phi_by_w = PhiSeries(m, k_deg).log_eval(beta**2 * w.astype(float) ** 2 / (4.0 * (rho * n) ** 2))
    log_pk = stats.binom.logpmf(w, n, rho * rho)
    upper = log_pk + log_phi_by_w  # phi is increasing, so this bounds each term
    keep = np.flatnonzero(upper >= upper.max() - PRUNE)

    logs = []
    for k in keep:
        t = log_pk[k] + _log_mean_phi_given_overlap(int(k), log_phi_by_w)
        if eps is not None:
            t += _log_both_kept_given_overlap(int(k), n, rho, cap)
        logs.append(t)
    if eps is not None:
        # one or both spikes truncated to zero: overlap 0, phi = 1
        log_both = 2.0 * float(stats.binom.logcdf(cap, n, rho))
        p_not_both = -math.expm1(log_both)
        if p_not_both > 0:
            logs.append(math.log(p_not_both))
    log_total = float(logsumexp(logs))
    if log_total > LOG_FLOAT_MAX:
        raise PhiOverflow(f"exact squared norm exp({log_total:.1f}) overflows float64")
    return LdlrEstimate(D, math.exp(log_total), 0.0, 0, "exact-overlap", prior, log_total, **meta)


@dataclass(frozen=True)
class MomentBound:
    q: float
    bound: float
    q_at_least_one: bool


def ldlr_moment_bound(n: int, m: int, s: int, D: int, beta: float) -> MomentBound:
    """Geometric-series upper bound on the squared norm at ``rho = s/(2n)``.

    ``q = beta^2 ((m+2D)/n + 4 sqrt(2D)(m+2D)/(s sqrt n) + 6D(m+2D)/s^2)``
    and the bound is ``sum_{d <= floor(D/2)} q^d``.
    """
    _check_degree(D)
    if not (1 <= s <= m <= n):
        raise ParameterError(f"need 1 <= s <= m <= n, got s={s}, m={m}, n={n}")
    mm = m + 2 * D
    q = beta**2 * (mm / n + 4 * math.sqrt(2 * D) * mm / (s * math.sqrt(n)) + 6 * D * mm / s**2)
    bound = math.fsum(q**d for d in range(D // 2 + 1))
    return MomentBound(q, bound, q >= 1.0)


def experiment_wishart(n: int, m: int, s: int, delta: float) -> tuple[WishartParams, float]:
    """Wishart parameters and truncation ``eps`` for an ``(s, delta)`` experiment."""
    from .bounds import derive_experiment_params

    eps, rho, beta = derive_experiment_params(delta, s, n)
    return WishartParams(n, m, beta, SparseRademacherParams(n, rho)), eps


def degree_curve(params: WishartParams, eps: Optional[float], degrees) -> list[LdlrEstimate]:
    """Exact squared norms along a list of degrees."""
    return [ldlr_norm_exact(params, eps, int(D)) for D in degrees]
