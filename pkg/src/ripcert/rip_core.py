"""Restricted Gram-deviation norms and the exact RIP decision.

For a scaled matrix ``X`` (columns ``x_1..x_n``) let ``H = X^T X - I``. The
restricted norm over a support ``S`` is the spectral norm of the principal
submatrix ``H[S, S]``, and ``B_r(X)`` is its maximum over ``|S| = r``.
``X`` is ``(s, delta)``-RIP exactly when ``B_s(X) <= delta``.

Supports are enumerated in colexicographic order, in fixed-size chunks
unranked independently of each other; ties go to the lowest colex rank.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _rng
from .errors import DataError, EnumerationRefused, ParameterError
from .sampling import SensingMatrix

DEFAULT_CEILING = 10**8
CHUNK = 1 << 15


@dataclass(frozen=True)
class RipParams:
    s: int
    delta: float

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise ParameterError(f"s must be a positive integer, got {self.s}")
        if not (0.0 < self.delta < 1.0):
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class EnumerationPolicy:
    """How ``max_restricted_norm`` visits supports.

    Use :meth:`exhaustive` for the exact maximum or :meth:`sampled` for a
    seeded random subset of supports (a lower bound).
    """

    kind: str = "exhaustive"
    ceiling: int = DEFAULT_CEILING
    override: bool = False
    k: int = 0
    seed: int = 0

    @classmethod
    def exhaustive(cls, ceiling: int = DEFAULT_CEILING, override: bool = False):
        return cls("exhaustive", ceiling=ceiling, override=override)

    @classmethod
    def sampled(cls, k: int, seed: int):
        if k < 1:
            raise ParameterError("sampled policy needs k >= 1")
        return cls("sampled", k=k, seed=seed)


@dataclass(frozen=True)
class RestrictedNormResult:
    value: float
    argmax_support: tuple[int, ...]
    subsets_examined: int
    exhaustive: bool = True


def as_scaled(X) -> SensingMatrix:
    """Accept a scaled :class:`SensingMatrix` or a bare (pre-scaled) array."""
    if isinstance(X, SensingMatrix):
        if X.scale != "one-over-sqrt-m":
            raise ParameterError(
                "matrix is tagged 'raw'; call .scaled() or .normalized_columns() first"
            )
        return X
    return SensingMatrix(np.asarray(X, dtype=np.float64))


def deviation_matrix(X) -> np.ndarray:
    """``X^T X - I`` for a scaled matrix."""
    data = as_scaled(X).data
    h = data.T @ data
    h[np.diag_indices_from(h)] -= 1.0
    return h


def _abs_spectral_max(blocks: np.ndarray) -> np.ndarray:
    """Largest absolute eigenvalue of each symmetric ``r x r`` block."""
    r = blocks.shape[-1]
    if r == 1:
        return np.abs(blocks[:, 0, 0])
    if r == 2:
        a, c, b = blocks[:, 0, 0], blocks[:, 1, 1], blocks[:, 0, 1]
        return np.abs(a + c) / 2 + np.hypot((a - c) / 2, b)
    w = np.linalg.eigvalsh(blocks)
    return np.maximum(-w[:, 0], w[:, -1])


def _subset_values(h: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return _abs_spectral_max(h[idx[:, :, None], idx[:, None, :]])


def restricted_gram_norm(X, S: Sequence[int]) -> float:
    """Spectral norm of ``X_S^T X_S - I`` for the column subset ``S``."""
    data = as_scaled(X).data
    idx = np.asarray(list(S), dtype=np.intp)
    if idx.size == 0:
        raise ParameterError("support must be nonempty")
    n = data.shape[1]
    if idx.min() < 0 or idx.max() >= n or np.unique(idx).size != idx.size:
        raise ParameterError(f"support must hold distinct indices in [0, {n})")
    xs = data[:, idx]
    g = xs.T @ xs - np.eye(idx.size)
    return float(_abs_spectral_max(g[None])[0])


def colex_rank(S: Sequence[int]) -> int:
    """Colexicographic rank of a subset: ``sum_i C(c_i, i)`` over sorted ``c``."""
    return sum(math.comb(c, i + 1) for i, c in enumerate(sorted(S)))


def _binom_table(n: int, r: int) -> list[np.ndarray]:
    cap = np.iinfo(np.int64).max
    return [
        np.array([min(math.comb(c, i), cap) for c in range(n)], dtype=np.int64)
        for i in range(r + 1)
    ]


def colex_unrank(ranks: np.ndarray, n: int, r: int, table=None) -> np.ndarray:
    """Subsets (rows, ascending) of ``{0..n-1}`` with the given colex ranks."""
    table = table or _binom_table(n, r)
    rem = np.array(ranks, dtype=np.int64, copy=True)
    out = np.empty((rem.size, r), dtype=np.intp)
    for i in range(r, 0, -1):
        c = np.searchsorted(table[i], rem, side="right") - 1
        out[:, i - 1] = c
        rem -= table[i][c]
    return out


def _check_r(r: int, n: int) -> None:
    if int(r) != r or not (1 <= r <= n):
        raise ParameterError(f"need 1 <= r <= n, got r={r}, n={n}")


def _exhaustive(h: np.ndarray, r: int, policy: EnumerationPolicy, workers) -> RestrictedNormResult:
    n = h.shape[0]
    total = math.comb(n, r)
    if total > policy.ceiling and not policy.override:
        raise EnumerationRefused(total, policy.ceiling)
    table = _binom_table(n, r)

    def chunk(start: int):
        ranks = np.arange(start, min(start + CHUNK, total), dtype=np.int64)
        vals = _subset_values(h, colex_unrank(ranks, n, r, table))
        j = int(np.argmax(vals))
        return float(vals[j]), start + j

    best, best_rank = -1.0, 0
    for val, rank in _rng.ordered_map(chunk, range(0, total, CHUNK), workers):
        if val > best:
            best, best_rank = val, rank
    support = tuple(int(c) for c in colex_unrank(np.array([best_rank]), n, r, table)[0])
    return RestrictedNormResult(best, support, total, True)


def _sampled(h: np.ndarray, r: int, policy: EnumerationPolicy, workers) -> RestrictedNormResult:
    n = h.shape[0]

    def chunk(c: int):
        size = min(CHUNK, policy.k - c * CHUNK)
        keys = _rng.stream(policy.seed, 3, c).random((size, n))
        idx = np.sort(np.argsort(keys, axis=1)[:, :r], axis=1)
        vals = _subset_values(h, idx)
        j = int(np.argmax(vals))
        return float(vals[j]), tuple(int(v) for v in idx[j])

    best, support = -1.0, ()
    n_chunks = -(-policy.k // CHUNK)
    for val, sup in _rng.ordered_map(chunk, range(n_chunks), workers):
        if val > best:
            best, support = val, sup
    return RestrictedNormResult(best, support, policy.k, False)


def max_norm_of_deviation(
    h: np.ndarray, r: int, policy: Optional[EnumerationPolicy] = None, workers: int | None = 1
) -> RestrictedNormResult:
    """``max_{|S|=r} ||h[S, S]||`` for any symmetric ``h``."""
    if not np.all(np.isfinite(h)):
        raise DataError("deviation matrix has non-finite entries")
    _check_r(r, h.shape[0])
    policy = policy or EnumerationPolicy.exhaustive()
    if policy.kind == "exhaustive":
        return _exhaustive(h, r, policy, workers)
    if policy.kind == "sampled":
        return _sampled(h, r, policy, workers)
    raise ParameterError(f"unknown policy {policy.kind!r}")


def max_restricted_norm(
    X, r: int, policy: Optional[EnumerationPolicy] = None, workers: int | None = 1
) -> RestrictedNormResult:
    """``B_r(X)`` (exhaustive policy) or a sampled lower bound on it."""
    return max_norm_of_deviation(deviation_matrix(X), r, policy, workers)


def is_rip_exact(
    X, params: RipParams, policy: Optional[EnumerationPolicy] = None, workers: int | None = 1
) -> tuple[bool, RestrictedNormResult]:
    """Exact ``(s, delta)``-RIP decision, ``B_s(X) <= delta``.

    Only the exhaustive policy is allowed; an infeasible enumeration raises
    :class:`EnumerationRefused` instead of guessing.
    """
    policy = policy or EnumerationPolicy.exhaustive()
    if policy.kind != "exhaustive":
        raise ParameterError("the exact decision needs an exhaustive policy")
    X = as_scaled(X)
    if params.s > X.shape[1]:
        raise ParameterError("s exceeds the number of columns")
    res = max_restricted_norm(X, params.s, policy, workers)
    return res.value <= params.delta, res
