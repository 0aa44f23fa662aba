"""Sparse Rademacher spikes and spiked-Wishart null/planted matrices.

Stream layout for a given seed: the spike comes from stream ``(seed, 0)``,
rows ``[k*ROW_BLOCK, (k+1)*ROW_BLOCK)`` of the Gaussian matrix from stream
``(seed, 1, k)``. Batches of spikes use ``(seed, 2, chunk)`` with
``max(1, 2**20 // n)`` spikes per chunk. Block sizes depend only on the
shape, so output is identical for any worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from . import _rng
from .errors import DataError, ParameterError

ROW_BLOCK = 64
SPIKE_CHUNK_ENTRIES = 1 << 20

Scale = Literal["raw", "one-over-sqrt-m"]
SCALES = ("raw", "one-over-sqrt-m")


@dataclass(frozen=True)
class SparseRademacherParams:
    n: int
    rho: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if not (0.0 < self.rho < 1.0):
            raise ParameterError(f"rho must lie in (0, 1), got {self.rho}")

    @property
    def amplitude(self) -> float:
        """Magnitude of a nonzero entry, 1/sqrt(rho*n)."""
        return 1.0 / math.sqrt(self.rho * self.n)


@dataclass(frozen=True)
class WishartParams:
    n: int
    m: int
    beta: float
    prior: SparseRademacherParams

    def __post_init__(self):
        # m <= n is the regime of interest but the model is defined for any m
        if int(self.m) != self.m or self.m < 1:
            raise ParameterError(f"m must be a positive integer, got {self.m}")
        if not self.beta >= -1.0:
            raise ParameterError(f"beta must be >= -1, got {self.beta}")
        if self.prior.n != self.n:
            raise ParameterError("prior dimension does not match n")


@dataclass(frozen=True)
class SensingMatrix:
    """A dense real matrix plus the scaling convention it is stored in.

    ``scale="one-over-sqrt-m"`` means ``data`` already equals ``A/sqrt(m)``;
    the RIP routines only accept that form so nothing gets normalized twice.
    """

    data: np.ndarray
    scale: Scale = "one-over-sqrt-m"
    seed: int = 0
    model: str = "external"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise DataError(f"expected a 2-d matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("matrix has non-finite entries")
        if self.scale not in SCALES:
            raise ParameterError(f"unknown scale tag {self.scale!r}")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def scaled(self) -> "SensingMatrix":
        """The ``A/sqrt(m)`` form; a no-op if already scaled."""
        if self.scale == "one-over-sqrt-m":
            return self
        m = self.data.shape[0]
        return SensingMatrix(self.data / math.sqrt(m), "one-over-sqrt-m", self.seed, self.model)

    def normalized_columns(self) -> "SensingMatrix":
        """Columns rescaled to unit Euclidean norm (zero columns left as is)."""
        norms = np.linalg.norm(self.data, axis=0)
        norms[norms == 0] = 1.0
        return SensingMatrix(self.data / norms, "one-over-sqrt-m", self.seed, self.model)


@dataclass(frozen=True)
class SpikedSample:
    """A raw draw ``A`` (rows ~ N(0, I) or N(0, I + beta x x^T)).

    ``spike`` is harness metadata. It must never be handed to a certifier.
    """

    matrix: np.ndarray
    spike: Optional[np.ndarray] = None
    truncated: bool = False
    seed: int = 0
    model: str = "null"
    beta: float = 0.0

    def sensing(self) -> SensingMatrix:
        """The observation a certifier sees: ``A/sqrt(m)``, no spike."""
        m = self.matrix.shape[0]
        return SensingMatrix(self.matrix / math.sqrt(m), "one-over-sqrt-m", self.seed, self.model)


def _entries_from_uniform(u: np.ndarray, rho: float, amp: float) -> np.ndarray:
    out = np.zeros(u.shape)
    out[u < rho / 2] = amp
    out[(u >= rho / 2) & (u < rho)] = -amp
    return out


def sample_sparse_rademacher(params: SparseRademacherParams, seed: int) -> np.ndarray:
    """One draw from the sparse Rademacher prior.

    Each entry is ``+1/sqrt(rho n)`` or ``-1/sqrt(rho n)`` with probability
    ``rho/2`` each and ``0`` otherwise.
    """
    u = _rng.stream(seed, 0).random(params.n)
    return _entries_from_uniform(u, params.rho, params.amplitude)


def sample_sparse_rademacher_batch(
    params: SparseRademacherParams, count: int, seed: int, workers: int | None = 1
) -> np.ndarray:
    """``count`` independent prior draws as rows of a ``(count, n)`` array."""
    if count < 0:
        raise ParameterError("count must be non-negative")
    per = max(1, SPIKE_CHUNK_ENTRIES // params.n)
    n_chunks = -(-count // per)

    def chunk(c):
        size = min(per, count - c * per)
        u = _rng.stream(seed, 2, c).random((size, params.n))
        return _entries_from_uniform(u, params.rho, params.amplitude)

    parts = _rng.ordered_map(chunk, range(n_chunks), workers)
    return np.concatenate(parts) if parts else np.zeros((0, params.n))


def squared_norm(x: np.ndarray, params: SparseRademacherParams) -> np.ndarray:
    """``||x||^2`` for prior draws, computed from the support size.

    Works on a single vector or on rows of a batch; counting avoids
    float rounding in the truncation predicate.
    """
    return np.count_nonzero(x, axis=-1) / (params.rho * params.n)


def is_truncated(sq_norm, eps: float):
    """Truncation predicate ``-(1 - eps) ||x||^2 < -1``."""
    return (1.0 - eps) * np.asarray(sq_norm) > 1.0


def _check_eps(eps: float, upper_inclusive: bool = False) -> None:
    ok = 0.0 < eps <= 1.0 if upper_inclusive else 0.0 < eps < 1.0
    if not ok:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")


def sample_truncated_prior(params: SparseRademacherParams, eps: float, seed: int) -> np.ndarray:
    """A prior draw, replaced by the zero vector when ``(1-eps)||x||^2 > 1``."""
    _check_eps(eps)
    x = sample_sparse_rademacher(params, seed)
    if is_truncated(squared_norm(x, params), eps):
        return np.zeros_like(x)
    return x


def _check_dims(m: int, n: int) -> None:
    if int(m) != m or int(n) != n or m < 1 or n < 1:
        raise ParameterError(f"m and n must be positive integers, got m={m}, n={n}")


def _gaussian(m: int, n: int, seed: int, workers: int | None) -> np.ndarray:
    n_blocks = -(-m // ROW_BLOCK)

    def block(k):
        rows = min(ROW_BLOCK, m - k * ROW_BLOCK)
        return _rng.stream(seed, 1, k).standard_normal((rows, n))

    return np.concatenate(_rng.ordered_map(block, range(n_blocks), workers))


def sample_null(m: int, n: int, seed: int, workers: int | None = 1) -> SpikedSample:
    """``m x n`` matrix with i.i.d. standard Gaussian entries."""
    _check_dims(m, n)
    return SpikedSample(_gaussian(m, n, seed, workers), None, False, seed, "null", 0.0)


def spike_row_coefficient(beta: float, sq_norm: float) -> float:
    """``c`` such that ``u = g + c <g, x> x`` has covariance ``I + beta x x^T``.

    ``(I + c x x^T)^2 = I + (2c + c^2 ||x||^2) x x^T`` and with
    ``c = (sqrt(1 + beta ||x||^2) - 1) / ||x||^2`` the bracket equals beta.
    """
    if sq_norm == 0.0:
        return 0.0
    return (math.sqrt(max(1.0 + beta * sq_norm, 0.0)) - 1.0) / sq_norm


def sample_planted(
    params: WishartParams,
    seed: int,
    spike: Optional[np.ndarray] = None,
    workers: int | None = 1,
) -> SpikedSample:
    """Planted-model draw.

    The spike is drawn from the prior unless ``spike`` fixes it. If
    ``beta ||x||^2 >= -1`` each row is ``g + c <g, x> x`` with ``g`` standard
    Gaussian (a rank-one map of an isotropic row, O(n) per row); otherwise
    rows stay isotropic and ``truncated`` is set. The row noise is the same
    stream ``sample_null`` would use with this seed.
    """
    m, n, beta = params.m, params.n, params.beta
    if spike is None:
        x = sample_sparse_rademacher(params.prior, seed)
        sq = float(squared_norm(x, params.prior))
    else:
        x = np.asarray(spike, dtype=np.float64)
        if x.shape != (n,):
            raise ParameterError(f"spike must have shape ({n},), got {x.shape}")
        sq = float(x @ x)
    # tolerance so that beta = -1 with a unit spike is not lost to rounding
    truncated = beta * sq < -1.0 - 1e-12
    g = _gaussian(m, n, seed, workers)
    if not truncated:
        c = spike_row_coefficient(beta, sq)
        if c != 0.0:
            for start in range(0, m, ROW_BLOCK):
                blk = g[start : start + ROW_BLOCK]
                blk += c * np.outer(blk @ x, x)
    return SpikedSample(g, x, bool(truncated), seed, "planted", beta)


def project_out(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Rows of ``a`` projected onto the orthogonal complement of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    nx = x @ x
    if nx == 0:
        return a.copy()
    return a - np.outer(a @ x, x) / nx
