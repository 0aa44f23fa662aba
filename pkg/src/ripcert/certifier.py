"""The lazy RIP certifier.

Instead of maximizing over all ``s``-subsets, compute ``B_r`` for a much
smaller ``r`` and answer "yes" only if ``(s-1)/(r-1) * B_r <= delta``.
For unit-norm columns the deviation ``H = X^T X - I`` has zero diagonal and
averaging over ``r``-subsets of an ``s``-support gives
``B_s <= (s-1)/(r-1) * B_r``, so a "yes" is never wrong.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .rip_core import EnumerationPolicy, as_scaled, deviation_matrix, max_norm_of_deviation
from .sampling import SensingMatrix

CSV_FIELDS = (
    "seed", "model", "n", "m", "s", "delta", "r", "b_r", "scaled_bound", "verdict", "wall_time_ms",
)


def raw_r(s: int, m: int, n: int, delta: float, c_r: float = 1.0) -> float:
    """Unclamped subset size ``c_r * s^2 * ln(n) / (delta^2 * m)``."""
    return c_r * s * s * math.log(n) / (delta * delta * m)


def select_r(s: int, m: int, n: int, delta: float, c_r: float = 1.0) -> int:
    """``ceil(raw_r)`` clamped to ``[2, s]``."""
    if s < 2:
        raise ParameterError(f"the lazy certifier needs s >= 2, got {s}")
    if min(m, n) < 1 or c_r <= 0:
        raise ParameterError("m, n and c_r must be positive")
    if not (0.0 < delta < 1.0):
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    return int(min(max(math.ceil(raw_r(s, m, n, delta, c_r)), 2), s))


@dataclass(frozen=True)
class LazyConfig:
    """Parameters of one lazy certification.

    ``r=None`` picks ``select_r(s, m, n, delta, c_r)`` from the matrix shape.
    With ``normalize_columns`` the certificate is about the column-normalized
    matrix (the form the algorithm is stated for). Without it, columns keep
    their norms and the diagonal of ``H`` is bounded separately:
    ``max_i |H_ii| + (s-1)/(r-1) * B_r(H - diag H)``.
    """

    s: int
    delta: float
    r: Optional[int] = None
    normalize_columns: bool = True
    c_r: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")
        if self.s < 2:
            raise ParameterError(f"the lazy certifier needs s >= 2, got {self.s}")
        if self.r is not None and not (1 < self.r <= self.s):
            raise ParameterError(f"need 1 < r <= s, got r={self.r}, s={self.s}")

    def resolve_r(self, m: int, n: int) -> int:
        if self.r is not None:
            return self.r
        return select_r(self.s, m, n, self.delta, self.c_r)


@dataclass(frozen=True)
class CertificateOutcome:
    verdict: str
    b_r: float
    scaled_bound: float
    r_used: int
    s: int
    delta: float
    witness: Optional[tuple[int, ...]] = None
    diag_term: float = 0.0
    exact: bool = False  # r == s: the lazy test is the exact decision
    m: int = 0
    n: int = 0
    seed: int = 0
    model: str = "external"
    wall_time_ms: float = 0.0

    @property
    def yes(self) -> bool:
        return self.verdict == "yes"

    def csv_row(self) -> list:
        return [
            self.seed, self.model, self.n, self.m, self.s, repr(self.delta), self.r_used,
            repr(self.b_r), repr(self.scaled_bound), self.verdict, f"{self.wall_time_ms:.3f}",
        ]


def _prepare(X, normalize: bool) -> SensingMatrix:
    if isinstance(X, SensingMatrix):
        if normalize:
            return X.normalized_columns()
        return X.scaled()
    X = as_scaled(X)
    return X.normalized_columns() if normalize else X


def lazy_certify(
    X,
    cfg: LazyConfig,
    policy: Optional[EnumerationPolicy] = None,
    workers: int | None = 1,
) -> CertificateOutcome:
    """Run the lazy certifier on ``X``.

    Raises :class:`~ripcert.errors.EnumerationRefused` when ``C(n, r)``
    exceeds the enumeration ceiling; that is not a "no".
    """
    t0 = time.perf_counter()
    X = _prepare(X, cfg.normalize_columns)
    m, n = X.shape
    if cfg.s > n:
        raise ParameterError(f"s={cfg.s} exceeds n={n}")
    r = cfg.resolve_r(m, n)
    policy = policy or EnumerationPolicy.exhaustive()
    if policy.kind != "exhaustive":
        raise ParameterError("certification needs an exhaustive B_r")
    h = deviation_matrix(X)
    factor = (cfg.s - 1) / (r - 1)
    if cfg.normalize_columns:
        diag_term = 0.0
    else:
        diag_term = float(np.max(np.abs(np.diag(h))))
        h = h.copy()
        np.fill_diagonal(h, 0.0)
    res = max_norm_of_deviation(h, r, policy, workers)
    scaled = diag_term + factor * res.value
    return CertificateOutcome(
        verdict="yes" if scaled <= cfg.delta else "no",
        b_r=res.value,
        scaled_bound=scaled,
        r_used=r,
        s=cfg.s,
        delta=cfg.delta,
        witness=res.argmax_support,
        diag_term=diag_term,
        exact=r == cfg.s,
        m=m,
        n=n,
        seed=X.seed,
        model=X.model,
        wall_time_ms=(time.perf_counter() - t0) * 1e3,
    )


def certify(
    X, s: int, delta: float, c_r: float = 1.0, normalize_columns: bool = True,
    policy: Optional[EnumerationPolicy] = None, workers: int | None = 1,
) -> CertificateOutcome:
    """``select_r`` followed by :func:`lazy_certify`, full outcome."""
    return lazy_certify(X, LazyConfig(s, delta, None, normalize_columns, c_r), policy, workers)


def certify_problem1(X, s: int, delta: float, c_r: float = 1.0, **kwargs) -> str:
    """Answer ``"yes"`` or ``"no"``; "yes" only if ``X`` is ``(s, delta)``-RIP."""
    return certify(X, s, delta, c_r, **kwargs).verdict
