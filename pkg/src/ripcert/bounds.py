"""Closed-form concentration bounds and failure-probability formulas.

Natural logarithms throughout. Bounds are returned unclamped; a value of
1 or more is reported as vacuous rather than hidden.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ParameterError

CSV_FIELDS = ("name", "inputs", "bound_value", "vacuous")


@dataclass(frozen=True)
class BoundReport:
    name: str
    inputs: dict
    bound_value: float
    vacuous: bool = field(init=False)

    def __post_init__(self):
        if not self.bound_value >= 0:
            raise ValueError("bound must be non-negative")
        object.__setattr__(self, "vacuous", self.bound_value >= 1.0)

    def csv_row(self) -> list:
        inputs = ";".join(f"{k}={v}" for k, v in self.inputs.items())
        return [self.name, inputs, repr(self.bound_value), str(self.vacuous).lower()]


def _unit_open(name: str, value: float) -> None:
    if not (0.0 < value < 1.0):
        raise ParameterError(f"{name} must lie in (0, 1), got {value}")


def bernoulli_norm_bounds(rho: float, n: int, mu: float) -> tuple[float, float, float]:
    """Tail bounds on ``||x||^2`` for a sparse Rademacher draw.

    Returns ``(upper, lower, two_sided)`` bounding
    ``P(||x||^2 > 1+mu)``, ``P(||x||^2 < 1-mu)`` and
    ``P(||x||^2 outside [1-mu, 1+mu])``.
    """
    if not (0.0 < mu <= 1.0):
        raise ParameterError(f"mu must lie in (0, 1], got {mu}")
    if not (0.0 <= rho <= 1.0) or n < 0:
        raise ParameterError("need rho in [0, 1] and n >= 0")
    t = mu * mu * rho * n
    return math.exp(-t / 3), math.exp(-t / 2), 2 * math.exp(-t / 3)


def chi2_upper_bound(m: int, delta: float) -> float:
    """Bound on ``P(chi2_m / m >= 1 + delta)``: ``exp(-delta^2 m / 12)``."""
    _unit_open("delta", delta)
    if m < 1:
        raise ParameterError("m must be positive")
    return math.exp(-delta * delta * m / 12)


def planted_rip_prob_bound(m: int, s: int, delta: float) -> float:
    """Bound on the probability that a planted draw (scaled) is still RIP."""
    _unit_open("delta", delta)
    if m < 1 or s < 1:
        raise ParameterError("m and s must be positive")
    return math.exp(-delta * delta * m / 12) + 2 * math.exp(-((1 - delta) ** 2) * s / 24)


def null_nonrip_exponent(n: int, m: int, s: int, delta: float) -> float:
    """``s log(9 e n / s) - delta^2 m / 256``; the bound is ``2 exp`` of this."""
    _unit_open("delta", delta)
    if not (1 <= s <= n) or m < 1:
        raise ParameterError(f"need 1 <= s <= n and m >= 1, got s={s}, n={n}, m={m}")
    return s * math.log(9 * math.e * n / s) - delta * delta * m / 256


def null_nonrip_prob_bound(n: int, m: int, s: int, delta: float) -> float:
    """Bound on the probability that a Gaussian draw (scaled) is not RIP."""
    e = null_nonrip_exponent(n, m, s, delta)
    return math.inf if e > 700 else 2 * math.exp(e)


def derive_experiment_params(delta: float, s: int, n: int) -> tuple[float, float, float]:
    """``(eps, rho, beta)`` for the planted-vs-null experiment at ``(s, delta)``.

    ``eps = (1-delta) / (2(1+delta))``, ``rho = s/(2n)``, ``beta = -(1-eps)``.
    With this eps, ``(1-delta)/(2 eps) = 1 + delta``.
    """
    _unit_open("delta", delta)
    if not (1 <= s <= n):
        raise ParameterError(f"need 1 <= s <= n, got s={s}, n={n}")
    eps = (1 - delta) / (2 * (1 + delta))
    return eps, s / (2 * n), -(1 - eps)


def bound_reports(n: int, m: int, s: int, delta: float, mu: float | None = None) -> list[BoundReport]:
    """The four bound families evaluated at one experiment point."""
    eps, rho, _ = derive_experiment_params(delta, s, n)
    mu = eps if mu is None else mu
    upper, lower, two = bernoulli_norm_bounds(rho, n, mu)
    return [
        BoundReport("bernoulli_norm_two_sided", {"rho": rho, "n": n, "mu": mu}, two),
        BoundReport("chi2_upper", {"m": m, "delta": delta}, chi2_upper_bound(m, delta)),
        BoundReport("planted_rip", {"m": m, "s": s, "delta": delta}, planted_rip_prob_bound(m, s, delta)),
        BoundReport(
            "null_nonrip", {"n": n, "m": m, "s": s, "delta": delta}, null_nonrip_prob_bound(n, m, s, delta)
        ),
    ]
