"""Planted-vs-null experiments around RIP certification.

Each trial ``t`` draws its null matrix with seed ``derive_seed(master, t, 0)``
and its planted matrix with ``derive_seed(master, t, 1)``. Trials are
independent and results are aggregated in trial order, so a report does not
depend on the number of workers.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import binomtest

from . import _rng
from .bounds import derive_experiment_params, null_nonrip_prob_bound, planted_rip_prob_bound
from .certifier import LazyConfig, lazy_certify, raw_r, select_r
from .errors import EnumerationRefused, ParameterError
from .rip_core import RipParams, is_rip_exact
from .sampling import (
    SensingMatrix,
    SparseRademacherParams,
    SpikedSample,
    WishartParams,
    sample_null,
    sample_planted,
)

CERTIFIERS = ("exact", "lazy", "witness")


@dataclass(frozen=True)
class ExperimentSpec:
    """One planted-vs-null experiment.

    ``beta`` and ``rho`` default to the values derived from ``(s, delta)``;
    set them to probe other points of the model.
    """

    n: int
    m: int
    s: int
    delta: float
    trials: int = 100
    certifier: str = "lazy"
    r: Optional[int] = None
    c_r: float = 1.0
    normalize_columns: bool = True
    master_seed: int = 0
    beta: Optional[float] = None
    rho: Optional[float] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.certifier not in CERTIFIERS:
            raise ParameterError(f"certifier must be one of {CERTIFIERS}, got {self.certifier!r}")
        RipParams(self.s, self.delta)
        if not (1 <= self.m <= self.n and self.s <= self.n):
            raise ParameterError("need 1 <= m <= n and s <= n")
        _rng.check_seed(self.master_seed)

    @property
    def eps(self) -> float:
        return derive_experiment_params(self.delta, self.s, self.n)[0]

    def wishart(self) -> WishartParams:
        _, rho, beta = derive_experiment_params(self.delta, self.s, self.n)
        rho = self.rho if self.rho is not None else rho
        beta = self.beta if self.beta is not None else beta
        return WishartParams(self.n, self.m, beta, SparseRademacherParams(self.n, rho))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_SPEC_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentSpec)}


def _coerce(name: str, raw: str):
    raw = raw.strip()
    if name in ("n", "m", "s", "trials", "master_seed"):
        return int(raw)
    if name in ("delta", "c_r"):
        return float(raw)
    if name in ("beta", "rho"):
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    if name == "r":
        return None if raw.lower() in ("", "none", "auto") else int(raw)
    if name == "normalize_columns":
        return raw.lower() in ("1", "true", "yes", "on")
    return raw


def parse_spec_values(text: str) -> dict:
    """Typed values from ``key = value`` lines (``#`` comments allowed)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string("[spec]\n" + text)
    values = {}
    for key, raw in cp["spec"].items():
        if key not in _SPEC_TYPES:
            raise ParameterError(f"unknown spec key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ParameterError(f"bad value for {key}: {raw!r}") from exc
    return values


def parse_spec(text: str) -> ExperimentSpec:
    """Read a complete experiment spec from ``key = value`` lines."""
    return ExperimentSpec(**parse_spec_values(text))


def load_spec_values(path) -> dict:
    with open(path) as fh:
        return parse_spec_values(fh.read())


def load_spec(path) -> ExperimentSpec:
    return ExperimentSpec(**load_spec_values(path))


def wilson_interval(successes: int, total: int, level: float = 0.95) -> tuple[float, float]:
    if total == 0:
        return (0.0, 1.0)
    ci = binomtest(successes, total).proportion_ci(confidence_level=level, method="wilson")
    return (float(ci.low), float(ci.high))


@dataclass(frozen=True)
class BoundComparison:
    name: str
    empirical: float
    bound: float
    sigma: float
    trials: int

    @property
    def ok(self) -> bool:
        return self.empirical <= self.bound + 3 * self.sigma

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0


def compare(name: str, hits: int, trials: int, bound: float) -> BoundComparison:
    """Empirical frequency vs a bound; sigma is the binomial standard error."""
    p = hits / trials if trials else 0.0
    return BoundComparison(name, p, bound, math.sqrt(p * (1 - p) / trials) if trials else 0.0, trials)


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    yes_rate_null: float = float("nan")
    yes_rate_planted: float = float("nan")
    type1: float = float("nan")
    type2: float = float("nan")
    type1_ci: tuple[float, float] = (0.0, 1.0)
    type2_ci: tuple[float, float] = (0.0, 1.0)
    refusals_null: int = 0
    refusals_planted: int = 0
    mean_wall_time_ms: float = float("nan")
    median_wall_time_ms: float = float("nan")
    bound_comparisons: list = field(default_factory=list)
    oracle_runs: int = 0
    soundness_violations: int = 0

    def rows(self) -> list[list]:
        """Deterministic CSV body (no timings)."""
        fmt = lambda v: repr(float(v))  # noqa: E731
        out = [
            ["yes_rate_null", fmt(self.yes_rate_null)],
            ["yes_rate_planted", fmt(self.yes_rate_planted)],
            ["type1", fmt(self.type1)],
            ["type1_ci_low", fmt(self.type1_ci[0])],
            ["type1_ci_high", fmt(self.type1_ci[1])],
            ["type2", fmt(self.type2)],
            ["type2_ci_low", fmt(self.type2_ci[0])],
            ["type2_ci_high", fmt(self.type2_ci[1])],
            ["refusals_null", self.refusals_null],
            ["refusals_planted", self.refusals_planted],
            ["oracle_runs", self.oracle_runs],
            ["soundness_violations", self.soundness_violations],
        ]
        for c in self.bound_comparisons:
            out.append([f"bound:{c.name}", f"{fmt(c.empirical)}<={fmt(c.bound)}+3*{fmt(c.sigma)}:{c.ok}"])
        return out

    def to_csv(self) -> str:
        return write_csv(["metric", "value"], self.rows(), self.spec)


def write_csv(header, rows, spec: Optional[ExperimentSpec] = None, extra: str = "") -> str:
    """CSV text with an optional leading ``#`` line recording spec hash and seed."""
    buf = io.StringIO()
    if spec is not None:
        buf.write(f"# spec={spec.digest()} master_seed={spec.master_seed}{extra}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def blind(sample: SpikedSample) -> SensingMatrix:
    """What a certifier may see: the scaled matrix only, label and seed removed."""
    m = sample.matrix.shape[0]
    return SensingMatrix(sample.matrix / math.sqrt(m), "one-over-sqrt-m", 0, "hidden")


def witness_violates(sample: SpikedSample, s: int, delta: float) -> bool:
    """True if the planted spike itself shows the scaled matrix is not RIP.

    Needs a nonzero, non-truncated spike with at most ``s`` nonzeros and
    ``||A x||^2 / m < (1 - delta) ||x||^2``.
    """
    x = sample.spike
    if x is None or sample.truncated:
        return False
    nnz = int(np.count_nonzero(x))
    if nnz == 0 or nnz > s:
        return False
    ax = sample.matrix @ x
    return float(ax @ ax) / sample.matrix.shape[0] < (1 - delta) * float(x @ x)


@dataclass(frozen=True)
class _Verdict:
    verdict: Optional[str]  # None = refused
    wall_ms: float
    oracle: Optional[bool] = None  # exact RIP status when checked


def _run_certifier(spec: ExperimentSpec, sample: SpikedSample, check_soundness: bool) -> _Verdict:
    t0 = time.perf_counter()
    if spec.certifier == "witness":
        verdict = "no" if witness_violates(sample, spec.s, spec.delta) else "yes"
        return _Verdict(verdict, (time.perf_counter() - t0) * 1e3)
    X = blind(sample)
    if spec.normalize_columns:
        X = X.normalized_columns()
    try:
        if spec.certifier == "exact":
            ok, _ = is_rip_exact(X, RipParams(spec.s, spec.delta))
            verdict = "yes" if ok else "no"
        else:
            cfg = LazyConfig(spec.s, spec.delta, spec.r, False, spec.c_r)
            if spec.normalize_columns:
                cfg = dataclasses.replace(cfg, normalize_columns=True)
            verdict = lazy_certify(X, cfg).verdict
    except EnumerationRefused:
        return _Verdict(None, (time.perf_counter() - t0) * 1e3)
    wall = (time.perf_counter() - t0) * 1e3
    oracle = None
    if check_soundness and verdict == "yes" and spec.certifier == "lazy":
        try:
            oracle, _ = is_rip_exact(X, RipParams(spec.s, spec.delta))
        except EnumerationRefused:
            oracle = None
    return _Verdict(verdict, wall, oracle)


def _rates(verdicts: list[_Verdict], label: str):
    done = [v for v in verdicts if v.verdict is not None]
    yes = sum(v.verdict == "yes" for v in done)
    return yes, len(done), len(verdicts) - len(done)


def run_distinguish(
    spec: ExperimentSpec, workers: int | None = 1, check_soundness: bool = False
) -> ExperimentReport:
    """Use the certifier as a test: "yes" means null, "no" means planted.

    The certifier sees only the scaled matrix (see :func:`blind`), except the
    diagnostic ``witness`` certifier which reads the hidden spike.
    """
    params = spec.wishart()

    def trial(t: int):
        null = sample_null(spec.m, spec.n, _rng.derive_seed(spec.master_seed, t, 0))
        planted = sample_planted(params, _rng.derive_seed(spec.master_seed, t, 1))
        return (
            _run_certifier(spec, null, check_soundness),
            _run_certifier(spec, planted, check_soundness),
        )

    results = _rng.ordered_map(trial, range(spec.trials), workers)
    nulls = [a for a, _ in results]
    planted = [b for _, b in results]
    yes_n, done_n, ref_n = _rates(nulls, "null")
    yes_p, done_p, ref_p = _rates(planted, "planted")
    walls = [v.wall_ms for v in nulls + planted if v.verdict is not None]
    rep = ExperimentReport(spec)
    if done_n:
        rep.yes_rate_null = yes_n / done_n
        rep.type1 = 1 - rep.yes_rate_null
        rep.type1_ci = wilson_interval(done_n - yes_n, done_n)
    if done_p:
        rep.yes_rate_planted = yes_p / done_p
        rep.type2 = rep.yes_rate_planted
        rep.type2_ci = wilson_interval(yes_p, done_p)
    rep.refusals_null, rep.refusals_planted = ref_n, ref_p
    if walls:
        rep.mean_wall_time_ms = statistics.fmean(walls)
        rep.median_wall_time_ms = statistics.median(walls)
    checked = [v for v in nulls + planted if v.oracle is not None]
    rep.oracle_runs = len(checked)
    rep.soundness_violations = sum(not v.oracle for v in checked)
    if done_p:
        # planted "yes" => planted matrix RIP (exact/lazy) or witness failed
        rep.bound_comparisons.append(
            compare("planted_rip", yes_p, done_p, planted_rip_prob_bound(spec.m, spec.s, spec.delta))
        )
    if done_n and spec.certifier == "exact":
        rep.bound_comparisons.append(
            compare(
                "null_nonrip", done_n - yes_n, done_n,
                null_nonrip_prob_bound(spec.n, spec.m, spec.s, spec.delta),
            )
        )
    return rep


def run_witness_check(spec: ExperimentSpec, workers: int | None = 1) -> ExperimentReport:
    """Planted draws only: how often does the true spike fail as a non-RIP witness?"""
    params = spec.wishart()

    def trial(t: int) -> bool:
        sample = sample_planted(params, _rng.derive_seed(spec.master_seed, t, 1))
        return not witness_violates(sample, spec.s, spec.delta)

    failures = sum(_rng.ordered_map(trial, range(spec.trials), workers))
    rep = ExperimentReport(spec)
    rep.yes_rate_planted = rep.type2 = failures / spec.trials
    rep.type2_ci = wilson_interval(failures, spec.trials)
    rep.bound_comparisons.append(
        compare("witness_failure", failures, spec.trials, planted_rip_prob_bound(spec.m, spec.s, spec.delta))
    )
    return rep


SWEEP_FIELDS = (
    "s", "raw_r", "r", "clamped", "trials", "yes", "no", "refused", "yes_rate_null", "s_log_n_over_m",
)


@dataclass(frozen=True)
class SweepPoint:
    s: int
    raw_r: float
    r: int
    trials: int
    yes: int
    no: int
    refused: int
    median_wall_time_ms: float

    @property
    def clamped(self) -> bool:
        return self.r != math.ceil(self.raw_r)

    @property
    def yes_rate_null(self) -> float:
        done = self.yes + self.no
        return self.yes / done if done else float("nan")


def sweep_tradeoff(
    base: ExperimentSpec, s_grid, r_policy: str = "auto", workers: int | None = 1
) -> list[SweepPoint]:
    """Lazy certification of null draws across a grid of sparsities.

    ``r_policy="auto"`` applies ``select_r`` at each ``s``; ``"fixed"`` uses
    ``base.r`` (clamped to ``s``).
    """
    if r_policy not in ("auto", "fixed"):
        raise ParameterError("r_policy must be 'auto' or 'fixed'")
    if r_policy == "fixed" and base.r is None:
        raise ParameterError("fixed r_policy needs base.r")
    points = []
    for s in s_grid:
        s = int(s)
        rr = raw_r(s, base.m, base.n, base.delta, base.c_r)
        r = select_r(s, base.m, base.n, base.delta, base.c_r) if r_policy == "auto" else min(base.r, s)
        spec = dataclasses.replace(base, s=s, r=r, certifier="lazy")

        def trial(t: int, spec=spec):
            null = sample_null(spec.m, spec.n, _rng.derive_seed(spec.master_seed, s, t))
            return _run_certifier(spec, null, False)

        verdicts = _rng.ordered_map(trial, range(base.trials), workers)
        yes, done, refused = _rates(verdicts, "null")
        walls = [v.wall_ms for v in verdicts if v.verdict is not None]
        points.append(
            SweepPoint(s, rr, r, base.trials, yes, done - yes, refused,
                       statistics.median(walls) if walls else float("nan"))
        )
    return points


def sweep_csv(base: ExperimentSpec, points: list[SweepPoint], timing: bool = False) -> str:
    """Sweep table as CSV.

    Without ``timing`` the output is a pure function of the spec and seed;
    with it a ``median_wall_time_ms`` column is appended.
    """
    header = list(SWEEP_FIELDS) + (["median_wall_time_ms"] if timing else [])
    rows = []
    for p in points:
        row = [
            p.s, repr(p.raw_r), p.r, str(p.clamped).lower(), p.trials, p.yes, p.no, p.refused,
            repr(p.yes_rate_null), repr(p.s * math.log(base.n) / base.m),
        ]
        if timing:
            row.append(f"{p.median_wall_time_ms:.3f}")
        rows.append(row)
    return write_csv(header, rows, base)
