"""Command-line entry point.

Exit status: 0 success, 1 refused enumeration, 2 bad parameters or input.
Every run first prints its resolved configuration as ``# key=value`` lines.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import _rng, bounds, certifier, harness, ldlr, matrix_io, rip_core, sampling
from .errors import DataError, EnumerationRefused, ParameterError

EXIT_OK, EXIT_REFUSED, EXIT_PARAM = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


def _common(p, *flags, required=()):
    spec = {
        "n": dict(type=int), "m": dict(type=int), "s": dict(type=int),
        "delta": dict(type=float), "rho": dict(type=float), "beta": dict(type=float),
        "eps": dict(type=float), "degree": dict(type=int), "r": dict(type=int),
        "c-r": dict(type=float, default=1.0), "trials": dict(type=int),
        "pairs": dict(type=int), "seed": dict(type=int),
    }
    for f in flags:
        p.add_argument(f"--{f}", required=f in required, **spec[f])
    p.add_argument("--threads", type=int, default=None, help="worker count (default: all CPUs)")
    p.add_argument("--out", help="write the artifact here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ripcert", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="draw a null or planted matrix")
    _common(p, "n", "m", "s", "delta", "rho", "beta", "seed", required=("n", "m"))
    p.add_argument("--model", choices=("null", "planted"), default="null")
    p.add_argument("--format", choices=("csv", "bin"), default="bin")

    p = sub.add_parser("certify", help="lazy certification of a stored matrix")
    _common(p, "s", "delta", "r", "c-r", required=("s", "delta"))
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--no-normalize", action="store_true", help="keep column norms")
    p.add_argument("--ceiling", type=int, default=rip_core.DEFAULT_CEILING)
    p.add_argument("--override", action="store_true")

    p = sub.add_parser("exact-rip", help="exact B_s and RIP decision")
    _common(p, "s", "delta", required=("s", "delta"))
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--ceiling", type=int, default=rip_core.DEFAULT_CEILING)
    p.add_argument("--override", action="store_true")

    p = sub.add_parser("ldlr", help="low-degree likelihood ratio squared norm")
    _common(p, "n", "m", "s", "delta", "rho", "beta", "eps", "degree", "pairs", "seed",
            required=("n", "m", "degree"))
    p.add_argument("--method", choices=("exact", "mc", "both"), default=None)
    p.add_argument("--raw-prior", action="store_true", help="no truncation even if --delta is set")

    for name, helptext in (("distinguish", "planted-vs-null experiment"),
                           ("witness", "planted spike witness experiment"),
                           ("sweep", "runtime/sparsity tradeoff sweep")):
        p = sub.add_parser(name, help=helptext)
        _common(p, "n", "m", "s", "delta", "r", "c-r", "trials", "seed", "beta", "rho")
        p.add_argument("--spec", help="key = value experiment file; flags override it")
        p.add_argument("--certifier", choices=harness.CERTIFIERS)
        p.add_argument("--no-normalize", action="store_true")
        if name == "distinguish":
            p.add_argument("--check-soundness", action="store_true")
        if name == "sweep":
            p.add_argument("--s-grid", required=True, help="comma-separated sparsities")
            p.add_argument("--r-policy", choices=("auto", "fixed"), default="auto")
            p.add_argument("--timing", action="store_true", help="append wall-time column")

    p = sub.add_parser("bounds", help="evaluate the closed-form bounds")
    _common(p, "n", "m", "s", "delta", required=("n", "m", "s", "delta"))
    p.add_argument("--mu", type=float, default=None)
    return ap


def _echo(args, out) -> None:
    for key, val in sorted(vars(args).items()):
        if val is not None and key != "func":
            out.write(f"# {key}={val}\n")


def _emit(text: str, args, out) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load(path) -> sampling.SensingMatrix:
    try:
        return matrix_io.load_matrix(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc


def cmd_sample(args, out):
    if args.model == "null":
        smp = sampling.sample_null(args.m, args.n, args.seed, args.threads)
    else:
        beta, rho = args.beta, args.rho
        if beta is None or rho is None:
            if args.s is None or args.delta is None:
                raise ParameterError("planted model needs --beta and --rho, or --s and --delta")
            _, rho0, beta0 = bounds.derive_experiment_params(args.delta, args.s, args.n)
            beta = beta0 if beta is None else beta
            rho = rho0 if rho is None else rho
        params = sampling.WishartParams(args.n, args.m, beta, sampling.SparseRademacherParams(args.n, rho))
        smp = sampling.sample_planted(params, args.seed, workers=args.threads)
        out.write(f"# truncated={str(smp.truncated).lower()}\n")
    mat = sampling.SensingMatrix(smp.matrix, "raw", args.seed, smp.model)
    if args.format == "bin":
        if not args.out:
            raise ParameterError("--format bin needs --out")
        matrix_io.save_bin(mat, args.out)
    else:
        target = args.out or sys.stdout
        matrix_io.save_csv(mat, target)
    return EXIT_OK


def cmd_certify(args, out):
    X = _load(args.inp)
    cfg = certifier.LazyConfig(args.s, args.delta, args.r, not args.no_normalize, args.c_r)
    policy = rip_core.EnumerationPolicy.exhaustive(args.ceiling, args.override)
    res = certifier.lazy_certify(X, cfg, policy, args.threads)
    _emit(_csv(certifier.CSV_FIELDS, [res.csv_row()]), args, out)
    return EXIT_OK


def cmd_exact(args, out):
    X = _load(args.inp).scaled()
    policy = rip_core.EnumerationPolicy.exhaustive(args.ceiling, args.override)
    ok, res = rip_core.is_rip_exact(X, rip_core.RipParams(args.s, args.delta), policy, args.threads)
    row = [args.s, repr(args.delta), repr(res.value), "yes" if ok else "no",
           " ".join(map(str, res.argmax_support)), res.subsets_examined]
    _emit(_csv(["s", "delta", "b_s", "rip", "witness", "subsets"], [row]), args, out)
    return EXIT_OK


def cmd_ldlr(args, out):
    n, m = args.n, args.m
    rho = args.rho
    if rho is None:
        if args.s is None:
            raise ParameterError("ldlr needs --rho or --s")
        rho = args.s / (2 * n)
    eps = args.eps
    beta = args.beta
    if args.delta is not None:
        eps0, _, beta0 = bounds.derive_experiment_params(args.delta, args.s or max(1, round(2 * rho * n)), n)
        eps = eps0 if eps is None else eps
        beta = beta0 if beta is None else beta
    if args.raw_prior:
        eps = None
    if beta is None:
        raise ParameterError("ldlr needs --beta or --delta")
    params = sampling.WishartParams(n, m, beta, sampling.SparseRademacherParams(n, rho))
    method = args.method or ("mc" if args.pairs else "exact")
    s_eff = args.s if args.s is not None else round(2 * rho * n)
    q = bound = None
    if 1 <= s_eff <= m <= n:
        mb = ldlr.ldlr_moment_bound(n, m, s_eff, args.degree, beta)
        q, bound = mb.q, mb.bound
    rows = []
    if method in ("exact", "both"):
        rows.append(ldlr.ldlr_norm_exact(params, eps, args.degree).csv_row(q, bound))
    if method in ("mc", "both"):
        if not args.pairs:
            raise ParameterError("monte-carlo needs --pairs")
        est = ldlr.ldlr_norm_mc(params, eps, args.degree, args.pairs, args.seed, args.threads)
        rows.append(est.csv_row(q, bound))
    _emit(_csv(ldlr.CSV_FIELDS, rows), args, out)
    return EXIT_OK


def _spec_values(args) -> dict:
    if not getattr(args, "spec", None):
        return {}
    try:
        return harness.load_spec_values(args.spec)
    except OSError as exc:
        raise DataError(f"cannot read {args.spec}: {exc.strerror or exc}") from exc


def _spec_from(args) -> harness.ExperimentSpec:
    values = _spec_values(args)
    flags = {
        "n": args.n, "m": args.m, "s": args.s, "delta": args.delta, "r": args.r,
        "trials": args.trials, "master_seed": args.seed, "beta": args.beta, "rho": args.rho,
        "certifier": args.certifier,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    if args.c_r != 1.0 or "c_r" not in values:
        values["c_r"] = args.c_r
    if args.no_normalize:
        values["normalize_columns"] = False
    missing = [k for k in ("n", "m", "s", "delta") if k not in values]
    if missing:
        raise ParameterError(f"missing required settings: {', '.join(missing)}")
    return harness.ExperimentSpec(**values)


def cmd_distinguish(args, out):
    spec = _spec_from(args)
    rep = harness.run_distinguish(spec, args.threads, args.check_soundness)
    _emit(rep.to_csv(), args, out)
    return EXIT_OK


def cmd_witness(args, out):
    spec = _spec_from(args)
    rep = harness.run_witness_check(spec, args.threads)
    _emit(rep.to_csv(), args, out)
    return EXIT_OK


def cmd_sweep(args, out):
    spec = _spec_from(args)
    grid = [int(v) for v in args.s_grid.split(",") if v.strip()]
    points = harness.sweep_tradeoff(spec, grid, args.r_policy, args.threads)
    _emit(harness.sweep_csv(spec, points, args.timing), args, out)
    return EXIT_REFUSED if any(p.refused for p in points) else EXIT_OK


def cmd_bounds(args, out):
    reports = bounds.bound_reports(args.n, args.m, args.s, args.delta, args.mu)
    _emit(_csv(bounds.CSV_FIELDS, [r.csv_row() for r in reports]), args, out)
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample, "certify": cmd_certify, "exact-rip": cmd_exact, "ldlr": cmd_ldlr,
    "distinguish": cmd_distinguish, "witness": cmd_witness, "sweep": cmd_sweep, "bounds": cmd_bounds,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 0) is None:
        args.threads = _rng.default_workers()
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _spec_values(args).get("master_seed", _rng.fresh_seed())
        _echo(args, out)
        return COMMANDS[args.cmd](args, out)
    except EnumerationRefused as exc:
        sys.stderr.write(f"ripcert: refused: {exc}\n")
        return EXIT_REFUSED
    except (ParameterError, DataError, ValueError) as exc:
        sys.stderr.write(f"ripcert: error: {exc}\n")
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
