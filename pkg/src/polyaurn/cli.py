"""Command-line interface.

Exit codes: 0 success, 1 a check failed, 2 bad arguments or configuration.
"""

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

from . import diagnostics as diag
from .exact import (
    AtomicBase,
    atomic_sequence_probability,
    counterexample_report,
    eppf,
    exchangeability_check,
    sequence_probability,
)
from .partitions import Partition, canonicalize_labels, is_restricted_growth
from .rational import render, to_rational
from .samplers import (
    DEFAULT_K_MAX,
    DEFAULT_TRUNC_EPS,
    RngStreamSpec,
    sample_fisher_paths,
    sample_stick_paths,
    sample_urn_paths,
    sample_urn_path,
)
from .schemes import (
    ConditionViolation,
    ConfigError,
    ParameterDomainError,
    load_scheme_config,
    validate_scheme,
)

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


def _float(x):
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def ndjson_line(obj):
    """Compact JSON with floats at 17 significant digits; key order as given."""
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(ndjson_line(x) for x in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{ndjson_line(v)}" for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(doc, out=None):
    text = json.dumps(doc, indent=2, allow_nan=False, default=_default) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _default(obj):
    if isinstance(obj, Fraction):
        return render(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _int_list(text, field):
    try:
        values = [int(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(field, f"expected comma-separated integers, got {text!r}") from exc
    if not values:
        raise ConfigError(field, "empty list")
    return values


def _rational_arg(text, field):
    try:
        return to_rational(text, field)
    except ValueError as exc:
        raise ConfigError(field, str(exc)) from exc


def _labels(text):
    labels = _int_list(text, "labels")
    if any(x < 0 for x in labels):
        raise ConfigError("labels", "labels must be nonnegative")
    if not is_restricted_growth(labels):
        canon = canonicalize_labels(labels)
        print(f"warning: labels {labels} relabeled to {list(canon.assignment)}", file=sys.stderr)
        return canon
    return Partition.from_assignment(labels)


def _stick_params(scheme):
    if scheme.name == "pitman_yor":
        return scheme.params["alpha"], scheme.params["theta"]
    if scheme.name == "blackwell_macqueen":
        return Fraction(0), scheme.params["mu_total"]
    raise ConfigError("scheme", "stick sampling needs a pitman_yor or blackwell_macqueen scheme")


def _fisher_params(scheme):
    if scheme.name != "fisher":
        raise ConfigError("scheme", "fisher sampling needs a fisher scheme")
    return scheme.params["N"], scheme.params["theta"]


def cmd_validate(args):
    report = validate_scheme(load_scheme_config(args.scheme_config), args.max_i)
    _emit(report.to_dict(), args.out)
    return 0 if report.passed else 1


def cmd_exact(args):
    scheme = load_scheme_config(args.scheme_config)
    if args.what == "seq-prob":
        _emit(render(sequence_probability(scheme, _labels(args.labels))), args.out)
    elif args.what == "eppf":
        sizes = _int_list(args.sizes, "sizes")
        if any(e < 1 for e in sizes):
            raise ConfigError("sizes", "block sizes must be positive")
        _emit(render(eppf(scheme, Partition.from_block_sizes(sizes))), args.out)
    elif args.what == "atomic":
        values = _int_list(args.values, "values")
        if args.base_weights:
            base = AtomicBase([_rational_arg(w, "base-weights") for w in args.base_weights.split(",")])
        else:
            base = AtomicBase.uniform(args.atoms)
        if any(not 1 <= v <= base.r for v in values):
            raise ConfigError("values", f"atom indices must lie in 1..{base.r}")
        _emit(render(atomic_sequence_probability(scheme, base, values)), args.out)
    else:
        report = exchangeability_check(scheme, args.max_i, workers=args.threads)
        _emit(report.to_dict(), args.out)
        return 0 if report.passed else 1
    return 0


def cmd_counterexample(args):
    theta = _rational_arg(args.theta, "theta")
    alpha = _rational_arg(args.alpha, "alpha")
    if args.r < 2:
        raise ConfigError("r", "r must be at least 2")
    try:
        report = counterexample_report(args.r, theta, alpha)
    except ParameterDomainError as exc:
        raise ConfigError("alpha" if "alpha" in str(exc).split()[0] else "theta", str(exc)) from exc
    _emit(report, args.out)
    return 0


def _write_paths(paths, out, fmt):
    buf = io.StringIO(newline="")
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["replicate", "position", "label", "value"])
        for p in paths:
            for k, label in enumerate(p.labels):
                value = p.values[k] if p.values is not None else ""
                if isinstance(value, float):
                    value = _float(value)
                writer.writerow([p.replicate_id, k, label, value])
    else:
        for p in paths:
            buf.write(ndjson_line(p.to_record()) + "\n")
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def cmd_sample(args):
    scheme = load_scheme_config(args.scheme_config)
    if args.n < 1:
        raise ConfigError("n", "must be a positive integer")
    if args.replicates < 1:
        raise ConfigError("replicates", "must be a positive integer")
    if args.what == "urn":
        base = AtomicBase.uniform(args.atoms) if args.atoms else None
        paths = sample_urn_paths(scheme, args.n, args.replicates, base, args.seed, args.threads)
    elif args.what == "stick":
        alpha, theta = _stick_params(scheme)
        paths = sample_stick_paths(alpha, theta, args.n, args.replicates, args.trunc_eps,
                                   args.k_max, args.seed, args.threads)
    else:
        N, theta = _fisher_params(scheme)
        paths = sample_fisher_paths(N, theta, args.n, args.replicates, args.seed, args.threads)
    _write_paths(paths, args.out, args.format)
    return 0


def cmd_diagnose(args):
    scheme = load_scheme_config(args.scheme_config) if args.scheme_config else None
    status = 0
    if args.what == "fisher-dp":
        theta = _rational_arg(args.theta, "theta")
        d = diag.fisher_dp_eppf_distance(args.N, theta, args.i)
        doc = diag.metric("fisher_dp_tv", d, True, N=args.N, theta=render(theta), i=args.i)
    else:
        if scheme is None:
            raise ConfigError("scheme-config", "required for this diagnostic")
        if args.what == "a-trace":
            rng = RngStreamSpec(args.seed)
            trace = diag.new_value_probability_trace(scheme, args.i_max, args.mode, rng,
                                                     args.replicates, args.threads)
            doc = diag.metric("new_value_probability", trace.to_dict()["a"], args.mode == "exact",
                              mode=args.mode)
        elif args.what == "compare":
            if args.source == "urn":
                paths = sample_urn_paths(scheme, args.i, args.replicates, None, args.seed, args.threads)
            elif args.source == "stick":
                alpha, theta = _stick_params(scheme)
                paths = sample_stick_paths(alpha, theta, args.i, args.replicates, args.trunc_eps,
                                           args.k_max, args.seed, args.threads)
            else:
                N, theta = _fisher_params(scheme)
                paths = sample_fisher_paths(N, theta, args.i, args.replicates, args.seed, args.threads)
            report = diag.sampler_agreement(scheme, args.i, paths)
            ok = report["tv"] <= args.tv_threshold
            doc = diag.metric("tv_exact_vs_" + args.source, report["tv"], False, args.tv_threshold,
                              ok, report=report)
            status = 0 if ok else 1
        elif args.what == "converge":
            path = sample_urn_path(scheme, args.n, rng=RngStreamSpec(args.seed))
            checkpoints = _int_list(args.checkpoints, "checkpoints")
            try:
                trace = diag.predictive_convergence_trace(path, scheme, checkpoints)
            except ValueError as exc:
                raise ConfigError("checkpoints", str(exc)) from exc
            new_mass = [float(diag.predictive_measure(scheme, path.labels, i)[0]) for i in checkpoints]
            doc = diag.metric("predictive_tv_trace", trace, False, checkpoints=checkpoints,
                              new_mass=new_mass)
        else:
            doc = diag.independence_smoke_test(scheme, args.n, args.replicates, args.seed,
                                               workers=args.threads)
    _emit(doc, args.out)
    return status


def build_parser():
    parser = argparse.ArgumentParser(prog="polyaurn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--scheme-config", required=True, metavar="F")
        p.add_argument("--out", default=None, help="write output here instead of stdout")
        return p

    p = common(sub.add_parser("validate", help="check the exchangeability condition"))
    p.add_argument("--max-i", type=int, default=8)
    p.set_defaults(func=cmd_validate)

    exact = sub.add_parser("exact", help="exact rational computations")
    esub = exact.add_subparsers(dest="what", required=True)
    p = common(esub.add_parser("seq-prob"))
    p.add_argument("--labels", required=True)
    p = common(esub.add_parser("eppf"))
    p.add_argument("--sizes", required=True)
    p = common(esub.add_parser("atomic"))
    p.add_argument("--values", required=True)
    p.add_argument("--atoms", type=int, default=2)
    p.add_argument("--base-weights", default=None)
    p = common(esub.add_parser("exch-check"))
    p.add_argument("--max-i", type=int, default=6)
    p.add_argument("--threads", type=int, default=1)
    exact.set_defaults(func=cmd_exact)

    p = common(sub.add_parser("counterexample", help="atomic-base non-exchangeability"), config=False)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--theta", default="1")
    p.add_argument("--alpha", default="1/2")
    p.set_defaults(func=cmd_counterexample)

    p = common(sub.add_parser("sample", help="Monte Carlo paths"))
    p.add_argument("what", choices=("urn", "stick", "fisher"))
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--atoms", type=int, default=None, help="uniform atomic base on this many atoms")
    p.add_argument("--trunc-eps", type=float, default=DEFAULT_TRUNC_EPS)
    p.add_argument("--k-max", type=int, default=DEFAULT_K_MAX)
    p.add_argument("--format", choices=("ndjson", "csv"), default="ndjson")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("diagnose", help="finite-sample diagnostics")
    p.add_argument("what", choices=("a-trace", "compare", "fisher-dp", "converge", "independence"))
    p.add_argument("--scheme-config", default=None, metavar="F")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--i-max", type=int, default=10)
    p.add_argument("--mode", choices=("exact", "empirical"), default="exact")
    p.add_argument("--i", type=int, default=5)
    p.add_argument("--source", choices=("urn", "stick", "fisher"), default="urn")
    p.add_argument("--tv-threshold", type=float, default=0.02)
    p.add_argument("--trunc-eps", type=float, default=DEFAULT_TRUNC_EPS)
    p.add_argument("--k-max", type=int, default=DEFAULT_K_MAX)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--theta", default="1")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--checkpoints", default="100,200,400")
    p.set_defaults(func=cmd_diagnose)
    return parser


def _check_common(args):
    seed = getattr(args, "seed", DEFAULT_SEED)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    if getattr(args, "threads", 1) < 1:
        raise ConfigError("threads", "must be at least 1")
    for name in ("max_i", "i_max", "i"):
        if getattr(args, name, 1) < 1:
            raise ConfigError(name.replace("_", "-"), "must be a positive integer")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check_common(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ParameterDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConditionViolation as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


run_cli = main


if __name__ == "__main__":
    sys.exit(main())
