"""Command-line surface: every library operation behind a subcommand with
machine-readable JSON/CSV output.

Exit codes: 0 all checks passed, 1 a check failed its tolerance, 2 invalid
input, 3 numerical failure (precision exhausted / non-convergence).
Precedence for settings: flags > environment (SOURCEGAP_DIGITS,
SOURCEGAP_THREADS) > config file > defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from mpmath import mp, mpf

from .core import (
    DegenerateSourceError,
    IntervalUnion,
    PrecisionConfig,
    PrecisionError,
    SourceGapError,
    SourceSpec,
    ValidationError,
    normalize,
)
from . import mc, pde_source, pearcey, tau

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def parse_set(text: str) -> IntervalUnion:
    """Endpoint list like '-2,2' or '-inf,0' or '-2,-1,1,2' into a set."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) % 2:
        raise ValidationError(f"need an even number of endpoints, got {len(parts)}")
    pairs = [(parts[i], parts[i + 1]) for i in range(0, len(parts), 2)]
    return normalize(pairs)


def load_config(path: str) -> dict:
    """Flat key=value text or a JSON object; keys mirror long flag names."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValidationError("config JSON must be an object")
        return {str(k).replace("-", "_"): v for k, v in data.items()}
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"bad config line: {line!r}")
        key, val = line.split("=", 1)
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _fmt(x):
    if isinstance(x, float):
        return x
    try:
        return float(x)
    except (TypeError, ValueError):
        return x


def emit(payload: dict, args) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    if args.format == "json":
        text = json.dumps(payload, sort_keys=True, indent=2, default=_fmt) + "\n"
    else:
        rows = payload.get("rows")
        if rows is None:
            raise ValidationError("csv output needs tabular data; use --format json")
        lines = [f"# {k}={v}" for k, v in sorted(payload.items())
                 if k not in ("rows", "schema_version") and not isinstance(v, (dict, list))]
        lines.insert(0, f"# schema_version={SCHEMA_VERSION}")
        header = list(rows[0].keys())
        lines.append(",".join(header))
        for row in rows:
            lines.append(",".join(repr(_fmt(row[h])) for h in header))
        text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)


def _precision(args) -> PrecisionConfig:
    digits = args.digits
    if digits is None:
        digits = int(os.environ.get("SOURCEGAP_DIGITS", 0)) or None
    if digits is None:
        digits = args.default_digits
    return PrecisionConfig(digits, args.rel_tol, args.abs_tol)


def _grid_values(spec: str):
    name, _, rng = spec.partition("=")
    lo, hi, count = rng.split(":")
    lo, hi, count = mpf(lo), mpf(hi), int(count)
    if count < 2:
        raise ValidationError("grid needs at least 2 points")
    return name.strip(), [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def cmd_prob(args) -> int:
    prec = _precision(args)
    E = parse_set(args.E)
    if args.grid:
        name, values = _grid_values(args.grid)
        if name != "a":
            raise ValidationError("prob supports --grid over 'a' only")
        rows = []
        for av in values:
            p = tau.gap_probability(SourceSpec(av, args.k1, args.k2), E, prec)
            rows.append({"a": float(av), "probability": float(p)})
        emit({"command": "prob", "k1": args.k1, "k2": args.k2, "set": str(E),
              "digits": prec.significant_digits, "rows": rows}, args)
        return EXIT_OK
    spec = SourceSpec(args.a, args.k1, args.k2)
    p = tau.gap_probability(spec, E, prec)
    emit({
        "command": "prob",
        "a": float(spec.a), "k1": spec.k1, "k2": spec.k2,
        "set": str(E),
        "digits": prec.significant_digits,
        "probability": float(p),
        "probability_str": mp.nstr(p, min(prec.significant_digits, 30)),
    }, args)
    return EXIT_OK


def cmd_mc(args) -> int:
    E = parse_set(args.E)
    spec = SourceSpec(args.a, args.k1, args.k2)
    cfg = mc.McConfig(samples=args.samples, seed=args.seed, spec=spec)
    est = mc.mc_gap_probability(spec, E, cfg)
    emit({
        "command": "mc",
        "a": float(spec.a), "k1": spec.k1, "k2": spec.k2,
        "set": str(E),
        "samples": est.samples, "seed": est.seed,
        "p_hat": est.p_hat, "std_err": est.std_err,
    }, args)
    return EXIT_OK


def cmd_check_identity(args) -> int:
    prec = _precision(args)
    E = parse_set(args.E)
    fd = tau.FdConfig(base_step=args.step)

    def one(av):
        spec = SourceSpec(av, args.k1, args.k2)
        return tau.check_identity(args.id, spec, E, fd, prec)

    if args.grid:
        name, values = _grid_values(args.grid)
        if name != "a":
            raise ValidationError("check-identity supports --grid over 'a' only")
        rows, ok = [], True
        for av in values:
            r = one(av)
            ok &= r.passed(args.tol)
            rows.append({"a": float(av), "residual": r.residual,
                         "order": r.convergence_order, "converged": r.converged})
        emit({"command": "check-identity", "identity": args.id, "set": str(E),
              "tolerance": args.tol, "digits": prec.significant_digits, "rows": rows}, args)
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    rep = one(args.a)
    emit({
        "command": "check-identity",
        "identity": rep.identity_id,
        "formula": rep.formula,
        "a": args.a, "k1": args.k1, "k2": args.k2, "set": str(E),
        "lhs": rep.lhs, "rhs": rep.rhs, "residual": rep.residual,
        "step_sizes": rep.step_sizes,
        "convergence_order": rep.convergence_order,
        "converged": rep.converged,
        "digits": rep.precision_digits,
        "tolerance": args.tol,
        "passed": rep.passed(args.tol),
    }, args)
    if not rep.converged:
        return EXIT_NUMERICAL
    return EXIT_OK if rep.passed(args.tol) else EXIT_CHECK_FAILED


def cmd_pde_source(args) -> int:
    prec = _precision(args)
    E = parse_set(args.E)
    fd = tau.FdConfig(base_step=args.step, refinements=args.refinements)

    def one(av):
        return pde_source.residual_thm01(SourceSpec(av, args.k1, args.k2), E, fd, prec)

    if args.grid:
        name, values = _grid_values(args.grid)
        if name != "a":
            raise ValidationError("pde-source supports --grid over 'a' only")
        rows, ok = [], True
        for av in values:
            r = one(av)
            ok &= r.converged and r.relative_residual < args.tol
            rows.append({"a": float(av), "relative_residual": r.relative_residual,
                         "converged": r.converged})
        emit({"command": "pde-source", "set": str(E), "tolerance": args.tol,
              "digits": prec.significant_digits, "rows": rows}, args)
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    rep = one(args.a)
    emit({
        "command": "pde-source",
        "a": args.a, "k1": args.k1, "k2": args.k2, "set": str(E),
        "residual": rep.residual, "scale": rep.scale,
        "relative_residual": rep.relative_residual,
        "steps": list(rep.steps), "trend": list(rep.trend),
        "converged": rep.converged,
        "digits": rep.precision_digits,
        "duality_gap": rep.details["duality_gap"],
        "degenerate_products": rep.details["degenerate_products"],
        "tolerance": args.tol,
        "passed": rep.converged and rep.relative_residual < args.tol,
    }, args)
    if not rep.converged:
        return EXIT_NUMERICAL
    return EXIT_OK if rep.relative_residual < args.tol else EXIT_CHECK_FAILED


def cmd_pearcey_pde(args) -> int:
    prec = _precision(args)
    E = parse_set(args.E)
    fd = tau.FdConfig(base_step=args.step, refinements=args.refinements,
                      step_t=args.step_t)

    def one(tv):
        return pearcey.residual_thm02(tv, E, fd, prec, order=args.order)

    if args.grid:
        name, values = _grid_values(args.grid)
        if name != "t":
            raise ValidationError("pearcey-pde supports --grid over 't' only")
        rows, ok = [], True
        for tv in values:
            r = one(tv)
            ok &= r.converged and r.relative_residual < args.tol
            rows.append({"t": float(tv), "relative_residual": r.relative_residual,
                         "converged": r.converged})
        emit({"command": "pearcey-pde", "set": str(E), "tolerance": args.tol,
              "digits": prec.significant_digits, "rows": rows}, args)
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    rep = one(args.t)
    emit({
        "command": "pearcey-pde",
        "t": args.t, "set": str(E),
        "residual": rep.residual, "scale": rep.scale,
        "relative_residual": rep.relative_residual,
        "steps": [list(s) for s in rep.steps], "trend": list(rep.trend),
        "converged": rep.converged, "degenerate": rep.degenerate,
        "digits": rep.precision_digits, "quad_order": rep.quad_order,
        "tolerance": args.tol,
        "passed": rep.converged and rep.relative_residual < args.tol,
    }, args)
    if not rep.converged:
        return EXIT_NUMERICAL
    return EXIT_OK if rep.relative_residual < args.tol else EXIT_CHECK_FAILED


def cmd_pearcey_prob(args) -> int:
    prec = _precision(args)
    E = parse_set(args.E)

    def one(tv):
        return pearcey.fredholm_log_det(tv, E, args.order, prec)

    if args.grid:
        name, values = _grid_values(args.grid)
        if name != "t":
            raise ValidationError("pearcey-prob supports --grid over 't' only")
        rows = [{"t": float(tv), "log_det": float(one(tv))} for tv in values]
        emit({"command": "pearcey-prob", "set": str(E), "order": args.order,
              "digits": prec.significant_digits, "rows": rows}, args)
        return EXIT_OK
    q = one(args.t)
    emit({
        "command": "pearcey-prob",
        "t": args.t, "set": str(E), "order": args.order,
        "digits": prec.significant_digits,
        "log_det": float(q),
        "log_det_str": mp.nstr(q, min(prec.significant_digits, 30)),
        "probability": float(mp.exp(q)),
    }, args)
    return EXIT_OK


def cmd_scaling(args) -> int:
    prec = _precision(args)
    G = parse_set(args.G)
    n_list = [int(x) for x in args.n.split(",")]

    def report(sv):
        return pearcey.scaling_limit_report(sv, G, n_list, eps=args.eps,
                                            order=args.order, prec=prec)

    if args.grid:
        name, values = _grid_values(args.grid)
        if name != "s":
            raise ValidationError("scaling supports --grid over 's' only")
        rows, ok = [], True
        for sv in values:
            r = report(sv)
            ok &= r.decreasing
            rows.append({"s": float(sv), "Q": r.Q, "slope": r.slope,
                         "decreasing": r.decreasing})
        emit({"command": "scaling", "gap_set": str(G), "digits": prec.significant_digits,
              "rows": rows}, args)
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    rep = report(args.s)
    rows = [{"n": r.n, "z": r.z, "Q_z": r.Q_z, "Q": r.Q, "abs_diff": r.diff}
            for r in rep.rows]
    emit({
        "command": "scaling",
        "s": args.s, "gap_set": str(G), "eps": args.eps,
        "order": args.order, "digits": prec.significant_digits,
        "Q": rep.Q, "slope": rep.slope, "decreasing": rep.decreasing,
        "rows": rows,
    }, args)
    return EXIT_OK if rep.decreasing and (rep.slope is None or rep.slope > 0) \
        else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sourcegap",
        description="Gap probabilities for the source ensemble and the "
                    "Pearcey process, with verification commands for the "
                    "identities and PDEs they satisfy.",
    )
    ap.add_argument("--config", help="key=value or JSON config file")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, default_digits, tol=None):
        p.add_argument("--digits", type=int, default=None,
                       help=f"working precision (default {default_digits})")
        p.add_argument("--rel-tol", type=float, default=1e-12)
        p.add_argument("--abs-tol", type=float, default=1e-15)
        p.add_argument("--output", "-o", help="also write the report here")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("SOURCEGAP_THREADS", 1)),
                       help="worker cap for parallel sections")
        p.add_argument("--grid", help="sweep 'param=lo:hi:count', CSV-friendly rows")
        p.set_defaults(default_digits=default_digits)
        if tol is not None:
            p.add_argument("--tol", type=float, default=tol,
                           help=f"pass/fail tolerance (default {tol})")

    p = sub.add_parser("prob", help="gap probability from the determinant formula")
    p.add_argument("--a", type=float, required=False, default=None)
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)
    p.add_argument("--E", required=True, help="endpoint list, e.g. '-2,2' or '-inf,0'")
    common(p, 30)
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("mc", help="Monte Carlo estimate of the gap probability")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)
    p.add_argument("--E", required=True)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    common(p, 30)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("check-identity", help="one identity from the catalog")
    p.add_argument("--id", required=True, choices=tau.IDENTITY_IDS)
    p.add_argument("--a", type=float, required=False, default=None)
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)
    p.add_argument("--E", required=True)
    p.add_argument("--step", type=float, default=None)
    common(p, 40, tol=1e-6)
    p.set_defaults(func=cmd_check_identity)

    p = sub.add_parser("pde-source", help="residual of the source-ensemble PDE")
    p.add_argument("--a", type=float, required=False, default=None)
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)
    p.add_argument("--E", required=True)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--refinements", type=int, default=3)
    common(p, 40, tol=1e-3)
    p.set_defaults(func=cmd_pde_source)

    p = sub.add_parser("pearcey-pde", help="residual of the transition-kernel PDE")
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--E", required=True)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--step-t", type=float, default=None)
    p.add_argument("--refinements", type=int, default=3)
    p.add_argument("--order", type=int, default=None, help="Nystrom nodes per interval")
    common(p, 30, tol=1e-3)
    p.set_defaults(func=cmd_pearcey_pde)

    p = sub.add_parser("pearcey-prob", help="log Fredholm determinant over a compact set")
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--E", required=True)
    p.add_argument("--order", type=int, default=40)
    common(p, 30)
    p.set_defaults(func=cmd_pearcey_prob)

    p = sub.add_parser("scaling", help="finite-size log probabilities against the kernel limit")
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--G", required=True, help="compact gap set endpoints")
    p.add_argument("--n", default="8,32,128", help="even matrix sizes, ascending")
    p.add_argument("--eps", type=int, default=1, choices=(1, -1))
    p.add_argument("--order", type=int, default=40)
    common(p, 30)
    p.set_defaults(func=cmd_scaling)

    return ap


def _apply_config(args, parser) -> None:
    if not getattr(args, "config", None):
        return
    conf = load_config(args.config)
    for key, val in conf.items():
        if not hasattr(args, key):
            continue
        current = getattr(args, key)
        default = parser.get_default(key)
        # flags explicitly given on the command line win over the file
        if current == default or current is None:
            if default is not None and not isinstance(val, type(default)):
                try:
                    val = type(default)(val)
                except (TypeError, ValueError) as exc:
                    raise ValidationError(f"bad config value {key}={val!r}: {exc}") from exc
            elif isinstance(val, str):
                for kind in (int, float):
                    try:
                        val = kind(val)
                        break
                    except ValueError:
                        continue
            setattr(args, key, val)


def _join_set_flags(argv):
    """Glue '--E -2,2' into '--E=-2,2' so leading minus signs parse."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--E", "--G", "--n") and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    argv = _join_set_flags(list(argv))
    try:
        args = parser.parse_args(argv)
        _apply_config(args, parser)
        for req in ("a", "t"):
            if hasattr(args, req) and getattr(args, req) is None \
                    and not getattr(args, "grid", None):
                raise ValidationError(f"missing required parameter --{req}")
        return args.func(args)
    except (ValidationError, DegenerateSourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (PrecisionError, SourceGapError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
