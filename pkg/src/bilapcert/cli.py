"""Command-line driver: ``bilapcert {solve,build,verify,certify,gates,bounds,report}``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline
from .bounds import (
    Indeterminate,
    beta0,
    enclosure_bounds,
    gate_explicit_subsolution,
    gate_smooth_dim,
    reconstruct_u,
    rellich_constant,
    singular_constant,
)
from .builder import ProfileFormatError, read_profile
from .certificate import Certificate, CertificateFormatError, read_certificate
from .params import DIMENSIONS, FINE_TABLE
from .solver import SolverError

OVERRIDES = (("lambda", "lam"), ("eps0", "eps0"), ("eps", "eps"), ("beta", "beta"),
             ("beta-bar", "beta_bar"), ("alpha", "alpha"))


def parse_dims(text: str) -> tuple[int, ...]:
    """'13', '13..31' or comma-separated mixtures such as '13,15..17'."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            lo, hi = int(a), int(b)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty range {part}")
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("no dimensions given")
    return tuple(dict.fromkeys(out))


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text}") from exc


def _common(p: argparse.ArgumentParser):
    p.add_argument("--dims", type=parse_dims, default=None,
                   help="dimensions, e.g. 13, 13..31 or 13,14 (default 13..31, fine 13,14)")
    p.add_argument("--x0", type=_fraction, default=Fraction(-9), help="left end of the grid (default -9)")
    p.add_argument("--intervals", type=int, default=4500, help="number of grid intervals (default 4500)")
    p.add_argument("--subdiv", type=int, default=None, help="sub-intervals per interval (default 1, fine 1500)")
    p.add_argument("--cap", type=int, default=2**40, help="rationalization lattice for spline coefficients")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", type=Path, default=Path("certs"), help="output directory")
    p.add_argument("--fine", action="store_true", help="high-accuracy rows (N = 13, 14; long-running)")
    p.add_argument("--window", type=_fraction, default=None,
                   help="fine mode: fraction of intervals near s = 0 checked at full subdivision")
    p.add_argument("--base-subdiv", type=int, default=50, help="subdivision outside the window (default 50)")
    for flag, _ in OVERRIDES:
        p.add_argument(f"--{flag}", type=_fraction, default=None, help=f"override the table value of {flag}")


def _config(args) -> pipeline.RunConfig:
    overrides = {attr: getattr(args, flag.replace("-", "_")) for flag, attr in OVERRIDES
                 if getattr(args, flag.replace("-", "_")) is not None}
    dims = args.dims or tuple(sorted(FINE_TABLE) if args.fine else DIMENSIONS)
    cfg = pipeline.RunConfig(
        dims=dims, out=args.out, x0=args.x0, intervals=args.intervals, subdiv=args.subdiv,
        cap=args.cap, jobs=args.jobs, fine=args.fine, window=args.window,
        base_subdiv=args.base_subdiv, overrides=overrides,
    )
    cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg


def _fmt(x: Fraction, digits: int = 6) -> str:
    return f"{float(x):.{digits}f}"


def cmd_solve(args) -> int:
    cfg = _config(args)
    failures = 0
    for N in cfg.dims:
        try:
            s = pipeline.solve_w(N, cfg)
        except SolverError as exc:
            print(f"N={N}: solver failed: {exc}")
            failures += 1
            continue
        print(f"N={N}: lambda_hat = {s.lambda_hat:.6f}  residual = {s.residual:.1e}  "
              f"-> {cfg.path(N, 'w.samples')}")
    return 1 if failures else 0


def cmd_build(args) -> int:
    cfg = _config(args)
    failures = 0
    for N in cfg.dims:
        try:
            w, psi = pipeline.build_profiles(N, cfg, cfg.params(N))
        except SolverError as exc:
            print(f"N={N}: solver failed: {exc}")
            failures += 1
            continue
        print(f"N={N}: w tail = {_fmt(w.tail)}  psi tail = {_fmt(psi.tail)}  -> {cfg.path(N, 'w.profile')}, "
              f"{cfg.path(N, 'psi.profile')}")
    return 1 if failures else 0


def _print_checks(cert: Certificate):
    for c in cert.checks:
        where = "" if c.worst_location is None else f" at piece {c.worst_location[0]}"
        extra = f" (m={c.subdiv})" if c.subdiv else ""
        note = f"  [{c.note}]" if c.note else ""
        print(f"  {c.name:<14}{c.status:<5} {c.sense} worst {float(c.worst_margin):+.4e}{where}{extra}{note}")
    for k, ok in cert.structure.items():
        print(f"  {k:<14}{'pass' if ok else 'fail'}")


def _summary(cert: Certificate) -> str:
    if cert.passed:
        e = cert.enclosure
        return f"N={cert.N}: certified, {_fmt(e.lower, 4)} <= lambda* <= {_fmt(e.upper, 4)}, u* singular"
    return f"N={cert.N}: NOT certified ({cert.failure})"


def cmd_verify(args) -> int:
    cfg = _config(args)
    failures = 0
    for N in cfg.dims:
        try:
            cert = pipeline.verify_dimension(N, cfg)
        except (ProfileFormatError, OSError) as exc:
            print(f"N={N}: cannot read profiles: {exc}")
            failures += 1
            continue
        print(_summary(cert))
        _print_checks(cert)
        failures += not cert.passed
    return 1 if failures else 0


def cmd_certify(args) -> int:
    cfg = _config(args)
    failures = 0
    for N in cfg.dims:
        try:
            cert = pipeline.certify_dimension(N, cfg, resume=not args.no_resume)
        except (SolverError, ProfileFormatError) as exc:
            print(f"N={N}: no certificate: {exc}")
            failures += 1
            continue
        print(f"{_summary(cert)}  [{cert.wall_seconds:.1f} s] -> {cfg.path(N, 'cert')}")
        if args.verbose or not cert.passed:
            _print_checks(cert)
        failures += not cert.passed
    return 1 if failures else 0


def cmd_gates(args) -> int:
    lo, hi = min(args.range), max(args.range)
    if lo < 5 or hi > 10**6:
        print("gate range must lie within 5..1000000", file=sys.stderr)
        return 2
    print(f"{'N':>4} {'8(N-2)(N-4)':>12} {'N^2(N-4)^2/16':>16} {'smooth_gate':>12} {'explicit_gate':>14}")
    status = 0
    for N in args.range:
        try:
            explicit = str(gate_explicit_subsolution(N))
        except Indeterminate:
            explicit, status = "indeterminate", 1
        print(f"{N:>4} {singular_constant(N):>12} {str(rellich_constant(N)):>16} "
              f"{str(gate_smooth_dim(N)):>12} {explicit:>14}")
    return status


def cmd_bounds(args) -> int:
    """β0 ordering and the enclosure arithmetic for the requested rows (no profile checks)."""
    cfg = _config(args)
    status = 0
    print(f"{'N':>3} {'beta0':>12} {'beta':>8} {'order':>6} {'lower':>12} {'upper':>12}")
    for N in cfg.dims:
        p = cfg.params(N)
        b0 = beta0(p.lam, p.eps0, p.eps)
        lower, upper = enclosure_bounds(p.lam, p.eps0, p.eps)
        ok = b0 <= p.beta <= p.beta_bar
        status |= not ok
        print(f"{N:>3} {_fmt(b0, 4):>12} {_fmt(p.beta, 1):>8} {'ok' if ok else 'FAIL':>6} "
              f"{_fmt(lower, 4):>12} {_fmt(upper, 4):>12}")
    print("(enclosure holds only once every check passes; see `certify`)")
    return int(status)


REPORT_COLUMNS = ("N", "lambda", "eps0", "eps", "beta_bar", "beta", "alpha", "lower", "upper", "status")


def report_rows(certs: Sequence[Certificate]) -> list[dict]:
    rows = []
    for c in sorted(certs, key=lambda c: (c.N, c.settings.get("mode", ""))):
        p = c.params
        row = {"N": c.N, "lambda": p.lam, "eps0": p.eps0, "eps": p.eps, "beta_bar": p.beta_bar,
               "beta": p.beta, "alpha": p.alpha, "lower": None, "upper": None,
               "status": "certified" if c.passed else "failed"}
        if c.passed:
            row["lower"], row["upper"] = c.enclosure.lower, c.enclosure.upper
        rows.append(row)
    return rows


def _cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        f = float(value)
        return f"{f:.3g}" if abs(f) < 1e-2 else f"{f:.4f}".rstrip("0").rstrip(".")
    return str(value)


def cmd_report(args) -> int:
    certs = []
    for path in args.certs:
        try:
            certs.append((path, read_certificate(path)))
        except (CertificateFormatError, OSError) as exc:
            print(f"{path}: unreadable certificate: {exc}", file=sys.stderr)
            return 1
    rows = report_rows([c for _, c in certs])
    widths = [max([len(k)] + [len(_cell(r[k])) for r in rows]) for k in REPORT_COLUMNS]
    print("  ".join(k.rjust(wd) for k, wd in zip(REPORT_COLUMNS, widths)))
    for r in rows:
        print("  ".join(_cell(r[k]).rjust(wd) for k, wd in zip(REPORT_COLUMNS, widths)))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(["N", "r", "u"])
            radii = [math.exp(-9 * k / args.points) for k in range(args.points, -1, -1)]
            for path, cert in certs:
                profile = Path(path).with_name(f"N{cert.N}_w.profile")
                try:
                    w = read_profile(profile)
                except (ProfileFormatError, OSError) as exc:
                    print(f"{profile}: skipped in CSV: {exc}", file=sys.stderr)
                    continue
                for r, u in reconstruct_u(w, radii):
                    out.writerow([cert.N, f"{r:.10g}", f"{u:.10g}"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bilapcert",
                                     description="Certified enclosures of the extremal parameter of "
                                                 "the radial bilaplacian Gelfand problem.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (
        ("solve", cmd_solve, "solve the branch problem and write w samples"),
        ("build", cmd_build, "build exact w and psi profiles"),
        ("verify", cmd_verify, "re-run all checks on stored profiles"),
        ("certify", cmd_certify, "full pipeline, one certificate per dimension"),
        ("bounds", cmd_bounds, "beta0 ordering and enclosure arithmetic per row"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.set_defaults(func=fn)
        if name == "certify":
            p.add_argument("--no-resume", action="store_true", help="rebuild profiles and rerun all checks even if a matching certificate exists")

    g = sub.add_parser("gates", help="closed-form dimension comparisons")
    g.add_argument("--range", type=parse_dims, default=parse_dims("5..40"))
    g.set_defaults(func=cmd_gates)

    r = sub.add_parser("report", help="summary table of certificates")
    r.add_argument("certs", nargs="*", type=Path)
    r.add_argument("--csv", type=Path, default=None, help="write (N, r, u(r)) plot data")
    r.add_argument("--points", type=int, default=200, help="radii per dimension in the CSV")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except pipeline.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
