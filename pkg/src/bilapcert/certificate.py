"""BILAP-CERT v1: the line-oriented record of one dimension's certification run.

Everything above the ``digest`` line is the trusted payload and holds only
integers, exact rationals ("p/q") and fixed keywords. Trailing ``meta`` lines
(worker count, wall time) are informational and excluded from the digest, so
two runs that differ only in scheduling produce the same digest.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .bounds import LambdaStarEnclosure
from .builder import Grid
from .exact import format_rational, parse_rational
from .params import DimensionParams
from .verifier import CheckResult

CERT_MAGIC = "BILAP-CERT v1"
_PARAM_KEYS = ("lambda", "eps0", "eps", "beta", "beta_bar", "alpha")
_PARAM_ATTRS = ("lam", "eps0", "eps", "beta", "beta_bar", "alpha")


class CertificateFormatError(ValueError):
    pass


@dataclass
class Certificate:
    params: DimensionParams
    w_digest: str
    psi_digest: str
    checks: list[CheckResult]
    beta0: Fraction
    structure: dict[str, bool] = field(default_factory=dict)
    enclosure: Optional[LambdaStarEnclosure] = None
    failure: Optional[str] = None
    settings: dict[str, str] = field(default_factory=dict)
    workers: int = 1
    wall_seconds: float = 0.0

    def __post_init__(self):
        if self.enclosure is not None and (self.failure or not all(c.passed for c in self.checks)):
            raise ValueError("a certificate with a failed check cannot carry an enclosure")

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def passed(self) -> bool:
        return self.enclosure is not None

    def payload_lines(self) -> list[str]:
        p = self.params
        lines = [CERT_MAGIC, f"N {p.N}"]
        lines += [f"{key} {format_rational(getattr(p, attr))}" for key, attr in zip(_PARAM_KEYS, _PARAM_ATTRS)]
        lines += [f"x0 {format_rational(p.grid.x0)}", f"intervals {p.grid.n}", f"subdiv {p.m}"]
        lines += [f"setting {k} {v}" for k, v in sorted(self.settings.items())]
        lines += [f"profile w {self.w_digest}", f"profile psi {self.psi_digest}"]
        lines.append(f"beta0 {format_rational(self.beta0)}")
        lines += [f"structure {k} {'pass' if v else 'fail'}" for k, v in self.structure.items()]
        lines += [format_check(c) for c in self.checks]
        if self.enclosure is not None:
            e = self.enclosure
            lines.append(f"enclosure {format_rational(e.lower)} {format_rational(e.upper)}")
            lines.append(f"singular {'yes' if e.singular else 'no'}")
        else:
            lines.append(f"failure {self.failure or 'not certified'}")
        return lines

    def digest(self) -> str:
        return "sha256:" + hashlib.sha256("\n".join(self.payload_lines()).encode("utf-8")).hexdigest()

    def lines(self) -> list[str]:
        return self.payload_lines() + [
            f"digest {self.digest()}",
            f"meta workers {self.workers}",
            f"meta wall_seconds {self.wall_seconds:.1f}",
        ]


def _loc(loc) -> str:
    return "-" if loc is None else f"{loc[0]}:{loc[1]}"


def _parse_loc(tok: str):
    if tok == "-":
        return None
    a, b = tok.split(":")
    return int(a), int(b)


def format_check(c: CheckResult) -> str:
    parts = [
        "check", c.name, c.status, c.sense, format_rational(c.worst_margin),
        f"at={_loc(c.worst_location)}", f"first={_loc(c.first_violation)}",
        f"m={c.subdiv if c.subdiv is not None else '-'}", f"scope={_loc(c.scope)}",
    ]
    line = " ".join(parts)
    return f"{line} note={c.note}" if c.note else line


def parse_check(line: str) -> CheckResult:
    head, _, note = line.partition(" note=")
    tok = head.split()
    if len(tok) != 9 or tok[0] != "check":
        raise CertificateFormatError(f"malformed check line: {line[:80]}")
    fields = dict(t.split("=", 1) for t in tok[5:])
    return CheckResult(
        name=tok[1],
        passed=tok[2] == "pass",
        sense=tok[3],
        worst_margin=parse_rational(tok[4]),
        worst_location=_parse_loc(fields["at"]),
        first_violation=_parse_loc(fields["first"]),
        subdiv=None if fields["m"] == "-" else int(fields["m"]),
        scope=_parse_loc(fields["scope"]),
        note=note,
    )


def write_certificate(cert: Certificate, path) -> str:
    Path(path).write_text("\n".join(cert.lines()) + "\n", encoding="utf-8")
    return cert.digest()


def read_certificate(path, verify: bool = True) -> Certificate:
    """Parse a certificate; with ``verify`` the stored digest must match the payload."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CERT_MAGIC:
        raise CertificateFormatError(f"{path}: not a {CERT_MAGIC} file")
    try:
        return _parse(lines, verify)
    except (KeyError, ValueError, IndexError) as exc:
        if isinstance(exc, CertificateFormatError):
            raise
        raise CertificateFormatError(f"{path}: {exc}") from exc


def _parse(lines: list[str], verify: bool) -> Certificate:
    scalars: dict[str, str] = {}
    settings, structure, profiles = {}, {}, {}
    checks = []
    stored = None
    workers, wall = 1, 0.0
    lower = upper = None
    singular = True
    failure = None
    for line in lines[1:]:
        key, _, rest = line.partition(" ")
        if key == "check":
            checks.append(parse_check(line))
        elif key == "setting":
            k, _, v = rest.partition(" ")
            settings[k] = v
        elif key == "structure":
            k, _, v = rest.partition(" ")
            structure[k] = v == "pass"
        elif key == "profile":
            k, _, v = rest.partition(" ")
            profiles[k] = v
        elif key == "enclosure":
            lo, hi = rest.split()
            lower, upper = parse_rational(lo), parse_rational(hi)
        elif key == "singular":
            singular = rest == "yes"
        elif key == "failure":
            failure = rest
        elif key == "digest":
            stored = rest
        elif key == "meta":
            k, _, v = rest.partition(" ")
            if k == "workers":
                workers = int(v)
            elif k == "wall_seconds":
                wall = float(v)
        else:
            scalars[key] = rest
    N = int(scalars["N"])
    grid = Grid(parse_rational(scalars["x0"]), int(scalars["intervals"]))
    values = {attr: parse_rational(scalars[key]) for key, attr in zip(_PARAM_KEYS, _PARAM_ATTRS)}
    params = DimensionParams(N, grid=grid, m=int(scalars["subdiv"]), **values)
    enclosure = None
    if lower is not None:
        names = tuple(dict.fromkeys(c.name for c in checks))
        enclosure = LambdaStarEnclosure(N, lower, upper, names, singular)
    cert = Certificate(
        params, profiles["w"], profiles["psi"], checks, parse_rational(scalars["beta0"]),
        structure, enclosure, failure, settings, workers, wall,
    )
    if verify:
        if stored is None:
            raise CertificateFormatError("missing digest line")
        if cert.digest() != stored:
            raise CertificateFormatError("certificate digest mismatch, payload was altered")
    return cert
