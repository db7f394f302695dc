"""Per-dimension orchestration: solve, build, certify, with resumable file output.

Layout of an output directory, per dimension N:

    N{N}_w.samples, N{N}_psi.samples    floating fourth-derivative samples
    N{N}_w.profile, N{N}_psi.profile    exact profiles (BILAP-PROFILE v1)
    N{N}.cert                           certificate (BILAP-CERT v1)
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import verifier
from .bounds import EnclosureRefused, beta0, lambda_star_enclosure
from .builder import (
    DEFAULT_CAP,
    SPLINE_ENDS,
    Grid,
    PiecewisePoly,
    ProfileFormatError,
    build_psi,
    build_w,
    check_c3,
    profile_digest,
    read_profile,
    write_profile,
)
from .certificate import Certificate, CertificateFormatError, read_certificate, write_certificate
from .params import DIMENSIONS, FINE_SUBDIV, FINE_TABLE, DimensionParams, coarse_params, fine_params
from .solver import ProfileSamples, read_samples, solve_branch, solve_eigen_profile, write_samples
from .verifier import CheckResult

log = logging.getLogger(__name__)

WINDOW_CHECKS = ("subsolution", "supersolution", "psi_positive", "stability")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything that determines a run; defaults are written into each certificate.

    ``window`` (fine mode only) is the fraction of intervals, counted back from
    s = 0, that is checked at the full subdivision while the whole domain is
    checked at ``base_subdiv``. ``window=None`` checks everything at ``subdiv``.
    """

    dims: tuple[int, ...] = DIMENSIONS
    out: Path = Path("certs")
    x0: Fraction = Fraction(-9)
    intervals: int = 4500
    subdiv: Optional[int] = None
    cap: int = DEFAULT_CAP
    jobs: int = 1
    fine: bool = False
    window: Optional[Fraction] = None
    base_subdiv: int = 50
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        self.out = Path(self.out)
        self.x0 = Fraction(self.x0)
        self.dims = tuple(self.dims)
        if not self.dims:
            raise ConfigError("no dimensions requested")
        allowed = sorted(FINE_TABLE) if self.fine else DIMENSIONS
        bad = [N for N in self.dims if N not in allowed]
        if bad:
            lo, hi = min(allowed), max(allowed)
            raise ConfigError(f"dimension(s) {bad} outside the supported range {lo}..{hi}")
        if self.x0 >= 0 or self.intervals < 100:
            raise ConfigError("need x0 < 0 and at least 100 intervals")
        if self.subdiv is not None and self.subdiv < 1:
            raise ConfigError("--subdiv must be positive")
        if self.window is not None:
            self.window = Fraction(self.window)
            if not self.fine or not 0 < self.window <= 1:
                raise ConfigError("a check window needs fine mode and a fraction in (0, 1]")
        if self.overrides and len(self.dims) != 1:
            raise ConfigError("parameter overrides need exactly one dimension")

    @property
    def grid(self) -> Grid:
        return Grid(self.x0, self.intervals)

    @property
    def m(self) -> int:
        if self.subdiv is not None:
            return self.subdiv
        return FINE_SUBDIV if self.fine else 1

    def params(self, N: int) -> DimensionParams:
        table = fine_params if self.fine else coarse_params
        base = table(N, grid=self.grid, m=self.m)
        return base.with_(**self.overrides) if self.overrides else base

    def settings(self) -> dict[str, str]:
        s = {
            "mode": "fine" if self.fine else "coarse",
            "cap": str(self.cap),
            "quantization": "dyadic",
            "spline_ends": ",".join(SPLINE_ENDS),
            "exp_cap": str(verifier.EXP_BOUND),
        }
        if self.window is not None:
            s["window"] = f"{self.window.numerator}/{self.window.denominator}"
            s["base_subdiv"] = str(self.base_subdiv)
        return s

    def path(self, N: int, what: str) -> Path:
        return self.out / (f"N{N}.cert" if what == "cert" else f"N{N}_{what}")


# --- stages ------------------------------------------------------------------------


def solve_w(N: int, cfg: RunConfig) -> ProfileSamples:
    samples = solve_branch(N, float(cfg.x0), cfg.intervals)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_samples(samples, cfg.path(N, "w.samples"))
    log.info("N=%d: lambda_hat = %.6f", N, samples.lambda_hat)
    return samples


def _load_or_solve_w(N: int, cfg: RunConfig) -> ProfileSamples:
    path = cfg.path(N, "w.samples")
    if path.exists():
        samples = read_samples(path)
        if samples.n == cfg.intervals and Grid.from_float(samples.x0, samples.n).x0 == cfg.x0:
            return samples
    return solve_w(N, cfg)


def build_profiles(N: int, cfg: RunConfig, params: DimensionParams) -> tuple[PiecewisePoly, PiecewisePoly]:
    """w from its samples, then the eigen-profile samples against that exact w."""
    w = build_w(_load_or_solve_w(N, cfg), cfg.grid, cfg.cap)
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_profile(w, cfg.path(N, "w.profile"))
    ps = solve_eigen_profile(N, w, params.beta_bar)
    write_samples(ps, cfg.path(N, "psi.samples"))
    psi = build_psi(ps, cfg.grid, cfg.cap, lam=w.lam)
    write_profile(psi, cfg.path(N, "psi.profile"))
    return w, psi


def load_profiles(N: int, cfg: RunConfig) -> tuple[PiecewisePoly, PiecewisePoly]:
    w = read_profile(cfg.path(N, "w.profile"))
    psi = read_profile(cfg.path(N, "psi.profile"))
    for p in (w, psi):
        if p.grid != cfg.grid or p.N != N:
            raise ProfileFormatError(f"profile for N={p.N} on {p.grid} does not match the run configuration")
    return w, psi


def check_profiles(w: PiecewisePoly, psi: PiecewisePoly, params: DimensionParams, cfg: RunConfig) -> list[CheckResult]:
    """The hypothesis checks; a window adds full-subdivision reruns near s = 0."""
    if cfg.window is None:
        return verifier.run_all_checks(w, psi, params, cfg.jobs)
    checks = verifier.run_all_checks(w, psi, params, cfg.jobs, m=cfg.base_subdiv)
    n = params.grid.n
    pieces = range(n - math.ceil(cfg.window * n), n)
    failed = next((c.name for c in checks if not c.passed), None)
    runners = {
        "subsolution": lambda: verifier.verify_subsolution(w, params, params.m, cfg.jobs, pieces),
        "supersolution": lambda: verifier.verify_supersolution(w, params, params.m, cfg.jobs, pieces),
        "psi_positive": lambda: verifier.verify_psi_positive(psi, params, params.m, cfg.jobs, pieces),
        "stability": lambda: verifier.verify_stability(psi, w, params, params.m, cfg.jobs, pieces),
    }
    for name in WINDOW_CHECKS:
        if failed is not None:
            checks.append(verifier.skipped(name, f"{failed} failed"))
            continue
        res = runners[name]()
        checks.append(res)
        if not res.passed:
            failed = name
    return checks


def make_certificate(w: PiecewisePoly, psi: PiecewisePoly, params: DimensionParams, cfg: RunConfig,
                     checks: Sequence[CheckResult], wall: float = 0.0) -> Certificate:
    b0 = beta0(params.lam, params.eps0, params.eps)
    structure = {
        "c3_w": bool(check_c3(w)),
        "c3_psi": bool(check_c3(psi)),
        "beta_order": b0 <= params.beta <= params.beta_bar,
    }
    enclosure = failure = None
    broken = [k for k, ok in structure.items() if not ok]
    if broken:
        failure = f"structure failed: {', '.join(broken)}"
    else:
        try:
            enclosure = lambda_star_enclosure(params, checks)
        except EnclosureRefused as exc:
            failure = str(exc)
    return Certificate(
        params, profile_digest(w), profile_digest(psi), list(checks), b0, structure,
        enclosure, failure, cfg.settings(), cfg.jobs, wall,
    )


def _resumable(N: int, cfg: RunConfig, params: DimensionParams) -> Optional[Certificate]:
    """An existing certificate whose settings and profile digests match this run."""
    path = cfg.path(N, "cert")
    if not path.exists():
        return None
    try:
        cert = read_certificate(path)
        w, psi = load_profiles(N, cfg)
    except (CertificateFormatError, ProfileFormatError, OSError):
        return None
    if cert.params != params or cert.settings != cfg.settings():
        return None
    if cert.w_digest != profile_digest(w) or cert.psi_digest != profile_digest(psi):
        return None
    return cert


def certify_dimension(N: int, cfg: RunConfig, resume: bool = True) -> Certificate:
    """Certify one dimension.

    With ``resume`` an up-to-date certificate is returned as is, and profiles
    already in the output directory are reused; a corrupted profile then
    raises ProfileFormatError instead of being silently rebuilt.
    """
    params = cfg.params(N)
    if resume:
        done = _resumable(N, cfg, params)
        if done is not None:
            log.info("N=%d: certificate up to date, skipping", N)
            return done
    start = time.perf_counter()
    have = cfg.path(N, "w.profile").exists() and cfg.path(N, "psi.profile").exists()
    if resume and have:
        w, psi = load_profiles(N, cfg)
    else:
        w, psi = build_profiles(N, cfg, params)
    checks = check_profiles(w, psi, params, cfg)
    cert = make_certificate(w, psi, params, cfg, checks, time.perf_counter() - start)
    write_certificate(cert, cfg.path(N, "cert"))
    return cert


def verify_dimension(N: int, cfg: RunConfig) -> Certificate:
    """Re-run every check on the stored profiles without touching any file."""
    params = cfg.params(N)
    w, psi = load_profiles(N, cfg)
    start = time.perf_counter()
    checks = check_profiles(w, psi, params, cfg)
    return make_certificate(w, psi, params, cfg, checks, time.perf_counter() - start)
