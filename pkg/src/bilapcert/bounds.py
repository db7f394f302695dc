"""Certified conclusions drawn from passing checks: beta0, the lambda* enclosure, dimension gates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .exact import exp_enclosure
from .params import DimensionParams
from .verifier import CHECK_ORDER, CheckResult


class EnclosureRefused(ValueError):
    """Raised when the hypotheses behind the enclosure are not all certified."""


class Indeterminate(ArithmeticError):
    pass


def rellich_constant(N: int) -> Fraction:
    """N^2 (N-4)^2 / 16."""
    return Fraction(N * N * (N - 4) ** 2, 16)


def singular_constant(N: int) -> int:
    """8(N-2)(N-4)."""
    return 8 * (N - 2) * (N - 4)


def beta0(lam, eps0, eps) -> Fraction:
    """Certified upper bound of (lam + eps0)^3 / (lam - eps0)^2 * e^{9 eps}."""
    lam, eps0, eps = Fraction(lam), Fraction(eps0), Fraction(eps)
    if not 0 <= eps0 < lam:
        raise ValueError("need 0 <= eps0 < lambda")
    if eps < 0:
        raise ValueError("need eps >= 0")
    growth = exp_enclosure(9 * eps).upper if eps else Fraction(1)  # e^0 = 1 exactly
    return (lam + eps0) ** 3 / (lam - eps0) ** 2 * growth


@dataclass(frozen=True)
class LambdaStarEnclosure:
    N: int
    lower: Fraction
    upper: Fraction
    provenance: tuple[str, ...] = field(default=())
    singular: bool = True

    def __post_init__(self):
        if not 0 < self.lower < self.upper:
            raise ValueError("enclosure must satisfy 0 < lower < upper")

    def __contains__(self, value) -> bool:
        return self.lower <= value <= self.upper

    def within(self, lo, hi) -> bool:
        return Fraction(lo) <= self.lower and self.upper <= Fraction(hi)


def enclosure_bounds(lam, eps0, eps) -> tuple[Fraction, Fraction]:
    """((lam - eps0) e^{-2 eps}, (lam + eps0) e^{2 eps}), both rounded outward."""
    lam, eps0, eps = Fraction(lam), Fraction(eps0), Fraction(eps)
    return (lam - eps0) * exp_enclosure(-2 * eps).lower, (lam + eps0) * exp_enclosure(2 * eps).upper


def lambda_star_enclosure(params: DimensionParams, all_checks: Sequence[CheckResult]) -> LambdaStarEnclosure:
    """Two-sided bound on lambda*; refuses unless every hypothesis check passed."""
    by_name = {c.name: c for c in all_checks}
    missing = [name for name in CHECK_ORDER if name not in by_name]
    if missing:
        raise EnclosureRefused(f"missing checks: {', '.join(missing)}")
    failed = [c.name for c in all_checks if not c.passed and not c.note.startswith("skipped")]
    skipped = [c.name for c in all_checks if not c.passed and c.note.startswith("skipped")]
    if failed or skipped:
        detail = f"failed checks: {', '.join(failed)}" if failed else "no check failed"
        if skipped:
            detail += f" (not run: {', '.join(skipped)})"
        raise EnclosureRefused(detail)
    b0 = beta0(params.lam, params.eps0, params.eps)
    if not b0 <= params.beta <= params.beta_bar:
        raise EnclosureRefused(
            f"need beta0 <= beta <= beta_bar, got beta0 ~ {float(b0):.4f}, beta = {params.beta}"
        )
    lower, upper = enclosure_bounds(params.lam, params.eps0, params.eps)
    return LambdaStarEnclosure(params.N, lower, upper, tuple(c.name for c in all_checks))


def gate_smooth_dim(N: int) -> bool:
    """True iff 8(N-2)(N-4) <= N^2 (N-4)^2 / 16, i.e. N >= 13."""
    if N < 5:
        raise ValueError("dimension must be >= 5")
    return singular_constant(N) <= rellich_constant(N)


def e_squared_enclosure() -> tuple[Fraction, Fraction]:
    """Bounds of e^2 from squaring those of e (both positive)."""
    e = exp_enclosure(1)
    return e.lower**2, e.upper**2


def gate_explicit_subsolution(N: int) -> bool:
    """Does 8(N-2)(N-4) e^2 <= N^2 (N-4)^2 / 16 hold? (true exactly from N = 32 on)."""
    if N < 5:
        raise ValueError("dimension must be >= 5")
    lo, hi = e_squared_enclosure()
    k, rellich = singular_constant(N), rellich_constant(N)
    if k * hi <= rellich:
        return True
    if k * lo > rellich:
        return False
    raise Indeterminate(f"e^2 enclosure too wide to decide N={N}")


def reconstruct_u(w, r_samples: Iterable) -> list[tuple[float, float]]:
    """Floating u(r) = w(log r) - 4 log r, for plotting only (not certified)."""
    out = []
    x0 = float(w.grid.x0)
    tail = float(w.tail)
    for r in r_samples:
        r = float(r)
        if not 0 < r <= 1:
            raise ValueError(f"radius {r} outside (0, 1]")
        s = math.log(r)
        ws = tail if s < x0 else float(w.eval_float(np.array([s]))[0])
        out.append((r, ws - 4 * s))
    return out
