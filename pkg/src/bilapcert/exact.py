"""Exact rational arithmetic: polynomials, exponential enclosures, rationalization.

Everything here is the trusted base of the certification. ``Rational`` is the
stdlib :class:`fractions.Fraction`, which keeps numerator and denominator in
lowest terms with a positive denominator after every operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

Rational = Fraction
RationalLike = Union[Fraction, int]

TAYLOR_DEGREE = 14
EXP_RADIUS = Fraction(3, 2)

FACTORIALS = tuple(math.factorial(k) for k in range(16))

# Lagrange remainders of the degree-14 (resp. 13) Taylor polynomial on [-3/2, 1].
REMAINDER_15 = EXP_RADIUS**15 / FACTORIALS[15]
REMAINDER_14 = EXP_RADIUS**14 / FACTORIALS[14]

# For 0 < x <= 3/2 the tail sum_{k>=15} x^k/k! is at most x^15/15! * 16/(16 - x).
_REMAINDER_15_POSITIVE = REMAINDER_15 * Fraction(32, 29)


class DomainError(ValueError):
    """Argument outside the range where an enclosure is certified."""


def falling_factorial(i: int, ell: int) -> int:
    """i (i-1) ... (i-ell+1); zero when ell > i."""
    if ell > i:
        return 0
    out = 1
    for k in range(i - ell + 1, i + 1):
        out *= k
    return out


@dataclass(frozen=True)
class Poly:
    """Polynomial sum coeffs[i] * (s - base)**i with exact rational coefficients."""

    coeffs: tuple[Fraction, ...]
    base: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(Fraction(c) for c in self.coeffs))
        object.__setattr__(self, "base", Fraction(self.base))

    @property
    def degree(self) -> int:
        for i in range(len(self.coeffs) - 1, -1, -1):
            if self.coeffs[i]:
                return i
        return 0

    def __call__(self, s: RationalLike) -> Fraction:
        return poly_eval(self, s)

    def derivative(self, ell: int = 1) -> "Poly":
        c = self.coeffs
        if ell >= len(c):
            return Poly((Fraction(0),), self.base)
        return Poly(
            tuple(falling_factorial(i, ell) * c[i] for i in range(ell, len(c))),
            self.base,
        )

    def antiderivative(self, constant: RationalLike = 0) -> "Poly":
        """Antiderivative whose value at ``base`` is ``constant``."""
        c = self.coeffs
        return Poly(
            (Fraction(constant),) + tuple(c[i] / (i + 1) for i in range(len(c))),
            self.base,
        )

    def taylor_at(self, t: RationalLike) -> tuple[Fraction, ...]:
        """Coefficients of the same polynomial re-expanded at base + t."""
        t = Fraction(t)
        c = list(self.coeffs)
        n = len(c)
        # repeated synthetic division by (x - t)
        for k in range(n):
            for i in range(n - 2, k - 1, -1):
                c[i] += t * c[i + 1]
        return tuple(c)

    def shifted(self, new_base: RationalLike) -> "Poly":
        new_base = Fraction(new_base)
        return Poly(self.taylor_at(new_base - self.base), new_base)


def poly_eval(p: Poly, s: RationalLike) -> Fraction:
    """Exact value of p at s (Horner)."""
    t = Fraction(s) - p.base
    acc = Fraction(0)
    for c in reversed(p.coeffs):
        acc = acc * t + c
    return acc


def poly_sup_bound(p: Poly, h: RationalLike, ell: int) -> Fraction:
    """Bound on |d^ell p / ds^ell| over [base, base + h].

    Sum over i >= ell of i(i-1)...(i-ell+1) |a_i| h^(i-ell).
    """
    h = Fraction(h)
    if h <= 0:
        raise ValueError("h must be positive")
    if ell < 0:
        raise ValueError("ell must be non-negative")
    total = Fraction(0)
    hp = Fraction(1)
    for i in range(ell, len(p.coeffs)):
        total += falling_factorial(i, ell) * abs(p.coeffs[i]) * hp
        hp *= h
    return total


def taylor_exp(x: RationalLike, degree: int = TAYLOR_DEGREE) -> Fraction:
    """Exact sum_{k<=degree} x^k / k!."""
    x = Fraction(x)
    acc = Fraction(1)
    for k in range(degree, 0, -1):
        acc = 1 + acc * x / k
    return acc


@dataclass(frozen=True)
class ExpEnclosure:
    argument: Fraction
    lower: Fraction
    upper: Fraction

    def __contains__(self, value) -> bool:
        return self.lower <= value <= self.upper

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower


def exp_enclosure(x: RationalLike) -> ExpEnclosure:
    """Rational bounds lower <= e^x <= upper for |x| <= 3/2.

    On [-3/2, 1] the band is T(x) -/+ (3/2)^15/15!. For 1 < x <= 3/2 that
    constant is no longer a valid remainder; there the series tail is
    positive and bounded geometrically, giving [T(x), T(x) + 32/29 R].
    """
    x = Fraction(x)
    if abs(x) > EXP_RADIUS:
        raise DomainError(f"exp enclosure requires |x| <= 3/2, got {x}")
    t = taylor_exp(x)
    if x <= 1:
        return ExpEnclosure(x, t - REMAINDER_15, t + REMAINDER_15)
    return ExpEnclosure(x, t, t + _REMAINDER_15_POSITIVE)


def rationalize(x: float, max_denominator: int = 2**63 - 1) -> Fraction:
    """Closest rational to x with denominator <= max_denominator.

    Uses the continued-fraction best approximation of
    :meth:`Fraction.limit_denominator`.
    """
    if not math.isfinite(x):
        raise ValueError(f"cannot rationalize non-finite value {x!r}")
    if max_denominator < 1:
        raise ValueError("max_denominator must be >= 1")
    return Fraction(x).limit_denominator(max_denominator)


def quantize(x: float, denominator: int) -> Fraction:
    """Nearest rational k/denominator to the float x (ties to even)."""
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    return Fraction(round(Fraction(x) * denominator), denominator)


def format_rational(r: RationalLike) -> str:
    r = Fraction(r)
    if r.denominator == 1:
        return str(r.numerator)
    return f"{r.numerator}/{r.denominator}"


def parse_rational(token: str) -> Fraction:
    """Inverse of :func:`format_rational`; rejects anything but ``p`` or ``p/q``."""
    num, sep, den = token.partition("/")
    if not _is_int(num) or (sep and (not den.isdigit() or den.startswith("0"))):
        raise ValueError(f"malformed rational token {token!r}")
    r = Fraction(int(num), int(den) if sep else 1)
    if format_rational(r) != token:
        raise ValueError(f"rational token {token!r} is not in canonical form")
    return r


def _is_int(s: str) -> bool:
    body = s[1:] if s.startswith("-") else s
    return body.isdigit()


def common_denominator(values: Iterable[Fraction]) -> int:
    d = 1
    for v in values:
        d = math.lcm(d, v.denominator)
    return d


def as_fractions(values: Sequence[RationalLike]) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in values)
