"""Exact piecewise degree-7 profiles built from floating fourth-derivative samples.

A cubic spline is fitted to the samples, its coefficients are rounded
to rationals, and the resulting piecewise cubic is integrated four times in
exact arithmetic, left to right, so that the profile is C^3 on [x0, 0] and C^3
across x0 into its constant tail.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import mpmath
import numpy as np
from scipy.interpolate import CubicSpline

from .exact import (
    Poly,
    falling_factorial,
    format_rational,
    parse_rational,
    quantize,
    rationalize,
)

DEGREE = 7
DEFAULT_CAP = 2**40
# fourth antiderivative of t^k is t^(k+4) * k!/(k+4)!
_INTEGRATION_FACTORS = tuple(Fraction(math.factorial(k), math.factorial(k + 4)) for k in range(4))


class GridMismatch(ValueError):
    pass


class ProfileFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    x0: Fraction
    n: int

    def __post_init__(self):
        object.__setattr__(self, "x0", Fraction(self.x0))
        if self.x0 >= 0:
            raise ValueError("x0 must be negative")
        if self.n < 1:
            raise ValueError("need at least one interval")

    @classmethod
    def from_float(cls, x0: float, n: int) -> "Grid":
        return cls(Fraction(x0).limit_denominator(10**6), n)

    @property
    def h(self) -> Fraction:
        return -self.x0 / self.n

    def knot(self, j: int) -> Fraction:
        return self.x0 + j * self.h

    def knots_float(self) -> np.ndarray:
        return float(self.x0) + float(self.h) * np.arange(self.n + 1)


@dataclass
class PiecewisePoly:
    """Piece j is sum_i a_i (s - y_j)^i on [y_j, y_j + h]; constant ``tail`` for s <= x0."""

    grid: Grid
    pieces: list[tuple[Fraction, ...]]
    tail: Fraction
    N: int = 0
    kind: str = "w"
    lam: Optional[Fraction] = None
    _float: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.pieces) != self.grid.n:
            raise ValueError(f"expected {self.grid.n} pieces, got {len(self.pieces)}")
        for c in self.pieces:
            if len(c) != DEGREE + 1:
                raise ValueError("every piece needs exactly 8 coefficients")
        self.tail = Fraction(self.tail)

    def piece(self, j: int) -> Poly:
        return Poly(self.pieces[j], self.grid.knot(j))

    def locate(self, s: Fraction) -> int:
        """Index of the piece containing s in [x0, 0] (right end goes to the last piece)."""
        j = math.floor((Fraction(s) - self.grid.x0) / self.grid.h)
        return min(max(j, 0), self.grid.n - 1)

    def __call__(self, s) -> Fraction:
        return self.derivative_at(s, 0)

    def derivative_at(self, s, ell: int = 0) -> Fraction:
        s = Fraction(s)
        if s < self.grid.x0:
            return self.tail if ell == 0 else Fraction(0)
        if s > 0:
            raise ValueError("profile is defined on (-inf, 0]")
        j = self.locate(s)
        return taylor_coefficient(self.pieces[j], s - self.grid.knot(j), ell) * math.factorial(ell)

    def value_at_zero(self, ell: int = 0) -> Fraction:
        return taylor_coefficient(self.pieces[-1], self.grid.h, ell) * math.factorial(ell)

    def float_coeffs(self) -> np.ndarray:
        if self._float is None:
            self._float = np.array([[float(a) for a in c] for c in self.pieces])
        return self._float

    def eval_float(self, s, ell: int = 0) -> np.ndarray:
        """Floating evaluation (reporting and solver input only)."""
        s = np.asarray(s, dtype=float)
        x0, h = float(self.grid.x0), float(self.grid.h)
        j = np.clip(np.floor((s - x0) / h).astype(int), 0, self.grid.n - 1)
        t = s - (x0 + j * h)
        c = self.float_coeffs()[j]
        acc = np.zeros_like(s)
        for i in range(DEGREE, ell - 1, -1):
            acc = acc * t + falling_factorial(i, ell) * c[..., i]
        tail = float(self.tail) if ell == 0 else 0.0
        return np.where(s < x0, tail, acc)

    def float_at_knots(self) -> np.ndarray:
        c = self.float_coeffs()
        last = np.polyval(c[-1][::-1], float(self.grid.h))
        return np.append(c[:, 0], last)

    def float_at_midpoints(self) -> np.ndarray:
        c = self.float_coeffs()
        t = float(self.grid.h) / 2
        acc = np.zeros(c.shape[0])
        for i in range(DEGREE, -1, -1):
            acc = acc * t + c[:, i]
        return acc


def taylor_coefficient(coeffs: Sequence[Fraction], t: Fraction, ell: int) -> Fraction:
    """(1/ell!) d^ell/ds^ell of sum a_i t^i, evaluated exactly at t."""
    acc = Fraction(0)
    for i in range(len(coeffs) - 1, ell - 1, -1):
        acc = acc * t + math.comb(i, ell) * coeffs[i]
    return acc


SPLINE_ENDS = ("natural", "not-a-knot")


def rational_spline(samples, cap: int = DEFAULT_CAP, method: str = "dyadic",
                    bc_type=SPLINE_ENDS) -> list[tuple[Fraction, ...]]:
    """Cubic spline through the samples, coefficients rounded to rationals.

    Returns per-interval (c0, c1, c2, c3) with g(s) = sum c_k (s - y_j)^k.
    The default ends are natural at x0, where the profile is flat, and
    not-a-knot at s = 0: the fourth derivative still bends sharply there and
    a natural end leaves a residual ripple of a few 1e-3.
    ``dyadic`` rounds to the lattice Z/cap so denominators stay bounded along
    the integration chain; ``cf`` uses best approximations with denominator <= cap.
    """
    knots = samples.knots
    spline = CubicSpline(knots, samples.values, bc_type=bc_type)
    # scipy stores highest power first
    coeffs = spline.c[::-1].T
    if method == "dyadic":
        rnd = lambda x: quantize(x, cap)  # noqa: E731
    elif method == "cf":
        rnd = lambda x: rationalize(x, cap)  # noqa: E731
    else:
        raise ValueError(f"unknown rationalization method {method!r}")
    return [tuple(rnd(float(x)) for x in row) for row in coeffs]


def integrate_fourth(g_pieces: Sequence[Sequence[Fraction]], grid: Grid, tail: Fraction) -> list[tuple[Fraction, ...]]:
    """Four exact antiderivatives of a piecewise cubic, C^3 from a flat start at x0."""
    h = grid.h
    hp = [h**k for k in range(DEGREE + 1)]
    low = [Fraction(tail), Fraction(0), Fraction(0), Fraction(0)]
    pieces = []
    for g in g_pieces:
        a = tuple(low) + tuple(Fraction(g[k]) * _INTEGRATION_FACTORS[k] for k in range(4))
        pieces.append(a)
        low = [
            sum((math.comb(i, ell) * a[i] * hp[i - ell] for i in range(ell, DEGREE + 1)), Fraction(0))
            for ell in range(4)
        ]
    return pieces


def _check_grid(samples, grid: Grid):
    if samples.n != grid.n or Grid.from_float(samples.x0, samples.n).x0 != grid.x0:
        raise GridMismatch(
            f"samples grid (x0={samples.x0}, n={samples.n}) does not match "
            f"parameters grid (x0={grid.x0}, n={grid.n})"
        )


def log_tail(N: int, lam: Fraction, cap: int = DEFAULT_CAP) -> Fraction:
    """Rational approximation of log(8(N-2)(N-4)/lam) from a 30-digit evaluation."""
    with mpmath.workdps(30):
        value = mpmath.log(mpmath.mpf(8 * (N - 2) * (N - 4)) / (mpmath.mpf(lam.numerator) / lam.denominator))
        return mpmath_to_fraction(value).limit_denominator(cap)


def mpmath_to_fraction(x) -> Fraction:
    sign, man, exp, _ = mpmath.mpf(x)._mpf_
    value = Fraction(int(man)) * Fraction(2) ** int(exp)
    return -value if sign else value


def build_w(samples, grid: Optional[Grid] = None, cap: int = DEFAULT_CAP, method: str = "dyadic",
            tail: Optional[Fraction] = None) -> PiecewisePoly:
    """Certified log-radial profile from w'''' samples.

    The tail value is a rational approximation of log(8(N-2)(N-4)/lambda)
    where lambda is the samples' lambda_hat rounded to a rational.
    """
    grid = grid or Grid.from_float(samples.x0, samples.n)
    _check_grid(samples, grid)
    lam = None
    if samples.lambda_hat is not None:
        lam = rationalize(samples.lambda_hat, cap)
    if tail is None:
        if lam is None:
            raise ValueError("need lambda_hat or an explicit tail value")
        tail = log_tail(samples.N, lam, cap)
    pieces = integrate_fourth(rational_spline(samples, cap, method), grid, Fraction(tail))
    return PiecewisePoly(grid, pieces, Fraction(tail), samples.N, "w", lam)


def build_psi(samples, grid: Optional[Grid] = None, cap: int = DEFAULT_CAP, method: str = "dyadic",
              lam: Optional[Fraction] = None) -> PiecewisePoly:
    """Certified eigen-profile; the constant tail is chosen so that psi(0) = 0."""
    grid = grid or Grid.from_float(samples.x0, samples.n)
    _check_grid(samples, grid)
    pieces = integrate_fourth(rational_spline(samples, cap, method), grid, Fraction(0))
    shift = -taylor_coefficient(pieces[-1], grid.h, 0)
    pieces = [(a[0] + shift,) + a[1:] for a in pieces]
    return PiecewisePoly(grid, pieces, shift, samples.N, "psi", lam)


@dataclass(frozen=True)
class C3Report:
    ok: bool
    junction: Optional[int] = None  # knot index y_j; 0 denotes the tail junction at x0
    order: Optional[int] = None

    def __bool__(self):
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "C3 gluing holds"
        return f"C3 violated at knot y_{self.junction}, derivative order {self.order}"


def check_c3(p: PiecewisePoly) -> C3Report:
    """Exact C^3 gluing between pieces and into the constant tail."""
    first = p.pieces[0]
    if first[0] != p.tail:
        return C3Report(False, 0, 0)
    for ell in (1, 2, 3):
        if first[ell] != 0:
            return C3Report(False, 0, ell)
    h = p.grid.h
    for j in range(1, p.grid.n):
        left, right = p.pieces[j - 1], p.pieces[j]
        for ell in range(4):
            if taylor_coefficient(left, h, ell) != right[ell]:
                return C3Report(False, j, ell)
    return C3Report(True)


def constant_profile(grid: Grid, value, N: int = 0, kind: str = "w") -> PiecewisePoly:
    value = Fraction(value)
    zero = Fraction(0)
    return PiecewisePoly(grid, [(value,) + (zero,) * DEGREE for _ in range(grid.n)], value, N, kind)


PROFILE_MAGIC = "BILAP-PROFILE v1"


def profile_lines(p: PiecewisePoly) -> list[str]:
    lines = [
        PROFILE_MAGIC,
        f"kind {p.kind}",
        f"N {p.N}",
        f"x0 {format_rational(p.grid.x0)}",
        f"intervals {p.grid.n}",
        f"lambda {format_rational(p.lam) if p.lam is not None else '-'}",
        f"tail {format_rational(p.tail)}",
    ]
    lines.extend(" ".join(format_rational(a) for a in c) for c in p.pieces)
    return lines


def profile_digest(p: PiecewisePoly) -> str:
    return _digest(profile_lines(p))


def _digest(lines: list[str]) -> str:
    return "sha256:" + hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def write_profile(p: PiecewisePoly, path) -> str:
    lines = profile_lines(p)
    digest = _digest(lines)
    Path(path).write_text("\n".join(lines + [f"digest {digest}"]) + "\n", encoding="utf-8")
    return digest


def read_profile(path) -> PiecewisePoly:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 8 or lines[0] != PROFILE_MAGIC:
        raise ProfileFormatError(f"{path}: not a {PROFILE_MAGIC} file")
    body, last = lines[:-1], lines[-1]
    if not last.startswith("digest "):
        raise ProfileFormatError(f"{path}: missing digest line")
    if _digest(body) != last.split(" ", 1)[1]:
        raise ProfileFormatError(f"{path}: digest mismatch, file is corrupted")
    header = {}
    for line in body[1:7]:
        key, _, value = line.partition(" ")
        header[key] = value
    try:
        grid = Grid(parse_rational(header["x0"]), int(header["intervals"]))
        lam = None if header["lambda"] == "-" else parse_rational(header["lambda"])
        pieces = [tuple(parse_rational(tok) for tok in row.split()) for row in body[7:]]
        return PiecewisePoly(grid, pieces, parse_rational(header["tail"]), int(header["N"]), header["kind"], lam)
    except (KeyError, ValueError) as exc:
        raise ProfileFormatError(f"{path}: {exc}") from exc
