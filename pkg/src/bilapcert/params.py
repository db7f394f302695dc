"""Per-dimension certification parameters and the built-in defaults."""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .builder import Grid

DEFAULT_GRID = Grid(Fraction(-9), 4500)

# N: (lambda, eps0, eps, beta_bar, beta, alpha), all as exact decimal strings
COARSE_TABLE = {
    13: ("2438.6", "1", "5e-7", "2550", "2500", "3.9"),
    14: ("2911.2", "1", "3e-6", "3100", "3000", "3.4"),
    15: ("3423.8", "1", "3e-6", "3600", "3500", "3.1"),
    16: ("3976.4", "1", "1e-5", "4100", "4000", "3.0"),
    17: ("4568.8", "1", "2e-4", "4800", "4600", "3.0"),
    18: ("5201.1", "2", "2e-4", "5400", "5300", "2.7"),
    19: ("5873.2", "2", "2e-4", "6100", "6000", "2.7"),
    20: ("6585.1", "3", "7e-4", "7000", "6800", "2.7"),
    21: ("7336.7", "3", "7e-4", "7700", "7500", "2.6"),
    22: ("8128.1", "4", "1e-3", "8600", "8400", "2.6"),
    23: ("8959.1", "4", "1e-3", "9400", "9200", "2.5"),
    24: ("9829.8", "4", "1e-3", "10400", "10200", "2.5"),
    25: ("10740.1", "4", "1e-3", "11400", "11200", "2.5"),
    26: ("11690.1", "6", "2e-3", "12400", "12200", "2.5"),
    27: ("12679.7", "7", "2e-3", "13400", "13200", "2.4"),
    28: ("13709.0", "7", "2e-3", "14500", "14300", "2.4"),
    29: ("14777.8", "7", "2e-3", "15400", "15200", "2.4"),
    30: ("15886.2", "8", "2e-3", "16600", "16400", "2.4"),
    31: ("17034.3", "10", "2e-3", "17600", "17500", "2.3"),
}

# high-accuracy rows, with the reported enclosure (lower, upper)
FINE_TABLE = {
    13: ("2438.589", "0.003", "5e-7", "2550", "2510", "3.9"),
    14: ("2911.194", "0.003", "5e-7", "3100", "3000", "3.4"),
}
FINE_ENCLOSURES = {
    13: ("2438.583", "2438.595"),
    14: ("2911.188", "2911.200"),
}
FINE_SUBDIV = 1500

DIMENSIONS = tuple(range(13, 32))


@dataclass(frozen=True)
class DimensionParams:
    N: int
    lam: Fraction
    eps0: Fraction
    eps: Fraction
    beta: Fraction
    beta_bar: Fraction
    alpha: Fraction
    grid: Grid = DEFAULT_GRID
    m: int = 1

    def __post_init__(self):
        for name in ("lam", "eps0", "eps", "beta", "beta_bar", "alpha"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if not 0 < self.eps0 < self.lam:
            raise ValueError("need 0 < eps0 < lambda")
        if self.eps <= 0:
            raise ValueError("need eps > 0")
        if not self.beta < self.beta_bar:
            raise ValueError("need beta < beta_bar")
        if not 0 < self.alpha < Fraction(self.N - 4, 2):
            raise ValueError("need 0 < alpha < (N-4)/2")
        if self.m < 1:
            raise ValueError("subdivision m must be positive")

    def with_(self, **changes) -> "DimensionParams":
        return replace(self, **changes)


def _from_row(N: int, row, **overrides) -> DimensionParams:
    lam, eps0, eps, beta_bar, beta, alpha = (Fraction(x) for x in row)
    return DimensionParams(N, lam, eps0, eps, beta, beta_bar, alpha, **overrides)


def coarse_params(N: int, **overrides) -> DimensionParams:
    if N not in COARSE_TABLE:
        raise KeyError(f"no built-in parameters for N={N} (certified range is 13..31)")
    return _from_row(N, COARSE_TABLE[N], **overrides)


def fine_params(N: int, **overrides) -> DimensionParams:
    if N not in FINE_TABLE:
        raise KeyError(f"no fine parameters for N={N}; available: {sorted(FINE_TABLE)}")
    overrides.setdefault("m", FINE_SUBDIV)
    return _from_row(N, FINE_TABLE[N], **overrides)
