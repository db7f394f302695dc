import math
from fractions import Fraction

import mpmath
import pytest

from bilapcert.bounds import (
    EnclosureRefused,
    LambdaStarEnclosure,
    beta0,
    e_squared_enclosure,
    enclosure_bounds,
    gate_explicit_subsolution,
    gate_smooth_dim,
    lambda_star_enclosure,
    reconstruct_u,
)
from bilapcert.exact import DomainError, exp_enclosure
from bilapcert.params import COARSE_TABLE, DIMENSIONS, coarse_params
from bilapcert.verifier import CHECK_ORDER, CheckResult
from oracles import mpf


def _passing(names=CHECK_ORDER):
    return [CheckResult(n, True, ">=", Fraction(1)) for n in names]


def test_beta0_examples():
    b = beta0(Fraction(12193, 5), 1, Fraction(5, 10**7))
    assert float(b) == pytest.approx(2443.6159, abs=1e-4)
    assert b <= 2500
    assert beta0(Fraction(2438), 0, 0) == Fraction(2438)
    assert beta0(2438, 2, Fraction(1, 10**6)) > beta0(2438, 1, Fraction(1, 10**6))
    with pytest.raises(DomainError):
        beta0(2438, 1, Fraction(1, 5))


@pytest.mark.parametrize("N", DIMENSIONS)
def test_beta0_is_certified_upper_bound(N):
    p = coarse_params(N)
    b = beta0(p.lam, p.eps0, p.eps)
    with mpmath.workdps(50):
        lam, e0, e = mpf(p.lam), mpf(p.eps0), mpf(p.eps)
        ref = (lam + e0) ** 3 / (lam - e0) ** 2 * mpmath.exp(9 * e)
        assert ref <= mpf(b)
    assert b <= p.beta < p.beta_bar


def test_enclosure_arithmetic_row_13():
    lower, upper = enclosure_bounds(Fraction(12193, 5), 1, Fraction(5, 10**7))
    assert lower == Fraction(24376, 10) * exp_enclosure(Fraction(-1, 10**6)).lower
    assert upper == Fraction(24396, 10) * exp_enclosure(Fraction(1, 10**6)).upper
    assert Fraction(2437597, 1000) < lower < upper < Fraction(2439603, 1000)
    with mpmath.workdps(40):
        assert mpf(lower) <= 2437.6 * mpmath.exp(-1e-6) and mpf(upper) >= 2439.6 * mpmath.exp(1e-6)


def test_enclosure_refused_on_any_failure():
    p = coarse_params(13)
    enc = lambda_star_enclosure(p, _passing())
    assert isinstance(enc, LambdaStarEnclosure) and enc.singular
    assert enc.provenance == CHECK_ORDER
    for bad in CHECK_ORDER:
        checks = [CheckResult(n, n != bad, ">=", Fraction(1 if n != bad else -1)) for n in CHECK_ORDER]
        with pytest.raises(EnclosureRefused, match=bad):
            lambda_star_enclosure(p, checks)
    with pytest.raises(EnclosureRefused, match="missing"):
        lambda_star_enclosure(p, _passing(CHECK_ORDER[:-1]))
    # beta ordering: beta below beta0
    with pytest.raises(EnclosureRefused, match="beta0"):
        lambda_star_enclosure(p.with_(beta=Fraction(2440)), _passing())
    # an extra failing copy of a check (e.g. a refined window) also blocks
    with pytest.raises(EnclosureRefused):
        lambda_star_enclosure(p, _passing() + [CheckResult("subsolution", False, "<=", Fraction(1))])


def test_enclosure_type_invariants():
    with pytest.raises(ValueError):
        LambdaStarEnclosure(13, Fraction(2), Fraction(1))
    with pytest.raises(ValueError):
        LambdaStarEnclosure(13, Fraction(0), Fraction(1))


def test_smooth_gate():
    assert not gate_smooth_dim(12) and gate_smooth_dim(13) and not gate_smooth_dim(5)
    assert [N for N in range(5, 101) if gate_smooth_dim(N)] == list(range(13, 101))
    with pytest.raises(ValueError):
        gate_smooth_dim(4)


def test_explicit_gate():
    lo, hi = e_squared_enclosure()
    assert mpf(lo) <= mpmath.e**2 <= mpf(hi)
    assert gate_explicit_subsolution(32) and not gate_explicit_subsolution(31)
    assert not gate_explicit_subsolution(13)
    assert [N for N in range(5, 101) if gate_explicit_subsolution(N)] == list(range(32, 101))
    for N in (1000, 10**5, 10**6):
        assert gate_explicit_subsolution(N)


def test_reconstruct_u(runs):
    w = runs.get(13).w
    x0 = float(w.grid.x0)
    (r1, u1), (r2, u2), (r3, u3) = reconstruct_u(w, [1, math.exp(x0), math.exp(x0) / 2])
    assert abs(u1) < 5e-7
    assert u2 == pytest.approx(float(w.tail) - 4 * x0, abs=1e-9)
    assert u3 == pytest.approx(-4 * math.log(r3) + float(w.tail), abs=1e-9)
    # r u'(r) = -4 on the tail branch
    a, b = reconstruct_u(w, [r3, r3 * 1.001])
    assert (b[1] - a[1]) / math.log(1.001) == pytest.approx(-4, abs=1e-9)
    with pytest.raises(ValueError):
        reconstruct_u(w, [0])


def test_table_rows_valid():
    assert sorted(COARSE_TABLE) == list(DIMENSIONS)
    for N in DIMENSIONS:
        p = coarse_params(N)
        assert 0 < p.alpha < Fraction(N - 4, 2)
    with pytest.raises(KeyError):
        coarse_params(12)
