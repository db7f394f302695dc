import math
import random
from fractions import Fraction

import mpmath
import pytest

from bilapcert.exact import (
    REMAINDER_15,
    DomainError,
    Poly,
    exp_enclosure,
    format_rational,
    parse_rational,
    poly_eval,
    poly_sup_bound,
    quantize,
    rationalize,
    taylor_exp,
)
from oracles import exp_enclosure_soundness, mpf


def _canonical(q: Fraction) -> bool:
    return q.denominator > 0 and math.gcd(q.numerator, q.denominator) == 1


def test_rational_ops_stay_canonical():
    rng = random.Random(3)
    ops = (lambda a, b: a + b, lambda a, b: a - b, lambda a, b: a * b, lambda a, b: a / b)
    x = Fraction(1)
    count = 0
    while count < 10**6:
        a = Fraction(rng.randint(-10**6, 10**6), rng.randint(1, 10**6))
        b = Fraction(rng.randint(-10**6, 10**6) or 1, rng.randint(1, 10**6))
        for op in ops:
            r = op(a, b)
            assert _canonical(r)
            count += 1
        # a running value keeps denominators from staying small
        x = (x * a + b) / (1 + abs(a))
        assert _canonical(x)
        x = x.limit_denominator(10**30)


def test_poly_eval_examples():
    assert poly_eval(Poly((1, 2)), 3) == 7
    assert poly_eval(Poly((0,) * 8), Fraction(5, 7)) == 0
    seventh = Poly(tuple(math.comb(7, i) * (-1) ** (7 - i) for i in range(8)))  # (s - 1)^7 at base 0
    assert poly_eval(seventh, Fraction(3, 2)) == Fraction(1, 128)
    assert poly_eval(Poly((0,) * 7 + (1,), base=1), Fraction(3, 2)) == Fraction(1, 128)


def test_poly_sup_bound_examples():
    assert poly_sup_bound(Poly((5,)), Fraction(1, 3), 0) == 5
    assert poly_sup_bound(Poly((5,)), 7, 1) == 0
    assert poly_sup_bound(Poly((1, 1, 1)), Fraction(1, 2), 1) == 2
    with pytest.raises(ValueError):
        poly_sup_bound(Poly((1,)), 0, 0)


def test_poly_sup_bound_dominates_samples():
    rng = random.Random(11)
    for _ in range(40):
        coeffs = [Fraction(rng.randint(-1000, 1000), rng.randint(1, 50)) for _ in range(8)]
        base = Fraction(rng.randint(-90, 0), 10)
        h = Fraction(1, rng.choice((2, 10, 500)))
        p = Poly(coeffs, base)
        for ell in range(8):
            bound = poly_sup_bound(p, h, ell)
            d = p.derivative(ell)
            for k in range(25):
                s = base + h * Fraction(rng.randrange(10**6 + 1), 10**6)
                assert abs(d(s)) <= bound


def test_antiderivative_then_derivative_is_identity():
    rng = random.Random(5)
    for _ in range(100):
        coeffs = tuple(Fraction(rng.randint(-99, 99), rng.randint(1, 99)) for _ in range(7))
        p = Poly(coeffs, Fraction(rng.randint(-9, 0)))
        q = p.antiderivative(Fraction(rng.randint(-5, 5), 3))
        assert q.derivative().coeffs == p.coeffs
        assert q(q.base) == q.coeffs[0]


def test_shifted_expansion_agrees():
    p = Poly((Fraction(1, 3), 2, -1, Fraction(5, 7)), Fraction(-1, 2))
    q = p.shifted(Fraction(1, 4))
    for s in (Fraction(-2), Fraction(0), Fraction(7, 9)):
        assert p(s) == q(s)


def test_exp_enclosure_examples():
    zero = exp_enclosure(0)
    assert 1 in zero and zero.width <= 2 * REMAINDER_15
    assert float(zero.width) == pytest.approx(6.7e-10, rel=0.01)
    one = exp_enclosure(1)
    with mpmath.workdps(50):
        assert mpf(one.lower) <= mpmath.e <= mpf(one.upper)
        x = Fraction(-9, 8)
        enc = exp_enclosure(x)
        assert mpf(enc.lower) <= mpmath.exp(mpf(x)) <= mpf(enc.upper)
    assert one.upper <= 3
    assert float(enc.lower) == pytest.approx(0.324652, abs=1e-6)


def test_exp_enclosure_domain_and_width():
    for x in (Fraction(3, 2) + Fraction(1, 10**9), Fraction(-8, 5), 2):
        with pytest.raises(DomainError):
            exp_enclosure(x)
    for x in (Fraction(-3, 2), Fraction(5, 4), Fraction(3, 2)):
        assert exp_enclosure(x).width <= 2 * REMAINDER_15


def test_exp_enclosure_sound_against_reference():
    assert exp_enclosure_soundness(2000, seed=2) == []


def test_taylor_exp_examples():
    assert taylor_exp(0) == 1
    assert taylor_exp(1) == sum(Fraction(1, math.factorial(k)) for k in range(15))
    with mpmath.workdps(40):
        assert abs(mpf(taylor_exp(1)) - mpmath.e) < 3e-12
        assert abs(mpf(taylor_exp(Fraction(-3, 2))) - mpmath.exp(-1.5)) <= mpf(REMAINDER_15)


def test_rationalize_examples():
    assert rationalize(0.5, 2) == Fraction(1, 2)
    assert rationalize(1 / 3, 10) == Fraction(1, 3)
    assert rationalize(2438.6, 10) == Fraction(12193, 5)
    with pytest.raises(ValueError):
        rationalize(float("nan"))


def test_quantize_lattice():
    q = quantize(0.1, 2**40)
    assert q.denominator <= 2**40 and (2**40) % q.denominator == 0
    assert abs(float(q) - 0.1) <= 2.0**-41


def test_rational_tokens_round_trip():
    rng = random.Random(9)
    for _ in range(1000):
        q = Fraction(rng.randint(-10**20, 10**20), rng.randint(1, 10**20))
        assert parse_rational(format_rational(q)) == q
    assert format_rational(Fraction(-6, 3)) == "-2"
    for bad in ("2/4", "1/1", " 1", "1/-2", "+3", "1.5", "", "3/0", "01"):
        with pytest.raises(ValueError):
            parse_rational(bad)
