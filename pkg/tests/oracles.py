"""Independent high-precision oracles shared by the property tests and acceptance checks."""

import math
import random
from fractions import Fraction

import mpmath

from bilapcert.exact import exp_enclosure
from bilapcert.solver import OperatorL
from bilapcert.verifier import w_subinterval_bound_reference


def mpf(q: Fraction):
    return mpmath.mpf(q.numerator) / q.denominator


def random_rational(rng: random.Random, lo: Fraction, hi: Fraction, bits: int = 40) -> Fraction:
    den = 1 << bits
    return lo + Fraction(rng.randrange(den + 1), den) * (hi - lo)


def exp_enclosure_soundness(count: int, seed: int = 1) -> list:
    """Arguments in [-3/2, 3/2] whose enclosure misses the 50-digit value of e^x."""
    rng = random.Random(seed)
    bad = []
    with mpmath.workdps(50):
        for k in range(count):
            if k < 4:
                x = (Fraction(-3, 2), Fraction(0), Fraction(1), Fraction(3, 2))[k]
            else:
                x = random_rational(rng, Fraction(-3, 2), Fraction(3, 2))
            enc = exp_enclosure(x)
            ref = mpmath.exp(mpf(x))
            if not (mpf(enc.lower) <= ref <= mpf(enc.upper)):
                bad.append(x)
    return bad


def _mp_derivs(coeffs_mp, t, upto):
    """(w, w', ..., w^(upto)) of sum a_i t^i at t, in mpmath."""
    out = []
    for ell in range(upto + 1):
        acc = mpmath.mpf(0)
        for i in range(len(coeffs_mp) - 1, ell - 1, -1):
            acc = acc * t + math.perm(i, ell) * coeffs_mp[i]
        out.append(acc)
    return out


def majorant_domination(w, params, count: int, points: int, seed: int = 7, max_m: int = 4) -> list:
    """Random sub-intervals where dense 30-digit samples of f escape the certified bound.

    f = L w + K - Lam e^w with Lam = lambda + eps0 (upper bound) or lambda - eps0
    (lower bound); each sampled sub-interval alternates between the two.
    """
    rng = random.Random(seed)
    op = OperatorL(params.N)
    h = w.grid.h
    bad = []
    with mpmath.workdps(30):
        for k in range(count):
            upper = k % 2 == 0
            Lam = params.lam + params.eps0 if upper else params.lam - params.eps0
            j = rng.randrange(w.grid.n)
            m = rng.randint(1, max_m)
            i = rng.randrange(m)
            bound = w_subinterval_bound_reference(w.pieces[j], params.N, h, m, i, Lam, upper)
            coeffs = [mpf(a) for a in w.pieces[j]]
            tau = mpf(h / m)
            start = i * tau
            lam_mp = mpf(Lam)
            extreme = None
            for p in range(points):
                t = start + tau * p / (points - 1)
                d = _mp_derivs(coeffs, t, 4)
                f = d[4] + op.c3 * d[3] + op.c2 * d[2] + op.c1 * d[1] + op.K - lam_mp * mpmath.exp(d[0])
                if extreme is None or (f > extreme if upper else f < extreme):
                    extreme = f
            if (upper and extreme > mpf(bound)) or (not upper and extreme < mpf(bound)):
                bad.append((j, m, i, upper))
    return bad
