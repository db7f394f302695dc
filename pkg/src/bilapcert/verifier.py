"""Exact verification of the sub/supersolution and stability inequalities.

No floating-point arithmetic is used anywhere in this module. On each piece
[y_j, y_j + h] the inequality is checked at the left ends x_i of m equal
sub-intervals of width tau = h/m by a second-order Taylor bound

    f(s) <= f~(x_i) + |f~'(x_i)| tau + M tau^2 / 2 + E1 + E2 tau

where f~ replaces e^w by its degree-14 Taylor polynomial, M bounds |f''| on
the piece and E1, E2 absorb the Taylor remainders. The lower-bound checks use
the sign-mirrored form.

Inner loops run on integers: every derivative of a piece at x_i is an integer
over the common denominator E = D * q^7 (D the lcm of the piece's
coefficient denominators, tau = p/q), so a whole sub-interval bound reduces to
a handful of big-integer products and one sign test.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .builder import PiecewisePoly, taylor_coefficient
from .exact import (
    FACTORIALS,
    REMAINDER_14,
    REMAINDER_15,
    Poly,
    exp_enclosure,
    falling_factorial,
    poly_sup_bound,
)
from .params import DimensionParams
from .solver import OperatorL

EXP_BOUND = Fraction(3)  # e^w <= e <= 3 once -3/2 <= w <= 1 is certified; pieces tighten it
RANGE_LOW = Fraction(-3, 2)
RANGE_HIGH = Fraction(1)
_F14 = FACTORIALS[14]
_TAYLOR_WEIGHTS = tuple(_F14 // FACTORIALS[k] for k in range(15))
_EXP_GRAIN = 2**20

Location = Optional[tuple[int, int]]


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one hypothesis check.

    ``worst_margin`` is the extreme value of the certified bound: the largest
    majorant for ``sense == "<="`` checks, the smallest minorant for ``">="``.
    Locations are (piece index, sub-interval index); piece -1 is the tail.
    """

    name: str
    passed: bool
    sense: str
    worst_margin: Fraction
    worst_location: Location = None
    first_violation: Location = None
    subdiv: Optional[int] = None
    scope: Optional[tuple[int, int]] = None
    note: str = ""

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def margin_is_safe(self) -> bool:
        if self.sense == "<=":
            return self.worst_margin <= 0
        return self.worst_margin >= 0

    def __bool__(self):
        return self.passed


def skipped(name: str, reason: str) -> CheckResult:
    return CheckResult(name, False, ">=", Fraction(0), note=f"skipped: {reason}")


# --- per-piece integer compilation -------------------------------------------------


def _scale(coeffs: Sequence[Fraction], D: int) -> list[int]:
    return [(a * D).numerator for a in coeffs]


def _scaled_derivatives(A: Sequence[int], tp: int, tq: int, max_ell: int) -> list[list[int]]:
    """Integer polynomials in the sub-point index i: E * w^(ell)(i tau) = sum_j c[ell][j] i^j."""
    deg = len(A) - 1
    tp_pow = [tp**j for j in range(deg + 1)]
    tq_pow = [tq**j for j in range(deg + 1)]
    out = []
    for ell in range(max_ell + 1):
        out.append([
            falling_factorial(j + ell, ell) * A[j + ell] * tp_pow[j] * tq_pow[deg - j]
            for j in range(deg + 1 - ell)
        ])
    return out


def _horner(c: Sequence[int], i: int) -> int:
    if i == 0:
        return c[0]
    acc = 0
    for x in reversed(c):
        acc = acc * i + x
    return acc


def _taylor_scaled(X: int, Epow: Sequence[int]) -> int:
    """14! E^14 T14(X/E) as an integer."""
    acc = _TAYLOR_WEIGHTS[14]
    for k in range(13, -1, -1):
        acc = acc * X + _TAYLOR_WEIGHTS[k] * Epow[14 - k]
    return acc


def sup_bounds(coeffs: Sequence[Fraction], h: Fraction, upto: int = 7) -> list[Fraction]:
    p = Poly(coeffs)
    return [poly_sup_bound(p, h, ell) for ell in range(upto + 1)]


def _tau(h: Fraction, m: int) -> Fraction:
    return h / m


def piece_exp_bound(coeffs: Sequence[Fraction], h: Fraction, cap: Fraction = EXP_BOUND) -> Fraction:
    """Upper bound of e^w on one piece, never above ``cap``.

    Uses w <= a0 + sum |a_i| h^i and monotonicity of exp; the enclosure is
    rounded up to a multiple of 2^-20 so the bound stays a short rational.
    """
    top = coeffs[0] + sum((abs(a) * h**i for i, a in enumerate(coeffs) if i), Fraction(0))
    if top > RANGE_HIGH:
        return cap
    upper = exp_enclosure(max(top, RANGE_LOW)).upper
    rounded = Fraction(math.ceil(upper * _EXP_GRAIN), _EXP_GRAIN)
    return min(cap, rounded)


# --- w inequalities ---------------------------------------------------------------


def w_curvature_bound(B: Sequence[Fraction], N: int, Lam: Fraction, exp_bound: Fraction = EXP_BOUND) -> Fraction:
    """M >= |f''| with f'' = L w'' - Lam e^w ((w')^2 + w'')."""
    op = OperatorL(N)
    lin = B[6] + abs(op.c3) * B[5] + abs(op.c2) * B[4] + abs(op.c1) * B[3]
    return lin + Lam * exp_bound * (B[1] ** 2 + B[2])


def _w_piece(task) -> tuple:
    """Scan one piece; returns (j, worst numerator, denominator, worst i, first failing i)."""
    j, coeffs, N, h, m, Lam, upper, exp_bound = task
    op = OperatorL(N)
    tau = _tau(h, m)
    tp, tq = tau.numerator, tau.denominator
    B = sup_bounds(coeffs, h)
    M = w_curvature_bound(B, N, Lam, piece_exp_bound(coeffs, h, exp_bound))
    E1 = Lam * REMAINDER_15
    E2 = Lam * REMAINDER_14 * B[1]
    C = M * tau * tau / 2 + E1 + E2 * tau
    D = math.lcm(*(a.denominator for a in coeffs))
    A = _scale(coeffs, D)
    W = _scaled_derivatives(A, tp, tq, 5)
    E = D * tq**7
    Epow = [E**k for k in range(16)]
    Ln, Ld = Lam.numerator, Lam.denominator
    Kc = op.K * E
    c3, c2, c1 = op.c3, op.c2, op.c1
    sc = Ld * _F14 * Epow[14]
    Z = sc * E  # f~ = F/Z, f~' = F'/Z
    Cn, Cd = C.numerator, C.denominator
    offset = Cn * Z * tq
    den = Z * tq * Cd
    worst = None
    worst_i = first_bad = None
    for i in range(m):
        X0, X1, X2, X3, X4, X5 = (_horner(W[ell], i) for ell in range(6))
        S = _taylor_scaled(X0, Epow)
        S13 = S - X0**14
        F = (X4 + c3 * X3 + c2 * X2 + c1 * X1 + Kc) * sc - Ln * S * E
        Fp = (X5 + c3 * X4 + c2 * X3 + c1 * X2) * sc - Ln * S13 * X1
        if upper:
            num = (F * tq + abs(Fp) * tp) * Cd + offset
            bad = num > 0
            better = worst is None or num > worst
        else:
            num = (F * tq - abs(Fp) * tp) * Cd - offset
            bad = num < 0
            better = worst is None or num < worst
        if better:
            worst, worst_i = num, i
        if bad and first_bad is None:
            first_bad = i
    return j, worst, den, worst_i, first_bad


def w_subinterval_bound_reference(coeffs, N: int, h: Fraction, m: int, i: int, Lam: Fraction,
                                  upper: bool = True, exp_bound: Fraction = EXP_BOUND) -> Fraction:
    """Plain-Fraction evaluation of the same bound (slow; used as a cross-check)."""
    from .exact import taylor_exp

    op = OperatorL(N)
    tau = _tau(h, m)
    t = i * tau
    d = [math.factorial(ell) * taylor_coefficient(coeffs, t, ell) for ell in range(6)]
    B = sup_bounds(coeffs, h)
    M = w_curvature_bound(B, N, Lam, piece_exp_bound(coeffs, h, exp_bound))
    ft = d[4] + op.c3 * d[3] + op.c2 * d[2] + op.c1 * d[1] + op.K - Lam * taylor_exp(d[0])
    fpt = d[5] + op.c3 * d[4] + op.c2 * d[3] + op.c1 * d[2] - Lam * taylor_exp(d[0], 13) * d[1]
    rest = M * tau * tau / 2 + Lam * REMAINDER_15 + Lam * REMAINDER_14 * B[1] * tau
    if upper:
        return ft + abs(fpt) * tau + rest
    return ft - abs(fpt) * tau - rest


# --- psi inequalities -------------------------------------------------------------


def stability_curvature_bound(P: Sequence[Fraction], B: Sequence[Fraction], N: int, alpha: Fraction,
                              beta: Fraction, exp_bound: Fraction = EXP_BOUND) -> Fraction:
    """M >= |g''| for g = T_alpha psi - beta e^w psi.

    g'' = T_alpha psi'' - beta e^w ((w')^2 psi + w'' psi + 2 w' psi' + psi'').
    """
    d3, d2, d1, d0 = OperatorL(N).conjugated(alpha)
    lin = P[6] + abs(d3) * P[5] + abs(d2) * P[4] + abs(d1) * P[3] + abs(d0) * P[2]
    return lin + beta * exp_bound * ((B[1] ** 2 + B[2]) * P[0] + 2 * B[1] * P[1] + P[2])


def _stability_piece(task) -> tuple:
    j, wc, pc, N, h, m, alpha, beta, exp_bound = task
    tau = _tau(h, m)
    tp, tq = tau.numerator, tau.denominator
    B = sup_bounds(wc, h, 2)
    P = sup_bounds(pc, h)
    M = stability_curvature_bound(P, B, N, alpha, beta, piece_exp_bound(wc, h, exp_bound))
    E1 = beta * REMAINDER_15 * P[0]
    E2 = beta * (REMAINDER_14 * B[1] * P[0] + REMAINDER_15 * P[1])
    C = M * tau * tau / 2 + E1 + E2 * tau
    D = math.lcm(*(a.denominator for a in wc), *(a.denominator for a in pc))
    W = _scaled_derivatives(_scale(wc, D), tp, tq, 1)
    Y = _scaled_derivatives(_scale(pc, D), tp, tq, 5)
    E = D * tq**7
    Epow = [E**k for k in range(17)]
    d3, d2, d1, d0 = OperatorL(N).conjugated(alpha)
    dd = math.lcm(d3.denominator, d2.denominator, d1.denominator, d0.denominator)
    dn3, dn2, dn1, dn0 = ((x * dd).numerator for x in (d3, d2, d1, d0))
    bn, bd = beta.numerator, beta.denominator
    s15 = bd * _F14 * Epow[15]
    s14 = bd * _F14 * Epow[14]
    Z = dd * bd * _F14 * Epow[15]  # g~ = G/Z, g~' = G'/(Z E)
    Cn, Cd = C.numerator, C.denominator
    offset = Cn * Z * E * tq
    den = Z * E * tq * Cd
    worst = None
    worst_i = first_bad = None
    for i in range(m):
        X0, X1 = _horner(W[0], i), _horner(W[1], i)
        Y0, Y1, Y2, Y3, Y4, Y5 = (_horner(Y[ell], i) for ell in range(6))
        S = _taylor_scaled(X0, Epow)
        S13 = S - X0**14
        G = (dd * Y4 + dn3 * Y3 + dn2 * Y2 + dn1 * Y1 + dn0 * Y0) * s14 - bn * dd * S * Y0
        Gp = (dd * Y5 + dn3 * Y4 + dn2 * Y3 + dn1 * Y2 + dn0 * Y1) * s15 - bn * dd * (S13 * X1 * Y0 + S * Y1 * E)
        num = (G * E * tq - abs(Gp) * tp) * Cd - offset
        if worst is None or num < worst:
            worst, worst_i = num, i
        if num < 0 and first_bad is None:
            first_bad = i
    return j, worst, den, worst_i, first_bad


def stability_subinterval_bound_reference(wc, pc, N: int, h: Fraction, m: int, i: int, alpha: Fraction,
                                          beta: Fraction, exp_bound: Fraction = EXP_BOUND) -> Fraction:
    from .exact import taylor_exp

    tau = _tau(h, m)
    t = i * tau
    w = [math.factorial(ell) * taylor_coefficient(wc, t, ell) for ell in range(2)]
    p = [math.factorial(ell) * taylor_coefficient(pc, t, ell) for ell in range(6)]
    d3, d2, d1, d0 = OperatorL(N).conjugated(alpha)
    B = sup_bounds(wc, h, 2)
    P = sup_bounds(pc, h)
    M = stability_curvature_bound(P, B, N, alpha, beta, piece_exp_bound(wc, h, exp_bound))
    T14, T13 = taylor_exp(w[0]), taylor_exp(w[0], 13)
    g = p[4] + d3 * p[3] + d2 * p[2] + d1 * p[1] + d0 * p[0] - beta * T14 * p[0]
    gp = p[5] + d3 * p[4] + d2 * p[3] + d1 * p[2] + d0 * p[1] - beta * (T13 * w[1] * p[0] + T14 * p[1])
    rest = (M * tau * tau / 2 + beta * REMAINDER_15 * P[0]
            + beta * (REMAINDER_14 * B[1] * P[0] + REMAINDER_15 * P[1]) * tau)
    return g - abs(gp) * tau - rest


def _psi_positive_piece(task) -> tuple:
    j, pc, h, m, anchor_slope = task
    tau = _tau(h, m)
    tp, tq = tau.numerator, tau.denominator
    M = poly_sup_bound(Poly(pc), h, 2)
    C = M * tau * tau / 2
    D = math.lcm(*(a.denominator for a in pc))
    Y = _scaled_derivatives(_scale(pc, D), tp, tq, 1)
    E = D * tq**7
    Cn, Cd = C.numerator, C.denominator
    den = E * tq * Cd
    lattice = m - 1 if anchor_slope is not None else m
    worst = None
    worst_i = first_bad = None
    for i in range(lattice):
        Y0, Y1 = _horner(Y[0], i), _horner(Y[1], i)
        num = (Y0 * tq - abs(Y1) * tp) * Cd - Cn * E * tq
        if worst is None or num < worst:
            worst, worst_i = num, i
        if num < 0 and first_bad is None:
            first_bad = i
    value = None if worst is None else Fraction(worst, den)
    if anchor_slope is not None:
        # psi(0) = 0 on the last sub-interval: psi(-t) >= t (-psi'(0) - M t/2), 0 <= t <= tau
        anchored = tau * (-anchor_slope - M * tau / 2)
        if value is None or anchored < value:
            value, worst_i = anchored, m - 1
        if anchored < 0 and first_bad is None:
            first_bad = m - 1
    return j, value.numerator, value.denominator, worst_i, first_bad


# --- scheduling -------------------------------------------------------------------


def _run(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (jobs * 8))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _reduce(name: str, results: Iterable[tuple], sense: str, m: int, scope, note: str = "") -> CheckResult:
    worst = None
    worst_loc = first_loc = None
    for j, num, den, wi, bad in sorted(results, key=lambda r: r[0]):
        value = Fraction(num, den)
        if worst is None or (value > worst if sense == "<=" else value < worst):
            worst, worst_loc = value, (j, wi)
        if bad is not None and first_loc is None:
            first_loc = (j, bad)
    return CheckResult(name, first_loc is None, sense, worst, worst_loc, first_loc, m, scope, note)


def _scope(p: PiecewisePoly, pieces) -> range:
    if pieces is None:
        return range(p.grid.n)
    r = range(*pieces) if isinstance(pieces, tuple) else pieces
    if r.start < 0 or r.stop > p.grid.n or r.step != 1 or len(r) == 0:
        raise ValueError(f"piece scope {r} outside 0..{p.grid.n}")
    return r


def _scope_tuple(r: range, p: PiecewisePoly):
    return None if (r.start == 0 and r.stop == p.grid.n) else (r.start, r.stop)


# --- public checks ----------------------------------------------------------------


def _w_inequality(name, w, params, upper, m, jobs, pieces, exp_bound):
    Lam = params.lam + params.eps0 if upper else params.lam - params.eps0
    r = _scope(w, pieces)
    h = w.grid.h
    tasks = [(j, w.pieces[j], params.N, h, m, Lam, upper, exp_bound) for j in r]
    return _reduce(name, _run(_w_piece, tasks, jobs), "<=" if upper else ">=", m, _scope_tuple(r, w))


def verify_subsolution(w: PiecewisePoly, params: DimensionParams, m: Optional[int] = None, jobs: int = 1,
                       pieces=None, exp_bound: Fraction = EXP_BOUND) -> CheckResult:
    """L w + 8(N-2)(N-4) - (lambda + eps0) e^w <= 0 on [x0, 0]."""
    return _w_inequality("subsolution", w, params, True, m or params.m, jobs, pieces, exp_bound)


def verify_supersolution(w: PiecewisePoly, params: DimensionParams, m: Optional[int] = None, jobs: int = 1,
                         pieces=None, exp_bound: Fraction = EXP_BOUND) -> CheckResult:
    """L w + 8(N-2)(N-4) - (lambda - eps0) e^w >= 0 on [x0, 0]."""
    return _w_inequality("supersolution", w, params, False, m or params.m, jobs, pieces, exp_bound)


def verify_tail(w: PiecewisePoly, params: DimensionParams) -> CheckResult:
    """Both inequalities on s <= x0, where w is constant and L w = 0."""
    K = OperatorL(params.N).K
    enc = exp_enclosure(w.tail)
    sub = (params.lam + params.eps0) * enc.lower - K  # want K - (lam+eps0) e^tail <= 0
    sup = K - (params.lam - params.eps0) * enc.upper  # want >= 0
    margin = min(sub, sup)
    return CheckResult("tail", margin >= 0, ">=", margin, (-1, 0))


def verify_range(w: PiecewisePoly) -> CheckResult:
    """-3/2 <= w <= 1 everywhere, from |w(s) - a0| <= sum_{i>=1} |a_i| h^i per piece."""
    h = w.grid.h
    hp = [h**i for i in range(8)]
    worst = min(w.tail - RANGE_LOW, RANGE_HIGH - w.tail)
    worst_loc = (-1, 0)
    first = None if worst >= 0 else (-1, 0)
    for j, c in enumerate(w.pieces):
        spread = sum((abs(c[i]) * hp[i] for i in range(1, 8)), Fraction(0))
        margin = min(c[0] - spread - RANGE_LOW, RANGE_HIGH - c[0] - spread)
        if margin < worst:
            worst, worst_loc = margin, (j, 0)
        if margin < 0 and first is None:
            first = (j, 0)
    return CheckResult("range", first is None, ">=", worst, worst_loc, first)


def verify_boundary(w: PiecewisePoly, params: DimensionParams) -> CheckResult:
    """|w(0)| <= eps and |w'(0) - 4| <= eps."""
    value = w.value_at_zero(0)
    slope = w.value_at_zero(1)
    margin = min(params.eps - abs(value), params.eps - abs(slope - 4))
    return CheckResult("boundary", margin >= 0, ">=", margin, (w.grid.n - 1, 0))


def verify_psi_positive(psi: PiecewisePoly, params: DimensionParams, m: Optional[int] = None, jobs: int = 1,
                        pieces=None) -> CheckResult:
    """psi >= 0 on (-inf, 0] and psi(x0) > 0.

    The sub-interval ending at s = 0 uses the bound anchored at the right end,
    where psi(0) = 0: psi(-t) >= t (-psi'(0) - M t/2).
    """
    m = m or params.m
    r = _scope(psi, pieces)
    h = psi.grid.h
    n = psi.grid.n
    slope = psi.value_at_zero(1) if psi.value_at_zero(0) == 0 else None
    tasks = [(j, psi.pieces[j], h, m, slope if j == n - 1 else None) for j in r]
    res = _reduce("psi_positive", _run(_psi_positive_piece, tasks, jobs), ">=", m, _scope_tuple(r, psi))
    if psi.tail <= 0:
        return CheckResult(res.name, False, ">=", min(res.worst_margin, psi.tail), (-1, 0), (-1, 0), m,
                           res.scope, "psi(x0) must be > 0")
    return res


def verify_stability(psi: PiecewisePoly, w: PiecewisePoly, params: DimensionParams, m: Optional[int] = None,
                     jobs: int = 1, pieces=None, exp_bound: Fraction = EXP_BOUND) -> CheckResult:
    """T_alpha psi - beta e^w psi >= 0 on [x0, 0]; the tail is covered by verify_alpha."""
    if psi.grid != w.grid:
        raise ValueError("psi and w must share a grid")
    m = m or params.m
    r = _scope(psi, pieces)
    h = psi.grid.h
    tasks = [(j, w.pieces[j], psi.pieces[j], params.N, h, m, params.alpha, params.beta, exp_bound) for j in r]
    return _reduce("stability", _run(_stability_piece, tasks, jobs), ">=", m, _scope_tuple(r, psi))


def verify_alpha(params: DimensionParams, w: PiecewisePoly) -> CheckResult:
    """0 < alpha < (N-4)/2 and P_N(alpha) >= beta * e^{tail} (upper enclosure)."""
    N, alpha = params.N, params.alpha
    quartic = OperatorL(N).conjugated(alpha)[3]
    margin = quartic - params.beta * exp_enclosure(w.tail).upper
    inside = 0 < alpha < Fraction(N - 4, 2)
    if not inside:
        gap = min(alpha, Fraction(N - 4, 2) - alpha)
        return CheckResult("alpha", False, ">=", min(margin, gap), (-1, 0), (-1, 0),
                           note="alpha must lie strictly inside (0, (N-4)/2)")
    return CheckResult("alpha", margin >= 0, ">=", margin, (-1, 0))


def verify_psi_slope(psi: PiecewisePoly) -> CheckResult:
    """psi(0) = 0 exactly and psi'(0) <= 0."""
    value = psi.value_at_zero(0)
    slope = psi.value_at_zero(1)
    if value != 0:
        return CheckResult("psi_slope", False, ">=", -abs(value), (psi.grid.n - 1, 0), (psi.grid.n - 1, 0),
                           note="psi(0) must vanish exactly")
    return CheckResult("psi_slope", slope <= 0, ">=", -slope, (psi.grid.n - 1, 0))


CHECK_ORDER = (
    "range", "boundary", "tail", "subsolution", "supersolution",
    "psi_positive", "stability", "alpha", "psi_slope",
)


def run_all_checks(w: PiecewisePoly, psi: PiecewisePoly, params: DimensionParams, jobs: int = 1,
                   m: Optional[int] = None, pieces=None) -> list[CheckResult]:
    """Every hypothesis check in dependency order; later checks are skipped once one fails."""
    runners = {
        "range": lambda: verify_range(w),
        "boundary": lambda: verify_boundary(w, params),
        "tail": lambda: verify_tail(w, params),
        "subsolution": lambda: verify_subsolution(w, params, m, jobs, pieces),
        "supersolution": lambda: verify_supersolution(w, params, m, jobs, pieces),
        "psi_positive": lambda: verify_psi_positive(psi, params, m, jobs, pieces),
        "stability": lambda: verify_stability(psi, w, params, m, jobs, pieces),
        "alpha": lambda: verify_alpha(params, w),
        "psi_slope": lambda: verify_psi_slope(psi),
    }
    out = []
    failed = None
    for name in CHECK_ORDER:
        if failed is not None:
            out.append(skipped(name, f"{failed} failed"))
            continue
        res = runners[name]()
        out.append(res)
        if not res.passed:
            failed = name
    return out
