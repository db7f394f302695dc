"""Floating-point generation of candidate profiles.

Nothing in this module is trusted: it produces fourth-derivative samples that
the builder turns into exact piecewise polynomials, and the verifier then
checks those from scratch.

The ODEs are written as first-order systems in y = (v, v', v'', v''') and
discretized by Hermite-Simpson (three-stage Lobatto IIIA) collocation on a
uniform grid; the resulting sparse system is solved by Newton's method.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sparse_linalg
from scipy.optimize import bisect

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DEFAULT_X0 = -9.0
DEFAULT_INTERVALS = 4500


class SolverError(RuntimeError):
    pass


class ContinuationError(SolverError):
    def __init__(self, message: str, last_t: float):
        super().__init__(f"{message} (last successful t = {last_t:g})")
        self.last_t = last_t


@dataclass(frozen=True)
class OperatorL:
    """L w = w'''' + c3 w''' + c2 w'' + c1 w' for the log-radial variable."""

    N: int

    def __post_init__(self):
        if self.N < 5:
            raise ValueError("dimension must be >= 5")

    @property
    def c3(self) -> int:
        return 2 * (self.N - 4)

    @property
    def c2(self) -> int:
        return self.N * self.N - 10 * self.N + 20

    @property
    def c1(self) -> int:
        return -2 * (self.N - 2) * (self.N - 4)

    @property
    def K(self) -> int:
        """8(N-2)(N-4), the constant forcing of the transformed equation."""
        return 8 * (self.N - 2) * (self.N - 4)

    def conjugated(self, alpha):
        """Coefficients (d3, d2, d1, d0) of T_alpha = e^{alpha s} L e^{-alpha s}.

        Works for float or Fraction alpha; d0 is the indicial quartic.
        """
        a, c3, c2, c1 = alpha, self.c3, self.c2, self.c1
        d3 = -4 * a + c3
        d2 = 6 * a**2 - 3 * a * c3 + c2
        d1 = -4 * a**3 + 3 * a**2 * c3 - 2 * a * c2 + c1
        d0 = a**4 - c3 * a**3 + c2 * a**2 - c1 * a
        return d3, d2, d1, d0


@dataclass
class ProfileSamples:
    """Fourth-derivative samples at the n+1 uniform knots of [x0, 0]."""

    kind: str  # "w" or "psi"
    N: int
    x0: float
    n: int
    values: np.ndarray
    lambda_hat: Optional[float] = None
    beta_bar: Optional[float] = None
    alpha_bar: Optional[float] = None
    # nodal (v, v', v'', v''') of the floating solution; not serialized
    state: Optional[np.ndarray] = field(default=None, repr=False)
    residual: Optional[float] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.x0 >= 0:
            raise ValueError("x0 must be negative")
        if self.values.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} samples, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("samples must be finite")

    @property
    def h(self) -> float:
        return -self.x0 / self.n

    @property
    def knots(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n + 1)


class _Collocation:
    """Hermite-Simpson residual/Jacobian for y' = A y + e4 * g(s, y0, p)."""

    def __init__(self, x0: float, n: int, linear: tuple[float, float, float]):
        self.x0 = x0
        self.n = n
        self.h = -x0 / n
        # highest-derivative equation: v'''' = g - l1 v' - l2 v'' - l3 v'''
        self.l1, self.l2, self.l3 = linear

    def _f(self, Y, g):
        f = np.empty_like(Y)
        f[:, 0:3] = Y[:, 1:4]
        f[:, 3] = g - self.l1 * Y[:, 1] - self.l2 * Y[:, 2] - self.l3 * Y[:, 3]
        return f

    def _jac(self, gy):
        m = gy.shape[0]
        J = np.zeros((m, 4, 4))
        J[:, 0, 1] = J[:, 1, 2] = J[:, 2, 3] = 1.0
        J[:, 3, 0] = gy
        J[:, 3, 1] = -self.l1
        J[:, 3, 2] = -self.l2
        J[:, 3, 3] = -self.l3
        return J

    def evaluate(self, Y, g_fn, want_jac=True):
        """g_fn(where, v0) -> (g, dg/dv0, dg/dp); where is 'knots' or 'mid'."""
        h = self.h
        g, gy, gp = g_fn("knots", Y[:, 0])
        f = self._f(Y, g)
        Ym = 0.5 * (Y[:-1] + Y[1:]) + (h / 8) * (f[:-1] - f[1:])
        gm, gym, gpm = g_fn("mid", Ym[:, 0])
        fm = self._f(Ym, gm)
        R = Y[1:] - Y[:-1] - (h / 6) * (f[:-1] + 4 * fm + f[1:])
        if not want_jac:
            return R, None
        eye = np.eye(4)
        J = self._jac(gy)
        Jm = self._jac(gym)
        Ji, Jj = J[:-1], J[1:]
        A = -eye - (h / 6) * (Ji + 4 * np.einsum("kab,kbc->kac", Jm, 0.5 * eye + (h / 8) * Ji))
        B = eye - (h / 6) * (Jj + 4 * np.einsum("kab,kbc->kac", Jm, 0.5 * eye - (h / 8) * Jj))
        blocks = {"A": A, "B": B}
        if gp is not None:
            fp = np.zeros((self.n + 1, 4))
            fp[:, 3] = gp
            fpm = np.zeros((self.n, 4))
            fpm[:, 3] = gpm
            dYm = (h / 8) * (fp[:-1] - fp[1:])
            blocks["p"] = -(h / 6) * (fp[:-1] + 4 * (np.einsum("kab,kb->ka", Jm, dYm) + fpm) + fp[1:])
        return R, blocks

    def sparse_jacobian(self, blocks, bc_rows, extra_unknown: bool):
        n = self.n
        size = 4 * (n + 1) + (1 if extra_unknown else 0)
        k = np.arange(n)
        r = np.broadcast_to((4 * k)[:, None, None] + np.arange(4)[None, :, None], (n, 4, 4))
        c = np.broadcast_to((4 * k)[:, None, None] + np.arange(4)[None, None, :], (n, 4, 4))
        rows = [r.ravel(), r.ravel()]
        cols = [c.ravel(), (c + 4).ravel()]
        vals = [blocks["A"].ravel(), blocks["B"].ravel()]
        if extra_unknown:
            rr = (4 * k)[:, None] + np.arange(4)[None, :]
            rows.append(rr.ravel())
            cols.append(np.full(4 * n, 4 * (n + 1)))
            vals.append(blocks["p"].ravel())
        base = 4 * n
        for i, entries in enumerate(bc_rows):
            for col, val in entries:
                rows.append(np.array([base + i]))
                cols.append(np.array([col]))
                vals.append(np.array([val], dtype=float))
        return sparse.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size),
        )


def _branch_system(N: int, x0: float, n: int):
    op = OperatorL(N)
    col = _Collocation(x0, n, (op.c1, op.c2, op.c3))
    last = 4 * n  # first state index of the node at s = 0

    def residual(z, t, want_jac=True):
        Y = z[:-1].reshape(n + 1, 4)
        lam = z[-1]

        def g_fn(where, v0):
            ev = np.exp(v0)
            return lam * ev - op.K, lam * ev, ev

        R, blocks = col.evaluate(Y, g_fn, want_jac)
        bc = np.array([
            Y[-1, 0],
            Y[-1, 1] - t,
            Y[0, 0] - math.log(op.K / lam),
            Y[0, 2],
            Y[0, 3],
        ])
        res = np.concatenate([R.ravel(), bc])
        if not want_jac:
            return res, None
        bc_rows = [
            [(last, 1.0)],
            [(last + 1, 1.0)],
            [(0, 1.0), (4 * (n + 1), 1.0 / lam)],
            [(2, 1.0)],
            [(3, 1.0)],
        ]
        return res, col.sparse_jacobian(blocks, bc_rows, extra_unknown=True)

    return op, residual


def _newton(residual, z, t, tol, max_iter=12):
    for _ in range(max_iter):
        res, jac = residual(z, t)
        if not np.all(np.isfinite(res)):
            return None, math.inf
        if np.max(np.abs(res)) < tol:
            return z, float(np.max(np.abs(res)))
        try:
            dz = sparse_linalg.spsolve(jac, -res)
        except RuntimeError:
            return None, math.inf
        if not np.all(np.isfinite(dz)):
            return None, math.inf
        z = z + dz
    res, _ = residual(z, t, want_jac=False)
    err = float(np.max(np.abs(res)))
    return (z, err) if err < tol else (None, err)


def solve_branch(
    N: int,
    x0: float = DEFAULT_X0,
    grid_n: int = DEFAULT_INTERVALS,
    *,
    step: float = 0.1,
    min_step: float = 1e-4,
    tol: float = RESIDUAL_TOL,
) -> ProfileSamples:
    """Follow the branch w'(0) = t from the trivial solution at t = 0 to t = 4.

    At t = 0 the solution is w = 0 with lambda = 8(N-2)(N-4). Each step is a
    Newton solve started from the previous point; the step halves on failure.
    """
    if not 13 <= N <= 31:
        raise ValueError(f"dimension {N} outside 13..31")
    if x0 >= 0:
        raise ValueError("x0 must be negative")
    if grid_n < 100:
        raise ValueError("grid_n must be >= 100")
    op, residual = _branch_system(N, x0, grid_n)
    z = np.zeros(4 * (grid_n + 1) + 1)
    z[-1] = op.K
    t, dt = 0.0, step
    while t < 4.0:
        t_next = min(4.0, t + dt)
        z_next, err = _newton(residual, z, t_next, tol)
        if z_next is None:
            dt /= 2
            log.debug("N=%d: Newton failed at t=%g, step -> %g", N, t_next, dt)
            if dt < min_step:
                raise ContinuationError(f"continuation stalled for N={N}", t)
            continue
        z, t = z_next, t_next
        dt = min(step, 2 * dt)
    res, _ = residual(z, 4.0, want_jac=False)
    Y = z[:-1].reshape(grid_n + 1, 4)
    lam = float(z[-1])
    fourth = lam * np.exp(Y[:, 0]) - op.K - op.c3 * Y[:, 3] - op.c2 * Y[:, 2] - op.c1 * Y[:, 1]
    return ProfileSamples(
        "w", N, float(x0), grid_n, fourth,
        lambda_hat=lam, state=Y.copy(), residual=float(np.max(np.abs(res))),
    )


def indicial_poly(N: int) -> list[int]:
    """Integer coefficients of P_N, highest degree first."""
    op = OperatorL(N)
    return [1, -op.c3, op.c2, -op.c1, 0]


def indicial_value(N: int, alpha):
    return OperatorL(N).conjugated(alpha)[3]


def indicial_roots(N: int, rhs: float) -> list[float]:
    """Real roots of P_N(alpha) - rhs, ascending."""
    if N < 5:
        raise ValueError("dimension must be >= 5")
    coeffs = np.array(indicial_poly(N), dtype=float)
    coeffs[-1] -= rhs
    dcoeffs = np.polyder(coeffs)
    roots = []
    for z in np.roots(coeffs):
        if abs(z.imag) > 1e-7 * max(1.0, abs(z)):
            continue
        x = z.real
        for _ in range(50):
            d = np.polyval(dcoeffs, x)
            if d == 0:
                break
            step = np.polyval(coeffs, x) / d
            x -= step
            if abs(step) <= 1e-15 * max(1.0, abs(x)):
                break
        roots.append(float(x))
    return sorted(roots)


def admissible_alpha(N: int, rhs: float) -> float:
    """The root of P_N(alpha) = rhs in (0, (N-4)/2), by bisection."""
    upper = (N - 4) / 2
    P = lambda a: indicial_value(N, a) - rhs  # noqa: E731
    if not (P(0.0) < 0 < P(upper)):
        raise SolverError(f"no admissible root: rhs={rhs} not in (0, P_N((N-4)/2))")
    return bisect(P, 0.0, upper, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def solve_eigen_profile(
    N: int,
    w,
    beta_bar,
    alpha_bar: Optional[float] = None,
    forcing: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    *,
    tol: float = RESIDUAL_TOL,
) -> ProfileSamples:
    """Solve T_abar psi - beta_bar e^w psi = f on (x0, 0).

    Conditions: psi(x0) = 1, psi''(x0) = psi'''(x0) = 0, psi(0) = 0. ``w`` is a
    built profile (its float evaluation supplies e^w); ``forcing`` defaults to
    the constant 1.
    """
    x0 = float(w.grid.x0)
    n = w.grid.n
    h = -x0 / n
    beta_bar = float(beta_bar)
    if alpha_bar is None:
        alpha_bar = admissible_alpha(N, beta_bar * math.exp(float(w.tail)))
    if forcing is None:
        forcing = lambda s: np.ones_like(s)  # noqa: E731
    knots = x0 + h * np.arange(n + 1)
    mids = knots[:-1] + h / 2
    f_knots = np.asarray(forcing(knots), dtype=float)
    f_mids = np.asarray(forcing(mids), dtype=float)
    if np.any(f_knots < 0) or np.any(f_mids < 0) or not (np.any(f_knots > 0) or np.any(f_mids > 0)):
        raise ValueError("forcing must satisfy f >= 0 and f not identically 0")

    op = OperatorL(N)
    d3, d2, d1, d0 = op.conjugated(alpha_bar)
    ew_knots = np.exp(w.float_at_knots())
    ew_mids = np.exp(w.float_at_midpoints())
    q = {"knots": beta_bar * ew_knots - d0, "mid": beta_bar * ew_mids - d0}
    f = {"knots": f_knots, "mid": f_mids}
    col = _Collocation(x0, n, (d1, d2, d3))

    def g_fn(where, v0):
        return f[where] + q[where] * v0, q[where], None

    Y0 = np.zeros((n + 1, 4))
    R0, blocks = col.evaluate(Y0, g_fn)
    bc_rows = [[(0, 1.0)], [(2, 1.0)], [(3, 1.0)], [(4 * n, 1.0)]]
    jac = col.sparse_jacobian(blocks, bc_rows, extra_unknown=False)
    rhs = -np.concatenate([R0.ravel(), [-1.0, 0.0, 0.0, 0.0]])
    sol = sparse_linalg.spsolve(jac, rhs)
    if not np.all(np.isfinite(sol)):
        raise SolverError("eigen-profile linear system is singular; revisit (alpha_bar, beta_bar)")
    Y = sol.reshape(n + 1, 4)
    # one Newton correction removes the rounding of the first solve
    R, _ = col.evaluate(Y, g_fn, want_jac=False)
    bc = np.array([Y[0, 0] - 1.0, Y[0, 2], Y[0, 3], Y[-1, 0]])
    res = np.concatenate([R.ravel(), bc])
    Y = Y + sparse_linalg.spsolve(jac, -res).reshape(n + 1, 4)
    R, _ = col.evaluate(Y, g_fn, want_jac=False)
    bc = np.array([Y[0, 0] - 1.0, Y[0, 2], Y[0, 3], Y[-1, 0]])
    err = float(np.max(np.abs(np.concatenate([R.ravel(), bc]))))
    if err >= tol:
        raise SolverError(f"eigen-profile residual {err:.3e} exceeds {tol:g}")
    fourth = f_knots + q["knots"] * Y[:, 0] - d1 * Y[:, 1] - d2 * Y[:, 2] - d3 * Y[:, 3]
    return ProfileSamples(
        "psi", N, x0, n, fourth, beta_bar=beta_bar, alpha_bar=float(alpha_bar),
        state=Y, residual=err,
    )


SAMPLES_MAGIC = "BILAP-SAMPLES v1"


def write_samples(samples: ProfileSamples, path) -> None:
    lines = [
        SAMPLES_MAGIC,
        f"kind {samples.kind}",
        f"N {samples.N}",
        f"x0 {samples.x0!r}",
        f"intervals {samples.n}",
    ]
    for key in ("lambda_hat", "beta_bar", "alpha_bar"):
        value = getattr(samples, key)
        if value is not None:
            lines.append(f"{key} {value!r}")
    lines.extend(f"{v!r}" for v in samples.values.tolist())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_samples(path) -> ProfileSamples:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != SAMPLES_MAGIC:
        raise ValueError(f"{path}: not a {SAMPLES_MAGIC} file")
    header = {}
    i = 1
    while i < len(lines) and lines[i].split(" ", 1)[0].isidentifier():
        key, value = lines[i].split(" ", 1)
        header[key] = value
        i += 1
    optional = {k: float(header[k]) for k in ("lambda_hat", "beta_bar", "alpha_bar") if k in header}
    return ProfileSamples(
        header["kind"], int(header["N"]), float(header["x0"]), int(header["intervals"]),
        np.array([float(v) for v in lines[i:]]), **optional,
    )
