"""Special functions and 1-D/N-D numeric primitives shared by all rate engines.

Everything here is a pure function of its arguments and safe to call
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.stats import qmc

__all__ = [
    "Bracket",
    "OptimResult",
    "DomainError",
    "NoSignChangeError",
    "NonFiniteIntegrandError",
    "exp_integral_e1",
    "lambert_w_m1",
    "find_root",
    "maximize_scalar",
    "maximize_nd",
    "integrate",
]

_EULER_GAMMA = 0.5772156649015328606


class DomainError(ValueError):
    """Argument outside the mathematical domain of a special function."""


class NoSignChangeError(ValueError):
    """Root bracket does not enclose a sign change."""


class NonFiniteIntegrandError(ValueError):
    """Integrand returned nan/inf inside the integration interval."""


@dataclass(frozen=True)
class Bracket:
    """Closed search interval with an absolute tolerance on the argument."""

    lo: float
    hi: float
    tol: float = 1e-10

    def __post_init__(self) -> None:
        if not (self.lo < self.hi):
            raise ValueError(f"bracket requires lo < hi, got [{self.lo}, {self.hi}]")
        if not (self.tol > 0):
            raise ValueError("bracket tolerance must be positive")


@dataclass
class OptimResult:
    argmax: np.ndarray
    value: float
    evaluations: int = 1
    converged: bool = True

    def __post_init__(self) -> None:
        self.argmax = np.atleast_1d(np.asarray(self.argmax, dtype=float))


def exp_integral_e1(x: float) -> float:
    """Exponential integral E1(x) = int_x^inf exp(-t)/t dt for x > 0.

    Power series below 1, modified Lentz continued fraction above; relative
    error is well under 1e-10 on both branches.
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"exp_integral_e1 requires x > 0, got {x}")
    if x < 1.0:
        # E1(x) = -gamma - ln x + sum_{k>=1} (-1)^(k+1) x^k / (k k!)
        total = -_EULER_GAMMA - math.log(x)
        term = 1.0
        for k in range(1, 60):
            term *= -x / k
            contribution = -term / k
            total += contribution
            if abs(contribution) < 1e-18 * max(abs(total), 1e-300):
                break
        return total
    # Continued fraction e^-x / (x + 1 - 1/(x + 3 - 4/(x + 5 - 9/(...))))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for k in range(1, 200):
        a = -(k * k)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        if c == 0.0:
            c = tiny
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return math.exp(-x) * h


def lambert_w_m1(x: float) -> float:
    """Lower branch of the Lambert W function on [-1/e, 0).

    Returns W <= -1 with W * exp(W) = x, refined by Halley iteration to an
    absolute residual below 1e-12.
    """
    x = float(x)
    branch_point = -math.exp(-1.0)
    if x < branch_point - 1e-15 or x >= 0.0:
        raise DomainError(f"lambert_w_m1 requires -1/e <= x < 0, got {x}")
    if x <= branch_point:
        return -1.0
    if x > -0.3:
        # asymptotic guess for the tail toward zero
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2
    else:
        # series around the branch point, lower-branch sign of p
        p = -math.sqrt(2.0 * (1.0 + math.e * x))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    for _ in range(60):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) < 1e-16 * (1.0 + abs(w)):
            break
    return w


def find_root(f: Callable[[float], float], b: Bracket) -> float:
    """Root of a continuous scalar function inside a sign-change bracket."""
    flo = f(b.lo)
    fhi = f(b.hi)
    if flo == 0.0:
        return b.lo
    if fhi == 0.0:
        return b.hi
    if flo * fhi > 0.0:
        raise NoSignChangeError(
            f"f({b.lo}) = {flo} and f({b.hi}) = {fhi} have the same sign"
        )
    return float(optimize.brentq(f, b.lo, b.hi, xtol=b.tol, rtol=8.9e-16))


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_COARSE_POINTS = 512


def maximize_scalar(
    f: Callable[[float], float], b: Bracket, coarse: int = _COARSE_POINTS
) -> OptimResult:
    """Global-ish scalar maximization: coarse scan, then golden-section.

    Several throughput objectives are multimodal near the origin, so the
    coarse scan locates the dominant bump before local refinement.
    """
    xs = np.linspace(b.lo, b.hi, coarse)
    vals = np.array([f(x) for x in xs])
    evals = coarse
    k = int(np.nanargmax(vals))
    lo = xs[max(k - 1, 0)]
    hi = xs[min(k + 1, coarse - 1)]

    a, c = lo, hi
    x1 = c - _INV_PHI * (c - a)
    x2 = a + _INV_PHI * (c - a)
    f1, f2 = f(x1), f(x2)
    evals += 2
    while c - a > b.tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (c - a)
            f2 = f(x2)
        else:
            c, x2, f2 = x2, x1, f1
            x1 = c - _INV_PHI * (c - a)
            f1 = f(x1)
        evals += 1
        if evals > coarse + 400:
            break
    xbest = x1 if f1 >= f2 else x2
    fbest = max(f1, f2)
    # never return less than the best scanned point
    if vals[k] > fbest:
        xbest, fbest = xs[k], vals[k]
    return OptimResult(argmax=np.array([xbest]), value=float(fbest), evaluations=evals)


def maximize_nd(
    f: Callable[[np.ndarray], float],
    x0: Sequence[float],
    bounds: Sequence[Bracket],
    starts: int = 8,
    maxfev: int = 400,
) -> OptimResult:
    """Derivative-free bounded maximization with deterministic multi-start.

    Runs Nelder-Mead from x0 plus Halton points spread over the box; the
    layer-allocation objectives have plateaus that a single start tends to
    stall on.  The returned value never falls below f(x0).
    """
    x0 = np.asarray(x0, dtype=float)
    lo = np.array([b.lo for b in bounds])
    hi = np.array([b.hi for b in bounds])
    if x0.shape != lo.shape:
        raise ValueError("x0 dimension does not match bounds")
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("x0 violates bounds")

    if len(bounds) == 1:
        inner = maximize_scalar(lambda s: f(np.array([s])), bounds[0])
        if inner.value >= f(x0):
            return inner
        return OptimResult(argmax=x0, value=float(f(x0)), evaluations=inner.evaluations + 1)

    points = [x0]
    if starts > 1:
        sampler = qmc.Halton(d=len(bounds), scramble=False, seed=0)
        unit = sampler.random(starts - 1)
        points.extend(lo + u * (hi - lo) for u in unit)

    neg = lambda v: -f(np.clip(v, lo, hi))
    best_x, best_v, evals = x0, f(x0), 1
    scipy_bounds = list(zip(lo, hi))
    for p in points:
        res = optimize.minimize(
            neg,
            p,
            method="Nelder-Mead",
            bounds=scipy_bounds,
            options={"maxfev": maxfev, "xatol": 1e-7, "fatol": 1e-10},
        )
        evals += res.nfev
        if -res.fun > best_v:
            best_v = -res.fun
            best_x = np.clip(res.x, lo, hi)
    return OptimResult(argmax=np.asarray(best_x), value=float(best_v), evaluations=evals)


def _simpson(fa: float, fm: float, fb: float, h: float) -> float:
    return h / 6.0 * (fa + 4.0 * fm + fb)


def integrate(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10
) -> float:
    """Adaptive Simpson quadrature with absolute error target tol.

    Interval bisection to depth 50; integrands here can be steep near the
    lower boundary but are piecewise smooth.
    """
    if not lo < hi:
        raise ValueError(f"integrate requires lo < hi, got [{lo}, {hi}]")

    def ev(x: float) -> float:
        y = f(x)
        if not math.isfinite(y):
            raise NonFiniteIntegrandError(f"integrand not finite at x = {x}")
        return y

    def recurse(a, b, fa, fm, fb, whole, eps, depth):
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = ev(lm), ev(rm)
        left = _simpson(fa, flm, fm, m - a)
        right = _simpson(fm, frm, fb, b - m)
        if depth >= 50 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(a, m, fa, flm, fm, left, eps / 2.0, depth + 1) + recurse(
            m, b, fm, frm, fb, right, eps / 2.0, depth + 1
        )

    fa, fb = ev(lo), ev(hi)
    fm = ev(0.5 * (lo + hi))
    whole = _simpson(fa, fm, fb, hi - lo)
    return recurse(lo, hi, fa, fm, fb, whole, tol, 0)
