"""Closed-form upper bounds: cutset, relay-cooperation, and DF-model cutset."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import PowerConfig
from .numerics import Bracket, exp_integral_e1, find_root, integrate, maximize_scalar
from .schemes.common import RateResult

__all__ = [
    "BoundKind",
    "cutset_cubic_root",
    "cutset_throughput",
    "cutset_expected_rate",
    "cutset_expected_rate_quadrature",
    "rc_throughput",
    "rc_threshold_cap",
    "dfub_cutset",
    "dfub_first_hop_quadrature",
]

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
_FIRST_HOP_CONSTANT = 0.1157
_SECOND_HOP_CONSTANT = 0.1296


@dataclass(frozen=True)
class BoundKind:
    tag: str

    _ALLOWED = ("cutset-throughput", "cutset-expected", "rc-throughput", "dfub-cutset")

    def __post_init__(self) -> None:
        if self.tag not in self._ALLOWED:
            raise ValueError(f"unknown bound tag {self.tag!r}")


def cutset_cubic_root(power: float) -> float:
    """Positive root of P s^3 + s^2 - s - 1 = 0 (lower layering boundary).

    Uses the radical form when the discriminant allows and the
    trigonometric three-real-root form otherwise; the cubic has exactly
    one positive root for every positive P.
    """
    a = 0.5 / power - 1.0 / (6.0 * power**2) - 1.0 / (27.0 * power**3)
    b = 1.0 / (3.0 * power) + 1.0 / (9.0 * power**2)
    disc = a * a - b**3
    if disc >= 0.0:
        arg = math.sqrt(disc) + a
        core = math.copysign(abs(arg) ** (1.0 / 3.0), arg)
        root = core + b / core - 1.0 / (3.0 * power)
    else:
        theta = math.acos(a / b**1.5)
        candidates = [
            2.0 * math.sqrt(b) * math.cos((theta - 2.0 * math.pi * k) / 3.0)
            - 1.0 / (3.0 * power)
            for k in range(3)
        ]
        positive = [r for r in candidates if r > 0.0]
        root = min(positive)
    residual = power * root**3 + root**2 - root - 1.0
    if abs(residual) > 1e-8 * max(1.0, power):
        raise ArithmeticError(f"cubic root failed: residual {residual}")
    return root


def cutset_throughput(p: PowerConfig) -> RateResult:
    """min-cut single-layer bound: max_s e^(-s)(1+s) ln(1+Ps)."""
    power = min(p.ps, p.pr)

    def objective(u: float) -> float:
        s = math.exp(u)
        return (1.0 + s) * math.exp(-s) * math.log1p(power * s)

    res = maximize_scalar(objective, Bracket(math.log(1e-6), math.log(20.0), 1e-12))
    s_star = math.exp(res.argmax[0])
    return RateResult(res.value, params={"s": s_star, "power": power},
                      diagnostics={"evaluations": res.evaluations, "method": "closed-form"})


def cutset_expected_rate(p: PowerConfig) -> RateResult:
    """Continuous-layering bound on either cut, in exponential-integral form."""
    power = min(p.ps, p.pr)
    s0 = cutset_cubic_root(power)
    s1 = GOLDEN
    value = (
        3.0 * exp_integral_e1(s0)
        - 3.0 * exp_integral_e1(s1)
        - (s0 - 1.0) * math.exp(-s0)
        + (s1 - 1.0) * math.exp(-s1)
    )
    return RateResult(value, params={"s0": s0, "s1": s1, "power": power},
                      diagnostics={"method": "closed-form"})


def cutset_expected_rate_quadrature(p: PowerConfig, tol: float = 1e-9) -> float:
    """Direct quadrature of the layering integrand, for cross-validation."""
    power = min(p.ps, p.pr)
    s0 = cutset_cubic_root(power)
    return integrate(
        lambda s: math.exp(-s) * (1.0 + s) * (3.0 / s - 1.0), s0, GOLDEN, tol=tol
    )


def rc_threshold_cap(p: PowerConfig) -> float:
    return (
        math.sqrt(p.ps**2 + 4.0 * p.ps * p.pr + 20.0 * p.pr**2) - p.ps + 2.0 * p.pr
    ) / (2.0 * p.ps + 4.0 * p.pr)


def rc_throughput(p: PowerConfig) -> RateResult:
    """Full relay cooperation: a dual-hop channel with a two-antenna relay."""
    ratio = p.ps / p.pr
    s_t = rc_threshold_cap(p)

    def objective(u: float) -> float:
        s = math.exp(u)
        return (1.0 + s) * (1.0 + s * ratio) * math.exp(-s * (1.0 + ratio)) * math.log1p(p.ps * s)

    res = maximize_scalar(objective, Bracket(math.log(s_t) - 14.0, math.log(s_t), 1e-12))
    s_star = math.exp(res.argmax[0])
    return RateResult(res.value, params={"s": s_star, "s_cap": s_t},
                      diagnostics={"evaluations": res.evaluations, "method": "closed-form"})


def _first_hop_boundary(rhs_power: float) -> float:
    """Root of (2 - e^-s) / (2s(1 - e^-s)) = 1 + rhs_power * s."""

    def g(s: float) -> float:
        u = math.exp(-s)
        return (2.0 - u) / (2.0 * s * (1.0 - u)) - (1.0 + rhs_power * s)

    return find_root(g, Bracket(1e-9, 30.0, 1e-13))


def _first_hop_antiderivative(s: float) -> float:
    return (
        4.0 * exp_integral_e1(s)
        - 2.0 * exp_integral_e1(2.0 * s)
        + math.exp(-2.0 * s)
        - 3.0 * math.exp(-s)
        - math.log(1.0 - math.exp(-s))
    )


def dfub_first_hop_quadrature(p: PowerConfig, tol: float = 1e-9) -> float:
    """First-hop layering integral between the exact boundary roots."""
    s_lo = _first_hop_boundary(p.ps)
    s_hi = _first_hop_boundary(0.0)

    def integrand(s: float) -> float:
        u = math.exp(-s)
        return u * (2.0 - u) * (2.0 / s + (2.0 * u - 1.0) / (1.0 - u))

    return integrate(integrand, s_lo, s_hi, tol=tol)


def dfub_cutset(p: PowerConfig) -> RateResult:
    """Cutset bound of the enhanced decode-forward model: min of both hops.

    The additive constants are the published evaluations of the upper
    boundary terms; the quadrature companions quantify their residuals.
    """
    s_lo = _first_hop_boundary(p.ps)
    r1 = _first_hop_antiderivative(s_lo) - _FIRST_HOP_CONSTANT
    s2 = cutset_cubic_root(p.pr)
    r2 = (
        3.0 * exp_integral_e1(s2) - (s2 - 1.0) * math.exp(-s2) - _SECOND_HOP_CONSTANT
    )
    r1_quad = dfub_first_hop_quadrature(p)
    r2_quad = integrate(
        lambda s: math.exp(-s) * (1.0 + s) * (3.0 / s - 1.0), s2, GOLDEN, tol=1e-9
    )
    return RateResult(
        min(r1, r2),
        params={"r1": r1, "r2": r2, "s1": s_lo, "s2": s2},
        diagnostics={
            "method": "closed-form",
            "r1_quadrature": r1_quad,
            "r2_quadrature": r2_quad,
            "r1_residual": r1 - r1_quad,
            "r2_residual": r2 - r2_quad,
        },
    )
