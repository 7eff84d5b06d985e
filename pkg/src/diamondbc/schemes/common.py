"""Shared rate-engine types and the generic broadcast-coding machinery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..gains import GainDistribution
from ..numerics import Bracket, NoSignChangeError, find_root, integrate

__all__ = [
    "RateResult",
    "LayerPlan",
    "RelayAllocation",
    "CfParams",
    "BoundaryNotFoundError",
    "continuous_expected_rate",
    "discrete_broadcast_rate",
    "exact_pair_distribution",
]


class BoundaryNotFoundError(RuntimeError):
    """No sign change for an integration-boundary equation on the table grid."""


@dataclass
class RateResult:
    """A computed rate in nats plus argmax parameters and solver diagnostics."""

    value_nats: float
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.value_nats) and self.value_nats >= 0.0):
            raise ValueError(f"rate must be finite and nonnegative, got {self.value_nats}")


@dataclass
class LayerPlan:
    """K-layer superposition code: decoding thresholds and layer powers."""

    s: np.ndarray
    gamma2: np.ndarray

    def __post_init__(self) -> None:
        self.s = np.atleast_1d(np.asarray(self.s, dtype=float))
        self.gamma2 = np.atleast_1d(np.asarray(self.gamma2, dtype=float))
        if self.s.size != self.gamma2.size:
            raise ValueError("thresholds and layer powers must have equal length")
        if np.any(np.diff(self.s) <= 0) or self.s[0] <= 0:
            raise ValueError("thresholds must be positive and strictly increasing")
        if np.any(self.gamma2 < 0):
            raise ValueError("layer powers must be nonnegative")

    @property
    def k(self) -> int:
        return self.s.size

    @property
    def total_power(self) -> float:
        return float(self.gamma2.sum())

    def sinr_thresholds(self) -> np.ndarray:
        """Per-layer SINR targets T_i = g_i^2 s_i / (1 + s_i * sum_{j>i} g_j^2)."""
        tail = np.concatenate([np.cumsum(self.gamma2[::-1])[::-1][1:], [0.0]])
        return self.gamma2 * self.s / (1.0 + self.s * tail)

    def layer_rates(self) -> np.ndarray:
        return np.log1p(self.sinr_thresholds())


@dataclass
class RelayAllocation:
    """Relay layer powers for realized decoding prefixes, plus DAF splits.

    alpha2/beta2 are zero beyond each relay's decoded prefix; xi and zeta
    are the power fractions spent on decoded layers (1.0 for pure DF).
    """

    alpha2: np.ndarray
    beta2: np.ndarray
    xi: float = 1.0
    zeta: float = 1.0

    def __post_init__(self) -> None:
        self.alpha2 = np.asarray(self.alpha2, dtype=float)
        self.beta2 = np.asarray(self.beta2, dtype=float)
        if np.any(self.alpha2 < 0) or np.any(self.beta2 < 0):
            raise ValueError("layer powers must be nonnegative")
        for name, v in (("xi", self.xi), ("zeta", self.zeta)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class CfParams:
    """Quantizer distortion and relay transmission rate (nats)."""

    distortion: float
    relay_rate: float

    def __post_init__(self) -> None:
        if not (self.distortion > 0 and math.isfinite(self.distortion)):
            raise ValueError("distortion must be positive and finite")
        if not (self.relay_rate > 0 and math.isfinite(self.relay_rate)):
            raise ValueError("relay_rate must be positive and finite")


def _boundary_root(g, grid: np.ndarray) -> float:
    """First descending zero crossing of g along the table grid."""
    vals = g(grid)
    sign = np.sign(vals)
    idx = np.nonzero((sign[:-1] > 0) & (sign[1:] <= 0))[0]
    if idx.size == 0:
        raise BoundaryNotFoundError("no sign change on the tabulated grid")
    i = idx[0]
    try:
        return find_root(lambda s: float(g(np.array([s]))[0]), Bracket(grid[i], grid[i + 1], 1e-12))
    except NoSignChangeError:
        return float(grid[i])


def continuous_expected_rate(
    dist: GainDistribution,
    ps: float,
    prefactor: float = 1.0,
    s0_equation: str = "standard",
    a_th: Optional[float] = None,
) -> RateResult:
    """Continuum-of-layers expected rate over a tabulated gain distribution.

    Evaluates prefactor * int_{s0}^{s1} Fbar(s) (2/s + f'(s)/f(s)) ds with
    the boundaries solving Fbar(s1) = s1 f(s1) and
    Fbar(s0) = s0 (1 + P s0) f(s0); under the power-saving convention the
    relays bank energy while OFF, which scales P by exp(a_th) in the s0
    equation only.
    """
    if not 0.0 < prefactor <= 1.0:
        raise ValueError("prefactor must lie in (0, 1]")
    if s0_equation == "standard":
        p_eff = ps
    elif s0_equation == "power-saving":
        if a_th is None:
            raise ValueError("power-saving boundary requires a_th")
        p_eff = math.exp(a_th) * ps
    else:
        raise ValueError(f"unknown s0 equation tag {s0_equation!r}")

    grid = dist.grid
    s1 = _boundary_root(lambda s: dist.ccdf_at(s) - s * dist.pdf_at(s), grid)
    s0 = _boundary_root(
        lambda s: dist.ccdf_at(s) - s * (1.0 + p_eff * s) * dist.pdf_at(s), grid
    )
    if s0 >= s1:
        return RateResult(0.0, params={"s0": s0, "s1": s1}, diagnostics={"degenerate": True})

    def integrand(s: float) -> float:
        f = max(float(dist.pdf_at(s)), 1e-300)
        return float(dist.ccdf_at(s)) * (2.0 / s + float(dist.pdf_slope_at(s)) / f)

    value = prefactor * integrate(integrand, s0, s1, tol=1e-9)
    return RateResult(
        max(value, 0.0),
        params={"s0": s0, "s1": s1, "prefactor": prefactor},
        diagnostics={"method": "euler-boundary", "s0_equation": s0_equation},
    )


def discrete_broadcast_rate(
    ccdf,
    power: float,
    layers: int = 200,
    s_lo: float = 1e-3,
    s_hi: float = 20.0,
    sweeps: int = 200,
) -> float:
    """Finite-layer broadcast optimization on a fixed threshold grid.

    Coordinate ascent on the residual-power profile; each 1-D subproblem
    has a closed-form stationary point.  Serves as an independent check of
    the variational solution.
    """
    s = np.geomspace(s_lo, s_hi, layers)
    fbar = np.clip(np.asarray(ccdf(s), dtype=float), 0.0, 1.0)
    # residual power rho_i = power allocated to layers >= i; rho is nonincreasing
    rho = np.concatenate([np.linspace(power, 0.0, layers), [0.0]])

    def objective(r: np.ndarray) -> float:
        return float(np.sum(fbar * (np.log1p(s * r[:-1]) - np.log1p(s * r[1:]))))

    for _ in range(sweeps):
        moved = 0.0
        for i in range(1, layers):
            lo_lim, hi_lim = rho[i + 1], rho[i - 1]
            fi, fim = fbar[i], fbar[i - 1]
            si, sim = s[i], s[i - 1]
            denom = si * sim * (fim - fi)
            if denom <= 0:
                best = lo_lim if fim >= fi else hi_lim
            else:
                best = (fi * si - fim * sim) / denom
                best = min(max(best, lo_lim), hi_lim)
            moved = max(moved, abs(best - rho[i]))
            rho[i] = best
        if moved < 1e-12 * max(power, 1.0):
            break
    return objective(rho)


def exact_pair_distribution(grid_hi: float = 40.0, m: int = 2048) -> GainDistribution:
    """Analytic tables for the sum of two unit exponentials (SIMO/MISO cut)."""
    grid = np.geomspace(1e-4, grid_hi, m)
    cdf = 1.0 - (1.0 + grid) * np.exp(-grid)
    pdf = grid * np.exp(-grid)
    slope = (1.0 - grid) * np.exp(-grid)
    return GainDistribution(grid=grid, cdf=cdf, pdf=pdf, pdf_slope=slope, source="quadrature")
