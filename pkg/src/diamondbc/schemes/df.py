"""Decode-forward: single-layer throughput and finite-layer expected rate."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..channel import PowerConfig, SeedSpec
from ..numerics import Bracket, maximize_scalar
from .common import RateResult
from .layered import optimize_layered

__all__ = [
    "df_threshold_cap",
    "df_throughput_objective",
    "df_throughput",
    "df_finite_expected_rate",
]

_CAP_CONSTANT = 1.212


def df_threshold_cap(p: PowerConfig) -> float:
    """Upper end of the bracket containing the optimal decode threshold."""
    return min(2.0 * p.pr / p.ps, _CAP_CONSTANT)


def df_throughput_objective(s, p: PowerConfig):
    """Success probability times rate of the distributed space-time DF code."""
    s = np.asarray(s, dtype=float)
    ratio = p.ps / p.pr
    prob = (ratio * s * np.exp(-s) - np.exp(-s) + 2.0) * np.exp(-s * (ratio + 1.0))
    return prob * np.log1p(p.ps * s)


def df_throughput(p: PowerConfig) -> RateResult:
    s_t = df_threshold_cap(p)
    res = maximize_scalar(
        lambda u: float(df_throughput_objective(math.exp(u), p)),
        Bracket(math.log(s_t) - 14.0, math.log(s_t) - 1e-12, 1e-12),
    )
    s_star = math.exp(res.argmax[0])
    return RateResult(
        res.value,
        params={"s": s_star, "s_cap": s_t},
        diagnostics={"evaluations": res.evaluations, "converged": res.converged,
                     "method": "closed-form"},
    )


def df_finite_expected_rate(
    k: int,
    p: PowerConfig,
    seed: Optional[SeedSpec] = None,
    maxfev: Optional[int] = None,
    starts: Optional[int] = None,
) -> RateResult:
    """Best K-layer broadcast expected rate with per-prefix relay allocations."""
    return optimize_layered(k, p, "df", seed=seed, maxfev=maxfev, starts=starts)
