"""Hybrid decode-amplify-forward relaying.

daf_throughput evaluates the exact branch-by-branch success probability of
the single-layer protocol: both-decode uses the coherent space-time pair,
the mixed case amplifies only when the backward gain clears the expected
switching cutoff, and a failed relay never lifts the equivalent gain above
its own backward gain, so the double-failure branch contributes nothing.

The literature closed form for this scheme treats the gate states as
independent of the gain tables; that version is kept as a diagnostic
(proposition_value) because it can cross the cutset bound at mid power
ratios, and the validation suite reports its deviation from the
per-realization oracle instead of asserting agreement.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..channel import PowerConfig, SeedSpec
from ..gains import (
    af_on_threshold,
    cached_distribution,
    daf_distribution,
    exp_gauss_nodes,
    halfplane_tail_prob,
)
from ..numerics import Bracket, maximize_scalar
from .af import af_tables
from .common import RateResult
from .layered import optimize_layered

__all__ = [
    "daf_success_probability",
    "daf_throughput",
    "daf_proposition_objective",
    "daf_finite_expected_rate",
]


def _mixed_slab_prob(s: float, p: PowerConfig) -> float:
    """Pr{amplified mixed branch succeeds, gate < ar2 < s} at threshold s."""
    gate = p.pr / p.ps
    if gate >= s:
        return 0.0
    x = s * p.ps / p.pr
    edges = np.linspace(gate, s, 5)
    t, w = exp_gauss_nodes(edges)
    c1 = 1.0 + t * p.ps
    c2 = t * p.ps - x * p.pr
    thresh = x * (1.0 + t * p.ps)
    return float(np.sum(w * halfplane_tail_prob(c1, c2, thresh)))


def daf_success_probability(s: float, p: PowerConfig) -> float:
    """End-to-end success probability of single-layer DAF at threshold s."""
    x = s * p.ps / p.pr
    gate = p.pr / p.ps
    both = math.exp(-2.0 * s) * (1.0 + x) * math.exp(-x)
    silent_cut = min(s, gate)
    mixed = (1.0 - math.exp(-silent_cut)) * math.exp(-x) + _mixed_slab_prob(s, p)
    # both relays failing to decode leaves every equivalent amplify gain
    # below s, so that branch never succeeds
    return both + 2.0 * math.exp(-s) * mixed


def daf_throughput(p: PowerConfig) -> RateResult:
    def objective(u: float) -> float:
        s = math.exp(u)
        return daf_success_probability(s, p) * math.log1p(p.ps * s)

    s_hi = max(2.0 * df_cap(p), 1.5)
    res = maximize_scalar(objective, Bracket(math.log(s_hi) - 15.0, math.log(s_hi), 1e-12))
    s_star = math.exp(res.argmax[0])
    return RateResult(
        res.value,
        params={"s": s_star, "gate": p.pr / p.ps},
        diagnostics={
            "evaluations": res.evaluations,
            "converged": res.converged,
            "method": "protocol-exact",
        },
    )


def df_cap(p: PowerConfig) -> float:
    from .df import df_threshold_cap

    return df_threshold_cap(p)


def daf_proposition_objective(
    s,
    p: PowerConfig,
    method: str = "quadrature",
    n: int = 2_000_000,
    seed: Optional[SeedSpec] = None,
    cache_dir=None,
):
    """Verbatim three-branch closed form, for diagnostics only."""
    seed = seed or SeedSpec()
    s = np.asarray(s, dtype=float)
    a_th = af_on_threshold(p)
    on = math.exp(-a_th)
    ratio = p.ps / p.pr
    d1, d2 = af_tables(p, method=method, n=n, seed=seed, cache_dir=cache_dir)
    ddaf = cached_distribution(
        "daf", p.ps, p.pr, n if method == "monte-carlo" else 0, seed,
        lambda: daf_distribution(p, method=method, n=n, seed=seed),
        cache_dir,
    )
    df_branch = (
        2.0 * np.exp(s)
        + 2.0 * math.exp(-1.0 / ratio)
        + s * ratio
        - 2.0 * np.exp(s - 1.0 / ratio)
        - 1.0
    ) * np.exp(-s * (2.0 + ratio))
    af_branch = (
        (on * d2.ccdf_at(s) + (1.0 - on) * d1.ccdf_at(s)) * on * (1.0 - np.exp(-s)) ** 2
    )
    mixed_branch = (
        2.0 * np.exp(-(s + 1.0 / ratio)) * (1.0 - np.exp(-s)) * ddaf.ccdf_at(s * ratio)
    )
    return (df_branch + af_branch + mixed_branch) * np.log1p(p.ps * s)


def daf_finite_expected_rate(
    k: int,
    p: PowerConfig,
    seed: Optional[SeedSpec] = None,
    maxfev: Optional[int] = None,
    starts: Optional[int] = None,
    table_size: int = 50_000,
) -> RateResult:
    """Best K-layer DAF expected rate over plans, allocations and the xi split."""
    return optimize_layered(
        k, p, "daf", seed=seed, maxfev=maxfev, starts=starts, table_size=table_size
    )
