"""Per-scheme rate engines for the diamond channel."""

from .af import af_expected_rate, af_mixed_distribution, af_throughput
from .cf import (
    cf_decode_probability,
    cf_decode_probability_quadrature,
    cf_expected_rate,
    cf_throughput,
)
from .common import (
    BoundaryNotFoundError,
    CfParams,
    LayerPlan,
    RateResult,
    RelayAllocation,
    continuous_expected_rate,
    discrete_broadcast_rate,
    exact_pair_distribution,
)
from .daf import daf_finite_expected_rate, daf_throughput
from .df import df_finite_expected_rate, df_threshold_cap, df_throughput

__all__ = [
    "af_expected_rate",
    "af_mixed_distribution",
    "af_throughput",
    "cf_decode_probability",
    "cf_decode_probability_quadrature",
    "cf_expected_rate",
    "cf_throughput",
    "BoundaryNotFoundError",
    "CfParams",
    "LayerPlan",
    "RateResult",
    "RelayAllocation",
    "continuous_expected_rate",
    "discrete_broadcast_rate",
    "exact_pair_distribution",
    "daf_finite_expected_rate",
    "daf_throughput",
    "df_finite_expected_rate",
    "df_threshold_cap",
    "df_throughput",
]
