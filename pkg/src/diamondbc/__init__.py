"""Achievable rates and upper bounds for the two-relay diamond channel."""

from .channel import PowerConfig, SeedSpec, db_to_linear, default_seed, linear_to_db

__version__ = "0.1.0"

__all__ = [
    "PowerConfig",
    "SeedSpec",
    "db_to_linear",
    "linear_to_db",
    "default_seed",
    "__version__",
]
