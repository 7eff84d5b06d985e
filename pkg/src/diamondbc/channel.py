"""Block-fading network model: powers, seeded fading draws, dB helpers.

All four links are unit-variance circularly symmetric complex Gaussian, so
the squared magnitudes are unit-mean exponential.  Draws are generated on
counter-based Philox substreams so that chunked or parallel consumers
reproduce bit-identical sequences regardless of scheduling.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DEFAULT_MASTER_SEED",
    "SEED_ENV_VAR",
    "PowerConfig",
    "SeedSpec",
    "FadingSample",
    "default_seed",
    "sample_fading",
    "db_to_linear",
    "linear_to_db",
]

DEFAULT_MASTER_SEED = 0x5EED
SEED_ENV_VAR = "DIAMONDBC_SEED"


@dataclass(frozen=True)
class PowerConfig:
    """Source and per-relay transmit power budgets, linear scale."""

    ps: float
    pr: float

    def __post_init__(self) -> None:
        for name, value in (("ps", self.ps), ("pr", self.pr)):
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value}")

    @classmethod
    def from_db(cls, ps_db: float, pr_db: float) -> "PowerConfig":
        return cls(db_to_linear(ps_db), db_to_linear(pr_db))

    @property
    def ratio(self) -> float:
        return self.pr / self.ps


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus substream index; equal specs give equal streams."""

    master_seed: int = DEFAULT_MASTER_SEED
    stream_index: int = 0

    def substream(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_index + offset)


def default_seed() -> SeedSpec:
    """Master seed, overridable through the DIAMONDBC_SEED environment variable."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return SeedSpec(DEFAULT_MASTER_SEED)
    raw = raw.strip()
    try:
        master = int(raw, 16) if raw.lower().startswith("0x") else int(raw)
    except ValueError as exc:
        raise ValueError(f"{SEED_ENV_VAR} must be decimal or 0x-hex, got {raw!r}") from exc
    return SeedSpec(master & 0xFFFFFFFFFFFFFFFF)


@dataclass
class FadingSample:
    """One batch of block-fading realizations for the four links.

    h* are complex coefficients, a* their squared magnitudes.  Works for a
    single draw (length-1 arrays) or a vectorized batch.
    """

    h1: np.ndarray
    h2: np.ndarray
    hr1: np.ndarray
    hr2: np.ndarray
    a1: np.ndarray = field(init=False)
    a2: np.ndarray = field(init=False)
    ar1: np.ndarray = field(init=False)
    ar2: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.a1 = np.abs(self.h1) ** 2
        self.a2 = np.abs(self.h2) ** 2
        self.ar1 = np.abs(self.hr1) ** 2
        self.ar2 = np.abs(self.hr2) ** 2

    def __len__(self) -> int:
        return int(np.size(self.a1))


def _generator(seed: SeedSpec) -> np.random.Generator:
    key = (int(seed.master_seed) & (2**64 - 1), int(seed.stream_index) & (2**64 - 1))
    return np.random.Generator(np.random.Philox(key=key))


def _complex_gaussian(rng: np.random.Generator, n: int) -> np.ndarray:
    # Box-Muller form: |h|^2 = -ln u is exactly Exp(1), phase exactly uniform.
    u = 1.0 - rng.random(n)
    phase = 2.0 * np.pi * rng.random(n)
    return np.sqrt(-np.log(u)) * np.exp(1j * phase)


def sample_fading(seed: SeedSpec, n: int) -> FadingSample:
    """Draw n i.i.d. fading realizations of all four links."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _generator(seed)
    return FadingSample(
        h1=_complex_gaussian(rng, n),
        h2=_complex_gaussian(rng, n),
        hr1=_complex_gaussian(rng, n),
        hr2=_complex_gaussian(rng, n),
    )


def db_to_linear(x_db: float) -> float:
    if not math.isfinite(x_db):
        raise ValueError(f"dB value must be finite, got {x_db}")
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    if not (math.isfinite(x) and x > 0):
        raise ValueError(f"linear value must be finite and positive, got {x}")
    return 10.0 * math.log10(x)
