"""BPSK over AWGN: modulation, noise, channel LLRs and Eb/N0 conversion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from polarflip.errors import InvalidParametersError


def ebn0_to_sigma(ebn0_db: float, rate: float) -> float:
    """Per-dimension noise standard deviation for unit-energy BPSK.

    ``rate`` is the fraction of transmitted bits that Eb is charged to,
    here ``(K + C) / N``.
    """
    if not 0 < rate <= 1:
        raise InvalidParametersError(f"rate must lie in (0, 1], got {rate}")
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    rate: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.rate <= 1:
            raise InvalidParametersError(f"rate must lie in (0, 1], got {self.rate}")

    @property
    def noise_sigma(self) -> float:
        return ebn0_to_sigma(self.ebn0_db, self.rate)


def modulate(x) -> np.ndarray:
    """Map bit 0 to +1 and bit 1 to -1."""
    return 1.0 - 2.0 * np.asarray(x, dtype=np.float64)


def transmit(s, params: ChannelParams | float, rng) -> np.ndarray:
    """Add white Gaussian noise; ``params`` may be a bare noise sigma."""
    sigma = params.noise_sigma if isinstance(params, ChannelParams) else float(params)
    if sigma < 0:
        raise InvalidParametersError("noise sigma must be >= 0")
    s = np.asarray(s, dtype=np.float64)
    return s + sigma * rng.standard_normal(s.shape[0])


def llr_from_channel(y, noise_sigma: float) -> np.ndarray:
    if not noise_sigma > 0:
        raise InvalidParametersError("noise_sigma must be > 0; build saturated LLRs explicitly for noiseless tests")
    var = noise_sigma * noise_sigma
    return 2.0 * np.asarray(y, dtype=np.float64) / var
