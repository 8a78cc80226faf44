"""
Fixed-Point Arithmetic for Pair Scout
Signed fixed-point format and stochastic rounding with saturation
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from config import FIXED_POINT_CONFIG


@dataclass(frozen=True)
class FixedPointSpec:
    integer_bits: int = FIXED_POINT_CONFIG["integer_bits"]
    fraction_bits: int = FIXED_POINT_CONFIG["fraction_bits"]

    @property
    def epsilon(self) -> float:
        return 2.0 ** -self.fraction_bits

    @property
    def word_bits(self) -> int:
        return self.integer_bits + self.fraction_bits

    @property
    def min_value(self) -> float:
        return -(2.0 ** (self.integer_bits - 1))

    @property
    def max_value(self) -> float:
        return 2.0 ** (self.integer_bits - 1) - self.epsilon


class StochasticRounder:
    """Rounds to the fixed-point grid, up with probability proportional to the remainder"""

    def __init__(self, spec: FixedPointSpec = FixedPointSpec(), seed: int = 0):
        self.logger = logging.getLogger(__name__)
        self.spec = spec
        self.rng = np.random.default_rng(seed)
        self.overflow_count = 0

    def _saturate(self, x: np.ndarray) -> np.ndarray:
        over = (x < self.spec.min_value) | (x > self.spec.max_value)
        count = int(np.count_nonzero(over))
        if count:
            self.overflow_count += count
            self.logger.debug(f"Saturated {count} value(s) to the {self.spec.integer_bits}.{self.spec.fraction_bits} range")
        return np.clip(x, self.spec.min_value, self.spec.max_value)

    def round_array(self, x: Union[np.ndarray, list]) -> np.ndarray:
        eps = self.spec.epsilon
        x = self._saturate(np.asarray(x, dtype=float))
        floor = np.floor(x / eps) * eps
        # P(round up) = (x - floor) / eps
        up = self.rng.random(x.shape) < (x - floor) / eps
        return np.where(up, floor + eps, floor)

    def round(self, x: float) -> float:
        return float(self.round_array(np.asarray([x]))[0])


def stochastic_round(x: float, spec: FixedPointSpec = FixedPointSpec(), rng: Union[int, np.random.Generator] = 0) -> float:
    rounder = StochasticRounder(spec)
    if isinstance(rng, np.random.Generator):
        rounder.rng = rng
    else:
        rounder.rng = np.random.default_rng(rng)
    value = rounder.round(x)
    if rounder.overflow_count:
        rounder.logger.warning(f"Saturated {x} to {value} ({rounder.overflow_count} overflow)")
    return value
