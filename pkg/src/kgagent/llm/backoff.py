"""Randomized exponential backoff for retrying model calls."""

from __future__ import annotations

import random
from dataclasses import dataclass, field


@dataclass
class BackoffPolicy:
    """Full-jitter exponential waits clamped to ``[min_wait, max_wait]``.

    The wait before retry ``n`` (counting failed attempts from 1) is drawn
    uniformly from ``[min_wait, clamp(multiplier * 2**(n-1), min_wait, max_wait)]``.
    """

    min_wait: float = 1.0
    max_wait: float = 60.0
    max_attempts: int = 6
    multiplier: float = 1.0
    rng: random.Random = field(default_factory=random.Random, repr=False)

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if not 0 <= self.min_wait <= self.max_wait:
            raise ValueError("need 0 <= min_wait <= max_wait")

    @classmethod
    def seeded(cls, seed: int, **kwargs) -> "BackoffPolicy":
        return cls(rng=random.Random(seed), **kwargs)

    def ceiling(self, failures: int) -> float:
        exp = self.multiplier * 2.0 ** min(failures - 1, 1024)
        return min(self.max_wait, max(self.min_wait, exp))

    def wait(self, failures: int) -> float:
        high = self.ceiling(failures)
        sample = self.rng.uniform(self.min_wait, high)
        return min(high, max(self.min_wait, sample))
