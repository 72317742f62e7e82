"""Engine configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass

MODES = ("auto", "incremental", "offline")


@dataclass
class EngineConfig:
    mode: str = "auto"
    partitions: int = 64  # theta-matrix partitions, a perfect square
    accuracy_threshold: float = 0.8  # full DC cleaning when the estimate exceeds this
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        root = math.isqrt(self.partitions) if self.partitions > 0 else 0
        if root < 1 or root * root != self.partitions:
            raise ValueError(f"partitions must be a perfect square >= 1, got {self.partitions}")
        if not 0.0 <= self.accuracy_threshold <= 1.0:
            raise ValueError("accuracy threshold must lie in [0, 1]")
