"""Linear per-epoch schedules for the confidence threshold and the
entropy weight (e.g. 0.98 -> 0.90, or 1 -> 0 / 1 -> -0.5)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class LinearSchedule:
    start: float
    end: float
    total_epochs: int

    def __post_init__(self):
        if self.total_epochs < 1:
            raise ValueError("total_epochs must be >= 1")

    def value(self, epoch: int) -> float:
        """Affine interpolation: value(0) = start, value(total-1) = end."""
        if not 0 <= epoch < self.total_epochs:
            raise ValueError(
                f"epoch {epoch} outside schedule of {self.total_epochs} epochs")
        if self.total_epochs == 1:
            return self.start
        frac = epoch / (self.total_epochs - 1)
        return self.start + (self.end - self.start) * frac


def constant(value: float, total_epochs: int) -> LinearSchedule:
    return LinearSchedule(value, value, total_epochs)
