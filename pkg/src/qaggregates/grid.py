from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k * step, k = 0..n_steps, starting at zero.

    Stochastic drivers are sampled on the half-step lattice t = j * step / 2,
    j = 0..2*n_steps, so RK4 stages never interpolate.
    """

    step: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.step) and self.step > 0):
            raise ValueError("time step must be positive and finite")
        if int(self.n_steps) < 1 or int(self.n_steps) != self.n_steps:
            raise ValueError("grid needs at least one step")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def covering(cls, t_max: float, step: float) -> "TimeGrid":
        """Smallest grid with this step reaching at least ``t_max``."""
        return cls(step, max(1, int(np.ceil(t_max / step - 1e-9))))

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.n_steps + 1)

    @property
    def half_times(self) -> np.ndarray:
        return 0.5 * self.step * np.arange(2 * self.n_steps + 1)

    @property
    def t_max(self) -> float:
        return self.step * self.n_steps
