"""History segments: sampled functions on [-r, 0] with an optional jump at zero."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from delay_average.errors import ConfigError, DomainError

# Relative slack when snapping times to grid nodes
_NODE_TOL = 1e-9


def grid_steps(span: float, step: float) -> int:
    """Return N = span/step, raising ConfigError when it is not an integer."""
    ratio = span / step
    count = round(ratio)
    if count < 1 or abs(ratio - count) > _NODE_TOL * max(1.0, ratio):
        msg = f"step {step!r} does not divide the delay horizon {span!r} (r/dt = {ratio!r})"
        raise ConfigError(msg)
    return count


@dataclass(frozen=True)
class HistorySegment:
    """A function on [-r, 0] sampled on a uniform grid.

    ``values[0]`` is the sample at theta = -r and ``values[-1]`` the left limit at theta = 0.
    When ``jump_at_zero`` is set it replaces the value at theta = 0 while every read on
    [-r, 0) uses the continuous samples. Values may be complex so that eigenfunctions
    can be sampled as segments.
    """

    grid_step: float
    values: np.ndarray
    jump_at_zero: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 2:
            msg = "segment values must have shape (N+1, n) with N >= 1"
            raise ConfigError(msg)
        if not self.grid_step > 0:
            msg = f"grid step must be positive, got {self.grid_step!r}"
            raise ConfigError(msg)
        object.__setattr__(self, "values", values)
        if self.jump_at_zero is not None:
            jump = np.atleast_1d(np.asarray(self.jump_at_zero))
            if jump.shape != (values.shape[1],):
                msg = "jump_at_zero must be an n-vector"
                raise ConfigError(msg)
            object.__setattr__(self, "jump_at_zero", jump)

    @property
    def n(self) -> int:
        """State dimension."""
        return self.values.shape[1]

    @property
    def steps(self) -> int:
        """Number of grid cells N."""
        return self.values.shape[0] - 1

    @property
    def span(self) -> float:
        """Length r of the segment."""
        return self.steps * self.grid_step

    @property
    def nodes(self) -> np.ndarray:
        """Grid times theta_0 = -r, ..., theta_N = 0."""
        return (np.arange(self.steps + 1) - self.steps) * self.grid_step

    @property
    def value_at_zero(self) -> np.ndarray:
        """The value at theta = 0 (the jump when present)."""
        return self.values[-1] if self.jump_at_zero is None else self.jump_at_zero

    def continuous_at(self, theta: float) -> np.ndarray:
        """Linear interpolation of the continuous samples, exact at nodes."""
        pos = (theta + self.span) / self.grid_step
        if pos < -_NODE_TOL * max(1.0, self.steps) or pos > self.steps * (1 + _NODE_TOL) + _NODE_TOL:
            msg = f"lag {theta!r} lies outside the segment span [-{self.span!r}, 0]"
            raise DomainError(msg)
        pos = min(max(pos, 0.0), float(self.steps))
        k = int(np.floor(pos + _NODE_TOL))
        frac = pos - k
        if k >= self.steps or frac <= _NODE_TOL:
            return self.values[min(k, self.steps)]
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]

    def at(self, theta: float) -> np.ndarray:
        """Evaluate the segment at theta in [-r, 0]."""
        if self.jump_at_zero is not None and abs(theta) <= _NODE_TOL * self.grid_step:
            return self.jump_at_zero
        return self.continuous_at(theta)

    def at_lags(self, lags: Sequence[float]) -> np.ndarray:
        """Stack of segment values at the given lags, shape (m, n)."""
        if not len(lags):
            return np.zeros((0, self.n), dtype=self.values.dtype)
        return np.stack([self.at(lag) for lag in lags])

    def sup_norm(self) -> float:
        """Supremum norm over the grid, including the jump value."""
        norm = float(np.max(np.abs(self.values)))
        if self.jump_at_zero is not None:
            norm = max(norm, float(np.max(np.abs(self.jump_at_zero))))
        return norm

    def resampled(self, grid_step: float) -> "HistorySegment":
        """Interpolate onto another grid over the same span."""
        if abs(grid_step - self.grid_step) <= _NODE_TOL * self.grid_step:
            return self
        steps = grid_steps(self.span, grid_step)
        thetas = (np.arange(steps + 1) - steps) * grid_step
        values = np.stack([self.continuous_at(theta) for theta in thetas])
        return HistorySegment(grid_step, values, self.jump_at_zero)

    def combine(self, a: complex, other: "HistorySegment", b: complex) -> "HistorySegment":
        """Return a * self + b * other on the shared grid."""
        if other.values.shape != self.values.shape:
            msg = "segments live on different grids"
            raise DomainError(msg)
        jump = None
        if self.jump_at_zero is not None or other.jump_at_zero is not None:
            jump = a * self.value_at_zero + b * other.value_at_zero
        return HistorySegment(self.grid_step, a * self.values + b * other.values, jump)

    @classmethod
    def from_function(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        span: float,
        grid_step: float,
        *,
        jump_at_zero: np.ndarray | None = None,
    ) -> "HistorySegment":
        """Sample ``func(thetas)`` (returning shape (N+1,) or (N+1, n)) on [-span, 0]."""
        steps = grid_steps(span, grid_step)
        thetas = (np.arange(steps + 1) - steps) * grid_step
        return cls(grid_step, np.asarray(func(thetas)), jump_at_zero)

    @classmethod
    def constant(cls, value: Sequence[float] | float, span: float, grid_step: float) -> "HistorySegment":
        """Segment equal to ``value`` everywhere."""
        vector = np.atleast_1d(np.asarray(value, dtype=float))
        steps = grid_steps(span, grid_step)
        return cls(grid_step, np.tile(vector, (steps + 1, 1)))

    @classmethod
    def indicator(cls, vector: Sequence[float], span: float, grid_step: float) -> "HistorySegment":
        """The discontinuous datum 1_{0} v: zero on [-r, 0), v at 0."""
        jump = np.atleast_1d(np.asarray(vector))
        steps = grid_steps(span, grid_step)
        return cls(grid_step, np.zeros((steps + 1, jump.shape[0]), dtype=jump.dtype), jump)
