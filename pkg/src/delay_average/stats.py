"""Empirical distributions of ensemble outputs and their Kolmogorov-Smirnov distance."""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from delay_average.errors import DomainError

type AnalyticCDF = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EmpiricalCDF:
    """Right-continuous step function of a sample; censored entries (inf) are mass at +infinity.

    Attributes:
        values: Finite sample values, sorted ascending.
        size: Sample size including censored entries.
        censored: Number of censored entries.
    """

    values: np.ndarray
    size: int
    censored: int = 0

    @property
    def degenerate(self) -> bool:
        """True when every entry is censored."""
        return self.censored == self.size

    @property
    def top(self) -> float:
        """Limit of the CDF at +infinity, (size - censored) / size."""
        return (self.size - self.censored) / self.size

    def __call__(self, x: float | np.ndarray) -> np.ndarray:
        """CDF(x) = #{finite values <= x} / size."""
        return np.searchsorted(self.values, x, side="right") / self.size

    def left_limit(self, x: float | np.ndarray) -> np.ndarray:
        """CDF(x-) = #{finite values < x} / size."""
        return np.searchsorted(self.values, x, side="left") / self.size

    def table(self) -> tuple[list[str], np.ndarray]:
        """CSV header and rows (x, cdf) at every jump."""
        jumps = np.unique(self.values)
        return ["x", "cdf"], np.column_stack([jumps, self(jumps)])


def ecdf(samples: np.ndarray, *, censor: float = np.inf) -> EmpiricalCDF:
    """Empirical CDF; entries equal to ``censor`` (or non-finite) count as censored.

    Raises:
        DomainError: Empty sample.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if not samples.size:
        msg = "cannot build an empirical CDF from an empty sample"
        raise DomainError(msg)
    censored = (samples == censor) | ~np.isfinite(samples)
    return EmpiricalCDF(np.sort(samples[~censored]), int(samples.size), int(censored.sum()))


def ks_distance(a: EmpiricalCDF, b: EmpiricalCDF | AnalyticCDF) -> float:
    """sup_x |A(x) - B(x)| over the jump points of both inputs, both one-sided limits included.

    Censored mass is compared at +infinity, so two samples that censor different fractions
    are at least that difference apart.
    """
    if isinstance(b, EmpiricalCDF):
        points = np.concatenate([a.values, b.values])
        gap = max(
            float(np.max(np.abs(a(points) - b(points)), initial=0.0)),
            float(np.max(np.abs(a.left_limit(points) - b.left_limit(points)), initial=0.0)),
        )
        return max(gap, abs(a.top - b.top))
    model = np.asarray(b(a.values), dtype=float)
    gap = max(
        float(np.max(np.abs(a(a.values) - model), initial=0.0)),
        float(np.max(np.abs(a.left_limit(a.values) - model), initial=0.0)),
    )
    return max(gap, 1.0 - a.top)


def ks_summary(a: EmpiricalCDF, b: EmpiricalCDF) -> dict:
    """JSON summary of a two-sample comparison."""
    return {
        "ks": ks_distance(a, b),
        "n_a": a.size,
        "n_b": b.size,
        "censored_a": a.censored,
        "censored_b": b.censored,
    }


def boxplot_series(series: np.ndarray, times: np.ndarray) -> dict[str, np.ndarray]:
    """Per-time mean and quartiles (linear interpolation of order statistics) of an ensemble of series.

    Args:
        series: Shape (realizations, len(times)).
        times: Shared time grid.

    Raises:
        DomainError: Fewer than four realizations or mismatched shapes.
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if series.shape[0] < 4:
        msg = f"need at least 4 realizations, got {series.shape[0]}"
        raise DomainError(msg)
    if series.shape[1] != len(times):
        msg = "series and times differ in length"
        raise DomainError(msg)
    q25, q75 = np.quantile(series, [0.25, 0.75], axis=0, method="linear")
    return {"t": np.asarray(times, dtype=float), "mean": series.mean(axis=0), "q25": q25, "q75": q75}
