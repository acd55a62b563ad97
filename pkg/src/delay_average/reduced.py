"""The one-dimensional averaged SDE dh = b_H(h) dt + sigma_H(h) dW and its closed-form predictions."""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial
from scipy import stats

from delay_average.averaging import ReducedCoefficients
from delay_average.errors import ConfigError, DomainError, NotNormalizable
from delay_average.simulator import NOISE_BLOCK, path_rng

logger = logging.getLogger(__name__)

THRESHOLD_CAVEAT = (
    "Close to the predicted threshold the full system converges slowly; observed thresholds "
    "may differ from this prediction by up to about 20%."
)


@dataclass(frozen=True)
class ReducedSDE:
    """Averaged equation with polynomial coefficients.

    Attributes:
        coeffs: Drift and squared diffusion by power of the energy.
        cap: Paths exceeding this value are flagged and frozen.
    """

    coeffs: ReducedCoefficients
    cap: float = 1e6

    @classmethod
    def from_constants(cls, c_b: float, c_sigma: float, c_b2: float = 0.0, *, cap: float = 1e6) -> "ReducedSDE":
        """dh = (C_b h + C_b2 h^2) dt + sqrt(C_sigma) h dW."""
        if c_sigma < 0:
            msg = f"C_sigma must be nonnegative, got {c_sigma!r}"
            raise DomainError(msg)
        drift = np.array([0.0, c_b, c_b2])
        coeffs = ReducedCoefficients(drift, np.array([0.0, 0.0, c_sigma]), {"linear": drift})
        return cls(coeffs, cap)

    @property
    def clamped(self) -> bool:
        """True when paths are kept nonnegative (energy variable); the signed zero-root coordinate is not."""
        return self.coeffs.mode != "zero"

    def drift(self, h: float | np.ndarray) -> np.ndarray:
        """b_H(h)."""
        return self.coeffs.drift_at(h)

    def diffusion2(self, h: float | np.ndarray) -> np.ndarray:
        """sigma_H^2(h), with round-off below zero removed."""
        return np.maximum(self.coeffs.diffusion2_at(h), 0.0)

    def equilibrium(self) -> float | None:
        """Smallest positive zero of b_H, or None."""
        drift = self.coeffs.drift
        if not np.any(drift[1:]):
            return None
        roots = np.atleast_1d(polynomial.polyroots(drift))
        positive = sorted(root.real for root in roots if abs(root.imag) < 1e-9 and root.real > 1e-12)
        return float(positive[0]) if positive else None


@dataclass
class ReducedEnsemble:
    """Observations of an ensemble of reduced paths, ordered by path index."""

    seed: int
    dt: float
    steps: int
    final: np.ndarray
    passage_times: np.ndarray | None = None
    trace: np.ndarray | None = None
    clamp_events: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    blown_up: list[int] = field(default_factory=list)

    @property
    def clamp_rate(self) -> float:
        """Fraction of steps on which the nonnegativity clamp acted."""
        if not self.clamp_events.size or not self.steps:
            return 0.0
        return float(self.clamp_events.sum() / (self.clamp_events.size * self.steps))

    def summary(self) -> dict:
        """Counts and flags for the JSON artifact."""
        summary = {
            "seed": self.seed,
            "dt": self.dt,
            "paths": int(self.final.size),
            "steps": self.steps,
            "clamp_rate": self.clamp_rate,
            "blown_up": self.blown_up,
        }
        if self.passage_times is not None:
            summary["censored"] = int(np.isinf(self.passage_times).sum())
        return summary


def integrate_reduced_ensemble(
    sde: ReducedSDE,
    h0: float | np.ndarray,
    *,
    dt: float,
    T: float,
    seed: int,
    paths: int,
    level: float | None = None,
    record: bool = False,
    first_index: int = 0,
) -> ReducedEnsemble:
    """Euler-Maruyama for ``paths`` copies at once; path i uses stream ``path_rng(seed, first_index + i)``.

    Args:
        sde: The averaged equation.
        h0: Initial value, shared or one per path.
        dt: Step size.
        T: Integration time.
        seed: Base seed.
        paths: Ensemble size.
        level: Record the first grid time with h >= level; paths that never reach it get inf.
        record: Keep every state (shape (paths, steps + 1)).
        first_index: Stream index of the first path.
    """
    if not dt > 0 or T < 0 or paths < 1:
        msg = f"need dt > 0, T >= 0 and paths >= 1, got dt={dt!r}, T={T!r}, paths={paths!r}"
        raise ConfigError(msg)
    h = np.broadcast_to(np.asarray(h0, dtype=float), (paths,)).copy()
    if sde.clamped and np.any(h < 0):
        msg = "initial energy must be nonnegative"
        raise DomainError(msg)
    steps = int(np.ceil(T / dt - 1e-9))
    rngs = [path_rng(seed, first_index + index) for index in range(paths)]
    active = np.ones(paths, dtype=bool)
    clamps = np.zeros(paths, dtype=int)
    passage = None
    if level is not None:
        passage = np.full(paths, np.inf)
        passage[h >= level] = 0.0
    trace = np.empty((paths, steps + 1)) if record else None
    if trace is not None:
        trace[:, 0] = h
    root_dt = np.sqrt(dt)
    noise = np.empty((paths, 0))
    for step in range(steps):
        offset = step % NOISE_BLOCK
        if offset == 0:
            block = min(NOISE_BLOCK, steps - step)
            noise = np.stack([rng.standard_normal(NOISE_BLOCK)[:block] for rng in rngs])
        shock = noise[:, offset]
        moved = h + sde.drift(h) * dt + np.sqrt(sde.diffusion2(h)) * root_dt * shock
        if sde.clamped:
            below = moved < 0
            clamps += below & active
            moved = np.where(below, 0.0, moved)
        h = np.where(active, moved, h)
        escaped = active & ~(np.abs(h) <= sde.cap)
        if np.any(escaped):
            active &= ~escaped
        if passage is not None:
            passage = np.where(np.isinf(passage) & (h >= level), (step + 1) * dt, passage)
        if trace is not None:
            trace[:, step + 1] = h
    blown = np.flatnonzero(~active).tolist()
    if blown:
        logger.warning("%d of %d reduced paths exceeded the cap %g", len(blown), paths, sde.cap)
    return ReducedEnsemble(seed, dt, steps, h, passage, trace, clamps, blown)


@dataclass(frozen=True)
class ReducedPath:
    """One reduced trajectory on the grid t = k dt."""

    dt: float
    values: np.ndarray
    seed: int
    clamp_events: int
    blown_up: bool

    @property
    def times(self) -> np.ndarray:
        """Grid times."""
        return self.dt * np.arange(self.values.size)

    def to_rows(self) -> tuple[list[str], np.ndarray]:
        """CSV header and rows (t, h)."""
        return ["t", "h"], np.column_stack([self.times, self.values])


def integrate_reduced(
    sde: ReducedSDE, h0: float, *, dt: float, T: float, seed: int, path_index: int = 0
) -> ReducedPath:
    """Single Euler-Maruyama path, clamped at zero for the energy variable.

    Bit-identical to path ``path_index`` of ``integrate_reduced_ensemble`` with the same seed.
    """
    if sde.clamped and h0 < 0:
        msg = f"h0 must be nonnegative, got {h0!r}"
        raise DomainError(msg)
    single = integrate_reduced_ensemble(sde, h0, dt=dt, T=T, seed=seed, paths=1, record=True, first_index=path_index)
    return ReducedPath(dt, single.trace[0], seed, int(single.clamp_events[0]), bool(single.blown_up))


def first_passage(
    sde: ReducedSDE, h0: float, H_star: float, T_max: float, *, seed: int, paths: int, dt: float
) -> np.ndarray:
    """First grid time with h >= H_star for each path; censored paths get inf."""
    if not H_star > h0:
        msg = f"H_star ({H_star}) must exceed h0 ({h0})"
        raise DomainError(msg)
    return integrate_reduced_ensemble(sde, h0, dt=dt, T=T_max, seed=seed, paths=paths, level=H_star).passage_times


@dataclass(frozen=True)
class GammaDensity:
    """Stationary density p(h) proportional to h^(shape - 1) exp(-rate h)."""

    shape: float
    rate: float

    @property
    def distribution(self) -> stats.rv_continuous:
        """Frozen scipy Gamma distribution."""
        return stats.gamma(a=self.shape, scale=1.0 / self.rate)

    def pdf(self, h: float | np.ndarray) -> np.ndarray:
        """Density."""
        return self.distribution.pdf(h)

    def cdf(self, h: float | np.ndarray) -> np.ndarray:
        """Regularized lower incomplete gamma P(shape, rate h)."""
        return self.distribution.cdf(h)

    @property
    def mean(self) -> float:
        """shape / rate."""
        return self.shape / self.rate

    def table(self, h: np.ndarray) -> tuple[list[str], np.ndarray]:
        """CSV header and rows (h, pdf, cdf)."""
        h = np.asarray(h, dtype=float)
        return ["h", "pdf", "cdf"], np.column_stack([h, self.pdf(h), self.cdf(h)])


def invariant_density(c_b: float, c_b2: float, c_sigma: float) -> GammaDensity:
    """Solution of the stationary Fokker-Planck equation of dh = (C_b h + C_b2 h^2) dt + sqrt(C_sigma) h dW.

    Raises:
        DomainError: C_b2 >= 0 or C_sigma <= 0.
        NotNormalizable: 2 C_b / C_sigma - 1 <= 0, the regime where the trivial solution is stable.
    """
    if not c_b2 < 0:
        msg = f"C_b2 must be negative, got {c_b2!r}"
        raise DomainError(msg)
    if not c_sigma > 0:
        msg = f"C_sigma must be positive, got {c_sigma!r}"
        raise DomainError(msg)
    shape = 2.0 * c_b / c_sigma - 1.0
    if not shape > 0:
        msg = f"no stationary density: shape 2 C_b / C_sigma - 1 = {shape:.4g} is not positive"
        raise NotNormalizable(msg)
    return GammaDensity(shape, 2.0 * (-c_b2) / c_sigma)


@dataclass(frozen=True)
class ThresholdReport:
    """Deterministic and noise-shifted thresholds of the oscillator."""

    beta_c: float
    beta_c_noise: float
    sigma1: float
    sigma2: float

    @property
    def effect(self) -> str:
        """Whether noise delays the onset of oscillation."""
        if self.sigma2 > 0:
            return "stabilizing"
        if self.sigma2 < 0:
            return "destabilizing"
        return "neutral"

    def to_dict(self) -> dict:
        """JSON-ready report."""
        return {
            "beta_c": self.beta_c,
            "beta_c_noise": self.beta_c_noise,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "effect": self.effect,
            "note": THRESHOLD_CAVEAT,
        }


def noise_shifted_threshold(beta_c: float, c: complex, *, epsilon: float, d_tilde: float) -> ThresholdReport:
    """beta_c_noise = beta_c + eps^2 2 D_tilde |c| s2 / s1 with s1 = Re c/|c| and s2 = Im(c)^2/|c|^2 - 1/2.

    Raises:
        DomainError: beta_c >= 0, where s1 > 0 is not guaranteed.
    """
    if not beta_c < 0:
        msg = f"beta_c must be negative, got {beta_c!r}"
        raise DomainError(msg)
    modulus = abs(c)
    sigma1 = c.real / modulus
    sigma2 = c.imag**2 / modulus**2 - 0.5
    shift = epsilon**2 * 2.0 * d_tilde * modulus * sigma2 / sigma1
    return ThresholdReport(beta_c, beta_c + shift, sigma1, sigma2)


@dataclass(frozen=True)
class LyapunovPrediction:
    """Exponent of the averaged linear equation and of the full system."""

    lambda_avg: float
    dde_scale: float | None = None

    def to_dict(self) -> dict:
        """JSON-ready form."""
        return {"lambda_avg": self.lambda_avg, "dde_scale": self.dde_scale}


def averaged_lyapunov(c_b: float, c_sigma: float, *, epsilon: float | None = None) -> LyapunovPrediction:
    """lambda_avg = C_b - C_sigma / 2; with ``epsilon`` also the prediction eps^2 lambda_avg / 2."""
    lam = c_b - c_sigma / 2
    return LyapunovPrediction(lam, None if epsilon is None else epsilon**2 * lam / 2)


def log_moments(c_b: float, c_sigma: float, h0: float, t: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of log h(t) for dh = C_b h dt + sqrt(C_sigma) h dW."""
    if not h0 > 0:
        msg = f"h0 must be positive, got {h0!r}"
        raise DomainError(msg)
    t = np.asarray(t, dtype=float)
    return np.log(h0) + (c_b - c_sigma / 2) * t, c_sigma * t
