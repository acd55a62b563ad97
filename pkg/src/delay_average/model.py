"""Problem description: linear lag measures, polynomial lag functionals, noise models.

A perturbed model is

    dx = [L0 x_t + eps^2 G(x_t) + eps Gq(x_t)] dt + eps F(x_t) dW          (white noise)
    dx = [L0 x_t + eps sigma(xi_t) F(x_t) + eps^2 G(x_t) + eps Gq(x_t)] dt  (general noise)

where ``x_t`` is the history segment on [-r, 0].
"""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np
from numpy.typing import ArrayLike

from delay_average.errors import ConfigError, DomainError
from delay_average.segment import HistorySegment

_LAG_TOL = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LagTerm:
    """One point mass ``matrix`` at ``lag``."""

    lag: float
    matrix: np.ndarray


@dataclass(frozen=True)
class MatrixLagMeasure:
    """Finite sum of matrix point masses: L eta = sum_k A_k eta(theta_k)."""

    terms: tuple[LagTerm, ...]
    max_delay: float

    def __post_init__(self) -> None:
        if not self.terms:
            msg = "a lag measure needs at least one term"
            raise ConfigError(msg)
        if not self.max_delay > 0:
            msg = f"max_delay must be positive, got {self.max_delay!r}"
            raise ConfigError(msg)
        n = self.terms[0].matrix.shape[0]
        lags = [term.lag for term in self.terms]
        if len(set(lags)) != len(lags):
            msg = f"lags must be distinct, got {lags}"
            raise ConfigError(msg)
        for term in self.terms:
            if term.matrix.shape != (n, n):
                msg = f"matrix at lag {term.lag} has shape {term.matrix.shape}, expected {(n, n)}"
                raise ConfigError(msg)
            if not -self.max_delay - _LAG_TOL <= term.lag <= 0:
                msg = f"lag {term.lag} outside [-{self.max_delay}, 0]"
                raise ConfigError(msg)

    @classmethod
    def from_terms(
        cls, terms: Iterable[tuple[float, ArrayLike]], max_delay: float | None = None
    ) -> "MatrixLagMeasure":
        """Build a measure from (lag, matrix) pairs; scalars are promoted to 1x1 matrices."""
        built = []
        for lag, matrix in terms:
            array = np.atleast_2d(np.asarray(matrix, dtype=float))
            built.append(LagTerm(float(lag), _frozen(array.copy())))
        if max_delay is None:
            max_delay = max((-term.lag for term in built), default=0.0)
            if max_delay <= 0:
                msg = "all lags are zero; declare a positive max_delay horizon"
                raise ConfigError(msg)
        return cls(tuple(built), float(max_delay))

    @property
    def n(self) -> int:
        """State dimension."""
        return self.terms[0].matrix.shape[0]

    @property
    def lags(self) -> np.ndarray:
        """Lags theta_k as an array."""
        return np.array([term.lag for term in self.terms])

    @property
    def matrices(self) -> np.ndarray:
        """Matrices A_k stacked, shape (K, n, n)."""
        return np.stack([term.matrix for term in self.terms])

    def norm_bound(self) -> float:
        """Sum of spectral norms; no root with Re >= 0 has modulus above this."""
        return float(sum(np.linalg.norm(term.matrix, 2) for term in self.terms))

    def with_horizon(self, max_delay: float) -> "MatrixLagMeasure":
        """Same terms on a larger declared horizon."""
        return replace(self, max_delay=max_delay)


def eval_linear(measure: MatrixLagMeasure, seg: HistorySegment) -> np.ndarray:
    """Return sum_k A_k seg(theta_k)."""
    if seg.span < measure.max_delay * (1 - 1e-9) and np.min(measure.lags) < -seg.span * (1 + 1e-9):
        msg = f"segment span {seg.span} shorter than the measure's lags"
        raise DomainError(msg)
    return sum(term.matrix @ seg.at(term.lag) for term in measure.terms)


@dataclass(frozen=True)
class PolyLagFunctional:
    """Polynomial in the stacked lag values u = (eta(theta_1), ..., eta(theta_m)).

    Variable ``i`` of ``u`` is component ``i % n`` at lag ``i // n``. ``exponents`` has one
    row per monomial and ``coefficients`` the matching n-vector output.
    """

    lags: tuple[float, ...]
    n: int
    exponents: np.ndarray
    coefficients: np.ndarray
    _factors: tuple[tuple[tuple[int, int], ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        coefficients = np.asarray(self.coefficients, dtype=float).reshape(-1, self.n)
        exponents = np.asarray(self.exponents, dtype=int)
        width = self.n * len(self.lags)
        if exponents.size != coefficients.shape[0] * width:
            msg = "exponent table and coefficient table differ in length"
            raise ConfigError(msg)
        exponents = exponents.reshape(coefficients.shape[0], width)
        if np.any(exponents < 0):
            msg = "exponents must be nonnegative"
            raise ConfigError(msg)
        if len({tuple(row) for row in exponents}) != exponents.shape[0]:
            msg = "duplicate monomial in polynomial coefficient table"
            raise ConfigError(msg)
        if any(lag > 0 for lag in self.lags) or len(set(self.lags)) != len(self.lags):
            msg = f"lags must be distinct and nonpositive, got {self.lags}"
            raise ConfigError(msg)
        object.__setattr__(self, "exponents", _frozen(exponents))
        object.__setattr__(self, "coefficients", _frozen(coefficients))
        factors = tuple(tuple((int(i), int(e)) for i, e in enumerate(row) if e) for row in exponents)
        object.__setattr__(self, "_factors", factors)

    @classmethod
    def from_terms(
        cls,
        lags: Sequence[float],
        n: int,
        terms: Mapping[tuple[int, ...], ArrayLike] | Iterable[tuple[tuple[int, ...], ArrayLike]],
    ) -> "PolyLagFunctional":
        """Build from (exponent multi-index, n-vector coefficient) pairs."""
        items = list(terms.items()) if isinstance(terms, Mapping) else list(terms)
        width = n * len(lags)
        if not items:
            return cls.zero(n)
        exponents = np.array([list(index) for index, _ in items], dtype=int).reshape(len(items), width)
        coefficients = np.array([np.broadcast_to(np.asarray(c, dtype=float), (n,)) for _, c in items])
        return cls(tuple(float(lag) for lag in lags), n, exponents, coefficients)

    @classmethod
    def zero(cls, n: int) -> "PolyLagFunctional":
        """The zero functional."""
        return cls((), n, np.zeros((0, 0), dtype=int), np.zeros((0, n)))

    @classmethod
    def constant(cls, value: ArrayLike) -> "PolyLagFunctional":
        """Functional returning ``value`` for every segment."""
        vector = np.atleast_1d(np.asarray(value, dtype=float))
        return cls((), vector.shape[0], np.zeros((1, 0), dtype=int), vector[None, :])

    @classmethod
    def from_measure(cls, measure: MatrixLagMeasure) -> "PolyLagFunctional":
        """Linear functional eta -> sum_k B_k eta(theta_k)."""
        n, m = measure.n, len(measure.terms)
        terms = []
        for block, term in enumerate(measure.terms):
            for j in range(n):
                index = [0] * (n * m)
                index[block * n + j] = 1
                column = term.matrix[:, j]
                if np.any(column):
                    terms.append((tuple(index), column))
        return cls.from_terms(measure.lags.tolist(), n, terms)

    @property
    def width(self) -> int:
        """Length n*m of the stacked lag vector."""
        return self.n * len(self.lags)

    @property
    def degree(self) -> int:
        """Total degree (0 for constants and the zero functional)."""
        live = np.any(self.coefficients != 0, axis=1)
        if not np.any(live):
            return 0
        return int(np.max(self.exponents[live].sum(axis=1)))

    @property
    def is_zero(self) -> bool:
        """True when every coefficient vanishes."""
        return not np.any(self.coefficients)

    @property
    def is_linear(self) -> bool:
        """True for a homogeneous polynomial of degree one."""
        live = np.any(self.coefficients != 0, axis=1)
        return bool(np.all(self.exponents[live].sum(axis=1) == 1))

    def to_measure(self, max_delay: float) -> MatrixLagMeasure:
        """Matrix representation of a linear functional."""
        if not self.is_linear or self.is_zero:
            msg = "only nonzero linear functionals have a matrix representation"
            raise DomainError(msg)
        matrices = np.zeros((len(self.lags), self.n, self.n))
        for row, coefficient in zip(self.exponents, self.coefficients, strict=True):
            (index,) = np.flatnonzero(row)
            matrices[index // self.n, :, index % self.n] += coefficient
        return MatrixLagMeasure.from_terms(zip(self.lags, matrices, strict=True), max_delay)

    def scaled(self, factor: float) -> "PolyLagFunctional":
        """Return ``factor`` times this functional."""
        return replace(self, coefficients=self.coefficients * factor)

    def plus(self, other: "PolyLagFunctional") -> "PolyLagFunctional":
        """Sum of two functionals over the union of their lags."""
        if other.n != self.n:
            msg = "functionals have different output dimensions"
            raise ConfigError(msg)
        lags = list(self.lags) + [lag for lag in other.lags if lag not in self.lags]
        merged: dict[tuple[int, ...], np.ndarray] = {}
        for functional in (self, other):
            for row, coefficient in zip(functional.exponents, functional.coefficients, strict=True):
                index = [0] * (self.n * len(lags))
                for i, e in enumerate(row):
                    slot = lags.index(functional.lags[i // self.n]) * self.n + i % self.n
                    index[slot] = int(e)
                key = tuple(index)
                merged[key] = merged.get(key, np.zeros(self.n)) + coefficient
        return PolyLagFunctional.from_terms(lags, self.n, merged)

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """Polynomial value at stacked lag vectors ``u`` of shape (..., n*m); returns (..., n)."""
        u = np.asarray(u)
        out = np.zeros((*u.shape[:-1], self.n), dtype=np.result_type(u, float))
        for factors, coefficient in zip(self._factors, self.coefficients, strict=True):
            monomial = np.ones(u.shape[:-1], dtype=out.dtype)
            for i, e in factors:
                monomial = monomial * (u[..., i] if e == 1 else u[..., i] ** e)
            for k in range(self.n):
                if coefficient[k]:
                    out[..., k] += coefficient[k] * monomial
        return out

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        """Analytic derivative d poly / d u, shape (..., n, n*m)."""
        u = np.asarray(u)
        jac = np.zeros((*u.shape[:-1], self.n, self.width), dtype=np.result_type(u, float))
        for factors, coefficient in zip(self._factors, self.coefficients, strict=True):
            for pick, (i, e) in enumerate(factors):
                partial = np.full(u.shape[:-1], float(e), dtype=jac.dtype)
                if e > 1:
                    partial = partial * (u[..., i] if e == 2 else u[..., i] ** (e - 1))
                for other, (j, f) in enumerate(factors):
                    if other != pick:
                        partial = partial * (u[..., j] if f == 1 else u[..., j] ** f)
                jac[..., :, i] += partial[..., None] * coefficient
        return jac

    def differential(self, u: np.ndarray, du: np.ndarray) -> np.ndarray:
        """Directional derivative at ``u`` along ``du`` (both stacked), shape (..., n)."""
        return np.einsum("...ij,...j->...i", self.jacobian(u), du)

    def stack(self, seg: HistorySegment) -> np.ndarray:
        """Stacked lag vector u of a segment."""
        return seg.at_lags(self.lags).reshape(-1)


def eval_functional(f: PolyLagFunctional, seg: HistorySegment) -> np.ndarray:
    """Evaluate ``f`` at a history segment."""
    return f.evaluate(f.stack(seg))


def frechet_diff(f: PolyLagFunctional, at: HistorySegment, direction: HistorySegment) -> np.ndarray:
    """Frechet differential of ``f`` at ``at`` in direction ``direction``."""
    if abs(at.span - direction.span) > 1e-9 * max(1.0, at.span):
        msg = "base point and direction must share the span [-r, 0]"
        raise DomainError(msg)
    return f.differential(f.stack(at), f.stack(direction))


def linear_functional(measure: MatrixLagMeasure) -> PolyLagFunctional:
    """PolyLagFunctional of a lag measure, used for linear perturbations L1."""
    return PolyLagFunctional.from_measure(measure)


def scalar_monomial(lag: float, power: int, coefficient: float = 1.0) -> PolyLagFunctional:
    """Scalar functional ``coefficient * eta(lag)**power``."""
    if power == 0:
        return PolyLagFunctional.constant([coefficient])
    return PolyLagFunctional.from_terms([lag], 1, {(power,): [coefficient]})


class NoiseKind(StrEnum):
    """Kinds of driving noise."""

    WIENER = "wiener"
    TWO_STATE_MARKOV = "two-state-markov"
    EXP_SUM = "exp-sum"


@dataclass(frozen=True)
class NoiseModel:
    """Driving noise: Wiener, a symmetric two-state chain, or an exponential-sum correlation.

    The two-state chain switches at rate g/2 in each direction between sigma values
    +sigma0 and -sigma0, giving R(s) = sigma0^2 exp(-g s).
    """

    kind: NoiseKind = NoiseKind.WIENER
    rate: float = 0.0
    amplitude: float = 0.0
    components: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        match self.kind:
            case NoiseKind.TWO_STATE_MARKOV:
                if not self.rate > 0:
                    msg = f"switching parameter g must be positive, got {self.rate!r}"
                    raise ConfigError(msg)
            case NoiseKind.EXP_SUM:
                if not self.components:
                    msg = "exponential-sum correlation needs at least one (weight, decay) pair"
                    raise ConfigError(msg)
                if any(not decay > 0 for _, decay in self.components):
                    msg = "decay rates must be positive"
                    raise ConfigError(msg)

    @classmethod
    def wiener(cls) -> "NoiseModel":
        """Standard Brownian motion."""
        return cls()

    @classmethod
    def two_state_markov(cls, g: float, sigma0: float) -> "NoiseModel":
        """Symmetric telegraph noise with R(s) = sigma0^2 exp(-g s)."""
        return cls(NoiseKind.TWO_STATE_MARKOV, rate=float(g), amplitude=float(sigma0))

    @classmethod
    def exp_sum(cls, pairs: Iterable[tuple[float, float]]) -> "NoiseModel":
        """Correlation R(s) = sum of weight * exp(-decay s)."""
        return cls(NoiseKind.EXP_SUM, components=tuple((float(w), float(a)) for w, a in pairs))

    @property
    def is_white(self) -> bool:
        """True for Wiener noise."""
        return self.kind is NoiseKind.WIENER

    @property
    def correlation_terms(self) -> tuple[tuple[float, float], ...]:
        """(weight, decay) pairs of R."""
        match self.kind:
            case NoiseKind.TWO_STATE_MARKOV:
                return ((self.amplitude**2, self.rate),)
            case NoiseKind.EXP_SUM:
                return self.components
            case _:
                msg = "white noise has no autocorrelation function"
                raise DomainError(msg)

    def autocorrelation(self, s: ArrayLike) -> np.ndarray:
        """R(s) for s >= 0."""
        s = np.asarray(s, dtype=float)
        return sum(w * np.exp(-a * s) for w, a in self.correlation_terms)

    def laplace(self, z: ArrayLike) -> np.ndarray:
        """Integral of R(s) exp(z s) over [0, inf) for Re z below every decay rate."""
        z = np.asarray(z, dtype=complex)
        return sum(w / (a - z) for w, a in self.correlation_terms)

    def integral(self) -> float:
        """R0 = integral of R over [0, inf)."""
        return float(np.real(self.laplace(0.0)))

    def cosine_integral(self, frequency: float) -> float:
        """Integral of R(s) cos(frequency s) over [0, inf)."""
        return float(np.real(self.laplace(1j * frequency)))


@dataclass(frozen=True)
class PerturbedModel:
    """A linear DDE at the verge of instability plus its small perturbation."""

    L0: MatrixLagMeasure
    F: PolyLagFunctional
    G: PolyLagFunctional | None = None
    Gq: PolyLagFunctional | None = None
    noise: NoiseModel = field(default_factory=NoiseModel.wiener)
    epsilon: float = 0.01
    name: str = ""

    def __post_init__(self) -> None:
        if not self.epsilon >= 0:
            msg = f"epsilon must be nonnegative, got {self.epsilon!r}"
            raise ConfigError(msg)
        r = self.L0.max_delay
        for label, functional in self.functionals():
            if functional.n != self.n:
                msg = f"{label} has output dimension {functional.n}, expected {self.n}"
                raise ConfigError(msg)
            if any(lag < -r - _LAG_TOL for lag in functional.lags):
                msg = f"{label} has a lag outside [-{r}, 0]"
                raise ConfigError(msg)

    @property
    def n(self) -> int:
        """State dimension."""
        return self.L0.n

    @property
    def max_delay(self) -> float:
        """Delay horizon r."""
        return self.L0.max_delay

    @property
    def is_white(self) -> bool:
        """True when driven by Wiener noise."""
        return self.noise.is_white

    def functionals(self) -> list[tuple[str, PolyLagFunctional]]:
        """Present perturbation functionals with their names."""
        present = [("F", self.F), ("G", self.G), ("Gq", self.Gq)]
        return [(label, f) for label, f in present if f is not None]

    def all_lags(self) -> list[float]:
        """Every lag read by the right-hand side."""
        lags = set(self.L0.lags.tolist())
        for _, functional in self.functionals():
            lags.update(functional.lags)
        return sorted(lags)

    def with_epsilon(self, epsilon: float) -> "PerturbedModel":
        """Copy with another perturbation size."""
        return replace(self, epsilon=epsilon)
