"""Averaged drift and diffusion of the energy h = 2 <Psi_1, x_t><Psi_2, x_t>.

Every coefficient is a period average along the critical orbit

    U_t(theta) = sqrt(2 hbar) Re(d exp(i omega_c (t + theta))),

evaluated at a handful of sample values of hbar and fitted by a polynomial in hbar.
Interactions with the stable space integrate against the simulated fundamental
solutions T(s)(I - pi) 1_{0} e_j cached in an AveragingWorkspace.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial
from scipy.optimize import brentq

from delay_average import catalog
from delay_average.errors import CenteringViolated, DecayNotReached, DomainError, NoZeroRoot, NumericFailure
from delay_average.model import MatrixLagMeasure, PerturbedModel, PolyLagFunctional
from delay_average.segment import grid_steps
from delay_average.simulator import critical_coordinates, fundamental_initial, integrate_unperturbed_many
from delay_average.spectrum import (
    NormalizationKind,
    ScanConfig,
    SpectralData,
    eigendata,
    locate_critical_pair,
    locate_zero_root,
)

logger = logging.getLogger(__name__)

DEFAULT_NODES = 256
GAUSS_NODES = 48
_FIT_TOL = 1e-10
_CLEAN_TOL = 1e-12


@dataclass(frozen=True)
class ReducedCoefficients:
    """Polynomial drift b_H and squared diffusion sigma_H^2 of the averaged SDE.

    Attributes:
        drift: Coefficients of b_H by ascending power of hbar.
        diffusion2: Coefficients of sigma_H^2 by ascending power of hbar.
        provenance: Drift contributions by origin ("bH", "bHq1", "bHq2").
        metadata: Quadrature settings and fundamental-solution diagnostics.
        mode: "hopf", or "zero" when hbar is the signed coordinate of a zero-root instability.
    """

    drift: np.ndarray
    diffusion2: np.ndarray
    provenance: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    mode: str = "hopf"

    @classmethod
    def zero(cls, mode: str = "hopf") -> "ReducedCoefficients":
        """Vanishing drift and diffusion."""
        return cls(np.zeros(1), np.zeros(1), {"bH": np.zeros(1)}, mode=mode)

    def drift_at(self, hbar: float | np.ndarray) -> np.ndarray:
        """b_H(hbar)."""
        return polynomial.polyval(hbar, self.drift)

    def diffusion2_at(self, hbar: float | np.ndarray) -> np.ndarray:
        """sigma_H^2(hbar)."""
        return polynomial.polyval(hbar, self.diffusion2)

    def coefficient(self, power: int, *, diffusion: bool = False) -> float:
        """Coefficient of hbar**power (zero beyond the stored degree)."""
        coeffs = self.diffusion2 if diffusion else self.drift
        return float(coeffs[power]) if power < coeffs.size else 0.0

    def plus(self, other: "ReducedCoefficients") -> "ReducedCoefficients":
        """Sum of two contributions; provenance and metadata are merged."""
        provenance = dict(self.provenance)
        for key, value in other.provenance.items():
            provenance[key] = polynomial.polyadd(provenance[key], value) if key in provenance else value
        return ReducedCoefficients(
            polynomial.polyadd(self.drift, other.drift),
            polynomial.polyadd(self.diffusion2, other.diffusion2),
            provenance,
            {**self.metadata, **other.metadata},
            self.mode,
        )

    def to_dict(self) -> dict:
        """JSON-ready form keyed by power of hbar."""

        def by_power(coeffs: np.ndarray) -> dict[str, float]:
            return {str(power): float(value) for power, value in enumerate(coeffs)}

        return {
            "mode": self.mode,
            "variable": "h" if self.mode == "zero" else "hbar",
            "drift": by_power(self.drift),
            "diffusion2": by_power(self.diffusion2),
            "provenance": {key: by_power(value) for key, value in self.provenance.items()},
            "metadata": self.metadata,
        }


@dataclass(frozen=True)
class StableSolutions:
    """Fundamental solutions T(s)(I - pi) 1_{0} e_j for j = 1..n, sampled for s in [0, T_used].

    The raw Euler paths carry a small spurious critical component; ``stacked`` removes it by
    subtracting Phi z_j(s) from every segment.
    """

    eigen: SpectralData
    dt: float
    width: int
    values: np.ndarray
    coordinates: np.ndarray
    used_steps: int
    decay_rate: float
    tail_factor: float
    removed_amplitude: float

    @property
    def s(self) -> np.ndarray:
        """Quadrature grid 0..T_used."""
        return self.dt * np.arange(self.used_steps + 1)

    @property
    def t_used(self) -> float:
        """Integration horizon actually used."""
        return self.dt * self.used_steps

    def _critical(self, j: int, theta: float) -> np.ndarray:
        z = self.coordinates[j, : self.used_steps + 1]
        if self.eigen.is_zero_mode:
            return np.outer(z.real, self.eigen.d.real)
        return 2.0 * (np.exp(1j * self.eigen.omega_c * theta) * np.outer(z, self.eigen.d)).real

    def stacked(self, j: int, lags: tuple[float, ...]) -> np.ndarray:
        """Segment of solution j at each s, read at ``lags`` and stacked: shape (S, n*m)."""
        count = self.used_steps + 1
        columns = []
        for lag in lags:
            offset = -lag / self.dt
            whole = int(np.floor(offset + 1e-9))
            frac = offset - whole
            index = self.width + np.arange(count) - whole
            raw = self.values[j, index]
            if frac > 1e-9:
                raw = (1 - frac) * raw + frac * self.values[j, index - 1]
            columns.append(raw - self._critical(j, lag))
        if not columns:
            return np.zeros((count, 0))
        return np.concatenate(columns, axis=1)

    def stacked_all(self, lags: tuple[float, ...]) -> np.ndarray:
        """``stacked`` for every j, shape (n, S, n*m)."""
        return np.stack([self.stacked(j, lags) for j in range(self.values.shape[0])])

    def metadata(self) -> dict:
        """Diagnostics recorded with every coefficient that uses these solutions."""
        return {
            "t_used": self.t_used,
            "fundamental_dt": self.dt,
            "decay_rate": self.decay_rate,
            "tail_factor": self.tail_factor,
            "removed_critical_amplitude": self.removed_amplitude,
        }


def _simulate_stable(
    eigen: SpectralData, measure: MatrixLagMeasure, t_inf: float, dt: float, decay_tol: float
) -> StableSolutions:
    n = measure.n
    inits = [fundamental_initial(eigen, np.eye(n)[j], dt) for j in range(n)]
    trajectories = integrate_unperturbed_many(measure, inits, t_inf, dt)
    values = np.stack([traj.full_values for traj in trajectories])
    coordinates = np.stack([critical_coordinates(eigen, measure, traj) for traj in trajectories])
    width = trajectories[0].history.steps
    own = values[:, width:]
    if eigen.is_zero_mode:
        critical = coordinates.real[:, :, None] * eigen.d.real
    else:
        critical = 2.0 * (coordinates[:, :, None] * eigen.d).real
    corrected = np.abs(own - critical).max(axis=(0, 2))
    windows = (corrected.size - 1) // width
    maxima = corrected[1 : windows * width + 1].reshape(windows, width).max(axis=1)
    start = max(seg.sup_norm() for seg in inits)
    below = np.flatnonzero(maxima <= decay_tol * start)
    if below.size == 0:
        msg = (
            f"fundamental solutions decayed only to {maxima[-1] / start:.2e} of their initial size "
            f"by T_inf = {t_inf} (tolerance {decay_tol:.1e})"
        )
        raise DecayNotReached(msg)
    last = int(below[0])
    ends = width * dt * np.arange(1, windows + 1)
    first = last // 2
    if last - first >= 1:
        slope = polynomial.polyfit(ends[first : last + 1], np.log(maxima[first : last + 1]), 1)[1]
    else:
        slope = np.log(maxima[last] / start) / ends[last]
    rate = -float(slope)
    if not rate > 0:
        msg = f"fundamental solutions do not decay (fitted rate {rate:.3e})"
        raise DecayNotReached(msg)
    used = (last + 1) * width
    logger.debug("fundamental solutions: decay rate %.4f, horizon %.2f", rate, used * dt)
    return StableSolutions(
        eigen,
        dt,
        width,
        values,
        coordinates,
        used,
        rate,
        float(maxima[last] / rate),
        float(np.abs(coordinates[:, : used + 1]).max()),
    )


@dataclass
class AveragingWorkspace:
    """Everything the averaged coefficients share: eigendata, quadrature sizes, fundamental solutions.

    Attributes:
        eigen: Critical eigendata.
        measure: The linear part L0.
        nodes: Period quadrature nodes M.
        t_inf: Truncation of the s-integrals (default 40 r).
        decay_tol: Required decay of the fundamental solutions relative to their initial size.
        dt: Step of the fundamental-solution simulation (default r/4000).
    """

    eigen: SpectralData
    measure: MatrixLagMeasure
    nodes: int = DEFAULT_NODES
    t_inf: float | None = None
    decay_tol: float = 1e-6
    dt: float | None = None

    @classmethod
    def for_model(
        cls, model: PerturbedModel, *, zero_mode: bool = False, scan: ScanConfig | None = None, **kwargs
    ) -> "AveragingWorkspace":
        """Run the census and eigendata for ``model`` and wrap them in a workspace."""
        if zero_mode:
            locate_zero_root(model.L0, scan)
            return cls(eigendata(model.L0, 0.0), model.L0, **kwargs)
        omega_c, _ = locate_critical_pair(model.L0, scan)
        return cls(eigendata(model.L0, omega_c), model.L0, **kwargs)

    @cached_property
    def stable(self) -> StableSolutions:
        """Fundamental solutions, simulated on first use."""
        r = self.measure.max_delay
        dt = self.dt if self.dt is not None else r / 4000
        grid_steps(r, dt)
        t_inf = self.t_inf if self.t_inf is not None else 40.0 * r
        return _simulate_stable(self.eigen, self.measure, t_inf, dt, self.decay_tol)

    @property
    def times(self) -> np.ndarray:
        """Period nodes t_i = i P / M."""
        return self.eigen.period * np.arange(self.nodes) / self.nodes


def _orbit(eigen: SpectralData, lags: tuple[float, ...], hbar: float, t: np.ndarray) -> np.ndarray:
    """Stacked lag values of the critical orbit, shape (*t.shape, n*m)."""
    t = np.asarray(t, dtype=float)
    if eigen.is_zero_mode:
        return np.broadcast_to(np.tile(eigen.d.real * hbar, len(lags)), (*t.shape, eigen.d.size * len(lags)))
    phase = np.exp(1j * eigen.omega_c * (t[..., None] + np.asarray(lags, dtype=float)))
    u = np.sqrt(2.0 * hbar) * (phase[..., None] * eigen.d).real
    return u.reshape(*t.shape, -1)


def _energy_row(eigen: SpectralData, t: np.ndarray) -> np.ndarray:
    """2 Re(exp(-i omega_c t) Psi_hat_1); E(U_t) = sqrt(2 hbar) times this."""
    return 2.0 * (np.exp(-1j * eigen.omega_c * np.asarray(t))[..., None] * eigen.psi1).real


def _harmonics(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fourier coefficients f_k of f(t) = sum_k f_k exp(i k omega t) from M period samples."""
    count = samples.shape[0]
    return np.rint(np.fft.fftfreq(count, 1.0 / count)).astype(int), np.fft.fft(samples, axis=0) / count


def _correlation(a: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Harmonics of W(s) = avg_t a(t) h(t + s) for real a (M, J) and h (M, L); coefficients (K, J, L)."""
    k, a_hat = _harmonics(a)
    _, h_hat = _harmonics(h)
    coef = np.conj(a_hat)[:, :, None] * h_hat[:, None, :]
    size = np.abs(coef).reshape(coef.shape[0], -1).max(axis=1, initial=0.0)
    keep = size > 1e-13 * max(1.0, size.max(initial=0.0))
    return k[keep], coef[keep]


def _fit(points: np.ndarray, values: np.ndarray, degree: int, label: str) -> np.ndarray:
    coeffs = polynomial.polyfit(points, values, degree)
    residual = float(np.max(np.abs(polynomial.polyval(points, coeffs) - values)))
    if residual > _FIT_TOL * max(1.0, float(np.max(np.abs(values)))):
        msg = f"{label} is not a polynomial of degree {degree} in hbar (fit residual {residual:.2e})"
        raise NumericFailure(msg)
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    return np.where(np.abs(coeffs) < _CLEAN_TOL * scale, 0.0, coeffs)


def _fit_points(degree: int, *, signed: bool = False) -> np.ndarray:
    positive = 0.5 * np.arange(1, degree + 4)
    if signed:
        return np.concatenate([-positive[::-1], positive])
    return positive


def _degree(functional: PolyLagFunctional | None) -> int:
    return 0 if functional is None else functional.degree


def _present(functional: PolyLagFunctional | None) -> bool:
    return functional is not None and not functional.is_zero


def averaged_white(model: PerturbedModel, eigen: SpectralData, *, nodes: int = DEFAULT_NODES) -> ReducedCoefficients:
    """Averaged coefficients for white noise.

    b(eta) = E(eta).G(eta) + 2|Psi_hat_1 F(eta)|^2 and sigma(eta) = E(eta).F(eta) are averaged
    over one period of the critical orbit at several hbar and fitted exactly.

    Raises:
        DomainError: If the model is not driven by white noise or the instability is a zero root.
    """
    if not model.is_white:
        msg = "averaged_white needs a white-noise model"
        raise DomainError(msg)
    if eigen.is_zero_mode:
        msg = "zero-root instabilities are averaged by zero_root_coefficients"
        raise DomainError(msg)
    t = eigen.period * np.arange(nodes) / nodes
    energy = _energy_row(eigen, t)
    degree_b = max(model.F.degree, (_degree(model.G) + 1) // 2, 1)
    degree_s = model.F.degree + 1
    points = _fit_points(max(degree_b, degree_s))
    drift, diffusion2 = [], []
    for hbar in points:
        root = np.sqrt(2.0 * hbar)
        f_values = model.F.evaluate(_orbit(eigen, model.F.lags, hbar, t))
        b = 2.0 * np.abs(f_values @ eigen.psi1) ** 2
        if _present(model.G):
            b = b + root * np.sum(energy * model.G.evaluate(_orbit(eigen, model.G.lags, hbar, t)), axis=-1)
        drift.append(b.mean())
        diffusion2.append(np.mean((root * np.sum(energy * f_values, axis=-1)) ** 2))
    drift_coeffs = _fit(points, np.array(drift), degree_b, "b_H")
    return ReducedCoefficients(
        drift_coeffs,
        _fit(points, np.array(diffusion2), degree_s, "sigma_H^2"),
        {"bH": drift_coeffs},
        {"nodes": nodes},
    )


@dataclass(frozen=True)
class LinearConstants:
    """Constants of the averaged linear equation dh = C_b h dt + sqrt(C_sigma) h dW.

    Attributes:
        upsilon: 2x2 matrix Psi_hat_i L1 Phi_j.
        C_b: Drift constant.
        C_sigma: Squared-diffusion constant.
        lambda_avg: Lyapunov exponent C_b - C_sigma / 2.
        theta_star: arg Upsilon_11 (white noise).
        R0: Integral of the noise autocorrelation (general noise).
        R2c: Integral of R(s) cos(2 omega_c s) (general noise).
        R_hat1: Stable-space interaction term (general noise).
        R_hat2: Its conjugate partner.
    """

    upsilon: np.ndarray
    C_b: float
    C_sigma: float
    lambda_avg: float
    theta_star: float | None = None
    R0: float | None = None
    R2c: float | None = None
    R_hat1: complex | None = None
    R_hat2: complex | None = None

    @property
    def stable(self) -> bool:
        """True when the averaged linear equation decays (lambda_avg < 0)."""
        return self.lambda_avg < 0

    def to_dict(self) -> dict:
        """JSON-ready form; complex entries become {"re", "im"} pairs."""

        def pair(value: complex) -> dict:
            return {"re": float(np.real(value)), "im": float(np.imag(value))}

        out = {
            "upsilon": [[pair(value) for value in row] for row in self.upsilon],
            "C_b": self.C_b,
            "C_sigma": self.C_sigma,
            "lambda_avg": self.lambda_avg,
        }
        if self.theta_star is not None:
            out["theta_star"] = self.theta_star
            out["cos_2theta_positive"] = bool(np.cos(2 * self.theta_star) > 0)
        if self.R0 is not None:
            out |= {"R0": self.R0, "R2c": self.R2c, "R_hat1": pair(self.R_hat1), "R_hat2": pair(self.R_hat2)}
        return out


def _upsilon(model: PerturbedModel, eigen: SpectralData) -> tuple[np.ndarray, np.ndarray | None]:
    """Upsilon_ij = Psi_hat_i L1 Phi_j and v = L1 Phi_1 (None when L1 = 0)."""
    if model.F.is_zero:
        return np.zeros((2, 2), dtype=complex), None
    if not model.F.is_linear:
        msg = "linear constants need F = L1 linear with no constant term"
        raise DomainError(msg)
    lags = np.asarray(model.F.lags)
    stacked = (np.exp(1j * eigen.omega_c * lags)[:, None] * eigen.d).reshape(-1)
    v = model.F.evaluate(stacked.real) + 1j * model.F.evaluate(stacked.imag)
    columns = np.stack([v, v.conj()], axis=1)
    return eigen.psi_hat @ columns, v


def averaged_linear_white(model: PerturbedModel, eigen: SpectralData) -> LinearConstants:
    """C_b, C_sigma and lambda_avg = -Re(Upsilon_11^2) for F = L1 linear and white noise."""
    upsilon, _ = _upsilon(model, eigen)
    u11, u12, u21, u22 = upsilon[0, 0], upsilon[0, 1], upsilon[1, 0], upsilon[1, 1]
    c_b = float(np.real(u11 * u22 + u12 * u21))
    c_sigma = float(np.real((u11 + u22) ** 2 + 2 * u12 * u21))
    return LinearConstants(
        upsilon, c_b, c_sigma, float(-np.real(u11**2)), theta_star=float(np.angle(u11)) if abs(u11) else 0.0
    )


def _require_general(model: PerturbedModel) -> None:
    if model.is_white:
        msg = "this coefficient needs a two-state or exponential-sum noise model"
        raise DomainError(msg)


def averaged_linear_gennoise(model: PerturbedModel, workspace: AveragingWorkspace) -> LinearConstants:
    """Linear constants for general noise, lambda_avg = 2 Upsilon_12 Upsilon_21 R2c + R_hat1 + R_hat2."""
    _require_general(model)
    eigen = workspace.eigen
    noise = model.noise
    upsilon, v = _upsilon(model, eigen)
    r0 = noise.integral()
    r2c = noise.cosine_integral(2 * eigen.omega_c)
    u11, u12, u21, u22 = upsilon[0, 0], upsilon[0, 1], upsilon[1, 0], upsilon[1, 1]
    r_hat1 = r_hat2 = 0j
    if v is not None:
        stable = workspace.stable
        s = stable.s
        weight = noise.autocorrelation(s)
        response = sum(v[j] * model.F.evaluate(stable.stacked(j, model.F.lags)) for j in range(v.size))
        r_hat1 = complex(np.trapezoid(weight * np.exp(-1j * eigen.omega_c * s) * (response @ eigen.psi1), s))
        conjugate = sum(np.conj(v[j]) * model.F.evaluate(stable.stacked(j, model.F.lags)) for j in range(v.size))
        r_hat2 = complex(np.trapezoid(weight * np.exp(1j * eigen.omega_c * s) * (conjugate @ eigen.psi_hat[1]), s))
        if abs(r_hat2 - np.conj(r_hat1)) > 1e-10 * max(1.0, abs(r_hat1)):
            msg = f"R_hat2 = {r_hat2} is not the conjugate of R_hat1 = {r_hat1}"
            raise NumericFailure(msg)
    c_b = float(np.real((u11 + u22) ** 2 * r0 + 4 * u12 * u21 * r2c + r_hat1 + r_hat2))
    c_sigma = float(np.real(2 * ((u11 + u22) ** 2 * r0 + 2 * u12 * u21 * r2c)))
    return LinearConstants(
        upsilon, c_b, c_sigma, c_b - c_sigma / 2, R0=r0, R2c=r2c, R_hat1=r_hat1, R_hat2=r_hat2
    )


@dataclass(frozen=True)
class CenteringCheck:
    """Result of the resonance test on G_q."""

    passed: bool
    residual: float


def check_gq_centering(model: PerturbedModel, eigen: SpectralData, *, nodes: int = DEFAULT_NODES) -> CenteringCheck:
    """Test avg_t exp(-i omega_c t) Psi_hat_1 G_q(U_t) = 0 (Psi_hat G_q(Phi h) = 0 for a zero root)."""
    gq = model.Gq
    if gq is None or gq.is_zero:
        return CenteringCheck(passed=True, residual=0.0)
    t = np.zeros(1) if eigen.is_zero_mode else eigen.period * np.arange(nodes) / nodes
    residual, scale = 0.0, 1.0
    for hbar in _fit_points(1, signed=eigen.is_zero_mode):
        values = gq.evaluate(_orbit(eigen, gq.lags, hbar, t)) @ eigen.psi1
        scale = max(scale, float(np.max(np.abs(values))))
        if eigen.is_zero_mode:
            residual = max(residual, float(np.max(np.abs(values))))
        else:
            residual = max(residual, float(abs(np.mean(np.exp(-1j * eigen.omega_c * t) * values))))
    return CenteringCheck(passed=residual <= 1e-8 * scale, residual=residual)


def _bhq1(eigen: SpectralData, gq: PolyLagFunctional, hbar: float, gauss_nodes: int) -> float:
    """Double period integral over 0 <= t <= u <= P by tensor Gauss-Legendre on (t, s = u - t)."""
    period = eigen.period
    omega = eigen.omega_c
    x, w = np.polynomial.legendre.leggauss(gauss_nodes)
    t = period * (1 + x) / 2
    t_weights = period / 2 * w
    s = (period - t)[:, None] * (1 + x)[None, :] / 2
    s_weights = (period - t)[:, None] / 2 * w[None, :]
    u = t[:, None] + s
    alpha_t = gq.evaluate(_orbit(eigen, gq.lags, hbar, t)) @ eigen.psi1
    u_stack = _orbit(eigen, gq.lags, hbar, u)
    alpha_u = gq.evaluate(u_stack) @ eigen.psi1
    bracket = 4.0 * (alpha_t[:, None] * np.exp(1j * omega * s) * np.conj(alpha_u)).real
    lags = np.asarray(gq.lags, dtype=float)
    phase = np.exp(1j * omega * (lags + s[..., None]))
    direction = 2.0 * (phase[..., None] * eigen.d * alpha_t[:, None, None, None]).real
    direction = direction.reshape(*s.shape, -1)
    frechet = np.sqrt(2.0 * hbar) * np.sum(_energy_row(eigen, u) * gq.differential(u_stack, direction), axis=-1)
    return float(np.einsum("a,ab,ab->", t_weights, s_weights, bracket + frechet) / period)


def _stable_interaction(
    workspace: AveragingWorkspace,
    source: PolyLagFunctional,
    hbar: float,
    weight: np.ndarray | None = None,
) -> float:
    """sqrt(2 hbar) int_0^T weight(s) sum_j W_j(s) . Y_j(s) ds.

    W_j(s) = avg_t source_j(U_t) [E_{t+s} J_source(U_{t+s})] is a trigonometric polynomial in s,
    built from its harmonics; Y_j(s) is the stacked stable fundamental solution.
    """
    eigen = workspace.eigen
    stable = workspace.stable
    t = workspace.times
    stack = _orbit(eigen, source.lags, hbar, t)
    row = np.einsum("mi,mik->mk", _energy_row(eigen, t), source.jacobian(stack))
    k, coef = _correlation(source.evaluate(stack), row)
    s = stable.s
    waves = np.exp(1j * eigen.omega_c * np.multiply.outer(s, k))
    response = np.einsum("sjl,jsl->s", np.einsum("sk,kjl->sjl", waves, coef).real, stable.stacked_all(source.lags))
    if weight is not None:
        response = response * weight
    return float(np.sqrt(2.0 * hbar) * np.trapezoid(response, dx=stable.dt))


def averaged_quadratic(model: PerturbedModel, workspace: AveragingWorkspace) -> ReducedCoefficients:
    """Quadratic corrections bHq1 (critical space) and bHq2 (stable-critical interaction).

    Raises:
        CenteringViolated: G_q has a resonant first harmonic.
        DecayNotReached: The fundamental solutions did not decay within T_inf.
    """
    eigen = workspace.eigen
    gq = model.Gq
    if gq is None or gq.is_zero:
        return ReducedCoefficients.zero()
    if eigen.is_zero_mode:
        msg = "zero-root corrections are computed by zero_root_coefficients"
        raise DomainError(msg)
    check = check_gq_centering(model, eigen, nodes=workspace.nodes)
    if not check.passed:
        msg = f"G_q is not centered: resonant average {check.residual:.3e}"
        raise CenteringViolated(msg)
    degree = max(gq.degree, 1)
    points = _fit_points(degree)
    first = [_bhq1(eigen, gq, hbar, GAUSS_NODES) for hbar in points]
    second = [_stable_interaction(workspace, gq, hbar) for hbar in points]
    q1 = _fit(points, np.array(first), degree, "bHq1")
    q2 = _fit(points, np.array(second), degree, "bHq2")
    stable = workspace.stable
    return ReducedCoefficients(
        polynomial.polyadd(q1, q2),
        np.zeros(1),
        {"bHq1": q1, "bHq2": q2},
        {"nodes": workspace.nodes, "gauss_nodes": GAUSS_NODES, **stable.metadata()},
    )


def averaged_gennoise(model: PerturbedModel, workspace: AveragingWorkspace) -> ReducedCoefficients:
    """Averaged coefficients for noise with exponential-sum autocorrelation R.

    sigma_H^2 = avg 2 b(U_t) int R(s) b(U_{t+s}) ds with b = E.F. The drift adds the average of
    E.G, the second-derivative term of h and the Frechet term of F against T(s) 1_{0} e_j: its
    critical part in closed form through the Laplace transform of R, its stable part by quadrature.
    """
    _require_general(model)
    eigen = workspace.eigen
    if eigen.is_zero_mode:
        msg = "zero-root instabilities are averaged by zero_root_coefficients"
        raise DomainError(msg)
    noise = model.noise
    omega = eigen.omega_c
    t = workspace.times
    energy = _energy_row(eigen, t)
    f = model.F
    lags = np.asarray(f.lags, dtype=float)
    # D_j(s) = delta_j exp(i omega s) + conj
    delta = (np.exp(1j * omega * lags)[:, None, None] * np.outer(eigen.d, eigen.psi1)).transpose(2, 0, 1)
    delta = delta.reshape(eigen.d.size, -1)
    weight = None
    degree_b = max(f.degree, (_degree(model.G) + 1) // 2, 1)
    degree_s = f.degree + 1
    points = _fit_points(max(degree_b, degree_s))
    drift, diffusion2 = [], []
    for hbar in points:
        root = np.sqrt(2.0 * hbar)
        stack = _orbit(eigen, f.lags, hbar, t)
        f_values = f.evaluate(stack)
        k, beta_hat = _harmonics(f_values @ eigen.psi1)
        second = 4.0 * np.real(np.sum(np.abs(beta_hat) ** 2 * noise.laplace(1j * (1 - k) * omega)))
        k, phi_hat = _harmonics(np.sum(energy * f_values, axis=-1))
        diffusion2.append(4.0 * hbar * np.real(np.sum(np.abs(phi_hat) ** 2 * noise.laplace(1j * k * omega))))
        b = second
        if f.width:
            row = np.einsum("mi,mik->mk", energy, f.jacobian(stack))
            k, coef = _correlation(f_values, row)
            up = np.einsum("kjl,jl->k", coef, delta) * noise.laplace(1j * (k + 1) * omega)
            down = np.einsum("kjl,jl->k", coef, delta.conj()) * noise.laplace(1j * (k - 1) * omega)
            b += root * np.real(np.sum(up + down))
            if weight is None:
                weight = noise.autocorrelation(workspace.stable.s)
            b += _stable_interaction(workspace, f, hbar, weight)
        if _present(model.G):
            b += root * np.mean(np.sum(energy * model.G.evaluate(_orbit(eigen, model.G.lags, hbar, t)), axis=-1))
        drift.append(b)
    drift_coeffs = _fit(points, np.array(drift), degree_b, "b_H")
    metadata = {"nodes": workspace.nodes, "R0": noise.integral()}
    if weight is not None:
        metadata |= workspace.stable.metadata()
    return ReducedCoefficients(
        drift_coeffs, _fit(points, np.array(diffusion2), degree_s, "sigma_H^2"), {"bH": drift_coeffs}, metadata
    )


def zero_root_coefficients(model: PerturbedModel, workspace: AveragingWorkspace) -> ReducedCoefficients:
    """Averaged coefficients of the signed coordinate h = <Psi, x_t> for a zero-root instability.

    White noise: b_H = Psi_hat G(Phi h), sigma_H^2 = (Psi_hat F(Phi h))^2 and
    bHq2 = int_0^inf (T(s)(I - pi) 1_{0} G_q(Phi h) . grad) Psi_hat G_q(Phi h) ds.
    General noise: b_H = R0 (1_{0} F(Phi h) . grad) Psi_hat F(Phi h), sigma_H^2 = 2 R0 (Psi_hat F(Phi h))^2.

    Raises:
        NoZeroRoot: The workspace describes an oscillatory instability.
        CenteringViolated: Psi_hat G_q(Phi h) does not vanish.
    """
    eigen = workspace.eigen
    if not eigen.is_zero_mode:
        msg = "zero_root_coefficients needs eigendata of a zero root"
        raise NoZeroRoot(msg)
    psi = eigen.psi1.real
    f, g, gq = model.F, model.G, model.Gq
    here = np.zeros(1)
    degree_b = max(2 * f.degree if not model.is_white else 0, _degree(g), 2 * _degree(gq), 1)
    degree_s = max(2 * f.degree, 1)
    points = _fit_points(max(degree_b, degree_s), signed=True)
    if _present(gq):
        check = check_gq_centering(model, eigen)
        if not check.passed:
            msg = f"Psi_hat G_q(Phi h) does not vanish (residual {check.residual:.3e})"
            raise CenteringViolated(msg)
    r0 = None if model.is_white else model.noise.integral()
    integrals = None
    if _present(gq):
        integrals = np.trapezoid(workspace.stable.stacked_all(gq.lags), dx=workspace.stable.dt, axis=1)
    drift, corrections, diffusion2 = [], [], []
    for h in points:
        f_stack = _orbit(eigen, f.lags, h, here)[0]
        f_value = f.evaluate(f_stack)
        sigma = float(psi @ f_value)
        b = 0.0 if not _present(g) else float(psi @ g.evaluate(_orbit(eigen, g.lags, h, here)[0]))
        if r0 is None:
            diffusion2.append(sigma**2)
        else:
            diffusion2.append(2.0 * r0 * sigma**2)
            blocks = [f_value if lag == 0 else np.zeros_like(f_value) for lag in f.lags]
            direction = np.concatenate(blocks or [here[:0]])
            b += r0 * float(psi @ f.differential(f_stack, direction))
        drift.append(b)
        correction = 0.0
        if integrals is not None:
            q_stack = _orbit(eigen, gq.lags, h, here)[0]
            row = psi @ gq.jacobian(q_stack)
            correction = float(gq.evaluate(q_stack) @ (integrals @ row))
        corrections.append(correction)
    drift_coeffs = _fit(points, np.array(drift), degree_b, "b_H")
    q2 = _fit(points, np.array(corrections), degree_b, "bHq2")
    metadata = {} if not _present(gq) else workspace.stable.metadata()
    if r0 is not None:
        metadata["R0"] = r0
    return ReducedCoefficients(
        polynomial.polyadd(drift_coeffs, q2),
        _fit(points, np.array(diffusion2), degree_s, "sigma_H^2"),
        {"bH": drift_coeffs, "bHq1": np.zeros(1), "bHq2": q2},
        metadata,
        mode="zero",
    )


def averaged_total(model: PerturbedModel, workspace: AveragingWorkspace) -> ReducedCoefficients:
    """All averaged coefficients of ``model``: base drift and diffusion plus quadratic corrections."""
    if workspace.eigen.is_zero_mode:
        return zero_root_coefficients(model, workspace)
    if model.is_white:
        base = averaged_white(model, workspace.eigen, nodes=workspace.nodes)
    else:
        base = averaged_gennoise(model, workspace)
    if _present(model.Gq):
        base = base.plus(averaged_quadratic(model, workspace))
    return base


def stability_report(coeffs: ReducedCoefficients) -> dict:
    """Sign analysis of the averaged equation.

    The averaging theorem for white noise presumes that G has a stabilizing effect at large
    amplitude; only the sign of the leading drift coefficient is checked here.
    """
    b0 = coeffs.coefficient(0)
    b1 = coeffs.coefficient(1)
    s0 = coeffs.coefficient(0, diffusion=True)
    s1 = coeffs.coefficient(1, diffusion=True)
    s2 = coeffs.coefficient(2, diffusion=True)
    report: dict = {"drift_at_zero": b0, "diffusion2_at_zero": s0}
    if b0 > 0 or s0 > 0:
        report["trivial"] = "excited"
    elif s1 > 0:
        report["trivial"] = "diffusive"
    else:
        report["lyapunov"] = b1 - s2 / 2
        report["trivial"] = "stable" if b1 - s2 / 2 < 0 else "unstable"
    roots = polynomial.polyroots(coeffs.drift) if np.any(coeffs.drift[1:]) else np.array([])
    report["equilibria"] = sorted(
        float(root.real) for root in np.atleast_1d(roots) if abs(root.imag) < 1e-9 and root.real > 1e-12
    )
    live = np.flatnonzero(coeffs.drift)
    report["large_amplitude_stabilizing"] = bool(live.size and coeffs.drift[live[-1]] < 0)
    report["note"] = (
        "Averaging is justified only when the drift pulls large amplitudes back; "
        "large_amplitude_stabilizing records the sign of the leading drift coefficient."
    )
    return report


def _scalar_spec() -> tuple[SpectralData, MatrixLagMeasure]:
    measure = catalog.scalar_verge().L0
    omega_c, _ = locate_critical_pair(measure)
    return eigendata(measure, omega_c), measure


def lyapunov_surface(
    r1_grid: np.ndarray, g_grid: np.ndarray, *, sigma0: float = 1.0, workspace: AveragingWorkspace | None = None
) -> np.ndarray:
    """lambda_avg of the scalar model with L1 eta = eta(-r1) under two-state noise, shape (len r1, len g)."""
    if workspace is None:
        eigen, measure = _scalar_spec()
        workspace = AveragingWorkspace(eigen, measure)
    surface = np.empty((len(r1_grid), len(g_grid)))
    for i, r1 in enumerate(r1_grid):
        for j, g in enumerate(g_grid):
            model = catalog.scalar_markov(g=float(g), sigma0=sigma0, r1=float(r1))
            surface[i, j] = averaged_linear_gennoise(model, workspace).lambda_avg
    return surface


def lyapunov_sign_change(bracket: tuple[float, float] = (0.6, 1.0)) -> float:
    """The delay r1 in ``bracket`` where the white-noise lambda_avg of eta(-r1) changes sign."""
    eigen, _ = _scalar_spec()

    def exponent(r1: float) -> float:
        return averaged_linear_white(catalog.scalar_linear_white(r1), eigen).lambda_avg

    if exponent(bracket[0]) * exponent(bracket[1]) > 0:
        msg = f"lambda_avg has the same sign at both ends of {bracket}"
        raise DomainError(msg)
    return float(brentq(exponent, *bracket, xtol=1e-12))


@dataclass(frozen=True)
class VanDerPolConstants:
    """Averaged constants of the delayed van der Pol oscillator near its threshold.

    dh = (C_b h + C_b2 h^2) dt + sqrt(C_sigma) h dW with beta_tilde = (beta - beta_c) / eps^2.
    """

    beta_c: float
    omega_c: float
    c: complex
    beta_tilde: float
    C_b: float
    C_b2: float
    C_sigma: float

    def to_dict(self) -> dict:
        """JSON-ready form."""
        return {
            "beta_c": self.beta_c,
            "omega_c": self.omega_c,
            "c": {"re": self.c.real, "im": self.c.imag},
            "beta_tilde": self.beta_tilde,
            "C_b": self.C_b,
            "C_b2": self.C_b2,
            "C_sigma": self.C_sigma,
        }


def vanderpol_threshold(
    *, eta: float = 0.3, kappa: float = 0.0, omega0: float = 1.0, r: float = 2.0
) -> tuple[float, float, complex]:
    """Deterministic threshold beta_c, frequency omega_c and the constant c of the oscillator."""
    beta_c, omega_c = catalog.van_der_pol_threshold(eta=eta, kappa=kappa, omega0=omega0, r=r)
    measure = catalog.van_der_pol_measure(beta_c, eta=eta, kappa=kappa, omega0=omega0, r=r)
    eigen = eigendata(measure, omega_c, normalization=NormalizationKind.ANCHOR, anchor=0)
    # d = (1, i omega_c); c scales the x2 entry of Psi_hat_1 back to the position variable
    return beta_c, omega_c, complex(1j * eigen.psi1[1] / omega_c)


def vanderpol_constants(
    beta: float,
    *,
    epsilon: float = 0.1,
    d_tilde: float = 1.0,
    b: float = 1.0,
    eta: float = 0.3,
    kappa: float = 0.0,
    omega0: float = 1.0,
    r: float = 2.0,
) -> VanDerPolConstants:
    """C_b, C_b2 and C_sigma in closed form from beta_c, omega_c and c."""
    beta_c, omega_c, c = vanderpol_threshold(eta=eta, kappa=kappa, omega0=omega0, r=r)
    beta_tilde = (beta - beta_c) / epsilon**2
    w2 = omega_c**2
    return VanDerPolConstants(
        beta_c,
        omega_c,
        c,
        beta_tilde,
        2 * beta_tilde * w2 * c.real + 4 * d_tilde * abs(c) ** 2 * w2,
        -b * w2 * c.real,
        2 * d_tilde * (2 * abs(c) ** 2 * w2 + 4 * w2 * c.imag**2),
    )
