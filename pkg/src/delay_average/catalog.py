"""Ready-made models: the scalar delay equation, the delayed van der Pol oscillator and two test systems."""

from collections.abc import Callable

import numpy as np

from delay_average.errors import ConfigError
from delay_average.model import (
    MatrixLagMeasure,
    NoiseModel,
    PerturbedModel,
    PolyLagFunctional,
    scalar_monomial,
)
from delay_average.spectrum import locate_threshold

__all__ = [
    "PRESETS",
    "build_preset",
    "no_delay_oracle",
    "scalar_cubic",
    "scalar_linear_white",
    "scalar_markov",
    "scalar_verge",
    "van_der_pol",
    "van_der_pol_measure",
    "van_der_pol_threshold",
    "zero_root_pair",
]


def _scalar_l0(kappa: float) -> MatrixLagMeasure:
    return MatrixLagMeasure.from_terms([(-1.0, [[kappa]])])


def scalar_verge(kappa: float = -np.pi / 2, *, epsilon: float = 0.0) -> PerturbedModel:
    """x'(t) = kappa x(t-1), critical at kappa = -pi/2 with omega_c = pi/2."""
    return PerturbedModel(_scalar_l0(kappa), PolyLagFunctional.zero(1), epsilon=epsilon, name="scalar-verge")


def scalar_cubic(
    sigma: float = 1.0,
    gamma_c: float = 1.0,
    gamma_q: float = 0.0,
    gamma_o: float = 0.0,
    *,
    epsilon: float = 0.025,
) -> PerturbedModel:
    """Scalar verge model with additive noise sigma, cubic damping and an optional quadratic term.

    dx = -pi/2 x(t-1) dt + eps gamma_q x(t-1)^2 dt + eps^2 (gamma_c x(t-1)^3 - gamma_o x(t-1)) dt + eps sigma dW.
    """
    g = scalar_monomial(-1.0, 3, gamma_c).plus(scalar_monomial(-1.0, 1, -gamma_o))
    return PerturbedModel(
        _scalar_l0(-np.pi / 2),
        PolyLagFunctional.constant([sigma]),
        G=g,
        Gq=scalar_monomial(-1.0, 2, gamma_q) if gamma_q else None,
        epsilon=epsilon,
        name="scalar-cubic",
    )


def scalar_linear_white(r1: float = 1.0, *, epsilon: float = 0.1) -> PerturbedModel:
    """Multiplicative white noise through L1 eta = eta(-r1)."""
    return PerturbedModel(
        _scalar_l0(-np.pi / 2), scalar_monomial(-r1, 1), epsilon=epsilon, name="scalar-linear-white"
    )


def scalar_markov(g: float = 2.0, sigma0: float = 1.0, r1: float = 1.0, *, epsilon: float = 0.025) -> PerturbedModel:
    """dx = -pi/2 x(t-1) dt + eps sigma(xi_t) x(t-r1) dt with xi a symmetric two-state chain."""
    return PerturbedModel(
        _scalar_l0(-np.pi / 2),
        scalar_monomial(-r1, 1),
        noise=NoiseModel.two_state_markov(g, sigma0),
        epsilon=epsilon,
        name="scalar-markov",
    )


def van_der_pol_measure(
    beta: float, *, eta: float = 0.3, kappa: float = 0.0, omega0: float = 1.0, r: float = 2.0
) -> MatrixLagMeasure:
    """Linear part of x1' = x2, x2' = -omega0^2 x1 + beta x2 - eta x1(t-r) + kappa x2(t-r)."""
    return MatrixLagMeasure.from_terms(
        [
            (0.0, [[0.0, 1.0], [-(omega0**2), beta]]),
            (-r, [[0.0, 0.0], [-eta, kappa]]),
        ]
    )


def van_der_pol_threshold(
    *, eta: float = 0.3, kappa: float = 0.0, omega0: float = 1.0, r: float = 2.0, beta_guess: float = -0.3
) -> tuple[float, float]:
    """Deterministic threshold beta_c and critical frequency omega_c."""

    def factory(beta: float) -> MatrixLagMeasure:
        return van_der_pol_measure(beta, eta=eta, kappa=kappa, omega0=omega0, r=r)

    return locate_threshold(factory, beta_guess, omega0)


def van_der_pol(
    beta: float = -0.301,
    *,
    eta: float = 0.3,
    kappa: float = 0.0,
    omega0: float = 1.0,
    r: float = 2.0,
    d_tilde: float = 1.0,
    b: float = 1.0,
    epsilon: float = 0.1,
) -> PerturbedModel:
    """Delayed van der Pol oscillator at beta = beta_c + eps^2 beta_tilde with noise on the velocity.

    The linear part sits at beta_c; the offset beta_tilde x2 and the damping -b x1^2 x2 form G,
    and sqrt(2 D_tilde) x1 dW drives x2.
    """
    if not epsilon > 0:
        msg = "the oscillator's epsilon scales the distance to threshold and must be positive"
        raise ConfigError(msg)
    beta_c, _ = van_der_pol_threshold(eta=eta, kappa=kappa, omega0=omega0, r=r)
    beta_tilde = (beta - beta_c) / epsilon**2
    g = PolyLagFunctional.from_terms(
        [0.0],
        2,
        {
            (0, 1): [0.0, beta_tilde],
            (2, 1): [0.0, -b],
        },
    )
    f = PolyLagFunctional.from_terms([0.0], 2, {(1, 0): [0.0, np.sqrt(2 * d_tilde)]})
    return PerturbedModel(
        van_der_pol_measure(beta_c, eta=eta, kappa=kappa, omega0=omega0, r=r),
        f,
        G=g,
        epsilon=epsilon,
        name="van-der-pol",
    )


def no_delay_oracle(*, epsilon: float = 0.05) -> PerturbedModel:
    """Oscillator (x1, x2) coupled to a stable mode x3 by x2 x3 and x2^2, written with lag 0 only.

    The declared horizon r = 1 only fixes the segment length.
    """
    l0 = MatrixLagMeasure.from_terms([(0.0, [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])], max_delay=1.0)
    gq = PolyLagFunctional.from_terms(
        [0.0],
        3,
        {
            (0, 1, 1): [0.0, 1.0, 0.0],
            (0, 2, 0): [0.0, 0.0, 1.0],
        },
    )
    return PerturbedModel(l0, PolyLagFunctional.zero(3), Gq=gq, epsilon=epsilon, name="no-delay-oracle")


def zero_root_pair(
    sigma: float = 1.0, gamma: float = 1.0, *, noise: NoiseModel | None = None, epsilon: float = 0.05
) -> PerturbedModel:
    """Two-dimensional system with a simple zero root, Phi = (1, 0), Psi proportional to (1, 1/2).

    x1' = -x1 + x2/2 + x1(t-1) + ..., x2' = -2 x2 + x2(t-1) + ...; G_q satisfies Psi_hat G_q(Phi h) = 0.
    """
    l0 = MatrixLagMeasure.from_terms([(0.0, [[-1.0, 0.5], [0.0, -2.0]]), (-1.0, np.eye(2))])
    lags = [0.0, -1.0]
    gq = PolyLagFunctional.from_terms(
        lags,
        2,
        {
            (0, 0, 2, 0): [1.0, -2.0],
            (1, 1, 0, 0): [0.0, 1.0],
        },
    )
    g = PolyLagFunctional.from_terms(lags, 2, {(3, 0, 0, 0): [-gamma, 0.0]})
    return PerturbedModel(
        l0,
        PolyLagFunctional.constant([sigma, 0.0]),
        G=g,
        Gq=gq,
        noise=noise or NoiseModel.wiener(),
        epsilon=epsilon,
        name="zero-root-pair",
    )


PRESETS: dict[str, Callable[..., PerturbedModel]] = {
    "scalar-verge": scalar_verge,
    "scalar-cubic": scalar_cubic,
    "scalar-linear-white": scalar_linear_white,
    "scalar-markov": scalar_markov,
    "van-der-pol": van_der_pol,
    "no-delay-oracle": no_delay_oracle,
    "zero-root-pair": zero_root_pair,
}


def build_preset(name: str, **params: float) -> PerturbedModel:
    """Instantiate a preset by name, passing preset parameters as keywords."""
    if name not in PRESETS:
        msg = f"unknown model preset {name!r} (choose from {', '.join(PRESETS)})"
        raise ConfigError(msg)
    try:
        return PRESETS[name](**params)
    except TypeError as exc:
        msg = f"bad parameters for preset {name!r}: {exc}"
        raise ConfigError(msg) from exc
