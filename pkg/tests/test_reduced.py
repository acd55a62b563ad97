"""Tests for the reduced SDE, its integrator and closed-form predictions."""

import numpy as np
import pytest

from delay_average.averaging import ReducedCoefficients
from delay_average.errors import ConfigError, DomainError, NotNormalizable
from delay_average.reduced import (
    THRESHOLD_CAVEAT,
    ReducedSDE,
    averaged_lyapunov,
    first_passage,
    integrate_reduced,
    integrate_reduced_ensemble,
    invariant_density,
    log_moments,
    noise_shifted_threshold,
)

VDP_C = 0.410042 + 0.081894j
VDP_BETA_C = -0.298724


class TestReducedSDE:
    """Tests for the reduced equation itself."""

    def test_from_constants(self):
        """Test drift and diffusion of the linear-plus-quadratic form."""
        sde = ReducedSDE.from_constants(0.5, 0.25, -1.0)
        assert sde.drift(2.0) == pytest.approx(1.0 - 4.0)
        assert sde.diffusion2(2.0) == pytest.approx(1.0)
        assert sde.equilibrium() == pytest.approx(0.5)
        assert sde.clamped

    def test_negative_diffusion_rejected(self):
        """Test that C_sigma < 0 is refused."""
        with pytest.raises(DomainError):
            ReducedSDE.from_constants(0.5, -0.1)

    def test_no_equilibrium(self):
        """Test that a pure noise term has no equilibrium."""
        sde = ReducedSDE(ReducedCoefficients(np.array([0.5]), np.array([0.0, 1.0])))
        assert sde.equilibrium() is None

    def test_zero_mode_not_clamped(self):
        """Test that the signed zero-root coordinate may go negative."""
        sde = ReducedSDE(ReducedCoefficients(np.array([0.0, -1.0]), np.array([0.25]), mode="zero"))
        assert not sde.clamped
        path = integrate_reduced(sde, -0.5, dt=0.01, T=0.1, seed=1)
        assert path.values[0] == -0.5


class TestIntegrateReduced:
    """Tests for reduced path integration."""

    def test_single_path_matches_ensemble(self):
        """Test that path i of an ensemble equals the single path with path_index i."""
        sde = ReducedSDE.from_constants(0.3, 0.5, -0.5)
        ensemble = integrate_reduced_ensemble(sde, 0.7, dt=0.01, T=1.0, seed=8, paths=3, record=True)
        single = integrate_reduced(sde, 0.7, dt=0.01, T=1.0, seed=8, path_index=2)
        np.testing.assert_array_equal(ensemble.trace[2], single.values)
        assert ensemble.final.shape == (3,)

    def test_rows(self):
        """Test the (t, h) table of a path."""
        path = integrate_reduced(ReducedSDE.from_constants(0.0, 0.0), 1.0, dt=0.1, T=1.0, seed=0)
        header, rows = path.to_rows()
        assert header == ["t", "h"]
        assert rows.shape == (11, 2)
        np.testing.assert_allclose(rows[:, 1], 1.0)

    def test_clamp_keeps_energy_nonnegative(self):
        """Test that strongly damped noisy paths are clamped at zero and counted."""
        sde = ReducedSDE(ReducedCoefficients(np.array([0.0, -5.0]), np.array([4.0])))
        ensemble = integrate_reduced_ensemble(sde, 0.01, dt=0.01, T=1.0, seed=3, paths=20)
        assert (ensemble.final >= 0).all()
        assert ensemble.clamp_rate > 0
        assert ensemble.summary()["clamp_rate"] == ensemble.clamp_rate

    def test_negative_start_rejected(self):
        """Test that the energy cannot start below zero."""
        with pytest.raises(DomainError):
            integrate_reduced(ReducedSDE.from_constants(0.1, 0.1), -0.1, dt=0.01, T=1.0, seed=0)

    def test_bad_settings(self):
        """Test that a nonpositive step is a configuration error."""
        with pytest.raises(ConfigError):
            integrate_reduced_ensemble(ReducedSDE.from_constants(0.1, 0.1), 0.5, dt=0.0, T=1.0, seed=0, paths=2)

    def test_cap_freezes_paths(self):
        """Test that runaway paths are flagged and frozen."""
        sde = ReducedSDE.from_constants(50.0, 0.0, cap=10.0)
        ensemble = integrate_reduced_ensemble(sde, 1.0, dt=0.01, T=1.0, seed=0, paths=2)
        assert ensemble.blown_up == [0, 1]
        assert ensemble.summary()["blown_up"] == [0, 1]

    def test_log_moments_of_geometric_motion(self):
        """Test mean log h(T) = log h0 - C_sigma/2 T for C_b = 0."""
        sde = ReducedSDE.from_constants(0.0, 0.25)
        ensemble = integrate_reduced_ensemble(sde, 0.5, dt=1e-3, T=1.0, seed=21, paths=2000)
        mean, variance = log_moments(0.0, 0.25, 0.5, 1.0)
        assert np.mean(np.log(ensemble.final)) == pytest.approx(float(mean), abs=0.05)
        assert np.var(np.log(ensemble.final)) == pytest.approx(float(variance), abs=0.05)

    def test_log_moments_need_positive_start(self):
        """Test that log moments need h0 > 0."""
        with pytest.raises(DomainError):
            log_moments(0.1, 0.1, 0.0, 1.0)


class TestFirstPassage:
    """Tests for first-passage times of the reduced equation."""

    def test_deterministic_growth(self):
        """Test that h0 e^t reaches e h0 at t = 1."""
        times = first_passage(ReducedSDE.from_constants(1.0, 0.0), 0.5, 0.5 * np.e, 2.0, seed=0, paths=2, dt=1e-3)
        np.testing.assert_allclose(times, 1.0, atol=5e-3)

    def test_censored(self):
        """Test that paths that never reach H_star get inf."""
        ensemble = integrate_reduced_ensemble(
            ReducedSDE.from_constants(-1.0, 0.0), 0.5, dt=0.01, T=1.0, seed=0, paths=3, level=1.0
        )
        assert np.isinf(ensemble.passage_times).all()
        assert ensemble.summary()["censored"] == 3

    def test_level_must_exceed_start(self):
        """Test that H_star must exceed h0."""
        with pytest.raises(DomainError):
            first_passage(ReducedSDE.from_constants(1.0, 0.0), 1.0, 0.5, 1.0, seed=0, paths=1, dt=0.01)


class TestInvariantDensity:
    """Tests for the stationary Gamma density."""

    def test_van_der_pol_parameters(self):
        """Test shape 2 C_b / C_sigma - 1 and rate -2 C_b2 / C_sigma."""
        density = invariant_density(0.4626, -0.3702, 0.6799)
        assert density.shape == pytest.approx(0.3608, abs=1e-3)
        assert density.rate == pytest.approx(1.089, abs=1e-3)
        assert density.mean == pytest.approx(density.shape / density.rate)

    def test_cdf_and_table(self):
        """Test that the CDF is normalized and the table has three columns."""
        density = invariant_density(2.0, -1.0, 1.0)
        assert density.cdf(1e3) == pytest.approx(1.0)
        assert density.cdf(0.0) == 0.0
        header, rows = density.table(np.linspace(0.1, 5.0, 50))
        assert header == ["h", "pdf", "cdf"]
        assert rows.shape == (50, 3)
        assert np.all(np.diff(rows[:, 2]) > 0)

    def test_requires_damping(self):
        """Test that C_b2 >= 0 has no density."""
        with pytest.raises(DomainError):
            invariant_density(1.0, 0.0, 1.0)

    def test_requires_noise(self):
        """Test that C_sigma <= 0 has no density."""
        with pytest.raises(DomainError):
            invariant_density(1.0, -1.0, 0.0)

    def test_not_normalizable(self):
        """Test that a stable trivial solution has no density."""
        with pytest.raises(NotNormalizable):
            invariant_density(0.2, -1.0, 1.0)


class TestThreshold:
    """Tests for the noise-shifted oscillator threshold."""

    def test_van_der_pol(self):
        """Test sigma1, sigma2 and the shifted threshold."""
        report = noise_shifted_threshold(VDP_BETA_C, VDP_C, epsilon=0.1, d_tilde=1.0)
        assert report.sigma1 == pytest.approx(0.980633, abs=1e-5)
        assert report.sigma2 == pytest.approx(-0.46164, abs=1e-5)
        assert report.beta_c_noise == pytest.approx(-0.30266, abs=1e-3)
        assert report.effect == "destabilizing"
        assert report.to_dict()["note"] == THRESHOLD_CAVEAT

    def test_stabilizing(self):
        """Test that a mostly imaginary c gives a stabilizing shift."""
        report = noise_shifted_threshold(-0.3, 0.1 + 1.0j, epsilon=0.1, d_tilde=1.0)
        assert report.effect == "stabilizing"
        assert report.beta_c_noise > -0.3

    def test_requires_negative_beta(self):
        """Test that beta_c >= 0 is refused."""
        with pytest.raises(DomainError):
            noise_shifted_threshold(0.1, VDP_C, epsilon=0.1, d_tilde=1.0)


class TestAveragedLyapunov:
    """Tests for lambda_avg predictions."""

    def test_prediction(self):
        """Test lambda_avg = C_b - C_sigma/2 and its full-system scaling."""
        prediction = averaged_lyapunov(0.3734, 0.9873, epsilon=0.1)
        assert prediction.lambda_avg == pytest.approx(-0.12025, abs=1e-4)
        assert prediction.dde_scale == pytest.approx(0.01 * prediction.lambda_avg / 2)
        assert averaged_lyapunov(1.0, 1.0).to_dict() == {"lambda_avg": 0.5, "dde_scale": None}
