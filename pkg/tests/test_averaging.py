"""Tests for the averaged drift and diffusion coefficients."""

import numpy as np
import pytest

from delay_average import catalog
from delay_average.averaging import (
    AveragingWorkspace,
    ReducedCoefficients,
    averaged_gennoise,
    averaged_linear_gennoise,
    averaged_linear_white,
    averaged_quadratic,
    averaged_total,
    averaged_white,
    check_gq_centering,
    lyapunov_sign_change,
    lyapunov_surface,
    stability_report,
    vanderpol_constants,
    vanderpol_threshold,
    zero_root_coefficients,
)
from delay_average.errors import CenteringViolated, DomainError, NoZeroRoot
from delay_average.model import NoiseModel, scalar_monomial
from delay_average.spectrum import eigendata, locate_critical_pair
from tests.builders import ModelBuilder

# |Psi_hat_1|^2 of the scalar verge model
PSI_SQ = 1 / (1 + np.pi**2 / 4)


# ============ REDUCED COEFFICIENTS ============


class TestReducedCoefficients:
    """Tests for the coefficient container."""

    def test_evaluation(self):
        """Test polynomial evaluation and coefficient lookup."""
        coeffs = ReducedCoefficients(np.array([1.0, 2.0]), np.array([0.0, 3.0]))
        assert coeffs.drift_at(2.0) == pytest.approx(5.0)
        assert coeffs.diffusion2_at(2.0) == pytest.approx(6.0)
        assert coeffs.coefficient(1) == 2.0
        assert coeffs.coefficient(5) == 0.0
        assert coeffs.coefficient(1, diffusion=True) == 3.0

    def test_plus_merges_provenance(self):
        """Test that plus adds drifts and keeps every provenance entry."""
        a = ReducedCoefficients(np.array([1.0]), np.array([0.0, 1.0]), {"bH": np.array([1.0])}, {"nodes": 8})
        b = ReducedCoefficients(np.array([0.0, -1.0]), np.zeros(1), {"bHq1": np.array([0.0, -1.0])}, {"t_used": 2.0})
        total = a.plus(b)
        np.testing.assert_allclose(total.drift, [1.0, -1.0])
        assert set(total.provenance) == {"bH", "bHq1"}
        assert total.metadata == {"nodes": 8, "t_used": 2.0}

    def test_to_dict(self):
        """Test that coefficients serialize by power."""
        coeffs = ReducedCoefficients(np.array([0.5, 0.0, -1.0]), np.array([0.0, 1.0]), {"bH": np.array([0.5])})
        payload = coeffs.to_dict()
        assert payload["drift"] == {"0": 0.5, "1": 0.0, "2": -1.0}
        assert payload["variable"] == "hbar"
        assert ReducedCoefficients.zero("zero").to_dict()["variable"] == "h"


# ============ WHITE NOISE ============


class TestAveragedWhite:
    """Tests for white-noise averaging on the scalar cubic model."""

    def test_additive_noise(self, scalar_spec):
        """Test b_H(0) = 2|c|^2 sigma^2 and sigma_H^2 = 4|c|^2 sigma^2 hbar."""
        model = catalog.scalar_cubic(sigma=1.0, gamma_c=0.0)
        coeffs = averaged_white(model, scalar_spec)
        assert coeffs.coefficient(0) == pytest.approx(2 * PSI_SQ, rel=1e-8)
        assert coeffs.coefficient(1, diffusion=True) == pytest.approx(4 * PSI_SQ, rel=1e-8)
        assert coeffs.coefficient(0, diffusion=True) == pytest.approx(0.0, abs=1e-12)

    def test_cubic_and_linear_damping(self, scalar_spec):
        """Test the hbar and hbar^2 drift terms of -gamma_o x(t-1) and gamma_c x(t-1)^3."""
        model = catalog.scalar_cubic(sigma=1.0, gamma_c=1.0, gamma_o=1.0)
        coeffs = averaged_white(model, scalar_spec)
        assert coeffs.coefficient(0) == pytest.approx(0.5768, abs=1e-4)
        assert coeffs.coefficient(1) == pytest.approx(0.9060, abs=1e-4)
        assert coeffs.coefficient(2) == pytest.approx(-1.3591, abs=1e-4)
        assert coeffs.coefficient(1, diffusion=True) == pytest.approx(1.1536, abs=1e-4)

    def test_sigma_scaling(self, scalar_spec):
        """Test that the noise contributions scale with sigma^2."""
        one = averaged_white(catalog.scalar_cubic(sigma=1.0), scalar_spec)
        two = averaged_white(catalog.scalar_cubic(sigma=2.0), scalar_spec)
        assert two.coefficient(0) == pytest.approx(4 * one.coefficient(0))
        assert two.coefficient(2) == pytest.approx(one.coefficient(2))

    def test_rejects_general_noise(self, scalar_spec):
        """Test that averaged_white needs white noise."""
        with pytest.raises(DomainError):
            averaged_white(catalog.scalar_markov(), scalar_spec)

    def test_van_der_pol(self):
        """Test averaging the oscillator against its closed-form constants."""
        model = catalog.van_der_pol(-0.301, epsilon=0.1)
        omega_c, _ = locate_critical_pair(model.L0)
        eigen = eigendata(model.L0, omega_c, normalization="anchor")
        coeffs = averaged_white(model, eigen)
        closed = vanderpol_constants(-0.301, epsilon=0.1)
        assert coeffs.coefficient(1) == pytest.approx(closed.C_b, rel=1e-2)
        assert coeffs.coefficient(2) == pytest.approx(closed.C_b2, rel=1e-2)
        assert coeffs.coefficient(2, diffusion=True) == pytest.approx(closed.C_sigma, rel=1e-2)


class TestLinearWhite:
    """Tests for the linear multiplicative white-noise constants."""

    def test_scalar_r1_one(self, scalar_spec):
        """Test lambda_avg = -Re(Upsilon_11^2) for L1 eta = eta(-1)."""
        constants = averaged_linear_white(catalog.scalar_linear_white(1.0), scalar_spec)
        assert constants.lambda_avg == pytest.approx(-0.122, abs=1e-3)
        assert constants.stable
        payload = constants.to_dict()
        assert "theta_star" in payload
        assert "R0" not in payload

    def test_sign_change(self):
        """Test the delay where the white-noise exponent changes sign."""
        assert lyapunov_sign_change() == pytest.approx(0.8609, abs=1e-3)

    def test_sign_change_needs_bracket(self):
        """Test that a bracket without a sign change is rejected."""
        with pytest.raises(DomainError):
            lyapunov_sign_change((0.9, 1.0))

    def test_nonlinear_rejected(self, scalar_spec):
        """Test that linear constants refuse a nonlinear F."""
        model = ModelBuilder().with_F(scalar_monomial(-1.0, 2)).build()
        with pytest.raises(DomainError):
            averaged_linear_white(model, scalar_spec)


# ============ GENERAL NOISE ============


class TestGeneralNoise:
    """Tests for two-state noise on the scalar model."""

    @pytest.mark.parametrize(
        ("g", "c_b", "c_sigma"),
        [
            (2.0, 0.3734, 0.9873),
            (6.0, 0.1715, 0.4245),
        ],
    )
    def test_linear_constants(self, scalar_workspace, g, c_b, c_sigma):
        """Test C_b and C_sigma of the two-state scalar model."""
        constants = averaged_linear_gennoise(catalog.scalar_markov(g=g), scalar_workspace)
        assert constants.C_b == pytest.approx(c_b, rel=1e-2)
        assert constants.C_sigma == pytest.approx(c_sigma, rel=1e-2)
        assert constants.R_hat2 == pytest.approx(np.conj(constants.R_hat1))
        assert constants.R0 == pytest.approx(1.0 / g)

    def test_lambda_g2(self, scalar_workspace):
        """Test lambda_avg at g = 2."""
        constants = averaged_linear_gennoise(catalog.scalar_markov(g=2.0), scalar_workspace)
        assert constants.lambda_avg == pytest.approx(-0.12025, rel=1e-2)

    def test_polynomial_form_agrees(self, scalar_workspace):
        """Test that the general averaging reproduces the linear constants."""
        model = catalog.scalar_markov(g=2.0)
        linear = averaged_linear_gennoise(model, scalar_workspace)
        coeffs = averaged_gennoise(model, scalar_workspace)
        assert coeffs.coefficient(1) == pytest.approx(linear.C_b, rel=1e-2)
        assert coeffs.coefficient(2, diffusion=True) == pytest.approx(linear.C_sigma, rel=1e-2)
        assert coeffs.metadata["R0"] == pytest.approx(0.5)

    def test_white_noise_rejected(self, scalar_workspace):
        """Test that the general-noise routines refuse white noise."""
        with pytest.raises(DomainError):
            averaged_linear_gennoise(catalog.scalar_linear_white(), scalar_workspace)

    def test_surface(self, scalar_workspace):
        """Test a small lambda_avg surface against the pointwise constants."""
        surface = lyapunov_surface(np.array([1.0]), np.array([2.0, 6.0]), workspace=scalar_workspace)
        assert surface.shape == (1, 2)
        assert surface[0, 0] == pytest.approx(-0.12025, rel=1e-2)
        assert surface[0, 1] == pytest.approx(0.1715 - 0.4245 / 2, rel=5e-2)

    def test_exp_sum_matches_markov(self, scalar_workspace):
        """Test that a one-term exponential sum equals the two-state chain with the same correlation."""
        markov = averaged_linear_gennoise(catalog.scalar_markov(g=2.0), scalar_workspace)
        model = ModelBuilder().with_F(scalar_monomial(-1.0, 1)).with_noise(NoiseModel.exp_sum([(1.0, 2.0)])).build()
        exp_sum = averaged_linear_gennoise(model, scalar_workspace)
        assert exp_sum.C_b == pytest.approx(markov.C_b)


# ============ QUADRATIC CORRECTIONS ============


class TestQuadratic:
    """Tests for the O(eps) drift corrections."""

    def test_centering_passes_for_square(self, scalar_spec):
        """Test that eta(-1)^2 has no resonant first harmonic."""
        model = catalog.scalar_cubic(gamma_q=1.0)
        check = check_gq_centering(model, scalar_spec)
        assert check.passed
        assert check.residual < 1e-10

    def test_centering_fails_for_linear(self, scalar_spec, scalar_workspace):
        """Test that a linear G_q is resonant and refused."""
        model = ModelBuilder().with_Gq(scalar_monomial(-1.0, 1)).build()
        assert not check_gq_centering(model, scalar_spec).passed
        with pytest.raises(CenteringViolated):
            averaged_quadratic(model, scalar_workspace)

    def test_absent_gq(self, scalar_workspace):
        """Test that no G_q gives a zero correction."""
        coeffs = averaged_quadratic(catalog.scalar_cubic(), scalar_workspace)
        assert coeffs.coefficient(0) == 0.0
        assert coeffs.coefficient(1) == 0.0
        assert coeffs.coefficient(2) == 0.0

    def test_scalar_square(self, scalar_workspace):
        """Test bHq1 = -64/(4 + pi^2)^2 and the stable interaction for gamma_q = 1."""
        coeffs = averaged_quadratic(catalog.scalar_cubic(gamma_q=1.0), scalar_workspace)
        assert coeffs.provenance["bHq1"][2] == pytest.approx(-64 / (4 + np.pi**2) ** 2, abs=1e-4)
        assert coeffs.provenance["bHq2"][2] == pytest.approx(-0.7889, rel=2e-3)
        assert coeffs.coefficient(1) == 0.0
        assert coeffs.coefficient(2) == pytest.approx(-1.1216, rel=2e-3)
        assert coeffs.metadata["decay_rate"] > 0

    def test_total_adds_quadratic(self, scalar_workspace):
        """Test that averaged_total combines white averaging and the correction."""
        model = catalog.scalar_cubic(sigma=1.0, gamma_q=1.0)
        total = averaged_total(model, scalar_workspace)
        base = averaged_white(model, scalar_workspace.eigen)
        assert total.coefficient(0) == pytest.approx(base.coefficient(0))
        assert total.coefficient(2) == pytest.approx(base.coefficient(2) - 1.1216, rel=2e-3)
        assert {"bH", "bHq1", "bHq2"} <= set(total.provenance)

    def test_lag_free_oracle(self):
        """Test bHq1 = 0 and bHq2 = 1.1 hbar^2 for the oscillator coupled to a stable mode."""
        model = catalog.no_delay_oracle()
        workspace = AveragingWorkspace(eigendata(model.L0, 1.0, normalization="anchor"), model.L0)
        coeffs = averaged_quadratic(model, workspace)
        np.testing.assert_allclose(coeffs.provenance["bHq1"], 0.0, atol=1e-8)
        assert coeffs.provenance["bHq2"][2] == pytest.approx(1.1, rel=1e-3)


# ============ ZERO ROOT ============


class TestZeroRoot:
    """Tests for the zero-root reduction."""

    def test_white_noise_coefficients(self):
        """Test b_H = -gamma/2 h^3 + corrections and sigma_H^2 = sigma^2/4."""
        model = catalog.zero_root_pair(sigma=1.0, gamma=1.0)
        workspace = AveragingWorkspace.for_model(model, zero_mode=True)
        coeffs = zero_root_coefficients(model, workspace)
        assert coeffs.mode == "zero"
        assert coeffs.provenance["bH"][3] == pytest.approx(-0.5)
        assert coeffs.coefficient(0, diffusion=True) == pytest.approx(0.25)
        assert coeffs.to_dict()["variable"] == "h"

    def test_general_noise_scales_with_r0(self):
        """Test sigma_H^2 = 2 R0 (Psi_hat F)^2 for two-state noise."""
        model = catalog.zero_root_pair(noise=NoiseModel.two_state_markov(2.0, 1.0))
        workspace = AveragingWorkspace.for_model(model, zero_mode=True)
        coeffs = averaged_total(model, workspace)
        assert coeffs.coefficient(0, diffusion=True) == pytest.approx(2 * 0.5 * 0.25)
        assert coeffs.metadata["R0"] == pytest.approx(0.5)

    def test_needs_zero_mode(self, scalar_workspace):
        """Test that an oscillatory workspace is refused."""
        with pytest.raises(NoZeroRoot):
            zero_root_coefficients(catalog.zero_root_pair(), scalar_workspace)


# ============ STABILITY ============


class TestStabilityReport:
    """Tests for the sign analysis of averaged coefficients."""

    def test_excited(self):
        """Test that additive noise excites the trivial solution."""
        report = stability_report(ReducedCoefficients(np.array([0.5768, 0.0, -1.3591]), np.array([0.0, 1.1536])))
        assert report["trivial"] == "excited"
        assert report["equilibria"] == [pytest.approx(np.sqrt(0.5768 / 1.3591))]
        assert report["large_amplitude_stabilizing"]

    def test_linear_stable(self):
        """Test the exponent b1 - s2/2 of a multiplicative model."""
        report = stability_report(ReducedCoefficients(np.array([0.0, 0.2, -1.0]), np.array([0.0, 0.0, 1.0])))
        assert report["trivial"] == "stable"
        assert report["lyapunov"] == pytest.approx(-0.3)
        assert report["equilibria"] == [pytest.approx(0.2)]

    def test_unstable_growing(self):
        """Test a growing drift without large-amplitude damping."""
        report = stability_report(ReducedCoefficients(np.array([0.0, 1.0]), np.array([0.0, 0.0, 0.5])))
        assert report["trivial"] == "unstable"
        assert not report["large_amplitude_stabilizing"]
        assert report["equilibria"] == []


# ============ VAN DER POL ============


class TestVanDerPol:
    """Tests for the closed-form oscillator constants."""

    def test_threshold(self):
        """Test beta_c, omega_c and c."""
        beta_c, omega_c, c = vanderpol_threshold()
        assert beta_c == pytest.approx(-0.298724, abs=1e-5)
        assert omega_c == pytest.approx(0.950208, abs=1e-5)
        assert c == pytest.approx(0.410042 + 0.081894j, abs=1e-5)

    def test_constants(self):
        """Test C_b, C_sigma and C_b2 at beta = -0.301, eps = 0.1."""
        constants = vanderpol_constants(-0.301, epsilon=0.1)
        assert constants.C_b == pytest.approx(0.4626, abs=1e-3)
        assert constants.C_sigma == pytest.approx(0.6799, abs=1e-3)
        assert constants.C_b2 == pytest.approx(-0.3702, abs=1e-3)
        assert constants.to_dict()["c"]["re"] == pytest.approx(0.410042, abs=1e-5)
