"""Monte-Carlo agreement between the delay equation and its averaged SDE.

These runs take minutes; select them with ``pytest -m slow``.
"""

import json
import sys

import numpy as np
import pytest

from delay_average.averaging import vanderpol_constants
from delay_average.cli import main
from delay_average.reduced import ReducedSDE, integrate_reduced_ensemble, invariant_density
from delay_average.stats import ecdf, ks_distance
from tests.builders import ConfigBuilder

pytestmark = pytest.mark.slow

EPSILON = 0.05
PATHS = 500
KS_H = 0.08
KS_TAU = 0.10


def compare(monkeypatch, capsys, builder: ConfigBuilder, tmp_path) -> dict:
    """Run ``dav compare`` on a desk-scale ensemble and return its JSON."""
    path = (
        builder.with_epsilon(EPSILON)
        .with_section("simulate", T=1.0, paths=PATHS, h0=0.5, H_star=1.0)
        .with_section("reduced", dt=1e-3)
        .with_out(tmp_path)
        .write(tmp_path / "run.json")
    )
    monkeypatch.setattr(sys, "argv", ["dav", "compare", "-c", str(path), "--threads", "0", "--json", "-q"])
    main()
    return json.loads(capsys.readouterr().out)


@pytest.mark.parametrize(
    ("gamma_q", "gamma_c"),
    [(0.0, 0.0), (0.0, 1.0), (1 / np.sqrt(3), 0.0)],
    ids=["additive", "cubic", "quadratic"],
)
def test_scalar_white_noise(monkeypatch, capsys, tmp_path, gamma_q, gamma_c):
    """Test the laws of h(T) and of the first passage for the scalar equation."""
    builder = ConfigBuilder().preset("scalar-cubic", sigma=1.0, gamma_q=gamma_q, gamma_c=gamma_c)
    data = compare(monkeypatch, capsys, builder, tmp_path)
    assert data["h"]["ks"] <= KS_H
    assert data["tau"]["ks"] <= KS_TAU
    assert not data["dde"]["flagged"]


@pytest.mark.parametrize("g", [2.0, 6.0])
def test_scalar_two_state_noise(monkeypatch, capsys, tmp_path, g):
    """Test the same laws under telegraph noise."""
    builder = ConfigBuilder().preset("scalar-markov", g=g, sigma0=1.0)
    data = compare(monkeypatch, capsys, builder, tmp_path)
    assert data["h"]["ks"] <= KS_H
    assert data["tau"]["ks"] <= KS_TAU


def test_invariant_density_long_run():
    """Test that the reduced oscillator energy settles to its Gamma law."""
    constants = vanderpol_constants(-0.301, epsilon=0.1)
    density = invariant_density(constants.C_b, constants.C_b2, constants.C_sigma)
    sde = ReducedSDE.from_constants(constants.C_b, constants.C_sigma, constants.C_b2)
    horizon = 30.0 / abs(constants.C_b2)
    ensemble = integrate_reduced_ensemble(sde, density.mean, dt=1e-3, T=horizon, seed=11, paths=2000)
    assert ks_distance(ecdf(ensemble.final), density.cdf) <= 0.05
