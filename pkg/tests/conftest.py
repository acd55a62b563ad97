"""Shared pytest fixtures for delay-average tests."""

import numpy as np
import pytest

from delay_average import catalog
from delay_average.averaging import AveragingWorkspace
from delay_average.spectrum import eigendata, locate_critical_pair
from tests.builders import ConfigBuilder, ModelBuilder

SCALAR_KAPPA = -np.pi / 2


@pytest.fixture(scope="session")
def scalar_model():
    """The scalar verge model x'(t) = -pi/2 x(t - 1) with no perturbation."""
    return catalog.scalar_verge()


@pytest.fixture(scope="session")
def scalar_spec(scalar_model):
    """Critical eigendata of the scalar verge model."""
    omega_c, _ = locate_critical_pair(scalar_model.L0)
    return eigendata(scalar_model.L0, omega_c)


@pytest.fixture(scope="session")
def scalar_workspace(scalar_spec, scalar_model):
    """Averaging workspace of the scalar verge model."""
    return AveragingWorkspace(scalar_spec, scalar_model.L0)


@pytest.fixture
def verge_builder():
    """A fresh model builder at the scalar verge."""
    return ModelBuilder().scalar(SCALAR_KAPPA)


@pytest.fixture
def config_file(tmp_path):
    """A valid scalar-cubic config written as JSON."""
    return ConfigBuilder().preset("scalar-cubic", sigma=1.0).with_out(tmp_path).write(tmp_path / "experiment.json")
