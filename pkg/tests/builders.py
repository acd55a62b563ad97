"""Builder pattern classes for test data construction.

Provides fluent interfaces for building models, lag functionals and experiment configs with sensible defaults.

Example usage:
    # Scalar verge model with additive noise
    model = ModelBuilder().with_F(FunctionalBuilder().constant([1.0]).build()).build()

    # Cubic damping at lag -1
    g = FunctionalBuilder().at_lags([-1.0]).term([3], [-1.0]).build()

    # Preset config written as dotted text
    path = (ConfigBuilder()
            .preset("scalar-cubic", sigma=1.0)
            .with_epsilon(0.05)
            .with_section("simulate", paths=8, T=0.1)
            .write_dotted(tmp_path / "run.cfg"))
"""

import copy
import json
from pathlib import Path
from typing import Any

import numpy as np

from delay_average.model import MatrixLagMeasure, NoiseModel, PerturbedModel, PolyLagFunctional


class FunctionalBuilder:
    """Builder for PolyLagFunctional test data with fluent interface."""

    def __init__(self):
        """Initialize as a scalar functional with no lags and no terms."""
        self._n = 1
        self._lags: list[float] = []
        self._terms: list[tuple[tuple[int, ...], list[float]]] = []
        self._constant: list[float] | None = None

    def with_n(self, n: int) -> FunctionalBuilder:
        """Set the output dimension."""
        self._n = n
        return self

    def at_lags(self, lags: list[float]) -> FunctionalBuilder:
        """Set the lags read by the functional."""
        self._lags = list(lags)
        return self

    def term(self, exponents: list[int], coeff: list[float]) -> FunctionalBuilder:
        """Add a monomial with the given exponent multi-index and output vector."""
        self._terms.append((tuple(exponents), list(coeff)))
        return self

    def constant(self, value: list[float]) -> FunctionalBuilder:
        """Make the functional constant."""
        self._constant = list(value)
        self._n = len(value)
        return self

    def build(self) -> PolyLagFunctional:
        """Build the functional."""
        if self._constant is not None:
            return PolyLagFunctional.constant(self._constant)
        return PolyLagFunctional.from_terms(self._lags, self._n, self._terms)

    def to_config(self) -> dict[str, Any]:
        """The same functional in config form."""
        if self._constant is not None:
            return {"constant": list(self._constant)}
        return {
            "lags": list(self._lags),
            "term": [{"exponents": list(e), "coeff": list(c)} for e, c in self._terms],
        }


class ModelBuilder:
    """Builder for PerturbedModel test data.

    Defaults to the scalar verge equation x'(t) = -pi/2 x(t - 1) with no perturbation.
    """

    def __init__(self):
        """Initialize with the scalar verge equation."""
        self._terms: list[tuple[float, Any]] = [(-1.0, [[-np.pi / 2]])]
        self._horizon: float | None = None
        self._n = 1
        self._F: PolyLagFunctional | None = None
        self._G: PolyLagFunctional | None = None
        self._Gq: PolyLagFunctional | None = None
        self._noise = NoiseModel.wiener()
        self._epsilon = 0.05
        self._name = "test-model"

    def scalar(self, kappa: float) -> ModelBuilder:
        """Replace L0 by x'(t) = kappa x(t - 1)."""
        self._terms = [(-1.0, [[kappa]])]
        self._n = 1
        return self

    def with_terms(self, terms: list[tuple[float, Any]], horizon: float | None = None) -> ModelBuilder:
        """Replace L0 by explicit (lag, matrix) pairs."""
        self._terms = list(terms)
        self._n = np.atleast_2d(terms[0][1]).shape[0]
        self._horizon = horizon
        return self

    def with_F(self, functional: PolyLagFunctional) -> ModelBuilder:  # noqa: N802
        """Set the noise functional F."""
        self._F = functional
        return self

    def with_G(self, functional: PolyLagFunctional) -> ModelBuilder:  # noqa: N802
        """Set the O(eps^2) drift G."""
        self._G = functional
        return self

    def with_Gq(self, functional: PolyLagFunctional) -> ModelBuilder:  # noqa: N802
        """Set the O(eps) drift G_q."""
        self._Gq = functional
        return self

    def with_noise(self, noise: NoiseModel) -> ModelBuilder:
        """Set the driving noise."""
        self._noise = noise
        return self

    def with_epsilon(self, epsilon: float) -> ModelBuilder:
        """Set the perturbation size."""
        self._epsilon = epsilon
        return self

    def named(self, name: str) -> ModelBuilder:
        """Set the model name."""
        self._name = name
        return self

    def build(self) -> PerturbedModel:
        """Build the model."""
        measure = MatrixLagMeasure.from_terms(self._terms, self._horizon)
        return PerturbedModel(
            measure,
            self._F if self._F is not None else PolyLagFunctional.zero(self._n),
            self._G,
            self._Gq,
            self._noise,
            self._epsilon,
            self._name,
        )


def _flatten(prefix: str, node: Any) -> list[str]:
    """Dotted ``key = value`` lines of a nested config."""
    if isinstance(node, dict):
        return [line for key, value in node.items() for line in _flatten(f"{prefix}.{key}" if prefix else key, value)]
    if isinstance(node, list) and node and all(isinstance(item, dict) for item in node):
        return [line for index, item in enumerate(node) for line in _flatten(f"{prefix}.{index}", item)]
    if isinstance(node, str):
        return [f"{prefix} = {node}"]
    return [f"{prefix} = {json.dumps(node)}"]


class ConfigBuilder:
    """Builder for experiment configs, written as JSON or dotted text."""

    def __init__(self):
        """Initialize with the scalar-cubic preset and seed 7."""
        self._data: dict[str, Any] = {"seed": 7, "model": {"preset": "scalar-cubic"}}

    def preset(self, name: str, **params: float) -> ConfigBuilder:
        """Use a catalog preset."""
        self._data["model"] = {"preset": name}
        if params:
            self._data["model"]["params"] = dict(params)
        return self

    def explicit(self, n: int, terms: list[tuple[float, list[float]]], **functionals: dict) -> ConfigBuilder:
        """Spell the model out: L0 terms as (lag, flat matrix) pairs, functionals in config form."""
        self._data["model"] = {
            "n": n,
            "L0": {"term": [{"lag": lag, "matrix": list(matrix)} for lag, matrix in terms]},
            **functionals,
        }
        return self

    def with_seed(self, seed: int) -> ConfigBuilder:
        """Set the seed."""
        self._data["seed"] = seed
        return self

    def with_epsilon(self, epsilon: float) -> ConfigBuilder:
        """Set the model epsilon."""
        self._data["model"]["epsilon"] = epsilon
        return self

    def with_noise(self, kind: str, **params: Any) -> ConfigBuilder:
        """Set the noise section of the model."""
        self._data["model"]["noise"] = {"kind": kind, **params}
        return self

    def with_section(self, name: str, **values: Any) -> ConfigBuilder:
        """Merge values into a top-level section."""
        self._data.setdefault(name, {}).update(values)
        return self

    def with_out(self, out: Path) -> ConfigBuilder:
        """Set the artifact directory."""
        self._data["out"] = str(out)
        return self

    def build(self) -> dict[str, Any]:
        """Return a copy of the config."""
        return copy.deepcopy(self._data)

    def write(self, path: Path) -> Path:
        """Write as JSON and return the path."""
        path.write_text(json.dumps(self._data, indent=2))
        return path

    def write_dotted(self, path: Path) -> Path:
        """Write as dotted-key text and return the path."""
        path.write_text("# experiment\n" + "\n".join(_flatten("", self._data)) + "\n")
        return path


# Convenience functions for common scenarios


def build_scalar_cubic_config(**params: float) -> dict[str, Any]:
    """Scalar cubic preset config with the given parameters."""
    return ConfigBuilder().preset("scalar-cubic", **params).build()


def build_small_simulation_config(out: Path, *, epsilon: float = 0.5, paths: int = 6) -> ConfigBuilder:
    """Scalar cubic model with an ensemble small enough for the default suite."""
    return (
        ConfigBuilder()
        .preset("scalar-cubic", sigma=1.0, gamma_c=1.0)
        .with_epsilon(epsilon)
        .with_section("simulate", T=0.25, paths=paths, h0=0.5, H_star=0.9, dt=0.01, chunk_size=4)
        .with_section("reduced", dt=0.01)
        .with_out(out)
    )
