"""Experiment config I/O and artifact writing."""

import csv
import hashlib
import json
from importlib.resources import files
from pathlib import Path

import jsonschema
import numpy as np

from delay_average import catalog
from delay_average.errors import ConfigError
from delay_average.model import MatrixLagMeasure, NoiseModel, PerturbedModel, PolyLagFunctional

# Defaults for the Monte-Carlo comparison; a config only needs to name what differs
SIMULATE_DEFAULTS = {"T": 2.0, "paths": 4000, "h0": 0.72, "H_star": 1.5, "dt": None, "chunk_size": 64}


def _parse_value(raw: str) -> object:
    """JSON literal when the text is one (numbers, lists, true/false, quoted strings), else the bare text."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _listify(node: object) -> object:
    """Turn dicts keyed "0", "1", ... into lists, recursively."""
    if not isinstance(node, dict):
        return node
    converted = {key: _listify(value) for key, value in node.items()}
    if converted and all(key.isdigit() for key in converted):
        indices = sorted(int(key) for key in converted)
        if indices == list(range(len(indices))):
            return [converted[str(index)] for index in indices]
    return converted


def parse_dotted(text: str) -> dict:
    """Parse ``key.sub = value`` lines (``#`` starts a comment) into a nested dict."""
    root: dict = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, raw = stripped.partition("=")
        if not sep or not key.strip():
            msg = f"line {number}: expected 'key = value', got {line.strip()!r}"
            raise ConfigError(msg)
        parts = key.strip().split(".")
        node = root
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                msg = f"line {number}: {key.strip()!r} extends the scalar key {part!r}"
                raise ConfigError(msg)
            node = child
        if parts[-1] in node:
            msg = f"line {number}: duplicate key {key.strip()!r}"
            raise ConfigError(msg)
        node[parts[-1]] = _parse_value(raw.strip())
    return _listify(root)


def read_config(path: Path) -> dict:
    """Read a dotted-key text or JSON config without validating it.

    Raises:
        ConfigError: Missing file or unparsable content.
    """
    if not path.exists():
        msg = f"{path} not found"
        raise ConfigError(msg)
    text = path.read_text()
    try:
        config = json.loads(text) if path.suffix == ".json" or text.lstrip().startswith("{") else parse_dotted(text)
    except json.JSONDecodeError as e:
        msg = f"Invalid JSON in {path}: {e}"
        raise ConfigError(msg) from e
    else:
        return config


def validate_config(config: dict) -> None:
    """Validate against the bundled schema.

    Raises:
        ConfigError: Naming the first violation and its dotted path.
    """
    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as e:
        where = ".".join(str(p) for p in e.absolute_path)
        msg = f"{where}: {e.message}" if where else e.message
        raise ConfigError(msg) from e


def load_config(path: Path) -> dict:
    """Read and validate an experiment config."""
    config = read_config(path)
    validate_config(config)
    return config


def load_schema() -> dict:
    """Load the bundled JSON schema."""
    schema_path = files("delay_average").joinpath("experiment.schema.json")
    return json.loads(schema_path.read_text())


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def section(config: dict, name: str, defaults: dict | None = None) -> dict:
    """A config section merged over ``defaults``."""
    return {**(defaults or {}), **config.get(name, {})}


def _functional(entry: dict | None, n: int) -> PolyLagFunctional | None:
    if entry is None:
        return None
    if "constant" in entry:
        return PolyLagFunctional.constant(entry["constant"])
    terms = [(tuple(term["exponents"]), term["coeff"]) for term in entry.get("term", [])]
    return PolyLagFunctional.from_terms(entry.get("lags", []), n, terms)


def _noise(entry: dict | None) -> NoiseModel:
    if entry is None:
        return NoiseModel.wiener()
    match entry["kind"]:
        case "wiener":
            return NoiseModel.wiener()
        case "two-state-markov":
            return NoiseModel.two_state_markov(entry["g"], entry.get("sigma0", 1.0))
        case "exp-sum":
            return NoiseModel.exp_sum(tuple(pair) for pair in entry["components"])
        case other:
            msg = f"unknown noise kind {other!r}"
            raise ConfigError(msg)


def build_model(config: dict) -> PerturbedModel:
    """Model from a preset name with parameters, or from explicit lag terms and functionals."""
    entry = config["model"]
    if "preset" in entry:
        params = dict(entry.get("params", {}))
        if "epsilon" in entry:
            params["epsilon"] = entry["epsilon"]
        model = catalog.build_preset(entry["preset"], **params)
        return model if "noise" not in entry else PerturbedModel(
            model.L0, model.F, model.G, model.Gq, _noise(entry["noise"]), model.epsilon, model.name
        )
    n = entry["n"]
    terms = []
    for term in entry["L0"]["term"]:
        matrix = np.asarray(term["matrix"], dtype=float)
        if matrix.size != n * n:
            msg = f"L0 matrix at lag {term['lag']} has {matrix.size} entries, expected {n * n}"
            raise ConfigError(msg)
        terms.append((term["lag"], matrix.reshape(n, n)))
    l0 = MatrixLagMeasure.from_terms(terms, entry["L0"].get("max_delay"))
    return PerturbedModel(
        l0,
        _functional(entry.get("F"), n) or PolyLagFunctional.zero(n),
        _functional(entry.get("G"), n),
        _functional(entry.get("Gq"), n),
        _noise(entry.get("noise")),
        entry.get("epsilon", 0.025),
        entry.get("name", "custom"),
    )


def _stamp(config: dict, seed: int | None) -> dict:
    return {"config_sha256": config_hash(config), "seed": seed}


def write_csv(path: Path, header: list[str], rows: np.ndarray, *, config: dict, seed: int | None) -> None:
    """CSV with a ``# config_sha256=... seed=...`` first line; floats use their shortest round-trip form."""
    path.parent.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(config, seed)
    with path.open("w", newline="") as handle:
        handle.write(f"# config_sha256={stamp['config_sha256']} seed={stamp['seed']}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([repr(float(value)) for value in row] for row in np.atleast_2d(rows))


def _jsonable(value: object) -> object:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    msg = f"cannot serialize {type(value).__name__}"
    raise TypeError(msg)


def dump_json(payload: dict, *, config: dict, seed: int | None) -> str:
    """JSON text with the provenance stamp under the leading ``"#"`` key."""
    return json.dumps({"#": _stamp(config, seed), **payload}, indent=2, default=_jsonable) + "\n"


def write_json(path: Path, payload: dict, *, config: dict, seed: int | None) -> None:
    """Write ``dump_json`` output to ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(payload, config=config, seed=seed))
