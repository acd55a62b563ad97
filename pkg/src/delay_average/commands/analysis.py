"""Analysis commands: eigendata, averaged coefficients, thresholds and closed-form laws."""

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np

from delay_average import catalog
from delay_average.averaging import (
    AveragingWorkspace,
    LinearConstants,
    ReducedCoefficients,
    averaged_linear_gennoise,
    averaged_linear_white,
    averaged_total,
    check_gq_centering,
    lyapunov_sign_change,
    lyapunov_surface,
    stability_report,
    vanderpol_constants,
    vanderpol_threshold,
)
from delay_average.decorators import require_config
from delay_average.errors import DomainError
from delay_average.formatting import ICONS, bold, bold_cyan, dim, fmt_complex, fmt_num, fmt_poly, green, yellow
from delay_average.io import build_model, dump_json, load_schema, read_config, section, write_csv, write_json
from delay_average.model import PerturbedModel
from delay_average.reduced import averaged_lyapunov, invariant_density, noise_shifted_threshold
from delay_average.spectrum import (
    CensusReport,
    ScanConfig,
    SpectralData,
    biorthogonality_residual,
    eigendata,
    locate_critical_pair,
    locate_zero_root,
)

logger = logging.getLogger(__name__)

HELP_TEXT = """\
Reduce stochastic delay equations near an oscillatory instability to averaged SDEs

Analysis Commands:
  spectrum            Locate the critical root and print the eigendata
  average             Averaged drift and diffusion of the energy h
  threshold           Deterministic and noise-shifted van der Pol thresholds
  invariant-density   Stationary Gamma law of h past the stochastic threshold
  lyap-surface        lambda_avg over (r1, g) for the scalar two-state model
  validate, v         Validate an experiment config against the schema

Simulation Commands:
  simulate-dde        Euler-Maruyama ensemble of the delay equation
  simulate-sde        Euler-Maruyama ensemble of the averaged SDE
  compare             Both ensembles, empirical CDFs and KS distances
  lyapunov            Growth-rate estimates against eps^2 lambda_avg / 2

Options:
  -c, --config FILE   Experiment config (dotted key = value text or JSON)
  --seed N            Override the config seed
  -o, --out DIR       Artifact directory (default: config "out", else .)
  --threads N         Worker threads for ensembles (0 = one per core)
  --json              Print the JSON artifact instead of a summary
  -q, --quiet         Only warnings and errors on stderr
  -h, --help          Show this help message
"""

_VDP_DEFAULTS = {
    "beta": -0.301,
    "eta": 0.3,
    "kappa": 0.0,
    "omega0": 1.0,
    "r": 2.0,
    "d_tilde": 1.0,
    "b": 1.0,
    "epsilon": 0.1,
}


def pair(value: complex) -> dict:
    """A complex number as {"re", "im"}."""
    return {"re": float(np.real(value)), "im": float(np.imag(value))}


def out_dir(config: dict, args: argparse.Namespace) -> Path:
    """--out, else the config's ``out``, else the working directory."""
    return Path(getattr(args, "out", None) or config.get("out") or ".")


def emit(name: str, payload: dict, config: dict, args: argparse.Namespace, lines: list[str]) -> None:
    """Write ``<name>.json`` and print either the JSON or the human summary."""
    write_json(out_dir(config, args) / f"{name}.json", payload, config=config, seed=config["seed"])
    if getattr(args, "json", False):
        print(dump_json(payload, config=config, seed=config["seed"]), end="")
    elif not getattr(args, "quiet", False):
        print("\n".join(lines))


def normalization_for(config: dict) -> str:
    """Null-vector normalization; van der Pol defaults to anchor so hbar matches the threshold and density scale."""
    default = "anchor" if config["model"].get("preset") == "van-der-pol" else "unit"
    return section(config, "spectrum").get("normalization", default)


def spectral_setup(model: PerturbedModel, config: dict) -> tuple[SpectralData, CensusReport]:
    """Census and eigendata with the config's scan window and normalization."""
    opts = section(config, "spectrum")
    scan = ScanConfig(**opts.get("scan", {}))
    default_mode = "zero" if config["model"].get("preset") == "zero-root-pair" else "hopf"
    if opts.get("mode", default_mode) == "zero":
        report = locate_zero_root(model.L0, scan)
        omega_c = 0.0
    else:
        omega_c, report = locate_critical_pair(model.L0, scan)
    eigen = eigendata(
        model.L0, omega_c, normalization=normalization_for(config), anchor=opts.get("anchor", 0)
    )
    logger.info("critical root at i*%.10g (%s mode)", eigen.omega_c, eigen.mode)
    return eigen, report


def workspace_for(model: PerturbedModel, config: dict) -> AveragingWorkspace:
    """Averaging workspace with the config's quadrature and fundamental-solution settings."""
    eigen, _ = spectral_setup(model, config)
    return AveragingWorkspace(eigen, model.L0, **section(config, "averaging"))


def linear_constants(model: PerturbedModel, workspace: AveragingWorkspace) -> LinearConstants | None:
    """C_b and C_sigma when the model is purely linear-multiplicative, else None."""
    if workspace.eigen.is_zero_mode or model.G is not None or model.Gq is not None:
        return None
    if model.F.is_zero or not model.F.is_linear:
        return None
    if model.is_white:
        return averaged_linear_white(model, workspace.eigen)
    return averaged_linear_gennoise(model, workspace)


@require_config
def cmd_spectrum(config: dict, args: argparse.Namespace) -> None:
    """Critical frequency, null vectors, normalization and the root census."""
    model = build_model(config)
    eigen, report = spectral_setup(model, config)
    residual = biorthogonality_residual(eigen, model.L0)
    payload = {
        "model": model.name,
        "mode": eigen.mode,
        "omega_c": eigen.omega_c,
        "normalization": normalization_for(config),
        "d": [pair(v) for v in eigen.d],
        "d2": [pair(v) for v in eigen.d2],
        "c": pair(eigen.c),
        "psi_hat": [[pair(v) for v in row] for row in eigen.psi_hat],
        "biorthogonality_residual": residual,
        "census": report.to_dict(),
    }
    lines = [
        f"{bold_cyan('Spectrum')} {bold(model.name)} {dim(f'({eigen.mode} mode)')}",
        f"  omega_c   {fmt_num(eigen.omega_c, 10)}",
        f"  d         {', '.join(fmt_complex(v) for v in eigen.d)}",
        f"  c         {fmt_complex(eigen.c)}",
        f"  Psi_hat_1 {', '.join(fmt_complex(v) for v in eigen.psi1)}",
        f"  residual  {fmt_num(residual, 3)}",
        f"  census    {report.right_count} root(s) at or right of the axis, {report.stable_count} in the stable window",
    ]
    emit("spectrum", payload, config, args, lines)


@require_config
def cmd_average(config: dict, args: argparse.Namespace) -> None:
    """Averaged coefficients, their sign analysis and, for linear models, C_b and C_sigma."""
    model = build_model(config)
    workspace = workspace_for(model, config)
    coeffs = averaged_total(model, workspace)
    report = stability_report(coeffs)
    payload: dict = {
        "model": model.name,
        "epsilon": model.epsilon,
        "noise": model.noise.kind.value,
        "normalization": normalization_for(config),
        "coefficients": coeffs.to_dict(),
        "stability": report,
    }
    if model.Gq is not None:
        check = check_gq_centering(model, workspace.eigen, nodes=workspace.nodes)
        payload["centering"] = {"passed": check.passed, "residual": check.residual}
    variable = "h" if coeffs.mode == "zero" else "hbar"
    lines = [
        f"{bold_cyan('Averaged SDE')} {bold(model.name)} {dim(f'(noise: {model.noise.kind.value})')}",
        f"  drift       {fmt_poly(coeffs.drift, variable)}",
        f"  diffusion^2 {fmt_poly(coeffs.diffusion2, variable)}",
        f"  trivial     {report['trivial']}",
        f"  scale       {normalization_for(config)} normalization of d",
    ]
    constants = linear_constants(model, workspace)
    if constants is not None:
        prediction = averaged_lyapunov(constants.C_b, constants.C_sigma, epsilon=model.epsilon or None)
        payload["linear"] = constants.to_dict()
        payload["lyapunov"] = prediction.to_dict()
        icon = ICONS["stable"] if constants.stable else ICONS["unstable"]
        lines.append(
            f"  {icon} C_b = {fmt_num(constants.C_b)}, C_sigma = {fmt_num(constants.C_sigma)}, "
            f"lambda_avg = {fmt_num(constants.lambda_avg)}"
        )
    emit("average", payload, config, args, lines)


def _vdp_params(config: dict) -> dict:
    entry = config["model"]
    if entry.get("preset") != "van-der-pol":
        msg = "this command needs model.preset = van-der-pol"
        raise DomainError(msg)
    params = {**_VDP_DEFAULTS, **entry.get("params", {})}
    if "epsilon" in entry:
        params["epsilon"] = entry["epsilon"]
    return params


def _vdp_geometry(params: dict) -> dict:
    return {key: params[key] for key in ("eta", "kappa", "omega0", "r")}


@require_config
def cmd_threshold(config: dict, args: argparse.Namespace) -> None:
    """beta_c, the noise-shifted threshold and whether noise stabilizes the oscillator."""
    params = _vdp_params(config)
    beta_c, omega_c, c = vanderpol_threshold(**_vdp_geometry(params))
    report = noise_shifted_threshold(beta_c, c, epsilon=params["epsilon"], d_tilde=params["d_tilde"])
    payload = {**report.to_dict(), "omega_c": omega_c, "c": pair(c), "epsilon": params["epsilon"]}
    paint = green if report.effect == "stabilizing" else yellow
    lines = [
        f"{bold_cyan('Threshold')} {bold('van der Pol')} {dim(f'(eps = {params["epsilon"]})')}",
        f"  beta_c        {fmt_num(beta_c, 8)}",
        f"  omega_c       {fmt_num(omega_c, 8)}",
        f"  c             {fmt_complex(c)}",
        f"  beta_c,noise  {fmt_num(report.beta_c_noise, 8)}",
        f"  noise is      {paint(report.effect)}",
        dim(f"  {report.to_dict()['note']}"),
    ]
    emit("threshold", payload, config, args, lines)


def _density_constants(config: dict) -> tuple[float, float, float, dict]:
    """(C_b, C_b2, C_sigma) in closed form for the oscillator, else read off the averaged coefficients."""
    if config["model"].get("preset") == "van-der-pol":
        params = _vdp_params(config)
        constants = vanderpol_constants(
            params["beta"], epsilon=params["epsilon"], d_tilde=params["d_tilde"], b=params["b"], **_vdp_geometry(params)
        )
        return constants.C_b, constants.C_b2, constants.C_sigma, constants.to_dict()
    model = build_model(config)
    coeffs = averaged_total(model, workspace_for(model, config))
    _require_gamma_form(coeffs)
    c_b, c_b2, c_sigma = coeffs.coefficient(1), coeffs.coefficient(2), coeffs.coefficient(2, diffusion=True)
    return c_b, c_b2, c_sigma, coeffs.to_dict()


def _require_gamma_form(coeffs: ReducedCoefficients) -> None:
    scale = 1e-9 * max(1.0, float(np.max(np.abs(coeffs.drift))), float(np.max(np.abs(coeffs.diffusion2))))
    drift_ok = abs(coeffs.coefficient(0)) <= scale and np.all(np.abs(coeffs.drift[3:]) <= scale)
    diffusion_ok = np.all(np.abs(coeffs.diffusion2[:2]) <= scale) and np.all(np.abs(coeffs.diffusion2[3:]) <= scale)
    if coeffs.mode == "zero" or not (drift_ok and diffusion_ok):
        msg = "the invariant density needs b_H = C_b h + C_b2 h^2 and sigma_H^2 = C_sigma h^2"
        raise DomainError(msg)


@require_config
def cmd_invariant_density(config: dict, args: argparse.Namespace) -> None:
    """Gamma-form stationary density of the averaged energy."""
    c_b, c_b2, c_sigma, source = _density_constants(config)
    density = invariant_density(c_b, c_b2, c_sigma)
    opts = section(config, "density", {"h_max": 6.0 * density.mean, "points": 401})
    header, rows = density.table(np.linspace(0.0, opts["h_max"], opts["points"]))
    write_csv(out_dir(config, args) / "density.csv", header, rows, config=config, seed=config["seed"])
    payload = {
        "shape": density.shape,
        "rate": density.rate,
        "mean": density.mean,
        "C_b": c_b,
        "C_b2": c_b2,
        "C_sigma": c_sigma,
        "source": source,
    }
    lines = [
        f"{bold_cyan('Invariant density')} {dim('p(h) ~ h^(shape-1) exp(-rate h)')}",
        f"  shape  {fmt_num(density.shape)}",
        f"  rate   {fmt_num(density.rate)}",
        f"  mean   {fmt_num(density.mean)}",
        dim(f"  table written to {out_dir(config, args) / 'density.csv'}"),
    ]
    emit("density", payload, config, args, lines)


@require_config
def cmd_lyap_surface(config: dict, args: argparse.Namespace) -> None:
    """lambda_avg of the scalar two-state model over a grid of r1 and switching rates."""
    opts = section(config, "surface", {"r1": np.linspace(0.05, 1.0, 20).tolist(), "g": [0.5, 1, 2, 4, 6, 8]})
    sigma0 = opts.get("sigma0", 1.0)
    r1_grid = np.asarray(opts["r1"], dtype=float)
    g_grid = np.asarray(opts["g"], dtype=float)
    workspace = AveragingWorkspace.for_model(catalog.scalar_verge(), **section(config, "averaging"))
    surface = lyapunov_surface(r1_grid, g_grid, sigma0=sigma0, workspace=workspace)
    r1_mesh, g_mesh = np.meshgrid(r1_grid, g_grid, indexing="ij")
    rows = np.column_stack([r1_mesh.ravel(), g_mesh.ravel(), surface.ravel()])
    write_csv(
        out_dir(config, args) / "lyap_surface.csv", ["r1", "g", "lambda_avg"], rows, config=config, seed=config["seed"]
    )
    crossing = lyapunov_sign_change()
    payload = {
        "sigma0": sigma0,
        "r1": r1_grid,
        "g": g_grid,
        "lambda_avg": surface,
        "white_noise_sign_change_r1": crossing,
        "stable_fraction": float(np.mean(surface < 0)),
    }
    lines = [
        f"{bold_cyan('Lyapunov surface')} {dim(f'({r1_grid.size} x {g_grid.size} grid, sigma0 = {sigma0})')}",
        f"  min lambda_avg  {fmt_num(float(surface.min()))}",
        f"  max lambda_avg  {fmt_num(float(surface.max()))}",
        f"  stable share    {fmt_num(payload['stable_fraction'], 3)}",
        f"  white-noise lambda_avg changes sign at r1 = {fmt_num(crossing, 8)}",
    ]
    emit("lyap_surface", payload, config, args, lines)


def cmd_validate(path: Path, *, as_json: bool = False) -> None:
    """Validate an experiment config against the JSON schema."""
    config = read_config(path)
    schema = load_schema()

    try:
        jsonschema.validate(config, schema)
        if as_json:
            print(json.dumps({"valid": True, "path": str(path)}))
        else:
            print(f"{ICONS['ok']} {path} is valid")
    except jsonschema.ValidationError as e:
        if as_json:
            json_path = ".".join(str(p) for p in e.absolute_path) if e.absolute_path else None
            print(json.dumps({"valid": False, "path": str(path), "error": e.message, "json_path": json_path}))
        else:
            print(f"{ICONS['fail']} Validation failed for {path}:")
            print(f"   {e.message}")
            if e.absolute_path:
                json_path = ".".join(str(p) for p in e.absolute_path)
                print(f"   Path: {json_path}")
        sys.exit(1)
