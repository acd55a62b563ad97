"""Simulation commands: delay-equation and averaged-SDE ensembles, their comparison, growth rates."""

import argparse
from dataclasses import dataclass

import numpy as np

from delay_average.averaging import ReducedCoefficients, averaged_total
from delay_average.commands.analysis import emit, linear_constants, out_dir, spectral_setup, workspace_for
from delay_average.decorators import require_config
from delay_average.errors import DomainError
from delay_average.formatting import bold, bold_cyan, dim, fmt_num, verdict
from delay_average.io import SIMULATE_DEFAULTS, build_model, section, write_csv
from delay_average.model import PerturbedModel
from delay_average.reduced import ReducedSDE, averaged_lyapunov, integrate_reduced, integrate_reduced_ensemble
from delay_average.segment import grid_steps
from delay_average.simulator import Observe, h_of_segment, integrate_sdde, lyapunov_from_maxima, simulate_ensemble
from delay_average.spectrum import SpectralData, critical_orbit
from delay_average.stats import boxplot_series, ecdf, ks_summary

# Averaged-SDE paths draw from streams past every delay-equation stream of the same seed
SDE_STREAM_OFFSET = 1 << 32

REDUCED_DEFAULTS = {"dt": 1e-3, "cap": 1e6}
LYAPUNOV_DEFAULTS = {"m": 10, "T": 2000.0, "realizations": 40, "dt": None}


@dataclass(frozen=True)
class Sample:
    """Final energies and passage times of one ensemble, both in slow time."""

    h_final: np.ndarray
    tau: np.ndarray
    summary: dict

    def rows(self) -> np.ndarray:
        """(path, h_final, tau) table."""
        return np.column_stack([np.arange(self.h_final.size), self.h_final, self.tau])


def _settings(config: dict, model: PerturbedModel) -> dict:
    sim = section(config, "simulate", SIMULATE_DEFAULTS)
    if not sim["H_star"] > sim["h0"]:
        msg = f"simulate.H_star ({sim['H_star']}) must exceed simulate.h0 ({sim['h0']})"
        raise DomainError(msg)
    if sim["dt"] is None:
        sim["dt"] = model.max_delay / 1000
    return sim


def _threads(config: dict, args: argparse.Namespace) -> int:
    threads = getattr(args, "threads", None)
    return threads if threads is not None else config.get("threads", 1)


def _require_scaling(model: PerturbedModel) -> float:
    if not model.epsilon > 0:
        msg = "simulation needs epsilon > 0 (the delay equation runs for T / epsilon^2)"
        raise DomainError(msg)
    return model.epsilon**2


def _passage_level(eigen: SpectralData, h_star: float) -> tuple[int, float]:
    """Component with the largest |d_j| and the level |d_j| sqrt(2 H*) (|d_j| |H*| for a zero root)."""
    component = int(np.argmax(np.abs(eigen.d)))
    scale = abs(eigen.d[component])
    level = scale * abs(h_star) if eigen.is_zero_mode else scale * np.sqrt(2.0 * h_star)
    return component, float(level)


def dde_sample(
    model: PerturbedModel, eigen: SpectralData, config: dict, args: argparse.Namespace
) -> tuple[Sample, dict]:
    """Ensemble of the delay equation from the critical orbit with energy h0."""
    eps2 = _require_scaling(model)
    sim = _settings(config, model)
    dt = sim["dt"]
    grid_steps(model.max_delay, dt)
    init = critical_orbit(eigen, sim["h0"], 0.0, grid_step=dt)
    component, level = _passage_level(eigen, sim["H_star"])
    result = simulate_ensemble(
        model,
        dt=dt,
        T=sim["T"] / eps2,
        seed=config["seed"],
        paths=sim["paths"],
        init=init,
        observe=Observe(final_segment=True, passage=(component, level)),
        chunk_size=sim["chunk_size"],
        threads=_threads(config, args),
    )
    h_final = np.array([h_of_segment(eigen, model.L0, result.segment(i)) for i in range(result.paths)])
    summary = {
        **result.summary(),
        "T_slow": sim["T"],
        "T_fast": sim["T"] / eps2,
        "h0": sim["h0"],
        "H_star": sim["H_star"],
        "passage_component": component,
        "passage_level": level,
        "mean_h_final": float(np.mean(h_final)),
    }
    return Sample(h_final, result.passage_times * eps2, summary), sim


def sde_sample(
    model: PerturbedModel, coeffs: ReducedCoefficients, config: dict
) -> tuple[Sample, ReducedSDE, dict]:
    """Ensemble of the averaged SDE over the same slow-time horizon."""
    sim = _settings(config, model)
    opts = section(config, "reduced", REDUCED_DEFAULTS)
    sde = ReducedSDE(coeffs, cap=opts["cap"])
    ensemble = integrate_reduced_ensemble(
        sde,
        sim["h0"],
        dt=opts["dt"],
        T=sim["T"],
        seed=config["seed"],
        paths=sim["paths"],
        level=sim["H_star"],
        first_index=SDE_STREAM_OFFSET,
    )
    summary = {
        **ensemble.summary(),
        "T": sim["T"],
        "h0": sim["h0"],
        "H_star": sim["H_star"],
        "mean_h_final": float(np.mean(ensemble.final)),
    }
    return Sample(ensemble.final, ensemble.passage_times, summary), sde, {**sim, **opts}


def _write_sample(name: str, sample: Sample, config: dict, args: argparse.Namespace) -> None:
    path = out_dir(config, args) / f"{name}.csv"
    write_csv(path, ["path", "h_final", "tau"], sample.rows(), config=config, seed=config["seed"])


def _sample_lines(title: str, model: PerturbedModel, sample: Sample) -> list[str]:
    censored = sample.summary.get("censored", 0)
    size = sample.h_final.size
    return [
        f"{bold_cyan(title)} {bold(model.name)} {dim(f'({size} paths, seed {sample.summary["seed"]})')}",
        f"  mean h(T)   {fmt_num(sample.summary['mean_h_final'])}",
        f"  censored    {censored} of {sample.h_final.size} never reached H*",
    ]


@require_config
def cmd_simulate_dde(config: dict, args: argparse.Namespace) -> None:
    """Euler-Maruyama ensemble of the full delay equation."""
    model = build_model(config)
    eigen, _ = spectral_setup(model, config)
    sample, sim = dde_sample(model, eigen, config, args)
    _write_sample("dde_ensemble", sample, config, args)
    if sim.get("record_path"):
        traj = integrate_sdde(
            model,
            dt=sim["dt"],
            T=sim["T"] / model.epsilon**2,
            seed=config["seed"],
            init=critical_orbit(eigen, sim["h0"], 0.0, grid_step=sim["dt"]),
        )
        header, rows = traj.to_rows()
        write_csv(out_dir(config, args) / "dde_path.csv", header, rows, config=config, seed=config["seed"])
    lines = _sample_lines("Delay equation", model, sample)
    if sample.summary["flagged"]:
        lines.append(verdict(ok=False, text=f"{len(sample.summary['flagged'])} paths went non-finite"))
    emit("dde_ensemble", {"model": model.name, "summary": sample.summary}, config, args, lines)


@require_config
def cmd_simulate_sde(config: dict, args: argparse.Namespace) -> None:
    """Euler-Maruyama ensemble of the averaged one-dimensional SDE."""
    model = build_model(config)
    coeffs = averaged_total(model, workspace_for(model, config))
    sample, sde, opts = sde_sample(model, coeffs, config)
    _write_sample("sde_ensemble", sample, config, args)
    if opts.get("record_path"):
        path = integrate_reduced(
            sde, opts["h0"], dt=opts["dt"], T=opts["T"], seed=config["seed"], path_index=SDE_STREAM_OFFSET
        )
        header, rows = path.to_rows()
        write_csv(out_dir(config, args) / "sde_path.csv", header, rows, config=config, seed=config["seed"])
    lines = _sample_lines("Averaged SDE", model, sample)
    lines.append(f"  clamp rate  {fmt_num(sample.summary['clamp_rate'], 3)}")
    payload = {"model": model.name, "coefficients": coeffs.to_dict(), "summary": sample.summary}
    emit("sde_ensemble", payload, config, args, lines)


@require_config
def cmd_compare(config: dict, args: argparse.Namespace) -> None:
    """Empirical laws of h(T) and of the first passage past H* under both equations."""
    model = build_model(config)
    workspace = workspace_for(model, config)
    coeffs = averaged_total(model, workspace)
    dde, _ = dde_sample(model, workspace.eigen, config, args)
    sde, _, _ = sde_sample(model, coeffs, config)
    out = out_dir(config, args)
    laws = {
        "h_dde": ecdf(dde.h_final),
        "h_sde": ecdf(sde.h_final),
        "tau_dde": ecdf(dde.tau),
        "tau_sde": ecdf(sde.tau),
    }
    for name, law in laws.items():
        header, rows = law.table()
        write_csv(out / f"compare_{name}.csv", header, rows, config=config, seed=config["seed"])
    h_ks = ks_summary(laws["h_dde"], laws["h_sde"])
    tau_ks = ks_summary(laws["tau_dde"], laws["tau_sde"])
    payload = {
        "model": model.name,
        "epsilon": model.epsilon,
        "coefficients": coeffs.to_dict(),
        "h": h_ks,
        "tau": tau_ks,
        "dde": dde.summary,
        "sde": sde.summary,
    }
    lines = [
        f"{bold_cyan('Comparison')} {bold(model.name)} {dim(f'(eps = {model.epsilon}, {dde.h_final.size} paths)')}",
        f"  KS h(T)     {fmt_num(h_ks['ks'], 4)}",
        f"  KS tau      {fmt_num(tau_ks['ks'], 4)}",
        f"  censored    {tau_ks['censored_a']} (delay) / {tau_ks['censored_b']} (averaged)",
    ]
    emit("compare", payload, config, args, lines)


@require_config
def cmd_lyapunov(config: dict, args: argparse.Namespace) -> None:
    """Running growth-rate estimates of the linear delay equation against eps^2 lambda_avg / 2."""
    model = build_model(config)
    workspace = workspace_for(model, config)
    constants = linear_constants(model, workspace)
    if constants is None:
        msg = "lyapunov needs a linear model: F = L1 eta and no G or G_q"
        raise DomainError(msg)
    eigen = workspace.eigen
    opts = section(config, "lyapunov", LYAPUNOV_DEFAULTS)
    r = model.max_delay
    if opts["m"] * r <= eigen.period:
        msg = f"lyapunov.m * r = {opts['m'] * r} must exceed the period {eigen.period:.6g}"
        raise DomainError(msg)
    dt = opts["dt"] or r / 1000
    width = grid_steps(r, dt)
    h0 = section(config, "simulate", SIMULATE_DEFAULTS)["h0"]
    component = int(np.argmax(np.abs(eigen.d)))
    result = simulate_ensemble(
        model,
        dt=dt,
        T=opts["T"],
        seed=config["seed"],
        paths=opts["realizations"],
        init=critical_orbit(eigen, h0, 0.0, grid_step=dt),
        observe=Observe(final_segment=False, absmax=(component, width)),
        threads=_threads(config, args),
    )
    times, estimates = lyapunov_from_maxima(result.absmax, r, opts["m"])
    series = boxplot_series(estimates, times)
    prediction = averaged_lyapunov(constants.C_b, constants.C_sigma, epsilon=model.epsilon)
    rows = np.column_stack(
        [series["t"], series["mean"], series["q25"], series["q75"], np.full(times.size, prediction.dde_scale)]
    )
    write_csv(
        out_dir(config, args) / "lyapunov.csv",
        ["t", "mean", "q25", "q75", "predicted"],
        rows,
        config=config,
        seed=config["seed"],
    )
    final = float(series["mean"][-1])
    payload = {
        "model": model.name,
        "epsilon": model.epsilon,
        "linear": constants.to_dict(),
        "prediction": prediction.to_dict(),
        "final_mean_estimate": final,
        "realizations": opts["realizations"],
        "m": opts["m"],
        "T": opts["T"],
        "dt": dt,
        "flagged": result.flagged,
    }
    lines = [
        f"{bold_cyan('Lyapunov')} {bold(model.name)} {dim(f'({opts["realizations"]} realizations, m = {opts["m"]})')}",
        f"  lambda_avg             {fmt_num(prediction.lambda_avg)}",
        f"  eps^2 lambda_avg / 2   {fmt_num(prediction.dde_scale)}",
        f"  estimate at t = {fmt_num(float(times[-1]))}  {fmt_num(final)}",
    ]
    emit("lyapunov", payload, config, args, lines)
