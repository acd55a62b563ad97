"""Euler-Maruyama integration of delay equations, single paths and ensembles.

Steps advance in blocks of B = min(lag offset in steps): within a block every delayed read
refers to states that are already known, so B increments are formed at once and accumulated
with a sequential cumulative sum, which is bit-identical to stepping one at a time.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.integrate import cumulative_trapezoid

from delay_average.errors import ConfigError, DomainError
from delay_average.model import MatrixLagMeasure, NoiseModel, PerturbedModel, PolyLagFunctional
from delay_average.segment import HistorySegment, grid_steps
from delay_average.spectrum import SpectralData, bilinear_pairing

__all__ = [
    "EnsembleResult",
    "HistorySegment",
    "Observe",
    "Trajectory",
    "critical_coordinates",
    "fundamental_initial",
    "h_of_segment",
    "integrate_sdde",
    "integrate_unperturbed",
    "integrate_unperturbed_many",
    "lyapunov_estimator",
    "lyapunov_from_maxima",
    "markov_autocorrelation",
    "path_rng",
    "sample_noise_path",
    "simulate_ensemble",
]

logger = logging.getLogger(__name__)

# Noise is drawn per path in blocks of this many steps, independent of T and of the block size
NOISE_BLOCK = 4096
_BUFFER_STEPS = 8192


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` of an ensemble seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _step_count(duration: float, dt: float) -> int:
    if duration < 0:
        msg = f"integration time must be nonnegative, got {duration!r}"
        raise ConfigError(msg)
    return int(np.ceil(duration / dt - 1e-9))


@dataclass(frozen=True)
class Trajectory:
    """A sampled path: ``values[k]`` is x at time k * dt, preceded by its initial history."""

    dt: float
    values: np.ndarray
    history: HistorySegment
    seed: int = 0
    noise_kind: str = "none"
    flagged: bool = False
    t0: float = 0.0

    @property
    def n(self) -> int:
        """State dimension."""
        return self.values.shape[1]

    @property
    def steps(self) -> int:
        """Number of steps taken."""
        return self.values.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        """Sample times."""
        return self.t0 + self.dt * np.arange(self.values.shape[0])

    @property
    def full_values(self) -> np.ndarray:
        """History on [-r, 0) followed by the path, spanning [-r, T]."""
        return np.concatenate([self.history.values[:-1], self.values])

    def segment_at(self, step: int) -> HistorySegment:
        """The state x_t at t = step * dt as a history segment."""
        if step == 0:
            return self.history
        if not 0 < step <= self.steps:
            msg = f"step {step} outside the trajectory (0..{self.steps})"
            raise DomainError(msg)
        width = self.history.steps
        return HistorySegment(self.dt, self.full_values[step : step + width + 1])

    def final_segment(self) -> HistorySegment:
        """The state at the end of the run."""
        return self.segment_at(self.steps)

    def to_rows(self) -> tuple[list[str], np.ndarray]:
        """CSV header ``t,x1,...,xn`` and the matching numeric table."""
        header = ["t", *(f"x{i + 1}" for i in range(self.n))]
        return header, np.column_stack([self.times, self.values])


class _LagReader:
    """Delayed reads x(t_i + theta) from a sliding buffer, with linear interpolation off-grid."""

    def __init__(self, lags: Sequence[float], dt: float) -> None:
        self.lags = list(lags)
        offsets = -np.asarray(self.lags, dtype=float) / dt
        whole = np.round(offsets)
        on_grid = np.abs(offsets - whole) <= 1e-9 * np.maximum(1.0, offsets)
        self.steps = np.where(on_grid, whole, np.floor(offsets)).astype(int)
        self.fracs = np.where(on_grid, 0.0, offsets - np.floor(offsets))
        self.slot = {lag: i for i, lag in enumerate(self.lags)}

    @property
    def block_size(self) -> int:
        return max(1, int(self.steps.min())) if self.lags else 1

    def gather(self, buf: np.ndarray, pos: int, count: int) -> list[np.ndarray]:
        """For each lag an array (P, count, n) of reads at steps pos..pos+count-1."""
        out = []
        for q, frac in zip(self.steps, self.fracs, strict=True):
            start = pos - q
            values = buf[:, start : start + count]
            if frac:
                values = (1.0 - frac) * values + frac * buf[:, start - 1 : start - 1 + count]
            out.append(values)
        return out


class _WhiteSource:
    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng

    def draw(self, count: int) -> np.ndarray:
        return self.rng.standard_normal(count)


class _TelegraphSource:
    """Sum of symmetric telegraph processes sampled at grid times, with exact exponential waits."""

    def __init__(self, rng: np.random.Generator, noise: NoiseModel, dt: float) -> None:
        self.rng = rng
        self.dt = dt
        terms = noise.correlation_terms
        self.amplitudes = [np.sqrt(weight) for weight, _ in terms]
        # Flip rate a/2 gives correlation exp(-a s)
        self.flip_rates = [decay / 2.0 for _, decay in terms]
        self.signs = [1.0 if rng.random() < 0.5 else -1.0 for _ in terms]
        self.next_switch = [rng.exponential(1.0 / rate) for rate in self.flip_rates]
        self.step = 0

    def draw(self, count: int) -> np.ndarray:
        times = (self.step + np.arange(count)) * self.dt
        out = np.zeros(count)
        for k, rate in enumerate(self.flip_rates):
            switches = []
            while self.next_switch[k] <= times[-1]:
                switches.append(self.next_switch[k])
                self.next_switch[k] += self.rng.exponential(1.0 / rate)
            flips = np.searchsorted(np.asarray(switches), times, side="right")
            out += self.amplitudes[k] * self.signs[k] * np.where(flips % 2, -1.0, 1.0)
            if len(switches) % 2:
                self.signs[k] = -self.signs[k]
        self.step += count
        return out


def _noise_source(noise: NoiseModel, rng: np.random.Generator, dt: float) -> _WhiteSource | _TelegraphSource:
    if noise.is_white:
        return _WhiteSource(rng)
    return _TelegraphSource(rng, noise, dt)


class _Observer:
    """Receives every new block of states (P, count, n) starting at step ``first``."""

    def update(self, values: np.ndarray, first: int) -> None:
        raise NotImplementedError


class _Recorder(_Observer):
    def __init__(self) -> None:
        self.blocks: list[np.ndarray] = []

    def update(self, values: np.ndarray, first: int) -> None:
        self.blocks.append(values.copy())

    def result(self) -> np.ndarray:
        return np.concatenate(self.blocks, axis=1)


class _Passage(_Observer):
    def __init__(self, paths: int, component: int, level: float, dt: float) -> None:
        self.component = component
        self.level = level
        self.dt = dt
        self.times = np.full(paths, np.inf)

    def update(self, values: np.ndarray, first: int) -> None:
        hit = np.abs(values[:, :, self.component]) >= self.level
        fresh = np.isinf(self.times) & hit.any(axis=1)
        if np.any(fresh):
            self.times[fresh] = (first + np.argmax(hit[fresh], axis=1)) * self.dt


class _Samples(_Observer):
    def __init__(self, stride: int) -> None:
        self.stride = stride
        self.blocks: list[np.ndarray] = []

    def update(self, values: np.ndarray, first: int) -> None:
        steps = first + np.arange(values.shape[1])
        keep = steps % self.stride == 0
        if np.any(keep):
            self.blocks.append(values[:, keep].copy())

    def result(self) -> np.ndarray:
        return np.concatenate(self.blocks, axis=1)


class _AbsMax(_Observer):
    """Max of |x_component| over consecutive windows of ``stride`` steps; step 0 joins window 1."""

    def __init__(self, paths: int, component: int, stride: int) -> None:
        self.component = component
        self.stride = stride
        self.current = np.zeros(paths)
        self.done: list[np.ndarray] = []

    def update(self, values: np.ndarray, first: int) -> None:
        steps = first + np.arange(values.shape[1])
        windows = np.maximum((steps + self.stride - 1) // self.stride, 1)
        magnitude = np.abs(values[:, :, self.component])
        for window in np.unique(windows):
            columns = windows == window
            self.current = np.fmax(self.current, magnitude[:, columns].max(axis=1))
            if steps[columns][-1] == window * self.stride:
                self.done.append(self.current)
                self.current = np.zeros_like(self.current)

    def result(self) -> np.ndarray:
        if not self.done:
            return np.zeros((self.current.shape[0], 0))
        return np.stack(self.done, axis=1)


class _Engine:
    """Euler-Maruyama for a PerturbedModel over a batch of paths."""

    def __init__(self, model: PerturbedModel, dt: float) -> None:
        self.model = model
        self.dt = dt
        self.width = grid_steps(model.max_delay, dt)
        self.reader = _LagReader(model.all_lags(), dt)
        self.linear = [(self.reader.slot[term.lag], term.matrix) for term in model.L0.terms]
        eps = model.epsilon
        self.terms: list[tuple[float, PolyLagFunctional, list[int]]] = []
        if eps:
            for scale, functional in ((eps * eps, model.G), (eps, model.Gq)):
                if functional is not None and not functional.is_zero:
                    self.terms.append((scale, functional, self._slots(functional)))
        self.noise_term = None
        if eps and not model.F.is_zero:
            self.noise_term = (model.F, self._slots(model.F))

    def _slots(self, functional: PolyLagFunctional) -> list[int]:
        return [self.reader.slot[lag] for lag in functional.lags]

    @staticmethod
    def _stack(lagged: list[np.ndarray], slots: list[int], shape: tuple[int, ...]) -> np.ndarray:
        if not slots:
            return np.zeros((*shape, 0))
        return np.concatenate([lagged[slot] for slot in slots], axis=-1)

    def increments(self, lagged: list[np.ndarray], shocks: np.ndarray | None) -> np.ndarray:
        """dt * drift plus the noise term, shape (P, count, n)."""
        shape = lagged[0].shape[:2]
        n = self.model.n
        drift = np.zeros((*shape, n))
        for slot, matrix in self.linear:
            values = lagged[slot]
            for i in range(n):
                for j in range(n):
                    if matrix[i, j]:
                        drift[..., i] += matrix[i, j] * values[..., j]
        for scale, functional, slots in self.terms:
            drift += scale * functional.evaluate(self._stack(lagged, slots, shape))
        eps = self.model.epsilon
        if self.noise_term is not None and not self.model.is_white:
            functional, slots = self.noise_term
            drift += (eps * shocks)[..., None] * functional.evaluate(self._stack(lagged, slots, shape))
        increment = self.dt * drift
        if self.noise_term is not None and self.model.is_white:
            functional, slots = self.noise_term
            scaled = eps * np.sqrt(self.dt) * shocks
            increment += functional.evaluate(self._stack(lagged, slots, shape)) * scaled[..., None]
        return increment

    def run(
        self,
        inits: Sequence[HistorySegment],
        sources: Sequence[_WhiteSource | _TelegraphSource] | None,
        steps: int,
        observers: Sequence[_Observer],
    ) -> tuple[np.ndarray, np.ndarray]:
        """Advance every path ``steps`` steps; returns the final buffer window and the flagged mask.

        A path is stopped at its first non-finite step and reads NaN from there on.
        """
        n, width = self.model.n, self.width
        paths = len(inits)
        room = max(self.reader.block_size, min(steps, _BUFFER_STEPS))
        buf = np.empty((paths, width + 1 + room, n))
        for p, init in enumerate(inits):
            seg = init.resampled(self.dt)
            if seg.steps != width or seg.n != n:
                msg = f"initial history has {seg.steps} cells of dimension {seg.n}, expected {width} x {n}"
                raise ConfigError(msg)
            buf[p, :width] = seg.values[:-1].real
            buf[p, width] = np.real(seg.value_at_zero)
        pos = width
        flagged = ~np.isfinite(buf[:, : width + 1]).all(axis=(1, 2))
        for observer in observers:
            observer.update(buf[:, pos : pos + 1], 0)
        need_noise = self.noise_term is not None
        shocks = np.zeros((paths, 0))
        used = 0
        done = 0
        with np.errstate(over="ignore", invalid="ignore"):
            while done < steps:
                count = min(self.reader.block_size, steps - done)
                if pos + count >= buf.shape[1]:
                    buf[:, : width + 1] = buf[:, pos - width : pos + 1]
                    pos = width
                block_shocks = None
                if need_noise:
                    if used + count > shocks.shape[1]:
                        fresh = np.stack([source.draw(NOISE_BLOCK) for source in sources])
                        shocks = np.concatenate([shocks[:, used:], fresh], axis=1)
                        used = 0
                    block_shocks = shocks[:, used : used + count]
                    used += count
                lagged = self.reader.gather(buf, pos, count)
                if flagged.any():
                    # Stopped paths stay NaN; only live paths are stepped
                    alive = ~flagged
                    increment = np.full((paths, count, n), np.nan)
                    if alive.any():
                        increment[alive] = self.increments(
                            [values[alive] for values in lagged],
                            None if block_shocks is None else block_shocks[alive],
                        )
                else:
                    increment = self.increments(lagged, block_shocks)
                states = np.concatenate([buf[:, pos : pos + 1], increment], axis=1).cumsum(axis=1)[:, 1:]
                bad = ~np.isfinite(states).all(axis=2)
                if bad.any():
                    states[np.cumsum(bad, axis=1) > 0] = np.nan
                    flagged |= bad.any(axis=1)
                buf[:, pos + 1 : pos + count + 1] = states
                pos += count
                new = buf[:, pos - count + 1 : pos + 1]
                for observer in observers:
                    observer.update(new, done + 1)
                done += count
        return buf[:, pos - width : pos + 1].copy(), flagged


def _as_history(init: HistorySegment, dt: float) -> HistorySegment:
    seg = init.resampled(dt)
    values = seg.values.real if np.iscomplexobj(seg.values) else seg.values
    jump = None if seg.jump_at_zero is None else np.real(seg.jump_at_zero)
    return HistorySegment(dt, values, jump)


def integrate_unperturbed_many(
    measure: MatrixLagMeasure, inits: Sequence[HistorySegment], T: float, dt: float
) -> list[Trajectory]:
    """Explicit Euler for the linear equation from several initial histories at once."""
    model = PerturbedModel(measure, PolyLagFunctional.zero(measure.n), epsilon=0.0)
    engine = _Engine(model, dt)
    recorder = _Recorder()
    engine.run(inits, None, _step_count(T, dt), [recorder])
    values = recorder.result()
    return [
        Trajectory(dt, values[p], _as_history(init, dt), flagged=not np.isfinite(values[p]).all())
        for p, init in enumerate(inits)
    ]


def integrate_unperturbed(measure: MatrixLagMeasure, init: HistorySegment, T: float, dt: float) -> Trajectory:
    """Explicit Euler for x' = L0 x_t; a jump in ``init`` becomes x(0)."""
    return integrate_unperturbed_many(measure, [init], T, dt)[0]


def integrate_sdde(
    model: PerturbedModel,
    *,
    dt: float,
    T: float,
    seed: int,
    init: HistorySegment,
    path_index: int = 0,
) -> Trajectory:
    """One Euler-Maruyama path of the perturbed equation.

    Args:
        model: The perturbed delay equation.
        dt: Step size; must divide the delay horizon.
        T: Integration time.
        seed: Base seed of the ensemble.
        init: Initial history on [-r, 0].
        path_index: Which stream of the ensemble to use.
    """
    engine = _Engine(model, dt)
    recorder = _Recorder()
    source = _noise_source(model.noise, path_rng(seed, path_index), dt)
    _, flagged = engine.run([init], [source], _step_count(T, dt), [recorder])
    if flagged[0]:
        logger.warning("path %d of seed %d produced non-finite values", path_index, seed)
    return Trajectory(
        dt, recorder.result()[0], _as_history(init, dt), seed, model.noise.kind.value, bool(flagged[0])
    )


@dataclass(frozen=True)
class Observe:
    """What an ensemble run keeps per path.

    Attributes:
        final_segment: Keep the final state x_T.
        passage: (component, level) for the first time |x_component| >= level.
        sample_stride: Keep every ``sample_stride``-th state.
        absmax: (component, stride) for window maxima of |x_component|.
    """

    final_segment: bool = True
    passage: tuple[int, float] | None = None
    sample_stride: int | None = None
    absmax: tuple[int, int] | None = None


@dataclass
class EnsembleResult:
    """Per-path observations of an ensemble, ordered by path index."""

    seed: int
    dt: float
    paths: int
    steps: int
    final_segments: np.ndarray | None = None
    passage_times: np.ndarray | None = None
    samples: np.ndarray | None = None
    absmax: np.ndarray | None = None
    flagged: list[int] = field(default_factory=list)

    def segment(self, path: int) -> HistorySegment:
        """Final state of ``path``."""
        if self.final_segments is None:
            msg = "final segments were not recorded"
            raise DomainError(msg)
        return HistorySegment(self.dt, self.final_segments[path])

    def summary(self) -> dict:
        """Counts and flags for the ensemble JSON artifact."""
        summary = {
            "seed": self.seed,
            "dt": self.dt,
            "paths": self.paths,
            "steps": self.steps,
            "flagged": self.flagged,
        }
        if self.passage_times is not None:
            summary["censored"] = int(np.isinf(self.passage_times).sum())
        return summary


def _run_chunk(
    model: PerturbedModel,
    dt: float,
    steps: int,
    seed: int,
    indices: range,
    init: Callable[[int], HistorySegment],
    observe: Observe,
) -> dict:
    engine = _Engine(model, dt)
    paths = len(indices)
    observers: dict[str, _Observer] = {}
    if observe.passage is not None:
        observers["passage_times"] = _Passage(paths, observe.passage[0], observe.passage[1], dt)
    if observe.sample_stride:
        observers["samples"] = _Samples(observe.sample_stride)
    if observe.absmax is not None:
        observers["absmax"] = _AbsMax(paths, *observe.absmax)
    sources = [_noise_source(model.noise, path_rng(seed, index), dt) for index in indices]
    final, flagged = engine.run([init(index) for index in indices], sources, steps, list(observers.values()))
    out = {"flagged": [index for index, bad in zip(indices, flagged, strict=True) if bad]}
    if observe.final_segment:
        out["final_segments"] = final
    for name, observer in observers.items():
        out[name] = observer.times if isinstance(observer, _Passage) else observer.result()
    return out


def simulate_ensemble(
    model: PerturbedModel,
    *,
    dt: float,
    T: float,
    seed: int,
    paths: int,
    init: HistorySegment | Callable[[int], HistorySegment],
    observe: Observe | None = None,
    chunk_size: int = 64,
    threads: int = 1,
) -> EnsembleResult:
    """Run ``paths`` independent trajectories; path i uses stream ``path_rng(seed, i)``.

    Results do not depend on ``chunk_size`` or ``threads``.
    """
    observe = observe or Observe()
    steps = _step_count(T, dt)
    make_init = init if callable(init) else (lambda _index: init)
    chunks = [range(start, min(start + chunk_size, paths)) for start in range(0, paths, chunk_size)]

    def work(chunk: range) -> dict:
        out = _run_chunk(model, dt, steps, seed, chunk, make_init, observe)
        logger.info("paths %d-%d done (%d steps each)", chunk.start, chunk.stop - 1, steps)
        return out

    if threads == 1 or len(chunks) == 1:
        parts = [work(chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            parts = list(pool.map(work, chunks))
    result = EnsembleResult(seed, dt, paths, steps, flagged=[i for part in parts for i in part["flagged"]])
    for name in ("final_segments", "passage_times", "samples", "absmax"):
        if parts and name in parts[0]:
            setattr(result, name, np.concatenate([part[name] for part in parts], axis=0))
    if result.flagged:
        logger.warning("%d of %d paths produced non-finite values", len(result.flagged), paths)
    return result


def fundamental_initial(
    eigen: SpectralData, v: np.ndarray, grid_step: float, *, stable: bool = True
) -> HistorySegment:
    """Initial datum 1_{0} v, or its stable part (I - pi) 1_{0} v.

    The stable part has history -Phi(theta) Psi_hat v on [-r, 0) and value v - Phi(0) Psi_hat v at 0.
    """
    v = np.asarray(v, dtype=float)
    span = eigen.max_delay
    if not stable:
        return HistorySegment.indicator(v, span, grid_step)
    if eigen.is_zero_mode:
        critical = eigen.d.real * (eigen.psi1 @ v).real
        seg = HistorySegment.constant(-critical, span, grid_step)
        return HistorySegment(grid_step, seg.values, v - critical)
    weight = eigen.psi1 @ v
    seg = HistorySegment.from_function(lambda thetas: -2.0 * (eigen.phi1(thetas) * weight).real, span, grid_step)
    return HistorySegment(grid_step, seg.values, v - 2.0 * (eigen.d * weight).real)


def critical_coordinates(eigen: SpectralData, measure: MatrixLagMeasure, traj: Trajectory) -> np.ndarray:
    """z_1(t) = <Psi_1, x_t> at every grid time t = k dt, k = 0..steps.

    Uses one cumulative trapezoid per lag term: the integral over [t + theta_k, t] is a
    difference of running integrals.
    """
    dt = traj.dt
    width = traj.history.steps
    full = traj.full_values
    times = (np.arange(full.shape[0]) - width) * dt
    omega = eigen.omega_c
    row = eigen.psi1
    own = np.arange(traj.steps + 1) + width
    z = (traj.values @ row).astype(complex)
    for term in measure.terms:
        if term.lag == 0:
            continue
        integrand = np.exp(-1j * omega * times) * ((full @ term.matrix.T) @ row)
        running = cumulative_trapezoid(integrand, dx=dt, initial=0.0)
        offset = -term.lag / dt
        whole = int(np.floor(offset + 1e-9))
        frac = offset - whole
        lower = running[own - whole]
        if frac > 1e-9:
            lower = (1 - frac) * lower + frac * running[own - whole - 1]
        t = traj.times
        z += np.exp(1j * omega * (t + term.lag)) * (running[own] - lower)
    return z.real.astype(complex) if eigen.is_zero_mode else z


def h_of_segment(eigen: SpectralData, measure: MatrixLagMeasure, seg: HistorySegment) -> float:
    """The energy 2|<Psi_1, seg>|^2 (the signed coordinate <Psi, seg> in zero-root mode)."""
    z1 = bilinear_pairing(eigen, measure, 1, seg)
    if eigen.is_zero_mode:
        return float(z1.real)
    return 2.0 * abs(z1) ** 2


def lyapunov_from_maxima(maxima: np.ndarray, window_time: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Running estimator (1/t) log sup_{[t - m w, t]} |x| from window maxima.

    Args:
        maxima: Shape (paths, K): max |x| over consecutive windows of length ``window_time``.
        window_time: Length w of one window.
        m: Windows per supremum.

    Returns:
        Times t_k = k w for k = m..K and the estimator, shape (paths, K - m + 1).
    """
    maxima = np.atleast_2d(maxima)
    if maxima.shape[1] < m:
        msg = f"need at least {m} windows, got {maxima.shape[1]}"
        raise DomainError(msg)
    sup = sliding_window_view(maxima, m, axis=1).max(axis=-1)
    times = window_time * np.arange(m, maxima.shape[1] + 1)
    with np.errstate(divide="ignore"):
        return times, np.log(sup) / times


def lyapunov_estimator(
    traj: Trajectory, m: int, component: int = 0, *, period: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """lambda(t) = (1/t) log sup_{s in [t - m r, t]} |x_component(s)| at t = k r.

    Raises:
        DomainError: If m r does not exceed ``period`` or the path is shorter than m r.
    """
    r = traj.history.span
    if period is not None and m * r <= period:
        msg = f"window m*r = {m * r} must exceed the period {period}"
        raise DomainError(msg)
    stride = traj.history.steps
    windows = traj.steps // stride
    if windows < m:
        msg = f"trajectory of length {traj.steps * traj.dt} is shorter than the window {m * r}"
        raise DomainError(msg)
    magnitude = np.abs(traj.values[: windows * stride + 1, component])
    maxima = np.maximum.reduceat(magnitude[1:], np.arange(0, windows * stride, stride))
    maxima[0] = max(maxima[0], magnitude[0])
    times, estimate = lyapunov_from_maxima(maxima[None, :], r, m)
    return times, estimate[0]


def sample_noise_path(noise: NoiseModel, dt: float, steps: int, seed: int, path_index: int = 0) -> np.ndarray:
    """sigma(xi) at steps 0..steps-1 as the integrator sees it."""
    source = _TelegraphSource(path_rng(seed, path_index), noise, dt)
    return source.draw(steps)


def markov_autocorrelation(samples: np.ndarray, dt: float, lags: np.ndarray) -> np.ndarray:
    """Time-averaged empirical autocorrelation of a stationary sample path at the given lag times."""
    samples = np.asarray(samples, dtype=float)
    shifts = np.rint(np.asarray(lags) / dt).astype(int)
    if np.any(shifts >= samples.size):
        msg = "lag longer than the sample path"
        raise DomainError(msg)
    return np.array([np.mean(samples[: samples.size - k] * samples[k:]) for k in shifts])
