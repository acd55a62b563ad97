"""Characteristic-root analysis and the critical eigenbasis.

For a lag measure L0 the characteristic matrix is

    Delta(lam) = lam I - sum_k A_k exp(lam theta_k).

At the verge of instability det Delta has a simple pair +-i omega_c and every other root
lies in the open left half plane. The critical space is spanned by Phi_1 = d e^{i omega_c theta}
and its conjugate, the adjoint basis by Psi_1(s) = c d2 e^{-i omega_c s}.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np
from scipy.optimize import fsolve

from delay_average.errors import (
    DegenerateRoot,
    DomainError,
    NoCriticalPair,
    NoZeroRoot,
    NumericFailure,
    UnstableExtraRoots,
    WindowTooSmall,
)
from delay_average.model import MatrixLagMeasure
from delay_average.segment import HistorySegment

logger = logging.getLogger(__name__)

CENSUS_NOTE = (
    "Roots are certified only inside the census window. A retarded equation has countably many "
    "further roots with strongly negative real parts outside it; those are not examined, apart from "
    "the bound |lam| <= sum ||A_k|| that every root with Re lam >= 0 obeys."
)


def characteristic_matrix(measure: MatrixLagMeasure, lam: complex) -> tuple[np.ndarray, np.ndarray]:
    """Return Delta(lam) and its derivative in lam."""
    weights = np.exp(lam * measure.lags)
    matrices = measure.matrices
    eye = np.eye(measure.n)
    delta = lam * eye - np.einsum("k,kij->ij", weights, matrices)
    delta_prime = eye - np.einsum("k,kij->ij", measure.lags * weights, matrices)
    return delta, delta_prime


def characteristic_determinant(measure: MatrixLagMeasure, lams: np.ndarray) -> np.ndarray:
    """Vectorized det Delta(lam) over an array of points."""
    lams = np.asarray(lams, dtype=complex)
    weights = np.exp(np.multiply.outer(lams.ravel(), measure.lags))
    delta = lams.ravel()[:, None, None] * np.eye(measure.n) - np.einsum("mk,kij->mij", weights, measure.matrices)
    return np.linalg.det(delta).reshape(lams.shape)


def _newton(measure: MatrixLagMeasure, lam: complex, max_iter: int = 60) -> tuple[complex, bool]:
    """Newton on det Delta using d/dlam log det = tr(Delta^{-1} Delta')."""
    for _ in range(max_iter):
        delta, delta_prime = characteristic_matrix(measure, lam)
        try:
            trace = np.trace(np.linalg.solve(delta, delta_prime))
        except np.linalg.LinAlgError:
            return lam, True
        if not np.isfinite(trace) or trace == 0:
            return lam, False
        step = -1.0 / trace
        lam += step
        if abs(step) <= 1e-14 * max(1.0, abs(lam)):
            return lam, True
    return lam, False


@dataclass(frozen=True)
class ScanConfig:
    """Search window and tolerances for the root census.

    Attributes:
        rho_max: Depth of the stable window (default 10/r).
        delta_margin: Roots with Re lam >= -delta_margin count as critical or unstable.
        omega_max: Height of the stable window (default max(8 omega_c, 20/r)).
        tol_imag: Largest |Re lam| accepted for the critical root.
        tol_real: Every other polished root must have Re lam < -tol_real.
        axis_offset: The census rectangles start this far below the real axis.
        edge_points: Initial samples per rectangle edge.
        im_splits: Strips the stable window is cut into before recursive subdivision.
        max_depth: Subdivision depth limit.
        scan_points: Samples of |det Delta(i omega)| used to seed Newton.
        stable_census: Also count and polish the roots inside the stable window.
    """

    rho_max: float | None = None
    delta_margin: float = 1e-6
    omega_max: float | None = None
    tol_imag: float = 1e-8
    tol_real: float = 1e-9
    axis_offset: float = 1e-3
    edge_points: int = 64
    im_splits: int = 4
    max_depth: int = 8
    scan_points: int = 4000
    stable_census: bool = True


# Rectangles are (re_lo, re_hi, im_lo, im_hi)
type Rect = tuple[float, float, float, float]

_MAX_EDGE_POINTS = 1 << 17


def _edge_phase(measure: MatrixLagMeasure, a: complex, b: complex, points: int, threshold: float) -> float:
    """Total change of arg det Delta along the segment a -> b."""
    t = np.linspace(0.0, 1.0, points)
    while True:
        values = characteristic_determinant(measure, a + (b - a) * t)
        if not np.all(np.isfinite(values)) or np.any(values == 0):
            msg = f"det Delta vanishes or overflows on the contour edge {a} -> {b}"
            raise WindowTooSmall(msg)
        increments = np.angle(values[1:] / values[:-1])
        bad = np.abs(increments) > threshold
        if not np.any(bad):
            return float(increments.sum())
        if t.size > _MAX_EDGE_POINTS:
            msg = f"winding integral along {a} -> {b} did not resolve"
            raise WindowTooSmall(msg)
        t = np.sort(np.concatenate([t, 0.5 * (t[:-1][bad] + t[1:][bad])]))


def _winding(measure: MatrixLagMeasure, rect: Rect, points: int, threshold: float) -> int:
    re_lo, re_hi, im_lo, im_hi = rect
    corners = [complex(re_lo, im_lo), complex(re_hi, im_lo), complex(re_hi, im_hi), complex(re_lo, im_hi)]
    total = sum(_edge_phase(measure, corners[i], corners[(i + 1) % 4], points, threshold) for i in range(4))
    turns = total / (2 * np.pi)
    count = round(turns)
    if abs(turns - count) > 0.05 or count < 0:
        msg = f"winding number {turns:.3f} on {rect} is not a nonnegative integer"
        raise WindowTooSmall(msg)
    return count


def count_roots(measure: MatrixLagMeasure, rect: Rect, points: int = 64) -> int:
    """Number of roots of det Delta inside ``rect`` by the argument principle.

    The count is taken twice, with phase increments refined below pi/4 and pi/8, and must agree.

    Raises:
        WindowTooSmall: If the refinement does not settle or a root sits on the boundary.
    """
    coarse = _winding(measure, rect, points, np.pi / 4)
    fine = _winding(measure, rect, points, np.pi / 8)
    if coarse != fine:
        msg = f"winding counts on {rect} did not stabilize ({coarse} vs {fine})"
        raise WindowTooSmall(msg)
    return fine


@dataclass
class CensusReport:
    """Outcome of the root census.

    Attributes:
        mode: "hopf" for an imaginary pair, "zero" for a simple root at zero.
        critical_root: The polished critical root.
        right_box: Rectangle holding every root with Re lam >= -delta_margin.
        right_count: Roots counted in ``right_box`` (must be one).
        stable_window: Rectangle of the stable census.
        subrectangles: (rectangle, count) pairs of the stable census.
        stable_roots: Polished roots inside the stable window.
        clusters: Centres of rectangles at the depth limit that still held several roots.
    """

    mode: str
    critical_root: complex
    right_box: Rect
    right_count: int
    stable_window: Rect | None = None
    stable_count: int = 0
    subrectangles: list[tuple[Rect, int]] = field(default_factory=list)
    stable_roots: list[complex] = field(default_factory=list)
    clusters: list[complex] = field(default_factory=list)
    note: str = CENSUS_NOTE

    @property
    def omega_c(self) -> float:
        """Critical frequency (zero in zero-root mode)."""
        return abs(self.critical_root.imag)

    def to_dict(self) -> dict:
        """JSON-ready form; complex numbers become {"re", "im"} pairs."""

        def rect_dict(rect: Rect) -> dict:
            return {"re_min": rect[0], "re_max": rect[1], "im_min": rect[2], "im_max": rect[3]}

        def root_dict(root: complex) -> dict:
            return {"re": float(root.real), "im": float(root.imag)}

        return {
            "mode": self.mode,
            "omega_c": self.omega_c,
            "critical_root": root_dict(self.critical_root),
            "right_box": rect_dict(self.right_box),
            "right_count": self.right_count,
            "stable_window": None if self.stable_window is None else rect_dict(self.stable_window),
            "stable_count": self.stable_count,
            "subrectangles": [{**rect_dict(rect), "count": count} for rect, count in self.subrectangles],
            "stable_roots": [root_dict(root) for root in sorted(self.stable_roots, key=lambda z: -z.real)],
            "clusters": [root_dict(root) for root in self.clusters],
            "note": self.note,
        }


def _right_box(measure: MatrixLagMeasure, scan: ScanConfig) -> Rect:
    # |lam| <= sum ||A_k|| e^{delta r} for Re lam >= -delta
    bound = measure.norm_bound() * np.exp(scan.delta_margin * measure.max_delay) + 1.0
    return (-scan.delta_margin, bound, -scan.axis_offset, bound)


def _split(rect: Rect) -> list[Rect]:
    # Off-centre cut so that symmetric root configurations do not land on a new edge
    re_lo, re_hi, im_lo, im_hi = rect
    re_mid = re_lo + 0.5137 * (re_hi - re_lo)
    im_mid = im_lo + 0.4871 * (im_hi - im_lo)
    return [
        (re_lo, re_mid, im_lo, im_mid),
        (re_mid, re_hi, im_lo, im_mid),
        (re_lo, re_mid, im_mid, im_hi),
        (re_mid, re_hi, im_mid, im_hi),
    ]


def _inside(rect: Rect, lam: complex) -> bool:
    re_lo, re_hi, im_lo, im_hi = rect
    slack = 1e-9 * max(1.0, abs(lam))
    return re_lo - slack <= lam.real <= re_hi + slack and im_lo - slack <= lam.imag <= im_hi + slack


def _stable_census(measure: MatrixLagMeasure, report: CensusReport, omega_c: float, scan: ScanConfig) -> None:
    r = measure.max_delay
    rho = scan.rho_max if scan.rho_max is not None else 10.0 / r
    height = scan.omega_max if scan.omega_max is not None else max(8.0 * omega_c, 20.0 / r)
    window = (-rho, -scan.delta_margin, -scan.axis_offset, height)
    report.stable_window = window
    edges = np.linspace(window[2], window[3], scan.im_splits + 1)
    strips = [(window[0], window[1], float(lo), float(hi)) for lo, hi in zip(edges[:-1], edges[1:], strict=True)]

    def visit(rect: Rect, depth: int) -> int:
        count = count_roots(measure, rect, scan.edge_points)
        report.subrectangles.append((rect, count))
        if count == 0:
            return count
        if count == 1:
            centre = complex(0.5 * (rect[0] + rect[1]), 0.5 * (rect[2] + rect[3]))
            lam, ok = _newton(measure, centre)
            if ok and _inside(rect, lam):
                report.stable_roots.append(lam)
                return count
        if depth >= scan.max_depth:
            report.clusters.append(complex(0.5 * (rect[0] + rect[1]), 0.5 * (rect[2] + rect[3])))
            return count
        children = sum(visit(child, depth + 1) for child in _split(rect))
        if children != count:
            msg = f"subrectangle counts {children} do not add up to {count} on {rect}"
            raise WindowTooSmall(msg)
        return count

    report.stable_count = sum(visit(strip, 0) for strip in strips)
    if any(lam.real >= -scan.tol_real for lam in report.stable_roots):
        msg = "the stable census found a root with nonnegative real part"
        raise UnstableExtraRoots(msg)


def _scan_axis(measure: MatrixLagMeasure, scan: ScanConfig, top: float) -> list[complex]:
    """Newton-polished roots seeded at local minima of |det Delta(i omega)|."""
    omegas = np.linspace(0.0, top, scan.scan_points)[1:]
    modulus = np.abs(characteristic_determinant(measure, 1j * omegas))
    interior = np.flatnonzero((modulus[1:-1] <= modulus[:-2]) & (modulus[1:-1] <= modulus[2:])) + 1
    seeds = sorted(interior, key=lambda i: modulus[i])[:20]
    roots = []
    for index in seeds:
        lam, ok = _newton(measure, 1j * omegas[index])
        if ok and lam.imag > scan.tol_imag:
            roots.append(lam)
    return roots


def locate_critical_pair(measure: MatrixLagMeasure, scan: ScanConfig | None = None) -> tuple[float, CensusReport]:
    """Find omega_c and certify that +-i omega_c is the only pair at or right of the axis.

    Args:
        measure: The linear part L0.
        scan: Census window and tolerances.

    Returns:
        The critical frequency and the census report.

    Raises:
        NoCriticalPair: No root lies within ``tol_imag`` of the imaginary axis.
        UnstableExtraRoots: Another root has Re lam >= -delta_margin.
        WindowTooSmall: The winding integrals did not settle.
    """
    scan = scan or ScanConfig()
    box = _right_box(measure, scan)
    candidates = [lam for lam in _scan_axis(measure, scan, box[3]) if abs(lam.real) <= scan.tol_imag]
    if not candidates:
        msg = "no characteristic root lies on the imaginary axis within tolerance"
        raise NoCriticalPair(msg)
    critical = min(candidates, key=lambda lam: abs(lam.real))
    right_count = count_roots(measure, box, scan.edge_points)
    report = CensusReport("hopf", complex(critical), box, right_count)
    logger.debug("critical root %s, %d root(s) in the right box", critical, right_count)
    if right_count != 1:
        msg = f"{right_count} roots with Re >= -{scan.delta_margin} (expected only the critical pair)"
        raise UnstableExtraRoots(msg)
    if scan.stable_census:
        _stable_census(measure, report, critical.imag, scan)
    return float(critical.imag), report


def locate_zero_root(measure: MatrixLagMeasure, scan: ScanConfig | None = None) -> CensusReport:
    """Certify that zero is a simple root and all others are stable.

    Raises:
        NoZeroRoot: det Delta(0) does not vanish.
        UnstableExtraRoots: Another root has Re lam >= -delta_margin.
    """
    scan = scan or ScanConfig()
    delta, delta_prime = characteristic_matrix(measure, 0.0)
    singular = np.linalg.svd(delta, compute_uv=False)
    if singular[-1] > 1e-10 * max(1.0, np.linalg.norm(delta_prime, 2)):
        msg = f"zero is not a characteristic root (smallest singular value {singular[-1]:.3e})"
        raise NoZeroRoot(msg)
    box = _right_box(measure, scan)
    right_count = count_roots(measure, box, scan.edge_points)
    report = CensusReport("zero", 0j, box, right_count)
    if right_count != 1:
        msg = f"{right_count} roots with Re >= -{scan.delta_margin} (expected only the zero root)"
        raise UnstableExtraRoots(msg)
    if scan.stable_census:
        _stable_census(measure, report, 0.0, scan)
    return report


def locate_threshold(
    measure_factory: Callable[[float], MatrixLagMeasure],
    p_guess: float,
    omega_guess: float,
) -> tuple[float, float]:
    """Solve det Delta(i omega; p) = 0 for a scalar parameter p and omega.

    Returns:
        The threshold parameter and the critical frequency.
    """

    def residual(x: np.ndarray) -> list[float]:
        value = characteristic_determinant(measure_factory(float(x[0])), np.array([1j * x[1]]))[0]
        return [value.real, value.imag]

    solution, _, status, message = fsolve(residual, [p_guess, omega_guess], xtol=1e-13, full_output=True)
    if status != 1:
        msg = f"threshold search did not converge: {message}"
        raise NumericFailure(msg)
    return float(solution[0]), abs(float(solution[1]))


@dataclass(frozen=True)
class SpectralData:
    """Critical eigendata.

    Attributes:
        omega_c: Critical frequency (0 in zero-root mode).
        d: Right null vector of Delta(i omega_c).
        d2: Left null vector of Delta(i omega_c).
        c: Normalization 1/(d2 Delta'(i omega_c) d).
        max_delay: Delay horizon r of the measure.
        mode: "hopf" or "zero".
    """

    omega_c: float
    d: np.ndarray
    d2: np.ndarray
    c: complex
    max_delay: float
    mode: str = "hopf"

    @property
    def is_zero_mode(self) -> bool:
        """True for the zero-root instability."""
        return self.mode == "zero"

    @property
    def psi_hat(self) -> np.ndarray:
        """Rows Psi_hat_1 = c d2 and its conjugate; a single real row in zero-root mode."""
        row = self.c * self.d2
        if self.is_zero_mode:
            return row.real[None, :]
        return np.stack([row, row.conj()])

    @property
    def psi1(self) -> np.ndarray:
        """Psi_hat_1."""
        return self.psi_hat[0]

    @property
    def period(self) -> float:
        """2 pi / omega_c."""
        if self.is_zero_mode:
            msg = "the zero-root mode has no period"
            raise DomainError(msg)
        return 2 * np.pi / self.omega_c

    def phi1(self, thetas: np.ndarray) -> np.ndarray:
        """Phi_1 = d exp(i omega_c theta) sampled at ``thetas``, shape (len, n)."""
        return np.exp(1j * self.omega_c * np.asarray(thetas))[:, None] * self.d

    def rephased(self, alpha: float) -> "SpectralData":
        """Same eigenspace with d multiplied by exp(i alpha)."""
        rotation = np.exp(1j * alpha)
        return replace(self, d=self.d * rotation, c=self.c / rotation)


class NormalizationKind(StrEnum):
    """How the right null vector is scaled."""

    UNIT = "unit"
    ANCHOR = "anchor"


def eigendata(
    measure: MatrixLagMeasure,
    omega_c: float,
    *,
    normalization: NormalizationKind | str = NormalizationKind.UNIT,
    anchor: int = 0,
) -> SpectralData:
    """Null vectors and normalization of the critical root i omega_c (or 0).

    Args:
        measure: The linear part L0.
        omega_c: Critical frequency; 0 selects zero-root mode.
        normalization: "unit" gives |d| = 1 with the largest entry real positive,
            "anchor" gives d[anchor] = 1.
        anchor: Component fixed to one under the anchor normalization.

    Raises:
        NoCriticalPair: i omega_c is not a root.
        DegenerateRoot: The root is not simple.
    """
    zero_mode = omega_c == 0
    delta, delta_prime = characteristic_matrix(measure, 1j * omega_c)
    u, singular, vh = np.linalg.svd(delta)
    scale = np.linalg.norm(delta_prime, 2)
    if singular[-1] > 1e-10 * scale:
        msg = f"i*{omega_c} is not a characteristic root (residual {singular[-1]:.3e})"
        raise NoCriticalPair(msg)
    if singular.size > 1 and singular[-1] > 1e-6 * singular[-2]:
        msg = f"critical root is not simple (singular values {singular[-2]:.3e}, {singular[-1]:.3e})"
        raise DegenerateRoot(msg)
    d = vh[-1].conj()
    d2 = u[:, -1].conj()
    match NormalizationKind(normalization):
        case NormalizationKind.UNIT:
            lead = d[np.argmax(np.abs(d))]
            d = d * (abs(lead) / lead) / np.linalg.norm(d)
        case NormalizationKind.ANCHOR:
            if abs(d[anchor]) < 1e-12:
                msg = f"component {anchor} of the null vector vanishes; choose another anchor"
                raise DomainError(msg)
            d = d / d[anchor]
    if zero_mode:
        d = d.real.astype(complex)
        d2 = (d2 * np.exp(-1j * np.angle(d2[np.argmax(np.abs(d2))]))).real.astype(complex)
    pairing = d2 @ delta_prime @ d
    if not np.isfinite(pairing) or abs(pairing) < 1e-12 * scale:
        msg = "d2 Delta' d vanishes: the critical root has algebraic multiplicity above one"
        raise DegenerateRoot(msg)
    c = complex(1.0 / pairing)
    return SpectralData(float(omega_c), d, d2, c, measure.max_delay, "zero" if zero_mode else "hopf")


def _psi_row(eigen: SpectralData, which: int) -> tuple[np.ndarray, complex]:
    """Psi_hat row and the exponent lam_which (Psi(s) = row e^{-lam s})."""
    if eigen.is_zero_mode:
        if which != 1:
            msg = "the zero-root mode has a single adjoint function"
            raise DomainError(msg)
        return eigen.psi1, 0j
    if which not in {1, 2}:
        msg = f"which must be 1 or 2, got {which}"
        raise DomainError(msg)
    lam = 1j * eigen.omega_c if which == 1 else -1j * eigen.omega_c
    return eigen.psi_hat[which - 1], lam


def bilinear_pairing(eigen: SpectralData, measure: MatrixLagMeasure, which: int, seg: HistorySegment) -> complex:
    """<Psi_which, seg> = Psi(0) seg(0) + sum_k int_{theta_k}^0 Psi(s - theta_k) A_k seg(s) ds.

    The integrals use the composite trapezoid rule on the segment grid; a jump at zero only
    enters through the first term.
    """
    row, lam = _psi_row(eigen, which)
    total = complex(row @ seg.value_at_zero)
    nodes = seg.nodes
    for term in measure.terms:
        if term.lag == 0:
            continue
        if term.lag < -seg.span * (1 + 1e-9):
            msg = f"lag {term.lag} lies outside the segment span"
            raise DomainError(msg)
        keep = nodes > term.lag + 1e-9 * seg.grid_step
        s = np.concatenate([[term.lag], nodes[keep]])
        values = np.concatenate([seg.continuous_at(term.lag)[None, :], seg.values[keep]])
        integrand = np.exp(-lam * (s - term.lag)) * ((values @ term.matrix.T) @ row)
        total += complex(np.trapezoid(integrand, s))
    return total


def biorthogonality_residual(eigen: SpectralData, measure: MatrixLagMeasure) -> float:
    """max |<Psi_i, Phi_j> - delta_ij| from the closed-form pairing of exponentials."""
    if eigen.is_zero_mode:
        rows, lams, vectors = [eigen.psi1], [0j], [eigen.d]
    else:
        rows = list(eigen.psi_hat)
        lams = [1j * eigen.omega_c, -1j * eigen.omega_c]
        vectors = [eigen.d, eigen.d.conj()]
    worst = 0.0
    for i, (row, lam_i) in enumerate(zip(rows, lams, strict=True)):
        for j, (vector, lam_j) in enumerate(zip(vectors, lams, strict=True)):
            value = row @ vector
            for term in measure.terms:
                gap = lam_j - lam_i
                if abs(gap) < 1e-14:
                    integral = -term.lag
                else:
                    integral = (1 - np.exp(gap * term.lag)) / gap
                value += np.exp(lam_i * term.lag) * integral * (row @ term.matrix @ vector)
            worst = max(worst, abs(value - (i == j)))
    return float(worst)


def project_critical(
    eigen: SpectralData, measure: MatrixLagMeasure, seg: HistorySegment
) -> tuple[np.ndarray, HistorySegment]:
    """Split a segment into critical coordinates z and the stable remainder seg - Phi z."""
    z1 = bilinear_pairing(eigen, measure, 1, seg)
    thetas = seg.nodes
    if eigen.is_zero_mode:
        z = np.array([z1.real])
        critical = np.outer(np.ones_like(thetas), eigen.d.real) * z[0]
        at_zero = eigen.d.real * z[0]
    else:
        real_input = not np.iscomplexobj(seg.values) and not np.iscomplexobj(seg.value_at_zero)
        z2 = np.conj(z1) if real_input else bilinear_pairing(eigen, measure, 2, seg)
        z = np.array([z1, z2])
        phi1 = eigen.phi1(thetas)
        critical = phi1 * z1 + phi1.conj() * z2
        at_zero = eigen.d * z1 + eigen.d.conj() * z2
        if real_input:
            critical, at_zero = critical.real, at_zero.real
    stable_values = seg.values - critical
    jump = None if seg.jump_at_zero is None else seg.jump_at_zero - at_zero
    return z, HistorySegment(seg.grid_step, stable_values, jump)


def critical_orbit(
    eigen: SpectralData,
    hbar: float,
    t: float,
    *,
    grid_step: float,
    span: float | None = None,
) -> HistorySegment:
    """eta_t(theta) = sqrt(2 hbar) Re(d exp(i omega_c (t + theta))), the orbit with h = hbar.

    In zero-root mode the orbit is the constant d * hbar (hbar is then signed).
    """
    span = eigen.max_delay if span is None else span
    if eigen.is_zero_mode:
        return HistorySegment.constant(eigen.d.real * hbar, span, grid_step)
    if hbar < 0:
        msg = f"hbar must be nonnegative, got {hbar!r}"
        raise DomainError(msg)
    amplitude = np.sqrt(2.0 * hbar)
    return HistorySegment.from_function(
        lambda thetas: amplitude * (eigen.phi1(t + thetas)).real, span, grid_step
    )
