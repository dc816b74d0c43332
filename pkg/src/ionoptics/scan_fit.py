"""Nonlinear least-squares analysis of position/duration scan data.

A scan dataset is a grid of records (position x, pulse duration t, measured
excitation probability p1, shot count). The global fit extracts the beam
parameters (Omega0, x_c, w0) of the sin^2((Omega0*t/2)*exp(-2(x-x_c)^2/w0^2))
model, SPAM-adjusted, by shot-weighted least squares with a hand-rolled
damped Gauss-Newton (Levenberg-Marquardt) loop and the analytic Jacobian.
Per-position 1D fits give the Rabi-frequency profile Omega(x), from which a
D4sigma second-moment width is computed; pairs of fits yield beam
separations and crosstalk bounds.

Record weighting is binomial: weight = shots/(p(1-p) + q) with a variance
floor q = 1/(4*shots) so records at p in {0, 1} stay finite. With those
weights the residual RMS of a well-specified fit sits near 1, which is the
shot-noise floor used to trigger multi-start recovery.

File formats (see docs/file_formats.md): scans travel as CSV with header
``position_um,duration_us,p1,shots``; fit results as JSON (frequencies in
Hz, lengths in um) plus a frequency-profile CSV.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .rabi_model import BeamProfileParams, SpamModel, crosstalk_rabi_bound, intensity_crosstalk_ratio

__all__ = [
    "ScanRecord",
    "ScanDataset",
    "ScanFormatError",
    "DegenerateDataError",
    "FitConvergenceError",
    "FreqProfilePoint",
    "BeamFitResult",
    "PairReport",
    "fit_model",
    "fit_model_jacobian",
    "fit_beam",
    "fit_freq_profile",
    "d4sigma",
    "pair_analysis",
    "read_scan_csv",
    "write_scan_csv",
    "write_fit_report",
    "read_fit_report",
    "write_freq_profile_csv",
    "pair_report_dict",
    "fit_report_dict",
]

TWO_PI = 2.0 * math.pi

#: Convergence thresholds for the damped Gauss-Newton loop.
STEP_TOL = 1e-10
GRAD_TOL = 1e-12

#: Weighted residual RMS above this multiple of the shot-noise floor (1.0)
#: triggers multi-start recovery.
RESTART_RMS = 2.0


class ScanFormatError(ValueError):
    """A scan CSV violates the schema; the message carries the line number."""


class DegenerateDataError(ValueError):
    """The dataset cannot constrain the fit (rank-deficient design)."""


class FitConvergenceError(RuntimeError):
    """No optimizer run converged. Carries the best-so-far result."""

    def __init__(self, message: str, result: "BeamFitResult"):
        super().__init__(message)
        self.result = result


# === Datasets ===============================================================


@dataclass(frozen=True)
class ScanRecord:
    position_um: float
    duration_s: float
    p1: float
    shots: int

    def __post_init__(self):
        if not math.isfinite(self.position_um):
            raise ValueError(f"position must be finite, got {self.position_um!r}")
        if not (math.isfinite(self.duration_s) and self.duration_s >= 0):
            raise ValueError(f"duration must be >= 0, got {self.duration_s!r}")
        if not (math.isfinite(self.p1) and 0.0 <= self.p1 <= 1.0):
            raise ValueError(f"p1 must be in [0, 1], got {self.p1!r}")
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots!r}")


@dataclass(frozen=True)
class ScanDataset:
    records: tuple[ScanRecord, ...]
    beam_label: str = ""
    position_resolution_um: float | None = None

    def __post_init__(self):
        if not self.records:
            raise ValueError("dataset has no records")
        if self.position_resolution_um is not None and self.position_resolution_um < 0:
            raise ValueError("position resolution must be >= 0")

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(positions um, durations s, p1, shots) as float/int arrays."""
        x = np.array([r.position_um for r in self.records])
        t = np.array([r.duration_s for r in self.records])
        p = np.array([r.p1 for r in self.records])
        n = np.array([r.shots for r in self.records])
        return x, t, p, n


def _require_fit_grid(data: ScanDataset) -> None:
    x, t, _, _ = data.arrays()
    if np.unique(t).size == 1:
        raise DegenerateDataError("all durations equal; the fit is rank-deficient")
    if np.unique(x).size < 4:
        raise DegenerateDataError(f"need >= 4 distinct positions, got {np.unique(x).size}")
    if np.unique(t).size < 4:
        raise DegenerateDataError(f"need >= 4 distinct durations, got {np.unique(t).size}")
    if len(data.records) < 12:
        raise DegenerateDataError(f"need >= 12 records, got {len(data.records)}")


# === Scan CSV I/O ===========================================================

_CSV_FIELDS = ("position_um", "duration_us", "p1", "shots")


def read_scan_csv(path: str | Path) -> ScanDataset:
    """Read a scan CSV (header ``position_um,duration_us,p1,shots``).

    Rejects malformed rows, NaN values, and out-of-domain fields with the
    offending line number in the message. The beam label defaults to the
    file stem.
    """
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ScanFormatError("line 1: file is empty, expected header "
                                  + ",".join(_CSV_FIELDS))
        if [h.strip() for h in header] != list(_CSV_FIELDS):
            raise ScanFormatError(
                f"line 1: expected header {','.join(_CSV_FIELDS)}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ScanFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
            try:
                pos = float(row[0])
                dur_us = float(row[1])
                p1 = float(row[2])
                shots = int(row[3])
            except ValueError as exc:
                raise ScanFormatError(f"line {lineno}: {exc}") from exc
            if not math.isfinite(pos):
                raise ScanFormatError(f"line {lineno}: position_um is not finite")
            if not math.isfinite(dur_us) or dur_us < 0:
                raise ScanFormatError(f"line {lineno}: duration_us must be finite and >= 0")
            if not math.isfinite(p1) or not 0.0 <= p1 <= 1.0:
                raise ScanFormatError(f"line {lineno}: p1 must be in [0, 1], got {row[2]}")
            if shots < 1:
                raise ScanFormatError(f"line {lineno}: shots must be >= 1, got {row[3]}")
            records.append(ScanRecord(pos, dur_us * 1e-6, p1, shots))
    if not records:
        raise ScanFormatError("line 2: no data rows")
    return ScanDataset(records=tuple(records), beam_label=path.stem)


def write_scan_csv(data: ScanDataset, path: str | Path) -> None:
    lines = [",".join(_CSV_FIELDS)]
    for r in data.records:
        lines.append(
            f"{r.position_um:.10g},{r.duration_s * 1e6:.10g},{r.p1:.10g},{r.shots}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


# === Model evaluation =======================================================


def fit_model(params: BeamProfileParams, spam: SpamModel, x_um, t_s) -> np.ndarray:
    """SPAM-adjusted model probability at each (x, t)."""
    om, xc, w0 = params.omega0, params.center_um, params.width_um
    kappa = 1.0 - spam.eps_prep - spam.eps_meas
    x = np.asarray(x_um, dtype=float)
    t = np.asarray(t_s, dtype=float)
    u = (x - xc) / w0
    theta = 0.5 * om * t * np.exp(-2.0 * u * u)
    return spam.eps_prep + kappa * np.sin(theta) ** 2


def fit_model_jacobian(params: BeamProfileParams, spam: SpamModel, x_um, t_s) -> np.ndarray:
    """Analytic partials of fit_model w.r.t. (omega0, center, width), shape (n, 3)."""
    om, xc, w0 = params.omega0, params.center_um, params.width_um
    kappa = 1.0 - spam.eps_prep - spam.eps_meas
    x = np.asarray(x_um, dtype=float)
    t = np.asarray(t_s, dtype=float)
    dx = x - xc
    g = np.exp(-2.0 * (dx / w0) ** 2)
    theta = 0.5 * om * t * g
    s2 = kappa * np.sin(2.0 * theta)
    d_om = s2 * 0.5 * t * g
    d_xc = s2 * theta * 4.0 * dx / w0**2
    d_w0 = s2 * theta * 4.0 * dx**2 / w0**3
    return np.stack([d_om, d_xc, d_w0], axis=-1)


def _binomial_weights(p: np.ndarray, shots: np.ndarray) -> np.ndarray:
    return shots / (p * (1.0 - p) + 1.0 / (4.0 * shots))


# === Damped Gauss-Newton core ===============================================


@dataclass
class _LMRun:
    params: np.ndarray
    cov: np.ndarray
    rms: float
    n_iter: int
    converged: bool


def _levenberg_marquardt(fun_jac, p0: np.ndarray, is_valid, max_iterations: int) -> _LMRun:
    """Minimize ||r(p)||^2 with Marquardt damping and Nielsen's mu update."""
    p = np.asarray(p0, dtype=float)
    r, jac = fun_jac(p)
    cost = float(r @ r)
    jtj = jac.T @ jac
    g = jac.T @ r
    mu = 1e-3 * float(np.max(np.diag(jtj)))
    nu = 2.0
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iterations + 1):
        if float(np.max(np.abs(g))) < GRAD_TOL:
            converged = True
            break
        try:
            step = np.linalg.solve(jtj + mu * np.diag(np.diag(jtj)), -g)
        except np.linalg.LinAlgError as exc:
            raise DegenerateDataError(f"normal equations singular: {exc}") from exc
        rel_step = float(np.linalg.norm(step) / (np.linalg.norm(p) + 1e-300))
        if rel_step < STEP_TOL:
            # The damped system cannot move the parameters meaningfully;
            # checking before the trial also catches the stall where every
            # step is rejected at the residual noise floor.
            converged = True
            break
        trial = p + step
        if is_valid(trial):
            r_trial, jac_trial = fun_jac(trial)
            cost_trial = float(r_trial @ r_trial)
            predicted = float(step @ (mu * np.diag(np.diag(jtj)) @ step - g))
            rho = (cost - cost_trial) / predicted if predicted > 0 else -1.0
        else:
            rho = -1.0
        if rho > 0:
            p, r, jac, cost = trial, r_trial, jac_trial, cost_trial
            jtj = jac.T @ jac
            g = jac.T @ r
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e200:
                break
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as exc:
        raise DegenerateDataError(f"normal equations singular at optimum: {exc}") from exc
    cov = 0.5 * (cov + cov.T)
    rms = math.sqrt(cost / r.size)
    return _LMRun(params=p, cov=cov, rms=rms, n_iter=n_iter, converged=converged)


# === Initialization =========================================================


def _group_by_position(x: np.ndarray, *columns: np.ndarray):
    """Yield (position, column slices...) for each distinct position, sorted."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cols = [c[order] for c in columns]
    edges = np.flatnonzero(np.diff(xs)) + 1
    starts = np.concatenate([[0], edges])
    stops = np.concatenate([edges, [xs.size]])
    for lo, hi in zip(starts, stops):
        yield xs[lo], tuple(c[lo:hi] for c in cols)


def _dominant_angular_frequency(t: np.ndarray, p: np.ndarray) -> float:
    """Peak of the discrete-spectrum power of a detrended trace, rad/s."""
    spacing = np.diff(np.unique(t))
    spacing = spacing[spacing > 0]
    if spacing.size == 0:
        raise DegenerateDataError("trace has a single duration; no spectrum")
    omega_max = math.pi / float(spacing.min())
    grid = np.linspace(omega_max / 512, omega_max, 512)
    detrended = p - p.mean()
    power = np.abs(np.exp(-1j * np.outer(grid, t)) @ detrended) ** 2
    return float(grid[int(np.argmax(power))])


def _log_profile_refinement(grouped, xs, amp, mask, x_lo, x_hi):
    """Quadratic fit of ln Omega(x) over the bright region, or None.

    The max-min amplitude profile saturates wherever the scan completes
    a half cycle, so its FWHM overestimates the width; the local
    oscillation frequency keeps the exact Gaussian shape. ln Omega is a
    parabola in x whose coefficients give all three parameters at once.
    """
    idx = np.flatnonzero(mask)
    if idx.size < 4:
        return None
    try:
        omegas = np.array([
            _dominant_angular_frequency(*grouped[i][1]) for i in idx
        ])
    except DegenerateDataError:
        return None
    x_sel = xs[idx]
    sw = np.sqrt(amp[idx])
    design = np.stack([np.ones_like(x_sel), x_sel, x_sel * x_sel], axis=1)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], np.log(omegas) * sw, rcond=None)
    a, b, c = (float(v) for v in coef)
    if not np.isfinite(coef).all() or c >= 0:
        return None
    w0 = math.sqrt(-2.0 / c)
    xc = -b / (2.0 * c)
    omega0 = math.exp(a - b * b / (4.0 * c))
    om_hi = float(omegas.max())
    # reject extrapolations the scanned data cannot support
    if not x_lo - w0 <= xc <= x_hi + w0:
        return None
    if not 0.5 * om_hi <= omega0 <= 2.0 * om_hi:
        return None
    if not 1e-6 <= w0 <= 2.0 * (x_hi - x_lo):
        return None
    return omega0, xc, w0


def _half_crossing(xs: np.ndarray, amp: np.ndarray, i_peak: int, half: float, direction: int) -> float | None:
    i = i_peak
    while 0 <= i + direction < xs.size:
        j = i + direction
        if amp[j] < half:
            # linear interpolation between samples i and j
            frac = (amp[i] - half) / (amp[i] - amp[j])
            return float(xs[i] + frac * (xs[j] - xs[i]))
        i = j
    return None


def initial_guess(data: ScanDataset, spam: SpamModel = SpamModel()) -> BeamProfileParams:
    """Deterministic, derivative-free starting point for fit_beam.

    x_c from the amplitude-weighted centroid of per-position oscillation
    amplitude; w0 from that profile's FWHM via FWHM/sqrt(2 ln 2); Omega0
    from the dominant discrete-spectrum frequency of the trace at the
    centroid position (the excitation probability oscillates at Omega
    itself, and the centroid trace oscillates at essentially Omega0).
    When the bright region supports it, all three are then refined by a
    quadratic fit of ln Omega(x), which does not suffer the saturation
    bias of the amplitude profile.
    """
    x, t, p, _ = data.arrays()
    grouped = list(_group_by_position(x, t, p))
    xs = np.array([pos for pos, _ in grouped])
    amp = np.array([cols[1].max() - cols[1].min() for _, cols in grouped])
    amp = amp - amp.min()  # shot noise puts a pedestal under the profile
    total = float(amp.sum())
    if total <= 0:
        raise DegenerateDataError("no oscillation amplitude at any position")
    xc = float(amp @ xs) / total

    i_peak = int(np.argmax(amp))
    half = float(amp[i_peak]) / 2.0
    left = _half_crossing(xs, amp, i_peak, half, -1)
    right = _half_crossing(xs, amp, i_peak, half, +1)
    if left is None:
        left = float(xs[0])
    if right is None:
        right = float(xs[-1])
    fwhm = max(right - left, float(np.min(np.diff(xs))) if xs.size > 1 else 1e-3)
    w0 = fwhm / math.sqrt(2.0 * math.log(2.0))

    i_center = int(np.argmin(np.abs(xs - xc)))
    t_c, p_c = grouped[i_center][1]
    omega0 = _dominant_angular_frequency(t_c, p_c)

    refined = _log_profile_refinement(
        grouped, xs, amp, amp >= 0.25 * amp[i_peak], float(xs[0]), float(xs[-1])
    )
    if refined is not None:
        omega0, xc, w0 = refined
    return BeamProfileParams(omega0=omega0, center_um=xc, width_um=w0)


#: Deterministic multi-start perturbation signs for (omega0, center, width).
_RESTART_SIGNS = ((1, 1, 1), (-1, -1, -1), (1, -1, 1), (-1, 1, -1), (1, 1, -1))


def _perturbed_starts(guess: BeamProfileParams):
    for s_om, s_xc, s_w in _RESTART_SIGNS:
        yield BeamProfileParams(
            omega0=guess.omega0 * (1.0 + 0.2 * s_om),
            center_um=guess.center_um + 0.2 * s_xc * guess.width_um,
            width_um=guess.width_um * (1.0 + 0.2 * s_w),
        )


# === Global fit =============================================================


@dataclass(frozen=True)
class FreqProfilePoint:
    position_um: float
    omega: float  # rad/s
    omega_err: float  # rad/s; inf when unconstrained
    baseline: bool  # uncertainty >= value: indistinguishable from no drive


@dataclass(frozen=True)
class BeamFitResult:
    params: BeamProfileParams
    covariance: np.ndarray  # 3x3, order (omega0 rad/s, center um, width um)
    residual_rms: float  # weighted, per record; ~1 at the shot-noise floor
    freq_profile: tuple[FreqProfilePoint, ...]
    d4sigma_um: float | None  # baseline-subtracted second-moment width
    d4sigma_raw_um: float | None  # same without baseline subtraction
    n_iterations: int
    converged: bool
    beam_label: str = ""
    multi_start_used: bool = False

    @property
    def gaussian_diameter_um(self) -> float:
        """The fitted envelope width parameter w0 (a 2w0 spot has D4sigma = 2w0)."""
        return self.params.width_um

    def param_errors(self) -> np.ndarray:
        """1-sigma uncertainties (omega0 rad/s, center um, width um)."""
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def fit_beam(
    data: ScanDataset,
    spam: SpamModel = SpamModel(),
    max_iterations: int = 200,
) -> BeamFitResult:
    """Fit the three-parameter beam model to a scan dataset.

    Runs the damped Gauss-Newton loop from a deterministic initial guess;
    if the weighted residual RMS stays above twice the shot-noise floor, or
    the first run fails to converge, five deterministically perturbed
    restarts are tried and the best converged run kept.

    Raises FitConvergenceError (carrying the best-so-far result) when no
    run converges, DegenerateDataError when the grid cannot constrain
    the three parameters.
    """
    _require_fit_grid(data)
    x, t, p, shots = data.arrays()
    sqrt_w = np.sqrt(_binomial_weights(p, shots))

    def fun_jac(vec: np.ndarray):
        params = BeamProfileParams(*vec)
        r = sqrt_w * (fit_model(params, spam, x, t) - p)
        jac = sqrt_w[:, None] * fit_model_jacobian(params, spam, x, t)
        return r, jac

    def is_valid(vec: np.ndarray) -> bool:
        return vec[0] > 0 and vec[2] > 0 and np.all(np.isfinite(vec))

    guess = initial_guess(data, spam)
    first = _levenberg_marquardt(
        fun_jac, np.array([guess.omega0, guess.center_um, guess.width_um]),
        is_valid, max_iterations,
    )
    runs = [first]
    multi_start = not (first.converged and first.rms <= RESTART_RMS)
    if multi_start:
        for start in _perturbed_starts(guess):
            runs.append(
                _levenberg_marquardt(
                    fun_jac,
                    np.array([start.omega0, start.center_um, start.width_um]),
                    is_valid, max_iterations,
                )
            )
    converged_runs = [run for run in runs if run.converged]
    pool = converged_runs or runs
    best = min(pool, key=lambda run: run.rms)

    profile = fit_freq_profile(data, spam)
    result = BeamFitResult(
        params=BeamProfileParams(*best.params),
        covariance=best.cov,
        residual_rms=best.rms,
        freq_profile=profile,
        d4sigma_um=_d4sigma_or_none(profile, subtract_baseline=True),
        d4sigma_raw_um=_d4sigma_or_none(profile, subtract_baseline=False),
        n_iterations=best.n_iter,
        converged=bool(converged_runs),
        beam_label=data.beam_label,
        multi_start_used=multi_start,
    )
    if not converged_runs:
        raise FitConvergenceError(
            f"no optimizer run converged within {max_iterations} iterations "
            f"(best residual RMS {best.rms:.3g})",
            result,
        )
    return result


# === Per-position frequency profile =========================================


def _fit_single_omega(t: np.ndarray, p: np.ndarray, shots: np.ndarray, spam: SpamModel) -> tuple[float, float]:
    """1D weighted least-squares fit of eps0 + kappa*sin^2(omega*t/2).

    Returns (omega, sigma_omega); sigma is inf when the trace carries no
    frequency information (flat trace, omega pinned at zero).
    """
    kappa = 1.0 - spam.eps_prep - spam.eps_meas
    w = _binomial_weights(p, shots)
    spacing = np.diff(np.unique(t))
    spacing = spacing[spacing > 0]
    if spacing.size == 0:
        raise DegenerateDataError("all durations equal at this position")
    omega_max = math.pi / float(spacing.min())
    grid = np.linspace(0.0, omega_max, 512)

    model = spam.eps_prep + kappa * np.sin(0.5 * np.outer(grid, t)) ** 2
    sse = ((model - p) ** 2 * w).sum(axis=1)
    omega = float(grid[int(np.argmin(sse))])

    # Gauss-Newton refinement with step halving
    for _ in range(60):
        theta = 0.5 * omega * t
        r = spam.eps_prep + kappa * np.sin(theta) ** 2 - p
        jac = kappa * np.sin(2.0 * theta) * 0.5 * t
        jtj = float(w @ (jac * jac))
        if jtj <= 0:
            break
        step = -float(w @ (jac * r)) / jtj
        cost = float(w @ (r * r))
        scale = 1.0
        improved = False
        for _ in range(20):
            trial = omega + scale * step
            if trial >= 0:
                r_t = spam.eps_prep + kappa * np.sin(0.5 * trial * t) ** 2 - p
                cost_t = float(w @ (r_t * r_t))
                if cost_t < cost:
                    omega = trial
                    improved = True
                    break
            scale *= 0.5
        if not improved or abs(scale * step) < 1e-12 * max(omega, 1.0):
            break

    theta = 0.5 * omega * t
    jac = kappa * np.sin(2.0 * theta) * 0.5 * t
    jtj = float(w @ (jac * jac))
    sigma = math.inf if jtj <= 0 else 1.0 / math.sqrt(jtj)
    return omega, sigma


def fit_freq_profile(
    data: ScanDataset, spam: SpamModel = SpamModel()
) -> tuple[FreqProfilePoint, ...]:
    """Per-position Rabi frequencies from independent 1D fits.

    Positions with fewer than 4 distinct durations are skipped with a
    warning. A point whose uncertainty reaches its value is flagged as
    baseline (no resolvable oscillation).
    """
    x, t, p, shots = data.arrays()
    points = []
    for pos, (tt, pp, nn) in _group_by_position(x, t, p, shots):
        if np.unique(tt).size < 4:
            warnings.warn(
                f"position {pos:g} um has only {np.unique(tt).size} distinct "
                "durations; skipped in frequency profile",
                stacklevel=2,
            )
            continue
        omega, sigma = _fit_single_omega(tt, pp, nn.astype(float), spam)
        points.append(
            FreqProfilePoint(
                position_um=float(pos),
                omega=omega,
                omega_err=sigma,
                baseline=sigma >= omega,
            )
        )
    return tuple(points)


# === Second-moment width ====================================================


def d4sigma(profile: Sequence[FreqProfilePoint], subtract_baseline: bool = True) -> float:
    """4-sigma second-moment width of a frequency profile, in um.

    Weights are the fitted Rabi frequencies (Omega is proportional to
    intensity). With subtract_baseline, the median Omega of baseline-flagged
    points is subtracted first and negative weights clamped to zero; second
    moments diverge under a constant background.
    """
    points = list(profile)
    live = [pt for pt in points if not pt.baseline]
    if len(live) < 3:
        raise ValueError(f"need >= 3 non-baseline profile points, got {len(live)}")
    xs = np.array([pt.position_um for pt in points])
    w = np.array([pt.omega for pt in points], dtype=float)
    if subtract_baseline:
        floor_vals = [pt.omega for pt in points if pt.baseline]
        if floor_vals:
            w = np.clip(w - float(np.median(floor_vals)), 0.0, None)
    total = float(w.sum())
    if total <= 0:
        raise ValueError("all profile weights are zero")
    mean = float(w @ xs) / total
    var = float(w @ (xs - mean) ** 2) / total
    return 4.0 * math.sqrt(var)


def _d4sigma_or_none(profile: Sequence[FreqProfilePoint], subtract_baseline: bool) -> float | None:
    try:
        return d4sigma(profile, subtract_baseline=subtract_baseline)
    except ValueError:
        return None


# === Pair analysis ==========================================================


@dataclass(frozen=True)
class PairReport:
    beam_a: str
    beam_b: str
    center_a_um: float
    center_b_um: float
    separation_um: float
    separation_err_um: float
    ambiguous: bool  # centers overlap within k_sigma * separation_err
    observation_window_s: float
    detection_floor: float
    rabi_bound: float  # rad/s hiding below the floor over the window
    crosstalk_bound_a: float  # intensity ratio bound, beam A's peak
    crosstalk_bound_b: float
    off_beam_oscillation_a: bool | None  # None: no trace supplied
    off_beam_oscillation_b: bool | None
    notes: tuple[str, ...]


def _trace_oscillates(trace: ScanDataset, spam: SpamModel) -> bool:
    _, t, p, shots = trace.arrays()
    if np.unique(t).size < 4:
        raise DegenerateDataError(
            f"off-beam trace {trace.beam_label!r} needs >= 4 distinct durations"
        )
    omega, sigma = _fit_single_omega(t, p, shots.astype(float), spam)
    return sigma < omega


def pair_analysis(
    a: BeamFitResult,
    b: BeamFitResult,
    traces_at_centers: tuple[ScanDataset | None, ScanDataset | None] = (None, None),
    observation_window_s: float = 2.5e-3,
    detection_floor: float = 0.01,
    spam: SpamModel = SpamModel(),
    k_sigma: float = 3.0,
) -> PairReport:
    """Separation and crosstalk bounds for a pair of individually fitted beams.

    ``traces_at_centers`` holds, per beam, the response measured at the
    *neighbor's* center while that beam was driven (beam A's off-beam trace
    is recorded at beam B's center and vice versa). Each supplied trace is
    tested for resolvable oscillation; absent oscillation the crosstalk at
    the neighbor is bounded by the largest Rabi frequency that stays under
    ``detection_floor`` for the whole observation window, expressed as an
    intensity ratio against the driven beam's peak.
    """
    if not (a.converged and b.converged):
        raise ValueError("pair analysis requires two converged fits")
    sep = abs(b.params.center_um - a.params.center_um)
    var = float(a.covariance[1, 1] + b.covariance[1, 1])
    sep_err = math.sqrt(max(var, 0.0))
    notes = []
    ambiguous = sep <= k_sigma * sep_err
    if ambiguous:
        notes.append(
            f"beam centers are not resolved: separation {sep:.4g} um is within "
            f"{k_sigma:g} sigma ({k_sigma * sep_err:.4g} um)"
        )
        warnings.warn(notes[-1], stacklevel=2)

    bound = crosstalk_rabi_bound(observation_window_s, detection_floor)
    detected: list[bool | None] = []
    for result, trace in zip((a, b), traces_at_centers):
        if trace is None:
            detected.append(None)
            continue
        seen = _trace_oscillates(trace, spam)
        detected.append(seen)
        if seen:
            notes.append(
                f"off-beam trace {trace.beam_label or result.beam_label!r} shows "
                "resolvable oscillation; the crosstalk bound does not apply"
            )
    return PairReport(
        beam_a=a.beam_label or "A",
        beam_b=b.beam_label or "B",
        center_a_um=a.params.center_um,
        center_b_um=b.params.center_um,
        separation_um=sep,
        separation_err_um=sep_err,
        ambiguous=ambiguous,
        observation_window_s=observation_window_s,
        detection_floor=detection_floor,
        rabi_bound=bound,
        crosstalk_bound_a=intensity_crosstalk_ratio(bound, a.params.omega0),
        crosstalk_bound_b=intensity_crosstalk_ratio(bound, b.params.omega0),
        off_beam_oscillation_a=detected[0],
        off_beam_oscillation_b=detected[1],
        notes=tuple(notes),
    )


# === Reports ================================================================


def fit_report_dict(result: BeamFitResult) -> dict:
    """JSON-ready fit report; frequencies in Hz, lengths in um."""
    scale = np.diag([1.0 / TWO_PI, 1.0, 1.0])
    cov_hz = scale @ result.covariance @ scale
    return {
        "beam_label": result.beam_label,
        "converged": result.converged,
        "n_iterations": result.n_iterations,
        "multi_start_used": result.multi_start_used,
        "params": {
            "peak_rabi_hz": result.params.omega0 / TWO_PI,
            "center_um": result.params.center_um,
            "width_um": result.params.width_um,
        },
        "covariance_order": ["peak_rabi_hz", "center_um", "width_um"],
        "covariance": cov_hz.tolist(),
        "residual_rms": result.residual_rms,
        "gaussian_diameter_um": result.gaussian_diameter_um,
        "d4sigma_um": result.d4sigma_um,
        "d4sigma_raw_um": result.d4sigma_raw_um,
        "n_profile_points": len(result.freq_profile),
        "n_baseline_points": sum(pt.baseline for pt in result.freq_profile),
    }


def write_fit_report(result: BeamFitResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps(fit_report_dict(result), indent=2) + "\n")


def read_fit_report(path: str | Path) -> tuple[BeamProfileParams, np.ndarray, dict]:
    """Reconstruct (params, covariance in rad/s & um, raw dict) from a report."""
    raw = json.loads(Path(path).read_text())
    try:
        params = BeamProfileParams(
            omega0=raw["params"]["peak_rabi_hz"] * TWO_PI,
            center_um=raw["params"]["center_um"],
            width_um=raw["params"]["width_um"],
        )
        cov_hz = np.array(raw["covariance"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ScanFormatError(f"{path}: not a fit report ({exc!r})") from exc
    if cov_hz.shape != (3, 3):
        raise ScanFormatError(f"{path}: covariance must be 3x3, got {cov_hz.shape}")
    scale = np.diag([TWO_PI, 1.0, 1.0])
    return params, scale @ cov_hz @ scale, raw


def write_freq_profile_csv(profile: Sequence[FreqProfilePoint], path: str | Path) -> None:
    lines = ["position_um,rabi_hz,rabi_err_hz,baseline"]
    for pt in profile:
        lines.append(
            f"{pt.position_um:.10g},{pt.omega / TWO_PI:.10g},"
            f"{pt.omega_err / TWO_PI:.10g},{int(pt.baseline)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def pair_report_dict(report: PairReport) -> dict:
    return {
        "beam_a": report.beam_a,
        "beam_b": report.beam_b,
        "center_a_um": report.center_a_um,
        "center_b_um": report.center_b_um,
        "separation_um": report.separation_um,
        "separation_err_um": report.separation_err_um,
        "ambiguous": report.ambiguous,
        "observation_window_s": report.observation_window_s,
        "detection_floor": report.detection_floor,
        "rabi_bound_hz": report.rabi_bound / TWO_PI,
        "crosstalk_bound_a": report.crosstalk_bound_a,
        "crosstalk_bound_b": report.crosstalk_bound_b,
        "off_beam_oscillation_a": report.off_beam_oscillation_a,
        "off_beam_oscillation_b": report.off_beam_oscillation_b,
        "notes": list(report.notes),
    }
