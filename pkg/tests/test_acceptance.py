"""Acceptance gate: the headline numbers, tolerances, and runtime budgets.

Each test checks one release criterion end to end and prints a single
PASS/FAIL line (visible under ``pytest -s``) so the whole gate can be
read at a glance.
"""

import dataclasses
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ionoptics.design_tradeoff import crosstalk, min_diameter_for_na
from ionoptics.rabi_model import BeamProfileParams, SpamModel, crosstalk_rabi_bound
from ionoptics.scan_fit import (
    FreqProfilePoint,
    d4sigma,
    fit_beam,
    fit_model,
    fit_model_jacobian,
    fit_report_dict,
)
from ionoptics.synth_scan import SynthConfig, default_scan_grid, generate
from ionoptics.system_model import (
    BeamArraySpec,
    compare_measured_pitch,
    image_array,
    reference_prescription,
)

TWO_PI = 2.0 * math.pi
TESTS_DIR = Path(__file__).parent


def check(num: int, label: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {num} {label}: {detail}")
    assert ok, f"{num} {label}: {detail}"


def test_1_design_boundary():
    t0 = time.perf_counter()
    boundary = min_diameter_for_na(0.24, 0.355)
    ct = crosstalk(boundary, 5.0)
    elapsed = time.perf_counter() - t0

    diameter_ok = abs(boundary / 1.88 - 1.0) <= 0.005
    crosstalk_ok = 1e-25 / 3.0 <= ct <= 1e-25 * 3.0
    ok = diameter_ok and crosstalk_ok and elapsed < 1.0
    check(1, "design boundary", ok,
          f"min diameter {boundary:.4f} um (target 1.88 +-0.5%), "
          f"crosstalk {ct:.3g} (target 1e-25 x3), {elapsed:.3f} s")


def test_2_reference_train_mapping():
    t0 = time.perf_counter()
    report = image_array(
        reference_prescription(),
        BeamArraySpec(source_diameter_um=200.0, source_pitch_um=450.0, channel_count=10),
        wavelength_um=0.355,
    )
    elapsed = time.perf_counter() - t0

    axial_ok = abs(report.axial.diameter_um / 1.90 - 1.0) <= 0.01
    pitch_ok = abs(report.pitch_um / 4.28 - 1.0) <= 0.01
    radial_ok = abs(report.radial.diameter_um / 9.52 - 1.0) <= 0.01
    note_ok = any("differ" in note for note in report.notes)
    ok = axial_ok and pitch_ok and radial_ok and note_ok and elapsed < 1.0
    check(2, "image mapping", ok,
          f"axial {report.axial.diameter_um:.4f} um (1.90 +-1%), "
          f"pitch {report.pitch_um:.4f} um (4.28 +-1%), "
          f"radial {report.radial.diameter_um:.4f} um (9.52, plane note "
          f"{'present' if note_ok else 'MISSING'}), {elapsed:.3f} s")


def test_3_crosstalk_bound():
    t0 = time.perf_counter()
    bound = crosstalk_rabi_bound(observation_window_s=2.5e-3, detection_floor=0.01)
    elapsed = time.perf_counter() - t0

    bound_hz = bound / TWO_PI
    ratio = bound / (TWO_PI * 2120.0)
    bound_ok = abs(bound_hz / 12.8 - 1.0) <= 0.01
    ratio_ok = abs(ratio - 0.0060) <= 0.0005
    ok = bound_ok and ratio_ok and elapsed < 1.0
    check(3, "crosstalk bound", ok,
          f"2pi x {bound_hz:.4f} Hz (12.8 +-1%), "
          f"ratio {100 * ratio:.4f}% vs 2pi x 2.12 kHz (0.60 +-0.05 pp), "
          f"{elapsed:.3f} s")


def test_4_end_to_end_recovery():
    beam_a = BeamProfileParams(omega0=TWO_PI * 1910.0, center_um=0.0, width_um=1.86)
    beam_b = BeamProfileParams(omega0=TWO_PI * 2790.0, center_um=4.31, width_um=1.88)
    positions, durations = default_scan_grid((beam_a, beam_b), 61, 21)

    t0 = time.perf_counter()
    good = 0
    for seed in range(20):
        cfg = SynthConfig(
            truth=(beam_a, beam_b), positions_um=positions, durations_s=durations,
            shots=200, rng_seed=seed,
        )
        ds_a, ds_b = generate(cfg)
        fit_a = fit_beam(ds_a)
        fit_b = fit_beam(ds_b)
        run_ok = True
        for truth, fit in ((beam_a, fit_a), (beam_b, fit_b)):
            run_ok &= abs(fit.params.omega0 / truth.omega0 - 1.0) <= 0.02
            run_ok &= abs(fit.params.width_um / truth.width_um - 1.0) <= 0.02
            # center truth of 0 um has no relative scale; 2% of the beam
            # width (0.05 um directly on the separation) covers both
            run_ok &= abs(fit.params.center_um - truth.center_um) <= 0.05
        separation = abs(fit_b.params.center_um - fit_a.params.center_um)
        run_ok &= abs(separation - 4.31) <= 0.05
        good += bool(run_ok)
    elapsed = time.perf_counter() - t0

    ok = good >= 18 and elapsed < 60.0
    check(4, "synth->fit recovery", ok,
          f"{good}/20 seeds recovered all parameters within tolerance "
          f"(need >= 18), {elapsed:.1f} s (< 60 s)")


def test_5_d4sigma_analytic():
    w0 = 1.86
    omega0 = TWO_PI * 1910.0
    xs = np.arange(-4.0 * w0, 4.0 * w0 + 1e-12, w0 / 40.0)
    profile = [
        FreqProfilePoint(float(x), omega0 * math.exp(-2.0 * x * x / (w0 * w0)),
                         1.0, False)
        for x in xs
    ]
    width = d4sigma(profile)
    width_ok = abs(width / (2.0 * w0) - 1.0) <= 0.005

    # both conventions must land side by side in the fit report
    beam = BeamProfileParams(omega0=omega0, center_um=0.0, width_um=w0)
    positions, durations = default_scan_grid(beam, 61, 21)
    ds = generate(SynthConfig(truth=beam, positions_um=positions,
                              durations_s=durations, analytic=True))[0]
    report = fit_report_dict(fit_beam(ds))
    dual_ok = (report["gaussian_diameter_um"] is not None
               and report["d4sigma_um"] is not None)
    ok = width_ok and dual_ok
    check(5, "second-moment width", ok,
          f"dense-profile D4sigma {width:.4f} um vs 2 w0 {2 * w0:.4f} um "
          f"(+-0.5%), report carries gaussian_diameter_um="
          f"{report['gaussian_diameter_um']:.3f} and d4sigma_um="
          f"{report['d4sigma_um']:.3f}")


def test_6_invariant_suites():
    suites = {
        "test_beamlab.py": None,
        "test_design_tradeoff.py": None,
        "test_scan_fit.py": None,
        "test_synth_scan.py": None,
    }
    for name in suites:
        t0 = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, "-m", "pytest", str(TESTS_DIR / name), "-q", "-p", "no:cacheprovider"],
            capture_output=True, text=True,
        )
        suites[name] = (proc.returncode, time.perf_counter() - t0)
    ok = all(rc == 0 and dt < 30.0 for rc, dt in suites.values())
    detail = ", ".join(
        f"{name} {'ok' if rc == 0 else f'rc={rc}'} {dt:.1f}s"
        for name, (rc, dt) in suites.items()
    )
    check(6, "invariant suites", ok, detail)


def test_7_jacobian_finite_differences():
    rng = np.random.default_rng(20260818)
    spam = SpamModel()
    analytic_rows, fd_rows = [], []
    for _ in range(100):
        params = BeamProfileParams(
            omega0=float(rng.uniform(0.3, 3.0)) * TWO_PI * 2000.0,
            center_um=float(rng.uniform(-3.0, 3.0)),
            width_um=float(rng.uniform(0.8, 4.0)),
        )
        x = float(rng.uniform(-6.0, 6.0))
        t = float(rng.uniform(0.0, 2e-3))
        analytic_rows.append(fit_model_jacobian(params, spam, x, t))
        row = []
        for attr, scale in (("omega0", params.omega0), ("center_um", 1.0),
                            ("width_um", 1.0)):
            h = 2e-6 * scale
            hi = dict(omega0=params.omega0, center_um=params.center_um,
                      width_um=params.width_um)
            lo = dict(hi)
            hi[attr] += h
            lo[attr] -= h
            row.append((fit_model(BeamProfileParams(**hi), spam, x, t)
                        - fit_model(BeamProfileParams(**lo), spam, x, t)) / (2 * h))
        fd_rows.append(row)
    analytic = np.asarray(analytic_rows)
    fd = np.asarray(fd_rows)
    col_scale = np.abs(analytic).max(axis=0)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-3 * col_scale)
    worst = float(np.max(np.abs(analytic - fd) / denom))
    ok = worst < 1e-6
    check(7, "analytic Jacobian", ok,
          f"worst relative deviation from central differences {worst:.2e} "
          f"over 100 random samples (< 1e-6)")


def test_8_pitch_discrepancy():
    base = image_array(
        reference_prescription(),
        BeamArraySpec(source_diameter_um=200.0, source_pitch_um=450.0, channel_count=10),
    )
    report = dataclasses.replace(base, pitch_um=44.5)
    disc = compare_measured_pitch(report, 48.3, 0.12)
    relative_ok = abs(disc.relative - 0.085) <= 0.001
    flagged_ok = disc.within is False
    ok = relative_ok and flagged_ok
    check(8, "pitch discrepancy", ok,
          f"measured 48.3 vs predicted 44.5 -> {100 * disc.relative:+.2f}% "
          f"(+8.5 +-0.1 pp), disagreement flagged={not disc.within}")
