"""End-to-end acceptance criteria.

Each test records one PASS/FAIL line (with the measured values) that is
repeated in the "acceptance criteria" section at the end of the run.
"""

import math
import time

import numpy as np
import pytest

from conftest import SYNTH_SECONDS
from racatr import metrics
from racatr.cli import main
from racatr.config import bundled_config
from racatr.element import linear_model, quantize_aperture, rephase_at, wrap_deg
from racatr.layout import (EXPERIMENT_LAYOUT, TABLE2_LAYOUT, check_layout, mirror_angle,
                           wideband_relocate)
from racatr.metrics import amplitude_ripple, build_report, phase_ripple_and_slope
from racatr.scenario import wideband_rows
from racatr.tolerance import (FEED_OFFSETS, ToleranceScenario, manufacture_table,
                              run_feed_offset_sweep)
from racatr.wavefield import (FieldGrid, from_spectrum, gaussian_beam_radius, plane_wave, propagate,
                              to_spectrum)

LAM = TABLE2_LAYOUT.wavelength


def check(ok, detail):
    return bool(ok), detail


def test_1_layout_analytics(acceptance):
    alpha = mirror_angle(TABLE2_LAYOUT)
    feasible = check_layout(TABLE2_LAYOUT).feasible
    f2 = wideband_relocate(EXPERIMENT_LAYOUT, 26.5e9).focal_length
    f3 = wideband_relocate(EXPERIMENT_LAYOUT, 29.5e9).focal_length
    assert acceptance("1 layout analytics", {
        "mirror angle 12.1 +/- 0.1 deg": check(abs(alpha - 12.1) <= 0.1, f"{alpha:.4f} deg"),
        "Table II layout feasible": check(feasible, str(feasible)),
        "F2 = 1.142 +/- 0.001 m": check(abs(f2 - 1.142) <= 1e-3, f"{f2:.5f} m"),
        "F3 = 1.271 +/- 0.001 m": check(abs(f3 - 1.271) <= 1e-3, f"{f3:.5f} m"),
    })


def test_2_propagation_engine(acceptance):
    t0 = time.perf_counter()
    n, dx = 512, LAM / 4
    w0 = 5 * LAM
    zr = math.pi * w0**2 / LAM
    x = (np.arange(n) - n / 2) * dx
    beam = FieldGrid(np.exp(-(x[None, :] ** 2 + x[:, None] ** 2) / w0**2), dx, dx, LAM, 0.0, (x[0], x[0]))
    w_num = gaussian_beam_radius(propagate(beam, 2 * zr))
    w_ref = w0 * math.sqrt(1 + 4)
    radius_err = abs(w_num - w_ref) / w_ref

    m, dz = 37, 0.7
    pw = plane_wave(n, n, dx, dx, LAM, kx_index=m)
    kz = math.sqrt((2 * math.pi / LAM) ** 2 - (2 * math.pi * m / (n * dx)) ** 2)
    eig = np.max(np.abs(np.angle(propagate(pw, dz).samples * np.conj(pw.samples) * np.exp(1j * kz * dz))))

    rng = np.random.default_rng(0)
    f = FieldGrid(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)), LAM / 3, LAM / 3, LAM)
    proj = propagate(f, 1e-300)  # propagating part only
    fwd = propagate(f, 0.5)
    energy = abs(fwd.power() - proj.power()) / proj.power()
    recip = np.linalg.norm(propagate(fwd, -0.5).samples - proj.samples) / np.linalg.norm(proj.samples)
    rt = np.linalg.norm(from_spectrum(to_spectrum(f)).samples - f.samples) / np.linalg.norm(f.samples)
    elapsed = time.perf_counter() - t0
    assert acceptance("2 propagation engine", {
        "Gaussian radius within 1%": check(radius_err <= 0.01, f"relative error {radius_err:.2e}"),
        "plane-wave eigenphase within 1e-9 rad": check(eig <= 1e-9, f"{eig:.2e} rad"),
        "energy conservation within 1e-10": check(energy <= 1e-10, f"{energy:.2e}"),
        "forward/backward reciprocity within 1e-10": check(recip <= 1e-10, f"{recip:.2e}"),
        "transform round trip within 1e-12": check(rt <= 1e-12, f"{rt:.2e}"),
        "runtime seconds on 512x512": check(elapsed < 60, f"{elapsed:.1f} s"),
    })


def test_3_synthesis(acceptance, table2_result):
    r0, r = table2_result.initial_report, table2_result.final_report
    seconds = SYNTH_SECONDS.get(TABLE2_LAYOUT, float("nan"))
    assert acceptance("3 synthesis (Table II, 28 GHz)", {
        "at most 1000 iterations": check(table2_result.iterations <= 1000, str(table2_result.iterations)),
        "amp ripple <= 1 dB": check(r.amp_ripple_db <= 1.0, f"{r.amp_ripple_db:.4f} dB"),
        "phase ripple <= 10 deg": check(r.phase_ripple_deg <= 10.0, f"{r.phase_ripple_deg:.4f} deg"),
        "theta within 1.5 deg of 35": check(abs(r.theta_est_deg - 35) <= 1.5, f"{r.theta_est_deg:.4f} deg"),
        "amp better than initial": check(r.amp_ripple_db < r0.amp_ripple_db,
                                         f"{r0.amp_ripple_db:.4f} -> {r.amp_ripple_db:.4f} dB"),
        "phase better than initial": check(r.phase_ripple_deg < r0.phase_ripple_deg,
                                           f"{r0.phase_ripple_deg:.4f} -> {r.phase_ripple_deg:.4f} deg"),
        "runtime <= 5 min": check(not seconds > 300, f"{seconds:.1f} s"),
    })


def test_4_wideband_orderings(acceptance, experiment_design):
    t0 = time.perf_counter()
    rows = wideband_rows(experiment_design, [26.5e9, 28e9, 29.5e9])
    elapsed = time.perf_counter() - t0
    by = {(r.frequency_hz, r.relocated): r.report for r in rows}
    lo_rel, lo_fix = by[26.5e9, True], by[26.5e9, False]
    mid = by[28e9, False]
    hi_rel, hi_fix = by[29.5e9, True], by[29.5e9, False]

    def pair(a, b):
        return f"{a.amp_ripple_db:.3f} dB / {a.phase_ripple_deg:.2f} deg vs {b.amp_ripple_db:.3f} dB / " \
               f"{b.phase_ripple_deg:.2f} deg"

    def beats(a, b):
        return a.amp_ripple_db < b.amp_ripple_db and a.phase_ripple_deg < b.phase_ripple_deg

    assert acceptance("4 wideband orderings (F = 1.207 m design)", {
        "five rows": check(len(rows) == 5, str(len(rows))),
        "26.5 GHz relocated beats fixed": check(beats(lo_rel, lo_fix), pair(lo_rel, lo_fix)),
        "28 GHz beats 29.5 GHz fixed": check(beats(mid, hi_fix), pair(mid, hi_fix)),
        "28 GHz beats 29.5 GHz relocated": check(beats(mid, hi_rel), pair(mid, hi_rel)),
        "29.5 GHz relocated improves phase": check(hi_rel.phase_ripple_deg < hi_fix.phase_ripple_deg,
                                                   f"{hi_fix.phase_ripple_deg:.2f} -> {hi_rel.phase_ripple_deg:.2f} deg"),
        "runtime <= 10 min": check(elapsed <= 600, f"{elapsed:.1f} s"),
    })


def test_5_element_model(acceptance):
    model = linear_model()
    spans = [abs(ph[-1] - ph[0]) for ph in model.phase]
    monotone = all(np.all(np.diff(ph) < 0) or np.all(np.diff(ph) > 0) for ph in model.phase)
    sens = model.max_sensitivity()

    rng = np.random.default_rng(5)
    pa, pb = rng.uniform(-math.pi, math.pi, (2, 92, 92))
    f0 = TABLE2_LAYOUT.design_frequency
    el = quantize_aperture(model, pa, pb, f0)
    ident = np.max(np.abs(wrap_deg(np.degrees(rephase_at(model, el, pb, f0) - pa))))

    step = max(float(np.max(np.diff(lr))) for lr in model.lr)
    lr = np.linspace(1.0, 5.0, 2001)
    back = model.length_for_phase(model.phase_of(lr, f0), f0)
    # the inverse returns the smallest ring of the same wrapped phase
    lr_f0, ph_f0 = model.curve(f0)
    period = 360 / abs(float(np.mean(np.diff(ph_f0) / np.diff(lr_f0))))
    resid = lr - back
    resid = resid - period * np.round(resid / period)
    inv = float(np.max(np.abs(resid)))
    assert acceptance("5 element model", {
        "span >= 360 deg": check(min(spans) >= 360, f"min {min(spans):.1f} deg"),
        "sensitivity <= 150 deg/mm": check(sens <= 150, f"{sens:.2f} deg/mm"),
        "monotone curves": check(monotone, str(monotone)),
        "quantize -> rephase within 0.5 deg": check(ident <= 0.5, f"{ident:.2e} deg"),
        "inversion within one table step": check(inv <= step, f"{inv:.2e} mm (step {step:.3g} mm)"),
    })


def test_6_tolerance(acceptance, table2_design):
    t0 = time.perf_counter()
    table = manufacture_table(table2_design, trials=10, seed=0)
    means = [r.amp_mean for r in table]
    trans = run_feed_offset_sweep(ToleranceScenario("feed_transverse", LAM, 1, base=table2_design))
    down = run_feed_offset_sweep(ToleranceScenario("feed_down", LAM, 1, base=table2_design))
    elapsed = time.perf_counter() - t0

    actual = trans.thetas
    gaps = actual - np.array(trans.predicted_theta)
    baseline = down.thetas[list(FEED_OFFSETS).index(0)]
    drift = np.abs(down.thetas - baseline)
    fmt = lambda v: ", ".join(f"{x:+.3f}" if x < 0 or x > 0 else "0" for x in v)
    assert acceptance("6 tolerance", {
        "manufacture mean amp ripple non-decreasing": check(
            all(b >= a for a, b in zip(means, means[1:])), "lambda/200..lambda/20: " +
            ", ".join(f"{m:.3f}" for m in means) + " dB"),
        "transverse theta decreasing in offset": check(np.all(np.diff(actual) < 0),
                                                       "actual " + ", ".join(f"{t:.3f}" for t in actual) + " deg"),
        "transverse theta within 0.35 deg of prediction": check(np.all(np.abs(gaps) <= 0.35),
                                                                f"gaps {fmt(gaps)} deg at {FEED_OFFSETS} lambda"),
        "down theta within 0.3 deg of baseline": check(np.all(drift <= 0.3), f"max drift {drift.max():.3f} deg"),
        "runtime <= 5 min": check(elapsed <= 300, f"{elapsed:.1f} s"),
    })


def test_7_metrics_suite(acceptance):
    k = 2 * math.pi / LAM
    dx = LAM / 3
    w = FieldGrid(np.ones((65, 65)), dx, dx, LAM, 1.3, (-0.9, -0.1))
    X, _ = w.coordinates()
    ramp = w.with_samples(np.exp(1j * k * math.sin(math.radians(35)) * X))
    ripple, theta = phase_ripple_and_slope(ramp)
    const = w.with_samples(np.full((65, 65), 3 + 4j))
    two = np.ones((4, 4))
    two[0, 0] = 10 ** 0.1
    scaled = ramp.with_samples(ramp.samples * 7.5 * np.exp(0.9j))
    r_scaled, t_scaled = phase_ripple_and_slope(scaled)
    report = build_report(ramp, 28e9)
    assert acceptance("7 metrics unit suite", {
        "ramp phase ripple 0": check(ripple <= 1e-9, f"{ripple:.1e} deg"),
        "ramp angle exact": check(abs(theta - 35) <= 1e-6, f"{theta:.9f} deg"),
        "constant amplitude ripple 0": check(amplitude_ripple(const) == 0.0, f"{amplitude_ripple(const)}"),
        "two-level amplitude +/-1 dB": check(abs(amplitude_ripple(FieldGrid(two, dx, dx, LAM)) - 1) <= 1e-12,
                                            f"{amplitude_ripple(FieldGrid(two, dx, dx, LAM)):.12f} dB"),
        "complex scaling invariance": check(abs(r_scaled - ripple) <= 1e-9 and abs(t_scaled - theta) <= 1e-9,
                                            f"{r_scaled:.1e} deg, {t_scaled:.9f} deg"),
        "plane wave meets spec": check(report.meets_spec, str(report.meets_spec)),
    })


def _outputs(directory):
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_8_determinism(acceptance, tmp_path):
    text = bundled_config("table2.cfg").read_text().replace("max_iterations = 1000", "max_iterations = 5")
    cfg = tmp_path / "small.cfg"
    cfg.write_text(text)
    commands = [["layout-check"], ["synthesize"], ["wideband"],
                ["tolerance", "--kind", "manufacture", "--trials", "2", "--seed", "3"],
                ["tolerance", "--kind", "feed_transverse"], ["tolerance", "--kind", "feed_down"],
                ["export-field", "--plane", "qz_amp"], ["export-field", "--plane", "aperture_phase"]]
    results = {}
    for run in ("a", "b"):
        out = tmp_path / run
        codes = [main(c + ["--config", str(cfg), "--out", str(out / c[0])]) for c in commands]
        results[run] = (codes, _outputs(out))
    (codes_a, files_a), (codes_b, files_b) = results["a"], results["b"]
    differing = sorted(str(p) for p in files_a if files_a[p] != files_b.get(p))
    assert acceptance("8 determinism", {
        "same exit codes": check(codes_a == codes_b and 1 not in codes_a, str(codes_a)),
        "same file set": check(files_a.keys() == files_b.keys(), f"{len(files_a)} files"),
        "byte-identical outputs": check(not differing, ", ".join(differing) or "all identical"),
    })
