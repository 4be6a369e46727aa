"""Command-line front end.

Exit codes: 0 success with every evaluation inside the ripple spec,
1 usage or input error, 2 completed but the spec is unmet (or the layout
is infeasible).

Output files (all CSVs have a header; floats carry 9 significant digits):

``layout-check``  ``feasibility.txt`` (``name = value`` lines)
``synthesize``    ``aperture_phase.csv`` (row, col, phase_deg), ``element_layout.csv``,
                  ``report.txt`` (initial and final records), ``history.csv``
``wideband``      ``wideband.csv`` (frequency_hz, feed_location_m, amp_ripple_db,
                  phase_ripple_deg, theta_est_deg, meets_spec), ``wideband_report.txt``
``tolerance``     ``tolerance_<kind>.csv`` (one row per trial or offset) and
                  ``tolerance_<kind>_summary.csv`` (one column per magnitude)
``export-field``  ``field_<plane>.csv`` (x_m, y_m, value)
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics
from .config import ConfigError, RunConfig, load_config, parse_frequencies
from .element import ElementModelError, write_layout_csv
from .layout import ApertureLattice, check_layout
from .scenario import Design, synthesize_design, wideband_rows
from .synth import InfeasibleLayoutError, aperture_model
from .tolerance import (FEED_OFFSETS, KINDS, TABLE4_FRACTIONS, ToleranceScenario,
                        run_feed_offset_sweep, run_manufacture_sweep, sweep_rows)
from .wavefield import FieldGrid

log = logging.getLogger("racatr")

EXIT_OK, EXIT_INPUT, EXIT_SPEC = 0, 1, 2
PLANES = ("aperture_amp", "aperture_phase", "qz_amp", "qz_phase")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([fmt(v) for v in header])
        for row in rows:
            w.writerow([fmt(v) for v in row])


def parse_length(text: str, wavelength: float) -> float:
    """A length in metres: ``0.001``, ``lambda/200``, ``-5lambda`` or ``2*lambda``."""
    t = text.strip().replace(" ", "").lower()
    for name in ("lambda", "lam"):
        if name in t:
            pre, post = t.split(name, 1)
            pre = pre.rstrip("*")
            coef = {"": 1.0, "+": 1.0, "-": -1.0}.get(pre)
            if coef is None:
                coef = float(pre)
            if post:
                if not post.startswith("/"):
                    raise ValueError(f"bad length {text!r}")
                coef /= float(post[1:])
            return coef * wavelength
    return float(t)


# --- design I/O -----------------------------------------------------------

def write_phase_map(phase: np.ndarray, path: Path) -> None:
    write_csv(path, ["row", "col", "phase_deg"],
              ((i, j, math.degrees(v)) for (i, j), v in np.ndenumerate(phase)))


def read_phase_map(path: Path, shape: tuple[int, int]) -> np.ndarray:
    """Aperture phase [rad] from a ``row,col,phase_deg`` CSV."""
    out = np.full(shape, np.nan)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["row", "col", "phase_deg"]:
            raise ValueError(f"{path}: header must be row,col,phase_deg")
        for n, rec in enumerate(reader, 2):
            try:
                i, j = int(rec["row"]), int(rec["col"])
                out[i, j] = math.radians(float(rec["phase_deg"]))
            except (ValueError, IndexError, TypeError) as exc:
                raise ValueError(f"{path}:{n}: bad row: {exc}") from None
    if np.isnan(out).any():
        raise ValueError(f"{path}: expected {shape[0]}x{shape[1]} entries")
    return out


def read_export_csv(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columns ``x_m, y_m, value`` of a field export."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader) != ["x_m", "y_m", "value"]:
            raise ValueError(f"{path}: header must be x_m,y_m,value")
        data = np.array([[float(v) for v in row] for row in reader])
    return data[:, 0], data[:, 1], data[:, 2]


# --- pipeline -------------------------------------------------------------

class _Run:
    def __init__(self, cfg: RunConfig, args):
        self.cfg = cfg
        self.args = args
        self.out = Path(args.out) if getattr(args, "out", None) else cfg.output_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.seed = args.seed if getattr(args, "seed", None) is not None else cfg.seed
        freqs = getattr(args, "frequencies", None)
        self.frequencies = parse_frequencies(freqs) if freqs else cfg.frequencies
        self.layout = cfg.layout
        self.feed = cfg.feed()
        self.model = cfg.element_model()

    def require_feasible(self):
        report = check_layout(self.layout)
        if not report.feasible:
            raise InfeasibleLayoutError(f"layout is infeasible: {report}")

    def design(self) -> Design:
        """Design from ``--design`` if given, otherwise synthesized now."""
        syn = self.cfg.synthesis
        path = getattr(self.args, "design", None)
        if path:
            shape = ApertureLattice.from_layout(self.layout, syn.rotated).shape
            phase = read_phase_map(Path(path), shape)
            return Design.from_phase(self.layout, self.feed, self.model, phase, syn.rotated, syn.grid_margin)
        self.require_feasible()
        log.info("synthesizing (%d iterations)", syn.max_iterations)
        return synthesize_design(self.layout, self.feed, syn, self.model)[1]


def cmd_layout_check(run: _Run) -> int:
    rep = check_layout(run.layout)
    with open(run.out / "feasibility.txt", "w") as fh:
        for name, value in (("mirror_angle_deg", rep.mirror_angle), ("eq2_lhs_m", rep.eq2_lhs),
                            ("eq2_rhs_m", rep.eq2_rhs), ("quiet_zone_clear", rep.eq2_ok),
                            ("above_feed", rep.eq3_ok), ("feasible", rep.feasible)):
            fh.write(f"{name} = {fmt(value)}\n")
    print(f"mirror angle {rep.mirror_angle:.3f} deg; feasible: {fmt(rep.feasible)}")
    return EXIT_OK if rep.feasible else EXIT_SPEC


def cmd_synthesize(run: _Run) -> int:
    run.require_feasible()
    result, design = synthesize_design(run.layout, run.feed, run.cfg.synthesis, run.model)
    write_phase_map(result.aperture_phase, run.out / "aperture_phase.csv")
    write_layout_csv(design.elements, run.out / "element_layout.csv")
    metrics.write_reports([replace(result.initial_report, label="initial"),
                           replace(result.final_report, label="final")], run.out / "report.txt")
    write_csv(run.out / "history.csv", ["iteration", "amp_ripple_db", "phase_ripple_deg"], result.history)
    r = result.final_report
    print(f"final: amp {r.amp_ripple_db:.4f} dB, phase {r.phase_ripple_deg:.4f} deg, "
          f"theta {r.theta_est_deg:.4f} deg, meets spec: {fmt(r.meets_spec)}")
    return EXIT_OK if r.meets_spec else EXIT_SPEC


def cmd_wideband(run: _Run) -> int:
    design = run.design()
    rows = wideband_rows(design, run.frequencies)
    write_csv(run.out / "wideband.csv",
              ["frequency_hz", "feed_location_m", "amp_ripple_db", "phase_ripple_deg", "theta_est_deg", "meets_spec"],
              ((r.frequency_hz, r.feed_location_m, r.report.amp_ripple_db, r.report.phase_ripple_deg,
                r.report.theta_est_deg, r.report.meets_spec) for r in rows))
    metrics.write_reports([r.report for r in rows], run.out / "wideband_report.txt")
    for r in rows:
        print(f"{r.frequency_hz / 1e9:7.3f} GHz  F={r.feed_location_m:.4f} m  "
              f"amp {r.report.amp_ripple_db:.3f} dB  phase {r.report.phase_ripple_deg:.3f} deg  "
              f"theta {r.report.theta_est_deg:.3f} deg")
    return EXIT_OK if all(r.report.meets_spec for r in rows) else EXIT_SPEC


def cmd_tolerance(run: _Run) -> int:
    kind = run.args.kind
    lam = run.layout.wavelength
    trials = run.args.trials if run.args.trials is not None else run.cfg.trials
    if run.args.magnitudes:
        values = [parse_length(t, lam) for t in run.args.magnitudes.split(",") if t.strip()]
    elif kind == "manufacture":
        values = [f * lam for f in TABLE4_FRACTIONS]
    else:
        values = [m * lam for m in FEED_OFFSETS]
    design = run.design()
    if kind == "manufacture":
        if any(v < 0 for v in values):
            raise UsageError("manufacture magnitudes must be non-negative")
        results = [run_manufacture_sweep(ToleranceScenario(kind, v, trials, run.seed, base=design),
                                         run.cfg.workers) for v in values]
        header = ["error_bound_m"] + [v for v in values]
        table = [[name] + [getattr(res, attr) for res in results] for name, attr in (
            ("amp_ripple_mean_db", "amp_mean"), ("amp_ripple_min_db", "amp_min"),
            ("amp_ripple_max_db", "amp_max"), ("phase_ripple_mean_deg", "phase_mean"),
            ("phase_ripple_min_deg", "phase_min"), ("phase_ripple_max_deg", "phase_max"),
            ("theta_mean_deg", "theta_mean"))]
    else:
        scenario = ToleranceScenario(kind, lam, 1, run.seed, offsets=tuple(v / lam for v in values), base=design)
        res = run_feed_offset_sweep(scenario, run.cfg.workers)
        results = [res]
        header = ["offset_m"] + list(res.offsets)
        table = [[name] + [getattr(r, attr) for r in res.reports] for name, attr in (
            ("amp_ripple_db", "amp_ripple_db"), ("phase_ripple_deg", "phase_ripple_deg"),
            ("actual_theta_deg", "theta_est_deg"))]
        if res.predicted_theta is not None:
            table.append(["predicted_theta_deg", *res.predicted_theta])

    rows = sweep_rows(results)
    names = list(rows[0])
    write_csv(run.out / f"tolerance_{kind}.csv", names, ([r[k] for k in names] for r in rows))
    write_csv(run.out / f"tolerance_{kind}_summary.csv", header, table)
    for row in table:
        print(row[0] + ": " + "  ".join(f"{v:.4f}" for v in row[1:]))
    ok = all(r["meets_spec"] for r in rows)
    return EXIT_OK if ok else EXIT_SPEC


def qz_plane_values(window: FieldGrid, plane: str) -> np.ndarray:
    """Quiet-zone export values: dB relative to the window peak, or slope-removed phase [deg]."""
    if plane == "qz_amp":
        amp = np.abs(window.samples)
        return 20 * np.log10(amp / amp.max())
    if plane == "qz_phase":
        return np.degrees(metrics.fit_phase_plane(window)[3])
    raise ValueError(f"unknown quiet-zone plane {plane!r}")


def cmd_export_field(run: _Run) -> int:
    plane = run.args.plane
    design = run.design()
    syn = run.cfg.synthesis
    model = aperture_model(run.layout, run.feed, syn.window(run.layout), syn.rotated, syn.grid_margin)
    if plane == "aperture_amp":
        x, y = model.lattice.positions()
        values = 20 * np.log10(model.amplitude / model.amplitude.max())
    elif plane == "aperture_phase":
        x, y = model.lattice.positions()
        values = np.degrees(design.aperture_phase)
    else:
        window = model.window_grid(model.forward(model.element_field(design.aperture_phase)))
        x, y = window.coordinates()
        values = qz_plane_values(window, plane)
    path = run.out / f"field_{plane}.csv"
    write_csv(path, ["x_m", "y_m", "value"], zip(np.ravel(x), np.ravel(y), np.ravel(values)))
    print(f"wrote {path} ({np.size(values)} rows)")
    return EXIT_OK


COMMANDS = {"layout-check": cmd_layout_check, "synthesize": cmd_synthesize, "wideband": cmd_wideband,
            "tolerance": cmd_tolerance, "export-field": cmd_export_field}


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the verb
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="run configuration file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (overrides [run] output_dir)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (overrides [run] seed)")
    common.add_argument("--frequencies", default=argparse.SUPPRESS,
                        help="comma-separated list, e.g. 26.5GHz,28GHz,29.5GHz")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="racatr", parents=[common],
                     description="Reflectarray compact range synthesis and analysis.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("layout-check", parents=[common], help="check the layout constraints")
    sub.add_parser("synthesize", parents=[common], help="synthesize the aperture phase")
    design_help = "aperture_phase.csv from an earlier synthesize run (default: synthesize now)"
    p = sub.add_parser("wideband", parents=[common], help="evaluate the design across frequencies")
    p.add_argument("--design", help=design_help)
    p = sub.add_parser("tolerance", parents=[common], help="manufacture and feed-offset sweeps")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--magnitudes", help="comma-separated lengths, e.g. lambda/200,lambda/50 or "
                                        "--magnitudes=-5lambda,0,5lambda")
    p.add_argument("--trials", type=int, help="trials per manufacture magnitude (overrides [run] trials)")
    p.add_argument("--design", help=design_help)
    p = sub.add_parser("export-field", parents=[common], help="write plot-ready field samples")
    p.add_argument("--plane", choices=PLANES, required=True)
    p.add_argument("--design", help=design_help)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(message)s")
        if not getattr(args, "config", None):
            raise UsageError("racatr: --config is required")
        if getattr(args, "trials", None) is not None and args.trials < 1:
            raise UsageError("--trials must be at least 1")
        run = _Run(load_config(args.config), args)
        return COMMANDS[args.command](run)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleLayoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (ConfigError, ElementModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
