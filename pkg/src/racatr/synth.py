"""Phase-only aperture synthesis by alternating projections.

Each iteration forms the aperture field from the fixed feed amplitude and
the current phase, propagates it to the quiet-zone plane, shapes the field
inside the quiet-zone window, propagates back and keeps only the phase.
The phase state is the total aperture phase, i.e. the element phase plus
the incident feed phase.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.constants import c as C0

from . import metrics
from .feedmodel import FeedParams, illuminate_lattice
from .layout import ApertureLattice, LayoutParams, check_layout
from .wavefield import FieldGrid, transfer_function, window_slices

log = logging.getLogger(__name__)

GRID_MARGIN = 0.6  # m of zero padding beyond aperture and window; keeps periodic images out of the window
_IN_SET_RTOL = 1e-9


class InfeasibleLayoutError(ValueError):
    pass


@dataclass(frozen=True)
class SynthesisConfig:
    """Run parameters of the alternating-projection loop.

    ``qz_center``/``qz_size`` default to the layout's quiet zone. The
    projection clamps the window to ``projection_*`` ripple bands, which
    sit inside the ``target_*`` acceptance levels so the loop does not
    stall on the boundary of the target set.
    """

    max_iterations: int = 1000
    qz_center: tuple[float, float] | None = None
    qz_size: float | None = None
    target_amp_ripple: float = metrics.AMP_SPEC_DB
    target_phase_ripple: float = metrics.PHASE_SPEC_DEG
    stop_on_target: bool = False
    record_history_every: int = 10
    projection_amp_ripple: float | None = 0.2
    projection_phase_ripple: float | None = 2.0
    rotated: bool = True
    grid_margin: float = GRID_MARGIN

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if not (self.target_amp_ripple > 0 and self.target_phase_ripple > 0):
            raise ValueError("ripple targets must be positive")
        for name in ("projection_amp_ripple", "projection_phase_ripple"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if self.record_history_every < 1:
            raise ValueError("record_history_every must be at least 1")
        if self.qz_center is not None:
            object.__setattr__(self, "qz_center", tuple(float(v) for v in self.qz_center))

    def window(self, layout: LayoutParams):
        center = layout.quiet_zone_center if self.qz_center is None else self.qz_center
        size = layout.quiet_zone_side if self.qz_size is None else self.qz_size
        return tuple(center), (size, size)

    @property
    def amp_clamp(self) -> float:
        return self.target_amp_ripple if self.projection_amp_ripple is None else self.projection_amp_ripple

    @property
    def phase_clamp(self) -> float:
        return self.target_phase_ripple if self.projection_phase_ripple is None else self.projection_phase_ripple


@dataclass(frozen=True)
class SynthesisResult:
    """Best aperture phase found [rad], its report and the ripple history."""

    aperture_phase: np.ndarray
    final_report: metrics.QuietZoneReport
    initial_report: metrics.QuietZoneReport
    history: tuple[tuple[int, float, float], ...] = field(default_factory=tuple)
    converged: bool = False
    iterations: int = 0
    best_iteration: int = 0


class ApertureModel:
    """Aperture lattice, feed illumination and the padded propagation grid.

    Elements sit on nodes of an axis-aligned grid (every other node for
    the 45-degree rotated lattice) that also covers the quiet-zone window
    at ``z = h``, plus ``margin`` of zeros on every side.
    """

    def __init__(self, layout: LayoutParams, feed: FeedParams, window=None,
                 rotated: bool = True, margin: float = GRID_MARGIN):
        self.layout = layout
        self.feed = feed
        self.frequency = feed.frequency
        self.wavelength = C0 / feed.frequency
        self.lattice = ApertureLattice.from_layout(layout, rotated)
        if window is None:
            window = (layout.quiet_zone_center, (layout.quiet_zone_side,) * 2)
        self.window_center, self.window_size = window

        d = self.lattice.grid_pitch
        half = self.lattice.node_center() * d
        (cx, cy), (w, h) = self.window_center, self.window_size
        xmin = min(-half, cx - w / 2) - margin
        xmax = max(half, cx + w / 2) + margin
        ymin = min(-half, cy - h / 2) - margin
        ymax = max(half, cy + h / 2) + margin
        # grid node ix sits at x = (ix - ix0 - c) * d, so element node mx lands on ix = mx + ix0
        c = self.lattice.node_center()
        ix0, iy0 = math.ceil(-xmin / d - c), math.ceil(-ymin / d - c)
        self.nx = sfft.next_fast_len(ix0 + math.ceil(xmax / d + c) + 1)
        self.ny = sfft.next_fast_len(iy0 + math.ceil(ymax / d + c) + 1)
        self.dx = self.dy = d
        self.origin = (-(ix0 + c) * d, -(iy0 + c) * d)

        mx, my = self.lattice.index_offsets()
        self.cols = (mx + ix0).astype(np.intp)
        self.rows = (my + iy0).astype(np.intp)

        self.illumination = illuminate_lattice(feed, self.lattice)
        self.illumination.flags.writeable = False
        self.amplitude = np.abs(self.illumination)
        self.amplitude.flags.writeable = False
        dz = layout.propagation_distance
        self.h_forward = transfer_function(self.ny, self.nx, d, d, self.wavelength, dz)
        self.h_backward = transfer_function(self.ny, self.nx, d, d, self.wavelength, -dz)

        self.window_rows, self.window_cols = window_slices(
            self.near_field_grid(np.zeros((self.ny, self.nx))), self.window_center, self.window_size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.lattice.shape

    @property
    def incident_phase(self) -> np.ndarray:
        return np.angle(self.illumination)

    def aperture_samples(self, element_field: np.ndarray) -> np.ndarray:
        out = np.zeros((self.ny, self.nx), dtype=complex)
        out[self.rows, self.cols] = element_field
        return out

    def element_field(self, phase: np.ndarray) -> np.ndarray:
        phase = np.asarray(phase, dtype=float)
        if phase.shape != self.shape:
            raise ValueError(f"phase array shape {phase.shape} does not match aperture {self.shape}")
        return self.amplitude * np.exp(1j * phase)

    def aperture_grid(self, phase: np.ndarray) -> FieldGrid:
        return FieldGrid(self.aperture_samples(self.element_field(phase)),
                         self.dx, self.dy, self.wavelength, 0.0, self.origin)

    def forward(self, element_field: np.ndarray) -> np.ndarray:
        spec = sfft.fft2(self.aperture_samples(element_field), norm="ortho")
        return sfft.ifft2(spec * self.h_forward, norm="ortho")

    def backward(self, near: np.ndarray) -> np.ndarray:
        spec = sfft.fft2(near, norm="ortho")
        return sfft.ifft2(spec * self.h_backward, norm="ortho")[self.rows, self.cols]

    def near_field_grid(self, near: np.ndarray) -> FieldGrid:
        return FieldGrid(near, self.dx, self.dy, self.wavelength,
                         self.layout.propagation_distance, self.origin)

    def window_grid(self, near: np.ndarray) -> FieldGrid:
        r, c = self.window_rows, self.window_cols
        origin = (self.origin[0] + c.start * self.dx, self.origin[1] + r.start * self.dy)
        return FieldGrid(near[r, c], self.dx, self.dy, self.wavelength,
                         self.layout.propagation_distance, origin)

    def report(self, phase: np.ndarray, label: str = "", amp_spec: float = metrics.AMP_SPEC_DB,
               phase_spec: float = metrics.PHASE_SPEC_DEG) -> metrics.QuietZoneReport:
        near = self.forward(self.element_field(phase))
        return metrics.build_report(self.window_grid(near), self.frequency, amp_spec, phase_spec, label,
                                    robust_fallback=True)


@lru_cache(maxsize=6)
def aperture_model(layout: LayoutParams, feed: FeedParams, window=None, rotated: bool = True,
                   margin: float = GRID_MARGIN) -> ApertureModel:
    """Cached :class:`ApertureModel`; all arguments are immutable."""
    return ApertureModel(layout, feed, window, rotated, margin)


def wrap(phase):
    """Wrap radians into ``(-pi, pi]``."""
    w = np.angle(np.exp(1j * np.asarray(phase, dtype=float)))
    return np.where(w == -np.pi, np.pi, w)


def initial_phase(layout: LayoutParams, lattice: ApertureLattice | None = None,
                  frequency: float | None = None) -> np.ndarray:
    """Geometric-optics element phase ``k*r_feed + k*(x + delta_x)*sin(theta)`` [rad].

    It cancels the spherical feed phase and imposes the off-axis ramp;
    wrapped to ``(-pi, pi]``.
    """
    lattice = ApertureLattice.from_layout(layout) if lattice is None else lattice
    f = layout.design_frequency if frequency is None else frequency
    k = 2 * math.pi * f / C0
    x, y = lattice.positions()
    fx, fy, fz = layout.feed_position
    r = np.sqrt((x - fx) ** 2 + (y - fy) ** 2 + fz**2)
    return wrap(k * r + k * (x + layout.feed_offset) * math.sin(math.radians(layout.theta)))


def initial_aperture_phase(model: ApertureModel) -> np.ndarray:
    """Total aperture phase of the geometric-optics design under ``model``'s feed."""
    return wrap(initial_phase(model.layout, model.lattice, model.frequency) + model.incident_phase)


def _in_band(value: float, limit: float) -> bool:
    return value <= limit * (1 + _IN_SET_RTOL) + 1e-12


def _project_window(window: FieldGrid, amp_band_db: float, phase_band_deg: float,
                    max_refits: int = 50) -> np.ndarray:
    samples = window.samples
    amp = np.abs(samples)
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(amp)
    amp_changed = not _in_band((db.max() - db.min()) / 2, amp_band_db)
    if amp_changed:
        a0 = amp.mean()
        amp = np.clip(amp, a0 * 10 ** (-amp_band_db / 20), a0 * 10 ** (amp_band_db / 20))

    try:
        ph = metrics.unwrap_phase(samples)
    except metrics.PhaseUnwrapError:
        ph = metrics.robust_unwrap(window)
    band = math.radians(phase_band_deg)
    phase_changed = False
    for _ in range(max_refits):
        _, _, _, residual = metrics.fit_phase_plane(window, ph)
        if _in_band((residual.max() - residual.min()) / 2, band):
            break
        ph = ph - residual + np.clip(residual, -band, band)
        phase_changed = True
    if phase_changed:
        return amp * np.exp(1j * ph)
    if amp_changed:
        return amp * np.exp(1j * np.angle(samples))
    return samples


def qz_projection(near_field: FieldGrid, cfg: SynthesisConfig, layout: LayoutParams) -> FieldGrid:
    """Shape the quiet-zone window of ``near_field``; samples outside are left free.

    Inside the window the amplitude is clamped to within
    ``cfg.amp_clamp`` dB of the window's mean amplitude and the phase to
    within ``cfg.phase_clamp`` degrees of its least-squares linear ramp,
    refitting the ramp until the clamped phase meets the band. A window
    already inside both bands is returned unchanged, so the projection is
    idempotent.
    """
    center, size = cfg.window(layout)
    rows, cols = window_slices(near_field, center, size)
    origin = (near_field.origin[0] + cols.start * near_field.dx,
              near_field.origin[1] + rows.start * near_field.dy)
    window = FieldGrid(near_field.samples[rows, cols], near_field.dx, near_field.dy,
                       near_field.wavelength, near_field.plane_z, origin)
    out = np.array(near_field.samples)
    out[rows, cols] = _project_window(window, cfg.amp_clamp, cfg.phase_clamp)
    return near_field.with_samples(out)


def _score(report: metrics.QuietZoneReport, cfg: SynthesisConfig) -> float:
    return max(report.amp_ripple_db / cfg.target_amp_ripple,
               report.phase_ripple_deg / cfg.target_phase_ripple)


def run_ia(layout: LayoutParams, feed: FeedParams, cfg: SynthesisConfig = SynthesisConfig(),
           initial: np.ndarray | None = None, check: bool = True) -> SynthesisResult:
    """Synthesize the phase-only aperture for ``layout`` under ``feed``.

    Starts from the geometric-optics design unless ``initial`` (total
    aperture phase, radians) is given. Returns the best iterate seen,
    scored by the larger of the two ripples relative to their targets
    (the later iterate on ties).
    """
    if check:
        feasibility = check_layout(layout)
        if not feasibility.feasible:
            raise InfeasibleLayoutError(f"layout is infeasible: {feasibility}")
    window = cfg.window(layout)
    model = aperture_model(layout, feed, window, cfg.rotated, cfg.grid_margin)
    phase = initial_aperture_phase(model) if initial is None else np.array(initial, dtype=float)
    if phase.shape != model.shape:
        raise ValueError(f"initial phase shape {phase.shape} does not match aperture {model.shape}")

    def evaluate(near):
        return metrics.build_report(model.window_grid(near), model.frequency,
                                    cfg.target_amp_ripple, cfg.target_phase_ripple, robust_fallback=True)

    history = []
    near = model.forward(model.element_field(phase))
    report = evaluate(near)
    initial_report = report
    best = (_score(report, cfg), phase, report, 0)
    it = 0
    while True:
        if it % cfg.record_history_every == 0:
            history.append((it, report.amp_ripple_db, report.phase_ripple_deg))
        if it >= cfg.max_iterations or (cfg.stop_on_target and report.meets_spec):
            break
        shaped = qz_projection(model.near_field_grid(near), cfg, layout)
        phase = np.angle(model.backward(shaped.samples))
        it += 1
        near = model.forward(model.element_field(phase))
        report = evaluate(near)
        score = _score(report, cfg)
        if score <= best[0]:  # ties go to the later iterate
            best = (score, phase, report, it)
        if it % 100 == 0:
            log.debug("iteration %d: %.4f dB, %.4f deg", it, report.amp_ripple_db, report.phase_ripple_deg)

    _, best_phase, best_report, best_it = best
    best_phase = np.array(best_phase)
    best_phase.flags.writeable = False
    return SynthesisResult(best_phase, best_report, initial_report, tuple(history),
                           best_report.meets_spec, it, best_it)


def evaluate_aperture(phase: np.ndarray, layout: LayoutParams, feed: FeedParams,
                      f: float | None = None, window=None, rotated: bool = True,
                      margin: float = GRID_MARGIN, label: str = "") -> metrics.QuietZoneReport:
    """Propagate a fixed aperture phase to the quiet zone and score it.

    ``window`` defaults to the layout's quiet zone; ``f`` overrides the
    feed frequency.
    """
    if f is not None and f != feed.frequency:
        feed = FeedParams(feed.position, f, feed.pattern_exponent, feed.boresight)
    if window is None:
        window = (layout.quiet_zone_center, (layout.quiet_zone_side,) * 2)
    window = (tuple(window[0]), tuple(window[1]))
    return aperture_model(layout, feed, window, rotated, margin).report(phase, label)
