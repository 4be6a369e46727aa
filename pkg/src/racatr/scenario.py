"""A built aperture: synthesized phase frozen into ring sizes, re-evaluated
under other frequencies, feed positions or perturbed elements."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from .element import ElementLayout, ElementPhaseModel, quantize_aperture, rephase_at
from .feedmodel import FeedParams, illuminate_lattice
from .layout import ApertureLattice, LayoutParams, wideband_relocate
from .synth import GRID_MARGIN, SynthesisConfig, SynthesisResult, evaluate_aperture, run_ia


@dataclass(frozen=True, eq=False)
class Design:
    """Fixed element layout of an aperture synthesized for ``layout``/``feed``."""

    layout: LayoutParams
    feed: FeedParams
    model: ElementPhaseModel
    aperture_phase: np.ndarray
    elements: ElementLayout
    rotated: bool = True
    margin: float = GRID_MARGIN

    @classmethod
    def from_phase(cls, layout: LayoutParams, feed: FeedParams, model: ElementPhaseModel,
                   aperture_phase: np.ndarray, rotated: bool = True,
                   margin: float = GRID_MARGIN) -> "Design":
        lattice = ApertureLattice.from_layout(layout, rotated)
        incident = np.angle(illuminate_lattice(feed, lattice))
        elements = quantize_aperture(model, aperture_phase, incident, feed.frequency)
        return cls(layout, feed, model, np.asarray(aperture_phase), elements, rotated, margin)

    @property
    def frequency(self) -> float:
        return self.feed.frequency

    @property
    def lattice(self) -> ApertureLattice:
        return ApertureLattice.from_layout(self.layout, self.rotated)

    def feed_for(self, layout: LayoutParams, frequency: float | None = None) -> FeedParams:
        """The design's horn moved to ``layout``'s feed position."""
        f = layout.design_frequency if frequency is None else frequency
        return FeedParams(layout.feed_position, f, self.feed.pattern_exponent)

    def rephased(self, feed: FeedParams, elements: ElementLayout | None = None) -> np.ndarray:
        elements = self.elements if elements is None else elements
        incident = np.angle(illuminate_lattice(feed, self.lattice))
        return rephase_at(self.model, elements, incident, feed.frequency)

    def evaluate(self, layout: LayoutParams | None = None, feed: FeedParams | None = None,
                 elements: ElementLayout | None = None, window=None,
                 label: str = "") -> metrics.QuietZoneReport:
        """Quiet-zone report of the fixed elements under ``feed``.

        ``layout`` places the quiet-zone window (default: the design's);
        ``feed`` defaults to the design feed.
        """
        layout = self.layout if layout is None else layout
        feed = self.feed if feed is None else feed
        phase = self.rephased(feed, elements)
        return evaluate_aperture(phase, layout, feed, window=window, rotated=self.rotated,
                                 margin=self.margin, label=label)


def synthesize_design(layout: LayoutParams, feed: FeedParams, cfg: SynthesisConfig,
                      model: ElementPhaseModel) -> tuple[SynthesisResult, Design]:
    result = run_ia(layout, feed, cfg)
    design = Design.from_phase(layout, feed, model, result.aperture_phase, cfg.rotated, cfg.grid_margin)
    return result, design


@dataclass(frozen=True)
class WidebandRow:
    frequency_hz: float
    feed_location_m: float
    relocated: bool
    report: metrics.QuietZoneReport


def wideband_rows(design: Design, frequencies) -> list[WidebandRow]:
    """Evaluate the fixed design at each frequency with the feed fixed and relocated.

    At the design frequency the two cases coincide and one row is
    produced. The window follows the outgoing angle expected at each
    frequency in both cases. Rows are ordered by frequency, then feed
    location.
    """
    rows = []
    f0 = design.frequency
    for f in sorted(set(float(v) for v in frequencies)):
        relocated = wideband_relocate(design.layout, f)
        cases = [(relocated, True)]
        if f != f0:
            cases.append((replace(relocated, focal_length=design.layout.focal_length), False))
        for layout, moved in cases:
            feed = design.feed_for(layout)
            label = f"{f:.9g} Hz, F={layout.focal_length:.9g} m"
            rows.append(WidebandRow(f, layout.focal_length, moved and f != f0,
                                    design.evaluate(layout, feed, label=label)))
    rows.sort(key=lambda r: (r.frequency_hz, r.feed_location_m))
    return rows
