"""Reflection-phase model of the ring element and the cross-frequency flow.

The element is described only by tabulated reflection phase versus the
middle-ring side ``L_r`` at a set of frequencies. Phases on the aperture
(``quantize_aperture``/``rephase_at``) are in radians; phase curves are in
degrees, stored unwrapped along ``L_r`` and reported wrapped to (-180, 180].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

MAX_SENSITIVITY = 150.0  # deg/mm
MIN_SPAN = 360.0  # deg
PHOENIX_GEOMETRY = {"L_in_mm": 1.0, "L_out_mm": 5.0, "w_mm": 0.15, "h1_mm": 1.8, "h2_mm": 0.762}


class ElementModelError(ValueError):
    """A phase table that fails validation; ``reason`` names the failed check."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


def wrap_deg(phase):
    w = np.mod(np.asarray(phase, dtype=float) + 180.0, 360.0) - 180.0
    return np.where(w == -180.0, 180.0, w)


def wrap_rad(phase):
    return np.deg2rad(wrap_deg(np.rad2deg(phase)))


@dataclass(frozen=True)
class ElementPhaseModel:
    """Reflection phase tables ``phase[i](lr[i])`` at ``frequencies[i]``.

    Each curve must span at least 360 degrees, be strictly monotone in
    ``L_r`` and change by no more than 150 deg/mm between samples; all
    curves must run in the same direction.
    """

    frequencies: tuple[float, ...]
    lr: tuple[np.ndarray, ...]
    phase: tuple[np.ndarray, ...]
    source: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.frequencies) == len(self.lr) == len(self.phase) >= 1):
            raise ElementModelError("shape", "need one (lr, phase) curve per frequency")
        if any(np.diff(self.frequencies) <= 0):
            raise ElementModelError("shape", "frequencies must be strictly increasing")
        directions = set()
        for f, lr, ph in zip(self.frequencies, self.lr, self.phase):
            lr, ph = np.asarray(lr, float), np.asarray(ph, float)
            tag = f"curve at {f:.6g} Hz"
            if lr.shape != ph.shape or lr.size < 2 or np.any(np.diff(lr) <= 0):
                raise ElementModelError("shape", f"{tag}: lr must be strictly increasing with one phase each")
            dp = np.diff(ph)
            if not (np.all(dp > 0) or np.all(dp < 0)):
                i = int(np.argmax(np.sign(dp) != np.sign(dp[0])))
                raise ElementModelError(
                    "monotonic", f"{tag}: not strictly monotone near L_r = {lr[i + 1]:.6g} mm")
            span = abs(ph[-1] - ph[0])
            if span < MIN_SPAN:
                raise ElementModelError("span", f"{tag}: phase span {span:.6g} deg is below 360 deg")
            slope = np.abs(dp / np.diff(lr))
            if slope.max() > MAX_SENSITIVITY:
                i = int(np.argmax(slope))
                raise ElementModelError(
                    "sensitivity",
                    f"{tag}: {slope[i]:.6g} deg/mm between L_r = {lr[i]:.6g} and "
                    f"{lr[i + 1]:.6g} mm exceeds {MAX_SENSITIVITY:g} deg/mm")
            directions.add(bool(dp[0] < 0))
        if len(directions) > 1:
            raise ElementModelError("monotonic", "curves must all increase or all decrease with L_r")

    @property
    def lr_range(self) -> tuple[float, float]:
        return (max(float(lr[0]) for lr in self.lr), min(float(lr[-1]) for lr in self.lr))

    @property
    def band(self) -> tuple[float, float]:
        return (self.frequencies[0], self.frequencies[-1])

    def _check_f(self, f):
        lo, hi = self.band
        if not lo <= f <= hi:
            raise ValueError(f"frequency {f:.6g} Hz is outside the model band [{lo:.6g}, {hi:.6g}]")

    def _neighbours(self, f):
        self._check_f(f)
        freqs = np.asarray(self.frequencies)
        i = int(np.searchsorted(freqs, f, side="right")) - 1
        if i >= len(freqs) - 1:
            return len(freqs) - 1, len(freqs) - 1, 0.0
        return i, i + 1, (f - freqs[i]) / (freqs[i + 1] - freqs[i])

    def curve(self, f) -> tuple[np.ndarray, np.ndarray]:
        """Unwrapped phase curve at ``f`` on the union of neighbouring L_r samples."""
        i, j, t = self._neighbours(f)
        lo, hi = self.lr_range
        grid = np.union1d(self.lr[i], self.lr[j])
        grid = grid[(grid >= lo) & (grid <= hi)]
        ph = (1 - t) * np.interp(grid, self.lr[i], self.phase[i]) + t * np.interp(grid, self.lr[j], self.phase[j])
        return grid, ph

    def phase_of(self, lr, f, wrapped: bool = True):
        """Reflection phase at ring size ``lr`` [mm] and frequency ``f`` [deg].

        Linear in ``lr`` along each tabulated curve and linear in ``f``
        between neighbouring curves.
        """
        lr = np.asarray(lr, dtype=float)
        lo, hi = self.lr_range
        if np.any(lr < lo) or np.any(lr > hi):
            raise ValueError(f"L_r outside the model range [{lo:g}, {hi:g}] mm")
        i, j, t = self._neighbours(f)
        ph = (1 - t) * np.interp(lr, self.lr[i], self.phase[i]) + t * np.interp(lr, self.lr[j], self.phase[j])
        return wrap_deg(ph) if wrapped else ph

    def length_for_phase(self, phase_deg, f):
        """Smallest ring size whose reflection phase equals ``phase_deg`` mod 360 [mm]."""
        grid, ph = self.curve(f)
        target = np.asarray(phase_deg, dtype=float)
        if ph[-1] < ph[0]:
            top = ph[0]
            t = top - np.mod(top - target, 360.0)
            return np.interp(t, ph[::-1], grid[::-1])
        t = ph[0] + np.mod(target - ph[0], 360.0)
        return np.interp(t, ph, grid)

    def max_sensitivity(self) -> float:
        return max(float(np.max(np.abs(np.diff(p) / np.diff(l)))) for l, p in zip(self.lr, self.phase))


def linear_model(slope_deg_per_mm: float = -140.0, phase_at_min: float = 180.0,
                 reference_frequency: float = 28e9,
                 frequencies=(26.5e9, 27e9, 27.5e9, 28e9, 28.5e9, 29e9, 29.5e9),
                 lr_min: float = 1.0, lr_max: float = 5.0, step: float = 0.01) -> ElementPhaseModel:
    """Synthetic linear curves ``phase_at_min + slope*(f/f_ref)*(L_r - lr_min)``.

    The default reproduces the ring element's published constraints:
    ``L_r`` in 1..5 mm, more than 360 degrees of cover and at most
    147.5 deg/mm at the top of the 26.5-29.5 GHz band.
    """
    lr = np.round(np.arange(lr_min, lr_max + step / 2, step), 12)
    curves = tuple(phase_at_min + slope_deg_per_mm * (f / reference_frequency) * (lr - lr_min)
                   for f in frequencies)
    return ElementPhaseModel(tuple(float(f) for f in frequencies), (lr,) * len(frequencies), curves,
                             source="builtin-linear", metadata=dict(PHOENIX_GEOMETRY))


def read_phase_csv(path) -> ElementPhaseModel:
    """Load ``freq_hz,lr_mm,phase_deg`` rows; ``#`` lines are comments.

    Phases may be wrapped; each curve is unwrapped along ``L_r``.
    """
    by_freq: dict[float, list[tuple[float, float]]] = {}
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames != ["freq_hz", "lr_mm", "phase_deg"]:
        raise ElementModelError("shape", f"{path}: header must be freq_hz,lr_mm,phase_deg")
    for n, row in enumerate(reader, 2):
        try:
            f, lr, ph = float(row["freq_hz"]), float(row["lr_mm"]), float(row["phase_deg"])
        except (TypeError, ValueError) as exc:
            raise ElementModelError("shape", f"{path}: bad data row {n}: {exc}") from None
        by_freq.setdefault(f, []).append((lr, ph))
    if not by_freq:
        raise ElementModelError("shape", f"{path}: no data rows")
    freqs = sorted(by_freq)
    lrs, phases = [], []
    for f in freqs:
        pts = np.array(by_freq[f])
        lrs.append(pts[:, 0])
        phases.append(np.unwrap(pts[:, 1], period=360.0))
    return ElementPhaseModel(tuple(freqs), tuple(lrs), tuple(phases), source=str(path))


def write_phase_csv(model: ElementPhaseModel, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# source: {model.source}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "lr_mm", "phase_deg"])
        for f, lr, ph in zip(model.frequencies, model.lr, model.phase):
            for a, b in zip(lr, wrap_deg(ph)):
                w.writerow([f"{f:.9g}", f"{a:.9g}", f"{b:.9g}"])


@dataclass(frozen=True)
class ElementLayout:
    """Ring size ``L_r`` [mm] of every aperture element."""

    lr: np.ndarray
    lr_range: tuple[float, float] = (1.0, 5.0)

    def __post_init__(self):
        a = np.array(self.lr, dtype=float)
        a.flags.writeable = False
        object.__setattr__(self, "lr", a)
        lo, hi = self.lr_range
        if np.any(a < lo - 1e-12) or np.any(a > hi + 1e-12):
            raise ValueError(f"ring sizes must lie in [{lo:g}, {hi:g}] mm")


def quantize_aperture(model: ElementPhaseModel, aperture_phase, incident_phase, f0) -> ElementLayout:
    """Ring sizes realising ``aperture_phase - incident_phase`` at ``f0`` (radians in)."""
    aperture_phase = np.asarray(aperture_phase, dtype=float)
    incident_phase = np.asarray(incident_phase, dtype=float)
    if aperture_phase.shape != incident_phase.shape:
        raise ValueError(f"shape mismatch: {aperture_phase.shape} vs {incident_phase.shape}")
    element = wrap_deg(np.rad2deg(aperture_phase - incident_phase))
    return ElementLayout(model.length_for_phase(element, f0), model.lr_range)


def rephase_at(model: ElementPhaseModel, elements: ElementLayout, incident_phase, f_new) -> np.ndarray:
    """Aperture phase of fixed elements under a new illumination and frequency [rad]."""
    incident_phase = np.asarray(incident_phase, dtype=float)
    if incident_phase.shape != elements.lr.shape:
        raise ValueError(f"shape mismatch: {incident_phase.shape} vs {elements.lr.shape}")
    return wrap_rad(np.deg2rad(model.phase_of(elements.lr, f_new, wrapped=False)) + incident_phase)


def write_layout_csv(elements: ElementLayout, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "lr_mm"])
        for (i, j), v in np.ndenumerate(elements.lr):
            w.writerow([i, j, f"{v:.9g}"])
