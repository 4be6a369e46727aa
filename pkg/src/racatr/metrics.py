"""Quiet-zone figures of merit.

Ripple is half the peak-to-peak spread over the window: amplitude in dB,
phase in degrees after removing the least-squares linear phase plane.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .wavefield import FieldGrid

AMP_SPEC_DB = 1.0
PHASE_SPEC_DEG = 10.0


class PhaseUnwrapError(ValueError):
    pass


@dataclass(frozen=True)
class QuietZoneReport:
    frequency_hz: float
    amp_ripple_db: float
    phase_ripple_deg: float
    theta_est_deg: float
    meets_spec: bool
    amp_ok: bool
    phase_ok: bool
    window_center_x_m: float
    window_center_y_m: float
    window_width_m: float
    window_height_m: float
    label: str = ""

    @property
    def window(self):
        return ((self.window_center_x_m, self.window_center_y_m),
                (self.window_width_m, self.window_height_m))


def amplitude_ripple(window: FieldGrid) -> float:
    """Half peak-to-peak of ``20*log10|field|`` over the window [dB]."""
    amp = np.abs(window.samples)
    if amp.size == 0:
        raise ValueError("empty window")
    if np.any(amp == 0):
        iy, ix = np.argwhere(amp == 0)[0]
        raise ValueError(f"zero amplitude at sample (row={iy}, col={ix}); dB undefined")
    db = 20 * np.log10(amp)
    return float((db.max() - db.min()) / 2)


def unwrap_phase(samples: np.ndarray) -> np.ndarray:
    """Unwrap along each row, then align rows with the unwrapped first column.

    Raises :class:`PhaseUnwrapError` naming the first sample whose step
    from its row or column neighbour is half a cycle or more.
    """
    ph = np.unwrap(np.angle(samples), axis=1)
    seam = np.unwrap(ph[:, 0])
    ph = ph + (seam - ph[:, 0])[:, None]
    bad = np.zeros(ph.shape, dtype=bool)
    bad[:, 1:] |= np.abs(np.diff(ph, axis=1)) >= math.pi
    bad[1:, :] |= np.abs(np.diff(ph, axis=0)) >= math.pi
    if bad.any():
        iy, ix = np.argwhere(bad)[0]
        raise PhaseUnwrapError(
            f"phase step of half a cycle or more at sample (row={iy}, col={ix})")
    return ph


def robust_unwrap(window: FieldGrid) -> np.ndarray:
    """Unwrap-free phase surface: a plane from neighbour phase differences plus
    the wrapped residual about it.

    Used where a ripple figure is needed even for fields that
    :func:`unwrap_phase` rejects.
    """
    s = window.samples
    X, Y = window.coordinates()
    a = np.angle(np.sum(s[:, 1:] * np.conj(s[:, :-1]))) / window.dx
    b = np.angle(np.sum(s[1:, :] * np.conj(s[:-1, :]))) / window.dy
    ramp = a * X + b * Y
    plane = ramp + np.angle(np.sum(s * np.exp(-1j * ramp)))
    return plane + np.angle(s * np.exp(-1j * plane))


def fit_phase_plane(window: FieldGrid, unwrapped: np.ndarray | None = None):
    """Least-squares plane ``a*x + b*y + c`` through the unwrapped phase.

    Returns ``(a, b, c, residual)`` with slopes in rad/m and the residual in
    radians; coordinates are taken relative to the window centre.
    """
    ph = unwrap_phase(window.samples) if unwrapped is None else unwrapped
    X, Y = window.coordinates()
    X = X - X.mean()
    Y = Y - Y.mean()
    A = np.column_stack([X.ravel(), Y.ravel(), np.ones(X.size)])
    coef, *_ = np.linalg.lstsq(A, ph.ravel(), rcond=None)
    residual = ph - (A @ coef).reshape(ph.shape)
    return coef[0], coef[1], coef[2], residual


def phase_ripple_and_slope(window: FieldGrid, robust: bool = False) -> tuple[float, float]:
    """Slope-removed phase ripple [deg] and outgoing angle from the slope [deg].

    The angle is the magnitude ``asin(|grad phase| / k)``; its direction is
    known from the layout. With ``robust`` the phase comes from
    :func:`robust_unwrap` instead of :func:`unwrap_phase`.
    """
    a, b, _, residual = fit_phase_plane(window, robust_unwrap(window) if robust else None)
    ripple = math.degrees((residual.max() - residual.min()) / 2)
    s = min(1.0, math.hypot(a, b) / window.wavenumber)
    return ripple, math.degrees(math.asin(s))


ROBUST_TAG = " [robust unwrap]"


def build_report(window: FieldGrid, frequency: float, amp_spec: float = AMP_SPEC_DB,
                 phase_spec: float = PHASE_SPEC_DEG, label: str = "",
                 robust_fallback: bool = False) -> QuietZoneReport:
    """Ripple figures and spec check of a quiet-zone window.

    With ``robust_fallback`` a window that fails the strict unwrap is
    scored from :func:`robust_unwrap` and ``label`` gains a marker;
    otherwise :class:`PhaseUnwrapError` propagates.
    """
    amp = amplitude_ripple(window)
    try:
        phase, theta = phase_ripple_and_slope(window)
    except PhaseUnwrapError:
        if not robust_fallback:
            raise
        phase, theta = phase_ripple_and_slope(window, robust=True)
        label = (label + ROBUST_TAG).strip()
    x, y = window.x(), window.y()
    amp_ok, phase_ok = amp <= amp_spec, phase <= phase_spec
    return QuietZoneReport(
        frequency_hz=float(frequency),
        amp_ripple_db=amp,
        phase_ripple_deg=phase,
        theta_est_deg=theta,
        meets_spec=amp_ok and phase_ok,
        amp_ok=amp_ok,
        phase_ok=phase_ok,
        window_center_x_m=float((x[0] + x[-1]) / 2),
        window_center_y_m=float((y[0] + y[-1]) / 2),
        window_width_m=float(x[-1] - x[0]),
        window_height_m=float(y[-1] - y[0]),
        label=label,
    )


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(kind, text: str):
    if kind is bool or kind == "bool":
        if text not in ("true", "false"):
            raise ValueError(f"expected true/false, got {text!r}")
        return text == "true"
    if kind is float or kind == "float":
        return float(text)
    return text


def write_reports(reports, path) -> None:
    """Write one ``[record]`` block of ``name = value`` lines per report.

    Floats are written with ``repr`` so reading back is lossless.
    """
    with open(path, "w") as fh:
        for i, report in enumerate(reports):
            if i:
                fh.write("\n")
            fh.write("[record]\n")
            for name, value in asdict(report).items():
                fh.write(f"{name} = {_format(value)}\n")


def read_reports(path) -> list[QuietZoneReport]:
    types = {f.name: f.type for f in fields(QuietZoneReport)}
    records, current = [], None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line == "[record]":
                current = {}
                records.append(current)
                continue
            if current is None or "=" not in line:
                raise ValueError(f"{path}:{lineno}: unexpected line {line!r}")
            key, _, value = (part.strip() for part in line.partition("="))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown field {key!r}")
            current[key] = _parse(types[key], value)
    return [QuietZoneReport(**rec) for rec in records]
