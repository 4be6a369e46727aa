"""Facility geometry of an offset-fed reflectarray compact range.

Coordinate frame: the aperture lies in the z = 0 plane centred at the
origin, the feed phase centre sits at ``(-feed_offset, 0, focal_length)``
and the collimated wave leaves along ``(-sin(theta), 0, cos(theta))``, so
the quiet zone is on the feed side of the aperture normal.

Angles are in degrees at every public surface and radians internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c as C0


@dataclass(frozen=True)
class LayoutParams:
    """Geometry of the range.

    Parameters
    ----------
    focal_length : float
        Height ``F`` of the feed phase centre above the aperture [m].
    aperture_side : float
        Side ``S1`` of the square aperture, which is rotated 45 degrees
        about z so its diagonal lies along x [m].
    quiet_zone_side : float
        Side ``S2`` of the square quiet-zone window [m].
    feed_offset : float
        Offset ``delta_x`` of the feed towards -x [m].
    propagation_distance : float
        Height ``h`` of the quiet-zone plane above the aperture [m].
    theta : float
        Outgoing plane-wave angle from the aperture normal [deg].
    element_pitch : float
        Element spacing ``s`` on the aperture lattice [m].
    design_frequency : float
        Frequency the aperture is synthesized for [Hz].
    """

    focal_length: float = 1.21
    aperture_side: float = 0.46
    quiet_zone_side: float = 0.23
    feed_offset: float = 0.065
    propagation_distance: float = 1.3
    theta: float = 35.0
    element_pitch: float = 0.005
    design_frequency: float = 28e9

    def __post_init__(self):
        for name in ("focal_length", "aperture_side", "quiet_zone_side",
                     "propagation_distance", "element_pitch", "design_frequency"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not 0.0 < self.theta < 90.0:
            raise ValueError(f"theta must lie in (0, 90) degrees, got {self.theta!r}")
        if not 0.0 <= self.feed_offset < self.diagonal / 2:
            raise ValueError(
                f"feed_offset must lie in [0, D/2) = [0, {self.diagonal / 2:.6g}), "
                f"got {self.feed_offset!r}")

    @property
    def diagonal(self) -> float:
        """Diagonal ``D`` of the rotated square aperture [m]."""
        return self.aperture_side * math.sqrt(2.0)

    @property
    def wavelength(self) -> float:
        return C0 / self.design_frequency

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi * self.design_frequency / C0

    @property
    def feed_position(self) -> tuple[float, float, float]:
        return (-self.feed_offset, 0.0, self.focal_length)

    @property
    def quiet_zone_center(self) -> tuple[float, float]:
        """Where the ray from the aperture centre crosses the z = h plane [m]."""
        return (-self.propagation_distance * math.tan(math.radians(self.theta)), 0.0)

    @property
    def elements_per_side(self) -> int:
        return int(round(self.aperture_side / self.element_pitch))


TABLE2_LAYOUT = LayoutParams()
"""The ideal-aperture numerical example (F = 1.21 m)."""

EXPERIMENT_LAYOUT = replace(TABLE2_LAYOUT, focal_length=1.207)
"""The built range, whose feed sits at F = 1.207 m at 28 GHz."""


@dataclass(frozen=True)
class FeasibilityReport:
    mirror_angle: float
    eq2_lhs: float
    eq2_rhs: float
    eq2_ok: bool
    eq3_ok: bool

    @property
    def feasible(self) -> bool:
        return self.eq2_ok and self.eq3_ok


def mirror_angle(layout: LayoutParams) -> float:
    """Outgoing angle of the mirror-like reflection off the ground plane [deg]."""
    return math.degrees(math.atan((layout.diagonal / 2 - layout.feed_offset) / layout.focal_length))


def check_layout(layout: LayoutParams) -> FeasibilityReport:
    """Check that the quiet zone clears the mirror reflection and the feed.

    The quiet zone must lie outside the cone of the mirror reflection
    (``D/2 + h tan(alpha) < h tan(theta)``) and above the feed (``h > F``).
    Both inequalities are strict.
    """
    alpha = mirror_angle(layout)
    h = layout.propagation_distance
    lhs = layout.diagonal / 2 + h * math.tan(math.radians(alpha))
    rhs = h * math.tan(math.radians(layout.theta))
    return FeasibilityReport(
        mirror_angle=alpha,
        eq2_lhs=lhs,
        eq2_rhs=rhs,
        eq2_ok=lhs < rhs,
        eq3_ok=h > layout.focal_length,
    )


def path_length(x, y, layout: LayoutParams):
    """Exact feed-to-wavefront path through the aperture point ``(x, y)`` [m]."""
    u = np.asarray(x, dtype=float) + layout.feed_offset
    y = np.asarray(y, dtype=float)
    return (np.sqrt(u**2 + y**2 + layout.focal_length**2)
            + u * math.sin(math.radians(layout.theta)))


def path_length_paraxial(x, y, layout: LayoutParams):
    """Second-order Taylor form of :func:`path_length` [m]."""
    u = np.asarray(x, dtype=float) + layout.feed_offset
    y = np.asarray(y, dtype=float)
    F = layout.focal_length
    return F + (u**2 + y**2) / (2 * F) + u * math.sin(math.radians(layout.theta))


def aperture_phase(x, y, f: float, layout: LayoutParams):
    """Paraxial spatial phase delay at frequency ``f`` [rad]."""
    return 2 * math.pi * f / C0 * path_length_paraxial(x, y, layout)


def wideband_relocate(layout: LayoutParams, f_new: float) -> LayoutParams:
    """Move the feed so the spatial phase delay matches at ``f_new``.

    ``F' = (f_new / f) F`` and ``sin(theta') = (f / f_new) sin(theta)``.
    """
    if not f_new > 0:
        raise ValueError(f"f_new must be positive, got {f_new!r}")
    ratio = f_new / layout.design_frequency
    s = math.sin(math.radians(layout.theta)) / ratio
    if s > 1.0:
        raise ValueError(
            f"no real outgoing angle at {f_new:.6g} Hz: sin(theta') = {s:.6g} > 1")
    return replace(
        layout,
        focal_length=layout.focal_length * ratio,
        theta=math.degrees(math.asin(s)),
        design_frequency=f_new,
    )


def predicted_theta_for_transverse_offset(layout: LayoutParams, delta: float) -> float:
    """Outgoing angle after moving the feed by ``delta`` along -x [deg].

    A positive ``delta`` increases the feed offset and lowers theta by
    ``atan(|delta| / F)``.
    """
    if abs(delta) >= layout.focal_length:
        raise ValueError("|delta| must be smaller than the focal length")
    return layout.theta - math.copysign(math.degrees(math.atan(abs(delta) / layout.focal_length)), delta)


@dataclass(frozen=True)
class ApertureLattice:
    """Element centres of the square aperture.

    Element ``(i, j)`` sits at local coordinates ``u = (i - (n-1)/2) s``,
    ``v = (j - (n-1)/2) s``. With ``rotated`` the local frame is turned by
    45 degrees so that ``x = (u - v)/sqrt(2)``, ``y = (u + v)/sqrt(2)`` and
    the aperture diagonal lies along x.
    """

    n: int
    pitch: float
    rotated: bool = True

    @classmethod
    def from_layout(cls, layout: LayoutParams, rotated: bool = True) -> "ApertureLattice":
        return cls(layout.elements_per_side, layout.element_pitch, rotated)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def grid_pitch(self) -> float:
        """Pitch of the axis-aligned grid that holds every element on a node."""
        return self.pitch / math.sqrt(2.0) if self.rotated else self.pitch

    def index_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer node offsets ``(mx, my)`` of each element on the aligned grid.

        Positions are ``x = (mx - c) * grid_pitch`` with ``c`` from
        :meth:`node_center`, likewise for y.
        """
        i, j = np.meshgrid(np.arange(self.n), np.arange(self.n), indexing="ij")
        if self.rotated:
            return i - j + (self.n - 1), i + j
        return i, j

    def node_center(self) -> float:
        """Node offset of the aperture centre along each axis."""
        return float(self.n - 1) if self.rotated else (self.n - 1) / 2

    def node_span(self) -> int:
        """Number of aligned-grid nodes covered along each axis."""
        return 2 * self.n - 1 if self.rotated else self.n

    def positions(self) -> tuple[np.ndarray, np.ndarray]:
        mx, my = self.index_offsets()
        c = self.node_center()
        return (mx - c) * self.grid_pitch, (my - c) * self.grid_pitch

    def corners(self) -> list[tuple[int, int]]:
        last = self.n - 1
        return [(0, 0), (0, last), (last, 0), (last, last)]
