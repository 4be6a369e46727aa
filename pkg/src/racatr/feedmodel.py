"""Parametric feed illumination of the aperture.

The horn is modelled as a point source with a ``cos(psi)**q`` power-law
pattern about its boresight and spherical spreading, so an aperture point
``p`` sees ``cos(psi)**q / r * exp(-1j * k * r)`` with ``r = |p - feed|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c as C0
from scipy.optimize import brentq

from .layout import ApertureLattice, LayoutParams

Q_MAX = 1e4


@dataclass(frozen=True)
class FeedParams:
    """Feed phase centre, pointing and pattern.

    ``boresight`` defaults to the unit vector from the feed to the aperture
    centre.
    """

    position: tuple[float, float, float]
    frequency: float
    pattern_exponent: float = 0.0
    boresight: tuple[float, float, float] | None = None

    def __post_init__(self):
        if len(self.position) != 3:
            raise ValueError("position must be an (x, y, z) triple")
        if not self.position[2] > 0:
            raise ValueError("feed must sit above the aperture plane (z > 0)")
        if not self.pattern_exponent >= 0:
            raise ValueError("pattern_exponent must be non-negative")
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if self.boresight is None:
            p = np.asarray(self.position, dtype=float)
            object.__setattr__(self, "boresight", tuple(float(v) for v in -p / np.linalg.norm(p)))
        elif abs(np.linalg.norm(self.boresight) - 1.0) > 1e-12:
            raise ValueError("boresight must be a unit vector")

    @classmethod
    def from_layout(cls, layout: LayoutParams, pattern_exponent: float = 0.0,
                    frequency: float | None = None) -> "FeedParams":
        return cls(layout.feed_position,
                   layout.design_frequency if frequency is None else frequency,
                   pattern_exponent)

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi * self.frequency / C0

    def moved(self, dx: float = 0.0, dz: float = 0.0) -> "FeedParams":
        """Copy displaced by ``(dx, 0, dz)`` and re-aimed at the aperture centre."""
        x, y, z = self.position
        return replace(self, position=(x + dx, y, z + dz), boresight=None)


def _pattern(feed: FeedParams, x, y):
    v = np.stack(np.broadcast_arrays(np.asarray(x, dtype=float) - feed.position[0],
                                     np.asarray(y, dtype=float) - feed.position[1],
                                     np.full(np.shape(x), -feed.position[2])), axis=-1)
    r = np.linalg.norm(v, axis=-1)
    cos_psi = (v @ np.asarray(feed.boresight)) / r
    return r, cos_psi


def illuminate_points(feed: FeedParams, x, y) -> np.ndarray:
    """Complex incident field at aperture points ``(x, y, 0)``."""
    r, cos_psi = _pattern(feed, x, y)
    q = feed.pattern_exponent
    if q > 0:
        if np.any(cos_psi <= 0):
            bad = np.unravel_index(np.argmin(cos_psi), np.shape(cos_psi))
            raise ValueError(f"aperture point {bad} lies 90 degrees or more off the feed boresight")
        amp = cos_psi**q / r
    else:
        amp = 1.0 / r
    return amp * np.exp(-1j * feed.wavenumber * r)


def illuminate(feed: FeedParams, grid):
    """Incident field sampled on every node of a :class:`FieldGrid` at z = 0."""
    from .wavefield import FieldGrid

    x, y = grid.coordinates()
    return FieldGrid(illuminate_points(feed, x, y), grid.dx, grid.dy,
                     2 * math.pi / feed.wavenumber, 0.0, grid.origin)


def illuminate_lattice(feed: FeedParams, lattice: ApertureLattice) -> np.ndarray:
    """Incident field per aperture element, shaped like the lattice."""
    x, y = lattice.positions()
    return illuminate_points(feed, x, y)


def edge_taper_db(feed: FeedParams, lattice: ApertureLattice) -> float:
    """Illumination at the weakest aperture corner relative to the peak [dB]."""
    x, y = lattice.positions()
    r, cos_psi = _pattern(feed, x, y)
    # log domain: cos**q underflows for the large exponents the root finder probes
    level = feed.pattern_exponent * np.log10(np.clip(cos_psi, 1e-300, None)) - np.log10(r)
    corners = min(level[c] for c in lattice.corners())
    return 20 * float(corners - level.max())


def solve_q_for_edge_taper(layout: LayoutParams, taper_db: float,
                           rotated: bool = True) -> float:
    """Pattern exponent giving ``taper_db`` at the weakest aperture corner.

    Spherical spreading alone already tapers the corners; when that exceeds
    the request the isotropic pattern ``q = 0`` is returned.
    """
    if taper_db > 0:
        raise ValueError("taper_db must not be positive")
    lattice = ApertureLattice.from_layout(layout, rotated)

    def excess(q):
        return edge_taper_db(FeedParams.from_layout(layout, q), lattice) - taper_db

    if excess(0.0) <= 0:
        return 0.0
    if excess(Q_MAX) > 0:
        raise ValueError(f"edge taper {taper_db} dB is not reachable with q <= {Q_MAX:g}")
    return brentq(excess, 0.0, Q_MAX, xtol=1e-10, rtol=1e-12)
