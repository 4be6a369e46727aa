"""Plane-wave-spectrum propagation between parallel z-planes.

Time convention is ``exp(+1j*omega*t)``: a wave travelling towards +z
carries ``exp(-1j*kz*z)``, so forward propagation multiplies each spectral
component by ``exp(-1j*kz*dz)``. Spectral coefficients use the unitary
(``norm="ortho"``) DFT with component ``(kx, ky)`` multiplying
``exp(+1j*(kx*(x - x0) + ky*(y - y0)))``.

Arrays are indexed ``samples[iy, ix]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class FieldGrid:
    """Complex scalar field sampled on a uniform grid in the plane ``z = plane_z``.

    Parameters
    ----------
    samples : ndarray of complex, shape (ny, nx)
    dx, dy : float
        Sample pitch [m].
    wavelength : float
        Free-space wavelength [m].
    plane_z : float
        Height of the sampling plane [m].
    origin : (float, float)
        Coordinates of ``samples[0, 0]`` [m].
    """

    samples: np.ndarray
    dx: float
    dy: float
    wavelength: float
    plane_z: float = 0.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        a = np.array(self.samples, dtype=complex)
        a.flags.writeable = False
        object.__setattr__(self, "samples", a)
        if a.ndim != 2 or min(a.shape) < 2:
            raise ValueError(f"samples must be 2-D with at least 2x2 entries, got {a.shape}")
        if not (self.dx > 0 and self.dy > 0 and self.wavelength > 0):
            raise ValueError("dx, dy and wavelength must be positive")
        if not np.isfinite(a).all():
            raise ValueError("samples must be finite")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def ny(self) -> int:
        return self.samples.shape[0]

    @property
    def nx(self) -> int:
        return self.samples.shape[1]

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi / self.wavelength

    def x(self) -> np.ndarray:
        return self.origin[0] + self.dx * np.arange(self.nx)

    def y(self) -> np.ndarray:
        return self.origin[1] + self.dy * np.arange(self.ny)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Sample-centre coordinate arrays ``(X, Y)`` shaped like ``samples``."""
        return np.meshgrid(self.x(), self.y())

    def power(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.dx * self.dy)

    def with_samples(self, samples, **changes) -> "FieldGrid":
        return replace(self, samples=samples, **changes)


@dataclass(frozen=True)
class AngularSpectrum:
    """Unitary DFT coefficients of a :class:`FieldGrid`, in FFT order."""

    coefficients: np.ndarray
    dx: float
    dy: float
    wavelength: float
    plane_z: float = 0.0
    origin: tuple[float, float] = (0.0, 0.0)

    def kx(self) -> np.ndarray:
        return 2 * math.pi * np.fft.fftfreq(self.coefficients.shape[1], self.dx)

    def ky(self) -> np.ndarray:
        return 2 * math.pi * np.fft.fftfreq(self.coefficients.shape[0], self.dy)

    def power(self) -> float:
        # unitary transform: coefficient power carries the sample pitch of the source
        return float(np.sum(np.abs(self.coefficients) ** 2) * self.dx * self.dy)


def to_spectrum(field: FieldGrid) -> AngularSpectrum:
    coeffs = sfft.fft2(field.samples, norm="ortho")
    return AngularSpectrum(coeffs, field.dx, field.dy, field.wavelength,
                           field.plane_z, field.origin)


def from_spectrum(spec: AngularSpectrum) -> FieldGrid:
    samples = sfft.ifft2(spec.coefficients, norm="ortho")
    return FieldGrid(samples, spec.dx, spec.dy, spec.wavelength, spec.plane_z, spec.origin)


@lru_cache(maxsize=32)
def _kz(ny: int, nx: int, dy: float, dx: float, wavelength: float):
    kx = 2 * math.pi * np.fft.fftfreq(nx, dx)
    ky = 2 * math.pi * np.fft.fftfreq(ny, dy)
    k = 2 * math.pi / wavelength
    kt2 = kx[None, :] ** 2 + ky[:, None] ** 2
    propagating = kt2 <= k * k
    kz = np.sqrt(np.where(propagating, k * k - kt2, 0.0))
    kz.flags.writeable = False
    propagating.flags.writeable = False
    return kz, propagating


def transfer_function(ny: int, nx: int, dy: float, dx: float, wavelength: float,
                      dz: float) -> np.ndarray:
    """Spectral multiplier ``exp(-1j*kz*dz)`` in the layout of :func:`to_spectrum`.

    Evanescent components are zeroed for any non-zero ``dz``.
    """
    kz, propagating = _kz(ny, nx, dy, dx, wavelength)
    if dz == 0:
        return np.ones((ny, nx), dtype=complex)
    return np.where(propagating, np.exp(-1j * kz * dz), 0.0)


def propagating_mask(field: FieldGrid) -> np.ndarray:
    return _kz(field.ny, field.nx, field.dy, field.dx, field.wavelength)[1]


def propagate(field: FieldGrid, dz: float) -> FieldGrid:
    """Propagate ``field`` by ``dz`` along z (negative ``dz`` goes backwards)."""
    if dz == 0:
        return field
    H = transfer_function(field.ny, field.nx, field.dy, field.dx, field.wavelength, dz)
    spec = to_spectrum(field)
    out = from_spectrum(replace(spec, coefficients=spec.coefficients * H))
    return replace(out, plane_z=field.plane_z + dz)


def plane_wave(nx: int, ny: int, dx: float, dy: float, wavelength: float,
               kx_index: int = 0, ky_index: int = 0, origin=(0.0, 0.0)) -> FieldGrid:
    """Unit plane wave on a single spectral bin, ``exp(+1j*(kx*x + ky*y))``.

    The bin indices follow :func:`numpy.fft.fftfreq`, so a negative index
    addresses a negative wavenumber.
    """
    kx = 2 * math.pi * kx_index / (nx * dx)
    ky = 2 * math.pi * ky_index / (ny * dy)
    x = dx * np.arange(nx)
    y = dy * np.arange(ny)
    samples = np.exp(1j * (kx * x[None, :] + ky * y[:, None]))
    return FieldGrid(samples, dx, dy, wavelength, 0.0, origin)


def plane_wave_at_angle(nx: int, ny: int, dx: float, dy: float, wavelength: float,
                        theta_deg: float) -> tuple[FieldGrid, float]:
    """Plane wave on the spectral bin nearest ``kx = k sin(theta)``.

    Returns the field and the exact angle of the bin actually used.
    """
    k = 2 * math.pi / wavelength
    m = int(round(k * math.sin(math.radians(theta_deg)) * nx * dx / (2 * math.pi)))
    field = plane_wave(nx, ny, dx, dy, wavelength, kx_index=m)
    actual = math.degrees(math.asin(2 * math.pi * m / (nx * dx) / k))
    return field, actual


def embed(field: FieldGrid, target_nx: int, target_ny: int,
          offset: tuple[int, int] = (0, 0)) -> FieldGrid:
    """Zero-pad ``field`` into a larger grid.

    ``offset = (ix, iy)`` is the target index of the source's ``[0, 0]``
    sample; the origin is shifted so physical coordinates are preserved.
    """
    ix, iy = offset
    if ix < 0 or iy < 0 or ix + field.nx > target_nx or iy + field.ny > target_ny:
        raise ValueError(
            f"{field.ny}x{field.nx} field at offset {offset} does not fit in "
            f"{target_ny}x{target_nx}")
    out = np.zeros((target_ny, target_nx), dtype=complex)
    out[iy:iy + field.ny, ix:ix + field.nx] = field.samples
    origin = (field.origin[0] - ix * field.dx, field.origin[1] - iy * field.dy)
    return replace(field, samples=out, origin=origin)


def window_slices(field: FieldGrid, center, size) -> tuple[slice, slice]:
    """Index slices ``(rows, cols)`` of samples whose centres fall in the window."""
    (cx, cy), (w, h) = center, size
    eps = 1e-9 * max(field.dx, field.dy)

    def span(coords, c, half, axis):
        lo, hi = c - half, c + half
        if lo < coords[0] - eps or hi > coords[-1] + eps:
            raise ValueError(
                f"window [{lo:.6g}, {hi:.6g}] along {axis} exceeds grid extent "
                f"[{coords[0]:.6g}, {coords[-1]:.6g}]")
        idx = np.flatnonzero((coords >= lo - eps) & (coords <= hi + eps))
        if idx.size < 2:
            raise ValueError(f"window selects {idx.size} sample(s) along {axis}; need at least 2")
        return slice(int(idx[0]), int(idx[-1]) + 1)

    return span(field.y(), cy, h / 2, "y"), span(field.x(), cx, w / 2, "x")


def extract_window(field: FieldGrid, center, size) -> FieldGrid:
    """Sub-grid of samples whose centres fall within a ``size = (w, h)`` box."""
    rows, cols = window_slices(field, center, size)
    origin = (field.origin[0] + cols.start * field.dx, field.origin[1] + rows.start * field.dy)
    return replace(field, samples=field.samples[rows, cols], origin=origin)


def gaussian_beam_radius(field: FieldGrid) -> float:
    """``1/e^2`` intensity radius from the second moment along x [m]."""
    X, _ = field.coordinates()
    intensity = np.abs(field.samples) ** 2
    total = intensity.sum()
    xc = (X * intensity).sum() / total
    return 2 * math.sqrt(((X - xc) ** 2 * intensity).sum() / total)


def write_field_csv(field: FieldGrid, path) -> None:
    """Write ``x_m,y_m,re,im`` rows with a metadata comment header."""
    X, Y = field.coordinates()
    with open(path, "w", newline="") as fh:
        fh.write(f"# nx={field.nx} ny={field.ny} dx={field.dx!r} dy={field.dy!r} "
                 f"wavelength={field.wavelength!r} plane_z={field.plane_z!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_m", "y_m", "re", "im"])
        for x, y, v in zip(X.ravel(), Y.ravel(), field.samples.ravel()):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(v.real)), repr(float(v.imag))])


def read_field_csv(path) -> FieldGrid:
    with open(path) as fh:
        meta_line = fh.readline()
        if not meta_line.startswith("#"):
            raise ValueError(f"{path}: missing metadata header line")
        meta = dict(item.split("=") for item in meta_line[1:].split())
        rows = list(csv.DictReader(fh))
    nx, ny = int(meta["nx"]), int(meta["ny"])
    if len(rows) != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} rows, found {len(rows)}")
    vals = np.array([complex(float(r["re"]), float(r["im"])) for r in rows]).reshape(ny, nx)
    origin = (float(rows[0]["x_m"]), float(rows[0]["y_m"]))
    return FieldGrid(vals, float(meta["dx"]), float(meta["dy"]), float(meta["wavelength"]),
                     float(meta["plane_z"]), origin)
