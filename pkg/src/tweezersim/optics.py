"""Scalar diffraction model of the imaging system.

The mirror pattern is demagnified onto the atom plane, the coherent field is
low-passed by the diffraction-limited PSF, and the axial structure near the
retro mirror follows from angular-spectrum propagation of the image-plane
field plus its reflection.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import j1

from .constants import um
from .errors import ConfigError, PreconditionError
from .patterns import MirrorPattern

# first zero of J1 over pi: Airy radius = _AIRY_ZERO * lambda / (2 NA)
_J1_FIRST_ZERO = 3.8317059702075125


@dataclass(frozen=True)
class Illumination:
    """Trapping-beam profile across the device, normalized to peak 1.

    ``gaussian`` reproduces a stated relative intensity variation between the
    device centre and its corners.
    """

    profile: str = "uniform"
    relative_variation: float = 0.3

    def __post_init__(self):
        if self.profile not in ("uniform", "gaussian"):
            raise ConfigError(f"unknown illumination profile {self.profile!r}")
        if not 0 < self.relative_variation < 1:
            if self.profile == "gaussian":
                raise ConfigError("relative_variation must be in (0, 1)")

    def intensity(self, x: np.ndarray, y: np.ndarray, extent: tuple[float, float]) -> np.ndarray:
        """Relative intensity at image-plane coordinates (broadcastable x, y)."""
        if self.profile == "uniform":
            return np.ones(np.broadcast(x, y).shape)
        half_diag_sq = (extent[0] / 2) ** 2 + (extent[1] / 2) ** 2
        # exp(-a r^2) with intensity down by (1 - variation) at the corner
        a = -np.log(1.0 - self.relative_variation) / half_diag_sq
        return np.exp(-a * (x**2 + y**2))


@dataclass(frozen=True)
class OpticalSystem:
    demagnification: float = 57.0
    numerical_aperture: float = 0.52
    wavelength: float = 785e-9
    mirror_distance: float = 500e-6
    mirror_reflectivity: float = 1.0
    peak_intensity: float = 30e6  # W/m^2 for an all-on region (30 W/mm^2)
    illumination: Illumination = dc_field(default_factory=Illumination)

    def __post_init__(self):
        if not 0 < self.numerical_aperture < 1:
            raise ConfigError("numerical aperture must be in (0, 1)")
        if self.wavelength <= 0 or self.mirror_distance <= 0 or self.demagnification <= 0:
            raise ConfigError("lengths and demagnification must be positive")
        if not 0 <= self.mirror_reflectivity <= 1:
            raise ConfigError("mirror reflectivity must be in [0, 1]")
        if self.peak_intensity < 0:
            raise ConfigError("peak intensity must be non-negative")

    @property
    def airy_radius(self) -> float:
        """First zero of the PSF, approx 0.61 lambda / NA."""
        return _J1_FIRST_ZERO / (2 * np.pi) * self.wavelength / self.numerical_aperture


@dataclass
class ComplexField2D:
    """Coherent field amplitude on a transverse image-plane grid."""

    grid: np.ndarray  # complex (ny, nx), sqrt(W/m^2)
    spacing: float
    origin: tuple[float, float]  # coordinates of grid[0, 0]

    @property
    def x_coords(self) -> np.ndarray:
        return self.origin[0] + np.arange(self.grid.shape[1]) * self.spacing

    @property
    def y_coords(self) -> np.ndarray:
        return self.origin[1] + np.arange(self.grid.shape[0]) * self.spacing

    def intensity(self) -> np.ndarray:
        return np.abs(self.grid) ** 2


@dataclass
class IntensityField2D:
    grid: np.ndarray  # W/m^2, (ny, nx)
    spacing: float
    origin: tuple[float, float]

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 2:
            raise ConfigError("2-D intensity field expected")
        if self.spacing <= 0:
            raise ConfigError("spacing must be positive")
        if grid.min() < -1e-9 * max(grid.max(), 1.0):
            raise ConfigError("intensity must be non-negative")
        self.grid = np.maximum(grid, 0.0)

    @property
    def x_coords(self) -> np.ndarray:
        return self.origin[0] + np.arange(self.grid.shape[1]) * self.spacing

    @property
    def y_coords(self) -> np.ndarray:
        return self.origin[1] + np.arange(self.grid.shape[0]) * self.spacing


@dataclass
class IntensityField3D:
    """Stack of transverse intensity slices; z is relative to the image plane."""

    grid: np.ndarray  # W/m^2, (nz, ny, nx)
    spacing: float
    origin: tuple[float, float]
    z_coords: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 3:
            raise ConfigError("3-D intensity field expected")
        if grid.shape[0] != len(self.z_coords):
            raise ConfigError("z axis length mismatch")
        if grid.min() < -1e-9 * max(grid.max(), 1.0):
            raise ConfigError("intensity must be non-negative")
        self.grid = np.maximum(grid, 0.0)
        self.z_coords = np.asarray(self.z_coords, dtype=float)

    @property
    def z_step(self) -> float:
        return float(np.diff(self.z_coords).mean())

    @property
    def x_coords(self) -> np.ndarray:
        return self.origin[0] + np.arange(self.grid.shape[2]) * self.spacing

    @property
    def y_coords(self) -> np.ndarray:
        return self.origin[1] + np.arange(self.grid.shape[1]) * self.spacing


def psf_kernel(
    system: OpticalSystem,
    spacing: float,
    kind: str = "amplitude",
    shape: str = "airy",
    support_zeros: float = 8.0,
) -> np.ndarray:
    """Diffraction-limited PSF sampled on a square grid, normalized to unit sum.

    ``amplitude`` is the coherent response 2 J1(v)/v used when imaging the
    mirror pattern; ``intensity`` is its square, used to deposit fluorescence
    photons. ``shape='gaussian'`` substitutes a Gaussian of matched FWHM.
    """
    if kind not in ("amplitude", "intensity"):
        raise ConfigError(f"unknown psf kind {kind!r}")
    if shape not in ("airy", "gaussian"):
        raise ConfigError(f"unknown psf shape {shape!r}")
    if spacing <= 0:
        raise ConfigError("spacing must be positive")
    if spacing > system.airy_radius / 2:
        raise PreconditionError(
            f"grid spacing {spacing:.3g} m undersamples the PSF "
            f"(needs <= {system.airy_radius / 2:.3g} m)"
        )
    radius = support_zeros * system.airy_radius
    n = int(np.ceil(radius / spacing))
    coords = np.arange(-n, n + 1) * spacing
    r = np.hypot(coords[None, :], coords[:, None])
    v = 2 * np.pi * system.numerical_aperture / system.wavelength * r
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = np.where(v == 0, 1.0, 2.0 * j1(v) / np.where(v == 0, 1.0, v))
    kernel = amp if kind == "amplitude" else amp**2
    if shape == "gaussian":
        fwhm = _radial_fwhm(kernel, spacing)
        sigma = fwhm / (2 * np.sqrt(2 * np.log(2)))
        kernel = np.exp(-(r**2) / (2 * sigma**2))
    return kernel / kernel.sum()


def _radial_fwhm(kernel: np.ndarray, spacing: float) -> float:
    """FWHM of a centred radial kernel along its middle row."""
    n = kernel.shape[0] // 2
    profile = kernel[n, n:]
    half = profile[0] / 2.0
    below = np.nonzero(profile < half)[0]
    if len(below) == 0:
        raise PreconditionError("kernel support too small to measure FWHM")
    i = below[0]
    # linear interpolation between the bracketing samples
    frac = (profile[i - 1] - half) / (profile[i - 1] - profile[i])
    return 2 * (i - 1 + frac) * spacing


def image_plane_amplitude(
    pattern: MirrorPattern,
    system: OpticalSystem,
    oversample: int = 2,
    psf_shape: str = "airy",
) -> ComplexField2D:
    """Coherent image-plane field of a mirror pattern.

    Each mirror maps to an ``oversample`` x ``oversample`` cell patch at the
    demagnified pitch; field amplitude is the square root of the illuminated
    reflectance, convolved with the coherent PSF and scaled so that an all-on
    region reaches sqrt(peak_intensity).
    """
    if oversample < 1:
        raise ConfigError("oversample must be >= 1")
    device = pattern.device
    spacing = device.image_pitch / oversample
    if spacing > system.airy_radius / 2:
        raise PreconditionError(
            f"image grid spacing {spacing:.3g} m undersamples the PSF"
        )
    x, y = device.image_coords()
    illum = system.illumination.intensity(x[None, :], y[:, None], device.image_extent)
    amp = np.sqrt(illum) * pattern.grid.astype(float)
    amp = np.repeat(np.repeat(amp, oversample, axis=0), oversample, axis=1)
    kernel = psf_kernel(system, spacing, kind="amplitude", shape=psf_shape)
    out = fftconvolve(amp, kernel, mode="same")
    out = out * np.sqrt(system.peak_intensity)
    x0 = -(out.shape[1] - 1) / 2.0 * spacing
    y0 = -(out.shape[0] - 1) / 2.0 * spacing
    return ComplexField2D(grid=out.astype(complex), spacing=spacing, origin=(x0, y0))


def image_plane_intensity(
    pattern: MirrorPattern,
    system: OpticalSystem,
    oversample: int = 2,
    psf_shape: str = "airy",
) -> IntensityField2D:
    """Trapping-light intensity in the image plane (W/m^2)."""
    field = image_plane_amplitude(pattern, system, oversample, psf_shape)
    return IntensityField2D(
        grid=np.abs(field.grid) ** 2, spacing=field.spacing, origin=field.origin
    )


def _angular_spectrum_phase(shape, spacing, wavelength):
    """kz grid (rad/m) and propagating-wave mask for a padded field."""
    fy = np.fft.fftfreq(shape[0], d=spacing)
    fx = np.fft.fftfreq(shape[1], d=spacing)
    fsq = fx[None, :] ** 2 + fy[:, None] ** 2
    k = 2 * np.pi / wavelength
    arg = 1.0 - (wavelength**2) * fsq
    kz = k * np.sqrt(np.maximum(arg, 0.0))
    return kz, arg > 0.0, fsq


def _bandlimit_mask(fsq, spacing, shape, wavelength, distance):
    """Band limit against transfer-function aliasing for long hops."""
    if distance == 0:
        return np.ones_like(fsq, dtype=bool)
    width = min(shape[0], shape[1]) * spacing
    f_max = 1.0 / (wavelength * np.sqrt((2.0 * abs(distance) / width) ** 2 + 1.0))
    return fsq <= f_max**2


def propagate(field: ComplexField2D, wavelength: float, distance: float, pad: int = 2,
              bandlimit: bool = True) -> ComplexField2D:
    """Angular-spectrum propagation of a transverse field by ``distance``."""
    ny, nx = field.grid.shape
    py, px = ny * (pad - 1) // 2, nx * (pad - 1) // 2
    padded = np.pad(field.grid, ((py, py), (px, px)))
    kz, prop, fsq = _angular_spectrum_phase(padded.shape, field.spacing, wavelength)
    spectrum = np.fft.fft2(padded)
    h = np.where(prop, np.exp(1j * kz * distance), 0.0)
    if bandlimit:
        h = h * _bandlimit_mask(fsq, field.spacing, padded.shape, wavelength, distance)
    out = np.fft.ifft2(spectrum * h)[py : py + ny, px : px + nx]
    return ComplexField2D(grid=out, spacing=field.spacing, origin=field.origin)


def axial_standing_wave(
    field: ComplexField2D,
    system: OpticalSystem,
    z_min: float,
    z_max: float,
    z_samples: int,
    pad: int = 2,
) -> IntensityField3D:
    """Total intensity |E_fwd + r E_refl|^2 on z slices around the image plane.

    z is measured from the image plane; the mirror sits at z =
    -mirror_distance. The beam propagates towards the mirror, reflects with a
    pi phase jump scaled by the amplitude reflectivity, and interferes with
    itself, producing lambda/2 fringes.
    """
    if not z_min <= 0.0 <= z_max:
        raise ConfigError("z range must span the image plane (z = 0)")
    if z_samples < 2:
        raise ConfigError("need at least two z samples")
    z = np.linspace(z_min, z_max, z_samples)
    dz = z[1] - z[0]
    if dz > system.wavelength / 8:
        raise PreconditionError(
            f"z step {dz:.3g} m cannot resolve the lambda/2 standing wave "
            f"(needs <= {system.wavelength / 8:.3g} m)"
        )
    ny, nx = field.grid.shape
    py, px = ny * (pad - 1) // 2, nx * (pad - 1) // 2
    padded = np.pad(field.grid, ((py, py), (px, px)))
    kz, prop, fsq = _angular_spectrum_phase(padded.shape, field.spacing, system.wavelength)
    spectrum = np.fft.fft2(padded)
    r = system.mirror_reflectivity
    d_mirror = system.mirror_distance
    slices = np.empty((z_samples, ny, nx))
    for i, zi in enumerate(z):
        # forward beam travels towards the mirror: path from image plane = -z
        h = np.where(prop, np.exp(1j * kz * (-zi)), 0.0)
        h *= _bandlimit_mask(fsq, field.spacing, padded.shape, system.wavelength, zi)
        if r > 0:
            # reflected leg: image plane -> mirror -> back up to z
            dist = 2.0 * d_mirror + zi
            h_r = np.where(prop, np.exp(1j * kz * dist), 0.0)
            h_r *= _bandlimit_mask(fsq, field.spacing, padded.shape, system.wavelength, dist)
            h = h - r * h_r
        e_tot = np.fft.ifft2(spectrum * h)[py : py + ny, px : px + nx]
        slices[i] = np.abs(e_tot) ** 2
    return IntensityField3D(grid=slices, spacing=field.spacing, origin=field.origin, z_coords=z)


def visibility(field: IntensityField3D, z: float, core_threshold: float = 0.5) -> float:
    """Standing-wave fringe visibility around height z, averaged over the trap core.

    The core is the transverse region holding at least ``core_threshold`` of
    the peak intensity (taken from the z-maximum projection); the visibility
    is (Imax - Imin)/(Imax + Imin) of the core-averaged axial profile within
    one fringe period centred on z.
    """
    zc = field.z_coords
    if not zc.min() <= z <= zc.max():
        raise ConfigError("z outside the field range")
    dz = field.z_step
    wavelength_guess = _fringe_period(field) * 2.0
    if dz > wavelength_guess / 8:
        raise PreconditionError("z sampling too coarse to resolve fringes")
    proj = field.grid.max(axis=0)
    core = proj >= core_threshold * proj.max()
    if not core.any():
        raise PreconditionError("empty trap core")
    profile = field.grid[:, core].mean(axis=1)
    half_window = wavelength_guess / 4.0
    sel = np.abs(zc - z) <= half_window + dz / 2
    if sel.sum() < 3:
        raise PreconditionError("z window holds too few samples")
    i_max = profile[sel].max()
    i_min = profile[sel].min()
    if i_max + i_min == 0:
        return 0.0
    return float((i_max - i_min) / (i_max + i_min))


def _fringe_period(field: IntensityField3D) -> float:
    """Fringe period estimate; falls back to lambda/2 at 785 nm if flat."""
    proj = field.grid.max(axis=0)
    iy, ix = np.unravel_index(np.argmax(proj), proj.shape)
    profile = field.grid[:, iy, ix]
    spread = profile.max() - profile.min()
    if spread < 1e-12 * max(profile.max(), 1.0):
        return 785e-9 / 2
    peaks = _local_maxima(profile)
    if len(peaks) < 2:
        return 785e-9 / 2
    return float(np.diff(field.z_coords[peaks]).mean())


def _local_maxima(y: np.ndarray) -> np.ndarray:
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    return np.nonzero(inner)[0] + 1


def fringe_period(field: IntensityField3D) -> float:
    """Measured axial fringe period near the brightest transverse cell (m)."""
    period = _fringe_period(field)
    return period


def transverse_power(field: IntensityField3D) -> np.ndarray:
    """Transversely integrated power per slice (W), for energy bookkeeping."""
    return field.grid.sum(axis=(1, 2)) * field.spacing**2


def spot_fwhm(field: IntensityField2D) -> float:
    """FWHM of an isolated spot through its peak row/column (m)."""
    grid = field.grid
    iy, ix = np.unravel_index(np.argmax(grid), grid.shape)
    fwhm_x = _profile_fwhm(grid[iy, :], field.spacing)
    fwhm_y = _profile_fwhm(grid[:, ix], field.spacing)
    return 0.5 * (fwhm_x + fwhm_y)


def _profile_fwhm(profile: np.ndarray, spacing: float) -> float:
    peak = profile.max()
    ipk = int(np.argmax(profile))
    half = peak / 2.0
    left = ipk
    while left > 0 and profile[left] > half:
        left -= 1
    right = ipk
    while right < len(profile) - 1 and profile[right] > half:
        right += 1
    if profile[left] > half or profile[right] > half:
        raise PreconditionError("profile does not fall below half maximum")
    lf = left + (half - profile[left]) / (profile[left + 1] - profile[left])
    rf = right - (half - profile[right]) / (profile[right - 1] - profile[right])
    return (rf - lf) * spacing


def psf_first_zero_radius(kernel: np.ndarray, spacing: float) -> float:
    """Radius of the first zero crossing of a centred kernel's radial profile."""
    n = kernel.shape[0] // 2
    profile = kernel[n, n:]
    sign_change = np.nonzero(profile <= 0)[0]
    if len(sign_change) == 0:
        raise PreconditionError("no zero crossing within kernel support")
    i = sign_change[0]
    frac = profile[i - 1] / (profile[i - 1] - profile[i])
    return (i - 1 + frac) * spacing


__all__ = [
    "Illumination",
    "OpticalSystem",
    "ComplexField2D",
    "IntensityField2D",
    "IntensityField3D",
    "psf_kernel",
    "image_plane_amplitude",
    "image_plane_intensity",
    "propagate",
    "axial_standing_wave",
    "visibility",
    "fringe_period",
    "transverse_power",
    "spot_fwhm",
    "psf_first_zero_radius",
]
