"""Binary micromirror patterns: trap-shape rasterization and dithering.

The device is a grid of on/off mirrors. Target intensity maps live on the
same grid but hold continuous levels in [0, 1]; dithering quantizes them to
binary mirror states, trading spatial resolution for intensity resolution
(a diffraction-limited spot covers a 4x4 mirror block, so 16 effective
levels).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, OutOfBoundsError

# classic 4x4 index (Bayer) matrix; a cell switches on when its index is
# below the block's target on-count, so index 0 fills first
BAYER4 = np.array(
    [
        [0, 8, 2, 10],
        [12, 4, 14, 6],
        [3, 11, 1, 9],
        [15, 7, 13, 5],
    ],
    dtype=np.int64,
)

FRAME_RATE_MIN = 4e3
FRAME_RATE_MAX = 20e3


@dataclass(frozen=True)
class DeviceGeometry:
    """Micromirror device and the imaging demagnification it is used with.

    Image-plane coordinates are metres, origin at the centre of the mirror
    array, x along columns and y along rows.
    """

    rows: int = 768
    cols: int = 1024
    pitch: float = 13.7e-6
    demagnification: float = 57.0

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ConfigError("device must have positive dimensions")
        if self.pitch <= 0 or self.demagnification <= 0:
            raise ConfigError("pitch and demagnification must be positive")

    @property
    def image_pitch(self) -> float:
        """Mirror pitch referred to the image plane (m)."""
        return self.pitch / self.demagnification

    @property
    def image_extent(self) -> tuple[float, float]:
        """(width, height) of the device footprint in the image plane (m)."""
        return self.cols * self.image_pitch, self.rows * self.image_pitch

    def image_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Image-plane cell-centre coordinates (x for columns, y for rows)."""
        p = self.image_pitch
        x = (np.arange(self.cols) - (self.cols - 1) / 2.0) * p
        y = (np.arange(self.rows) - (self.rows - 1) / 2.0) * p
        return x, y


# ---------------------------------------------------------------------------
# shape specs (image-plane metres)
# ---------------------------------------------------------------------------


def _rotate(x, y, angle):
    c, s = np.cos(angle), np.sin(angle)
    return c * x + s * y, -s * x + c * y


@dataclass(frozen=True)
class Disk:
    radius: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError("disk radius must be positive")

    def bounds(self):
        cx, cy = self.center
        r = self.radius
        return cx - r, cx + r, cy - r, cy + r

    def profile(self, x, y):
        cx, cy = self.center
        return (((x - cx) ** 2 + (y - cy) ** 2) <= self.radius**2).astype(float)


@dataclass(frozen=True)
class Annulus:
    inner_radius: float
    outer_radius: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0 < self.inner_radius < self.outer_radius:
            raise ConfigError("annulus needs 0 < inner < outer radius")

    def bounds(self):
        cx, cy = self.center
        r = self.outer_radius
        return cx - r, cx + r, cy - r, cy + r

    def profile(self, x, y):
        cx, cy = self.center
        r2 = (x - cx) ** 2 + (y - cy) ** 2
        return ((r2 >= self.inner_radius**2) & (r2 <= self.outer_radius**2)).astype(float)


@dataclass(frozen=True)
class Line:
    """Flat-top rectangular stripe; ``angle`` orients its long axis."""

    length: float
    width: float
    center: tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ConfigError("line length and width must be positive")

    def bounds(self):
        cx, cy = self.center
        hx = abs(np.cos(self.angle)) * self.length / 2 + abs(np.sin(self.angle)) * self.width / 2
        hy = abs(np.sin(self.angle)) * self.length / 2 + abs(np.cos(self.angle)) * self.width / 2
        return cx - hx, cx + hx, cy - hy, cy + hy

    def profile(self, x, y):
        cx, cy = self.center
        u, v = _rotate(x - cx, y - cy, self.angle)
        return ((np.abs(u) <= self.length / 2) & (np.abs(v) <= self.width / 2)).astype(float)


@dataclass(frozen=True)
class DiskGrid:
    """Rectangular array of identical disks (rows x cols, fixed spacing)."""

    grid_rows: int
    grid_cols: int
    spacing: float
    radius: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ConfigError("disk grid needs at least one row and column")
        if self.spacing <= 0 or self.radius <= 0:
            raise ConfigError("spacing and radius must be positive")

    def centers(self):
        cx, cy = self.center
        xs = (np.arange(self.grid_cols) - (self.grid_cols - 1) / 2.0) * self.spacing + cx
        ys = (np.arange(self.grid_rows) - (self.grid_rows - 1) / 2.0) * self.spacing + cy
        return [(x0, y0) for y0 in ys for x0 in xs]

    def bounds(self):
        cx, cy = self.center
        hx = (self.grid_cols - 1) / 2.0 * self.spacing + self.radius
        hy = (self.grid_rows - 1) / 2.0 * self.spacing + self.radius
        return cx - hx, cx + hx, cy - hy, cy + hy

    def profile(self, x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        r2 = self.radius**2
        for x0, y0 in self.centers():
            out = np.maximum(out, ((x - x0) ** 2 + (y - y0) ** 2 <= r2).astype(float))
        return out


@dataclass(frozen=True)
class Star:
    """Regular star polygon (outer radius = circumradius)."""

    points: int
    circumradius: float
    inner_fraction: float = 0.382  # pentagram proportion
    center: tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0

    def __post_init__(self):
        if self.points < 3:
            raise ConfigError("star needs at least 3 points")
        if self.circumradius <= 0 or not 0 < self.inner_fraction < 1:
            raise ConfigError("star radii invalid")

    def vertices(self) -> np.ndarray:
        n = self.points
        cx, cy = self.center
        ang = self.angle + np.pi / 2 + np.arange(2 * n) * np.pi / n
        rad = np.where(np.arange(2 * n) % 2 == 0, self.circumradius, self.inner_fraction * self.circumradius)
        return np.column_stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)])

    def bounds(self):
        cx, cy = self.center
        r = self.circumradius
        return cx - r, cx + r, cy - r, cy + r

    def profile(self, x, y):
        return _points_in_polygon(x, y, self.vertices()).astype(float)


@dataclass(frozen=True)
class HarmonicChannel:
    """Elongated harmonic intensity profile, clamped to zero outside its ellipse.

    Value is max(0, 1 - (u/half_length)^2 - (v/half_width)^2) in channel
    coordinates, with u along the long axis (``angle``). A round harmonic
    trap is the special case half_length == half_width == waist.
    """

    half_length: float
    half_width: float
    center: tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0

    def __post_init__(self):
        if self.half_length <= 0 or self.half_width <= 0:
            raise ConfigError("channel half widths must be positive")

    def bounds(self):
        cx, cy = self.center
        hx = abs(np.cos(self.angle)) * self.half_length + abs(np.sin(self.angle)) * self.half_width
        hy = abs(np.sin(self.angle)) * self.half_length + abs(np.cos(self.angle)) * self.half_width
        return cx - hx, cx + hx, cy - hy, cy + hy

    def profile(self, x, y):
        cx, cy = self.center
        u, v = _rotate(x - cx, y - cy, self.angle)
        val = 1.0 - (u / self.half_length) ** 2 - (v / self.half_width) ** 2
        return np.maximum(val, 0.0)


def round_trap(waist: float, center=(0.0, 0.0)) -> HarmonicChannel:
    """Round harmonic trap of the given waist."""
    return HarmonicChannel(half_length=waist, half_width=waist, center=center)


@dataclass(frozen=True)
class Union:
    members: tuple = ()

    def __post_init__(self):
        if len(self.members) == 0:
            raise ConfigError("union needs at least one member")

    def bounds(self):
        bb = np.array([m.bounds() for m in self.members])
        return bb[:, 0].min(), bb[:, 1].max(), bb[:, 2].min(), bb[:, 3].max()

    def profile(self, x, y):
        out = self.members[0].profile(x, y)
        for m in self.members[1:]:
            out = np.maximum(out, m.profile(x, y))
        return out


ShapeSpec = Disk | Annulus | Line | DiskGrid | Star | HarmonicChannel | Union


def _points_in_polygon(x, y, verts):
    """Even-odd crossing test, vectorized over point arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    n = len(verts)
    j = n - 1
    for i in range(n):
        xi, yi = verts[i]
        xj, yj = verts[j]
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
        inside ^= crosses & (x < x_cross)
        j = i
    return inside


# ---------------------------------------------------------------------------
# grid types
# ---------------------------------------------------------------------------


@dataclass
class MirrorPattern:
    """Binary mirror state for one displayed frame."""

    grid: np.ndarray
    device: DeviceGeometry = field(default_factory=DeviceGeometry)

    def __post_init__(self):
        grid = np.asarray(self.grid)
        if grid.ndim != 2:
            raise ConfigError("mirror grid must be 2-D")
        if grid.dtype != bool:
            vals = np.unique(grid)
            if not np.all(np.isin(vals, (0, 1))):
                raise ConfigError("mirror grid must be binary (0/1)")
            grid = grid.astype(bool)
        if grid.shape != (self.device.rows, self.device.cols):
            raise ConfigError(
                f"grid shape {grid.shape} does not match device "
                f"({self.device.rows} x {self.device.cols})"
            )
        self.grid = grid

    @property
    def on_count(self) -> int:
        return int(self.grid.sum())

    def __eq__(self, other):
        if not isinstance(other, MirrorPattern):
            return NotImplemented
        return self.device == other.device and np.array_equal(self.grid, other.grid)


@dataclass
class TargetIntensityMap:
    """Continuous target levels in [0, 1] on the mirror grid."""

    grid: np.ndarray
    device: DeviceGeometry = field(default_factory=DeviceGeometry)
    annotation: ShapeSpec | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 2:
            raise ConfigError("target map must be 2-D")
        if grid.shape != (self.device.rows, self.device.cols):
            raise ConfigError(
                f"map shape {grid.shape} does not match device "
                f"({self.device.rows} x {self.device.cols})"
            )
        if grid.min() < -1e-12 or grid.max() > 1 + 1e-12:
            raise ConfigError("target map values must lie in [0, 1]")
        self.grid = np.clip(grid, 0.0, 1.0)


@dataclass
class FrameSequence:
    """Ordered mirror patterns played back at a fixed frame rate."""

    frames: list[MirrorPattern]
    frame_rate: float

    def __post_init__(self):
        if not self.frames:
            raise ConfigError("frame sequence needs at least one frame")
        if not FRAME_RATE_MIN <= self.frame_rate <= FRAME_RATE_MAX:
            raise ConfigError(
                f"frame rate {self.frame_rate:g} Hz outside device range "
                f"[{FRAME_RATE_MIN:g}, {FRAME_RATE_MAX:g}] Hz"
            )
        shape0 = self.frames[0].grid.shape
        for f in self.frames[1:]:
            if f.grid.shape != shape0:
                raise ConfigError("all frames must share dimensions")

    @property
    def frame_time(self) -> float:
        return 1.0 / self.frame_rate

    @property
    def duration(self) -> float:
        return len(self.frames) / self.frame_rate

    def frame_index_at(self, t: float) -> int:
        """Index of the frame displayed at time t (clamped to the last frame)."""
        idx = int(np.floor(t * self.frame_rate))
        return min(max(idx, 0), len(self.frames) - 1)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def rasterize_primitive(shape: ShapeSpec, device: DeviceGeometry | None = None) -> TargetIntensityMap:
    """Sample a shape spec onto the mirror grid as a target intensity map.

    Shape coordinates are image-plane metres; the demagnification stored in
    the device geometry converts them to mirror cells. Raises
    OutOfBoundsError when the shape does not fit the device footprint.
    """
    device = device or DeviceGeometry()
    xmin, xmax, ymin, ymax = shape.bounds()
    w, h = device.image_extent
    if xmin < -w / 2 or xmax > w / 2 or ymin < -h / 2 or ymax > h / 2:
        raise OutOfBoundsError(
            f"shape bounds ({xmin:.3g}..{xmax:.3g}, {ymin:.3g}..{ymax:.3g}) m "
            f"exceed device footprint ({w:.3g} x {h:.3g}) m"
        )
    x, y = device.image_coords()
    grid = shape.profile(x[None, :], y[:, None])
    grid = np.clip(np.asarray(grid, dtype=float), 0.0, 1.0)
    return TargetIntensityMap(grid=grid, device=device, annotation=shape)


def _dither_ordered(values: np.ndarray) -> np.ndarray:
    """Per 4x4 block: switch on round(16 * block mean) cells in Bayer order."""
    rows, cols = values.shape
    pr = (-rows) % 4
    pc = (-cols) % 4
    padded = np.pad(values, ((0, pr), (0, pc))) if (pr or pc) else values
    nr, nc = padded.shape
    blocks = padded.reshape(nr // 4, 4, nc // 4, 4)
    counts = np.rint(blocks.mean(axis=(1, 3)) * 16.0).astype(np.int64)
    on = BAYER4[None, :, None, :] < counts[:, None, :, None]
    out = on.reshape(nr, nc)
    return out[:rows, :cols]


def _dither_error_diffusion(values: np.ndarray) -> np.ndarray:
    """Floyd-Steinberg error diffusion, row-major scan."""
    work = values.astype(float).copy()
    rows, cols = work.shape
    out = np.zeros((rows, cols), dtype=bool)
    for r in range(rows):
        row = work[r]
        below = work[r + 1] if r + 1 < rows else None
        for c in range(cols):
            old = row[c]
            new = old >= 0.5
            out[r, c] = new
            err = old - float(new)
            if c + 1 < cols:
                row[c + 1] += err * (7 / 16)
            if below is not None:
                if c > 0:
                    below[c - 1] += err * (3 / 16)
                below[c] += err * (5 / 16)
                if c + 1 < cols:
                    below[c + 1] += err * (1 / 16)
    return out


def dither(target: TargetIntensityMap, method: str = "ordered") -> MirrorPattern:
    """Quantize a target intensity map to a binary mirror pattern.

    ``ordered`` (default) switches on round(16 * mean) mirrors per 4x4 block,
    placed by the Bayer matrix; deterministic and strictly local.
    ``error_diffusion`` uses Floyd-Steinberg, smoother on large gradients.
    """
    values = np.clip(target.grid, 0.0, 1.0)
    if method == "ordered":
        out = _dither_ordered(values)
    elif method == "error_diffusion":
        out = _dither_error_diffusion(values)
    else:
        raise ConfigError(f"unknown dither method {method!r}")
    return MirrorPattern(grid=out, device=target.device)


def compose(maps: Sequence[TargetIntensityMap], mode: str = "max") -> TargetIntensityMap:
    """Cellwise combination of target maps (``max`` puts traps side by side)."""
    if not maps:
        raise ConfigError("compose needs at least one map")
    if mode != "max":
        raise ConfigError(f"unsupported compose mode {mode!r}")
    shape0 = maps[0].grid.shape
    for m in maps[1:]:
        if m.grid.shape != shape0:
            raise ConfigError(f"map dimensions differ: {m.grid.shape} vs {shape0}")
        if m.device != maps[0].device:
            raise ConfigError("maps belong to different devices")
    grid = maps[0].grid.copy()
    for m in maps[1:]:
        np.maximum(grid, m.grid, out=grid)
    return TargetIntensityMap(grid=grid, device=maps[0].device, annotation=None)


def compose_patterns(patterns: Sequence[MirrorPattern]) -> MirrorPattern:
    """Cellwise OR of binary mirror patterns (per-frame composition)."""
    if not patterns:
        raise ConfigError("compose needs at least one pattern")
    shape0 = patterns[0].grid.shape
    for p in patterns[1:]:
        if p.grid.shape != shape0:
            raise ConfigError(f"pattern dimensions differ: {p.grid.shape} vs {shape0}")
    grid = patterns[0].grid.copy()
    for p in patterns[1:]:
        grid |= p.grid
    return MirrorPattern(grid=grid, device=patterns[0].device)


# dict <-> shape codecs for scenario files (lengths in micrometres there)

_VARIANTS = {
    "disk": Disk,
    "annulus": Annulus,
    "line": Line,
    "disk_grid": DiskGrid,
    "star": Star,
    "harmonic_channel": HarmonicChannel,
    "union": Union,
}


def shape_from_dict(spec: dict) -> ShapeSpec:
    """Build a shape from its scenario-file form (micrometre keys)."""
    spec = dict(spec)
    variant = spec.pop("variant", None)
    if variant not in _VARIANTS:
        raise ConfigError(f"unknown shape variant {variant!r}")
    um = 1e-6
    center = tuple(np.asarray(spec.pop("center_um", (0.0, 0.0)), dtype=float) * um)
    if variant == "disk":
        return Disk(radius=spec["radius_um"] * um, center=center)
    if variant == "annulus":
        return Annulus(
            inner_radius=spec["inner_radius_um"] * um,
            outer_radius=spec["outer_radius_um"] * um,
            center=center,
        )
    if variant == "line":
        return Line(
            length=spec["length_um"] * um,
            width=spec["width_um"] * um,
            center=center,
            angle=np.deg2rad(spec.get("angle_deg", 0.0)),
        )
    if variant == "disk_grid":
        return DiskGrid(
            grid_rows=int(spec["rows"]),
            grid_cols=int(spec["cols"]),
            spacing=spec["spacing_um"] * um,
            radius=spec["radius_um"] * um,
            center=center,
        )
    if variant == "star":
        return Star(
            points=int(spec.get("points", 5)),
            circumradius=spec["circumradius_um"] * um,
            inner_fraction=float(spec.get("inner_fraction", 0.382)),
            center=center,
            angle=np.deg2rad(spec.get("angle_deg", 0.0)),
        )
    if variant == "harmonic_channel":
        return HarmonicChannel(
            half_length=spec["half_length_um"] * um,
            half_width=spec["half_width_um"] * um,
            center=center,
            angle=np.deg2rad(spec.get("angle_deg", 0.0)),
        )
    members = tuple(shape_from_dict(m) for m in spec.get("members", ()))
    return Union(members=members)
