"""Cartesian and PSF-driven polar reconstruction grids, plus image I/O."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, fields

import numpy as np

from .signal_model import C, ConfigError, RadarParams, Trajectory, derived_waveform
from .simulator import DataError

IMAGE_MAGIC = b"SARIM1\0\0"
CARTESIAN, POLAR = 0, 1


@dataclass(frozen=True)
class CartesianGrid:
    """Row-major lattice: pixel ``p = j * nx + i`` sits at ``origin + (i dx, j dy)``."""

    origin: tuple[float, float]
    dx: float
    dy: float
    nx: int
    ny: int

    kind = CARTESIAN

    def __post_init__(self):
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        if not (self.dx > 0 and self.dy > 0):
            raise ConfigError("grid spacings must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("grid counts must be >= 1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.origin[0] + self.dx * np.arange(self.nx),
                self.origin[1] + self.dy * np.arange(self.ny))

    def pixel_positions(self) -> np.ndarray:
        x, y = self.axes()
        xx, yy = np.meshgrid(x, y)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def bounds(self) -> tuple[float, float, float, float]:
        x, y = self.axes()
        return (x[0], y[0], x[-1], y[-1])

    def params_f64(self) -> list[float]:
        return [*self.origin, self.dx, self.dy, self.nx, self.ny]


@dataclass(frozen=True)
class PolarGrid:
    """Range-major lattice about ``center``: ``p = i_r * n_theta + i_theta``.

    Bearing ``theta`` is measured counter-clockwise from the +x axis.
    """

    center: tuple[float, float]
    r_min: float
    dr: float
    n_r: int
    theta_min: float
    dtheta: float
    n_theta: int

    kind = POLAR

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not (self.dr > 0 and self.dtheta > 0):
            raise ConfigError("grid spacings must be positive")
        if self.n_r < 1 or self.n_theta < 1:
            raise ConfigError("grid counts must be >= 1")
        if not self.r_min > 0:
            raise ConfigError("polar grid needs r_min > 0")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta

    @property
    def r_max(self) -> float:
        return self.r_min + (self.n_r - 1) * self.dr

    @property
    def theta_max(self) -> float:
        return self.theta_min + (self.n_theta - 1) * self.dtheta

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.r_min + self.dr * np.arange(self.n_r),
                self.theta_min + self.dtheta * np.arange(self.n_theta))

    def pixel_positions(self) -> np.ndarray:
        r, th = self.axes()
        rr, tt = np.meshgrid(r, th, indexing="ij")
        cx, cy = self.center
        return np.column_stack([cx + (rr * np.cos(tt)).ravel(), cy + (rr * np.sin(tt)).ravel()])

    def params_f64(self) -> list[float]:
        return [*self.center, self.r_min, self.dr, self.n_r, self.theta_min, self.dtheta, self.n_theta]


ImageGrid = CartesianGrid | PolarGrid


def grid_to_dict(grid: ImageGrid) -> dict:
    d = {f.name: getattr(grid, f.name) for f in fields(grid)}
    d = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
    return {"kind": "cartesian" if grid.kind == CARTESIAN else "polar", **d}


def grid_from_dict(d: dict) -> ImageGrid:
    d = dict(d)
    kind = d.pop("kind")
    cls = {"cartesian": CartesianGrid, "polar": PolarGrid}[kind]
    return cls(**d)


@dataclass(frozen=True, eq=False)
class SarImage:
    values: np.ndarray  # complex64, one per pixel in grid order
    grid: ImageGrid

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values).ravel(), dtype=np.complex64)
        if v.size != self.grid.size:
            raise DataError(f"image has {v.size} values, grid has {self.grid.size} pixels")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values.astype(np.complex128))

    def as_2d(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def argmax_position(self) -> np.ndarray:
        return self.grid.pixel_positions()[int(np.argmax(self.magnitude))]

    def save(self, path) -> None:
        params = self.grid.params_f64()
        with open(path, "wb") as fh:
            fh.write(IMAGE_MAGIC)
            fh.write(struct.pack("<I", self.grid.kind))
            fh.write(struct.pack(f"<{len(params)}d", *params))
            fh.write(struct.pack("<Q", self.grid.size))
            fh.write(self.values.astype("<c8", copy=False).tobytes())

    @classmethod
    def load(cls, path) -> "SarImage":
        with open(path, "rb") as fh:
            raw = fh.read()
        if raw[:8] != IMAGE_MAGIC:
            raise DataError(f"{path}: bad magic {raw[:8]!r}")
        (kind,) = struct.unpack_from("<I", raw, 8)
        if kind == CARTESIAN:
            n_par, off = 6, 12
            ox, oy, dx, dy, nx, ny = struct.unpack_from("<6d", raw, off)
            grid = CartesianGrid((ox, oy), dx, dy, int(nx), int(ny))
        elif kind == POLAR:
            n_par, off = 8, 12
            cx, cy, r0, dr, nr, t0, dt, nt = struct.unpack_from("<8d", raw, off)
            grid = PolarGrid((cx, cy), r0, dr, int(nr), t0, dt, int(nt))
        else:
            raise DataError(f"{path}: unknown grid kind {kind}")
        off += 8 * n_par
        (count,) = struct.unpack_from("<Q", raw, off)
        off += 8
        if count != grid.size or len(raw) - off != 8 * count:
            raise DataError(f"{path}: pixel count mismatch")
        return cls(np.frombuffer(raw, dtype="<c8", offset=off).astype(np.complex64), grid)


def cartesian_grid(extent_x: float, extent_y: float, resolution: float, origin=(0.0, 0.0)) -> CartesianGrid:
    if not (extent_x > 0 and extent_y > 0 and resolution > 0):
        raise ConfigError("extent and resolution must be positive")
    # guard the floor against representation error in extent/resolution
    nx = math.floor(extent_x / resolution + 1e-9) + 1
    ny = math.floor(extent_y / resolution + 1e-9) + 1
    return CartesianGrid(origin, resolution, resolution, nx, ny)


@dataclass(frozen=True)
class PsfResolution:
    delta_r: float
    delta_az: float


def psf_resolutions(params: RadarParams, aperture_length: float, range_: float) -> PsfResolution:
    """Range resolution c/(2B) and azimuth resolution lambda*R/(2L)."""
    if not (aperture_length > 0 and range_ > 0):
        raise ConfigError("aperture_length and range must be positive")
    lam = derived_waveform(params).wavelength
    return PsfResolution(C / (2.0 * params.bandwidth), lam * range_ / (2.0 * aperture_length))


def _fit(extent: float, target_step: float) -> tuple[float, int]:
    """Largest step <= target_step that tiles ``extent`` exactly."""
    if extent <= 0:
        return target_step, 1
    n = math.ceil(extent / target_step - 1e-9) + 1
    return extent / (n - 1), n


def polar_grid(params: RadarParams, aperture_length: float, r_min: float, r_max: float,
               theta_span: tuple[float, float], oversample_factor: float = 2.5,
               center=(0.0, 0.0)) -> PolarGrid:
    """Polar grid whose spacing is ``oversample_factor`` finer than the PSF.

    Range spacing follows the range resolution; a single angular spacing is
    set by the azimuth resolution at ``r_max`` (so near rings are finer than
    needed). Spacings shrink slightly so the lattice ends exactly on
    ``r_max`` and ``theta_span[1]``.
    """
    if oversample_factor < 2:
        raise ConfigError(
            f"oversample_factor={oversample_factor} < 2 cannot depict point targets "
            "(grid must be at least twice as fine as the PSF)"
        )
    if not 0 < r_min <= r_max:
        raise ConfigError("need 0 < r_min <= r_max")
    th0, th1 = theta_span
    if th1 < th0:
        raise ConfigError("theta_span must be increasing")
    psf = psf_resolutions(params, aperture_length, r_max)
    dr, n_r = _fit(r_max - r_min, psf.delta_r / oversample_factor)
    dth, n_th = _fit(th1 - th0, psf.delta_az / oversample_factor / r_max)
    return PolarGrid(center, r_min, dr, n_r, th0, dth, n_th)


def polar_span_for(center, bounds) -> tuple[float, float, float, float]:
    """``(r_min, r_max, theta_min, theta_max)`` of a rectangle seen from ``center``."""
    cx, cy = center
    x0, y0, x1, y1 = bounds
    nearest = (min(max(cx, x0), x1), min(max(cy, y0), y1))
    r_min = math.hypot(nearest[0] - cx, nearest[1] - cy)
    if r_min == 0:
        raise ConfigError("aperture center lies inside the imaged area")
    corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
    r_max = max(math.hypot(x - cx, y - cy) for x, y in corners)
    ref = math.atan2(nearest[1] - cy, nearest[0] - cx)
    rel = [math.remainder(math.atan2(y - cy, x - cx) - ref, 2 * math.pi) for x, y in corners]
    return r_min, r_max, ref + min(rel), ref + max(rel)


def polar_grid_covering(params: RadarParams, traj: Trajectory, target: CartesianGrid,
                        oversample_factor: float = 2.5) -> PolarGrid:
    """Polar grid about the aperture center that covers every pixel of ``target``."""
    center = tuple(traj.center)
    r_min, r_max, th0, th1 = polar_span_for(center, target.bounds())
    return polar_grid(params, traj.aperture_length, r_min, r_max, (th0, th1), oversample_factor, center)


@dataclass(frozen=True, eq=False)
class ResampledImage:
    image: SarImage  # bilinear in complex value
    magnitude: np.ndarray  # bilinear in magnitude, used for metrics
    mask: np.ndarray  # True where the Cartesian pixel lies inside polar coverage

    @property
    def grid(self):
        return self.image.grid


def _axis_weights(frac_idx: np.ndarray, n: int):
    """Lower index, weight of the upper neighbour, and inside-mask for one axis."""
    inside = (frac_idx >= -1e-9) & (frac_idx <= n - 1 + 1e-9)
    f = np.clip(frac_idx, 0.0, n - 1)
    i0 = np.minimum(np.floor(f).astype(np.int64), max(n - 2, 0))
    w = f - i0 if n > 1 else np.zeros_like(f)
    return i0, w, inside


def resample_to_cartesian(image: SarImage, target: CartesianGrid) -> ResampledImage:
    """Bilinear (r, theta) interpolation of a polar image onto a Cartesian grid."""
    grid = image.grid
    if grid.kind != POLAR:
        raise ConfigError("resample_to_cartesian expects an image on a polar grid")
    if not np.all(np.isfinite(image.values)):
        raise DataError("polar image contains non-finite values")
    pos = target.pixel_positions()
    dx = pos[:, 0] - grid.center[0]
    dy = pos[:, 1] - grid.center[1]
    r = np.hypot(dx, dy)
    th = grid.theta_min + np.mod(np.arctan2(dy, dx) - grid.theta_min + 1e-12, 2 * np.pi) - 1e-12

    ir, wr, in_r = _axis_weights((r - grid.r_min) / grid.dr, grid.n_r)
    it, wt, in_t = _axis_weights((th - grid.theta_min) / grid.dtheta, grid.n_theta)
    mask = in_r & in_t

    vals = image.values.astype(np.complex128).reshape(grid.shape)
    mags = np.abs(vals)
    ir1 = np.minimum(ir + 1, grid.n_r - 1)
    it1 = np.minimum(it + 1, grid.n_theta - 1)

    def blend(a):
        return ((1 - wr) * (1 - wt) * a[ir, it] + (1 - wr) * wt * a[ir, it1]
                + wr * (1 - wt) * a[ir1, it] + wr * wt * a[ir1, it1])

    cval = np.where(mask, blend(vals), 0.0)
    mval = np.where(mask, blend(mags), 0.0)
    return ResampledImage(SarImage(cval.astype(np.complex64), target), mval, mask)


def db_image(magnitude: np.ndarray, dynamic_range_db: float = 60.0) -> np.ndarray:
    """20 log10 magnitude normalised to the maximum and clipped at -dynamic_range_db."""
    mag = np.asarray(magnitude, dtype=np.float64)
    peak = mag.max() if mag.size else 0.0
    if peak <= 0:
        return np.full(mag.shape, -dynamic_range_db)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / peak)
    return np.clip(db, -dynamic_range_db, 0.0)


def write_pgm(path, values: np.ndarray, lo: float, hi: float) -> None:
    """8-bit binary PGM of a 2-D array mapped linearly from [lo, hi] to [0, 255]."""
    a = np.asarray(values, dtype=np.float64)
    scaled = np.clip((a - lo) / (hi - lo), 0.0, 1.0)
    pix = np.round(scaled * 255).astype(np.uint8)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = open(path, "rb").read()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def export_pgm(image: SarImage | ResampledImage, path, dynamic_range_db: float = 60.0) -> None:
    """Normalised dB magnitude as a graymap; Cartesian images are drawn with +y up."""
    mag = image.magnitude
    grid = image.grid
    db = db_image(mag, dynamic_range_db).reshape(grid.shape)
    if grid.kind == CARTESIAN:
        db = db[::-1]
    write_pgm(path, db, -dynamic_range_db, 0.0)
