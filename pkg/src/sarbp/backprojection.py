"""Back-projection image formation: the standard and the optimized kernel.

Both kernels share one compiled pixel loop (:mod:`sarbp._kernels`). The
standard path evaluates per pixel, chirp and antenna the two distances, the
two radial speeds, ``tau``, the hypothetical beat frequency and the carrier
phase. The optimized path works in bin-index space with precomputed
constants and takes Doppler from a per-pixel table built from the mean
platform velocity.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numba
import numpy as np

from . import _kernels
from .grid import ImageGrid, SarImage
from .signal_model import C, ConfigError, RadarParams, Trajectory, ArrayGeometry, all_antenna_positions, chirp_rate
from .simulator import BeatSpectrum, DataError
from .windows import evaluate_window

FULL_MATRIX = "full_matrix"
PER_CHIRP_VECTOR = "per_chirp_vector"

COMPLEX64 = 8
FLOAT32 = 4
POINT32 = 8


@dataclass(frozen=True)
class WindowSpec:
    family: str = "hann"
    beta: float = 0.0
    form: str = PER_CHIRP_VECTOR

    def __post_init__(self):
        if self.form not in (FULL_MATRIX, PER_CHIRP_VECTOR):
            raise ConfigError(f"unknown window form {self.form!r}")
        if self.beta < 0:
            raise ConfigError("Kaiser beta must be >= 0")
        # validates the family name
        evaluate_window(self.family, [0.5], self.beta)


def make_window(spec: WindowSpec, grid: ImageGrid, traj: Trajectory) -> np.ndarray:
    """Slow-time window as a ``(N_m,)`` vector or a ``(pixels, N_m)`` matrix (float32).

    The vector samples the family at ``m / (N_m - 1)``. The matrix samples it
    at each pose's along-track arc length over the total arc length, which is
    non-equidistant under varying speed; every pixel row is the same.
    """
    n_m = len(traj)
    if n_m == 1:
        u = np.array([0.5])
        w = np.ones(1)
    elif spec.form == PER_CHIRP_VECTOR:
        u = np.arange(n_m) / (n_m - 1)
    else:
        s = traj.arc_length()
        u = s / s[-1] if s[-1] > 0 else np.arange(n_m) / (n_m - 1)
    if n_m > 1:
        w = evaluate_window(spec.family, u, spec.beta)
    if w.sum() <= 0:
        raise ConfigError("window sums to zero")
    w = w.astype(np.float32)
    if spec.form == PER_CHIRP_VECTOR:
        return w
    return np.ascontiguousarray(np.broadcast_to(w, (grid.size, n_m)))


def window_nbytes(form: str, n_pixels: int, n_chirps: int) -> int:
    return FLOAT32 * n_chirps * (n_pixels if form == FULL_MATRIX else 1)


@dataclass(frozen=True, eq=False)
class DopplerTable:
    f_doppler: np.ndarray  # float32 fractional bins per pixel
    v_avg: np.ndarray
    flagged: np.ndarray  # pixels coincident with the aperture-center position

    def __len__(self):
        return self.f_doppler.shape[0]


def aperture_phase_center(traj: Trajectory, geom: ArrayGeometry) -> np.ndarray:
    """Mean over chirps of the midpoint between the TX and the RX centroid."""
    q_tx, q_rx = all_antenna_positions(traj, geom)
    return (0.5 * (q_tx + q_rx.mean(axis=1))).mean(axis=0)


def precompute_doppler_index(grid: ImageGrid, traj: Trajectory, params: RadarParams,
                             geom: ArrayGeometry | None = None, f_step: float | None = None,
                             pixels: np.ndarray | None = None) -> DopplerTable:
    """Per-pixel Doppler offset in fractional bins from the mean velocity.

    Uses ``v_r = 2 <p - q, v_avg> / |p - q|`` (TX and RX treated as
    co-located at ``q``). Without ``geom`` the aperture center is the mean
    pose. ``f_step`` defaults to the radar's native bin spacing.
    """
    v_avg = traj.velocities.mean(axis=0)
    q = aperture_phase_center(traj, geom) if geom is not None else traj.center
    if f_step is None:
        f_step = params.sample_rate / params.num_samples
    pos = grid.pixel_positions() if pixels is None else np.asarray(pixels, dtype=np.float64)
    rel = pos - q
    dist = np.hypot(rel[:, 0], rel[:, 1])
    flagged = dist == 0
    safe = np.where(flagged, 1.0, dist)
    v_r = 2.0 * (rel @ v_avg) / safe
    v_r[flagged] = 0.0
    table = (params.f0 * v_r / C / f_step).astype(np.float32)
    return DopplerTable(table, v_avg, flagged)


def interp_linear(row: np.ndarray, index: float) -> complex:
    """Complex linear interpolation of ``row`` at a fractional bin; 0 outside [0, N_f - 1]."""
    row = np.asarray(row)
    if row.size == 0:
        raise ValueError("row must be non-empty")
    return _kernels.interp_bins(row.reshape(1, 1, -1), 0, 0, float(index))


@dataclass(frozen=True)
class OptimizationConfig:
    window_vector: bool = False
    math_opt: bool = False
    doppler_precompute: bool = False
    polar_grid: bool = False
    rx_subset: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.rx_subset is not None:
            sub = tuple(int(i) for i in self.rx_subset)
            if not sub:
                raise ConfigError("rx_subset must not be empty")
            if sub[0] < 0 or any(b <= a for a, b in zip(sub, sub[1:])):
                raise ConfigError("rx_subset must be strictly increasing non-negative indices")
            object.__setattr__(self, "rx_subset", sub)

    @classmethod
    def reference(cls) -> "OptimizationConfig":
        return cls()

    @classmethod
    def combined(cls, rx_subset) -> "OptimizationConfig":
        return cls(True, True, True, True, rx_subset)

    def to_dict(self) -> dict:
        return {"window_vector": self.window_vector, "math_opt": self.math_opt,
                "doppler_precompute": self.doppler_precompute, "polar_grid": self.polar_grid,
                "rx_subset": list(self.rx_subset) if self.rx_subset is not None else None}

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizationConfig":
        known = {"window_vector", "math_opt", "doppler_precompute", "polar_grid", "rx_subset"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown measure keys: {sorted(unknown)}")
        sub = d.get("rx_subset")
        return cls(bool(d.get("window_vector", False)), bool(d.get("math_opt", False)),
                   bool(d.get("doppler_precompute", False)), bool(d.get("polar_grid", False)),
                   tuple(sub) if sub is not None else None)


def halve_rx(num_rx: int) -> tuple[int, ...]:
    """Every other antenna, keeping the array span."""
    return tuple(range(0, num_rx, 2))


def select_rx_subset(spectrum: BeatSpectrum, subset) -> BeatSpectrum:
    sub = list(subset)
    if not sub:
        raise ConfigError("rx subset must not be empty")
    n_rx = spectrum.dims[1]
    if any(not 0 <= i < n_rx for i in sub) or any(b <= a for a, b in zip(sub, sub[1:])):
        raise ConfigError(f"rx subset {sub} invalid for {n_rx} antennas")
    if sub == list(range(n_rx)):
        return spectrum
    return BeatSpectrum(spectrum.data[:, sub, :], spectrum.f_start, spectrum.f_step)


def index_constants(params: RadarParams, f_start: float, f_step: float) -> dict:
    """Constants hoisted out of the pixel loop for index-space evaluation."""
    return {
        "a1": chirp_rate(params) / (C * f_step),  # bins per metre of round-trip path
        "a2": -2.0 * math.pi * params.f0 / C,  # carrier phase per metre
        "a3": params.f0 / (C * f_step),  # bins per m/s of closing speed
        "idx0": -f_start / f_step,
    }


def reachable_bins(pixels, q_tx, q_rx, params, f_start, f_step, n_f,
                   dop_lo: float, dop_hi: float) -> tuple[int, int]:
    """Conservative bin range any (pixel, chirp, rx) index can touch.

    Round-trip paths are bounded by the pixel's distance to the bounding box
    of all antenna positions; ``dop_lo``/``dop_hi`` bound the Doppler term in
    bins.
    """
    ant = np.vstack([np.asarray(q_tx, np.float64).reshape(-1, 2), np.asarray(q_rx, np.float64).reshape(-1, 2)])
    lo, hi = ant.min(axis=0), ant.max(axis=0)
    pix = np.asarray(pixels, dtype=np.float64)
    near = np.clip(pix, lo, hi) - pix
    d_min = 2.0 * np.hypot(near[:, 0], near[:, 1])
    far = np.maximum(np.abs(pix - lo), np.abs(pix - hi))
    d_max = 2.0 * np.hypot(far[:, 0], far[:, 1])
    k = index_constants(params, f_start, f_step)
    idx_lo = k["a1"] * d_min.min() + dop_lo + k["idx0"]
    idx_hi = k["a1"] * d_max.max() + dop_hi + k["idx0"]
    k_lo = max(0, math.floor(idx_lo) - 1)
    k_hi = min(n_f - 1, math.ceil(idx_hi) + 1)
    if k_hi < k_lo:
        return 0, -1
    return k_lo, k_hi


@dataclass(eq=False)
class KernelInputs:
    """Everything the pixel loop reads, in its working representation."""

    pixels: np.ndarray  # (P, 2) float32
    q_tx: np.ndarray  # (M, 2) float32
    q_rx: np.ndarray  # (M, N, 2) float32
    velocities: np.ndarray  # (M, 2) float32, empty when Doppler is tabulated
    data: np.ndarray  # (M, N, K) complex64
    window: np.ndarray  # (1 or P, M) float32
    doppler: np.ndarray  # (P,) float32 bins, empty when Doppler is exact
    f_start: float
    f_step: float
    exact_doppler: bool
    index_space: bool
    params: RadarParams
    grid: ImageGrid
    bin_offset: int = 0

    def nbytes(self) -> dict:
        items = {
            "spectrum": self.data.nbytes,
            "window": self.window.nbytes,
            "doppler": self.doppler.nbytes,
            "pixels": self.pixels.nbytes,
            "trajectory": self.q_tx.nbytes + self.q_rx.nbytes + self.velocities.nbytes,
        }
        items["total"] = sum(items.values())
        return items


def stage(spectrum: BeatSpectrum, traj: Trajectory, geom: ArrayGeometry, grid: ImageGrid,
          params: RadarParams, window: np.ndarray, doppler: DopplerTable | None,
          index_space: bool, crop_bins: bool | None = None) -> KernelInputs:
    """Convert inputs into the kernel's float32 working arrays.

    With ``doppler`` the kernel takes Doppler from the table; otherwise it
    evaluates per-antenna radial speeds. ``crop_bins`` (default: on in index
    space) keeps only the bins some pixel can reach.
    """
    n_m, n_rx, n_f = spectrum.dims
    if n_m != params.num_chirps or n_rx != geom.num_rx or len(traj) != n_m:
        raise DataError(
            f"spectrum dims {spectrum.dims} inconsistent with {len(traj)} poses / {geom.num_rx} RX"
        )
    window = np.asarray(window, dtype=np.float32)
    if window.ndim == 1:
        window = window[None, :]
    if window.shape[1] != n_m or window.shape[0] not in (1, grid.size):
        raise ConfigError(f"window shape {window.shape} incompatible with grid/chirps")
    if doppler is not None and len(doppler) != grid.size:
        raise ConfigError("Doppler table does not match grid")

    pixels = grid.pixel_positions().astype(np.float32)
    q_tx, q_rx = all_antenna_positions(traj, geom)
    exact = doppler is None
    vel = traj.velocities.astype(np.float32) if exact else np.zeros((0, 2), np.float32)
    table = doppler.f_doppler.astype(np.float32) if not exact else np.zeros(0, np.float32)

    data = spectrum.data
    f_start = spectrum.f_start
    offset = 0
    if crop_bins is None:
        crop_bins = index_space
    if crop_bins:
        if exact:
            vmax = 2.0 * float(np.hypot(*traj.velocities.T).max())
            a3 = params.f0 / (C * spectrum.f_step)
            dlo, dhi = -a3 * vmax, a3 * vmax
        else:
            dlo, dhi = float(table.min()), float(table.max())
        k_lo, k_hi = reachable_bins(pixels, q_tx, q_rx, params, spectrum.f_start, spectrum.f_step,
                                    n_f, dlo, dhi)
        if k_hi < k_lo:
            k_lo, k_hi = 0, 0
        data = np.ascontiguousarray(data[:, :, k_lo:k_hi + 1])
        f_start = spectrum.f_start + k_lo * spectrum.f_step
        offset = k_lo

    return KernelInputs(
        pixels=pixels,
        q_tx=q_tx.astype(np.float32),
        q_rx=np.ascontiguousarray(q_rx.astype(np.float32)),
        velocities=vel,
        data=np.ascontiguousarray(data),
        window=np.ascontiguousarray(window),
        doppler=table,
        f_start=f_start,
        f_step=spectrum.f_step,
        exact_doppler=exact,
        index_space=index_space,
        params=params,
        grid=grid,
        bin_offset=offset,
    )


@dataclass(eq=False)
class KernelResult:
    image: SarImage
    flagged: np.ndarray
    counters: np.ndarray | None
    seconds: float


def run_kernel(inputs: KernelInputs, count_ops: bool = False) -> KernelResult:
    p = inputs.params
    k = index_constants(p, inputs.f_start, inputs.f_step)
    n_pix = inputs.pixels.shape[0]
    out = np.empty(n_pix, dtype=np.complex64)
    bad = np.empty(n_pix, dtype=np.bool_)
    counters = np.zeros((n_pix if count_ops else 0, _kernels.N_COUNTERS), dtype=np.int64)
    t0 = time.perf_counter()
    _kernels.bp_kernel(
        inputs.pixels, inputs.q_tx, inputs.q_rx, inputs.velocities, inputs.data,
        inputs.window, inputs.doppler,
        p.f0, chirp_rate(p), inputs.f_start, inputs.f_step, k["idx0"], k["a1"], k["a2"], k["a3"],
        inputs.exact_doppler, inputs.index_space, out, bad, counters,
    )
    dt = time.perf_counter() - t0
    return KernelResult(SarImage(out, inputs.grid), bad, counters if count_ops else None, dt)


def backproject_reference(spectrum: BeatSpectrum, traj: Trajectory, geom: ArrayGeometry,
                          grid: ImageGrid, window: np.ndarray, params: RadarParams) -> SarImage:
    """Standard back-projection with exact per-antenna Doppler and a per-pixel window."""
    if np.ndim(window) != 2:
        raise ConfigError("reference back-projection expects a full-matrix window")
    inputs = stage(spectrum, traj, geom, grid, params, window, None, index_space=False)
    return run_kernel(inputs).image


def backproject_optimized(spectrum: BeatSpectrum, traj: Trajectory, geom: ArrayGeometry,
                          grid: ImageGrid, window: np.ndarray, doppler: DopplerTable,
                          params: RadarParams) -> SarImage:
    """Index-space back-projection with a per-chirp window and tabulated Doppler."""
    if np.ndim(window) != 1:
        raise ConfigError("optimized back-projection expects a per-chirp window vector")
    inputs = stage(spectrum, traj, geom, grid, params, window, doppler, index_space=True)
    return run_kernel(inputs).image


def set_threads(n: int) -> int:
    """Set kernel worker threads (0 = all available); returns the count in use."""
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n == 0 else n
    if not 1 <= n <= limit:
        raise ConfigError(f"threads must be in [1, {limit}] (NUMBA_NUM_THREADS), got {n}")
    numba.set_num_threads(n)
    return n
