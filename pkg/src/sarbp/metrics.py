"""Image-quality, memory and timing metrics."""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
import time
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from .backprojection import (
    COMPLEX64,
    FLOAT32,
    FULL_MATRIX,
    PER_CHIRP_VECTOR,
    POINT32,
    OptimizationConfig,
    index_constants,
    precompute_doppler_index,
    reachable_bins,
    window_nbytes,
)
from .grid import POLAR, CartesianGrid, ImageGrid, ResampledImage, SarImage, polar_grid_covering
from .signal_model import C, ArrayGeometry, ConfigError, RadarParams, Trajectory, all_antenna_positions


@dataclass(frozen=True)
class RegionSpec:
    name: str
    rect: tuple[float, float, float, float]  # x0, y0, x1, y1 in metres

    def __post_init__(self):
        x0, y0, x1, y1 = (float(v) for v in self.rect)
        if not (x1 > x0 and y1 > y0):
            raise ConfigError(f"region {self.name!r} is degenerate")
        object.__setattr__(self, "rect", (x0, y0, x1, y1))

    def contains(self, pos: np.ndarray) -> np.ndarray:
        x0, y0, x1, y1 = self.rect
        return (pos[:, 0] >= x0) & (pos[:, 0] <= x1) & (pos[:, 1] >= y0) & (pos[:, 1] <= y1)

    def to_dict(self) -> dict:
        return {"name": self.name, "rect": list(self.rect)}

    @classmethod
    def from_dict(cls, d: dict) -> "RegionSpec":
        return cls(d["name"], tuple(d["rect"]))


def _magnitude_and_mask(image):
    if isinstance(image, ResampledImage):
        return image.magnitude, image.mask
    return image.magnitude, np.ones(image.grid.size, dtype=bool)


def region_snr(image: SarImage | ResampledImage, signal_regions, noise_region: RegionSpec) -> dict[str, float]:
    """Mean power in each signal region over mean power in the noise region, in dB."""
    mag, valid = _magnitude_and_mask(image)
    power = mag.astype(np.float64) ** 2
    pos = image.grid.pixel_positions()

    def mean_power(region):
        sel = region.contains(pos) & valid
        if not sel.any():
            raise ConfigError(f"region {region.name!r} contains no pixels")
        return power[sel].mean()

    noise = mean_power(noise_region)
    return {r.name: float(10.0 * np.log10(mean_power(r) / noise)) for r in signal_regions}


@dataclass(frozen=True, eq=False)
class DiffResult:
    db: np.ndarray
    median: float
    p5: float
    p95: float

    def summary(self) -> dict:
        return {"median_db": self.median, "p5_db": self.p5, "p95_db": self.p95}


def image_diff_db(a, b, floor_rel: float = 1e-12) -> DiffResult:
    """Per-pixel ``20 log10(|a| / |b|)``; magnitudes are floored at ``floor_rel * max|b|``.

    Accepts :class:`SarImage` or :class:`ResampledImage`; with resampled
    images only pixels covered by both enter the summary statistics.
    """
    if a.grid != b.grid:
        raise ConfigError("images are on different grids; resample first")
    ma, va = _magnitude_and_mask(a)
    mb, vb = _magnitude_and_mask(b)
    floor = floor_rel * mb.max() if mb.max() > 0 else np.finfo(np.float64).tiny
    db = 20.0 * np.log10(np.maximum(ma, floor) / np.maximum(mb, floor))
    valid = va & vb
    if not valid.any():
        raise ConfigError("images share no covered pixels")
    sel = db[valid]
    return DiffResult(db, float(np.median(sel)), float(np.percentile(sel, 5)), float(np.percentile(sel, 95)))


def relative_deviation(a: SarImage, b: SarImage) -> float:
    """Largest per-pixel magnitude difference relative to the peak of ``b``."""
    ma, mb = a.magnitude, b.magnitude
    return float(np.max(np.abs(ma - mb)) / mb.max())


def memory_footprint(params: RadarParams, grid: ImageGrid, config: OptimizationConfig,
                     traj: Trajectory | None = None, geom: ArrayGeometry | None = None,
                     num_bins: int | None = None, polar_factor: float = 2.5) -> dict[str, int]:
    """Bytes of every kernel input under ``config``, plus their total.

    ``grid`` is the reference Cartesian grid; with ``polar_grid`` set the
    covering polar grid is used (needs ``traj``). With ``math_opt`` and a
    trajectory, the spectrum is counted only over the bins the grid can
    reach, matching what staging transfers.
    """
    n_m = params.num_chirps
    n_rx = len(config.rx_subset) if config.rx_subset is not None else params.num_rx
    n_f = params.num_samples if num_bins is None else num_bins
    f_step = params.sample_rate / n_f

    if config.polar_grid:
        if traj is None:
            raise ConfigError("polar grid footprint needs the trajectory")
        if grid.kind == POLAR:
            raise ConfigError("pass the reference Cartesian grid")
        grid = polar_grid_covering(params, traj, grid, polar_factor)
    n_pix = grid.size

    if config.math_opt and traj is not None:
        if geom is None:
            geom = ArrayGeometry.uniform_linear(params)
        if config.rx_subset is not None:
            geom = geom.subset(config.rx_subset)
        pixels = grid.pixel_positions().astype(np.float32)
        q_tx, q_rx = all_antenna_positions(traj, geom)
        if config.doppler_precompute:
            table = precompute_doppler_index(grid, traj, params, geom, f_step).f_doppler
            dlo, dhi = float(table.min()), float(table.max())
        else:
            vmax = 2.0 * float(np.hypot(*traj.velocities.T).max())
            a3 = index_constants(params, 0.0, f_step)["a3"]
            dlo, dhi = -a3 * vmax, a3 * vmax
        k_lo, k_hi = reachable_bins(pixels, q_tx, q_rx, params, 0.0, f_step, n_f, dlo, dhi)
        n_f = max(k_hi - k_lo + 1, 1)

    form = PER_CHIRP_VECTOR if config.window_vector else FULL_MATRIX
    items = {
        "spectrum": COMPLEX64 * n_m * n_rx * n_f,
        "window": window_nbytes(form, n_pix, n_m),
        "doppler": FLOAT32 * n_pix if config.doppler_precompute else 0,
        "pixels": POINT32 * n_pix,
        "trajectory": POINT32 * n_m * (1 + n_rx) + (0 if config.doppler_precompute else POINT32 * n_m),
    }
    items["total"] = sum(items.values())
    return items


@dataclass(frozen=True)
class PhaseStats:
    mean: float
    min: float
    max: float

    @classmethod
    def of(cls, xs) -> "PhaseStats":
        xs = list(xs)
        return cls(statistics.fmean(xs), min(xs), max(xs))


@dataclass
class BenchReport:
    label: str
    repetitions: int
    load_time: PhaseStats
    bp_time: PhaseStats
    total_time: PhaseStats
    bytes_prepared: int
    runs: list[tuple[float, float, float]] = field(default_factory=list)  # kept runs
    output_hash: str = ""

    def rows(self) -> list[dict]:
        return [
            {"label": self.label, "rep": i, "load_s": l, "bp_s": b, "total_s": t,
             "bytes_prepared": self.bytes_prepared}
            for i, (l, b, t) in enumerate(self.runs)
        ]

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("runs")
        return d


class NondeterministicOutput(RuntimeError):
    pass


def run_benchmark(label: str, load: Callable[[], object], bp: Callable[[object], SarImage],
                  repetitions: int = 20, nbytes: Callable[[object], int] | None = None) -> BenchReport:
    """Time ``load`` (staging) and ``bp`` (kernel) over repeated runs.

    The first run is a warm-up and dropped from the statistics when more than
    three repetitions are requested. Every run's image must hash identically.
    """
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    runs, hashes, prepared = [], set(), 0
    for _ in range(repetitions):
        t0 = time.perf_counter()
        staged = load()
        t1 = time.perf_counter()
        image = bp(staged)
        t2 = time.perf_counter()
        runs.append((t1 - t0, t2 - t1, t2 - t0))
        hashes.add(hashlib.sha256(image.values.tobytes()).hexdigest())
        prepared = nbytes(staged) if nbytes is not None else 0
    if len(hashes) != 1:
        raise NondeterministicOutput(f"{label}: outputs differ across repetitions")
    kept = runs[1:] if repetitions > 3 else runs
    return BenchReport(
        label=label,
        repetitions=len(kept),
        load_time=PhaseStats.of(r[0] for r in kept),
        bp_time=PhaseStats.of(r[1] for r in kept),
        total_time=PhaseStats.of(r[2] for r in kept),
        bytes_prepared=prepared,
        runs=kept,
        output_hash=hashes.pop(),
    )


BENCH_COLUMNS = ["label", "rep", "load_s", "bp_s", "total_s", "bytes_prepared"]


def write_bench_csv(reports, path, partial: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        if partial:
            fh.write("# PARTIAL: a pipeline failed; rows below are incomplete\n")
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for rep in reports:
            w.writerows(rep.rows())


def write_bench_summary(reports, path, extra: dict | None = None) -> None:
    doc = {"reports": [r.summary() for r in reports]}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
