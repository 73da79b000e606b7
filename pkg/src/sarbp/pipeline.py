"""Configurable simulate / reconstruct / benchmark pipelines.

A :class:`PipelineConfig` is a JSON document. Optimization measures are
independent flags, so every benchmark row is the base configuration with a
different :class:`OptimizationConfig`.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .backprojection import (
    FULL_MATRIX,
    PER_CHIRP_VECTOR,
    KernelInputs,
    OptimizationConfig,
    WindowSpec,
    halve_rx,
    make_window,
    precompute_doppler_index,
    run_kernel,
    select_rx_subset,
    stage,
)
from .grid import CartesianGrid, ImageGrid, SarImage, cartesian_grid, polar_grid_covering
from .metrics import BenchReport, RegionSpec, run_benchmark
from .signal_model import (
    ArrayGeometry,
    ConfigError,
    RadarParams,
    Trajectory,
    accelerating_trajectory,
    arc_trajectory,
    straight_trajectory,
)
from .simulator import BeatSpectrum, DataError, PointScatterer, simulate_spectrum

ALGOS = ("reference", "optimized")
TRAJECTORY_KINDS = ("straight", "accelerating", "arc", "file")
MATRIX_LABELS = ("ref", "w_sar", "opt", "doppler", "polar", "rx", "comb")


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "straight"
    speed: float = 10.0
    v0: float = 9.0
    v1: float = 11.0
    radius: float = 20.0
    heading: tuple[float, float] = (1.0, 0.0)
    center: tuple[float, float] = (0.0, 0.0)
    file: str | None = None

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ConfigError(f"trajectory kind must be one of {TRAJECTORY_KINDS}")
        if self.kind == "file" and not self.file:
            raise ConfigError("trajectory kind 'file' needs a 'file' path")
        object.__setattr__(self, "heading", tuple(float(v) for v in self.heading))
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    def build(self, params: RadarParams, base_dir: Path | None = None) -> Trajectory:
        if self.kind == "straight":
            return straight_trajectory(params, self.speed, self.heading, self.center)
        if self.kind == "accelerating":
            return accelerating_trajectory(params, self.v0, self.v1, self.heading, self.center)
        if self.kind == "arc":
            return arc_trajectory(params, self.radius, self.speed, self.center)
        path = Path(self.file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"trajectory file {path} does not exist")
        traj = Trajectory.from_dict(json.loads(path.read_text()))
        traj.check(params)
        return traj

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("straight", "arc"):
            d["speed"] = self.speed
        if self.kind == "accelerating":
            d.update(v0=self.v0, v1=self.v1)
        if self.kind == "arc":
            d["radius"] = self.radius
        else:
            d["heading"] = list(self.heading)
        if self.kind == "file":
            d["file"] = self.file
        else:
            d["center"] = list(self.center)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySpec":
        known = {"kind", "speed", "v0", "v1", "radius", "heading", "center", "file"}
        if set(d) - known:
            raise ConfigError(f"unknown trajectory keys: {sorted(set(d) - known)}")
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


@dataclass(frozen=True)
class GridSpec:
    """Reference Cartesian grid; ``kind='polar'`` images on the covering polar grid instead."""

    kind: str = "cartesian"
    extent_x: float = 2.5
    extent_y: float = 2.5
    resolution: float = 0.025
    origin: tuple[float, float] = (-1.25, 3.75)
    factor: float = 2.5

    def __post_init__(self):
        if self.kind not in ("cartesian", "polar"):
            raise ConfigError("grid kind must be 'cartesian' or 'polar'")
        if not (self.extent_x > 0 and self.extent_y > 0 and self.resolution > 0):
            raise ConfigError("grid extents and resolution must be positive")
        if self.factor < 2:
            raise ConfigError(f"polar oversampling factor {self.factor} < 2 cannot depict point targets")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    def cartesian(self) -> CartesianGrid:
        return cartesian_grid(self.extent_x, self.extent_y, self.resolution, self.origin)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "extent_x": self.extent_x, "extent_y": self.extent_y,
                "resolution": self.resolution, "origin": list(self.origin), "factor": self.factor}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        known = {"kind", "extent_x", "extent_y", "resolution", "origin", "factor"}
        if set(d) - known:
            raise ConfigError(f"unknown grid keys: {sorted(set(d) - known)}")
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


def _desk_scene() -> tuple[PointScatterer, ...]:
    return (PointScatterer((0.3, 5.0)), PointScatterer((-0.6, 4.4), 0.7j), PointScatterer((0.8, 5.9), 0.5))


@dataclass(frozen=True)
class PipelineConfig:
    radar: RadarParams = field(default_factory=RadarParams.desk)
    array: ArrayGeometry | None = None  # None: uniform lambda/2 line array
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    scene: tuple[PointScatterer, ...] = field(default_factory=_desk_scene)
    grid: GridSpec = field(default_factory=GridSpec)
    algo: str = "reference"
    measures: OptimizationConfig = field(default_factory=OptimizationConfig)
    window: str = "hann"
    window_beta: float = 0.0
    fast_time_window: str = "rectangular"
    fast_time_beta: float = 0.0
    oversample: int = 1
    noise_sigma: float = 0.0
    seed: int = 0
    regions: tuple[RegionSpec, ...] = ()
    noise_region: RegionSpec | None = None
    output_dir: str | None = None
    base_dir: str | None = field(default=None, compare=False)  # resolves relative file paths

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}")
        m = self.measures
        if self.algo == "optimized" and not (m.window_vector and m.math_opt and m.doppler_precompute):
            raise ConfigError("algo 'optimized' requires window_vector, math_opt and doppler_precompute")
        if self.oversample < 1:
            raise ConfigError("oversample must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if m.rx_subset is not None and m.rx_subset[-1] >= self.radar.num_rx:
            raise ConfigError(f"rx_subset {m.rx_subset} invalid for {self.radar.num_rx} antennas")
        if self.array is not None:
            self.array.check(self.radar)
        if self.regions and self.noise_region is None:
            raise ConfigError("signal regions need a noise_region")
        WindowSpec(self.window, self.window_beta)
        WindowSpec(self.fast_time_window, self.fast_time_beta)

    @property
    def geometry(self) -> ArrayGeometry:
        return self.array if self.array is not None else ArrayGeometry.uniform_linear(self.radar)

    @property
    def uses_polar(self) -> bool:
        return self.measures.polar_grid or self.grid.kind == "polar"

    def build_trajectory(self) -> Trajectory:
        return self.trajectory.build(self.radar, Path(self.base_dir) if self.base_dir else None)

    def to_dict(self) -> dict:
        return {
            "radar": self.radar.to_dict(),
            "array": self.array.to_dict() if self.array is not None else None,
            "trajectory": self.trajectory.to_dict(),
            "scene": [s.to_dict() for s in self.scene],
            "grid": self.grid.to_dict(),
            "algo": self.algo,
            "measures": self.measures.to_dict(),
            "window": {"family": self.window, "beta": self.window_beta},
            "fast_time_window": {"family": self.fast_time_window, "beta": self.fast_time_beta},
            "oversample": self.oversample,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "regions": [r.to_dict() for r in self.regions],
            "noise_region": self.noise_region.to_dict() if self.noise_region else None,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "PipelineConfig":
        known = {"radar", "array", "trajectory", "scene", "grid", "algo", "measures", "window",
                 "fast_time_window", "oversample", "noise_sigma", "seed", "regions", "noise_region",
                 "output_dir"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            radar = RadarParams.from_dict(d["radar"]) if "radar" in d else RadarParams.desk()
            win = d.get("window", {})
            ftw = d.get("fast_time_window", {})
            return cls(
                radar=radar,
                array=ArrayGeometry.from_dict(d["array"]) if d.get("array") else None,
                trajectory=TrajectorySpec.from_dict(d.get("trajectory", {})),
                scene=tuple(PointScatterer.from_dict(s) for s in d["scene"]) if "scene" in d else _desk_scene(),
                grid=GridSpec.from_dict(d.get("grid", {})),
                algo=d.get("algo", "reference"),
                measures=OptimizationConfig.from_dict(d.get("measures", {})),
                window=win.get("family", "hann"),
                window_beta=float(win.get("beta", 0.0)),
                fast_time_window=ftw.get("family", "rectangular"),
                fast_time_beta=float(ftw.get("beta", 0.0)),
                oversample=int(d.get("oversample", 1)),
                noise_sigma=float(d.get("noise_sigma", 0.0)),
                seed=int(d.get("seed", 0)),
                regions=tuple(RegionSpec.from_dict(r) for r in d.get("regions", [])),
                noise_region=RegionSpec.from_dict(d["noise_region"]) if d.get("noise_region") else None,
                output_dir=d.get("output_dir"),
                base_dir=str(base_dir) if base_dir is not None else None,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed config: {exc!r}") from exc

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        cfg = cls.from_dict(doc, base_dir=path.parent)
        cfg.build_trajectory()  # referenced files must exist
        return cfg

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def simulate(config: PipelineConfig, seed: int | None = None) -> BeatSpectrum:
    if not config.scene:
        raise ConfigError("scene must contain at least one scatterer")
    return simulate_spectrum(
        config.radar, config.build_trajectory(), config.geometry, list(config.scene),
        config.fast_time_window, config.fast_time_beta, config.oversample,
        config.noise_sigma, config.seed if seed is None else seed,
    )


@dataclass(eq=False)
class Prepared:
    """Staged kernel inputs plus what was derived on the way."""

    inputs: KernelInputs
    grid: ImageGrid
    reference_grid: CartesianGrid
    rx_subset: tuple[int, ...]


def prepare(config: PipelineConfig, spectrum: BeatSpectrum, traj: Trajectory | None = None) -> Prepared:
    """Apply the measures in order (RX subset, grid, window and Doppler) and stage."""
    p = config.radar
    expected = (p.num_chirps, p.num_rx, p.num_samples * config.oversample)
    if spectrum.dims != expected:
        raise DataError(f"spectrum dims {spectrum.dims} do not match config {expected}")
    traj = config.build_trajectory() if traj is None else traj
    m = config.measures

    subset = m.rx_subset if m.rx_subset is not None else tuple(range(p.num_rx))
    spectrum = select_rx_subset(spectrum, subset)
    geom = config.geometry.subset(subset)
    params = p.replace(num_rx=len(subset))

    ref_grid = config.grid.cartesian()
    grid = polar_grid_covering(p, traj, ref_grid, config.grid.factor) if config.uses_polar else ref_grid

    form = PER_CHIRP_VECTOR if m.window_vector else FULL_MATRIX
    window = make_window(WindowSpec(config.window, config.window_beta, form), grid, traj)
    doppler = precompute_doppler_index(grid, traj, params, geom, spectrum.f_step) if m.doppler_precompute else None

    inputs = stage(spectrum, traj, geom, grid, params, window, doppler, index_space=m.math_opt)
    return Prepared(inputs, grid, ref_grid, tuple(subset))


@dataclass(eq=False)
class Reconstruction:
    image: SarImage
    prepared: Prepared
    flagged: int
    load_s: float
    bp_s: float

    def sidecar(self) -> dict:
        nb = self.prepared.inputs.nbytes()
        return {
            "grid_kind": "polar" if self.image.grid.kind else "cartesian",
            "pixel_count": self.image.grid.size,
            "reference_pixel_count": self.prepared.reference_grid.size,
            "rx_used": list(self.prepared.rx_subset),
            "bytes_prepared": nb["total"],
            "bytes_itemized": nb,
            "flagged_pixels": self.flagged,
            "load_s": self.load_s,
            "bp_s": self.bp_s,
            "total_s": self.load_s + self.bp_s,
            "argmax_position": [float(v) for v in self.image.argmax_position()],
            "peak_magnitude": float(self.image.magnitude.max()),
        }


def reconstruct(config: PipelineConfig, spectrum: BeatSpectrum) -> Reconstruction:
    t0 = time.perf_counter()
    prep = prepare(config, spectrum)
    t1 = time.perf_counter()
    result = run_kernel(prep.inputs)
    t2 = time.perf_counter()
    return Reconstruction(result.image, prep, int(result.flagged.sum()), t1 - t0, t2 - t1)


def measure_matrix(config: PipelineConfig) -> list[tuple[str, PipelineConfig]]:
    """One configuration per benchmark row: reference, each measure alone, all combined."""
    half = halve_rx(config.radar.num_rx)
    rows = {
        "ref": OptimizationConfig(),
        "w_sar": OptimizationConfig(window_vector=True),
        "opt": OptimizationConfig(math_opt=True),
        "doppler": OptimizationConfig(doppler_precompute=True),
        "polar": OptimizationConfig(polar_grid=True),
        "rx": OptimizationConfig(rx_subset=half),
        "comb": OptimizationConfig.combined(half),
    }
    base = replace(config, grid=replace(config.grid, kind="cartesian"))
    return [
        (label, replace(base, measures=rows[label], algo="optimized" if label == "comb" else "reference"))
        for label in MATRIX_LABELS
    ]


def benchmark(config: PipelineConfig, spectrum: BeatSpectrum, repetitions: int = 20, label: str = "run") -> BenchReport:
    traj = config.build_trajectory()
    # compile outside the timed region
    run_kernel(prepare(config, spectrum, traj).inputs)
    return run_benchmark(
        label,
        load=lambda: prepare(config, spectrum, traj).inputs,
        bp=lambda inputs: run_kernel(inputs).image,
        repetitions=repetitions,
        nbytes=lambda inputs: inputs.nbytes()["total"],
    )
