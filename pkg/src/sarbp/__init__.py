"""FMCW synthetic-aperture-radar back-projection with a point-target simulator."""

from .backprojection import (
    FULL_MATRIX,
    PER_CHIRP_VECTOR,
    DopplerTable,
    OptimizationConfig,
    WindowSpec,
    backproject_optimized,
    backproject_reference,
    interp_linear,
    make_window,
    precompute_doppler_index,
    select_rx_subset,
    set_threads,
)
from .grid import (
    CartesianGrid,
    PolarGrid,
    SarImage,
    cartesian_grid,
    polar_grid,
    psf_resolutions,
    resample_to_cartesian,
)
from .metrics import RegionSpec, image_diff_db, memory_footprint, region_snr, run_benchmark
from .signal_model import (
    C,
    ArrayGeometry,
    ConfigError,
    RadarParams,
    Trajectory,
    antenna_positions,
    chirp_rate,
    derived_waveform,
    measurement_time,
    straight_trajectory,
)
from .simulator import BeatSpectrum, DataError, PointScatterer, add_noise, range_compress, simulate_beat_time

__version__ = "0.1.0"
