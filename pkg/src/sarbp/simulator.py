"""Synthetic FMCW beat signals from point-scatterer scenes.

The signal model is stop-and-go within a chirp with an explicit Doppler
ramp, the same model the imaging kernels invert. Fast time is measured from
the chirp midpoint, so ``f0`` is the carrier at that instant and the range
FFT is referenced to the same instant (no linear phase across bins).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .signal_model import (
    C,
    ArrayGeometry,
    ConfigError,
    RadarParams,
    Trajectory,
    all_antenna_positions,
    chirp_rate,
)
from .windows import evaluate_window

MAGIC = b"SARBP1\0\0"
_HEADER = struct.Struct("<8sIIIdd")


class DataError(ValueError):
    """Malformed or inconsistent radar data."""


@dataclass(frozen=True)
class PointScatterer:
    position: tuple[float, float]
    amplitude: complex = 1.0

    def __post_init__(self):
        if abs(self.amplitude) == 0:
            raise ConfigError("scatterer amplitude must be nonzero")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    def to_dict(self) -> dict:
        return {"x": self.position[0], "y": self.position[1],
                "amplitude": [self.amplitude.real, self.amplitude.imag]}

    @classmethod
    def from_dict(cls, d: dict) -> "PointScatterer":
        amp = d.get("amplitude", 1.0)
        if isinstance(amp, (list, tuple)):
            amp = complex(amp[0], amp[1])
        return cls((d["x"], d["y"]), amp)


@dataclass(frozen=True, eq=False)
class BeatSpectrum:
    """Range-compressed cube ``data[m, n_rx, k]`` (complex64) on an equidistant axis.

    Bin ``k`` sits at beat frequency ``f_start + k * f_step``.
    """

    data: np.ndarray
    f_start: float
    f_step: float

    def __post_init__(self):
        d = np.ascontiguousarray(self.data, dtype=np.complex64)
        if d.ndim != 3:
            raise DataError("spectrum data must be 3-D [chirp, rx, bin]")
        if not self.f_step > 0:
            raise DataError("f_step must be positive")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def nbytes(self) -> int:
        return self.data.nbytes

    def frequencies(self) -> np.ndarray:
        return self.f_start + self.f_step * np.arange(self.dims[2])

    def check(self, params: RadarParams) -> None:
        n_m, n_rx, _ = self.dims
        if n_m != params.num_chirps or n_rx != params.num_rx:
            raise DataError(
                f"spectrum dims {self.dims} do not match params "
                f"(num_chirps={params.num_chirps}, num_rx={params.num_rx})"
            )

    def save(self, path) -> None:
        n_m, n_rx, n_f = self.dims
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, n_m, n_rx, n_f, self.f_start, self.f_step))
            fh.write(self.data.astype("<c8", copy=False).tobytes())

    @classmethod
    def load(cls, path) -> "BeatSpectrum":
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, n_m, n_rx, n_f, f_start, f_step = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        expected = n_m * n_rx * n_f * 8
        body = raw[_HEADER.size:]
        if len(body) != expected:
            raise DataError(f"{path}: expected {expected} payload bytes, found {len(body)}")
        data = np.frombuffer(body, dtype="<c8").reshape(n_m, n_rx, n_f)
        return cls(data.astype(np.complex64), f_start, f_step)


def fast_time(params: RadarParams) -> np.ndarray:
    """Sample instants within a chirp, centred on the chirp midpoint."""
    n = params.num_samples
    return (np.arange(n) - (n - 1) / 2.0) / params.sample_rate


def scatterer_delays(params, traj, geom, scene):
    """Round-trip delay ``tau`` and closing speed ``v`` for every (scatterer, chirp, rx).

    Closing speed follows the imager's per-antenna radial projection of the
    platform velocity, summed over the TX and RX legs.
    """
    q_tx, q_rx = all_antenna_positions(traj, geom)
    pos = np.array([s.position for s in scene], dtype=np.float64)  # (K, 2)
    vel = traj.velocities

    r_tx = pos[:, None, :] - q_tx[None, :, :]  # (K, M, 2)
    d_tx = np.hypot(r_tx[..., 0], r_tx[..., 1])
    r_rx = pos[:, None, None, :] - q_rx[None, :, :, :]  # (K, M, N, 2)
    d_rx = np.hypot(r_rx[..., 0], r_rx[..., 1])
    if np.any(d_tx == 0) or np.any(d_rx == 0):
        raise ConfigError("scatterer coincides with an antenna position")

    v_tx = np.einsum("kmi,mi->km", r_tx, vel) / d_tx
    v_rx = np.einsum("kmni,mi->kmn", r_rx, vel) / d_rx
    tau = (d_tx[:, :, None] + d_rx) / C
    return tau, v_tx[:, :, None] + v_rx


def simulate_beat_time(params: RadarParams, traj: Trajectory, geom: ArrayGeometry, scene) -> np.ndarray:
    """Time-domain beat samples ``[m, n_rx, t]`` (complex128) for a point scene."""
    scene = list(scene)
    if not scene:
        raise ConfigError("scene must contain at least one scatterer")
    traj.check(params)
    geom.check(params)
    mu = chirp_rate(params)
    t = fast_time(params)
    tau, v = scatterer_delays(params, traj, geom, scene)

    out = np.zeros((params.num_chirps, params.num_rx, params.num_samples), dtype=np.complex128)
    for k, s in enumerate(scene):
        f_beat = mu * tau[k] + params.f0 * v[k] / C  # (M, N)
        phase = f_beat[..., None] * t + (params.f0 * tau[k])[..., None]
        out += s.amplitude * np.exp(2j * np.pi * phase)
    return out


def range_compress(samples: np.ndarray, params: RadarParams, window: str = "rectangular",
                   beta: float = 0.0, oversample: int = 1) -> BeatSpectrum:
    """Per-chirp windowed DFT of the beat samples.

    The transform is referenced to the chirp midpoint and normalised by the
    window sum, so a unit-amplitude tone on a bin centre yields a unit
    complex sample whose phase is the carrier phase. ``oversample > 1``
    zero-pads to ``oversample * N_s`` bins.
    """
    samples = np.asarray(samples)
    n = samples.shape[-1]
    if n != params.num_samples:
        raise DataError(f"expected {params.num_samples} samples per chirp, got {n}")
    if oversample < 1 or int(oversample) != oversample:
        raise ConfigError("oversample must be a positive integer")
    n_f = int(oversample) * n
    w = evaluate_window(window, np.linspace(0.0, 1.0, n), beta)
    spec = np.fft.fft(samples * w, n=n_f, axis=-1)
    k = np.arange(n_f)
    spec *= np.exp(1j * np.pi * k * (n - 1) / n_f) / w.sum()
    return BeatSpectrum(spec.astype(np.complex64), 0.0, params.sample_rate / n_f)


def add_noise(spectrum: BeatSpectrum, sigma: float, seed: int) -> BeatSpectrum:
    """Add i.i.d. circular complex Gaussian noise, ``sigma`` per component.

    Draws come from a Philox counter-based stream keyed by ``seed`` and
    consumed in fixed [m, n, k] order.
    """
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    if sigma == 0:
        return spectrum
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    noise = rng.standard_normal(spectrum.dims + (2,))
    data = spectrum.data + (sigma * (noise[..., 0] + 1j * noise[..., 1])).astype(np.complex64)
    return BeatSpectrum(data, spectrum.f_start, spectrum.f_step)


def simulate_spectrum(params, traj, geom, scene, window="rectangular", beta=0.0,
                      oversample=1, noise_sigma=0.0, seed=0) -> BeatSpectrum:
    spec = range_compress(simulate_beat_time(params, traj, geom, scene), params, window, beta, oversample)
    return add_noise(spec, noise_sigma, seed)
