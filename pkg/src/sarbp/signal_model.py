"""Radar constants, platform trajectory and antenna geometry.

Geometry is 2-D throughout. The platform frame has x along the heading and
y to the left of it, so a left-looking radar images the +y half-plane of a
pass heading along +x.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

C = 299_792_458.0  # m/s, exact


class ConfigError(ValueError):
    """Invalid parameters or configuration."""


@dataclass(frozen=True)
class RadarParams:
    f0: float  # carrier frequency at chirp midpoint, Hz
    bandwidth: float  # Hz
    chirp_duration: float  # T_P, s
    pri: float  # T_P0, s
    num_chirps: int
    num_rx: int
    num_samples: int
    sample_rate: float  # Hz

    def __post_init__(self):
        if not (self.f0 > 0 and self.bandwidth > 0):
            raise ConfigError("f0 and bandwidth must be positive")
        if not (0 < self.chirp_duration <= self.pri):
            raise ConfigError("need 0 < chirp_duration <= pri")
        if self.num_chirps < 1 or self.num_rx < 1:
            raise ConfigError("num_chirps and num_rx must be >= 1")
        if self.num_samples < 2:
            raise ConfigError("num_samples must be >= 2")
        if self.num_samples != round(self.sample_rate * self.chirp_duration):
            raise ConfigError(
                f"num_samples={self.num_samples} inconsistent with "
                f"sample_rate*chirp_duration={self.sample_rate * self.chirp_duration:g}"
            )

    @classmethod
    def measurement_radar(cls, num_chirps: int = 1024, num_rx: int = 16, num_samples: int = 1024) -> "RadarParams":
        """Parameters of the 77 GHz measurement radar with f_s = N_s / T_P."""
        t_p = 102.4e-6
        return cls(
            f0=76.6e9,
            bandwidth=931e6,
            chirp_duration=t_p,
            pri=106.7e-6,
            num_chirps=num_chirps,
            num_rx=num_rx,
            num_samples=num_samples,
            sample_rate=num_samples / t_p,
        )

    @classmethod
    def desk(cls) -> "RadarParams":
        """Small CI-sized variant: 64 chirps, 4 RX, 128 samples."""
        return cls.measurement_radar(num_chirps=64, num_rx=4, num_samples=128)

    def replace(self, **changes) -> "RadarParams":
        d = asdict(self)
        d.update(changes)
        return RadarParams(**d)

    # config file keys
    _KEYS = {
        "f0_hz": "f0",
        "bandwidth_hz": "bandwidth",
        "chirp_duration_s": "chirp_duration",
        "pri_s": "pri",
        "num_chirps": "num_chirps",
        "num_rx": "num_rx",
        "num_samples": "num_samples",
        "sample_rate_hz": "sample_rate",
    }

    def to_dict(self) -> dict:
        return {key: getattr(self, attr) for key, attr in self._KEYS.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "RadarParams":
        missing = [k for k in cls._KEYS if k not in d]
        if missing:
            raise ConfigError(f"radar config missing keys: {missing}")
        unknown = [k for k in d if k not in cls._KEYS]
        if unknown:
            raise ConfigError(f"unknown radar config keys: {unknown}")
        kw = {attr: d[key] for key, attr in cls._KEYS.items()}
        for k in ("num_chirps", "num_rx", "num_samples"):
            if int(kw[k]) != kw[k]:
                raise ConfigError(f"{k} must be an integer")
            kw[k] = int(kw[k])
        for k in ("f0", "bandwidth", "chirp_duration", "pri", "sample_rate"):
            kw[k] = float(kw[k])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RadarParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def chirp_rate(params: RadarParams) -> float:
    """Frequency slope mu = B / T_P in Hz/s."""
    return params.bandwidth / params.chirp_duration


def measurement_time(params: RadarParams) -> float:
    return params.num_chirps * params.pri


@dataclass(frozen=True)
class Waveform:
    wavelength: float
    bin_spacing: float
    range_resolution: float


def derived_waveform(params: RadarParams) -> Waveform:
    return Waveform(
        wavelength=C / params.f0,
        bin_spacing=params.sample_rate / params.num_samples,
        range_resolution=C / (2.0 * params.bandwidth),
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Per-chirp platform reference positions, velocities and unit headings.

    All three are ``(N_m, 2)`` float64 arrays and are made read-only.
    """

    poses: np.ndarray
    velocities: np.ndarray
    headings: np.ndarray

    def __post_init__(self):
        arrs = []
        for name in ("poses", "velocities", "headings"):
            a = np.array(getattr(self, name), dtype=np.float64)
            if a.ndim != 2 or a.shape[1] != 2:
                raise ConfigError(f"{name} must have shape (N_m, 2)")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
            arrs.append(a)
        n = {a.shape[0] for a in arrs}
        if len(n) != 1 or 0 in n:
            raise ConfigError("poses, velocities and headings must have the same nonzero length")
        norms = np.hypot(self.headings[:, 0], self.headings[:, 1])
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ConfigError("headings must be unit vectors")

    def __len__(self) -> int:
        return self.poses.shape[0]

    def check(self, params: RadarParams) -> None:
        if len(self) != params.num_chirps:
            raise ConfigError(f"trajectory has {len(self)} chirps, params expect {params.num_chirps}")

    @property
    def center(self) -> np.ndarray:
        """Aperture center, the mean of all poses."""
        return self.poses.mean(axis=0)

    @property
    def aperture_length(self) -> float:
        """Straight-line distance between first and last pose."""
        return float(np.hypot(*(self.poses[-1] - self.poses[0])))

    def arc_length(self) -> np.ndarray:
        """Cumulative along-track distance of each pose from the first."""
        steps = np.hypot(*np.diff(self.poses, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def to_dict(self) -> dict:
        return {
            "poses": self.poses.tolist(),
            "velocities": self.velocities.tolist(),
            "headings": self.headings.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        vel = np.asarray(d["velocities"], dtype=np.float64)
        if "headings" in d:
            head = d["headings"]
        else:
            head = _unit(vel)
        return cls(d["poses"], vel, head)


def _unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.hypot(v[:, 0], v[:, 1])
    if np.any(n == 0):
        raise ConfigError("cannot derive heading from zero velocity")
    return v / n[:, None]


def straight_trajectory(params: RadarParams, speed: float, heading=(1.0, 0.0), center=(0.0, 0.0)) -> Trajectory:
    """Constant-velocity pass whose aperture center sits at ``center``."""
    h = np.asarray(heading, dtype=np.float64)
    h = h / np.hypot(*h)
    m = np.arange(params.num_chirps) - (params.num_chirps - 1) / 2.0
    poses = np.asarray(center, dtype=np.float64) + (m * params.pri * speed)[:, None] * h
    vel = np.tile(speed * h, (params.num_chirps, 1))
    return Trajectory(poses, vel, np.tile(h, (params.num_chirps, 1)))


def accelerating_trajectory(params: RadarParams, v0: float, v1: float, heading=(1.0, 0.0), center=(0.0, 0.0)) -> Trajectory:
    """Straight pass whose speed ramps linearly from ``v0`` to ``v1``.

    Positions integrate the speed ramp (trapezoid rule between chirps) and
    are shifted so their mean lies at ``center``.
    """
    h = np.asarray(heading, dtype=np.float64)
    h = h / np.hypot(*h)
    n = params.num_chirps
    speed = np.linspace(v0, v1, n) if n > 1 else np.array([0.5 * (v0 + v1)])
    s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * params.pri)])
    s -= s.mean()
    poses = np.asarray(center, dtype=np.float64) + s[:, None] * h
    return Trajectory(poses, speed[:, None] * h, np.tile(h, (n, 1)))


def arc_trajectory(params: RadarParams, radius: float, speed: float, center=(0.0, 0.0)) -> Trajectory:
    """Constant-speed counter-clockwise arc; the middle chirp sits at ``center`` heading +x."""
    if radius <= 0:
        raise ConfigError("arc radius must be positive")
    n = params.num_chirps
    ang = (np.arange(n) - (n - 1) / 2.0) * params.pri * speed / radius
    # circle centred at (0, radius) relative to the middle pose
    poses = np.column_stack([radius * np.sin(ang), radius * (1.0 - np.cos(ang))])
    poses += np.asarray(center, dtype=np.float64)
    head = np.column_stack([np.cos(ang), np.sin(ang)])
    return Trajectory(poses, speed * head, head)


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Single TX and ``N_rx`` RX offsets in the platform frame (m)."""

    tx_offset: np.ndarray
    rx_offsets: np.ndarray

    def __post_init__(self):
        tx = np.array(self.tx_offset, dtype=np.float64).reshape(2)
        rx = np.array(self.rx_offsets, dtype=np.float64)
        if rx.ndim != 2 or rx.shape[1] != 2 or rx.shape[0] < 1:
            raise ConfigError("rx_offsets must have shape (N_rx, 2)")
        tx.setflags(write=False)
        rx.setflags(write=False)
        object.__setattr__(self, "tx_offset", tx)
        object.__setattr__(self, "rx_offsets", rx)

    @property
    def num_rx(self) -> int:
        return self.rx_offsets.shape[0]

    def check(self, params: RadarParams) -> None:
        if self.num_rx != params.num_rx:
            raise ConfigError(f"geometry has {self.num_rx} RX, params expect {params.num_rx}")

    def subset(self, indices) -> "ArrayGeometry":
        return ArrayGeometry(self.tx_offset, self.rx_offsets[list(indices)])

    @classmethod
    def uniform_linear(cls, params: RadarParams, spacing: float | None = None) -> "ArrayGeometry":
        """TX at the origin, RX spread along the heading at ``spacing`` (default lambda/2)."""
        if spacing is None:
            spacing = derived_waveform(params).wavelength / 2.0
        x = (np.arange(params.num_rx) - (params.num_rx - 1) / 2.0) * spacing
        return cls((0.0, 0.0), np.column_stack([x, np.zeros_like(x)]))

    def to_dict(self) -> dict:
        return {"tx_offset": self.tx_offset.tolist(), "rx_offsets": self.rx_offsets.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayGeometry":
        return cls(d["tx_offset"], d["rx_offsets"])


def _rotate(heading: np.ndarray, offset: np.ndarray) -> np.ndarray:
    # platform x -> heading, platform y -> heading rotated by +90 deg
    hx, hy = heading[..., 0], heading[..., 1]
    ox, oy = offset[..., 0], offset[..., 1]
    return np.stack([hx * ox - hy * oy, hy * ox + hx * oy], axis=-1)


def antenna_positions(traj: Trajectory, geom: ArrayGeometry, m: int, n_rx: int) -> tuple[np.ndarray, np.ndarray]:
    """World positions ``(q_tx, q_rx)`` of the TX and RX ``n_rx`` at chirp ``m``."""
    if not 0 <= m < len(traj):
        raise IndexError(f"chirp index {m} out of range [0, {len(traj)})")
    if not 0 <= n_rx < geom.num_rx:
        raise IndexError(f"rx index {n_rx} out of range [0, {geom.num_rx})")
    pose, head = traj.poses[m], traj.headings[m]
    return pose + _rotate(head, geom.tx_offset), pose + _rotate(head, geom.rx_offsets[n_rx])


def all_antenna_positions(traj: Trajectory, geom: ArrayGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`antenna_positions`: ``q_tx`` (N_m, 2) and ``q_rx`` (N_m, N_rx, 2)."""
    q_tx = traj.poses + _rotate(traj.headings, geom.tx_offset[None, :])
    q_rx = traj.poses[:, None, :] + _rotate(traj.headings[:, None, :], geom.rx_offsets[None, :, :])
    return q_tx, q_rx
