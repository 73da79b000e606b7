"""Taper families evaluated on a normalised abscissa ``u`` in [0, 1]."""

from __future__ import annotations

import numpy as np

from .signal_model import ConfigError

FAMILIES = ("rectangular", "hann", "kaiser")


def evaluate_window(family: str, u, beta: float = 0.0) -> np.ndarray:
    """Window value at each ``u``; endpoints are u=0 and u=1.

    >>> evaluate_window("hann", [0.0, 0.5, 1.0])
    array([0., 1., 0.])
    """
    u = np.asarray(u, dtype=np.float64)
    family = family.lower()
    if family == "rectangular":
        return np.ones_like(u)
    if family == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * u)
    if family == "kaiser":
        if beta < 0:
            raise ConfigError("Kaiser beta must be >= 0")
        arg = np.clip(1.0 - (2.0 * u - 1.0) ** 2, 0.0, None)
        return np.i0(beta * np.sqrt(arg)) / np.i0(beta)
    raise ConfigError(f"unknown window family {family!r}; expected one of {FAMILIES}")


def mainlobe_width_3db(family: str, beta: float = 0.0, n: int = 256, pad: int = 256) -> float:
    """-3 dB width of the window's spectral main lobe, in DFT bins of length ``n``.

    Measured numerically on a heavily zero-padded transform; this is the
    broadening factor of the compressed-pulse width relative to ``1 / T``.
    """
    w = evaluate_window(family, np.linspace(0.0, 1.0, n), beta)
    spec = np.abs(np.fft.fft(w, n * pad))
    spec /= spec[0]
    # first crossing below 1/sqrt(2) on the positive-frequency side
    below = np.nonzero(spec[: n * pad // 2] < 1.0 / np.sqrt(2.0))[0][0]
    # linear refinement between the bracketing samples
    y0, y1 = spec[below - 1], spec[below]
    frac = (y0 - 1.0 / np.sqrt(2.0)) / (y0 - y1)
    return 2.0 * (below - 1 + frac) / pad
