"""Compiled back-projection loops.

Parallel over pixels only; each pixel reduces chirps (outer) then RX
(inner) sequentially in float64, so output does not depend on thread count.
Geometry arrives as float32 and is widened to float64 before arithmetic.
"""

import math
import warnings

import numpy as np
from numba import njit, prange

# old system TBB builds trigger a harmless fallback warning on first parallel launch
warnings.filterwarnings("ignore", message="The TBB threading layer")

C = 299_792_458.0
TWO_PI = 2.0 * math.pi

# per-pixel counter columns
N_DIST, N_DOT, N_EXP, N_INTERP = 0, 1, 2, 3
N_COUNTERS = 4


@njit(cache=True)
def interp_bins(data, m, n, idx):
    """Linear interpolation of ``data[m, n, :]`` at fractional bin ``idx``; zero outside."""
    n_f = data.shape[2]
    if not (idx >= 0.0 and idx <= n_f - 1):
        return 0j
    i0 = int(idx)
    if i0 >= n_f - 1:
        v = data[m, n, n_f - 1]
        return complex(v.real, v.imag)
    frac = idx - i0
    a = data[m, n, i0]
    b = data[m, n, i0 + 1]
    return complex((1.0 - frac) * a.real + frac * b.real, (1.0 - frac) * a.imag + frac * b.imag)


@njit(parallel=True, cache=True)
def bp_kernel(pix, q_tx, q_rx, vel, data, window, doppler,
              f0, mu, f_start, f_step, idx0, a1, a2, a3,
              exact_doppler, index_space, out, bad, counters):
    n_pix = pix.shape[0]
    n_m = data.shape[0]
    n_rx = data.shape[1]
    per_pixel_window = window.shape[0] > 1
    count = counters.shape[0] > 0

    for p in prange(n_pix):
        x = np.float64(pix[p, 0])
        y = np.float64(pix[p, 1])
        wrow = np.int64(p) if per_pixel_window else np.int64(0)
        dop = 0.0
        if not exact_doppler:
            dop = np.float64(doppler[p])
        acc_re = 0.0
        acc_im = 0.0
        n_dist = 0
        n_dot = 0
        n_exp = 0
        n_int = 0
        flagged = False

        for m in range(n_m):
            dx_t = x - np.float64(q_tx[m, 0])
            dy_t = y - np.float64(q_tx[m, 1])
            d_tx = math.sqrt(dx_t * dx_t + dy_t * dy_t)
            n_dist += 1
            if d_tx == 0.0:
                flagged = True
                break
            v_tx = 0.0
            vx = 0.0
            vy = 0.0
            if exact_doppler:
                vx = np.float64(vel[m, 0])
                vy = np.float64(vel[m, 1])
                v_tx = (dx_t * vx + dy_t * vy) / d_tx
                n_dot += 1
            w = np.float64(window[wrow, m])

            for n in range(n_rx):
                dx_r = x - np.float64(q_rx[m, n, 0])
                dy_r = y - np.float64(q_rx[m, n, 1])
                d_rx = math.sqrt(dx_r * dx_r + dy_r * dy_r)
                n_dist += 1
                if d_rx == 0.0:
                    flagged = True
                    break
                v = 0.0
                if exact_doppler:
                    v = v_tx + (dx_r * vx + dy_r * vy) / d_rx
                    n_dot += 1

                if index_space:
                    d_hyp = d_tx + d_rx
                    if exact_doppler:
                        idx = a1 * d_hyp + a3 * v + idx0
                    else:
                        idx = a1 * d_hyp + dop + idx0
                    phase = a2 * d_hyp
                else:
                    tau = (d_tx + d_rx) / C
                    if exact_doppler:
                        f_hyp = mu * tau + f0 * v / C
                    else:
                        f_hyp = mu * tau + dop * f_step
                    idx = (f_hyp - f_start) / f_step
                    phase = -TWO_PI * f0 * tau

                s_re = math.cos(phase)
                s_im = math.sin(phase)
                n_exp += 1
                val = interp_bins(data, m, n, idx)
                n_int += 1
                acc_re += w * (s_re * val.real - s_im * val.imag)
                acc_im += w * (s_re * val.imag + s_im * val.real)
            if flagged:
                break

        if flagged:
            out[p] = 0j
            bad[p] = True
        else:
            out[p] = complex(acc_re, acc_im)
            bad[p] = False
        if count:
            counters[p, N_DIST] = n_dist
            counters[p, N_DOT] = n_dot
            counters[p, N_EXP] = n_exp
            counters[p, N_INTERP] = n_int
