"""Slow, obviously-correct reference implementations used only by the tests."""

import math

import numpy as np


def dft_hilbert(x):
    """Hilbert transform straight from the DFT definition, O(N^2)."""
    x = np.asarray(x, float)
    n = x.size
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    spec = w @ x
    gain = np.zeros(n)
    gain[0] = 1.0
    for m in range(1, n):
        if 2 * m < n:
            gain[m] = 2.0
        elif 2 * m == n:
            gain[m] = 1.0
    analytic = (np.conj(w) @ (spec * gain)) / n
    return analytic.imag


def brute_unwrap(angles):
    """Pick, sample by sample, the branch a + 2 pi k nearest the previous output."""
    out = [float(angles[0])]
    for a in angles[1:]:
        base = out[-1]
        centre = round((base - a) / (2 * math.pi))
        best = min((a + 2 * math.pi * (centre + k) for k in range(-2, 3)), key=lambda v: abs(v - base))
        out.append(best)
    return np.array(out)


def prominences(x):
    """Prominence of every strict local maximum by exhaustive left/right search."""
    x = np.asarray(x, float)
    out = {}
    for i in range(1, x.size - 1):
        if not (x[i] > x[i - 1] and x[i] >= x[i + 1]):
            continue
        # plateau: only the left edge counts, and it must end lower on the right
        j = i
        while j + 1 < x.size and x[j + 1] == x[i]:
            j += 1
        if j + 1 >= x.size or x[j + 1] > x[i]:
            continue
        left_min = x[i]
        k = i - 1
        while k >= 0 and x[k] <= x[i]:
            left_min = min(left_min, x[k])
            k -= 1
        right_min = x[i]
        k = j + 1
        while k < x.size and x[k] <= x[i]:
            right_min = min(right_min, x[k])
            k += 1
        out[(i + j) // 2] = x[i] - max(left_min, right_min)
    return out


def kasa_objective(i, q, ci, cq):
    """Algebraic circle-fit cost at a given centre, minimised over r^2."""
    d2 = (np.asarray(i) - ci) ** 2 + (np.asarray(q) - cq) ** 2
    return float(np.sum((d2 - d2.mean()) ** 2))


def grid_circle_centre(i, q, centre, half_width, levels=6, n=41):
    """Coarse grid search with repeated refinement around the best point."""
    ci, cq = centre
    w = half_width
    for _ in range(levels):
        grid = np.linspace(-w, w, n)
        best = min(((kasa_objective(i, q, ci + a, cq + b), ci + a, cq + b)
                    for a in grid for b in grid))
        _, ci, cq = best
        w *= 4.0 / (n - 1)
    return ci, cq


def windowed_tone_amplitude(freq, amp, n, fs, at_freq):
    """Hann-windowed DFT magnitude of a unit-phase tone evaluated at ``at_freq``."""
    t = np.arange(n) / fs
    w = np.hanning(n)
    x = amp * np.sin(2 * np.pi * freq * t)
    return abs(np.sum(w * x * np.exp(-2j * np.pi * at_freq * t)))


def dense_peak_frequency(x, fs, band, pad=64):
    """Peak of a heavily zero-padded Hann spectrum inside ``band``."""
    x = np.asarray(x, float)
    x = x - x.mean()
    n = x.size * pad
    mag = np.abs(np.fft.rfft(x * np.hanning(x.size), n))
    f = np.fft.rfftfreq(n, 1.0 / fs)
    sel = (f >= band[0]) & (f <= band[1])
    return float(f[sel][np.argmax(mag[sel])])


def synth_sample(sc, t, dc_i, dc_q):
    """Scalar evaluation of the I/Q model at one instant (no noise, no motion)."""
    x = sc.resp_amp_m * math.sin(2 * math.pi * sc.resp_freq_hz * t) \
        + sc.heart_amp_m * math.sin(2 * math.pi * sc.heart_freq_hz * t)
    ph = 4 * math.pi * (sc.d0_m + x) / sc.wavelength_m
    return (sc.amp_i.value * math.cos(ph + sc.phi_i_rad) + dc_i,
            sc.amp_q.value * math.sin(ph + sc.phi_q_rad) + dc_q)
