"""Time-varying DC offset estimation and removal.

Two estimators are provided:

* peak-valley: a local maximum and the neighbouring minimum of a channel sit
  at +A + DC and -A + DC, so their midpoint is a DC sample independent of the
  amplitude.  Midpoints are then averaged over non-overlapping windows.
* circle fit: algebraic (Kasa) least-squares circle through the I/Q scatter
  of each window; its centre is the DC pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.signal import find_peaks

from .series import IqSeries

DEFAULT_PROMINENCE_FRACTION = 0.3


class CalibrationError(ValueError):
    pass


class InsufficientExtremaError(CalibrationError):
    pass


@dataclass(frozen=True)
class ExtremaSet:
    peak_indices: np.ndarray
    valley_indices: np.ndarray

    def merged(self):
        """Extrema in index order as ``(indices, is_peak)`` arrays."""
        idx = np.concatenate([self.peak_indices, self.valley_indices])
        kind = np.concatenate([np.ones(self.peak_indices.size, bool),
                               np.zeros(self.valley_indices.size, bool)])
        order = np.argsort(idx, kind="stable")
        return idx[order], kind[order]


@dataclass(frozen=True)
class DcEstimate:
    """Per-window DC estimate for one channel.

    Window ``k`` is centred at ``(k + 0.5) * step`` samples and spans
    ``window`` samples, where ``step`` is the hop (equal to the window
    length when windows do not overlap, so window ``k`` covers
    ``[k * window, (k + 1) * window)``).
    """

    window_length_s: float
    values: np.ndarray
    num_samples: int
    sample_rate_hz: float
    hop_s: Optional[float] = None

    @property
    def step_s(self) -> float:
        return self.hop_s if self.hop_s is not None else self.window_length_s

    def centres(self) -> np.ndarray:
        step = self.step_s * self.sample_rate_hz
        return (np.arange(len(self.values)) + 0.5) * step

    def expand(self, mode: str = "linear") -> np.ndarray:
        """Per-sample DC offset.

        ``"step"`` holds each value over its hop; ``"linear"`` interpolates
        between window centres (flat beyond the outermost centres), which
        avoids steps that a differentiator would turn into impulses.
        """
        step = self.step_s * self.sample_rate_hz
        n = np.arange(self.num_samples)
        values = np.asarray(self.values, float)
        if mode == "step":
            k = np.floor(n / step).astype(int)
            return values[np.minimum(k, len(values) - 1)]
        if mode != "linear":
            raise ValueError(f"unknown expansion mode {mode!r}")
        centres = np.minimum(self.centres(), self.num_samples - 1)
        return np.interp(n, centres, values)

    @classmethod
    def constant(cls, value: float, num_samples: int, sample_rate_hz: float) -> "DcEstimate":
        duration = num_samples / sample_rate_hz
        return cls(duration, np.array([float(value)]), num_samples, sample_rate_hz)


def window_count(num_samples: int, step_s: float, sample_rate_hz: float) -> int:
    return int(math.ceil(num_samples / (step_s * sample_rate_hz) - 1e-9))


def robust_range(x: np.ndarray) -> float:
    p10, p90 = np.percentile(x, [10, 90])
    return float(p90 - p10)


def moving_average(x: np.ndarray, width: int) -> np.ndarray:
    """Centred moving average; edges average over the available samples."""
    if width <= 1:
        return np.asarray(x, float)
    kernel = np.ones(width)
    num = np.convolve(x, kernel, mode="same")
    den = np.convolve(np.ones(len(x)), kernel, mode="same")
    return num / den


def _collapse(idx: np.ndarray, is_peak: np.ndarray, x: np.ndarray):
    keep_idx, keep_kind = [], []
    for i, pk in zip(idx, is_peak):
        if keep_kind and keep_kind[-1] == pk:
            # same kind twice in a row: keep the more extreme one
            prev = keep_idx[-1]
            if (pk and x[i] > x[prev]) or (not pk and x[i] < x[prev]):
                keep_idx[-1] = i
            continue
        keep_idx.append(i)
        keep_kind.append(pk)
    return np.array(keep_idx, dtype=int), np.array(keep_kind, dtype=bool)


def find_extrema(channel, min_prominence: float) -> ExtremaSet:
    """Alternating local maxima/minima with prominence >= ``min_prominence``.

    Raises
    ------
    InsufficientExtremaError
        If not at least one peak and one valley survive.
    """
    x = np.asarray(channel, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 samples")
    if min_prominence < 0:
        raise ValueError("min_prominence must be non-negative")
    # scipy treats prominence=0 as "no constraint" on the value but still
    # computes it; a tiny positive floor drops flat plateaus of zero height
    prom = max(min_prominence, 1e-12)
    peaks, _ = find_peaks(x, prominence=prom)
    valleys, _ = find_peaks(-x, prominence=prom)
    if peaks.size == 0 or valleys.size == 0:
        raise InsufficientExtremaError(
            f"found {peaks.size} peaks and {valleys.size} valleys; need at least one of each")
    ext = ExtremaSet(peaks, valleys)
    idx, kind = _collapse(*ext.merged(), x)
    return ExtremaSet(idx[kind], idx[~kind])


def peak_valley_dc_samples(channel, extrema: ExtremaSet) -> Tuple[np.ndarray, np.ndarray]:
    """Midpoint DC samples from every adjacent peak/valley pair.

    Returns ``(positions, values)``; positions are (possibly fractional)
    sample indices halfway between the two extrema of each pair.
    """
    x = np.asarray(channel, dtype=float)
    idx, _ = extrema.merged()
    if idx.size < 2:
        raise CalibrationError("no adjacent peak/valley pair to pair up")
    if idx[0] < 0 or idx[-1] >= x.size:
        raise CalibrationError("extrema indices outside the channel")
    a, b = idx[:-1], idx[1:]
    return (a + b) / 2.0, (x[a] + x[b]) / 2.0


def windowed_dc(positions, values, window_length_s: float, num_samples: int,
                sample_rate_hz: float, hop_s: Optional[float] = None) -> DcEstimate:
    """Average DC samples over consecutive windows.

    Empty windows inherit the previous window's value; an empty first window
    takes the global mean.
    """
    positions = np.asarray(positions, float)
    values = np.asarray(values, float)
    if values.size == 0:
        raise CalibrationError("no DC samples to window")
    if not window_length_s > 0:
        raise ValueError("window_length_s must be positive")
    if hop_s is not None and not 0 < hop_s <= window_length_s:
        raise ValueError("hop_s must lie in (0, window_length_s]")
    step_s = hop_s if hop_s is not None else window_length_s
    win = window_length_s * sample_rate_hz
    step = step_s * sample_rate_hz
    n_win = window_count(num_samples, step_s, sample_rate_hz)

    out = np.empty(n_win)
    prev = float(values.mean())
    for k in range(n_win):
        start = (k + 0.5) * step - win / 2
        mask = (positions >= start) & (positions < start + win)
        if mask.any():
            prev = float(values[mask].mean())
        out[k] = prev
    return DcEstimate(window_length_s, out, num_samples, sample_rate_hz, hop_s)


def peak_valley_estimate(channel, sample_rate_hz: float, window_length_s: float = 2.0,
                         min_prominence: Optional[float] = None, smooth: int = 0,
                         hop_s: Optional[float] = None,
                         prominence_fraction: float = DEFAULT_PROMINENCE_FRACTION) -> DcEstimate:
    """Peak-valley DC estimate of one channel.

    ``min_prominence`` defaults to ``prominence_fraction`` x (90th - 10th
    percentile range).
    ``smooth`` > 1 applies a centred moving average of that many samples
    before extrema are located and read.  Falls back to the whole-record
    mean when the channel has no usable extrema.
    """
    x = np.asarray(channel, float)
    if smooth and smooth > 1:
        x = moving_average(x, smooth)
    if min_prominence is None:
        min_prominence = prominence_fraction * robust_range(x)
    try:
        ext = find_extrema(x, min_prominence)
        pos, val = peak_valley_dc_samples(x, ext)
    except CalibrationError:
        return DcEstimate.constant(float(np.mean(channel)), x.size, sample_rate_hz)
    return windowed_dc(pos, val, window_length_s, x.size, sample_rate_hz, hop_s)


def calibrate(iq: IqSeries, dc_i: DcEstimate, dc_q: DcEstimate, expand: str = "linear") -> IqSeries:
    """Subtract the expanded DC estimates from each channel."""
    for est in (dc_i, dc_q):
        if est.num_samples != len(iq):
            raise CalibrationError(f"DC estimate covers {est.num_samples} samples, series has {len(iq)}")
    return IqSeries(iq.i - dc_i.expand(expand), iq.q - dc_q.expand(expand), iq.sample_rate_hz)


def circle_fit_dc(i, q) -> Tuple[float, float]:
    """Centre of the algebraic least-squares circle through (i, q).

    Minimises sum((|s - c|^2 - r^2)^2) by solving the linear system in
    ``(2 c_i, 2 c_q, r^2 - |c|^2)``.
    """
    i = np.asarray(i, float)
    q = np.asarray(q, float)
    if i.size < 3:
        raise CalibrationError("circle fit needs at least 3 points")
    # centre the data first for conditioning
    mi, mq = i.mean(), q.mean()
    u, v = i - mi, q - mq
    design = np.column_stack([u, v, np.ones_like(u)])
    rhs = u * u + v * v
    gram = design.T @ design
    scale = np.abs(gram).max()
    if scale == 0 or np.linalg.cond(gram) > 1e12:
        raise CalibrationError("degenerate (collinear) scatter for circle fit")
    sol = np.linalg.solve(gram, design.T @ rhs)
    return float(mi + sol[0] / 2), float(mq + sol[1] / 2)


def circle_fit_estimate(iq: IqSeries, window_length_s: Optional[float] = None):
    """Per-window circle-fit centres as ``(DcEstimate_i, DcEstimate_q)``.

    ``window_length_s=None`` fits the whole record once.  A degenerate window
    inherits the previous centre (the first falls back to the channel means).
    """
    n, fs = len(iq), iq.sample_rate_hz
    if window_length_s is None:
        ci, cq = circle_fit_dc(iq.i, iq.q)
        return DcEstimate.constant(ci, n, fs), DcEstimate.constant(cq, n, fs)
    win = window_length_s * fs
    n_win = window_count(n, window_length_s, fs)
    out_i, out_q = np.empty(n_win), np.empty(n_win)
    prev = (float(iq.i.mean()), float(iq.q.mean()))
    for k in range(n_win):
        sl = slice(int(math.ceil(k * win - 1e-9)), int(math.ceil(min((k + 1) * win, n) - 1e-9)))
        try:
            prev = circle_fit_dc(iq.i[sl], iq.q[sl])
        except CalibrationError:
            pass
        out_i[k], out_q[k] = prev
    return (DcEstimate(window_length_s, out_i, n, fs),
            DcEstimate(window_length_s, out_q, n, fs))
