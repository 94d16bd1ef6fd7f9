"""Quality measures for calibration and demodulation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .series import IqSeries, PhaseSeries

DC_EPS = 1e-12


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class SpectrumResult:
    freq_hz: np.ndarray
    amplitude_norm: np.ndarray
    resolution_hz: float


@dataclass(frozen=True)
class MetricsRow:
    """One trial's result.

    ``snr_db`` is ``None`` for noise-free runs, ``window_length_s`` is
    ``None`` when no window applies and ``rr_error_bpm`` is ``None`` when
    rate was not estimated.  ``error`` carries the failure message of a
    failed trial, whose numeric fields are then NaN.
    """

    algorithm: str
    snr_db: Optional[float]
    window_length_s: Optional[float]
    e_i: float
    e_q: float
    rmse_mm: Optional[float]
    rr_error_bpm: Optional[float]
    seed: int
    trial: int = 0
    error: Optional[str] = None

    def __post_init__(self):
        if self.error is None:
            for name in ("e_i", "e_q", "rmse_mm", "rr_error_bpm"):
                v = getattr(self, name)
                if v is not None and not (math.isfinite(v) and v >= 0):
                    raise MetricsError(f"{name} must be finite and non-negative, got {v!r}")

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(raw, cal, dc) -> Tuple[float, int]:
    raw, cal, dc = (np.asarray(v, float) for v in (raw, cal, dc))
    if not raw.shape == cal.shape == dc.shape:
        raise MetricsError("raw, calibrated and true DC lengths differ")
    scale = max(float(np.max(np.abs(dc))), DC_EPS) if dc.size else DC_EPS
    keep = np.abs(dc) > DC_EPS * scale
    if not keep.any():
        raise MetricsError("true DC is zero at every sample")
    return float(np.mean(np.abs(raw[keep] - cal[keep]) / np.abs(dc[keep]))), int(keep.sum())


def dc_relative_error(raw: IqSeries, calibrated: IqSeries,
                      true_dc_i: Sequence[float], true_dc_q: Sequence[float]) -> Tuple[float, float]:
    """Fraction of the true DC offset removed, averaged over samples.

    1.0 is perfect removal, 0.0 means nothing was removed; over-subtraction
    gives values above 1.  Samples whose true DC is (numerically) zero are
    skipped.
    """
    if len(raw) != len(calibrated):
        raise MetricsError("raw and calibrated lengths differ")
    e_i, _ = _ratio(raw.i, calibrated.i, true_dc_i)
    e_q, _ = _ratio(raw.q, calibrated.q, true_dc_q)
    return e_i, e_q


def displacement_rmse(estimate: PhaseSeries, truth: PhaseSeries) -> float:
    """RMS displacement error in millimetres, after removing the mean offset.

    Evaluated over the intersection of both valid ranges.
    """
    if estimate.displacement_m is None or truth.displacement_m is None:
        raise MetricsError("both series need a wavelength to give displacement")
    if not math.isclose(estimate.sample_rate_hz, truth.sample_rate_hz, rel_tol=1e-12):
        raise MetricsError("sample rates differ")
    lo = max(estimate.valid_range[0], truth.valid_range[0])
    hi = min(estimate.valid_range[1], truth.valid_range[1], len(estimate) - 1, len(truth) - 1)
    if hi < lo:
        raise MetricsError("valid ranges do not overlap")
    diff = estimate.displacement_m[lo:hi + 1] - truth.displacement_m[lo:hi + 1]
    diff = diff - diff.mean()
    return float(np.sqrt(np.mean(diff * diff)) * 1e3)


def _samples(series, sample_rate_hz):
    if isinstance(series, PhaseSeries):
        x = series.phase_rad[series.valid_slice]
        fs = series.sample_rate_hz if sample_rate_hz is None else sample_rate_hz
    else:
        x = np.asarray(series, float)
        fs = sample_rate_hz
    if fs is None or not fs > 0:
        raise MetricsError("a positive sample rate is required")
    return x, float(fs)


def spectrum(series: Union[PhaseSeries, Sequence[float]],
             sample_rate_hz: Optional[float] = None) -> SpectrumResult:
    """Hann-windowed magnitude spectrum on [0, Nyquist], peak normalised to 1.

    A :class:`PhaseSeries` contributes its valid range and its own rate.
    """
    x, fs = _samples(series, sample_rate_hz)
    if x.size < 8:
        raise MetricsError("spectrum needs at least 8 samples")
    x = x - x.mean()
    mag = np.abs(np.fft.rfft(x * np.hanning(x.size)))
    peak = mag.max()
    if not peak > 0:
        raise MetricsError("input has no AC content")
    return SpectrumResult(np.fft.rfftfreq(x.size, 1.0 / fs), mag / peak, fs / x.size)


def estimate_rate(series: Union[PhaseSeries, Sequence[float]], band_hz: Tuple[float, float],
                  sample_rate_hz: Optional[float] = None) -> float:
    """Dominant rate inside ``band_hz`` in cycles per minute.

    The strongest in-band bin is refined by a parabola through its log
    magnitude and its two neighbours.
    """
    low, high = band_hz
    x, fs = _samples(series, sample_rate_hz)
    if not 0 < low < high <= fs / 2:
        raise MetricsError(f"band {band_hz} must lie inside (0, {fs / 2}]")
    if x.size / fs < 3.0 / low:
        raise MetricsError(f"record of {x.size / fs:g} s is shorter than 3 periods of {low} Hz")
    spec = spectrum(x, fs)
    f, a = spec.freq_hz, spec.amplitude_norm
    in_band = np.flatnonzero((f >= low) & (f <= high))
    if in_band.size == 0:
        raise MetricsError(f"no spectral bins inside {band_hz}")
    k = int(in_band[np.argmax(a[in_band])])
    offset = 0.0
    if 0 < k < a.size - 1:
        y0, y1, y2 = np.log(np.maximum(a[k - 1:k + 2], 1e-300))
        den = y0 - 2 * y1 + y2
        if den < 0:
            offset = float(np.clip(0.5 * (y0 - y2) / den, -0.5, 0.5))
    return 60.0 * (f[k] + offset * spec.resolution_hz)
