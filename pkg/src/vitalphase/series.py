"""Sampled-signal containers shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class IqSeries:
    """Uniformly sampled in-phase/quadrature record.

    Parameters
    ----------
    i, q : array_like
        Channel samples, same length (at least 2).
    sample_rate_hz : float
        Sampling rate in Hz.
    """

    i: np.ndarray
    q: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        i = _frozen_array(self.i, "i")
        q = _frozen_array(self.q, "q")
        if i.shape != q.shape:
            raise ValueError(f"channel length mismatch: {i.size} vs {q.size}")
        if i.size < 2:
            raise ValueError("an IqSeries needs at least 2 samples")
        if not (np.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.i.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate_hz

    def shifted(self, di: float, dq: float) -> "IqSeries":
        return IqSeries(self.i + di, self.q + dq, self.sample_rate_hz)


@dataclass(frozen=True)
class PhaseSeries:
    """Demodulated (or ground-truth) vital-sign phase.

    ``valid_range`` is an inclusive ``(first, last)`` index pair; samples
    outside it are edge-contaminated and ignored by the metrics.
    ``displacement_m`` is ``None`` when no wavelength was supplied.
    """

    phase_rad: np.ndarray
    sample_rate_hz: float
    valid_range: Tuple[int, int]
    wavelength_m: Optional[float] = None
    displacement_m: Optional[np.ndarray] = field(default=None, init=False)

    def __post_init__(self):
        phase = np.array(self.phase_rad, dtype=float, copy=True).ravel()
        lo, hi = (int(v) for v in self.valid_range)
        if not 0 <= lo <= hi < phase.size:
            raise ValueError(f"valid_range {self.valid_range} outside 0..{phase.size - 1}")
        if not np.all(np.isfinite(phase[lo:hi + 1])):
            raise ValueError("phase is not finite inside valid_range")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        phase.setflags(write=False)
        object.__setattr__(self, "phase_rad", phase)
        object.__setattr__(self, "valid_range", (lo, hi))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        if self.wavelength_m is not None:
            if not self.wavelength_m > 0:
                raise ValueError("wavelength_m must be positive")
            disp = phase * (self.wavelength_m / (4.0 * np.pi))
            disp.setflags(write=False)
            object.__setattr__(self, "displacement_m", disp)

    def __len__(self) -> int:
        return self.phase_rad.size

    @property
    def valid_slice(self) -> slice:
        return slice(self.valid_range[0], self.valid_range[1] + 1)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate_hz
