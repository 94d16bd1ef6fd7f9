"""Phase demodulators for calibrated quadrature records.

All demodulators return a :class:`PhaseSeries` anchored to zero at the first
valid sample.  Derivative-based methods (HADCM, MDACM) and ACAA recover phase
only up to an additive constant, so the same anchoring is applied to ATAN for
comparability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal.windows import kaiser

from .series import IqSeries, PhaseSeries

EDGE_TRIM_S = 1.0
FIR_HALF_TAPS = 20
FIR_KAISER_BETA = 10.0
EPS = 1e-12


class DemodulationError(ValueError):
    pass


class DegenerateQuadratureError(DemodulationError):
    pass


class StationaryTrajectoryError(DemodulationError):
    pass


def hilbert(x) -> np.ndarray:
    """Hilbert transform (imaginary part of the analytic signal) via FFT.

    Positive-frequency bins are doubled, negative ones zeroed; DC and (for
    even lengths) Nyquist are kept as is.  ``hilbert(cos) == sin``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("hilbert needs at least 4 samples")
    spec = np.fft.fft(x)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[n // 2] = 1.0
        gain[1:n // 2] = 2.0
    else:
        gain[1:(n + 1) // 2] = 2.0
    return np.fft.ifft(spec * gain).imag


@lru_cache(maxsize=8)
def _fir_differentiator(half: int, beta: float) -> np.ndarray:
    k = np.arange(-half, half + 1)
    taps = np.zeros(k.size)
    nz = k != 0
    taps[nz] = (-1.0) ** k[nz] / k[nz]
    taps *= kaiser(k.size, beta)
    taps.setflags(write=False)
    return taps


def differentiate(x, dt: float, method: str = "central") -> np.ndarray:
    """Time derivative of a uniformly sampled sequence.

    ``method="central"``: (x[n+1] - x[n-1]) / 2dt inside, one-sided
    differences at both ends.

    ``method="fir"``: Kaiser-windowed ideal differentiator with
    ``FIR_HALF_TAPS`` taps each side.  Accurate to ~1e-4 relative up to 0.8 x
    Nyquist, which central differences are not once the phase moves by more
    than a few tenths of a radian per sample.  The first and last
    ``FIR_HALF_TAPS`` outputs fall back to central differences.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        raise ValueError("differentiate needs at least 3 samples")
    if not dt > 0:
        raise ValueError("dt must be positive")
    out = np.empty_like(x)
    out[1:-1] = (x[2:] - x[:-2]) / (2 * dt)
    out[0] = (x[1] - x[0]) / dt
    out[-1] = (x[-1] - x[-2]) / dt
    if method == "central":
        return out
    if method != "fir":
        raise ValueError(f"unknown differentiation method {method!r}")
    taps = _fir_differentiator(FIR_HALF_TAPS, FIR_KAISER_BETA)
    h = FIR_HALF_TAPS
    if x.size > 2 * h:
        out[h:-h] = np.convolve(x, taps, mode="valid") / dt
    return out


def cumulative_trapezoid(y, dt: float, start: int = 0) -> np.ndarray:
    """Trapezoidal running integral, zero at index ``start``."""
    y = np.asarray(y, float)
    steps = 0.5 * (y[1:] + y[:-1]) * dt
    out = np.concatenate([[0.0], np.cumsum(steps)])
    return out - out[start]


def edge_trim(num_samples: int, sample_rate_hz: float) -> int:
    return max(int(math.ceil(EDGE_TRIM_S * sample_rate_hz - 1e-9)), FIR_HALF_TAPS)


def _valid_range(n: int, fs: float):
    trim = edge_trim(n, fs)
    if n - 2 * trim < 2:
        raise DemodulationError(f"record of {n} samples too short for {trim}-sample edge trimming")
    return trim, n - 1 - trim


def _finish(phase: np.ndarray, fs: float, valid, wavelength_m) -> PhaseSeries:
    phase = phase - phase[valid[0]]
    return PhaseSeries(phase, fs, valid, wavelength_m=wavelength_m)


def quadrature_denominator(iq: IqSeries) -> np.ndarray:
    """Pointwise I_H Q - I Q_H with Hilbert-transformed channels.

    Equals A_I A_Q cos(phi_I - phi_Q) wherever the Hilbert transform of each
    channel is its exact quadrature partner (narrowband phase, e.g. a
    dominant monotone phase ramp).  For purely oscillatory baseband phase
    with a swing of many radians it is not constant.
    """
    # hilbert(cos) = sin and hilbert(sin) = -cos, so I_H = A_I sin, Q_H = -A_Q cos
    i_h = hilbert(iq.i)
    q_h = hilbert(iq.q)
    return i_h * iq.q - iq.i * q_h


@dataclass(frozen=True)
class QuadratureEllipse:
    """Conic ``c1 I^2 + c2 Q^2 + c3 I Q + c4 I + c5 Q = 1`` fitted to a trajectory.

    For ``(A_I cos(u + phi_I), A_Q sin(u + phi_Q))`` shifted by a centre,
    ``constant`` is ``A_I A_Q cos(phi_I - phi_Q)`` and ``level(i, q)`` is
    the centred quadratic form normalised to 1 on the ellipse.
    """

    quad: np.ndarray
    centre: np.ndarray
    constant: float

    @classmethod
    def fit(cls, i, q) -> "QuadratureEllipse":
        i = np.asarray(i, float)
        q = np.asarray(q, float)
        design = np.column_stack([i * i, q * q, i * q, i, q])
        coef, _, rank, sv = np.linalg.lstsq(design, np.ones_like(i), rcond=None)
        if rank < 5 or not sv[-1] > 1e-10 * sv[0]:
            raise DegenerateQuadratureError("trajectory does not span an ellipse")
        quad = np.array([[coef[0], coef[2] / 2], [coef[2] / 2, coef[1]]])
        det = float(np.linalg.det(quad))
        if not (det > 0 and quad[0, 0] > 0):
            raise DegenerateQuadratureError("trajectory is not an ellipse")
        centre = -np.linalg.solve(quad, coef[3:]) / 2
        level = 1.0 + float(centre @ quad @ centre)
        if not level > 0:
            raise DegenerateQuadratureError("trajectory is not an ellipse")
        quad = quad / level
        return cls(quad, centre, float(1.0 / math.sqrt(np.linalg.det(quad))))

    def level(self, i, q) -> np.ndarray:
        u = np.asarray(i, float) - self.centre[0]
        v = np.asarray(q, float) - self.centre[1]
        return self.quad[0, 0] * u * u + self.quad[1, 1] * v * v + 2 * self.quad[0, 1] * u * v


def ellipse_constant(i, q) -> float:
    """A_I A_Q cos(phi_I - phi_Q) of a trajectory, via :class:`QuadratureEllipse`."""
    return QuadratureEllipse.fit(i, q).constant


def hadcm(iq_calibrated: IqSeries, wavelength_m: Optional[float] = None,
          denominator: str = "ellipse", derivative: str = "fir",
          median_window_s: float = 1.0) -> PhaseSeries:
    """Hilbert and differentiate cross-multiply demodulation.

    The phase derivative is the ratio of the cross-multiplied numerator
    ``I dQ/dt - Q dI/dt = K p'(t)`` and the quadrature constant
    ``K = A_I A_Q cos(phi_I - phi_Q)``.  ``denominator`` selects how K is
    obtained:

    ``"ellipse"``
        origin-centred conic fit over the valid range (default).
    ``"hilbert-median"``
        ``I_H Q - I Q_H`` smoothed by a moving median of
        ``median_window_s``; valid only for narrowband phase.
    ``"hilbert"``
        the same series divided pointwise.
    """
    n, fs = len(iq_calibrated), iq_calibrated.sample_rate_hz
    valid = _valid_range(n, fs)
    i, q = iq_calibrated.i, iq_calibrated.q
    di = differentiate(i, 1.0 / fs, derivative)
    dq = differentiate(q, 1.0 / fs, derivative)
    numer = i * dq - q * di

    sl = slice(valid[0], valid[1] + 1)
    if denominator == "ellipse":
        ell = QuadratureEllipse.fit(i[sl], q[sl])
        denom = ell.constant * ell.level(i, q)
    elif denominator == "ellipse-constant":
        denom = np.full(n, ellipse_constant(i[sl], q[sl]))
    elif denominator in ("hilbert", "hilbert-median"):
        denom = quadrature_denominator(iq_calibrated)
        if denominator == "hilbert-median":
            width = max(int(round(median_window_s * fs)) | 1, 1)
            denom = median_filter(denom, size=width, mode="nearest")
    else:
        raise ValueError(f"unknown denominator mode {denominator!r}")
    scale = max(float(np.max(np.abs(i[sl]))) * float(np.max(np.abs(q[sl]))), EPS)
    if np.any(np.abs(denom[sl]) < 1e-9 * scale):
        raise DegenerateQuadratureError("quadrature denominator vanishes")
    rate = numer / denom
    return _finish(cumulative_trapezoid(rate, 1.0 / fs, start=valid[0]), fs, valid, wavelength_m)


def unwrap(angles) -> np.ndarray:
    """Add multiples of 2 pi so successive samples never jump by more than pi."""
    a = np.asarray(angles, float)
    d = np.diff(a)
    corr = -2 * np.pi * np.round(d / (2 * np.pi))
    # a jump of exactly +-pi is left alone
    corr[np.abs(d) <= np.pi] = 0.0
    return a + np.concatenate([[0.0], np.cumsum(corr)])


def atan_demod(iq: IqSeries, wavelength_m: Optional[float] = None) -> PhaseSeries:
    """Unwrapped arctangent of Q/I.  No DC removal is done here."""
    if np.any((iq.i == 0) & (iq.q == 0)):
        raise DemodulationError("arctangent undefined at I = Q = 0")
    phase = unwrap(np.arctan2(iq.q, iq.i))
    return _finish(phase, iq.sample_rate_hz, _valid_range(len(iq), iq.sample_rate_hz), wavelength_m)


def mdacm_demod(iq: IqSeries, wavelength_m: Optional[float] = None,
                derivative: str = "central") -> PhaseSeries:
    """Differentiate-and-cross-multiply with per-sample power normalisation.

    p'(t) = (I dQ/dt - Q dI/dt) / (I^2 + Q^2), integrated trapezoidally.
    The default central-difference derivative is the classic discrete form.
    """
    n, fs = len(iq), iq.sample_rate_hz
    if n < 3:
        raise ValueError("need at least 3 samples")
    valid = _valid_range(n, fs)
    power = iq.i ** 2 + iq.q ** 2
    scale = max(float(np.median(power)), EPS)
    if np.any(power < 1e-12 * scale):
        raise DemodulationError("I^2 + Q^2 vanishes")
    di = differentiate(iq.i, 1.0 / fs, derivative)
    dq = differentiate(iq.q, 1.0 / fs, derivative)
    rate = (iq.i * dq - iq.q * di) / power
    return _finish(cumulative_trapezoid(rate, 1.0 / fs, start=valid[0]), fs, valid, wavelength_m)


def _circumradii(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # circle through p0, p0 + a, p0 + a + b, from the two chords alone
    c = a + b
    la, lb, lc = (np.hypot(v[:, 0], v[:, 1]) for v in (a, b, c))
    area2 = np.abs(a[:, 0] * c[:, 1] - a[:, 1] * c[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        return la * lb * lc / (2 * area2)


def acaa_demod(iq: IqSeries, wavelength_m: Optional[float] = None,
               reversal: str = "geometry") -> PhaseSeries:
    """Adjacent chord angle accumulation.

    For points on a circle the turn between consecutive chords equals half
    the central angle they span, whatever the centre, so accumulated turns
    track the phase independently of DC offsets.  Only chord vectors enter
    the computation.

    When the motion reverses, the chord direction flips and the measured
    turn is off by pi.  ``reversal`` picks how that is undone:

    ``"geometry"``
        compare the turn with what the two chord lengths predict on a
        circle of the trajectory's median circumradius, for a forward step
        (half the sum of their central angles) and for a reversal (half the
        difference, plus pi); keep the better match.
    ``"threshold"``
        treat any turn beyond pi/2 as a reversal.  Breaks down once the
        phase advances more than pi/2 per sample.
    ``"continuity"``
        keep whichever reading is closer to the previous turn.
    ``"none"``
        accumulate raw turns.

    Chords shorter than 1e-6 x the trajectory's robust scale are merged with
    the following one.  Each accumulated chord angle is placed at the chord's
    mid-time and interpolated onto the sample grid.
    """
    if reversal not in ("geometry", "threshold", "continuity", "none"):
        raise ValueError(f"unknown reversal rule {reversal!r}")
    n, fs = len(iq), iq.sample_rate_hz
    if n < 3:
        raise ValueError("need at least 3 samples")
    valid = _valid_range(n, fs)
    steps = np.column_stack([np.diff(iq.i), np.diff(iq.q)])
    # positions relative to the first sample: exact under exact translations
    rel = np.cumsum(np.vstack([np.zeros((1, 2)), steps]), axis=0)
    spread = np.percentile(rel, 90, axis=0) - np.percentile(rel, 10, axis=0)
    eps = 1e-6 * max(float(np.hypot(*spread)), EPS)

    verts = [0]
    for k in range(1, n):
        d = rel[k] - rel[verts[-1]]
        if math.hypot(d[0], d[1]) >= eps:
            verts.append(k)
    if len(verts) < 3:
        raise StationaryTrajectoryError("trajectory does not move")
    verts = np.asarray(verts)
    chords = np.diff(rel[verts], axis=0)

    a, b = chords[:-1], chords[1:]
    turns = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0], a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1])
    flipped = turns - np.copysign(np.pi, turns)
    if reversal == "threshold":
        turns = np.where(np.abs(turns) > np.pi / 2, flipped, turns)
    elif reversal == "geometry":
        radius = np.nanmedian(_circumradii(a, b))
        if not np.isfinite(radius) or radius <= 0:
            raise StationaryTrajectoryError("cannot infer a trajectory radius")
        lengths = np.hypot(chords[:, 0], chords[:, 1])
        central = 2 * np.arcsin(np.clip(lengths / (2 * radius), 0.0, 1.0))
        forward = 0.5 * (central[:-1] + central[1:])
        backward = 0.5 * np.abs(central[:-1] - central[1:])
        reverse = np.abs(np.abs(flipped) - backward) < np.abs(np.abs(turns) - forward)
        turns = np.where(reverse, flipped, turns)
    elif reversal == "continuity":
        last = 0.0
        out = turns.copy()
        for k in range(turns.size):
            if abs(flipped[k] - last) < abs(turns[k] - last):
                out[k] = flipped[k]
            last = out[k]
        turns = out

    chord_phase = np.concatenate([[0.0], np.cumsum(turns)])
    chord_time = 0.5 * (verts[:-1] + verts[1:])
    phase = np.interp(np.arange(n), chord_time, chord_phase)
    return _finish(phase, fs, valid, wavelength_m)


DEMODULATORS = {
    "atan": atan_demod,
    "mdacm": mdacm_demod,
    "acaa": acaa_demod,
    "hadcm": hadcm,
}
