"""Recorded I/Q trace files and offline demodulation of them.

A trace is UTF-8 text with LF line endings: the header ``t_s,i,q`` and one
``time,i,q`` sample per line.  The sample rate is taken from the median
time step; steps deviating from it by more than 1% are rejected.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from .calibration import calibrate
from .config import CalibrationConfig, DemodConfig
from .harness import demodulate, estimate_dc, fmt_number
from .metrics import SpectrumResult, estimate_rate, spectrum
from .series import IqSeries, PhaseSeries

HEADER = "t_s,i,q"
MAX_JITTER = 0.01
PathLike = Union[str, Path]


class TraceFormatError(ValueError):
    """Malformed trace; ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def format_trace(iq: IqSeries) -> str:
    lines = [HEADER]
    for n, (i, q) in enumerate(zip(iq.i, iq.q)):
        lines.append(f"{fmt_number(n / iq.sample_rate_hz)},{fmt_number(i)},{fmt_number(q)}")
    return "\n".join(lines) + "\n"


def write_trace(path: PathLike, iq: IqSeries) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trace(iq))
    return path


def parse_trace(text: str) -> IqSeries:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TraceFormatError("empty trace; expected header 't_s,i,q'")
    for lineno, line in enumerate(lines, start=1):
        if line.endswith("\r"):
            raise TraceFormatError("CR line ending; traces use LF only", lineno)
    header = lines[0].lstrip("﻿")
    if header != HEADER:
        raise TraceFormatError(f"header must be exactly {HEADER!r}, got {header!r}", 1)
    t = np.empty(len(lines) - 1)
    iq = np.empty((len(lines) - 1, 2))
    for k, line in enumerate(lines[1:]):
        lineno = k + 2
        cells = line.split(",")
        if len(cells) != 3:
            raise TraceFormatError(f"expected 3 comma-separated values, found {len(cells)}", lineno)
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise TraceFormatError(f"non-numeric value in {line!r}", lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise TraceFormatError("non-finite value", lineno)
        t[k] = values[0]
        iq[k] = values[1:]
    if t.size < 2:
        raise TraceFormatError(f"a trace needs at least 2 samples, found {t.size}")
    dt = np.diff(t)
    bad = np.flatnonzero(dt <= 0)
    if bad.size:
        raise TraceFormatError("time stamps must increase strictly", int(bad[0]) + 3)
    step = float(np.median(dt))
    jitter = np.abs(dt - step) / step
    worst = int(np.argmax(jitter))
    if jitter[worst] > MAX_JITTER:
        raise TraceFormatError(
            f"sample interval {dt[worst]!r} s deviates {100 * jitter[worst]:.2f}% from the median "
            f"{step!r} s (limit {100 * MAX_JITTER:g}%)", worst + 3)
    return IqSeries(iq[:, 0], iq[:, 1], 1.0 / step)


def read_trace(path: PathLike) -> IqSeries:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise TraceFormatError(f"cannot read {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = raw[:exc.start].count(b"\n") + 1
        raise TraceFormatError("not valid UTF-8", line) from None
    return parse_trace(text)


@dataclass(frozen=True)
class TraceResult:
    phase: PhaseSeries
    spectrum: SpectrumResult
    rate_bpm: float
    algorithm: str


def process_trace(iq: IqSeries, algorithm: str = "hadcm",
                  calibration: Optional[CalibrationConfig] = None,
                  wavelength_m: Optional[float] = 5e-3,
                  options: Optional[DemodConfig] = None) -> TraceResult:
    """Calibrate, demodulate, and estimate the respiration rate of a record."""
    calibration = calibration or CalibrationConfig()
    options = options or DemodConfig()
    dc_i, dc_q = estimate_dc(iq, calibration)
    iq = calibrate(iq, dc_i, dc_q, expand=calibration.expand)
    phase = demodulate(algorithm, iq, wavelength_m, options)
    return TraceResult(phase, spectrum(phase), estimate_rate(phase, options.rr_band_hz), algorithm)


def _csv(header, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([fmt_number(v) for v in row])
    return buf.getvalue()


def write_trace_result(result: TraceResult, out_dir: PathLike, fmt: str = "csv") -> List[Path]:
    """Phase/displacement and spectrum as CSV series plus a summary file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ph = result.phase
    lo, hi = ph.valid_range
    disp = ph.displacement_m if ph.displacement_m is not None else np.full(len(ph), np.nan)
    files = {
        "phase.csv": _csv(("t_s", "phase_rad", "displacement_m", "valid"),
                          (ph.t, ph.phase_rad, disp,
                           [int(lo <= n <= hi) for n in range(len(ph))])),
        "spectrum.csv": _csv(("freq_hz", "amplitude_norm"),
                             (result.spectrum.freq_hz, result.spectrum.amplitude_norm)),
    }
    summary = {"algorithm": result.algorithm, "rate_bpm": result.rate_bpm,
               "sample_rate_hz": ph.sample_rate_hz, "num_samples": len(ph),
               "valid_first": lo, "valid_last": hi,
               "spectral_resolution_hz": result.spectrum.resolution_hz}
    if fmt == "json":
        files["summary.json"] = json.dumps(summary, indent=2) + "\n"
    elif fmt == "csv":
        files["summary.csv"] = _csv(tuple(summary), [[v] for v in summary.values()])
    else:
        raise ValueError(f"unknown format {fmt!r}")
    paths = []
    for name, text in files.items():
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        paths.append(out / name)
    return paths


def demodulate_trace(input_path: PathLike, algorithm: str = "hadcm",
                     calibration: Optional[CalibrationConfig] = None,
                     wavelength_m: Optional[float] = 5e-3,
                     options: Optional[DemodConfig] = None,
                     out_dir: Optional[PathLike] = None, fmt: str = "csv") -> TraceResult:
    """Run the pipeline on a trace file; write the outputs when ``out_dir`` is given."""
    result = process_trace(read_trace(input_path), algorithm, calibration, wavelength_m, options)
    if out_dir is not None:
        write_trace_result(result, out_dir, fmt)
    return result
