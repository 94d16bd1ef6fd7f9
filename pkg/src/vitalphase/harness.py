"""Monte-Carlo sweeps over window length and SNR, and report emission."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from . import __version__
from .calibration import (DcEstimate, calibrate, circle_fit_estimate,
                          peak_valley_estimate)
from .config import CalibrationConfig, DemodConfig, ExperimentConfig
from .demod import acaa_demod, atan_demod, hadcm, mdacm_demod
from .metrics import (MetricsRow, dc_relative_error, displacement_rmse,
                      estimate_rate)
from .series import IqSeries, PhaseSeries
from .signal_model import synthesize

DEGRADED_FRACTION = 0.2
# numerical failures a single trial may raise; anything else is a bug
TRIAL_ERRORS = (ValueError, ArithmeticError, np.linalg.LinAlgError)

NOTES = (
    "circle fitting is applied per window",
    "metrics exclude 1 s at each record edge",
    "RMSE is taken after removing the mean displacement difference",
    "aggregate std is the sample standard deviation (ddof=1; 0 for a single trial)",
)


class HarnessError(RuntimeError):
    pass


def estimate_dc(iq: IqSeries, cal: CalibrationConfig, snr_db: Optional[float] = None,
                window_s: Optional[float] = None, hop_s: Union[float, None, str] = "config"
                ) -> Tuple[DcEstimate, DcEstimate]:
    """Per-channel DC estimates according to ``cal``.

    ``window_s`` and ``hop_s`` override the configured values when given.
    """
    n, fs = len(iq), iq.sample_rate_hz
    window = cal.window_s if window_s is None else window_s
    hop = cal.hop_s if hop_s == "config" else hop_s
    if cal.method == "none":
        return DcEstimate.constant(0.0, n, fs), DcEstimate.constant(0.0, n, fs)
    if cal.method == "circle_fit":
        return circle_fit_estimate(iq, window)
    smooth = cal.smoothing_width(snr_db, fs)
    return tuple(peak_valley_estimate(channel, fs, window, min_prominence=cal.prominence,
                                      smooth=smooth, hop_s=hop,
                                      prominence_fraction=cal.prominence_fraction)
                 for channel in (iq.i, iq.q))


def demodulate(algorithm: str, iq: IqSeries, wavelength_m: Optional[float],
               options: DemodConfig) -> PhaseSeries:
    if algorithm == "hadcm":
        return hadcm(iq, wavelength_m, denominator=options.hadcm_denominator,
                     derivative=options.hadcm_derivative)
    if algorithm == "mdacm":
        return mdacm_demod(iq, wavelength_m, derivative=options.mdacm_derivative)
    if algorithm == "acaa":
        return acaa_demod(iq, wavelength_m, reversal=options.acaa_reversal)
    if algorithm == "atan":
        return atan_demod(iq, wavelength_m)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _failed(algorithm, snr, window, seed, trial, exc) -> MetricsRow:
    nan = float("nan")
    return MetricsRow(algorithm, snr, window, nan, nan, nan, None, seed, trial,
                      error=f"{type(exc).__name__}: {exc}")


def window_trial(config: ExperimentConfig, window_s: float, trial: int) -> List[MetricsRow]:
    """Both calibrators on one synthesized record, non-overlapping windows."""
    seed = config.trial_seed(trial)
    scenario = config.scenario.with_(seed=seed)
    rows = []
    try:
        syn = synthesize(scenario)
    except TRIAL_ERRORS as exc:
        return [_failed(m, scenario.snr_db, window_s, seed, trial, exc) for m in ("peak_valley", "circle_fit")]
    for method in ("peak_valley", "circle_fit"):
        try:
            cal = CalibrationConfig(method=method, window_s=window_s, hop_s=None,
                                    prominence=config.calibration.prominence,
                                    prominence_fraction=config.calibration.prominence_fraction,
                                    smooth=config.calibration.smooth,
                                    expand=config.calibration.expand)
            dc_i, dc_q = estimate_dc(syn.iq, cal, scenario.snr_db, hop_s=None)
            out = calibrate(syn.iq, dc_i, dc_q, expand=cal.expand)
            e_i, e_q = dc_relative_error(syn.iq, out, syn.dc_i, syn.dc_q)
            rows.append(MetricsRow(method, scenario.snr_db, window_s, e_i, e_q, None, None, seed, trial))
        except TRIAL_ERRORS as exc:
            rows.append(_failed(method, scenario.snr_db, window_s, seed, trial, exc))
    return rows


def snr_trial(config: ExperimentConfig, snr_db: Optional[float], trial: int) -> List[MetricsRow]:
    """Calibrate once, then run every configured demodulator."""
    seed = config.trial_seed(trial)
    scenario = config.scenario.with_(seed=seed, snr_db=snr_db)
    window = config.calibration.window_s if config.calibration.method != "none" else None
    try:
        syn = synthesize(scenario)
        dc_i, dc_q = estimate_dc(syn.iq, config.calibration, snr_db)
        cal_iq = calibrate(syn.iq, dc_i, dc_q, expand=config.calibration.expand)
        e_i, e_q = dc_relative_error(syn.iq, cal_iq, syn.dc_i, syn.dc_q)
    except TRIAL_ERRORS as exc:
        return [_failed(a, snr_db, window, seed, trial, exc) for a in config.algorithms]
    rows = []
    true_rate = 60.0 * scenario.resp_freq_hz
    for algorithm in config.algorithms:
        source = syn.iq if algorithm in config.raw_input else cal_iq
        try:
            phase = demodulate(algorithm, source, scenario.wavelength_m, config.demod)
            rmse = displacement_rmse(phase, syn.truth)
            rr_err = abs(estimate_rate(phase, config.demod.rr_band_hz) - true_rate)
            rows.append(MetricsRow(algorithm, snr_db, window, e_i, e_q, rmse, rr_err, seed, trial))
        except TRIAL_ERRORS as exc:
            rows.append(_failed(algorithm, snr_db, window, seed, trial, exc))
    return rows


@dataclass(frozen=True)
class Aggregate:
    algorithm: str
    sweep_value: Optional[float]
    trials: int
    failures: int
    means: Dict[str, float]
    stds: Dict[str, float]

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "sweep_value": self.sweep_value, "trials": self.trials,
                "failures": self.failures, "mean": dict(self.means), "std": dict(self.stds)}


METRIC_FIELDS = ("e_i", "e_q", "rmse_mm", "rr_error_bpm")


def aggregate_rows(rows: Sequence[MetricsRow], sweep_kind: str) -> List[Aggregate]:
    """Mean and sample std per (algorithm, sweep point), first-seen order.

    ``trials`` counts successful trials only.
    """
    key_field = "window_length_s" if sweep_kind == "window_lengths" else "snr_db"
    groups: Dict[Tuple[str, Optional[float]], List[MetricsRow]] = {}
    for row in rows:
        groups.setdefault((row.algorithm, getattr(row, key_field)), []).append(row)
    out = []
    for (algorithm, value), members in groups.items():
        ok = [r for r in members if not r.failed]
        means, stds = {}, {}
        for name in METRIC_FIELDS:
            vals = [getattr(r, name) for r in ok if getattr(r, name) is not None]
            if vals:
                means[name] = math.fsum(vals) / len(vals)
                stds[name] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        out.append(Aggregate(algorithm, value, len(ok), len(members) - len(ok), means, stds))
    return out


@dataclass(frozen=True)
class ExperimentReport:
    kind: str
    rows: Tuple[MetricsRow, ...]
    aggregates: Tuple[Aggregate, ...]
    config_echo: dict
    tool_version: str = __version__
    degraded: bool = False
    notes: Tuple[str, ...] = field(default=NOTES)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tool_version": self.tool_version,
            "degraded": self.degraded,
            "notes": list(self.notes),
            "config": self.config_echo,
            "aggregates": [a.to_dict() for a in self.aggregates],
            "rows": [r.to_dict() for r in self.rows],
        }

    def aggregate(self, algorithm: str, sweep_value) -> Aggregate:
        for agg in self.aggregates:
            if agg.algorithm == algorithm and agg.sweep_value == sweep_value:
                return agg
        raise KeyError((algorithm, sweep_value))


def _run_task(task):
    fn, config, value, trial = task
    return fn(config, value, trial)


def _run(config: ExperimentConfig, kind: str, trial_fn: Callable) -> ExperimentReport:
    if config.sweep.kind != kind:
        raise HarnessError(f"this run needs a {kind} sweep, config has {config.sweep.kind!r}")
    tasks = [(trial_fn, config, value, trial)
             for value in config.sweep.values for trial in range(config.trials)]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            # map preserves task order, so the merge is deterministic
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * config.workers))))
    else:
        results = [_run_task(t) for t in tasks]
    rows = tuple(row for chunk in results for row in chunk)
    aggs = tuple(aggregate_rows(rows, kind))
    degraded = any(a.failures > DEGRADED_FRACTION * (a.trials + a.failures) for a in aggs)
    return ExperimentReport(kind, rows, aggs, config.to_dict(), degraded=degraded)


def run_window_sweep(config: ExperimentConfig) -> ExperimentReport:
    return _run(config, "window_lengths", window_trial)


def run_snr_sweep(config: ExperimentConfig) -> ExperimentReport:
    return _run(config, "snr_values_db", snr_trial)


# ---- emission -------------------------------------------------------------

def fmt_number(value, missing: str = "n/a") -> str:
    """Shortest round-trip decimal; ``missing`` for None, empty for NaN."""
    if value is None:
        return missing
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


ROW_COLUMNS = ("algorithm", "snr_db", "window_length_s", "e_i", "e_q", "rmse_mm",
               "rr_error_bpm", "seed", "trial", "error")


def rows_csv(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_COLUMNS)
    for r in rows:
        w.writerow([r.algorithm, fmt_number(r.snr_db, "none"), fmt_number(r.window_length_s),
                    fmt_number(r.e_i), fmt_number(r.e_q), fmt_number(r.rmse_mm),
                    fmt_number(r.rr_error_bpm), r.seed, r.trial, r.error or ""])
    return buf.getvalue()


def aggregates_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if report.kind == "snr_values_db":
        w.writerow(("algorithm", "snr_db", "rmse_mm_mean", "rmse_mm_std", "trials"))
        for a in report.aggregates:
            w.writerow([a.algorithm, fmt_number(a.sweep_value, "none"),
                        fmt_number(a.means.get("rmse_mm", float("nan"))),
                        fmt_number(a.stds.get("rmse_mm", float("nan"))), a.trials])
    else:
        w.writerow(("algorithm", "window_length_s", "e_i_mean", "e_i_std", "e_q_mean", "e_q_std", "trials"))
        for a in report.aggregates:
            w.writerow([a.algorithm, fmt_number(a.sweep_value),
                        fmt_number(a.means.get("e_i", float("nan"))), fmt_number(a.stds.get("e_i", float("nan"))),
                        fmt_number(a.means.get("e_q", float("nan"))), fmt_number(a.stds.get("e_q", float("nan"))),
                        a.trials])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def report_json(report: ExperimentReport) -> str:
    # json uses repr for floats, i.e. the shortest round-trip form
    return json.dumps(_json_safe(report.to_dict()), indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def emit_report(report: ExperimentReport, out_dir, fmt: str = "csv", stem: Optional[str] = None) -> List[Path]:
    """Write ``report`` under ``out_dir``; returns the files written.

    CSV gives ``<stem>_rows.csv``, ``<stem>_aggregates.csv`` and the
    configuration echo ``<stem>_config.yaml``; JSON gives ``<stem>.json``.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    stem = stem or ("window_sweep" if report.kind == "window_lengths" else "snr_sweep")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            paths = [out / f"{stem}.json"]
            _write(paths[0], report_json(report))
            return paths
        paths = [out / f"{stem}_rows.csv", out / f"{stem}_aggregates.csv", out / f"{stem}_config.yaml"]
        header = f"# tool_version: {report.tool_version}\n# degraded: {str(report.degraded).lower()}\n"
        for note in report.notes:
            header += f"# note: {note}\n"
        _write(paths[0], rows_csv(report.rows))
        _write(paths[1], aggregates_csv(report))
        _write(paths[2], header + yaml.safe_dump(report.config_echo, sort_keys=False))
        return paths
    except OSError as exc:
        raise HarnessError(f"cannot write report to {out}: {exc}") from exc
