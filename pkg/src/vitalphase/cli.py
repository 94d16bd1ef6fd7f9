"""Command-line entry point: ``vitalphase {synth,sweep-window,sweep-snr,demod}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np
import yaml

from . import __version__
from .config import (ALGORITHMS, CALIBRATION_METHODS, ConfigError, ExperimentConfig,
                     load_config, snr_sweep_defaults, window_sweep_defaults)
from .harness import HarnessError, emit_report, fmt_number, run_snr_sweep, run_window_sweep
from .signal_model import ScenarioError, synthesize
from .traceio import TraceFormatError, process_trace, read_trace, write_trace, write_trace_result

EXIT_OK, EXIT_DEGRADED, EXIT_FATAL = 0, 1, 2


def _snr_arg(text: str) -> Optional[float]:
    return None if text.lower() == "none" else float(text)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vitalphase", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="YAML configuration file")
        p.add_argument("--seed", type=int, help="base seed (scenario seed for synth/demod)")
        p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("synth", help="synthesize a trace file and its ground truth")
    common(p)
    p.add_argument("--snr", help="SNR in dB or 'none'")

    for name, help_text in (("sweep-window", "DC-calibration error versus window length"),
                            ("sweep-snr", "demodulation RMSE versus SNR")):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--trials", type=int)
        p.add_argument("--workers", type=int, help="parallel worker processes")

    p = sub.add_parser("demod", help="demodulate a trace file (or a fresh synthetic record)")
    common(p)
    p.add_argument("--input", type=Path, help="trace CSV; synthesizes from the config when omitted")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="hadcm")
    p.add_argument("--calibration", choices=CALIBRATION_METHODS)
    p.add_argument("--wavelength", type=float, help="carrier wavelength in metres")
    p.add_argument("--snr", help="SNR for the synthetic record")
    return parser


def _config(args, base: ExperimentConfig) -> ExperimentConfig:
    cfg = load_config(args.config, base)
    changes = {}
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    for flag in ("trials", "workers"):
        if getattr(args, flag, None) is not None:
            changes[flag] = getattr(args, flag)
    if args.seed is not None:
        if args.command in ("synth", "demod"):
            changes["scenario"] = cfg.scenario.with_(seed=args.seed)
        else:
            changes["base_seed"] = args.seed
    if getattr(args, "snr", None) is not None:
        changes["scenario"] = changes.get("scenario", cfg.scenario).with_(snr_db=_snr_arg(args.snr))
    if getattr(args, "calibration", None):
        changes["calibration"] = replace(cfg.calibration, method=args.calibration)
    return cfg.with_(**changes) if changes else cfg


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_synth(args) -> int:
    cfg = _config(args, ExperimentConfig())
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    syn = synthesize(cfg.scenario)
    write_trace(out / "trace.csv", syn.iq)
    truth = syn.truth
    if args.format == "json":
        _write(out / "truth.json", json.dumps({
            "t_s": truth.t.tolist(), "phase_rad": truth.phase_rad.tolist(),
            "displacement_m": truth.displacement_m.tolist(),
            "dc_i": syn.dc_i.tolist(), "dc_q": syn.dc_q.tolist()}) + "\n")
    else:
        rows = ["t_s,phase_rad,displacement_m,dc_i,dc_q"]
        for vals in zip(truth.t, truth.phase_rad, truth.displacement_m, syn.dc_i, syn.dc_q):
            rows.append(",".join(fmt_number(v) for v in vals))
        _write(out / "truth.csv", "\n".join(rows) + "\n")
    _write(out / "scenario.yaml", yaml.safe_dump(cfg.to_dict()["scenario"], sort_keys=False))
    print(f"wrote {len(syn.iq)} samples to {out / 'trace.csv'}")
    return EXIT_OK


def _sweep(args, base, runner) -> int:
    cfg = _config(args, base)
    report = runner(cfg)
    paths = emit_report(report, cfg.output_dir, args.format)
    for path in paths:
        print(f"wrote {path}")
    if report.degraded:
        print("run degraded: more than 20% of trials failed at some sweep point", file=sys.stderr)
        return EXIT_DEGRADED
    return EXIT_OK


def cmd_demod(args) -> int:
    cfg = _config(args, ExperimentConfig())
    wavelength = args.wavelength if args.wavelength is not None else cfg.scenario.wavelength_m
    iq = read_trace(args.input) if args.input is not None else synthesize(cfg.scenario).iq
    result = process_trace(iq, args.algorithm, cfg.calibration, wavelength, cfg.demod)
    for path in write_trace_result(result, cfg.output_dir, args.format):
        print(f"wrote {path}")
    print(f"rate_bpm={fmt_number(result.rate_bpm)}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "sweep-window": lambda a: _sweep(a, window_sweep_defaults(), run_window_sweep),
    "sweep-snr": lambda a: _sweep(a, snr_sweep_defaults(), run_snr_sweep),
    "demod": cmd_demod,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ScenarioError, TraceFormatError, HarnessError, ValueError,
            ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
