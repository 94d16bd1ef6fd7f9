"""Experiment configuration: dataclasses plus YAML loading and echoing."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from .signal_model import VitalSignScenario, benchmark_scenario

ALGORITHMS = ("atan", "mdacm", "acaa", "hadcm")
CALIBRATION_METHODS = ("peak_valley", "circle_fit", "none")
SWEEP_KINDS = ("window_lengths", "snr_values_db", "none")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    kind: str = "none"
    values: Tuple[Optional[float], ...] = ()

    def validate(self):
        if self.kind not in SWEEP_KINDS:
            raise ConfigError(f"sweep kind must be one of {SWEEP_KINDS}")
        if self.kind != "none" and not self.values:
            raise ConfigError(f"sweep {self.kind} needs at least one value")
        if self.kind == "window_lengths" and any(v is None or not v > 0 for v in self.values):
            raise ConfigError("window lengths must be positive")

    def to_dict(self) -> dict:
        if self.kind == "none":
            return {"none": None}
        return {self.kind: list(self.values)}

    @classmethod
    def from_dict(cls, data) -> "SweepSpec":
        if data is None or data == "none":
            return cls()
        if not isinstance(data, dict) or len(data) != 1:
            raise ConfigError("sweep must hold exactly one of window_lengths, snr_values_db, none")
        (kind, values), = data.items()
        if kind == "none":
            return cls()
        if not isinstance(values, (list, tuple)):
            raise ConfigError(f"sweep {kind} must be a list")
        return cls(kind, tuple(_snr(v) if kind == "snr_values_db" else float(v) for v in values))


def _snr(value) -> Optional[float]:
    if value is None or (isinstance(value, str) and value.lower() == "none"):
        return None
    return float(value)


@dataclass(frozen=True)
class CalibrationConfig:
    """DC calibration settings.

    ``prominence`` is an absolute threshold; ``None`` uses
    ``prominence_fraction`` x the channel's 10-90 percentile range.
    ``smooth`` is a moving-average width in samples, or ``"auto"`` for
    0.25 s worth of samples when the scenario SNR is below 20 dB.
    ``hop_s`` enables overlapping windows in the SNR sweep and in
    ``demod``; the window sweep always uses non-overlapping windows.
    """

    method: str = "peak_valley"
    window_s: Optional[float] = 1.0
    hop_s: Optional[float] = 0.1
    prominence: Optional[float] = None
    prominence_fraction: float = 0.3
    smooth: Union[int, str] = 0
    expand: str = "linear"

    def validate(self):
        if self.method not in CALIBRATION_METHODS:
            raise ConfigError(f"calibration method must be one of {CALIBRATION_METHODS}")
        if self.method == "peak_valley" and not (self.window_s and self.window_s > 0):
            raise ConfigError("peak_valley calibration needs a positive window_s")
        if self.window_s is not None and not self.window_s > 0:
            raise ConfigError("window_s must be positive")
        if self.hop_s is not None and not (self.hop_s > 0 and (self.window_s is None or self.hop_s <= self.window_s)):
            raise ConfigError("hop_s must lie in (0, window_s]")
        if self.prominence is not None and self.prominence < 0:
            raise ConfigError("prominence must be non-negative")
        if not self.prominence_fraction >= 0:
            raise ConfigError("prominence_fraction must be non-negative")
        if not (self.smooth == "auto" or (isinstance(self.smooth, int) and self.smooth >= 0)):
            raise ConfigError("smooth must be a non-negative integer or 'auto'")
        if self.expand not in ("linear", "step"):
            raise ConfigError("expand must be 'linear' or 'step'")

    def smoothing_width(self, snr_db: Optional[float], sample_rate_hz: float) -> int:
        if self.smooth == "auto":
            return int(round(0.25 * sample_rate_hz)) if snr_db is not None and snr_db < 20 else 0
        return int(self.smooth)


@dataclass(frozen=True)
class DemodConfig:
    hadcm_denominator: str = "ellipse"
    hadcm_derivative: str = "fir"
    mdacm_derivative: str = "central"
    acaa_reversal: str = "geometry"
    rr_band_hz: Tuple[float, float] = (0.1, 0.6)

    def validate(self):
        if self.hadcm_denominator not in ("ellipse", "ellipse-constant", "hilbert-median", "hilbert"):
            raise ConfigError(f"unknown hadcm_denominator {self.hadcm_denominator!r}")
        for name in ("hadcm_derivative", "mdacm_derivative"):
            if getattr(self, name) not in ("central", "fir"):
                raise ConfigError(f"{name} must be 'central' or 'fir'")
        if self.acaa_reversal not in ("geometry", "threshold", "continuity", "none"):
            raise ConfigError(f"unknown acaa_reversal {self.acaa_reversal!r}")
        lo, hi = self.rr_band_hz
        if not 0 < lo < hi:
            raise ConfigError("rr_band_hz must be an increasing positive pair")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: VitalSignScenario = field(default_factory=benchmark_scenario)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    trials: int = 100
    algorithms: Tuple[str, ...] = ALGORITHMS
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    raw_input: Tuple[str, ...] = ("atan",)
    demod: DemodConfig = field(default_factory=DemodConfig)
    output_dir: str = "out"
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not self.algorithms:
            raise ConfigError("algorithms must not be empty")
        for name in tuple(self.algorithms) + tuple(self.raw_input):
            if name not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {name!r}; choose from {ALGORITHMS}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("algorithms must not repeat")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ConfigError("base_seed must be a non-negative integer")
        if self.base_seed + self.trials > 2**64:
            raise ConfigError("base_seed + trials overflows the 64-bit seed space")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        self.sweep.validate()
        self.calibration.validate()
        self.demod.validate()
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "raw_input", tuple(self.raw_input))

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def trial_seed(self, trial: int) -> int:
        return self.base_seed + trial

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "scenario": _plain(self.scenario.to_dict()),
            "sweep": self.sweep.to_dict(),
            "trials": self.trials,
            "algorithms": list(self.algorithms),
            "calibration": _plain(asdict(self.calibration)),
            "raw_input": list(self.raw_input),
            "demod": _plain(asdict(self.demod)),
            "output_dir": self.output_dir,
            "base_seed": self.base_seed,
            "workers": self.workers,
        }
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        """Overlay ``data`` on ``base`` (the defaults when omitted).

        Nested sections are merged key by key, so a file only needs the
        values it changes.
        """
        base = base or cls()
        if data is None:
            return base
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        changes: Dict[str, Any] = {}
        try:
            if "scenario" in data:
                merged = base.scenario.to_dict()
                for key, value in (data["scenario"] or {}).items():
                    if isinstance(value, dict) and isinstance(merged.get(key), dict) \
                            and value.get("kind", merged[key].get("kind")) == merged[key].get("kind"):
                        merged[key] = {**merged[key], **value}
                    else:
                        merged[key] = value
                if "snr_db" in merged:
                    merged["snr_db"] = _snr(merged["snr_db"])
                changes["scenario"] = VitalSignScenario.from_dict(merged)
            if "sweep" in data:
                changes["sweep"] = SweepSpec.from_dict(data["sweep"])
            for key, typ in (("calibration", CalibrationConfig), ("demod", DemodConfig)):
                if key in data:
                    section = data[key] or {}
                    _reject_unknown(key, section, typ)
                    if "rr_band_hz" in section:
                        section = {**section, "rr_band_hz": tuple(float(v) for v in section["rr_band_hz"])}
                    changes[key] = replace(getattr(base, key), **section)
            for key in ("algorithms", "raw_input"):
                if key in data:
                    changes[key] = tuple(data[key] or ())
            for key in ("trials", "output_dir", "base_seed", "workers"):
                if key in data:
                    changes[key] = data[key]
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        return replace(base, **changes)


def _reject_unknown(section: str, data: dict, typ) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{section} must be a mapping")
    unknown = set(data) - {f.name for f in fields(typ)}
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")


def _plain(obj):
    """Make nested config data YAML/JSON friendly (tuples to lists, None kept)."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def window_sweep_defaults() -> ExperimentConfig:
    """Window-length sweep: 1-4 s, both calibrators, 20 dB noise."""
    return ExperimentConfig(
        scenario=benchmark_scenario(snr_db=20.0),
        sweep=SweepSpec("window_lengths", (1.0, 2.0, 3.0, 4.0)),
        calibration=CalibrationConfig(method="peak_valley", window_s=2.0, hop_s=None),
    )


def snr_sweep_defaults() -> ExperimentConfig:
    """SNR sweep: 10-30 dB in 5 dB steps, all four demodulators."""
    return ExperimentConfig(sweep=SweepSpec("snr_values_db", (10.0, 15.0, 20.0, 25.0, 30.0)))


def load_config(path: Optional[Union[str, Path]], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Read a YAML configuration file on top of ``base``."""
    if path is None:
        return base or ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data, base)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
