"""Quadrature baseband synthesis for a breathing, heart-beating target.

The generative model is

    I(t) = A_I(t) cos(4 pi (d0 + x(t) + dd(t)) / lam + phi_I) + DC_I(t) + n_I(t)
    Q(t) = A_Q(t) sin(4 pi (d0 + x(t) + dd(t)) / lam + phi_Q) + DC_Q(t) + n_Q(t)

with x(t) the chest displacement (two sinusoids), dd(t) a slow body sway and
DC_I/DC_Q time-varying offsets.  Residual phase noise is not modelled.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .series import IqSeries, PhaseSeries

MAX_BODY_MOTION_M = 0.1

# independent random streams per impairment so that, e.g., changing the SNR
# never changes the drawn DC profile
_STREAMS = ("dc_i", "dc_q", "motion", "noise_i", "noise_q")


class ScenarioError(ValueError):
    """A scenario violates the model's invariants."""


@dataclass(frozen=True)
class DcProfile:
    kind: str = "constant"
    value: float = 0.0
    lo: float = 1.0
    hi: float = 3.0
    segment_s: float = 1.0
    start: float = 0.0
    end: float = 0.0

    @classmethod
    def constant(cls, value: float) -> "DcProfile":
        return cls(kind="constant", value=value)

    @classmethod
    def piecewise_random(cls, lo: float = 1.0, hi: float = 3.0, segment_s: float = 1.0) -> "DcProfile":
        return cls(kind="piecewise_random", lo=lo, hi=hi, segment_s=segment_s)

    @classmethod
    def linear_ramp(cls, start: float, end: float) -> "DcProfile":
        return cls(kind="linear_ramp", start=start, end=end)

    def validate(self):
        if self.kind == "piecewise_random":
            if not self.lo < self.hi:
                raise ScenarioError("piecewise_random DC needs lo < hi")
            if not self.segment_s > 0:
                raise ScenarioError("segment_s must be positive")
        elif self.kind not in ("constant", "linear_ramp"):
            raise ScenarioError(f"unknown DC profile kind {self.kind!r}")

    def sample(self, t: np.ndarray, duration_s: float, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "constant":
            return np.full(t.shape, float(self.value))
        if self.kind == "linear_ramp":
            return self.start + (self.end - self.start) * (t / duration_s)
        # knot values drawn every segment_s, linearly interpolated (continuous drift)
        n_knots = int(math.ceil(duration_s / self.segment_s)) + 1
        knots_t = np.arange(n_knots) * self.segment_s
        knots_v = rng.uniform(self.lo, self.hi, size=n_knots)
        return np.interp(t, knots_t, knots_v)


@dataclass(frozen=True)
class AmplitudeProfile:
    kind: str = "constant"
    value: float = 1.0
    mean: float = 1.0
    depth: float = 0.0
    freq_hz: float = 0.0

    @classmethod
    def constant(cls, value: float = 1.0) -> "AmplitudeProfile":
        return cls(kind="constant", value=value)

    @classmethod
    def slow_sine(cls, mean: float, depth: float, freq_hz: float) -> "AmplitudeProfile":
        return cls(kind="slow_sine", mean=mean, depth=depth, freq_hz=freq_hz)

    def validate(self):
        if self.kind == "constant":
            if not self.value > 0:
                raise ScenarioError("constant amplitude must be positive")
        elif self.kind == "slow_sine":
            if not self.mean > 0 or not 0 <= self.depth < 1 or self.freq_hz < 0:
                raise ScenarioError("slow_sine amplitude needs mean > 0, 0 <= depth < 1, freq >= 0")
        else:
            raise ScenarioError(f"unknown amplitude profile kind {self.kind!r}")

    def sample(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(t.shape, float(self.value))
        return self.mean * (1.0 + self.depth * np.sin(2 * np.pi * self.freq_hz * t))


@dataclass(frozen=True)
class MotionProfile:
    kind: str = "none"
    amp_m: float = 0.0
    freq_hz: float = 0.0
    step_m: float = 0.0
    clamp_m: float = 0.0

    @classmethod
    def none(cls) -> "MotionProfile":
        return cls()

    @classmethod
    def slow_sine(cls, amp_m: float = 0.05, freq_hz: float = 0.05) -> "MotionProfile":
        return cls(kind="slow_sine", amp_m=amp_m, freq_hz=freq_hz)

    @classmethod
    def bounded_walk(cls, step_m: float, clamp_m: float) -> "MotionProfile":
        return cls(kind="bounded_walk", step_m=step_m, clamp_m=clamp_m)

    def validate(self):
        if self.kind not in ("none", "slow_sine", "bounded_walk"):
            raise ScenarioError(f"unknown motion profile kind {self.kind!r}")
        if abs(self.amp_m) > MAX_BODY_MOTION_M or self.clamp_m > MAX_BODY_MOTION_M:
            raise ScenarioError("body motion must stay within 0.1 m")
        if self.step_m < 0 or self.clamp_m < 0:
            raise ScenarioError("bounded_walk needs non-negative step and clamp")

    def sample(self, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(t.shape)
        if self.kind == "slow_sine":
            return self.amp_m * np.sin(2 * np.pi * self.freq_hz * t)
        out = np.empty(t.shape)
        pos = 0.0
        steps = rng.normal(0.0, self.step_m, size=t.size)
        for n, s in enumerate(steps):
            pos = min(max(pos + s, -self.clamp_m), self.clamp_m)
            out[n] = pos
        return out


_PROFILE_TYPES = {"amp_i": AmplitudeProfile, "amp_q": AmplitudeProfile,
                  "dc_i": DcProfile, "dc_q": DcProfile, "body_motion": MotionProfile}


@dataclass(frozen=True)
class VitalSignScenario:
    """Every parameter of the generative model, plus the RNG seed.

    Defaults describe the benchmark scenario:
    20 Hz sampling, 6 mm breathing at 0.3 Hz, 0.3 mm heartbeat at 1.3 Hz,
    phase imbalance pi/12 and pi/15, DC drifting randomly within (1, 3).
    ``snr_db=None`` disables noise.
    """

    duration_s: float = 60.0
    sample_rate_hz: float = 20.0
    wavelength_m: float = 5e-3
    d0_m: float = 0.6
    resp_freq_hz: float = 0.3
    heart_freq_hz: float = 1.3
    resp_amp_m: float = 6e-3
    heart_amp_m: float = 0.3e-3
    phi_i_rad: float = math.pi / 12
    phi_q_rad: float = math.pi / 15
    amp_i: AmplitudeProfile = field(default_factory=AmplitudeProfile)
    amp_q: AmplitudeProfile = field(default_factory=AmplitudeProfile)
    dc_i: DcProfile = field(default_factory=DcProfile.piecewise_random)
    dc_q: DcProfile = field(default_factory=DcProfile.piecewise_random)
    body_motion: MotionProfile = field(default_factory=MotionProfile)
    snr_db: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("duration_s", "sample_rate_hz", "wavelength_m"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be positive")
        for name in ("d0_m", "resp_freq_hz", "heart_freq_hz", "resp_amp_m", "heart_amp_m"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be non-negative")
        if self.num_samples < 4:
            raise ScenarioError("scenario yields fewer than 4 samples")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError("seed must be a 64-bit unsigned integer")
        for name in _PROFILE_TYPES:
            getattr(self, name).validate()

    @property
    def num_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    def with_(self, **changes) -> "VitalSignScenario":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "VitalSignScenario":
        kwargs = dict(data)
        for name, typ in _PROFILE_TYPES.items():
            if isinstance(kwargs.get(name), dict):
                kwargs[name] = typ(**kwargs[name])
        unknown = set(kwargs) - set(cls.__dataclass_fields__)
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**kwargs)


def benchmark_scenario(**overrides) -> VitalSignScenario:
    """Benchmark scenario with mild amplitude imbalance (A_I=1, A_Q=0.95)."""
    base = VitalSignScenario(amp_q=AmplitudeProfile.constant(0.95))
    return base.with_(**overrides) if overrides else base


def _check_time(scenario: VitalSignScenario, t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > scenario.duration_s):
        raise ValueError(f"time outside [0, {scenario.duration_s}] s")
    return t_arr


def chest_displacement(scenario: VitalSignScenario, t):
    """Chest-wall displacement x(t) in metres (breathing plus heartbeat)."""
    t_arr = _check_time(scenario, t)
    x = (scenario.resp_amp_m * np.sin(2 * np.pi * scenario.resp_freq_hz * t_arr)
         + scenario.heart_amp_m * np.sin(2 * np.pi * scenario.heart_freq_hz * t_arr))
    return float(x) if x.ndim == 0 else x


def true_phase(scenario: VitalSignScenario, t):
    """Vital-sign phase p(t) = 4 pi x(t) / lambda, in radians."""
    x = chest_displacement(scenario, t)
    return 4 * np.pi * x / scenario.wavelength_m


@dataclass(frozen=True)
class Synthesis:
    """Output of :func:`synthesize`: the noisy record and its ground truth."""

    iq: IqSeries
    truth: PhaseSeries
    dc_i: np.ndarray
    dc_q: np.ndarray
    amp_i: np.ndarray
    amp_q: np.ndarray
    clean: IqSeries
    body_motion_m: np.ndarray


def _noise_sigma(ac: np.ndarray, snr_db: float) -> float:
    ac = ac - ac.mean()
    power = float(np.mean(ac * ac))
    return math.sqrt(power / 10 ** (snr_db / 10.0))


def synthesize(scenario: VitalSignScenario) -> Synthesis:
    n = scenario.num_samples
    t = np.arange(n) / scenario.sample_rate_hz
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(scenario.seed).spawn(len(_STREAMS))]
    rng = dict(zip(_STREAMS, streams))

    x = chest_displacement(scenario, t)
    dd = scenario.body_motion.sample(t, rng["motion"])
    if np.max(np.abs(dd), initial=0.0) > MAX_BODY_MOTION_M:
        raise ScenarioError("body motion exceeds 0.1 m")
    total_phase = 4 * np.pi * (scenario.d0_m + x + dd) / scenario.wavelength_m

    a_i = scenario.amp_i.sample(t)
    a_q = scenario.amp_q.sample(t)
    ac_i = a_i * np.cos(total_phase + scenario.phi_i_rad)
    ac_q = a_q * np.sin(total_phase + scenario.phi_q_rad)
    dc_i = scenario.dc_i.sample(t, scenario.duration_s, rng["dc_i"])
    dc_q = scenario.dc_q.sample(t, scenario.duration_s, rng["dc_q"])

    clean_i, clean_q = ac_i + dc_i, ac_q + dc_q
    noisy_i, noisy_q = clean_i, clean_q
    if scenario.snr_db is not None:
        noisy_i = clean_i + _noise_sigma(ac_i, scenario.snr_db) * rng["noise_i"].standard_normal(n)
        noisy_q = clean_q + _noise_sigma(ac_q, scenario.snr_db) * rng["noise_q"].standard_normal(n)

    fs = scenario.sample_rate_hz
    truth = PhaseSeries(4 * np.pi * x / scenario.wavelength_m, fs, (0, n - 1),
                        wavelength_m=scenario.wavelength_m)
    return Synthesis(
        iq=IqSeries(noisy_i, noisy_q, fs),
        truth=truth,
        dc_i=dc_i,
        dc_q=dc_q,
        amp_i=a_i,
        amp_q=a_q,
        clean=IqSeries(clean_i, clean_q, fs),
        body_motion_m=dd,
    )
