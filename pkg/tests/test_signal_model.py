import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vitalphase.signal_model import (AmplitudeProfile, DcProfile, MotionProfile, ScenarioError,
                                     VitalSignScenario, chest_displacement, benchmark_scenario,
                                     synthesize, true_phase)

from oracles import synth_sample


def test_displacement_zero_at_origin():
    assert chest_displacement(benchmark_scenario(), 0.0) == 0.0


def test_displacement_respiration_peak():
    sc = benchmark_scenario(heart_amp_m=0.0)
    assert chest_displacement(sc, 1 / (4 * 0.3)) == pytest.approx(0.006, abs=1e-15)


def test_displacement_matches_scalar_formula():
    sc = benchmark_scenario()
    t = 0.7
    expected = 6e-3 * math.sin(2 * math.pi * 0.3 * t) + 0.3e-3 * math.sin(2 * math.pi * 1.3 * t)
    assert chest_displacement(sc, t) == pytest.approx(expected, rel=1e-14)


def test_displacement_domain():
    sc = benchmark_scenario()
    with pytest.raises(ValueError):
        chest_displacement(sc, -0.1)
    with pytest.raises(ValueError):
        chest_displacement(sc, 60.5)


def test_true_phase_values():
    sc = benchmark_scenario(heart_amp_m=0.0, resp_amp_m=5e-3 / 4, resp_freq_hz=0.25)
    assert true_phase(sc, 0.0) == 0.0
    # x = lambda / 4 at the breathing peak
    assert true_phase(sc, 1.0) == pytest.approx(math.pi, rel=1e-14)
    sc = benchmark_scenario()
    x = 6e-3 * math.sin(2 * math.pi * 0.3 * 2.5) + 0.3e-3 * math.sin(2 * math.pi * 1.3 * 2.5)
    assert true_phase(sc, 2.5) == pytest.approx(4 * math.pi * x / 5e-3, rel=1e-13)


def test_default_record_shape():
    syn = synthesize(benchmark_scenario(seed=3))
    assert len(syn.iq) == 1200
    assert syn.iq.sample_rate_hz == 20.0
    assert np.all((syn.dc_i > 1) & (syn.dc_i < 3))
    assert np.all((syn.dc_q > 1) & (syn.dc_q < 3))


def test_constant_phase_case():
    # 4 pi d0 / lambda = 480 pi, a multiple of 2 pi
    sc = VitalSignScenario(resp_amp_m=0.0, heart_amp_m=0.0, phi_i_rad=0.0, phi_q_rad=0.0,
                           dc_i=DcProfile.constant(0.0), dc_q=DcProfile.constant(0.0))
    syn = synthesize(sc)
    np.testing.assert_allclose(syn.iq.i, 1.0, atol=1e-12)
    np.testing.assert_allclose(syn.iq.q, 0.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(resp=st.floats(0.0, 8e-3), heart=st.floats(0.0, 5e-4),
       fr=st.floats(0.1, 0.6), fh=st.floats(0.8, 2.0),
       phi_i=st.floats(-1.0, 1.0), phi_q=st.floats(-1.0, 1.0),
       ai=st.floats(0.2, 3.0), aq=st.floats(0.2, 3.0),
       ci=st.floats(-5.0, 5.0), cq=st.floats(-5.0, 5.0))
def test_per_sample_oracle(resp, heart, fr, fh, phi_i, phi_q, ai, aq, ci, cq):
    sc = VitalSignScenario(duration_s=5.0, resp_amp_m=resp, heart_amp_m=heart,
                           resp_freq_hz=fr, heart_freq_hz=fh, phi_i_rad=phi_i, phi_q_rad=phi_q,
                           amp_i=AmplitudeProfile.constant(ai), amp_q=AmplitudeProfile.constant(aq),
                           dc_i=DcProfile.constant(ci), dc_q=DcProfile.constant(cq))
    syn = synthesize(sc)
    expected = np.array([synth_sample(sc, n / sc.sample_rate_hz, ci, cq) for n in range(len(syn.iq))])
    assert np.max(np.abs(syn.iq.i - expected[:, 0])) < 1e-12
    assert np.max(np.abs(syn.iq.q - expected[:, 1])) < 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), snr=st.one_of(st.none(), st.floats(0.0, 40.0)))
def test_determinism(seed, snr):
    sc = benchmark_scenario(seed=seed, snr_db=snr, duration_s=5.0)
    a, b = synthesize(sc), synthesize(sc)
    assert np.array_equal(a.iq.i, b.iq.i) and np.array_equal(a.iq.q, b.iq.q)


def test_seed_changes_output():
    a = synthesize(benchmark_scenario(seed=1, snr_db=20.0))
    b = synthesize(benchmark_scenario(seed=2, snr_db=20.0))
    assert not np.array_equal(a.iq.i, b.iq.i)


@pytest.mark.parametrize("snr", [10.0, 20.0, 30.0])
def test_snr_calibration(snr):
    measured = []
    for seed in range(20):
        sc = benchmark_scenario(duration_s=600.0, snr_db=snr, seed=seed)
        syn = synthesize(sc)
        for noisy, clean, dc in ((syn.iq.i, syn.clean.i, syn.dc_i), (syn.iq.q, syn.clean.q, syn.dc_q)):
            ac = clean - dc
            ac = ac - ac.mean()
            noise = noisy - clean
            measured.append(10 * math.log10(np.mean(ac * ac) / np.mean(noise * noise)))
    assert abs(np.mean(measured) - snr) < 0.5


@settings(max_examples=30, deadline=None)
@given(phi_i=st.floats(-1.2, 1.2), phi_q=st.floats(-1.2, 1.2),
       ai=st.floats(0.1, 5.0), aq=st.floats(0.1, 5.0),
       ci=st.floats(-3.0, 3.0), cq=st.floats(-3.0, 3.0))
def test_trajectory_on_unit_circle(phi_i, phi_q, ai, aq, ci, cq):
    sc = VitalSignScenario(duration_s=10.0, phi_i_rad=phi_i, phi_q_rad=phi_q,
                           amp_i=AmplitudeProfile.constant(ai), amp_q=AmplitudeProfile.constant(aq),
                           dc_i=DcProfile.constant(ci), dc_q=DcProfile.constant(cq))
    syn = synthesize(sc)
    u = (syn.iq.i - ci) / ai
    v = (syn.iq.q - cq) / aq
    # u = cos(b + d), v = sin(b) with d = phi_i - phi_q  =>  u^2 + 2uv sin d + v^2 = cos^2 d
    d = phi_i - phi_q
    resid = u * u + 2 * u * v * math.sin(d) + v * v - math.cos(d) ** 2
    assert np.max(np.abs(resid)) < 1e-12
    if phi_i == phi_q:
        assert np.max(np.abs(np.hypot(u, v) - 1)) < 1e-12


def test_truth_equals_true_phase():
    sc = benchmark_scenario(seed=4, snr_db=15.0)
    syn = synthesize(sc)
    t = np.arange(sc.num_samples) / sc.sample_rate_hz
    assert np.array_equal(syn.truth.phase_rad, true_phase(sc, t))
    assert syn.truth.valid_range == (0, sc.num_samples - 1)


def test_amplitude_profiles():
    sc = benchmark_scenario()
    assert sc.amp_i.value == 1.0 and sc.amp_q.value == 0.95
    slow = AmplitudeProfile.slow_sine(1.0, 0.2, 0.05)
    syn = synthesize(VitalSignScenario(amp_i=slow, duration_s=20.0))
    assert syn.amp_i.min() >= 0.8 - 1e-12 and syn.amp_i.max() <= 1.2 + 1e-12


def test_dc_profiles():
    t = np.linspace(0, 10, 101)
    rng = np.random.default_rng(0)
    ramp = DcProfile.linear_ramp(1.0, 3.0).sample(t, 10.0, rng)
    assert ramp[0] == 1.0 and ramp[-1] == 3.0
    walk = DcProfile.piecewise_random(1.0, 3.0, 1.0).sample(t, 10.0, rng)
    assert np.all((walk >= 1.0) & (walk <= 3.0))
    # knots every second, linear in between
    np.testing.assert_allclose(walk[5], 0.5 * (walk[0] + walk[10]), rtol=1e-12)


def test_body_motion_bounds():
    syn = synthesize(benchmark_scenario(body_motion=MotionProfile.bounded_walk(1e-3, 0.02), seed=5))
    assert len(syn.iq) == 1200
    syn = synthesize(benchmark_scenario(body_motion=MotionProfile.slow_sine()))
    assert len(syn.iq) == 1200


@pytest.mark.parametrize("kwargs", [
    {"sample_rate_hz": 0.0},
    {"duration_s": -1.0},
    {"resp_amp_m": -1e-3},
    {"seed": -1},
    {"dc_i": DcProfile.piecewise_random(3.0, 1.0)},
    {"amp_i": AmplitudeProfile.constant(0.0)},
    {"amp_q": AmplitudeProfile.slow_sine(1.0, 1.0, 0.1)},
    {"body_motion": MotionProfile.slow_sine(0.2, 0.1)},
    {"body_motion": MotionProfile.bounded_walk(1e-3, 0.5)},
])
def test_invalid_scenarios(kwargs):
    with pytest.raises(ScenarioError):
        benchmark_scenario(**kwargs)


def test_round_trip_dict():
    sc = benchmark_scenario(snr_db=12.5, seed=9, body_motion=MotionProfile.slow_sine())
    assert VitalSignScenario.from_dict(sc.to_dict()) == sc
    with pytest.raises(ScenarioError):
        VitalSignScenario.from_dict({"bogus": 1})
