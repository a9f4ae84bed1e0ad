import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rydpulse.pulse import (Ansatz, PulseError, PulseSpec, dumps_pulse, k_from_n_params,
                            load_pulse, n_params, phase_at, phase_rate_at, pulse_from_dict,
                            pulse_to_dict, sample_profile, save_pulse, to_detuning_form,
                            write_profile_csv, zero_pulse)
from rydpulse.tables import load_table

from strategies import pulses


def reference_phase(p: PulseSpec, t):
    """Independent evaluation of the trigonometric phase plus Delta_0 t."""
    T = p.duration
    out = p.detuning0 * t
    for k in range(p.k_terms):
        n = k + 1
        w = 2 * math.pi / T * n * (1 + math.tanh(p.sine_freqs[k]) / 2)
        out = out + p.sine_amps[k] * np.sin(w * (t - T / 2))
        if p.is_general:
            v = 2 * math.pi / T * n * (1 + math.tanh(p.cosine_freqs[k]) / 2)
            out = out + p.cosine_amps[k] * np.cos(v * (t - T / 2))
    return out


def test_parameter_counts():
    assert n_params("antisymmetric", 1) == 4
    assert n_params("antisymmetric", 4) == 10
    assert n_params("general", 3) == 14
    assert k_from_n_params("general", 14) == 3
    with pytest.raises(PulseError):
        k_from_n_params("antisymmetric", 5)


@given(pulses())
def test_vector_round_trip(p):
    q = PulseSpec.from_vector(p.ansatz, p.to_vector())
    assert q == p


@given(pulses())
def test_dict_round_trip(p):
    assert pulse_from_dict(pulse_to_dict(p)) == p


def test_file_round_trip(tmp_path):
    p = load_table("II")[0].pulse
    save_pulse(p, tmp_path / "p.toml")
    assert load_pulse(tmp_path / "p.toml") == p
    assert "omega0_T = 10.8326484" in dumps_pulse(p)


def test_validation():
    with pytest.raises(PulseError):
        PulseSpec("antisymmetric", 1.0, 0.0, [], [])
    with pytest.raises(PulseError):
        PulseSpec("antisymmetric", 1.0, 0.0, [0.0], [0.0], [0.0], [0.0])
    with pytest.raises(PulseError):
        PulseSpec("general", 1.0, 0.0, [0.0], [0.0])
    with pytest.raises(PulseError):
        PulseSpec("antisymmetric", -1.0, 0.0, [0.0], [0.0])
    with pytest.raises(PulseError):
        PulseSpec("antisymmetric", 1.0, math.nan, [0.0], [0.0])
    with pytest.raises(ValueError):
        PulseSpec("bogus", 1.0, 0.0, [0.0], [0.0])
    with pytest.raises(PulseError):
        pulse_from_dict({"ansatz": "antisymmetric", "omega0_T": 1.0})
    with pytest.raises(PulseError):
        pulse_from_dict({"ansatz": "antisymmetric", "omega0_T": 1.0, "A1": 0, "alpha1": 0, "x": 1})


@given(pulses(), st.floats(0.0, 1.0))
def test_phase_matches_reference(p, s):
    t = s * p.duration
    q = PulseSpec(p.ansatz, p.duration, 0.0, p.sine_freqs, p.sine_amps, p.cosine_freqs,
                  p.cosine_amps)
    assert phase_at(q, t) == pytest.approx(reference_phase(q, t) , abs=1e-12)


@given(pulses(), st.floats(0.01, 0.99))
def test_phase_rate_is_derivative(p, s):
    t, h = s * p.duration, 1e-6
    fd = (phase_at(p, t + h) - phase_at(p, t - h)) / (2 * h)
    assert phase_rate_at(p, t) == pytest.approx(fd, rel=1e-6, abs=1e-6)


@given(pulses(ansatz="antisymmetric"), st.floats(0.0, 1.0))
def test_antisymmetric_phase_is_odd_about_midpoint(p, s):
    T = p.duration
    t = s * T
    assert phase_at(p, t) == pytest.approx(-phase_at(p, T - t), abs=1e-12)


@given(pulses(), st.floats(0.0, 1.0))
def test_detuning_form_phase(p, s):
    q = to_detuning_form(p)
    assert q.detuning0 == 0.0
    t = s * p.duration
    expect = phase_at(p, t) + p.detuning0 * t - phase_at(p, 0.0)
    assert phase_at(q, t) == pytest.approx(expect, abs=1e-11)
    assert phase_at(q, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_time_outside_pulse_rejected():
    p = zero_pulse(duration=2.0)
    with pytest.raises(PulseError):
        phase_at(p, 2.5)


def test_profile_two_samples_gives_endpoints():
    p = load_table("I")[0].pulse
    prof = sample_profile(p, 2)
    assert [s.t for s in prof] == [0.0, p.duration]
    assert prof[0].phase == 0.0
    with pytest.raises(PulseError):
        sample_profile(p, 1)


def test_zero_pulse_profile_all_zero():
    prof = sample_profile(zero_pulse(duration=3.0), 11)
    assert all(s.phase == 0.0 and s.phase_rate == 0.0 for s in prof)


def test_table_I_profile_matches_independent_formula(tmp_path):
    p = load_table("I")[0].pulse
    path = tmp_path / "prof.csv"
    write_profile_csv(sample_profile(p, 301), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "omega0_t,xi,dxi_dt"
    data = np.array([[float(x) for x in l.split(",")] for l in lines[1:]])
    ref = reference_phase(p, data[:, 0]) - reference_phase(p, 0.0)
    assert np.max(np.abs(data[:, 1] - ref)) < 1e-10
