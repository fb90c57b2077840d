"""Benchmark waveforms, interval task, input noise and Poisson encoding."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snnforce.errors import ConfigError
from snnforce.signals import (
    BENCHMARK_SYSTEMS,
    PULSE_WIDTH,
    SignalKind,
    SignalSpec,
    add_noise,
    generate,
    interval_layout,
    interval_task,
    poisson_encode,
    poisson_rate,
    read_melody,
    trace_from_csv,
    trace_to_csv,
    van_der_pol,
)


def at(trace, t):
    i = int(round(t / trace.dt))
    return trace.f_out[i]


# ----------------------------------------------------------------- generate


def test_sine_starts_at_zero():
    assert at(generate(SignalSpec(kind="sine")), 0.0)[0] == 0.0


def test_triangle_peak_at_quarter_period():
    tr = generate(SignalSpec(kind="triangle", amplitude=1.0, period=1.0))
    assert at(tr, 0.25)[0] == pytest.approx(1.0, abs=1e-12)


def test_van_der_pol_origin_is_fixed_point():
    tr = generate(SignalSpec(kind="vdp_harmonic", vdp_initial=(0.0, 0.0)))
    assert np.all(tr.f_out == 0.0)


def test_sum_of_sines_exact_value():
    tr = generate(SignalSpec(kind="sum_of_sines"))
    assert at(tr, 0.125)[0] == pytest.approx(-1.0, abs=1e-12)


def test_product_of_sines_definition():
    tr = generate(SignalSpec(kind="product_of_sines"))
    t = tr.t
    np.testing.assert_array_equal(tr.f_out[:, 0], np.sin(8 * np.pi * t) * np.sin(12 * np.pi * t))


def _accordian_oracle(t_eval, dt_fine):
    """Trapezoidal integration of the piecewise-linear angular frequency."""
    tf = np.arange(0.0, t_eval[-1] + dt_fine / 2, dt_fine)
    u = np.mod(tf, 2.0)
    omega = np.where(u < 1.0, 2 * np.pi + 4 * np.pi * u, 6 * np.pi - 4 * np.pi * (u - 1.0))
    theta = np.concatenate([[0.0], np.cumsum(0.5 * (omega[1:] + omega[:-1]) * dt_fine)])
    idx = np.rint(t_eval / dt_fine).astype(int)
    return np.sin(theta[idx])


def test_accordian_matches_phase_integration_oracle():
    spec = SignalSpec(kind="accordian", duration=2.0)
    tr = generate(spec)
    oracle = _accordian_oracle(tr.t, spec.dt / 100)
    assert np.max(np.abs(tr.f_out[:, 0] - oracle)) < 1e-6


def test_accordian_is_two_second_periodic():
    tr = generate(SignalSpec(kind="accordian", duration=6.0))
    shift = int(round(2.0 / tr.dt))
    assert np.max(np.abs(tr.f_out[shift:, 0] - tr.f_out[:-shift, 0])) < 1e-6


def test_ode_to_joy_has_five_channels_of_half_sine_pulses():
    tr = generate(SignalSpec(kind="ode_to_joy"))
    assert tr.d_out == 5
    assert tr.f_out.min() >= 0.0 and tr.f_out.max() <= 1.0 + 1e-12
    # first note is E (channel 2), a quarter note: positive half of a 2 Hz sine
    t = tr.t[tr.t < 0.25]
    np.testing.assert_allclose(tr.f_out[: len(t), 2], np.sin(2 * np.pi * 2 * t), atol=1e-12)
    assert np.all(tr.f_out[: len(t), [0, 1, 3, 4]] == 0)


def test_melody_file(tmp_path):
    path = tmp_path / "notes.txt"
    path.write_text("C quarter\n# comment\nG half\n")
    melody = read_melody(path)
    assert melody == (("C", "quarter"), ("G", "half"))
    tr = generate(SignalSpec(kind="ode_to_joy", melody=melody, duration=1.0))
    assert tr.f_out[:250, 0].max() > 0.99 and tr.f_out[250:, 4].max() > 0.99


def test_bad_melody_token(tmp_path):
    path = tmp_path / "notes.txt"
    path.write_text("H quarter\n")
    with pytest.raises(ConfigError):
        read_melody(path)


@pytest.mark.parametrize("kw", [dict(duration=0.0), dict(dt=-1e-3), dict(duration=1.0, dt=0.3)])
def test_bad_grid_is_config_error(kw):
    with pytest.raises(ConfigError):
        SignalSpec(kind="sine", **kw)


def test_unknown_kind():
    with pytest.raises(ConfigError):
        SignalSpec(kind="lorenz")


def test_vdp_mu_values():
    assert SignalSpec(kind="vdp_harmonic").mu == 0.3
    assert SignalSpec(kind="vdp_relaxed").mu == 0.5


def test_trace_invariants():
    for kind in BENCHMARK_SYSTEMS:
        tr = generate(SignalSpec(kind=kind))
        d = np.diff(tr.t)
        assert np.all(d > 0) and np.allclose(d, tr.dt, rtol=0, atol=1e-12)
        assert len(tr.f_in) == len(tr.f_out) == len(tr.t) == 5000
        assert np.all(np.isfinite(tr.f_in)) and np.all(np.isfinite(tr.f_out))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(BENCHMARK_SYSTEMS))
def test_generate_is_pure(kind):
    a = generate(SignalSpec(kind=kind, duration=1.0))
    b = generate(SignalSpec(kind=kind, duration=1.0))
    assert a.f_out.tobytes() == b.f_out.tobytes() and a.f_in.tobytes() == b.f_in.tobytes()


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.05, 2.0))
def test_triangle_bounded(amplitude, period):
    tr = generate(SignalSpec(kind="triangle", amplitude=amplitude, period=period, duration=2.0))
    assert np.all(np.abs(tr.f_out) <= amplitude * (1 + 1e-12))


@pytest.mark.parametrize("kind,bound", [("sine", 1.0), ("sum_of_sines", 2.0), ("product_of_sines", 1.0), ("accordian", 1.0)])
def test_sine_family_bounds(kind, bound):
    tr = generate(SignalSpec(kind=kind))
    assert np.all(np.abs(tr.f_out) <= bound + 1e-12)


@pytest.mark.parametrize("mu", [0.3, 0.5])
def test_van_der_pol_step_halving(mu):
    n = 10_000
    coarse = van_der_pol(mu, 1e-3, n)
    fine = van_der_pol(mu, 5e-4, 2 * n - 1)[::2]
    assert np.max(np.abs(coarse - fine)) < 1e-4


# ----------------------------------------------------------------- interval task


def _onsets(x):
    """Indices where a non-negative signal switches from zero to positive."""
    on = (x[1:] > 0) & (x[:-1] <= 0)
    return np.flatnonzero(on) + 1


def test_interval_second_pulse_onset():
    tr = interval_task(0.1)
    on = _onsets(tr.f_in[:, 0])
    first_end = tr.t[on[0]] + PULSE_WIDTH
    assert tr.t[on[1]] == pytest.approx(first_end + 0.1, abs=1e-9)
    assert np.all(np.isin(tr.f_in[:, 0], [0.0, 1.0]))
    assert np.sum(tr.f_in[:, 0]) == pytest.approx(2 * PULSE_WIDTH / tr.dt)


def test_interval_rejects_degenerate():
    with pytest.raises(ConfigError):
        interval_task(0.0)
    with pytest.raises(ConfigError):
        interval_task(2.2)


def test_interval_target_onset_by_scan():
    tr = interval_task(2.1)
    on = _onsets(tr.f_in[:, 0])
    second_end = tr.t[on[1]] + PULSE_WIDTH
    # the half-sine is zero at its onset sample, positive from the next one
    target_on = tr.t[_onsets(tr.f_out[:, 0])[0] - 1]
    assert target_on == pytest.approx(second_end + 2.1, abs=1e-9)
    peak = tr.t[np.argmax(tr.f_out[:, 0])]
    assert peak == pytest.approx(target_on + PULSE_WIDTH / 2, abs=tr.dt)


def test_interval_budget_exceeded():
    with pytest.raises(ConfigError):
        interval_task(2.1, SignalSpec(kind="interval", duration=3.0))


def test_interval_layout_sequence():
    lay = interval_layout(0.35)
    assert lay["second_on"] - lay["first_end"] == pytest.approx(0.35)
    assert lay["target_on"] - lay["second_end"] == pytest.approx(0.35)


# ----------------------------------------------------------------- noise


def test_zero_noise_is_identity():
    tr = generate(SignalSpec(kind="sine", input_mode="target"))
    out = add_noise(tr, 0.0, 1)
    assert out.f_in.tobytes() == tr.f_in.tobytes()


def test_noise_std_matches_level():
    n = 1_000_000
    t = np.arange(n) * 1e-3
    from snnforce.signals import SignalTrace

    x = np.linspace(0.0, 1.0, n)  # unit range
    tr = SignalTrace(t, x[:, None], x[:, None])
    out = add_noise(tr, 0.1, 7)
    resid = out.f_in[:, 0] - x
    assert 0.099 <= np.std(resid) <= 0.101
    assert out.f_out.tobytes() == tr.f_out.tobytes()


def test_noise_deterministic_per_seed():
    tr = generate(SignalSpec(kind="sine", input_mode="target"))
    a, b = add_noise(tr, 0.1, 3), add_noise(tr, 0.1, 3)
    assert a.f_in.tobytes() == b.f_in.tobytes()
    assert add_noise(tr, 0.1, 4).f_in.tobytes() != a.f_in.tobytes()


def test_negative_noise_rejected():
    with pytest.raises(ConfigError):
        add_noise(generate(SignalSpec()), -0.1, 0)


def test_noise_reference_range_for_silent_input():
    tr = generate(SignalSpec(kind="sine"))
    out = add_noise(tr, 0.1, 0, reference_range=2.0)
    assert 0.19 < np.std(out.f_in) < 0.21


# ----------------------------------------------------------------- Poisson encoding


def test_poisson_zero_rate_never_spikes():
    rng = np.random.default_rng(0)
    spikes = poisson_encode(np.full(100_000, -1.0), 1e-3, (0.0, 200.0), rng)
    assert spikes.sum() == 0


def test_poisson_rate_100hz():
    rng = np.random.default_rng(1)
    steps = 100_000
    spikes = poisson_encode(np.zeros(steps), 1e-3, (0.0, 200.0), rng)
    rate = spikes.sum() / (steps * 1e-3)
    assert abs(rate - 100.0) <= 3.0


def test_poisson_max_probability():
    assert poisson_rate(1.0, (0.0, 200.0)) * 1e-3 == pytest.approx(0.2)


def test_poisson_bernoulli_bound():
    with pytest.raises(ConfigError):
        poisson_encode(0.0, 1e-2, (0.0, 200.0))


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.0, 1.0), st.integers(0, 2**32 - 1))
def test_poisson_long_run_rate_within_3_sigma(value, seed):
    dt, steps = 1e-3, 50_000
    p = poisson_rate(value, (0.0, 200.0)) * dt
    count = poisson_encode(np.full(steps, value), dt, (0.0, 200.0), np.random.default_rng(seed)).sum()
    sigma = np.sqrt(steps * p * (1 - p))
    assert abs(count - steps * p) <= 3 * sigma + 1


# ----------------------------------------------------------------- CSV


def test_csv_round_trip(tmp_path):
    tr = generate(SignalSpec(kind="ode_to_joy", duration=1.0))
    path = tmp_path / "t.csv"
    trace_to_csv(tr, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,f_in_0,f_out_0,f_out_1,f_out_2,f_out_3,f_out_4"
    back = trace_from_csv(path)
    assert back.f_out.tobytes() == tr.f_out.tobytes() and back.t.tobytes() == tr.t.tobytes()


def test_kind_aliases():
    assert SignalKind.parse("Sum of Sines") is SignalKind.SUM_OF_SINES
    assert SignalKind.parse("accordion") is SignalKind.ACCORDIAN
    assert SignalKind.parse("VanDerPolRelaxed") is SignalKind.VDP_RELAXED
