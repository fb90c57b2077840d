"""MSE, time to converge and spike-rate metrics."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from snnforce.errors import ConfigError, DimensionError
from snnforce.metrics import MetricRecord, avg_spike_rate, mse, time_to_converge
from snnforce.neuron import NeuronParams, NeuronState, TtfsParams, step_membrane

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_mse_examples():
    f = np.sin(np.linspace(0, 6, 100))
    assert mse(f, f) == 0.0
    assert mse(f + 0.1, f) == pytest.approx(0.01, rel=1e-12)


def test_mse_matches_two_pass_sum():
    rng = np.random.default_rng(0)
    z, f = rng.normal(size=10_000), rng.normal(size=10_000)
    naive = math.fsum((a - b) ** 2 for a, b in zip(z.tolist(), f.tolist())) / z.size
    assert mse(z, f) == pytest.approx(naive, rel=1e-12)


def test_mse_multichannel_averages_channels():
    z = np.zeros((4, 5))
    f = np.zeros((4, 5))
    f[:, 0] = 1.0
    assert mse(z, f) == pytest.approx(0.2)


def test_mse_errors():
    with pytest.raises(DimensionError):
        mse(np.zeros(3), np.zeros(4))
    with pytest.raises(DimensionError):
        mse([], [])


@settings(max_examples=100, deadline=None)
@given(arrays(float, 20, elements=finite), arrays(float, 20, elements=finite), finite)
def test_mse_translation_invariant(z, f, c):
    assert mse(z + c, f + c) == pytest.approx(mse(z, f), rel=1e-9, abs=1e-9)


def test_ttc_examples():
    assert time_to_converge([0.2, 0.5, 0.1], 0.25) == 1.0
    assert time_to_converge([0.5, 0.5, 0.5], 0.25) is None
    assert time_to_converge([0.4, 0.1], 0.25) == pytest.approx(1.5)
    assert time_to_converge([0.4, 0.1], 0.25, interpolate=False) == 2.0


def test_ttc_errors():
    with pytest.raises(ConfigError):
        time_to_converge([], 0.25)
    with pytest.raises(ConfigError):
        time_to_converge([0.1], 0.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 2), min_size=1, max_size=30), st.floats(0.01, 1), st.floats(0.01, 1))
def test_ttc_monotone_in_threshold(history, a, b):
    lo, hi = min(a, b), max(a, b)
    t_lo, t_hi = time_to_converge(history, lo), time_to_converge(history, hi)
    if t_lo is not None:
        assert t_hi is not None and t_hi <= t_lo + 1e-12


def test_spike_rate_examples():
    assert avg_spike_rate(np.zeros(10), 10, 5.0) == 0.0
    assert avg_spike_rate([250_000], 1000, 5.0) == 50.0
    with pytest.raises(ConfigError):
        avg_spike_rate([1], 1, 0.0)


def test_ttfs_rate_with_every_window_filled():
    # 100 ms windows, 5 s, 200 neurons driven hard enough to fire in every window
    p = NeuronParams()
    ttfs = TtfsParams(window=0.1)
    n, dt, steps = 200, 1e-3, 5000
    s = NeuronState.rest(n, p)
    counts = np.zeros(n)
    for _ in range(steps):
        s, spk = step_membrane(s, np.full(n, 500.0), dt, p, "ttfs", ttfs)
        counts += spk
    assert avg_spike_rate(counts, n, steps * dt) == 10.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.01, 0.025, 0.05]))
def test_ttfs_rate_never_exceeds_inverse_window(seed, window):
    rng = np.random.default_rng(seed)
    p = NeuronParams()
    ttfs = TtfsParams(window=window)
    n, dt, steps = 25, 1e-3, 500
    s = NeuronState.rest(n, p)
    counts = np.zeros(n)
    for _ in range(steps):
        s, spk = step_membrane(s, rng.uniform(0, 3000, n), dt, p, "ttfs", ttfs)
        counts += spk
    assert avg_spike_rate(counts, n, steps * dt) <= 1 / window + 1e-9


def test_metric_record_invariants():
    MetricRecord(mse=0.0, ttc_epochs=None, avg_spike_rate=0.0)
    with pytest.raises(ConfigError):
        MetricRecord(mse=-1.0, ttc_epochs=None, avg_spike_rate=0.0)
    with pytest.raises(ConfigError):
        MetricRecord(mse=0.1, ttc_epochs=1.0, avg_spike_rate=-2.0)
