"""Reservoir construction, stepping, readout and checkpoints."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snnforce.errors import ConfigError, DimensionError, IntegrityError, NumericInputError
from snnforce.network import (
    NetworkParams,
    init_state,
    init_weights,
    load_checkpoint,
    readout,
    save_checkpoint,
    step_target,
    step_task,
)
from snnforce.neuron import NeuronParams, firing_rate

SMALL = NetworkParams(n=50)


def zero_weights(n=4, d_in=1, d_out=1):
    w = init_weights(n, d_in, d_out, seed=0)
    for name in ("u_in", "j", "j_d", "w", "u_out"):
        getattr(w, name)[...] = 0.0
    return w


# ----------------------------------------------------------------- initialization


def test_readout_weights_start_at_zero():
    w = init_weights(30, 2, 3, seed=1)
    assert not w.w.any()
    params = NetworkParams(n=30)
    state = init_state(w, params, seed=1)
    assert np.array_equal(readout(state, w, params), w.z_lo)


def test_target_weights_variance():
    n, g = 1000, 1.5
    w = init_weights(n, 1, 1, g=g, seed=2)
    assert np.var(w.j_d) == pytest.approx(g * g / n, rel=0.05)
    assert np.var(w.j) == pytest.approx(g * g / n, rel=0.05)


def test_force_sparsity_and_variance():
    n, g, p = 1000, 1.5, 0.1
    w = init_weights(n, 1, 1, g=g, sparsity=p, mode="force", seed=3)
    nz = w.j[w.j != 0]
    assert 0.09 <= nz.size / n**2 <= 0.11
    assert np.var(nz) == pytest.approx(g * g / (p * n), rel=0.05)


def test_feedback_and_input_uniform():
    w = init_weights(500, 3, 2, seed=4)
    for m in (w.u_in, w.u_out):
        assert m.min() >= -1 and m.max() <= 1
        assert np.mean(m) == pytest.approx(0.0, abs=0.05)
        assert np.var(m) == pytest.approx(1 / 3, rel=0.1)


@pytest.mark.parametrize("kw", [dict(sparsity=0.0), dict(sparsity=1.5), dict(g=0.0), dict(g=-1.0), dict(mode="x")])
def test_init_rejects_bad_arguments(kw):
    with pytest.raises(ConfigError):
        init_weights(10, 1, 1, **kw)


def test_init_deterministic():
    a, b = init_weights(40, 1, 1, seed=7), init_weights(40, 1, 1, seed=7)
    for name in ("u_in", "j", "j_d", "u_out"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


# ----------------------------------------------------------------- stepping


def test_zero_weights_zero_input_keep_initial_state():
    params = NetworkParams(n=4, neuron=NeuronParams(i_bias=0.0))
    w = zero_weights()
    s0 = init_state(w, params)
    s = s0
    for _ in range(200):
        s = step_task(s, w, [0.0], 1e-3, params)
        s = step_target(s, w, [0.0], [0.0], 1e-3, params)
    assert np.array_equal(s.task.v, s0.task.v) and np.array_equal(s.target.v, s0.target.v)
    assert not s.y.any() and not s.y_d.any()
    assert np.array_equal(s.z, s0.z)


@pytest.mark.parametrize("drive", [20.0, 80.0, 300.0])
def test_single_neuron_rate_matches_closed_form(drive):
    params = NetworkParams(n=1, input_gain=1.0, tau_r=0.05)
    w = zero_weights(n=1)
    w.u_in[...] = 1.0
    s = init_state(w, params)
    dt, ys = 1e-4, []
    for k in range(30_000):
        s = step_task(s, w, [drive], dt, params)
        if k >= 10_000:
            ys.append(s.y[0])
    expected = firing_rate(drive + params.neuron.i_bias, params.neuron)
    assert np.mean(ys) == pytest.approx(expected, rel=0.05)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-1e3, 1e4))
def test_rates_bounded_by_refractory_limit(seed, scale):
    params = NetworkParams(n=20)
    w = init_weights(20, 1, 1, seed=seed)
    w.u_in[...] = scale
    s = init_state(w, params, seed=seed)
    for _ in range(300):
        s = step_task(s, w, [1.0], 1e-3, params)
        assert np.all(s.y >= 0) and np.all(s.y <= params.neuron.max_rate)
        assert np.all(np.isfinite(s.z))


def test_feedback_irrelevant_with_zero_readout():
    params = SMALL
    w = init_weights(50, 1, 1, seed=5)
    a = b = init_state(w, params, seed=5)
    for _ in range(100):
        a = step_task(a, w, [0.0], 1e-3, params, feedback_on=True)
        b = step_task(b, w, [0.0], 1e-3, params, feedback_on=False)
    assert np.array_equal(a.task.v, b.task.v) and np.array_equal(a.y, b.y)


def test_target_net_silent_without_drive_or_bias():
    params = NetworkParams(n=10, neuron=NeuronParams(i_bias=0.0))
    w = zero_weights(n=10)
    s = init_state(w, params, seed=1)
    for _ in range(500):
        s = step_target(s, w, [0.0], [0.0], 1e-3, params)
    assert not s.y_d.any()


def test_spontaneous_activity_at_g_one_and_a_half():
    params = NetworkParams(n=1000, g=1.5)
    w = init_weights(1000, 1, 1, g=1.5, seed=6)
    s = init_state(w, params, seed=6)
    for _ in range(1000):
        s = step_target(s, w, [0.0], [0.0], 1e-3, params)
    assert s.spikes_d.sum() / 1000 / 1.0 > 0


def test_trajectories_deterministic():
    params = SMALL
    w = init_weights(50, 1, 1, seed=8)
    runs = []
    for _ in range(2):
        s = init_state(w, params, seed=8)
        for k in range(200):
            s = step_target(s, w, [0.0], [math.sin(k / 30)], 1e-3, params)
            s = step_task(s, w, [0.0], 1e-3, params)
        runs.append(s)
    a, b = runs
    assert np.array_equal(a.task.v, b.task.v) and np.array_equal(a.y_d, b.y_d)
    assert np.array_equal(a.spikes, b.spikes)


def test_step_errors():
    params = SMALL
    w = init_weights(50, 1, 1, seed=0)
    s = init_state(w, params)
    with pytest.raises(DimensionError):
        step_task(s, w, [0.0, 1.0], 1e-3, params)
    with pytest.raises(NumericInputError):
        step_task(s, w, [np.nan], 1e-3, params)
    with pytest.raises(ConfigError):
        step_task(s, w, [0.0], 0.0, params)
    with pytest.raises(ConfigError):
        step_task(s, w, [0.0], 1e-3, params, coding="phase")


# ----------------------------------------------------------------- readout


def test_unit_readout_sees_only_one_neuron():
    params = NetworkParams(n=5, transfer="identity")
    w = init_weights(5, 1, 1, seed=0)
    w.w[...] = 0.0
    w.w[2, 0] = 1.0
    s = init_state(w, params)
    s.y[:] = [5.0, 7.0, 11.0, 13.0, 17.0]
    assert readout(s, w, params)[0] == 11.0
    s.y[[0, 1, 3, 4]] = 99.0
    assert readout(s, w, params)[0] == 11.0


def test_linear_readout_matches_naive_loop():
    rng = np.random.default_rng(9)
    params = NetworkParams(n=300)
    w = init_weights(300, 1, 3, seed=9)
    w.w[...] = rng.normal(size=(300, 3))
    s = init_state(w, params)
    s.y[:] = rng.uniform(0, 100, 300)
    z = readout(s, w, params, coding="ttfs")
    for i in range(3):
        naive = math.fsum(a * b for a, b in zip(w.w[:, i].tolist(), s.y.tolist()))
        assert z[i] == pytest.approx(naive, rel=1e-12)


def test_rate_readout_is_affine_map_of_rate():
    params = NetworkParams(n=3)
    w = init_weights(3, 1, 1, seed=0, z_range=(-2.0, 0.04))
    w.w[:, 0] = [1.0, 0.5, 0.25]
    s = init_state(w, params)
    s.y[:] = [40.0, 20.0, 8.0]
    c = 40.0 + 10.0 + 2.0
    assert readout(s, w, params)[0] == pytest.approx(-2.0 + 0.04 * firing_rate(c, params.neuron), rel=1e-14)


def test_identity_transfer_reproduces_sigmoid_free_step():
    # two-neuron toy: with G = identity the readout is W.T y and the
    # current is J y + U_i f + U_o z, as in the classic rate network
    params = NetworkParams(n=2, transfer="identity", input_gain=1.0, feedback_gain=1.0)
    w = init_weights(2, 1, 1, seed=0)
    w.j[...] = [[0.0, 0.4], [-0.3, 0.0]]
    w.u_in[...] = [[2.0], [1.0]]
    w.u_out[...] = [[0.5], [-0.5]]
    w.w[...] = [[0.01], [0.02]]
    s = init_state(w, params)
    s.y[:] = [30.0, 10.0]
    s.z = readout(s, w, params)
    assert s.z[0] == pytest.approx(0.01 * 30 + 0.02 * 10)
    from snnforce.network import task_current

    cur = task_current(s, w, [3.0], params, feedback_on=True)
    expected = np.array([0.4 * 10 + 6.0 + 0.5 * s.z[0], -0.3 * 30 + 3.0 - 0.5 * s.z[0]])
    assert np.allclose(cur, expected, rtol=1e-14)


# ----------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip_bit_exact(tmp_path):
    params = NetworkParams(n=40, g=1.2, feedback_gain=77.0)
    w = init_weights(40, 2, 3, seed=11, mode="force")
    w.w[...] = np.random.default_rng(0).normal(size=(40, 3))
    path = save_checkpoint(tmp_path / "c.npz", w, params, {"note": "x"})
    w2, p2, meta = load_checkpoint(path)
    for name in ("u_in", "j", "j_d", "w", "u_out", "z_lo", "z_scale"):
        assert np.array_equal(getattr(w, name), getattr(w2, name))
    assert p2 == params and meta == {"note": "x"} and w2.mode == "force" and w2.seed == 11


def test_corrupt_checkpoint_detected(tmp_path):
    w = init_weights(10, 1, 1, seed=0)
    path = save_checkpoint(tmp_path / "c.npz", w, NetworkParams(n=10))
    data = bytearray(path.read_bytes())
    data[len(data) // 2] ^= 0xFF
    bad = tmp_path / "bad.npz"
    bad.write_bytes(bytes(data))
    with pytest.raises(IntegrityError):
        load_checkpoint(bad)
    garbage = tmp_path / "garbage.npz"
    garbage.write_bytes(b"not a checkpoint")
    with pytest.raises(IntegrityError):
        load_checkpoint(garbage)
