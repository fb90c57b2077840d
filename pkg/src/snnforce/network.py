"""Task-performing and target-generating LIF reservoirs, their readout and checkpoints.

Both reservoirs share :class:`NetworkParams`. Currents are built from the
activity vectors of the previous step, so a caller that wants to adjust a
current before applying it (the full-FORCE trainer does) can split a step
into :func:`task_current` and :func:`advance_task`.

Conventions
-----------
* Activity ``y`` is in Hz. Under rate coding it is the exponentially
  filtered spike train; under TTFS coding each spike is weighted by its
  latency weight before filtering (or, with ``ttfs_activity="held"``, the
  last completed window's latency code divided by the window length).
* Currents omit the trailing ``dt`` of the discrete sum so steady rates do
  not depend on the step size.
* The rate readout decodes ``Z = lo + scale * G(W.T @ y)`` where ``G`` is the
  LIF transfer function, which lets the readout cover a signed target.
"""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, IntegrityError, NumericInputError
from .neuron import NeuronParams, NeuronState, TtfsParams, advance, firing_rate, inverse_firing_rate

MODES = ("force", "full_force")
CODINGS = ("rate", "ttfs")


@dataclass(frozen=True)
class NetworkParams:
    """Architecture and coding constants.

    ``feedback_gain`` scales every ``U_o`` term (feedback, hint drive) and
    ``input_gain`` the ``U_i`` term; both are needed because the LIF
    currents live on the scale of the rheobase. ``rate_full_scale`` is the
    firing rate the rate readout maps to the top of the target range.
    """

    n: int = 1000
    g: float = 1.5
    sparsity: float = 0.1
    feedback_gain: float = 200.0
    input_gain: float = 200.0
    tau_r: float = 0.05
    rate_full_scale: float = 100.0
    transfer: str = "rate"
    target_drive: str = "fout"
    ttfs_activity: str = "filtered"
    neuron: NeuronParams = field(default_factory=NeuronParams)
    ttfs: TtfsParams = field(default_factory=TtfsParams)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n}")
        if not (np.isfinite(self.g) and self.g > 0):
            raise ConfigError(f"g must be positive, got {self.g}")
        if not (0 < self.sparsity <= 1):
            raise ConfigError(f"sparsity must lie in (0, 1], got {self.sparsity}")
        for name in ("feedback_gain", "input_gain"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not self.tau_r > 0:
            raise ConfigError("tau_r must be positive")
        if not 0 < self.rate_full_scale < self.neuron.max_rate:
            raise ConfigError(
                f"rate_full_scale must lie in (0, {self.neuron.max_rate}) Hz, got {self.rate_full_scale}"
            )
        if self.transfer not in ("rate", "identity"):
            raise ConfigError(f"transfer must be 'rate' or 'identity', got {self.transfer!r}")
        if self.target_drive not in ("fout", "z"):
            raise ConfigError(f"target_drive must be 'fout' or 'z', got {self.target_drive!r}")
        if self.ttfs_activity not in ("filtered", "held"):
            raise ConfigError(f"ttfs_activity must be 'filtered' or 'held', got {self.ttfs_activity!r}")
        self.ttfs.resolved(self.neuron)

    @property
    def ttfs_resolved(self) -> TtfsParams:
        return self.ttfs.resolved(self.neuron)

    def with_(self, **changes) -> "NetworkParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkParams":
        d = dict(d)
        neuron = NeuronParams(**d.pop("neuron", {}))
        ttfs = TtfsParams(**d.pop("ttfs", {}))
        return cls(neuron=neuron, ttfs=ttfs, **d)


@dataclass
class WeightSet:
    """All weights of one architecture instance plus the readout decoding constants.

    Shapes: ``u_in`` (N, d_in), ``j`` and ``j_d`` (N, N), ``w`` and ``u_out``
    (N, d_out), ``z_lo`` and ``z_scale`` (d_out,).
    """

    u_in: np.ndarray
    j: np.ndarray
    j_d: np.ndarray
    w: np.ndarray
    u_out: np.ndarray
    z_lo: np.ndarray
    z_scale: np.ndarray
    mode: str = "full_force"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def n(self) -> int:
        return self.j.shape[0]

    @property
    def d_in(self) -> int:
        return self.u_in.shape[1]

    @property
    def d_out(self) -> int:
        return self.w.shape[1]

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        n = self.j.shape[0]
        d_out = self.w.shape[1] if self.w.ndim == 2 else -1
        expect = {
            "u_in": (n, self.u_in.shape[1] if self.u_in.ndim == 2 else -1),
            "j": (n, n),
            "j_d": (n, n),
            "w": (n, d_out),
            "u_out": (n, d_out),
            "z_lo": (d_out,),
            "z_scale": (d_out,),
        }
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr.shape != shape or -1 in shape:
                raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise NumericInputError(f"{name} has non-finite entries")
        if np.any(self.z_scale <= 0):
            raise ConfigError("z_scale must be positive")

    def copy(self) -> "WeightSet":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        for name in ARRAY_FIELDS:
            kw[name] = kw[name].copy(order="K")
        return WeightSet(**kw)


ARRAY_FIELDS = ("u_in", "j", "j_d", "w", "u_out", "z_lo", "z_scale")


def output_range(f_out, rate_full_scale: float = 100.0) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel ``(lo, scale)`` mapping ``[0, rate_full_scale]`` Hz onto the target range.

    A constant channel gets the range ``[c, c + 1]``.
    """
    f = np.atleast_2d(np.asarray(f_out, dtype=float).T).T
    lo = f.min(axis=0)
    span = f.max(axis=0) - lo
    span = np.where(span > 0, span, 1.0)
    return lo, span / rate_full_scale


def init_weights(
    n: int,
    d_in: int,
    d_out: int,
    g: float = 1.5,
    sparsity: float = 0.1,
    mode: str = "full_force",
    seed: int = 0,
    z_range: tuple | None = None,
) -> WeightSet:
    """Random initial weights.

    ``U_i`` and ``U_o`` are uniform on [-1, 1]; ``J_D`` is Gaussian with
    variance ``g**2 / n``. In ``"force"`` mode ``J`` is sparse (density
    ``sparsity``, variance ``g**2 / (sparsity * n)``); in ``"full_force"``
    mode it is a fresh dense Gaussian draw like ``J_D``. ``W`` starts at
    zero. ``z_range`` is a ``(lo, scale)`` pair from :func:`output_range`;
    it defaults to the range ``[0, 1]`` at 100 Hz.
    """
    if int(n) != n or n < 1 or d_in < 1 or d_out < 1:
        raise ConfigError(f"bad dimensions n={n}, d_in={d_in}, d_out={d_out}")
    if not (np.isfinite(g) and g > 0):
        raise ConfigError(f"g must be positive, got {g}")
    if not (0 < sparsity <= 1):
        raise ConfigError(f"sparsity must lie in (0, 1], got {sparsity}")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    n = int(n)
    rng = np.random.default_rng(seed)
    u_in = rng.uniform(-1.0, 1.0, (n, d_in))
    u_out = rng.uniform(-1.0, 1.0, (n, d_out))
    j_d = rng.normal(0.0, g / np.sqrt(n), (n, n))
    if mode == "force":
        mask = rng.random((n, n)) < sparsity
        j = np.where(mask, rng.normal(0.0, g / np.sqrt(sparsity * n), (n, n)), 0.0)
    else:
        j = rng.normal(0.0, g / np.sqrt(n), (n, n))
    if z_range is None:
        z_lo, z_scale = np.zeros(d_out), np.full(d_out, 0.01)
    else:
        z_lo, z_scale = (np.broadcast_to(np.asarray(v, dtype=float), (d_out,)).copy() for v in z_range)
    return WeightSet(
        u_in=u_in,
        j=np.asfortranarray(j),
        j_d=j_d,
        w=np.zeros((n, d_out)),
        u_out=u_out,
        z_lo=z_lo,
        z_scale=z_scale,
        mode=mode,
        seed=int(seed) if np.isscalar(seed) else 0,
    )


# --------------------------------------------------------------------------- state


@dataclass
class NetworkState:
    """Simulation state of both reservoirs.

    ``y`` / ``y_d`` are the activity vectors (Hz), ``z`` the last readout and
    ``spikes`` / ``spikes_d`` per-neuron spike totals since construction.
    """

    task: NeuronState
    target: NeuronState
    y: np.ndarray
    y_d: np.ndarray
    z: np.ndarray
    t: float = 0.0
    spikes: np.ndarray | None = None
    spikes_d: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.task)
        if self.spikes is None:
            self.spikes = np.zeros(n, dtype=np.int64)
        if self.spikes_d is None:
            self.spikes_d = np.zeros(n, dtype=np.int64)

    def copy(self) -> "NetworkState":
        return NetworkState(
            self.task.copy(), self.target.copy(), self.y.copy(), self.y_d.copy(),
            self.z.copy(), self.t, self.spikes.copy(), self.spikes_d.copy(),
        )


def init_state(weights: WeightSet, params: NetworkParams, seed=None) -> NetworkState:
    """Fresh state; with a seed, membrane voltages start uniform in ``[v_rest, v_th)``.

    Both reservoirs receive the same initial voltages. Without a seed every
    neuron starts at rest.
    """
    n = weights.n
    task = NeuronState.rest(n, params.neuron)
    if seed is not None:
        rng = np.random.default_rng(seed)
        task.v[:] = rng.uniform(params.neuron.v_rest, params.neuron.v_th, n)
    z = decode(np.zeros(weights.d_out), weights, params, "rate")
    return NetworkState(task, task.copy(), np.zeros(n), np.zeros(n), z)


# --------------------------------------------------------------------------- readout


def readout_drive(y: np.ndarray, weights: WeightSet) -> np.ndarray:
    """``W.T @ y``: the readout current (rate coding) or the output itself (TTFS)."""
    return weights.w.T @ y


def decode(c: np.ndarray, weights: WeightSet, params: NetworkParams, coding: str) -> np.ndarray:
    """Map a readout drive to the output ``Z``."""
    if coding == "ttfs" or params.transfer == "identity":
        return np.asarray(c, dtype=float).copy()
    return weights.z_lo + weights.z_scale * firing_rate(c, params.neuron)


def encode_target(f: np.ndarray, weights: WeightSet, params: NetworkParams, coding: str) -> np.ndarray:
    """Readout drive whose decoding is ``f``: the target for RLS on ``W``.

    Under the rate transfer, targets are clipped into the invertible range
    of ``G`` first.
    """
    f = np.asarray(f, dtype=float)
    if coding == "ttfs" or params.transfer == "identity":
        return f.copy()
    rate = (f - weights.z_lo) / weights.z_scale
    top = np.nextafter(params.neuron.max_rate, 0.0)
    return inverse_firing_rate(np.clip(rate, 0.0, top), params.neuron)


def readout(state: NetworkState, weights: WeightSet, params: NetworkParams, coding: str = "rate") -> np.ndarray:
    """Output ``Z`` for the current task-network activity."""
    _check_coding(coding)
    return decode(readout_drive(state.y, weights), weights, params, coding)


# --------------------------------------------------------------------------- dynamics


def _check_coding(coding: str) -> None:
    if coding not in CODINGS:
        raise ConfigError(f"coding must be one of {CODINGS}, got {coding!r}")


def _vec(x, d: int, what: str) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (d,):
        raise DimensionError(f"{what} has shape {x.shape}, expected ({d},)")
    if not np.all(np.isfinite(x)):
        raise NumericInputError(f"non-finite {what}")
    return x


def task_current(
    state: NetworkState,
    weights: WeightSet,
    f_in,
    params: NetworkParams,
    feedback_on: bool,
    j=None,
) -> np.ndarray:
    """``J y + g_in U_i f_in + [feedback_on] g_fb U_o z``; ``j`` may override ``J`` (e.g. sparse)."""
    f_in = _vec(f_in, weights.d_in, "f_in")
    current = (weights.j if j is None else j) @ state.y
    if f_in.any():
        current += params.input_gain * (weights.u_in @ f_in)
    if feedback_on:
        current += params.feedback_gain * (weights.u_out @ state.z)
    return current


def target_current(state: NetworkState, weights: WeightSet, f_in, drive, params: NetworkParams) -> np.ndarray:
    """``J_D y_D + g_in U_i f_in + g_fb U_o drive``."""
    f_in = _vec(f_in, weights.d_in, "f_in")
    drive = _vec(drive, weights.d_out, "drive")
    current = weights.j_d @ state.y_d + params.feedback_gain * (weights.u_out @ drive)
    if f_in.any():
        current += params.input_gain * (weights.u_in @ f_in)
    return current


def _advance_population(pop: NeuronState, y: np.ndarray, current, dt, params: NetworkParams, coding: str):
    """Step one population and its activity in place; returns the spike vector."""
    ttfs = params.ttfs_resolved if coding == "ttfs" else None
    spikes = advance(pop, current, dt, params.neuron, ttfs)
    if ttfs is not None and params.ttfs_activity == "held":
        y[:] = pop.code / ttfs.window
        return spikes
    y *= np.exp(-dt / params.tau_r)
    if ttfs is None:
        y[spikes] += 1.0 / params.tau_r
    else:
        y[spikes] += np.exp(-pop.first_spike[spikes] / ttfs.tau_s) / params.tau_r
    return spikes


def advance_task(state: NetworkState, current, dt: float, params: NetworkParams, coding: str) -> np.ndarray:
    """Apply ``current`` to the task network in place (no readout refresh)."""
    spikes = _advance_population(state.task, state.y, current, dt, params, coding)
    state.spikes += spikes
    return spikes


def advance_target(state: NetworkState, current, dt: float, params: NetworkParams, coding: str) -> np.ndarray:
    spikes = _advance_population(state.target, state.y_d, current, dt, params, coding)
    state.spikes_d += spikes
    return spikes


def step_task(
    state: NetworkState,
    weights: WeightSet,
    f_in_sample,
    dt: float,
    params: NetworkParams,
    coding: str = "rate",
    feedback_on: bool = True,
) -> NetworkState:
    """One task-network step; returns a new state with refreshed ``y`` and ``z``."""
    _check_coding(coding)
    if not dt > 0:
        raise ConfigError("dt must be positive")
    new = state.copy()
    current = task_current(new, weights, f_in_sample, params, feedback_on)
    advance_task(new, current, dt, params, coding)
    new.z = readout(new, weights, params, coding)
    new.t += dt
    return new


def step_target(
    state: NetworkState,
    weights: WeightSet,
    f_in_sample,
    drive_sample,
    dt: float,
    params: NetworkParams,
    coding: str = "rate",
) -> NetworkState:
    """One target-network step driven by ``drive_sample`` (the hint); returns a new state."""
    _check_coding(coding)
    if not dt > 0:
        raise ConfigError("dt must be positive")
    new = state.copy()
    current = target_current(new, weights, f_in_sample, drive_sample, params)
    advance_target(new, current, dt, params, coding)
    return new


# --------------------------------------------------------------------------- checkpoints


def _digest(arrays: dict, header: str) -> str:
    h = hashlib.sha256(header.encode("utf-8"))
    for name in ARRAY_FIELDS:
        a = np.ascontiguousarray(arrays[name])
        h.update(name.encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def save_checkpoint(path, weights: WeightSet, params: NetworkParams, meta: dict | None = None) -> Path:
    """Write weights, parameters and metadata to an ``.npz`` container.

    Arrays are stored row-major with their shapes; a SHA-256 digest over the
    arrays and header is checked on load.
    """
    path = Path(path)
    header = json.dumps(
        {"mode": weights.mode, "seed": weights.seed, "params": params.to_dict(), "meta": meta or {}},
        sort_keys=True,
    )
    arrays = {name: np.ascontiguousarray(getattr(weights, name)) for name in ARRAY_FIELDS}
    buf = io.BytesIO()
    np.savez(buf, header=np.array(header), digest=np.array(_digest(arrays, header)), **arrays)
    path.write_bytes(buf.getvalue())
    return path


def load_checkpoint(path) -> tuple[WeightSet, NetworkParams, dict]:
    """Inverse of :func:`save_checkpoint`; raises :class:`IntegrityError` on corruption."""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as z:
            header = str(z["header"])
            digest = str(z["digest"])
            arrays = {name: z[name] for name in ARRAY_FIELDS}
    except FileNotFoundError:
        raise
    except Exception as exc:  # zip/npy decoding errors of many kinds
        raise IntegrityError(f"{path}: unreadable checkpoint ({exc})") from exc
    if _digest(arrays, header) != digest:
        raise IntegrityError(f"{path}: checkpoint digest mismatch")
    info = json.loads(header)
    arrays["j"] = np.asfortranarray(arrays["j"])
    weights = WeightSet(mode=info["mode"], seed=info["seed"], **arrays)
    return weights, NetworkParams.from_dict(info["params"]), info["meta"]
