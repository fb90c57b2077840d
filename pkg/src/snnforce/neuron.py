"""Leaky integrate-and-fire neurons, their rate transfer function and TTFS coding.

States are held per population as arrays so one call advances every neuron
of a reservoir; a single neuron is just a population of size one.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DimensionError, NumericInputError

_EPS = 1e-12


@dataclass(frozen=True)
class NeuronParams:
    """LIF constants shared by every neuron of a network.

    ``r`` defaults to ``tau / c``. ``i_bias`` is a constant current added to
    every neuron; the default of 1.2 rheobase keeps an unstimulated reservoir
    firing.
    """

    tau: float = 0.02
    c: float = 1.0
    r: float | None = None
    v_th: float = 1.0
    v_rest: float = 0.0
    tau_ref: float = 0.002
    i_bias: float = 60.0

    def __post_init__(self):
        if self.r is None:
            object.__setattr__(self, "r", self.tau / self.c if self.c > 0 else float("nan"))
        for name in ("tau", "c", "r", "tau_ref"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be positive, got {val}")
        if abs(self.r * self.c - self.tau) > 1e-9 * self.tau:
            raise ConfigError(f"tau must equal r*c ({self.r}*{self.c} != {self.tau})")
        if not self.v_th > self.v_rest:
            raise ConfigError("v_th must exceed v_rest")
        if not np.isfinite(self.i_bias):
            raise ConfigError("i_bias must be finite")

    @property
    def i_rh(self) -> float:
        """Rheobase current ``v_th / r``."""
        return self.v_th / self.r

    @property
    def max_rate(self) -> float:
        return 1.0 / self.tau_ref

    def with_(self, **changes) -> "NeuronParams":
        if "tau" in changes or "c" in changes:
            changes.setdefault("r", None)
        return replace(self, **changes)


@dataclass(frozen=True)
class TtfsParams:
    """Time-to-first-spike constants.

    ``None`` entries fall back to the membrane values when resolved against
    a :class:`NeuronParams` (threshold ``v_th``, both time constants ``tau``).
    """

    theta0: float | None = None
    tau_th: float | None = None
    tau_s: float | None = None
    window: float = 0.025

    def resolved(self, params: NeuronParams) -> "TtfsParams":
        out = TtfsParams(
            theta0=params.v_th if self.theta0 is None else self.theta0,
            tau_th=params.tau if self.tau_th is None else self.tau_th,
            tau_s=params.tau if self.tau_s is None else self.tau_s,
            window=self.window,
        )
        out.validate()
        return out

    def validate(self) -> None:
        for name in ("theta0", "tau_th", "tau_s", "window"):
            val = getattr(self, name)
            if val is None or not (np.isfinite(val) and val > 0):
                raise ConfigError(f"ttfs {name} must be positive, got {val}")


@dataclass
class NeuronState:
    """Per-neuron state of one population.

    ``window_clock``, ``has_spiked``, ``first_spike`` and ``code`` are only
    advanced in TTFS mode. ``code`` holds the latency code of the most
    recently completed window.
    """

    v: np.ndarray
    refractory: np.ndarray
    window_clock: np.ndarray
    has_spiked: np.ndarray
    first_spike: np.ndarray
    code: np.ndarray

    @classmethod
    def rest(cls, n: int, params: NeuronParams | None = None) -> "NeuronState":
        v_rest = (params or NeuronParams()).v_rest
        return cls(
            v=np.full(n, float(v_rest)),
            refractory=np.zeros(n),
            window_clock=np.zeros(n),
            has_spiked=np.zeros(n, dtype=bool),
            first_spike=np.full(n, np.nan),
            code=np.zeros(n),
        )

    def copy(self) -> "NeuronState":
        return NeuronState(*(getattr(self, f).copy() for f in self.__dataclass_fields__))

    def __len__(self) -> int:
        return len(self.v)


def _finite(x, what="current"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericInputError(f"non-finite {what}")
    return x


def isi(current, params: NeuronParams):
    """Time from reset to threshold under constant current; ``inf`` at or below rheobase."""
    i = _finite(current)
    out = np.full(i.shape, np.inf)
    above = i > params.i_rh
    out[above] = -params.tau * np.log1p(-params.i_rh / i[above])
    return out if out.ndim else float(out)


def firing_rate(current, params: NeuronParams):
    """Steady firing rate ``1 / (tau_ref + isi)`` in Hz; zero at or below rheobase."""
    i = _finite(current)
    out = np.zeros(i.shape)
    above = i > params.i_rh
    out[above] = 1.0 / (params.tau_ref - params.tau * np.log1p(-params.i_rh / i[above]))
    return out if out.ndim else float(out)


def inverse_firing_rate(rate, params: NeuronParams):
    """Current that produces ``rate``; rheobase for zero rate.

    Defined for ``0 <= rate < 1/tau_ref``.
    """
    r = _finite(rate, "rate")
    if np.any(r < 0) or np.any(r >= params.max_rate):
        raise NumericInputError(f"rate must lie in [0, {params.max_rate}) Hz")
    out = np.full(r.shape, params.i_rh)
    pos = r > 0
    gap = 1.0 / r[pos] - params.tau_ref
    out[pos] = params.i_rh / -np.expm1(-gap / params.tau)
    return out if out.ndim else float(out)


def ttfs_threshold(t_in_window, ttfs: TtfsParams):
    """Decaying TTFS threshold ``theta0 * exp(-t / tau_th)``."""
    t = _finite(t_in_window, "time")
    if np.any(t < 0):
        raise NumericInputError("time in window must be >= 0")
    return ttfs.theta0 * np.exp(-t / ttfs.tau_th)


def spike_weight(t_first_spike, ttfs: TtfsParams):
    """Latency weight ``exp(-t / tau_s)``; NaN (no spike in the window) maps to 0."""
    t = np.asarray(t_first_spike, dtype=float)
    out = np.where(np.isnan(t), 0.0, np.exp(-np.nan_to_num(t, nan=0.0) / ttfs.tau_s))
    return out if out.ndim else float(out)


def synaptic_current(weights, rates, dt: float):
    """Current from presynaptic rates: ``sum_i w_i * rate_i * dt``."""
    w = np.asarray(weights, dtype=float)
    r = np.asarray(rates, dtype=float)
    if w.shape[-1] != r.shape[0]:
        raise DimensionError(f"weights {w.shape} do not match rates {r.shape}")
    return (w @ r) * dt


def advance(
    state: NeuronState,
    current: np.ndarray,
    dt: float,
    params: NeuronParams,
    ttfs: TtfsParams | None = None,
) -> np.ndarray:
    """Advance ``state`` in place by one step and return the boolean spike vector.

    ``current`` excludes the bias. In TTFS mode (``ttfs`` given, already
    resolved) the threshold decays within each window, a neuron fires at most
    once per window and is held at rest after its first spike until the
    window closes; at each window boundary the closing window's latency code
    is written to ``state.code``.
    """
    decay = np.exp(-dt / params.tau)
    if ttfs is not None:
        boundary = state.window_clock >= ttfs.window - _EPS
        if boundary.any():
            state.code[boundary] = spike_weight(state.first_spike[boundary], ttfs)
            state.has_spiked[boundary] = False
            state.first_spike[boundary] = np.nan
            state.window_clock[boundary] = 0.0

    active = state.refractory < _EPS
    drive = (params.i_bias + current) * params.r * (1.0 - decay)
    np.copyto(state.v, state.v * decay + drive, where=active)
    np.subtract(state.refractory, dt, out=state.refractory, where=~active)
    np.maximum(state.refractory, 0.0, out=state.refractory)

    if ttfs is None:
        spikes = active & (state.v >= params.v_th)
    else:
        theta = ttfs.theta0 * np.exp(-state.window_clock / ttfs.tau_th)
        crossed = active & (state.v >= theta)
        spikes = crossed & ~state.has_spiked
        state.v[active & state.has_spiked] = params.v_rest
        state.first_spike[spikes] = state.window_clock[spikes]
        state.has_spiked |= spikes
        state.window_clock += dt

    state.v[spikes] = params.v_rest
    state.refractory[spikes] = params.tau_ref
    return spikes


def step_membrane(
    state: NeuronState,
    current,
    dt: float,
    params: NeuronParams,
    mode: str = "rate",
    ttfs: TtfsParams | None = None,
) -> tuple[NeuronState, np.ndarray]:
    """Pure one-step update; returns ``(new_state, spikes)`` as 0/1 ints.

    ``mode`` is ``"rate"`` or ``"ttfs"``; the latter needs ``ttfs``.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    current = _finite(current)
    if mode not in ("rate", "ttfs"):
        raise ConfigError(f"mode must be 'rate' or 'ttfs', got {mode!r}")
    if mode == "ttfs":
        if ttfs is None:
            raise ConfigError("ttfs mode needs TtfsParams")
        ttfs = ttfs.resolved(params)
    else:
        ttfs = None
    new = state.copy()
    current = np.broadcast_to(current, new.v.shape)
    spikes = advance(new, current, dt, params, ttfs)
    return new, spikes.astype(np.int8)
