"""FORCE and full-FORCE training loops and closed-loop evaluation.

Three procedures are supported:

``force_rate``
    Sparse fixed reservoir with output feedback; RLS trains the readout ``W``.
``full_force_rate`` / ``full_force_ttfs``
    A target-generating reservoir driven by the hint ``f_out`` supplies
    per-neuron current targets; RLS trains both ``W`` and the recurrent ``J``
    of a feedback-free task reservoir. Both blocks see the same activity
    vector, so they share one inverse-correlation matrix.

Within a step the task current, the target current and the readout are all
computed from the activity of the previous step. When an RLS update fires,
the task current is replaced by the current of the freshly updated weights
before the network is advanced.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.linalg import blas

from . import network as net
from .errors import ConfigError, DivergenceError
from .metrics import avg_spike_rate, mse, time_to_converge
from .network import NetworkParams, WeightSet
from .rls import rls_init
from .signals import SignalKind, SignalSpec, SignalTrace, generate

log = logging.getLogger(__name__)

PROCEDURES = {
    "force_rate": ("force", "rate"),
    "full_force_rate": ("full_force", "rate"),
    "full_force_ttfs": ("full_force", "ttfs"),
}
_PROCEDURE_ALIASES = {
    "force": "force_rate",
    "forcerate": "force_rate",
    "forcelifrate": "force_rate",
    "fullforce": "full_force_rate",
    "fullforcerate": "full_force_rate",
    "fullforcelifrate": "full_force_rate",
    "fullforcettfs": "full_force_ttfs",
    "fullforcelifttfs": "full_force_ttfs",
    "ttfs": "full_force_ttfs",
}


def parse_procedure(name: str) -> str:
    key = "".join(ch for ch in str(name).lower() if ch.isalnum())
    if key in _PROCEDURE_ALIASES:
        return _PROCEDURE_ALIASES[key]
    raise ConfigError(f"unknown procedure {name!r}; expected one of {sorted(PROCEDURES)}")


def derive_seeds(seed: int, count: int = 3) -> list[int]:
    """Independent 32-bit child seeds of ``seed`` (weights, initial state, evaluation)."""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(c.generate_state(1)[0]) for c in children]


@dataclass(frozen=True)
class TrainConfig:
    """One training run.

    ``warmup_fraction`` of every epoch runs without RLS updates. With
    ``eval_each_epoch`` a closed-loop evaluation follows every epoch and
    ``ttc_source`` picks whether convergence time is measured on those
    evaluations (``"closed_loop"``) or on the training-mode error
    (``"training"``).
    """

    procedure: str = "full_force_rate"
    epochs: int = 50
    update_interval: int = 2
    alpha: float = 1.0
    seed: int = 0
    warmup_fraction: float = 0.1
    eval_each_epoch: bool = True
    eval_warmup: float = 1.0
    ttc_source: str = "closed_loop"
    ttc_threshold: float = 0.25
    divergence_factor: float = 1e3
    network: NetworkParams = field(default_factory=NetworkParams)
    signal: SignalSpec = field(default_factory=SignalSpec)

    def __post_init__(self):
        object.__setattr__(self, "procedure", parse_procedure(self.procedure))
        self.validate()

    def validate(self) -> None:
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError(f"epochs must be a positive integer, got {self.epochs}")
        if int(self.update_interval) != self.update_interval or self.update_interval < 1:
            raise ConfigError(f"update_interval must be a positive integer, got {self.update_interval}")
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must lie in [0, 1)")
        if not self.eval_warmup >= 0:
            raise ConfigError("eval_warmup must be >= 0")
        if self.ttc_source not in ("closed_loop", "training"):
            raise ConfigError(f"ttc_source must be 'closed_loop' or 'training', got {self.ttc_source!r}")
        if not self.divergence_factor > 0:
            raise ConfigError("divergence_factor must be positive")

    @property
    def mode(self) -> str:
        return PROCEDURES[self.procedure][0]

    @property
    def coding(self) -> str:
        return PROCEDURES[self.procedure][1]

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["signal"]["kind"] = self.signal.kind.value
        return d


@dataclass
class TrainReport:
    """Per-epoch telemetry of one run; every list has one entry per epoch."""

    procedure: str
    system: str
    n: int
    seed: int
    train_mse: list = field(default_factory=list)
    eval_mse: list = field(default_factory=list)
    spike_counts: list = field(default_factory=list)
    eval_spike_counts: list = field(default_factory=list)
    wall_time: float = 0.0
    rls_updates: int = 0
    contraction_violations: int = 0
    max_contraction_ratio: float = 0.0
    ttfs_window_violations: int = 0
    final_mse: float = float("nan")
    ttc_source: str = "closed_loop"
    ttc_threshold: float = 0.25
    duration: float = 5.0
    checkpoint: str | None = None
    config: dict = field(default_factory=dict)

    @property
    def epochs(self) -> int:
        return len(self.train_mse)

    @property
    def mse_history(self) -> list:
        if self.ttc_source == "closed_loop" and len(self.eval_mse) == len(self.train_mse):
            return self.eval_mse
        return self.train_mse

    @property
    def ttc(self) -> float | None:
        return time_to_converge(self.mse_history, self.ttc_threshold)

    @property
    def avg_spike_rate(self) -> float:
        """Mean task-network rate (Hz per neuron) over all training epochs."""
        return avg_spike_rate(sum(self.spike_counts), self.n, self.duration * self.epochs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(ttc_epochs=self.ttc, avg_spike_rate=self.avg_spike_rate, epochs=self.epochs)
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, default=_json_default)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _range_of(f_out: np.ndarray) -> float:
    span = float(np.max(f_out) - np.min(f_out))
    return span if span > 0 else 1.0


def _guard(z: np.ndarray, limit: float, where: str) -> None:
    if not (np.all(np.isfinite(z)) and np.max(np.abs(z)) <= limit):
        raise DivergenceError(f"output left the divergence bound {limit:g} during {where}")


def _as_trace(spec_or_trace) -> SignalTrace:
    if isinstance(spec_or_trace, SignalTrace):
        return spec_or_trace
    return generate(spec_or_trace)


# --------------------------------------------------------------------------- evaluation


def evaluate(
    weights: WeightSet,
    spec: SignalSpec | SignalTrace,
    coding: str = "rate",
    seed: int = 0,
    params: NetworkParams | None = None,
    warmup: float = 1.0,
    feedback_on: bool | None = None,
    divergence_factor: float = 1e3,
) -> tuple[SignalTrace, float]:
    """Run the trained task network in closed loop and score it against ``f_out``.

    The network starts from a seeded random state and is first driven for
    ``warmup`` seconds by the last part of the target (the signal is treated
    as periodic, as it is during training): a FORCE network gets ``f_out`` in
    place of its own output on the feedback path, a full-FORCE network is
    replaced by the hint-driven target network. It then runs freely over the
    full duration. ``feedback_on`` defaults to ``True`` for FORCE weights and
    ``False`` for full-FORCE weights, whose ``J`` already carries the
    feedback.

    Returns the response trace (``f_out`` replaced by ``Z``; ``meta`` holds
    the MSE and spike count) and the MSE.
    """
    params = params or NetworkParams(n=weights.n)
    if params.n != weights.n:
        params = params.with_(n=weights.n)
    net._check_coding(coding)
    weights.validate()
    trace = _as_trace(spec)
    f_in, f_out, dt = trace.f_in, trace.f_out, trace.dt
    if f_out.shape[1] != weights.d_out or f_in.shape[1] != weights.d_in:
        raise ConfigError("trace channels do not match the weights")
    if feedback_on is None:
        feedback_on = weights.mode == "force"
    limit = divergence_factor * _range_of(f_out)
    n_steps = len(trace)

    state = net.init_state(weights, params, seed)
    m = min(int(round(warmup / dt)), n_steps)
    tail = range(n_steps - m, n_steps)
    j = sparse.csr_matrix(weights.j) if weights.mode == "force" else weights.j
    if weights.mode == "force":
        for k in tail:
            current = net.task_current(state, weights, f_in[k], params, False, j=j)
            current += params.feedback_gain * (weights.u_out @ f_out[k])
            net.advance_task(state, current, dt, params, coding)
    else:
        for k in tail:
            current = net.target_current(state, weights, f_in[k], f_out[k], params)
            net.advance_target(state, current, dt, params, coding)
        state.task = state.target.copy()
        state.y = state.y_d.copy()
    state.spikes[:] = 0

    z_out = np.empty_like(f_out)
    for k in range(n_steps):
        state.z = net.decode(net.readout_drive(state.y, weights), weights, params, coding)
        z_out[k] = state.z
        if not np.all(np.abs(state.z) <= limit):
            _guard(state.z, limit, "evaluation")
        current = net.task_current(state, weights, f_in[k], params, feedback_on, j=j)
        net.advance_task(state, current, dt, params, coding)
    score = mse(z_out, f_out)
    meta = dict(trace.meta, mse=score, spikes=int(state.spikes.sum()), coding=coding)
    return SignalTrace(trace.t, f_in, z_out, meta=meta), score


# --------------------------------------------------------------------------- training


def _train(
    config: TrainConfig,
    trace: SignalTrace | None = None,
    eval_trace: SignalTrace | None = None,
    progress=None,
) -> tuple[WeightSet, TrainReport]:
    t_start = time.perf_counter()
    params = config.network
    mode, coding = config.mode, config.coding
    full = mode == "full_force"
    trace = trace if trace is not None else generate(config.signal)
    eval_trace = eval_trace if eval_trace is not None else trace
    f_in, f_out, dt = trace.f_in, trace.f_out, trace.dt
    n_steps, n = len(trace), params.n
    limit = config.divergence_factor * _range_of(f_out)

    w_seed, s_seed, e_seed = derive_seeds(config.seed)
    z_range = net.output_range(f_out, params.rate_full_scale)
    weights = net.init_weights(
        n, trace.d_in, trace.d_out, params.g, params.sparsity, mode, w_seed, z_range
    )
    state = net.init_state(weights, params, s_seed)
    rls = rls_init(n, config.alpha)
    j_fixed = sparse.csr_matrix(weights.j) if not full else None
    c_target = net.encode_target(f_out, weights, params, coding)
    drive_hint = params.target_drive == "fout"
    in_gain, fb_gain = params.input_gain, params.feedback_gain
    u_in, u_out = weights.u_in, weights.u_out
    has_input = bool(np.any(f_in))
    warm = int(math.ceil(config.warmup_fraction * n_steps))
    ui = config.update_interval
    ttfs = params.ttfs_resolved if coding == "ttfs" else None
    in_window = np.zeros(n, dtype=np.int64)

    report = TrainReport(
        procedure=config.procedure,
        system=trace.meta.get("kind", config.signal.kind.value),
        n=n,
        seed=config.seed,
        ttc_source=config.ttc_source,
        ttc_threshold=config.ttc_threshold,
        duration=n_steps * dt,
        config=config.to_dict(),
    )
    z_rec = np.empty_like(f_out)
    for epoch in range(config.epochs):
        spikes_before = int(state.spikes.sum())
        for k in range(n_steps):
            y = state.y
            c = weights.w.T @ y
            z = net.decode(c, weights, params, coding)
            state.z = z
            z_rec[k] = z
            if not np.all(np.abs(z) <= limit):
                _guard(z, limit, f"training epoch {epoch + 1}")
            if full:
                current = weights.j @ y
                drive = f_out[k] if drive_hint else z
                current_d = weights.j_d @ state.y_d + fb_gain * (u_out @ drive)
                if has_input:
                    inp = in_gain * (u_in @ f_in[k])
                    current += inp
                    current_d += inp
            else:
                current = j_fixed @ y + fb_gain * (u_out @ z)
                if has_input:
                    current += in_gain * (u_in @ f_in[k])

            if k >= warm and (k - warm) % ui == 0:
                gain, ypy = rls.update(y)
                e_pre = c - c_target[k]
                weights.w -= np.outer(gain, e_pre)
                if ypy > 0:
                    e_post = weights.w.T @ y - c_target[k]
                    nz = e_pre != 0
                    if nz.any():
                        ratio = float(np.max(np.abs(e_post[nz]) / np.abs(e_pre[nz])))
                        report.max_contraction_ratio = max(report.max_contraction_ratio, ratio)
                        report.contraction_violations += int(np.sum(np.abs(e_post[nz]) >= np.abs(e_pre[nz])))
                if full:
                    e_d = current - current_d
                    weights.j = blas.dger(-1.0, e_d, gain, a=weights.j, overwrite_a=True)
                    current -= e_d * float(y @ gain)
                else:
                    z_new = net.decode(weights.w.T @ y, weights, params, coding)
                    current += fb_gain * (u_out @ (z_new - z))
                report.rls_updates += 1

            if ttfs is not None and state.task.window_clock[0] >= ttfs.window - 1e-12:
                in_window[:] = 0
            spikes = net.advance_task(state, current, dt, params, coding)
            if ttfs is not None:
                in_window += spikes
                report.ttfs_window_violations += int(np.count_nonzero(in_window == 2))
            if full:
                net.advance_target(state, current_d, dt, params, coding)

        report.train_mse.append(mse(z_rec, f_out))
        report.spike_counts.append(int(state.spikes.sum()) - spikes_before)
        last = epoch == config.epochs - 1
        if config.eval_each_epoch or last:
            response, score = evaluate(
                weights, eval_trace, coding, e_seed, params, config.eval_warmup,
                divergence_factor=config.divergence_factor,
            )
            if config.eval_each_epoch:
                report.eval_mse.append(score)
                report.eval_spike_counts.append(response.meta["spikes"])
            report.final_mse = score
        log.info(
            "%s %s epoch %d/%d train %.4g eval %s",
            config.procedure, report.system, epoch + 1, config.epochs, report.train_mse[-1],
            f"{report.eval_mse[-1]:.4g}" if report.eval_mse else "-",
        )
        if progress is not None:
            progress(epoch, report)

    weights.validate()
    report.wall_time = time.perf_counter() - t_start
    return weights, report


def train_force(config: TrainConfig, trace=None, eval_trace=None, progress=None):
    """FORCE: train the readout of a fixed sparse reservoir with output feedback.

    ``trace`` overrides the trace generated from ``config.signal`` (e.g. a
    noisy copy) and ``eval_trace`` the one used for closed-loop evaluation.
    """
    if config.procedure != "force_rate":
        raise ConfigError(f"train_force needs procedure force_rate, got {config.procedure}")
    return _train(config, trace, eval_trace, progress)


def train_full_force(config: TrainConfig, trace=None, eval_trace=None, progress=None):
    """full-FORCE: train ``W`` and ``J`` against a hint-driven target reservoir."""
    if config.mode != "full_force":
        raise ConfigError(f"train_full_force needs a full-FORCE procedure, got {config.procedure}")
    return _train(config, trace, eval_trace, progress)


def train(config: TrainConfig, trace=None, eval_trace=None, progress=None):
    """Dispatch on ``config.procedure``."""
    fn = train_force if config.mode == "force" else train_full_force
    return fn(config, trace, eval_trace, progress)


def default_neurons(coding: str) -> int:
    return 200 if coding == "ttfs" else 1000


def default_config(
    system: str | SignalKind = "sine",
    procedure: str = "full_force_rate",
    n: int | None = None,
    epochs: int = 50,
    seed: int = 0,
    **network_overrides,
) -> TrainConfig:
    """Config with the documented defaults for ``system`` and ``procedure``."""
    procedure = parse_procedure(procedure)
    coding = PROCEDURES[procedure][1]
    n = n or default_neurons(coding)
    params = NetworkParams(n=n, **network_overrides)
    if coding == "ttfs" and "feedback_gain" not in network_overrides:
        params = params.with_(feedback_gain=TTFS_FEEDBACK_GAIN)
    return TrainConfig(
        procedure=procedure, epochs=epochs, seed=seed, network=params, signal=SignalSpec(kind=system)
    )


TTFS_FEEDBACK_GAIN = 50.0
