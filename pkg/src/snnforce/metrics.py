"""Evaluation metrics: mean squared error, time to converge, average spike rate."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError


@dataclass
class MetricRecord:
    mse: float
    ttc_epochs: float | None
    avg_spike_rate: float
    fingerprint: str = ""
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.mse >= 0:
            raise ConfigError(f"mse must be >= 0, got {self.mse}")
        if not self.avg_spike_rate >= 0:
            raise ConfigError(f"spike rate must be >= 0, got {self.avg_spike_rate}")

    def to_dict(self) -> dict:
        return asdict(self)


def mse(z, f) -> float:
    """Mean squared difference; multi-channel traces average over all entries."""
    z = np.asarray(z, dtype=float)
    f = np.asarray(f, dtype=float)
    if z.shape != f.shape:
        raise DimensionError(f"response {z.shape} and target {f.shape} differ")
    if z.size == 0:
        raise DimensionError("empty trace")
    d = z - f
    return float(np.mean(d * d))


def time_to_converge(per_epoch_mse, threshold: float = 0.25, interpolate: bool = True):
    """Epochs (1-based) until the MSE first reaches ``threshold``; ``None`` if never.

    With ``interpolate`` the crossing is placed linearly between the last
    epoch above the threshold and the first at or below it; reaching it in
    the first epoch counts as 1.
    """
    m = [float(v) for v in per_epoch_mse]
    if not m:
        raise ConfigError("empty MSE history")
    if not threshold > 0:
        raise ConfigError("threshold must be positive")
    for k, value in enumerate(m, start=1):
        if value <= threshold:
            if k == 1 or not interpolate:
                return float(k)
            prev = m[k - 2]
            return (k - 1) + (prev - threshold) / (prev - value)
    return None


def avg_spike_rate(spike_counts, n_neurons: int, duration: float) -> float:
    """Spikes per neuron per second."""
    if not duration > 0:
        raise ConfigError("duration must be positive")
    if n_neurons < 1:
        raise ConfigError("need at least one neuron")
    return float(np.sum(spike_counts)) / (n_neurons * duration)
