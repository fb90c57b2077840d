"""FORCE and full-FORCE training of recurrent LIF spiking networks.

Modules
-------
signals   benchmark waveforms, interval task, Poisson encoding, input noise
neuron    LIF dynamics, rate transfer function, time-to-first-spike coding
rls       recursive least squares on a shared inverse-correlation matrix
network   reservoirs, readout and checkpoints
trainer   FORCE / full-FORCE training loops and closed-loop evaluation
metrics   MSE, time to converge, average spike rate
harness   configs, benchmark suites, result files (CLI in ``snnforce.cli``)
"""
from .errors import ConfigError, DimensionError, DivergenceError, IntegrityError, NumericInputError
from .metrics import MetricRecord, avg_spike_rate, mse, time_to_converge
from .network import NetworkParams, NetworkState, WeightSet, init_weights
from .neuron import NeuronParams, NeuronState, TtfsParams
from .rls import RlsState, rls_init, rls_step
from .signals import SignalKind, SignalSpec, SignalTrace, generate
from .trainer import TrainConfig, TrainReport, evaluate, train, train_force, train_full_force

__version__ = "0.1.0"
