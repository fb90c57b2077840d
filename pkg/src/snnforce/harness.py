"""Experiment configs, seeded benchmark suites and result persistence.

Config files are INI with one section per building block::

    [train]       procedure, epochs, update_interval, alpha, seed, ...
    [network]     n, g, sparsity, feedback_gain, input_gain, tau_r, ...
    [neuron]      tau, c, v_th, v_rest, tau_ref, i_bias
    [ttfs]        theta0, tau_th, tau_s, window
    [signal]      kind, duration, dt, omega, amplitude, period, interval, ...
    [experiment]  repeats, noise, out, workers, export_trace, checkpoint

Every key is optional. Unknown sections or keys and unparsable values are
reported with the file name and line number.
"""
from __future__ import annotations

import configparser
import csv
import datetime as _dt
import hashlib
import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import network as net
from .errors import ConfigError, DivergenceError
from .metrics import MetricRecord
from .neuron import NeuronParams, TtfsParams
from .network import NetworkParams
from .signals import BENCHMARK_SYSTEMS, SignalKind, SignalSpec, add_noise, generate, read_melody
from .trainer import (
    PROCEDURES,
    TTFS_FEEDBACK_GAIN,
    TrainConfig,
    default_neurons,
    derive_seeds,
    evaluate,
    parse_procedure,
    train,
)

log = logging.getLogger(__name__)

SUITES = ("table2", "table3", "spikerate", "table4-noise", "interval")
INTERVALS = tuple(round(0.1 + 0.25 * i, 2) for i in range(9))
NOISE_NEURONS = 600
INTERVAL_NEURONS = 600
SPIKERATE_NEURONS = (200, 1000)
DEFAULT_NOISE = 0.1


# --------------------------------------------------------------------------- config files


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none", "default") else float(text)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in re.split(r"[,\s]+", text.strip()) if v)


SCHEMA = {
    "train": {
        "procedure": str, "epochs": int, "update_interval": int, "alpha": float, "seed": int,
        "warmup_fraction": float, "eval_each_epoch": _bool, "eval_warmup": float,
        "ttc_source": str, "ttc_threshold": float, "divergence_factor": float,
    },
    "network": {
        "n": int, "g": float, "sparsity": float, "feedback_gain": float, "input_gain": float,
        "tau_r": float, "rate_full_scale": float, "transfer": str, "target_drive": str,
        "ttfs_activity": str,
    },
    "neuron": {
        "tau": float, "c": float, "r": _opt_float, "v_th": float, "v_rest": float,
        "tau_ref": float, "i_bias": float,
    },
    "ttfs": {"theta0": _opt_float, "tau_th": _opt_float, "tau_s": _opt_float, "window": float},
    "signal": {
        "kind": str, "duration": float, "dt": float, "omega": float, "component_freqs": _floats,
        "amplitude": float, "period": float, "interval": float, "vdp_initial": _floats,
        "vdp_normalize": _bool, "melody_file": str, "input_mode": str,
    },
    "experiment": {
        "repeats": int, "noise": float, "out": str, "workers": int,
        "export_trace": _bool, "checkpoint": _bool,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A training config plus run-level options."""

    train: TrainConfig = field(default_factory=TrainConfig)
    repeats: int = 1
    noise: float = 0.0
    out_dir: str = "results"
    workers: int = 1
    export_trace: bool = True
    checkpoint: bool = True

    def __post_init__(self):
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise ConfigError(f"repeats must be a positive integer, got {self.repeats}")
        if not (np.isfinite(self.noise) and self.noise >= 0):
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers}")

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def _line_of(text: str, section: str, key: str | None = None) -> int:
    """1-based line of ``[section]`` (or of ``key`` inside it); 0 if not found."""
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", line):
            return i
    return 0


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate INI text; errors carry ``source:line``."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}:{_line_of(text, section)}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            line = _line_of(text, section, key)
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}:{line}: unknown key {key!r} in [{section}]")
            try:
                values[section][key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}:{line}: bad value for {key}: {exc}") from exc

    def build(section, fn):
        try:
            return fn(**values.get(section, {}))
        except (ConfigError, TypeError, ValueError) as exc:
            raise ConfigError(f"{source}:{_line_of(text, section)}: [{section}] {exc}") from exc

    neuron = build("neuron", NeuronParams)
    ttfs = build("ttfs", TtfsParams)
    network_kw = dict(values.get("network", {}))
    train_kw = dict(values.get("train", {}))
    procedure = parse_procedure(train_kw.get("procedure", "full_force_rate"))
    if PROCEDURES[procedure][1] == "ttfs":
        network_kw.setdefault("n", default_neurons("ttfs"))
        network_kw.setdefault("feedback_gain", TTFS_FEEDBACK_GAIN)
    values["network"] = network_kw
    network = build("network", lambda **kw: NetworkParams(neuron=neuron, ttfs=ttfs, **kw))

    signal_kw = dict(values.get("signal", {}))
    melody_file = signal_kw.pop("melody_file", None)
    if melody_file is not None:
        path = Path(melody_file)
        if not path.is_absolute() and source != "<config>":
            path = Path(source).parent / path
        signal_kw["melody"] = read_melody(path)
    values["signal"] = signal_kw
    signal = build("signal", SignalSpec)

    values["train"] = train_kw
    train_cfg = build("train", lambda **kw: TrainConfig(network=network, signal=signal, **kw))
    exp = dict(values.get("experiment", {}))
    if "out" in exp:
        exp["out_dir"] = exp.pop("out")
    values["experiment"] = exp
    return build("experiment", lambda **kw: ExperimentConfig(train=train_cfg, **kw))


def load_config(path) -> ExperimentConfig:
    """Read a config file; a missing file raises ``FileNotFoundError``."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_config_text(text, str(path))


def config_to_text(cfg: ExperimentConfig) -> str:
    """Render a config back to INI (round-trips through :func:`parse_config_text`)."""
    t = cfg.train
    p = t.network
    s = t.signal
    sections = {
        "train": {k: getattr(t, k) for k in SCHEMA["train"]},
        "network": {k: getattr(p, k) for k in SCHEMA["network"]},
        "neuron": {k: getattr(p.neuron, k) for k in SCHEMA["neuron"]},
        "ttfs": {k: getattr(p.ttfs, k) for k in SCHEMA["ttfs"]},
        "signal": {k: getattr(s, k) for k in SCHEMA["signal"] if k != "melody_file"},
        "experiment": {
            "repeats": cfg.repeats, "noise": cfg.noise, "out": cfg.out_dir, "workers": cfg.workers,
            "export_trace": cfg.export_trace, "checkpoint": cfg.checkpoint,
        },
    }
    sections["signal"]["kind"] = s.kind.value
    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        for key, val in body.items():
            if isinstance(val, tuple):
                val = ", ".join(repr(float(v)) for v in val)
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} = {'none' if val is None else val}")
        lines.append("")
    return "\n".join(lines)


def fingerprint(train_cfg: TrainConfig, noise: float = 0.0) -> str:
    """Short hash of everything that determines a run except the seed."""
    d = train_cfg.to_dict()
    d.pop("seed")
    d["noise"] = noise
    blob = json.dumps(d, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def run_seed(master: int, repeat: int) -> int:
    """Counter-based child seed: independent of execution order."""
    return int(np.random.SeedSequence(int(master), spawn_key=(int(repeat),)).generate_state(1)[0])


# --------------------------------------------------------------------------- records


@dataclass
class ResultRecord:
    metric: MetricRecord
    procedure: str
    system: str
    n: int
    coding: str
    noise: float
    epochs: int
    timestamp: str
    status: str = "ok"
    error: str = ""
    label: dict = field(default_factory=dict)

    def row(self) -> dict:
        m = self.metric
        out = {
            "procedure": self.procedure, "system": self.system, "n": self.n, "coding": self.coding,
            "noise": self.noise, "epochs": self.epochs, **self.label,
            "mse": m.mse, "ttc_epochs": "" if m.ttc_epochs is None else m.ttc_epochs,
            "avg_spike_rate": m.avg_spike_rate, "seed": m.seed, "fingerprint": m.fingerprint,
            "status": self.status, "error": self.error, "timestamp": self.timestamp,
        }
        for key, val in m.extra.items():
            if not isinstance(val, (list, dict)):
                out[key] = val
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["metric"] = self.metric.to_dict()
        return d


@dataclass(frozen=True)
class Cell:
    """One run of a suite."""

    config: TrainConfig
    noise: float = 0.0
    repeat: int = 0
    label: tuple = ()


def _now() -> str:
    return _dt.datetime.now().isoformat(timespec="microseconds")


def noisy_trace(trace, level: float, seed: int):
    """Input noise scaled by the input range, or by the target range when the input is silent."""
    span_in = float(np.ptp(trace.f_in))
    ref = span_in if span_in > 0 else float(np.ptp(trace.f_out)) or 1.0
    return add_noise(trace, level, seed, reference_range=ref)


def run_cell(cell: Cell) -> ResultRecord:
    """Train and score one cell; failures become records with a status, never exceptions."""
    cfg = cell.config
    fp = fingerprint(cfg, cell.noise)
    base = dict(
        procedure=cfg.procedure, system=cfg.signal.kind.value, n=cfg.network.n, coding=cfg.coding,
        noise=cell.noise, epochs=cfg.epochs, label=dict(cell.label),
    )
    try:
        clean = generate(cfg.signal)
        extra = {}
        if cell.noise > 0:
            train_trace = noisy_trace(clean, cell.noise, run_seed(cfg.seed, 1))
            eval_trace = noisy_trace(clean, cell.noise, run_seed(cfg.seed, 2))
            weights, report = train(cfg, train_trace, eval_trace)
            _, clean_mse = evaluate(
                weights, clean, cfg.coding, _eval_seed(cfg), cfg.network,
                cfg.eval_warmup, divergence_factor=cfg.divergence_factor,
            )
            extra["mse_clean_eval"] = clean_mse
        else:
            weights, report = train(cfg)
        extra.update(
            train_mse_final=report.train_mse[-1],
            spikes_per_epoch=float(np.mean(report.spike_counts)),
            wall_time=report.wall_time,
            contraction_violations=report.contraction_violations,
            ttfs_window_violations=report.ttfs_window_violations,
            eval_mse_history=list(report.eval_mse),
            train_mse_history=list(report.train_mse),
        )
        metric = MetricRecord(
            mse=report.final_mse, ttc_epochs=report.ttc, avg_spike_rate=report.avg_spike_rate,
            fingerprint=fp, seed=cfg.seed, extra=extra,
        )
        return ResultRecord(metric=metric, timestamp=_now(), **base)
    except (DivergenceError, ConfigError, FloatingPointError, np.linalg.LinAlgError) as exc:
        status = "diverged" if isinstance(exc, DivergenceError) else "error"
        metric = MetricRecord(mse=float("inf"), ttc_epochs=None, avg_spike_rate=0.0, fingerprint=fp, seed=cfg.seed)
        return ResultRecord(metric=metric, timestamp=_now(), status=status, error=str(exc), **base)


def _eval_seed(cfg: TrainConfig) -> int:
    return derive_seeds(cfg.seed)[2]


# --------------------------------------------------------------------------- suites


def _procedures(procedures) -> list[str]:
    if not procedures:
        return list(PROCEDURES)
    return [parse_procedure(p) for p in procedures]


def _systems(systems) -> list[SignalKind]:
    if not systems:
        return list(BENCHMARK_SYSTEMS)
    return [SignalKind.parse(s) for s in systems]


def _cell_config(base: TrainConfig, procedure: str, kind, n: int, epochs: int, seed: int, **signal_kw) -> TrainConfig:
    coding = PROCEDURES[procedure][1]
    params = base.network.with_(n=n)
    if coding == "ttfs" and base.network.feedback_gain == NetworkParams().feedback_gain:
        params = params.with_(feedback_gain=TTFS_FEEDBACK_GAIN)
    signal = base.signal.with_(kind=SignalKind.parse(kind), **signal_kw)
    return base.with_(procedure=procedure, network=params, signal=signal, epochs=epochs, seed=seed)


def suite_cells(
    suite: str,
    base: TrainConfig | None = None,
    master_seed: int = 0,
    repeats: int = 1,
    epochs: int | None = None,
    neurons: int | None = None,
    procedures=None,
    systems=None,
    noise: float | None = None,
) -> list[Cell]:
    """The grid of runs behind ``suite``; all cells of one repeat share a seed."""
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {SUITES}")
    base = base or TrainConfig()
    epochs = epochs or 50
    cells = []
    for r in range(repeats):
        seed = run_seed(master_seed, r)
        if suite in ("table2", "table3", "table4-noise"):
            level = 0.0
            if suite == "table4-noise":
                level = DEFAULT_NOISE if noise is None else noise
            for kind in _systems(systems):
                for proc in _procedures(procedures):
                    coding = PROCEDURES[proc][1]
                    if suite == "table2":
                        n = neurons or default_neurons(coding)
                    elif suite == "table3":
                        n = neurons or 200
                    else:
                        n = neurons or NOISE_NEURONS
                    cfg = _cell_config(base, proc, kind, n, epochs, seed)
                    cells.append(Cell(cfg, level, r))
        elif suite == "spikerate":
            sizes = (neurons,) if neurons else SPIKERATE_NEURONS
            procs = [p for p in _procedures(procedures) if PROCEDURES[p][0] == "full_force"]
            for n in sizes:
                for kind in _systems(systems):
                    for proc in procs:
                        cells.append(Cell(_cell_config(base, proc, kind, n, epochs, seed), 0.0, r))
        else:  # interval
            for interval in INTERVALS:
                for proc in _procedures(procedures):
                    coding = PROCEDURES[proc][1]
                    n = neurons or (200 if coding == "ttfs" else INTERVAL_NEURONS)
                    cfg = _cell_config(base, proc, SignalKind.INTERVAL, n, epochs, seed, interval=interval)
                    cells.append(Cell(cfg, 0.0, r, (("interval", interval),)))
    return cells


def run_cells(cells: list[Cell], workers: int = 1) -> list[ResultRecord]:
    """Run cells in order (``workers == 1``) or on a process pool; output order is cell order."""
    if workers <= 1 or len(cells) <= 1:
        out = []
        for i, cell in enumerate(cells, 1):
            log.info("cell %d/%d %s %s n=%d", i, len(cells), cell.config.procedure,
                     cell.config.signal.kind.value, cell.config.network.n)
            out.append(run_cell(cell))
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, cells))


def _mean(values) -> float:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else float("nan")


def summarize(suite: str, records: list[ResultRecord]) -> tuple[list[str], list[list]]:
    """Table mirroring the paper's layout: rows are systems (or intervals), means over repeats."""
    ok = [r for r in records if r.status == "ok"]
    procs = list(dict.fromkeys(r.procedure for r in records))

    def pick(**match):
        return [r for r in ok if all(getattr(r, k, r.label.get(k)) == v for k, v in match.items())]

    if suite == "spikerate":
        sizes = sorted({r.n for r in records})
        header = ["system"]
        for n in sizes:
            header += [f"rate_hz_n{n}", f"ttfs_hz_n{n}", f"ttfs_over_rate_n{n}"]
        rows = []
        for system in dict.fromkeys(r.system for r in records):
            row = [system]
            for n in sizes:
                rate = _mean(r.metric.avg_spike_rate for r in pick(system=system, n=n, coding="rate"))
                ttfs = _mean(r.metric.avg_spike_rate for r in pick(system=system, n=n, coding="ttfs"))
                row += [rate, ttfs, ttfs / rate if rate > 0 else float("nan")]
            rows.append(row)
        return header, rows

    key = "interval" if suite == "interval" else "system"
    keys = list(dict.fromkeys(r.label.get("interval") if key == "interval" else r.system for r in records))
    header = [key]
    if suite == "table3":
        header += [f"{p}_ttc" for p in procs]
    else:
        header += [f"{p}_mse" for p in procs]
    if suite == "table4-noise":
        header += [f"{p}_mse_clean_eval" for p in procs]
    header += [f"{p}_failed" for p in procs]
    rows = []
    for k in keys:
        row = [k]
        for p in procs:
            cell = pick(procedure=p, **{key: k})
            if suite == "table3":
                ttcs = [r.metric.ttc_epochs for r in cell]
                row.append(_mean(ttcs) if ttcs and all(t is not None for t in ttcs) else "not-reached")
            else:
                row.append(_mean(r.metric.mse for r in cell))
        if suite == "table4-noise":
            for p in procs:
                row.append(_mean(r.metric.extra.get("mse_clean_eval") for r in pick(procedure=p, **{key: k})))
        for p in procs:
            failed = [r for r in records if r.procedure == p and r.status != "ok"
                      and (r.label.get("interval") if key == "interval" else r.system) == k]
            row.append(len(failed))
        rows.append(row)
    return header, rows


# --------------------------------------------------------------------------- output files


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def unique_path(out_dir, stem: str, suffix: str) -> Path:
    """A fresh timestamped path; never returns an existing file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S%f")
    path = out_dir / f"{stem}-{stamp}{suffix}"
    i = 1
    while path.exists():
        path = out_dir / f"{stem}-{stamp}-{i}{suffix}"
        i += 1
    return path


def run_suite(
    suite: str,
    out_dir="results",
    base: TrainConfig | None = None,
    master_seed: int = 0,
    repeats: int = 1,
    workers: int = 1,
    **grid,
) -> dict:
    """Run a suite and write ``<suite>-<stamp>.csv`` (table), ``-runs.csv`` and ``.json``."""
    cells = suite_cells(suite, base, master_seed, repeats, **grid)
    records = run_cells(cells, workers)
    header, rows = summarize(suite, records)
    table = unique_path(out_dir, suite, ".csv")
    write_csv(table, header, rows)
    run_rows = [r.row() for r in records]
    run_header = list(dict.fromkeys(k for row in run_rows for k in row))
    runs = table.with_name(table.stem + "-runs.csv")
    write_csv(runs, run_header, [[row.get(k, "") for k in run_header] for row in run_rows])
    detail = table.with_suffix(".json")
    detail.write_text(
        json.dumps(
            {"suite": suite, "master_seed": master_seed, "repeats": repeats,
             "records": [r.to_dict() for r in records]},
            indent=2, default=str,
        ),
        encoding="utf-8",
    )
    return {"table": table, "runs": runs, "json": detail, "records": records, "header": header, "rows": rows}


def write_response_csv(path, response, target) -> Path:
    """Columns ``t,f_out_0..,z_0..`` for plotting a response against its target."""
    header = ["t"] + [f"f_out_{i}" for i in range(target.d_out)] + [f"z_{i}" for i in range(response.d_out)]
    data = np.column_stack([target.t, target.f_out, response.f_out])
    return write_csv(path, header, data.tolist())


def read_response_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_response_csv`: ``(t, f_out, z)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    f_cols = [i for i, h in enumerate(header) if h.startswith("f_out_")]
    z_cols = [i for i, h in enumerate(header) if h.startswith("z_")]
    return body[:, 0], body[:, f_cols], body[:, z_cols]


def checkpoint_meta(cfg: TrainConfig, final_mse: float) -> dict:
    """What :func:`evaluate_checkpoint` needs to reproduce a stored score."""
    return {
        "coding": cfg.coding,
        "procedure": cfg.procedure,
        "signal": {k: v for k, v in asdict(cfg.signal).items()} | {"kind": cfg.signal.kind.value},
        "eval_seed": _eval_seed(cfg),
        "eval_warmup": cfg.eval_warmup,
        "divergence_factor": cfg.divergence_factor,
        "final_mse": final_mse,
        "seed": cfg.seed,
    }


def signal_from_meta(meta: dict) -> SignalSpec:
    s = dict(meta["signal"])
    for key in ("component_freqs", "vdp_initial"):
        if key in s:
            s[key] = tuple(s[key])
    if "melody" in s:
        s["melody"] = tuple(tuple(x) for x in s["melody"])
    return SignalSpec(**s)


def evaluate_checkpoint(path, spec: SignalSpec | None = None, seed: int | None = None):
    """Load a checkpoint and run :func:`evaluate` with its stored settings.

    Returns ``(response, target_trace, mse, meta)``.
    """
    weights, params, meta = net.load_checkpoint(path)
    spec = spec or signal_from_meta(meta)
    target = generate(spec)
    response, score = evaluate(
        weights, target, meta.get("coding", "rate"),
        meta.get("eval_seed", 0) if seed is None else seed, params,
        meta.get("eval_warmup", 1.0), divergence_factor=meta.get("divergence_factor", 1e3),
    )
    return response, target, score, meta
