"""Command-line front end.

Verbs::

    snnforce train  [--config FILE] [overrides]     train, write checkpoint + report + trace
    snnforce eval   CHECKPOINT [--system S] [--seed N]
    snnforce bench  SUITE [--repeats N] [overrides]  table2 | table3 | spikerate | table4-noise | interval
    snnforce export-trace CHECKPOINT [--system S] [--out DIR]

Exit codes: 0 success, 1 configuration error, 2 divergence, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, DivergenceError, IntegrityError
from .metrics import mse
from .network import save_checkpoint
from .signals import SignalKind, SignalSpec
from .trainer import PROCEDURES, TTFS_FEEDBACK_GAIN, default_neurons, parse_procedure, train

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("snnforce")


def _add_common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", help="INI experiment config")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--procedure", help="force_rate | full_force_rate | full_force_ttfs")
    p.add_argument("--system", help="signal kind, e.g. sine, sum_of_sines, vdp_relaxed")
    p.add_argument("--neurons", type=int, help="reservoir size N")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--coding", choices=("rate", "ttfs"), help="spike coding (selects the full-FORCE variant)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snnforce", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train one network")
    _add_common(p)
    p.add_argument("--noise", type=float, help="Gaussian input noise level (fraction of range)")

    p = sub.add_parser("eval", help="closed-loop evaluation of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--system")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("suite", choices=harness.SUITES)
    _add_common(p)
    p.add_argument("--repeats", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--systems", help="comma-separated subset of systems")
    p.add_argument("--procedures", help="comma-separated subset of procedures")

    p = sub.add_parser("export-trace", help="write t, f_out, Z columns of a checkpoint's response")
    p.add_argument("checkpoint")
    p.add_argument("--system")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    return parser


def _resolve_procedure(procedure: str | None, coding: str | None, current: str) -> str:
    proc = parse_procedure(procedure) if procedure else current
    if coding == "ttfs":
        proc = "full_force_ttfs"
    elif coding == "rate" and PROCEDURES[proc][1] == "ttfs":
        proc = "full_force_rate"
    return proc


def _experiment(args) -> harness.ExperimentConfig:
    exp = harness.load_config(args.config) if getattr(args, "config", None) else harness.ExperimentConfig()
    cfg = exp.train
    proc = _resolve_procedure(args.procedure, args.coding, cfg.procedure)
    network = cfg.network
    if PROCEDURES[proc][1] == "ttfs" and PROCEDURES[cfg.procedure][1] != "ttfs":
        network = network.with_(n=default_neurons("ttfs"), feedback_gain=TTFS_FEEDBACK_GAIN)
    if args.neurons:
        network = network.with_(n=args.neurons)
    changes = dict(procedure=proc, network=network)
    if args.system:
        changes["signal"] = cfg.signal.with_(kind=SignalKind.parse(args.system))
    if args.epochs:
        changes["epochs"] = args.epochs
    if args.seed is not None:
        changes["seed"] = args.seed
    exp_changes = {"train": cfg.with_(**changes)}
    if args.out:
        exp_changes["out_dir"] = args.out
    if getattr(args, "noise", None) is not None:
        exp_changes["noise"] = args.noise
    if getattr(args, "repeats", None):
        exp_changes["repeats"] = args.repeats
    if getattr(args, "workers", None):
        exp_changes["workers"] = args.workers
    return exp.with_(**exp_changes)


def cmd_train(args) -> int:
    exp = _experiment(args)
    cfg = exp.train
    out = Path(exp.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .signals import generate

    clean = generate(cfg.signal)
    if exp.noise > 0:
        trace = harness.noisy_trace(clean, exp.noise, harness.run_seed(cfg.seed, 1))
        weights, report = train(cfg, trace)
    else:
        weights, report = train(cfg)
    stem = f"{cfg.procedure}-{cfg.signal.kind.value}"
    ckpt = harness.unique_path(out, stem, ".npz")
    save_checkpoint(ckpt, weights, cfg.network, harness.checkpoint_meta(cfg, report.final_mse))
    report.checkpoint = str(ckpt)
    report_path = ckpt.with_suffix(".json")
    report.to_json(report_path)
    response, target, score, _ = harness.evaluate_checkpoint(ckpt)
    trace_path = ckpt.with_name(ckpt.stem + "-trace.csv")
    harness.write_response_csv(trace_path, response, target)
    print(f"final closed-loop MSE {report.final_mse:.6g}  TTC {report.ttc}  "
          f"spike rate {report.avg_spike_rate:.2f} Hz")
    print(f"checkpoint {ckpt}\nreport     {report_path}\ntrace      {trace_path}")
    return EXIT_OK


def _spec_override(system):
    return SignalSpec(kind=SignalKind.parse(system)) if system else None


def cmd_eval(args) -> int:
    response, target, score, meta = harness.evaluate_checkpoint(
        args.checkpoint, _spec_override(args.system), args.seed
    )
    result = {"checkpoint": args.checkpoint, "mse": score, "stored_mse": meta.get("final_mse"),
              "spikes": response.meta["spikes"]}
    text = json.dumps(result, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        harness.unique_path(out, "eval", ".json").write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_export_trace(args) -> int:
    response, target, score, _ = harness.evaluate_checkpoint(
        args.checkpoint, _spec_override(args.system), args.seed
    )
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    out.mkdir(parents=True, exist_ok=True)
    path = harness.unique_path(out, Path(args.checkpoint).stem + "-export", ".csv")
    harness.write_response_csv(path, response, target)
    _, f, z = harness.read_response_csv(path)
    print(f"{path}  rows {len(f)}  mse {mse(z, f):.6g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    exp = _experiment(args)
    cfg = exp.train
    procedures = args.procedures.split(",") if args.procedures else None
    if args.procedure or args.coding:
        procedures = [cfg.procedure]
    systems = args.systems.split(",") if args.systems else ([args.system] if args.system else None)
    result = harness.run_suite(
        args.suite,
        out_dir=exp.out_dir,
        base=cfg,
        master_seed=cfg.seed,
        repeats=exp.repeats,
        workers=exp.workers,
        epochs=args.epochs,
        neurons=args.neurons,
        procedures=procedures,
        systems=systems,
        noise=args.noise,
    )
    header, rows = result["header"], result["rows"]
    widths = [max(len(str(h)), 12) for h in header]
    print("  ".join(str(h).ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join((f"{v:.4g}" if isinstance(v, float) else str(v)).ljust(w) for v, w in zip(row, widths)))
    print(f"table {result['table']}\nruns  {result['runs']}\njson  {result['json']}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "bench": cmd_bench, "export-trace": cmd_export_trace}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_IO
    except IntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
