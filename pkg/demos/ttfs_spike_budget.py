"""How many spikes time-to-first-spike coding saves over rate coding.

Each TTFS neuron fires at most once per window, so its rate is capped at
1/window; the information sits in the latency of that spike. Same reservoir
size, same task, same seed for both codings.

    python demos/ttfs_spike_budget.py --system vdp_harmonic --epochs 5
"""
import argparse

from snnforce.trainer import default_config, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--system", default="sine")
    ap.add_argument("--neurons", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spikes = {}
    for proc in ("full_force_rate", "full_force_ttfs"):
        cfg = default_config(args.system, proc, n=args.neurons, epochs=args.epochs, seed=args.seed)
        _, report = train(cfg)
        spikes[proc] = sum(report.spike_counts)
        print(f"{proc:16s} MSE {report.final_mse:.4f}  spikes {spikes[proc]:9d}  "
              f"({report.avg_spike_rate:.1f} Hz per neuron)")
    ratio = spikes["full_force_ttfs"] / spikes["full_force_rate"]
    print(f"TTFS emits {ratio:.2f}x the spikes of rate coding")


if __name__ == "__main__":
    main()
