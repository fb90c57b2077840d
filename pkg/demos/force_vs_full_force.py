"""FORCE against full-FORCE on a handful of the benchmark systems.

FORCE trains only the readout of a fixed sparse reservoir with output
feedback; full-FORCE also trains the recurrent weights against a second,
hint-driven reservoir. Both start from the same seed.

    python demos/force_vs_full_force.py --systems sine,triangle,vdp_relaxed
"""
import argparse

from snnforce.trainer import default_config, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--systems", default="sine,triangle,ode_to_joy")
    ap.add_argument("--neurons", type=int, default=300)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'system':18s} {'FORCE':>10s} {'full-FORCE':>11s}")
    for system in args.systems.split(","):
        scores = []
        for proc in ("force_rate", "full_force_rate"):
            cfg = default_config(system, proc, n=args.neurons, epochs=args.epochs, seed=args.seed)
            _, report = train(cfg)
            scores.append(report.final_mse)
        print(f"{system:18s} {scores[0]:10.4f} {scores[1]:11.4f}")


if __name__ == "__main__":
    main()
