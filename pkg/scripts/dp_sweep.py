"""Final test accuracy/AUC versus DP noise multiplier, averaged over seeds; writes a CSV."""
import argparse
import csv
from pathlib import Path

import numpy as np

from fedqtn.config import ExperimentConfig
from fedqtn.experiment import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.0, 0.2, 0.4, 0.6, 0.8])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--head", choices=["gap", "dense"], default="gap")
    ap.add_argument("--clip", type=float, default=1.0)
    ap.add_argument("--rounds", type=int, default=30)
    ap.add_argument("--out", type=Path, default=Path("runs/dp_sweep.csv"))
    args = ap.parse_args()

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["epsilon", "seed", "accuracy", "auc"])
        for eps in args.epsilons:
            accs = []
            for seed in args.seeds:
                cfg = ExperimentConfig.from_dict({
                    "seed": seed, "head": args.head, "rounds": args.rounds,
                    "dp": {"enabled": True, "clip": args.clip, "epsilon": eps},
                })
                _, result = run_experiment(cfg)
                m = result.history[-1].global_metrics
                accs.append(m.accuracy)
                w.writerow([eps, seed, repr(m.accuracy), repr(m.auc)])
            print(f"eps {eps:.2f}: mean acc {np.mean(accs):.4f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
