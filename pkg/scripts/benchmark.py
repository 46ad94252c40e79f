"""Synthetic end-to-end benchmark over several seeds.

    python scripts/benchmark.py --seeds 0 1 2 3 4 --head gap
    python scripts/benchmark.py --head dense --out runs/bench_dense.json
"""
import argparse
import json
import time
from pathlib import Path

import numpy as np

from fedqtn.config import ExperimentConfig
from fedqtn.experiment import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--head", choices=["gap", "dense"], default="gap")
    ap.add_argument("--topology", choices=["mps", "ttn", "mera"], default="ttn")
    ap.add_argument("--rounds", type=int, default=30)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        cfg = ExperimentConfig.from_dict({"seed": seed, "head": args.head, "topology": args.topology,
                                          "rounds": args.rounds})
        t0 = time.time()
        _, result = run_experiment(cfg)
        m = result.history[-1].global_metrics
        rows.append({"seed": seed, "accuracy": m.accuracy, "auc": m.auc, "seconds": time.time() - t0})
        print(f"seed {seed}: acc {m.accuracy:.4f}  auc {m.auc:.4f}  ({rows[-1]['seconds']:.1f}s)")

    acc = np.array([r["accuracy"] for r in rows])
    hits = sum(r["accuracy"] >= 0.95 and r["auc"] >= 0.98 for r in rows)
    print(f"mean acc {acc.mean():.4f} +- {acc.std():.4f}; {hits}/{len(rows)} seeds reach acc>=0.95 and auc>=0.98")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps({"args": {k: str(v) for k, v in vars(args).items()}, "runs": rows}, indent=2))


if __name__ == "__main__":
    main()
