"""Cumulative message size per round for each topology, from a short real run.

Bytes follow 2 * H * P * 4 per round (float32 parameters, down + up).
"""
import argparse
import csv
from pathlib import Path

from fedqtn.config import ExperimentConfig
from fedqtn.experiment import build_experiment, fed_config
from fedqtn.fed import run_federation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=10)
    ap.add_argument("--head", choices=["gap", "dense"], default="dense")
    ap.add_argument("--out", type=Path, default=Path("runs/comms.csv"))
    args = ap.parse_args()

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["topology", "block", "n_params", "round", "bytes_total", "megabytes"])
        for topo in ("mps", "ttn", "mera"):
            for block, layers in (("simple", 1), ("strong", 2)):
                cfg = ExperimentConfig.from_dict({"topology": topo, "block": block, "layers": layers,
                                                  "head": args.head, "rounds": args.rounds,
                                                  "dataset": {"source": "synth", "n": 200}})
                exp = build_experiment(cfg)
                res = run_federation(exp.server, exp.clients, exp.test, fed_config(cfg))
                p = exp.server.global_params.vector().size
                for rep in res.history:
                    w.writerow([topo, block, p, rep.round, rep.bytes_exchanged, rep.bytes_exchanged / 2**20])
                print(f"{topo:4s} {block:6s} P={p:3d}: {res.server.bytes_exchanged} bytes after {args.rounds} rounds")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
