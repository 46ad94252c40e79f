"""Command-line entry point: ``fedqtn {train,eval,partition,synth}``.

Exit codes: 0 success, 2 invalid input (config schema, shapes, oversubscribed
partitions), 3 numeric failure during training. Flags given on the command
line override the corresponding config-file values.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .data import PartitionSpec, load_csv, partition, save_csv, synth_blobs
from .errors import CapacityError, ContractError, DomainError, FormatError, ParseError
from .experiment import run_experiment, write_outputs
from .model import load_checkpoint
from .train import evaluate

log = logging.getLogger("fedqtn")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
_INPUT_ERRORS = (ConfigError, ContractError, CapacityError, DomainError, FormatError, ParseError,
                 FileNotFoundError)


def _fail(code, msg):
    print(f"error: {msg}", file=sys.stderr)
    return code


def cmd_train(config_path, seed=None, out=None, rounds=None) -> int:
    try:
        raw = json.loads(Path(config_path).read_text())
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "expected an object")
        for key, val in (("seed", seed), ("output_dir", out), ("rounds", rounds)):
            if val is not None:
                raw[key] = val
        cfg = ExperimentConfig.from_dict(raw)
    except json.JSONDecodeError as e:
        return _fail(EXIT_INPUT, f"config is not valid JSON: {e}")
    except _INPUT_ERRORS as e:
        return _fail(EXIT_INPUT, f"config {e}")

    try:
        exp, result = run_experiment(cfg)
    except _INPUT_ERRORS as e:
        return _fail(EXIT_INPUT, str(e))
    summary = write_outputs(exp, result, cfg.output_dir)
    if result.error is not None:
        return _fail(EXIT_NUMERIC, f"numeric failure in round {result.error['round']}: {result.error['message']}")
    m = summary["test_metrics"]
    print(f"{summary['rounds_completed']} rounds, test accuracy {m['accuracy']:.4f}, "
          f"auc {m['auc'] if m['auc'] is None else round(m['auc'], 4)}, "
          f"{summary['bytes_total']} bytes exchanged -> {cfg.output_dir}")
    return EXIT_OK


def cmd_eval(model_path, data_path, threshold=0.5) -> int:
    try:
        params = load_checkpoint(model_path)
        data = load_csv(data_path)
        if len(data) == 0:
            raise ContractError("dataset is empty")
        rep = evaluate(params, data, threshold)
    except (json.JSONDecodeError, *_INPUT_ERRORS) as e:
        return _fail(EXIT_INPUT, str(e))
    print(json.dumps(rep.to_dict(with_roc=True), indent=2))
    return EXIT_OK


def _partition_spec(obj) -> PartitionSpec:
    if not isinstance(obj, dict):
        raise ContractError("partition spec must be a JSON object")
    unknown = set(obj) - {"fractions", "counts", "stratified", "seed", "clients"}
    if unknown:
        raise ContractError(f"unknown partition spec fields {sorted(unknown)}")
    return PartitionSpec(
        counts=obj.get("counts"),
        fractions=obj.get("fractions"),
        stratified=bool(obj.get("stratified", True)),
        seed=int(obj.get("seed", 0)),
        clients=obj.get("clients"),
    )


def cmd_partition(data_path, spec_path, out_dir) -> int:
    try:
        data = load_csv(data_path)
        spec = _partition_spec(json.loads(Path(spec_path).read_text()))
        shards = partition(data, spec)
    except (json.JSONDecodeError, *_INPUT_ERRORS) as e:
        return _fail(EXIT_INPUT, str(e))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"source": str(data_path), "total": len(data), "clients": []}
    for shard in shards:
        fname = f"{shard.name}.csv"
        save_csv(shard, out / fname)
        n0, n1 = shard.label_counts()
        manifest["clients"].append({"id": shard.name, "file": fname, "n_label0": n0, "n_label1": n1, "n": n0 + n1})
    (out / "partition_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return EXIT_OK


def cmd_synth(n, h, w, noise, seed, out) -> int:
    try:
        d = synth_blobs(n, h, w, noise, seed)
    except _INPUT_ERRORS as e:
        return _fail(EXIT_INPUT, str(e))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_csv(d, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fedqtn", description="Federated quantum tensor-network classifiers.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log every round")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run a federation from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", help="output directory (overrides output_dir)")
    t.add_argument("--rounds", type=int)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a CSV dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("partition", help="split a CSV dataset into per-client CSVs")
    p.add_argument("--data", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)

    s = sub.add_parser("synth", help="write a synthetic band dataset as CSV")
    s.add_argument("--n", type=int, default=800)
    s.add_argument("--h", type=int, default=8)
    s.add_argument("--w", type=int, default=8)
    s.add_argument("--noise", type=float, default=0.15)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "train":
        return cmd_train(args.config, args.seed, args.out, args.rounds)
    if args.command == "eval":
        return cmd_eval(args.model, args.data, args.threshold)
    if args.command == "partition":
        return cmd_partition(args.data, args.spec, args.out)
    return cmd_synth(args.n, args.h, args.w, args.noise, args.seed, args.out)


if __name__ == "__main__":
    sys.exit(main())
