"""Wire a config into datasets, clients and a federation run, and write its artefacts."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig
from .data import (Dataset, PartitionSpec, downscale_dataset, load_csv, load_pgm_dir, partition,
                   synth_blobs, train_val_test_split)
from .errors import ContractError
from .fed import ClientState, FedConfig, FederationResult, ServerState, derive_seed, run_federation
from .metrics import write_roc_csv
from .model import ModelParams, init_params, save_checkpoint
from .qtn import build_template
from .train import AdamState, DPConfig, evaluate

log = logging.getLogger(__name__)

HISTORY_HEADER = ["round", "client", "loss", "test_acc", "test_auc", "bytes_total"]


@dataclass
class Experiment:
    config: ExperimentConfig
    train: Dataset
    val: Dataset
    test: Dataset
    clients: list[ClientState]
    server: ServerState


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    ds = cfg.dataset
    if ds.source == "synth":
        seed = ds.seed if ds.seed is not None else derive_seed(cfg.seed, "data")
        d = synth_blobs(ds.n, ds.h, ds.w, ds.noise_sd, seed)
    elif ds.source == "csv":
        d = load_csv(ds.path)
    else:
        d = load_pgm_dir(ds.path, ds.labels)
    if cfg.downscale is not None:
        d = downscale_dataset(d, *cfg.downscale)
    return d


def build_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None) -> Experiment:
    d = load_dataset(cfg) if dataset is None else dataset
    if len(d) == 0:
        raise ContractError("dataset is empty")
    h, w = d.shape
    side = cfg.patch_side
    if h % side or w % side:
        raise ContractError(f"{h}x{w} images cannot be cut into {side}x{side} patches")
    train, val, test = train_val_test_split(d, cfg.split, seed=derive_seed(cfg.seed, "split"))

    p = cfg.partition
    spec = PartitionSpec(
        counts=tuple(map(tuple, p.counts)) if p.counts is not None else None,
        fractions=tuple(p.fractions) if p.fractions is not None else None,
        stratified=p.stratified,
        seed=derive_seed(cfg.seed, "partition"),
        clients=tuple(p.clients) if p.clients else None,
    )
    shards = partition(train, spec)

    template = build_template(cfg.topology, side * side, cfg.block, cfg.layers)
    params = init_params(template, cfg.head, (h // side) * (w // side), derive_seed(cfg.seed, "init"))
    clients = []
    for shard in shards:
        dp = None
        if cfg.dp.enabled:
            dp = DPConfig(cfg.dp.clip, cfg.dp.epsilon, rng_seed=derive_seed(cfg.seed, "dp", shard.name))
        opt = AdamState.fresh(params.spec.n_total, lr=cfg.lr, weight_decay=cfg.weight_decay)
        clients.append(ClientState(shard.name, shard, params.copy(), opt, dp))
    server = ServerState(params.copy(), 0, cfg.server_lr, cfg.aggregation)
    return Experiment(cfg, train, val, test, clients, server)


def fed_config(cfg: ExperimentConfig) -> FedConfig:
    return FedConfig(rounds=cfg.rounds, local_epochs=cfg.local_epochs, batch_size=cfg.batch_size,
                     seed=derive_seed(cfg.seed, "fed"), target_accuracy=cfg.target_accuracy,
                     patience=cfg.patience)


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None):
    exp = build_experiment(cfg, dataset)
    result = run_federation(exp.server, exp.clients, exp.test, fed_config(cfg))
    return exp, result


def write_history(result: FederationResult, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for rep in result.history:
            m = rep.global_metrics
            auc = "" if m.auc is None else repr(m.auc)
            for cid, loss, _ in rep.per_client:
                w.writerow([rep.round, cid, repr(loss), repr(m.accuracy), auc, rep.bytes_exchanged])


def summarize(exp: Experiment, result: FederationResult) -> dict:
    final: ModelParams = result.server.global_params
    test = evaluate(final, exp.test)
    val = evaluate(final, exp.val) if len(exp.val) else None
    return {
        "config": exp.config.to_dict(),
        "rounds_completed": len(result.history),
        "n_params": final.spec.n_total,
        "bytes_total": result.server.bytes_exchanged,
        "clients": [{"id": c.id, "n_samples": c.n_samples, "label_counts": list(c.dataset.label_counts())}
                    for c in result.clients],
        "split_sizes": {"train": len(exp.train), "val": len(exp.val), "test": len(exp.test)},
        "test_metrics": test.to_dict(),
        "val_metrics": val.to_dict() if val else None,
        "error": result.error,
    }


def write_outputs(exp: Experiment, result: FederationResult, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_history(result, out / "history.csv")
    summary = summarize(exp, result)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    save_checkpoint(result.server.global_params, out / "model_final.json")
    write_roc_csv(evaluate(result.server.global_params, exp.test).roc_points, out / "roc.csv")
    return summary
