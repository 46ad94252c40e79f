"""Synchronous federated averaging over simulated hospitals.

The server only ever sees what ``Client.local_update`` returns (parameters,
training loss, sample count); client datasets never leave the client object.
"""
from __future__ import annotations

import logging
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .errors import ContractError, NumericError
from .metrics import MetricsReport
from .model import ModelParams
from .train import AdamState, DPConfig, evaluate, train_local

log = logging.getLogger(__name__)

MEAN = "mean"
WEIGHTED = "weighted"
BYTES_PER_PARAM = 4


def derive_seed(seed: int, *keys) -> int:
    """Independent 63-bit seed for a (seed, key...) tuple; string keys are hashed with crc32."""
    ints = [k if isinstance(k, int) else zlib.crc32(str(k).encode()) for k in keys]
    return int(np.random.SeedSequence([seed, *ints]).generate_state(1, np.uint64)[0] >> 1)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FEDTN_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class ClientState:
    id: str
    dataset: Dataset = field(repr=False)
    params: ModelParams
    opt: AdamState
    dp: DPConfig | None = None

    @property
    def n_samples(self) -> int:
        return len(self.dataset)


@dataclass(frozen=True)
class ClientUpdate:
    id: str
    params: ModelParams
    train_loss: float
    n_samples: int


@dataclass
class ServerState:
    global_params: ModelParams
    round: int = 0
    server_lr: float = 1.0
    aggregation: str = MEAN
    bytes_exchanged: int = 0

    def __post_init__(self):
        if self.aggregation not in (MEAN, WEIGHTED):
            raise ContractError(f"unknown aggregation {self.aggregation!r}")


@dataclass
class RoundReport:
    round: int
    per_client: list[tuple[str, float, int]]
    global_metrics: MetricsReport
    bytes_exchanged: int


@dataclass
class FedConfig:
    rounds: int = 30
    local_epochs: int = 1
    batch_size: int = 8
    seed: int = 0
    target_accuracy: float | None = None
    patience: int = 1
    threads: int | None = None


@dataclass
class FederationResult:
    history: list[RoundReport]
    server: ServerState
    clients: list[ClientState]
    error: dict | None = None


def _check_shape(a: ModelParams, b: ModelParams):
    if a.spec != b.spec:
        raise ContractError(f"model mismatch: {a.spec} vs {b.spec}")


def broadcast(server: ServerState, clients: list[ClientState]) -> list[ClientState]:
    for c in clients:
        _check_shape(server.global_params, c.params)
    return [replace(c, params=server.global_params.copy()) for c in clients]


def aggregate(server: ServerState, client_params) -> ServerState:
    """Federated averaging of ``[(params, n_samples), ...]`` followed by the server step.

    The mean is taken as ``first + sum(w_h * (theta_h - first))`` so that
    identical inputs reproduce themselves bit-for-bit.
    """
    client_params = list(client_params)
    if not client_params:
        raise ContractError("nothing to aggregate")
    for p, _ in client_params:
        _check_shape(server.global_params, p)
    thetas = np.stack([p.vector() for p, _ in client_params])
    if server.aggregation == MEAN:
        weights = np.full(len(thetas), 1.0 / len(thetas))
    else:
        counts = np.array([n for _, n in client_params], dtype=np.float64)
        if counts.sum() <= 0:
            raise ContractError("weighted aggregation needs positive sample counts")
        weights = counts / counts.sum()
    anchor = thetas[0]
    mean = anchor + np.sum(weights[:, None] * (thetas - anchor), axis=0)

    current = server.global_params.vector()
    new = mean if server.server_lr == 1.0 else current - server.server_lr * (current - mean)
    return replace(server, global_params=server.global_params.with_vector(new), round=server.round + 1)


def local_update(client: ClientState, epochs: int, seed: int, batch_size: int):
    params, loss, opt = train_local(client.params, client.dataset, epochs, client.opt,
                                    client.dp, seed=seed, batch_size=batch_size)
    return replace(client, params=params, opt=opt), ClientUpdate(client.id, params, loss, client.n_samples)


def run_round(server: ServerState, clients: list[ClientState], local_epochs: int, test_set: Dataset,
              *, batch_size: int = 8, seed: int = 0, threads: int | None = None):
    """broadcast -> local training -> aggregate -> evaluate. Returns (server, clients, report)."""
    if local_epochs < 1:
        raise ContractError("local_epochs must be >= 1")
    if not clients:
        raise ContractError("a round needs at least one client")
    r = server.round + 1
    clients = sorted(broadcast(server, clients), key=lambda c: c.id)
    seeds = [derive_seed(seed, r, c.id) for c in clients]
    threads = thread_count() if threads is None else threads

    def work(args):
        c, s = args
        return local_update(c, local_epochs, s, batch_size)

    if threads > 1 and len(clients) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(clients))) as pool:
            results = list(pool.map(work, zip(clients, seeds)))
    else:
        results = [work(a) for a in zip(clients, seeds)]
    clients = [c for c, _ in results]
    updates = [u for _, u in results]

    server = aggregate(server, [(u.params, u.n_samples) for u in updates])
    p = server.global_params.spec.n_total
    server.bytes_exchanged += 2 * len(updates) * p * BYTES_PER_PARAM
    metrics = evaluate(server.global_params, test_set)
    rep = RoundReport(server.round, [(u.id, u.train_loss, u.n_samples) for u in updates],
                      metrics, server.bytes_exchanged)
    log.info("round %d: test acc %.4f auc %s bytes %d", server.round, metrics.accuracy,
             "n/a" if metrics.auc is None else f"{metrics.auc:.4f}", server.bytes_exchanged)
    return server, clients, rep


def run_federation(server: ServerState, clients: list[ClientState], test_set: Dataset,
                   cfg: FedConfig) -> FederationResult:
    """Up to ``cfg.rounds`` rounds, stopping once test accuracy has been at or above
    ``cfg.target_accuracy`` for ``cfg.patience`` consecutive rounds."""
    history, streak = [], 0
    for _ in range(cfg.rounds):
        try:
            server, clients, rep = run_round(server, clients, cfg.local_epochs, test_set,
                                             batch_size=cfg.batch_size, seed=cfg.seed, threads=cfg.threads)
        except (NumericError, FloatingPointError) as e:
            log.error("round %d failed: %s", server.round + 1, e)
            return FederationResult(history, server, clients, {"round": server.round + 1, "message": str(e)})
        history.append(rep)
        if cfg.target_accuracy is not None:
            streak = streak + 1 if rep.global_metrics.accuracy >= cfg.target_accuracy else 0
            if streak >= cfg.patience:
                break
    return FederationResult(history, server, clients)
