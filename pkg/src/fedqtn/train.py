"""Client-side optimisation: Adam, per-sample clipping + Gaussian noise, local epochs."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .errors import ContractError, NumericError
from .metrics import MetricsReport, report
from .model import ModelParams, loss_and_grad, per_sample_loss_and_grad, predict_proba


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4

    @classmethod
    def fresh(cls, n_params: int, lr: float = 0.001, weight_decay: float = 1e-4, **kw) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0, lr=lr, weight_decay=weight_decay, **kw)

    def copy(self) -> "AdamState":
        return replace(self, m=self.m.copy(), v=self.v.copy())


@dataclass(frozen=True)
class DPConfig:
    """Per-sample clipping norm and noise multiplier.

    Noise on the summed clipped gradient has std ``epsilon * clip_C`` per
    coordinate, so larger epsilon means more noise.
    """

    clip_C: float = 1.0
    epsilon: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.clip_C > 0:
            raise ContractError("clip_C must be positive")
        if not self.epsilon >= 0:
            raise ContractError("epsilon must be non-negative")


def adam_step(state: AdamState, params, grad):
    """One bias-corrected Adam update; returns ``(new_state, new_params)``.

    ``grad`` is expected to already contain any weight-decay term.
    """
    params = np.asarray(params, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != params.shape or state.m.shape != params.shape:
        raise ContractError(f"shape mismatch: params {params.shape}, grad {g.shape}, state {state.m.shape}")
    if not np.isfinite(g).all():
        raise NumericError("non-finite gradient component")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * g
    v = state.beta2 * state.v + (1 - state.beta2) * (g * g)
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, t=t), new


def clip_gradient(g, C: float):
    g = np.asarray(g, dtype=np.float64)
    norm = float(np.linalg.norm(g))
    if norm <= C:
        return g.copy()
    return g * (C / norm)


def dp_batch_grad(per_sample_grads, dp: DPConfig, rng: np.random.Generator):
    """Clip each row to ``clip_C``, sum, add N(0, (epsilon*C)^2) per coordinate, divide by B."""
    grads = np.asarray(per_sample_grads, dtype=np.float64)
    if grads.ndim != 2 or grads.shape[0] == 0:
        raise ContractError("need a non-empty (B, P) array of per-sample gradients")
    total = np.sum([clip_gradient(g, dp.clip_C) for g in grads], axis=0)
    if dp.epsilon > 0:
        total = total + rng.normal(0.0, dp.epsilon * dp.clip_C, size=total.shape)
    return total / grads.shape[0]


def _batch_step(params, images, labels, opt, dp, noise_rng):
    if dp is None:
        loss, g = loss_and_grad(params, images, labels, opt.weight_decay)
    else:
        losses, grads = per_sample_loss_and_grad(params, images, labels, opt.weight_decay)
        loss, g = float(losses.mean()), dp_batch_grad(grads, dp, noise_rng)
    if not (np.isfinite(loss) and np.isfinite(g).all()):
        raise NumericError("non-finite loss or gradient")
    return loss, g


def mean_loss(params: ModelParams, data: Dataset, weight_decay: float = 0.0) -> float:
    loss, _ = loss_and_grad(params, data.images(), data.labels(), weight_decay)
    return loss


def train_local(params: ModelParams, data: Dataset, epochs: int, opt: AdamState,
                dp: DPConfig | None = None, seed: int = 0, batch_size: int = 8):
    """Mini-batch Adam over ``data`` for ``epochs`` passes.

    Returns ``(params, last_epoch_mean_loss, opt)``; inputs are not mutated.
    With ``epochs == 0`` the loss is a plain evaluation of the starting point.
    """
    if len(data) == 0:
        raise ContractError("cannot train on an empty dataset")
    if epochs < 0 or batch_size < 1:
        raise ContractError("epochs must be >= 0 and batch_size >= 1")
    images, labels = data.images(), data.labels()
    if epochs == 0:
        return params.copy(), mean_loss(params, data, opt.weight_decay), opt.copy()

    order_rng = np.random.default_rng(seed)
    noise_rng = np.random.default_rng([dp.rng_seed, seed]) if dp is not None else None
    theta = params.vector()
    n = len(data)
    for _ in range(epochs):
        perm = order_rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            cur = params.with_vector(theta)
            loss, g = _batch_step(cur, images[idx], labels[idx], opt, dp, noise_rng)
            opt, theta = adam_step(opt, theta, g)
            total += loss * idx.size
        epoch_loss = total / n
    return params.with_vector(theta), epoch_loss, opt


def evaluate(params: ModelParams, data: Dataset, threshold: float = 0.5) -> MetricsReport:
    if len(data) == 0:
        raise ContractError("cannot evaluate on an empty dataset")
    probs, _ = predict_proba(params, data.images())
    y = data.labels()
    bce = float(-np.mean(y * np.log(probs) + (1 - y) * np.log(1 - probs)))
    return report(probs, y, threshold, loss=bce)
