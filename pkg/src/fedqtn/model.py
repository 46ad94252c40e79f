"""Hybrid patch classifier: shared QTN circuit per patch, then a dense or GAP head.

Parameters flatten to one vector ``[quantum..., head_weights..., head_bias]``
(the head part is absent for GAP); that vector is what the optimiser,
aggregation and communication accounting see.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from math import isqrt, pi
from pathlib import Path

import numpy as np

from .errors import ContractError, DomainError, FormatError
from .qsim import circuit_expectations, param_shift_jacobian
from .qtn import CircuitTemplate, build_template, encode_amplitudes

PROB_EPS = 1e-7
HEADS = ("dense", "gap")
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to rebuild the circuit and head shapes."""

    topology: str
    n_qubits: int
    block: str = "simple"
    layers: int = 1
    head: str = "gap"
    n_patches: int = 1

    def __post_init__(self):
        if self.head not in HEADS:
            raise ContractError(f"unknown head {self.head!r}")
        if self.n_patches < 1:
            raise ContractError("n_patches must be >= 1")
        self.template  # validates topology / block

    @property
    def template(self) -> CircuitTemplate:
        return build_template(self.topology, self.n_qubits, self.block, self.layers)

    @property
    def patch_side(self) -> int:
        side = isqrt(self.n_qubits)
        if side * side != self.n_qubits:
            raise ContractError(f"{self.n_qubits} qubits is not a square patch")
        return side

    @property
    def n_head(self) -> int:
        return self.n_patches + 1 if self.head == "dense" else 0

    @property
    def n_total(self) -> int:
        return self.template.n_params + self.n_head


@dataclass
class ModelParams:
    spec: ModelSpec
    quantum: np.ndarray
    head_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    head_bias: float = 0.0

    def __post_init__(self):
        self.quantum = np.asarray(self.quantum, dtype=np.float64)
        self.head_weights = np.asarray(self.head_weights, dtype=np.float64)
        if self.quantum.shape != (self.spec.template.n_params,):
            raise ContractError(
                f"quantum parameters have shape {self.quantum.shape}, template needs {self.spec.template.n_params}"
            )
        want = (self.spec.n_patches,) if self.spec.head == "dense" else (0,)
        if self.head_weights.shape != want:
            raise ContractError(f"head weights have shape {self.head_weights.shape}, expected {want}")
        if not (np.isfinite(self.quantum).all() and np.isfinite(self.head_weights).all()
                and np.isfinite(self.head_bias)):
            raise ContractError("parameters must be finite")

    def vector(self) -> np.ndarray:
        if self.spec.head == "gap":
            return self.quantum.copy()
        return np.concatenate([self.quantum, self.head_weights, [self.head_bias]])

    def with_vector(self, v) -> "ModelParams":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.spec.n_total,):
            raise ContractError(f"parameter vector has shape {v.shape}, expected ({self.spec.n_total},)")
        nq = self.spec.template.n_params
        if self.spec.head == "gap":
            return replace(self, quantum=v.copy())
        return replace(self, quantum=v[:nq].copy(), head_weights=v[nq:-1].copy(), head_bias=float(v[-1]))

    def copy(self) -> "ModelParams":
        return self.with_vector(self.vector())


@dataclass(frozen=True)
class Prediction:
    probability: float
    patch_expectations: np.ndarray


def init_params(template: CircuitTemplate, head: str, n_patches: int, seed: int) -> ModelParams:
    """Angles uniform on (-pi, pi]; dense weights Glorot-uniform, bias zero."""
    if n_patches < 1:
        raise ContractError("n_patches must be >= 1")
    t = template
    spec = ModelSpec(t.topology.kind, t.n_qubits, t.block.kind, t.block.layers, head, n_patches)
    rng = np.random.default_rng(seed)
    quantum = pi - rng.uniform(0.0, 2 * pi, size=t.n_params)
    if head == "dense":
        limit = np.sqrt(6.0 / (n_patches + 1))
        return ModelParams(spec, quantum, rng.uniform(-limit, limit, size=n_patches), 0.0)
    return ModelParams(spec, quantum)


def extract_patches(images, side: int) -> np.ndarray:
    """Non-overlapping side x side patches, row-major, each flattened row-major.

    ``(N, H, W) -> (N, (H/side)*(W/side), side*side)``
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 2:
        images = images[None]
    n, h, w = images.shape
    if side < 1 or h % side or w % side:
        raise ContractError(f"image {h}x{w} is not divisible into {side}x{side} patches")
    p = images.reshape(n, h // side, side, w // side, side).transpose(0, 1, 3, 2, 4)
    return p.reshape(n, (h // side) * (w // side), side * side)


def _patches_for(params: ModelParams, images, patch_side=None):
    spec = params.spec
    if patch_side is not None and patch_side * patch_side != spec.n_qubits:
        raise ContractError(f"patch_side {patch_side} does not match a {spec.n_qubits}-qubit template")
    patches = extract_patches(images, spec.patch_side)
    if patches.shape[1] != spec.n_patches:
        raise ContractError(f"images yield {patches.shape[1]} patches, model expects {spec.n_patches}")
    return patches


def _head(params: ModelParams, z):
    """Unclamped probability and d prob / d z for patch expectations ``z`` (N, K)."""
    if params.spec.head == "gap":
        p = (1.0 + z.mean(axis=1)) / 2
        return p, np.full_like(z, 0.5 / z.shape[1])
    logit = z @ params.head_weights + params.head_bias
    p = np.exp(-np.logaddexp(0.0, -logit))
    return p, (p * (1 - p))[:, None] * params.head_weights[None, :]


def patch_expectations(params: ModelParams, patches) -> np.ndarray:
    t = params.spec.template
    return circuit_expectations(t.seq, params.quantum, encode_amplitudes(patches), t.readout_qubit)


def predict_proba(params: ModelParams, images, patch_side=None):
    """Clamped class-1 probabilities ``(N,)`` and patch expectations ``(N, K)``."""
    z = patch_expectations(params, _patches_for(params, images, patch_side))
    p, _ = _head(params, z)
    return np.clip(p, PROB_EPS, 1 - PROB_EPS), z


def forward(params: ModelParams, image, patch_side: int) -> Prediction:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ContractError("forward takes a single H x W image")
    p, z = predict_proba(params, image[None], patch_side)
    return Prediction(float(p[0]), z[0])


def _check_labels(labels):
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if not np.isin(y, (0.0, 1.0)).all():
        raise DomainError("labels must be 0 or 1")
    return y


def per_sample_loss_and_grad(params: ModelParams, images, labels, weight_decay: float = 0.0):
    """BCE loss and gradient for each sample separately.

    Each row includes the L2 term, so averaging rows reproduces the batch
    objective. Returns ``(losses (N,), grads (N, n_total))``.
    """
    y = _check_labels(labels)
    patches = _patches_for(params, images)
    if patches.shape[0] != y.size:
        raise ContractError("images and labels differ in length")
    if y.size == 0:
        raise ContractError("empty batch")
    spec, t = params.spec, params.spec.template
    n, k, _ = patches.shape

    amps = encode_amplitudes(patches.reshape(n * k, -1))
    z = circuit_expectations(t.seq, params.quantum, amps, t.readout_qubit).reshape(n, k)
    jac = param_shift_jacobian(t.seq, params.quantum, amps, t.readout_qubit).reshape(-1, n, k)

    p_raw, dp_dz = _head(params, z)
    inside = (p_raw >= PROB_EPS) & (p_raw <= 1 - PROB_EPS)
    p = np.clip(p_raw, PROB_EPS, 1 - PROB_EPS)
    losses = -(y * np.log(p) + (1 - y) * np.log(1 - p))
    dl_dp = np.where(inside, -y / p + (1 - y) / (1 - p), 0.0)

    grads = np.empty((n, spec.n_total))
    nq = t.n_params
    grads[:, :nq] = np.einsum("ik,pik->ip", dl_dp[:, None] * dp_dz, jac)
    if spec.head == "dense":
        s = dl_dp * p_raw * (1 - p_raw)
        grads[:, nq:-1] = s[:, None] * z
        grads[:, -1] = s

    theta = params.vector()
    losses = losses + 0.5 * weight_decay * float(theta @ theta)
    grads += weight_decay * theta
    return losses, grads


def loss_and_grad(params: ModelParams, images, labels, weight_decay: float = 0.0):
    """Mean BCE over the batch plus (weight_decay/2)*||theta||^2, and its gradient."""
    losses, grads = per_sample_loss_and_grad(params, images, labels, weight_decay)
    return float(losses.mean()), grads.mean(axis=0)


# --- checkpoints ------------------------------------------------------------


def to_checkpoint(params: ModelParams) -> dict:
    s = params.spec
    return {
        "schema_version": SCHEMA_VERSION,
        "topology": s.topology,
        "block": s.block,
        "layers": s.layers,
        "n_qubits": s.n_qubits,
        "patch_side": s.patch_side,
        "n_patches": s.n_patches,
        "head_kind": s.head,
        "quantum": [float(x) for x in params.quantum],
        "head_weights": [float(x) for x in params.head_weights],
        "head_bias": float(params.head_bias),
    }


def from_checkpoint(obj: dict) -> ModelParams:
    try:
        if obj["schema_version"] != SCHEMA_VERSION:
            raise FormatError(f"unsupported checkpoint schema_version {obj['schema_version']!r}")
        spec = ModelSpec(obj["topology"], int(obj["n_qubits"]), obj["block"], int(obj["layers"]),
                         obj["head_kind"], int(obj["n_patches"]))
        if int(obj["patch_side"]) != spec.patch_side:
            raise FormatError("patch_side disagrees with n_qubits")
        return ModelParams(spec, obj["quantum"], obj["head_weights"], float(obj["head_bias"]))
    except KeyError as e:
        raise FormatError(f"checkpoint is missing field {e.args[0]!r}") from None


def save_checkpoint(params: ModelParams, path) -> None:
    Path(path).write_text(json.dumps(to_checkpoint(params), indent=2) + "\n")


def load_checkpoint(path) -> ModelParams:
    return from_checkpoint(json.loads(Path(path).read_text()))
