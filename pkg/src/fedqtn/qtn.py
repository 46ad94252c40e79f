"""MPS / TTN / MERA circuit templates built from two-qubit blocks, and patch encoding.

Every two-qubit block acts on a pair ``(q1, q2)`` with ``q1 < q2``; when a
pair is coarse-grained the higher-indexed wire survives. Slots are numbered
in gate order, one fresh slot per parameterised RY.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import pi

import numpy as np

from .errors import ContractError, DomainError
from .qsim import Gate, GateSequence, StateVector

SIMPLE = "simple"
STRONG = "strong"
TOPOLOGIES = ("mps", "ttn", "mera")


@dataclass(frozen=True)
class BlockKind:
    kind: str = SIMPLE
    layers: int = 1

    def __post_init__(self):
        if self.kind not in (SIMPLE, STRONG):
            raise ContractError(f"unknown block kind {self.kind!r}")
        if self.layers < 1:
            raise ContractError("layers must be >= 1")

    @property
    def slots(self) -> int:
        return 4 if self.kind == SIMPLE else 2 * self.layers


@dataclass(frozen=True)
class Topology:
    kind: str
    n_qubits: int

    def __post_init__(self):
        n = self.n_qubits
        if self.kind not in TOPOLOGIES:
            raise ContractError(f"unknown topology {self.kind!r}")
        if n < 2:
            raise ContractError(f"{self.kind} needs at least 2 qubits, got {n}")
        if self.kind in ("ttn", "mera") and n & (n - 1):
            raise ContractError(f"{self.kind} needs a power-of-two qubit count, got {n}")
        if self.kind == "mera" and n < 4:
            raise ContractError(f"mera needs at least 4 qubits, got {n}")


@dataclass(frozen=True)
class CircuitTemplate:
    seq: GateSequence
    readout_qubit: int
    topology: Topology
    block: BlockKind
    pairs: tuple[tuple[int, int], ...]

    @property
    def n_qubits(self) -> int:
        return self.seq.n_qubits

    @property
    def n_params(self) -> int:
        return self.seq.n_params


@dataclass(frozen=True)
class Patch:
    pixels: np.ndarray
    side: int

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64).reshape(-1)
        if px.size != self.side**2:
            raise ContractError(f"patch of side {self.side} needs {self.side**2} pixels, got {px.size}")
        object.__setattr__(self, "pixels", px)


def expand_block(block: BlockKind, q1: int, q2: int, next_slot: int):
    """Gates for one two-qubit block; returns ``(gates, slots_consumed)``."""
    if q1 == q2:
        raise ContractError("block qubits must differ")
    s = next_slot
    if block.kind == SIMPLE:
        gates = [Gate.ry(q1, s), Gate.ry(q2, s + 1), Gate.cnot(q1, q2), Gate.ry(q1, s + 2), Gate.ry(q2, s + 3)]
        return gates, 4
    gates = []
    for layer in range(block.layers):
        s = next_slot + 2 * layer
        gates += [Gate.ry(q1, s), Gate.ry(q2, s + 1), Gate.cnot(q1, q2), Gate.cnot(q2, q1)]
    return gates, 2 * block.layers


def _assemble(topology, block, pairs, readout):
    gates, slot = [], 0
    for q1, q2 in pairs:
        g, used = expand_block(block, q1, q2, slot)
        gates += g
        slot += used
    seq = GateSequence(tuple(gates), topology.n_qubits, slot)
    return CircuitTemplate(seq, readout, topology, block, tuple(pairs))


def _coarse_grain(active):
    """Isometry pairs (a0,a1), (a2,a3), ... and their surviving wires."""
    pairs = [(active[i], active[i + 1]) for i in range(0, len(active), 2)]
    return pairs, [b for _, b in pairs]


def build_mps(n_qubits: int, block: BlockKind = BlockKind()) -> CircuitTemplate:
    topo = Topology("mps", n_qubits)
    pairs = [(q, q + 1) for q in range(n_qubits - 1)]
    return _assemble(topo, block, pairs, n_qubits - 1)


def build_ttn(n_qubits: int, block: BlockKind = BlockKind()) -> CircuitTemplate:
    topo = Topology("ttn", n_qubits)
    active, pairs = list(range(n_qubits)), []
    while len(active) > 1:
        level, active = _coarse_grain(active)
        pairs += level
    return _assemble(topo, block, pairs, active[0])


def build_mera(n_qubits: int, block: BlockKind = BlockKind()) -> CircuitTemplate:
    topo = Topology("mera", n_qubits)
    active, pairs = list(range(n_qubits)), []
    while len(active) > 1:
        m = len(active)
        pairs += [(active[i], active[i + 1]) for i in range(1, m - 2, 2)]
        level, active = _coarse_grain(active)
        pairs += level
    return _assemble(topo, block, pairs, active[0])


_BUILDERS = {"mps": build_mps, "ttn": build_ttn, "mera": build_mera}


@lru_cache(maxsize=None)
def build_template(topology: str, n_qubits: int, block: str = SIMPLE, layers: int = 1) -> CircuitTemplate:
    """Cached builder keyed by plain values, used wherever a template is rebuilt from a descriptor."""
    if topology not in _BUILDERS:
        raise ContractError(f"unknown topology {topology!r}")
    return _BUILDERS[topology](n_qubits, BlockKind(block, layers))


def param_count(t: CircuitTemplate) -> int:
    return t.seq.n_params


def dump_template(t: CircuitTemplate) -> str:
    """Line-oriented listing ``KIND qubits slot`` for golden-file comparisons."""
    lines = [f"# {t.topology.kind} n={t.n_qubits} block={t.block.kind} layers={t.block.layers} "
             f"params={t.n_params} readout={t.readout_qubit}"]
    for g in t.seq.gates:
        qs = ",".join(str(q) for q in g.qubits)
        slot = "-" if g.kind == "CNOT" else (str(g.slot) if g.slot is not None else f"fixed={g.angle!r}")
        lines.append(f"{g.kind} {qs} {slot}")
    return "\n".join(lines) + "\n"


def encode_amplitudes(pixels) -> np.ndarray:
    """Real product-state amplitudes for flattened patches, shape (..., n) -> (..., 2**n).

    Pixel j sets qubit j to cos(pi p/2)|0> + sin(pi p/2)|1>.
    """
    px = np.asarray(pixels, dtype=np.float64)
    if px.size and (np.isnan(px).any() or px.min() < 0.0 or px.max() > 1.0):
        raise DomainError("pixel values must lie in [0, 1]")
    half = pi * px / 2
    c, s = np.cos(half), np.sin(half)
    amps = np.stack([c[..., 0], s[..., 0]], axis=-1)
    for j in range(1, px.shape[-1]):
        q = np.stack([c[..., j], s[..., j]], axis=-1)
        amps = (q[..., :, None] * amps[..., None, :]).reshape(px.shape[:-1] + (-1,))
    return amps


def encode_patch(p: Patch) -> StateVector:
    return StateVector(p.pixels.size, encode_amplitudes(p.pixels).astype(np.complex128))
