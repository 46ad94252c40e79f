"""Exact statevector simulation for circuits made of RY rotations and CNOTs.

Basis indexing is little-endian: qubit ``q`` is bit ``q`` of the amplitude
index, so qubit 0 is the least significant bit.

The public single-state API (``StateVector``, ``apply_ry`` ...) is built on
batched array kernels (``simulate``, ``expectations_z``,
``param_shift_jacobian``) that operate on arrays of shape ``(..., 2**n)`` and
broadcast parameter arrays against the leading batch axes. The model code
uses the kernels directly to push every patch of a mini-batch through one
call.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import pi

import numpy as np

from .errors import CapacityError, ContractError

MAX_QUBITS = 20
NORM_TOL = 1e-10
SHIFT = pi / 2


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise ContractError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got shape {amps.shape}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ContractError(f"state is not normalised (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def __len__(self):
        return self.amplitudes.shape[0]


@dataclass(frozen=True)
class Gate:
    """One gate. RY gates either read ``params[slot]`` or carry a fixed ``angle``."""

    kind: str
    qubits: tuple[int, ...]
    slot: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind == "RY":
            if len(self.qubits) != 1:
                raise ContractError("RY acts on exactly one qubit")
            if (self.slot is None) == (self.angle is None):
                raise ContractError("RY needs exactly one of slot / fixed angle")
        elif self.kind == "CNOT":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ContractError("CNOT needs two distinct qubits (control, target)")
        else:
            raise ContractError(f"unsupported gate kind {self.kind!r}")
        if any(q < 0 for q in self.qubits):
            raise ContractError("negative qubit index")

    @classmethod
    def ry(cls, qubit, slot):
        return cls("RY", (qubit,), slot=slot)

    @classmethod
    def fixed_ry(cls, qubit, angle):
        return cls("RY", (qubit,), angle=float(angle))

    @classmethod
    def cnot(cls, control, target):
        return cls("CNOT", (control, target))


@dataclass(frozen=True)
class GateSequence:
    gates: tuple[Gate, ...]
    n_qubits: int
    n_params: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        for i, g in enumerate(self.gates):
            if any(q >= self.n_qubits for q in g.qubits):
                raise ContractError(f"gate {i} touches a qubit >= {self.n_qubits}")
            if g.slot is not None and not 0 <= g.slot < self.n_params:
                raise ContractError(f"gate {i} slot {g.slot} outside [0, {self.n_params})")

    @cached_property
    def occurrence_slots(self) -> np.ndarray:
        """Slot index of every parameterised RY gate, in circuit order."""
        return np.array([g.slot for g in self.gates if g.slot is not None], dtype=np.intp)

    def occurrence_angles(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=np.float64)
        if params.shape[-1] != self.n_params:
            raise ContractError(f"expected {self.n_params} parameters, got {params.shape[-1]}")
        return params[..., self.occurrence_slots]


# --- index tables -----------------------------------------------------------


@lru_cache(maxsize=None)
def _cnot_perm(n, control, target):
    k = np.arange(2**n)
    return np.where((k >> control) & 1 == 1, k ^ (1 << target), k)


@lru_cache(maxsize=None)
def _z_signs(n, qubit):
    k = np.arange(2**n)
    return np.where((k >> qubit) & 1 == 0, 1.0, -1.0)


def _check_qubit(n, qubit):
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n} qubits")


def _n_from_dim(dim):
    n = dim.bit_length() - 1
    if 2**n != dim:
        raise ContractError(f"state dimension {dim} is not a power of two")
    return n


# --- batched kernels --------------------------------------------------------


def ry_kernel(amps, n, qubit, angle):
    """Apply RY(angle) on ``qubit``. ``angle`` broadcasts against ``amps.shape[:-1]``.

    Real input stays real (RY is a real rotation); complex input stays complex.
    """
    amps = np.asarray(amps)
    half = np.asarray(angle, dtype=np.float64)[..., None, None] / 2
    c, s = np.cos(half), np.sin(half)
    t = amps.reshape(amps.shape[:-1] + (2 ** (n - qubit - 1), 2, 2**qubit))
    a0, a1 = t[..., 0, :], t[..., 1, :]
    batch = np.broadcast_shapes(amps.shape[:-1], half.shape[:-2])
    out = np.empty(batch + t.shape[-3:], dtype=np.result_type(amps.dtype, np.float64))
    out[..., 0, :] = c * a0 - s * a1
    out[..., 1, :] = s * a0 + c * a1
    return out.reshape(batch + (2**n,))


def cnot_kernel(amps, n, control, target):
    return amps[..., _cnot_perm(n, control, target)]


def simulate(amps, seq: GateSequence, occ_angles):
    """Run ``seq`` on a batch of states.

    ``occ_angles[..., i]`` is the angle of the i-th parameterised RY gate (see
    ``GateSequence.occurrence_slots``); its leading axes broadcast with
    ``amps.shape[:-1]``.
    """
    n = seq.n_qubits
    amps = np.asarray(amps)
    if amps.dtype.kind != "c":
        amps = amps.astype(np.float64)
    occ_angles = np.asarray(occ_angles, dtype=np.float64)
    o = 0
    for g in seq.gates:
        if g.kind == "CNOT":
            amps = cnot_kernel(amps, n, *g.qubits)
        elif g.slot is None:
            amps = ry_kernel(amps, n, g.qubits[0], g.angle)
        else:
            amps = ry_kernel(amps, n, g.qubits[0], occ_angles[..., o])
            o += 1
    return amps


def expectations_z(amps, qubit):
    amps = np.asarray(amps)
    n = _n_from_dim(amps.shape[-1])
    _check_qubit(n, qubit)
    probs = amps.real**2 + amps.imag**2
    return probs @ _z_signs(n, qubit)


def circuit_unitary(seq: GateSequence, occ_angles):
    """Dense circuit matrix, shape ``(*occ_angles.shape[:-1], 2**n, 2**n)``."""
    occ_angles = np.asarray(occ_angles, dtype=np.float64)
    dim = 2**seq.n_qubits
    cols = simulate(np.eye(dim), seq, occ_angles[..., None, :])
    return np.swapaxes(cols, -1, -2)


def pulled_back_z(seq: GateSequence, occ_angles, readout_qubit):
    """Observable U^dagger Z_readout U for each angle setting (Heisenberg picture)."""
    u = circuit_unitary(seq, occ_angles)
    z = _z_signs(seq.n_qubits, readout_qubit)
    return np.swapaxes(u.conj(), -1, -2) @ (z[:, None] * u)


def _quadratic(obs, amps):
    """<psi|O|psi> for every O in ``obs`` (S, d, d) and psi in ``amps`` (M, d) -> (S, M)."""
    return (amps.conj() @ obs * amps).sum(axis=-1).real


def circuit_expectations(seq: GateSequence, params, amps, readout_qubit):
    """<Z_readout> after running ``seq`` on each state of a batch ``(..., 2**n)``."""
    amps = np.asarray(amps)
    batch = amps.shape[:-1]
    flat = amps.reshape(-1, amps.shape[-1])
    angles = seq.occurrence_angles(params)
    if flat.shape[0] <= flat.shape[1]:
        return expectations_z(simulate(flat, seq, angles), readout_qubit).reshape(batch)
    obs = pulled_back_z(seq, angles[None], readout_qubit)
    return _quadratic(obs, flat)[0].reshape(batch)


def param_shift_jacobian(seq: GateSequence, params, amps, readout_qubit):
    """d<Z_readout>/d params for a batch of input states.

    Returns an array of shape ``(n_params, *amps.shape[:-1])``. Each RY
    occurrence is shifted by +-pi/2 separately; occurrences sharing a slot add.
    Large batches go through the pulled-back observables of the shifted
    circuits instead of simulating every state under every shift.
    """
    amps = np.asarray(amps)
    base = seq.occurrence_angles(params)
    n_occ = base.shape[-1]
    batch = amps.shape[:-1]
    jac = np.zeros((seq.n_params,) + batch)
    if n_occ == 0:
        return jac
    shifts = np.concatenate([np.eye(n_occ) * SHIFT, -np.eye(n_occ) * SHIFT])
    angles = base + shifts
    flat = amps.reshape(-1, amps.shape[-1])
    if flat.shape[0] <= flat.shape[1]:
        out = simulate(flat[None], seq, angles[:, None, :])
        e = expectations_z(out, readout_qubit)
    else:
        e = _quadratic(pulled_back_z(seq, angles, readout_qubit), flat)
    d_occ = ((e[:n_occ] - e[n_occ:]) / 2).reshape((n_occ,) + batch)
    np.add.at(jac, seq.occurrence_slots, d_occ)
    return jac


# --- single-state API -------------------------------------------------------


def new_zero_state(n_qubits: int) -> StateVector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_ry(state: StateVector, qubit: int, angle: float) -> StateVector:
    _check_qubit(state.n_qubits, qubit)
    return StateVector(state.n_qubits, ry_kernel(state.amplitudes, state.n_qubits, qubit, angle))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state.n_qubits, control)
    _check_qubit(state.n_qubits, target)
    if control == target:
        raise IndexError("CNOT control and target must differ")
    return StateVector(state.n_qubits, cnot_kernel(state.amplitudes, state.n_qubits, control, target))


def _check_run(state, seq, params):
    if state.n_qubits != seq.n_qubits:
        raise ContractError(f"state has {state.n_qubits} qubits, circuit has {seq.n_qubits}")
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (seq.n_params,):
        raise ContractError(f"expected {seq.n_params} parameters, got shape {params.shape}")
    return params


def run_circuit(state: StateVector, seq: GateSequence, params) -> StateVector:
    params = _check_run(state, seq, params)
    out = simulate(state.amplitudes, seq, seq.occurrence_angles(params))
    return StateVector(state.n_qubits, out)


def expectation_z(state: StateVector, qubit: int) -> float:
    _check_qubit(state.n_qubits, qubit)
    return float(expectations_z(state.amplitudes, qubit))


def param_shift_grad(seq: GateSequence, params, input: StateVector, readout_qubit: int) -> np.ndarray:
    params = _check_run(input, seq, params)
    _check_qubit(seq.n_qubits, readout_qubit)
    return param_shift_jacobian(seq, params, input.amplitudes, readout_qubit)
