from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedqtn.errors import ContractError, DomainError
from fedqtn.qsim import expectation_z
from fedqtn.qtn import (STRONG, BlockKind, Patch, build_mera, build_mps, build_template, build_ttn,
                        dump_template, encode_amplitudes, encode_patch, expand_block, param_count)

from oracles import mera_block_count, product_state

GOLDEN = Path(__file__).parent / "golden"


def test_expand_simple():
    gates, used = expand_block(BlockKind(), 0, 1, 0)
    assert (len(gates), used) == (5, 4)
    assert [g.kind for g in gates] == ["RY", "RY", "CNOT", "RY", "RY"]
    assert [g.slot for g in gates if g.slot is not None] == [0, 1, 2, 3]
    assert gates[2].qubits == (0, 1)


def test_expand_strong():
    gates, used = expand_block(BlockKind(STRONG, 1), 2, 3, 5)
    assert (len(gates), used) == (4, 2)
    assert [g.qubits for g in gates[2:]] == [(2, 3), (3, 2)]
    gates, used = expand_block(BlockKind(STRONG, 2), 2, 3, 0)
    assert (len(gates), used) == (8, 4)


def test_expand_equal_qubits():
    with pytest.raises(ContractError):
        expand_block(BlockKind(), 1, 1, 0)


def test_mps_counts():
    t = build_mps(4)
    assert (len(t.pairs), t.n_params, t.readout_qubit) == (3, 12, 3)
    assert build_mps(8).n_params == 28
    t2 = build_mps(2, BlockKind(STRONG))
    assert (len(t2.pairs), t2.readout_qubit) == (1, 1)
    with pytest.raises(ContractError):
        build_mps(1)


def test_ttn_structure():
    t = build_ttn(4)
    assert t.pairs == ((0, 1), (2, 3), (1, 3))
    assert (t.n_params, t.readout_qubit) == (12, 3)
    t8 = build_ttn(8)
    assert (len(t8.pairs), t8.n_params) == (7, 28)
    with pytest.raises(ContractError):
        build_ttn(6)


def test_mera_structure():
    t = build_mera(4)
    assert t.pairs == ((1, 2), (0, 1), (2, 3), (1, 3))
    assert t.n_params == 16
    with pytest.raises(ContractError):
        build_mera(2)
    with pytest.raises(ContractError):
        build_mera(12)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_mera_count_matches_enumeration(n):
    t = build_mera(n)
    assert len(t.pairs) == mera_block_count(n)
    levels, m = 0, n
    while m > 1:
        levels += m // 2 - 1
        m //= 2
    assert len(t.pairs) == (n - 1) + levels


def test_mera8_pinned():
    assert mera_block_count(8) == 11
    assert param_count(build_mera(8)) == 44


def test_param_count_examples():
    assert param_count(build_mps(8)) == 28
    assert param_count(build_ttn(4, BlockKind(STRONG, 1))) == 6
    assert param_count(build_mera(4)) == 16


@pytest.mark.parametrize("topology,n", [("mps", 2), ("mps", 5), ("mps", 9), ("ttn", 2), ("ttn", 16),
                                        ("mera", 4), ("mera", 16)])
@pytest.mark.parametrize("block,layers", [("simple", 1), ("strong", 1), ("strong", 3)])
def test_templates_are_consistent(topology, n, block, layers):
    t = build_template(topology, n, block, layers)
    slots = BlockKind(block, layers).slots
    assert t.n_params == len(t.pairs) * slots
    if topology != "mera":
        assert t.n_params == (n - 1) * slots
    assert t.readout_qubit == n - 1
    used = sorted(g.slot for g in t.seq.gates if g.slot is not None)
    assert used == list(range(t.n_params))
    # readout is the last surviving wire: it is touched by the final block
    assert t.readout_qubit in t.pairs[-1]


@pytest.mark.parametrize("name,args", [
    ("ttn4_simple", ("ttn", 4)),
    ("mera4_simple", ("mera", 4)),
    ("mera8_simple", ("mera", 8)),
    ("mps4_strong2", ("mps", 4, "strong", 2)),
])
def test_golden_dumps(name, args):
    assert dump_template(build_template(*args)) == (GOLDEN / f"{name}.txt").read_text()


# --- encoding -----------------------------------------------------------------


def test_encode_zeros_and_ones():
    s = encode_patch(Patch(np.zeros(4), 2))
    assert np.array_equal(s.amplitudes, np.eye(16)[0])
    s1 = encode_patch(Patch([1.0], 1))
    assert np.allclose(s1.amplitudes, [0, 1], atol=1e-15)


def test_encode_half_zero():
    # qubit 0 = 0.5 -> [0.70711, 0.70711], qubit 1 = 0 -> [1, 0]; qubit 0 is the right factor
    amps = encode_amplitudes(np.array([0.5, 0.0]))
    expected = np.kron([1, 0], [0.70711, 0.70711])
    assert np.allclose(amps, expected, atol=1e-5)


def test_encode_domain():
    with pytest.raises(DomainError):
        encode_patch(Patch([1.2, 0, 0, 0], 2))
    with pytest.raises(DomainError):
        encode_patch(Patch([-0.1], 1))
    with pytest.raises(ContractError):
        Patch([0.1, 0.2, 0.3], 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=9))
def test_encoding_law(pixels):
    side_sq = len(pixels)
    amps = encode_amplitudes(np.array(pixels))
    assert np.allclose(amps, product_state(pixels), atol=1e-12)
    if int(np.sqrt(side_sq)) ** 2 == side_sq:
        s = encode_patch(Patch(pixels, int(np.sqrt(side_sq))))
        for j, p in enumerate(pixels):
            assert abs(expectation_z(s, j) - np.cos(np.pi * p)) <= 1e-10


def test_encoding_deterministic():
    p = Patch(np.random.default_rng(0).random(4), 2)
    assert encode_patch(p).amplitudes.tobytes() == encode_patch(p).amplitudes.tobytes()
