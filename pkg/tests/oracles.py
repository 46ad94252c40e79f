"""Independent reference implementations used only by the tests.

None of these import the package's simulation code paths; they rebuild the
math from scratch (Kronecker products, brute-force counting, finite
differences, geometric overlap).
"""
from itertools import product

import numpy as np

I2 = np.eye(2)
X = np.array([[0.0, 1.0], [1.0, 0.0]])
P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])
Z = np.diag([1.0, -1.0])


def ry_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def embed(ops, n):
    """Kronecker product with qubit 0 as the rightmost (least significant) factor."""
    out = np.array([[1.0]])
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def gate_matrix(kind, qubits, angle, n):
    if kind == "RY":
        return embed({qubits[0]: ry_matrix(angle)}, n)
    c, t = qubits
    return embed({c: P0}, n) + embed({c: P1, t: X}, n)


def dense_unitary(gates, n):
    """``gates``: iterable of (kind, qubits, angle)."""
    u = np.eye(2**n, dtype=complex)
    for kind, qubits, angle in gates:
        u = gate_matrix(kind, qubits, angle, n) @ u
    return u


def seq_as_tuples(seq, params):
    out = []
    for g in seq.gates:
        if g.kind == "CNOT":
            out.append(("CNOT", g.qubits, None))
        else:
            out.append(("RY", g.qubits, g.angle if g.slot is None else params[g.slot]))
    return out


def z_expectation(psi, qubit, n):
    zop = embed({qubit: Z}, n)
    return float(np.real(np.conj(psi) @ zop @ psi))


def product_state(pixels):
    psi = np.array([1.0])
    for p in reversed(pixels):
        psi = np.kron(psi, [np.cos(np.pi * p / 2), np.sin(np.pi * p / 2)])
    return psi


def central_diff(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (f(xp) - f(xm)) / (2 * h)
    return g


def auc_pairs(scores, labels):
    """Brute-force pairwise AUC as an exact fraction (numerator, denominator)."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    twice = 0
    for a, b in product(pos, neg):
        twice += 2 if a > b else (1 if a == b else 0)
    return twice, 2 * len(pos) * len(neg)


def area_downscale(img, out_h, out_w):
    """Area-average resampling by explicit rectangle intersection per (output, source) pixel pair."""
    img = np.asarray(img, dtype=float)
    in_h, in_w = img.shape
    sy, sx = in_h / out_h, in_w / out_w
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        for j in range(out_w):
            y0, y1, x0, x1 = i * sy, (i + 1) * sy, j * sx, (j + 1) * sx
            acc = 0.0
            for r in range(in_h):
                for c in range(in_w):
                    oy = max(0.0, min(y1, r + 1) - max(y0, r))
                    ox = max(0.0, min(x1, c + 1) - max(x0, c))
                    acc += oy * ox * img[r, c]
            out[i, j] = acc / (sy * sx)
    return out


def mera_block_count(n):
    """Count blocks by walking the level structure: interior disentanglers then isometries."""
    m, blocks = n, 0
    while m > 1:
        blocks += max(0, (m - 2) // 2)  # pairs (a1,a2), (a3,a4), ..., (a_{m-3}, a_{m-2})
        blocks += m // 2
        m //= 2
    return blocks
