import itertools
import math

import numpy as np
import pytest

from wstate import statevec as sv

ACCEPTANCE_LINES: list[str] = []

_P = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
}


def dense_pauli(label):
    """Kron product built from scratch (independent of the bit kernel)."""
    m = np.array([[1.0 + 0j]])
    for ch in label:
        m = np.kron(m, _P[ch])
    return m


def dense_operator(gate, targets, n):
    """Full 2**n matrix of ``gate`` on ``targets`` by explicit index loops."""
    gate = np.asarray(gate, dtype=complex)
    k = len(targets)
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = sum(bits[t] << (k - 1 - j) for j, t in enumerate(targets))
        for sub_out in range(2**k):
            new = list(bits)
            for j, t in enumerate(targets):
                new[t] = (sub_out >> (k - 1 - j)) & 1
            row = sum(b << (n - 1 - q) for q, b in enumerate(new))
            out[row, col] += gate[sub_out, sub_in]
    return out


def random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return sv.StateVector(v / np.linalg.norm(v))


def random_density(rng, n, rank=None):
    dim = 2**n
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def w_amps():
    amps = np.zeros(8, dtype=complex)
    amps[0b100] = amps[0b010] = 0.5
    amps[0b001] = 1 / math.sqrt(2)
    return amps


def all_paulis(n):
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n)]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
