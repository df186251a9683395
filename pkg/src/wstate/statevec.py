"""Dense state-vector and density-matrix kernel.

Layout convention: qubit 0 is the most significant bit of a basis index, so
``np.reshape(amps, (2,) * n)`` puts qubit ``k`` on axis ``k`` and printed
bitstrings read ``q0 q1 ... q(n-1)`` left to right.

Density matrices are plain ``(2**n, 2**n)`` complex ndarrays.
"""
from __future__ import annotations

import cmath
import math
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_QUBITS = 24
UNITARY_ATOL = 1e-10
NORM_ATOL = 1e-10
HERMITIAN_ATOL = 1e-8
NEGATIVITY_ATOL = 1e-8
SUPPORT_RTOL = 1e-12

_S2 = 1 / math.sqrt(2)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

GATES = {
    "id": PAULI["I"],
    "x": PAULI["X"],
    "y": PAULI["Y"],
    "z": PAULI["Z"],
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "s": np.diag([1, 1j]).astype(complex),
    "sdg": np.diag([1, -1j]).astype(complex),
    "t": np.diag([1, cmath.exp(1j * math.pi / 4)]),
    "tdg": np.diag([1, cmath.exp(-1j * math.pi / 4)]),
    # control is the first target, i.e. the more significant bit of the 4x4 index
    "cx": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "cz": np.diag([1, 1, 1, -1]).astype(complex),
}


class StateVector:
    """Pure state of ``n_qubits`` qubits.

    Treated as a value: kernel functions return new instances and never
    mutate their inputs.
    """

    __slots__ = ("data", "n_qubits")

    def __init__(self, data, n_qubits: int | None = None):
        data = np.asarray(data, dtype=complex).reshape(-1)
        n = int(round(math.log2(data.size))) if data.size else 0
        if data.size < 2 or 2**n != data.size:
            raise ValueError(f"amplitude count {data.size} is not a power of two >= 2")
        if n_qubits is not None and n_qubits != n:
            raise ValueError(f"expected {2**n_qubits} amplitudes, got {data.size}")
        if not np.all(np.isfinite(data)):
            raise ValueError("amplitudes must be finite")
        norm = float(np.vdot(data, data).real)
        if abs(norm - 1) > 1e-6:
            raise ValueError(f"state is not normalized (norm^2 = {norm:.6g})")
        self.data = data / math.sqrt(norm)
        self.n_qubits = n

    def __len__(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits}, data={np.round(self.data, 6)!r})"

    def copy(self) -> "StateVector":
        return StateVector(self.data.copy())

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.data, self.data.conj())

    @classmethod
    def from_label(cls, bits: str) -> "StateVector":
        """Computational basis state, e.g. ``"001"``."""
        data = np.zeros(2 ** len(bits), dtype=complex)
        data[int(bits, 2)] = 1
        return cls(data)


def zero_state(n: int) -> StateVector:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")
    data = np.zeros(2**n, dtype=complex)
    data[0] = 1
    return StateVector(data)


def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def is_unitary(matrix: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return bool(np.allclose(matrix.conj().T @ matrix, np.eye(matrix.shape[0]), atol=atol, rtol=0))


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """OpenQASM 2 ``u3``: ``Rz(phi) Ry(theta) Rz(lam)`` up to global phase."""
    if not all(math.isfinite(a) for a in (theta, phi, lam)):
        raise ValueError("u3 angles must be finite")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -cmath.exp(1j * lam) * s],
            [cmath.exp(1j * phi) * s, cmath.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def controlled(matrix: np.ndarray) -> np.ndarray:
    """Controlled version of a one-qubit gate; control is the first target."""
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = matrix
    return out


def apply_matrix(batch: np.ndarray, matrix: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply a k-qubit matrix to every row of a ``(B, 2**n)`` batch.

    ``targets[0]`` is the most significant bit of the matrix index.
    """
    k = len(targets)
    b = batch.shape[0]
    psi = batch.reshape((b,) + (2,) * n)
    axes = [1 + t for t in targets]
    psi = np.moveaxis(psi, axes, range(n + 1 - k, n + 1))
    shape = psi.shape
    psi = psi.reshape(-1, 2**k) @ matrix.T
    psi = np.moveaxis(psi.reshape(shape), range(n + 1 - k, n + 1), axes)
    return psi.reshape(b, 2**n)


def _check_targets(targets: Sequence[int], n: int, dim: int) -> None:
    if 2 ** len(targets) != dim:
        raise ValueError(f"gate of dimension {dim} cannot act on {len(targets)} qubit(s)")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target qubits {list(targets)}")
    for t in targets:
        if not 0 <= t < n:
            raise IndexError(f"qubit {t} out of range for {n} qubits")


def apply_gate(
    state: StateVector,
    gate: np.ndarray,
    targets: Sequence[int],
    condition: bool | None = None,
) -> StateVector:
    """Return ``gate`` applied to ``targets`` of ``state``.

    ``condition`` is the already-evaluated classical predicate; ``False`` makes
    this a no-op.
    """
    gate = np.asarray(gate, dtype=complex)
    targets = [int(t) for t in targets]
    _check_targets(targets, state.n_qubits, gate.shape[0])
    if condition is False:
        return state.copy()
    out = apply_matrix(state.data[None, :], gate, targets, state.n_qubits)[0]
    return StateVector(out)


def probabilities(state: StateVector, threshold: float = 0.0) -> dict[str, float]:
    """Outcome distribution keyed by bitstring (qubit 0 first)."""
    probs = np.abs(state.data) ** 2
    n = state.n_qubits
    return {bitstring(i, n): float(p) for i, p in enumerate(probs) if p > threshold}


def _marginal_one(batch: np.ndarray, q: int, n: int) -> np.ndarray:
    psi = batch.reshape(batch.shape[0], 2**q, 2, 2 ** (n - q - 1))
    return np.sum(np.abs(psi[:, :, 1, :]) ** 2, axis=(1, 2))


def collapse(batch: np.ndarray, q: int, n: int, outcomes: np.ndarray) -> np.ndarray:
    """Project each row onto its outcome for qubit ``q`` and renormalize."""
    psi = batch.reshape(batch.shape[0], 2**q, 2, 2 ** (n - q - 1)).copy()
    ones = outcomes.astype(bool)
    psi[ones, :, 0, :] = 0
    psi[~ones, :, 1, :] = 0
    psi = psi.reshape(batch.shape)
    norms = np.linalg.norm(psi, axis=1)
    if np.any(norms < 1e-12):
        raise ValueError(f"post-selected outcome on qubit {q} has zero probability")
    return psi / norms[:, None]


def measure_qubit(state: StateVector, q: int, rng: np.random.Generator) -> tuple[int, StateVector]:
    """Projective Z measurement of one qubit; returns the bit and collapsed state."""
    n = state.n_qubits
    if not 0 <= q < n:
        raise IndexError(f"qubit {q} out of range for {n} qubits")
    p1 = _marginal_one(state.data[None, :], q, n)[0]
    bit = int(rng.random() < p1)
    out = collapse(state.data[None, :], q, n, np.array([bit]))[0]
    return bit, StateVector(out)


def sample_indices(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling; one uniform per shot."""
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, uniforms, side="right"), probs.size - 1)


def counts_from_indices(indices: np.ndarray, n: int) -> dict[str, int]:
    values, freq = np.unique(indices, return_counts=True)
    return {bitstring(int(v), n): int(c) for v, c in zip(values, freq)}


def sample_counts(source, shots: int, seed: int | Sequence[int] = 0, noise=None) -> dict[str, int]:
    """Sample ``shots`` computational-basis outcomes.

    ``source`` is a :class:`StateVector` (all qubits measured) or a
    :class:`~wstate.circuit.Circuit`, executed shot by shot.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if isinstance(source, StateVector):
        if noise is not None:
            raise ValueError("noise requires a circuit, not a bare state")
        from .rng import stream

        u = stream(seed, "final-sample").random(shots)
        idx = sample_indices(np.abs(source.data) ** 2, u)
        return counts_from_indices(idx, source.n_qubits)
    from .circuit import sample_circuit

    return sample_circuit(source, shots, seed, noise=noise)


def pauli_masks(label: str) -> tuple[int, int, int]:
    """Bit masks (x, z) and Y count of a Pauli label."""
    n = len(label)
    x_mask = z_mask = 0
    for k, ch in enumerate(label.upper()):
        bit = 1 << (n - 1 - k)
        if ch in "XY":
            x_mask |= bit
        if ch in "ZY":
            z_mask |= bit
        if ch not in "IXYZ":
            raise ValueError(f"invalid Pauli label {label!r}")
    return x_mask, z_mask, label.upper().count("Y")


def _popcount(values: np.ndarray) -> np.ndarray:
    # uint64 SWAR popcount
    v = values.astype(np.uint64)
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return ((v * np.uint64(0x0101010101010101)) >> np.uint64(56)).astype(np.int64)


def parity_signs(n: int, mask: int) -> np.ndarray:
    """``(-1)**popcount(i & mask)`` for every basis index ``i``."""
    idx = np.arange(2**n, dtype=np.uint64)
    return 1 - 2 * (_popcount(idx & np.uint64(mask)) & 1)


def expectation(state: StateVector, pauli: str) -> float:
    """``<psi|P|psi>`` via bit masks: ``P|i> = i**nY (-1)**|i&z| |i^x>``."""
    n = state.n_qubits
    if len(pauli) != n:
        raise ValueError(f"Pauli string of length {len(pauli)} for {n} qubits")
    x_mask, z_mask, n_y = pauli_masks(pauli)
    psi = state.data
    idx = np.arange(2**n)
    phase = (1j) ** n_y * parity_signs(n, z_mask)
    val = np.vdot(psi[idx ^ x_mask], phase * psi)
    return float(val.real)


def pauli_matrix(label: str) -> np.ndarray:
    """Dense ``kron`` of single-qubit Paulis, qubit 0 leftmost."""
    return reduce(np.kron, (PAULI[c] for c in label.upper()))


def partial_trace(state, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on ``keep`` (kept in ascending qubit order)."""
    if isinstance(state, StateVector):
        rho = None
        n = state.n_qubits
    else:
        rho = np.asarray(state, dtype=complex)
        n = int(round(math.log2(rho.shape[0])))
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep set must be non-empty")
    for k in keep:
        if not 0 <= k < n:
            raise IndexError(f"qubit {k} out of range for {n} qubits")
    drop = [q for q in range(n) if q not in keep]
    dk = 2 ** len(keep)
    if rho is None:
        psi = np.moveaxis(state.data.reshape((2,) * n), keep, range(len(keep)))
        m = psi.reshape(dk, -1)
        return m @ m.conj().T
    t = rho.reshape((2,) * (2 * n))
    t = np.moveaxis(t, keep + drop + [n + q for q in keep] + [n + q for q in drop], range(2 * n))
    dd = 2 ** len(drop)
    t = t.reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def batch_reduced(states: np.ndarray, q: int, n: int) -> np.ndarray:
    """Shot-averaged one-qubit reduced density matrix of a ``(B, 2**n)`` batch."""
    psi = np.moveaxis(states.reshape((states.shape[0],) + (2,) * n), 1 + q, 1)
    psi = psi.reshape(states.shape[0], 2, -1)
    return np.einsum("bir,bjr->ij", psi, psi.conj()) / states.shape[0]


def as_density(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return x.density_matrix()
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return arr


def is_hermitian(rho: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    return bool(np.allclose(rho, rho.conj().T, atol=atol, rtol=0))


def psd_sqrt(rho: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix, clipping negative eigenvalues."""
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    if w.min() < -NEGATIVITY_ATOL:
        raise ValueError(f"matrix is far from positive semidefinite (min eigenvalue {w.min():.3g})")
    w = np.clip(w, 0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def _pure_vector(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray | None:
    """Dominant eigenvector when ``rho`` is numerically rank one."""
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    if w[-1] > 1 - tol and np.all(np.abs(w[:-1]) < tol):
        return v[:, -1]
    return None


def fidelity(rho_t, rho_e) -> float:
    """Uhlmann fidelity ``|Tr sqrt(sqrt(rho_t) rho_e sqrt(rho_t))|**2``.

    Accepts density matrices, state vectors, or :class:`StateVector`. If
    either side is pure this reduces to the overlap ``<psi|rho|psi>``, which
    is used directly to avoid square roots of round-off eigenvalues.
    """
    a, b = as_density(rho_t), as_density(rho_e)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not (is_hermitian(a) and is_hermitian(b)):
        raise ValueError("fidelity inputs must be Hermitian")
    for pure, other in ((a, b), (b, a)):
        vec = _pure_vector(pure)
        if vec is not None:
            return float(np.vdot(vec, other @ vec).real)
    # work on the support of the lower-rank argument (fidelity is symmetric)
    # so round-off null directions never reach a square root
    spectra = []
    for m in (a, b):
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        if w.min() < -NEGATIVITY_ATOL:
            raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3g})")
        keep = w > SUPPORT_RTOL * w.max()
        spectra.append((int(keep.sum()), w[keep], v[:, keep]))
    (ra, wa, va), (rb, wb, vb) = spectra
    if rb < ra:
        wa, va, b = wb, vb, a
    half = va * np.sqrt(wa)
    inner = half.conj().T @ b @ half
    mu = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(np.sum(np.sqrt(np.clip(mu, 0, None))) ** 2)


def trace_distance(a, b) -> float:
    w = np.linalg.eigvalsh(as_density(a) - as_density(b))
    return float(0.5 * np.sum(np.abs(w)))


def density_to_json(rho: np.ndarray) -> list:
    """Row-major nested list of ``[re, im]`` pairs."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(rho)]


def density_from_json(rows: Sequence) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("density matrix JSON must be an N x N array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def normalize_counts(counts: Mapping[str, float]) -> dict[str, float]:
    total = float(sum(counts.values()))
    if total <= 0:
        raise ValueError("counts are empty")
    return {k: v / total for k, v in counts.items()}
