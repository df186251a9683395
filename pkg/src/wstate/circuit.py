"""Circuit IR, state builders, and the shot-by-shot executor.

A :class:`Circuit` is an ordered list of :class:`Operation` over ``n_qubits``
qubits and ``n_clbits`` classical bits. Execution is trajectory based: each
shot is an independent pure state, measurements collapse it and write
classical bits, and classically conditioned gates read those bits at run
time. Shots are simulated together as rows of one ``(shots, 2**n)`` array.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import statevec as sv
from .noise import NoiseModel, flip_readout, insert_pauli_errors
from .rng import Seed, stream
from .statevec import GATES, StateVector

ONE_QUBIT = {"x", "y", "z", "h", "s", "sdg", "t", "tdg", "u3"}
TWO_QUBIT = {"cx", "cz"}
GATE_NAMES = ONE_QUBIT | TWO_QUBIT | {"unitary"}
NON_GATES = {"measure", "reset"}
MAX_BATCH_AMPLITUDES = 2**24


@dataclass(frozen=True, eq=False)
class Operation:
    name: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()
    clbits: tuple[int, ...] = ()
    condition: tuple[int, int] | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)
    label: str | None = None

    def __post_init__(self):
        if self.name not in GATE_NAMES | NON_GATES:
            raise ValueError(f"unknown operation {self.name!r}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{self.name}: duplicate targets {self.targets}")
        if self.name == "measure" and len(self.clbits) != len(self.targets):
            raise ValueError("measure needs one classical bit per target")
        if self.name in ONE_QUBIT and len(self.targets) != 1:
            raise ValueError(f"{self.name} acts on exactly one qubit")
        if self.name in TWO_QUBIT and len(self.targets) != 2:
            raise ValueError(f"{self.name} acts on exactly two qubits")
        if self.name == "u3" and len(self.params) != 3:
            raise ValueError("u3 takes three angles")
        if self.name == "unitary":
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (2 ** len(self.targets),) * 2:
                raise ValueError(f"unitary shape {m.shape} does not fit {len(self.targets)} target(s)")
            if not sv.is_unitary(m):
                raise ValueError("custom gate matrix is not unitary")
            object.__setattr__(self, "matrix", m)
        if self.condition is not None:
            clbit, value = self.condition
            if value not in (0, 1):
                raise ValueError("condition value must be 0 or 1")
            object.__setattr__(self, "condition", (int(clbit), int(value)))

    @property
    def is_gate(self) -> bool:
        return self.name in GATE_NAMES

    def gate_matrix(self) -> np.ndarray:
        if self.name == "u3":
            return sv.u3_matrix(*self.params)
        if self.name == "unitary":
            return self.matrix
        return GATES[self.name]

    def remap(self, qubits: Sequence[int], clbits: Sequence[int]) -> "Operation":
        cond = None
        if self.condition is not None:
            cond = (clbits[self.condition[0]], self.condition[1])
        return Operation(
            self.name,
            tuple(qubits[t] for t in self.targets),
            self.params,
            tuple(clbits[c] for c in self.clbits),
            cond,
            self.matrix,
            self.label,
        )

    def to_dict(self) -> dict:
        d: dict = {"gate": self.name, "targets": list(self.targets)}
        if self.params:
            d["params"] = [float(p) for p in self.params]
        if self.clbits:
            d["clbits"] = list(self.clbits)
        if self.condition is not None:
            d["condition"] = list(self.condition)
        if self.matrix is not None:
            d["matrix"] = sv.density_to_json(self.matrix)
        if self.label:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Operation":
        matrix = sv.density_from_json(d["matrix"]) if "matrix" in d else None
        cond = tuple(d["condition"]) if d.get("condition") is not None else None
        return cls(
            d["gate"],
            tuple(int(t) for t in d["targets"]),
            tuple(float(p) for p in d.get("params", ())),
            tuple(int(c) for c in d.get("clbits", ())),
            cond,
            matrix,
            d.get("label"),
        )


class Circuit:
    """Ordered operations over qubits and classical bits.

    Gate methods append and return ``self`` so builders can chain. Pass
    ``c_if=(clbit, value)`` to condition a gate on a classical bit.
    """

    def __init__(self, n_qubits: int, n_clbits: int = 0, ops: Sequence[Operation] = ()):
        if not 1 <= n_qubits <= sv.MAX_QUBITS:
            raise ValueError(f"qubit count must be in [1, {sv.MAX_QUBITS}]")
        if n_clbits < 0:
            raise ValueError("classical bit count must be >= 0")
        self.n_qubits = n_qubits
        self.n_clbits = n_clbits
        self.ops: list[Operation] = []
        for op in ops:
            self.append(op)

    def __repr__(self) -> str:
        return f"Circuit(n_qubits={self.n_qubits}, n_clbits={self.n_clbits}, ops={len(self.ops)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Circuit) and self.to_dict() == other.to_dict()

    def __len__(self) -> int:
        return len(self.ops)

    def append(self, op: Operation) -> "Circuit":
        for t in op.targets:
            if not 0 <= t < self.n_qubits:
                raise IndexError(f"{op.name}: qubit {t} out of range for {self.n_qubits} qubits")
        used = list(op.clbits) + ([op.condition[0]] if op.condition else [])
        for c in used:
            if not 0 <= c < self.n_clbits:
                raise IndexError(f"{op.name}: clbit {c} out of range for {self.n_clbits} clbits")
        self.ops.append(op)
        return self

    def _gate(self, name, targets, params=(), c_if=None, **kw) -> "Circuit":
        return self.append(Operation(name, tuple(targets), tuple(params), condition=c_if, **kw))

    def x(self, q, c_if=None):
        return self._gate("x", [q], c_if=c_if)

    def y(self, q, c_if=None):
        return self._gate("y", [q], c_if=c_if)

    def z(self, q, c_if=None):
        return self._gate("z", [q], c_if=c_if)

    def h(self, q, c_if=None):
        return self._gate("h", [q], c_if=c_if)

    def s(self, q, c_if=None):
        return self._gate("s", [q], c_if=c_if)

    def sdg(self, q, c_if=None):
        return self._gate("sdg", [q], c_if=c_if)

    def t(self, q, c_if=None):
        return self._gate("t", [q], c_if=c_if)

    def tdg(self, q, c_if=None):
        return self._gate("tdg", [q], c_if=c_if)

    def u3(self, theta, phi, lam, q, c_if=None):
        return self._gate("u3", [q], (theta, phi, lam), c_if=c_if)

    def cx(self, control, target, c_if=None):
        return self._gate("cx", [control, target], c_if=c_if)

    def cz(self, a, b, c_if=None):
        return self._gate("cz", [a, b], c_if=c_if)

    def unitary(self, matrix, targets, label=None, c_if=None):
        return self._gate("unitary", targets, c_if=c_if, matrix=matrix, label=label)

    def measure(self, qubits, clbits) -> "Circuit":
        if isinstance(qubits, int):
            qubits, clbits = [qubits], [clbits]
        return self.append(Operation("measure", tuple(qubits), clbits=tuple(clbits)))

    def measure_all(self) -> "Circuit":
        """Measure qubit k into clbit k, growing the register if needed."""
        self.n_clbits = max(self.n_clbits, self.n_qubits)
        return self.measure(list(range(self.n_qubits)), list(range(self.n_qubits)))

    def reset(self, q) -> "Circuit":
        return self.append(Operation("reset", (q,)))

    def copy(self) -> "Circuit":
        return Circuit(self.n_qubits, self.n_clbits, self.ops)

    def compose(self, other: "Circuit", qubits: Sequence[int] | None = None, clbits: Sequence[int] | None = None) -> "Circuit":
        """New circuit with ``other`` appended, its qubit k mapped to ``qubits[k]``."""
        qubits = list(range(other.n_qubits)) if qubits is None else list(qubits)
        clbits = list(range(other.n_clbits)) if clbits is None else list(clbits)
        if len(qubits) != other.n_qubits or len(clbits) != other.n_clbits:
            raise ValueError("qubit/clbit map does not match the appended circuit")
        out = self.copy()
        for op in other.ops:
            out.append(op.remap(qubits, clbits))
        return out

    def gate_count(self) -> int:
        return sum(op.is_gate for op in self.ops)

    @property
    def has_measurements(self) -> bool:
        return any(op.name == "measure" for op in self.ops)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_clbits": self.n_clbits,
            "ops": [op.to_dict() for op in self.ops],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Circuit":
        return cls(int(d["n_qubits"]), int(d.get("n_clbits", 0)), [Operation.from_dict(o) for o in d["ops"]])

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


# -- builders ---------------------------------------------------------------

def perfect_w_circuit() -> Circuit:
    """Three-qubit circuit for ``(|100> + |010> + sqrt(2)|001>) / 2``.

    q0 takes amplitude 1/2 on |1>; q1 is rotated only when q0 is |0>
    (an anti-controlled RY built from two CNOTs); q2 ends up as
    NOT(q0 OR q1), which is safe because q0 and q1 are never both 1.
    """
    split = 2 * math.asin(1 / math.sqrt(3))
    c = Circuit(3)
    c.u3(math.pi / 3, 0, 0, 0)
    c.u3(split / 2, 0, 0, 1)
    c.cx(0, 1)
    c.u3(split / 2, 0, 0, 1)
    c.cx(0, 1)
    c.x(2)
    c.cx(0, 2)
    c.cx(1, 2)
    return c


def general_w_state(s: float, phi1: float = 0.0, phi2: float = 0.0) -> StateVector:
    if s < 0 or not math.isfinite(s):
        raise ValueError("s must be a finite non-negative real")
    amps = np.zeros(8, dtype=complex)
    amps[0b100] = 1
    amps[0b010] = math.sqrt(s) * np.exp(1j * phi1)
    amps[0b001] = math.sqrt(s + 1) * np.exp(1j * phi2)
    return StateVector(amps / math.sqrt(2 + 2 * s))


def perfect_w_state() -> StateVector:
    return general_w_state(1.0)


def maximal_w_state(n: int) -> StateVector:
    if n < 2:
        raise ValueError("a W state needs at least two qubits")
    if n > sv.MAX_QUBITS:
        raise ValueError(f"at most {sv.MAX_QUBITS} qubits")
    amps = np.zeros(2**n, dtype=complex)
    amps[[1 << k for k in range(n)]] = 1 / math.sqrt(n)
    return StateVector(amps)


def message_prep_circuit() -> Circuit:
    """U3(pi/3, 0, 0), T-dagger, S-dagger, H on a single qubit."""
    return Circuit(1).u3(math.pi / 3, 0, 0, 0).tdg(0).sdg(0).h(0)


# -- execution --------------------------------------------------------------

class _Uniforms:
    """Per-slot uniform draws, shot ``i`` reading element ``i``."""

    def __init__(self, seed: Seed, shots: int):
        self.seed = seed
        self.shots = shots
        self._cache: dict[tuple, np.ndarray] = {}

    def __call__(self, *key) -> np.ndarray:
        if key not in self._cache:
            self._cache[key] = stream(self.seed, *key).random(self.shots)
        return self._cache[key]


def _active_model(noise: NoiseModel | None) -> NoiseModel | None:
    return None if noise is None or noise.is_zero else noise


def run_batch(
    circuit: Circuit,
    shots: int,
    seed: Seed = 0,
    noise: NoiseModel | None = None,
    initial: StateVector | None = None,
    postselect: Mapping[int, int] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Execute ``shots`` independent trajectories.

    Returns final states ``(shots, 2**n)`` and recorded classical bits
    ``(shots, n_clbits)``. ``postselect`` forces measurement outcomes by
    clbit index (projection plus renormalization, no sampling).
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = circuit.n_qubits
    start = sv.zero_state(n) if initial is None else initial
    if start.n_qubits != n:
        raise ValueError("initial state size does not match circuit")
    noise = _active_model(noise)
    postselect = dict(postselect or {})
    uni = _Uniforms(seed, shots)

    chunk = max(1, MAX_BATCH_AMPLITUDES // 2**n)
    states_out, bits_out = [], []
    for lo in range(0, shots, chunk):
        sl = slice(lo, min(shots, lo + chunk))
        b = sl.stop - sl.start
        states = np.repeat(start.data[None, :], b, axis=0)
        bits = np.zeros((b, circuit.n_clbits), dtype=np.int8)
        for i, op in enumerate(circuit.ops):
            active = None
            if op.condition is not None:
                active = bits[:, op.condition[0]] == op.condition[1]
                if not active.any():
                    continue
            if op.is_gate:
                m = op.gate_matrix()
                if active is None:
                    states = sv.apply_matrix(states, m, op.targets, n)
                else:
                    states[active] = sv.apply_matrix(states[active], m, op.targets, n)
                if noise is not None:
                    p = noise.gate_error(len(op.targets))
                    if p > 0:
                        states = insert_pauli_errors(
                            states, op.targets, n, p, uni(i, "event")[sl], uni(i, "pauli")[sl], active
                        )
            elif op.name == "measure":
                for j, (q, c) in enumerate(zip(op.targets, op.clbits)):
                    if c in postselect:
                        outcome = np.full(b, postselect[c], dtype=np.int8)
                    else:
                        p1 = sv._marginal_one(states, q, n)
                        outcome = (uni(i, "measure", j)[sl] < p1).astype(np.int8)
                    states = sv.collapse(states, q, n, outcome)
                    if noise is not None:
                        outcome = flip_readout(outcome, noise, uni(i, "readout", j)[sl]).astype(np.int8)
                    bits[:, c] = outcome
            elif op.name == "reset":
                q = op.targets[0]
                p1 = sv._marginal_one(states, q, n)
                outcome = (uni(i, "reset")[sl] < p1).astype(np.int8)
                states = sv.collapse(states, q, n, outcome)
                ones = outcome.astype(bool)
                if ones.any():
                    states[ones] = sv.apply_matrix(states[ones], GATES["x"], (q,), n)
        states_out.append(states)
        bits_out.append(bits)
    return np.concatenate(states_out), np.concatenate(bits_out)


def run(
    circuit: Circuit,
    seed: Seed = 0,
    noise: NoiseModel | None = None,
    initial: StateVector | None = None,
    postselect: Mapping[int, int] | None = None,
) -> tuple[StateVector, list[int]]:
    """Single trajectory: final state and classical record."""
    states, bits = run_batch(circuit, 1, seed, noise, initial, postselect)
    return StateVector(states[0]), [int(b) for b in bits[0]]


def final_state(circuit: Circuit, initial: StateVector | None = None) -> StateVector:
    """Noiseless output of a measurement-free circuit."""
    if any(not op.is_gate or op.condition is not None for op in circuit.ops):
        raise ValueError("final_state needs a circuit of unconditioned gates only")
    return run(circuit, initial=initial)[0]


def _terminal_split(circuit: Circuit) -> tuple[Circuit, list[tuple[int, int]]] | None:
    """Split into a gate-only prefix and trailing measurements, if possible."""
    body = Circuit(circuit.n_qubits)
    measures: list[tuple[int, int]] = []
    for op in circuit.ops:
        if op.name == "measure":
            measures.extend(zip(op.targets, op.clbits))
        elif measures or not op.is_gate or op.condition is not None:
            return None
        else:
            body.append(op)
    return body, measures


def sample_circuit(circuit: Circuit, shots: int, seed: Seed = 0, noise: NoiseModel | None = None) -> dict[str, int]:
    """Counts over the classical register, keyed by bitstring (clbit 0 first).

    A circuit without measurements is measured in full at the end.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not circuit.has_measurements:
        circuit = circuit.copy().measure_all()
    noise = _active_model(noise)
    split = _terminal_split(circuit) if noise is None else None
    if split is not None:
        # one state, joint sampling: no per-shot copies of the state vector
        body, measures = split
        psi = final_state(body)
        probs = np.abs(psi.data) ** 2
        u = stream(seed, "terminal").random(shots)
        idx = sv.sample_indices(probs, u)
        n = circuit.n_qubits
        bits = np.zeros((shots, circuit.n_clbits), dtype=np.int8)
        for q, c in measures:
            bits[:, c] = (idx >> (n - 1 - q)) & 1
    else:
        _, bits = run_batch(circuit, shots, seed, noise)
    return counts_from_bits(bits)


def counts_from_bits(bits: np.ndarray) -> dict[str, int]:
    m = bits.shape[1]
    weights = 1 << np.arange(m - 1, -1, -1)
    idx = bits.astype(np.int64) @ weights if m else np.zeros(bits.shape[0], dtype=np.int64)
    return sv.counts_from_indices(idx, m) if m else {"": int(bits.shape[0])}
