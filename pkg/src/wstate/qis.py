"""Quantum information splitting over a perfect W channel.

Qubit roles: q0 message, q1 Alice, q2 Bob (receiver), q3 Charlie
(controller). The channel on q1 q2 q3 is ``(|001> + |010> + sqrt(2)|100>)/2``,
i.e. ``(|0>|A> + |1>|B>)/sqrt(2)`` with ``|A> = (|01> + |10>)/sqrt(2)`` and
``|B> = |00>`` on Bob and Charlie. Once Alice Bell-measures q0 q1, the
receiver unitary maps ``|A> -> |0>_B|0>_C`` and ``|B> -> |1>_B|0>_C``, leaving
a teleportation-style Pauli frame on Bob's qubit.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import statevec as sv
from .circuit import Circuit, final_state, perfect_w_circuit, run_batch
from .noise import NoiseModel
from .rng import Seed, stream
from .statevec import StateVector

MESSAGE, ALICE, BOB, CHARLIE = 0, 1, 2, 3

# perfect-W qubit k -> protocol qubit; puts the sqrt(2) weight on Alice's qubit
CHANNEL_QUBITS = (CHARLIE, BOB, ALICE)

_S2 = 1 / math.sqrt(2)


@dataclass(frozen=True)
class MessageState:
    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1) > 1e-10:
            raise ValueError(f"message is not normalized (|a|^2+|b|^2 = {norm:.12g})")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    def density_matrix(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    def prep_circuit(self) -> Circuit:
        """U3 preparing this message from |0> (up to global phase)."""
        theta = 2 * math.atan2(abs(self.beta), abs(self.alpha))
        phi = cmath.phase(self.beta) - cmath.phase(self.alpha) if abs(self.beta) > 0 else 0.0
        return Circuit(1).u3(theta, phi, 0.0, 0)

    @classmethod
    def from_circuit(cls, circuit: Circuit) -> "MessageState":
        psi = final_state(circuit)
        return cls(complex(psi.data[0]), complex(psi.data[1]))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "MessageState":
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        return cls(complex(v[0]), complex(v[1]))


@dataclass(frozen=True)
class BellOutcome:
    """Alice's bits: ``b_z`` from the message qubit, ``b_x`` from her channel qubit."""

    b_z: int
    b_x: int

    def __post_init__(self):
        if self.b_z not in (0, 1) or self.b_x not in (0, 1):
            raise ValueError("Bell outcome bits must be 0 or 1")

    @classmethod
    def parse(cls, text: str) -> "BellOutcome":
        if len(text) != 2 or set(text) - {"0", "1"}:
            raise ValueError(f"outcome must be two bits like '01', got {text!r}")
        return cls(int(text[0]), int(text[1]))

    def __str__(self) -> str:
        return f"{self.b_z}{self.b_x}"


ALL_OUTCOMES = tuple(BellOutcome(z, x) for z in (0, 1) for x in (0, 1))


@dataclass
class ProtocolResult:
    outcome: BellOutcome | None
    bob_state: np.ndarray
    charlie_bit_prob_zero: float
    fidelity: float
    outcome_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "outcome": None if self.outcome is None else [self.outcome.b_z, self.outcome.b_x],
            "bob_rho": sv.density_to_json(self.bob_state),
            "fidelity": self.fidelity,
            "charlie_p0": self.charlie_bit_prob_zero,
            "outcome_counts": dict(sorted(self.outcome_counts.items())),
        }


def channel_state() -> StateVector:
    amps = np.zeros(8, dtype=complex)
    amps[0b001] = amps[0b010] = 0.5
    amps[0b100] = _S2
    return StateVector(amps)


def joint_state(msg: MessageState) -> StateVector:
    """Message on q0 tensored with the channel on q1 q2 q3."""
    return StateVector(np.kron(msg.vector, channel_state().data))


def bell_measurement(
    state: StateVector,
    qa: int,
    qb: int,
    rng: np.random.Generator | None = None,
    force: BellOutcome | None = None,
) -> tuple[BellOutcome, StateVector]:
    """CNOT(qa -> qb), H(qa), then measure qa (``b_z``) and qb (``b_x``).

    With ``force`` the state is projected onto that outcome instead of
    sampling; a zero-probability outcome raises ``ValueError``.
    """
    if qa == qb:
        raise ValueError("Bell measurement needs two distinct qubits")
    if force is None and rng is None:
        raise ValueError("need an rng unless the outcome is forced")
    state = sv.apply_gate(state, sv.GATES["cx"], [qa, qb])
    state = sv.apply_gate(state, sv.GATES["h"], [qa])
    bits = []
    for q, forced in ((qa, None if force is None else force.b_z), (qb, None if force is None else force.b_x)):
        if forced is None:
            bit, state = sv.measure_qubit(state, q, rng)
        else:
            state = StateVector(sv.collapse(state.data[None, :], q, state.n_qubits, np.array([forced]))[0])
            bit = forced
        bits.append(bit)
    return BellOutcome(*bits), state


def receiver_unitary() -> np.ndarray:
    """Two-qubit gate on (Bob, Charlie), Bob the more significant bit.

    Columns: ``|00> -> |10>``, ``|01> -> (|00>+|11>)/sqrt2``,
    ``|10> -> (|00>-|11>)/sqrt2``, ``|11> -> |01>``. Equivalently the
    triplet ``(|01>+|10>)/sqrt2`` goes to ``|00>`` and the singlet to ``|11>``;
    the singlet and ``|11>`` columns are never populated without noise.
    """
    return np.array(
        [
            [0, _S2, _S2, 0],
            [0, 0, 0, 1],
            [1, 0, 0, 0],
            [0, _S2, -_S2, 0],
        ],
        dtype=complex,
    )


# Bob's Pauli frame per outcome is X**b_x Z**b_z applied to the message;
# X (conditioned on b_x) is undone first, then Z (conditioned on b_z).
CORRECTIONS: dict[BellOutcome, tuple[str, ...]] = {
    BellOutcome(0, 0): (),
    BellOutcome(0, 1): ("x",),
    BellOutcome(1, 0): ("z",),
    BellOutcome(1, 1): ("x", "z"),
}


def correction_for(outcome: BellOutcome) -> tuple[str, ...]:
    """Gates (in order) Bob applies to his qubit for ``outcome``."""
    return CORRECTIONS[outcome]


def apply_correction(state: StateVector, gates: Sequence[str], qubit: int = BOB) -> StateVector:
    for g in gates:
        state = sv.apply_gate(state, sv.GATES[g], [qubit])
    return state


def splitting_circuit(message: Circuit | MessageState | None = None) -> Circuit:
    """Whole protocol as one circuit with two classical bits.

    clbit 0 holds ``b_z`` (q0), clbit 1 holds ``b_x`` (q1); Bob's X is
    conditioned on clbit 1 and his Z on clbit 0.
    """
    if isinstance(message, MessageState):
        message = message.prep_circuit()
    c = Circuit(4, 2)
    c = c.compose(perfect_w_circuit(), qubits=CHANNEL_QUBITS)
    if message is not None:
        if message.n_qubits != 1 or message.has_measurements:
            raise ValueError("message preparation must be a 1-qubit gate circuit")
        c = c.compose(message, qubits=[MESSAGE])
    c.cx(MESSAGE, ALICE).h(MESSAGE)
    c.measure([MESSAGE, ALICE], [0, 1])
    c.unitary(receiver_unitary(), [BOB, CHARLIE], label="receiver")
    c.x(BOB, c_if=(1, 1))
    c.z(BOB, c_if=(0, 1))
    return c


def _charlie_p0(states: np.ndarray) -> float:
    return float(1 - np.mean(sv._marginal_one(states, CHARLIE, 4)))


def run_protocol(
    message: MessageState | Circuit,
    seed: Seed = 0,
    noise: NoiseModel | None = None,
    force_outcome: BellOutcome | None = None,
    trajectories: int | None = None,
) -> ProtocolResult:
    """Execute the splitting circuit and score Bob's qubit against the message.

    Noiseless runs use one trajectory. With noise, Bob's state is the
    average over ``trajectories`` (default 4096) noisy shots, and
    ``outcome`` is ``None`` unless every shot saw the same Bell outcome.
    """
    if isinstance(message, Circuit):
        prep = message
        msg = MessageState.from_circuit(message)
    else:
        msg = message
        prep = message.prep_circuit()
    noisy = noise is not None and not noise.is_zero
    shots = trajectories if trajectories is not None else (4096 if noisy else 1)
    circ = splitting_circuit(prep)
    post = None if force_outcome is None else {0: force_outcome.b_z, 1: force_outcome.b_x}
    states, bits = run_batch(circ, shots, seed, noise, postselect=post)
    bob = sv.batch_reduced(states, BOB, 4)
    keys = [f"{z}{x}" for z, x in bits]
    counts = {k: keys.count(k) for k in sorted(set(keys))}
    outcome = BellOutcome.parse(keys[0]) if len(counts) == 1 else None
    return ProtocolResult(outcome, bob, _charlie_p0(states), sv.fidelity(msg.vector, bob), counts)


def run_protocol_stepwise(
    msg: MessageState,
    rng: np.random.Generator | None = None,
    force: BellOutcome | None = None,
    corrections: dict[BellOutcome, tuple[str, ...]] | None = None,
) -> tuple[BellOutcome, StateVector]:
    """Same protocol driven gate by gate on a single state (noiseless).

    ``corrections`` overrides the table, for negative controls.
    """
    table = CORRECTIONS if corrections is None else corrections
    outcome, state = bell_measurement(joint_state(msg), MESSAGE, ALICE, rng, force)
    state = sv.apply_gate(state, receiver_unitary(), [BOB, CHARLIE])
    return outcome, apply_correction(state, table[outcome])


def message_from_seed(seed: Seed) -> MessageState:
    return MessageState.random(stream(seed, "message"))
