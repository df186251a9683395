"""Three-party Mermin inequality ``|E(ABC) - E(AB'C') - E(A'B'C) - E(A'BC')| <= 2``.

Unprimed observables are Z, primed ones X.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import statevec as sv
from ._parallel import map_ordered
from .circuit import Circuit, counts_from_bits, run_batch
from .noise import NoiseModel
from .rng import Seed, derive
from .tomo import TomographyDataset, basis_rotation

CLASSICAL_BOUND = 2.0

# term name -> measurement axes on (A, B, C)
SETTINGS = {
    "ABC": "ZZZ",
    "AB'C'": "ZXX",
    "A'B'C": "XXZ",
    "A'BC'": "XZX",
}


def expectation_from_counts(counts: Mapping[str, float]) -> float:
    """Parity expectation ``sum_b (-1)**popcount(b) p(b)``.

    Integer counts are normalized to frequencies. Float values are taken as
    already-normalized probabilities (rounded tables may sum to 1 +- 0.01).
    """
    if not counts:
        raise ValueError("empty counts")
    widths = {len(k) for k in counts}
    if len(widths) != 1 or any(set(k) - {"0", "1"} for k in counts):
        raise ValueError(f"malformed outcome keys: {sorted(counts)[:4]}")
    values = list(counts.values())
    if all(isinstance(v, (int, np.integer)) for v in values):
        total = sum(values)
        if total <= 0:
            raise ValueError("counts sum to zero")
        probs = {k: v / total for k, v in counts.items()}
    else:
        total = float(sum(values))
        if abs(total - 1) > 0.01:
            raise ValueError(f"probabilities sum to {total:.4f}, not 1")
        probs = {k: float(v) for k, v in counts.items()}
    return float(sum((-1) ** k.count("1") * p for k, p in probs.items()))


def mermin_value(e_abc: float, e_abpcp: float, e_apbpc: float, e_apbcp: float) -> float:
    for e in (e_abc, e_abpcp, e_apbpc, e_apbcp):
        if not -1 - 1e-9 <= e <= 1 + 1e-9:
            raise ValueError(f"expectation {e} outside [-1, 1]")
    return abs(e_abc - e_abpcp - e_apbpc - e_apbcp)


def mermin_from_expectations(expectations: Mapping[str, float]) -> float:
    return mermin_value(*(expectations[name] for name in SETTINGS))


def exact_expectations(state: sv.StateVector) -> dict[str, float]:
    return {name: sv.expectation(state, axes) for name, axes in SETTINGS.items()}


def exact_mermin(state: sv.StateVector) -> float:
    return mermin_from_expectations(exact_expectations(state))


@dataclass
class MerminResult:
    M: float
    sd: float
    expectations: dict[str, float]
    runs: list[float] = field(default_factory=list)

    @property
    def violates(self) -> bool:
        return self.M > CLASSICAL_BOUND

    def to_dict(self) -> dict:
        return {"M": self.M, "sd": self.sd, "expectations": dict(self.expectations)}


def measure_setting_counts(
    state_circuit: Circuit, shots: int, seed: Seed, noise: NoiseModel | None = None
) -> dict[str, dict[str, int]]:
    """Counts for each of the four Mermin settings."""
    if state_circuit.n_qubits != 3:
        raise ValueError("Mermin test needs a 3-qubit circuit")
    out = {}
    for name, axes in SETTINGS.items():
        circ = Circuit(3, 3).compose(state_circuit).compose(basis_rotation(axes))
        _, bits = run_batch(circ, shots, derive(seed, "mermin", axes), noise)
        out[name] = counts_from_bits(bits)
    return out


def mermin_experiment(
    state_circuit: Circuit,
    shots: int = 8192,
    seed: Seed = 0,
    noise: NoiseModel | None = None,
    reps: int = 5,
) -> MerminResult:
    """Sample the four settings ``reps`` times; mean |M| with its spread."""
    if reps < 1:
        raise ValueError("reps must be >= 1")

    def one(r: int) -> dict[str, float]:
        counts = measure_setting_counts(state_circuit, shots, derive(seed, "rep", r), noise)
        return {name: expectation_from_counts(c) for name, c in counts.items()}

    per_rep = map_ordered(one, range(reps))
    values = [mermin_from_expectations(e) for e in per_rep]
    mean_e = {name: float(np.mean([e[name] for e in per_rep])) for name in SETTINGS}
    sd = float(np.std(values, ddof=1)) if reps > 1 else 0.0
    return MerminResult(float(np.mean(values)), sd, mean_e, values)


def mermin_from_dataset(data: TomographyDataset) -> MerminResult:
    """Re-analyze a counts file holding (at least) the four Mermin settings."""
    expectations = {}
    for name, axes in SETTINGS.items():
        if axes not in data.settings:
            raise ValueError(f"dataset lacks setting {axes} for term {name}")
        expectations[name] = float(sv.parity_signs(3, 0b111) @ data.frequencies(axes))
    return MerminResult(mermin_from_expectations(expectations), math.nan, expectations)


def mermin_from_table(table: Mapping) -> MerminResult:
    """|M| from a probability table ``{"settings": {term: {bits: [p, sd]}}}``.

    The reported spread propagates per-entry standard deviations in
    quadrature, treating entries as independent.
    """
    settings = table["settings"]
    expectations, var = {}, 0.0
    for name in SETTINGS:
        entries = settings[name]
        probs = {k: float(v[0]) for k, v in entries.items()}
        expectations[name] = expectation_from_counts(probs)
        var += sum(float(v[1]) ** 2 for v in entries.values())
    return MerminResult(mermin_from_expectations(expectations), math.sqrt(var), expectations)


def load_table(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
