"""Full state tomography by linear inversion of Pauli expectations.

Every qubit is measured along Z, X or Y (``3**n`` settings). Each Pauli
string's expectation is a parity average over any setting that agrees with
it on its non-identity positions; all agreeing settings are pooled.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import statevec as sv
from .circuit import Circuit, final_state, run_batch, counts_from_bits
from .noise import NoiseModel
from .rng import Seed, derive

AXES = "ZXY"


def tomography_settings(n: int) -> list[str]:
    """All ``3**n`` axis strings, Z before X before Y at each position."""
    if n < 1:
        raise ValueError("need at least one qubit")
    return ["".join(p) for p in itertools.product(AXES, repeat=n)]


def basis_rotation(setting: str) -> Circuit:
    """Pre-measurement rotations for ``setting`` followed by measure-all.

    X is read through H, Y through S-dagger then H.
    """
    n = len(setting)
    c = Circuit(n, n)
    for q, axis in enumerate(setting.upper()):
        if axis == "X":
            c.h(q)
        elif axis == "Y":
            c.sdg(q).h(q)
        elif axis != "Z":
            raise ValueError(f"invalid measurement axis {axis!r}")
    return c.measure(list(range(n)), list(range(n)))


@dataclass
class TomographyDataset:
    """Outcome counts per basis setting.

    Counts may be fractional (exact-probability mode stores probabilities
    with ``shots == 1``).
    """

    n: int
    settings: dict[str, tuple[dict[str, float], float]] = field(default_factory=dict)

    def add(self, axes: str, counts: Mapping[str, float], shots: float | None = None) -> None:
        if len(axes) != self.n or set(axes) - set(AXES):
            raise ValueError(f"invalid setting {axes!r} for {self.n} qubits")
        for key in counts:
            if len(key) != self.n or set(key) - {"0", "1"}:
                raise ValueError(f"invalid outcome key {key!r}")
        total = float(sum(counts.values()))
        shots = total if shots is None else float(shots)
        if shots <= 0:
            raise ValueError(f"setting {axes} has zero shots")
        if abs(total - shots) > 1e-9 * max(1.0, shots):
            raise ValueError(f"setting {axes}: counts sum to {total}, expected {shots}")
        if any(v < 0 for v in counts.values()):
            raise ValueError(f"setting {axes}: negative count")
        self.settings[axes] = (dict(counts), shots)

    def frequencies(self, axes: str) -> np.ndarray:
        counts, shots = self.settings[axes]
        freq = np.zeros(2**self.n)
        for key, v in counts.items():
            freq[int(key, 2)] += v
        return freq / shots

    def is_complete(self) -> bool:
        return set(tomography_settings(self.n)) <= set(self.settings)

    def to_dict(self) -> dict:
        rows = []
        for axes in tomography_settings(self.n):
            if axes in self.settings:
                counts, shots = self.settings[axes]
                rows.append({"axes": axes, "shots": _num(shots), "counts": {k: _num(v) for k, v in sorted(counts.items())}})
        return {"n": self.n, "settings": rows}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TomographyDataset":
        data = cls(int(d["n"]))
        for row in d["settings"]:
            data.add(row["axes"], row["counts"], row.get("shots"))
        return data

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "TomographyDataset":
        return cls.from_dict(json.loads(text))


def _num(v: float):
    return int(v) if float(v).is_integer() else float(v)


@dataclass
class StokesVector:
    n: int
    coefficients: dict[str, float]

    def __getitem__(self, label: str) -> float:
        return self.coefficients[label]

    def non_identity(self) -> dict[str, float]:
        ident = "I" * self.n
        return {k: v for k, v in self.coefficients.items() if k != ident}


def stokes_from_counts(data: TomographyDataset) -> StokesVector:
    n = data.n
    missing = [s for s in tomography_settings(n) if s not in data.settings]
    if missing:
        raise ValueError(f"incomplete dataset: missing settings {missing[:5]}")
    total: dict[str, float] = {}
    hits: dict[str, int] = {}
    for axes in tomography_settings(n):
        freq = data.frequencies(axes)
        for subset in itertools.product((False, True), repeat=n):
            label = "".join(a if keep else "I" for a, keep in zip(axes, subset))
            mask = sum(1 << (n - 1 - k) for k, keep in enumerate(subset) if keep)
            val = float(sv.parity_signs(n, mask) @ freq)
            total[label] = total.get(label, 0.0) + val
            hits[label] = hits.get(label, 0) + 1
    coeffs = {label: total[label] / hits[label] for label in sorted(total)}
    coeffs["I" * n] = 1.0
    return StokesVector(n, coeffs)


def exact_stokes(state: sv.StateVector) -> StokesVector:
    labels = ("".join(p) for p in itertools.product("IXYZ", repeat=state.n_qubits))
    return StokesVector(state.n_qubits, {p: sv.expectation(state, p) for p in labels})


def reconstruct_density(stokes: StokesVector) -> np.ndarray:
    """``rho = 2**-n * sum_P c_P P``; Hermitian, unit trace, possibly not PSD."""
    dim = 2**stokes.n
    rho = np.zeros((dim, dim), dtype=complex)
    for label, c in stokes.coefficients.items():
        if c != 0:
            rho += c * sv.pauli_matrix(label)
    rho /= dim
    return (rho + rho.conj().T) / 2


def project_physical(raw: np.ndarray) -> np.ndarray:
    """Nearest density matrix in Frobenius norm.

    Eigenvectors are kept; the spectrum is projected onto the probability
    simplex by zeroing the most negative eigenvalues and spreading their
    weight evenly over the rest. On ``diag(1.1, -0.1)`` this gives
    ``diag(1, 0)``; physical input is returned unchanged.
    """
    raw = np.asarray(raw, dtype=complex)
    if not sv.is_hermitian(raw):
        raise ValueError("input must be Hermitian")
    w, v = np.linalg.eigh((raw + raw.conj().T) / 2)
    if w.min() >= 0:
        return raw
    w = w / w.sum()
    # eigh sorts ascending; drop from the bottom while the shifted value is negative
    mu = w.copy()
    deficit, lo = 0.0, 0
    while lo < len(mu) and mu[lo] + deficit / (len(mu) - lo) < 0:
        deficit += mu[lo]
        mu[lo] = 0.0
        lo += 1
    mu[lo:] += deficit / (len(mu) - lo)
    return (v * mu) @ v.conj().T


def collect_dataset(
    target: Circuit,
    shots_per_setting: int | None,
    seed: Seed = 0,
    noise: NoiseModel | None = None,
    settings: Sequence[str] | None = None,
) -> TomographyDataset:
    """Run ``target`` followed by each basis rotation.

    ``shots_per_setting=None`` records exact probabilities instead of counts
    (noiseless only).
    """
    n = target.n_qubits
    settings = tomography_settings(n) if settings is None else list(settings)
    data = TomographyDataset(n)
    if shots_per_setting is None:
        if noise is not None and not noise.is_zero:
            raise ValueError("exact mode is noiseless")
        psi = final_state(target)
        for axes in settings:
            rotated = final_state(_rotation_gates(axes), initial=psi)
            data.add(axes, sv.probabilities(rotated), 1.0)
        return data
    if shots_per_setting < 1:
        raise ValueError("shots must be >= 1")
    for k, axes in enumerate(settings):
        circ = Circuit(n, n).compose(target).compose(basis_rotation(axes))
        _, bits = run_batch(circ, shots_per_setting, derive(seed, "setting", k), noise)
        data.add(axes, counts_from_bits(bits), shots_per_setting)
    return data


def _rotation_gates(axes: str) -> Circuit:
    rot = basis_rotation(axes)
    return Circuit(rot.n_qubits, 0, [op for op in rot.ops if op.is_gate])


@dataclass
class TomographyResult:
    rho: np.ndarray
    raw: np.ndarray
    fidelity: float
    stokes: StokesVector
    dataset: TomographyDataset
    ideal: sv.StateVector | None = None

    @property
    def was_unphysical(self) -> bool:
        return bool(np.linalg.eigvalsh(self.raw).min() < -sv.NEGATIVITY_ATOL)


def analyze_dataset(data: TomographyDataset, reference=None) -> TomographyResult:
    """Reconstruct from counts; fidelity against ``reference`` if given."""
    stokes = stokes_from_counts(data)
    raw = reconstruct_density(stokes)
    rho = project_physical(raw)
    f = sv.fidelity(sv.as_density(reference), rho) if reference is not None else math.nan
    return TomographyResult(rho, raw, f, stokes, data, reference if isinstance(reference, sv.StateVector) else None)


def tomography_pipeline(
    target: Circuit,
    shots_per_setting: int | None,
    seed: Seed = 0,
    noise: NoiseModel | None = None,
) -> TomographyResult:
    """Collect all settings, reconstruct, project, and score against the ideal state."""
    ideal = final_state(target)
    data = collect_dataset(target, shots_per_setting, seed, noise)
    result = analyze_dataset(data, ideal)
    result.ideal = ideal
    return result
