import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wstate import statevec as sv
from wstate.circuit import maximal_w_state, perfect_w_state
from wstate.statevec import GATES, StateVector

from conftest import all_paulis, dense_operator, dense_pauli, random_density, random_state


class TestZeroState:
    def test_one_qubit(self):
        np.testing.assert_array_equal(sv.zero_state(1).data, [1, 0])

    def test_three_qubits(self):
        psi = sv.zero_state(3)
        assert sv.probabilities(psi, 0) == {"000": 1.0}

    @pytest.mark.parametrize("n", [0, 25])
    def test_size_cap(self, n):
        with pytest.raises(ValueError):
            sv.zero_state(n)


class TestU3:
    def test_identity(self):
        np.testing.assert_allclose(sv.u3_matrix(0, 0, 0), np.eye(2), atol=1e-15)

    def test_pauli_x_up_to_phase(self):
        m = sv.u3_matrix(math.pi, 0, math.pi)
        phase = m[0, 1] / GATES["x"][0, 1]
        np.testing.assert_allclose(m, phase * GATES["x"], atol=1e-15)

    def test_message_first_gate(self):
        # cos(pi/6), sin(pi/6)
        out = sv.u3_matrix(math.pi / 3, 0, 0) @ np.array([1, 0])
        np.testing.assert_allclose(out, [0.8660254037844386, 0.5], atol=1e-12)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            sv.u3_matrix(float("nan"), 0, 0)

    @given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
    def test_unitary(self, theta, phi, lam):
        m = sv.u3_matrix(theta, phi, lam)
        assert np.abs(m.conj().T @ m - np.eye(2)).max() < 1e-10


def test_named_gates_unitary():
    for name, m in GATES.items():
        assert sv.is_unitary(m), name


class TestApplyGate:
    def test_x_on_last_qubit(self):
        out = sv.apply_gate(sv.zero_state(3), GATES["x"], [2])
        assert sv.probabilities(out, 1e-12) == {"001": 1.0}

    def test_h_involution(self):
        psi = sv.apply_gate(sv.apply_gate(sv.zero_state(1), GATES["h"], [0]), GATES["h"], [0])
        np.testing.assert_allclose(psi.data, [1, 0], atol=1e-15)

    def test_bell_pair(self):
        plus = StateVector(np.array([1, 0, 1, 0]) / math.sqrt(2))
        out = sv.apply_gate(plus, GATES["cx"], [0, 1])
        np.testing.assert_allclose(out.data, np.array([1, 0, 0, 1]) / math.sqrt(2), atol=1e-15)

    def test_condition_false_is_noop(self):
        psi = sv.zero_state(2)
        out = sv.apply_gate(psi, GATES["x"], [0], condition=False)
        np.testing.assert_array_equal(out.data, psi.data)

    def test_errors(self):
        psi = sv.zero_state(2)
        with pytest.raises(IndexError):
            sv.apply_gate(psi, GATES["x"], [2])
        with pytest.raises(ValueError):
            sv.apply_gate(psi, GATES["cx"], [0])
        with pytest.raises(ValueError):
            sv.apply_gate(psi, GATES["cx"], [1, 1])

    @pytest.mark.parametrize("targets", [[0, 1], [1, 0], [0, 2], [2, 0], [1, 3], [3, 2]])
    def test_matches_dense_operator(self, rng, targets):
        n = 4
        psi = random_state(rng, n)
        u = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
        out = sv.apply_gate(psi, u, targets)
        np.testing.assert_allclose(out.data, dense_operator(u, targets, n) @ psi.data, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from(sorted(GATES)), st.integers(0, 2), st.integers(0, 2)), max_size=30), st.integers(0, 2**31))
    def test_norm_preserved(self, ops, seed):
        psi = random_state(np.random.default_rng(seed), 3)
        for name, a, b in ops:
            m = GATES[name]
            if m.shape[0] == 4:
                if a == b:
                    continue
                psi = sv.apply_gate(psi, m, [a, b])
            else:
                psi = sv.apply_gate(psi, m, [a])
        assert abs(np.vdot(psi.data, psi.data).real - 1) < 1e-9


class TestProbabilities:
    def test_perfect_w(self):
        p = sv.probabilities(perfect_w_state(), 1e-15)
        assert p.keys() == {"100", "010", "001"}
        assert p["100"] == pytest.approx(0.25, abs=1e-12)
        assert p["010"] == pytest.approx(0.25, abs=1e-12)
        assert p["001"] == pytest.approx(0.5, abs=1e-12)

    def test_maximal_w(self):
        p = sv.probabilities(maximal_w_state(3), 1e-15)
        assert all(v == pytest.approx(1 / 3, abs=1e-12) for v in p.values())
        assert sum(sv.probabilities(maximal_w_state(3)).values()) == pytest.approx(1, abs=1e-10)


class TestMeasureQubit:
    def test_zero(self, rng):
        bit, psi = sv.measure_qubit(sv.zero_state(3), 0, rng)
        assert bit == 0
        np.testing.assert_allclose(psi.data, sv.zero_state(3).data)

    def test_collapse(self):
        plus = StateVector(np.array([1, 1]) / math.sqrt(2))

        class One:
            def random(self):
                return 0.0

        bit, psi = sv.measure_qubit(plus, 0, One())
        assert bit == 1
        np.testing.assert_allclose(psi.data, [0, 1], atol=1e-15)

    def test_index_error(self, rng):
        with pytest.raises(IndexError):
            sv.measure_qubit(sv.zero_state(2), 2, rng)

    def test_marginal_consistency(self, rng):
        psi = random_state(rng, 3)
        gen = np.random.default_rng(1)
        trials = 100_000
        p1_exact = sum(p for k, p in sv.probabilities(psi).items() if k[1] == "1")
        ones = sum(sv.measure_qubit(psi, 1, gen)[0] for _ in range(trials))
        sigma = math.sqrt(p1_exact * (1 - p1_exact) / trials)
        assert abs(ones / trials - p1_exact) < 4 * sigma

    def test_w_last_qubit_is_half(self):
        gen = np.random.default_rng(5)
        trials = 20_000
        ones = sum(sv.measure_qubit(perfect_w_state(), 2, gen)[0] for _ in range(trials))
        assert abs(ones / trials - 0.5) < 4 * math.sqrt(0.25 / trials)


class TestSampleCounts:
    def test_zero_state(self):
        assert sv.sample_counts(sv.zero_state(3), 100, 3) == {"000": 100}

    def test_deterministic(self):
        a = sv.sample_counts(perfect_w_state(), 1000, 42)
        assert a == sv.sample_counts(perfect_w_state(), 1000, 42)
        assert sum(a.values()) == 1000

    def test_zero_shots(self):
        with pytest.raises(ValueError):
            sv.sample_counts(perfect_w_state(), 0, 1)

    def test_w_statistics(self):
        counts = sv.sample_counts(perfect_w_state(), 8192, 7)
        assert abs(counts["001"] / 8192 - 0.5) < 3 * math.sqrt(0.25 / 8192)
        assert set(counts) <= {"100", "010", "001"}

    def test_prefix_stable(self):
        # shot i depends only on (seed, i): more shots extend, never reshuffle
        from wstate.rng import stream

        u_small = stream(3, "final-sample").random(10)
        u_big = stream(3, "final-sample").random(1000)
        np.testing.assert_array_equal(u_small, u_big[:10])


class TestExpectation:
    def test_zzz_on_w(self, w_amps):
        assert sv.expectation(StateVector(w_amps), "ZZZ") == pytest.approx(-1.0, abs=1e-12)

    def test_zxx_on_w(self, w_amps):
        oracle = np.vdot(w_amps, dense_pauli("ZXX") @ w_amps).real
        assert oracle == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
        assert sv.expectation(StateVector(w_amps), "ZXX") == pytest.approx(oracle, abs=1e-12)

    def test_identity(self, rng):
        assert sv.expectation(random_state(rng, 3), "III") == pytest.approx(1.0, abs=1e-12)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            sv.expectation(sv.zero_state(3), "ZZ")

    def test_bit_kernel_matches_dense_oracle(self, rng):
        for _ in range(20):
            psi = random_state(rng, 3)
            for label in all_paulis(3):
                dense = np.vdot(psi.data, dense_pauli(label) @ psi.data).real
                assert abs(sv.expectation(psi, label) - dense) < 1e-10, label


class TestPartialTrace:
    def test_product(self):
        rho = sv.partial_trace(sv.zero_state(2), [0])
        np.testing.assert_allclose(rho, [[1, 0], [0, 0]], atol=1e-15)

    def test_bell_is_mixed(self):
        bell = StateVector(np.array([1, 0, 0, 1]) / math.sqrt(2))
        np.testing.assert_allclose(sv.partial_trace(bell, [0]), np.eye(2) / 2, atol=1e-15)

    def test_empty_keep(self):
        with pytest.raises(ValueError):
            sv.partial_trace(sv.zero_state(2), [])

    def test_vector_and_density_agree(self, rng):
        psi = random_state(rng, 4)
        for keep in ([0], [2], [1, 3], [0, 1, 2]):
            a = sv.partial_trace(psi, keep)
            b = sv.partial_trace(psi.density_matrix(), keep)
            np.testing.assert_allclose(a, b, atol=1e-12)
            assert np.trace(a).real == pytest.approx(1, abs=1e-12)

    def test_matches_explicit_sum(self, rng):
        psi = random_state(rng, 3)
        t = psi.data.reshape(2, 2, 2)
        oracle = np.einsum("aib,cid->abcd", t, t.conj()).reshape(4, 4)  # keep qubits 0, 2
        np.testing.assert_allclose(sv.partial_trace(psi, [0, 2]), oracle, atol=1e-12)

    def test_product_state_stays_pure(self, rng):
        a, b = random_state(rng, 1), random_state(rng, 2)
        prod = StateVector(np.kron(a.data, b.data))
        w = np.linalg.eigvalsh(sv.partial_trace(prod, [1, 2]))
        assert w.max() == pytest.approx(1, abs=1e-9)


class TestFidelity:
    def test_self(self, rng):
        rho = random_density(rng, 2)
        assert sv.fidelity(rho, rho) == pytest.approx(1, abs=1e-9)

    def test_orthogonal(self):
        assert sv.fidelity(np.diag([1, 0]), np.diag([0, 1])) == pytest.approx(0, abs=1e-12)

    def test_pure_reduces_to_overlap(self, rng):
        psi = random_state(rng, 2)
        rho = random_density(rng, 2)
        assert sv.fidelity(psi.density_matrix(), rho) == pytest.approx(np.vdot(psi.data, rho @ psi.data).real, abs=1e-9)

    def test_general_formula_against_scalar_case(self):
        # commuting states: F = (sum sqrt(p_i q_i))**2
        p, q = np.array([0.7, 0.2, 0.1, 0.0]), np.array([0.25, 0.25, 0.25, 0.25])
        assert sv.fidelity(np.diag(p), np.diag(q)) == pytest.approx(np.sum(np.sqrt(p * q)) ** 2, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            sv.fidelity(np.eye(2) / 2, np.eye(4) / 4)
        with pytest.raises(ValueError):
            sv.fidelity(np.array([[0.5, 0.5], [0, 0.5]]), np.eye(2) / 2)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 4))
    def test_symmetric_and_bounded(self, seed, ra, rb):
        gen = np.random.default_rng(seed)
        a, b = random_density(gen, 2, ra), random_density(gen, 2, rb)
        fab, fba = sv.fidelity(a, b), sv.fidelity(b, a)
        assert abs(fab - fba) < 1e-9
        assert -1e-12 <= fab <= 1 + 1e-9

    def test_matches_textbook_formula_full_rank(self, rng):
        for _ in range(10):
            a, b = random_density(rng, 2), random_density(rng, 2)
            ra = sv.psd_sqrt(a)
            want = np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(ra @ b @ ra), 0, None))) ** 2
            assert sv.fidelity(a, b) == pytest.approx(want, abs=1e-9)

    def test_receiver_density_fixture(self):
        from wstate.data import bob_density_matrices

        rho_t, rho_e = bob_density_matrices(purify_theory=True)
        raw_t, _ = bob_density_matrices()
        # hand oracle: Tr(rho_t rho_e) on the printed matrices
        hand = 0.194 * 0.289 + 0.806 * 0.709 + 2 * (0.250 * 0.174 + 0.306 * 0.118)
        assert hand == pytest.approx(0.786736, abs=1e-9)
        assert np.trace(raw_t @ rho_e).real == pytest.approx(hand, abs=1e-12)
        assert sv.fidelity(rho_t, rho_e) == pytest.approx(0.787, abs=5e-3)


class TestPsdSqrt:
    def test_squares_back(self, rng):
        rho = random_density(rng, 3)
        root = sv.psd_sqrt(rho)
        assert np.allclose(root @ root, rho, atol=1e-12)
        assert np.allclose(root, root.conj().T)

    def test_clamps_round_off(self):
        root = sv.psd_sqrt(np.diag([1.0, -1e-10]))
        assert np.allclose(root, np.diag([1.0, 0.0]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            sv.psd_sqrt(np.diag([1.1, -0.1]))


def test_density_json_round_trip(rng):
    rho = random_density(rng, 2)
    np.testing.assert_array_equal(sv.density_from_json(sv.density_to_json(rho)), rho)
