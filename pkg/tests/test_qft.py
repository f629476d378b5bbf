"""Transform builders against a dense DFT oracle."""

import numpy as np
import pytest

from dynqft import (
    Angle,
    Circuit,
    Instruction,
    InstrKind,
    build_dynamic_qft,
    build_unitary_qft,
    stats,
    compose,
    prepare_fourier_state,
    prepare_periodic_state,
    run_exact,
    statevector,
)

from conftest import dft_matrix


def _strip_measures(circuit):
    kept = [i for i in circuit.instructions if i.kind is not InstrKind.MEASURE]
    return Circuit(circuit.n_qubits, 0, kept)


def _bitrev(k, n):
    return int(format(k, f"0{n}b")[::-1], 2)


class TestUnitaryMatrix:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_matches_dft_columns_up_to_output_relabeling(self, n):
        # gate part leaves the result bit-reversed; the measure map
        # q_j -> c_{n-1-j} undoes it, so compare through that relabeling
        w = dft_matrix(n)
        core = _strip_measures(build_unitary_qft(n))
        for j in range(2**n):
            psi = statevector(core, input_state=j)
            relabeled = np.array([psi[_bitrev(k, n)] for k in range(2**n)])
            np.testing.assert_allclose(relabeled, w[:, j], atol=1e-12)

    def test_angle_multiset_n4(self):
        angles = sorted(
            float(i.angle)
            for i in build_unitary_qft(4).instructions
            if i.kind is InstrKind.CPHASE
        )
        expect = sorted([np.pi / 2] * 3 + [np.pi / 4] * 2 + [np.pi / 8])
        np.testing.assert_allclose(angles, expect)


class TestDynamicAngles:
    def test_n3_values(self):
        angles = [
            float(i.angle)
            for i in build_dynamic_qft(3).instructions
            if i.kind is InstrKind.CLASSICAL_RZ
        ]
        np.testing.assert_allclose(angles, [np.pi / 2, np.pi / 4, np.pi / 2])

    def test_every_rotation_is_conditioned_on_a_written_bit(self):
        c = build_dynamic_qft(5)
        written = set()
        for ins in c.instructions:
            if ins.kind is InstrKind.CLASSICAL_RZ:
                assert ins.condition in written
            elif ins.kind is InstrKind.MEASURE:
                written.add(ins.clbit)


class TestFourierState:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_prepared_state_is_conjugate_dft_column(self, n):
        w = dft_matrix(n)
        for k in range(2**n):
            psi = statevector(prepare_fourier_state(n, k))
            np.testing.assert_allclose(psi, np.conj(w[:, k]), atol=1e-12)

    @pytest.mark.parametrize("variant", [build_unitary_qft, build_dynamic_qft])
    @pytest.mark.parametrize("n,k", [(1, 1), (2, 3), (3, 5), (4, 11)])
    def test_transform_recovers_label_with_certainty(self, variant, n, k):
        c = compose(prepare_fourier_state(n, k), variant(n))
        dist = run_exact(c)
        assert dist.prob(k) == pytest.approx(1.0, abs=1e-12)
        assert all(p < 1e-12 for key, p in dist.probs.items() if key != k)


class TestPeriodicState:
    def test_statevector_brute_force(self):
        n, period, offset = 5, 4, 3
        psi = statevector(prepare_periodic_state(n, period, offset))
        d = 2**n
        expect = np.zeros(d, complex)
        support = np.arange(offset, d, period)
        expect[support] = 1 / np.sqrt(len(support))
        np.testing.assert_allclose(psi, expect, atol=1e-12)

    def test_transform_concentrates_on_multiples(self):
        n, period = 5, 4
        c = compose(prepare_periodic_state(n, period, 3), build_unitary_qft(n))
        dist = run_exact(c).probs
        d = 2**n
        peaks = {d // period * r for r in range(period)}
        on_peak = sum(dist.get(k, 0.0) for k in peaks)
        assert on_peak == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_period(self):
        with pytest.raises(ValueError):
            prepare_periodic_state(4, 3, 0)
        with pytest.raises(ValueError):
            prepare_periodic_state(4, 4, 4)


class TestCompose:
    def test_concatenates_and_validates(self):
        a = prepare_fourier_state(3, 2)
        b = build_dynamic_qft(3)
        c = compose(a, b)
        assert c.n_qubits == 3
        assert c.instructions[: len(a.instructions)] == a.instructions
        assert c.instructions[len(a.instructions) :] == b.instructions

    def test_width_mismatch_raises(self):
        with pytest.raises(ValueError):
            compose(prepare_fourier_state(2, 1), build_unitary_qft(3))

    def test_mid_circuit_counts(self):
        for n in range(2, 7):
            dyn = stats(build_dynamic_qft(n))
            uni = stats(build_unitary_qft(n))
            assert dyn.mid_circuit_measurement_count == n - 1
            assert uni.mid_circuit_measurement_count == 0
            assert uni.two_qubit_gate_count == n * (n - 1) // 2
            assert dyn.two_qubit_gate_count == 0
