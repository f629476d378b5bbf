"""Simulation engines against dense oracles and closed-form noise anchors."""

import numpy as np
import pytest

from dynqft import (
    Angle,
    Circuit,
    Instruction,
    NoiseModel,
    TimingModel,
    evolve_density,
    run_density_matrix,
    run_exact,
    run_trajectories,
    statevector,
    verify_equivalence,
)

from conftest import random_circuit

_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])


def _dense_1q(u, q, n):
    ops = [np.eye(2)] * n
    ops[q] = u
    full = ops[0]
    for m in ops[1:]:
        full = np.kron(full, m)
    return full


def _dense_cphase(theta, a, b, n):
    d = 2**n
    full = np.eye(d, dtype=complex)
    for idx in range(d):
        bits = format(idx, f"0{n}b")
        if bits[a] == "1" and bits[b] == "1":
            full[idx, idx] = np.exp(1j * theta)
    return full


def _dense_oracle(circuit, input_state=0):
    n = circuit.n_qubits
    psi = np.zeros(2**n, complex)
    psi[input_state] = 1.0
    for ins in circuit.instructions:
        k = ins.kind.value
        if k == "h":
            psi = _dense_1q(_H, ins.qubits[0], n) @ psi
        elif k == "x":
            psi = _dense_1q(_X, ins.qubits[0], n) @ psi
        elif k == "y":
            psi = _dense_1q(_Y, ins.qubits[0], n) @ psi
        elif k == "rz":
            u = np.diag([1, np.exp(1j * float(ins.angle))])
            psi = _dense_1q(u, ins.qubits[0], n) @ psi
        elif k == "cphase":
            psi = _dense_cphase(float(ins.angle), *ins.qubits, n) @ psi
        elif k in ("delay", "barrier"):
            continue
        else:
            raise AssertionError(f"oracle cannot handle {k}")
    return psi


class TestStatevector:
    def test_random_gate_circuits_match_dense_oracle(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 4))
            c = random_circuit(
                rng, n, int(rng.integers(1, 15)), allow_measure=False
            )
            j = int(rng.integers(0, 2**n))
            np.testing.assert_allclose(
                statevector(c, input_state=j), _dense_oracle(c, j), atol=1e-12
            )

    def test_rejects_measurement(self):
        c = Circuit(1, 1, [Instruction.measure(0, 0)])
        with pytest.raises(ValueError):
            statevector(c)

    def test_rejects_oversized(self):
        with pytest.raises(ValueError):
            statevector(Circuit(3, 0, [Instruction.h(0)]), max_qubits=2)


class TestExact:
    def test_collapse_probabilities_sum_to_one(self, rng):
        for _ in range(15):
            c = random_circuit(rng, 3, 10, measure_all=True)
            probs = run_exact(c).probs
            assert abs(sum(probs.values()) - 1.0) < 1e-12
            assert all(p > 0 for p in probs.values())

    def test_conditioned_gate_requires_collapse_branching(self):
        # h, measure, then conditionally flip the partner: perfect correlation
        c = Circuit(
            2,
            2,
            [
                Instruction.h(0),
                Instruction.measure(0, 0),
                Instruction.classical_x(1, 0),
                Instruction.measure(1, 1),
            ],
        )
        probs = run_exact(c).probs
        assert probs == pytest.approx({0b00: 0.5, 0b11: 0.5})


class TestTrajectoriesNoiseless:
    def test_empirical_matches_exact(self):
        c = build_mixed()
        exact = run_exact(c)
        res = run_trajectories(c, shots=4000, seed=11)
        assert res.empirical().total_variation(exact) < 0.03

    def test_determinism_and_seed_forms(self):
        c = build_mixed()
        a = run_trajectories(c, shots=200, seed=5)
        b = run_trajectories(c, shots=200, seed=5)
        t = run_trajectories(c, shots=200, seed=(5,))
        assert a.counts == b.counts == t.counts
        other = run_trajectories(c, shots=200, seed=6)
        assert other.counts != a.counts


def build_mixed():
    return Circuit(
        2,
        2,
        [
            Instruction.h(0),
            Instruction.cphase(Angle.dyadic_pi(1, 1), 0, 1),
            Instruction.h(1),
            Instruction.measure(0, 0),
            Instruction.measure(1, 1),
        ],
    )


class TestDepolarizing:
    def test_full_strength_single_qubit_gives_coin_flip(self):
        c = Circuit(1, 1, [Instruction.h(0), Instruction.measure(0, 0)])
        noise = NoiseModel(p1=1.0)
        probs = run_density_matrix(c, noise).probs
        assert probs == pytest.approx({0: 0.5, 1: 0.5}, abs=1e-12)
        res = run_trajectories(c, noise, shots=20000, seed=3)
        assert abs(res.frequency(0) - 0.5) < 0.02

    def test_two_qubit_channel_acts_on_both(self):
        c = Circuit(
            2,
            2,
            [
                Instruction.cphase(Angle.dyadic_pi(1, 1), 0, 1),
                Instruction.measure(0, 0),
                Instruction.measure(1, 1),
            ],
        )
        probs = run_density_matrix(c, NoiseModel(p2=1.0)).probs
        assert probs == pytest.approx(
            {k: 0.25 for k in range(4)}, abs=1e-12
        )


class TestReadoutError:
    def test_independent_flip_chain(self):
        eps = 0.07
        c = Circuit(
            2,
            2,
            [
                Instruction.x(0),
                Instruction.measure(0, 0),
                Instruction.measure(1, 1),
            ],
        )
        probs = run_density_matrix(c, NoiseModel(eps_ro=eps)).probs
        # true record is 10; each bit flips independently
        expect = {
            0b10: (1 - eps) ** 2,
            0b00: eps * (1 - eps),
            0b11: (1 - eps) * eps,
            0b01: eps**2,
        }
        assert probs == pytest.approx(expect, abs=1e-12)

    def test_flip_happens_after_collapse(self):
        # conditioned flip keys off the *recorded* bit, so readout error
        # propagates into the feed-forward action
        c = Circuit(
            2,
            2,
            [
                Instruction.measure(0, 0),
                Instruction.classical_x(1, 0),
                Instruction.measure(1, 1),
            ],
        )
        eps = 0.25
        probs = run_density_matrix(c, NoiseModel(eps_ro=eps)).probs
        # record c0=1 w.p. eps; then q1 flips, measured with its own error
        expect = {
            0b00: (1 - eps) ** 2,
            0b01: (1 - eps) * eps,
            0b11: eps * (1 - eps),
            0b10: eps * eps,
        }
        assert probs == pytest.approx(expect, abs=1e-12)


class TestDetuning:
    @pytest.mark.parametrize("sigma,t", [(2e-4, 1000.0), (5e-4, 700.0)])
    def test_ramsey_decay_density(self, sigma, t):
        c = Circuit(
            1,
            1,
            [
                Instruction.h(0),
                Instruction.delay(t, 0),
                Instruction.h(0),
                Instruction.measure(0, 0),
            ],
        )
        probs = run_density_matrix(c, NoiseModel(idle_detuning_sigma=sigma)).probs
        expect = (1 - np.exp(-(sigma**2) * t**2 / 2)) / 2
        assert probs.get(1, 0.0) == pytest.approx(expect, abs=1e-12)

    def test_ramsey_decay_trajectories(self):
        sigma, t = 5e-4, 1500.0
        c = Circuit(
            1,
            1,
            [
                Instruction.h(0),
                Instruction.delay(t, 0),
                Instruction.h(0),
                Instruction.measure(0, 0),
            ],
        )
        res = run_trajectories(
            c, NoiseModel(idle_detuning_sigma=sigma), shots=40000, seed=9
        )
        expect = (1 - np.exp(-(sigma**2) * t**2 / 2)) / 2
        assert abs(res.frequency(1) - expect) < 0.01

    def test_echo_cancels_quasi_static_shift(self):
        # x midway between equal delays refocuses a static detuning exactly
        sigma = 8e-4
        plain = Circuit(
            1,
            1,
            [
                Instruction.h(0),
                Instruction.delay(400.0, 0),
                Instruction.x(0),
                Instruction.delay(400.0, 0),
                Instruction.x(0),
                Instruction.h(0),
                Instruction.measure(0, 0),
            ],
        )
        probs = run_density_matrix(plain, NoiseModel(idle_detuning_sigma=sigma)).probs
        assert probs.get(0, 0.0) == pytest.approx(1.0, abs=1e-12)


class TestOverRotation:
    def test_x_error_probability(self):
        eps = 0.09
        c = Circuit(1, 1, [Instruction.x(0), Instruction.measure(0, 0)])
        probs = run_density_matrix(c, NoiseModel(pulse_over_rotation=eps)).probs
        assert probs.get(0, 0.0) == pytest.approx(np.sin(eps / 2) ** 2, abs=1e-12)

    def test_zero_is_exact(self):
        c = Circuit(1, 1, [Instruction.x(0), Instruction.measure(0, 0)])
        probs = run_density_matrix(c, NoiseModel(pulse_over_rotation=0.0)).probs
        assert probs == {1: 1.0}


class TestEngineAgreement:
    def test_trajectories_track_density_under_mixed_noise(self):
        noise = NoiseModel(p1=0.02, p2=0.3, eps_ro=0.03)
        c = build_mixed()
        dm = run_density_matrix(c, noise)
        res = run_trajectories(c, noise, shots=20000, seed=17)
        assert res.empirical().total_variation(dm) < 0.02

    def test_density_matches_exact_when_noiseless(self, rng):
        for _ in range(10):
            c = random_circuit(rng, 3, 8, measure_all=True)
            dm = run_density_matrix(c)
            exact = run_exact(c)
            assert dm.total_variation(exact) < 1e-10


class TestValidation:
    def test_invalid_circuit_rejected(self):
        bad = Circuit(1, 0, [Instruction.h(5)])
        for fn in (run_exact, run_density_matrix):
            with pytest.raises(ValueError):
                fn(bad)
        with pytest.raises(ValueError):
            run_trajectories(bad, shots=1, seed=0)

    def test_density_size_cap(self):
        c = Circuit(7, 0, [Instruction.h(0)])
        with pytest.raises(ValueError):
            evolve_density(c)

    def test_bad_shot_count(self):
        c = Circuit(1, 0, [])
        with pytest.raises(ValueError):
            run_trajectories(c, shots=0, seed=0)


class TestEquivalenceChecker:
    def test_accepts_identical(self):
        a = build_mixed()
        assert verify_equivalence(a, a) < 1e-15

    def test_flags_difference(self):
        a = build_mixed()
        b = Circuit(2, 2, a.instructions[1:])
        assert verify_equivalence(a, b) > 0.1
