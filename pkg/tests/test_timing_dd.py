"""Schedules, idle-window extraction, and decoupling fills."""

import numpy as np
import pytest

from dynqft import (
    Circuit,
    Instruction,
    NoiseModel,
    SEQUENCES,
    TimingModel,
    WindowKind,
    build_dynamic_qft,
    build_unitary_qft,
    compute_schedule,
    dd_effectiveness,
    find_idle_windows,
    insert_dd,
    run_density_matrix,
    ur_phases,
    verify_equivalence,
)
from dynqft.sim import _compile_trajectory

T = TimingModel()
_READOUT = T.t_measure_pulse + T.t_post_measure_delay  # 1244


class TestSchedule:
    def test_dynamic_n3_milestones(self):
        c = build_dynamic_qft(3)
        s = compute_schedule(c, T)
        assert s.duration == 5038.0
        # h q0 is instant, its measure occupies [0, 1244]
        assert (s.starts[0], s.ends[0]) == (0.0, 0.0)
        assert (s.starts[1], s.ends[1]) == (0.0, 1244.0)
        # both conditioned rotations wait out readout + feed-forward
        assert s.starts[2] == s.starts[3] == 1897.0
        # second and third measures
        assert (s.starts[5], s.ends[5]) == (1897.0, 3141.0)
        assert (s.starts[8], s.ends[8]) == (3794.0, 5038.0)
        assert s.readout_spans == (
            (0.0, 1244.0, 0),
            (1897.0, 3141.0, 1),
            (3794.0, 5038.0, 2),
        )
        assert s.ff_spans == ((1244.0, 1897.0, 2), (3141.0, 3794.0, 1))

    def test_unitary_has_no_feedforward(self):
        s = compute_schedule(build_unitary_qft(4), T)
        assert s.ff_spans == ()
        assert len(s.readout_spans) == 4

    def test_cphase_occupies_both_qubits(self):
        c = Circuit(
            2,
            0,
            [
                Instruction.cphase(__import__("dynqft").Angle.dyadic_pi(1, 1), 0, 1),
                Instruction.h(0),
                Instruction.h(1),
            ],
        )
        s = compute_schedule(c, T)
        assert s.ends[0] == T.t_cphase
        assert s.starts[1] == s.starts[2] == T.t_cphase


class TestIdleWindows:
    def test_dynamic_n3_pairs(self):
        wins = find_idle_windows(build_dynamic_qft(3), T)
        got = [(w.qubit, w.start, w.end, w.kind, w.next_index) for w in wins]
        assert got == [
            (1, 0.0, 1244.0, WindowKind.READOUT_CONCURRENT, 2),
            (1, 1244.0, 1897.0, WindowKind.FEEDFORWARD_CONCURRENT, 2),
            (2, 0.0, 1244.0, WindowKind.READOUT_CONCURRENT, 3),
            (2, 1244.0, 1897.0, WindowKind.FEEDFORWARD_CONCURRENT, 3),
            (2, 1897.0, 3141.0, WindowKind.READOUT_CONCURRENT, 6),
            (2, 3141.0, 3794.0, WindowKind.FEEDFORWARD_CONCURRENT, 6),
        ]

    def test_unitary_windows_are_trailing_only(self):
        # staggered final readout leaves gaps only after each qubit's
        # last gate, and those have no successor instruction
        wins = find_idle_windows(build_unitary_qft(3), T)
        assert all(w.next_index is not None or w.kind for w in wins)

    def test_explicit_delay_is_not_idle(self):
        c = Circuit(1, 0, [Instruction.h(0), Instruction.delay(500.0, 0), Instruction.h(0)])
        assert find_idle_windows(c, T) == []


class TestURPhases:
    def test_ur4_equals_xy4_phases(self):
        np.testing.assert_allclose(ur_phases(4)[:2], [0.0, np.pi / 2])

    @pytest.mark.parametrize("p", [4, 6, 8, 10, 12])
    def test_pulse_product_is_identity_up_to_phase(self, p):
        x = np.array([[0, 1], [1, 0]], dtype=complex)

        def pulse(phi):
            rz = lambda a: np.diag([1, np.exp(1j * a)])
            return rz(phi) @ x @ rz(-phi)

        full = np.eye(2, dtype=complex)
        for phi in ur_phases(p):
            full = pulse(phi) @ full
        off = abs(full[0, 1]) + abs(full[1, 0])
        assert off < 1e-12
        assert abs(abs(full[0, 0]) - 1) < 1e-12
        assert abs(full[0, 0] - full[1, 1]) < 1e-12 or abs(
            full[0, 0] + full[1, 1]
        ) < 1e-12

    def test_odd_or_small_order_rejected(self):
        for p in (2, 5, 7):
            with pytest.raises(ValueError):
                ur_phases(p)


class TestInsertDD:
    @pytest.mark.parametrize("seq", ["x2", "xy4", "ur6", "ur10", "fc_dd"])
    def test_fills_every_window(self, seq):
        c = build_dynamic_qft(3)
        filled = insert_dd(c, seq, T)
        assert find_idle_windows(filled, T) == []

    @pytest.mark.parametrize("seq", ["x2", "xy4", "ur10", "fc_dd"])
    def test_fill_preserves_circuit_action(self, seq):
        c = build_dynamic_qft(3)
        filled = insert_dd(c, seq, T)
        assert verify_equivalence(c, filled) < 1e-12

    def test_none_materializes_idle_as_explicit_delay(self):
        c = build_dynamic_qft(3)
        filled = insert_dd(c, "none", T)
        kinds = {i.kind.value for i in filled.instructions} - {
            i.kind.value for i in c.instructions
        }
        assert kinds == {"delay"}
        assert find_idle_windows(filled, T) == []
        assert verify_equivalence(c, filled) < 1e-12

    def test_unknown_sequence_rejected(self):
        with pytest.raises(ValueError):
            insert_dd(build_dynamic_qft(2), "zz9", T)

    def test_metadata_records_sequence(self):
        filled = insert_dd(build_dynamic_qft(3), "fc_dd", T)
        dd = filled.metadata["dd"]
        assert dd["sequence"] == "fc_dd"
        assert dd["warnings"] == ()

    def test_sequences_constant_matches(self):
        assert "fc_dd" in SEQUENCES
        assert "none" in SEQUENCES


class TestDetuningProtection:
    """Which fills actually decouple a shot-static frequency offset."""

    NM = NoiseModel(idle_detuning_sigma=3e-4)

    def _exposed(self, circuit):
        return _compile_trajectory(circuit, self.NM, T).uses_nu

    def test_raw_dynamic_is_exposed(self):
        assert self._exposed(build_dynamic_qft(3))

    def test_conventional_fill_leaves_feedforward_exposed(self):
        # pulses echo the readout stretch but the feed-forward wait
        # of a conditioned circuit stays unrefocused
        assert self._exposed(insert_dd(build_dynamic_qft(3), "xy4", T))

    def test_feedforward_aware_fill_is_fully_echoed(self):
        assert not self._exposed(insert_dd(build_dynamic_qft(3), "fc_dd", T))

    def test_unitary_fill_is_fully_echoed(self):
        for seq in ("x2", "xy4", "ur10"):
            assert not self._exposed(insert_dd(build_unitary_qft(3), seq, T))

    def test_echoed_dynamic_circuit_is_noise_free(self):
        filled = insert_dd(build_dynamic_qft(3), "fc_dd", T)
        noisy = run_density_matrix(filled, self.NM, timing=T, input_state=0)
        clean = run_density_matrix(filled, None, timing=T, input_state=0)
        assert noisy.total_variation(clean) < 1e-12


class TestDegrade:
    def test_long_feedforward_degrades_with_warning(self):
        slow = TimingModel(t_ff=2000.0)
        filled = insert_dd(build_dynamic_qft(3), "fc_dd", slow)
        assert filled.metadata["dd"]["warnings"]

    def test_pulse_width_capacity_fallback(self):
        wide = TimingModel(t_1q_gate=200.0)
        filled = insert_dd(build_unitary_qft(3), "ur10", wide)
        assert filled.metadata["dd"]["fallbacks"]


class TestEffectiveness:
    def test_ranking_smoke(self):
        nm = NoiseModel(idle_detuning_sigma=5e-4)
        out = dd_effectiveness(
            build_dynamic_qft(2),
            ["none", "fc_dd"],
            noise=nm,
            m=4,
            shots=300,
            seed=3,
        )
        assert set(out) == {"none", "fc_dd"}
        assert out["fc_dd"].bias_corrected > out["none"].bias_corrected
