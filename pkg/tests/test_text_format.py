"""Round-trip fidelity and error reporting of the circuit text format."""

import numpy as np
import pytest

from dynqft import (
    Angle,
    Circuit,
    Instruction,
    ParseError,
    build_dynamic_qft,
    build_unitary_qft,
    parse_text,
    prepare_periodic_state,
    print_text,
)

from conftest import random_circuit


class TestPrint:
    def test_empty_circuit_golden(self):
        assert print_text(Circuit(1, 0)) == "qubits 1\nclbits 0\n"

    def test_dynamic_golden(self):
        assert print_text(build_dynamic_qft(2)) == (
            "qubits 2\n"
            "clbits 2\n"
            "h q0\n"
            "measure q0 -> c1\n"
            "crz(pi/2) q1 if c1\n"
            "h q1\n"
            "measure q1 -> c0\n"
        )

    def test_duration_renders_integral_as_int(self):
        c = Circuit(1, 0, [Instruction.delay(120.0, 0), Instruction.delay(0.5, 0)])
        text = print_text(c)
        assert "delay(120 ns) q0" in text
        assert "delay(0.5 ns) q0" in text


class TestRoundTrip:
    def test_builders(self):
        for c in (
            build_unitary_qft(4),
            build_dynamic_qft(4),
            prepare_periodic_state(6, 4, 3),
        ):
            assert parse_text(print_text(c)) == Circuit(
                c.n_qubits, c.n_clbits, c.instructions
            )

    def test_random_circuits(self, rng):
        for _ in range(40):
            n = int(rng.integers(1, 6))
            c = random_circuit(rng, n, int(rng.integers(0, 20)))
            back = parse_text(print_text(c))
            assert back.n_qubits == c.n_qubits
            assert back.n_clbits == c.n_clbits
            assert back.instructions == c.instructions

    def test_angle_forms(self):
        text = (
            "qubits 2\n"
            "clbits 0\n"
            "rz(0) q0\n"
            "rz(pi) q0\n"
            "rz(-pi/2) q0\n"
            "rz(pi*3/8) q0\n"
            "rz(1.5) q0\n"
            "rz(-2.5e-3) q1\n"
            "cphase(pi/4) q0 q1\n"
        )
        c = parse_text(text)
        angles = [ins.angle for ins in c.instructions]
        assert angles[0] == Angle.dyadic_pi(0, 0)
        assert angles[1] == Angle.dyadic_pi(1, 0)
        assert angles[2] == Angle.dyadic_pi(-1, 1)
        assert angles[3] == Angle.dyadic_pi(3, 3)
        assert float(angles[4]) == 1.5
        assert float(angles[5]) == -2.5e-3
        assert angles[6] == Angle.dyadic_pi(1, 2)

    def test_comments_and_blank_lines(self):
        text = (
            "# a transform\n"
            "qubits 1\n"
            "\n"
            "clbits 1\n"
            "h q0  # put it on the equator\n"
            "measure q0 -> c0\n"
        )
        c = parse_text(text)
        assert len(c.instructions) == 2


class TestErrors:
    def _err(self, text):
        with pytest.raises(ParseError) as info:
            parse_text(text)
        return info.value

    def test_unknown_op(self):
        err = self._err("qubits 1\nclbits 0\nfrobnicate q0\n")
        assert err.line == 3

    def test_bad_angle_denominator(self):
        err = self._err("qubits 1\nclbits 0\nrz(pi/3) q0\n")
        assert err.line == 3
        assert err.column >= 4

    def test_instruction_before_header(self):
        err = self._err("h q0\nqubits 1\n")
        assert err.line == 1

    def test_duplicate_header(self):
        err = self._err("qubits 1\nqubits 2\n")
        assert err.line == 2

    def test_missing_clbits_header_defaults_to_zero(self):
        c = parse_text("qubits 1\nh q0\n")
        assert c.n_clbits == 0

    def test_bad_duration(self):
        err = self._err("qubits 1\nclbits 0\ndelay(abc) q0\n")
        assert err.line == 3

    def test_error_carries_position_in_message(self):
        err = self._err("qubits 1\nclbits 0\nrz(pi/5) q0\n")
        assert "3" in str(err)
