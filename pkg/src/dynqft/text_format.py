"""Line-oriented text serialization for circuits.

Format: a ``qubits N`` header, a ``clbits M`` header, then one instruction
per line. ``#`` starts a comment. Angles print canonically as ``0``, ``pi``,
``pi/4``, ``-pi*3/8``, or a bare float; delay durations are in nanoseconds.

    qubits 2
    clbits 2
    h q0
    cphase(pi/2) q0 q1
    measure q0 -> c1
    crz(pi/2) q1 if c1
"""

from __future__ import annotations

import re

from .ir import Angle, Circuit, Instruction

__all__ = ["ParseError", "parse_text", "print_text"]


class ParseError(ValueError):
    """Raised on malformed input; carries 1-based line and column."""

    def __init__(self, line: int, column: int, message: str):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, col {column}: {message}")


_ANGLE_RE = re.compile(
    r"""^(?:
        (?P<zero>0)
      | (?P<sign>-?)pi(?:\*(?P<num>\d+))?(?:/(?P<den>\d+))?
      | (?P<float>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
    )$""",
    re.VERBOSE,
)

_LINE_RES = {
    "plain": re.compile(r"^(?P<op>h|x|y)\s+q(?P<q>\d+)$"),
    "rz": re.compile(r"^rz\((?P<angle>[^)]*)\)\s+q(?P<q>\d+)$"),
    "cphase": re.compile(r"^cphase\((?P<angle>[^)]*)\)\s+q(?P<qa>\d+)\s+q(?P<qb>\d+)$"),
    "measure": re.compile(r"^measure\s+q(?P<q>\d+)\s*->\s*c(?P<c>\d+)$"),
    "crz": re.compile(r"^crz\((?P<angle>[^)]*)\)\s+q(?P<q>\d+)\s+if\s+c(?P<c>\d+)$"),
    "cx": re.compile(r"^cx\s+q(?P<q>\d+)\s+if\s+c(?P<c>\d+)$"),
    "delay": re.compile(r"^delay\((?P<dur>[^)]*?)\s*ns\)\s+q(?P<q>\d+)$"),
    "barrier": re.compile(r"^barrier$"),
    "header": re.compile(r"^(?P<key>qubits|clbits)\s+(?P<val>\d+)$"),
}


def _parse_angle(text: str, lineno: int, column: int) -> Angle:
    m = _ANGLE_RE.match(text.strip())
    if m is None:
        raise ParseError(lineno, column, f"bad angle {text!r}")
    if m.group("zero"):
        return Angle.dyadic_pi(0, 0)
    if m.group("float"):
        return Angle.from_radians(float(m.group("float")))
    num = int(m.group("num") or 1)
    if m.group("sign"):
        num = -num
    den = int(m.group("den") or 1)
    if den & (den - 1):
        raise ParseError(lineno, column, f"angle denominator {den} is not a power of two")
    return Angle.dyadic_pi(num, den.bit_length() - 1)


def parse_text(text: str) -> Circuit:
    """Parse the text form back into a :class:`Circuit`."""
    n_qubits: int | None = None
    n_clbits = 0
    saw_clbits = False
    instructions: list[Instruction] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        body = line.strip()

        m = _LINE_RES["header"].match(body)
        if m:
            if instructions:
                raise ParseError(lineno, col, "header after instructions")
            if m.group("key") == "qubits":
                if n_qubits is not None:
                    raise ParseError(lineno, col, "duplicate qubits header")
                n_qubits = int(m.group("val"))
            else:
                if saw_clbits:
                    raise ParseError(lineno, col, "duplicate clbits header")
                n_clbits = int(m.group("val"))
                saw_clbits = True
            continue

        if n_qubits is None:
            raise ParseError(lineno, col, "expected 'qubits N' header first")

        def angle_at(match: re.Match) -> Angle:
            return _parse_angle(match.group("angle"), lineno, col + match.start("angle"))

        if (m := _LINE_RES["plain"].match(body)) is not None:
            ctor = {"h": Instruction.h, "x": Instruction.x, "y": Instruction.y}[m.group("op")]
            instructions.append(ctor(int(m.group("q"))))
        elif (m := _LINE_RES["rz"].match(body)) is not None:
            instructions.append(Instruction.rz(angle_at(m), int(m.group("q"))))
        elif (m := _LINE_RES["cphase"].match(body)) is not None:
            instructions.append(
                Instruction.cphase(angle_at(m), int(m.group("qa")), int(m.group("qb")))
            )
        elif (m := _LINE_RES["measure"].match(body)) is not None:
            instructions.append(Instruction.measure(int(m.group("q")), int(m.group("c"))))
        elif (m := _LINE_RES["crz"].match(body)) is not None:
            instructions.append(
                Instruction.classical_rz(angle_at(m), int(m.group("q")), int(m.group("c")))
            )
        elif (m := _LINE_RES["cx"].match(body)) is not None:
            instructions.append(Instruction.classical_x(int(m.group("q")), int(m.group("c"))))
        elif (m := _LINE_RES["delay"].match(body)) is not None:
            try:
                dur = float(m.group("dur"))
            except ValueError:
                raise ParseError(
                    lineno, col + m.start("dur"), f"bad duration {m.group('dur')!r}"
                ) from None
            instructions.append(Instruction.delay(dur, int(m.group("q"))))
        elif _LINE_RES["barrier"].match(body) is not None:
            instructions.append(Instruction.barrier(n_qubits))
        else:
            raise ParseError(lineno, col, f"unrecognized instruction {body!r}")

    if n_qubits is None:
        raise ParseError(1, 1, "missing 'qubits N' header")
    return Circuit(n_qubits, n_clbits, tuple(instructions))


def _render_duration(duration: float) -> str:
    if duration == int(duration) and abs(duration) < 1e15:
        return str(int(duration))
    return repr(duration)


def print_text(circuit: Circuit) -> str:
    """Render a circuit in the canonical text form (metadata is dropped)."""
    lines = [f"qubits {circuit.n_qubits}", f"clbits {circuit.n_clbits}"]
    for ins in circuit.instructions:
        k = ins.kind.value
        if k in ("h", "x", "y"):
            lines.append(f"{k} q{ins.qubits[0]}")
        elif k == "rz":
            lines.append(f"rz({ins.angle.render()}) q{ins.qubits[0]}")
        elif k == "cphase":
            lines.append(f"cphase({ins.angle.render()}) q{ins.qubits[0]} q{ins.qubits[1]}")
        elif k == "measure":
            lines.append(f"measure q{ins.qubits[0]} -> c{ins.clbit}")
        elif k == "crz":
            lines.append(f"crz({ins.angle.render()}) q{ins.qubits[0]} if c{ins.condition}")
        elif k == "cx":
            lines.append(f"cx q{ins.qubits[0]} if c{ins.condition}")
        elif k == "delay":
            lines.append(f"delay({_render_duration(ins.duration)} ns) q{ins.qubits[0]}")
        elif k == "barrier":
            lines.append("barrier")
        else:  # pragma: no cover
            raise ValueError(f"cannot render {ins.kind}")
    return "\n".join(lines) + "\n"
