"""Circuit intermediate representation.

Immutable instruction/circuit types for a small gate set with mid-circuit
measurement and classically conditioned feed-forward gates, plus structural
validation and static statistics.

Conventions: qubit 0 is the most significant bit of basis-state integer
labels, and clbit 0 is the most significant bit of outcome integers, so
``format(k, f"0{n}b")`` gives the bitstring for outcome ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

__all__ = [
    "Angle",
    "Circuit",
    "CircuitStats",
    "InstrKind",
    "Instruction",
    "Violation",
    "require_valid",
    "stats",
    "validate",
]


class InstrKind(Enum):
    H = "h"
    X = "x"
    Y = "y"
    RZ = "rz"
    CPHASE = "cphase"
    MEASURE = "measure"
    CLASSICAL_RZ = "crz"
    CLASSICAL_X = "cx"
    DELAY = "delay"
    BARRIER = "barrier"


# Kinds that change the quantum state of their qubit operands.
GATE_KINDS = frozenset(
    {
        InstrKind.H,
        InstrKind.X,
        InstrKind.Y,
        InstrKind.RZ,
        InstrKind.CPHASE,
        InstrKind.CLASSICAL_RZ,
        InstrKind.CLASSICAL_X,
    }
)

ANGLED_KINDS = frozenset({InstrKind.RZ, InstrKind.CPHASE, InstrKind.CLASSICAL_RZ})
CONDITIONED_KINDS = frozenset({InstrKind.CLASSICAL_RZ, InstrKind.CLASSICAL_X})


@dataclass(frozen=True)
class Angle:
    """A rotation angle in radians, with an optional exact dyadic form.

    ``dyadic == (num, log2_den)`` means the angle is exactly
    ``pi * num / 2**log2_den`` with ``num`` odd (or zero) and reduced to the
    principal range ``(-pi, pi]`` times the denominator. Angles built from
    plain floats carry ``dyadic=None`` except for exact zero, which is always
    canonical so it round-trips through text as ``0``.
    """

    radians: float
    dyadic: tuple[int, int] | None = None

    @classmethod
    def from_radians(cls, radians: float) -> Angle:
        radians = float(radians)
        if radians == 0.0:
            return cls(0.0, (0, 0))
        return cls(radians, None)

    @classmethod
    def dyadic_pi(cls, num: int, log2_den: int) -> Angle:
        """Exact angle ``pi * num / 2**log2_den``, canonically reduced."""
        num = int(num)
        log2_den = int(log2_den)
        if log2_den < 0:
            num <<= -log2_den
            log2_den = 0
        modulus = 1 << (log2_den + 1)  # reduce mod 2*pi
        num %= modulus
        if num > (1 << log2_den):
            num -= modulus  # principal range (-pi, pi] * 2**log2_den
        while num != 0 and num % 2 == 0 and log2_den > 0:
            num //= 2
            log2_den -= 1
        if num == 0:
            log2_den = 0
        return cls(math.pi * num / (1 << log2_den), (num, log2_den))

    def __float__(self) -> float:
        return self.radians

    def render(self) -> str:
        """Canonical text form: ``0``, ``pi``, ``-pi/4``, ``pi*3/8``, or a float."""
        if self.dyadic is None:
            return repr(self.radians)
        num, log2_den = self.dyadic
        if num == 0:
            return "0"
        sign = "-" if num < 0 else ""
        mag = abs(num)
        if log2_den == 0:
            return f"{sign}pi" if mag == 1 else f"{sign}pi*{mag}"
        if mag == 1:
            return f"{sign}pi/{1 << log2_den}"
        return f"{sign}pi*{mag}/{1 << log2_den}"


def _as_angle(angle: Angle | float) -> Angle:
    return angle if isinstance(angle, Angle) else Angle.from_radians(float(angle))


@dataclass(frozen=True)
class Instruction:
    """One circuit operation.

    ``qubits`` are the quantum operands; ``clbit`` is the write target of a
    MEASURE; ``condition`` is the clbit a CLASSICAL_* gate is gated on;
    ``duration`` is nonzero only for DELAY (nanoseconds).
    """

    kind: InstrKind
    qubits: tuple[int, ...]
    angle: Angle | None = None
    clbit: int | None = None
    condition: int | None = None
    duration: float = 0.0

    @classmethod
    def h(cls, qubit: int) -> Instruction:
        return cls(InstrKind.H, (qubit,))

    @classmethod
    def x(cls, qubit: int) -> Instruction:
        return cls(InstrKind.X, (qubit,))

    @classmethod
    def y(cls, qubit: int) -> Instruction:
        return cls(InstrKind.Y, (qubit,))

    @classmethod
    def rz(cls, angle: Angle | float, qubit: int) -> Instruction:
        return cls(InstrKind.RZ, (qubit,), angle=_as_angle(angle))

    @classmethod
    def cphase(cls, angle: Angle | float, qubit_a: int, qubit_b: int) -> Instruction:
        return cls(InstrKind.CPHASE, (qubit_a, qubit_b), angle=_as_angle(angle))

    @classmethod
    def measure(cls, qubit: int, clbit: int) -> Instruction:
        return cls(InstrKind.MEASURE, (qubit,), clbit=clbit)

    @classmethod
    def classical_rz(cls, angle: Angle | float, qubit: int, condition: int) -> Instruction:
        return cls(
            InstrKind.CLASSICAL_RZ, (qubit,), angle=_as_angle(angle), condition=condition
        )

    @classmethod
    def classical_x(cls, qubit: int, condition: int) -> Instruction:
        return cls(InstrKind.CLASSICAL_X, (qubit,), condition=condition)

    @classmethod
    def delay(cls, duration: float, qubit: int) -> Instruction:
        return cls(InstrKind.DELAY, (qubit,), duration=float(duration))

    @classmethod
    def barrier(cls, n_qubits: int) -> Instruction:
        return cls(InstrKind.BARRIER, tuple(range(n_qubits)))


@dataclass(frozen=True)
class Circuit:
    """An ordered instruction sequence over ``n_qubits`` qubits and
    ``n_clbits`` classical bits. Metadata is free-form and ignored by
    equality."""

    n_qubits: int
    n_clbits: int
    instructions: tuple[Instruction, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "instructions", tuple(self.instructions))

    def with_instructions(self, instructions) -> Circuit:
        return Circuit(self.n_qubits, self.n_clbits, tuple(instructions), dict(self.metadata))

    def with_metadata(self, **entries) -> Circuit:
        merged = dict(self.metadata)
        merged.update(entries)
        return Circuit(self.n_qubits, self.n_clbits, self.instructions, merged)


@dataclass(frozen=True)
class Violation:
    """One structural problem found by :func:`validate`.

    ``index`` is the offending instruction's position, or -1 for
    circuit-level problems."""

    index: int
    code: str
    message: str


def validate(circuit: Circuit) -> list[Violation]:
    """Check structural well-formedness; returns all violations found.

    Rules beyond the obvious range/arity checks: every clbit is written at
    most once, conditions read clbits already written, barriers span the
    whole register, and a measured qubit is terminal (no later gate, delay,
    or re-measurement touches it; barriers are exempt).
    """
    out: list[Violation] = []
    if circuit.n_qubits < 1:
        out.append(Violation(-1, "bad-register", "circuit needs at least one qubit"))
    if circuit.n_clbits < 0:
        out.append(Violation(-1, "bad-register", "negative clbit count"))

    written: dict[int, int] = {}  # clbit -> index of writing MEASURE
    measured: dict[int, int] = {}  # qubit -> index of its MEASURE

    for i, ins in enumerate(circuit.instructions):
        for q in ins.qubits:
            if not 0 <= q < circuit.n_qubits:
                out.append(Violation(i, "qubit-range", f"qubit {q} out of range"))
        if ins.kind is InstrKind.CPHASE:
            if len(ins.qubits) != 2:
                out.append(Violation(i, "arity", "cphase takes two qubits"))
            elif ins.qubits[0] == ins.qubits[1]:
                out.append(Violation(i, "arity", "cphase qubits must be distinct"))
        elif ins.kind is InstrKind.BARRIER:
            if tuple(ins.qubits) != tuple(range(circuit.n_qubits)):
                out.append(Violation(i, "barrier-span", "barrier must span all qubits"))
        elif len(ins.qubits) != 1:
            out.append(Violation(i, "arity", f"{ins.kind.value} takes one qubit"))

        if (ins.angle is not None) != (ins.kind in ANGLED_KINDS):
            out.append(
                Violation(i, "angle", f"{ins.kind.value} angle field is wrong")
            )
        if (ins.clbit is not None) != (ins.kind is InstrKind.MEASURE):
            out.append(Violation(i, "clbit", f"{ins.kind.value} clbit field is wrong"))
        if (ins.condition is not None) != (ins.kind in CONDITIONED_KINDS):
            out.append(
                Violation(i, "condition", f"{ins.kind.value} condition field is wrong")
            )
        if ins.kind is InstrKind.DELAY:
            if not ins.duration > 0.0:
                out.append(Violation(i, "duration", "delay needs a positive duration"))
        elif ins.duration != 0.0:
            out.append(Violation(i, "duration", "only delay carries a duration"))

        if ins.kind is InstrKind.MEASURE and ins.clbit is not None:
            if not 0 <= ins.clbit < circuit.n_clbits:
                out.append(Violation(i, "clbit-range", f"clbit {ins.clbit} out of range"))
            elif ins.clbit in written:
                out.append(
                    Violation(
                        i,
                        "clbit-reuse",
                        f"clbit {ins.clbit} already written at {written[ins.clbit]}",
                    )
                )
            else:
                written[ins.clbit] = i
        if ins.condition is not None:
            if not 0 <= ins.condition < circuit.n_clbits:
                out.append(
                    Violation(i, "condition-range", f"clbit {ins.condition} out of range")
                )
            elif ins.condition not in written:
                out.append(
                    Violation(
                        i,
                        "condition-unwritten",
                        f"clbit {ins.condition} read before any measurement writes it",
                    )
                )

        if ins.kind is not InstrKind.BARRIER:
            for q in ins.qubits:
                if q in measured:
                    out.append(
                        Violation(
                            i,
                            "post-measure",
                            f"qubit {q} used after its measurement at {measured[q]}",
                        )
                    )
        if ins.kind is InstrKind.MEASURE:
            for q in ins.qubits:
                measured.setdefault(q, i)

    return out


def require_valid(circuit: Circuit) -> None:
    """Raise ValueError listing every violation, if any."""
    problems = validate(circuit)
    if problems:
        lines = "; ".join(f"[{v.index}] {v.code}: {v.message}" for v in problems)
        raise ValueError(f"invalid circuit: {lines}")


@dataclass(frozen=True)
class CircuitStats:
    n_qubits: int
    n_clbits: int
    gate_counts: dict
    two_qubit_gate_count: int
    measurement_count: int
    mid_circuit_measurement_count: int
    conditioned_gate_count: int
    depth: int
    total_idle_time_per_qubit: tuple[float, ...]


def stats(circuit: Circuit) -> CircuitStats:
    """Static counts, depth, and explicit per-qubit delay totals.

    A measurement is mid-circuit when some later non-barrier instruction
    either touches the same qubit or is conditioned on the clbit it wrote.
    Depth counts each non-barrier instruction as one level on every wire it
    touches (its qubits plus any clbit written or read); barriers align
    qubit levels without adding one.
    """
    counts: dict[str, int] = {}
    two_q = 0
    n_meas = 0
    mid = 0
    conditioned = 0
    idle = [0.0] * circuit.n_qubits

    instrs = circuit.instructions
    for i, ins in enumerate(instrs):
        counts[ins.kind.value] = counts.get(ins.kind.value, 0) + 1
        if ins.kind is InstrKind.CPHASE:
            two_q += 1
        if ins.condition is not None:
            conditioned += 1
        if ins.kind is InstrKind.DELAY:
            for q in ins.qubits:
                if 0 <= q < circuit.n_qubits:
                    idle[q] += ins.duration
        if ins.kind is InstrKind.MEASURE:
            n_meas += 1
            q = ins.qubits[0]
            c = ins.clbit
            for later in instrs[i + 1 :]:
                if later.kind is InstrKind.BARRIER:
                    continue
                if q in later.qubits or (c is not None and later.condition == c):
                    mid += 1
                    break

    # Wire-level depth: qubits first, then clbits.
    levels = [0] * (circuit.n_qubits + max(circuit.n_clbits, 0))
    for ins in instrs:
        wires = [q for q in ins.qubits if 0 <= q < circuit.n_qubits]
        if ins.kind is InstrKind.BARRIER:
            if wires:
                top = max(levels[q] for q in wires)
                for q in wires:
                    levels[q] = top
            continue
        for c in (ins.clbit, ins.condition):
            if c is not None and 0 <= c < circuit.n_clbits:
                wires.append(circuit.n_qubits + c)
        if not wires:
            continue
        top = 1 + max(levels[w] for w in wires)
        for w in wires:
            levels[w] = top

    return CircuitStats(
        n_qubits=circuit.n_qubits,
        n_clbits=circuit.n_clbits,
        gate_counts=counts,
        two_qubit_gate_count=two_q,
        measurement_count=n_meas,
        mid_circuit_measurement_count=mid,
        conditioned_gate_count=conditioned,
        depth=max(levels) if levels else 0,
        total_idle_time_per_qubit=tuple(idle),
    )
