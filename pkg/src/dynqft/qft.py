"""Quantum Fourier transform circuit builders.

Two constructions of the n-qubit QFT followed by measurement of every
qubit: a unitary form with n(n-1)/2 controlled-phase gates, and a dynamic
form that measures each qubit as soon as its Hadamard has run and replaces
every controlled phase with a classically conditioned single-qubit phase,
so the two-qubit gate count drops to zero and the circuit uses n-1
mid-circuit measurements instead.

Qubit j ends up holding the output bit of weight 2**j, so both builders
record qubit j into clbit n-1-j and the recorded integer (clbit 0 = MSB)
is the transform outcome directly.
"""

from __future__ import annotations

from .ir import Angle, Circuit, Instruction

__all__ = [
    "build_dynamic_qft",
    "build_unitary_qft",
    "compose",
    "prepare_fourier_state",
    "prepare_periodic_state",
]


def build_unitary_qft(n: int) -> Circuit:
    """Textbook QFT: per qubit a Hadamard then controlled phases
    cphase(2*pi/2**m) against each later qubit, measurements at the end."""
    if n < 1:
        raise ValueError("need at least one qubit")
    instrs: list[Instruction] = []
    for j in range(n):
        instrs.append(Instruction.h(j))
        for m in range(2, n - j + 1):
            instrs.append(Instruction.cphase(Angle.dyadic_pi(2, m), j, j + m - 1))
    for j in range(n):
        instrs.append(Instruction.measure(j, n - 1 - j))
    return Circuit(n, n, tuple(instrs), {"variant": "unitary", "n": n})


def build_dynamic_qft(n: int) -> Circuit:
    """Measurement-based QFT: measure each qubit right after its Hadamard
    and steer the remaining qubits with conditioned phase gates."""
    if n < 1:
        raise ValueError("need at least one qubit")
    instrs: list[Instruction] = []
    for j in range(n):
        instrs.append(Instruction.h(j))
        instrs.append(Instruction.measure(j, n - 1 - j))
        for i in range(j + 1, n):
            instrs.append(
                Instruction.classical_rz(Angle.dyadic_pi(2, i - j + 1), i, n - 1 - j)
            )
    return Circuit(n, n, tuple(instrs), {"variant": "dynamic", "n": n})


def prepare_fourier_state(n: int, k: int) -> Circuit:
    """Product state with amplitudes exp(-2*pi*i*k*j/2**n)/sqrt(2**n).

    Feeding it to either QFT builder yields outcome k with certainty:
    qubit q gets a Hadamard and the phase -2*pi*k/2**(q+1) on |1>.
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    if not 0 <= k < 2**n:
        raise ValueError(f"k must be in [0, {2**n})")
    instrs: list[Instruction] = []
    for q in range(n):
        instrs.append(Instruction.h(q))
        angle = Angle.dyadic_pi(-2 * k, q + 1)
        if angle.dyadic != (0, 0):
            instrs.append(Instruction.rz(angle, q))
    return Circuit(n, 0, tuple(instrs), {"state": "fourier", "k": k})


def prepare_periodic_state(n: int, period: int, offset: int) -> Circuit:
    """Uniform superposition over {offset + period*t}, period a power of two.

    High qubits (weights >= period) get Hadamards; the low qubits are set
    to the bits of offset. The QFT of this state peaks on the period
    multiples of 2**n / period, each with probability 1/period.
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    if period < 1 or period > 2**n or period & (period - 1):
        raise ValueError("period must be a power of two within register range")
    if not 0 <= offset < period:
        raise ValueError("offset must satisfy 0 <= offset < period")
    p = period.bit_length() - 1
    instrs: list[Instruction] = []
    for q in range(n - p):
        instrs.append(Instruction.h(q))
    for q in range(n - p, n):
        if (offset >> (n - 1 - q)) & 1:
            instrs.append(Instruction.x(q))
    return Circuit(
        n, 0, tuple(instrs), {"state": "periodic", "period": period, "offset": offset}
    )


def compose(first: Circuit, second: Circuit) -> Circuit:
    """Concatenate two circuits on the same qubit register."""
    if first.n_qubits != second.n_qubits:
        raise ValueError("qubit counts differ")
    meta = dict(first.metadata)
    meta.update(second.metadata)
    return Circuit(
        first.n_qubits,
        max(first.n_clbits, second.n_clbits),
        first.instructions + second.instructions,
        meta,
    )
