"""Shared helpers: random valid circuits and small linear-algebra oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest

from dynqft import Angle, Circuit, Instruction


def dft_matrix(n_qubits: int) -> np.ndarray:
    """W[k, j] = exp(2*pi*i*k*j/d)/sqrt(d), the transform both builders target."""
    d = 1 << n_qubits
    j = np.arange(d)
    return np.exp(2j * math.pi * np.outer(j, j) / d) / math.sqrt(d)


def random_angle(rng: np.random.Generator) -> Angle:
    if rng.random() < 0.6:
        num = int(rng.integers(-9, 10))
        den = int(rng.integers(0, 4))
        return Angle.dyadic_pi(num, den)
    return Angle.from_radians(float(rng.uniform(-6.0, 6.0)))


def random_circuit(
    rng: np.random.Generator,
    n_qubits: int,
    length: int,
    *,
    allow_measure: bool = True,
    allow_conditioned: bool = True,
    measure_all: bool = False,
) -> Circuit:
    """A structurally valid random circuit.

    Respects the register rules: measured qubits receive nothing further,
    clbits are written once, and conditions only read bits already
    written. With measure_all, every surviving qubit is measured at the
    end onto the remaining clbits in a random order."""
    n_clbits = n_qubits if allow_measure else 0
    instructions: list[Instruction] = []
    measured: set[int] = set()
    written: list[int] = []
    free_clbits = list(range(n_clbits))

    for _ in range(length):
        live = [q for q in range(n_qubits) if q not in measured]
        if not live:
            break
        roll = rng.random()
        q = int(rng.choice(live))
        if roll < 0.18:
            instructions.append(Instruction.h(q))
        elif roll < 0.28:
            instructions.append(
                Instruction.x(q) if rng.random() < 0.5 else Instruction.y(q)
            )
        elif roll < 0.42:
            instructions.append(Instruction.rz(random_angle(rng), q))
        elif roll < 0.62 and len(live) >= 2:
            p = int(rng.choice([x for x in live if x != q]))
            instructions.append(Instruction.cphase(random_angle(rng), q, p))
        elif roll < 0.70:
            instructions.append(
                Instruction.delay(float(rng.integers(1, 400)), q)
            )
        elif roll < 0.74:
            instructions.append(Instruction.barrier(n_qubits))
        elif roll < 0.86 and allow_conditioned and written:
            c = int(rng.choice(written))
            if rng.random() < 0.5:
                instructions.append(
                    Instruction.classical_rz(random_angle(rng), q, c)
                )
            else:
                instructions.append(Instruction.classical_x(q, c))
        elif allow_measure and free_clbits and len(live) > 1:
            c = free_clbits.pop(int(rng.integers(len(free_clbits))))
            instructions.append(Instruction.measure(q, c))
            measured.add(q)
            written.append(c)

    if measure_all and allow_measure:
        live = [q for q in range(n_qubits) if q not in measured]
        rng.shuffle(live)
        for q in live:
            c = free_clbits.pop(int(rng.integers(len(free_clbits))))
            instructions.append(Instruction.measure(q, c))
    return Circuit(n_qubits, n_clbits, instructions)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260822)
