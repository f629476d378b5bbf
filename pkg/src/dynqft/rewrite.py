"""Measurement advancing: trade controlled phases for conditioned ones.

A controlled phase whose control is measured later can be replaced by a
classically conditioned phase on the other qubit, once the measurement is
moved up to just after the control's last real gate. Applying this across
a circuit converts a fan of two-qubit gates into single-qubit rotations
driven by feed-forward, at the cost of mid-circuit measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import Circuit, Instruction, InstrKind, require_valid, stats

__all__ = ["RewriteReport", "advance_measurements"]


@dataclass(frozen=True)
class RewriteReport:
    """What a rewrite pass did.

    unconverted_gate_indices lists original positions of controlled phases
    that touch a measured qubit but could not be converted; when verify is
    requested, max_total_variation is the worst output-distribution
    disagreement between the original and rewritten circuits over the
    probed input states."""

    circuit: Circuit
    removed_two_qubit_gates: int
    added_mid_circuit_measurements: int
    unconverted_gate_indices: tuple[int, ...]
    max_total_variation: float | None = None


def advance_measurements(
    circuit: Circuit,
    *,
    verify: bool = False,
    n_random: int = 6,
    seed: int = 20260822,
) -> RewriteReport:
    """Hoist measurements and convert controlled phases they unlock.

    Each measurement is processed in program order. Scanning back from it,
    controlled phases touching the measured qubit are collected until the
    qubit's last other instruction (a blocker: any gate, conditioned
    operation, delay, or barrier on it). The measurement moves to just
    after the blocker and the collected gates become phase rotations on
    their other qubit, conditioned on the fresh record bit. Gates at or
    before the blocker stay two-qubit and are reported; if any collected
    gate was already given up on, the whole group is left untouched so the
    circuit never ends up half-converted around one measurement.
    """
    require_valid(circuit)
    work: list[tuple[int, Instruction]] = list(enumerate(circuit.instructions))
    frozen: set[int] = set()
    converted: set[int] = set()
    touches_measured: set[int] = set()

    measure_order = [
        oi for oi, ins in work if ins.kind is InstrKind.MEASURE
    ]
    for mi in measure_order:
        pos = next(p for p, (oi, _) in enumerate(work) if oi == mi)
        meas = work[pos][1]
        q = meas.qubits[0]

        blocker = -1
        window: list[int] = []
        for p in range(pos - 1, -1, -1):
            oi, ins = work[p]
            if q not in ins.qubits:
                continue
            if ins.kind is InstrKind.CPHASE:
                window.append(p)
            else:
                blocker = p
                break
        window.reverse()

        for p in range(blocker):
            oi, ins = work[p]
            if ins.kind is InstrKind.CPHASE and q in ins.qubits:
                frozen.add(oi)
                touches_measured.add(oi)
        for p in window:
            touches_measured.add(work[p][0])

        if any(work[p][0] in frozen for p in window):
            for p in window:
                frozen.add(work[p][0])
            continue

        for p in window:
            oi, gate = work[p]
            partner = gate.qubits[1] if gate.qubits[0] == q else gate.qubits[0]
            work[p] = (
                oi,
                Instruction.classical_rz(gate.angle, partner, meas.clbit),
            )
            converted.add(oi)
        del work[pos]
        work.insert(blocker + 1, (mi, meas))

    rewritten = circuit.with_instructions([ins for _, ins in work])
    require_valid(rewritten)

    before = stats(circuit)
    after = stats(rewritten)
    unconverted = tuple(sorted((frozen | touches_measured) - converted))

    max_tv = None
    if verify:
        from .sim import verify_equivalence

        max_tv = verify_equivalence(
            circuit, rewritten, n_random=n_random, seed=seed
        )

    return RewriteReport(
        circuit=rewritten,
        removed_two_qubit_gates=before.two_qubit_gate_count
        - after.two_qubit_gate_count,
        added_mid_circuit_measurements=after.mid_circuit_measurement_count
        - before.mid_circuit_measurement_count,
        unconverted_gate_indices=unconverted,
        max_total_variation=max_tv,
    )
