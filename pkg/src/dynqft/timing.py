"""Instruction timing, ASAP schedules, and idle-window analysis.

Durations are in nanoseconds. A measurement occupies its qubit for the
readout pulse plus the post-measurement delay; a classically conditioned
gate cannot start until the measurement result has also crossed the
feed-forward latency. Idle windows are the per-qubit gaps of the schedule,
split and tagged by what the rest of the device is doing during them, so a
decoupling pass can treat time under readout or feed-forward differently.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .ir import Circuit, InstrKind, Instruction

__all__ = [
    "IdleWindow",
    "Schedule",
    "TimingModel",
    "WindowKind",
    "compute_schedule",
    "find_idle_windows",
]


@dataclass(frozen=True)
class TimingModel:
    """Durations of the primitive operations, in nanoseconds.

    Defaults: instantaneous single-qubit pulses and virtual phase gates, a
    placeholder two-qubit gate, and a 781 + 463 ns measurement followed by a
    653 ns feed-forward latency before a conditioned gate may fire.
    """

    t_1q_gate: float = 0.0
    t_cphase: float = 300.0
    t_measure_pulse: float = 781.0
    t_post_measure_delay: float = 463.0
    t_ff: float = 653.0

    @property
    def t_readout(self) -> float:
        return self.t_measure_pulse + self.t_post_measure_delay

    def duration_of(self, ins: Instruction) -> float:
        kind = ins.kind
        if kind in (InstrKind.H, InstrKind.X, InstrKind.Y, InstrKind.CLASSICAL_X):
            return self.t_1q_gate
        if kind in (InstrKind.RZ, InstrKind.CLASSICAL_RZ):
            return 0.0  # virtual phase gates
        if kind is InstrKind.CPHASE:
            return self.t_cphase
        if kind is InstrKind.MEASURE:
            return self.t_readout
        if kind is InstrKind.DELAY:
            return ins.duration
        return 0.0  # barrier


@dataclass(frozen=True)
class Schedule:
    """Start/end times per instruction under ASAP list scheduling.

    ``readout_spans`` holds (start, end, qubit) for every measurement;
    ``ff_spans`` holds (start, end, clbit) for the feed-forward latency of
    measurements whose result some later gate is conditioned on.
    """

    starts: tuple[float, ...]
    ends: tuple[float, ...]
    duration: float
    readout_spans: tuple[tuple[float, float, int], ...]
    ff_spans: tuple[tuple[float, float, int], ...]


def compute_schedule(circuit: Circuit, timing: TimingModel) -> Schedule:
    """ASAP schedule in program order: each instruction starts as soon as
    its qubits are free and, for conditioned gates, its clbit has arrived."""
    qubit_free = [0.0] * circuit.n_qubits
    clbit_ready: dict[int, float] = {}
    conditioned = {
        ins.condition for ins in circuit.instructions if ins.condition is not None
    }
    starts: list[float] = []
    ends: list[float] = []
    readout_spans: list[tuple[float, float, int]] = []
    ff_spans: list[tuple[float, float, int]] = []

    for ins in circuit.instructions:
        if ins.kind is InstrKind.BARRIER:
            t = max((qubit_free[q] for q in ins.qubits), default=0.0)
            for q in ins.qubits:
                qubit_free[q] = t
            starts.append(t)
            ends.append(t)
            continue
        t = max((qubit_free[q] for q in ins.qubits), default=0.0)
        if ins.condition is not None:
            t = max(t, clbit_ready.get(ins.condition, 0.0))
        end = t + timing.duration_of(ins)
        for q in ins.qubits:
            qubit_free[q] = end
        if ins.kind is InstrKind.MEASURE:
            readout_spans.append((t, end, ins.qubits[0]))
            clbit_ready[ins.clbit] = end + timing.t_ff
            if ins.clbit in conditioned:
                ff_spans.append((end, end + timing.t_ff, ins.clbit))
        starts.append(t)
        ends.append(end)

    return Schedule(
        starts=tuple(starts),
        ends=tuple(ends),
        duration=max(ends, default=0.0),
        readout_spans=tuple(readout_spans),
        ff_spans=tuple(ff_spans),
    )


class WindowKind(Enum):
    PLAIN = "plain"
    READOUT_CONCURRENT = "readout"
    FEEDFORWARD_CONCURRENT = "feedforward"


@dataclass(frozen=True)
class IdleWindow:
    """One maximal idle piece on one qubit.

    ``next_index`` is the instruction the window runs into, or None for a
    trailing window that ends with the circuit. Pieces never straddle a
    readout or feed-forward boundary; a piece under feed-forward is tagged
    FEEDFORWARD_CONCURRENT even when a readout is also in flight."""

    qubit: int
    start: float
    end: float
    kind: WindowKind
    next_index: int | None

    @property
    def duration(self) -> float:
        return self.end - self.start


def _classify(start: float, end: float, schedule: Schedule) -> WindowKind:
    for s, e, _ in schedule.ff_spans:
        if s < end and e > start:
            return WindowKind.FEEDFORWARD_CONCURRENT
    for s, e, _ in schedule.readout_spans:
        if s < end and e > start:
            return WindowKind.READOUT_CONCURRENT
    return WindowKind.PLAIN


# Gaps shorter than this (in the same time unit as TimingModel, i.e. ns)
# are treated as scheduling round-off, not real idle time.
GAP_TOLERANCE = 1e-9


def _split_gap(
    qubit: int, a: float, b: float, next_index: int | None, schedule: Schedule
) -> list[IdleWindow]:
    cuts = {a, b}
    for spans in (schedule.readout_spans, schedule.ff_spans):
        for s, e, _ in spans:
            for t in (s, e):
                if a < t < b:
                    cuts.add(t)
    edges = sorted(cuts)
    return [
        IdleWindow(qubit, lo, hi, _classify(lo, hi, schedule), next_index)
        for lo, hi in zip(edges, edges[1:])
        if hi - lo > GAP_TOLERANCE
    ]


def find_idle_windows(circuit: Circuit, timing: TimingModel) -> list[IdleWindow]:
    """All idle windows of the schedule, in (qubit, start) order.

    Windows after a qubit's measurement do not exist (the qubit is done),
    and a qubit with no instructions at all reports none. Barriers
    terminate windows without occupying time.
    """
    sched = compute_schedule(circuit, timing)
    out: list[IdleWindow] = []
    for q in range(circuit.n_qubits):
        events = [
            (sched.starts[i], sched.ends[i], i)
            for i, ins in enumerate(circuit.instructions)
            if q in ins.qubits
        ]
        if not events:
            continue
        prev_end = 0.0
        measured = False
        for s, e, i in events:
            if s > prev_end + GAP_TOLERANCE:
                out.extend(_split_gap(q, prev_end, s, i, sched))
            prev_end = max(prev_end, e)
            if circuit.instructions[i].kind is InstrKind.MEASURE:
                measured = True
                break
        if not measured and prev_end < sched.duration - GAP_TOLERANCE:
            out.extend(_split_gap(q, prev_end, sched.duration, None, sched))
    out.sort(key=lambda w: (w.qubit, w.start))
    return out
