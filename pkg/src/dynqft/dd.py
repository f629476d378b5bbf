"""Dynamical decoupling: fill scheduled idle windows with pulse trains.

Supported sequences, per idle window:

  none   explicit delays only (makes the idle time visible, no pulses)
  x2     two X pulses, a basic echo
  xy4    X-Y-X-Y, robust to pulse axis errors
  ur<p>  p-pulse universally robust train, phases advancing quadratically
  fc_dd  feed-forward-compensated scheme: spectator windows that sit under
         a neighbor's readout-then-feed-forward get an XY4 train squeezed
         into the surplus readout time plus an echo pair bracketing the
         feed-forward span, so even latency no pulse may sit inside is
         refocused

Pulse spacing follows the balanced-comb rule (half gaps at the ends), so
the accumulated detuning phase of a filled window telescopes to exactly
zero in floating point. Windows too short for the requested train fall
back to shorter trains (recorded in metadata), and trailing idle after a
qubit's last instruction is left open since nothing observes it.
"""

from __future__ import annotations

import math
import re

from .certify import FidelityEstimate, sampled_process_fidelity
from .ir import Circuit, Instruction
from .sim import NoiseModel
from .timing import TimingModel, WindowKind, find_idle_windows

__all__ = ["SEQUENCES", "dd_effectiveness", "insert_dd", "ur_phases"]

SEQUENCES = ("none", "x2", "xy4", "ur<p>", "fc_dd")

_UR_RE = re.compile(r"^ur([0-9]+)$")
_HALF_PI = 0.5 * math.pi


def ur_phases(p: int) -> list[float]:
    """Pulse phases of the p-pulse universally robust train.

    The phase step is 4*pi/p when p is a multiple of four, else
    2*m*pi/(2*m+1) with m = (p-2)/4; pulse k carries (k-1)^2 times half
    the step, which reduces to X-Y-X-Y at p = 4."""
    if p < 4 or p % 2:
        raise ValueError("universally robust trains need an even p >= 4")
    if p % 4 == 0:
        big = 4.0 * math.pi / p
    else:
        m = (p - 2) // 4
        big = 2.0 * m * math.pi / (2 * m + 1)
    return [0.5 * big * k * k for k in range(p)]


def _pulse(qubit: int, phase: float) -> list[Instruction]:
    """One pi pulse about the axis at `phase` in the XY plane."""
    phase = math.fmod(phase, 2.0 * math.pi)
    if phase < 0:
        phase += 2.0 * math.pi
    if abs(phase) < 1e-12 or abs(phase - 2.0 * math.pi) < 1e-12:
        return [Instruction.x(qubit)]
    if abs(phase - _HALF_PI) < 1e-12:
        return [Instruction.y(qubit)]
    return [
        Instruction.rz(-phase, qubit),
        Instruction.x(qubit),
        Instruction.rz(phase, qubit),
    ]


def _train(name: str, qubit: int) -> list[list[Instruction]]:
    if name == "x2":
        return [[Instruction.x(qubit)], [Instruction.x(qubit)]]
    if name == "xy4":
        return [_pulse(qubit, 0.0), _pulse(qubit, _HALF_PI)] * 2
    match = _UR_RE.match(name)
    if match:
        return [_pulse(qubit, phi) for phi in ur_phases(int(match.group(1)))]
    raise ValueError(f"unknown pulse train {name!r}")


def _comb(
    qubit: int, duration: float, pulses: list[list[Instruction]], t_pulse: float
) -> list[Instruction] | None:
    """Balanced comb of the pulses over `duration`, or None if they don't fit.

    Gaps are mid = duration/N - t_pulse between pulses and mid/2 at both
    ends; halving is exact in floating point, so the signed gap sum under
    sign-flipping pulses cancels to exactly 0.0."""
    n = len(pulses)
    if n == 0:
        return [Instruction.delay(duration, qubit)] if duration > 0 else []
    mid = duration / n - t_pulse
    if mid < 0:
        return None
    edge = 0.5 * mid
    out: list[Instruction] = []
    if edge > 0:
        out.append(Instruction.delay(edge, qubit))
    for i, pulse in enumerate(pulses):
        if i and mid > 0:
            out.append(Instruction.delay(mid, qubit))
        out.extend(pulse)
    if edge > 0:
        out.append(Instruction.delay(edge, qubit))
    return out


_FALLBACK = {"x2": ["x2"], "xy4": ["xy4", "x2"]}


def _fill_with_fallback(
    qubit: int, duration: float, name: str, t_pulse: float, fallbacks: dict
) -> list[Instruction]:
    chain = _FALLBACK.get(name, [name, "xy4", "x2"])
    for cand in chain:
        fill = _comb(qubit, duration, _train(cand, qubit), t_pulse)
        if fill is not None:
            if cand != name:
                fallbacks[cand] = fallbacks.get(cand, 0) + 1
            return fill
    fallbacks["none"] = fallbacks.get("none", 0) + 1
    return _comb(qubit, duration, [], t_pulse)


def insert_dd(
    circuit: Circuit, sequence: str, timing: TimingModel | None = None
) -> Circuit:
    """Fill every idle window with the named sequence; reports in metadata.

    The result schedules identically to the input (fills occupy exactly
    their window) and is unitarily equivalent to it: every train's pulse
    product is the identity up to a global phase."""
    timing = timing or TimingModel()
    name = sequence.lower()
    if name not in ("none", "fc_dd", "x2", "xy4") and not _UR_RE.match(name):
        raise ValueError(f"unknown sequence {sequence!r}")
    if _UR_RE.match(name):
        ur_phases(int(_UR_RE.match(name).group(1)))  # validate p early

    windows = [w for w in find_idle_windows(circuit, timing) if w.next_index is not None]
    t_pulse = timing.t_1q_gate
    fallbacks: dict[str, int] = {}
    warnings: list[str] = []
    fills: dict[int, list[Instruction]] = {}

    groups: list[tuple[int, int, list]] = []
    for w in windows:
        if groups and groups[-1][0] == w.qubit and groups[-1][1] == w.next_index:
            groups[-1][2].append(w)
        else:
            groups.append((w.qubit, w.next_index, [w]))

    for qubit, next_index, pieces in groups:
        out = fills.setdefault(next_index, [])
        if name == "none":
            for w in pieces:
                out.append(Instruction.delay(w.duration, qubit))
        elif name != "fc_dd":
            for w in pieces:
                if w.kind is WindowKind.FEEDFORWARD_CONCURRENT:
                    out.append(Instruction.delay(w.duration, qubit))
                else:
                    out.extend(
                        _fill_with_fallback(qubit, w.duration, name, t_pulse, fallbacks)
                    )
        else:
            i = 0
            while i < len(pieces):
                w = pieces[i]
                nxt = pieces[i + 1] if i + 1 < len(pieces) else None
                pair = (
                    w.kind is WindowKind.READOUT_CONCURRENT
                    and nxt is not None
                    and nxt.kind is WindowKind.FEEDFORWARD_CONCURRENT
                    and abs(nxt.start - w.end) < 1e-6
                )
                if pair:
                    span = nxt.duration
                    surplus = w.duration - span
                    if t_pulse == 0.0 and surplus >= 0.0:
                        out.extend(
                            _comb(qubit, surplus, _train("xy4", qubit), 0.0)
                        )
                        out.append(Instruction.delay(span, qubit))
                        out.append(Instruction.x(qubit))
                        out.append(Instruction.delay(span, qubit))
                        out.append(Instruction.x(qubit))
                    else:
                        out.extend(
                            _fill_with_fallback(
                                qubit, w.duration, "xy4", t_pulse, fallbacks
                            )
                        )
                        out.append(Instruction.delay(span, qubit))
                        warnings.append(
                            f"qubit {qubit}: feed-forward span of {span:g} "
                            "left unrefocused (no room to bracket it)"
                        )
                    i += 2
                elif w.kind is WindowKind.FEEDFORWARD_CONCURRENT:
                    out.append(Instruction.delay(w.duration, qubit))
                    warnings.append(
                        f"qubit {qubit}: unpaired feed-forward window at "
                        f"{w.start:g} left unprotected"
                    )
                    i += 1
                else:
                    out.extend(
                        _fill_with_fallback(qubit, w.duration, "xy4", t_pulse, fallbacks)
                    )
                    i += 1

    new_instructions: list[Instruction] = []
    for i, ins in enumerate(circuit.instructions):
        new_instructions.extend(fills.get(i, ()))
        new_instructions.append(ins)
    report = {"sequence": name, "fallbacks": fallbacks, "warnings": tuple(warnings)}
    return circuit.with_instructions(new_instructions).with_metadata(dd=report)


def dd_effectiveness(
    circuit: Circuit,
    sequences,
    *,
    noise: NoiseModel,
    timing: TimingModel | None = None,
    m: int = 20,
    shots: int = 2000,
    seed: int = 7,
    mitigate: bool = False,
) -> dict[str, FidelityEstimate]:
    """Sampled channel fidelity of the circuit under each sequence."""
    out: dict[str, FidelityEstimate] = {}
    for name in sequences:
        filled = insert_dd(circuit, name, timing)
        out[name] = sampled_process_fidelity(
            filled,
            m=m,
            shots=shots,
            seed=seed,
            noise=noise,
            timing=timing,
            mitigate=mitigate,
        )
    return out
