"""Circuit simulation: exact statevector, noisy trajectories, density matrix.

Three engines share one gate convention set:

- ``run_exact``: noiseless outcome distribution. Conditioned gates are
  handled by promoting them to controlled gates on the measured qubit,
  which is exact because measured qubits receive no further gates.
- ``run_trajectories``: per-shot Monte Carlo with depolarizing gate noise,
  readout misassignment, quasi-static idle detuning, and an optional pulse
  over-rotation knob. Per-shot substreams make results independent of the
  internal gate-fusion optimizations.
- ``run_density_matrix``: exact noisy evolution for small registers.
  Measurements become dephase-plus-flip channels on the qubit itself, so
  no branching is needed; quasi-static detuning is averaged analytically
  per qubit with a signed idle-time accumulator.

Noise conventions: depolarizing with probability p replaces the acted
qubits by the maximally mixed state (uniform over all 4**k Paulis, identity
included), so p=1 is exactly fully depolarizing. Readout error flips the
recorded bit only; conditioned gates read the flipped record. Phase gates
are virtual and noiseless. Idle detuning is a per-qubit frequency offset
drawn once per shot from N(0, sigma) and applied as a phase over every
scheduled idle nanosecond (feed-forward waits included unless switched
off).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ir import Circuit, InstrKind, require_valid
from .timing import TimingModel, WindowKind, find_idle_windows

__all__ = [
    "NoiseModel",
    "OutcomeDistribution",
    "SampleResult",
    "evolve_density",
    "run_density_matrix",
    "run_exact",
    "run_trajectories",
    "verify_equivalence",
]

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_I2 = np.eye(2, dtype=complex)
_PAULIS = (_I2, _X, _Y, _Z)


@dataclass(frozen=True)
class NoiseModel:
    """Error parameters; all defaults zero gives ideal execution.

    p1/p2: depolarizing probability after each real one-/two-qubit gate
    (phase gates are virtual and exempt). eps_ro: probability each
    measurement records the wrong bit. idle_detuning_sigma: std dev, in
    rad/ns, of the per-shot per-qubit quasi-static detuning accumulated
    over idle time. apply_idle_during_feedforward: whether idle time spent
    waiting on feed-forward also dephases. pulse_over_rotation: radians
    added to the rotation angle of every X/Y pulse."""

    p1: float = 0.0
    p2: float = 0.0
    eps_ro: float = 0.0
    idle_detuning_sigma: float = 0.0
    apply_idle_during_feedforward: bool = True
    pulse_over_rotation: float = 0.0


def _pulse(axis: str, over_rotation: float) -> np.ndarray:
    if over_rotation == 0.0:
        return _X if axis == "x" else _Y
    half = 0.5 * (math.pi + over_rotation)
    gen = _X if axis == "x" else _Y
    # i * exp(-i (pi+eps)/2 * axis): reduces to the bare pulse at eps = 0
    return 1j * (math.cos(half) * _I2 - 1j * math.sin(half) * gen)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities over recorded clbit integers (clbit 0 = MSB).

    Unwritten clbits read as 0. Only outcomes with nonzero probability are
    stored."""

    n_clbits: int
    probs: dict

    def prob(self, outcome: int) -> float:
        return self.probs.get(outcome, 0.0)

    def bitstring(self, outcome: int) -> str:
        return format(outcome, f"0{self.n_clbits}b") if self.n_clbits else ""

    def total_variation(self, other: OutcomeDistribution) -> float:
        keys = set(self.probs) | set(other.probs)
        return 0.5 * sum(abs(self.prob(k) - other.prob(k)) for k in keys)

    def sorted_items(self) -> list[tuple[int, float]]:
        return sorted(self.probs.items())


@dataclass(frozen=True)
class SampleResult:
    """Counted shot outcomes from the trajectory engine."""

    n_clbits: int
    shots: int
    counts: dict

    def frequency(self, outcome: int) -> float:
        return self.counts.get(outcome, 0) / self.shots

    def empirical(self) -> OutcomeDistribution:
        return OutcomeDistribution(
            self.n_clbits, {k: v / self.shots for k, v in sorted(self.counts.items())}
        )


# ---------------------------------------------------------------------------
# statevector kernels (qubit 0 = most significant axis)


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    view = psi.reshape(1 << q, 2, 1 << (n - 1 - q))
    a = view[:, 0, :].copy()
    b = view[:, 1, :]
    view[:, 0, :] = u[0, 0] * a + u[0, 1] * b
    view[:, 1, :] = u[1, 0] * a + u[1, 1] * b
    return psi


def _apply_diag1(psi: np.ndarray, phase: complex, q: int, n: int) -> np.ndarray:
    view = psi.reshape(1 << q, 2, 1 << (n - 1 - q))
    view[:, 1, :] *= phase
    return psi


def _both_ones_view(psi: np.ndarray, qa: int, qb: int, n: int):
    lo, hi = min(qa, qb), max(qa, qb)
    view = psi.reshape(
        1 << lo, 2, 1 << (hi - lo - 1), 2, 1 << (n - 1 - hi)
    )
    return view


def _apply_cphase(psi: np.ndarray, phase: complex, qa: int, qb: int, n: int) -> np.ndarray:
    view = _both_ones_view(psi, qa, qb, n)
    view[:, 1, :, 1, :] *= phase
    return psi


def _apply_cnot(psi: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    view = _both_ones_view(psi, control, target, n)
    if control < target:
        tmp = view[:, 1, :, 0, :].copy()
        view[:, 1, :, 0, :] = view[:, 1, :, 1, :]
        view[:, 1, :, 1, :] = tmp
    else:
        tmp = view[:, 0, :, 1, :].copy()
        view[:, 0, :, 1, :] = view[:, 1, :, 1, :]
        view[:, 1, :, 1, :] = tmp
    return psi


def _bit_prob(psi: np.ndarray, q: int, n: int) -> float:
    view = psi.reshape(1 << q, 2, 1 << (n - 1 - q))
    return float(np.sum(np.abs(view[:, 1, :]) ** 2))


def _collapse(psi: np.ndarray, q: int, n: int, outcome: int, prob: float) -> np.ndarray:
    view = psi.reshape(1 << q, 2, 1 << (n - 1 - q))
    view[:, 1 - outcome, :] = 0.0
    psi *= 1.0 / math.sqrt(prob)
    return psi


def _initial_state(n: int, input_state) -> np.ndarray:
    d = 1 << n
    if isinstance(input_state, Circuit):
        prep = input_state
        if prep.n_qubits != n:
            raise ValueError("preparation circuit has the wrong qubit count")
        bad = (InstrKind.MEASURE, InstrKind.CLASSICAL_RZ, InstrKind.CLASSICAL_X)
        if any(ins.kind in bad for ins in prep.instructions):
            raise ValueError("preparation circuit must be measurement free")
        require_valid(prep)
        psi = np.zeros(d, dtype=complex)
        psi[0] = 1.0
        for ins in prep.instructions:
            psi = _apply_gate_exact(psi, ins, n)
        return psi
    if isinstance(input_state, np.ndarray):
        if input_state.shape != (d,):
            raise ValueError(f"input state must have shape ({d},)")
        nrm = float(np.linalg.norm(input_state))
        if abs(nrm - 1.0) > 1e-8:
            raise ValueError("input state is not normalized")
        return input_state.astype(complex, copy=True)
    k = int(input_state)
    if not 0 <= k < d:
        raise ValueError(f"basis state {k} out of range")
    psi = np.zeros(d, dtype=complex)
    psi[k] = 1.0
    return psi


def _apply_gate_exact(psi: np.ndarray, ins, n: int) -> np.ndarray:
    kind = ins.kind
    if kind is InstrKind.H:
        return _apply_1q(psi, _H, ins.qubits[0], n)
    if kind is InstrKind.X:
        return _apply_1q(psi, _X, ins.qubits[0], n)
    if kind is InstrKind.Y:
        return _apply_1q(psi, _Y, ins.qubits[0], n)
    if kind is InstrKind.RZ:
        return _apply_diag1(psi, np.exp(1j * ins.angle.radians), ins.qubits[0], n)
    if kind is InstrKind.CPHASE:
        return _apply_cphase(
            psi, np.exp(1j * ins.angle.radians), ins.qubits[0], ins.qubits[1], n
        )
    return psi  # delay / barrier


def statevector(circuit: Circuit, input_state=0, *, max_qubits: int = 14) -> np.ndarray:
    """Final state of a measurement-free circuit, noiselessly evolved."""
    require_valid(circuit)
    n = circuit.n_qubits
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds max_qubits={max_qubits}")
    blocked = (InstrKind.MEASURE, InstrKind.CLASSICAL_RZ, InstrKind.CLASSICAL_X)
    psi = _initial_state(n, input_state)
    for ins in circuit.instructions:
        if ins.kind in blocked:
            raise ValueError("statevector needs a measurement-free circuit")
        psi = _apply_gate_exact(psi, ins, n)
    return psi


def run_exact(circuit: Circuit, input_state=0, *, max_qubits: int = 14) -> OutcomeDistribution:
    """Exact noiseless outcome distribution.

    Conditioned gates are replaced by controlled gates on the qubit that
    wrote the condition bit, which commutes with the terminal measurements,
    so one statevector pass suffices even for dynamic circuits."""
    require_valid(circuit)
    n = circuit.n_qubits
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds max_qubits={max_qubits}")
    psi = _initial_state(n, input_state)
    qubit_of_clbit: dict[int, int] = {}
    for ins in circuit.instructions:
        kind = ins.kind
        if kind is InstrKind.MEASURE:
            qubit_of_clbit[ins.clbit] = ins.qubits[0]
        elif kind is InstrKind.CLASSICAL_RZ:
            control = qubit_of_clbit[ins.condition]
            psi = _apply_cphase(
                psi, np.exp(1j * ins.angle.radians), control, ins.qubits[0], n
            )
        elif kind is InstrKind.CLASSICAL_X:
            psi = _apply_cnot(psi, qubit_of_clbit[ins.condition], ins.qubits[0], n)
        else:
            psi = _apply_gate_exact(psi, ins, n)

    probs = (np.abs(psi) ** 2).reshape([2] * n)
    written = sorted(qubit_of_clbit)
    meas_axes = [qubit_of_clbit[c] for c in written]
    other_axes = [q for q in range(n) if q not in meas_axes]
    marg = probs.transpose(meas_axes + other_axes).reshape(1 << len(meas_axes), -1)
    marg = marg.sum(axis=1)
    out: dict[int, float] = {}
    m = len(written)
    for idx in np.flatnonzero(marg > 1e-18):
        outcome = 0
        for i, c in enumerate(written):
            if (int(idx) >> (m - 1 - i)) & 1:
                outcome |= 1 << (circuit.n_clbits - 1 - c)
        out[outcome] = out.get(outcome, 0.0) + float(marg[idx])
    if not out:
        out = {0: 1.0}
    return OutcomeDistribution(circuit.n_clbits, out)


# ---------------------------------------------------------------------------
# idle exposure shared by the noisy engines


def _exposure_before(circuit: Circuit, timing: TimingModel, include_ff: bool):
    """Map instruction index -> [(qubit, idle ns)] accumulated right before it."""
    slots: dict[int, list[tuple[int, float]]] = {}
    for w in find_idle_windows(circuit, timing):
        if w.next_index is None:
            continue  # trailing idle is unobservable
        if not include_ff and w.kind is WindowKind.FEEDFORWARD_CONCURRENT:
            continue
        slots.setdefault(w.next_index, []).append((w.qubit, w.duration))
    return slots


# ---------------------------------------------------------------------------
# trajectory engine

_REAL_1Q = {InstrKind.H, InstrKind.X, InstrKind.Y}


@dataclass
class _Program:
    """Compiled per-shot op list."""

    n_qubits: int
    n_clbits: int
    ops: list = field(default_factory=list)
    site_probs: list = field(default_factory=list)
    uses_nu: bool = False


def _is_phase_identity(u: np.ndarray, tol: float = 1e-13) -> bool:
    return (
        abs(u[0, 1]) <= tol
        and abs(u[1, 0]) <= tol
        and abs(u[0, 0] - u[1, 1]) <= tol
        and abs(abs(u[0, 0]) - 1.0) <= tol
    )


def _compile_trajectory(circuit: Circuit, noise: NoiseModel, timing: TimingModel) -> _Program:
    n = circuit.n_qubits
    prog = _Program(n, circuit.n_clbits)
    sigma = noise.idle_detuning_sigma
    exposures = (
        _exposure_before(circuit, timing, noise.apply_idle_during_feedforward)
        if sigma > 0
        else {}
    )
    fuse_detuned = sigma > 0 and noise.p1 == 0.0 and noise.pulse_over_rotation == 0.0
    fuse_plain = sigma == 0.0 and noise.p1 == 0.0

    # pending per-qubit fused run: [matrix, nu coefficient, saw_any]
    pending: dict[int, list] = {}

    def flush(q: int) -> None:
        run = pending.pop(q, None)
        if run is None:
            return
        u, coeff, saw_gate = run
        if coeff == 0.0:
            if saw_gate and not _is_phase_identity(u):
                prog.ops.append(("1q", q, u))
            return
        prog.uses_nu = True
        if saw_gate:
            prog.ops.append(("fused", q, u, coeff))
        else:
            prog.ops.append(("detune", q, coeff))

    def feed_detune(q: int, dt: float) -> None:
        if fuse_detuned:
            run = pending.setdefault(q, [_I2.copy(), 0.0, False])
            run[1] += dt
        else:
            prog.uses_nu = True
            prog.ops.append(("detune", q, dt))

    def feed_1q(q: int, u: np.ndarray, flips_sign: bool) -> None:
        if fuse_detuned or fuse_plain:
            run = pending.setdefault(q, [_I2.copy(), 0.0, False])
            if flips_sign:
                run[1] = -run[1]
            run[0] = u @ run[0]
            run[2] = True
        else:
            prog.ops.append(("1q", q, u))

    def add_site(p: float) -> int:
        prog.site_probs.append(p)
        return len(prog.site_probs) - 1

    x_pulse = _pulse("x", noise.pulse_over_rotation)
    y_pulse = _pulse("y", noise.pulse_over_rotation)

    for i, ins in enumerate(circuit.instructions):
        for q, dt in exposures.get(i, ()):  # idle dephasing precedes the op
            feed_detune(q, dt)
        kind = ins.kind
        if kind is InstrKind.BARRIER:
            continue
        if kind is InstrKind.DELAY:
            if sigma > 0:  # an explicit delay is idle time by definition
                feed_detune(ins.qubits[0], ins.duration)
            continue
        if kind in _REAL_1Q:
            q = ins.qubits[0]
            if kind is InstrKind.H:
                if fuse_detuned:
                    flush(q)  # detuning does not commute through H
                    prog.ops.append(("1q", q, _H))
                else:
                    feed_1q(q, _H, flips_sign=False)
            elif kind is InstrKind.X:
                feed_1q(q, x_pulse, flips_sign=True)
            else:
                feed_1q(q, y_pulse, flips_sign=True)
            if noise.p1 > 0:
                prog.ops.append(("depol1", q, add_site(noise.p1)))
        elif kind is InstrKind.RZ:
            q = ins.qubits[0]
            feed_1q(q, np.diag([1.0, np.exp(1j * ins.angle.radians)]), flips_sign=False)
        elif kind is InstrKind.CPHASE:
            qa, qb = ins.qubits
            flush(qa)
            flush(qb)
            prog.ops.append(("cphase", qa, qb, np.exp(1j * ins.angle.radians)))
            if noise.p2 > 0:
                prog.ops.append(("depol2", qa, qb, add_site(noise.p2)))
        elif kind is InstrKind.MEASURE:
            q = ins.qubits[0]
            flush(q)
            prog.ops.append(("measure", q, ins.clbit))
        elif kind is InstrKind.CLASSICAL_RZ:
            q = ins.qubits[0]
            flush(q)
            prog.ops.append(
                ("crz", q, ins.condition, np.exp(1j * ins.angle.radians))
            )
        elif kind is InstrKind.CLASSICAL_X:
            q = ins.qubits[0]
            flush(q)
            site = add_site(noise.p1) if noise.p1 > 0 else -1
            prog.ops.append(("cx", q, ins.condition, site, x_pulse))
    for q in list(pending):
        flush(q)
    return prog


def _run_program_once(
    prog: _Program,
    psi0: np.ndarray,
    noise: NoiseModel,
    rng: np.random.Generator,
    us: np.ndarray,
    nu: np.ndarray | None,
):
    n = prog.n_qubits
    psi = psi0.copy()
    records = 0
    for op in prog.ops:
        tag = op[0]
        if tag == "1q":
            _apply_1q(psi, op[2], op[1], n)
        elif tag == "detune":
            _apply_diag1(psi, np.exp(1j * nu[op[1]] * op[2]), op[1], n)
        elif tag == "fused":
            _apply_1q(psi, op[2], op[1], n)
            _apply_diag1(psi, np.exp(1j * nu[op[1]] * op[3]), op[1], n)
        elif tag == "cphase":
            _apply_cphase(psi, op[3], op[1], op[2], n)
        elif tag == "depol1":
            if us[op[2]] < noise.p1:
                pauli = int(rng.integers(4))
                if pauli:
                    _apply_1q(psi, _PAULIS[pauli], op[1], n)
        elif tag == "depol2":
            if us[op[3]] < noise.p2:
                pair = int(rng.integers(16))
                a, b = pair >> 2, pair & 3
                if a:
                    _apply_1q(psi, _PAULIS[a], op[1], n)
                if b:
                    _apply_1q(psi, _PAULIS[b], op[2], n)
        elif tag == "measure":
            q, c = op[1], op[2]
            p_one = _bit_prob(psi, q, n)
            outcome = 1 if rng.random() < p_one else 0
            _collapse(psi, q, n, outcome, p_one if outcome else 1.0 - p_one)
            recorded = outcome
            if noise.eps_ro > 0 and rng.random() < noise.eps_ro:
                recorded ^= 1
            if recorded:
                records |= 1 << (prog.n_clbits - 1 - c)
        elif tag == "crz":
            bit = (records >> (prog.n_clbits - 1 - op[2])) & 1
            if bit:
                _apply_diag1(psi, op[3], op[1], n)
        elif tag == "cx":
            bit = (records >> (prog.n_clbits - 1 - op[2])) & 1
            if bit:
                _apply_1q(psi, op[4], op[1], n)
                if op[3] >= 0 and us[op[3]] < noise.p1:
                    pauli = int(rng.integers(4))
                    if pauli:
                        _apply_1q(psi, _PAULIS[pauli], op[1], n)
    return records


def run_trajectories(
    circuit: Circuit,
    noise: NoiseModel | None = None,
    *,
    shots: int,
    seed,
    timing: TimingModel | None = None,
    input_state=0,
    max_qubits: int = 14,
) -> SampleResult:
    """Sample recorded outcomes under the noise model.

    ``seed`` may be an int or a tuple; shot s uses the independent
    substream ``default_rng([*seed, s])``, so results do not depend on shot
    order or on internal fusion. When the detuning sigma is zero and no
    depolarizing event fires in a shot, the shot is drawn directly from a
    cached exact distribution."""
    require_valid(circuit)
    if shots < 1:
        raise ValueError("shots must be positive")
    noise = noise or NoiseModel()
    timing = timing or TimingModel()
    n = circuit.n_qubits
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds max_qubits={max_qubits}")
    seed_tuple = tuple(int(s) for s in (seed if isinstance(seed, (tuple, list)) else (seed,)))
    prog = _compile_trajectory(circuit, noise, timing)
    psi0 = _initial_state(n, input_state)
    thresholds = np.array(prog.site_probs, dtype=float)

    fast_dist = None
    if noise.idle_detuning_sigma == 0.0:
        if noise.eps_ro == 0.0:
            fast_dist = run_exact(circuit, input_state, max_qubits=max_qubits)
        elif n <= 6:
            fast_dist = run_density_matrix(
                circuit,
                NoiseModel(eps_ro=noise.eps_ro),
                timing=timing,
                input_state=input_state,
            )
    if fast_dist is not None:
        fast_keys = np.array([k for k, _ in fast_dist.sorted_items()], dtype=np.int64)
        fast_cum = np.cumsum([p for _, p in fast_dist.sorted_items()])

    counts: dict[int, int] = {}
    for shot in range(shots):
        rng = np.random.default_rng([*seed_tuple, shot])
        us = rng.random(len(thresholds)) if len(thresholds) else np.empty(0)
        if fast_dist is not None and not (us < thresholds).any():
            u = rng.random()
            idx = min(np.searchsorted(fast_cum, u, side="right"), len(fast_keys) - 1)
            outcome = int(fast_keys[idx])
        else:
            nu = None
            if prog.uses_nu:
                rng_nu = np.random.default_rng([*seed_tuple, shot, 2021])
                nu = rng_nu.normal(0.0, noise.idle_detuning_sigma, n)
            outcome = _run_program_once(prog, psi0, noise, rng, us, nu)
        counts[outcome] = counts.get(outcome, 0) + 1
    return SampleResult(circuit.n_clbits, shots, dict(sorted(counts.items())))


# ---------------------------------------------------------------------------
# density-matrix engine


def _dm_1q(rho: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    d = 1 << n
    view = rho.reshape(1 << q, 2, (1 << (n - 1 - q)) * d)
    a = view[:, 0, :].copy()
    b = view[:, 1, :]
    view[:, 0, :] = u[0, 0] * a + u[0, 1] * b
    view[:, 1, :] = u[1, 0] * a + u[1, 1] * b
    uc = u.conj()
    view = rho.reshape(d * (1 << q), 2, 1 << (n - 1 - q))
    a = view[:, 0, :].copy()
    b = view[:, 1, :]
    view[:, 0, :] = uc[0, 0] * a + uc[0, 1] * b
    view[:, 1, :] = uc[1, 0] * a + uc[1, 1] * b
    return rho


def _dm_diag(rho: np.ndarray, dvec: np.ndarray) -> np.ndarray:
    rho *= dvec[:, None]
    rho *= dvec.conj()[None, :]
    return rho


def _qubit_bit(idx: np.ndarray, q: int, n: int) -> np.ndarray:
    return (idx >> (n - 1 - q)) & 1


def _dm_depolarize(rho: np.ndarray, qubits: tuple[int, ...], p: float, n: int) -> np.ndarray:
    r = rho.reshape([2] * (2 * n))
    labels = list(range(2 * n))
    for q in qubits:
        labels[n + q] = labels[q]
    out_axes = [ax for ax in range(2 * n) if ax not in qubits and ax - n not in qubits]
    tr = np.einsum(r, labels, [labels[ax] for ax in out_axes])
    out = (1.0 - p) * r
    share = p / (1 << len(qubits))
    for bits in range(1 << len(qubits)):
        idx: list = [slice(None)] * (2 * n)
        for j, q in enumerate(qubits):
            b = (bits >> j) & 1
            idx[q] = b
            idx[n + q] = b
        out[tuple(idx)] += share * tr
    return out.reshape(rho.shape)


def _dm_dephase_flip(rho: np.ndarray, q: int, n: int, eps: float) -> np.ndarray:
    view = rho.reshape(1 << q, 2, 1 << (n - 1 - q), 1 << q, 2, 1 << (n - 1 - q))
    view[:, 0, :, :, 1, :] = 0.0
    view[:, 1, :, :, 0, :] = 0.0
    if eps > 0:
        flipped = view[:, ::-1, :, :, ::-1, :]
        out = (1.0 - eps) * view + eps * flipped
        return out.reshape(rho.shape)
    return rho


def evolve_density(
    circuit: Circuit,
    noise: NoiseModel | None = None,
    timing: TimingModel | None = None,
    input_state=0,
    *,
    max_qubits: int = 6,
):
    """Exact noisy evolution; returns (rho, clbit -> qubit map).

    Measured qubits carry their (possibly misassigned) record as a
    classical diagonal state, so conditioned gates become controlled gates
    against the record qubit and the final distribution is read off the
    diagonal. Unsupported combinations raise rather than approximate:
    conditioned X with nonzero detuning, and over-rotation together with
    detuning."""
    require_valid(circuit)
    noise = noise or NoiseModel()
    timing = timing or TimingModel()
    n = circuit.n_qubits
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds max_qubits={max_qubits}")
    sigma = noise.idle_detuning_sigma
    if sigma > 0 and noise.pulse_over_rotation != 0.0:
        raise ValueError("over-rotation combined with idle detuning is not supported here")

    d = 1 << n
    psi = _initial_state(n, input_state)
    rho = np.outer(psi, psi.conj())
    idx = np.arange(d)

    exposures = (
        _exposure_before(circuit, timing, noise.apply_idle_during_feedforward)
        if sigma > 0
        else {}
    )
    acc = [0.0] * n  # signed idle exposure since the last flush
    sign = [1.0] * n
    qubit_of_clbit: dict[int, int] = {}
    x_pulse = _pulse("x", noise.pulse_over_rotation)
    y_pulse = _pulse("y", noise.pulse_over_rotation)

    def flush(q: int) -> None:
        if acc[q] == 0.0:
            return
        damp = math.exp(-0.5 * (sigma * acc[q]) ** 2)
        view = rho.reshape(1 << q, 2, 1 << (n - 1 - q), 1 << q, 2, 1 << (n - 1 - q))
        view[:, 0, :, :, 1, :] *= damp
        view[:, 1, :, :, 0, :] *= damp
        acc[q] = 0.0

    for i, ins in enumerate(circuit.instructions):
        for q, dt in exposures.get(i, ()):
            acc[q] += sign[q] * dt
        kind = ins.kind
        if kind is InstrKind.DELAY:
            acc[ins.qubits[0]] += sign[ins.qubits[0]] * ins.duration
            continue
        if kind is InstrKind.BARRIER:
            continue
        if kind is InstrKind.H:
            q = ins.qubits[0]
            flush(q)
            rho = _dm_1q(rho, _H, q, n)
            if noise.p1 > 0:
                rho = _dm_depolarize(rho, (q,), noise.p1, n)
        elif kind in (InstrKind.X, InstrKind.Y):
            q = ins.qubits[0]
            rho = _dm_1q(rho, x_pulse if kind is InstrKind.X else y_pulse, q, n)
            sign[q] = -sign[q]
            if noise.p1 > 0:
                rho = _dm_depolarize(rho, (q,), noise.p1, n)
        elif kind is InstrKind.RZ:
            q = ins.qubits[0]
            dvec = np.where(
                _qubit_bit(idx, q, n) == 1, np.exp(1j * ins.angle.radians), 1.0
            )
            rho = _dm_diag(rho, dvec)
        elif kind is InstrKind.CPHASE:
            qa, qb = ins.qubits
            mask = (_qubit_bit(idx, qa, n) == 1) & (_qubit_bit(idx, qb, n) == 1)
            dvec = np.where(mask, np.exp(1j * ins.angle.radians), 1.0)
            rho = _dm_diag(rho, dvec)
            if noise.p2 > 0:
                rho = _dm_depolarize(rho, (qa, qb), noise.p2, n)
        elif kind is InstrKind.MEASURE:
            q = ins.qubits[0]
            flush(q)
            rho = _dm_dephase_flip(rho, q, n, noise.eps_ro)
            qubit_of_clbit[ins.clbit] = q
        elif kind is InstrKind.CLASSICAL_RZ:
            control = qubit_of_clbit[ins.condition]
            q = ins.qubits[0]
            mask = (_qubit_bit(idx, control, n) == 1) & (_qubit_bit(idx, q, n) == 1)
            dvec = np.where(mask, np.exp(1j * ins.angle.radians), 1.0)
            rho = _dm_diag(rho, dvec)
        elif kind is InstrKind.CLASSICAL_X:
            if sigma > 0:
                raise ValueError("conditioned X with idle detuning is not supported here")
            control = qubit_of_clbit[ins.condition]
            q = ins.qubits[0]
            # the control record is classical by now, so the state splits into
            # record-0 and record-1 blocks; the pulse acts on the 1 block only
            m1 = (_qubit_bit(idx, control, n) == 1).astype(float)
            sel = m1[:, None] * m1[None, :]
            block = _dm_1q(rho * sel, x_pulse, q, n)
            if noise.p1 > 0:
                block = _dm_depolarize(block, (q,), noise.p1, n)
            rho = rho * (1.0 - sel) + block
    return rho, qubit_of_clbit


def run_density_matrix(
    circuit: Circuit,
    noise: NoiseModel | None = None,
    *,
    timing: TimingModel | None = None,
    input_state=0,
    max_qubits: int = 6,
) -> OutcomeDistribution:
    """Exact outcome distribution under the noise model (small registers)."""
    rho, qubit_of_clbit = evolve_density(
        circuit, noise, timing, input_state, max_qubits=max_qubits
    )
    n = circuit.n_qubits
    d = 1 << n
    diag = np.real(np.diagonal(rho)).copy()
    diag[diag < 0] = 0.0
    idx = np.arange(d)
    outcome_of_basis = np.zeros(d, dtype=np.int64)
    for c, q in qubit_of_clbit.items():
        outcome_of_basis |= _qubit_bit(idx, q, n).astype(np.int64) << (
            circuit.n_clbits - 1 - c
        )
    sums: dict[int, float] = {}
    for b in range(d):
        if diag[b] > 1e-18:
            key = int(outcome_of_basis[b])
            sums[key] = sums.get(key, 0.0) + float(diag[b])
    if not sums:
        sums = {0: 1.0}
    return OutcomeDistribution(circuit.n_clbits, dict(sorted(sums.items())))


# ---------------------------------------------------------------------------


def verify_equivalence(a: Circuit, b: Circuit, *, n_random: int = 8, seed: int = 20260822) -> float:
    """Worst-case total variation distance between two circuits' exact
    outcome distributions, over all basis inputs plus random product
    states."""
    if a.n_qubits != b.n_qubits or a.n_clbits != b.n_clbits:
        raise ValueError("register shapes differ")
    n = a.n_qubits
    worst = 0.0
    for k in range(1 << n):
        tv = run_exact(a, k).total_variation(run_exact(b, k))
        worst = max(worst, tv)
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        psi = np.ones(1, dtype=complex)
        for _q in range(n):
            amp = rng.normal(size=2) + 1j * rng.normal(size=2)
            amp /= np.linalg.norm(amp)
            psi = np.kron(psi, amp)
        tv = run_exact(a, psi).total_variation(run_exact(b, psi))
        worst = max(worst, tv)
    return worst
