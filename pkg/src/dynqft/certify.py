"""Process-fidelity certification for transform-and-measure circuits.

The circuits of interest consume a quantum register and produce a classical
record, so the whole experiment is a channel from n qubits to n bits. Its
fidelity against the ideal transform can be read off recovery
probabilities: feed in the conjugate-basis state that the ideal transform
maps to the basis state |k>, and ask how often the record comes back k.
The ideal channel's Choi operator is a rank-2^n projector and measurement
makes any noisy Choi operator block diagonal in the record, so the exact
channel fidelity collapses to

    F = [ (1/2^n) * sum_k sqrt(p_k) ]^2

with p_k the recovery probability of input k. A sampled estimator with a
quadratic bias correction, a bootstrap for its uncertainty, the full Choi
construction with a general Uhlmann fidelity as a cross-check, readout
mitigation, and a plurality-vote score live here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ir import Circuit, Instruction, InstrKind, require_valid
from .sim import (
    NoiseModel,
    OutcomeDistribution,
    SampleResult,
    evolve_density,
    run_density_matrix,
    run_exact,
    run_trajectories,
)
from .timing import TimingModel

__all__ = [
    "FidelityEstimate",
    "PluralityResult",
    "choi_matrix",
    "choi_uhlmann_fidelity",
    "exact_process_fidelity",
    "fourier_input_state",
    "mitigate_readout",
    "plurality_vote_success",
    "sampled_process_fidelity",
    "uniform_confusion",
]


def fourier_input_state(n_qubits: int, k: int) -> np.ndarray:
    """The state the ideal transform maps to the basis state |k>.

    Amplitudes are exp(-2*pi*i*j*k/2^n)/sqrt(2^n); it is a product state,
    one rotated plus state per qubit."""
    d = 1 << n_qubits
    if not 0 <= k < d:
        raise ValueError(f"k={k} out of range for {n_qubits} qubits")
    return np.exp(-2j * math.pi * k * np.arange(d) / d) / math.sqrt(d)


def _record_map(circuit: Circuit) -> dict[int, int]:
    """clbit -> qubit, requiring a full transform-and-measure shape."""
    require_valid(circuit)
    n = circuit.n_qubits
    if circuit.n_clbits != n:
        raise ValueError("certification needs one record bit per qubit")
    out: dict[int, int] = {}
    for ins in circuit.instructions:
        if ins.kind is InstrKind.MEASURE:
            out[ins.clbit] = ins.qubits[0]
    if len(out) != n:
        raise ValueError("certification needs every qubit measured")
    return out


def _is_noiseless(noise: NoiseModel | None) -> bool:
    return noise is None or (
        noise.p1 == 0.0
        and noise.p2 == 0.0
        and noise.eps_ro == 0.0
        and noise.idle_detuning_sigma == 0.0
        and noise.pulse_over_rotation == 0.0
    )


def exact_process_fidelity(
    circuit: Circuit,
    noise: NoiseModel | None = None,
    *,
    timing: TimingModel | None = None,
    max_qubits: int = 6,
) -> float:
    """Channel fidelity from exact recovery probabilities (all 2^n inputs)."""
    _record_map(circuit)
    n = circuit.n_qubits
    d = 1 << n
    total = 0.0
    for k in range(d):
        psi = fourier_input_state(n, k)
        if _is_noiseless(noise):
            dist = run_exact(circuit, psi)
        else:
            dist = run_density_matrix(
                circuit, noise, timing=timing, input_state=psi, max_qubits=max_qubits
            )
        total += math.sqrt(max(dist.prob(k), 0.0))
    return (total / d) ** 2


def _estimators(phat: np.ndarray) -> tuple[float, float]:
    """Plug-in estimate and its quadratic bias correction.

    The plug-in value squares a mean of square roots, so its diagonal
    terms are biased by shot noise; averaging sqrt(p_i)*sqrt(p_j) over
    distinct pairs only removes exactly that. With one input the plug-in
    value is all there is."""
    m = phat.size
    root = np.sqrt(phat)
    point = float(root.mean() ** 2)
    if m == 1:
        return point, point
    corrected = (m * point - float(phat.mean())) / (m - 1)
    return point, corrected


@dataclass(frozen=True)
class FidelityEstimate:
    """Sampled channel fidelity with a bootstrap error bar."""

    n_qubits: int
    m: int
    shots: int
    seed: int
    sampled_keys: tuple[int, ...]
    recovery_probs: tuple[float, ...]
    point: float
    bias_corrected: float
    ci_low: float
    ci_high: float
    sigma_boot: float

    def as_record(self, **extra) -> dict:
        rec = {
            "n": self.n_qubits,
            "m": self.m,
            "shots": self.shots,
            "seed": self.seed,
            "point": self.point,
            "bias_corrected": self.bias_corrected,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "sigma_boot": self.sigma_boot,
        }
        rec.update(extra)
        return rec


def sampled_process_fidelity(
    circuit: Circuit,
    *,
    m: int,
    shots: int,
    seed: int,
    noise: NoiseModel | None = None,
    timing: TimingModel | None = None,
    mitigate: bool = False,
    bootstrap: int = 1000,
) -> FidelityEstimate:
    """Estimate the channel fidelity from m sampled inputs at `shots` each.

    Inputs are distinct keys drawn uniformly (a census when m >= 2^n).
    The bootstrap resamples both levels: which inputs were drawn, and the
    binomial shot noise of each recovery probability. With mitigation the
    resampled proportions feed through the same inversion only implicitly;
    the mitigated values are treated as binomial, which is accurate for
    small flip rates."""
    n = circuit.n_qubits
    d = 1 << n
    if m < 1:
        raise ValueError("m must be at least 1")
    if shots < 1:
        raise ValueError("shots must be at least 1")
    _record_map(circuit)

    if m >= d:
        keys = list(range(d))
    else:
        rng_k = np.random.default_rng([seed, 1])
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(int(rng_k.integers(d)))
        keys = sorted(chosen)
    m_eff = len(keys)

    confusion = None
    if mitigate:
        eps = noise.eps_ro if noise is not None else 0.0
        confusion = uniform_confusion(circuit.n_clbits, eps)

    phat = np.empty(m_eff)
    for i, k in enumerate(keys):
        res = run_trajectories(
            circuit,
            noise,
            shots=shots,
            seed=(seed, 2, k),
            timing=timing,
            input_state=fourier_input_state(n, k),
        )
        dist = res.empirical()
        if confusion is not None:
            dist = mitigate_readout(dist, confusion)
        phat[i] = dist.prob(k)

    point, corrected = _estimators(phat)

    rng_b = np.random.default_rng([seed, 3])
    idx = rng_b.integers(0, m_eff, size=(bootstrap, m_eff))
    panel = phat[idx]
    redrawn = rng_b.binomial(shots, panel) / shots
    roots = np.sqrt(redrawn)
    point_b = roots.mean(axis=1) ** 2
    if m_eff == 1:
        corrected_b = point_b
    else:
        corrected_b = (m_eff * point_b - redrawn.mean(axis=1)) / (m_eff - 1)
    lo, hi = np.percentile(corrected_b, [2.5, 97.5])

    return FidelityEstimate(
        n_qubits=n,
        m=m_eff,
        shots=shots,
        seed=seed,
        sampled_keys=tuple(keys),
        recovery_probs=tuple(float(p) for p in phat),
        point=point,
        bias_corrected=corrected,
        ci_low=float(lo),
        ci_high=float(hi),
        sigma_boot=float(corrected_b.std()),
    )


@dataclass(frozen=True)
class PluralityResult:
    """Whether each input's correct output wins a strict plurality."""

    n_qubits: int
    shots: int
    modal_outcomes: tuple  # int per input, None on a tie
    successes: tuple
    success_rate: float


def plurality_vote_success(
    circuit: Circuit,
    *,
    shots: int,
    seed: int,
    noise: NoiseModel | None = None,
    timing: TimingModel | None = None,
) -> PluralityResult:
    """Score every input k by whether k is the unique most frequent record."""
    n = circuit.n_qubits
    _record_map(circuit)
    d = 1 << n
    modal: list = []
    ok: list[bool] = []
    for k in range(d):
        res = run_trajectories(
            circuit,
            noise,
            shots=shots,
            seed=(seed, 4, k),
            timing=timing,
            input_state=fourier_input_state(n, k),
        )
        best = max(res.counts.values())
        winners = [o for o, c in res.counts.items() if c == best]
        if len(winners) == 1:
            modal.append(winners[0])
            ok.append(winners[0] == k)
        else:
            modal.append(None)
            ok.append(False)
    return PluralityResult(
        n_qubits=n,
        shots=shots,
        modal_outcomes=tuple(modal),
        successes=tuple(ok),
        success_rate=sum(ok) / d,
    )


def uniform_confusion(n_clbits: int, eps: float) -> tuple[np.ndarray, ...]:
    """Per-record-bit confusion matrices C[a, b] = P(read a | true b)."""
    c = np.array([[1.0 - eps, eps], [eps, 1.0 - eps]])
    return tuple(c.copy() for _ in range(n_clbits))


def mitigate_readout(
    dist: OutcomeDistribution | SampleResult,
    confusion,
) -> OutcomeDistribution:
    """Invert per-bit readout confusion over the full outcome vector.

    Applies each 2x2 inverse along its record-bit axis, clips the small
    negatives inversion can produce, and renormalizes. Every record bit is
    assumed to have passed through its confusion matrix (true for
    transform-and-measure circuits, where each clbit is written once)."""
    if isinstance(dist, SampleResult):
        dist = dist.empirical()
    nc = dist.n_clbits
    mats = list(confusion)
    if len(mats) != nc:
        raise ValueError(f"need {nc} confusion matrices, got {len(mats)}")
    vec = np.zeros(1 << nc)
    for outcome, p in dist.probs.items():
        vec[outcome] = p
    tensor = vec.reshape([2] * nc)
    for ax, mat in enumerate(mats):
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (2, 2):
            raise ValueError("confusion matrices must be 2x2")
        if abs(np.linalg.det(mat)) < 1e-6:
            raise ValueError("confusion matrix is numerically singular")
        tensor = np.moveaxis(
            np.tensordot(np.linalg.inv(mat), tensor, axes=([1], [ax])), 0, ax
        )
    vec = np.clip(tensor.reshape(-1), 0.0, None)
    total = vec.sum()
    if total <= 0.0:
        raise ValueError("mitigation removed all probability mass")
    vec /= total
    probs = {int(i): float(vec[i]) for i in np.flatnonzero(vec > 1e-15)}
    return OutcomeDistribution(nc, probs)


def choi_matrix(
    circuit: Circuit,
    noise: NoiseModel | None = None,
    *,
    timing: TimingModel | None = None,
    max_qubits: int = 4,
) -> np.ndarray:
    """Choi state of the transform-and-measure channel (trace one).

    Half of a maximally entangled state is sent through the circuit; the
    returned matrix lives on reference qubits 0..n-1 (axis order unchanged)
    tensored with the record, reordered so the second factor reads as the
    record integer (clbit 0 first). Requires 2n simulable qubits."""
    rec = _record_map(circuit)
    n = circuit.n_qubits
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds max_qubits={max_qubits}")
    shifted = Circuit(
        2 * n,
        n,
        [
            Instruction(
                ins.kind,
                tuple(q + n for q in ins.qubits),
                angle=ins.angle,
                clbit=ins.clbit,
                condition=ins.condition,
                duration=ins.duration,
            )
            for ins in circuit.instructions
        ],
    )
    d = 1 << n
    omega = np.zeros(1 << (2 * n), dtype=complex)
    omega[np.arange(d) * d + np.arange(d)] = 1.0 / math.sqrt(d)
    rho, qubit_of_clbit = evolve_density(
        shifted, noise, timing, omega, max_qubits=2 * n
    )

    # reorder the channel half from qubit positions to record-bit positions:
    # the bit at new position p is read from old position source[p]
    source = list(range(n)) + [qubit_of_clbit[c] for c in range(n)]
    dim = 1 << (2 * n)
    src = np.zeros(dim, dtype=np.int64)
    for newpos, oldpos in enumerate(source):
        bit = (np.arange(dim) >> (2 * n - 1 - newpos)) & 1
        src |= bit << (2 * n - 1 - oldpos)
    return rho[np.ix_(src, src)]


def choi_uhlmann_fidelity(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """General mixed-state Uhlmann fidelity between two Choi states.

    Eigenvalues below 1e-12 are treated as exactly zero: they are
    diagonalization round-off of rank-deficient operators, and their
    square roots (~1e-8 each) would otherwise dominate the error."""
    if rho_a.shape != rho_b.shape:
        raise ValueError("shape mismatch")
    w, v = np.linalg.eigh(rho_a)
    if w.min() < -1e-8:
        raise ValueError("first argument is not positive semidefinite")
    w = np.where(w > 1e-12, w, 0.0)
    root = (v * np.sqrt(w)) @ v.conj().T
    mu = np.linalg.eigvalsh(root @ rho_b @ root)
    if mu.min() < -1e-8:
        raise ValueError("arguments are not jointly positive semidefinite")
    mu = np.where(mu > 1e-12, mu, 0.0)
    return float(np.sum(np.sqrt(mu)) ** 2)
