"""Transform circuits with measurement advancing, noisy simulation,
decoupling schedules, and process-fidelity certification."""

from .ir import (
    Angle,
    Circuit,
    CircuitStats,
    Instruction,
    InstrKind,
    Violation,
    require_valid,
    stats,
    validate,
)
from .text_format import ParseError, parse_text, print_text
from .qft import (
    build_dynamic_qft,
    build_unitary_qft,
    compose,
    prepare_fourier_state,
    prepare_periodic_state,
)
from .timing import (
    GAP_TOLERANCE,
    IdleWindow,
    Schedule,
    TimingModel,
    WindowKind,
    compute_schedule,
    find_idle_windows,
)
from .sim import (
    NoiseModel,
    OutcomeDistribution,
    SampleResult,
    evolve_density,
    run_density_matrix,
    run_exact,
    run_trajectories,
    statevector,
    verify_equivalence,
)
from .rewrite import RewriteReport, advance_measurements
from .certify import (
    FidelityEstimate,
    PluralityResult,
    choi_matrix,
    choi_uhlmann_fidelity,
    exact_process_fidelity,
    fourier_input_state,
    mitigate_readout,
    plurality_vote_success,
    sampled_process_fidelity,
    uniform_confusion,
)
from .dd import SEQUENCES, dd_effectiveness, insert_dd, ur_phases

__version__ = "0.1.0"

__all__ = [
    "Angle",
    "Circuit",
    "CircuitStats",
    "FidelityEstimate",
    "GAP_TOLERANCE",
    "IdleWindow",
    "Instruction",
    "InstrKind",
    "NoiseModel",
    "OutcomeDistribution",
    "ParseError",
    "PluralityResult",
    "RewriteReport",
    "SampleResult",
    "Schedule",
    "SEQUENCES",
    "TimingModel",
    "Violation",
    "WindowKind",
    "advance_measurements",
    "build_dynamic_qft",
    "build_unitary_qft",
    "choi_matrix",
    "choi_uhlmann_fidelity",
    "compose",
    "compute_schedule",
    "dd_effectiveness",
    "evolve_density",
    "exact_process_fidelity",
    "find_idle_windows",
    "fourier_input_state",
    "insert_dd",
    "mitigate_readout",
    "parse_text",
    "plurality_vote_success",
    "prepare_fourier_state",
    "prepare_periodic_state",
    "print_text",
    "require_valid",
    "run_density_matrix",
    "run_exact",
    "run_trajectories",
    "sampled_process_fidelity",
    "statevector",
    "stats",
    "uniform_confusion",
    "ur_phases",
    "validate",
    "verify_equivalence",
    "__version__",
]
