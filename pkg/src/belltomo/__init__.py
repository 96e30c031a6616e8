"""Seeded simulator and analysis toolkit for a two-qubit post-selection protocol.

A run prepares two labelled qubits, measures each once along a random
Pauli axis, performs a Bell-basis measurement on the pair, and measures
each emerging qubit once more.  The toolkit reconstructs sub-ensemble
states from either tomography stage, builds the separable mixture the
preparation labels dictate, and certifies entanglement of both, so the
tension between the two descriptions of one selected dataset can be
exhibited numerically.
"""

from .linalg import (
    JacobiConvergenceError,
    embed,
    hermitian_eig,
    partial_trace,
    partial_transpose,
    tensor,
    trace_distance,
)
from .states import (
    AXES,
    BELL_NAMES,
    PreparationBasis,
    bell_projectors,
    bell_state,
    bloch_to_ket,
    ket_to_dm,
    pauli_projector,
    pbr_default_bases,
)
from .rng import RngStream
from .protocol import (
    ExperimentConfig,
    RunRecord,
    bell_frequencies,
    bell_measure,
    measure_projective,
    run_experiment,
    simulate_run,
)
from .records import read_records, write_records
from .tomography import (
    CountTable,
    EmptySelectionError,
    InsufficientCountsError,
    ReconstructionResult,
    SelectionCriterion,
    conditional_counts,
    fidelity_pure,
    linear_inversion,
    project_to_physical,
    reconstruct,
    single_qubit_bloch,
)
from .analysis import (
    CertificationReport,
    ContradictionReport,
    PbrReport,
    analytic_conditional,
    analytic_label_weights,
    certify,
    chsh_max,
    collapse_conditional,
    concurrence,
    contradiction_report,
    ensemble_state_from_preps,
    exact_count_table,
    negativity,
    pbr_report,
    ppt_min_eigenvalue,
)
from .estimators import PreparationMixture, StateTomography

__version__ = "0.1.0"
