"""Entanglement certification, analytic oracles, and the contradiction report.

The headline artifact lives here: given one dataset, the Bell-outcome
conditioned sub-ensemble is reconstructed tomographically (entangled) and
also assembled from the recorded preparation labels (separable), and both
states are certified side by side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import hermitian_eig, partial_transpose, tensor
from .records import matrix_to_json
from .states import (
    AXES,
    BELL_NAMES,
    PAULI,
    bell_projectors,
    ket_to_dm,
    pauli_projector,
    pbr_default_bases,
)
from .tomography import (
    CountTable,
    ReconstructionResult,
    SelectionCriterion,
    reconstruct,
)
from .validation import check_density_matrix, check_stage

__all__ = [
    "correlation_matrix",
    "pt_spectrum",
    "ppt_min_eigenvalue",
    "negativity",
    "concurrence",
    "chsh_max",
    "CertificationReport",
    "certify",
    "analytic_conditional",
    "collapse_conditional",
    "oracle_rows",
    "exact_count_table",
    "ensemble_state_from_preps",
    "analytic_label_weights",
    "ContradictionReport",
    "contradiction_report",
    "PbrReport",
    "pbr_report",
    "BELL_CORRELATIONS",
]

# Correlation matrices T_jk = tr(rho sigma_j x sigma_k) of the four Bell
# states, rows/cols ordered X, Y, Z.  All off-diagonal entries vanish.
BELL_CORRELATIONS = {
    0: np.diag([1.0, -1.0, 1.0]),
    1: np.diag([-1.0, 1.0, 1.0]),
    2: np.diag([1.0, 1.0, -1.0]),
    3: np.diag([-1.0, -1.0, -1.0]),
}

ENTANGLEMENT_EIGENVALUE_FLOOR = 1e-6


def correlation_matrix(rho: np.ndarray) -> np.ndarray:
    """3x3 matrix of two-sided Pauli expectations, axes ordered X, Y, Z."""
    rho = np.asarray(rho, dtype=complex)
    t = np.empty((3, 3))
    for i, a in enumerate(AXES):
        for j, b in enumerate(AXES):
            t[i, j] = np.einsum("ij,ji->", tensor(PAULI[a], PAULI[b]), rho).real
    return t


def pt_spectrum(rho: np.ndarray) -> np.ndarray:
    """Eigenvalues of the partial transpose on the second qubit, descending."""
    vals, _ = hermitian_eig(partial_transpose(rho, 1))
    return vals


def ppt_min_eigenvalue(rho: np.ndarray) -> float:
    return float(pt_spectrum(rho)[-1])


def negativity(rho: np.ndarray) -> float:
    vals = pt_spectrum(rho)
    return float(np.sum(np.maximum(0.0, -vals)))


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit state.

    The defining eigenvalues mu_i of rho rho~ (rho~ the spin-flipped
    state) are extracted from the Hermitian product sqrt(rho) rho~
    sqrt(rho), which shares the nonzero spectrum.
    """
    rho = check_density_matrix(rho, name="rho")
    yy = tensor(PAULI["Y"], PAULI["Y"])
    flipped = yy @ np.conj(rho) @ yy
    vals, vecs = hermitian_eig(rho)
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ np.conj(vecs.T)
    mu, _ = hermitian_eig(root @ flipped @ root)
    mu = np.sqrt(np.clip(mu, 0.0, None))
    return float(max(0.0, mu[0] - mu[1] - mu[2] - mu[3]))


def chsh_max(rho: np.ndarray) -> float:
    """Maximal CHSH value 2 sqrt(t1 + t2) over measurement settings.

    t1, t2 are the two largest eigenvalues of T^T T with T the Pauli
    correlation matrix.
    """
    t = correlation_matrix(rho)
    vals, _ = hermitian_eig(t.T @ t)
    return float(2.0 * np.sqrt(max(0.0, vals[0] + vals[1])))


@dataclass
class CertificationReport:
    pt_spectrum: list
    negativity: float
    concurrence: float
    chsh_max: float
    verdict: str
    threshold: float

    def to_dict(self) -> dict:
        return {
            "ptSpectrum": [float(v) for v in self.pt_spectrum],
            "negativity": self.negativity,
            "concurrence": self.concurrence,
            "chshMax": self.chsh_max,
            "verdict": self.verdict,
            "threshold": self.threshold,
        }


def certify(rho: np.ndarray, standard_error: float | None = None) -> CertificationReport:
    """PPT-based entanglement verdict with a noise-aware threshold.

    The verdict is Entangled-NPT only when the most negative partial
    transpose eigenvalue clears -max(3 * standard_error, 1e-6), so
    sampling noise on a separable state cannot flip the call.
    """
    rho = check_density_matrix(rho, name="rho")
    spectrum = pt_spectrum(rho)
    threshold = ENTANGLEMENT_EIGENVALUE_FLOOR
    if standard_error is not None:
        threshold = max(3.0 * float(standard_error), threshold)
    verdict = "Entangled-NPT" if spectrum[-1] < -threshold else "Separable-PPT-consistent"
    return CertificationReport(
        pt_spectrum=[float(v) for v in spectrum],
        negativity=negativity(rho),
        concurrence=concurrence(rho),
        chsh_max=chsh_max(rho),
        verdict=verdict,
        threshold=threshold,
    )


def analytic_conditional(stage: str, axis_pair, outcome_pair, bell_index: int) -> float:
    """Closed-form conditional probability of a joint tomography outcome.

    Equals (1 + sA sB T_jk) / 4 with T the Bell state's correlation
    matrix; the same expression applies at both stages, which is the
    identity the oracle checks.
    """
    check_stage(stage)
    j, k = axis_pair
    sa, sb = outcome_pair
    t = BELL_CORRELATIONS[bell_index][AXES.index(j), AXES.index(k)]
    return float((1.0 + sa * sb * t) / 4.0)


def collapse_conditional(axis_pair, outcome_pair, bell_index: int) -> float:
    """Brute-force conditional: collapse the mixed pair, then condition.

    Evaluates tr((Pj x Pk)(I/4)(Pj x Pk) P_bell) / tr((I/4) P_bell)
    with explicit matrices, no simplification.
    """
    j, k = axis_pair
    sa, sb = outcome_pair
    proj = tensor(pauli_projector(j, sa), pauli_projector(k, sb))
    bell = bell_projectors()[bell_index]
    mixed = np.eye(4, dtype=complex) / 4
    numerator = np.trace(proj @ mixed @ proj @ bell).real
    denominator = np.trace(mixed @ bell).real
    return float(numerator / denominator)


def oracle_rows():
    """All 144 identity checks: (stage-free) closed form vs brute force.

    Returns (rows, max_abs_difference, p_bell) where rows carry
    (bell_name, axis_pair, outcome_pair, closed, brute, difference) and
    p_bell is the unconditioned probability of each Bell outcome on the
    maximally mixed pair.
    """
    rows = []
    worst = 0.0
    for n in range(4):
        for j in AXES:
            for k in AXES:
                for sa in (+1, -1):
                    for sb in (+1, -1):
                        closed = analytic_conditional("P", (j, k), (sa, sb), n)
                        brute = collapse_conditional((j, k), (sa, sb), n)
                        diff = abs(closed - brute)
                        worst = max(worst, diff)
                        rows.append((BELL_NAMES[n], (j, k), (sa, sb), closed, brute, diff))
    p_bell = float(np.trace((np.eye(4) / 4) @ bell_projectors()[0]).real)
    return rows, worst, p_bell


def exact_count_table(rho: np.ndarray, stage: str = "P") -> CountTable:
    """Infinite-statistics count table: entries are exact Born probabilities."""
    rho = np.asarray(rho, dtype=complex)
    counts = {}
    for a in AXES:
        for b in AXES:
            for sa in (+1, -1):
                for sb in (+1, -1):
                    proj = tensor(pauli_projector(a, sa), pauli_projector(b, sb))
                    counts[(a, b, sa, sb)] = float(np.trace(proj @ rho).real)
    return CountTable(stage=stage, counts=counts, n_selected=sum(counts.values()))


def _prep_options(config, side: str):
    """Enumerate (key, ket, prior) preparations for one party."""
    if config.scenario == "pbr":
        bases = pbr_default_bases()
        return [
            (f"{b}:{label}", bases[b].ket(label), 0.25)
            for b in (0, 1)
            for label in (1, 2)
        ]
    basis = config.alice_basis if side == "A" else config.bob_basis
    return [(str(label), basis.ket(label), 0.5) for label in (1, 2)]


def _record_prep_key(rec, side: str) -> str:
    label = rec.alice_label if side == "A" else rec.bob_label
    if label is None:
        raise ValueError("records carry no preparation labels for this scenario")
    basis = rec.alice_basis if side == "A" else rec.bob_basis
    return str(label) if basis is None else f"{basis}:{label}"


def ensemble_state_from_preps(records, criterion: SelectionCriterion, config):
    """The preparation-label mixture of a selected sub-ensemble.

    Averages the recorded product preparations |psi><psi| x |phi><phi|
    over the selected runs.  Returns (state, weight table) with weights
    keyed by (alice key, bob key) label strings.  Always separable by
    construction, whatever the criterion.
    """
    kets_a = {key: ket for key, ket, _ in _prep_options(config, "A")}
    kets_b = {key: ket for key, ket, _ in _prep_options(config, "B")}
    weights: dict = {}
    total = 0
    n_selected = 0
    for rec in records:
        total += 1
        if not criterion.matches(rec):
            continue
        n_selected += 1
        key = (_record_prep_key(rec, "A"), _record_prep_key(rec, "B"))
        weights[key] = weights.get(key, 0) + 1
    if n_selected == 0:
        raise ValueError(
            f"empty selection: criterion '{criterion.describe()}' matches 0 of {total} records"
        )
    state = np.zeros((4, 4), dtype=complex)
    for (ka, kb), count in weights.items():
        state += (count / n_selected) * tensor(ket_to_dm(kets_a[ka]), ket_to_dm(kets_b[kb]))
    return state, {key: count / n_selected for key, count in sorted(weights.items())}


def _axis_averaged_channel(rho: np.ndarray, axes) -> np.ndarray:
    """Average the qubit over one projective measurement with a random axis."""
    out = np.zeros_like(rho)
    for ax in axes:
        for sign in (+1, -1):
            p = pauli_projector(ax, sign)
            out += p @ rho @ p
    return out / len(axes)


def analytic_label_weights(config, bell_index: int) -> dict:
    """Predicted label-pair weights of the Bell-conditioned sub-ensemble.

    Each preparation pair is pushed through the axis-averaged tomography
    measurement on each side, and the Bell outcome probability of the
    resulting pair state sets the posterior weight of that label pair.
    """
    bell = bell_projectors()[bell_index]
    axes = tuple(config.tomography_axes)
    raw = {}
    for key_a, ket_a, prior_a in _prep_options(config, "A"):
        channel_a = _axis_averaged_channel(ket_to_dm(ket_a), axes)
        for key_b, ket_b, prior_b in _prep_options(config, "B"):
            channel_b = _axis_averaged_channel(ket_to_dm(ket_b), axes)
            joint = prior_a * prior_b * np.trace(tensor(channel_a, channel_b) @ bell).real
            raw[(key_a, key_b)] = joint
    total = sum(raw.values())
    return {key: value / total for key, value in sorted(raw.items())}


@dataclass
class ContradictionReport:
    """Two states from one sub-ensemble: tomographic versus label-built."""

    bell_index: int
    n_selected: int
    tomographic: ReconstructionResult
    prep_label_state: np.ndarray
    certification_tomographic: CertificationReport
    certification_label: CertificationReport
    label_weights: dict
    predicted_weights: dict

    def to_dict(self) -> dict:
        return {
            "bellOutcome": BELL_NAMES[self.bell_index],
            "nSelected": self.n_selected,
            "tomographic": self.tomographic.to_dict(),
            "prepLabelState": matrix_to_json(self.prep_label_state),
            "certificationTomographic": self.certification_tomographic.to_dict(),
            "certificationLabel": self.certification_label.to_dict(),
            "labelWeights": {f"{a}|{b}": w for (a, b), w in self.label_weights.items()},
            "predictedWeights": {f"{a}|{b}": w for (a, b), w in self.predicted_weights.items()},
        }


def contradiction_report(records, config, bell_index: int = 0) -> ContradictionReport:
    """Pair the tomographic and label-built states of one Bell sub-ensemble.

    The tomographic state comes from P-stage data (taken before the Bell
    measurement); the label state is the separable mixture the recorded
    preparations dictate.  Certifying both from the same dataset is the
    central exhibit.
    """
    criterion = SelectionCriterion(q_out=frozenset({bell_index}))
    tomo = reconstruct(records, "P", criterion)
    label_state, weights = ensemble_state_from_preps(records, criterion, config)
    return ContradictionReport(
        bell_index=bell_index,
        n_selected=tomo.n_selected,
        tomographic=tomo,
        prep_label_state=label_state,
        certification_tomographic=certify(tomo.physical, standard_error=tomo.aggregate_se),
        certification_label=certify(label_state),
        label_weights=weights,
        predicted_weights=analytic_label_weights(config, bell_index),
    )


@dataclass
class PbrReport:
    """Two-source variant bookkeeping: complement elimination and certification."""

    n_runs: int
    eliminated_fraction: float
    runs_with_complement: float
    certification: CertificationReport
    n_selected: int

    def to_dict(self) -> dict:
        return {
            "nRuns": self.n_runs,
            "eliminatedFraction": self.eliminated_fraction,
            "runsWithComplement": self.runs_with_complement,
            "certification": self.certification.to_dict(),
            "nSelected": self.n_selected,
        }


def pbr_report(records, bell_index: int = 0) -> PbrReport:
    """Analyze a two-source-variant dataset.

    ``eliminated_fraction`` is the fraction of preparations carrying an
    orthogonal-complement label (label 2), i.e. the share of source
    outputs dropped when keeping only nominal preparations; each party
    contributes one preparation per run, so the expectation is 1/2.
    ``runs_with_complement`` counts runs where either party drew a
    complement.  The certification covers the Bell-conditioned
    sub-ensemble before any elimination.
    """
    n_runs = 0
    complement_preps = 0
    complement_runs = 0
    for rec in records:
        if rec.alice_basis is None or rec.bob_basis is None:
            raise ValueError("pbr_report needs two-source-variant records with basis fields")
        n_runs += 1
        hit = 0
        if rec.alice_label == 2:
            complement_preps += 1
            hit = 1
        if rec.bob_label == 2:
            complement_preps += 1
            hit = 1
        complement_runs += hit
    if n_runs == 0:
        raise ValueError("no records")
    criterion = SelectionCriterion(q_out=frozenset({bell_index}))
    tomo = reconstruct(records, "P", criterion)
    return PbrReport(
        n_runs=n_runs,
        eliminated_fraction=complement_preps / (2 * n_runs),
        runs_with_complement=complement_runs / n_runs,
        certification=certify(tomo.physical, standard_error=tomo.aggregate_se),
        n_selected=tomo.n_selected,
    )
