"""Conditional two-qubit state reconstruction from run records.

The pipeline is: filter records with a SelectionCriterion, tally joint
setting/outcome counts at the P or R stage, invert the Pauli moment
expansion, and project the raw estimate onto the physical state space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import hermitian_eig, symmetrize, tensor
from .records import matrix_to_json
from .states import AXES, BELL_NAMES, PAULI, bell_index_from_name
from .validation import check_stage

__all__ = [
    "EmptySelectionError",
    "InsufficientCountsError",
    "SelectionCriterion",
    "CountTable",
    "conditional_counts",
    "linear_inversion",
    "project_to_physical",
    "fidelity_pure",
    "standard_errors",
    "aggregate_standard_error",
    "ReconstructionResult",
    "reconstruct",
    "single_qubit_bloch",
    "MIN_SETTING_COUNTS",
]

MIN_SETTING_COUNTS = 50

_MEASUREMENTS = {
    "pA": ("pA_axis", "pA_out"),
    "pB": ("pB_axis", "pB_out"),
    "rC": ("rC_axis", "rC_out"),
    "rD": ("rD_axis", "rD_out"),
}


class EmptySelectionError(ValueError):
    """No record satisfies the selection criterion."""


class InsufficientCountsError(ValueError):
    """A joint tomography setting has too few counts to invert."""


@dataclass(frozen=True)
class SelectionCriterion:
    """A conjunction of per-run predicates.

    Composable pieces: a Bell-outcome set, preparation labels per party,
    and single-measurement outcome requirements like (pA, X, +1).  The
    default instance selects every run.
    """

    q_out: frozenset | None = None
    alice_label: int | None = None
    bob_label: int | None = None
    outcome_filters: tuple = ()

    @classmethod
    def parse(cls, expr: str) -> "SelectionCriterion":
        """Parse the flat conjunction grammar, e.g. 'q=PhiPlus&aliceLabel=1'."""
        expr = (expr or "").strip()
        if expr in ("", "all"):
            return cls()
        q_out = None
        alice_label = None
        bob_label = None
        filters = {}
        for term in expr.split("&"):
            key, sep, value = term.partition("=")
            key = key.strip()
            value = value.strip()
            if not sep or not value:
                raise ValueError(f"criterion term {term!r} is not key=value")
            if key == "q":
                if q_out is not None:
                    raise ValueError("criterion repeats the q term")
                q_out = frozenset(bell_index_from_name(v.strip()) for v in value.split(","))
            elif key in ("aliceLabel", "bobLabel"):
                if value not in ("1", "2"):
                    raise ValueError(f"{key} must be 1 or 2, got {value!r}")
                if key == "aliceLabel":
                    if alice_label is not None:
                        raise ValueError("criterion repeats aliceLabel")
                    alice_label = int(value)
                else:
                    if bob_label is not None:
                        raise ValueError("criterion repeats bobLabel")
                    bob_label = int(value)
            elif key in _MEASUREMENTS:
                if key in filters:
                    raise ValueError(f"criterion repeats the {key} term")
                if len(value) != 2 or value[0] not in AXES or value[1] not in "+-":
                    raise ValueError(
                        f"{key} filter must look like X+ or Z-, got {value!r}"
                    )
                filters[key] = (key, value[0], +1 if value[1] == "+" else -1)
            else:
                raise ValueError(f"unknown criterion key {key!r}")
        return cls(
            q_out=q_out,
            alice_label=alice_label,
            bob_label=bob_label,
            outcome_filters=tuple(filters[k] for k in _MEASUREMENTS if k in filters),
        )

    def matches(self, rec) -> bool:
        if self.q_out is not None and rec.q_out not in self.q_out:
            return False
        if self.alice_label is not None and rec.alice_label != self.alice_label:
            return False
        if self.bob_label is not None and rec.bob_label != self.bob_label:
            return False
        for meas, axis, sign in self.outcome_filters:
            axis_attr, out_attr = _MEASUREMENTS[meas]
            if getattr(rec, axis_attr) != axis or getattr(rec, out_attr) != sign:
                return False
        return True

    def describe(self) -> str:
        terms = []
        if self.q_out is not None:
            names = ",".join(BELL_NAMES[n] for n in sorted(self.q_out))
            terms.append(f"q={names}")
        if self.alice_label is not None:
            terms.append(f"aliceLabel={self.alice_label}")
        if self.bob_label is not None:
            terms.append(f"bobLabel={self.bob_label}")
        for meas, axis, sign in self.outcome_filters:
            terms.append(f"{meas}={axis}{'+' if sign > 0 else '-'}")
        return "&".join(terms) if terms else "all"


@dataclass
class CountTable:
    """Joint outcome tallies per setting pair at one tomography stage.

    Keys are (axis_A, axis_B, out_A, out_B).  Counts are floats so that
    exact-probability tables (used by the analytic oracle) share the
    type; empirical tallies are integral-valued.
    """

    stage: str
    counts: dict
    n_selected: float
    axes: tuple = AXES

    def setting_total(self, axis_a: str, axis_b: str) -> float:
        return sum(
            self.counts.get((axis_a, axis_b, sa, sb), 0.0)
            for sa in (+1, -1)
            for sb in (+1, -1)
        )

    def correlator(self, axis_a: str, axis_b: str) -> float:
        total = self.setting_total(axis_a, axis_b)
        if total <= 0:
            raise InsufficientCountsError(f"no counts for setting pair ({axis_a}, {axis_b})")
        acc = 0.0
        for sa in (+1, -1):
            for sb in (+1, -1):
                acc += sa * sb * self.counts.get((axis_a, axis_b, sa, sb), 0.0)
        return acc / total

    def marginal(self, side: str, axis: str) -> float:
        """Single-side Pauli expectation, pooled over the partner's settings."""
        total = 0.0
        acc = 0.0
        for other in self.axes:
            for sa in (+1, -1):
                for sb in (+1, -1):
                    key = (axis, other, sa, sb) if side == "A" else (other, axis, sa, sb)
                    c = self.counts.get(key, 0.0)
                    total += c
                    acc += (sa if side == "A" else sb) * c
        if total <= 0:
            raise InsufficientCountsError(f"no counts for side {side} axis {axis}")
        return acc / total


def conditional_counts(records, stage: str, criterion: SelectionCriterion) -> CountTable:
    """Tally (setting, outcome) pairs at one stage among selected runs."""
    stage = check_stage(stage)
    axis_a_attr, out_a_attr = _MEASUREMENTS["pA" if stage == "P" else "rC"]
    axis_b_attr, out_b_attr = _MEASUREMENTS["pB" if stage == "P" else "rD"]
    counts: dict = {}
    n_selected = 0
    total = 0
    for rec in records:
        total += 1
        if not criterion.matches(rec):
            continue
        n_selected += 1
        key = (
            getattr(rec, axis_a_attr),
            getattr(rec, axis_b_attr),
            getattr(rec, out_a_attr),
            getattr(rec, out_b_attr),
        )
        counts[key] = counts.get(key, 0.0) + 1.0
    if n_selected == 0:
        raise EmptySelectionError(
            f"empty selection: criterion '{criterion.describe()}' matches 0 of {total} records"
        )
    return CountTable(stage=stage, counts=counts, n_selected=float(n_selected))


def linear_inversion(table: CountTable) -> np.ndarray:
    """Raw (possibly non-physical) state from the Pauli moment expansion.

    tau = (1/4) sum_ij <sigma_i x sigma_j> sigma_i x sigma_j over i, j in
    {0, X, Y, Z}, with two-sided terms estimated per setting pair and
    single-sided terms pooled across the partner's settings.
    """
    for a in table.axes:
        for b in table.axes:
            if table.setting_total(a, b) <= 0:
                raise InsufficientCountsError(
                    f"setting pair ({a}, {b}) has no counts; "
                    "tomography needs every joint setting populated"
                )
    eye = np.eye(2, dtype=complex)
    tau = np.eye(4, dtype=complex) / 4
    for a in table.axes:
        tau += table.marginal("A", a) * tensor(PAULI[a], eye) / 4
        tau += table.marginal("B", a) * tensor(eye, PAULI[a]) / 4
        for b in table.axes:
            tau += table.correlator(a, b) * tensor(PAULI[a], PAULI[b]) / 4
    return tau


def project_to_physical(raw: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalize the trace to one."""
    h = symmetrize(np.asarray(raw, dtype=complex))
    vals, vecs = hermitian_eig(h)
    clipped = np.clip(vals, 0.0, None)
    total = clipped.sum()
    if total <= 0:
        raise ValueError("projection failed: all eigenvalues clipped to zero")
    return (vecs * (clipped / total)) @ np.conj(vecs.T)


def fidelity_pure(rho: np.ndarray, target: np.ndarray) -> float:
    """<target| rho |target> for a pure target ket."""
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if rho.shape != (target.size, target.size):
        raise ValueError(f"dimension mismatch: state {rho.shape}, target {target.shape}")
    return float(np.real(np.vdot(target, rho @ target)))


def standard_errors(table: CountTable) -> dict:
    """Per-correlator standard error sqrt((1 - c^2) / n_setting)."""
    out = {}
    for a in table.axes:
        for b in table.axes:
            n = table.setting_total(a, b)
            if n <= 0:
                continue
            c = table.correlator(a, b)
            out[(a, b)] = float(np.sqrt(max(0.0, 1.0 - c * c) / n))
    return out


def aggregate_standard_error(table: CountTable) -> float:
    """Propagated scale of statistical error on the reconstructed matrix.

    The raw estimate is a linear combination of 15 estimated Pauli terms
    with weight 1/4 each; in Frobenius norm that aggregates to
    (1/2) sqrt(sum of squared term errors).
    """
    sq = 0.0
    for se in standard_errors(table).values():
        sq += se * se
    for side in ("A", "B"):
        for axis in table.axes:
            n = sum(table.setting_total(*( (axis, b) if side == "A" else (b, axis) ))
                    for b in table.axes)
            m = table.marginal(side, axis)
            sq += max(0.0, 1.0 - m * m) / n
    return float(0.5 * np.sqrt(sq))


@dataclass
class ReconstructionResult:
    stage: str
    criterion: SelectionCriterion
    n_selected: int
    raw: np.ndarray
    physical: np.ndarray
    correlators: dict
    standard_errors: dict = field(repr=False)
    aggregate_se: float = 0.0

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "criterion": self.criterion.describe(),
            "nSelected": self.n_selected,
            "raw": matrix_to_json(self.raw),
            "physical": matrix_to_json(self.physical),
            "correlators": {f"{a}{b}": v for (a, b), v in sorted(self.correlators.items())},
            "standardErrors": {f"{a}{b}": v for (a, b), v in sorted(self.standard_errors.items())},
            "aggregateStandardError": self.aggregate_se,
        }


def reconstruct(
    records,
    stage: str,
    criterion: SelectionCriterion,
    min_setting_counts: int = MIN_SETTING_COUNTS,
    force: bool = False,
) -> ReconstructionResult:
    """Full pipeline: conditional counts, inversion, physical projection.

    Refuses to invert when any joint setting has fewer than
    ``min_setting_counts`` tallies (the projection would dominate the
    estimate); pass force=True to proceed anyway.
    """
    table = conditional_counts(records, stage, criterion)
    if not force:
        for a in table.axes:
            for b in table.axes:
                n = table.setting_total(a, b)
                if n < min_setting_counts:
                    raise InsufficientCountsError(
                        f"setting pair ({a}, {b}) has {int(n)} counts, "
                        f"below the minimum {min_setting_counts} (use force to override)"
                    )
    raw = linear_inversion(table)
    physical = project_to_physical(raw)
    correlators = {(a, b): table.correlator(a, b) for a in table.axes for b in table.axes}
    ses = standard_errors(table)
    return ReconstructionResult(
        stage=stage,
        criterion=criterion,
        n_selected=int(table.n_selected),
        raw=raw,
        physical=physical,
        correlators=correlators,
        standard_errors=ses,
        aggregate_se=aggregate_standard_error(table),
    )


def single_qubit_bloch(records, measurement: str, criterion: SelectionCriterion):
    """Bloch vector of one measured qubit under a selection criterion.

    ``measurement`` names which recorded measurement to read (pA, pB, rC,
    or rD).  Each Bloch component is the mean outcome among selected runs
    whose drawn axis matches that component.  Returns (vector, counts per
    axis, standard error per axis).
    """
    if measurement not in _MEASUREMENTS:
        raise ValueError(f"measurement must be one of {sorted(_MEASUREMENTS)}, got {measurement!r}")
    axis_attr, out_attr = _MEASUREMENTS[measurement]
    sums = {ax: 0.0 for ax in AXES}
    counts = {ax: 0 for ax in AXES}
    for rec in records:
        if not criterion.matches(rec):
            continue
        ax = getattr(rec, axis_attr)
        sums[ax] += getattr(rec, out_attr)
        counts[ax] += 1
    if any(c == 0 for c in counts.values()):
        missing = [ax for ax, c in counts.items() if c == 0]
        raise EmptySelectionError(
            f"criterion '{criterion.describe()}' leaves no {measurement} data on axes {missing}"
        )
    vector = np.array([sums[ax] / counts[ax] for ax in AXES])
    ses = {
        ax: float(np.sqrt(max(0.0, 1.0 - (sums[ax] / counts[ax]) ** 2) / counts[ax]))
        for ax in AXES
    }
    return vector, counts, ses
