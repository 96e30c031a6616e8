"""Selection criteria, count tables, inversion, physical projection."""

import numpy as np
import pytest

from belltomo.analysis import exact_count_table
from belltomo.protocol import RunRecord
from belltomo.states import AXES, PAULI, bell_state, ket_to_dm
from belltomo.tomography import (
    MIN_SETTING_COUNTS,
    CountTable,
    EmptySelectionError,
    InsufficientCountsError,
    SelectionCriterion,
    aggregate_standard_error,
    conditional_counts,
    fidelity_pure,
    linear_inversion,
    project_to_physical,
    reconstruct,
    single_qubit_bloch,
    standard_errors,
)

PHI_PLUS = ket_to_dm(bell_state(0))
I4 = np.eye(4, dtype=complex) / 4


def make_record(run_id=0, **kwargs):
    base = dict(
        run_id=run_id, alice_label=1, bob_label=1,
        pA_axis="Z", pA_out=1, pB_axis="Z", pB_out=1,
        q_out=0, rC_axis="X", rC_out=1, rD_axis="X", rD_out=1,
    )
    base.update(kwargs)
    return RunRecord(**base)


def test_criterion_parse_trivial():
    for expr in ("", "all", "  "):
        crit = SelectionCriterion.parse(expr)
        assert crit == SelectionCriterion()
        assert crit.describe() == "all"
        assert crit.matches(make_record())


def test_criterion_parse_terms():
    crit = SelectionCriterion.parse("q=PhiPlus,PsiMinus&aliceLabel=1&pA=X+")
    assert crit.q_out == frozenset({0, 3})
    assert crit.alice_label == 1
    assert crit.outcome_filters == (("pA", "X", +1),)
    assert crit.matches(make_record(pA_axis="X", pA_out=1))
    assert not crit.matches(make_record(pA_axis="X", pA_out=-1))
    assert not crit.matches(make_record(pA_axis="Z"))
    assert not crit.matches(make_record(pA_axis="X", pA_out=1, q_out=1))
    assert not crit.matches(make_record(pA_axis="X", pA_out=1, alice_label=2))


def test_criterion_describe_round_trip():
    exprs = ["q=PhiPlus", "q=PhiMinus,PsiPlus&bobLabel=2", "pA=Z-&rD=Y+", "all"]
    for expr in exprs:
        crit = SelectionCriterion.parse(expr)
        assert SelectionCriterion.parse(crit.describe()) == crit


def test_criterion_parse_errors():
    for expr in (
        "q=PhiZero", "nonsense=1", "q=PhiPlus&q=PhiMinus", "aliceLabel=3",
        "pA=W+", "pA=X", "q", "=x", "pA=X+&pA=Z-",
    ):
        with pytest.raises(ValueError):
            SelectionCriterion.parse(expr)


def test_conditional_counts_trivial_criterion(standard_small):
    _, records = standard_small
    table = conditional_counts(records, "P", SelectionCriterion())
    assert table.n_selected == len(records)
    total = sum(table.setting_total(a, b) for a in AXES for b in AXES)
    assert total == len(records)


def test_conditional_counts_stage_attribution():
    recs = [
        make_record(0, pA_axis="X", pA_out=1, rC_axis="Y", rC_out=-1),
        make_record(1, pA_axis="X", pA_out=-1, rC_axis="Y", rC_out=-1),
    ]
    p_table = conditional_counts(recs, "P", SelectionCriterion())
    r_table = conditional_counts(recs, "R", SelectionCriterion())
    assert p_table.counts[("X", "Z", 1, 1)] == 1
    assert p_table.counts[("X", "Z", -1, 1)] == 1
    assert r_table.counts[("Y", "X", -1, 1)] == 2
    assert ("X", "Z", 1, 1) not in r_table.counts


def test_conditional_counts_bell_fraction(standard_small):
    _, records = standard_small
    table = conditional_counts(records, "P", SelectionCriterion.parse("q=PhiPlus"))
    frac = table.n_selected / len(records)
    assert abs(frac - 0.25) < 3 * np.sqrt(0.25 * 0.75 / len(records))


def test_conditional_counts_phi_plus_zz(standard_small):
    # Given PhiPlus, the (Z, Z) setting is perfectly correlated: the
    # anti-aligned outcome has Born probability exactly zero and is never
    # sampled, while (+, +) sits at 1/2.
    _, records = standard_small
    for stage in ("P", "R"):
        table = conditional_counts(records, stage, SelectionCriterion.parse("q=PhiPlus"))
        assert table.counts.get(("Z", "Z", 1, -1), 0.0) == 0.0
        assert table.counts.get(("Z", "Z", -1, 1), 0.0) == 0.0
        n = table.setting_total("Z", "Z")
        aligned = table.counts.get(("Z", "Z", 1, 1), 0.0)
        assert abs(aligned / n - 0.5) < 3 * np.sqrt(0.25 / n)


def test_conditional_counts_empty_selection():
    recs = [make_record(q_out=1)]
    with pytest.raises(EmptySelectionError):
        conditional_counts(recs, "P", SelectionCriterion.parse("q=PhiPlus"))


def test_linear_inversion_exact_on_moments():
    for rho in (PHI_PLUS, I4):
        recovered = linear_inversion(exact_count_table(rho))
        assert np.max(np.abs(recovered - rho)) < 1e-12


def test_linear_inversion_from_correlation_matrix():
    # Hand-built table: correlators diag(1, -1, 1), marginals zero.
    t = {("X", "X"): 1.0, ("Y", "Y"): -1.0, ("Z", "Z"): 1.0}
    counts = {}
    for a in AXES:
        for b in AXES:
            corr = t.get((a, b), 0.0)
            for sa in (+1, -1):
                for sb in (+1, -1):
                    counts[(a, b, sa, sb)] = (1 + sa * sb * corr) / 4
    table = CountTable(stage="P", counts=counts, n_selected=9.0)
    assert np.max(np.abs(linear_inversion(table) - PHI_PLUS)) < 1e-12


def test_linear_inversion_missing_setting():
    table = exact_count_table(PHI_PLUS)
    for sa in (+1, -1):
        for sb in (+1, -1):
            del table.counts[("X", "Y", sa, sb)]
    with pytest.raises(InsufficientCountsError):
        linear_inversion(table)


def test_count_table_accessors():
    table = exact_count_table(PHI_PLUS)
    assert abs(table.correlator("Z", "Z") - 1.0) < 1e-12
    assert abs(table.correlator("Y", "Y") + 1.0) < 1e-12
    assert abs(table.correlator("X", "Z")) < 1e-12
    assert abs(table.marginal("A", "Z")) < 1e-12
    assert abs(table.setting_total("X", "X") - 1.0) < 1e-12
    empty = CountTable(stage="P", counts={}, n_selected=0.0)
    with pytest.raises(InsufficientCountsError):
        empty.correlator("X", "X")
    with pytest.raises(InsufficientCountsError):
        empty.marginal("A", "X")


def test_project_to_physical_frozen_case():
    raw = np.diag([0.6, 0.5, -0.1, 0.0]).astype(complex)
    projected = project_to_physical(raw)
    assert np.allclose(np.sort(np.diag(projected).real), [0, 0, 5 / 11, 6 / 11], atol=1e-12)
    assert abs(np.trace(projected) - 1) < 1e-12


def test_project_to_physical_leaves_psd_alone():
    for rho in (PHI_PLUS, I4):
        assert np.max(np.abs(project_to_physical(rho) - rho)) < 1e-12
    # Idempotent on its own output.
    raw = np.diag([0.7, 0.4, -0.08, -0.02]).astype(complex)
    once = project_to_physical(raw)
    assert np.max(np.abs(project_to_physical(once) - once)) < 1e-12


def test_project_to_physical_degenerate_input():
    with pytest.raises(ValueError):
        project_to_physical(-I4)


def test_fidelity_pure_frozen():
    assert abs(fidelity_pure(PHI_PLUS, bell_state(0)) - 1) < 1e-12
    assert abs(fidelity_pure(I4, bell_state(0)) - 0.25) < 1e-12
    assert abs(fidelity_pure(ket_to_dm(bell_state(1)), bell_state(0))) < 1e-12
    with pytest.raises(ValueError):
        fidelity_pure(np.eye(2) / 2, bell_state(0))


def test_standard_errors_exact_correlators():
    table = exact_count_table(PHI_PLUS)
    ses = standard_errors(table)
    # Perfect correlation leaves no binomial variance; cross terms carry it.
    assert ses[("Z", "Z")] == 0.0
    assert abs(ses[("X", "Z")] - 1.0) < 1e-12  # (1 - 0) / n with n = 1 of probability mass
    assert aggregate_standard_error(table) > 0


def test_reconstruct_pipeline(standard_small):
    _, records = standard_small
    result = reconstruct(records, "P", SelectionCriterion.parse("q=PhiPlus"))
    assert result.stage == "P"
    assert result.n_selected > 2500
    vals = np.linalg.eigvalsh(result.physical)
    assert vals.min() > -1e-10
    assert abs(np.trace(result.physical) - 1) < 1e-10
    assert abs(np.trace(result.raw) - 1) < 1e-10
    assert fidelity_pure(result.physical, bell_state(0)) > 0.9
    assert set(result.correlators) == {(a, b) for a in AXES for b in AXES}
    assert result.aggregate_se > 0
    d = result.to_dict()
    assert d["nSelected"] == result.n_selected
    assert d["criterion"] == "q=PhiPlus"


def test_reconstruct_enforces_min_counts(standard_small):
    _, records = standard_small
    subset = records[:600]
    with pytest.raises(InsufficientCountsError):
        reconstruct(subset, "P", SelectionCriterion.parse("q=PhiPlus"))
    forced = reconstruct(subset, "P", SelectionCriterion.parse("q=PhiPlus"), force=True)
    assert forced.n_selected < MIN_SETTING_COUNTS * 9


def test_reconstruct_p_stage_outcome_filter_unfit(standard_small):
    # Conditioning on a P-stage outcome pins that side's axis, so the
    # P-stage inversion has empty setting pairs; the R stage still works.
    _, records = standard_small
    crit = SelectionCriterion.parse("q=PhiPlus&pA=Z+")
    with pytest.raises(InsufficientCountsError):
        reconstruct(records, "P", crit, force=True)
    result = reconstruct(records, "R", crit, force=True)
    assert result.n_selected > 100


def test_reconstruct_stage_validation(standard_small):
    _, records = standard_small
    with pytest.raises(ValueError):
        reconstruct(records, "Q", SelectionCriterion())


def test_single_qubit_bloch_handcrafted():
    recs = [
        make_record(0, rC_axis="Z", rC_out=1, rD_axis="Z", rD_out=1),
        make_record(1, rC_axis="Z", rC_out=1, rD_axis="Z", rD_out=1),
        make_record(2, rC_axis="Z", rC_out=1, rD_axis="X", rD_out=-1),
        make_record(3, rC_axis="Z", rC_out=1, rD_axis="Y", rD_out=1),
        make_record(4, rC_axis="Z", rC_out=1, rD_axis="Y", rD_out=-1),
    ]
    vec, counts, ses = single_qubit_bloch(recs, "rD", SelectionCriterion())
    assert np.allclose(vec, [-1.0, 0.0, 1.0], atol=1e-12)
    assert counts == {"X": 1, "Y": 2, "Z": 2}
    assert ses["Z"] == 0.0 and ses["Y"] > 0


def test_single_qubit_bloch_requires_all_axes():
    recs = [make_record(0, rD_axis="Z")]
    with pytest.raises(EmptySelectionError):
        single_qubit_bloch(recs, "rD", SelectionCriterion())
    with pytest.raises(ValueError):
        single_qubit_bloch(recs, "rE", SelectionCriterion())
