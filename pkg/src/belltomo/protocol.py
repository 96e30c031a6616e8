"""The run engine: prepare, tomography measurement, Bell measurement, repeat.

Each run follows the same skeleton.  Two qubits are prepared in labelled
pure states, each is measured once along a randomly drawn Pauli axis (the
P stage), the pair then undergoes a projective Bell-basis measurement Q,
and finally each emerging qubit is measured once more along fresh random
axes (the R stage).  Nothing is ever discarded inside the engine; every
run produces a complete record and all post-selection happens downstream.

Scenario variants:

* ``standard``: labels drawn uniformly from each party's two-state basis.
* ``pbr``: each party first draws one of two preparation bases, then a
  label within it; records carry the basis choices.
* ``dces``: two singlet pairs (A1, A2) and (B1, B2); the P and R stages
  measure the outer qubits A1 and B2 while Q consumes the inner pair
  (A2, B1).  No preparation labels exist, so label fields are None.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import embed, tensor
from .rng import (
    DRAW_ALICE_BASIS,
    DRAW_ALICE_LABEL,
    DRAW_BOB_BASIS,
    DRAW_BOB_LABEL,
    DRAW_PA_AXIS,
    DRAW_PA_OUT,
    DRAW_PB_AXIS,
    DRAW_PB_OUT,
    DRAW_Q,
    DRAW_RC_AXIS,
    DRAW_RC_OUT,
    DRAW_RD_AXIS,
    DRAW_RD_OUT,
    RngStream,
    block_for_runs,
    sample_index,
)
from .states import (
    AXES,
    BELL_NAMES,
    PreparationBasis,
    bell_projectors,
    bell_state,
    ket_to_dm,
    pauli_projector,
    pbr_default_bases,
)
from .validation import check_projector_completeness

__all__ = [
    "SCENARIOS",
    "ExperimentConfig",
    "RunRecord",
    "measure_projective",
    "bell_measure",
    "simulate_run",
    "run_experiment",
    "bell_frequencies",
]

SCENARIOS = ("standard", "pbr", "dces")


@dataclass(frozen=True)
class ExperimentConfig:
    n_runs: int
    master_seed: int
    scenario: str = "standard"
    alice_basis: PreparationBasis = field(default_factory=PreparationBasis.z_basis)
    bob_basis: PreparationBasis = field(default_factory=PreparationBasis.z_basis)
    tomography_axes: tuple[str, ...] = AXES

    def validate(self) -> "ExperimentConfig":
        if not isinstance(self.n_runs, int) or self.n_runs < 1:
            raise ValueError(f"n_runs must be a positive integer, got {self.n_runs!r}")
        if not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed!r}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not self.tomography_axes:
            raise ValueError("tomography_axes must be non-empty")
        for ax in self.tomography_axes:
            if ax not in AXES:
                raise ValueError(f"tomography_axes entries must be in {AXES}, got {ax!r}")
        if len(set(self.tomography_axes)) != len(self.tomography_axes):
            raise ValueError(f"tomography_axes has duplicates: {self.tomography_axes}")
        # PreparationBasis enforces orthonormality on construction.
        return self

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "master_seed": self.master_seed,
            "scenario": self.scenario,
            "tomography_axes": list(self.tomography_axes),
            "alice_basis": _basis_to_dict(self.alice_basis),
            "bob_basis": _basis_to_dict(self.bob_basis),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ValueError("config must be a JSON object")
        unknown = set(d) - {
            "n_runs", "master_seed", "scenario", "tomography_axes",
            "alice_basis", "bob_basis",
        }
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        kwargs = {}
        if "n_runs" in d:
            kwargs["n_runs"] = d["n_runs"]
        if "master_seed" in d:
            kwargs["master_seed"] = d["master_seed"]
        kwargs["scenario"] = d.get("scenario", "standard")
        if "tomography_axes" in d:
            kwargs["tomography_axes"] = tuple(d["tomography_axes"])
        if "alice_basis" in d:
            kwargs["alice_basis"] = _basis_from_dict(d["alice_basis"], "alice_basis")
        if "bob_basis" in d:
            kwargs["bob_basis"] = _basis_from_dict(d["bob_basis"], "bob_basis")
        missing = {"n_runs", "master_seed"} - set(kwargs)
        if missing:
            raise ValueError(f"config is missing required fields: {sorted(missing)}")
        return cls(**kwargs).validate()


def _basis_to_dict(basis: PreparationBasis) -> dict:
    return {
        "name": basis.name,
        "kets": [[[float(a.real), float(a.imag)] for a in k] for k in basis.kets],
    }


def _basis_from_dict(d: dict, name: str) -> PreparationBasis:
    if not isinstance(d, dict):
        raise ValueError(f"{name} must be an object")
    if "theta" in d or "phi" in d:
        return PreparationBasis.from_bloch(float(d.get("theta", 0.0)), float(d.get("phi", 0.0)))
    if "kets" in d:
        kets = [np.array([complex(re, im) for re, im in k]) for k in d["kets"]]
        if len(kets) != 2:
            raise ValueError(f"{name} must carry exactly two kets")
        return PreparationBasis(tuple(kets), name=d.get("name", "custom"))
    raise ValueError(f"{name} must give either Bloch angles or explicit kets")


@dataclass(slots=True)
class RunRecord:
    """Everything recorded in one run.

    Outcomes are +1/-1 for Pauli measurements and a Bell index 0..3 for
    q_out.  Label and basis fields are None where a scenario has no such
    concept (labels for dces, bases outside pbr).
    """

    run_id: int
    alice_label: int | None
    bob_label: int | None
    pA_axis: str
    pA_out: int
    pB_axis: str
    pB_out: int
    q_out: int
    rC_axis: str
    rC_out: int
    rD_axis: str
    rD_out: int
    alice_basis: int | None = None
    bob_basis: int | None = None


class _ProjectorSet:
    """A complete projector set with its stacked array and rank bookkeeping.

    When every member is rank 1, the collapse P rho P / p is P itself,
    so the post-state needs no matrix products.
    """

    __slots__ = ("mats", "stack", "rank_one")

    def __init__(self, mats):
        self.mats = tuple(np.asarray(m, dtype=complex) for m in mats)
        self.stack = np.stack(self.mats)
        self.rank_one = all(abs(np.trace(m).real - 1) < 1e-9 for m in self.mats)


def _sample_collapse(state, pset: _ProjectorSet, rng, slot):
    """Born-rule sampling plus collapse; assumes a validated projector set."""
    probs = np.einsum("kij,ji->k", pset.stack, state).real
    k = sample_index(rng.uniform(slot), probs)
    if pset.rank_one:
        return k, pset.mats[k]
    p = pset.mats[k]
    return k, (p @ state @ p) / probs[k]


def measure_projective(state, projectors, rng: RngStream, slot: int):
    """Projective measurement of a complete projector set on a density matrix.

    Outcome k is sampled with probability tr(proj_k state) using the run
    stream's draw at ``slot``; the returned post-state is the normalized
    collapse proj_k state proj_k / p_k.
    """
    state = np.asarray(state, dtype=complex)
    mats = check_projector_completeness(projectors, state.shape[0])
    return _sample_collapse(state, _ProjectorSet(mats), rng, slot)


def bell_measure(pair_state, rng: RngStream, slot: int = DRAW_Q):
    """Projective measurement in the Bell basis on a two-qubit state."""
    pair_state = np.asarray(pair_state, dtype=complex)
    if pair_state.shape != (4, 4):
        raise ValueError(f"bell_measure expects a 4x4 state, got shape {pair_state.shape}")
    return _sample_collapse(pair_state, _ProjectorSet(bell_projectors()), rng, slot)


def _pair_product(rho_a: np.ndarray, rho_b: np.ndarray) -> np.ndarray:
    """kron for the 2x2 hot path, avoiding np.kron overhead."""
    return (rho_a[:, None, :, None] * rho_b[None, :, None, :]).reshape(4, 4)


class _Engine:
    """Per-config caches for the hot run loop."""

    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.config = config
        self.axes = tuple(config.tomography_axes)
        self.paulis = {
            ax: _ProjectorSet((pauli_projector(ax, +1), pauli_projector(ax, -1)))
            for ax in AXES
        }
        self.bell = _ProjectorSet(bell_projectors())
        eye = np.eye(2, dtype=complex)
        self.side_c = {
            ax: _ProjectorSet(tuple(tensor(p, eye) for p in self.paulis[ax].mats))
            for ax in AXES
        }
        self.side_d = {
            ax: _ProjectorSet(tuple(tensor(eye, p) for p in self.paulis[ax].mats))
            for ax in AXES
        }
        if config.scenario == "pbr":
            bases = pbr_default_bases()
            self.prep_a = {(b, l): bases[b].projector(l) for b in (0, 1) for l in (1, 2)}
            self.prep_b = self.prep_a
        else:
            self.prep_a = {(None, l): config.alice_basis.projector(l) for l in (1, 2)}
            self.prep_b = {(None, l): config.bob_basis.projector(l) for l in (1, 2)}
        if config.scenario == "dces":
            dims = (2, 2, 2, 2)
            singlet = bell_state(3)
            self.dces_initial = ket_to_dm(np.kron(singlet, singlet))
            self.outer_a = {
                ax: _ProjectorSet(tuple(embed(p, 0, dims) for p in self.paulis[ax].mats))
                for ax in AXES
            }
            self.outer_b = {
                ax: _ProjectorSet(tuple(embed(p, 3, dims) for p in self.paulis[ax].mats))
                for ax in AXES
            }
            self.bell_inner = _ProjectorSet(tuple(embed(b, 1, dims) for b in self.bell.mats))

    def _axis(self, rng, slot):
        return self.axes[rng.choice_index(slot, len(self.axes))]

    def run(self, run_id: int, inspect=None, _block=None) -> RunRecord:
        rng = RngStream(self.config.master_seed, run_id, _block=_block)
        scenario = self.config.scenario
        if scenario == "dces":
            return self._run_dces(run_id, rng, inspect)

        if scenario == "pbr":
            a_basis = rng.choice_index(DRAW_ALICE_BASIS, 2)
            b_basis = rng.choice_index(DRAW_BOB_BASIS, 2)
        else:
            a_basis = b_basis = None

        alice_label = 1 + rng.choice_index(DRAW_ALICE_LABEL, 2)
        bob_label = 1 + rng.choice_index(DRAW_BOB_LABEL, 2)
        rho_a = self.prep_a[(a_basis, alice_label)]
        rho_b = self.prep_b[(b_basis, bob_label)]

        pA_axis = self._axis(rng, DRAW_PA_AXIS)
        ka, rho_a = _sample_collapse(rho_a, self.paulis[pA_axis], rng, DRAW_PA_OUT)
        pB_axis = self._axis(rng, DRAW_PB_AXIS)
        kb, rho_b = _sample_collapse(rho_b, self.paulis[pB_axis], rng, DRAW_PB_OUT)

        pair = _pair_product(rho_a, rho_b)
        if inspect is not None:
            inspect(run_id, "pre_q", pair)
        q_out, post = _sample_collapse(pair, self.bell, rng, DRAW_Q)
        if inspect is not None:
            inspect(run_id, "post_q", post)

        rC_axis = self._axis(rng, DRAW_RC_AXIS)
        kc, post = _sample_collapse(post, self.side_c[rC_axis], rng, DRAW_RC_OUT)
        rD_axis = self._axis(rng, DRAW_RD_AXIS)
        kd, _ = _sample_collapse(post, self.side_d[rD_axis], rng, DRAW_RD_OUT)

        return RunRecord(
            run_id=run_id,
            alice_label=alice_label,
            bob_label=bob_label,
            pA_axis=pA_axis,
            pA_out=1 - 2 * ka,
            pB_axis=pB_axis,
            pB_out=1 - 2 * kb,
            q_out=q_out,
            rC_axis=rC_axis,
            rC_out=1 - 2 * kc,
            rD_axis=rD_axis,
            rD_out=1 - 2 * kd,
            alice_basis=a_basis,
            bob_basis=b_basis,
        )

    def _run_dces(self, run_id: int, rng: RngStream, inspect=None) -> RunRecord:
        state = self.dces_initial
        pA_axis = self._axis(rng, DRAW_PA_AXIS)
        ka, state = _sample_collapse(state, self.outer_a[pA_axis], rng, DRAW_PA_OUT)
        pB_axis = self._axis(rng, DRAW_PB_AXIS)
        kb, state = _sample_collapse(state, self.outer_b[pB_axis], rng, DRAW_PB_OUT)
        if inspect is not None:
            inspect(run_id, "pre_q", state)
        q_out, state = _sample_collapse(state, self.bell_inner, rng, DRAW_Q)
        if inspect is not None:
            inspect(run_id, "post_q", state)
        rC_axis = self._axis(rng, DRAW_RC_AXIS)
        kc, state = _sample_collapse(state, self.outer_a[rC_axis], rng, DRAW_RC_OUT)
        rD_axis = self._axis(rng, DRAW_RD_AXIS)
        kd, _ = _sample_collapse(state, self.outer_b[rD_axis], rng, DRAW_RD_OUT)
        return RunRecord(
            run_id=run_id,
            alice_label=None,
            bob_label=None,
            pA_axis=pA_axis,
            pA_out=1 - 2 * ka,
            pB_axis=pB_axis,
            pB_out=1 - 2 * kb,
            q_out=q_out,
            rC_axis=rC_axis,
            rC_out=1 - 2 * kc,
            rD_axis=rD_axis,
            rD_out=1 - 2 * kd,
        )


def simulate_run(config: ExperimentConfig, run_id: int, inspect=None) -> RunRecord:
    """One run in isolation; identical to the matching entry of run_experiment."""
    return _Engine(config).run(run_id, inspect)


def run_experiment(config: ExperimentConfig, inspect=None, run_ids=None) -> list[RunRecord]:
    """Simulate the configured runs and return their records in run_id order.

    ``run_ids`` selects a subset (for sharding); results depend only on
    (master_seed, run_id), so concatenating shards reproduces a full run.
    ``inspect`` is an optional debug callback (run_id, stage, state) invoked
    with the pair state entering Q ("pre_q") and leaving it ("post_q").
    """
    engine = _Engine(config)
    if run_ids is None:
        run_ids = range(config.n_runs)
    run_ids = list(run_ids)
    contiguous = all(b == a + 1 for a, b in zip(run_ids, run_ids[1:]))
    if run_ids and contiguous:
        # One batched Philox call covers a contiguous id range.
        blocks = block_for_runs(config.master_seed, run_ids[0], len(run_ids))
        return [engine.run(r, inspect, _block=blocks[i]) for i, r in enumerate(run_ids)]
    return [engine.run(r, inspect) for r in run_ids]


def bell_frequencies(records) -> dict[str, float]:
    """Fraction of runs per Bell outcome, keyed by outcome name."""
    counts = [0, 0, 0, 0]
    total = 0
    for rec in records:
        counts[rec.q_out] += 1
        total += 1
    if total == 0:
        raise ValueError("no records")
    return {BELL_NAMES[n]: counts[n] / total for n in range(4)}
