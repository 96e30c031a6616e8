"""Command line pipeline: simulate, reconstruct, certify, oracle.

Exit codes: 0 on success, 1 when an analytic check fails (oracle), 2 for
usage problems, unreadable inputs, empty selections, or insufficient
counts.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .analysis import (
    certify,
    contradiction_report,
    exact_count_table,
    oracle_rows,
    pbr_report,
)
from .protocol import ExperimentConfig, bell_frequencies, run_experiment
from .records import (
    SCHEMA_VERSION,
    RecordParseError,
    header_config,
    read_records,
    write_records,
)
from .states import BELL_NAMES, bell_state, ket_to_dm
from .tomography import (
    EmptySelectionError,
    InsufficientCountsError,
    SelectionCriterion,
    fidelity_pure,
    linear_inversion,
    reconstruct,
)

__all__ = ["main"]

USAGE_ERROR = 2
CHECK_FAILURE = 1


class UsageError(Exception):
    pass


def _load_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
    data.setdefault("n_runs", 1000)
    data.setdefault("master_seed", 0)
    if args.runs is not None:
        data["n_runs"] = args.runs
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.scenario is not None:
        data["scenario"] = args.scenario
    try:
        return ExperimentConfig.from_dict(data)
    except ValueError as exc:
        raise UsageError(f"invalid config: {exc}") from None


def cmd_simulate(args) -> int:
    config = _load_config(args)
    records = run_experiment(config)
    write_records(args.out, config, records)
    freqs = bell_frequencies(records)
    print(
        f"wrote {len(records)} records to {args.out} "
        f"(scenario {config.scenario}, seed {config.master_seed})"
    )
    print("Bell outcome frequencies: " + "  ".join(f"{k} {v:.4f}" for k, v in freqs.items()))
    return 0


def _read_records_arg(path):
    try:
        return read_records(path)
    except OSError as exc:
        raise UsageError(f"cannot read records: {exc}") from None
    except RecordParseError as exc:
        raise UsageError(str(exc)) from None


def _parse_criterion_arg(expr):
    try:
        return SelectionCriterion.parse(expr)
    except ValueError as exc:
        raise UsageError(f"bad criterion: {exc}") from None


def _write_report(path, report: dict):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def _check_serialized_traces(report):
    """ReportFile invariant: every serialized state has unit trace."""
    def walk(node):
        if isinstance(node, dict):
            for key, value in node.items():
                if key in ("physical", "prepLabelState"):
                    tr = sum(value[i][i][0] for i in range(len(value)))
                    if abs(tr - 1) > 1e-9:
                        raise AssertionError(f"serialized {key} has trace {tr!r}")
                else:
                    walk(value)
        elif isinstance(node, list):
            for item in node:
                walk(item)
    walk(report)


def _bell_fidelities(rho) -> dict:
    return {BELL_NAMES[n]: fidelity_pure(rho, bell_state(n)) for n in range(4)}


def cmd_reconstruct(args) -> int:
    start = time.perf_counter()
    header, records = _read_records_arg(args.records)
    criterion = _parse_criterion_arg(args.criterion)
    result = reconstruct(records, args.stage, criterion, force=args.force)
    fidelities = _bell_fidelities(result.physical)
    report = {
        "schemaVersion": SCHEMA_VERSION,
        "kind": "reconstruction",
        "recordsFile": str(args.records),
        "scenario": header.get("scenario"),
        "configHash": header.get("configHash"),
        "nRecords": len(records),
        "reconstruction": result.to_dict(),
        "bellFidelities": fidelities,
        "wallTimeSeconds": time.perf_counter() - start,
    }
    _check_serialized_traces(report)
    if args.out:
        _write_report(args.out, report)
    best = max(fidelities, key=fidelities.get)
    print(
        f"stage {result.stage}, criterion '{criterion.describe()}': "
        f"{result.n_selected} runs selected"
    )
    print("Bell fidelities: " + "  ".join(f"{k} {v:.4f}" for k, v in fidelities.items()))
    print(f"closest Bell state: {best} ({fidelities[best]:.4f})")
    if args.out:
        print(f"report written to {args.out}")
    return 0


def cmd_certify(args) -> int:
    start = time.perf_counter()
    header, records = _read_records_arg(args.records)
    criterion = _parse_criterion_arg(args.criterion)
    scenario = header.get("scenario")
    result = reconstruct(records, args.stage, criterion, force=args.force)
    certification = certify(result.physical, standard_error=result.aggregate_se)
    report = {
        "schemaVersion": SCHEMA_VERSION,
        "kind": "certification",
        "recordsFile": str(args.records),
        "scenario": scenario,
        "configHash": header.get("configHash"),
        "nRecords": len(records),
        "stage": args.stage,
        "criterion": criterion.describe(),
        "nSelected": result.n_selected,
        "reconstruction": result.to_dict(),
        "certification": certification.to_dict(),
    }
    single_bell = (
        criterion.q_out is not None
        and len(criterion.q_out) == 1
        and criterion.alice_label is None
        and criterion.bob_label is None
        and not criterion.outcome_filters
    )
    if single_bell and scenario == "standard":
        config = header_config(header)
        contradiction = contradiction_report(records, config, next(iter(criterion.q_out)))
        report["contradiction"] = contradiction.to_dict()
    if scenario == "pbr":
        report["pbr"] = pbr_report(records).to_dict()
    report["wallTimeSeconds"] = time.perf_counter() - start
    _check_serialized_traces(report)
    if args.out:
        _write_report(args.out, report)
    print(
        f"criterion '{criterion.describe()}' ({result.n_selected} runs, stage {args.stage}): "
        f"verdict {certification.verdict}"
    )
    print(
        f"negativity {certification.negativity:.4f}, "
        f"concurrence {certification.concurrence:.4f}, "
        f"CHSH max {certification.chsh_max:.4f}"
    )
    if "contradiction" in report:
        label_cert = report["contradiction"]["certificationLabel"]
        print(
            f"label-built state: verdict {label_cert['verdict']}, "
            f"PT min {min(label_cert['ptSpectrum']):.5f}"
        )
    if args.out:
        print(f"report written to {args.out}")
    return 0


def _oracle_round_trip(n_random: int = 20) -> float:
    """Exact-moment inversion round trip over canonical and random states."""
    states = [ket_to_dm(bell_state(0)), np.eye(4, dtype=complex) / 4]
    gen = np.random.Generator(np.random.Philox(key=1234))
    for _ in range(n_random):
        g = gen.normal(size=(4, 4)) + 1j * gen.normal(size=(4, 4))
        rho = g @ np.conj(g.T)
        states.append(rho / np.trace(rho).real)
    worst = 0.0
    for rho in states:
        recovered = linear_inversion(exact_count_table(rho))
        worst = max(worst, float(np.max(np.abs(recovered - rho))))
    return worst


def cmd_oracle(args) -> int:
    rows, worst, p_bell = oracle_rows()
    if args.flip_sign:
        name, axes, outs, closed, brute, _ = rows[0]
        flipped = (2.0 - 4.0 * closed) / 4.0  # correlation term with its sign flipped
        rows[0] = (name, axes, outs, flipped, brute, abs(flipped - brute))
        worst = max(worst, rows[0][5])
    tol = 1e-12
    print(f"{'bell':<9} {'axes':<6} {'outcomes':<9} {'closed':>9} {'brute':>9} {'diff':>10}")
    failures = 0
    for name, (j, k), (sa, sb), closed, brute, diff in rows:
        status = ""
        if diff > tol:
            failures += 1
            status = "  MISMATCH"
        if args.verbose or diff > tol:
            outs = f"{'+' if sa > 0 else '-'}{'+' if sb > 0 else '-'}"
            print(f"{name:<9} {j}{k:<5} {outs:<9} {closed:9.6f} {brute:9.6f} {diff:10.2e}{status}")
    round_trip = _oracle_round_trip()
    print(f"{len(rows)} conditional identities checked, max difference {worst:.2e}")
    print(f"P[PhiPlus] = {p_bell:g}")
    print(f"exact-moment inversion round trip: max entry error {round_trip:.2e}")
    if failures or worst > tol or round_trip > tol:
        print(f"FAIL: {failures} identity mismatches above {tol:.0e}")
        return CHECK_FAILURE
    print("all oracle checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="belltomo",
        description="Simulate and analyze prepare/tomography/Bell-measurement runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate run records")
    p_sim.add_argument("--config", help="JSON config file (fields mirror ExperimentConfig)")
    p_sim.add_argument("--out", required=True, help="output JSONL record file")
    p_sim.add_argument("--seed", type=int, help="override master_seed")
    p_sim.add_argument("--runs", type=int, help="override n_runs")
    p_sim.add_argument("--scenario", choices=["standard", "pbr", "dces"], help="override scenario")
    p_sim.set_defaults(func=cmd_simulate)

    p_rec = sub.add_parser("reconstruct", help="tomographic state from records")
    p_rec.add_argument("--records", required=True, help="JSONL record file")
    p_rec.add_argument("--stage", choices=["P", "R"], default="P")
    p_rec.add_argument("--criterion", default="all", help="selection, e.g. q=PhiPlus&aliceLabel=1")
    p_rec.add_argument("--out", help="write JSON report here")
    p_rec.add_argument("--force", action="store_true", help="invert even with sparse settings")
    p_rec.set_defaults(func=cmd_reconstruct)

    p_cert = sub.add_parser("certify", help="entanglement certification of a sub-ensemble")
    p_cert.add_argument("--records", required=True, help="JSONL record file")
    p_cert.add_argument("--stage", choices=["P", "R"], default="P")
    p_cert.add_argument("--criterion", default="q=PhiPlus")
    p_cert.add_argument("--out", help="write JSON report here")
    p_cert.add_argument("--force", action="store_true", help="invert even with sparse settings")
    p_cert.set_defaults(func=cmd_certify)

    p_or = sub.add_parser("oracle", help="analytic identity and round-trip self checks")
    p_or.add_argument("--verbose", action="store_true", help="print every identity row")
    p_or.add_argument("--flip-sign", action="store_true", help="inject a sign error (negative control)")
    p_or.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors already; keep that contract
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (EmptySelectionError, InsufficientCountsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
