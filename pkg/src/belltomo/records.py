"""JSONL persistence for run records and JSON helpers for reports.

A record file starts with one header line carrying the schema version,
the scenario, a digest of the generating config, and the config itself,
followed by one line per run.  Field names are camelCase on disk; Bell
outcomes are serialized by name (PhiPlus, PhiMinus, PsiPlus, PsiMinus)
and Pauli outcomes as +1/-1 integers.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .protocol import ExperimentConfig, RunRecord
from .states import BELL_NAMES, bell_index_from_name

__all__ = [
    "SCHEMA_VERSION",
    "RecordParseError",
    "config_digest",
    "record_to_dict",
    "record_from_dict",
    "write_records",
    "read_records",
    "header_config",
    "matrix_to_json",
    "matrix_from_json",
]

SCHEMA_VERSION = 1


class RecordParseError(ValueError):
    """A record file line failed validation."""


def config_digest(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def record_to_dict(rec: RunRecord) -> dict:
    d = {
        "runId": rec.run_id,
        "aliceLabel": rec.alice_label,
        "bobLabel": rec.bob_label,
        "pAAxis": rec.pA_axis,
        "pAOut": rec.pA_out,
        "pBAxis": rec.pB_axis,
        "pBOut": rec.pB_out,
        "qOut": BELL_NAMES[rec.q_out],
        "rCAxis": rec.rC_axis,
        "rCOut": rec.rC_out,
        "rDAxis": rec.rD_axis,
        "rDOut": rec.rD_out,
    }
    if rec.alice_basis is not None or rec.bob_basis is not None:
        d["aliceBasis"] = rec.alice_basis
        d["bobBasis"] = rec.bob_basis
    return d


_OUTCOME_FIELDS = ("pAOut", "pBOut", "rCOut", "rDOut")
_AXIS_FIELDS = ("pAAxis", "pBAxis", "rCAxis", "rDAxis")


def record_from_dict(d: dict) -> RunRecord:
    try:
        run_id = d["runId"]
        q_name = d["qOut"]
    except KeyError as exc:
        raise RecordParseError(f"record is missing field {exc}") from None
    for f in _OUTCOME_FIELDS:
        if d.get(f) not in (1, -1):
            raise RecordParseError(f"record {run_id}: {f} must be +1 or -1, got {d.get(f)!r}")
    for f in _AXIS_FIELDS:
        if d.get(f) not in ("X", "Y", "Z"):
            raise RecordParseError(f"record {run_id}: {f} must be X, Y, or Z, got {d.get(f)!r}")
    for f in ("aliceLabel", "bobLabel"):
        if d.get(f) not in (1, 2, None):
            raise RecordParseError(f"record {run_id}: {f} must be 1, 2, or null, got {d.get(f)!r}")
    for f in ("aliceBasis", "bobBasis"):
        if d.get(f) not in (0, 1, None):
            raise RecordParseError(f"record {run_id}: {f} must be 0, 1, or null, got {d.get(f)!r}")
    try:
        q_out = bell_index_from_name(q_name)
    except ValueError as exc:
        raise RecordParseError(f"record {run_id}: {exc}") from None
    return RunRecord(
        run_id=run_id,
        alice_label=d.get("aliceLabel"),
        bob_label=d.get("bobLabel"),
        pA_axis=d["pAAxis"],
        pA_out=d["pAOut"],
        pB_axis=d["pBAxis"],
        pB_out=d["pBOut"],
        q_out=q_out,
        rC_axis=d["rCAxis"],
        rC_out=d["rCOut"],
        rD_axis=d["rDAxis"],
        rD_out=d["rDOut"],
        alice_basis=d.get("aliceBasis"),
        bob_basis=d.get("bobBasis"),
    )


def write_records(path, config: ExperimentConfig, records) -> None:
    header = {
        "schemaVersion": SCHEMA_VERSION,
        "scenario": config.scenario,
        "configHash": config_digest(config),
        "config": config.to_dict(),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)) + "\n")


def read_records(path) -> tuple[dict, list[RunRecord]]:
    """Parse a record file; returns (header, records) after validation."""
    with open(path) as fh:
        first = fh.readline()
        if not first:
            raise RecordParseError(f"{path}: empty record file")
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise RecordParseError(f"{path}: header is not valid JSON ({exc})") from None
        if not isinstance(header, dict) or "schemaVersion" not in header:
            raise RecordParseError(f"{path}: first line is not a schema header")
        if header["schemaVersion"] != SCHEMA_VERSION:
            raise RecordParseError(
                f"{path}: schema version {header['schemaVersion']} not supported "
                f"(expected {SCHEMA_VERSION})"
            )
        records = []
        last_id = -1
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordParseError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            rec = record_from_dict(d)
            if rec.run_id <= last_id:
                raise RecordParseError(
                    f"{path}:{lineno}: run ids must be strictly increasing "
                    f"({rec.run_id} after {last_id})"
                )
            last_id = rec.run_id
            records.append(rec)
    return header, records


def header_config(header: dict) -> ExperimentConfig:
    """Rebuild the generating config from a record-file header."""
    if "config" not in header:
        raise RecordParseError("record header carries no config")
    return ExperimentConfig.from_dict(header["config"])


def matrix_to_json(m: np.ndarray) -> list:
    """Complex matrix as nested [re, im] pairs, row-major."""
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])
