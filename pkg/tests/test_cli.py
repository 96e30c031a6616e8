"""End-to-end command line tests, run in process via main(argv)."""

import json
from pathlib import Path

import pytest

from belltomo.cli import main
from belltomo.records import header_config, read_records

GOLDEN_DIR = Path(__file__).parent / "golden"
GOLDEN_RECORDS = GOLDEN_DIR / "records_standard_seed11.jsonl"
GOLDEN_REPORT = GOLDEN_DIR / "reconstruct_phiplus_seed11.json"

# The exact commands that produced the golden files:
#   belltomo simulate --out records_standard_seed11.jsonl --runs 2400 --seed 11
#   belltomo reconstruct --records records_standard_seed11.jsonl \
#       --criterion q=PhiPlus --force --out reconstruct_phiplus_seed11.json
GOLDEN_RUNS = 2400
GOLDEN_SEED = 11


@pytest.fixture(scope="module")
def records_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "standard.jsonl"
    code = main(["simulate", "--out", str(path), "--runs", "4000", "--seed", "21"])
    assert code == 0
    return path


@pytest.fixture(scope="module")
def pbr_file(tmp_path_factory):
    # Enough runs that the 3-sigma certification threshold sits well below
    # the PhiPlus sub-ensemble's partial transpose signal.
    path = tmp_path_factory.mktemp("cli") / "pbr.jsonl"
    code = main([
        "simulate", "--out", str(path), "--runs", "10000", "--seed", "22",
        "--scenario", "pbr",
    ])
    assert code == 0
    return path


def test_simulate_writes_records(tmp_path, capsys):
    out = tmp_path / "runs.jsonl"
    code = main(["simulate", "--out", str(out), "--runs", "200", "--seed", "7"])
    assert code == 0
    text = capsys.readouterr().out
    assert "wrote 200 records" in text
    assert "Bell outcome frequencies:" in text
    lines = out.read_text().splitlines()
    assert len(lines) == 201  # header plus one line per run
    header, records = read_records(out)
    assert len(records) == 200
    assert header["scenario"] == "standard"


def test_simulate_reruns_byte_identical(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    for out in (a, b):
        assert main(["simulate", "--out", str(out), "--runs", "150", "--seed", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"n_runs": 50, "master_seed": 9, "scenario": "pbr"}))
    out = tmp_path / "runs.jsonl"
    code = main([
        "simulate", "--config", str(cfg), "--out", str(out), "--runs", "40",
    ])
    assert code == 0
    header, records = read_records(out)
    config = header_config(header)
    assert config.n_runs == 40  # flag wins over the file
    assert config.master_seed == 9
    assert config.scenario == "pbr"
    assert len(records) == 40
    assert records[0].alice_basis in (0, 1)


def test_simulate_invalid_config(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"n_runs": -5}))
    code = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.jsonl")])
    assert code == 2
    assert "invalid config" in capsys.readouterr().err
    cfg.write_text(json.dumps({"scenario": "imaginary"}))
    code = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.jsonl")])
    assert code == 2
    cfg.write_text("not json {")
    code = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.jsonl")])
    assert code == 2


def test_reconstruct_report(records_file, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main([
        "reconstruct", "--records", str(records_file),
        "--criterion", "q=PhiPlus", "--out", str(out),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "closest Bell state: PhiPlus" in text
    report = json.loads(out.read_text())
    assert report["kind"] == "reconstruction"
    assert report["schemaVersion"] == 1
    assert report["nRecords"] == 4000
    assert report["scenario"] == "standard"
    assert report["reconstruction"]["criterion"] == "q=PhiPlus"
    assert report["bellFidelities"]["PhiPlus"] > 0.9
    assert report["wallTimeSeconds"] > 0
    assert len(report["reconstruction"]["physical"]) == 4


def test_reconstruct_r_stage(records_file, capsys):
    code = main([
        "reconstruct", "--records", str(records_file),
        "--stage", "R", "--criterion", "q=PsiMinus",
    ])
    assert code == 0
    assert "closest Bell state: PsiMinus" in capsys.readouterr().out


def test_reconstruct_empty_selection(records_file, capsys):
    code = main([
        "reconstruct", "--records", str(records_file),
        "--criterion", "aliceLabel=2&pA=Z+",
    ])
    assert code == 2
    assert "empty selection" in capsys.readouterr().err


def test_reconstruct_bad_criterion(records_file, capsys):
    code = main(["reconstruct", "--records", str(records_file), "--criterion", "q=Nope"])
    assert code == 2
    assert "bad criterion" in capsys.readouterr().err


def test_reconstruct_insufficient_counts(tmp_path, capsys):
    small = tmp_path / "small.jsonl"
    assert main(["simulate", "--out", str(small), "--runs", "600", "--seed", "4"]) == 0
    code = main(["reconstruct", "--records", str(small), "--criterion", "q=PhiPlus"])
    assert code == 2
    assert "below the minimum" in capsys.readouterr().err
    code = main([
        "reconstruct", "--records", str(small), "--criterion", "q=PhiPlus", "--force",
    ])
    assert code == 0


def test_reconstruct_missing_file(tmp_path, capsys):
    code = main(["reconstruct", "--records", str(tmp_path / "absent.jsonl")])
    assert code == 2
    assert "cannot read records" in capsys.readouterr().err


def test_reconstruct_corrupt_file(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("this is not a record file\n")
    code = main(["reconstruct", "--records", str(bad)])
    assert code == 2


def test_certify_contradiction_section(records_file, tmp_path, capsys):
    out = tmp_path / "certify.json"
    code = main([
        "certify", "--records", str(records_file),
        "--criterion", "q=PhiPlus", "--out", str(out),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "verdict Entangled-NPT" in text
    assert "label-built state: verdict Separable-PPT-consistent" in text
    report = json.loads(out.read_text())
    assert report["kind"] == "certification"
    assert report["certification"]["verdict"] == "Entangled-NPT"
    contradiction = report["contradiction"]
    assert contradiction["certificationLabel"]["verdict"] == "Separable-PPT-consistent"
    assert min(contradiction["certificationLabel"]["ptSpectrum"]) > -1e-10
    assert set(contradiction["labelWeights"]) == {"1|1", "1|2", "2|1", "2|2"}


def test_certify_all_runs_no_contradiction(records_file, tmp_path):
    out = tmp_path / "certify_all.json"
    code = main([
        "certify", "--records", str(records_file), "--criterion", "all",
        "--out", str(out),
    ])
    assert code == 0
    report = json.loads(out.read_text())
    assert "contradiction" not in report
    assert report["certification"]["verdict"] == "Separable-PPT-consistent"


def test_certify_pbr_section(pbr_file, tmp_path):
    out = tmp_path / "certify_pbr.json"
    code = main(["certify", "--records", str(pbr_file), "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert "contradiction" not in report  # scenario is not standard
    pbr = report["pbr"]
    assert abs(pbr["eliminatedFraction"] - 0.5) < 0.03
    assert pbr["certification"]["verdict"] == "Entangled-NPT"


def test_oracle_passes(capsys):
    assert main(["oracle"]) == 0
    text = capsys.readouterr().out
    assert "144 conditional identities" in text
    assert "P[PhiPlus] = 0.25" in text
    assert "all oracle checks passed" in text


def test_oracle_flip_sign_fails(capsys):
    assert main(["oracle", "--flip-sign"]) == 1
    text = capsys.readouterr().out
    assert "MISMATCH" in text
    assert "FAIL" in text


def test_missing_subcommand(capsys):
    assert main([]) == 2
    capsys.readouterr()


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 2
    capsys.readouterr()


def test_golden_records_reproduced(tmp_path):
    fresh = tmp_path / "fresh.jsonl"
    code = main([
        "simulate", "--out", str(fresh),
        "--runs", str(GOLDEN_RUNS), "--seed", str(GOLDEN_SEED),
    ])
    assert code == 0
    assert fresh.read_bytes() == GOLDEN_RECORDS.read_bytes()


def test_golden_reconstruct_report(tmp_path):
    out = tmp_path / "report.json"
    code = main([
        "reconstruct", "--records", str(GOLDEN_RECORDS),
        "--criterion", "q=PhiPlus", "--force", "--out", str(out),
    ])
    assert code == 0
    fresh = json.loads(out.read_text())
    golden = json.loads(GOLDEN_REPORT.read_text())
    for report in (fresh, golden):
        report.pop("wallTimeSeconds")
        report.pop("recordsFile")
    assert fresh == golden
