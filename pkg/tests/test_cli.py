"""Command-line surface: verbs, flags, exit codes."""

import json

import pytest

from iraug.cli import main
from iraug.manifest import read_manifest

from conftest import write_dataset


@pytest.fixture
def dataset(tmp_path):
    write_dataset(tmp_path / "data", 4)
    return tmp_path


def _write_config(tmp_path, **extra):
    raw = {
        "dataset_root": str(tmp_path / "data"),
        "output_root": str(tmp_path / "out"),
        "global_seed": 11,
        "backends": [{"name": "id", "kind": "identity"}],
    }
    raw.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


def test_ingest_writes_index(dataset, capsys):
    out = dataset / "index.tsv"
    rc = main(["ingest", "--dataset-root", str(dataset / "data"),
               "--out", str(out)])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 4


def test_split_writes_subset(dataset):
    out = dataset / "subset.tsv"
    rc = main(["split", "--dataset-root", str(dataset / "data"),
               "--ratio", "0.5", "--seed", "3", "--out", str(out)])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 2


def test_augment_and_report_flow(dataset, capsys):
    config = _write_config(dataset)
    rc = main(["augment", "--config", str(config)])
    assert rc == 0
    records = read_manifest(dataset / "out" / "manifest.jsonl")
    assert len(records) == 4

    report_dir = dataset / "rep"
    rc = main([
        "report",
        "--pred-dir", str(dataset / "out" / "masks"),
        "--gt-dir", str(dataset / "out" / "masks"),
        "--out", str(report_dir),
    ])
    assert rc == 0
    table = capsys.readouterr().out
    assert "__aggregate__" in table
    lines = (report_dir / "report.jsonl").read_text().splitlines()
    assert json.loads(lines[-1])["iou"] == 1.0


def test_augment_seed_override_changes_manifest(dataset):
    config = _write_config(dataset)
    main(["augment", "--config", str(config)])
    first = (dataset / "out" / "manifest.jsonl").read_bytes()
    main(["augment", "--config", str(config), "--seed", "999"])
    assert (dataset / "out" / "manifest.jsonl").read_bytes() != first


def test_augment_backend_filter_unknown_name(dataset, capsys):
    config = _write_config(dataset)
    rc = main(["augment", "--config", str(config), "--backend", "nope"])
    assert rc == 2
    assert "ERROR config" in capsys.readouterr().err


def test_bad_config_exit_code(dataset, capsys):
    config = _write_config(dataset, ratio=7.0)
    rc = main(["augment", "--config", str(config)])
    assert rc == 2
    assert "ERROR config" in capsys.readouterr().err


def test_report_sweep_csv(dataset):
    config = _write_config(dataset)
    main(["augment", "--config", str(config)])
    report_dir = dataset / "rep"
    rc = main([
        "report",
        "--pred-dir", str(dataset / "out" / "masks"),
        "--gt-dir", str(dataset / "out" / "masks"),
        "--out", str(report_dir), "--sweep", "4",
    ])
    assert rc == 0
    rows = (report_dir / "sweep.csv").read_text().splitlines()
    assert rows[0] == "threshold,pd,fa_per_million"
    assert len(rows) == 6


def test_schedule_export(tmp_path):
    out = tmp_path / "sched.tsv"
    rc = main(["schedule-export", "--kind", "linear", "--steps", "10",
               "--beta-start", "1e-4", "--beta-end", "0.02",
               "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#")
    assert len(lines) == 11


def test_schedule_export_invalid_params(capsys):
    rc = main(["schedule-export", "--steps", "10",
               "--beta-start", "2.0"])
    assert rc == 2
