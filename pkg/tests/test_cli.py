"""Command-line interface."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from persemo.cli import main
from persemo.synthgen import CohortSpec, SubjectProfile, spec_to_json

WIDTH = 51  # default schema width


def write_spec(path, n_subjects=3, frames=60, seed_emotions=("anger", "happiness")):
    subjects = []
    for i in range(n_subjects):
        means = {}
        for j, e in enumerate(seed_emotions):
            v = np.zeros(WIDTH)
            v[(2 * i + j) % WIDTH] = 1.0
            means[e] = v
        subjects.append(
            SubjectProfile(
                subject_id=f"P{i + 1:02d}",
                emotions=tuple(seed_emotions),
                emotion_means=means,
                variances={e: np.ones(WIDTH) for e in seed_emotions},
                separation=4.0,
                informative_features=((2 * i) % WIDTH, (2 * i + 1) % WIDTH),
                frames_per_emotion=frames,
            )
        )
    spec = CohortSpec(
        subjects=tuple(subjects),
        backbone={e: np.zeros(WIDTH) for e in seed_emotions},
        backbone_weight=0.0,
        seed=7,
    )
    path.write_text(spec_to_json(spec))


def write_config(path, out, spec_file, **overrides):
    config = {
        "out": str(out),
        "seed": 7,
        "curation": {"min_labels_per_emotion": 40, "target_per_class": 40},
        "families": ["knn", "random_forest"],
        "grid": {
            "knn": {"k": [3]},
            "random_forest": {"n_trees": [5], "max_depth": [4]},
        },
        "synth": {"spec_file": str(spec_file)},
    }
    config.update(overrides)
    path.write_text(json.dumps(config))


def invoke(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


def run_ok(args):
    result = invoke(args)
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = root / "out"
    spec_file = root / "spec.json"
    config = root / "config.json"
    write_spec(spec_file)
    write_config(config, out, spec_file)
    cfg = ["--config", str(config)]
    run_ok(["synth", *cfg])
    run_ok(["ingest", *cfg])
    run_ok(["train", "P01", "knn", *cfg])
    run_ok(["compare", *cfg])
    run_ok(["importance", "P01", *cfg])
    run_ok(["pca", "P01", *cfg])
    run_ok(["pca", "pooled", *cfg])
    run_ok(["report", *cfg])
    return root, out, config, spec_file


def test_pipeline_artifacts(pipeline):
    _, out, _, _ = pipeline
    expected = [
        "cohort.csv",
        "cohort_spec.json",
        "datasets/P01.json",
        "datasets/P02.json",
        "datasets/P03.json",
        "label_histograms.json",
        "label_histograms.md",
        "models/P01_knn.json",
        "reports/P01_knn.json",
        "reports/P01_knn_confusion.svg",
        "reports/P01_knn_roc.svg",
        "reports/P01_knn_roc.csv",
        "comparison.json",
        "comparison.md",
        "comparison.csv",
        "importance/P01.json",
        "importance/P01.csv",
        "importance/P01.svg",
        "pca/P01.json",
        "pca/P01.csv",
        "pca/P01.svg",
        "pca/P01_correlation.csv",
        "pca/P01_correlation.svg",
        "pca/pooled.json",
        "run_report.json",
        "run_report.md",
    ]
    for rel in expected:
        assert (out / rel).is_file(), rel


def test_comparison_content(pipeline):
    _, out, _, _ = pipeline
    payload = json.loads((out / "comparison.json").read_text())
    rows = payload["rows"]
    assert [r["subject_id"] for r in rows] == ["P01", "P02", "P03"]
    for row in rows:
        assert set(row["cells"]) == {"knn", "random_forest"}
        assert row["flagged"] == (row["overall_winner"] == "generic")
        assert isinstance(row["personalized_silhouette"], float)
    assert "provenance" in payload
    md = (out / "comparison.md").read_text()
    assert "Personalized wins" in md
    assert md.rstrip().endswith(payload["provenance"]["schema_hash"])


def test_provenance_threading(pipeline):
    _, out, _, _ = pipeline
    prov = json.loads((out / "comparison.json").read_text())["provenance"]
    assert prov["seed"] == 7
    # every CSV opens with the provenance comment
    for rel in ("comparison.csv", "cohort.csv", "importance/P01.csv"):
        first = (out / rel).read_text().splitlines()[0]
        assert first.startswith("# config_hash=")
        assert prov["config_hash"] in first
    # the run report indexes artifact provenance
    report = json.loads((out / "run_report.json").read_text())
    by_path = {a["path"]: a for a in report["artifacts"]}
    assert by_path["comparison.json"]["config_hash"] == prov["config_hash"]
    assert "run_report.json" not in by_path


def test_rerun_is_byte_identical(pipeline):
    root, out, config, _ = pipeline
    out2 = root / "out2"
    cfg = ["--config", str(config), "--out", str(out2)]
    run_ok(["synth", *cfg])
    run_ok(["ingest", *cfg])
    run_ok(["compare", *cfg, "--threads", "2"])
    for rel in ("cohort.csv", "datasets/P01.json", "comparison.json"):
        assert (out2 / rel).read_bytes() == (out / rel).read_bytes(), rel


def test_config_hash_ignores_execution_details(pipeline):
    root, out, config, _ = pipeline
    base = json.loads((out / "comparison.json").read_text())["provenance"]
    moved = json.loads((root / "out2" / "comparison.json").read_text())["provenance"]
    assert moved == base  # --out and --threads do not touch the hash


def test_seed_flag_changes_hash_and_outputs(pipeline):
    root, _, config, _ = pipeline
    out3 = root / "out3"
    cfg = ["--config", str(config), "--out", str(out3), "--seed", "8"]
    run_ok(["synth", *cfg])
    prov = json.loads((out3 / "cohort_spec.json").read_text())["provenance"]
    base = json.loads(
        (root / "out" / "cohort_spec.json").read_text()
    )["provenance"]
    assert prov["seed"] == 8
    assert prov["config_hash"] != base["config_hash"]
    assert (out3 / "cohort.csv").read_bytes() != (
        root / "out" / "cohort.csv"
    ).read_bytes()


def test_format_filter(pipeline):
    root, _, config, _ = pipeline
    out4 = root / "out4"
    cfg = ["--config", str(config), "--out", str(out4), "--format", "json"]
    run_ok(["synth", *cfg])
    run_ok(["ingest", *cfg])
    assert (out4 / "label_histograms.json").is_file()
    assert not (out4 / "label_histograms.md").exists()


def test_error_exit_codes(pipeline, tmp_path):
    root, _, config, spec_file = pipeline

    result = invoke(["synth", "--config", str(tmp_path / "missing.json")])
    assert result.exit_code == 2

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert invoke(["synth", "--config", str(bad)]).exit_code == 2

    fam = tmp_path / "fam.json"
    write_config(fam, tmp_path / "o", spec_file, families=["svm"])
    assert invoke(["compare", "--config", str(fam)]).exit_code == 2

    # misspelled dataclass field must surface as a config error, not a TypeError
    typo = tmp_path / "typo.json"
    write_config(typo, tmp_path / "o3", spec_file, curation={"min_per_class": 40})
    result = invoke(["synth", "--config", str(typo)])
    assert result.exit_code == 2
    assert "min_per_class" in result.output

    empty = tmp_path / "empty.json"
    write_config(empty, tmp_path / "o2", spec_file)
    # no cohort generated into this out dir: data error
    assert invoke(["compare", "--config", str(empty)]).exit_code == 3

    # unknown subject against real data
    result = invoke(["train", "zz", "knn", "--config", str(config)])
    assert result.exit_code == 3


def test_error_diagnostics_are_json(pipeline, tmp_path):
    result = invoke(["synth", "--config", str(tmp_path / "missing.json")])
    payload = json.loads(result.output.strip().splitlines()[-1])
    assert payload["error"] == "ConfigError"
    assert payload["exit_code"] == 2
    assert "missing.json" in payload["message"]


def test_nested_cv_split_flag(pipeline):
    root, _, config, _ = pipeline
    out5 = root / "out5"
    cfg = ["--config", str(config), "--out", str(out5)]
    run_ok(["synth", *cfg])
    run_ok(["ingest", *cfg])
    result = run_ok(["train", "P01", "knn", *cfg, "--split", "nested_cv"])
    assert "F1" in result.output
    report = json.loads((out5 / "reports" / "P01_knn.json").read_text())
    assert report["folds"] is not None and len(report["folds"]) == 10
    assert report["f1_macro_fold_mean"] is not None
    # the holdout run in the main pipeline has no fold detail
    holdout = json.loads(
        (pipeline[1] / "reports" / "P01_knn.json").read_text()
    )
    assert holdout["folds"] is None
