"""Command-line entry point.

Every command resolves a JSON config (flags override file values), derives a
config hash, and embeds that hash plus the master seed in each output file.
Outputs contain no timestamps, so identical (config, seed) runs are
byte-identical.  Errors exit with 2 (configuration), 3 (data) or 4
(numerical failure) and print a machine-readable JSON diagnostic on stderr.
"""

from __future__ import annotations

import functools
import hashlib
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import click
import numpy as np
import pandas as pd

from .analysis import correlation_matrix, rank_features, separability_report
from .classifiers import (
    FAMILIES,
    default_grid,
    enumerate_configs,
    make_classifier,
    model_to_json,
)
from .curation import (
    CurationPolicy,
    SplitPlan,
    Standardizer,
    balanced_subsample,
    build_generic,
    datasets_from_table,
    eligible_emotions,
    temporal_split,
    SubjectDataset,
)
from .errors import ConfigError, DataError, PersemoError
from .evaluation import CvPlan, holdout_eval, nested_cv, roc_table
from .ingest import (
    FeatureSchema,
    default_schema,
    label_crosstabs,
    load_schema,
    load_table,
)
from .protocol import (
    GENERIC_MODES,
    ExperimentConfig,
    failure_analysis,
    run_experiment,
)
from .seeding import subseed
from .svg import bars, confusion_grid, heatmap, roc_curves, scatter
from .synthgen import (
    benchmark_cohort,
    cohort_to_table,
    generate,
    spec_from_json,
    spec_to_dict,
)

DEFAULT_CONFIG = {
    "data": None,
    "schema_file": None,
    "out": "out",
    "seed": 0,
    "threads": 1,
    "formats": ["json", "csv", "svg", "md"],
    "curation": {
        "min_labels_per_emotion": 1600,
        "target_per_class": 1600,
        "min_emotions": 2,
    },
    "split": {
        "mode": "temporal_holdout",
        "train_fraction": 0.8,
        "outer_folds": 10,
        "inner_folds": 5,
    },
    "families": list(FAMILIES),
    "generic_mode": "pool_all",
    "grid": None,
    "subjects": None,
    "synth": {"cohort_seed": None, "spec_file": None},
}

_SPLIT_FLAG_MODES = {"temporal": "temporal_holdout", "nested_cv": "nested_cv"}


def _canonical(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass
class RunContext:
    """Resolved configuration plus everything derived from it."""

    config: dict
    hashed_config: dict
    schema: FeatureSchema
    out: Path
    seed: int
    threads: int
    formats: list
    policy: CurationPolicy
    split: SplitPlan
    families: tuple
    generic_mode: str
    grid: dict | None
    subjects: list | None
    config_hash: str

    @property
    def provenance(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "schema_hash": self.schema.hash(),
        }

    def provenance_line(self) -> str:
        p = self.provenance
        return (
            f"config_hash={p['config_hash']} seed={p['seed']} "
            f"schema_hash={p['schema_hash']}"
        )


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _resolve(
    config_path,
    seed=None,
    out_dir=None,
    threads=None,
    formats=(),
    generic_mode=None,
    split_mode=None,
) -> RunContext:
    config = dict(DEFAULT_CONFIG)
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file {path} is not valid JSON: {err}")
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        config = _merge(config, loaded)
    if seed is not None:
        config["seed"] = int(seed)
    if out_dir is not None:
        config["out"] = str(out_dir)
    if threads is not None:
        config["threads"] = int(threads)
    if formats:
        config["formats"] = sorted(set(formats))
    if generic_mode is not None:
        config["generic_mode"] = generic_mode
    if split_mode is not None:
        config["split"] = dict(config["split"], mode=_SPLIT_FLAG_MODES[split_mode])

    if config["schema_file"] is not None:
        schema_path = Path(config["schema_file"])
        if not schema_path.is_file():
            raise ConfigError(f"schema file not found: {schema_path}")
        schema = load_schema(schema_path)
    else:
        schema = default_schema()

    master = int(config["seed"])
    curation_cfg = dict(config["curation"])
    curation_seed = curation_cfg.pop("seed", None)
    bad = set(curation_cfg) - {f.name for f in fields(CurationPolicy)}
    if bad:
        raise ConfigError(f"unknown curation keys {sorted(bad)}")
    policy = CurationPolicy(
        seed=master if curation_seed is None else int(curation_seed), **curation_cfg
    )
    split_cfg = dict(config["split"])
    split_seed = split_cfg.pop("seed", None)
    bad = set(split_cfg) - {f.name for f in fields(SplitPlan)}
    if bad:
        raise ConfigError(f"unknown split keys {sorted(bad)}")
    split = SplitPlan(
        seed=master if split_seed is None else int(split_seed), **split_cfg
    )

    families = tuple(config["families"])
    unknown = set(families) - set(FAMILIES)
    if unknown:
        raise ConfigError(f"unknown model families {sorted(unknown)}")
    if config["generic_mode"] not in GENERIC_MODES:
        raise ConfigError(f"generic_mode must be one of {GENERIC_MODES}")
    if int(config["threads"]) < 1:
        raise ConfigError("threads must be >= 1")

    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    # execution details (parallelism, output location, format filter) never
    # change result bytes, so they stay out of the config hash
    hashed = {
        k: v for k, v in config.items() if k not in ("threads", "out", "formats")
    }
    return RunContext(
        config=config,
        hashed_config=hashed,
        schema=schema,
        out=out,
        seed=master,
        threads=int(config["threads"]),
        formats=list(config["formats"]),
        policy=policy,
        split=split,
        families=families,
        generic_mode=config["generic_mode"],
        grid=config["grid"],
        subjects=config["subjects"],
        config_hash=hashlib.sha256(_canonical(hashed).encode("utf-8")).hexdigest(),
    )


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if not text.endswith("\n"):
        text += "\n"
    path.write_text(text)


def _write_json(ctx: RunContext, path: Path, payload: dict) -> None:
    payload = dict(payload)
    payload.setdefault("provenance", ctx.provenance)
    _write_text(path, json.dumps(payload, sort_keys=True, indent=2))


def _write_csv(ctx: RunContext, path: Path, df: pd.DataFrame) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# {ctx.provenance_line()}\n")
        df.to_csv(fh, index=False)


def _write_md(ctx: RunContext, path: Path, text: str) -> None:
    footer = f"\n---\n{ctx.provenance_line()}\n"
    _write_text(path, text.rstrip("\n") + "\n" + footer)


def _cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PersemoError as err:
            payload = {
                "error": type(err).__name__,
                "message": str(err),
                "exit_code": getattr(err, "exit_code", 1),
            }
            click.echo(json.dumps(payload, sort_keys=True), err=True)
            sys.exit(payload["exit_code"])

    return wrapper


def _common_options(fn):
    options = [
        click.option("--config", "config_path", default=None, help="JSON config file."),
        click.option("--seed", type=int, default=None, help="Master seed override."),
        click.option("--out", "out_dir", default=None, help="Output directory."),
        click.option("--threads", type=int, default=None, help="Parallelism cap."),
        click.option(
            "--format",
            "formats",
            multiple=True,
            type=click.Choice(["json", "csv", "svg", "md"]),
            help="Restrict output formats (repeatable).",
        ),
        click.option(
            "--generic-mode",
            type=click.Choice(list(GENERIC_MODES)),
            default=None,
            help="How the pooled training set treats the evaluated subject.",
        ),
        click.option(
            "--split",
            "split_mode",
            type=click.Choice(sorted(_SPLIT_FLAG_MODES)),
            default=None,
            help="Evaluation split scheme.",
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _data_paths(ctx: RunContext) -> list:
    data = ctx.config["data"]
    if data is None:
        return []
    entries = data if isinstance(data, list) else [data]
    paths = []
    for entry in entries:
        p = Path(entry)
        if p.is_dir():
            found = sorted(p.glob("*.csv"))
            if not found:
                raise DataError(f"no CSV files under {p}")
            paths.extend(found)
        elif p.is_file():
            paths.append(p)
        else:
            raise DataError(f"data path not found: {p}")
    return paths


def _load_datasets(ctx: RunContext) -> list:
    """Locate input data: ingested datasets, raw CSVs, or a synth cohort."""
    dataset_dir = ctx.out / "datasets"
    stored = sorted(dataset_dir.glob("*.json"))
    if stored:
        return [SubjectDataset.from_json(p.read_text()) for p in stored]
    paths = _data_paths(ctx)
    if not paths:
        cohort = ctx.out / "cohort.csv"
        if cohort.is_file():
            paths = [cohort]
        else:
            raise DataError(
                "no input data: set 'data' in the config, or run the synth "
                "or ingest command first"
            )
    df = load_table(paths, ctx.schema, threads=ctx.threads)
    return datasets_from_table(df, ctx.schema)


def _curated(ctx: RunContext, datasets: list, subject: str) -> SubjectDataset:
    by_id = {d.subject_id: d for d in datasets}
    if subject not in by_id:
        raise DataError(
            f"no data for subject {subject!r}; have {sorted(by_id)}"
        )
    ds = by_id[subject]
    emotions = eligible_emotions(ds, ctx.policy)
    return balanced_subsample(ds, emotions, ctx.policy)


@click.group()
def main():
    """Personalized-versus-generic emotion classification toolkit."""


@main.command()
@_common_options
@_cli_errors
def synth(config_path, seed, out_dir, threads, formats, generic_mode, split_mode):
    """Generate a synthetic cohort CSV plus its generating spec."""
    ctx = _resolve(config_path, seed, out_dir, threads, formats, generic_mode, split_mode)
    spec_file = ctx.config["synth"].get("spec_file")
    if spec_file is not None:
        spec_path = Path(spec_file)
        if not spec_path.is_file():
            raise ConfigError(f"cohort spec file not found: {spec_path}")
        spec = spec_from_json(spec_path.read_text())
    else:
        cohort_seed = ctx.config["synth"].get("cohort_seed")
        spec = benchmark_cohort(ctx.seed if cohort_seed is None else int(cohort_seed))
    datasets = generate(spec, ctx.schema)
    table = cohort_to_table(datasets, ctx.schema)
    _write_csv(ctx, ctx.out / "cohort.csv", table)
    _write_json(ctx, ctx.out / "cohort_spec.json", {"spec": spec_to_dict(spec)})
    click.echo(
        f"wrote {ctx.out / 'cohort.csv'} ({len(table)} frames, "
        f"{len(datasets)} subjects)"
    )


@main.command()
@_common_options
@_cli_errors
def ingest(config_path, seed, out_dir, threads, formats, generic_mode, split_mode):
    """Aggregate raw frame CSVs into per-subject datasets and label counts."""
    ctx = _resolve(config_path, seed, out_dir, threads, formats, generic_mode, split_mode)
    paths = _data_paths(ctx)
    if not paths:
        cohort = ctx.out / "cohort.csv"
        if not cohort.is_file():
            raise DataError("no input data: set 'data' in the config or run synth")
        paths = [cohort]
    df = load_table(paths, ctx.schema, threads=ctx.threads)
    datasets = datasets_from_table(df, ctx.schema)
    for ds in datasets:
        _write_text(
            ctx.out / "datasets" / f"{ds.subject_id}.json",
            ds.to_json(provenance=ctx.provenance),
        )
    crosstabs = label_crosstabs(df)
    _write_json(ctx, ctx.out / "label_histograms.json", {"subjects": crosstabs})
    if "md" in ctx.formats:
        lines = []
        for sid in sorted(crosstabs):
            block = crosstabs[sid]
            lines.append(f"## {sid}")
            lines.append("")
            lines.append("| actual emotion | frames |")
            lines.append("|---|---|")
            for emotion, count in sorted(block["actual_totals"].items()):
                lines.append(f"| {emotion} | {count} |")
            lines.append(
                f"\nlabeled {block['n_labeled']} of {block['n_frames']} frames\n"
            )
        _write_md(ctx, ctx.out / "label_histograms.md", "\n".join(lines))
    click.echo(f"ingested {len(datasets)} subjects from {len(paths)} file(s)")


def _grid_for(ctx: RunContext, family: str) -> dict:
    if ctx.grid and family in ctx.grid:
        return ctx.grid[family]
    return default_grid()[family]


@main.command()
@click.argument("subject")
@click.argument("family", type=click.Choice(list(FAMILIES)))
@_common_options
@_cli_errors
def train(
    subject, family, config_path, seed, out_dir, threads, formats, generic_mode, split_mode
):
    """Train one personalized model and write it with its evaluation report."""
    ctx = _resolve(config_path, seed, out_dir, threads, formats, generic_mode, split_mode)
    datasets = _load_datasets(ctx)
    personal = _curated(ctx, datasets, subject)
    grid = _grid_for(ctx, family)
    subject_seed = subseed(ctx.seed, "subject", subject)

    if ctx.split.mode == "temporal_holdout":
        train_idx, test_idx = temporal_split(personal, ctx.split)
        train_ds, test_ds = personal.select(train_idx), personal.select(test_idx)
        report, (scaler, model) = holdout_eval(
            train_ds.features,
            train_ds.labels,
            test_ds.features,
            test_ds.labels,
            family,
            grid,
            inner_folds=ctx.split.inner_folds,
            stratified=True,
            seed=subseed(subject_seed, "personal", 0),
        )
    else:
        plan = CvPlan(
            outer_folds=ctx.split.outer_folds,
            inner_folds=ctx.split.inner_folds,
            stratified=True,
        )
        report = nested_cv(
            personal.features,
            personal.labels,
            family,
            grid,
            plan,
            seed=subseed(subject_seed, "personal", 0),
        )
        # final model: the configuration chosen most often across outer folds
        # (grid order breaks ties), refit on the full curated dataset
        counts: dict[str, int] = {}
        for fold in report.folds:
            counts[_canonical(fold.config)] = counts.get(_canonical(fold.config), 0) + 1
        configs = enumerate_configs(grid)
        chosen = max(
            configs, key=lambda c: (counts.get(_canonical(c), 0), -configs.index(c))
        )
        scaler = Standardizer().fit(personal.features)
        model = make_classifier(
            family, chosen, seed=subseed(subject_seed, "personal", 0, family, "final")
        )
        model.fit(scaler.transform(personal.features), personal.labels)

    _write_json(
        ctx,
        ctx.out / "models" / f"{subject}_{family}.json",
        {
            "subject": subject,
            "scaler": scaler.to_dict(),
            "model": json.loads(model_to_json(model)),
        },
    )
    _write_text(
        ctx.out / "reports" / f"{subject}_{family}.json",
        report.to_json(provenance=ctx.provenance),
    )
    if "svg" in ctx.formats:
        comment = ctx.provenance_line()
        _write_text(
            ctx.out / "reports" / f"{subject}_{family}_confusion.svg",
            confusion_grid(
                report.confusion,
                report.classes,
                title=f"{subject} / {family}",
                comment=comment,
            ),
        )
        curves = {
            c: [(fpr, tpr) for _, fpr, tpr in report.per_class[c]["roc"]]
            for c in report.classes
        }
        _write_text(
            ctx.out / "reports" / f"{subject}_{family}_roc.svg",
            roc_curves(curves, title=f"{subject} / {family}", comment=comment),
        )
    if "csv" in ctx.formats:
        rows = roc_table(report)
        _write_csv(
            ctx,
            ctx.out / "reports" / f"{subject}_{family}_roc.csv",
            pd.DataFrame(rows, columns=["class", "threshold", "fpr", "tpr"]),
        )
    click.echo(
        f"{subject}/{family}: F1 {report.f1_macro:.4f}"
        + (f", AUC {report.auc_macro:.4f}" if report.auc_macro is not None else "")
    )


@main.command()
@_common_options
@_cli_errors
def compare(config_path, seed, out_dir, threads, formats, generic_mode, split_mode):
    """Run the personalized-versus-generic comparison over all subjects."""
    ctx = _resolve(config_path, seed, out_dir, threads, formats, generic_mode, split_mode)
    datasets = _load_datasets(ctx)
    subjects = ctx.subjects or sorted(d.subject_id for d in datasets)
    cfg = ExperimentConfig(
        subjects=tuple(subjects),
        families=ctx.families,
        policy=ctx.policy,
        split=ctx.split,
        generic_mode=ctx.generic_mode,
        seed=ctx.seed,
        grid_overrides=ctx.grid,
    )
    report = run_experiment(cfg, datasets, threads=ctx.threads)
    failure_analysis(report, datasets)
    _write_text(ctx.out / "comparison.json", report.to_json(provenance=ctx.provenance))
    if "md" in ctx.formats:
        _write_md(ctx, ctx.out / "comparison.md", report.to_markdown())
    if "csv" in ctx.formats:
        flat = []
        for row in report.rows:
            for family in report.families:
                cell = row.cells[family]
                flat.append(
                    {
                        "subject": row.subject_id,
                        "family": family,
                        "personalized_f1": cell["personalized_f1"],
                        "generic_f1": cell["generic_f1"],
                        "personalized_auc": cell["personalized_auc"],
                        "generic_auc": cell["generic_auc"],
                        "winner": cell["winner"],
                        "overall_winner": row.overall_winner,
                        "personalized_silhouette": row.personalized_silhouette,
                        "generic_silhouette": row.generic_silhouette,
                        "flagged": row.flagged,
                    }
                )
        _write_csv(ctx, ctx.out / "comparison.csv", pd.DataFrame(flat))
    summary = report.summarize()
    click.echo(
        f"personalized wins overall: {summary['overall_personalized_wins']} "
        f"of {summary['n_subjects']} subjects"
    )


@main.command()
@click.argument("subject")
@_common_options
@_cli_errors
def importance(
    subject, config_path, seed, out_dir, threads, formats, generic_mode, split_mode
):
    """Rank features by forest impurity decrease for one subject."""
    ctx = _resolve(config_path, seed, out_dir, threads, formats, generic_mode, split_mode)
    datasets = _load_datasets(ctx)
    personal = _curated(ctx, datasets, subject)
    config = enumerate_configs(_grid_for(ctx, "random_forest"))[0]
    model = make_classifier(
        "random_forest", config, seed=subseed(ctx.seed, "importance", subject)
    )
    model.fit(personal.features, personal.labels)
    importances = model.feature_importances_
    ranked = rank_features(importances, personal.feature_names)
    by_name = dict(zip(personal.feature_names, importances))
    if "csv" in ctx.formats:
        _write_csv(
            ctx,
            ctx.out / "importance" / f"{subject}.csv",
            pd.DataFrame(
                {
                    "rank": np.arange(1, len(ranked) + 1),
                    "feature": ranked,
                    "importance": [by_name[name] for name in ranked],
                }
            ),
        )
    _write_json(
        ctx,
        ctx.out / "importance" / f"{subject}.json",
        {
            "subject": subject,
            "config": config,
            "ranked_features": ranked,
            "importances": {name: float(by_name[name]) for name in ranked},
        },
    )
    if "svg" in ctx.formats:
        top = ranked[:10]
        _write_text(
            ctx.out / "importance" / f"{subject}.svg",
            bars(
                top,
                [by_name[name] for name in top],
                title=f"{subject}: top feature importances",
                comment=ctx.provenance_line(),
            ),
        )
    click.echo(f"{subject}: top feature {ranked[0]} ({by_name[ranked[0]]:.4f})")


@main.command()
@click.argument("target")
@_common_options
@_cli_errors
def pca(target, config_path, seed, out_dir, threads, formats, generic_mode, split_mode):
    """Project one subject (or the pooled cohort: TARGET=pooled) to 2-D."""
    ctx = _resolve(config_path, seed, out_dir, threads, formats, generic_mode, split_mode)
    datasets = _load_datasets(ctx)
    if target == "pooled":
        emotions = set()
        for ds in datasets:
            try:
                emotions |= eligible_emotions(ds, ctx.policy)
            except PersemoError:
                continue
        if not emotions:
            raise DataError("no subject yields an eligible emotion set")
        curated = build_generic(datasets, emotions, ctx.policy)
    else:
        curated = _curated(ctx, datasets, target)

    X = Standardizer().fit(curated.features).transform(curated.features)
    sep = separability_report(X, curated.labels, subject_id=target)
    _write_text(
        ctx.out / "pca" / f"{target}.json", sep.to_json(provenance=ctx.provenance)
    )
    if "csv" in ctx.formats:
        _write_csv(
            ctx,
            ctx.out / "pca" / f"{target}.csv",
            pd.DataFrame(
                {
                    "x": sep.projection[:, 0],
                    "y": sep.projection[:, 1],
                    "label": list(curated.labels),
                }
            ),
        )
    if "svg" in ctx.formats:
        _write_text(
            ctx.out / "pca" / f"{target}.svg",
            scatter(
                sep.projection,
                curated.labels,
                title=f"{target}: silhouette {sep.silhouette:.3f}",
                comment=ctx.provenance_line(),
            ),
        )
    corr = correlation_matrix(curated.features, curated.feature_names)
    if "csv" in ctx.formats:
        _write_csv(
            ctx,
            ctx.out / "pca" / f"{target}_correlation.csv",
            pd.DataFrame(
                corr.values, index=corr.feature_names, columns=corr.feature_names
            ).reset_index(names="feature"),
        )
    if "svg" in ctx.formats:
        _write_text(
            ctx.out / "pca" / f"{target}_correlation.svg",
            heatmap(
                corr.values,
                corr.feature_names,
                title=f"{target}: feature correlation",
                comment=ctx.provenance_line(),
            ),
        )
    click.echo(f"{target}: silhouette {sep.silhouette:.4f}")


@main.command()
@_common_options
@_cli_errors
def report(config_path, seed, out_dir, threads, formats, generic_mode, split_mode):
    """Consolidate provenance for every artifact present in the output dir."""
    ctx = _resolve(config_path, seed, out_dir, threads, formats, generic_mode, split_mode)
    artifacts = []
    for path in sorted(ctx.out.rglob("*.json")):
        if path.name == "run_report.json":
            continue
        try:
            payload = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            continue
        prov = payload.get("provenance") if isinstance(payload, dict) else None
        artifacts.append(
            {
                "path": str(path.relative_to(ctx.out)),
                "config_hash": (prov or {}).get("config_hash"),
                "seed": (prov or {}).get("seed"),
            }
        )
    payload = {
        "config": ctx.hashed_config,
        "schema_hash": ctx.schema.hash(),
        "n_features": ctx.schema.n_features,
        "artifacts": artifacts,
    }
    _write_json(ctx, ctx.out / "run_report.json", payload)
    if "md" in ctx.formats:
        lines = [
            "# Run report",
            "",
            f"- master seed: {ctx.seed}",
            f"- config hash: {ctx.config_hash}",
            f"- schema hash: {ctx.schema.hash()} ({ctx.schema.n_features} features)",
            f"- artifacts: {len(artifacts)}",
            "",
            "| artifact | config hash |",
            "|---|---|",
        ]
        for art in artifacts:
            lines.append(f"| {art['path']} | {art['config_hash']} |")
        _write_md(ctx, ctx.out / "run_report.md", "\n".join(lines))
    click.echo(f"indexed {len(artifacts)} artifacts under {ctx.out}")


if __name__ == "__main__":
    main()
