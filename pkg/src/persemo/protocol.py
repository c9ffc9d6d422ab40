"""Personalized-versus-generic comparison protocol.

For every subject: curate a balanced personal dataset, split it, train a
personalized model per family, build the matched generic training pool for
the same emotion combination, train the generic model, and score both on the
identical held-out test frames.  The result is a per-subject comparison table
with column means and win counts, plus a separability-based failure analysis.

Win rule: within a family, personalized wins only if its F1 strictly exceeds
the generic F1 (ties count for generic).  A subject is an overall
personalized win when personalized wins in a strict majority of families.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import silhouette_score
from .classifiers import FAMILIES, default_grid
from .curation import (
    CurationPolicy,
    SplitPlan,
    Standardizer,
    SubjectDataset,
    balanced_subsample,
    build_generic,
    eligible_emotions,
    temporal_split,
)
from .errors import (
    ConfigError,
    IncompleteReport,
    PersemoError,
    annotate,
)
from .evaluation import holdout_eval, stratified_folds
from .seeding import subseed

GENERIC_MODES = ("pool_all", "leave_one_out")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a comparison run, seeds included."""

    subjects: tuple[str, ...]
    families: tuple[str, ...] = FAMILIES
    policy: CurationPolicy = field(default_factory=CurationPolicy)
    split: SplitPlan = field(default_factory=SplitPlan)
    generic_mode: str = "pool_all"
    seed: int = 0
    grid_overrides: dict | None = None
    subject_seeds: dict | None = None

    def __post_init__(self):
        if not self.subjects:
            raise ConfigError("experiment needs at least one subject")
        if not self.families:
            raise ConfigError("experiment needs at least one model family")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ConfigError(f"unknown model families {sorted(unknown)}")
        if self.generic_mode not in GENERIC_MODES:
            raise ConfigError(f"generic_mode must be one of {GENERIC_MODES}")

    def family_grid(self, family: str) -> dict:
        if self.grid_overrides and family in self.grid_overrides:
            return self.grid_overrides[family]
        return default_grid()[family]

    def subject_seed(self, subject_id: str) -> int:
        if self.subject_seeds and subject_id in self.subject_seeds:
            return int(self.subject_seeds[subject_id])
        return subseed(self.seed, "subject", subject_id)

    def to_dict(self) -> dict:
        return {
            "subjects": list(self.subjects),
            "families": list(self.families),
            "policy": {
                "min_labels_per_emotion": self.policy.min_labels_per_emotion,
                "target_per_class": self.policy.target_per_class,
                "min_emotions": self.policy.min_emotions,
                "seed": self.policy.seed,
            },
            "split": {
                "mode": self.split.mode,
                "train_fraction": self.split.train_fraction,
                "outer_folds": self.split.outer_folds,
                "inner_folds": self.split.inner_folds,
                "seed": self.split.seed,
            },
            "generic_mode": self.generic_mode,
            "seed": self.seed,
            "grid_overrides": self.grid_overrides,
            "subject_seeds": self.subject_seeds,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        return cls(
            subjects=tuple(payload["subjects"]),
            families=tuple(payload["families"]),
            policy=CurationPolicy(**payload["policy"]),
            split=SplitPlan(**payload["split"]),
            generic_mode=payload["generic_mode"],
            seed=int(payload["seed"]),
            grid_overrides=payload.get("grid_overrides"),
            subject_seeds=payload.get("subject_seeds"),
        )


def _winner(personalized_f1: float, generic_f1: float) -> str:
    return "personalized" if personalized_f1 > generic_f1 else "generic"


@dataclass
class ComparisonRow:
    """One subject's personalized-versus-generic outcome across families.

    ``cells`` maps family name to a dict with keys personalized_f1,
    generic_f1, personalized_auc, generic_auc, winner.
    """

    subject_id: str
    emotions: tuple[str, ...]
    cells: dict
    overall_winner: str
    n_train: int = 0
    n_test: int = 0
    personalized_silhouette: float | None = None
    generic_silhouette: float | None = None
    flagged: bool = False

    def __post_init__(self):
        for family, cell in self.cells.items():
            expected = _winner(cell["personalized_f1"], cell["generic_f1"])
            if cell["winner"] != expected:
                raise IncompleteReport(
                    f"winner flag for {self.subject_id!r}/{family!r} is "
                    f"{cell['winner']!r}, inconsistent with its F1 pair"
                )

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "emotions": list(self.emotions),
            "cells": self.cells,
            "overall_winner": self.overall_winner,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "personalized_silhouette": self.personalized_silhouette,
            "generic_silhouette": self.generic_silhouette,
            "flagged": self.flagged,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ComparisonRow":
        return cls(
            subject_id=payload["subject_id"],
            emotions=tuple(payload["emotions"]),
            cells=payload["cells"],
            overall_winner=payload["overall_winner"],
            n_train=int(payload.get("n_train", 0)),
            n_test=int(payload.get("n_test", 0)),
            personalized_silhouette=payload.get("personalized_silhouette"),
            generic_silhouette=payload.get("generic_silhouette"),
            flagged=bool(payload.get("flagged", False)),
        )


def _fmt(value: float) -> str:
    text = f"{value:.4f}".rstrip("0").rstrip(".")
    return text if text else "0"


@dataclass
class ComparisonReport:
    """The full per-subject comparison plus the config that produced it."""

    rows: list
    families: tuple[str, ...]
    config: dict

    def row_for(self, subject_id: str) -> ComparisonRow:
        for row in self.rows:
            if row.subject_id == subject_id:
                return row
        raise IncompleteReport(f"no row for subject {subject_id!r}")

    def summarize(self) -> dict:
        """Column means and win counts; raises on any missing F1 cell."""
        per_family = {}
        for family in self.families:
            p_vals, g_vals, p_auc, g_auc = [], [], [], []
            wins = 0
            for row in self.rows:
                cell = row.cells.get(family)
                if (
                    cell is None
                    or cell.get("personalized_f1") is None
                    or cell.get("generic_f1") is None
                ):
                    raise IncompleteReport(
                        f"missing {family!r} F1 cell for subject {row.subject_id!r}"
                    )
                p_vals.append(cell["personalized_f1"])
                g_vals.append(cell["generic_f1"])
                if cell.get("personalized_auc") is not None:
                    p_auc.append(cell["personalized_auc"])
                if cell.get("generic_auc") is not None:
                    g_auc.append(cell["generic_auc"])
                if _winner(cell["personalized_f1"], cell["generic_f1"]) == "personalized":
                    wins += 1
            per_family[family] = {
                "personalized_f1_mean": float(np.mean(p_vals)),
                "generic_f1_mean": float(np.mean(g_vals)),
                "personalized_auc_mean": float(np.mean(p_auc)) if p_auc else None,
                "generic_auc_mean": float(np.mean(g_auc)) if g_auc else None,
                "personalized_wins": wins,
            }
        overall = sum(1 for row in self.rows if row.overall_winner == "personalized")
        return {
            "n_subjects": len(self.rows),
            "per_family": per_family,
            "overall_personalized_wins": overall,
        }

    def to_markdown(self) -> str:
        """Comparison table, winning F1 in bold, means and win counts below."""
        header = ["Subject"]
        for family in self.families:
            header += [f"{family} (personalized)", f"{family} (generic)"]
        header.append("Overall winner")
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join(["---"] * len(header)) + "|",
        ]
        for row in self.rows:
            parts = [row.subject_id]
            for family in self.families:
                cell = row.cells[family]
                p, g = _fmt(cell["personalized_f1"]), _fmt(cell["generic_f1"])
                if cell["winner"] == "personalized":
                    p = f"**{p}**"
                else:
                    g = f"**{g}**"
                parts += [p, g]
            parts.append(row.overall_winner)
            lines.append("| " + " | ".join(parts) + " |")
        summary = self.summarize()
        mean_parts = ["mean"]
        for family in self.families:
            block = summary["per_family"][family]
            mean_parts += [
                _fmt(block["personalized_f1_mean"]),
                _fmt(block["generic_f1_mean"]),
            ]
        mean_parts.append("")
        lines.append("| " + " | ".join(mean_parts) + " |")
        lines.append("")
        wins = ", ".join(
            f"{family}: {summary['per_family'][family]['personalized_wins']}"
            for family in self.families
        )
        lines.append(
            f"Personalized wins overall: "
            f"{summary['overall_personalized_wins']} of {summary['n_subjects']} "
            f"subjects ({wins})."
        )
        return "\n".join(lines) + "\n"

    def to_dict(self, provenance: dict | None = None) -> dict:
        payload = {
            "rows": [row.to_dict() for row in self.rows],
            "families": list(self.families),
            "config": self.config,
            "summary": self.summarize(),
        }
        if provenance is not None:
            payload["provenance"] = provenance
        return payload

    def to_json(self, provenance: dict | None = None) -> str:
        return json.dumps(self.to_dict(provenance), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, payload: dict) -> "ComparisonReport":
        return cls(
            rows=[ComparisonRow.from_dict(r) for r in payload["rows"]],
            families=tuple(payload["families"]),
            config=payload["config"],
        )

    @classmethod
    def from_json(cls, text: str) -> "ComparisonReport":
        return cls.from_dict(json.loads(text))


def summarize(report: ComparisonReport) -> dict:
    return report.summarize()


def rows_from_f1_table(
    table: dict, families: tuple[str, ...] = FAMILIES
) -> ComparisonReport:
    """Build a report from bare F1 numbers.

    ``table`` maps subject id to {family: (personalized_f1, generic_f1)}.
    Used for arithmetic consistency checks on externally produced scores; no
    models are involved.
    """
    rows = []
    for subject_id, by_family in table.items():
        cells = {}
        wins = 0
        for family in families:
            p, g = by_family[family]
            winner = _winner(p, g)
            wins += winner == "personalized"
            cells[family] = {
                "personalized_f1": float(p),
                "generic_f1": float(g),
                "personalized_auc": None,
                "generic_auc": None,
                "winner": winner,
            }
        overall = "personalized" if wins > len(families) / 2 else "generic"
        rows.append(
            ComparisonRow(
                subject_id=str(subject_id),
                emotions=(),
                cells=cells,
                overall_winner=overall,
            )
        )
    return ComparisonReport(
        rows=rows, families=tuple(families), config={"source": "f1_table"}
    )


def _splits(personal: SubjectDataset, cfg: ExperimentConfig) -> list:
    """Index pairs (train, test) into the curated personal dataset."""
    if cfg.split.mode == "temporal_holdout":
        return [temporal_split(personal, cfg.split)]
    folds = stratified_folds(
        personal.labels,
        cfg.split.outer_folds,
        subseed(cfg.split.seed, "outer", personal.subject_id),
    )
    pairs = []
    for fold in folds:
        mask = np.ones(personal.n_frames, dtype=bool)
        mask[fold] = False
        pairs.append((np.flatnonzero(mask), fold))
    return pairs


def _generic_pool(
    subject_id: str,
    train_ds: SubjectDataset,
    datasets: list,
    cfg: ExperimentConfig,
) -> tuple[list, str | None]:
    """The generic pool contributors and the exclusion id to apply.

    pool_all: every other subject contributes its full stream; the evaluated
    subject contributes only its current training portion, so its test frames
    never reach the generic model.  leave_one_out: the evaluated subject is
    dropped entirely.
    """
    others = [d for d in datasets if d.subject_id != subject_id]
    if cfg.generic_mode == "pool_all":
        return others + [train_ds], None
    return others, subject_id


def evaluate_subject(
    subject_id: str, datasets: list, cfg: ExperimentConfig
) -> ComparisonRow:
    """Run the full personalized-versus-generic comparison for one subject."""
    by_id = {d.subject_id: d for d in datasets}
    if subject_id not in by_id:
        raise ConfigError(f"no dataset for subject {subject_id!r}")
    ds = by_id[subject_id]
    try:
        emotions = sorted(eligible_emotions(ds, cfg.policy))
        personal = balanced_subsample(ds, set(emotions), cfg.policy)
        splits = _splits(personal, cfg)
    except PersemoError as err:
        raise annotate(err, f"subject {subject_id!r}")

    subject_seed = cfg.subject_seed(subject_id)
    acc = {
        family: {"p_f1": [], "g_f1": [], "p_auc": [], "g_auc": []}
        for family in cfg.families
    }
    n_train_total = 0
    n_test_total = 0
    for si, (train_idx, test_idx) in enumerate(splits):
        train_ds = personal.select(train_idx)
        test_ds = personal.select(test_idx)
        n_train_total += train_ds.n_frames
        n_test_total += test_ds.n_frames
        try:
            pool, exclude = _generic_pool(subject_id, train_ds, datasets, cfg)
            generic_train = build_generic(
                pool, set(emotions), cfg.policy, exclude_subject=exclude
            )
        except PersemoError as err:
            raise annotate(err, f"subject {subject_id!r} generic pool")

        for family in cfg.families:
            grid = cfg.family_grid(family)
            try:
                p_report, _ = holdout_eval(
                    train_ds.features,
                    train_ds.labels,
                    test_ds.features,
                    test_ds.labels,
                    family,
                    grid,
                    inner_folds=cfg.split.inner_folds,
                    stratified=True,
                    seed=subseed(subject_seed, "personal", si),
                )
                g_report, _ = holdout_eval(
                    generic_train.features,
                    generic_train.labels,
                    test_ds.features,
                    test_ds.labels,
                    family,
                    grid,
                    inner_folds=cfg.split.inner_folds,
                    stratified=True,
                    seed=subseed(subject_seed, "generic", si),
                )
            except PersemoError as err:
                raise annotate(err, f"subject {subject_id!r} family {family!r}")
            if p_report.test_fingerprint != g_report.test_fingerprint:
                raise PersemoError(
                    f"test sets diverged for subject {subject_id!r} family "
                    f"{family!r}: {p_report.test_fingerprint} != "
                    f"{g_report.test_fingerprint}"
                )
            acc[family]["p_f1"].append(p_report.f1_macro)
            acc[family]["g_f1"].append(g_report.f1_macro)
            if p_report.auc_macro is not None:
                acc[family]["p_auc"].append(p_report.auc_macro)
            if g_report.auc_macro is not None:
                acc[family]["g_auc"].append(g_report.auc_macro)

    cells = {}
    wins = 0
    for family in cfg.families:
        p_f1 = float(np.mean(acc[family]["p_f1"]))
        g_f1 = float(np.mean(acc[family]["g_f1"]))
        winner = _winner(p_f1, g_f1)
        wins += winner == "personalized"
        cells[family] = {
            "personalized_f1": p_f1,
            "generic_f1": g_f1,
            "personalized_auc": (
                float(np.mean(acc[family]["p_auc"])) if acc[family]["p_auc"] else None
            ),
            "generic_auc": (
                float(np.mean(acc[family]["g_auc"])) if acc[family]["g_auc"] else None
            ),
            "winner": winner,
        }
    overall = "personalized" if wins > len(cfg.families) / 2 else "generic"
    return ComparisonRow(
        subject_id=subject_id,
        emotions=tuple(emotions),
        cells=cells,
        overall_winner=overall,
        n_train=n_train_total // len(splits),
        n_test=n_test_total // len(splits),
    )


def _evaluate_star(args) -> ComparisonRow:
    return evaluate_subject(*args)


def run_experiment(
    cfg: ExperimentConfig, datasets: list, threads: int = 1
) -> ComparisonReport:
    """Evaluate every configured subject; rows follow cfg.subjects order.

    Subjects are independent; with threads > 1 they run in separate
    processes, and results are reassembled in subject order so the report is
    identical regardless of thread count.
    """
    by_id = {d.subject_id: d for d in datasets}
    missing = [s for s in cfg.subjects if s not in by_id]
    if missing:
        raise ConfigError(f"no dataset for subjects {missing}")
    hashes = {d.schema_hash for d in datasets}
    if len(hashes) > 1:
        raise ConfigError(f"datasets mix feature schemas: {sorted(hashes)}")

    if threads > 1 and len(cfg.subjects) > 1:
        jobs = [(sid, datasets, cfg) for sid in cfg.subjects]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_evaluate_star, jobs))
    else:
        rows = [evaluate_subject(sid, datasets, cfg) for sid in cfg.subjects]
    return ComparisonReport(rows=rows, families=cfg.families, config=cfg.to_dict())


def failure_analysis(report: ComparisonReport, datasets: list) -> ComparisonReport:
    """Attach separability scores to every row; flag generic-won subjects.

    The personalized silhouette is computed on the subject's curated
    (balanced) dataset after self-standardization; the generic silhouette on
    the pooled generic training set built exactly as during the experiment's
    first split.  Flagged rows are precisely those whose overall winner was
    the generic model.
    """
    cfg = ExperimentConfig.from_dict(report.config)
    by_id = {d.subject_id: d for d in datasets}
    for row in report.rows:
        ds = by_id[row.subject_id]
        personal = balanced_subsample(ds, set(row.emotions), cfg.policy)
        X = Standardizer().fit(personal.features).transform(personal.features)
        row.personalized_silhouette = silhouette_score(X, personal.labels)

        train_idx, _ = _splits(personal, cfg)[0]
        pool, exclude = _generic_pool(
            row.subject_id, personal.select(train_idx), datasets, cfg
        )
        generic_train = build_generic(
            pool, set(row.emotions), cfg.policy, exclude_subject=exclude
        )
        Xg = (
            Standardizer()
            .fit(generic_train.features)
            .transform(generic_train.features)
        )
        row.generic_silhouette = silhouette_score(Xg, generic_train.labels)
        row.flagged = row.overall_winner == "generic"
    return report
