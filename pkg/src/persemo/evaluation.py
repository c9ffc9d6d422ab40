"""Evaluation engine: metrics, stratified folds, nested CV, holdout runs.

Macro-F1 is computed one-vs-rest from a confusion matrix with the
zero-division convention precision = recall = F1 = 0 for empty denominators.
ROC-AUC uses the rank statistic (Mann-Whitney, midranks for ties); classes
without both positives and negatives are reported as undefined and excluded
from the macro average rather than silently defaulted.

Nested cross-validation reports two aggregate views of the same runs: the
mean/std of per-outer-fold macro scores, and the score of all outer-fold
predictions pooled into one confusion matrix.  Both appear in the report,
labeled; the headline ``f1_macro`` for nested runs is the fold mean.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .curation import Standardizer
from .errors import (
    ConfigError,
    PersemoError,
    StratificationImpossible,
    annotate,
)
from .seeding import rng_from, subseed
from .classifiers import enumerate_configs, make_classifier


def confusion_matrix(y_true, y_pred, classes) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    classes = list(classes)
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        cm[index[t], index[p]] += 1
    return cm


def precision_recall_f1(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    diag = np.diag(cm).astype(np.float64)
    pred_totals = cm.sum(axis=0).astype(np.float64)
    true_totals = cm.sum(axis=1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_totals > 0, diag / pred_totals, 0.0)
        recall = np.where(true_totals > 0, diag / true_totals, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2.0 * precision * recall / denom, 0.0)
    return precision, recall, f1


def f1_macro(cm: np.ndarray) -> float:
    return float(precision_recall_f1(cm)[2].mean())


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their midrank."""
    n = len(values)
    order = np.argsort(values, kind="stable")
    sorted_v = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_v) != 0) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [n]])
    ranks = np.empty(n, dtype=np.float64)
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0  # midrank, 1-based
    return ranks


def binary_auc(positive: np.ndarray, scores: np.ndarray) -> float | None:
    """Rank-statistic AUC; None when a side is empty (undefined)."""
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _midranks(np.asarray(scores, dtype=np.float64))
    pos_rank_sum = ranks[positive].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(positive: np.ndarray, scores: np.ndarray) -> list[tuple[float, float, float]]:
    """(threshold, FPR, TPR) at every distinct score, descending.

    A point's threshold t means "predict positive where score >= t".  Empty
    when either side has no members (the curve is undefined then).
    """
    positive = np.asarray(positive, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return []
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = positive[order].astype(np.int64)
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    group_ends = np.concatenate([np.flatnonzero(np.diff(s) != 0), [len(s) - 1]])
    return [
        (float(s[i]), float(fp[i] / n_neg), float(tp[i] / n_pos)) for i in group_ends
    ]


def roc_auc_ovr(
    y_true, scores: np.ndarray, classes
) -> tuple[dict[str, float | None], float | None, list[str]]:
    """Per-class one-vs-rest AUC, macro over defined classes, warnings."""
    y_true = np.asarray(y_true, dtype=object)
    per_class: dict[str, float | None] = {}
    warnings: list[str] = []
    for j, c in enumerate(classes):
        auc = binary_auc(y_true == c, scores[:, j])
        per_class[c] = auc
        if auc is None:
            warnings.append(f"auc undefined for class {c!r} (one-sided test set)")
    defined = [v for v in per_class.values() if v is not None]
    macro = float(np.mean(defined)) if defined else None
    return per_class, macro, warnings


def stratified_folds(y, n_folds: int, seed: int) -> list[np.ndarray]:
    """Seeded stratified partition; per-class fold counts differ by <= 1.

    Each class's indices are shuffled and dealt round-robin.  Every class
    must have at least ``n_folds`` members.
    """
    y = np.asarray(y, dtype=object)
    if n_folds < 2:
        raise ConfigError("need at least 2 folds")
    rng = rng_from(seed, "folds")
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for c in sorted(set(y.astype(str))):
        idx = np.flatnonzero(y == c)
        if len(idx) < n_folds:
            raise StratificationImpossible(c, len(idx), n_folds)
        idx = idx[rng.permutation(len(idx))]
        for pos, i in enumerate(idx):
            folds[pos % n_folds].append(int(i))
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def plain_folds(n: int, n_folds: int, seed: int) -> list[np.ndarray]:
    """Unstratified seeded partition with sizes differing by <= 1."""
    if n_folds < 2:
        raise ConfigError("need at least 2 folds")
    if n < n_folds:
        raise StratificationImpossible("<all>", n, n_folds)
    rng = rng_from(seed, "folds")
    perm = rng.permutation(n)
    return [np.sort(perm[k::n_folds]) for k in range(n_folds)]


@dataclass(frozen=True)
class CvPlan:
    outer_folds: int = 10
    inner_folds: int = 5
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ConfigError("fold counts must be at least 2")


@dataclass
class FoldDetail:
    index: int
    config: dict
    f1: float
    auc: float | None
    test_indices: list[int]
    scaler_mean: list[float]
    scaler_scale: list[float]

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "config": self.config,
            "f1_macro": self.f1,
            "auc_macro": self.auc,
            "test_indices": self.test_indices,
            "scaler_mean": self.scaler_mean,
            "scaler_scale": self.scaler_scale,
        }


@dataclass
class EvalReport:
    """Evaluation outcome for one model family on one dataset."""

    family: str
    classes: tuple[str, ...]
    confusion: np.ndarray
    per_class: dict[str, dict]
    f1_macro: float
    auc_macro: float | None
    warnings: list[str] = field(default_factory=list)
    # nested-CV extras; None for plain holdout evaluations
    f1_macro_fold_mean: float | None = None
    f1_macro_fold_std: float | None = None
    f1_macro_pooled: float | None = None
    auc_macro_fold_mean: float | None = None
    auc_macro_pooled: float | None = None
    folds: list[FoldDetail] | None = None
    chosen_config: dict | None = None
    test_fingerprint: str | None = None
    n_train: int = 0
    n_test: int = 0

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "classes": list(self.classes),
            "confusion_matrix": self.confusion.tolist(),
            "per_class": self.per_class,
            "f1_macro": self.f1_macro,
            "auc_macro": self.auc_macro,
            "f1_macro_fold_mean": self.f1_macro_fold_mean,
            "f1_macro_fold_std": self.f1_macro_fold_std,
            "f1_macro_pooled": self.f1_macro_pooled,
            "auc_macro_fold_mean": self.auc_macro_fold_mean,
            "auc_macro_pooled": self.auc_macro_pooled,
            "folds": None if self.folds is None else [f.to_dict() for f in self.folds],
            "chosen_config": self.chosen_config,
            "test_fingerprint": self.test_fingerprint,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "warnings": list(self.warnings),
        }

    def to_json(self, provenance: dict | None = None) -> str:
        payload = self.to_dict()
        if provenance is not None:
            payload["provenance"] = provenance
        return json.dumps(payload, sort_keys=True, indent=2)


def fingerprint(X: np.ndarray, y) -> str:
    """Order-sensitive digest of a feature block and its labels."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    h.update(b"|")
    h.update("\x1f".join(str(v) for v in y).encode("utf-8"))
    return h.hexdigest()


def _per_class_block(cm, classes, y_true, scores) -> tuple[dict, float | None, list[str]]:
    precision, recall, f1 = precision_recall_f1(cm)
    auc_per_class, auc_macro, warnings = roc_auc_ovr(y_true, scores, classes)
    block = {}
    for j, c in enumerate(classes):
        block[c] = {
            "precision": float(precision[j]),
            "recall": float(recall[j]),
            "f1": float(f1[j]),
            "auc": auc_per_class[c],
            "roc": roc_points(np.asarray(y_true, dtype=object) == c, scores[:, j]),
        }
    return block, auc_macro, warnings


def _select_config(
    X, y, family, configs, inner_folds, stratified, seed
) -> tuple[dict, list[float]]:
    """Grid selection by mean inner-fold macro-F1; ties keep grid order.

    With a single configuration the inner loop is skipped entirely.
    """
    if len(configs) == 1:
        return configs[0], []
    classes = sorted(set(np.asarray(y, dtype=object).astype(str)))
    if stratified:
        folds = stratified_folds(y, inner_folds, subseed(seed, "inner"))
    else:
        folds = plain_folds(len(y), inner_folds, subseed(seed, "inner"))
    means: list[float] = []
    for j, config in enumerate(configs):
        scores = []
        for i, val_idx in enumerate(folds):
            train_mask = np.ones(len(y), dtype=bool)
            train_mask[val_idx] = False
            model = make_classifier(family, config, seed=subseed(seed, family, i, j))
            model.fit(X[train_mask], np.asarray(y, dtype=object)[train_mask])
            pred = model.predict(X[val_idx])
            scores.append(f1_macro(confusion_matrix(np.asarray(y, dtype=object)[val_idx], pred, classes)))
        means.append(float(np.mean(scores)))
    best = int(np.argmax(means))  # first maximum: ties keep grid order
    return configs[best], means


def holdout_eval(
    X_train,
    y_train,
    X_test,
    y_test,
    family: str,
    grid: dict[str, list],
    inner_folds: int = 5,
    stratified: bool = True,
    seed: int = 0,
) -> tuple[EvalReport, object]:
    """Grid-search on the training side, refit, evaluate once on the test side.

    Standardization statistics come from the training rows only.  Returns
    ``(report, (scaler, model))`` so callers can persist the refit pipeline.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    X_test = np.asarray(X_test, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=object)
    y_test = np.asarray(y_test, dtype=object)
    configs = enumerate_configs(grid)

    scaler = Standardizer().fit(X_train)
    Xs_train = scaler.transform(X_train)
    Xs_test = scaler.transform(X_test)

    chosen, _ = _select_config(
        Xs_train, y_train, family, configs, inner_folds, stratified, seed
    )
    model = make_classifier(family, chosen, seed=subseed(seed, family, "refit"))
    model.fit(Xs_train, y_train)

    classes = list(model.classes_)
    scores = model.predict_proba(Xs_test)
    pred = model.predict(Xs_test)
    extra = sorted(set(y_test.astype(str)) - set(classes))
    cm_classes = classes + extra
    score_block = np.zeros((len(y_test), len(cm_classes)))
    score_block[:, : len(classes)] = scores
    cm = confusion_matrix(y_test, pred, cm_classes)
    per_class, auc_macro, warnings = _per_class_block(
        cm, cm_classes, y_test, score_block
    )
    report = EvalReport(
        family=family,
        classes=tuple(cm_classes),
        confusion=cm,
        per_class=per_class,
        f1_macro=f1_macro(cm),
        auc_macro=auc_macro,
        warnings=warnings,
        chosen_config=chosen,
        test_fingerprint=fingerprint(X_test, y_test),
        n_train=len(X_train),
        n_test=len(X_test),
    )
    return report, (scaler, model)


def nested_cv(
    X, y, family: str, grid: dict[str, list], plan: CvPlan, seed: int = 0
) -> EvalReport:
    """Stratified outer folds; per fold: standardize on the outer-train,
    grid-search on inner folds, refit, score the outer test fold."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=object)
    configs = enumerate_configs(grid)
    classes = sorted(set(y.astype(str)))

    if plan.stratified:
        outer = stratified_folds(y, plan.outer_folds, subseed(seed, "outer"))
    else:
        outer = plain_folds(len(y), plan.outer_folds, subseed(seed, "outer"))

    fold_details: list[FoldDetail] = []
    fold_f1s: list[float] = []
    fold_aucs: list[float] = []
    warnings: list[str] = []
    pooled_scores = np.zeros((len(y), len(classes)))
    pooled_pred = np.empty(len(y), dtype=object)

    for i, test_idx in enumerate(outer):
        try:
            train_mask = np.ones(len(y), dtype=bool)
            train_mask[test_idx] = False
            scaler = Standardizer().fit(X[train_mask])
            Xs = scaler.transform(X)

            fold_seed = subseed(seed, "outerfold", i)
            chosen, _ = _select_config(
                Xs[train_mask],
                y[train_mask],
                family,
                configs,
                plan.inner_folds,
                plan.stratified,
                fold_seed,
            )
            model = make_classifier(
                family, chosen, seed=subseed(fold_seed, family, "refit")
            )
            model.fit(Xs[train_mask], y[train_mask])

            scores = model.predict_proba(Xs[test_idx])
            pred = model.predict(Xs[test_idx])
            col = {c: j for j, c in enumerate(model.classes_)}
            for j, c in enumerate(classes):
                if c in col:
                    pooled_scores[test_idx, j] = scores[:, col[c]]
            pooled_pred[test_idx] = pred

            cm = confusion_matrix(y[test_idx], pred, classes)
            _, auc_macro_fold, fold_warn = _per_class_block(
                cm, classes, y[test_idx], pooled_scores[test_idx]
            )
            fold_f1s.append(f1_macro(cm))
            if auc_macro_fold is not None:
                fold_aucs.append(auc_macro_fold)
            warnings.extend(f"fold {i}: {w}" for w in fold_warn)
            fold_details.append(
                FoldDetail(
                    index=i,
                    config=chosen,
                    f1=fold_f1s[-1],
                    auc=auc_macro_fold,
                    test_indices=[int(t) for t in test_idx],
                    scaler_mean=scaler.mean_.tolist(),
                    scaler_scale=scaler.scale_.tolist(),
                )
            )
        except PersemoError as err:
            raise annotate(err, f"outer fold {i}")

    pooled_cm = confusion_matrix(y, pooled_pred, classes)
    per_class, auc_macro_pooled, pool_warn = _per_class_block(
        pooled_cm, classes, y, pooled_scores
    )
    warnings.extend(pool_warn)

    fold_mean = float(np.mean(fold_f1s))
    fold_std = float(np.std(fold_f1s))
    return EvalReport(
        family=family,
        classes=tuple(classes),
        confusion=pooled_cm,
        per_class=per_class,
        f1_macro=fold_mean,
        auc_macro=float(np.mean(fold_aucs)) if fold_aucs else None,
        warnings=warnings,
        f1_macro_fold_mean=fold_mean,
        f1_macro_fold_std=fold_std,
        f1_macro_pooled=f1_macro(pooled_cm),
        auc_macro_fold_mean=float(np.mean(fold_aucs)) if fold_aucs else None,
        auc_macro_pooled=auc_macro_pooled,
        folds=fold_details,
        test_fingerprint=fingerprint(X, y),
        n_train=len(X),
        n_test=len(X),
    )


def roc_table(report: EvalReport) -> list[tuple[str, float, float, float]]:
    """Flat (class, threshold, fpr, tpr) rows for CSV export."""
    rows = []
    for c in report.classes:
        for thr, fpr, tpr in report.per_class[c]["roc"]:
            rows.append((c, thr, fpr, tpr))
    return rows
