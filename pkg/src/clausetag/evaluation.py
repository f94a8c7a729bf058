"""Metrics, k-fold cross-validation, and position statistics.

Accuracy is exact clause matches over all scored clauses. F1 is per class;
the weighted average uses gold-support weights, with zero-support classes
contributing F1 = 0 at weight 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import clone

from .corpus import (LABELS, LABEL_TO_INDEX, N_LABELS, Paragraph,
                     make_folds, position_bucket, split_validation)
from .errors import ClauseTagError, DataError

N_BUCKETS = 5


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    accuracy: float
    per_class: dict[str, ClassMetrics]
    weighted_f1: float
    total: int
    confusion: np.ndarray | None = field(default=None, repr=False)


def confusion_from_sequences(gold: Sequence[Sequence[str]],
                             pred: Sequence[Sequence[str]],
                             ids: Sequence[str] | None = None) -> np.ndarray:
    """8x8 count matrix, gold rows x predicted columns."""
    if len(gold) != len(pred):
        raise DataError(
            f"{len(gold)} gold sequences but {len(pred)} predictions")
    cm = np.zeros((N_LABELS, N_LABELS), dtype=np.int64)
    for i, (g_seq, p_seq) in enumerate(zip(gold, pred)):
        if len(g_seq) != len(p_seq):
            name = ids[i] if ids is not None else str(i)
            raise DataError(
                f"paragraph {name!r}: {len(g_seq)} gold labels but "
                f"{len(p_seq)} predictions")
        for g, p in zip(g_seq, p_seq):
            cm[LABEL_TO_INDEX[g], LABEL_TO_INDEX[p]] += 1
    return cm


def report_from_confusion(cm: np.ndarray) -> MetricsReport:
    total = int(cm.sum())
    if total == 0:
        raise DataError("no scored clauses")
    accuracy = float(np.trace(cm)) / total
    per_class: dict[str, ClassMetrics] = {}
    weighted = 0.0
    for idx, label in enumerate(LABELS):
        tp = float(cm[idx, idx])
        support = int(cm[idx].sum())
        predicted = float(cm[:, idx].sum())
        precision = tp / predicted if predicted > 0 else 0.0
        recall = tp / support if support > 0 else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        per_class[label] = ClassMetrics(precision=precision, recall=recall,
                                        f1=f1, support=support)
        weighted += (support / total) * f1
    return MetricsReport(accuracy=accuracy, per_class=per_class,
                         weighted_f1=weighted, total=total, confusion=cm)


def score_sequences(gold: Sequence[Sequence[str]],
                    pred: Sequence[Sequence[str]],
                    ids: Sequence[str] | None = None) -> MetricsReport:
    return report_from_confusion(confusion_from_sequences(gold, pred, ids))


def score_paragraphs(paragraphs: Sequence[Paragraph],
                     pred: Sequence[Sequence[str]]) -> MetricsReport:
    """Score predictions against the paragraphs' gold labels."""
    gold = []
    for p in paragraphs:
        if not p.is_labeled():
            raise DataError(f"paragraph {p.id!r} has unlabeled clauses")
        gold.append([cl.gold for cl in p.clauses])
    return score_sequences(gold, pred, ids=[p.id for p in paragraphs])


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

def write_metrics_csv(report: MetricsReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "label", "precision", "recall", "f1", "support"])
        for label in LABELS:
            m = report.per_class[label]
            w.writerow(["class", label, repr(m.precision), repr(m.recall),
                        repr(m.f1), m.support])
        w.writerow(["summary", "accuracy", "", "", repr(report.accuracy), ""])
        w.writerow(["summary", "weighted_f1", "", "",
                    repr(report.weighted_f1), ""])
        w.writerow(["summary", "total", "", "", "", report.total])


def read_metrics_csv(path) -> MetricsReport:
    per_class: dict[str, ClassMetrics] = {}
    accuracy = weighted = None
    total = None
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            if rec["kind"] == "class":
                per_class[rec["label"]] = ClassMetrics(
                    precision=float(rec["precision"]),
                    recall=float(rec["recall"]),
                    f1=float(rec["f1"]),
                    support=int(rec["support"]))
            elif rec["label"] == "accuracy":
                accuracy = float(rec["f1"])
            elif rec["label"] == "weighted_f1":
                weighted = float(rec["f1"])
            elif rec["label"] == "total":
                total = int(rec["support"])
    if accuracy is None or weighted is None or total is None:
        raise DataError(f"{path} is not a metrics report")
    return MetricsReport(accuracy=accuracy, per_class=per_class,
                         weighted_f1=weighted, total=total)


def format_metrics_text(report: MetricsReport, title: str = "") -> str:
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'class':<12} {'prec':>7} {'rec':>7} {'f1':>7} {'supp':>6}")
    for label in LABELS:
        m = report.per_class[label]
        lines.append(f"{label:<12} {m.precision:>7.4f} {m.recall:>7.4f} "
                     f"{m.f1:>7.4f} {m.support:>6d}")
    lines.append(f"accuracy    {report.accuracy:.4f} on {report.total} clauses")
    lines.append(f"weighted f1 {report.weighted_f1:.4f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

@dataclass
class CvResult:
    fold_reports: list[MetricsReport]
    pooled: MetricsReport
    predictions: dict[str, list[str]]   # paragraph id -> predicted labels
    fold_of: dict[str, int]


def cross_validate(corpus: Sequence[Paragraph], estimator, k: int = 5,
                   seed: int = 0,
                   validation_fraction: float = 0.1) -> CvResult:
    """Train on k-1 folds (minus an early-stopping slice), score the held-out
    fold; the pooled report is computed over the union of fold predictions.
    """
    for p in corpus:
        if not p.is_labeled():
            raise DataError(f"paragraph {p.id!r} has unlabeled clauses")
    folds = make_folds(corpus, k, seed, validation_fraction)
    fold_reports: list[MetricsReport] = []
    predictions: dict[str, list[str]] = {}
    for fold in range(k):
        train, held_out = folds.split(corpus, fold)
        fit_part, val_part = split_validation(
            train, validation_fraction, seed + fold)
        est = clone(estimator)
        try:
            est.fit(fit_part, X_val=val_part)
        except Exception as exc:
            raise ClauseTagError(f"training failed on fold {fold}: {exc}") \
                from exc
        preds = est.predict(held_out)
        fold_reports.append(score_paragraphs(held_out, preds))
        for p, labels in zip(held_out, preds):
            predictions[p.id] = labels
    pooled = score_paragraphs(
        list(corpus), [predictions[p.id] for p in corpus])
    return CvResult(fold_reports=fold_reports, pooled=pooled,
                    predictions=predictions, fold_of=dict(folds.assignments))


# ---------------------------------------------------------------------------
# position statistics
# ---------------------------------------------------------------------------

def position_stats(paragraphs: Sequence[Paragraph]) -> np.ndarray:
    """p(position bucket | label) over a labeled corpus, shape (8, 5).

    Rows follow the canonical label order; labels with no support are left
    as all-zero rows.
    """
    counts = np.zeros((N_LABELS, N_BUCKETS), dtype=np.float64)
    for p in paragraphs:
        n = len(p.clauses)
        for i, cl in enumerate(p.clauses):
            if cl.gold is None:
                raise DataError(
                    f"paragraph {p.id!r} clause {i} has no gold label")
            counts[LABEL_TO_INDEX[cl.gold], position_bucket(i, n)] += 1.0
    sums = counts.sum(axis=1, keepdims=True)
    out = np.divide(counts, sums, out=np.zeros_like(counts),
                    where=sums > 0)
    return out


def write_position_stats_csv(stats: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"bucket_{b + 1}" for b in range(N_BUCKETS)])
        for idx, label in enumerate(LABELS):
            w.writerow([label] + [repr(float(v)) for v in stats[idx]])


def read_position_stats_csv(path) -> np.ndarray:
    stats = np.zeros((N_LABELS, N_BUCKETS), dtype=np.float64)
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            idx = LABEL_TO_INDEX[rec["label"]]
            for b in range(N_BUCKETS):
                stats[idx, b] = float(rec[f"bucket_{b + 1}"])
    return stats
