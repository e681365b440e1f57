"""Evaluation: confusion matrix, macro P/R/F1, one-vs-rest AUC and auPRC.

Conventions fixed here and relied on everywhere else:

* Confusion matrix rows are gold labels, columns are predictions.
* Zero-denominator precision/recall/F1 score 0 (never inflates a macro).
* AUC is the exact Mann-Whitney rank statistic with ties counting 1/2,
  equal to brute-force pair counting.
* auPRC uses step-wise interpolation over descending unique thresholds:
  sum of (R_i - R_{i-1}) * P_i.
* A class with no positive or no negative example has undefined AUC and
  auPRC; it is excluded from the macro mean and flagged in the report.

CSV emitters print P/R/F1 multiplied by 100 and AUC as a fraction,
matching how the published tables format the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LabelOutOfRange, LengthMismatch, RegistryMismatch

__all__ = [
    "EvalReport",
    "aupr_ovr",
    "confusion",
    "evaluate",
    "macro_prf",
    "per_class_prf",
    "pr_points",
    "report_csv",
    "roc_auc_ovr",
    "roc_points",
]


def confusion(golds: Sequence[int], preds: Sequence[int], n_classes: int) -> np.ndarray:
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(golds)} golds vs {len(preds)} predictions")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for g, p in zip(golds, preds):
        if not (0 <= g < n_classes and 0 <= p < n_classes):
            raise LabelOutOfRange(f"label pair ({g}, {p}) outside 0..{n_classes - 1}")
        cm[g, p] += 1
    return cm


def per_class_prf(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tp = np.diag(cm).astype(np.float64)
    pred_totals = cm.sum(axis=0).astype(np.float64)
    gold_totals = cm.sum(axis=1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_totals > 0, tp / np.maximum(pred_totals, 1e-300), 0.0)
        recall = np.where(gold_totals > 0, tp / np.maximum(gold_totals, 1e-300), 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2.0 * precision * recall / np.maximum(denom, 1e-300), 0.0)
    return precision, recall, f1


def macro_prf(cm: np.ndarray) -> tuple[float, float, float]:
    """Unweighted means over all K classes (macro F1 = mean of class F1s)."""
    precision, recall, f1 = per_class_prf(cm)
    return float(precision.mean()), float(recall.mean()), float(f1.mean())


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and scores[order[j]] == scores[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0  # 1-based ranks i+1..j averaged
        i = j
    return ranks


def _check_probs(golds: Sequence[int], probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] != len(golds):
        raise LengthMismatch(f"{len(golds)} golds vs probability matrix {probs.shape}")
    return probs


def roc_auc_ovr(
    golds: Sequence[int], probs: np.ndarray
) -> tuple[list[float | None], float | None]:
    """Per-class and macro ROC-AUC; undefined classes give None."""
    probs = _check_probs(golds, probs)
    gold_arr = np.asarray(golds, dtype=np.int64)
    per_class: list[float | None] = []
    for k in range(probs.shape[1]):
        pos = gold_arr == k
        n_pos = int(pos.sum())
        n_neg = len(gold_arr) - n_pos
        if n_pos == 0 or n_neg == 0:
            per_class.append(None)
            continue
        ranks = _average_ranks(probs[:, k])
        auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        per_class.append(float(auc))
    defined = [a for a in per_class if a is not None]
    return per_class, (float(np.mean(defined)) if defined else None)


def _binary_pr_curve(pos: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds desc, precision, recall) at each unique threshold."""
    order = np.argsort(-scores, kind="stable")
    sorted_pos = pos[order].astype(np.float64)
    sorted_scores = scores[order]
    tp = np.cumsum(sorted_pos)
    fp = np.cumsum(1.0 - sorted_pos)
    # Keep only the last index of each tie group: one point per threshold.
    last = np.nonzero(np.append(sorted_scores[1:] != sorted_scores[:-1], True))[0]
    precision = tp[last] / (tp[last] + fp[last])
    recall = tp[last] / pos.sum()
    return sorted_scores[last], precision, recall


def aupr_ovr(
    golds: Sequence[int], probs: np.ndarray
) -> tuple[list[float | None], float | None]:
    """Step-wise area under the PR curve, per class and macro."""
    probs = _check_probs(golds, probs)
    gold_arr = np.asarray(golds, dtype=np.int64)
    per_class: list[float | None] = []
    for k in range(probs.shape[1]):
        pos = gold_arr == k
        n_pos = int(pos.sum())
        if n_pos == 0 or n_pos == len(gold_arr):
            per_class.append(None)
            continue
        _, precision, recall = _binary_pr_curve(pos, probs[:, k])
        deltas = np.diff(np.concatenate(([0.0], recall)))
        per_class.append(float(np.sum(deltas * precision)))
    defined = [a for a in per_class if a is not None]
    return per_class, (float(np.mean(defined)) if defined else None)


def roc_points(golds: Sequence[int], probs: np.ndarray, k: int) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) triples for class k, threshold descending."""
    probs = _check_probs(golds, probs)
    pos = np.asarray(golds, dtype=np.int64) == k
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return []
    order = np.argsort(-probs[:, k], kind="stable")
    sorted_pos = pos[order].astype(np.float64)
    scores = probs[order, k]
    tp = np.cumsum(sorted_pos)
    fp = np.cumsum(1.0 - sorted_pos)
    last = np.nonzero(np.append(scores[1:] != scores[:-1], True))[0]
    return [
        (float(scores[i]), float(fp[i] / n_neg), float(tp[i] / n_pos)) for i in last
    ]


def pr_points(golds: Sequence[int], probs: np.ndarray, k: int) -> list[tuple[float, float]]:
    """(recall, precision) pairs for class k, threshold descending."""
    probs = _check_probs(golds, probs)
    pos = np.asarray(golds, dtype=np.int64) == k
    if pos.sum() == 0 or pos.all():
        return []
    _, precision, recall = _binary_pr_curve(pos, probs[:, k])
    return [(float(r), float(p)) for r, p in zip(recall, precision)]


@dataclass(frozen=True)
class EvalReport:
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_auc: float | None
    macro_auprc: float | None
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    per_class_f1: tuple[float, ...]
    per_class_auc: tuple[float | None, ...]
    per_class_auprc: tuple[float | None, ...]
    confusion: tuple[tuple[int, ...], ...]
    count: int
    fingerprint: str
    undefined_classes: tuple[int, ...]  # no positives or no negatives in gold

    def to_dict(self) -> dict:
        return {
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
                "auc": self.macro_auc,
                "auprc": self.macro_auprc,
            },
            "per_class": {
                "precision": list(self.per_class_precision),
                "recall": list(self.per_class_recall),
                "f1": list(self.per_class_f1),
                "auc": list(self.per_class_auc),
                "auprc": list(self.per_class_auprc),
            },
            "confusion": [list(row) for row in self.confusion],
            "count": self.count,
            "fingerprint": self.fingerprint,
            "undefined_classes": list(self.undefined_classes),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        macro, per_class = obj["macro"], obj["per_class"]
        return cls(
            macro_precision=macro["precision"],
            macro_recall=macro["recall"],
            macro_f1=macro["f1"],
            macro_auc=macro["auc"],
            macro_auprc=macro["auprc"],
            per_class_precision=tuple(per_class["precision"]),
            per_class_recall=tuple(per_class["recall"]),
            per_class_f1=tuple(per_class["f1"]),
            per_class_auc=tuple(per_class["auc"]),
            per_class_auprc=tuple(per_class["auprc"]),
            confusion=tuple(tuple(row) for row in obj["confusion"]),
            count=obj["count"],
            fingerprint=obj["fingerprint"],
            undefined_classes=tuple(obj["undefined_classes"]),
        )


def evaluate(artifact, examples: Sequence[tuple[str, int]]) -> EvalReport:
    """Predict a labeled test set with the artifact and assemble all metrics."""
    n_classes = artifact.n_classes
    golds = [label for _, label in examples]
    if any(not 0 <= g < n_classes for g in golds):
        raise RegistryMismatch(
            f"test labels exceed the artifact's {n_classes}-label registry"
        )
    probs = artifact.predict_proba([text for text, _ in examples])
    preds = probs.argmax(axis=1)
    cm = confusion(golds, list(preds), n_classes)
    precision, recall, f1 = per_class_prf(cm)
    macro_p, macro_r, macro_f1_val = macro_prf(cm)
    auc_per_class, macro_auc = roc_auc_ovr(golds, probs)
    auprc_per_class, macro_auprc = aupr_ovr(golds, probs)
    undefined = tuple(k for k, a in enumerate(auc_per_class) if a is None)
    return EvalReport(
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f1_val,
        macro_auc=macro_auc,
        macro_auprc=macro_auprc,
        per_class_precision=tuple(float(x) for x in precision),
        per_class_recall=tuple(float(x) for x in recall),
        per_class_f1=tuple(float(x) for x in f1),
        per_class_auc=tuple(auc_per_class),
        per_class_auprc=tuple(auprc_per_class),
        confusion=tuple(tuple(int(x) for x in row) for row in cm),
        count=len(examples),
        fingerprint=artifact.fingerprint,
        undefined_classes=undefined,
    )


def report_csv(report: EvalReport, label_names: Sequence[str]) -> str:
    """Per-class rows as `label,precision,recall,f1,auc`.

    P/R/F1 appear multiplied by 100 with two decimals, AUC as a fraction
    with three, the way the published per-class table prints them. A final
    macro row is appended.
    """
    lines = ["label,precision,recall,f1,auc"]
    for k, name in enumerate(label_names):
        auc = report.per_class_auc[k]
        lines.append(
            f"{name},{100 * report.per_class_precision[k]:.2f},"
            f"{100 * report.per_class_recall[k]:.2f},"
            f"{100 * report.per_class_f1[k]:.2f},"
            + (f"{auc:.3f}" if auc is not None else "")
        )
    macro_auc = f"{report.macro_auc:.3f}" if report.macro_auc is not None else ""
    lines.append(
        f"macro,{100 * report.macro_precision:.2f},{100 * report.macro_recall:.2f},"
        f"{100 * report.macro_f1:.2f},{macro_auc}"
    )
    return "\n".join(lines) + "\n"
