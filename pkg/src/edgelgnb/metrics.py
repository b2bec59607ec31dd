"""Confusion-matrix scores and stratified k-fold model selection.

The anomaly class is the positive class throughout.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .datagen import ANOMALY, NORMAL


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Scores:
    accuracy: float
    precision: float
    recall: float
    f_beta: float
    beta: float = 1.0

    def to_dict(self):
        return asdict(self)


def confusion(predictions, truth) -> ConfusionMatrix:
    p = np.asarray(predictions)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} predictions vs {t.shape} labels")
    if p.size == 0:
        raise ValueError("no samples to score")
    pos_p, pos_t = p == ANOMALY, t == ANOMALY
    return ConfusionMatrix(
        tp=int(np.sum(pos_p & pos_t)),
        fp=int(np.sum(pos_p & ~pos_t)),
        fn=int(np.sum(~pos_p & pos_t)),
        tn=int(np.sum(~pos_p & ~pos_t)),
    )


def f_beta(precision, recall, beta=1.0):
    """Weighted harmonic mean; beta > 1 favours recall. Zero when P = R = 0."""
    b2 = beta * beta
    denom = b2 * precision + recall
    return 0.0 if denom == 0 else (1.0 + b2) * precision * recall / denom


def scores(cm: ConfusionMatrix, beta: float = 1.0) -> Scores:
    """Accuracy, precision, recall and F-beta; empty denominators give 0."""
    if cm.total <= 0:
        raise ValueError("confusion matrix is empty")
    if not beta > 0:
        raise ValueError("beta must be positive")
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    return Scores(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=precision,
        recall=recall,
        f_beta=f_beta(precision, recall, beta),
        beta=float(beta),
    )


def evaluate(predictions, truth, beta=1.0) -> Scores:
    return scores(confusion(predictions, truth), beta)


# ----------------------------------------------------------------------
# cross-validation
# ----------------------------------------------------------------------

def stratified_folds(labels, k=5, seed=0):
    """Seeded stratified partition of ``range(len(labels))`` into ``k`` folds.

    Indices of each class are shuffled, the classes are laid end to end and
    dealt to folds round-robin, so fold sizes differ by at most one and every
    fold gets a near-equal share of each class.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < k:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c))
                            for c in np.unique(labels)])
    folds = [[] for _ in range(k)]
    for pos, idx in enumerate(order):
        folds[pos % k].append(int(idx))
    return [np.sort(np.array(f, dtype=int)) for f in folds]


@dataclass
class CvResult:
    best_index: int
    best: object
    mean_scores: list  # mean objective per candidate
    rows: list  # (candidate, fold, Scores)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["candidate", "fold", "accuracy", "precision", "recall", "f_beta"])
            for cand, fold, s in self.rows:
                w.writerow([cand, fold, repr(s.accuracy), repr(s.precision),
                            repr(s.recall), repr(s.f_beta)])

    def summary(self):
        return {"best_index": self.best_index, "mean_objective": list(self.mean_scores)}


def kfold_select(candidates, samples, fit, k=5, seed=0, objective="f1", beta=1.0) -> CvResult:
    """Pick the candidate with the best mean objective over stratified folds.

    ``fit(candidate, train_samples)`` must return an object with
    ``predict(samples) -> labels``. Folds are fixed from ``seed`` before any
    training, and ties go to the lowest candidate index.
    """
    if objective not in ("f1", "accuracy"):
        raise ValueError(f"objective must be 'f1' or 'accuracy', got {objective!r}")
    candidates = list(candidates)
    if not candidates:
        raise ValueError("need at least one candidate")
    samples = list(samples)
    labels = np.array([s.label for s in samples])
    folds = stratified_folds(labels, k, seed)
    rows, means = [], []
    for ci, cand in enumerate(candidates):
        values = []
        for fi, test_idx in enumerate(folds):
            held = set(test_idx.tolist())
            train = [s for i, s in enumerate(samples) if i not in held]
            test = [samples[i] for i in test_idx]
            model = fit(cand, train)
            s = evaluate(model.predict(test), labels[test_idx], beta)
            rows.append((ci, fi, s))
            values.append(s.f_beta if objective == "f1" else s.accuracy)
        means.append(float(np.mean(values)))
    best = int(np.argmax(means))  # argmax keeps the first maximum
    return CvResult(best, candidates[best], means, rows)


def write_scores(s: Scores, cm: ConfusionMatrix, csv_path=None, json_path=None):
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["candidate", "fold", "accuracy", "precision", "recall", "f_beta"])
            w.writerow(["", "", repr(s.accuracy), repr(s.precision), repr(s.recall), repr(s.f_beta)])
    if json_path:
        doc = {"confusion": asdict(cm), "scores": s.to_dict()}
        with open(json_path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")


__all__ = ["ConfusionMatrix", "Scores", "confusion", "f_beta", "scores", "evaluate",
           "stratified_folds", "kfold_select", "CvResult", "write_scores", "NORMAL", "ANOMALY"]
