"""Confusion-matrix metrics, AUC, confidence intervals and the k-fold protocol.

The positive class throughout is Recovered.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .dataset import DECEASED, RECOVERED, EncodedDataset, stratified_kfold, stratified_split
from .models import CnnConfig, MlpConfig, one_hot, predict_from_scores, train
from .nn import bce_loss
from .seeding import child_rng

METRIC_NAMES = ("accuracy", "ppv", "recall", "specificity", "f1", "auc")
Z_95 = 1.96


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(predictions, labels) -> ConfusionMatrix:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    if labels.size == 0:
        raise ValueError("empty evaluation set")
    pos_pred = predictions == RECOVERED
    pos_true = labels == RECOVERED
    return ConfusionMatrix(tp=int(np.sum(pos_pred & pos_true)), fp=int(np.sum(pos_pred & ~pos_true)),
                           fn=int(np.sum(~pos_pred & pos_true)), tn=int(np.sum(~pos_pred & ~pos_true)))


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    ppv: float
    recall: float
    specificity: float
    f1: float
    undefined: frozenset = frozenset()


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.add(name)
        return 0.0
    return num / den


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Ratios in [0, 1]; a zero denominator yields 0 and is listed in ``undefined``."""
    if cm.n == 0:
        raise ValueError("empty confusion matrix")
    undefined: set[str] = set()
    ppv = _ratio(cm.tp, cm.tp + cm.fp, "ppv", undefined)
    recall = _ratio(cm.tp, cm.tp + cm.fn, "recall", undefined)
    spec = _ratio(cm.tn, cm.tn + cm.fp, "specificity", undefined)
    f1 = _ratio(2 * ppv * recall, ppv + recall, "f1", undefined)
    return Metrics((cm.tp + cm.tn) / cm.n, ppv, recall, spec, f1, frozenset(undefined))


def auc(scores, labels) -> float:
    """P(score of a random Recovered > score of a random Deceased), ties counting 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == RECOVERED
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs samples from both classes")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def confidence_interval(values) -> tuple[float, float]:
    """Normal-approximation 95% interval: ``mean +- 1.96 * s / sqrt(n)``, ``s`` with ddof=1."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise ValueError("a confidence interval needs at least 2 values")
    return float(values.mean()), float(Z_95 * values.std(ddof=1) / math.sqrt(values.size))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class FoldMetrics:
    fold: int
    accuracy: float
    ppv: float
    recall: float
    specificity: float
    f1: float
    auc: float
    loss: float
    train_time: float
    n_test: int
    n_train: int
    n_val: int
    undefined: tuple[str, ...] = ()

    def to_dict(self, include_timing=False) -> dict:
        doc = {k: getattr(self, k) for k in ("fold",) + METRIC_NAMES + ("loss", "n_test", "n_train", "n_val")}
        doc["undefined"] = list(self.undefined)
        if include_timing:
            doc["train_time"] = self.train_time
        return doc


@dataclass
class EvaluationReport:
    method: str
    folds: list[FoldMetrics]
    curves: list[dict] = field(default_factory=list)
    setup_time: float = 0.0

    def ci(self) -> dict[str, dict]:
        out = {}
        for name in METRIC_NAMES + ("loss", "train_time"):
            values = [getattr(f, name) for f in self.folds]
            if len(values) >= 2:
                mean, half = confidence_interval(values)
            else:
                mean, half = float(values[0]), 0.0
            out[name] = {"mean": mean, "half_width": half}
        return out

    def mean(self, name: str) -> float:
        return float(np.mean([getattr(f, name) for f in self.folds]))

    def to_dict(self, include_timing=False) -> dict:
        ci = self.ci()
        if not include_timing:
            ci.pop("train_time")
        return {"method": self.method, "n_folds": len(self.folds),
                "folds": [f.to_dict(include_timing) for f in self.folds], "ci": ci}

    def curves_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["fold", "epoch", "train_loss", "val_loss", "train_acc", "val_acc"])
        for row in self.curves:
            writer.writerow([row["fold"], row["epoch"]] +
                            [repr(float(row[k])) if k in row else "" for k in
                             ("train_loss", "val_loss", "train_acc", "val_acc")])
        return buf.getvalue()

    def timings(self) -> dict:
        return {"setup_time": self.setup_time, "fold_train_time": [f.train_time for f in self.folds]}


PERCENT_METRICS = ("accuracy", "ppv", "recall", "specificity", "f1", "auc")


def fold_metrics(fold, scores, labels, train_time, n_train, n_val) -> FoldMetrics:
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    m = metrics(confusion(predict_from_scores(scores), labels))
    a = auc(scores[:, RECOVERED], labels)
    return FoldMetrics(fold, 100 * m.accuracy, 100 * m.ppv, 100 * m.recall, 100 * m.specificity,
                       100 * m.f1, 100 * a, bce_loss(scores, one_hot(labels)), train_time,
                       len(labels), n_train, n_val, tuple(sorted(m.undefined)))


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

@dataclass
class CvSettings:
    kind: str = "cnn"
    k: int = 10
    epochs: int = 100
    val_fraction: float = 0.2
    mode: str = "faithful"
    cnn: CnnConfig | None = None
    mlp: MlpConfig | None = None
    batch_size: int | None = None


def _run_fold(data: EncodedDataset, train_idx, test_idx, fold: int, seed: int,
              settings: CvSettings, augmenter):
    rng = child_rng(seed, "fold", fold)
    split_rng, aug_rng, train_rng = rng.spawn(3)
    start = time.perf_counter()
    remaining = data[train_idx]
    if augmenter is not None and settings.mode == "strict":
        remaining, _ = augmenter(remaining, aug_rng)
    rest, held = stratified_split(remaining.y, settings.val_fraction, split_rng)
    clf = train(settings.kind, remaining[rest], remaining[held], settings.epochs, train_rng,
                cnn_config=settings.cnn, mlp_config=settings.mlp, batch_size=settings.batch_size)
    elapsed = time.perf_counter() - start
    test = data[test_idx]
    fm = fold_metrics(fold, clf.score(test.X), test.y, elapsed, len(rest), len(held))
    curves = [{"fold": fold, **row} for row in clf.history]
    return fm, curves


def run_cross_validation(dataset: EncodedDataset, settings: CvSettings, seed: int,
                         augmenter=None, jobs: int = 1, method: str | None = None) -> EvaluationReport:
    """Stratified k-fold evaluation.

    In faithful mode the augmenter (if any) rebalances the whole dataset before
    the split. In strict mode each fold's training portion is augmented on its
    own and test folds hold original samples only. Within a fold the non-test
    samples are split (stratified) into train/validation by ``val_fraction``.
    """
    if settings.mode not in ("faithful", "strict"):
        raise ValueError("mode must be 'faithful' or 'strict'")
    data = dataset
    setup = 0.0
    if augmenter is not None and settings.mode == "faithful":
        start = time.perf_counter()
        data, _ = augmenter(dataset, child_rng(seed, "augment"))
        setup = time.perf_counter() - start
    folds = stratified_kfold(data.y, settings.k, child_rng(seed, "folds"))
    all_idx = np.arange(len(data))
    tasks = [(data, np.setdiff1d(all_idx, test), test, i + 1, seed, settings,
              augmenter if settings.mode == "strict" else None)
             for i, test in enumerate(folds)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_run_fold_star, tasks))
    else:
        results = [_run_fold(*t) for t in tasks]
    name = method or (settings.kind + ("+ae" if augmenter is not None else ""))
    report = EvaluationReport(name, [r[0] for r in results], setup_time=setup)
    report.curves = [row for r in results for row in r[1]]
    return report


def _run_fold_star(args):
    return _run_fold(*args)
