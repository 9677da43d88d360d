"""Bayes-factor classification of persistence diagrams.

Each class gets its own posterior fitted on that class's training diagrams. A
new diagram is scored by its log density under every class posterior, and each
unordered pair of classes casts one vote: class i wins the pair when the Bayes
factor BF^{ij} exceeds the threshold ``c``, otherwise class j does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import rankdata

from .persistence import PersistenceDiagram
from .pointprocess import ModelConfig
from .posterior import PosteriorDistribution, PosteriorUnderflowError, compute_posterior, diagram_log_density


@dataclass(frozen=True)
class TrainedClassifier:
    classes: tuple
    posteriors: dict
    c: float
    configs: dict

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("a classifier needs at least 2 classes")
        if self.c <= 0:
            raise ValueError("threshold c must be > 0")


def _config_for(configs, label):
    if isinstance(configs, ModelConfig):
        return configs
    try:
        return configs[label]
    except KeyError:
        raise ValueError(f"no model config for class {label!r}") from None


def fit(training: dict, configs, c: float = 1.0) -> TrainedClassifier:
    """One posterior per class from that class's training diagrams.

    ``configs`` is a single ModelConfig shared by all classes or a mapping
    class -> ModelConfig. Class order is the sorted order of the labels.
    """
    classes = tuple(sorted(training))
    posteriors = {}
    used = {}
    for label in classes:
        diagrams = list(training[label])
        if not diagrams:
            raise ValueError(f"class {label!r} has no training diagrams")
        cfg = _config_for(configs, label)
        try:
            posteriors[label] = compute_posterior(cfg.prior, cfg.obs, cfg.unexpected, diagrams, n_max=cfg.n_max)
        except PosteriorUnderflowError as exc:
            raise PosteriorUnderflowError(f"class {label!r}: {exc}") from exc
        used[label] = cfg
    return TrainedClassifier(classes, posteriors, float(c), used)


def class_log_densities(clf: TrainedClassifier, diagram) -> np.ndarray:
    return np.array([diagram_log_density(clf.posteriors[lbl], diagram) for lbl in clf.classes])


def _log_bf(li, lj):
    if li == -math.inf and lj == -math.inf:
        raise ValueError("both class densities are zero; the Bayes factor is undefined")
    return li - lj


def log_bayes_factor(clf: TrainedClassifier, diagram, i, j) -> float:
    if i == j:
        raise ValueError("Bayes factor needs two distinct classes")
    return _log_bf(diagram_log_density(clf.posteriors[i], diagram), diagram_log_density(clf.posteriors[j], diagram))


def bayes_factor(clf: TrainedClassifier, diagram, i, j) -> float:
    """BF^{ij}: ratio of the diagram's densities under class i and class j."""
    return math.exp(log_bayes_factor(clf, diagram, i, j))


def vote(log_densities, classes, c: float = 1.0):
    """Majority vote over all class pairs from per-class log densities.

    Returns (label, votes). Ties in the vote count go to the earliest class.
    """
    log_c = math.log(c)
    votes = {lbl: 0 for lbl in classes}
    for a, b in combinations(range(len(classes)), 2):
        if _log_bf(log_densities[a], log_densities[b]) > log_c:
            votes[classes[a]] += 1
        else:
            votes[classes[b]] += 1
    best = max(range(len(classes)), key=lambda k: (votes[classes[k]], -k))
    return classes[best], votes


def predict(clf: TrainedClassifier, diagram):
    return vote(class_log_densities(clf, diagram), clf.classes, clf.c)


def roc_auc(scores, labels, classes=None) -> float:
    """Macro-averaged one-vs-rest AUC from per-instance, per-class scores.

    ``scores`` has one row per instance and one column per class in ``classes``
    order. Each binary AUC uses the Mann-Whitney rank statistic with midranks.
    """
    scores = np.asarray(scores, dtype=float)
    labels = list(labels)
    if classes is None:
        classes = sorted(set(labels))
    classes = list(classes)
    if len(classes) < 2:
        raise ValueError("AUC needs at least 2 classes")
    if scores.ndim == 1:
        scores = scores[:, None]
    if scores.shape[0] != len(labels):
        raise ValueError("scores and labels differ in length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    lab = np.array([classes.index(lbl) if lbl in classes else -1 for lbl in labels])
    if np.any(lab < 0):
        raise ValueError("a label is not among the classes")
    cols = range(len(classes)) if scores.shape[1] == len(classes) else None
    if cols is None:
        if len(classes) == 2 and scores.shape[1] == 1:
            return binary_auc(scores[:, 0], lab == 1)
        raise ValueError("scores need one column per class")
    aucs = []
    for k in cols:
        pos = lab == k
        if not pos.any() or pos.all():
            raise ValueError(f"class {classes[k]!r} is absent from the labels or is the only label")
        aucs.append(binary_auc(scores[:, k], pos))
    return float(np.mean(aucs))


def binary_auc(scores, positive) -> float:
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("binary AUC needs both positive and negative instances")
    ranks = rankdata(scores, method="average")
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class EvalReport:
    classes: tuple
    fold_predictions: list
    confusion: np.ndarray
    auc: float
    folds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "auc": float(self.auc),
            "confusion": self.confusion.tolist(),
            "folds": [list(map(int, f)) for f in self.folds],
            "predictions": self.fold_predictions,
        }


def stratified_folds(labels, k: int, seed: int = 0):
    """Index arrays for k folds; each class is shuffled and dealt round-robin."""
    labels = list(labels)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=int)
    for lbl in sorted(set(labels)):
        idx = np.array([i for i, x in enumerate(labels) if x == lbl])
        if len(idx) < k:
            raise ValueError(f"class {lbl!r} has {len(idx)} instances, fewer than k={k}")
        idx = rng.permutation(idx)
        assignment[idx] = np.arange(len(idx)) % k
    return [np.flatnonzero(assignment == f) for f in range(k)]


def cross_validate(data, k: int, configs, c: float = 1.0, seed: int = 0) -> EvalReport:
    """Stratified k-fold CV over labeled diagrams ``data`` = [(label, diagram), ...].

    Held-out predictions from all folds are pooled before computing the AUC.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    labels = [lbl for lbl, _ in data]
    diagrams = [d for _, d in data]
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValueError("cross-validation needs at least 2 classes")
    folds = stratified_folds(labels, k, seed)
    n_cls = len(classes)
    scores = np.zeros((len(data), n_cls))
    records = [None] * len(data)
    confusion = np.zeros((n_cls, n_cls), dtype=int)
    for f, test in enumerate(folds):
        test_set = set(test.tolist())
        training = {lbl: [] for lbl in classes}
        for i, (lbl, d) in enumerate(data):
            if i not in test_set:
                training[lbl].append(d)
        clf = fit(training, configs, c)
        for i in test:
            pred, votes = predict(clf, diagrams[i])
            scores[i] = [votes[lbl] / (n_cls - 1) for lbl in classes]
            confusion[classes.index(labels[i]), classes.index(pred)] += 1
            records[i] = {
                "index": int(i),
                "fold": f,
                "label": labels[i],
                "predicted": pred,
                "votes": {str(lbl): int(v) for lbl, v in votes.items()},
            }
    auc = roc_auc(scores, labels, classes)
    return EvalReport(classes, records, confusion, auc, folds)
