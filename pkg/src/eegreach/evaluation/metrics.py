"""Accuracy, confusion matrices, one-vs-rest ROC and a paired sign-flip permutation test."""
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .. import seeding
from ..errors import InputError

N_CLASSES = 6


def _as_labels(predictions):
    """Class ids from ids or score rows; ``argmax`` resolves ties to the lowest id."""
    p = np.asarray(predictions)
    if p.ndim == 2:
        return np.argmax(p, axis=1)
    return p.astype(int)


def _check_pair(predictions, labels):
    pred = _as_labels(predictions)
    labels = np.asarray(labels, dtype=int)
    if len(pred) != len(labels):
        raise InputError(f"{len(pred)} predictions for {len(labels)} labels")
    if len(labels) == 0:
        raise InputError("nothing to evaluate")
    return pred, labels


def accuracy(predictions, labels):
    """Fraction of matches; ``predictions`` may be ids or per-class scores."""
    pred, labels = _check_pair(predictions, labels)
    return float(np.mean(pred == labels))


@dataclass
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def normalized(self):
        """Row-normalised view; rows with no support are NaN (undefined)."""
        rows = self.counts.sum(axis=1, keepdims=True).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, self.counts / rows, np.nan)

    @property
    def recall(self):
        return np.diag(self.normalized)

    @property
    def accuracy(self):
        return float(np.trace(self.counts) / self.counts.sum())


def confusion(predictions, labels, n_classes=N_CLASSES):
    pred, labels = _check_pair(predictions, labels)
    for name, arr in (("label", labels), ("prediction", pred)):
        bad = arr[(arr < 0) | (arr >= n_classes)]
        if len(bad):
            raise InputError(f"{name} {bad[0]} outside 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (labels, pred), 1)
    return ConfusionMatrix(counts)


@dataclass
class RocCurve:
    """One-vs-rest ROC of one class; ``defined`` is False without both positives and negatives."""

    cls: int
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float
    defined: bool = True


def roc_curve(scores, positive, cls=0):
    """Threshold sweep over the distinct scores (descending), starting at (0, 0).

    Tied scores move together, so each tie contributes a diagonal segment
    and the trapezoidal area equals the Mann-Whitney statistic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return RocCurve(cls, np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([]),
                        float("nan"), False)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = positive[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), len(s) - 1]
    tp = np.cumsum(pos)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    return RocCurve(cls, fpr, tpr, s[last], trapezoid_auc(fpr, tpr))


def trapezoid_auc(fpr, tpr):
    fpr = np.asarray(fpr, dtype=np.float64)
    tpr = np.asarray(tpr, dtype=np.float64)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))


def roc_ovr(scores, labels, n_classes=N_CLASSES):
    """One curve per class using column ``c`` of ``scores`` as that class's score."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if scores.ndim != 2 or scores.shape != (len(labels), n_classes):
        raise InputError(f"scores must have shape ({len(labels)}, {n_classes}), got {scores.shape}")
    return [roc_curve(scores[:, c], labels == c, c) for c in range(n_classes)]


def pairwise_auc(scores, positive):
    """Brute-force ``P(s_pos > s_neg) + 0.5 P(s_pos == s_neg)`` over all pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    sp, sn = scores[positive], scores[~positive]
    if len(sp) == 0 or len(sn) == 0:
        return float("nan")
    diff = sp[:, None] - sn[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def auc_identity_error(scores, labels, curves=None):
    """Largest ``|trapezoid AUC - pairwise AUC|`` over the defined classes."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    curves = curves if curves is not None else roc_ovr(scores, labels, scores.shape[1])
    errs = [abs(c.auc - pairwise_auc(scores[:, c.cls], labels == c.cls))
            for c in curves if c.defined]
    return max(errs) if errs else 0.0


def permutation_test(acc_a, acc_b, n_perm=10000, seed=0, method="auto"):
    """Two-sided paired sign-flip test on the mean fold difference.

    ``method="exact"`` enumerates all ``2**k`` sign patterns; ``"sample"``
    draws ``n_perm`` random patterns and returns ``(hits + 1) / (n_perm + 1)``;
    ``"auto"`` enumerates whenever ``2**k <= n_perm``.
    """
    a = np.asarray(acc_a, dtype=np.float64)
    b = np.asarray(acc_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"fold lists differ in shape: {a.shape} vs {b.shape}")
    k = len(a)
    if k < 2:
        raise InputError("permutation test needs at least 2 folds")
    d = a - b
    observed = abs(d.mean())
    tol = 1e-12 * max(1.0, observed)
    if method == "auto":
        method = "exact" if 2 ** k <= n_perm else "sample"
    if method == "exact":
        signs = np.array(list(product((1.0, -1.0), repeat=k)))
        stats = np.abs(signs @ d) / k
        return float(np.mean(stats >= observed - tol))
    if method != "sample":
        raise InputError(f"unknown method {method!r}")
    rng = seeding.rng(seed, "permutation")
    signs = rng.choice((-1.0, 1.0), size=(n_perm, k))
    stats = np.abs(signs @ d) / k
    return float((np.sum(stats >= observed - tol) + 1) / (n_perm + 1))


@dataclass
class Metrics:
    """Evaluation of one model on one partition."""

    model: str
    accuracy: float
    confusion: ConfusionMatrix
    curves: list
    auc_identity_error: float
    n_trials: int
    extra: dict = field(default_factory=dict)

    @property
    def aucs(self):
        return [c.auc for c in self.curves]

    def to_text(self):
        """One ``key = value`` per line, fixed formatting so dumps are byte-stable."""
        lines = [f"model = {self.model}", f"n_trials = {self.n_trials}",
                 f"accuracy = {self.accuracy:.6f}"]
        for c in self.curves:
            lines.append(f"auc.{c.cls} = {c.auc:.6f}" if c.defined else f"auc.{c.cls} = undefined")
        defined = [c.auc for c in self.curves if c.defined]
        lines.append(f"auc.mean = {np.mean(defined):.6f}" if defined else "auc.mean = undefined")
        lines.append(f"auc.identity_max_error = {self.auc_identity_error:.3e}")
        for i, v in enumerate(self.confusion.recall):
            lines.append(f"recall.{i} = {v:.6f}" if np.isfinite(v) else f"recall.{i} = undefined")
        for i, row in enumerate(self.confusion.counts):
            lines.append(f"confusion.{i} = " + " ".join(str(int(v)) for v in row))
        for k, v in self.extra.items():
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def evaluate_scores(model, scores, labels, extra=None):
    """Bundle accuracy, confusion, ROC curves and the AUC identity check."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    curves = roc_ovr(scores, labels, scores.shape[1])
    return Metrics(model, accuracy(scores, labels), confusion(scores, labels, scores.shape[1]),
                   curves, auc_identity_error(scores, labels, curves), len(labels),
                   dict(extra or {}))


def parse_metrics(text):
    """Inverse of :meth:`Metrics.to_text` into a flat ``{key: str}`` mapping."""
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
