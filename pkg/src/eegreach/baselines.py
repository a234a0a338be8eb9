"""Classical comparators: filter-bank CSP with softmax regression, and a random forest.

Both consume epoched trials as ``(n_trials, n_channels, n_times)`` arrays at
100 Hz and expose ``fit`` / ``predict_proba`` / ``predict`` plus
``get_state`` / ``from_state`` for checkpointing.
"""
from dataclasses import dataclass, field

import numpy as np

from . import dsp, seeding
from .errors import InputError, NumericError, StateError

N_CLASSES = 6
LOG_FLOOR = 1e-12


# -- generalized symmetric eigenproblem ------------------------------------

def eig_sym_pair(a, b):
    """Solve ``A v = lam B v`` for symmetric ``A`` and positive definite ``B``.

    ``B = L L^T`` is factored, the problem is whitened to the symmetric
    ``L^-1 A L^-T`` and diagonalised, and the eigenvectors are mapped back
    with ``L^-T``. They come out B-orthonormal (``V^T B V = I``).

    Returns
    -------
    lam : ndarray, shape (n,)
        Eigenvalues in descending order.
    v : ndarray, shape (n, n)
        Matching eigenvectors as columns.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise InputError(f"need two square matrices of equal size, got {a.shape} and {b.shape}")
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    try:
        low = np.linalg.cholesky(b)
    except np.linalg.LinAlgError as exc:
        raise NumericError("B is not positive definite") from exc
    eye = np.eye(len(b))
    linv = np.linalg.solve(low, eye)
    c = linv @ a @ linv.T
    lam, u = np.linalg.eigh(0.5 * (c + c.T))
    order = np.argsort(lam)[::-1]
    return lam[order], linv.T @ u[:, order]


# -- CSP ------------------------------------------------------------------------

def mean_covariance(trials, shrinkage=0.05):
    """Trial-averaged, trace-normalised covariance shrunk toward a scaled identity."""
    trials = np.asarray(trials, dtype=np.float64)
    if trials.ndim != 3:
        raise InputError(f"expected (trials, channels, time), got shape {trials.shape}")
    x = trials - trials.mean(axis=2, keepdims=True)
    covs = np.einsum("kct,kdt->kcd", x, x)
    tr = np.trace(covs, axis1=1, axis2=2)
    if np.any(tr <= 0):
        raise NumericError("a trial has zero variance on every channel")
    c = (covs / tr[:, None, None]).mean(axis=0)
    n = c.shape[0]
    return (1.0 - shrinkage) * c + shrinkage * np.trace(c) / n * np.eye(n)


@dataclass
class CspFilter:
    """Spatial filters for one (class, band) cell.

    ``filters`` holds ``2m`` rows (top-m then bottom-m eigenvectors);
    ``eigvecs``/``eigvals`` keep the full solution for diagnostics.
    """

    filters: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    composite: np.ndarray = field(repr=False)

    def whitening_residual(self):
        """``max |V^T (C_a + C_rest) V - I|``."""
        v = self.eigvecs
        return float(np.abs(v.T @ self.composite @ v - np.eye(len(v))).max())


def csp_fit(trials_a, trials_rest, m=2, shrinkage=0.05):
    """Common spatial patterns for class ``a`` against the rest.

    Solves ``C_a w = lam (C_a + C_rest) w`` and keeps the ``m`` largest and
    ``m`` smallest eigenvalue directions.
    """
    trials_a = np.asarray(trials_a, dtype=np.float64)
    trials_rest = np.asarray(trials_rest, dtype=np.float64)
    if len(trials_a) < 2 or len(trials_rest) < 2:
        raise InputError("CSP needs at least 2 trials on each side")
    n_ch = trials_a.shape[1]
    if not 1 <= m <= n_ch // 2:
        raise InputError(f"m={m} filter pairs impossible with {n_ch} channels")
    ca = mean_covariance(trials_a, shrinkage)
    cb = mean_covariance(trials_rest, shrinkage)
    composite = ca + cb
    if np.linalg.eigvalsh(composite).min() <= 1e-12 * np.trace(composite):
        raise NumericError("composite covariance is rank deficient after shrinkage")
    lam, v = eig_sym_pair(ca, composite)
    keep = np.r_[np.arange(m), np.arange(n_ch - m, n_ch)]
    return CspFilter(v[:, keep].T.copy(), lam, v, composite)


def log_variance_ratio(projected):
    """``log(var_i / sum_j var_j)`` along the last axis, floored at ``log(1e-12)``."""
    var = projected.var(axis=-1)
    total = var.sum(axis=-1, keepdims=True)
    ratio = np.divide(var, total, out=np.zeros_like(var), where=total > 0)
    return np.log(np.maximum(ratio, LOG_FLOOR))


# -- filter bank ----------------------------------------------------------------

class FilterBank:
    """Contiguous band-pass filters, zero-phase; default nine 4 Hz bands over 4-40 Hz."""

    def __init__(self, edges_hz=tuple(range(4, 41, 4)), fs_hz=100.0, order=3):
        edges = [float(e) for e in edges_hz]
        if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise InputError("filter-bank edges must be strictly increasing")
        self.bands = list(zip(edges[:-1], edges[1:]))
        self.fs_hz = float(fs_hz)
        self.filters = [dsp.design_butterworth_bandpass(order, lo, hi, fs_hz)
                        for lo, hi in self.bands]

    def __len__(self):
        return len(self.filters)

    def apply(self, x):
        """``(..., time)`` -> ``(n_bands, ..., time)``."""
        return np.stack([dsp.filtfilt(x, f) for f in self.filters])


# -- softmax regression ---------------------------------------------------------

def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class SoftmaxRegression:
    """L2-regularised multinomial logistic regression fitted by full-batch gradient descent.

    Features are standardised with training statistics. The step is
    ``1 / L`` with ``L`` the Lipschitz bound of the gradient, and iteration
    stops when the gradient norm drops below ``tol`` or after ``max_iter``.
    """

    def __init__(self, l2=1e-3, tol=1e-6, max_iter=5000, n_classes=N_CLASSES):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.n_classes = n_classes
        self.coef = None
        self.n_iter = 0
        self.grad_norm = np.inf

    def _prepare(self, x):
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite feature value")
        z = (x - self.mu) / self.sd
        return np.hstack([z, np.ones((len(z), 1))])

    def fit(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite feature value")
        self.mu = x.mean(axis=0)
        self.sd = np.where(x.std(axis=0) > 0, x.std(axis=0), 1.0)
        z = self._prepare(x)
        n, d = z.shape
        onehot = np.eye(self.n_classes)[y]
        lip = 0.5 * np.linalg.norm(z, 2) ** 2 / n + self.l2
        step = 1.0 / lip
        w = np.zeros((d, self.n_classes))
        reg = np.ones((d, 1))
        reg[-1] = 0.0  # bias is not penalised
        for it in range(1, self.max_iter + 1):
            g = z.T @ (_softmax_rows(z @ w) - onehot) / n + self.l2 * reg * w
            self.grad_norm = float(np.linalg.norm(g))
            self.n_iter = it
            if self.grad_norm < self.tol:
                break
            w -= step * g
        self.coef = w
        return self

    def predict_proba(self, x):
        if self.coef is None:
            raise StateError("SoftmaxRegression used before fit")
        return _softmax_rows(self._prepare(x) @ self.coef)

    def get_state(self):
        return {"coef": self.coef, "mu": self.mu, "sd": self.sd}

    def set_state(self, state):
        self.coef, self.mu, self.sd = state["coef"], state["mu"], state["sd"]
        return self


# -- FBCSP ----------------------------------------------------------------------

class FBCSP:
    """Filter bank + one-vs-rest CSP per (band, class) + softmax regression.

    Feature length is ``n_bands * n_classes * 2m`` (216 for the defaults).
    """

    def __init__(self, bank=None, m=2, shrinkage=0.05, l2=1e-3, n_classes=N_CLASSES):
        self.bank = bank or FilterBank()
        self.m = m
        self.shrinkage = shrinkage
        self.n_classes = n_classes
        self.filters = None        # (n_bands, n_classes, 2m, n_channels)
        self.classifier = SoftmaxRegression(l2=l2, n_classes=n_classes)

    @property
    def n_features(self):
        return len(self.bank) * self.n_classes * 2 * self.m

    def fit_filters(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        banded = self.bank.apply(x)
        self.cells = [[csp_fit(b[y == c], b[y != c], self.m, self.shrinkage)
                       for c in range(self.n_classes)] for b in banded]
        self.filters = np.array([[cell.filters for cell in row] for row in self.cells])
        return banded

    def features(self, x, banded=None):
        """Log variance-ratio features, shape ``(n_trials, n_features)``."""
        if self.filters is None:
            raise StateError("FBCSP features requested before the CSP filters were fitted")
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 2
        if single:
            x = x[None]
        if banded is None:
            banded = self.bank.apply(x)
        proj = np.einsum("bkfc,bnct->nbkft", self.filters, banded)
        feats = log_variance_ratio(proj).reshape(len(x), -1)
        return feats[0] if single else feats

    def fit(self, x, y):
        banded = self.fit_filters(x, y)
        self.classifier.fit(self.features(x, banded), y)
        return self

    def predict_proba(self, x):
        return self.classifier.predict_proba(self.features(x))

    def predict(self, x):
        return np.argmax(self.predict_proba(x), axis=1)

    def get_state(self):
        if self.filters is None:
            raise StateError("cannot save an unfitted FBCSP model")
        return {"filters": self.filters, **self.classifier.get_state()}

    def set_state(self, state):
        self.filters = np.asarray(state["filters"])
        self.classifier.set_state(state)
        return self


# -- random forest ---------------------------------------------------------------

def band_log_variance(x, bank):
    """Per-channel log-variance in each band, ``(n_trials, n_channels * n_bands)``."""
    banded = bank.apply(np.asarray(x, dtype=np.float64))      # (bands, n, ch, t)
    lv = np.log(np.maximum(banded.var(axis=-1), LOG_FLOOR))    # (bands, n, ch)
    return lv.transpose(1, 2, 0).reshape(banded.shape[1], -1)


def _gini_counts(counts):
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / n[..., None]
    return np.where(n > 0, 1.0 - (p * p).sum(axis=-1), 0.0)


@dataclass
class Tree:
    """Flat binary tree; ``left[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray          # (n_nodes, n_classes) training counts per node

    def apply(self, x):
        node = np.zeros(len(x), dtype=int)
        active = self.left[node] >= 0
        while np.any(active):
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = x[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.left[node] >= 0
        return node

    def predict(self, x):
        # argmax picks the lowest class id on ties
        return np.argmax(self.counts[self.apply(x)], axis=1)

    @property
    def depth(self):
        d = np.zeros(len(self.left), dtype=int)
        for i in range(len(self.left)):
            if self.left[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())


def _best_split(xs, y, n_classes, candidates, k):
    """Best gini split over ``candidates``; looks past the first ``k`` only if none helps."""
    n = len(y)
    parent = np.bincount(y, minlength=n_classes)
    parent_imp = _gini_counts(parent) * n
    best = (0.0, -1, 0.0)
    for j, f in enumerate(candidates):
        if j >= k and best[1] >= 0:
            break
        order = np.argsort(xs[:, f], kind="stable")
        v = xs[order, f]
        valid = v[1:] > v[:-1]
        if not np.any(valid):
            continue
        cum = np.cumsum(np.eye(n_classes)[y[order]], axis=0)[:-1]
        left_n = np.arange(1, n)
        imp = _gini_counts(cum) * left_n + _gini_counts(parent - cum) * (n - left_n)
        imp = np.where(valid, imp, np.inf)
        i = int(np.argmin(imp))
        gain = parent_imp - imp[i]
        if gain > best[0] + 1e-12 * n:
            best = (gain, int(f), 0.5 * (v[i] + v[i + 1]))
    return best


def grow_tree(x, y, rng, n_classes, max_features, max_depth=None):
    """CART with gini impurity; every split strictly lowers the weighted impurity."""
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if counts[node].max() == len(idx) or (max_depth is not None and depth >= max_depth):
            continue
        candidates = rng.permutation(x.shape[1])
        gain, f, t = _best_split(x[idx], y[idx], n_classes, candidates, max_features)
        if f < 0:
            continue
        mask = x[idx, f] <= t
        feature[node], threshold[node] = f, t
        li, ri = idx[mask], idx[~mask]
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(np.array(feature), np.array(threshold), np.array(left),
                np.array(right), np.array(counts))


class RandomForest:
    """Bootstrap-aggregated CART trees with ``ceil(sqrt(n_features))`` split candidates.

    Each tree draws its bootstrap and candidate features from its own derived
    stream, so the forest does not depend on the order trees are grown in.
    """

    def __init__(self, n_trees=100, seed=0, max_depth=None, n_classes=N_CLASSES):
        self.n_trees = n_trees
        self.seed = seed
        self.max_depth = max_depth
        self.n_classes = n_classes
        self.trees = []
        self.oob_accuracy = np.nan

    def fit(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        if len(np.unique(y)) < 2:
            raise InputError("random forest needs at least two classes in training")
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite feature value")
        n, d = x.shape
        k = int(np.ceil(np.sqrt(d)))
        votes = np.zeros((n, self.n_classes))
        self.trees = []
        for t in range(self.n_trees):
            rng = seeding.rng(self.seed, "forest", t)
            boot = rng.integers(0, n, n)
            tree = grow_tree(x[boot], y[boot], rng, self.n_classes, k, self.max_depth)
            self.trees.append(tree)
            oob = np.setdiff1d(np.arange(n), boot)
            if len(oob):
                votes[oob, tree.predict(x[oob])] += 1
        seen = votes.sum(axis=1) > 0
        if np.any(seen):
            self.oob_accuracy = float(np.mean(np.argmax(votes[seen], axis=1) == y[seen]))
        return self

    def predict_proba(self, x):
        """Fraction of trees voting for each class."""
        if not self.trees:
            raise StateError("RandomForest used before fit")
        x = np.asarray(x, dtype=np.float64)
        votes = np.zeros((len(x), self.n_classes))
        rows = np.arange(len(x))
        for tree in self.trees:
            votes[rows, tree.predict(x)] += 1
        return votes / len(self.trees)

    def predict(self, x):
        return np.argmax(self.predict_proba(x), axis=1)

    def get_state(self):
        if not self.trees:
            raise StateError("cannot save an unfitted forest")
        sizes = np.array([len(t.left) for t in self.trees])
        cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])
        return {"sizes": sizes, "feature": cat("feature"), "threshold": cat("threshold"),
                "left": cat("left"), "right": cat("right"),
                "counts": np.vstack([t.counts for t in self.trees]),
                "oob": np.array([self.oob_accuracy])}

    def set_state(self, state):
        bounds = np.r_[0, np.cumsum(state["sizes"])].astype(int)
        self.trees = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            self.trees.append(Tree(*(np.asarray(state[k][a:b]).astype(dt) for k, dt in (
                ("feature", int), ("threshold", float), ("left", int), ("right", int),
                ("counts", np.int64)))))
        self.n_trees = len(self.trees)
        self.oob_accuracy = float(state["oob"][0])
        return self


class ForestClassifier:
    """Random forest on per-channel band log-variance features (channels x bands)."""

    def __init__(self, bank=None, n_trees=100, seed=0):
        self.bank = bank or FilterBank()
        self.forest = RandomForest(n_trees=n_trees, seed=seed)

    def fit(self, x, y):
        self.forest.fit(band_log_variance(x, self.bank), y)
        return self

    def predict_proba(self, x):
        return self.forest.predict_proba(band_log_variance(x, self.bank))

    def predict(self, x):
        return np.argmax(self.predict_proba(x), axis=1)

    def get_state(self):
        return self.forest.get_state()

    def set_state(self, state):
        self.forest.set_state(state)
        return self
