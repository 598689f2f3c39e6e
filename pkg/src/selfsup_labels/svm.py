"""RBF soft-margin SVM trained with SMO, one-vs-one for multi-class.

The binary solver follows the working-set selection of LIBSVM (maximal
violating pair for the first index, second-order gain for the second) and
stops when the maximal KKT violation drops below ``kkt_tolerance``.
"""

import itertools
import json
import logging
import struct
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, FormatError, NonFiniteFeature, SeriesTooShort

logger = logging.getLogger(__name__)

_SVM_MAGIC = b"SSSVM\x00"
_SVM_VERSION = 1
_TAU = 1e-12


class SingleClassWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    gamma: object = "scale"  # "scale" or a positive float
    kkt_tolerance: float = 1e-3
    max_passes: int = 1000
    sample_cap: int = 20000
    seed: int = 0
    cache_rows: int = 4096

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if self.gamma != "scale" and not float(self.gamma) > 0:
            raise ValueError("fixed gamma must be > 0")

    def as_dict(self):
        return {
            "C": self.C,
            "gamma": self.gamma,
            "kkt_tolerance": self.kkt_tolerance,
            "max_passes": self.max_passes,
            "sample_cap": self.sample_cap,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class SampleSet:
    features: np.ndarray
    targets: np.ndarray
    window: int
    indices: np.ndarray = None  # return index of each target

    def __len__(self):
        return len(self.targets)


def featurize(prices, labels, window):
    """Windows of ``window`` log returns ending at t, targeting the label at t+1.

    ``labels`` must align with the log returns of ``prices`` (length n-1).
    """
    prices = np.asarray(prices, dtype=float)
    y = np.asarray(getattr(labels, "labels", labels))
    r = np.diff(np.log(prices))
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(y) != len(r):
        raise DimensionMismatch(f"{len(y)} labels for {len(r)} returns")
    m = len(r) - window
    if m < 1:
        raise SeriesTooShort(f"{len(prices)} prices give no sample with window {window}")
    feats = np.lib.stride_tricks.sliding_window_view(r, window)[:m].copy()
    if not np.all(np.isfinite(feats)):
        raise NonFiniteFeature("non-finite log return in features")
    idx = np.arange(window, window + m)
    return SampleSet(feats, y[idx].astype(int), window, idx)


def rbf_kernel(u, v, gamma):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    d = u - v
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_matrix(A, B, gamma):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def resolve_gamma(config, X):
    if config.gamma == "scale":
        var = float(np.var(X))
        return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    return float(config.gamma)


class _KernelRows:
    def __init__(self, X, gamma, capacity):
        self.X = X
        self.gamma = gamma
        self.sq = np.sum(X * X, axis=1)
        self.capacity = max(capacity, 2)
        self.cache = OrderedDict()

    def row(self, i):
        hit = self.cache.get(i)
        if hit is not None:
            self.cache.move_to_end(i)
            return hit
        d = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
        r = np.exp(-self.gamma * np.maximum(d, 0.0))
        r[i] = 1.0
        self.cache[i] = r
        if len(self.cache) > self.capacity:
            self.cache.popitem(last=False)
        return r


@dataclass(eq=False)
class BinarySvm:
    """Decision f(x) = sum_i coef_i K(sv_i, x) + b; positive means ``positive_class``."""

    support_vectors: np.ndarray
    coef: np.ndarray  # alpha_i * y_i
    b: float
    positive_class: int
    negative_class: int
    alpha: np.ndarray = None  # full dual vector over the training subset
    iterations: int = 0
    converged: bool = True

    def decision(self, X, gamma):
        if len(self.coef) == 0:
            return np.full(len(X), self.b)
        return rbf_matrix(X, self.support_vectors, gamma) @ self.coef + self.b


def smo(X, y, C, gamma, tol=1e-3, max_iter=None, cache_rows=4096):
    """Solve the binary dual. y in {-1, +1}. Returns (alpha, b, iterations, converged)."""
    m = len(y)
    y = np.asarray(y, dtype=float)
    alpha = np.zeros(m)
    grad = -np.ones(m)  # gradient of 0.5 a'Qa - e'a
    rows = _KernelRows(X, gamma, cache_rows)
    max_iter = max_iter if max_iter is not None else 1000 * max(m, 1)
    it = 0
    converged = False
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        g_max = yg[i]
        g_min = np.min(yg[low])
        if g_max - g_min < tol:
            converged = True
            break
        Ki = rows.row(i)
        cand = low & (yg < g_max)
        bdiff = g_max - yg
        quad = np.maximum(2.0 - 2.0 * Ki, _TAU)  # K_ii = K_jj = 1 for RBF
        gain = np.where(cand, -(bdiff * bdiff) / quad, np.inf)
        j = int(np.argmin(gain))
        Kj = rows.row(j)
        a_i, a_j = alpha[i], alpha[j]
        q = max(2.0 - 2.0 * Ki[j], _TAU)
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / q
            diff = a_i - a_j
            ai, aj = a_i + delta, a_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / q
            total = a_i + a_j
            ai, aj = a_i - delta, a_j + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        d_i, d_j = ai - a_i, aj - a_j
        alpha[i], alpha[j] = ai, aj
        grad += y * (y[i] * d_i * Ki + y[j] * d_j * Kj)
        it += 1
    return alpha, _bias(alpha, grad, y, C), it, converged


def _bias(alpha, grad, y, C):
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(yg[free]))
    else:
        ub, lb = np.inf, -np.inf
        for t in range(len(y)):
            if (alpha[t] >= C and y[t] < 0) or (alpha[t] <= 0 and y[t] > 0):
                ub = min(ub, yg[t])
            else:
                lb = max(lb, yg[t])
        rho = (ub + lb) / 2.0
    return -rho


@dataclass(eq=False)
class SvmModel:
    classes: list
    gamma: float
    pairs: list = field(default_factory=list)
    config: SvmConfig = field(default_factory=SvmConfig)
    single_class: bool = False
    subsampled: bool = False
    n_features: int = 0

    @property
    def converged(self):
        return all(p.converged for p in self.pairs)

    def decision_values(self, X):
        X = self._check(X)
        return np.column_stack([p.decision(X, self.gamma) for p in self.pairs])

    def votes(self, X):
        X = self._check(X)
        index = {c: k for k, c in enumerate(self.classes)}
        counts = np.zeros((len(X), len(self.classes)), dtype=int)
        for p in self.pairs:
            f = p.decision(X, self.gamma)
            win = np.where(f > 0, index[p.positive_class], index[p.negative_class])
            counts[np.arange(len(X)), win] += 1
        return counts

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got shape {X.shape}")
        return X


def _stratified_cap(targets, cap, seed):
    m = len(targets)
    if m <= cap:
        return np.arange(m)
    rng = np.random.default_rng(seed)
    keep = []
    classes, counts = np.unique(targets, return_counts=True)
    quota = np.maximum(1, np.floor(counts * cap / m)).astype(int)
    for c, q in zip(classes, quota):
        idx = np.flatnonzero(targets == c)
        keep.append(np.sort(rng.choice(idx, size=min(q, len(idx)), replace=False)))
    return np.sort(np.concatenate(keep))


def train_svm(samples, config=None):
    config = config or SvmConfig()
    X = np.asarray(samples.features, dtype=float)
    y = np.asarray(samples.targets, dtype=int)
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("training features contain non-finite values")
    subsampled = False
    if len(y) > config.sample_cap:
        keep = _stratified_cap(y, config.sample_cap, config.seed)
        logger.info("subsampling %d -> %d training samples", len(y), len(keep))
        X, y = X[keep], y[keep]
        subsampled = True
    classes = sorted(int(c) for c in np.unique(y))
    gamma = resolve_gamma(config, X)
    model = SvmModel(classes, gamma, config=config, subsampled=subsampled, n_features=X.shape[1])
    if len(classes) < 2:
        warnings.warn(f"single class {classes} in training data; constant classifier",
                      SingleClassWarning, stacklevel=2)
        model.single_class = True
        return model
    for a, b in itertools.combinations(classes, 2):
        mask = (y == a) | (y == b)
        Xs = X[mask]
        ys = np.where(y[mask] == a, 1.0, -1.0)
        alpha, bias, iters, ok = smo(Xs, ys, config.C, gamma, config.kkt_tolerance,
                                     config.max_passes * len(ys), config.cache_rows)
        if not ok:
            logger.warning("SMO hit the iteration cap for pair (%d, %d)", a, b)
        sv = alpha > 0
        model.pairs.append(BinarySvm(Xs[sv], (alpha * ys)[sv], bias, a, b, alpha, iters, ok))
    return model


def predict(model, features):
    """One-vs-one majority vote; ties go to the smallest class label."""
    X = model._check(features)
    if model.single_class:
        return np.full(len(X), model.classes[0], dtype=int)
    counts = model.votes(X)
    return np.asarray(model.classes)[np.argmax(counts, axis=1)]


def save_svm(model, path):
    header = {
        "classes": model.classes,
        "gamma": model.gamma,
        "n_features": model.n_features,
        "single_class": model.single_class,
        "subsampled": model.subsampled,
        "config": model.config.as_dict(),
        "pairs": [
            {"positive": p.positive_class, "negative": p.negative_class, "b": p.b,
             "n_sv": int(len(p.coef)), "iterations": p.iterations, "converged": p.converged}
            for p in model.pairs
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_SVM_MAGIC)
        fh.write(struct.pack("<HI", _SVM_VERSION, len(blob)))
        fh.write(blob)
        for p in model.pairs:
            fh.write(np.ascontiguousarray(p.support_vectors, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(p.coef, dtype="<f8").tobytes())


def load_svm(path):
    with open(path, "rb") as fh:
        if fh.read(len(_SVM_MAGIC)) != _SVM_MAGIC:
            raise FormatError(f"{path}: not an SVM model file")
        version, blen = struct.unpack("<HI", fh.read(6))
        if version != _SVM_VERSION:
            raise FormatError(f"{path}: unsupported SVM model version {version}")
        h = json.loads(fh.read(blen))
        d = h["n_features"]
        pairs = []
        for p in h["pairs"]:
            k = p["n_sv"]
            sv = np.frombuffer(fh.read(8 * k * d), dtype="<f8").reshape(k, d).copy()
            coef = np.frombuffer(fh.read(8 * k), dtype="<f8").copy()
            pairs.append(BinarySvm(sv, coef, p["b"], p["positive"], p["negative"],
                                   None, p["iterations"], p["converged"]))
    return SvmModel(h["classes"], h["gamma"], pairs, SvmConfig(**h["config"]),
                    h["single_class"], h["subsampled"], d)
