"""General and kernel forms of arithmetic-backend algorithms.

Each algorithm comes in two flavours: a *general* one that touches the raw
data points, and a *kernel* one that only reads entries of a linear kernel
matrix.  Both run over the counting backend, so their ledgers can be
compared directly.

Divisions by public quantities (``n``, ``n^2``, cluster sizes) are plaintext
constant multiplications and are charged as one multiplication each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arithsim import (
    IterationBudgets,
    OpLedger,
    TrackedMatrix,
    TrackedScalar,
    TrackedVector,
    deflate,
    dot,
    matmul,
    matvec,
    power_iteration,
    scaled_inverse,
    scaled_sqrt,
)
from .kernelengine import KernelMatrix


@dataclass
class SvmModel:
    alpha: np.ndarray
    eta: float
    t: int
    labels: np.ndarray


@dataclass
class PcaResult:
    components: np.ndarray  # r x d, one unit vector per row
    eigenvalues: np.ndarray

    @property
    def r(self) -> int:
        return len(self.eigenvalues)


@dataclass
class KMeansResult:
    labels: np.ndarray
    t: int


def _points(data) -> np.ndarray:
    pts = np.asarray(getattr(data, "points", data), dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
        raise ValueError("empty dataset")
    return pts


def _kernel(k) -> np.ndarray:
    ent = np.asarray(k.entries if isinstance(k, KernelMatrix) else k, dtype=float)
    if ent.ndim != 2 or ent.shape[0] != ent.shape[1] or ent.shape[0] == 0:
        raise ValueError("kernel must be a non-empty n x n matrix")
    return ent


def _check_signs(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) != n:
        raise ValueError("label count does not match point count")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("SVM labels must be -1 or +1")
    return y


# SVM, dual coordinate ascent.  The bias is folded in by augmenting every
# point with a constant 1 feature, i.e. the similarity used is x_i.x_k + 1;
# the kernel path keeps K itself bias-free (so it stays reusable) and adds the
# 1 on the fly, exactly like the general path does.

def _svm(similarity, n: int, y, eta: float, t: int, ledger: OpLedger, bias: bool) -> SvmModel:
    if t < 0:
        raise ValueError("t must be >= 0")
    ys = [TrackedScalar(v, ledger) for v in y]
    alpha = [TrackedScalar(0.0, ledger) for _ in range(n)]
    for _ in range(t):
        for k in range(n):
            total = None
            for i in range(n):
                g = similarity(i, k)
                if bias:
                    g = g + 1.0
                term = (alpha[i] * ys[i]) * g
                total = term if total is None else total + term
            alpha[k] = alpha[k] + eta * (1.0 - ys[k] * total)
    return SvmModel(np.array([a.value for a in alpha]), eta, t, np.asarray(y, dtype=float))


def svm_general(data, y, eta: float = 0.01, t: int = 10, ledger: OpLedger | None = None,
                bias: bool = True) -> SvmModel:
    pts = _points(data)
    n = len(pts)
    y = _check_signs(y, n)
    ledger = ledger or OpLedger()
    rows = [TrackedVector(p, ledger) for p in pts]
    return _svm(lambda i, k: dot(rows[i], rows[k]), n, y, eta, t, ledger, bias)


def svm_kernel(k, y, eta: float = 0.01, t: int = 10, ledger: OpLedger | None = None,
               bias: bool = True) -> SvmModel:
    ent = _kernel(k)
    n = len(ent)
    y = _check_signs(y, n)
    ledger = ledger or OpLedger()
    return _svm(lambda i, kk: TrackedScalar(ent[i, kk], ledger), n, y, eta, t, ledger, bias)


# PCA

def _top_eigenpairs(m: TrackedMatrix, r: int, budgets: IterationBudgets,
                    start: TrackedVector | None = None):
    pairs = []
    for c in range(r):
        lam, v = power_iteration(m, budgets, start)
        pairs.append((lam, v))
        if c < r - 1:
            m = deflate(m, lam, v)
    return pairs


def pca_general(data, r: int = 1, budgets: IterationBudgets = IterationBudgets(),
                ledger: OpLedger | None = None) -> PcaResult:
    """Top-r principal directions of caller-centered data via the covariance."""
    pts = _points(data)
    n, d = pts.shape
    if not 1 <= r <= min(n, d):
        raise ValueError(f"r must be in 1..{min(n, d)}")
    ledger = ledger or OpLedger()
    dm = TrackedMatrix(pts, ledger)
    cov = matmul(dm.T(), dm).scale(1.0 / n)
    pairs = _top_eigenpairs(cov, r, budgets)
    return PcaResult(np.array([v.values for _, v in pairs]), np.array([lam.value for lam, _ in pairs]))


def pca_kernel(k, data, r: int = 1, budgets: IterationBudgets = IterationBudgets(),
               ledger: OpLedger | None = None) -> PcaResult:
    """Same directions from the n x n kernel: K c = (n lambda) c, then
    u = sum_j c_j x_j rescaled by 1 / sqrt(n lambda c.c).

    The iteration starts from the kernel diagonal rather than all ones: for
    centered data the all-ones vector lies in the null space of K.
    """
    ent = _kernel(k)
    pts = _points(data)
    n, d = pts.shape
    if len(ent) != n:
        raise ValueError("kernel size does not match dataset")
    if not 1 <= r <= min(n, d):
        raise ValueError(f"r must be in 1..{min(n, d)}")
    ledger = ledger or OpLedger()
    dm_t = TrackedMatrix(pts.T, ledger)
    comps, vals = [], []
    start = TrackedVector(np.diag(ent).copy(), ledger)
    for mu, c in _top_eigenpairs(TrackedMatrix(ent, ledger), r, budgets, start):
        u = matvec(dm_t, c)
        length = scaled_sqrt(mu * dot(c, c), budgets.t_sqrt)
        u = u.scale(scaled_inverse(length, budgets.t_sinv))
        comps.append(u.values)
        vals.append((mu * (1.0 / n)).value)
    return PcaResult(np.array(comps), np.array(vals))


# total variance

def total_variance_general(data, ledger: OpLedger | None = None) -> TrackedScalar:
    pts = _points(data)
    n = len(pts)
    ledger = ledger or OpLedger()
    rows = [TrackedVector(p, ledger) for p in pts]
    acc = rows[0]
    for r in rows[1:]:
        acc = acc + r
    mean = acc.scale(1.0 / n)
    total = None
    for r in rows:
        dev = r - mean
        sq = dot(dev, dev)
        total = sq if total is None else total + sq
    return total * (1.0 / n)


def total_variance_kernel(k, ledger: OpLedger | None = None) -> TrackedScalar:
    ent = _kernel(k)
    n = len(ent)
    ledger = ledger or OpLedger()
    trace = TrackedVector(np.diag(ent), ledger).total()
    grand = TrackedVector(ent.reshape(-1), ledger).total()
    return trace * (1.0 / n) - grand * (1.0 / (n * n))


# distance, norm, similarity

def _pair(x, y, ledger):
    x = TrackedVector(x, ledger) if not isinstance(x, TrackedVector) else x
    y = TrackedVector(y, ledger) if not isinstance(y, TrackedVector) else y
    if len(x) != len(y):
        raise ValueError("vectors differ in length")
    return x, y


def _index(ent: np.ndarray, *idx: int) -> None:
    for i in idx:
        if not 0 <= i < len(ent):
            raise IndexError(f"index {i} out of range for n={len(ent)}")


def distance_general(x, y, ledger: OpLedger | None = None) -> TrackedScalar:
    """Squared Euclidean distance."""
    ledger = ledger or OpLedger()
    x, y = _pair(x, y, ledger)
    diff = x - y
    return dot(diff, diff)


def distance_kernel(k, i: int, j: int, ledger: OpLedger | None = None) -> TrackedScalar:
    """(K_ii - K_ij) + (K_jj - K_ij); additions only."""
    ent = _kernel(k)
    _index(ent, i, j)
    ledger = ledger or OpLedger()
    kij = TrackedScalar(ent[i, j], ledger)
    return (TrackedScalar(ent[i, i], ledger) - kij) + (TrackedScalar(ent[j, j], ledger) - kij)


def norm_general(x, ledger: OpLedger | None = None,
                 budgets: IterationBudgets = IterationBudgets()) -> TrackedScalar:
    ledger = ledger or OpLedger()
    x = x if isinstance(x, TrackedVector) else TrackedVector(x, ledger)
    return scaled_sqrt(dot(x, x), budgets.t_sqrt)


def norm_kernel(k, i: int, ledger: OpLedger | None = None,
                budgets: IterationBudgets = IterationBudgets()) -> TrackedScalar:
    ent = _kernel(k)
    _index(ent, i)
    ledger = ledger or OpLedger()
    return scaled_sqrt(TrackedScalar(ent[i, i], ledger), budgets.t_sqrt)


def _cosine(kxy: TrackedScalar, kxx: TrackedScalar, kyy: TrackedScalar, budgets) -> TrackedScalar:
    if kxx.value <= 0 or kyy.value <= 0:
        raise ValueError("cosine similarity of a zero-norm vector")
    nx = scaled_sqrt(kxx, budgets.t_sqrt)
    ny = scaled_sqrt(kyy, budgets.t_sqrt)
    return kxy * scaled_inverse(nx * ny, budgets.t_sinv)


def similarity_general(x, y, ledger: OpLedger | None = None,
                       budgets: IterationBudgets = IterationBudgets()) -> TrackedScalar:
    ledger = ledger or OpLedger()
    x, y = _pair(x, y, ledger)
    return _cosine(dot(x, y), dot(x, x), dot(y, y), budgets)


def similarity_kernel(k, i: int, j: int, ledger: OpLedger | None = None,
                      budgets: IterationBudgets = IterationBudgets()) -> TrackedScalar:
    ent = _kernel(k)
    _index(ent, i, j)
    ledger = ledger or OpLedger()
    s = lambda a, b: TrackedScalar(ent[a, b], ledger)  # noqa: E731
    return _cosine(s(i, j), s(i, i), s(j, j), budgets)


# k-means under the add/mult model.  Label bookkeeping (argmin, masking,
# cluster sizes) is comparison logic that the arithmetic model does not price;
# only the arithmetic on data and kernel values is charged.

def initial_labels(n: int, k: int) -> np.ndarray:
    return np.arange(n) % k


def kmeans_general_arith(data, k: int, t: int = 10, ledger: OpLedger | None = None) -> KMeansResult:
    pts = _points(data)
    n, d = pts.shape
    if not 2 <= k <= n:
        raise ValueError("need 2 <= k <= n")
    if t < 1:
        raise ValueError("t must be >= 1")
    ledger = ledger or OpLedger()
    rows = [TrackedVector(p, ledger) for p in pts]
    labels = initial_labels(n, k)
    for _ in range(t):
        sums = [TrackedVector(np.zeros(d), ledger) for _ in range(k)]
        for i, r in enumerate(rows):
            sums[labels[i]] = sums[labels[i]] + r
        sizes = np.bincount(labels, minlength=k)
        means = [s.scale(1.0 / sizes[j] if sizes[j] else 0.0) for j, s in enumerate(sums)]
        dist = np.empty((n, k))
        for i, r in enumerate(rows):
            for j, mu in enumerate(means):
                diff = r - mu
                dist[i, j] = dot(diff, diff).value
        labels = np.argmin(dist, axis=1)
    return KMeansResult(labels, t)


def kmeans_kernel_arith(k, n_clusters: int, t: int = 10, ledger: OpLedger | None = None,
                        hoist: bool = False) -> KMeansResult:
    """Kernel k-means on the scaled objective p_j - 2 n_j sum_a K^(j)(x_i, x_a).

    With ``hoist=False`` the cluster total p_j is recomputed for every point,
    as the loop is usually written; ``hoist=True`` computes it once per
    iteration and cluster.
    """
    ent = _kernel(k)
    n = len(ent)
    kk = n_clusters
    if not 2 <= kk <= n:
        raise ValueError("need 2 <= k <= n")
    if t < 1:
        raise ValueError("t must be >= 1")
    ledger = ledger or OpLedger()
    labels = initial_labels(n, kk)
    for _ in range(t):
        onehot = np.eye(kk)[labels]
        masked = [np.where(np.outer(onehot[:, j], onehot[:, j]) > 0, ent, 0.0) for j in range(kk)]
        sizes = [TrackedScalar(float(onehot[:, j].sum()), ledger) for j in range(kk)]
        totals = [TrackedVector(m.reshape(-1), ledger).total() for m in masked] if hoist else None
        score = np.empty((n, kk))
        for i in range(n):
            for j in range(kk):
                p = totals[j] if hoist else TrackedVector(masked[j].reshape(-1), ledger).total()
                s = TrackedVector(masked[j][i], ledger).total()
                q = sizes[j] * (s + s)
                score[i, j] = (p - q).value
        labels = np.argmin(score, axis=1)
    return KMeansResult(labels, t)
