"""Plain floating-point reference implementations, no ledgers.

These use numpy directly (closed-form square roots, exact eigensolvers) and
serve as the ground truth the simulated backends are compared against.
"""

from __future__ import annotations

import numpy as np


def svm(x, y, eta: float = 0.01, t: int = 10, bias: bool = True) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gram = x @ x.T + (1.0 if bias else 0.0)
    alpha = np.zeros(len(x))
    for _ in range(t):
        for k in range(len(x)):
            total = float(np.sum(alpha * y * gram[:, k]))
            alpha[k] += eta * (1.0 - y[k] * total)
    return alpha


def pca(x, r: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Top-r eigenpairs of x^T x / n (caller centers), components as rows."""
    x = np.asarray(x, dtype=float)
    vals, vecs = np.linalg.eigh(x.T @ x / len(x))
    order = np.argsort(vals)[::-1][:r]
    return vecs[:, order].T, vals[order]


def total_variance(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum((x - x.mean(axis=0)) ** 2) / len(x))


def distance(a, b) -> float:
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(diff @ diff)


def norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


def similarity(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def kmeans(x, k: int, t: int = 10) -> np.ndarray:
    """Lloyd iterations from the assignment i -> i mod k; empty clusters get
    a zero mean, ties go to the lower cluster index."""
    x = np.asarray(x, dtype=float)
    labels = np.arange(len(x)) % k
    for _ in range(t):
        means = np.zeros((k, x.shape[1]))
        for j in range(k):
            members = x[labels == j]
            if len(members):
                means[j] = members.mean(axis=0)
        dist = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(dist, axis=1)
    return labels


def knn(x, labels, point, k: int, s: int) -> int:
    """Majority class among the k nearest; stable order on distance ties,
    smaller class id on vote ties."""
    x = np.asarray(x, dtype=float)
    dist = ((x - np.asarray(point, dtype=float)) ** 2).sum(axis=1)
    nearest = np.asarray(labels)[np.argsort(dist, kind="stable")[:k]].astype(int)
    votes = np.bincount(nearest, minlength=s + 1)[1:]
    return int(np.argmax(votes)) + 1
