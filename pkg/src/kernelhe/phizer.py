"""Per-query choice between the general and the kernel circuit.

For each query the cost model predicts t_gen and t_ker under a profile; the
kernel circuit is chosen only when it is strictly cheaper.  ``evaluate``
then runs the chosen variant on the simulated backend, building the kernel
(or fetching it from a ``KernelStore``) first when needed, and reports the
measured counts next to the prediction.

Client-side key generation, encryption and decryption are identity maps in
this simulation: datasets are used as given and results are returned as
decoded values.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from . import costmodel as cm
from . import mlarith as ma
from . import mlbool as mb
from .arithsim import IterationBudgets, OpCounts, OpLedger
from .fixedpoint import FixedPointLayout, quantize
from .gatesim import GateLedger
from .kernelengine import Dataset, KernelStore

SUPPORTED = {
    "arith": ("svm", "pca", "total_variance", "distance", "norm", "similarity", "kmeans"),
    "bool": ("kmeans", "knn"),
}
# Algorithms with no kernel form: their data enter through more than inner products.
UNSUPPORTED = ("lda", "linear_regression")
ALIASES = {
    "tv": "total_variance", "k-means": "kmeans", "k-nn": "knn", "cosine": "similarity",
    "linear-regression": "linear_regression", "linreg": "linear_regression",
}


class UnsupportedAlgorithmError(ValueError):
    pass


def canonical_algorithm(name: str) -> str:
    key = name.strip().lower()
    return ALIASES.get(key, key)


def require_supported(name: str) -> str:
    """Canonical name, or ``UnsupportedAlgorithmError`` if no backend serves it."""
    alg = canonical_algorithm(name)
    if alg in UNSUPPORTED:
        raise UnsupportedAlgorithmError(f"{alg} has no kernel formulation")
    if not any(alg in algs for algs in SUPPORTED.values()):
        raise UnsupportedAlgorithmError(f"unsupported algorithm {alg!r}")
    return alg


@dataclass(frozen=True)
class Query:
    algorithm: str
    dataset: Dataset
    backend: str = "arith"
    k: int = 3
    t: int = 10
    l: int = 16
    s: int = 2
    r: int = 1
    eta: float = 0.01
    budgets: IterationBudgets = field(default_factory=IterationBudgets)
    i: int = 0
    j: int = 1
    point: Sequence[float] | None = None    # k-NN query point
    hoist: bool = False
    bias: bool = True
    workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "algorithm", canonical_algorithm(self.algorithm))

    @property
    def params(self) -> cm.Params:
        return cm.Params(n=self.dataset.n, d=self.dataset.d, k=self.k, t=self.t, l=self.l,
                         s=self.s, r=self.r, budgets=self.budgets, bias=self.bias,
                         hoist=self.hoist, workers=self.workers)


def check_query(q: Query) -> None:
    """Raise if the query cannot be served; ``UnsupportedAlgorithmError`` for
    algorithms outside the kernel-capable set."""
    if q.algorithm in UNSUPPORTED:
        raise UnsupportedAlgorithmError(f"{q.algorithm} has no kernel formulation")
    if q.backend not in SUPPORTED:
        raise ValueError(f"unknown backend {q.backend!r}")
    if q.algorithm not in SUPPORTED[q.backend]:
        known = sorted(set(SUPPORTED["arith"]) | set(SUPPORTED["bool"]))
        if q.algorithm in known:
            raise ValueError(f"{q.algorithm} is not available on the {q.backend} backend")
        raise UnsupportedAlgorithmError(f"unsupported algorithm {q.algorithm!r}")
    n, d = q.dataset.n, q.dataset.d
    a = q.algorithm
    if a in ("distance", "similarity", "norm"):
        for idx in (q.i,) if a == "norm" else (q.i, q.j):
            if not 0 <= idx < n:
                raise ValueError(f"point index {idx} out of range for n={n}")
    if a == "svm":
        y = q.dataset.labels
        if y is None or not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("svm needs labels in {-1, +1}")
    if a == "pca" and not 1 <= q.r <= min(n, d):
        raise ValueError(f"r must be in 1..{min(n, d)}")
    if a == "kmeans" and not 2 <= q.k <= n:
        raise ValueError("kmeans needs 2 <= k <= n")
    if a == "knn":
        y = q.dataset.labels
        if y is None or not np.all(np.isin(y, np.arange(1, q.s + 1))):
            raise ValueError(f"knn needs class labels in 1..{q.s}")
        if not 1 <= q.k <= n:
            raise ValueError("knn needs 1 <= k <= n")
        if q.point is None or len(q.point) != d:
            raise ValueError("knn needs a query point of dimension d")
    if a in ("kmeans", "svm") and q.t < 1:
        raise ValueError("t must be >= 1")
    if q.backend == "bool" and (q.l < 4 or q.l % 2):
        raise ValueError("word length l must be even and >= 4")


def _estimate(q: Query, variant: str, profile: cm.CostProfile, build_share: float = 1.0):
    check_query(q)
    return cm.estimate(q.algorithm, variant, q.params, profile, backend=q.backend,
                       build_share=build_share)


def general_perf(q: Query, profile: cm.CostProfile) -> float:
    return _estimate(q, "general", profile).duration


def kernel_perf(q: Query, profile: cm.CostProfile, build_share: float = 1.0) -> float:
    """Kernel-variant time including ``build_share`` of the kernel build."""
    return _estimate(q, "kernel", profile, build_share).duration


def kernel_decision(t_gen: float, t_ker: float) -> int:
    return 1 if t_ker < t_gen else 0


@dataclass(frozen=True)
class CircuitChoice:
    query: Query
    t_gen: float
    t_ker: float
    decision: int
    build_share: float = 1.0

    @property
    def variant(self) -> str:
        return "kernel" if self.decision else "general"


def decide(q: Query, profile: cm.CostProfile) -> CircuitChoice:
    t_gen, t_ker = general_perf(q, profile), kernel_perf(q, profile)
    return CircuitChoice(q, t_gen, t_ker, kernel_decision(t_gen, t_ker))


def _kernel_key(q: Query) -> tuple:
    if q.backend == "bool" and q.algorithm == "knn":
        return ("bool-knn", q.dataset.digest, q.l, tuple(float(v) for v in q.point))
    if q.backend == "bool":
        return ("bool", q.dataset.digest, q.l)
    return ("arith", q.dataset.digest)


def decide_batch(queries: Sequence[Query], profile: cm.CostProfile) -> list[CircuitChoice]:
    """Decide every query; kernel builds shared by two or more kernel
    decisions are split evenly between them."""
    choices = [decide(q, profile) for q in queries]
    groups = defaultdict(list)
    for idx, c in enumerate(choices):
        if c.decision:
            groups[_kernel_key(c.query)].append(idx)
    for members in groups.values():
        if len(members) < 2:
            continue
        share = 1.0 / len(members)
        for idx in members:
            c = choices[idx]
            t_ker = kernel_perf(c.query, profile, share)
            choices[idx] = replace(c, t_ker=t_ker, decision=kernel_decision(c.t_gen, t_ker),
                                   build_share=share)
    return choices


# evaluation

@dataclass
class Evaluation:
    choice: CircuitChoice | None
    variant: str
    result: dict[str, Any]
    eval_counts: OpCounts | None = None
    eval_units: int | None = None
    build_counts: OpCounts | None = None      # critical path; zero on a cache hit
    build_units: int | None = None
    kernel_reused: bool = False
    measured: float = 0.0                     # seconds under the profile


def _arith_kernel(q: Query, store: KernelStore):
    km, built = store.get_or_build(q.dataset, workers=q.workers)
    return km, (km.critical_counts if built else OpCounts()), not built


def _run_arith(q: Query, variant: str, store: KernelStore):
    led = OpLedger()
    x, y = q.dataset.points, q.dataset.labels
    build, reused = OpCounts(), False
    if variant == "kernel":
        km, build, reused = _arith_kernel(q, store)
        kern = km.entries
    a, b = q.algorithm, q.budgets
    gen = variant == "general"
    if a == "svm":
        model = (ma.svm_general(x, y, q.eta, q.t, led, q.bias) if gen
                 else ma.svm_kernel(kern, y, q.eta, q.t, led, q.bias))
        res = {"alpha": model.alpha.tolist()}
    elif a == "pca":
        out = (ma.pca_general(x, q.r, b, led) if gen else ma.pca_kernel(kern, x, q.r, b, led))
        res = {"components": out.components.tolist(), "eigenvalues": out.eigenvalues.tolist()}
    elif a == "total_variance":
        v = ma.total_variance_general(x, led) if gen else ma.total_variance_kernel(kern, led)
        res = {"value": v.value}
    elif a == "distance":
        v = ma.distance_general(x[q.i], x[q.j], led) if gen else ma.distance_kernel(kern, q.i, q.j, led)
        res = {"value": v.value}
    elif a == "norm":
        v = ma.norm_general(x[q.i], led, b) if gen else ma.norm_kernel(kern, q.i, led, b)
        res = {"value": v.value}
    elif a == "similarity":
        v = (ma.similarity_general(x[q.i], x[q.j], led, b) if gen
             else ma.similarity_kernel(kern, q.i, q.j, led, b))
        res = {"value": v.value}
    else:  # kmeans
        out = (ma.kmeans_general_arith(x, q.k, q.t, led) if gen
               else ma.kmeans_kernel_arith(kern, q.k, q.t, led, hoist=q.hoist))
        res = {"labels": out.labels.tolist()}
    return res, led.snapshot(), build, reused


def _quantized(q: Query, values) -> np.ndarray:
    lay = FixedPointLayout(q.l)
    arr = np.asarray(values, dtype=float)
    return np.vectorize(lambda v: quantize(float(v), lay), otypes=[np.int64])(arr)


def _run_bool(q: Query, variant: str, store: KernelStore):
    lay = FixedPointLayout(q.l)
    raws = _quantized(q, q.dataset.points)
    key = _kernel_key(q)
    build, reused = 0, False
    if q.algorithm == "kmeans":
        if variant == "general":
            x = mb.encrypt_array(GateLedger(1), raws[None], lay)
            rep = mb.kmeans_general_bool(x, q.k, q.t)
        else:
            cached = store.get_value(key)
            if cached is None:
                x = mb.encrypt_array(GateLedger(1), raws[None], lay)
                grid, _, crit = mb.kernel_matrix_bool(x, q.workers)
                store.put_value(key, grid)
                build = crit.binary_gate_units
            else:
                grid, reused = cached, True
            rep = mb.kmeans_kernel_bool(grid, q.k, q.t)
        return {"labels": [int(c) for c in rep.labels[0]]}, rep.gate_units, build, reused
    led = GateLedger(1)
    x = mb.encrypt_array(led, raws[None], lay)
    labels = mb.encrypt_array(led, (np.asarray(q.dataset.labels, dtype=np.int64) * lay.scale)[None], lay)
    query = mb.encrypt_array(led, _quantized(q, q.point)[None], lay)
    if variant == "general":
        rep = mb.knn_general_bool(x, labels, query, q.k, q.s)
    else:
        cached = store.get_value(key)
        if cached is None:
            row, diag, _, crit = mb.query_kernel_bool(x, query, q.workers)
            store.put_value(key, (row, diag))
            build = crit.binary_gate_units
        else:
            (row, diag), reused = cached, True
        rep = mb.knn_kernel_bool(row, diag, labels, q.k, q.s)
    return {"predicted": int(rep.predicted[0])}, rep.gate_units, build, reused


def evaluate(q: Query, choice: CircuitChoice | int | str, store: KernelStore,
             profile: cm.CostProfile) -> Evaluation:
    """Run the chosen variant and price the measured counts under ``profile``."""
    check_query(q)
    if isinstance(choice, CircuitChoice):
        variant, ch = choice.variant, choice
    elif choice in (0, 1):
        variant, ch = ("kernel" if choice else "general"), None
    elif choice in cm.VARIANTS:
        variant, ch = choice, None
    else:
        raise ValueError(f"invalid decision {choice!r}")
    if q.backend == "arith":
        res, counts, build, reused = _run_arith(q, variant, store)
        measured = cm.duration(counts + build, profile)
        return Evaluation(ch, variant, res, eval_counts=counts, build_counts=build,
                          kernel_reused=reused, measured=measured)
    res, units, build, reused = _run_bool(q, variant, store)
    measured = cm.gate_duration(units + build, profile)
    return Evaluation(ch, variant, res, eval_units=units, build_units=build,
                      kernel_reused=reused, measured=measured)


def run_batch(queries: Sequence[Query], profile: cm.CostProfile,
              store: KernelStore | None = None) -> list[Evaluation]:
    store = store if store is not None else KernelStore()
    return [evaluate(c.query, c, store, profile) for c in decide_batch(queries, profile)]
