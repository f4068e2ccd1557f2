"""Linear-kernel matrices: parallel construction, masking and caching.

Every kernel entry is an independent dot product, so the build is a bag of
work items.  Each item runs on its own ledger; the totals are merged
afterwards, which keeps the result identical whatever the schedule.  Besides
the total cost, a ``KernelMatrix`` records the critical path: the cost of the
busiest processor when items are dealt round-robin to ``workers`` modeled
processors (``None`` means one processor per item).
"""

from __future__ import annotations

import hashlib
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arithsim import OpCounts, OpLedger, TrackedVector, dot

WORKERS_ENV = "KERNELHE_WORKERS"


def default_workers() -> int | None:
    """Modeled processor count from the environment; ``None`` = unbounded."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw or raw.lower() in ("all", "unbounded", "0"):
        return None
    n = int(raw)
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer")
    return n


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("dataset needs n >= 1 rows and d >= 1 columns")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=float).reshape(-1)
            if len(y) != pts.shape[0]:
                raise ValueError("label count does not match point count")
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.points.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.points).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    digest: str
    build_counts: OpCounts = OpCounts()
    critical_counts: OpCounts = OpCounts()
    workers: int | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def pair_indices(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


def critical_path(item_counts: list[OpCounts], workers: int | None) -> OpCounts:
    """Cost of the busiest modeled processor under round-robin dealing."""
    if not item_counts:
        return OpCounts()
    if workers is None or workers >= len(item_counts):
        return max(item_counts, key=lambda c: (c.adds + c.mults, c.mults))
    loads = [OpCounts() for _ in range(workers)]
    for idx, c in enumerate(item_counts):
        loads[idx % workers] = loads[idx % workers] + c
    return max(loads, key=lambda c: (c.adds + c.mults, c.mults))


def _entry(points: np.ndarray, i: int, j: int) -> tuple[float, OpCounts]:
    led = OpLedger()
    v = dot(TrackedVector(points[i], led), TrackedVector(points[j], led))
    return v.value, led.snapshot()


def build_kernel(data: Dataset, ledger: OpLedger | None = None,
                 workers: int | None = None, threads: int | None = None) -> KernelMatrix:
    """K[i][j] = x_i . x_j for i <= j, mirrored.

    ``workers`` is the modeled processor count used for the critical path;
    ``threads`` only controls local execution.  When ``ledger`` is given the
    total build cost is charged to it.
    """
    pts = data.points
    n = data.n
    pairs = pair_indices(n)
    threads = threads or min(8, os.cpu_count() or 1)
    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: _entry(pts, *p), pairs))
    else:
        results = [_entry(pts, i, j) for i, j in pairs]
    k = np.zeros((n, n))
    item_counts = []
    for (i, j), (v, c) in zip(pairs, results):
        k[i, j] = k[j, i] = v
        item_counts.append(c)
    total = sum(item_counts, OpCounts())
    if ledger is not None:
        ledger.charge_counts(total)
    k.setflags(write=False)
    return KernelMatrix(k, data.digest, total, critical_path(item_counts, workers), workers)


def masked_cluster_kernel(k: KernelMatrix | np.ndarray, labels_onehot, j: int) -> np.ndarray:
    """Entries whose row and column points both carry label ``j``; zero elsewhere."""
    ent = k.entries if isinstance(k, KernelMatrix) else np.asarray(k, dtype=float)
    lab = np.asarray(labels_onehot)
    if lab.ndim != 2 or lab.shape[0] != ent.shape[0]:
        raise ValueError("label grid must have one row per kernel row")
    if not 0 <= j < lab.shape[1]:
        raise ValueError(f"cluster index {j} out of range")
    member = lab[:, j].astype(bool)
    return np.where(np.outer(member, member), ent, 0.0)


def is_psd_small(k: np.ndarray, eps: float = 1e-9) -> bool:
    """All 1x1, 2x2 and 3x3 principal minors are >= -eps."""
    n = k.shape[0]
    for i in range(n):
        if k[i, i] < -eps:
            return False
        for j in range(i + 1, n):
            if k[i, i] * k[j, j] - k[i, j] * k[j, i] < -eps:
                return False
            for m in range(j + 1, n):
                idx = [i, j, m]
                with np.errstate(all="ignore"):
                    minor = np.linalg.det(k[np.ix_(idx, idx)])
                if minor < -eps:
                    return False
    return True


@dataclass
class KernelStore:
    """Cache of kernel matrices keyed by dataset content."""

    _items: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    hits: int = 0
    builds: int = 0

    def get(self, data: Dataset) -> KernelMatrix | None:
        with self._lock:
            return self._items.get(data.digest)

    def get_or_build(self, data: Dataset, ledger: OpLedger | None = None,
                     workers: int | None = None) -> tuple[KernelMatrix, bool]:
        """Returns the matrix and whether it was built by this call."""
        with self._lock:
            hit = self._items.get(data.digest)
            if hit is not None:
                self.hits += 1
                return hit, False
        km = build_kernel(data, ledger=ledger, workers=workers)
        with self._lock:
            existing = self._items.setdefault(data.digest, km)
            if existing is km:
                self.builds += 1
                return km, True
            self.hits += 1
            return existing, False

    # arbitrary prebuilt kernels (e.g. circuit-level words) under caller keys

    def get_value(self, key):
        with self._lock:
            hit = self._items.get(key)
            if hit is not None:
                self.hits += 1
            return hit

    def put_value(self, key, value) -> None:
        with self._lock:
            if key not in self._items:
                self._items[key] = value
                self.builds += 1


def kernel_cache_get_or_build(store: KernelStore, data: Dataset, ledger: OpLedger | None = None,
                              workers: int | None = None) -> KernelMatrix:
    return store.get_or_build(data, ledger=ledger, workers=workers)[0]


def build_steps(n: int, workers: int | None) -> int:
    """Dot products on the critical path of a full build."""
    pairs = n * (n + 1) // 2
    if workers is None or workers >= pairs:
        return 1
    return math.ceil(pairs / workers)
