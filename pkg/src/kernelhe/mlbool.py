"""k-means and k-NN evaluated entirely with fixed-point gate circuits.

Inputs are ``WordCipher`` grids; the ledger may carry several lanes, in which
case every lane is an independent instance run through the same circuit.
Each pipeline has a plaintext oracle (``*_oracle``) that executes the same
algorithm on raw fixed-point integers with the reference semantics from
``fixedpoint``; decoded circuit outputs must equal the oracle exactly.

k-means starts from the deterministic assignment point i -> cluster i mod k
(a seeded random assignment can be passed instead).  The kernel variant
scores point i against cluster j with p_j - 2 n_j sum_a K_j(x_i, x_a), where
K_j is the kernel restricted to members of j, n_j the cluster size and p_j
the sum of K_j; this is the squared distance scaled by n_j^2 with the
cluster-independent term dropped, so it can differ from true distances when
clusters have different sizes.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import boolcircuits as bc
from . import gatesim as gs
from .fixedpoint import (
    FixedPointLayout,
    fx_add,
    fx_div,
    fx_mul,
    fx_sub,
    wrap,
)
from .gatesim import GateCounts, GateLedger, SimBit

WordGrid = list[list[bc.WordCipher]]


@dataclass
class BoolRunReport:
    counts: GateCounts
    phases: dict[str, GateCounts] = field(default_factory=dict)
    t: int = 0
    labels: list[list[int]] | None = None      # per lane: cluster index per point
    predicted: list[int] | None = None         # per lane: class id

    @property
    def gate_units(self) -> int:
        return self.counts.binary_gate_units

    def phase_units(self, name: str) -> int:
        return self.phases.get(name, GateCounts()).binary_gate_units


class _Phases:
    def __init__(self, ledger: GateLedger):
        self.ledger = ledger
        self.start = ledger.snapshot()
        self.totals: dict[str, GateCounts] = {}

    @contextmanager
    def __call__(self, name: str):
        before = self.ledger.snapshot()
        yield
        delta = gs.diff(before, self.ledger.snapshot())
        self.totals[name] = self.totals.get(name, GateCounts()) + delta

    def report(self, **kw) -> BoolRunReport:
        return BoolRunReport(gs.diff(self.start, self.ledger.snapshot()), dict(self.totals), **kw)


# encryption helpers

def encrypt_array(ledger: GateLedger, raws, layout: FixedPointLayout):
    """Encrypt an int array whose first axis is the lane axis."""
    arr = np.asarray(raws, dtype=np.int64)
    if arr.shape[0] != ledger.lanes:
        raise ValueError(f"expected {ledger.lanes} lanes, got {arr.shape[0]}")

    def build(idx):
        if len(idx) == arr.ndim - 1:
            return bc.encrypt_raw(ledger, [int(v) for v in arr[(slice(None),) + idx]], layout)
        return [build(idx + (i,)) for i in range(arr.shape[len(idx) + 1])]

    return build(())


def _clear_lanes(w: bc.WordCipher, lanes_mask: int) -> bc.WordCipher:
    """Zero the given lanes (simulation-level, no gates)."""
    if not lanes_mask:
        return w
    keep = ~lanes_mask
    return bc.WordCipher([SimBit(b.value & keep, b.ledger) for b in w.bits], w.layout)


def _sum(words: Sequence[bc.WordCipher]) -> bc.WordCipher:
    acc = words[0]
    for w in words[1:]:
        acc = bc.add(acc, w)
    return acc


def _dot(a: Sequence[bc.WordCipher], b: Sequence[bc.WordCipher]) -> bc.WordCipher:
    return _sum([bc.mult(x, y) for x, y in zip(a, b)])


def _sq_distance(a: Sequence[bc.WordCipher], b: Sequence[bc.WordCipher]) -> bc.WordCipher:
    diffs = [bc.sub(x, y) for x, y in zip(a, b)]
    return _sum([bc.mult(x, x) for x in diffs])


def initial_label_grid(ledger: GateLedger, n: int, k: int, assignment: Sequence[int] | None = None):
    assignment = list(assignment) if assignment is not None else [i % k for i in range(n)]
    if len(assignment) != n or not all(0 <= a < k for a in assignment):
        raise ValueError("initial assignment must give a cluster in 0..k-1 per point")
    return [[ledger.const(int(assignment[i] == j)) for j in range(k)] for i in range(n)]


def _decode_labels(grid) -> list[list[int]]:
    rows = [bc.decode_onehot(r) for r in grid]  # per point, per lane
    lanes = grid[0][0].ledger.lanes
    return [[rows[i][lane] for i in range(len(grid))] for lane in range(lanes)]


def _assign(scores: Sequence[bc.WordCipher], phases: _Phases) -> list[SimBit]:
    with phases("argmin"):
        hot = bc.argmin(scores)
    with phases("tie_break"):
        return bc.first_set(hot)


def _check_kmeans(n: int, k: int, t: int) -> None:
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError("k must not exceed n")
    if t < 1:
        raise ValueError("t must be >= 1")


# k-means

def kmeans_general_bool(x: WordGrid, k: int, t: int, init: Sequence[int] | None = None) -> BoolRunReport:
    n, d = len(x), len(x[0])
    _check_kmeans(n, k, t)
    lay = x[0][0].layout
    led = x[0][0].ledger
    phases = _Phases(led)
    labels = initial_label_grid(led, n, k, init)
    for _ in range(t):
        means = []
        for j in range(k):
            with phases("extract"):
                members = [
                    bc.WordCipher([gs.and_(labels[i][j], b) for b in x[i][c].bits], lay)
                    for i in range(n) for c in range(d)
                ]
            with phases("mean"):
                count = _sum([bc.bit_word(labels[i][j], lay) for i in range(n)])
                mean = []
                for c in range(d):
                    total = _sum([members[i * d + c] for i in range(n)])
                    q = bc.divide(total, count)
                    mean.append(_clear_lanes(q, q.flags))
            means.append(mean)
        new = []
        for i in range(n):
            with phases("distance"):
                scores = [_sq_distance(x[i], means[j]) for j in range(k)]
            new.append(_assign(scores, phases))
        labels = new
    return phases.report(t=t, labels=_decode_labels(labels))


def kmeans_kernel_bool(kern: WordGrid, k: int, t: int, init: Sequence[int] | None = None) -> BoolRunReport:
    n = len(kern)
    _check_kmeans(n, k, t)
    lay = kern[0][0].layout
    led = kern[0][0].ledger
    phases = _Phases(led)
    labels = initial_label_grid(led, n, k, init)
    for _ in range(t):
        scores = [[None] * k for _ in range(n)]
        for j in range(k):
            with phases("mask"):
                masked = []
                for a in range(n):
                    row = []
                    for b in range(n):
                        both = gs.and_(labels[a][j], labels[b][j])
                        row.append(bc.WordCipher([gs.and_(both, bit) for bit in kern[a][b].bits], lay))
                    masked.append(row)
            with phases("cluster_size"):
                size = _sum([bc.bit_word(labels[a][j], lay) for a in range(n)])
            with phases("cluster_total"):
                p = _sum([w for row in masked for w in row])
            with phases("score"):
                for i in range(n):
                    s = _sum(masked[i])
                    scores[i][j] = bc.sub(p, bc.mult(size, bc.add(s, s)))
        labels = [_assign(scores[i], phases) for i in range(n)]
    return phases.report(t=t, labels=_decode_labels(labels))


# k-NN

def _check_knn(n: int, k: int, s: int) -> None:
    if n < 1:
        raise ValueError("empty dataset")
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    if s < 2:
        raise ValueError("need at least two classes")


def _knn_shared(dist: list[bc.WordCipher], labels: list[bc.WordCipher], k: int, s: int,
                phases: _Phases) -> list[int]:
    with phases("sort"):
        if len(dist) > 1:
            _, ordered = bc.bubble_sort(dist, labels)
        else:
            ordered = labels
    with phases("count"):
        tallies = bc.count_class(ordered[:k], s)
    with phases("majority"):
        hot = bc.argmax(tallies)
    return [c + 1 for c in bc.decode_onehot(hot)]


def knn_general_bool(x: WordGrid, labels: list[bc.WordCipher], query: list[bc.WordCipher],
                     k: int, s: int) -> BoolRunReport:
    """Class ids are fixed-point integers 1..s; ties go to the smaller id."""
    n = len(x)
    _check_knn(n, k, s)
    phases = _Phases(query[0].ledger)
    with phases("distance"):
        dist = [_sq_distance(query, x[i]) for i in range(n)]
    pred = _knn_shared(dist, labels, k, s, phases)
    return phases.report(predicted=pred)


def knn_kernel_bool(row: list[bc.WordCipher], diag: list[bc.WordCipher], labels: list[bc.WordCipher],
                    k: int, s: int) -> BoolRunReport:
    """Distances shifted by the query's own norm: K(x_i, x_i) - 2 K(x, x_i)."""
    n = len(row)
    _check_knn(n, k, s)
    if len(diag) != n or len(labels) != n:
        raise ValueError("kernel row, diagonal and labels must have equal length")
    lay = row[0].layout
    led = row[0].ledger
    phases = _Phases(led)
    with phases("distance"):
        zero = bc.const_word(led, 0, lay)
        dist = [bc.add(bc.sub(bc.sub(zero, r), r), dg) for r, dg in zip(row, diag)]
    pred = _knn_shared(dist, labels, k, s, phases)
    return phases.report(predicted=pred)


# kernel construction with circuits: every entry is its own work item on its
# own ledger (a separate processor), results are copied onto the target.

def _copy_word(w: bc.WordCipher, ledger: GateLedger) -> bc.WordCipher:
    return bc.WordCipher([ledger.input(b.value) for b in w.bits], w.layout)


def kernel_entries_bool(ledger: GateLedger, pairs: Sequence[tuple[Sequence[bc.WordCipher], Sequence[bc.WordCipher]]],
                        workers: int | None = None):
    """Dot products of word vectors; returns (words, total counts, critical-path counts)."""
    words, costs = [], []
    for a, b in pairs:
        own = GateLedger(ledger.lanes)
        w = _dot([_copy_word(v, own) for v in a], [_copy_word(v, own) for v in b])
        costs.append(own.snapshot())
        words.append(_copy_word(w, ledger))
    total = sum(costs, GateCounts())
    if not costs:
        return words, total, GateCounts()
    if workers is None or workers >= len(costs):
        crit = max(costs, key=lambda c: c.binary_gate_units)
    else:
        loads = [GateCounts() for _ in range(workers)]
        for i, c in enumerate(costs):
            loads[i % workers] = loads[i % workers] + c
        crit = max(loads, key=lambda c: c.binary_gate_units)
    return words, total, crit


def kernel_matrix_bool(x: WordGrid, workers: int | None = None):
    n = len(x)
    led = x[0][0].ledger
    pairs = [(x[i], x[j]) for i in range(n) for j in range(i, n)]
    words, total, crit = kernel_entries_bool(led, pairs, workers)
    grid = [[None] * n for _ in range(n)]
    it = iter(words)
    for i in range(n):
        for j in range(i, n):
            grid[i][j] = grid[j][i] = next(it)
    return grid, total, crit


def query_kernel_bool(x: WordGrid, query: list[bc.WordCipher], workers: int | None = None):
    """Kernel row K(query, x_i) and diagonal K(x_i, x_i) for k-NN."""
    n = len(x)
    led = query[0].ledger
    pairs = [(query, x[i]) for i in range(n)] + [(x[i], x[i]) for i in range(n)]
    words, total, crit = kernel_entries_bool(led, pairs, workers)
    return words[:n], words[n:], total, crit


# plaintext oracles on raw fixed-point integers (one instance each)

def kernel_raw(x_raw, l: int) -> list[list[int]]:
    n = len(x_raw)
    k = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            k[i][j] = k[j][i] = dot_raw(x_raw[i], x_raw[j], l)
    return k


def dot_raw(a, b, l: int) -> int:
    acc = None
    for u, v in zip(a, b):
        p = fx_mul(int(u), int(v), l)
        acc = p if acc is None else fx_add(acc, p, l)
    return acc


def _sq_distance_raw(a, b, l: int) -> int:
    acc = None
    for u, v in zip(a, b):
        dv = fx_sub(int(u), int(v), l)
        p = fx_mul(dv, dv, l)
        acc = p if acc is None else fx_add(acc, p, l)
    return acc


def _argmin_first(vals) -> int:
    best = 0
    for i, v in enumerate(vals):
        if v < vals[best]:
            best = i
    return best


def kmeans_general_oracle(x_raw, k: int, t: int, l: int, init=None) -> list[int]:
    n, d = len(x_raw), len(x_raw[0])
    _check_kmeans(n, k, t)
    scale = 1 << (l // 2)
    labels = list(init) if init is not None else [i % k for i in range(n)]
    for _ in range(t):
        means = []
        for j in range(k):
            count = wrap(scale * sum(1 for i in range(n) if labels[i] == j), l)
            mean = []
            for c in range(d):
                total = 0
                for i in range(n):
                    if labels[i] == j:
                        total = fx_add(total, int(x_raw[i][c]), l)
                q, flagged = fx_div(total, count, l)
                mean.append(0 if flagged else q)
            means.append(mean)
        labels = [_argmin_first([_sq_distance_raw(x_raw[i], means[j], l) for j in range(k)]) for i in range(n)]
    return labels


def kmeans_kernel_oracle(k_raw, k: int, t: int, l: int, init=None) -> list[int]:
    n = len(k_raw)
    _check_kmeans(n, k, t)
    scale = 1 << (l // 2)
    labels = list(init) if init is not None else [i % k for i in range(n)]
    for _ in range(t):
        scores = [[0] * k for _ in range(n)]
        for j in range(k):
            member = [labels[a] == j for a in range(n)]
            size = 0
            for a in range(n):
                if member[a]:
                    size = fx_add(size, scale, l)
            p = 0
            for a in range(n):
                for b in range(n):
                    if member[a] and member[b]:
                        p = fx_add(p, int(k_raw[a][b]), l)
            for i in range(n):
                s = 0
                for a in range(n):
                    if member[i] and member[a]:
                        s = fx_add(s, int(k_raw[i][a]), l)
                scores[i][j] = fx_sub(p, fx_mul(size, fx_add(s, s, l), l), l)
        labels = [_argmin_first(scores[i]) for i in range(n)]
    return labels


def _knn_shared_raw(dist, labels, k: int, s: int) -> int:
    pairs = list(zip(dist, labels))
    n = len(pairs)
    for _ in range(n - 1):
        for j in range(n - 1):
            if not pairs[j][0] <= pairs[j + 1][0]:
                pairs[j], pairs[j + 1] = pairs[j + 1], pairs[j]
    counts = [sum(1 for _, c in pairs[:k] if c == cls) for cls in range(1, s + 1)]
    best = 0
    for i, c in enumerate(counts):
        if c > counts[best]:
            best = i
    return best + 1


def knn_general_oracle(x_raw, labels, q_raw, k: int, s: int, l: int) -> int:
    _check_knn(len(x_raw), k, s)
    dist = [_sq_distance_raw(q_raw, xi, l) for xi in x_raw]
    return _knn_shared_raw(dist, list(labels), k, s)


def knn_kernel_oracle(row_raw, diag_raw, labels, k: int, s: int, l: int) -> int:
    _check_knn(len(row_raw), k, s)
    dist = [fx_add(fx_sub(fx_sub(0, int(r), l), int(r), l), int(dg), l) for r, dg in zip(row_raw, diag_raw)]
    return _knn_shared_raw(dist, list(labels), k, s)
