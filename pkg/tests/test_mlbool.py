import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kernelhe import costmodel as cm
from kernelhe import mlbool as mb
from kernelhe.fixedpoint import FixedPointLayout
from kernelhe.gatesim import GateLedger

L = 16
LAY = FixedPointLayout(L)
LANES = 8


def _instances(seed, n, d):
    rng = np.random.default_rng(seed)
    return rng.integers(-LAY.scale, LAY.scale + 1, (LANES, n, d))


shapes = st.tuples(st.integers(2, 5), st.integers(1, 3), st.integers(2, 3), st.integers(1, 2), st.integers(0, 10**6))


@settings(max_examples=8)
@given(shapes)
def test_kmeans_general_matches_oracle(shape):
    n, d, k, t, seed = shape
    k = min(k, n)
    raws = _instances(seed, n, d)
    rep = mb.kmeans_general_bool(mb.encrypt_array(GateLedger(LANES), raws, LAY), k, t)
    assert rep.labels == [mb.kmeans_general_oracle(raws[i].tolist(), k, t, L) for i in range(LANES)]
    assert rep.gate_units == cm.bool_gate_units("kmeans", "general", cm.Params(n=n, d=d, k=k, t=t, l=L))


@settings(max_examples=8)
@given(shapes)
def test_kmeans_kernel_matches_oracle(shape):
    n, d, k, t, seed = shape
    k = min(k, n)
    raws = _instances(seed, n, d)
    grid, total, crit = mb.kernel_matrix_bool(mb.encrypt_array(GateLedger(LANES), raws, LAY))
    for lane in range(LANES):
        k_raw = mb.kernel_raw(raws[lane].tolist(), L)
        assert [[w.raws()[lane] for w in row] for row in grid] == k_raw
    rep = mb.kmeans_kernel_bool(grid, k, t)
    expect = [mb.kmeans_kernel_oracle(mb.kernel_raw(raws[i].tolist(), L), k, t, L) for i in range(LANES)]
    assert rep.labels == expect
    p = cm.Params(n=n, d=d, k=k, t=t, l=L)
    assert rep.gate_units == cm.bool_gate_units("kmeans", "kernel", p)
    assert (total.binary_gate_units, crit.binary_gate_units) == cm.bool_build_units("kmeans", p)


def _knn_setup(seed, n, d, s):
    rng = np.random.default_rng(seed)
    raws = rng.integers(-LAY.scale, LAY.scale + 1, (LANES, n, d))
    q = rng.integers(-LAY.scale, LAY.scale + 1, (LANES, d))
    labels = rng.integers(1, s + 1, (LANES, n))
    led = GateLedger(LANES)
    return (raws, q, labels, led, mb.encrypt_array(led, raws, LAY), mb.encrypt_array(led, q, LAY),
            mb.encrypt_array(led, labels * LAY.scale, LAY))


@settings(max_examples=8)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(2, 3), st.integers(0, 10**6))
def test_knn_pipelines_match_oracles(n, d, s, seed):
    k = min(3, n)
    raws, q, labels, led, x, qw, lw = _knn_setup(seed, n, d, s)
    gen = mb.knn_general_bool(x, lw, qw, k, s)
    row, diag, _, _ = mb.query_kernel_bool(x, qw)
    ker = mb.knn_kernel_bool(row, diag, lw, k, s)
    for lane in range(LANES):
        xs, ys = raws[lane].tolist(), labels[lane].tolist()
        assert gen.predicted[lane] == mb.knn_general_oracle(xs, ys, q[lane].tolist(), k, s, L)
        row_raw = [mb.dot_raw(q[lane].tolist(), xi, L) for xi in xs]
        diag_raw = [mb.dot_raw(xi, xi, L) for xi in xs]
        assert ker.predicted[lane] == mb.knn_kernel_oracle(row_raw, diag_raw, ys, k, s, L)
    shared = sum(gen.phase_units(p) for p in ("sort", "count", "majority"))
    assert shared == cm.knn_shared_units(n, k, s, L)
    assert shared == sum(ker.phase_units(p) for p in ("sort", "count", "majority"))


def test_knn_shared_example():
    assert cm.knn_shared_units(4, 3, 2, 16) == 2432


def test_kernel_knn_agrees_with_general_without_overflow():
    # small magnitudes keep every product exact, so the shifted distances order identically
    raws, q, labels, led, x, qw, lw = _knn_setup(7, 6, 3, 2)
    gen = mb.knn_general_bool(x, lw, qw, 3, 2)
    row, diag, _, _ = mb.query_kernel_bool(x, qw)
    ker = mb.knn_kernel_bool(row, diag, lw, 3, 2)
    agree = sum(a == b for a, b in zip(gen.predicted, ker.predicted))
    assert agree >= LANES - 1  # fixed-point rounding can reorder near-ties


def test_empty_cluster_keeps_zero_mean():
    raws = _instances(3, 4, 2)
    led = GateLedger(LANES)
    rep = mb.kmeans_general_bool(mb.encrypt_array(led, raws, LAY), 3, 1, init=[0, 0, 1, 1])
    expect = [mb.kmeans_general_oracle(raws[i].tolist(), 3, 1, L, init=[0, 0, 1, 1]) for i in range(LANES)]
    assert rep.labels == expect


def test_argument_validation():
    x = mb.encrypt_array(GateLedger(1), np.zeros((1, 3, 2), dtype=int), LAY)
    with pytest.raises(ValueError):
        mb.kmeans_general_bool(x, 1, 1)
    with pytest.raises(ValueError):
        mb.kmeans_general_bool(x, 2, 0)
    with pytest.raises(ValueError):
        mb.kmeans_general_bool(x, 2, 1, init=[0, 5, 1])
    with pytest.raises(ValueError):
        mb.encrypt_array(GateLedger(2), np.zeros((1, 3, 2), dtype=int), LAY)


def test_phases_cover_whole_run():
    raws = _instances(9, 4, 2)
    grid, _, _ = mb.kernel_matrix_bool(mb.encrypt_array(GateLedger(LANES), raws, LAY))
    rep = mb.kmeans_kernel_bool(grid, 2, 2)
    assert sum(c.binary_gate_units for c in rep.phases.values()) == rep.gate_units
    assert rep.phase_units("tie_break") == 2 * 4 * (2 * 2 - 3)
