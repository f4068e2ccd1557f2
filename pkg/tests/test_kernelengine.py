import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from kernelhe.arithsim import OpCounts, OpLedger
from kernelhe.kernelengine import (
    WORKERS_ENV,
    Dataset,
    KernelStore,
    build_kernel,
    build_steps,
    critical_path,
    default_workers,
    is_psd_small,
    masked_cluster_kernel,
)

matrices = st.tuples(st.integers(1, 6), st.integers(1, 5)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-3, 3)))


@given(matrices)
def test_kernel_is_gram_matrix(x):
    km = build_kernel(Dataset(x), threads=1)
    assert np.allclose(km.entries, x @ x.T)
    assert np.array_equal(km.entries, km.entries.T)
    assert is_psd_small(km.entries, eps=1e-7)


@given(matrices)
def test_build_counts(x):
    n, d = x.shape
    led = OpLedger()
    km = build_kernel(Dataset(x), ledger=led)
    pairs = n * (n + 1) // 2
    assert km.build_counts == OpCounts(adds=pairs * (d - 1), mults=pairs * d)
    assert led.snapshot() == km.build_counts
    assert km.critical_counts == OpCounts(adds=d - 1, mults=d)


def test_critical_path_round_robin():
    x = np.ones((4, 3))  # 10 pairs
    km = build_kernel(Dataset(x), workers=3)
    assert km.critical_counts == OpCounts(adds=4 * 2, mults=4 * 3)
    assert build_steps(4, 3) == 4 and build_steps(4, None) == 1 and build_steps(4, 100) == 1
    assert critical_path([], 2) == OpCounts()


def test_schedule_does_not_change_result():
    x = np.random.default_rng(0).normal(size=(7, 4))
    a = build_kernel(Dataset(x), threads=1)
    b = build_kernel(Dataset(x), threads=4)
    assert np.array_equal(a.entries, b.entries) and a.build_counts == b.build_counts


def test_dataset_validation_and_digest():
    with pytest.raises(ValueError):
        Dataset(np.ones(3))
    with pytest.raises(ValueError):
        Dataset(np.ones((2, 2)), labels=[1, 2, 3])
    a = Dataset(np.ones((2, 2)))
    assert a.digest == Dataset(np.ones((2, 2))).digest
    assert a.digest != Dataset(np.ones((1, 4))).digest
    with pytest.raises(ValueError):
        a.points[0, 0] = 5.0


def test_masked_cluster_kernel():
    k = np.arange(9.0).reshape(3, 3)
    onehot = np.array([[1, 0], [0, 1], [1, 0]])
    m = masked_cluster_kernel(k, onehot, 0)
    assert np.array_equal(m, [[0, 0, 2], [0, 0, 0], [6, 0, 8]])
    with pytest.raises(ValueError):
        masked_cluster_kernel(k, onehot, 2)
    with pytest.raises(ValueError):
        masked_cluster_kernel(k, onehot[:2], 0)


def test_store_builds_once_under_concurrency():
    store = KernelStore()
    data = Dataset(np.random.default_rng(1).normal(size=(6, 3)))
    got = []

    def fetch():
        got.append(store.get_or_build(data)[0])

    threads = [threading.Thread(target=fetch) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(k is got[0] for k in got)
    assert store.builds == 1 and store.hits == 7
    km, built = store.get_or_build(data)
    assert km is got[0] and not built


def test_workers_from_environment(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert default_workers() is None
    monkeypatch.setenv(WORKERS_ENV, "4")
    assert default_workers() == 4
    monkeypatch.setenv(WORKERS_ENV, "-2")
    with pytest.raises(ValueError):
        default_workers()


def test_psd_check_detects_indefinite():
    assert not is_psd_small(np.array([[1.0, 2.0], [2.0, 1.0]]))
