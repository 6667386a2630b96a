import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftpressure import kernels


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 40), st.integers(1, 6), st.integers(0, 4), st.integers(0, 2**31))
def test_match_rows_backends_agree(n, width, nplace, seed):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 3, size=(n, width)).astype(np.uint8)
    length = min(2, width)
    idx = np.array([rng.choice(width, size=length, replace=False) for _ in range(nplace)],
                   dtype=np.int64).reshape(nplace, length)
    sym = rng.integers(0, 3, size=(nplace, length))
    a = kernels.match_rows(arr, idx, sym, backend="numba")
    b = kernels.match_rows(arr, idx, sym, backend="numpy")
    assert np.array_equal(a, b)
    for r in range(n):
        want = any(all(arr[r, idx[p, k]] == sym[p, k] for k in range(length)) for p in range(nplace))
        assert a[r] == want


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**31), st.integers(1, 30), st.booleans())
def test_sweep_backends_agree(n, seed, steps, lower):
    rng = np.random.default_rng(seed)
    m = rng.random((n, n)) * (rng.random((n, n)) < 0.6)
    src, dst = np.nonzero(m)
    w = m[src, dst]
    v0 = rng.random(n) + 0.1
    va, ea = kernels.transfer_sweep(src, dst, w, v0, steps, lower, backend="numba")
    vb, eb = kernels.transfer_sweep(src, dst, w, v0, steps, lower, backend="numpy")
    assert ea == eb
    assert np.allclose(va, vb, rtol=1e-12, atol=0)
    ref = v0.copy()
    for _ in range(steps):
        ref = ref @ m
    assert np.allclose(np.ldexp(va, ea), ref, rtol=1e-9, atol=1e-300)


def test_histogram_backends_agree_and_count():
    # golden mean words of length 6 with weight = number of ones at anchors 0..4
    nsites = 6
    anchors = np.arange(5).reshape(5, 1)
    table = np.array([0, 1])
    fidx = np.array([[i, i + 1] for i in range(5)])
    fsym = np.ones((5, 2), dtype=np.int64)
    ha, la = kernels.weighted_histogram(2, nsites, anchors, table, fidx, fsym, backend="numba")
    hb, lb = kernels.weighted_histogram(2, nsites, anchors, table, fidx, fsym, backend="numpy")
    assert la == lb == 0
    assert np.array_equal(ha, hb)
    assert ha.sum() == 21


def test_histogram_without_forbidden():
    h, lo = kernels.weighted_histogram(3, 4, np.zeros((0, 1), dtype=np.int64), np.array([0, 0, 0]),
                                       np.zeros((0,)), np.zeros((0,)))
    assert lo == 0 and h.tolist() == [81]


def test_backend_env_selection(monkeypatch):
    monkeypatch.setenv("SHIFTPRESSURE_KERNELS", "numpy")
    assert kernels._pick_backend() == "numpy"
    monkeypatch.setenv("SHIFTPRESSURE_KERNELS", "numba")
    assert kernels._pick_backend() in ("numba", "numpy")
    monkeypatch.setenv("SHIFTPRESSURE_KERNELS", "bogus")
    with pytest.raises(ValueError):
        kernels._pick_backend()
