"""Hot loops with a numba implementation and a pure numpy fallback.

The backend is chosen once at import time from ``SHIFTPRESSURE_KERNELS``
(``numba`` or ``numpy``).  ``numba`` is the default whenever it imports.
Both implementations are always importable so they can be benchmarked and
cross-checked against each other.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _pick_backend() -> str:
    want = os.environ.get("SHIFTPRESSURE_KERNELS", "numba").strip().lower()
    if want not in ("numba", "numpy"):
        raise ValueError(f"SHIFTPRESSURE_KERNELS must be 'numba' or 'numpy', got {want!r}")
    if want == "numba" and numba is None:
        return "numpy"
    return want


BACKEND = _pick_backend()

# Entries of a rescaled vector below 2**FLOOR_EXP are clamped (down to zero on
# the lower pass, up to the floor on the upper pass).
FLOOR_EXP = -1000


# --- row matching -----------------------------------------------------------

@njit(cache=True)
def _match_rows_numba(arr, idx, sym):
    n = arr.shape[0]
    npl, length = idx.shape
    out = np.zeros(n, dtype=np.bool_)
    for r in range(n):
        for p in range(npl):
            hit = True
            for k in range(length):
                if arr[r, idx[p, k]] != sym[p, k]:
                    hit = False
                    break
            if hit:
                out[r] = True
                break
    return out


def _match_rows_numpy(arr, idx, sym):
    out = np.zeros(arr.shape[0], dtype=bool)
    for p in range(idx.shape[0]):
        out |= np.all(arr[:, idx[p]] == sym[p], axis=1)
    return out


def match_rows(arr: np.ndarray, idx: np.ndarray, sym: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Mask of rows of ``arr`` that contain some placement ``arr[r, idx[p]] == sym[p]``."""
    if arr.shape[0] == 0 or idx.shape[0] == 0:
        return np.zeros(arr.shape[0], dtype=bool)
    if (backend or BACKEND) == "numba":
        return _match_rows_numba(arr, idx.astype(np.int64), sym.astype(arr.dtype))
    return _match_rows_numpy(arr, idx, sym.astype(arr.dtype))


# --- sparse transfer sweeps -------------------------------------------------

@njit(cache=True)
def _sweep_numba(src, dst, w, v0, steps, lower, floor_exp):
    n = v0.shape[0]
    v = v0.copy()
    acc = 0
    tiny = math.ldexp(1.0, floor_exp)
    for _ in range(steps):
        nv = np.zeros(n)
        for e in range(src.shape[0]):
            nv[dst[e]] += v[src[e]] * w[e]
        m = 0.0
        for i in range(n):
            if nv[i] > m:
                m = nv[i]
        if m == 0.0:
            return nv, acc
        ex = math.frexp(m)[1]
        acc += ex
        for i in range(n):
            x = nv[i]
            if x > 0.0:
                x = math.ldexp(x, -ex)
                if x < tiny:
                    x = 0.0 if lower else tiny
            nv[i] = x
        v = nv
    return v, acc


def _sweep_numpy(src, dst, w, v0, steps, lower, floor_exp):
    n = v0.shape[0]
    v = v0.copy()
    acc = 0
    tiny = math.ldexp(1.0, floor_exp)
    for _ in range(steps):
        nv = np.bincount(dst, weights=v[src] * w, minlength=n)
        m = float(nv.max()) if n else 0.0
        if m == 0.0:
            return nv, acc
        ex = math.frexp(m)[1]
        acc += ex
        pos = nv > 0.0
        nv = np.ldexp(nv, -ex)
        small = pos & (nv < tiny)
        nv[small] = 0.0 if lower else tiny
        v = nv
    return v, acc


def transfer_sweep(src, dst, w, v0, steps: int, lower: bool, backend: str | None = None):
    """Apply ``v <- v M`` ``steps`` times for the sparse matrix (src, dst, w).

    Returns ``(v, e)`` with the true (float-evaluated) vector equal to ``v * 2**e``.
    Entries are renormalised by exact powers of two after every step.
    """
    src = np.ascontiguousarray(src, dtype=np.int64)
    dst = np.ascontiguousarray(dst, dtype=np.int64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    v0 = np.ascontiguousarray(v0, dtype=np.float64)
    if (backend or BACKEND) == "numba":
        return _sweep_numba(src, dst, w, v0, int(steps), bool(lower), FLOOR_EXP)
    return _sweep_numpy(src, dst, w, v0, int(steps), bool(lower), FLOOR_EXP)


# --- exhaustive weighted histogram (audit oracle) --------------------------

@njit(cache=True)
def _histogram_numba(base, nsites, anchors, table, fidx, fsym, lo_total, nbins):
    hist = np.zeros(nbins, dtype=np.int64)
    digits = np.zeros(nsites, dtype=np.int64)
    total = 1
    for _ in range(nsites):
        total *= base
    for it in range(total):
        if it > 0:
            pos = nsites - 1
            while True:
                digits[pos] += 1
                if digits[pos] < base:
                    break
                digits[pos] = 0
                pos -= 1
        bad = False
        for p in range(fidx.shape[0]):
            hit = True
            for k in range(fidx.shape[1]):
                j = fidx[p, k]
                if j < 0:
                    break
                if digits[j] != fsym[p, k]:
                    hit = False
                    break
            if hit:
                bad = True
                break
        if bad:
            continue
        acc = 0
        for a in range(anchors.shape[0]):
            code = 0
            for k in range(anchors.shape[1]):
                code = code * base + digits[anchors[a, k]]
            acc += table[code]
        hist[acc - lo_total] += 1
    return hist


def _histogram_numpy(base, nsites, anchors, table, fidx, fsym, lo_total, nbins):
    hist = np.zeros(nbins, dtype=np.int64)
    total = base**nsites
    chunk = 1 << 18
    powers = base ** np.arange(nsites - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        ids = np.arange(start, min(total, start + chunk), dtype=np.int64)
        digits = (ids[:, None] // powers[None, :]) % base
        keep = np.ones(len(ids), dtype=bool)
        for p in range(fidx.shape[0]):
            cols = fidx[p][fidx[p] >= 0]
            keep &= ~np.all(digits[:, cols] == fsym[p, : len(cols)], axis=1)
        digits = digits[keep]
        acc = np.zeros(len(digits), dtype=np.int64)
        for a in range(anchors.shape[0]):
            code = np.zeros(len(digits), dtype=np.int64)
            for k in range(anchors.shape[1]):
                code = code * base + digits[:, anchors[a, k]]
            acc += table[code]
        hist += np.bincount(acc - lo_total, minlength=nbins)
    return hist


def weighted_histogram(base: int, nsites: int, anchors: np.ndarray, table: np.ndarray,
                       fidx: np.ndarray, fsym: np.ndarray, backend: str | None = None):
    """Histogram of integer log-weights over every pattern in base**nsites.

    ``anchors[a]`` lists the site indices read by the a-th window, ``table``
    maps window codes to integer weights, and rows of ``fidx``/``fsym``
    (padded with -1) are forbidden placements.  Returns ``(hist, lo_total)``
    with ``hist[j]`` the number of admissible patterns of weight ``lo_total + j``.
    """
    anchors = np.ascontiguousarray(anchors, dtype=np.int64)
    if anchors.ndim == 1:
        anchors = anchors.reshape(-1, 1)
    table = np.ascontiguousarray(table, dtype=np.int64)
    if np.size(fidx) == 0:
        fidx = np.full((0, 1), -1, dtype=np.int64)
        fsym = np.zeros((0, 1), dtype=np.int64)
    else:
        fidx = np.ascontiguousarray(fidx, dtype=np.int64).reshape(len(fidx), -1)
        fsym = np.ascontiguousarray(fsym, dtype=np.int64).reshape(len(fsym), -1)
    n_anch = anchors.shape[0]
    lo_total = n_anch * int(table.min()) if n_anch else 0
    hi_total = n_anch * int(table.max()) if n_anch else 0
    nbins = hi_total - lo_total + 1
    if (backend or BACKEND) == "numba":
        hist = _histogram_numba(base, nsites, anchors, table, fidx, fsym, lo_total, nbins)
    else:
        hist = _histogram_numpy(base, nsites, anchors, table, fidx, fsym, lo_total, nbins)
    return hist, lo_total
