"""Higher-block recoding, column transfer matrices for Z^2 full shifts, and the
1D Perron-root pressure engine."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .columns import build_strip, make_geometry, sweep_enclosure
from .errors import DimensionMismatch, EmptySubshift, ResourceLimit
from .language import FullShift
from .lattice import Box, Shape
from .potential import LocallyConstantPotential, add_constant, sup_norm
from .pressure import DEFAULT_BUDGET, BoxSummer, Budget, CertifiedEstimate, Method, _eta, window_spread
from .rigor import (DEFAULT_PREC, ZERO, Dyadic, DyadicInterval, IntervalMatrix, _exp_point, exp_weighted_sum,
                    iv_log, iv_matmul, iv_matpow)
from .subshift import Alphabet, Pattern, SftSpec, la_array, occurrence_offsets


@dataclass
class RecodedSystem:
    """Nearest-neighbour recoding over a rectangular block window.

    ``blocks[i]`` holds the original symbols of block i in the window box's
    site order; ``adjacency[axis]`` is a boolean matrix, True when b may sit
    one step after a along that axis.
    """

    spec: SftSpec
    window: Box
    blocks: np.ndarray
    block_alphabet: Alphabet
    adjacency: tuple[np.ndarray, ...]
    weights: tuple[Fraction, ...]
    source: LocallyConstantPotential

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def window_radius(self) -> int:
        return max(self.window.sides) - 1

    @property
    def size(self) -> int:
        return self.blocks.shape[0]

    def lift(self, i: int) -> Pattern:
        return Pattern(self.window.shape, self.blocks[i].tolist())

    @property
    def potential(self) -> LocallyConstantPotential:
        origin = Shape([(0,) * self.dim], self.dim)
        return LocallyConstantPotential(self.block_alphabet, origin,
                                        {(i,): w for i, w in enumerate(self.weights)}, 0)

    def n_legal_pairs(self, axis: int) -> int:
        return int(self.adjacency[axis].sum())


def _recode_window(spec: SftSpec, pot: LocallyConstantPotential) -> Box:
    lo, hi = pot.window.bounds()
    lo, hi = list(lo), list(hi)
    d = spec.dim
    for w in spec.forbidden:
        flo, fhi = w.normalized().shape.bounds()
        ext = [b - a for a, b in zip(flo, fhi)]
        side = [b - a for a, b in zip(lo, hi)]
        # adjacency sees the window widened by one along a single axis
        over = [i for i in range(d) if ext[i] > side[i]]
        if len(over) > 1 or (over and ext[over[0]] > side[over[0]] + 1):
            for i in range(d):
                hi[i] = max(hi[i], lo[i] + ext[i])
    return Box(tuple(lo), tuple(hi))


def higher_block_recode(spec: SftSpec, pot: LocallyConstantPotential, cap: int = 1 << 20) -> RecodedSystem:
    if pot.dim != spec.dim:
        raise DimensionMismatch("potential and spec dimensions differ")
    d = spec.dim
    k = len(spec.alphabet)
    win = _recode_window(spec, pot)
    blocks = la_array(win, spec.forbidden, k, cap=cap)
    if blocks.shape[0] == 0:
        raise EmptySubshift("no locally admissible block")
    wsh = win.shape
    widx = [wsh.index(s) for s in pot.window.sites]
    weights = tuple(pot.value(row[widx].tolist()) for row in blocks)
    adj = []
    for axis in range(d):
        step = tuple(1 if i == axis else 0 for i in range(d))
        union_hi = tuple(h + s for h, s in zip(win.hi, step))
        union = Box(win.lo, union_hi).shape
        a_idx = [union.index(s) for s in wsh.sites]
        b_idx = [union.index(tuple(x + y for x, y in zip(s, step))) for s in wsh.sites]
        # overlap agreement: sites shared by a and the shifted b
        shared = [(i, wsh.index(tuple(x - y for x, y in zip(s, step))))
                  for i, s in enumerate(wsh.sites) if tuple(x - y for x, y in zip(s, step)) in win]
        if shared:
            ia, ib = map(list, zip(*shared))
            agree = np.all(blocks[:, None, ia] == blocks[None, :, ib], axis=2)
        else:
            agree = np.ones((len(blocks), len(blocks)), dtype=bool)
        ok = agree.copy()
        pairs = np.argwhere(agree)
        if spec.forbidden and len(pairs):
            rows = np.zeros((len(pairs), len(union)), dtype=np.uint8)
            rows[:, a_idx] = blocks[pairs[:, 0]]
            rows[:, b_idx] = blocks[pairs[:, 1]]
            bad = np.zeros(len(pairs), dtype=bool)
            for w in spec.forbidden:
                for g in occurrence_offsets(w, union):
                    idx = np.array([[union.index(tuple(x + y for x, y in zip(s, g))) for s in w.shape.sites]])
                    bad |= kernels.match_rows(rows, idx, np.array([w.symbols], dtype=np.uint8))
            ok[pairs[bad, 0], pairs[bad, 1]] = False
        adj.append(ok)
    names = tuple("".join(spec.alphabet.symbols[s] for s in row) if k <= 36 and all(
        len(t) == 1 for t in spec.alphabet.symbols) else "b%d" % i for i, row in enumerate(blocks))
    if len(set(names)) != len(names):
        names = tuple(f"b{i}" for i in range(len(blocks)))
    return RecodedSystem(spec, win, blocks, Alphabet(names), tuple(adj), weights, pot)


# --- columns of recoded symbols --------------------------------------------

def legal_columns(rs: RecodedSystem, height: int, cap: int) -> np.ndarray:
    """Rows = vertically legal sequences of ``height`` block indices (bottom to top)."""
    if rs.dim != 2:
        raise ValueError("columns are defined for dimension 2")
    vert = rs.adjacency[1]
    cols = np.arange(rs.size, dtype=np.int64)[:, None]
    for _ in range(height - 1):
        a, b = np.nonzero(vert[cols[:, -1]])
        cols = np.hstack([cols[a], b[:, None]])
        if cols.shape[0] > cap:
            raise ResourceLimit(f"more than {cap} legal columns", projected=int(cols.shape[0]))
    return cols


def _column_pairs(rs: RecodedSystem, cols: np.ndarray, cap: int) -> tuple[np.ndarray, np.ndarray]:
    """(src, dst) indices of horizontally legal column pairs, built row by row."""
    horiz, vert = rs.adjacency[0], rs.adjacency[1]
    n = cols.shape[0]
    # index columns by their tuple so successors can be grown one row at a time
    src = np.arange(n, dtype=np.int64)
    partial = np.zeros((n, 0), dtype=np.int64)
    for r in range(cols.shape[1]):
        a, b = np.nonzero(horiz[cols[src, r]])
        src = src[a]
        partial = np.hstack([partial[a], b[:, None]])
        if r:
            ok = vert[partial[:, r - 1], partial[:, r]]
            src, partial = src[ok], partial[ok]
        if src.shape[0] > cap:
            raise ResourceLimit(f"more than {cap} legal column pairs", projected=int(src.shape[0]))
    # keep only successors that are themselves legal columns
    key = np.ascontiguousarray(cols).view(np.dtype((np.void, cols.shape[1] * 8))).ravel()
    order = np.argsort(key)
    pk = np.ascontiguousarray(partial).view(np.dtype((np.void, partial.shape[1] * 8))).ravel()
    pos = np.searchsorted(key[order], pk)
    pos = np.minimum(pos, n - 1)
    found = key[order][pos] == pk
    return src[found], order[pos[found]]


def _column_weights(rs: RecodedSystem, cols: np.ndarray) -> tuple[np.ndarray, int]:
    denom = 1
    for w in rs.weights:
        denom = denom * w.denominator // math.gcd(denom, w.denominator)
    num = np.array([int(w * denom) for w in rs.weights], dtype=np.int64)
    return num[cols].sum(axis=1), denom


def transfer_matrix_b(m_param: int, rs: RecodedSystem, prec: int = DEFAULT_PREC,
                      max_dim: int = 2048) -> IntervalMatrix:
    """B(M): rows and columns indexed by legal columns of height 2M+1; entry
    exp(sum of the single-site weights down column a) when (a, b) is legal, else 0."""
    if m_param < 0:
        raise ValueError("M must be nonnegative")
    cols = legal_columns(rs, 2 * m_param + 1, max_dim)
    n = cols.shape[0]
    src, dst = _column_pairs(rs, cols, n * n)
    wnum, denom = _column_weights(rs, cols)
    zero = DyadicInterval(ZERO, ZERO, prec)
    cache: dict[int, DyadicInterval] = {}
    rows = [[zero] * n for _ in range(n)]
    for a, b in zip(src.tolist(), dst.tolist()):
        w = int(wnum[a])
        if w not in cache:
            cache[w] = _exp_point(Fraction(w, denom), prec)
        rows[a][b] = cache[w]
    labels = [tuple(rs.block_alphabet.symbols[i] for i in c) for c in cols]
    return IntervalMatrix.from_intervals(rows, prec, labels)


def _b_power_sum(rs: RecodedSystem, m_param: int, prec: int, budget: Budget) -> DyadicInterval:
    """Sum of all entries of B(M)^(2M+1), computed on B itself."""
    height = 2 * m_param + 1
    cols = legal_columns(rs, height, budget.max_states)
    if cols.shape[0] <= 48:
        b = transfer_matrix_b(m_param, rs, prec, budget.max_states)
        return iv_matpow(b, height).entry_sum()
    src, dst = _column_pairs(rs, cols, budget.max_edges)
    wnum, denom = _column_weights(rs, cols)
    return sweep_enclosure(src, dst, wnum[src], np.zeros(cols.shape[0], dtype=np.int64), denom, height,
                           prec=prec)


def _full_shift_check(rs: RecodedSystem) -> None:
    if rs.spec.forbidden:
        raise ValueError("this engine needs a full shift")
    if rs.dim != 2:
        raise ValueError("this engine needs dimension 2")


def full_shift_pressure_2d(pot: LocallyConstantPotential, k: int, m_param: int | None = None,
                           prec: int | None = None, budget: Budget = DEFAULT_BUDGET) -> CertifiedEstimate:
    """Pressure of a locally constant potential on the Z^2 full shift to within 2^-k.

    Z over the (2M+1)^2 box is the entry sum of B(M)^(2M+1) divided by the
    |A|^(2M + window height) free extensions of the last column.  With
    phi shifted to be nonnegative and rho the window spread, gluing boxes
    rho apart and the infimum rule give
    log Z / (2M+1+rho)^2 <= P <= log Z / (2M+1)^2.
    """
    if pot.dim != 2:
        raise ValueError("full_shift_pressure_2d needs a 2D potential")
    if k < 1:
        raise ValueError("k must be positive")
    t0 = time.perf_counter()
    prec = prec or max(DEFAULT_PREC, k + 64)
    spec = SftSpec.full_shift(pot.alphabet, 2)
    c = sup_norm(pot)
    shifted = add_constant(pot, c)
    rho = window_spread(pot)
    eta = _eta(spec, shifted, k)
    M = m_param if m_param is not None else max(math.ceil(2 * rho / eta) - rho, 0)
    side = 2 * M + 1
    params = {"eta": eta, "M": M, "rho": rho, "k": k, "precision": prec}
    rs = higher_block_recode(spec, shifted)
    wy = rs.window.sides[1]
    A = len(pot.alphabet)
    try:
        total = _b_power_sum(rs, M, prec, budget)
        params["evaluation"] = "matrix"
        z = total / DyadicInterval.point(A ** (2 * M + wy), prec)
    except ResourceLimit:
        # same quantity through the original-column strip sweep
        z = BoxSummer(spec, shifted, FullShift(spec), prec, budget).exact((side, side))
        params["evaluation"] = "strip"
    logz = iv_log(z, prec)
    upper = logz / side**2
    lower = logz / (side + rho) ** 2
    value = DyadicInterval(lower.lo, upper.hi, prec) - c
    params["width_target_met"] = value.width_float() <= 2.0**-k
    return CertifiedEstimate(value, Method.TransferMatrix, params, frozenset(), time.perf_counter() - t0)


def _brute_region_sum(rs: RecodedSystem, width: int, height: int, anchors_w: int, anchors_h: int,
                      prec: int, max_sites: int = 27) -> DyadicInterval:
    """Exhaustive weighted count over original patterns on a width x height rectangle,
    charging the window at anchors [0, anchors_w) x [0, anchors_h)."""
    spec = rs.spec
    k = len(spec.alphabet)
    nsites = width * height
    if nsites > max_sites:
        raise ResourceLimit(f"brute force over {k}^{nsites} patterns exceeds the budget",
                            projected=k**nsites)
    rect = Box((0, 0), (width - 1, height - 1)).shape
    pot = rs.source
    table, denom = pot.dense_numerators()
    wlo = pot.window.bounds()[0]
    anchors = []
    for gx in range(anchors_w):
        for gy in range(anchors_h):
            anchors.append([rect.index((gx + s[0] - wlo[0], gy + s[1] - wlo[1])) for s in pot.window.sites])
    fidx, fsym = [], []
    for w in spec.forbidden:
        for g in occurrence_offsets(w, rect):
            fidx.append([rect.index((s[0] + g[0], s[1] + g[1])) for s in w.shape.sites])
            fsym.append(list(w.symbols))
    width_f = max((len(r) for r in fidx), default=1)
    fi = np.full((len(fidx), width_f), -1, dtype=np.int64)
    fs = np.zeros((len(fidx), width_f), dtype=np.int64)
    for i, (a, b) in enumerate(zip(fidx, fsym)):
        fi[i, : len(a)] = a
        fs[i, : len(b)] = b
    span = len(anchors) * (int(table.max()) - int(table.min()))
    if span > 50_000_000:
        raise ResourceLimit("weight histogram too wide for brute force")
    hist, lo_total = kernels.weighted_histogram(k, nsites, np.array(anchors), table, fi, fs)
    nz = np.nonzero(hist)[0]
    return exp_weighted_sum({int(j) + lo_total: int(hist[j]) for j in nz}, denom, prec)


def transfer_sum_identity_check(rs: RecodedSystem, m_param: int, prec: int = DEFAULT_PREC,
                                budget: Budget = DEFAULT_BUDGET) -> tuple[DyadicInterval, DyadicInterval]:
    """(entry sum of B(M)^(2M+1), brute-force sum over patterns on [-M, M+1] x [-M, M]).

    The right side sums, over original patterns on the region covered by
    the recoded pattern, the weights of the (2M+1)^2 anchored windows.  For
    full shifts the last column of the region is free and unweighted, so it
    is factored out as |A|^height when the full region is too big.
    """
    if rs.dim != 2:
        raise ValueError("identity check is two-dimensional")
    lhs = _b_power_sum(rs, m_param, prec, budget)
    bx, by = rs.window.sides
    side = 2 * m_param + 1
    width = side + 1 + bx - 1
    height = side + by - 1
    A = len(rs.spec.alphabet)
    try:
        rhs = _brute_region_sum(rs, width, height, side, side, prec)
    except ResourceLimit:
        if rs.spec.forbidden:
            raise
        rhs = _brute_region_sum(rs, width - 1, height, side, side, prec) * A**height
    return lhs, rhs


# --- 1D Perron engine ---------------------------------------------------------

def perron_pressure_1d(spec: SftSpec, pot: LocallyConstantPotential, target_width=Fraction(1, 10**9),
                       prec: int = 128, max_squarings: int = 64, budget: Budget = DEFAULT_BUDGET) -> CertifiedEstimate:
    """Pressure of a 1D SFT as the log spectral radius of the weighted transition matrix.

    States are blocks of c symbols after trimming to the essential graph;
    the matrix is squared repeatedly and the row sums of each power bound
    the Perron root from both sides.
    """
    if spec.dim != 1 or pot.dim != 1:
        raise ValueError("perron_pressure_1d needs a one-dimensional spec and potential")
    t0 = time.perf_counter()
    geom = make_geometry(spec, pot)
    system = build_strip(geom, 1, budget.max_states, budget.max_edges)
    back, fwd = system.trim_masks()
    keep = back & fwd
    if not keep.any():
        raise EmptySubshift("the subshift is empty")
    n = int(keep.sum())
    if n > budget.max_matrix_dim:
        raise ResourceLimit(f"transition matrix of dimension {n} exceeds the budget", projected=n)
    new_id = -np.ones(system.n_states, dtype=np.int64)
    new_id[keep] = np.arange(n)
    sel = keep[system.src] & keep[system.dst]
    src, dst, w = new_id[system.src[sel]], new_id[system.dst[sel]], system.edge_w[sel]
    wmax = int(w.max())
    denom = geom.denom
    # entries share the block exponent of the largest one; keep enough bits
    # that every row's largest entry survives, or a row sum flushes to zero
    row_max = np.full(n, np.iinfo(np.int64).min, dtype=np.int64)
    np.maximum.at(row_max, src, w)
    prec += math.ceil((wmax - int(row_max.min())) / denom * 1.4427) + 16
    zero = DyadicInterval(ZERO, ZERO, prec)
    rows = [[zero] * n for _ in range(n)]
    cache: dict[int, DyadicInterval] = {}
    for a, b, x in zip(src.tolist(), dst.tolist(), w.tolist()):
        if x not in cache:
            cache[x] = _exp_point(Fraction(x - wmax, denom), prec)
        rows[a][b] = cache[x]
    mat = IntervalMatrix.from_intervals(rows, prec)
    target = DyadicInterval.point(Fraction(target_width), prec).hi
    best_hi = None
    best_lo = None
    power = 1
    downgraded = False
    for j in range(max_squarings + 1):
        lo_s, le, hi_s, he = mat.row_sums()
        hmax, lmin = max(hi_s), min(lo_s)
        up = iv_log(DyadicInterval.point(Dyadic(hmax, he), prec), prec).shift_exp(-j).hi
        best_hi = up if best_hi is None or up.cmp(best_hi) < 0 else best_hi
        if lmin > 0:
            down = iv_log(DyadicInterval.point(Dyadic(lmin, le), prec), prec).shift_exp(-j).lo
            best_lo = down if best_lo is None or down.cmp(best_lo) > 0 else best_lo
        if best_lo is not None and best_hi.cmp(best_lo) >= 0:
            width = DyadicInterval(best_lo, best_hi, prec).width()
            if width.cmp(target) <= 0:
                break
        if j == max_squarings:
            break
        mat = iv_matmul(mat, mat)
        power *= 2
    shift = DyadicInterval.point(Fraction(wmax, denom), prec)
    params = {"power": power, "states": n, "precision": prec, "target_width": Fraction(target_width)}
    if best_lo is None:
        downgraded = True
        params["diagnostic"] = "some power keeps a zero row: transition structure not primitive"
        value = DyadicInterval(None, (DyadicInterval(best_hi, best_hi, prec) + shift).hi, prec)
        return CertifiedEstimate(value, Method.UpperOnly, params, frozenset(), time.perf_counter() - t0)
    value = DyadicInterval(best_lo, best_hi, prec) + shift
    params["downgraded"] = downgraded
    return CertifiedEstimate(value, Method.PerronRoot1D, params, frozenset(), time.perf_counter() - t0)
