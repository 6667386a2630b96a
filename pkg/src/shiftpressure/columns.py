"""Strip contraction engine for box sums.

For a box B and a potential with bounding-box window W, the quantity

    Z(B) = sum over admissible u on R = B + W of exp(sum_{g in B} phi(u|g+W))

is the partition function of the higher-block recoded system, so it obeys
both the infimum rule and the strong-irreducibility gluing bound.  Columns
of R (height H) are swept left to right: states are blocks of c columns,
transitions append one column, and a window is charged when its rightmost
column is appended.  Sums run in float64 with an exact power-of-two
renormalisation and an a-posteriori relative error bound, then get
converted to dyadic intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import EmptySubshift, ResourceLimit
from .lattice import Box, Shape
from .potential import LocallyConstantPotential
from .rigor import DyadicInterval, ZERO, _exp_point, exp_weighted_sum, iv_pow, to_float_directed
from .subshift import Pattern, PatternGrower, SftSpec

DEFAULT_STATE_CAP = 400_000
DEFAULT_EDGE_CAP = 3_000_000
MAX_WEIGHT_EXP = 400


def _void(rows: np.ndarray) -> np.ndarray:
    rows = np.ascontiguousarray(rows)
    return rows.view(np.dtype((np.void, rows.shape[1] * rows.itemsize))).ravel()


@dataclass
class Geometry:
    """Box-sum data in a 2D x-major frame (1D inputs get a trivial y axis)."""

    alphabet_size: int
    forbidden: list[Pattern]          # normalised, 2D
    win_offsets: np.ndarray           # (L, 2), normalised to the window bounding box
    win_ext: tuple[int, int]          # bounding-box extents of the window
    table: np.ndarray                 # int64 numerators indexed by window code
    denom: int
    dim: int
    transposed: bool = False
    forb_ext: tuple[int, int] = (1, 1)

    @property
    def c(self) -> int:
        return max(self.win_ext[0], self.forb_ext[0], 2) - 1

    def spread(self) -> int:
        """Largest window extent minus one (the recoding adds this to the SI gap)."""
        return max(self.win_ext) - 1

    def to_original(self, site: tuple[int, int]) -> tuple[int, ...]:
        x, y = site
        if self.transposed:
            x, y = y, x
        return (x,) if self.dim == 1 else (x, y)


def _to2d(site: Sequence[int], transpose: bool) -> tuple[int, int]:
    if len(site) == 1:
        return (site[0], 0)
    x, y = site[0], site[1]
    return (y, x) if transpose else (x, y)


def make_geometry(spec: SftSpec, pot: LocallyConstantPotential, transpose: bool = False) -> Geometry:
    if spec.dim > 2:
        raise ValueError("strip engine handles dimensions 1 and 2")
    if pot.dim != spec.dim:
        raise ValueError("potential and spec dimensions differ")
    if spec.dim == 1:
        transpose = False
    forb = []
    fx = fy = 1
    for w in spec.forbidden:
        sites = [_to2d(s, transpose) for s in w.shape.sites]
        mx = min(s[0] for s in sites)
        my = min(s[1] for s in sites)
        mapping = {(s[0] - mx, s[1] - my): a for s, a in zip(sites, w.symbols)}
        p = Pattern.from_mapping(mapping, 2)
        fx = max(fx, max(s[0] for s in mapping) + 1)
        fy = max(fy, max(s[1] for s in mapping) + 1)
        forb.append(p)
    offs = np.array([_to2d(s, transpose) for s in pot.window.sites], dtype=np.int64)
    offs -= offs.min(axis=0)
    ext = (int(offs[:, 0].max()) + 1, int(offs[:, 1].max()) + 1)
    table, denom = pot.dense_numerators()
    if table.dtype == object:
        raise ResourceLimit("potential numerators too large for the strip engine")
    return Geometry(len(spec.alphabet), forb, offs, ext, table.astype(np.int64), denom, spec.dim,
                    transpose, (fx, fy))


def _window_codes(rows: np.ndarray, geom: Geometry, H: int, gx: int, gy: int) -> np.ndarray:
    k = geom.alphabet_size
    code = np.zeros(rows.shape[0], dtype=np.int64)
    for ox, oy in geom.win_offsets:
        code = code * k + rows[:, (gx + ox) * H + gy + oy]
    return code


def _anchor_weights(rows: np.ndarray, geom: Geometry, H: int, gxs: Sequence[int]) -> np.ndarray:
    total = np.zeros(rows.shape[0], dtype=np.int64)
    wy = geom.win_ext[1]
    for gx in gxs:
        for gy in range(H - wy + 1):
            total += geom.table[_window_codes(rows, geom, H, gx, gy)]
    return total


@dataclass
class StripSystem:
    geom: Geometry
    H: int
    c: int
    states: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    edge_w: np.ndarray
    state_w: np.ndarray
    _trim: tuple | None = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def n_edges(self) -> int:
        return self.src.shape[0]

    def trim_masks(self) -> tuple[np.ndarray, np.ndarray]:
        """(backward-infinite states, forward-infinite states)."""
        if self._trim is None:
            n = self.n_states
            back = np.ones(n, dtype=bool)
            while True:
                has_in = np.zeros(n, dtype=bool)
                ok = back[self.src]
                has_in[self.dst[ok]] = True
                new = back & has_in
                if new.sum() == back.sum():
                    break
                back = new
            fwd = np.ones(n, dtype=bool)
            while True:
                has_out = np.zeros(n, dtype=bool)
                ok = fwd[self.dst]
                has_out[self.src[ok]] = True
                new = fwd & has_out
                if new.sum() == fwd.sum():
                    break
                fwd = new
            self._trim = (back, fwd)
        return self._trim


def build_strip(geom: Geometry, H: int, state_cap: int = DEFAULT_STATE_CAP,
                edge_cap: int = DEFAULT_EDGE_CAP) -> StripSystem:
    if H < geom.win_ext[1]:
        raise ValueError("strip height below the window height")
    c = geom.c
    block = Box((0, 0), (c, H - 1))
    grower = PatternGrower(block, geom.forbidden, geom.alphabet_size)
    start = np.zeros((1, (c + 1) * H), dtype=np.uint8)
    states_full = grower.grow(start, 0, c * H, cap=state_cap)
    if states_full.shape[0] == 0:
        raise EmptySubshift("no locally admissible column block")
    blocks, parent = grower.grow(states_full, c * H, (c + 1) * H, cap=edge_cap,
                                 parents=np.arange(states_full.shape[0]))
    states = np.ascontiguousarray(states_full[:, : c * H])
    right = np.ascontiguousarray(blocks[:, H:])
    sv = _void(states)
    rv = _void(right)
    dst = np.searchsorted(sv, rv)
    if blocks.shape[0] and (dst.max() >= len(sv) or not np.all(sv[dst] == rv)):
        raise AssertionError("column successor missing from the state list")
    wx = geom.win_ext[0]
    edge_w = _anchor_weights(blocks, geom, H, [c - wx + 1])
    state_w = _anchor_weights(states_full, geom, H, range(0, c - wx + 1))
    return StripSystem(geom, H, c, states, parent.astype(np.int64), dst.astype(np.int64), edge_w, state_w)


def _float_bounds(x: DyadicInterval) -> tuple[float, float]:
    return to_float_directed(x.lo, False), to_float_directed(x.hi, True)


def _exp_table(values: np.ndarray, denom: int) -> tuple[np.ndarray, np.ndarray]:
    """Directed float bounds of exp(v / denom) for nonnegative integer v."""
    uniq, inv = np.unique(values, return_inverse=True)
    lo = np.empty(len(uniq))
    hi = np.empty(len(uniq))
    for i, v in enumerate(uniq):
        iv = _exp_point(Fraction(int(v), denom), 64)
        lo[i], hi[i] = _float_bounds(iv)
    return lo[inv], hi[inv]


def sweep_enclosure(src: np.ndarray, dst: np.ndarray, edge_w: np.ndarray, start_w: np.ndarray, denom: int,
                    steps: int, start_mask: np.ndarray | None = None, end_mask: np.ndarray | None = None,
                    prec: int = 96, backend: str | None = None) -> DyadicInterval:
    """Enclosure of sum over walks s_0 -> ... -> s_steps of
    exp((start_w[s_0] + sum of edge_w along the walk) / denom).

    The sweep runs in float64 with both rounding directions emulated by
    bounding the accumulated relative error by (1 +- 2^-53)^K.
    """
    n = start_w.shape[0]
    smask = np.ones(n, dtype=bool) if start_mask is None else start_mask
    emask = np.ones(n, dtype=bool) if end_mask is None else end_mask
    if steps == 0:
        sel = smask & emask
        if not sel.any():
            return DyadicInterval(ZERO, ZERO, prec)
        vals, counts = np.unique(start_w[sel], return_counts=True)
        return exp_weighted_sum(dict(zip(vals.tolist(), counts.tolist())), denom, prec)
    if not smask.any() or src.shape[0] == 0:
        return DyadicInterval(ZERO, ZERO, prec)
    emin = int(edge_w.min())
    smin = int(start_w[smask].min())
    ew = edge_w - emin
    sw = start_w - smin
    if ew.max() / denom > MAX_WEIGHT_EXP * math.log(2) or sw[smask].max() / denom > 600 * math.log(2):
        raise ResourceLimit("weight dynamic range too large for the float sweep")
    w_lo, w_hi = _exp_table(ew, denom)
    v_lo, v_hi = _exp_table(sw, denom)
    v_lo = np.where(smask, v_lo, 0.0)
    v_hi = np.where(smask, v_hi, 0.0)
    # normalise the start vector by an exact power of two
    e0 = math.frexp(float(v_hi.max()))[1]
    v_lo = np.ldexp(v_lo, -e0)
    v_hi = np.ldexp(v_hi, -e0)
    tiny = math.ldexp(1.0, kernels.FLOOR_EXP)
    v_lo[v_lo < tiny] = 0.0
    v_hi[(v_hi > 0) & (v_hi < tiny)] = tiny
    fin_lo, ex_lo = kernels.transfer_sweep(src, dst, w_lo, v_lo, steps, True, backend)
    fin_hi, ex_hi = kernels.transfer_sweep(src, dst, w_hi, v_hi, steps, False, backend)
    tot_lo = math.fsum(fin_lo[emask])
    tot_hi = math.fsum(fin_hi[emask])
    indeg = int(np.bincount(dst, minlength=n).max())
    K = steps * (indeg + 1) + n + 2
    f_up = iv_pow(DyadicInterval.point(Fraction(2**53 + 1, 2**53), prec), K).hi
    f_dn = iv_pow(DyadicInterval.point(Fraction(2**53 - 1, 2**53), prec), K).lo
    lo = DyadicInterval.point(tot_lo, prec).shift_exp(ex_lo + e0) / DyadicInterval(f_up, f_up, prec)
    hi = DyadicInterval.point(tot_hi, prec).shift_exp(ex_hi + e0) / DyadicInterval(f_dn, f_dn, prec)
    z = DyadicInterval(lo.lo, hi.hi, prec)
    offset = smin + steps * emin
    if offset:
        z = z * _exp_point(Fraction(offset, denom), prec + 8)
    return z


def strip_sum(system: StripSystem, width: int, start_mask: np.ndarray | None = None,
              end_mask: np.ndarray | None = None, prec: int = 96, backend: str | None = None) -> DyadicInterval:
    """Enclosure of the weighted count of admissible H x width strips."""
    if width < system.c:
        raise ValueError("strip narrower than a state")
    return sweep_enclosure(system.src, system.dst, system.edge_w, system.state_w, system.geom.denom,
                           width - system.c, start_mask, end_mask, prec, backend)


def enumerate_sum(geom: Geometry, Rx: int, Ry: int, mode: str = "local",
                  keep: Callable[[np.ndarray], np.ndarray] | None = None, cap: int = 2_000_000,
                  prec: int = 96) -> DyadicInterval:
    """Direct enumeration over locally admissible patterns on the Rx x Ry rectangle.

    ``keep`` filters rows (e.g. a language provider); rows are x-major.
    """
    H = Ry
    rect = Box((0, 0), (Rx - 1, Ry - 1))
    rows = PatternGrower(rect, geom.forbidden, geom.alphabet_size).all(cap=cap)
    if keep is not None and rows.shape[0]:
        rows = rows[keep(rows)]
    if rows.shape[0] == 0:
        return DyadicInterval(ZERO, ZERO, prec)
    wx, wy = geom.win_ext
    w = _anchor_weights(rows, geom, H, range(0, Rx - wx + 1))
    vals, counts = np.unique(w, return_counts=True)
    return exp_weighted_sum(dict(zip(vals.tolist(), counts.tolist())), geom.denom, prec)


def rows_to_patterns(rows: np.ndarray, geom: Geometry, Rx: int, Ry: int) -> list[Pattern]:
    sites = [geom.to_original((x, y)) for x in range(Rx) for y in range(Ry)]
    shape = Shape(sites, geom.dim)
    order = [shape.index(s) for s in sites]
    inv = np.argsort(order)
    return [Pattern(shape, row[inv].tolist()) for row in rows]
