"""Partition functions, infimum-rule upper bounds and certified pressure."""
from __future__ import annotations

import enum
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .columns import (DEFAULT_EDGE_CAP, DEFAULT_STATE_CAP, Geometry, StripSystem, build_strip, make_geometry,
                      strip_sum)
from .errors import EmptySubshift, ResourceLimit
from .language import ExtendabilityParams, LanguageProvider, default_provider, extendable_array
from .lattice import Shape, ShapeLike, as_shape, box_from_sides, growth_set, minkowski_sum
from .potential import (LocallyConstantPotential, PotentialOracle, add_constant, sup_norm,
                        upper_regularization)
from .rigor import DEFAULT_PREC, ONE, ZERO, DyadicInterval, exp_weighted_sum, iv_log, iv_log_int
from .subshift import DEFAULT_PATTERN_CAP, ForbiddenEnumeration, Pattern, SftSpec, la_array

log = logging.getLogger(__name__)


class Method(enum.Enum):
    BoxSandwich = "BoxSandwich"
    TransferMatrix = "TransferMatrix"
    PerronRoot1D = "PerronRoot1D"
    UpperOnly = "UpperOnly"


@dataclass
class CertifiedEstimate:
    value: DyadicInterval
    method: Method
    params: dict = field(default_factory=dict)
    conditional_on: frozenset = frozenset()
    elapsed: float = 0.0

    @property
    def upper_only(self) -> bool:
        return self.value.lo is None

    def __str__(self) -> str:
        return f"{self.value.decimal()} [{self.method.value}]"


@dataclass(frozen=True)
class UpperStep:
    index: int
    n: int
    k: int
    t: int
    s: int
    raw: DyadicInterval
    value: DyadicInterval


class UpperSequence:
    """Append-only prefix of a nonincreasing sequence of upper bounds.

    ``value`` of each step is the running minimum; ``raw`` is what the step
    produced on its own.  Steps that hit a budget are recorded in ``gaps``.
    """

    def __init__(self):
        self._steps: list[UpperStep] = []
        self.gaps: list[tuple[int, str]] = []
        self._lock = threading.Lock()

    def append(self, raw: DyadicInterval, n: int = 0, k: int = 0, t: int = 0, s: int = 0) -> UpperStep:
        with self._lock:
            value = raw
            if self._steps:
                best = self._steps[-1].value
                if best.hi is not None and (raw.hi is None or best.hi.cmp(raw.hi) < 0):
                    value = best
            step = UpperStep(len(self._steps) + len(self.gaps), n, k, t, s, raw, value)
            self._steps.append(step)
            return step

    def skip(self, reason: str) -> None:
        with self._lock:
            self.gaps.append((len(self._steps) + len(self.gaps), reason))

    def __len__(self) -> int:
        return len(self._steps)

    def __iter__(self) -> Iterator[UpperStep]:
        return iter(list(self._steps))

    def __getitem__(self, i) -> UpperStep:
        return self._steps[i]

    def hi_values(self) -> list[float]:
        return [s.value.upper_float() for s in self._steps]

    @property
    def last(self) -> UpperStep | None:
        return self._steps[-1] if self._steps else None


@dataclass(frozen=True)
class Budget:
    max_patterns: int = DEFAULT_PATTERN_CAP
    max_states: int = DEFAULT_STATE_CAP
    max_edges: int = DEFAULT_EDGE_CAP
    max_matrix_dim: int = 2048

    def __post_init__(self):
        if min(self.max_patterns, self.max_states, self.max_edges, self.max_matrix_dim) <= 0:
            raise ValueError("budgets must be positive")


DEFAULT_BUDGET = Budget()


def window_spread(pot: LocallyConstantPotential) -> int:
    lo, hi = pot.window.bounds()
    return max(b - a for a, b in zip(lo, hi))


def effective_gap(lang: LanguageProvider, pot: LocallyConstantPotential) -> int | None:
    """SI gap of the system recoded over the potential window."""
    r = lang.si_gap
    return None if r is None else r + window_spread(pot)


# --- enumeration path -------------------------------------------------------

def _language_rows(region: Shape, spec: SftSpec, lang: LanguageProvider, cap: int) -> np.ndarray:
    rows = la_array(region, spec.forbidden, len(spec.alphabet), cap=cap)
    if lang.box_mode() != "local" and rows.shape[0]:
        keep = np.fromiter((lang.contains(Pattern(region, r.tolist())) for r in rows), dtype=bool,
                           count=rows.shape[0])
        rows = rows[keep]
    return rows


def _ergodic_numerators(rows: np.ndarray, region: Shape, f: Shape, pot: LocallyConstantPotential,
                        denom: int | None = None) -> tuple[np.ndarray, int]:
    table, d = pot.dense_numerators(denom)
    k = len(pot.alphabet)
    total = np.zeros(rows.shape[0], dtype=table.dtype)
    for g in f.sites:
        idx = [region.index(tuple(a + b for a, b in zip(g, w))) for w in pot.window.sites]
        code = np.zeros(rows.shape[0], dtype=np.int64)
        for i in idx:
            code = code * k + rows[:, i]
        total = total + table[code]
    return total, d


def _hist_sum(weights: np.ndarray, denom: int, prec: int) -> DyadicInterval:
    if weights.shape[0] == 0:
        return DyadicInterval(ZERO, ZERO, prec)
    vals, counts = np.unique(weights, return_counts=True)
    return exp_weighted_sum({int(v): int(c) for v, c in zip(vals, counts)}, denom, prec)


def _group_max(rows: np.ndarray, cols: Sequence[int], weights: np.ndarray) -> np.ndarray:
    """Max of ``weights`` over rows sharing the same values on ``cols``."""
    if rows.shape[0] == 0:
        return weights[:0]
    keys = np.ascontiguousarray(rows[:, list(cols)])
    if keys.shape[1] == 0:
        return np.array([weights.max()], dtype=weights.dtype)
    v = keys.view(np.dtype((np.void, keys.shape[1]))).ravel()
    order = np.lexsort((weights, v)) if weights.dtype != object else np.argsort(v, kind="stable")
    v_sorted = v[order]
    starts = np.flatnonzero(np.r_[True, v_sorted[1:] != v_sorted[:-1]])
    if weights.dtype == object:
        w_sorted = weights[order]
        ends = np.r_[starts[1:], len(order)]
        return np.array([max(w_sorted[a:b]) for a, b in zip(starts, ends)], dtype=object)
    return np.maximum.reduceat(weights[order], starts)


# --- box sums ---------------------------------------------------------------

class BoxSummer:
    """Z over boxes for the system recoded over the potential window.

    ``enclose(sides)`` returns an interval [lo, hi] with hi >= Z(B) always
    and lo <= Z(B) whenever ``lower_valid``; ``how`` tells whether it is an
    exact enclosure ('strip' / 'enum') or a strip-product bound ('blocks').
    """

    def __init__(self, spec: SftSpec, pot: LocallyConstantPotential, lang: LanguageProvider,
                 prec: int = DEFAULT_PREC, budget: Budget = DEFAULT_BUDGET):
        if pot.dim != spec.dim:
            raise ValueError("potential and spec dimensions differ")
        self.spec = spec
        self.pot = pot
        self.lang = lang
        self.prec = prec
        self.budget = budget
        self.mode = lang.box_mode()
        self._geoms: dict[bool, Geometry] = {}
        self._systems: dict[tuple[bool, int], StripSystem | None] = {}
        self.strip_height = None

    def _geom(self, transposed: bool) -> Geometry:
        if transposed not in self._geoms:
            self._geoms[transposed] = make_geometry(self.spec, self.pot, transposed)
        return self._geoms[transposed]

    def _system(self, transposed: bool, H: int) -> StripSystem | None:
        key = (transposed, H)
        if key not in self._systems:
            try:
                self._systems[key] = build_strip(self._geom(transposed), H, self.budget.max_states,
                                                 self.budget.max_edges)
            except ResourceLimit:
                self._systems[key] = None
        return self._systems[key]

    def _ext(self) -> tuple[int, ...]:
        lo, hi = self.pot.window.bounds()
        return tuple(b - a for a, b in zip(lo, hi))

    def enumerate(self, sides: Sequence[int]) -> DyadicInterval:
        b = box_from_sides(sides).shape
        region = minkowski_sum(b, self.pot.window)
        rows = _language_rows(region, self.spec, self.lang, self.budget.max_patterns)
        w, d = _ergodic_numerators(rows, region, b, self.pot)
        return _hist_sum(w, d, self.prec)

    def enclose(self, sides: Sequence[int], lower_valid: bool = True) -> tuple[DyadicInterval, str]:
        sides = tuple(int(s) for s in sides)
        d = self.spec.dim
        if len(sides) != d or min(sides) < 1:
            raise ValueError("bad box sides")
        ext = self._ext()
        R = tuple(s + e for s, e in zip(sides, ext))
        if d == 1 and self.mode in ("local", "trimmed"):
            system = self._system(False, 1)
            if system is None:
                raise ResourceLimit("1D column system exceeds the state budget")
            self.strip_height = 1
            return self._sum_1d(system, R[0]), "strip"
        if d == 2 and self.mode == "local":
            return self._sum_2d(sides, R, lower_valid)
        return self.enumerate(sides), "enum"

    def exact(self, sides: Sequence[int]) -> DyadicInterval:
        z, how = self.enclose(sides)
        if how == "blocks":
            raise ResourceLimit("box too large for an exact strip or enumeration sum")
        return z

    def _sum_1d(self, system: StripSystem, width: int) -> DyadicInterval:
        if self.mode == "local":
            if width >= system.c:
                return strip_sum(system, width, prec=self.prec)
            rows = np.unique(system.states[:, :width], axis=0)
        else:
            back, fwd = system.trim_masks()
            if width >= system.c:
                return strip_sum(system, width, back, fwd, prec=self.prec)
            rows = np.unique(system.states[back & fwd][:, :width], axis=0)
        # shorter than one state: weigh the distinct prefixes directly
        region = Shape([(i,) for i in range(width)], 1)
        f = Shape([(i,) for i in range(width - self._ext()[0])], 1)
        lo = self.pot.window.bounds()[0][0]
        w, dd = _ergodic_numerators(rows, region, f.translate((-lo,)), self.pot)
        return _hist_sum(w, dd, self.prec)

    def _sum_2d(self, sides, R, lower_valid: bool) -> tuple[DyadicInterval, str]:
        transposed = R[1] > R[0]
        if transposed:
            sides = (sides[1], sides[0])
            R = (R[1], R[0])
        width, height = R
        system = self._system(transposed, height)
        if system is not None:
            self.strip_height = height
            return strip_sum(system, width, prec=self.prec), "strip"
        geom = self._geom(transposed)
        wy = geom.win_ext[1]
        hmax = None
        for H in range(wy, height):
            if self._system(transposed, H) is None:
                break
            hmax = H
        if hmax is None:
            raise ResourceLimit("no strip height fits the budget")
        self.strip_height = hmax
        bmax = hmax - wy + 1
        cache: dict[int, DyadicInterval] = {}

        def piece(b: int) -> DyadicInterval:
            if b not in cache:
                cache[b] = strip_sum(self._system(transposed, b + wy - 1), width, prec=self.prec)
            return cache[b]

        By = sides[1]
        # upper: cut the box rows into consecutive strips
        hi = DyadicInterval(ONE, ONE, self.prec)
        q, rem = divmod(By, bmax)
        for b in [bmax] * q + ([rem] if rem else []):
            hi = hi * piece(b)
        lo_end = ZERO
        gap = effective_gap(self.lang, self.pot)
        if lower_valid and self.lang.exact and gap is not None and self.pot.min_value() >= 0:
            # lower: full-width strips separated by the gluing gap
            lo_iv = DyadicInterval(ONE, ONE, self.prec)
            used = 0
            first = True
            while True:
                need = 0 if first else gap
                avail = By - used - need
                if avail < 1:
                    break
                b = min(bmax, avail)
                lo_iv = lo_iv * piece(b)
                used += need + b
                first = False
            lo_end = lo_iv.lo
        return DyadicInterval(lo_end, hi.hi, self.prec), "blocks"


# --- public operations --------------------------------------------------------

def _check(f: Shape, spec: SftSpec, pot: LocallyConstantPotential) -> None:
    if len(f) == 0:
        raise ValueError("shape must be nonempty")
    if f.dim != spec.dim or pot.dim != spec.dim:
        raise ValueError("shape, spec and potential dimensions differ")


def partition_function(f: ShapeLike, spec: SftSpec, pot: LocallyConstantPotential,
                       lang: LanguageProvider | None = None, prec: int = DEFAULT_PREC,
                       budget: Budget = DEFAULT_BUDGET) -> DyadicInterval:
    """Z_F: sum over language patterns w on f of the max ergodic sum over extensions of w
    to f + window.  For over-approximating providers this bounds Z_F from above."""
    f = as_shape(f)
    _check(f, spec, pot)
    lang = lang or default_provider(spec)
    if pot.is_single_site():
        # no extension needed: the window is the origin alone
        if f.is_box() and spec.dim <= 2:
            return BoxSummer(spec, pot, lang, prec, budget).exact(f.bounding_box().sides)
        rows = _language_rows(f, spec, lang, budget.max_patterns)
        w, d = _ergodic_numerators(rows, f, f, pot)
        return _hist_sum(w, d, prec)
    region = minkowski_sum(f, pot.window)
    rows = _language_rows(region, spec, lang, budget.max_patterns)
    w, d = _ergodic_numerators(rows, region, f, pot)
    cols = [region.index(s) for s in f.sites]
    return _hist_sum(_group_max(rows, cols, w), d, prec)



def upper_bound_from_shape(f: ShapeLike, spec: SftSpec, pot: LocallyConstantPotential,
                           lang: LanguageProvider | None = None, prec: int = DEFAULT_PREC,
                           budget: Budget = DEFAULT_BUDGET) -> DyadicInterval:
    """|f|^-1 log Z_f, an upper bound on the pressure (infimum rule)."""
    f = as_shape(f)
    z = partition_function(f, spec, pot, lang, prec, budget)
    if z.hi.sign() <= 0:
        raise EmptySubshift("no admissible pattern on the shape")
    return iv_log(DyadicInterval(z.hi, z.hi, prec), prec) / len(f)


def modified_partition_function(f: ShapeLike, p: ExtendabilityParams, enumeration: ForbiddenEnumeration,
                                pot: LocallyConstantPotential, prec: int = DEFAULT_PREC,
                                cap: int = DEFAULT_PATTERN_CAP) -> DyadicInterval:
    """Sum over w in E_{t,n}(f) of the max over v in E_{t,n}(f + window) extending w
    of exp(ergodic sum over f)."""
    f = as_shape(f)
    if pot.dim != f.dim or enumeration.dim != f.dim:
        raise ValueError("dimension mismatch")
    region = minkowski_sum(f, pot.window)
    rows = extendable_array(region, p, enumeration, cap)
    w, d = _ergodic_numerators(rows, region, f, pot)
    cols = [region.index(s) for s in f.sites]
    return _hist_sum(_group_max(rows, cols, w), d, prec)


def _log_over(z: DyadicInterval, vol: int, prec: int) -> DyadicInterval:
    return iv_log(z, prec) / vol


def sandwich_bounds(spec: SftSpec, pot: LocallyConstantPotential, m: int,
                    lang: LanguageProvider | None = None, prec: int = DEFAULT_PREC,
                    budget: Budget = DEFAULT_BUDGET) -> tuple[DyadicInterval, DyadicInterval]:
    """(lower, upper) enclosures of the two box bounds for the cube S of side m.

    With phi shifted to be nonnegative and rho the recoded gluing gap,
    log Z_int / |S| <= P <= log Z_int / |int| where int is S shrunk by rho on
    every face.  The constant shift is undone before returning.
    """
    lang = lang or default_provider(spec)
    d = spec.dim
    gap = effective_gap(lang, pot)
    if gap is None:
        raise ValueError("sandwich bounds need an si_gap assertion")
    inner = m - 2 * gap
    if inner < 1:
        raise ValueError(f"box side {m} leaves no interior for gap {gap}")
    c = sup_norm(pot)
    shifted = add_constant(pot, c)
    z, how = BoxSummer(spec, shifted, lang, prec, budget).enclose((inner,) * d)
    if z.hi.sign() <= 0:
        raise EmptySubshift("no admissible pattern on the interior box")
    upper = iv_log(DyadicInterval(z.hi, z.hi, prec), prec) / inner**d - c
    if not lang.exact:
        return DyadicInterval(None, None, prec), upper
    if z.lo.cmp(ONE) < 0:
        lower = DyadicInterval.point(-c, prec)
    else:
        lower = iv_log(DyadicInterval(z.lo, z.lo, prec), prec) / m**d - c
    return lower, upper


def _eta(spec: SftSpec, shifted: LocallyConstantPotential, k: int) -> Fraction:
    log_a = iv_log_int(len(spec.alphabet), 64).hi.to_fraction()
    return Fraction(1, 2 ** (k + 1)) / (3 * log_a + 3 * sup_norm(shifted) + Fraction(1, 2**k))


def certified_pressure(spec: SftSpec, pot: LocallyConstantPotential, k: int,
                       lang: LanguageProvider | None = None, prec: int | None = None,
                       budget: Budget = DEFAULT_BUDGET) -> CertifiedEstimate:
    """Pressure to within 2^-k by the eta-box estimate over the recoded system."""
    if k < 1:
        raise ValueError("k must be positive")
    t0 = time.perf_counter()
    lang = lang or default_provider(spec)
    prec = prec or max(DEFAULT_PREC, k + 64)
    d = spec.dim
    gap = effective_gap(lang, pot)
    c = sup_norm(pot)
    shifted = add_constant(pot, c)
    eta = _eta(spec, shifted, k)
    rho = gap if gap is not None else 0
    M = max(math.ceil(d * rho / eta) - rho, 0)
    side = 2 * M + 1
    outer = side + 2 * rho
    params = {"eta": eta, "M": M, "rho": rho, "k": k, "precision": prec, "box_side": side}
    projected = len(spec.alphabet) ** min(side**d, 64)
    if d > 2 and side**d > 24:
        raise ResourceLimit(f"box of side {side} in dimension {d} needs enumeration of up to "
                            f"{len(spec.alphabet)}^{side ** d} patterns", projected=projected)
    summer = BoxSummer(spec, shifted, lang, prec, budget)
    z, how = summer.enclose((side,) * d, lower_valid=gap is not None)
    params["evaluation"] = how
    if summer.strip_height is not None and d == 2:
        params["strip_height"] = summer.strip_height
    if z.hi.sign() <= 0:
        raise EmptySubshift("no admissible pattern on the estimation box")
    upper = iv_log(DyadicInterval(z.hi, z.hi, prec), prec) / side**d
    conditional = set(lang.assumptions())
    if not lang.exact or gap is None:
        value = DyadicInterval(None, (upper - c).hi, prec)
        return CertifiedEstimate(value, Method.UpperOnly, params, frozenset(conditional),
                                 time.perf_counter() - t0)
    if z.lo.cmp(ONE) >= 0:
        lower = (1 - DyadicInterval.point(eta, prec)) * iv_log(DyadicInterval(z.lo, z.lo, prec), prec) / outer**d
    else:
        lower = DyadicInterval(ZERO, ZERO, prec)
    value = DyadicInterval(lower.lo, upper.hi, prec) - c
    params["width_target_met"] = value.width_float() <= 2.0**-k
    return CertifiedEstimate(value, Method.BoxSandwich, params, frozenset(conditional),
                             time.perf_counter() - t0)


def adaptive_sandwich(spec: SftSpec, pot: LocallyConstantPotential, k: int,
                      lang: LanguageProvider | None = None, prec: int = DEFAULT_PREC,
                      budget: Budget = DEFAULT_BUDGET, max_side: int | None = None,
                      side: int | None = None) -> CertifiedEstimate:
    """Grow the sandwich box until the width drops to 2^-k or the budget runs out."""
    t0 = time.perf_counter()
    lang = lang or default_provider(spec)
    gap = effective_gap(lang, pot)
    if gap is None:
        raise ValueError("sandwich bounds need an si_gap assertion")
    d = spec.dim
    conditional = frozenset(lang.assumptions())
    if side is not None:
        sides = [side]
    else:
        start = 2 * gap + 1
        if max_side is None:
            max_side = 1 << 20 if d == 1 else (64 if d == 2 else 2 * gap + 3)
        sides = []
        m = start
        while m <= max_side:
            sides.append(m)
            m = max(m + 1, int(m * 1.5)) if d == 1 else m + 2
    best = None
    used = None
    for m in sides:
        try:
            lo, hi = sandwich_bounds(spec, pot, m, lang, prec, budget)
        except ResourceLimit:
            if best is None:
                raise
            break
        iv = DyadicInterval(lo.lo, hi.hi, prec)
        best = iv if best is None else best.intersect(iv) if best.intersects(iv) else iv
        used = m
        if best.width_float() <= 2.0**-k:
            break
    method = Method.BoxSandwich if lang.exact else Method.UpperOnly
    params = {"box_side": used, "rho": gap, "k": k, "precision": prec,
              "width_target_met": best.width_float() <= 2.0**-k}
    return CertifiedEstimate(best, method, params, conditional, time.perf_counter() - t0)


# --- upper sequences from an enumeration ------------------------------------

def diagonal_indices(limit: int | None = None) -> Iterator[tuple[int, int, int, int]]:
    """(n, k, t, s) with positive entries ordered by their sum, lexicographic within."""
    total = 4
    count = 0
    while True:
        for n in range(1, total - 2):
            for k in range(1, total - n - 1):
                for t in range(1, total - n - k):
                    s = total - n - k - t
                    yield n, k, t, s
                    count += 1
                    if limit is not None and count >= limit:
                        return
        total += 1


def pressure_upper_sequence(enumeration: ForbiddenEnumeration, oracle: PotentialOracle, steps: int,
                            prec: int = DEFAULT_PREC, cap: int = 500_000) -> UpperSequence:
    """Running minimum of |F_n|^-1 log Zhat^{(t,s)}_{F_n}(psi_k) along the diagonal order."""
    if steps < 1:
        raise ValueError("steps must be positive")
    seq = UpperSequence()
    d = enumeration.dim
    # smallest thickened size that blew the budget, per forbidden prefix length
    too_big: dict[int, float] = {}
    for n, k, t, s in diagonal_indices(steps):
        psi = upper_regularization(oracle, k)
        f = box_from_sides((n,) * d).shape
        region = minkowski_sum(f, psi.window)
        size = len(minkowski_sum(region, growth_set(t, d)))
        if size >= too_big.get(s, math.inf):
            seq.skip(f"n={n} k={k} t={t} s={s}: over budget")
            continue
        try:
            z = modified_partition_function(f, ExtendabilityParams(t, s), enumeration, psi, prec, cap)
        except ResourceLimit as exc:
            too_big[s] = min(too_big.get(s, math.inf), size)
            log.info("upper sequence step n=%d k=%d t=%d s=%d skipped: %s", n, k, t, s, exc)
            seq.skip(f"n={n} k={k} t={t} s={s}: {exc}")
            continue
        if z.hi.sign() <= 0:
            raise EmptySubshift("no extendable pattern: the subshift is empty")
        bound = iv_log(DyadicInterval(z.hi, z.hi, prec), prec) / len(f)
        seq.append(DyadicInterval(None, bound.hi, prec), n, k, t, s)
    return seq
