"""Global admissibility for strongly irreducible SFTs, extendability sets, and
pluggable language providers used by the pressure estimators."""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import LanguageUndecided, ResourceLimit
from .lattice import Box, Shape, ShapeLike, as_shape, box, growth_set, minkowski_sum
from .subshift import (DEFAULT_PATTERN_CAP, Alphabet, ForbiddenEnumeration, Pattern, SftSpec,
                       is_locally_admissible, la_array)


class Decision(enum.Enum):
    IN = "IN"
    OUT = "OUT"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    level: int

    def __str__(self) -> str:
        if self.decision is Decision.UNDECIDED:
            return f"UNDECIDED(level={self.level})"
        return self.decision.value

    def __bool__(self) -> bool:
        return self.decision is Decision.IN


InLanguage = Decision.IN
NotInLanguage = Decision.OUT
Undecided = Decision.UNDECIDED


def canonical_box(m: int, r: int, dim: int) -> Box:
    """F_m = [-m(r+1), m(r+1)]^dim, so F_m + [-r, r]^dim fits inside F_{m+1}."""
    return box(m * (r + 1), dim)


def _void(rows: np.ndarray) -> np.ndarray:
    rows = np.ascontiguousarray(rows)
    if rows.shape[1] == 0:
        return np.zeros(rows.shape[0], dtype=np.dtype((np.void, 1)))
    return rows.view(np.dtype((np.void, rows.shape[1] * rows.itemsize))).ravel()


def _annulus_indices(outer: Box, inner: Box) -> list[int]:
    sh = outer.shape
    return [i for i, s in enumerate(sh.sites) if s not in inner]


_compat_memo: dict = {}
_compat_lock = threading.Lock()


def compatible(a: Pattern, b: Pattern, spec: SftSpec, boxes: Sequence[Box], cap: int = DEFAULT_PATTERN_CAP) -> bool:
    """Is there a locally admissible c on F_N with c = a on F_n and c = b on F_N minus F_{N-1}?"""
    shapes = [bx.shape for bx in boxes]
    try:
        n = shapes.index(a.shape)
        big = shapes.index(b.shape)
    except ValueError:
        raise ValueError("a and b must live on boxes of the given sequence") from None
    if big < 1 or n >= big:
        raise ValueError("b must live on a strictly larger box than a")
    outer, prev = boxes[big], boxes[big - 1]
    ann = [s for s in outer.shape.sites if s not in prev]
    trace = tuple(b.get(s) for s in ann)
    key = (spec, a, outer, prev, trace)
    with _compat_lock:
        if key in _compat_memo:
            return _compat_memo[key]
    fixed = dict(a.items())
    for s, sym in zip(ann, trace):
        if fixed.get(s, sym) != sym:
            return False
        fixed[s] = sym
    arr = la_array(outer, spec.forbidden, len(spec.alphabet), fixed=fixed, cap=cap)
    res = arr.shape[0] > 0
    with _compat_lock:
        _compat_memo[key] = res
    return res


def _centering_offset(shape: Shape) -> tuple[int, ...]:
    lo, hi = shape.bounds()
    return tuple(-((a + b) // 2) for a, b in zip(lo, hi))


def decide_globally_admissible(v: Pattern, spec: SftSpec, max_level: int = 4,
                               cap: int = DEFAULT_PATTERN_CAP) -> Verdict:
    """Three-valued membership test for the language of an SI SFT.

    The pattern is centred and extended in every locally admissible way to
    the first canonical box F_n holding it.  At each level N > n a single
    enumeration of locally admissible patterns on F_N yields, per extension
    a, the set of outer-annulus traces compatible with a.  a is dead when
    that set is empty and certified when it contains every trace; the
    answer is IN once some a is certified and OUT once all are dead.
    Exceeding ``cap`` or ``max_level`` gives UNDECIDED.
    """
    if spec.si_gap is None:
        raise ValueError("decide_globally_admissible needs an si_gap assertion")
    if v.dim != spec.dim:
        raise ValueError("pattern dimension does not match the spec")
    r, d, k = spec.si_gap, spec.dim, len(spec.alphabet)
    v = v.translate(_centering_offset(v.shape))
    n = 0
    while not all(s in canonical_box(n, r, d) for s in v.shape.sites):
        n += 1
    fn = canonical_box(n, r, d)
    try:
        cands = la_array(fn, spec.forbidden, k, fixed=v.as_dict(), cap=cap)
    except ResourceLimit:
        return Verdict(Decision.UNDECIDED, n)
    if cands.shape[0] == 0:
        return Verdict(Decision.OUT, n)
    cand_codes = _void(cands)
    alive = np.ones(len(cands), dtype=bool)
    level = n
    for big in range(n + 1, max_level + 1):
        level = big
        outer = canonical_box(big, r, d)
        try:
            arr = la_array(outer, spec.forbidden, k, cap=cap)
        except ResourceLimit:
            return Verdict(Decision.UNDECIDED, big - 1)
        osh = outer.shape
        inner_idx = [osh.index(s) for s in fn.shape.sites]
        ann_idx = _annulus_indices(outer, canonical_box(big - 1, r, d))
        pairs = np.unique(np.hstack([arr[:, inner_idx], arr[:, ann_idx]]), axis=0)
        n_all = np.unique(arr[:, ann_idx], axis=0).shape[0] if arr.shape[0] else 0
        inner_codes, counts = np.unique(_void(pairs[:, : len(inner_idx)]), return_counts=True)
        pos = np.searchsorted(inner_codes, cand_codes)
        pos = np.minimum(pos, max(len(inner_codes) - 1, 0))
        found = (inner_codes[pos] == cand_codes) if len(inner_codes) else np.zeros(len(cands), dtype=bool)
        cnt = np.where(found, counts[pos] if len(counts) else 0, 0)
        alive &= cnt > 0
        if np.any(alive & (cnt == n_all) & (n_all > 0)):
            return Verdict(Decision.IN, big)
        if not alive.any():
            return Verdict(Decision.OUT, big)
    return Verdict(Decision.UNDECIDED, level)


# --- extendability sets -----------------------------------------------------

@dataclass(frozen=True)
class ExtendabilityParams:
    t: int
    n: int

    def __post_init__(self):
        if self.t < 1 or self.n < 1:
            raise ValueError("t and n must be at least 1")


def extendable_array(f: ShapeLike, p: ExtendabilityParams, enumeration: ForbiddenEnumeration,
                     cap: int = DEFAULT_PATTERN_CAP) -> np.ndarray:
    """Rows (in f's site order, lexicographically sorted) of E_{t,n} on f."""
    f = as_shape(f)
    forb = enumeration.prefix(p.n)
    big = minkowski_sum(f, growth_set(p.t, f.dim))
    arr = la_array(big, forb, len(enumeration.alphabet), cap=cap)
    idx = [big.index(s) for s in f.sites]
    if arr.shape[0] == 0:
        return np.zeros((0, len(f)), dtype=np.uint8)
    return np.unique(arr[:, idx], axis=0)


def extendable_set(f: ShapeLike, p: ExtendabilityParams, enumeration: ForbiddenEnumeration,
                   cap: int = DEFAULT_PATTERN_CAP) -> list[Pattern]:
    """Patterns w on f, locally admissible for the first n forbidden words,
    that extend to a locally admissible pattern on f + G_t (canonical order)."""
    f = as_shape(f)
    return [Pattern(f, row.tolist()) for row in extendable_array(f, p, enumeration, cap)]


# --- providers --------------------------------------------------------------

class LanguageProvider:
    """Membership oracle for L(X) together with the metadata certificates need."""

    kind = "abstract"
    exact = True

    def __init__(self, spec: SftSpec):
        self.spec = spec

    def contains(self, v: Pattern) -> bool:
        raise NotImplementedError

    def assumptions(self) -> frozenset[str]:
        return frozenset()

    def box_mode(self) -> str:
        """How box sums enumerate L: 'local' (L = LA), 'trimmed' (1D graph
        trimming) or 'filter' (query ``contains`` pattern by pattern)."""
        return "local"

    @property
    def si_gap(self) -> int | None:
        return self.spec.si_gap

    def __repr__(self) -> str:
        return f"{self.kind}()"


class FullShift(LanguageProvider):
    kind = "FullShift"

    def __init__(self, alphabet: Alphabet | SftSpec, dim: int | None = None):
        if isinstance(alphabet, SftSpec):
            if alphabet.forbidden:
                raise ValueError("FullShift provider needs an empty forbidden list")
            spec = SftSpec(alphabet.alphabet, alphabet.dim, (), 0)
        else:
            spec = SftSpec(alphabet, dim, (), 0)
        super().__init__(spec)

    def contains(self, v: Pattern) -> bool:
        return all(0 <= s < len(self.spec.alphabet) for s in v.symbols)

    @property
    def si_gap(self) -> int:
        return 0


class LocalOverapprox(LanguageProvider):
    """Answers with local admissibility only: a superset of the language."""

    kind = "LocalOverapprox"
    exact = False

    def contains(self, v: Pattern) -> bool:
        return is_locally_admissible(v, self.spec.forbidden)


class ExactSI(LanguageProvider):
    kind = "ExactSI"

    def __init__(self, spec: SftSpec, max_level: int = 6, cap: int = DEFAULT_PATTERN_CAP):
        if spec.si_gap is None:
            raise ValueError("ExactSI needs an si_gap assertion")
        super().__init__(spec)
        self.max_level = max_level
        self.cap = cap
        self._memo: dict[Pattern, bool] = {}
        self._lock = threading.Lock()

    def contains(self, v: Pattern) -> bool:
        with self._lock:
            if v in self._memo:
                return self._memo[v]
        if self.spec.safe_symbol() is not None:
            ans = is_locally_admissible(v, self.spec.forbidden)
        else:
            verdict = decide_globally_admissible(v, self.spec, self.max_level, self.cap)
            if verdict.decision is Decision.UNDECIDED:
                raise LanguageUndecided(f"membership undecided at level {verdict.level}", verdict.level)
            ans = verdict.decision is Decision.IN
        with self._lock:
            self._memo[v] = ans
        return ans

    def assumptions(self) -> frozenset[str]:
        return frozenset({f"si_gap={self.spec.si_gap}"})

    def box_mode(self) -> str:
        if self.spec.safe_symbol() is not None:
            return "local"
        return "trimmed" if self.spec.dim == 1 else "filter"


class UserOracle(LanguageProvider):
    kind = "UserOracle"

    def __init__(self, spec: SftSpec, fn: Callable[[Pattern], bool], name: str = "user_oracle"):
        super().__init__(spec)
        self._fn = fn
        self.name = name

    def contains(self, v: Pattern) -> bool:
        return bool(self._fn(v))

    def assumptions(self) -> frozenset[str]:
        out = {self.name}
        if self.spec.si_gap is not None:
            out.add(f"si_gap={self.spec.si_gap}")
        return frozenset(out)

    def box_mode(self) -> str:
        return "filter"


def default_provider(spec: SftSpec) -> LanguageProvider:
    if spec.is_full_shift:
        return FullShift(spec)
    if spec.si_gap is not None:
        return ExactSI(spec)
    return LocalOverapprox(spec)
