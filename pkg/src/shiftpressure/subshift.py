"""Patterns, forbidden lists, local admissibility and the SFT data model."""
from __future__ import annotations

import threading
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatch, ParseError, ResourceLimit
from .lattice import Shape, ShapeLike, Site, as_shape, as_site, format_site, parse_site

DEFAULT_PATTERN_CAP = 4_000_000


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        syms = tuple(str(s) for s in self.symbols)
        if not syms:
            raise ValueError("alphabet must be nonempty")
        if len(set(syms)) != len(syms):
            raise ValueError("alphabet tokens must be unique")
        for s in syms:
            if not s or any(c.isspace() for c in s) or any(c in s for c in "():#"):
                raise ValueError(f"invalid symbol token {s!r}")
        object.__setattr__(self, "symbols", syms)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def index(self, token: str) -> int:
        try:
            return self.symbols.index(token)
        except ValueError:
            raise KeyError(f"unknown symbol {token!r}") from None

    @classmethod
    def of(cls, *tokens) -> "Alphabet":
        if len(tokens) == 1 and not isinstance(tokens[0], str):
            tokens = tuple(tokens[0])
        return cls(tuple(tokens))


class Pattern:
    """Assignment of symbol indices to the sites of a shape.

    ``symbols[i]`` is the symbol at ``shape.sites[i]``; equality and hashing
    use the canonical (sorted) domain, so patterns work as dictionary keys.
    """

    __slots__ = ("shape", "symbols", "_hash")

    def __init__(self, shape: ShapeLike, symbols: Sequence[int]):
        shape = as_shape(shape)
        symbols = tuple(int(s) for s in symbols)
        if len(symbols) != len(shape):
            raise ValueError("pattern needs exactly one symbol per site")
        self.shape = shape
        self.symbols = symbols
        self._hash = hash((shape, symbols))

    @classmethod
    def from_mapping(cls, mapping: Mapping[Sequence[int], int], dim: int | None = None) -> "Pattern":
        items = {as_site(k): int(v) for k, v in mapping.items()}
        shape = Shape(items.keys(), dim)
        return cls(shape, [items[s] for s in shape.sites])

    @classmethod
    def from_word(cls, word: Sequence[int], start: int = 0) -> "Pattern":
        """One-dimensional pattern placed on {start, ..., start+len-1}."""
        return cls(Shape([(start + i,) for i in range(len(word))], 1), list(word))

    @property
    def dim(self) -> int:
        return self.shape.dim

    def __len__(self) -> int:
        return len(self.symbols)

    def __eq__(self, other) -> bool:
        return isinstance(other, Pattern) and self.shape == other.shape and self.symbols == other.symbols

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        body = " ".join(f"{format_site(s)}:{a}" for s, a in zip(self.shape.sites, self.symbols))
        return f"Pattern({body})"

    def items(self) -> Iterator[tuple[Site, int]]:
        return zip(self.shape.sites, self.symbols)

    def as_dict(self) -> dict[Site, int]:
        return dict(self.items())

    def get(self, site: Sequence[int]) -> int:
        return self.symbols[self.shape.index(site)]

    def restrict(self, shape: ShapeLike) -> "Pattern":
        shape = as_shape(shape)
        return Pattern(shape, [self.get(s) for s in shape.sites])

    def translate(self, g: Sequence[int]) -> "Pattern":
        return Pattern(self.shape.translate(g), self.symbols)

    def normalized(self) -> "Pattern":
        """Translate so that the bounding box starts at the origin."""
        lo, _ = self.shape.bounds()
        return self.translate(tuple(-c for c in lo))

    def word(self) -> tuple[int, ...]:
        return self.symbols


@dataclass(frozen=True)
class SftSpec:
    alphabet: Alphabet
    dim: int
    forbidden: tuple[Pattern, ...] = ()
    si_gap: int | None = None

    def __post_init__(self):
        forb = tuple(self.forbidden)
        for w in forb:
            if w.dim != self.dim:
                raise DimensionMismatch("forbidden pattern has the wrong dimension")
            if len(w) == 0:
                raise ValueError("forbidden patterns must be nonempty")
            if any(s >= len(self.alphabet) for s in w.symbols):
                raise ValueError("forbidden pattern uses an unknown symbol")
        if self.si_gap is not None and self.si_gap < 0:
            raise ValueError("si_gap must be nonnegative")
        object.__setattr__(self, "forbidden", forb)

    @classmethod
    def full_shift(cls, alphabet: Alphabet | int, dim: int) -> "SftSpec":
        if isinstance(alphabet, int):
            alphabet = Alphabet(tuple(str(i) for i in range(alphabet)))
        return cls(alphabet, dim, (), 0)

    @property
    def is_full_shift(self) -> bool:
        return not self.forbidden

    def safe_symbol(self) -> int | None:
        """A symbol occurring in no forbidden pattern, if any.

        When one exists every locally admissible pattern extends (fill the rest
        of the lattice with it), so local and global admissibility coincide.
        """
        used = {s for w in self.forbidden for s in w.symbols}
        for a in range(len(self.alphabet)):
            if a not in used:
                return a
        return None


class ForbiddenEnumeration:
    """Demand-driven, possibly infinite list of forbidden patterns w_1, w_2, ..."""

    def __init__(self, alphabet: Alphabet, dim: int, source: Iterable[Pattern] | Callable[[int], Pattern | None]):
        self.alphabet = alphabet
        self.dim = dim
        self._cache: list[Pattern] = []
        self._done = False
        self._lock = threading.Lock()
        if callable(source):
            fn = source

            def gen():
                i = 1
                while True:
                    w = fn(i)
                    if w is None:
                        return
                    yield w
                    i += 1

            self._it = gen()
        else:
            self._it = iter(source)

    @classmethod
    def from_spec(cls, spec: SftSpec) -> "ForbiddenEnumeration":
        return cls(spec.alphabet, spec.dim, list(spec.forbidden))

    def prefix(self, n: int) -> tuple[Pattern, ...]:
        """The first n words (fewer when the enumeration is finite)."""
        with self._lock:
            while len(self._cache) < n and not self._done:
                try:
                    w = next(self._it)
                except StopIteration:
                    self._done = True
                    break
                if w.dim != self.dim:
                    raise DimensionMismatch("enumerated pattern has the wrong dimension")
                self._cache.append(w)
            return tuple(self._cache[:n])

    def spec(self, n: int, si_gap: int | None = None) -> SftSpec:
        return SftSpec(self.alphabet, self.dim, self.prefix(n), si_gap)


# --- admissibility ----------------------------------------------------------

def is_subword_position(w: Pattern, v: Pattern, g: Sequence[int]) -> bool:
    if w.dim != v.dim or len(g) != v.dim:
        raise DimensionMismatch("patterns and offset must share a dimension")
    vmap = v.shape.index_map
    for site, a in w.items():
        t = tuple(x + y for x, y in zip(site, g))
        j = vmap.get(t)
        if j is None or v.symbols[j] != a:
            return False
    return True


def occurrence_offsets(w: Pattern, shape: Shape) -> list[Site]:
    """Offsets g with w.shape + g contained in shape."""
    if not len(w):
        return []
    members = shape.index_map
    first = w.shape.sites[0]
    out = []
    for s in shape.sites:
        g = tuple(a - b for a, b in zip(s, first))
        if all(tuple(x + y for x, y in zip(site, g)) in members for site in w.shape.sites):
            out.append(g)
    return out


def is_locally_admissible(v: Pattern, forbidden: Sequence[Pattern]) -> bool:
    for w in forbidden:
        if w.dim != v.dim:
            raise DimensionMismatch("forbidden pattern has the wrong dimension")
        for g in occurrence_offsets(w, v.shape):
            if is_subword_position(w, v, g):
                return False
    return True


class PatternGrower:
    """Breadth-first enumeration of locally admissible patterns on a shape.

    Sites are assigned in the shape's canonical order; after assigning site
    j, only forbidden placements whose last site is j are checked, so every
    partial row is locally admissible on the assigned prefix.  Rows come out
    in lexicographic order of their symbol strings.
    """

    def __init__(self, shape: ShapeLike, forbidden: Sequence[Pattern], alphabet_size: int):
        self.shape = as_shape(shape)
        self.alphabet_size = int(alphabet_size)
        if self.alphabet_size > 256:
            raise ValueError("pattern enumeration supports at most 256 symbols")
        n = len(self.shape)
        groups: list[dict[int, tuple[list, list]]] = [dict() for _ in range(n)]
        index = self.shape.index_map
        for w in forbidden:
            for g in occurrence_offsets(w, self.shape):
                idx = [index[tuple(x + y for x, y in zip(site, g))] for site in w.shape.sites]
                last = max(idx)
                bucket = groups[last].setdefault(len(idx), ([], []))
                bucket[0].append(idx)
                bucket[1].append(list(w.symbols))
        self._checks: list[list[tuple[np.ndarray, np.ndarray]]] = []
        for per_site in groups:
            entries = []
            for _, (idxs, syms) in sorted(per_site.items()):
                entries.append((np.array(idxs, dtype=np.int64), np.array(syms, dtype=np.uint8)))
            self._checks.append(entries)

    def empty(self) -> np.ndarray:
        return np.zeros((1, len(self.shape)), dtype=np.uint8)

    def grow(self, arr: np.ndarray, start: int, stop: int, fixed: Mapping[int, int] | None = None,
             cap: int = DEFAULT_PATTERN_CAP, parents: np.ndarray | None = None):
        """Assign sites start..stop-1 to every row of ``arr``.

        Returns the new array (and the parent row indices when ``parents`` is
        given).  Raises ResourceLimit when more than ``cap`` rows are alive.
        """
        k = self.alphabet_size
        fixed = fixed or {}
        if parents is not None:
            parents = np.asarray(parents)
        for j in range(start, stop):
            if j in fixed:
                arr = arr.copy()
                arr[:, j] = fixed[j]
            else:
                arr = np.repeat(arr, k, axis=0)
                arr[:, j] = np.tile(np.arange(k, dtype=np.uint8), arr.shape[0] // k)
                if parents is not None:
                    parents = np.repeat(parents, k)
            if arr.shape[0]:
                bad = np.zeros(arr.shape[0], dtype=bool)
                for idx, sym in self._checks[j]:
                    bad |= kernels.match_rows(arr, idx, sym)
                if bad.any():
                    arr = arr[~bad]
                    if parents is not None:
                        parents = parents[~bad]
            if arr.shape[0] > cap:
                raise ResourceLimit(f"more than {cap} locally admissible partial patterns",
                                    projected=int(arr.shape[0]))
        if parents is not None:
            return arr, parents
        return arr

    def all(self, fixed: Mapping[int, int] | None = None, cap: int = DEFAULT_PATTERN_CAP) -> np.ndarray:
        return self.grow(self.empty(), 0, len(self.shape), fixed, cap)


def la_array(f: ShapeLike, forbidden: Sequence[Pattern], alphabet_size: int,
             fixed: Mapping[Sequence[int], int] | None = None, cap: int = DEFAULT_PATTERN_CAP) -> np.ndarray:
    """Rows = locally admissible patterns on f (columns follow f's site order)."""
    f = as_shape(f)
    fixed_idx = None
    if fixed:
        fixed_idx = {f.index(s): int(a) for s, a in fixed.items()}
    return PatternGrower(f, forbidden, alphabet_size).all(fixed_idx, cap)


def enumerate_locally_admissible(f: ShapeLike, spec: SftSpec, cap: int = DEFAULT_PATTERN_CAP) -> list[Pattern]:
    f = as_shape(f)
    if len(f) == 0:
        raise ValueError("shape must be nonempty")
    arr = la_array(f, spec.forbidden, len(spec.alphabet), cap=cap)
    return [Pattern(f, row.tolist()) for row in arr]


def all_patterns(f: ShapeLike, alphabet_size: int) -> Iterator[Pattern]:
    f = as_shape(f)
    for word in product(range(alphabet_size), repeat=len(f)):
        yield Pattern(f, word)


# --- text formats -----------------------------------------------------------

def format_pattern_line(p: Pattern, alphabet: Alphabet) -> str:
    return " ".join(f"{format_site(s)}:{alphabet.symbols[a]}" for s, a in p.items())


def parse_pattern_line(line: str, alphabet: Alphabet, dim: int | None = None, lineno: int | None = None) -> Pattern:
    mapping: dict[Site, int] = {}
    for tok in line.split():
        if ":" not in tok:
            raise ParseError(f"expected (site):symbol, got {tok!r}", lineno)
        site_txt, sym = tok.rsplit(":", 1)
        try:
            site = parse_site(site_txt)
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from None
        if site in mapping:
            raise ParseError(f"site {site} assigned twice", lineno)
        try:
            mapping[site] = alphabet.index(sym)
        except KeyError:
            raise ParseError(f"unknown symbol {sym!r}", lineno) from None
    if not mapping:
        raise ParseError("empty pattern", lineno)
    try:
        return Pattern.from_mapping(mapping, dim)
    except (ValueError, DimensionMismatch) as exc:
        raise ParseError(str(exc), lineno) from None


def _content_lines(text: str):
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield i, line


def parse_sft(text: str) -> SftSpec:
    dim = alphabet = si_gap = None
    forbidden: list[Pattern] = []
    lines = list(_content_lines(text))
    pos = 0
    seen_forbidden = False
    while pos < len(lines):
        no, line = lines[pos]
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key == "dim":
            try:
                dim = int(rest)
            except ValueError:
                raise ParseError(f"bad dimension {rest!r}", no) from None
            if dim < 1:
                raise ParseError("dimension must be positive", no)
        elif key == "alphabet":
            try:
                alphabet = Alphabet(tuple(rest.split()))
            except ValueError as exc:
                raise ParseError(str(exc), no) from None
        elif key == "forbidden":
            if dim is None or alphabet is None:
                raise ParseError("dim and alphabet must precede the forbidden block", no)
            if seen_forbidden:
                raise ParseError("duplicate forbidden block", no)
            seen_forbidden = True
            pos += 1
            while True:
                if pos >= len(lines):
                    raise ParseError("forbidden block is missing 'end'", no)
                no2, body = lines[pos]
                if body == "end":
                    break
                forbidden.append(parse_pattern_line(body, alphabet, dim, no2))
                pos += 1
        elif key == "si_gap":
            try:
                si_gap = int(rest)
            except ValueError:
                raise ParseError(f"bad si_gap {rest!r}", no) from None
            if si_gap < 0:
                raise ParseError("si_gap must be nonnegative", no)
        else:
            raise ParseError(f"unknown directive {key!r}", no)
        pos += 1
    if dim is None or alphabet is None:
        raise ParseError("missing dim or alphabet")
    return SftSpec(alphabet, dim, tuple(forbidden), si_gap)


def format_sft(spec: SftSpec) -> str:
    out = [f"dim {spec.dim}", "alphabet " + " ".join(spec.alphabet.symbols), "forbidden"]
    out += [format_pattern_line(w, spec.alphabet) for w in spec.forbidden]
    out.append("end")
    if spec.si_gap is not None:
        out.append(f"si_gap {spec.si_gap}")
    return "\n".join(out) + "\n"


def golden_mean(dim: int = 1) -> SftSpec:
    """No two adjacent 1s along any axis (hard squares when dim = 2)."""
    forb = []
    for axis in range(dim):
        e = tuple(1 if i == axis else 0 for i in range(dim))
        forb.append(Pattern.from_mapping({(0,) * dim: 1, e: 1}))
    return SftSpec(Alphabet(("0", "1")), dim, tuple(forb), 1)


def hard_squares() -> SftSpec:
    return golden_mean(2)
