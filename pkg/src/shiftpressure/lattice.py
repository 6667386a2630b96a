"""Finite subsets of Z^d: shapes, boxes, translations and window interiors."""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Iterable, Iterator, Sequence, Union

from .errors import DimensionMismatch, ParseError

COORD_LIMIT = 10**6

Site = tuple[int, ...]


def as_site(coords: Iterable[int]) -> Site:
    site = tuple(int(c) for c in coords)
    for c in site:
        if abs(c) > COORD_LIMIT:
            raise OverflowError(f"coordinate {c} exceeds the bound {COORD_LIMIT}")
    return site


def add_sites(a: Site, b: Site) -> Site:
    if len(a) != len(b):
        raise DimensionMismatch(f"sites {a} and {b} differ in dimension")
    return as_site(x + y for x, y in zip(a, b))


class Shape:
    """Immutable finite set of sites kept in lexicographic order."""

    __slots__ = ("sites", "dim", "_index", "_hash")

    def __init__(self, sites: Iterable[Sequence[int]], dim: int | None = None):
        pts = sorted({as_site(s) for s in sites})
        if dim is None:
            if not pts:
                raise ValueError("an empty shape needs an explicit dimension")
            dim = len(pts[0])
        if dim < 1:
            raise ValueError("dimension must be positive")
        for s in pts:
            if len(s) != dim:
                raise DimensionMismatch(f"site {s} does not have dimension {dim}")
        self.sites: tuple[Site, ...] = tuple(pts)
        self.dim = dim
        self._index: dict[Site, int] | None = None
        self._hash = hash((self.dim, self.sites))

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self) -> Iterator[Site]:
        return iter(self.sites)

    def __contains__(self, site) -> bool:
        return tuple(site) in self.index_map

    def __eq__(self, other) -> bool:
        if isinstance(other, Box):
            other = other.shape
        return isinstance(other, Shape) and self.dim == other.dim and self.sites == other.sites

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Shape({format_shape(self)})"

    @property
    def index_map(self) -> dict[Site, int]:
        if self._index is None:
            self._index = {s: i for i, s in enumerate(self.sites)}
        return self._index

    def index(self, site: Sequence[int]) -> int:
        return self.index_map[tuple(site)]

    def translate(self, g: Sequence[int]) -> "Shape":
        g = as_site(g)
        if len(g) != self.dim:
            raise DimensionMismatch("translation vector has the wrong dimension")
        return Shape((add_sites(s, g) for s in self.sites), self.dim)

    def bounds(self) -> tuple[Site, Site]:
        if not self.sites:
            raise ValueError("empty shape has no bounding box")
        lo = tuple(min(s[i] for s in self.sites) for i in range(self.dim))
        hi = tuple(max(s[i] for s in self.sites) for i in range(self.dim))
        return lo, hi

    def bounding_box(self) -> "Box":
        lo, hi = self.bounds()
        return Box(lo, hi)

    def is_box(self) -> bool:
        return bool(self.sites) and len(self.bounding_box()) == len(self)

    @property
    def shape(self) -> "Shape":
        return self


@dataclass(frozen=True)
class Box:
    """Inclusive integer box prod_i [lo_i, hi_i]."""

    lo: Site
    hi: Site

    def __post_init__(self):
        lo, hi = as_site(self.lo), as_site(self.hi)
        if len(lo) != len(hi):
            raise DimensionMismatch("box corners differ in dimension")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"box corner {lo} is not below {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    def __len__(self) -> int:
        n = 1
        for s in self.sides:
            n *= s
        return n

    @cached_property
    def shape(self) -> Shape:
        ranges = [range(a, b + 1) for a, b in zip(self.lo, self.hi)]
        return Shape(product(*ranges), self.dim)

    @property
    def sites(self) -> tuple[Site, ...]:
        return self.shape.sites

    def __iter__(self) -> Iterator[Site]:
        return iter(self.shape.sites)

    def __contains__(self, site) -> bool:
        site = tuple(site)
        return len(site) == self.dim and all(a <= c <= b for a, c, b in zip(self.lo, site, self.hi))

    def translate(self, g: Sequence[int]) -> "Box":
        return Box(add_sites(self.lo, tuple(g)), add_sites(self.hi, tuple(g)))

    def index(self, site) -> int:
        return self.shape.index(site)

    def bounding_box(self) -> "Box":
        return self


ShapeLike = Union[Shape, Box]


def as_shape(s: ShapeLike | Iterable[Sequence[int]]) -> Shape:
    if isinstance(s, Shape):
        return s
    if isinstance(s, Box):
        return s.shape
    return Shape(s)


def box(radius: int, dim: int) -> Box:
    """The cube [-radius, radius]^dim."""
    if radius < 0 or dim < 1:
        raise ValueError("need radius >= 0 and dim >= 1")
    return Box((-radius,) * dim, (radius,) * dim)


def box_from_sides(sides: Sequence[int]) -> Box:
    """Box anchored at the origin with the given side lengths."""
    return Box((0,) * len(sides), tuple(s - 1 for s in sides))


def _check_dims(a: ShapeLike, b: ShapeLike) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions {a.dim} and {b.dim} differ")


def e_interior(s: ShapeLike, e: ShapeLike) -> Shape:
    """Sites g of s such that every translate g + w, w in e, stays inside s."""
    _check_dims(s, e)
    if len(s) == 0 or len(e) == 0:
        raise ValueError("e_interior needs nonempty shapes")
    if isinstance(s, Box) or (isinstance(s, Shape) and s.is_box()):
        sb = s if isinstance(s, Box) else s.bounding_box()
        elo, ehi = as_shape(e).bounds()
        lo = tuple(a - m for a, m in zip(sb.lo, elo))
        hi = tuple(b - m for b, m in zip(sb.hi, ehi))
        if any(x > y for x, y in zip(lo, hi)):
            return Shape([], s.dim)
        return Box(lo, hi).shape
    ss = as_shape(s)
    es = as_shape(e).sites
    members = ss.index_map
    out = [g for g in ss.sites if all(tuple(x + w for x, w in zip(g, v)) in members for v in es)]
    return Shape(out, ss.dim)


def minkowski_sum(a: ShapeLike, b: ShapeLike) -> Shape:
    _check_dims(a, b)
    if isinstance(a, Box) and isinstance(b, Box):
        return Box(add_sites(a.lo, b.lo), add_sites(a.hi, b.hi)).shape
    return Shape((add_sites(x, y) for x in as_shape(a) for y in as_shape(b)), a.dim)


def spiral_sites(dim: int) -> Iterator[Site]:
    """All of Z^dim ordered by sup-norm, lexicographically within each shell."""
    yield (0,) * dim
    r = 1
    while True:
        for s in product(range(-r, r + 1), repeat=dim):
            if max(abs(c) for c in s) == r:
                yield s
        r += 1


def growth_set(t: int, dim: int) -> Shape:
    """First t sites of the spiral enumeration (so growth_set(1) is the origin)."""
    if t < 1:
        raise ValueError("t must be at least 1")
    out = []
    for s in spiral_sites(dim):
        out.append(s)
        if len(out) == t:
            break
    return Shape(out, dim)


_SITE_RE = re.compile(r"\(\s*-?\d+(?:\s*,\s*-?\d+)*\s*\)")
_BOX_RE = re.compile(r"box\(([^)]*)\)")


def parse_site(text: str) -> Site:
    text = text.strip()
    if not (text.startswith("(") and text.endswith(")")):
        raise ParseError(f"malformed site {text!r}")
    try:
        return as_site(int(c) for c in text[1:-1].split(","))
    except ValueError as exc:
        raise ParseError(f"malformed site {text!r}") from exc


def format_site(site: Site) -> str:
    return "(" + ",".join(str(c) for c in site) + ")"


def parse_shape(text: str, dim: int | None = None) -> Shape:
    """Parse ``(0,0) (1,0)`` or ``box(-1..1,0..2)`` literals."""
    text = text.strip()
    m = _BOX_RE.fullmatch(text)
    if m:
        lo, hi = [], []
        for part in m.group(1).split(","):
            try:
                a, b = part.split("..")
                lo.append(int(a))
                hi.append(int(b))
            except ValueError as exc:
                raise ParseError(f"malformed box range {part!r}") from exc
        shape = Box(tuple(lo), tuple(hi)).shape
    else:
        rest = _SITE_RE.sub("", text)
        if rest.strip():
            raise ParseError(f"unexpected text in shape literal: {rest.strip()!r}")
        sites = [parse_site(s) for s in _SITE_RE.findall(text)]
        if not sites:
            raise ParseError("empty shape literal")
        shape = Shape(sites)
    if dim is not None and shape.dim != dim:
        raise ParseError(f"shape has dimension {shape.dim}, expected {dim}")
    return shape


def format_shape(s: ShapeLike) -> str:
    if isinstance(s, Box):
        return "box(" + ",".join(f"{a}..{b}" for a, b in zip(s.lo, s.hi)) + ")"
    return " ".join(format_site(x) for x in s.sites)
