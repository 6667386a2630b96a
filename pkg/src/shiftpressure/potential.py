"""Locally constant rational potentials, potential oracles and ergodic sums."""
from __future__ import annotations

import math
import threading
from fractions import Fraction
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, ParseError
from .lattice import Shape, ShapeLike, as_shape, format_site, parse_shape
from .subshift import Alphabet, Pattern, SftSpec

DENSE_TABLE_CAP = 1 << 22


def _frac(x) -> Fraction:
    if isinstance(x, float):
        raise TypeError("potential values must be exact rationals, not floats")
    return Fraction(x)


class LocallyConstantPotential:
    """phi(x) = table[x restricted to window] (default when absent).

    Keys of ``table`` are symbol-index tuples in the window's canonical order.
    """

    __slots__ = ("alphabet", "window", "_table", "default", "_hash")

    def __init__(self, alphabet: Alphabet, window: ShapeLike, table: Mapping[Sequence[int], object] | None = None,
                 default=0):
        window = as_shape(window)
        if (0,) * window.dim not in window:
            raise ValueError("potential window must contain the origin")
        k, n = len(alphabet), len(window)
        clean: dict[tuple[int, ...], Fraction] = {}
        for key, val in (table or {}).items():
            key = tuple(int(s) for s in key)
            if len(key) != n or any(not 0 <= s < k for s in key):
                raise ValueError(f"table key {key} does not match the window")
            clean[key] = _frac(val)
        self.alphabet = alphabet
        self.window = window
        self.default = _frac(default)
        # entries equal to the default carry no information
        self._table = {kk: v for kk, v in sorted(clean.items()) if v != self.default}
        self._hash = hash((alphabet, window, tuple(self._table.items()), self.default))

    @property
    def table(self) -> dict[tuple[int, ...], Fraction]:
        return dict(self._table)

    @property
    def dim(self) -> int:
        return self.window.dim

    def __eq__(self, other) -> bool:
        return (isinstance(other, LocallyConstantPotential) and self.alphabet == other.alphabet
                and self.window == other.window and self._table == other._table and self.default == other.default)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"LocallyConstantPotential(window={self.window!r}, entries={len(self._table)}, default={self.default})"

    def value(self, symbols: Sequence[int]) -> Fraction:
        return self._table.get(tuple(symbols), self.default)

    def is_single_site(self) -> bool:
        return len(self.window) == 1

    def covers_all(self) -> bool:
        return len(self._table) == len(self.alphabet) ** len(self.window)

    def values(self) -> set[Fraction]:
        vals = set(self._table.values())
        if not self.covers_all():
            vals.add(self.default)
        return vals

    def min_value(self) -> Fraction:
        return min(self.values())

    def max_value(self) -> Fraction:
        return max(self.values())

    def common_denominator(self) -> int:
        d = 1
        for v in self.values():
            d = d * v.denominator // math.gcd(d, v.denominator)
        return d

    def dense_numerators(self, denom: int | None = None) -> tuple[np.ndarray, int]:
        """Integer table over all window codes (base-|A| digits in window order)."""
        k, n = len(self.alphabet), len(self.window)
        size = k**n
        if size > DENSE_TABLE_CAP:
            raise ValueError(f"window table of size {size} is too large to densify")
        d = denom or self.common_denominator()
        # a default hidden behind a full table never reaches the dense array
        default = self.default * d if not self.covers_all() else Fraction(0)
        if default.denominator != 1:
            raise ValueError("denominator does not clear the default value")
        nums = [int(default)] * size
        for key, val in self._table.items():
            code = 0
            for s in key:
                code = code * k + s
            nums[code] = int(val * d)
        big = max(abs(x) for x in nums) if nums else 0
        dtype = np.int64 if big < (1 << 40) else object
        return np.array(nums, dtype=dtype), d


def zero_potential(alphabet: Alphabet, dim: int) -> LocallyConstantPotential:
    return LocallyConstantPotential(alphabet, Shape([(0,) * dim], dim), {}, 0)


def single_site(alphabet: Alphabet, dim: int, values: Sequence) -> LocallyConstantPotential:
    if len(values) != len(alphabet):
        raise ValueError("need one value per symbol")
    return LocallyConstantPotential(alphabet, Shape([(0,) * dim], dim),
                                    {(a,): v for a, v in enumerate(values)}, 0)


def sup_norm(p: LocallyConstantPotential) -> Fraction:
    return max(abs(v) for v in p.values())


def add_constant(p: LocallyConstantPotential, c) -> LocallyConstantPotential:
    c = _frac(c)
    return LocallyConstantPotential(p.alphabet, p.window, {k: v + c for k, v in p._table.items()}, p.default + c)


def scale(p: LocallyConstantPotential, beta) -> LocallyConstantPotential:
    beta = _frac(beta)
    return LocallyConstantPotential(p.alphabet, p.window, {k: v * beta for k, v in p._table.items()},
                                    p.default * beta)


def ergodic_sum(p: LocallyConstantPotential, v: Pattern, f: ShapeLike) -> Fraction:
    """Sum over g in f of phi read from v on the window translated by g."""
    f = as_shape(f)
    if f.dim != p.dim or v.dim != p.dim:
        raise DimensionMismatch("potential, pattern and shape must share a dimension")
    index = v.shape.index_map
    total = Fraction(0)
    for g in f.sites:
        key = []
        for w in p.window.sites:
            j = index.get(tuple(a + b for a, b in zip(g, w)))
            if j is None:
                raise ValueError(f"pattern does not cover the window at offset {g}")
            key.append(v.symbols[j])
        total += p.value(key)
    return total


class PotentialOracle:
    """k -> gamma(k), a locally constant potential within 2^-k of phi in sup norm."""

    def __init__(self, fn: Callable[[int], LocallyConstantPotential]):
        self._fn = fn
        self._cache: dict[int, LocallyConstantPotential] = {}
        self._lock = threading.Lock()

    @classmethod
    def exact(cls, p: LocallyConstantPotential) -> "PotentialOracle":
        return cls(lambda k: p)

    def __call__(self, k: int) -> LocallyConstantPotential:
        if k < 1:
            raise ValueError("oracle index must be positive")
        with self._lock:
            if k not in self._cache:
                self._cache[k] = self._fn(k)
            return self._cache[k]


def upper_regularization(o: PotentialOracle, k: int) -> LocallyConstantPotential:
    """psi_k = gamma(k) + 2^-k, which dominates phi and decreases to it uniformly."""
    return add_constant(o(k), Fraction(1, 2**k))


def sft_embedding_potential(spec: SftSpec) -> LocallyConstantPotential:
    """-1 where some forbidden pattern sits in the window anchored at the origin, else 0.

    The window is the bounding box of the (normalised) forbidden patterns, so
    every occurrence of a forbidden word is seen by exactly the anchors whose
    window contains it at the normalised offset.
    """
    if not spec.forbidden:
        raise ValueError("the embedding potential needs a nonempty forbidden list")
    normed = [w.normalized() for w in spec.forbidden]
    d = spec.dim
    hi = [max(max(s[i] for s in w.shape.sites) for w in normed) for i in range(d)]
    window = Shape(product(*[range(h + 1) for h in hi]), d)
    k = len(spec.alphabet)
    table = {}
    for key in product(range(k), repeat=len(window)):
        pat = Pattern(window, key)
        for w in normed:
            if all(pat.get(s) == a for s, a in w.items()):
                table[key] = Fraction(-1)
                break
    return LocallyConstantPotential(spec.alphabet, window, table, 0)


# --- text format ------------------------------------------------------------

def _parse_rational(text: str, lineno: int) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad rational {text.strip()!r}", lineno) from None


def _format_rational(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def parse_potential(text: str) -> LocallyConstantPotential:
    dim = alphabet = window = None
    default = Fraction(0)
    entries: list[tuple[int, list[str], Fraction]] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        if key == "dim":
            try:
                dim = int(rest)
            except ValueError:
                raise ParseError(f"bad dimension {rest!r}", no) from None
        elif key == "alphabet":
            try:
                alphabet = Alphabet(tuple(rest.split()))
            except ValueError as exc:
                raise ParseError(str(exc), no) from None
        elif key == "window":
            try:
                window = parse_shape(rest, dim)
            except (ParseError, ValueError) as exc:
                raise ParseError(str(exc), no) from None
        elif key == "entry":
            if ":" not in rest:
                raise ParseError("entry needs ': value'", no)
            toks, _, val = rest.rpartition(":")
            entries.append((no, toks.split(), _parse_rational(val, no)))
        elif key == "default":
            default = _parse_rational(rest, no)
        else:
            raise ParseError(f"unknown directive {key!r}", no)
    if dim is None or alphabet is None or window is None:
        raise ParseError("potential file needs dim, alphabet and window")
    table = {}
    for no, toks, val in entries:
        if len(toks) != len(window):
            raise ParseError(f"entry has {len(toks)} symbols, window has {len(window)} sites", no)
        try:
            key = tuple(alphabet.index(t) for t in toks)
        except KeyError as exc:
            raise ParseError(str(exc), no) from None
        if key in table:
            raise ParseError("duplicate entry", no)
        table[key] = val
    try:
        return LocallyConstantPotential(alphabet, window, table, default)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def format_potential(p: LocallyConstantPotential) -> str:
    out = [f"dim {p.dim}", "alphabet " + " ".join(p.alphabet.symbols),
           "window " + " ".join(format_site(s) for s in p.window.sites)]
    for key, val in p._table.items():
        out.append("entry " + " ".join(p.alphabet.symbols[s] for s in key) + " : " + _format_rational(val))
    out.append("default " + _format_rational(p.default))
    return "\n".join(out) + "\n"
