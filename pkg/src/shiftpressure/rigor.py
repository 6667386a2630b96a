"""Directed-rounded dyadic interval arithmetic.

A ``Dyadic`` is ``m * 2**e`` with Python integers, so exponents are
unbounded and partition functions never overflow.  ``DyadicInterval``
rounds every endpoint outward; ``exp`` and ``log`` use argument reduction
plus Taylor/atanh series with explicit remainder bounds.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, PrecisionExhausted

DEFAULT_PREC = 96


class Dyadic:
    """Exact dyadic rational ``m * 2**e`` normalised to odd ``m`` (or zero)."""

    __slots__ = ("m", "e")

    def __init__(self, m: int, e: int = 0):
        m, e = int(m), int(e)
        if m == 0:
            e = 0
        else:
            tz = (m & -m).bit_length() - 1
            if tz:
                m >>= tz
                e += tz
        self.m = m
        self.e = e

    @classmethod
    def from_float(cls, x: float) -> "Dyadic":
        if not math.isfinite(x):
            raise ValueError("cannot convert a non-finite float")
        num, den = float(x).as_integer_ratio()
        return cls(num, -(den.bit_length() - 1))

    def sign(self) -> int:
        return (self.m > 0) - (self.m < 0)

    def top(self) -> int:
        """Smallest t with |self| < 2**t (meaningless for zero)."""
        return self.e + abs(self.m).bit_length()

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.m, self.e)

    def __abs__(self) -> "Dyadic":
        return Dyadic(abs(self.m), self.e)

    def shift(self, k: int) -> "Dyadic":
        return Dyadic(self.m, self.e + k)

    def to_fraction(self) -> Fraction:
        if self.e >= 0:
            return Fraction(self.m << self.e)
        return Fraction(self.m, 1 << -self.e)

    def __float__(self) -> float:
        if self.m == 0:
            return 0.0
        b = abs(self.m).bit_length()
        if b > 60:
            m = self.m >> (b - 60)
            e = self.e + b - 60
        else:
            m, e = self.m, self.e
        try:
            return math.ldexp(float(m), e)
        except OverflowError:
            return math.copysign(math.inf, m)

    def cmp(self, other: "Dyadic") -> int:
        sa, sb = self.sign(), other.sign()
        if sa != sb:
            return (sa > sb) - (sa < sb)
        if sa == 0:
            return 0
        ta, tb = self.top(), other.top()
        if ta != tb:
            r = 1 if ta > tb else -1
            return r if sa > 0 else -r
        e = min(self.e, other.e)
        a = self.m << (self.e - e)
        b = other.m << (other.e - e)
        return (a > b) - (a < b)

    def __eq__(self, other) -> bool:
        if isinstance(other, Dyadic):
            return self.m == other.m and self.e == other.e
        if isinstance(other, (int, Fraction)):
            return self.to_fraction() == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.m, self.e))

    def __lt__(self, other: "Dyadic") -> bool:
        return self.cmp(_as_dyadic_exact(other)) < 0

    def __le__(self, other: "Dyadic") -> bool:
        return self.cmp(_as_dyadic_exact(other)) <= 0

    def __gt__(self, other: "Dyadic") -> bool:
        return self.cmp(_as_dyadic_exact(other)) > 0

    def __ge__(self, other: "Dyadic") -> bool:
        return self.cmp(_as_dyadic_exact(other)) >= 0

    def __repr__(self) -> str:
        return f"{self.m}*2^{self.e}"


ZERO = Dyadic(0)
ONE = Dyadic(1)


def _as_dyadic_exact(x) -> Dyadic:
    if isinstance(x, Dyadic):
        return x
    if isinstance(x, int):
        return Dyadic(x)
    if isinstance(x, float):
        return Dyadic.from_float(x)
    if isinstance(x, Fraction) and (x.denominator & (x.denominator - 1)) == 0:
        return Dyadic(x.numerator, -(x.denominator.bit_length() - 1))
    raise TypeError(f"{x!r} is not an exact dyadic value")


def cmp_real(d: Dyadic, q) -> int:
    """Exact comparison of a dyadic with an int, Fraction, float or Dyadic."""
    if isinstance(q, (Dyadic, int, float)):
        return d.cmp(_as_dyadic_exact(q))
    q = Fraction(q)
    # d ? n/m  <=>  d*m ? n
    prod = Dyadic(d.m * q.denominator, d.e)
    return prod.cmp(Dyadic(q.numerator))


# --- rounding primitives ----------------------------------------------------

def _round(m: int, e: int, p: int, up: bool) -> Dyadic:
    if m == 0:
        return ZERO
    b = abs(m).bit_length()
    if b <= p:
        return Dyadic(m, e)
    sh = b - p
    q = m >> sh
    if up and (q << sh) != m:
        q += 1
    return Dyadic(q, e + sh)


def round_dyadic(x: Dyadic, p: int, up: bool) -> Dyadic:
    return _round(x.m, x.e, p, up)


def d_add(a: Dyadic, b: Dyadic, p: int, up: bool) -> Dyadic:
    if a.m == 0:
        return _round(b.m, b.e, p, up)
    if b.m == 0:
        return _round(a.m, a.e, p, up)
    if a.top() < b.top():
        a, b = b, a
    floor_e = a.top() - p - 4
    if b.top() < floor_e:
        # b is far below the last kept bit of a: replace it by a bound on the
        # correct side so the exact sum stays small.
        if (b.m > 0) == up:
            b = Dyadic(1 if up else -1, floor_e)
        else:
            return _round(a.m, a.e, p, up)
    e = min(a.e, b.e)
    m = (a.m << (a.e - e)) + (b.m << (b.e - e))
    return _round(m, e, p, up)


def d_sub(a: Dyadic, b: Dyadic, p: int, up: bool) -> Dyadic:
    return d_add(a, -b, p, up)


def d_mul(a: Dyadic, b: Dyadic, p: int, up: bool) -> Dyadic:
    return _round(a.m * b.m, a.e + b.e, p, up)


def d_div(a: Dyadic, b: Dyadic, p: int, up: bool) -> Dyadic:
    if b.m == 0:
        raise ZeroDivisionError("dyadic division by zero")
    if a.m == 0:
        return ZERO
    neg = (a.m < 0) != (b.m < 0)
    am, bm = abs(a.m), abs(b.m)
    sh = max(0, p + 2 + bm.bit_length() - am.bit_length())
    q, r = divmod(am << sh, bm)
    e = a.e - b.e - sh
    if neg:
        q = -q
        if r and not up:
            q -= 1
    elif r and up:
        q += 1
    return _round(q, e, p, up)


def dyadic_from_rational(q, p: int, up: bool) -> Dyadic:
    if isinstance(q, Dyadic):
        return round_dyadic(q, p, up)
    q = Fraction(q)
    return d_div(Dyadic(q.numerator), Dyadic(q.denominator), p, up)


# --- intervals --------------------------------------------------------------

def _is_exact_real(x) -> bool:
    return isinstance(x, (int, Fraction, Dyadic, Rational)) and not isinstance(x, bool)


class DyadicInterval:
    """Closed interval [lo, hi] with dyadic endpoints; ``None`` means infinite."""

    __slots__ = ("lo", "hi", "prec")

    def __init__(self, lo: Dyadic | None, hi: Dyadic | None, prec: int = DEFAULT_PREC):
        if lo is not None and hi is not None and lo.cmp(hi) > 0:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi
        self.prec = int(prec)

    # construction ----------------------------------------------------------
    @classmethod
    def point(cls, x, prec: int = DEFAULT_PREC) -> "DyadicInterval":
        if isinstance(x, DyadicInterval):
            return x
        if isinstance(x, Dyadic):
            return cls(x, x, prec)
        if isinstance(x, float):
            d = Dyadic.from_float(x)
            return cls(d, d, prec)
        if isinstance(x, int):
            d = Dyadic(x)
            return cls(d, d, prec)
        q = Fraction(x)
        if (q.denominator & (q.denominator - 1)) == 0:
            d = _as_dyadic_exact(q)
            return cls(d, d, prec)
        return cls(dyadic_from_rational(q, prec, False), dyadic_from_rational(q, prec, True), prec)

    @classmethod
    def hull_of(cls, lo, hi, prec: int = DEFAULT_PREC) -> "DyadicInterval":
        a = cls.point(lo, prec)
        b = cls.point(hi, prec)
        return cls(a.lo, b.hi, prec)

    @classmethod
    def upper_only(cls, hi: Dyadic, prec: int = DEFAULT_PREC) -> "DyadicInterval":
        return cls(None, hi, prec)

    # helpers ---------------------------------------------------------------
    def is_finite(self) -> bool:
        return self.lo is not None and self.hi is not None

    def _p(self, other=None) -> int:
        if isinstance(other, DyadicInterval):
            return max(self.prec, other.prec)
        return self.prec

    def width(self) -> Dyadic | None:
        if not self.is_finite():
            return None
        return d_sub(self.hi, self.lo, self.prec + 8, True)

    def width_float(self) -> float:
        w = self.width()
        return math.inf if w is None else float(w)

    def mid(self) -> Fraction:
        return (self.lo.to_fraction() + self.hi.to_fraction()) / 2

    def contains(self, x) -> bool:
        if isinstance(x, DyadicInterval):
            okl = self.lo is None or (x.lo is not None and self.lo.cmp(x.lo) <= 0)
            okh = self.hi is None or (x.hi is not None and x.hi.cmp(self.hi) <= 0)
            return okl and okh
        okl = self.lo is None or cmp_real(self.lo, x) <= 0
        okh = self.hi is None or cmp_real(self.hi, x) >= 0
        return okl and okh

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def intersects(self, other: "DyadicInterval") -> bool:
        if self.hi is not None and other.lo is not None and self.hi.cmp(other.lo) < 0:
            return False
        if other.hi is not None and self.lo is not None and other.hi.cmp(self.lo) < 0:
            return False
        return True

    def intersect(self, other: "DyadicInterval") -> "DyadicInterval":
        if not self.intersects(other):
            raise ValueError("intervals are disjoint")
        lo = _dmax(self.lo, other.lo)
        hi = _dmin(self.hi, other.hi)
        return DyadicInterval(lo, hi, self._p(other))

    def hull(self, other: "DyadicInterval") -> "DyadicInterval":
        lo = None if self.lo is None or other.lo is None else (self.lo if self.lo.cmp(other.lo) <= 0 else other.lo)
        hi = None if self.hi is None or other.hi is None else (self.hi if self.hi.cmp(other.hi) >= 0 else other.hi)
        return DyadicInterval(lo, hi, self._p(other))

    def with_prec(self, p: int) -> "DyadicInterval":
        lo = None if self.lo is None else round_dyadic(self.lo, p, False)
        hi = None if self.hi is None else round_dyadic(self.hi, p, True)
        return DyadicInterval(lo, hi, p)

    def shift_exp(self, k: int) -> "DyadicInterval":
        """Multiply by 2**k exactly."""
        return DyadicInterval(None if self.lo is None else self.lo.shift(k),
                              None if self.hi is None else self.hi.shift(k), self.prec)

    def lower_float(self) -> float:
        return to_float_directed(self.lo, False) if self.lo is not None else -math.inf

    def upper_float(self) -> float:
        return to_float_directed(self.hi, True) if self.hi is not None else math.inf

    # arithmetic ------------------------------------------------------------
    def __neg__(self) -> "DyadicInterval":
        return DyadicInterval(None if self.hi is None else -self.hi, None if self.lo is None else -self.lo, self.prec)

    def __add__(self, other) -> "DyadicInterval":
        if not isinstance(other, DyadicInterval):
            if not _is_exact_real(other) and not isinstance(other, float):
                return NotImplemented
            other = DyadicInterval.point(other, self.prec)
        p = self._p(other)
        lo = None if self.lo is None or other.lo is None else d_add(self.lo, other.lo, p, False)
        hi = None if self.hi is None or other.hi is None else d_add(self.hi, other.hi, p, True)
        return DyadicInterval(lo, hi, p)

    __radd__ = __add__

    def __sub__(self, other) -> "DyadicInterval":
        if not isinstance(other, DyadicInterval):
            if not _is_exact_real(other) and not isinstance(other, float):
                return NotImplemented
            other = DyadicInterval.point(other, self.prec)
        return self + (-other)

    def __rsub__(self, other) -> "DyadicInterval":
        return (-self) + other

    def __mul__(self, other) -> "DyadicInterval":
        if not isinstance(other, DyadicInterval):
            if not _is_exact_real(other) and not isinstance(other, float):
                return NotImplemented
            other = DyadicInterval.point(other, self.prec)
        p = self._p(other)
        if not (self.is_finite() and other.is_finite()):
            return _mul_unbounded(self, other, p)
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        if a.m >= 0 and c.m >= 0:
            return DyadicInterval(d_mul(a, c, p, False), d_mul(b, d, p, True), p)
        if b.m <= 0 and d.m <= 0:
            return DyadicInterval(d_mul(b, d, p, False), d_mul(a, c, p, True), p)
        los = [d_mul(x, y, p, False) for x in (a, b) for y in (c, d)]
        his = [d_mul(x, y, p, True) for x in (a, b) for y in (c, d)]
        return DyadicInterval(min(los, key=_key), max(his, key=_key), p)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "DyadicInterval":
        if not isinstance(other, DyadicInterval):
            if not _is_exact_real(other) and not isinstance(other, float):
                return NotImplemented
            other = DyadicInterval.point(other, self.prec)
        p = self._p(other)
        if not other.is_finite() or (other.lo.m <= 0 <= other.hi.m):
            raise ZeroDivisionError("divisor interval contains zero")
        if not self.is_finite():
            if other.lo.m > 0:
                lo = None if self.lo is None else (d_div(self.lo, other.hi if self.lo.m >= 0 else other.lo, p, False))
                hi = None if self.hi is None else (d_div(self.hi, other.lo if self.hi.m >= 0 else other.hi, p, True))
                return DyadicInterval(lo, hi, p)
            return -(self / (-other))
        los = [d_div(x, y, p, False) for x in (self.lo, self.hi) for y in (other.lo, other.hi)]
        his = [d_div(x, y, p, True) for x in (self.lo, self.hi) for y in (other.lo, other.hi)]
        return DyadicInterval(min(los, key=_key), max(his, key=_key), p)

    def __rtruediv__(self, other) -> "DyadicInterval":
        return DyadicInterval.point(other, self.prec) / self

    def square(self) -> "DyadicInterval":
        p = self.prec
        a, b = self.lo, self.hi
        if a.m >= 0:
            return DyadicInterval(d_mul(a, a, p, False), d_mul(b, b, p, True), p)
        if b.m <= 0:
            return DyadicInterval(d_mul(b, b, p, False), d_mul(a, a, p, True), p)
        hi = max(d_mul(a, a, p, True), d_mul(b, b, p, True), key=_key)
        return DyadicInterval(ZERO, hi, p)

    def __pow__(self, k: int) -> "DyadicInterval":
        return iv_pow(self, k)

    # presentation ----------------------------------------------------------
    def decimal(self, digits: int = 15) -> str:
        lo = "-inf" if self.lo is None else dyadic_to_decimal(self.lo, digits, False)
        hi = "+inf" if self.hi is None else dyadic_to_decimal(self.hi, digits, True)
        return f"{lo} ≤ x ≤ {hi}"

    def dyadic_form(self) -> str:
        lo = "-inf" if self.lo is None else f"{self.lo.m}*2^{self.lo.e}"
        hi = "+inf" if self.hi is None else f"{self.hi.m}*2^{self.hi.e}"
        return f"{lo} ≤ x ≤ {hi}"

    def __str__(self) -> str:
        return self.decimal()

    def __repr__(self) -> str:
        return f"DyadicInterval({self.decimal(12)})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, DyadicInterval) and self.lo == other.lo and self.hi == other.hi)

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))


def _key(d: Dyadic):
    # sort key usable with min/max
    return _CmpKey(d)


class _CmpKey:
    __slots__ = ("d",)

    def __init__(self, d):
        self.d = d

    def __lt__(self, other):
        return self.d.cmp(other.d) < 0


def _dmax(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a if a.cmp(b) >= 0 else b


def _dmin(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a if a.cmp(b) <= 0 else b


def _mul_unbounded(x: DyadicInterval, y: DyadicInterval, p: int) -> DyadicInterval:
    # only the cases needed downstream: one factor a positive finite interval
    if y.is_finite() and y.lo.m > 0:
        x, y = y, x
    if not (x.is_finite() and x.lo.m > 0):
        raise ValueError("unbounded interval product needs a positive finite factor")
    lo = None
    hi = None
    if y.lo is not None:
        lo = d_mul(y.lo, x.lo if y.lo.m >= 0 else x.hi, p, False)
    if y.hi is not None:
        hi = d_mul(y.hi, x.hi if y.hi.m >= 0 else x.lo, p, True)
    return DyadicInterval(lo, hi, p)


def to_float_directed(d: Dyadic, up: bool) -> float:
    f = float(d)
    if math.isinf(f):
        if (f > 0) == up:
            return f
        return math.copysign(np.finfo(float).max, f)
    c = cmp_real(d, f)
    if up and c > 0:
        f = math.nextafter(f, math.inf)
    elif not up and c < 0:
        f = math.nextafter(f, -math.inf)
    return f


def dyadic_to_decimal(d: Dyadic, digits: int, up: bool) -> str:
    """Scientific decimal with ``digits`` significant digits, rounded down or up."""
    if d.m == 0:
        return "0"
    neg = d.m < 0
    # work with |d| and flip the rounding direction for negatives
    mag_up = up != neg
    m, e = abs(d.m), d.e
    approx10 = math.floor((m.bit_length() + e) * 0.30102999566398120) - 1
    shift = digits - 1 - approx10
    # value * 10**shift = m * 2**e * 10**shift
    num, den = m, 1
    if e >= 0:
        num <<= e
    else:
        den <<= -e
    if shift >= 0:
        num *= 10**shift
    else:
        den *= 10 ** (-shift)
    q, r = divmod(num, den)
    if q >= 10**digits:
        shift -= 1
        if shift >= 0:
            num2, den2 = m * 10**shift, 1
        else:
            num2, den2 = m, 10 ** (-shift)
        if e >= 0:
            num2 <<= e
        else:
            den2 <<= -e
        q, r = divmod(num2, den2)
    if r and mag_up:
        q += 1
    s = str(q)
    exp10 = len(s) - 1 - shift
    mant = s[0] + ("." + s[1:] if len(s) > 1 else "")
    sign = "-" if neg else ""
    if -5 <= exp10 < 16:
        # plain positional form
        digits_str = s
        point = len(s) - shift
        if point <= 0:
            body = "0." + "0" * (-point) + digits_str
        elif point >= len(digits_str):
            body = digits_str + "0" * (point - len(digits_str))
        else:
            body = digits_str[:point] + "." + digits_str[point:]
        return sign + body
    return f"{sign}{mant}e{exp10:+d}"


# --- transcendental functions ----------------------------------------------

@lru_cache(maxsize=64)
def _ln2_bounds(p: int) -> tuple[Dyadic, Dyadic]:
    """ln 2 = sum_i 2 / ((2i+1) 3^(2i+1)), truncated with floor terms."""
    scale = p + 16
    one = 1 << scale
    total = 0
    i = 0
    pow3 = 3
    nterms = 0
    while True:
        term = (2 * one) // ((2 * i + 1) * pow3)
        if term == 0:
            break
        total += term
        nterms += 1
        i += 1
        pow3 *= 9
    # each floor loses < 1 unit; the omitted tail is below one unit too
    lo = Dyadic(total, -scale)
    hi = Dyadic(total + nterms + 2, -scale)
    return round_dyadic(lo, p, False), round_dyadic(hi, p, True)


def ln2_interval(p: int = DEFAULT_PREC) -> DyadicInterval:
    pq = ((p + 63) // 64) * 64
    lo, hi = _ln2_bounds(pq)
    return DyadicInterval(lo, hi, p)


_LN2_INV_APPROX = Fraction(1 / math.log(2)).limit_denominator(1 << 62)


def _exp_point(x, p: int) -> DyadicInterval:
    """Enclosure of e^x for an exact rational or dyadic x."""
    if isinstance(x, Dyadic):
        xq = x
        is_zero = x.m == 0
    else:
        xq = Fraction(x)
        is_zero = xq == 0
    if is_zero:
        return DyadicInterval(ONE, ONE, p)
    xf = float(xq)
    if not math.isfinite(xf) or abs(xf) > 2.0**62:
        raise PrecisionExhausted(f"exp argument {xf:g} out of range")
    # nearest multiple of ln 2; any j with |x - j ln2| < 1/2 is fine
    frac = xq.to_fraction() if isinstance(xq, Dyadic) else xq
    j = math.floor(frac * _LN2_INV_APPROX + Fraction(1, 2))
    s = 10
    wp = p + 2 * s + j.bit_length() + 24
    xi = DyadicInterval.point(xq, wp)
    r = xi - ln2_interval(wp) * j
    if not (cmp_real(r.lo, Fraction(-1, 2)) > 0 and cmp_real(r.hi, Fraction(1, 2)) < 0):
        raise PrecisionExhausted("exp argument reduction failed")
    y = r.shift_exp(-s)  # |y| < 2^-(s+1)
    # terms until (s+1)(N+1) - 1 >= wp + 4
    n_terms = (wp + 5) // (s + 1) + 1
    total = DyadicInterval(ONE, ONE, wp)
    term = DyadicInterval(ONE, ONE, wp)
    for i in range(1, n_terms + 1):
        term = term * y / i
        total = total + term
    # remainder: |sum_{i>N} y^i/i!| <= 2 |y|^{N+1}/(N+1)! <= 2^{1-(s+1)(N+1)}
    rexp = 1 - (s + 1) * (n_terms + 1)
    total = total + DyadicInterval(Dyadic(-1, rexp), Dyadic(1, rexp), wp)
    for _ in range(s):
        total = total.square()
    return total.shift_exp(j).with_prec(p + 2)


def iv_exp(x, p: int = DEFAULT_PREC) -> DyadicInterval:
    """Enclosure of e^x for x rational, dyadic or an interval (monotone in x)."""
    if isinstance(x, DyadicInterval):
        if not x.is_finite():
            raise ValueError("exp of an unbounded interval")
        if x.lo == x.hi:
            return _exp_point(x.lo, p)
        lo = _exp_point(x.lo, p)
        hi = _exp_point(x.hi, p)
        return DyadicInterval(lo.lo, hi.hi, p)
    return _exp_point(x, p)


def _log_dyadic(x: Dyadic, p: int) -> DyadicInterval:
    if x.m <= 0:
        raise ValueError("log of a nonpositive number")
    m, e = x.m, x.e
    t = m.bit_length()
    # x = y * 2^k with y = m / 2^t in [1/2, 1)
    k = e + t
    ynum, yexp = m, -t
    if 2 * m * m < (1 << (2 * t)):
        yexp += 1
        k -= 1
    y = Dyadic(ynum, yexp)  # y in [1/sqrt2, sqrt2)
    wp = p + 20 + max(1, abs(k)).bit_length()
    yi = DyadicInterval(y, y, wp)
    z = (yi - 1) / (yi + 1)  # |z| < 0.1716 < 2^-2.5
    z2 = z.square()
    total = DyadicInterval(ZERO, ZERO, wp)
    power = z
    n_terms = (wp + 6) // 5 + 1
    for i in range(n_terms):
        total = total + power / (2 * i + 1)
        power = power * z2
    # tail of atanh beyond N terms: |z|^{2N+1}/((2N+1)(1-z^2)) <= 2 * 2^{-2.5(2N+1)}
    rexp = 1 - (5 * n_terms) // 2
    total = total + DyadicInterval(Dyadic(-1, rexp), Dyadic(1, rexp), wp)
    res = total.shift_exp(1)
    if k:
        res = res + ln2_interval(wp) * k
    return res.with_prec(p + 2)


def iv_log(x, p: int = DEFAULT_PREC) -> DyadicInterval:
    """Enclosure of ln over x; requires x.lo > 0."""
    if not isinstance(x, DyadicInterval):
        x = DyadicInterval.point(x, p + 8)
    if x.lo is None or x.lo.m <= 0:
        raise ValueError("log needs a positive lower bound")
    if x.hi is None:
        return DyadicInterval(_log_dyadic(x.lo, p).lo, None, p)
    lo = _log_dyadic(x.lo, p)
    if x.lo == x.hi:
        return DyadicInterval(lo.lo, lo.hi, p)
    hi = _log_dyadic(x.hi, p)
    return DyadicInterval(lo.lo, hi.hi, p)


def iv_pow(x: DyadicInterval, k: int) -> DyadicInterval:
    if k < 0:
        return 1 / iv_pow(x, -k)
    result = DyadicInterval(ONE, ONE, x.prec)
    base = x
    while k:
        if k & 1:
            result = result * base
        k >>= 1
        if k:
            base = base.square()
    return result


def iv_root(x: DyadicInterval, k: int, p: int | None = None) -> DyadicInterval:
    """k-th root of a positive interval via exp(log(x)/k)."""
    p = p or x.prec
    if k == 1:
        return x
    return iv_exp(iv_log(x, p + 8) / k, p)


def iv_sum(xs: Iterable, p: int = DEFAULT_PREC) -> DyadicInterval:
    total = DyadicInterval(ZERO, ZERO, p)
    for x in xs:
        total = total + x
    return total


def iv_mul(a, b) -> DyadicInterval:
    return DyadicInterval.point(a) * b


def iv_div(a, b) -> DyadicInterval:
    return DyadicInterval.point(a) / b


def iv_log_int(n: int, p: int = DEFAULT_PREC) -> DyadicInterval:
    return iv_log(DyadicInterval.point(int(n), p), p)


def exp_weighted_sum(counts: dict[int, int] | Sequence[tuple[int, int]], denom: int, p: int = DEFAULT_PREC,
                     shift: int = 0) -> DyadicInterval:
    """Enclosure of sum_j c_j * exp((j - shift) / denom) for integer j, c_j >= 0."""
    items = counts.items() if isinstance(counts, dict) else counts
    total = DyadicInterval(ZERO, ZERO, p + 8)
    for j, c in items:
        if c:
            total = total + _exp_point(Fraction(int(j) - shift, denom), p + 8) * int(c)
    return total.with_prec(p)


# --- interval matrices ------------------------------------------------------

def _obj(a) -> np.ndarray:
    out = np.empty(np.shape(a), dtype=object)
    out[...] = a
    return out


def _bfp_round(mat: np.ndarray, exp: int, p: int, up: bool) -> tuple[np.ndarray, int]:
    """Round an integer matrix (block floating point) to p-bit mantissas."""
    if mat.size == 0:
        return mat, exp
    bits = max(abs(int(v)).bit_length() for v in mat.flat)
    if bits <= p:
        return mat, exp
    sh = bits - p
    if up:
        out = -((-mat) >> sh)
    else:
        out = mat >> sh
    return out, exp + sh


class IntervalMatrix:
    """Square matrix of intervals stored as two integer mantissa blocks.

    Entry (i, j) lies in ``[lo[i, j] * 2**lo_exp, hi[i, j] * 2**hi_exp]``.
    """

    def __init__(self, lo: np.ndarray, lo_exp: int, hi: np.ndarray, hi_exp: int,
                 prec: int = DEFAULT_PREC, labels: Sequence | None = None):
        lo, hi = _obj(lo), _obj(hi)
        if lo.ndim != 2 or lo.shape[0] != lo.shape[1] or lo.shape != hi.shape:
            raise DimensionMismatch("interval matrix must be square")
        if lo.shape[0] == 0:
            raise DimensionMismatch("interval matrix must be nonempty")
        self.lo, self.lo_exp = _bfp_round(lo, int(lo_exp), prec + 4, False)
        self.hi, self.hi_exp = _bfp_round(hi, int(hi_exp), prec + 4, True)
        self.prec = int(prec)
        self.labels = tuple(labels) if labels is not None else tuple(range(lo.shape[0]))

    @property
    def n(self) -> int:
        return self.lo.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.lo.shape

    def __getitem__(self, ij) -> DyadicInterval:
        i, j = ij
        return DyadicInterval(Dyadic(int(self.lo[i, j]), self.lo_exp), Dyadic(int(self.hi[i, j]), self.hi_exp),
                              self.prec)

    def is_nonnegative(self) -> bool:
        return all(int(v) >= 0 for v in self.lo.flat)

    @classmethod
    def from_intervals(cls, rows: Sequence[Sequence[DyadicInterval]], prec: int = DEFAULT_PREC,
                       labels: Sequence | None = None) -> "IntervalMatrix":
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise DimensionMismatch("matrix rows must have equal length")
        los = [x.lo for r in rows for x in r]
        his = [x.hi for r in rows for x in r]
        lo, le = _common_block(los, prec, False)
        hi, he = _common_block(his, prec, True)
        return cls(lo.reshape(n, n), le, hi.reshape(n, n), he, prec, labels)

    @classmethod
    def from_exact(cls, entries, prec: int = DEFAULT_PREC, labels: Sequence | None = None) -> "IntervalMatrix":
        rows = [[DyadicInterval.point(x, prec) for x in r] for r in entries]
        return cls.from_intervals(rows, prec, labels)

    @classmethod
    def identity(cls, n: int, prec: int = DEFAULT_PREC) -> "IntervalMatrix":
        eye = _obj(np.eye(n, dtype=np.int64).astype(object))
        return cls(eye, 0, eye.copy(), 0, prec)

    def __matmul__(self, other: "IntervalMatrix") -> "IntervalMatrix":
        return iv_matmul(self, other)

    def entry_sum(self) -> DyadicInterval:
        return DyadicInterval(Dyadic(int(sum(self.lo.flat)), self.lo_exp), Dyadic(int(sum(self.hi.flat)), self.hi_exp),
                              self.prec)

    def row_sums(self) -> tuple[list[int], int, list[int], int]:
        return ([int(v) for v in self.lo.sum(axis=1)], self.lo_exp,
                [int(v) for v in self.hi.sum(axis=1)], self.hi_exp)


def _common_block(vals: list[Dyadic], p: int, up: bool) -> tuple[np.ndarray, int]:
    nz = [v for v in vals if v.m != 0]
    if not nz:
        return _obj(np.zeros(len(vals), dtype=np.int64).astype(object)), 0
    top = max(v.top() for v in nz)
    e0 = top - (p + 8)
    emin = min(v.e for v in nz)
    e0 = max(e0, emin)
    out = []
    for v in vals:
        if v.m == 0:
            out.append(0)
            continue
        if v.e >= e0:
            out.append(v.m << (v.e - e0))
        else:
            sh = e0 - v.e
            q = v.m >> sh
            if up and (q << sh) != v.m:
                q += 1
            out.append(q)
    return _obj(np.array(out, dtype=object)), e0


def _align(a: np.ndarray, ea: int, b: np.ndarray, eb: int) -> tuple[np.ndarray, np.ndarray, int]:
    e = min(ea, eb)
    return a * (1 << (ea - e)) if ea > e else a, b * (1 << (eb - e)) if eb > e else b, e


def iv_matmul(a: IntervalMatrix, b: IntervalMatrix) -> IntervalMatrix:
    if a.n != b.n:
        raise DimensionMismatch("matrix sizes differ")
    p = max(a.prec, b.prec)
    if a.is_nonnegative() and b.is_nonnegative():
        lo = a.lo.dot(b.lo)
        hi = a.hi.dot(b.hi)
        return IntervalMatrix(lo, a.lo_exp + b.lo_exp, hi, a.hi_exp + b.hi_exp, p, a.labels)
    n = a.n
    # general signs: entrywise min/max over the four endpoint products
    prods = [(a.lo, a.lo_exp, b.lo, b.lo_exp), (a.lo, a.lo_exp, b.hi, b.hi_exp),
             (a.hi, a.hi_exp, b.lo, b.lo_exp), (a.hi, a.hi_exp, b.hi, b.hi_exp)]
    e = min(x[1] + x[3] for x in prods)
    lo = _obj(np.zeros((n, n), dtype=np.int64).astype(object))
    hi = _obj(np.zeros((n, n), dtype=np.int64).astype(object))
    for k in range(n):
        cands = []
        for am, ae, bm, be in prods:
            outer = np.multiply.outer(am[:, k], bm[k, :])
            cands.append(outer * (1 << (ae + be - e)))
        lo = lo + np.minimum.reduce(cands)
        hi = hi + np.maximum.reduce(cands)
    return IntervalMatrix(lo, e, hi, e, p, a.labels)


def iv_matpow(m: IntervalMatrix, k: int) -> IntervalMatrix:
    if k < 0:
        raise ValueError("negative matrix power")
    result = IntervalMatrix.identity(m.n, m.prec)
    result.labels = m.labels
    base = m
    first = True
    while k:
        if k & 1:
            result = base if first else iv_matmul(result, base)
            first = False
        k >>= 1
        if k:
            base = iv_matmul(base, base)
    return result


def row_sum_log_bounds(m: IntervalMatrix, p: int | None = None) -> tuple[DyadicInterval, DyadicInterval | None]:
    """Enclosures of log(max row sum of m.hi) and log(min row sum of m.lo).

    The second entry is None when some row of the lower matrix sums to zero.
    """
    p = p or m.prec
    lo_s, le, hi_s, he = m.row_sums()
    hmax = max(hi_s)
    lmin = min(lo_s)
    up = iv_log(DyadicInterval.point(Dyadic(hmax, he), p), p)
    down = iv_log(DyadicInterval.point(Dyadic(lmin, le), p), p) if lmin > 0 else None
    return up, down


def iv_row_sum_bounds(m: IntervalMatrix, k: int) -> DyadicInterval:
    """Enclosure of the spectral radius of a nonnegative m from the row sums of m^k.

    min_i rowsum_i(m^k) <= rho(m)^k <= max_i rowsum_i(m^k) for every
    nonnegative matrix.  When the lower matrix has a zero row sum only the
    upper bound is informative and the returned interval starts at 0.
    """
    if not m.is_nonnegative():
        raise ValueError("row-sum bounds need a nonnegative matrix")
    if k < 1:
        raise ValueError("k must be positive")
    pk = iv_matpow(m, k)
    lo_s, le, hi_s, he = pk.row_sums()
    hmax, lmin = max(hi_s), min(lo_s)
    p = m.prec
    if hmax == 0:
        return DyadicInterval(ZERO, ZERO, p)
    hi = iv_root(DyadicInterval.point(Dyadic(hmax, he), p + 8), k, p + 8).hi
    if lmin == 0:
        return DyadicInterval(ZERO, round_dyadic(hi, p, True), p)
    lo = iv_root(DyadicInterval.point(Dyadic(lmin, le), p + 8), k, p + 8).lo
    return DyadicInterval(round_dyadic(lo, p, False), round_dyadic(hi, p, True), p)
