import itertools
import math
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from shiftpressure.errors import EmptySubshift, ResourceLimit
from shiftpressure.language import ExactSI, ExtendabilityParams, FullShift, LocalOverapprox
from shiftpressure.lattice import Shape, box_from_sides
from shiftpressure.potential import LocallyConstantPotential, PotentialOracle, single_site, zero_potential
from shiftpressure.pressure import (BoxSummer, Budget, Method, UpperSequence, certified_pressure,
                                    diagonal_indices, effective_gap, modified_partition_function,
                                    partition_function, pressure_upper_sequence, sandwich_bounds,
                                    upper_bound_from_shape)
from shiftpressure.pressure import adaptive_sandwich
from shiftpressure.rigor import DyadicInterval
from shiftpressure.transfer import perron_pressure_1d
from shiftpressure.subshift import Alphabet, ForbiddenEnumeration, Pattern, SftSpec, golden_mean, hard_squares

A2 = Alphabet(("0", "1"))
F1 = SftSpec.full_shift(A2, 1)
LINE3 = Shape([(0,), (1,), (2,)])


def encloses(iv, x):
    return iv.contains(oracles.mpf_to_fraction(x))


def test_partition_examples():
    zero = zero_potential(A2, 1)
    assert partition_function(LINE3, F1, zero).contains(8)
    assert partition_function(LINE3, golden_mean(1), zero).contains(5)
    z = partition_function(Shape([(0,), (1,)]), F1, single_site(A2, 1, [0, 1]))
    assert encloses(z, (1 + mpmath.e) ** 2)


def test_upper_bound_examples():
    zero = zero_potential(A2, 1)
    # the result encloses log(Z.hi) / |f|, so it sits at or just above the exact value
    def near_above(iv, x):
        return iv.hi.to_fraction() >= oracles.mpf_to_fraction(x) and iv.width_float() < 1e-15 \
            and iv.lo.to_fraction() <= oracles.mpf_to_fraction(x) + Fraction(1, 10**12)

    assert near_above(upper_bound_from_shape(LINE3, F1, zero), mpmath.log(2))
    full = upper_bound_from_shape(box_from_sides((3, 3)), SftSpec.full_shift(A2, 2), zero_potential(A2, 2))
    assert near_above(full, mpmath.log(2))
    assert near_above(upper_bound_from_shape(LINE3, golden_mean(1), zero), mpmath.log(5) / 3)
    hs = upper_bound_from_shape(box_from_sides((4, 4)), hard_squares(), zero_potential(A2, 2))
    assert near_above(hs, mpmath.log(1234) / 16)
    # the infimum rule: every shape bounds the entropy from above
    assert hs.lo.to_fraction() >= oracles.mpf_to_fraction(oracles.HARD_SQUARES_BITS * mpmath.log(2))


@st.composite
def window_potentials(draw, dim):
    if dim == 1:
        window = Shape([(0,)] + draw(st.lists(st.sampled_from([(1,), (-1,), (2,)]), max_size=2)))
    else:
        window = Shape([(0, 0)] + draw(st.lists(st.sampled_from([(1, 0), (0, 1)]), max_size=1)))
    keys = list(itertools.product((0, 1), repeat=len(window)))
    table = {k: draw(st.fractions(min_value=-3, max_value=3, max_denominator=6)) for k in keys}
    return LocallyConstantPotential(A2, window, table, 0)


@settings(max_examples=25, deadline=None)
@given(window_potentials(1), st.integers(1, 4), st.sampled_from(["full", "golden"]))
def test_partition_matches_brute_force_1d(pot, n, which):
    spec = F1 if which == "full" else golden_mean(1)
    f = box_from_sides((n,)).shape
    z = partition_function(f, spec, pot, LocalOverapprox(spec))
    assert encloses(z, oracles.brute_partition(f, spec, pot))


@settings(max_examples=15, deadline=None)
@given(window_potentials(2), st.integers(1, 2), st.integers(1, 3))
def test_partition_matches_brute_force_2d(pot, w, h):
    spec = hard_squares()
    f = box_from_sides((w, h)).shape
    z = partition_function(f, spec, pot, LocalOverapprox(spec))
    assert encloses(z, oracles.brute_partition(f, spec, pot))


@settings(max_examples=20, deadline=None)
@given(window_potentials(2), st.integers(1, 3), st.integers(1, 3))
def test_box_sums_match_brute_force(pot, w, h):
    spec = hard_squares()
    summer = BoxSummer(spec, pot, ExactSI(spec))
    assert encloses(summer.exact((w, h)), oracles.brute_box_sum((w, h), spec, pot))


def test_block_bounds_enclose_exact_value():
    spec = hard_squares()
    pot = zero_potential(A2, 2)
    exact = BoxSummer(spec, pot, ExactSI(spec)).exact((12, 12))
    small = BoxSummer(spec, pot, ExactSI(spec), budget=Budget(max_states=60))
    z, how = small.enclose((12, 12))
    assert how == "blocks"
    assert z.lo.cmp(exact.lo) <= 0 and exact.hi.cmp(z.hi) <= 0
    with pytest.raises(ResourceLimit):
        small.exact((12, 12))


def test_modified_partition_examples():
    gm = ForbiddenEnumeration.from_spec(golden_mean(1))
    zero = zero_potential(A2, 1)
    assert modified_partition_function(Shape([(0,)]), ExtendabilityParams(2, 1), gm, zero).contains(2)
    empty = ForbiddenEnumeration(A2, 1, [])
    pot = single_site(A2, 1, [0, Fraction(1, 2)])
    for t, n in ((1, 1), (3, 2)):
        assert modified_partition_function(LINE3, ExtendabilityParams(t, n), empty, pot).intersects(
            partition_function(LINE3, F1, pot))


def test_zhat_dominates_partition_function():
    gm = golden_mean(1)
    enum = ForbiddenEnumeration.from_spec(gm)
    pot = LocallyConstantPotential(A2, Shape([(0,), (1,)]), {(0, 1): Fraction(1, 2)}, Fraction(-1, 3))
    z = partition_function(LINE3, gm, pot)
    for t in (1, 2, 4):
        zh = modified_partition_function(LINE3, ExtendabilityParams(t, 1), enum, pot)
        assert zh.hi.cmp(z.lo) >= 0


def test_sandwich_examples():
    full = SftSpec.full_shift(A2, 2)
    lo, hi = sandwich_bounds(full, zero_potential(A2, 2), 5)
    ln2 = oracles.mpf_to_fraction(mpmath.log(2))
    assert lo.lo.to_fraction() <= ln2 <= hi.hi.to_fraction()
    # float sweep rounding only
    assert hi.hi.to_fraction() - lo.lo.to_fraction() < Fraction(1, 10**12)
    lo, hi = sandwich_bounds(golden_mean(1), zero_potential(A2, 1), 12)
    assert lo.lo.to_fraction() <= oracles.mpf_to_fraction(oracles.LOG_GOLDEN) <= hi.hi.to_fraction()
    with pytest.raises(ValueError):
        sandwich_bounds(golden_mean(1), zero_potential(A2, 1), 2)


def test_certified_pressure_examples():
    full = SftSpec.full_shift(A2, 2)
    est = certified_pressure(full, zero_potential(A2, 2), 10)
    assert encloses(est.value, mpmath.log(2)) and est.value.width_float() <= 2**-10
    pot = single_site(A2, 2, [Fraction(-1, 3), Fraction(5, 4)])
    est = certified_pressure(full, pot, 6)
    assert encloses(est.value, mpmath.log(mpmath.exp(mpmath.mpf(-1) / 3) + mpmath.exp(mpmath.mpf(5) / 4)))


def test_certified_golden_nested_and_consistent():
    gm = golden_mean(1)
    zero = zero_potential(A2, 1)
    prev = None
    for k in (4, 7, 10):
        est = certified_pressure(gm, zero, k)
        assert encloses(est.value, oracles.LOG_GOLDEN)
        assert est.value.width_float() <= 2.0**-k
        assert est.conditional_on == frozenset({"si_gap=1"})
        if prev is not None:
            assert est.value.intersects(prev)
        prev = est.value
        # infimum rule across methods
        assert upper_bound_from_shape(box_from_sides((6,)), gm, zero).hi.cmp(est.value.lo) >= 0


def test_inexact_provider_is_upper_only():
    gm = golden_mean(1)
    est = certified_pressure(gm, zero_potential(A2, 1), 3, LocalOverapprox(gm))
    assert est.method is Method.UpperOnly and est.upper_only and est.value.lo is None
    assert est.value.hi.to_fraction() >= oracles.mpf_to_fraction(oracles.LOG_GOLDEN)


def test_effective_gap_includes_window_spread():
    gm = golden_mean(1)
    pair = LocallyConstantPotential(A2, Shape([(0,), (1,)]), {(1, 0): 1})
    assert effective_gap(ExactSI(gm), zero_potential(A2, 1)) == 1
    assert effective_gap(ExactSI(gm), pair) == 2
    assert effective_gap(FullShift(A2, 1), pair) == 1


def test_adaptive_sandwich_meets_target():
    est = adaptive_sandwich(golden_mean(1), zero_potential(A2, 1), 8)
    assert est.value.width_float() <= 2.0**-8
    assert encloses(est.value, oracles.LOG_GOLDEN)


def test_empty_subshift():
    spec = SftSpec(A2, 1, (Pattern.from_word((0,)), Pattern.from_word((1,))), 0)
    with pytest.raises(EmptySubshift):
        upper_bound_from_shape(LINE3, spec, zero_potential(A2, 1))


def test_diagonal_order():
    idx = list(diagonal_indices(30))
    sums = [sum(x) for x in idx]
    assert sums == sorted(sums)
    assert idx[0] == (1, 1, 1, 1)
    assert len(set(idx)) == len(idx)
    for a, b in zip(idx, idx[1:]):
        if sum(a) == sum(b):
            assert a < b


def test_upper_sequence_examples():
    full = ForbiddenEnumeration(Alphabet(("a", "b", "c")), 1, [])
    seq = pressure_upper_sequence(full, PotentialOracle.exact(zero_potential(full.alphabet, 1)), 40)
    hs = seq.hi_values()
    assert all(x >= y for x, y in zip(hs, hs[1:]))
    assert all(h >= math.log(3) - 1e-12 for h in hs)
    assert hs[-1] <= math.log(3) + 2.0**-3


def test_upper_sequence_running_minimum():
    seq = UpperSequence()
    seq.append(DyadicInterval.point(Fraction(3)))
    seq.append(DyadicInterval.point(Fraction(5)))
    seq.skip("too big")
    seq.append(DyadicInterval.point(Fraction(2)))
    assert seq.hi_values() == [3.0, 3.0, 2.0]
    assert len(seq.gaps) == 1


def test_random_upper_sequences_stay_above_entropy():
    rng = random.Random(4)
    for _ in range(6):
        words = [Pattern.from_word(tuple(rng.randint(0, 1) for _ in range(rng.randint(2, 3))))
                 for _ in range(rng.randint(1, 2))]
        spec = SftSpec(A2, 1, tuple(words))
        try:
            h = perron_pressure_1d(spec, zero_potential(A2, 1), Fraction(1, 10**6))
        except EmptySubshift:
            continue
        seq = pressure_upper_sequence(ForbiddenEnumeration.from_spec(spec),
                                      PotentialOracle.exact(zero_potential(A2, 1)), 60)
        his = seq.hi_values()
        assert all(x >= y for x, y in zip(his, his[1:]))
        assert all(x >= h.value.lower_float() for x in his)
