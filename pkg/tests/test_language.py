import itertools
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from shiftpressure.errors import LanguageUndecided
from shiftpressure.language import (Decision, ExactSI, ExtendabilityParams, FullShift, LocalOverapprox,
                                    UserOracle, canonical_box, compatible, decide_globally_admissible,
                                    default_provider, extendable_set)
from shiftpressure.lattice import Shape, box_from_sides, minkowski_sum
from shiftpressure.subshift import (Alphabet, ForbiddenEnumeration, Pattern, SftSpec,
                                    enumerate_locally_admissible, golden_mean, hard_squares, parse_sft)

DATA = Path(__file__).resolve().parent.parent / "data"
A2 = Alphabet(("0", "1"))


def abc(gap=1):
    return replace(parse_sft((DATA / "abc.sft").read_text()), si_gap=gap)


def word(*syms):
    return Pattern.from_word(syms)


def on_box(b, syms):
    return Pattern(b.shape, syms)


def test_canonical_boxes_nest_with_gap():
    for m in range(3):
        inner = canonical_box(m, 1, 2)
        grown = minkowski_sum(inner, canonical_box(1, 0, 2).shape)
        assert all(s in canonical_box(m + 1, 1, 2) for s in grown.sites)


def test_compatible_golden_zero_center():
    gm = golden_mean(1)
    boxes = [canonical_box(m, 1, 1) for m in range(3)]
    a = on_box(boxes[0], (0,))
    for b in enumerate_locally_admissible(boxes[2], gm):
        assert compatible(a, b, gm, boxes)


def test_compatible_with_own_restriction():
    gm = golden_mean(1)
    boxes = [canonical_box(m, 1, 1) for m in range(3)]
    b = on_box(boxes[2], (1, 0, 1, 0, 0, 1, 0, 0, 1))
    a = b.restrict(boxes[0].shape)
    assert compatible(a, b, gm, boxes)


def test_compatible_abc_b_center_is_dead():
    spec = abc()
    boxes = [canonical_box(m, 1, 1) for m in range(3)]
    a = on_box(boxes[0], (spec.alphabet.index("b"),))
    assert not any(compatible(a, b, spec, boxes) for b in enumerate_locally_admissible(boxes[2], spec))


def test_decide_examples():
    gm = golden_mean(1)
    assert decide_globally_admissible(word(1, 0, 1), gm).decision is Decision.IN
    assert decide_globally_admissible(word(1, 1), gm).decision is Decision.OUT
    spec = abc()
    assert decide_globally_admissible(word(spec.alphabet.index("b")), spec).decision is Decision.OUT


def test_decide_needs_gap_and_matching_dimension():
    with pytest.raises(ValueError):
        decide_globally_admissible(word(0), abc(None))
    with pytest.raises(ValueError):
        decide_globally_admissible(word(0), hard_squares())


def test_decide_is_stable_across_levels():
    spec = abc()
    for w in itertools.product(range(3), repeat=3):
        answers = {decide_globally_admissible(word(*w), spec, max_level=lvl).decision for lvl in (2, 3, 4)}
        answers.discard(Decision.UNDECIDED)
        assert len(answers) <= 1


def test_decide_two_dimensional_hard_squares():
    hs = hard_squares()
    # the level-2 box already holds ~1e14 locally admissible patterns, so
    # the budget stops the search; it must never claim OUT for a legal pattern
    p = Pattern.from_mapping({(0, 0): 1, (1, 1): 1})
    assert decide_globally_admissible(p, hs, max_level=2).decision in (Decision.IN, Decision.UNDECIDED)
    q = Pattern.from_mapping({(0, 0): 1, (0, 1): 1})
    assert decide_globally_admissible(q, hs).decision is Decision.OUT


def test_tiny_budget_gives_undecided():
    v = decide_globally_admissible(Pattern.from_mapping({(0, 0): 1}), hard_squares(), cap=3)
    assert v.decision is Decision.UNDECIDED
    assert "UNDECIDED" in str(v)


def test_extendable_set_examples():
    gm = ForbiddenEnumeration.from_spec(golden_mean(1))
    got = {p.symbols for p in extendable_set(Shape([(0,)]), ExtendabilityParams(2, 1), gm)}
    assert got == {(0,), (1,)}
    f = box_from_sides((3,)).shape
    assert extendable_set(f, ExtendabilityParams(1, 1), gm) == enumerate_locally_admissible(f, golden_mean(1))
    spec = abc()
    enum = ForbiddenEnumeration.from_spec(spec)
    got = {spec.alphabet.symbols[p.symbols[0]] for p in extendable_set(Shape([(0,)]), ExtendabilityParams(3, 3), enum)}
    assert got == {"a", "c"}


@st.composite
def random_enumerations(draw):
    words = [Pattern.from_word(tuple(draw(st.lists(st.integers(0, 1), min_size=1, max_size=3))))
             for _ in range(draw(st.integers(1, 4)))]
    return ForbiddenEnumeration(A2, 1, words)


@settings(max_examples=40, deadline=None)
@given(random_enumerations(), st.integers(1, 3))
def test_extendable_set_antitone(enum, size):
    f = box_from_sides((size,)).shape
    sets = {}
    for t in (1, 2, 3, 5):
        for n in (1, 2, 4):
            sets[t, n] = set(extendable_set(f, ExtendabilityParams(t, n), enum))
    for (t, n), s in sets.items():
        for (t2, n2), s2 in sets.items():
            if t2 >= t and n2 >= n:
                assert s2 <= s


def test_language_inside_extendable_sets():
    gm = golden_mean(1)
    enum = ForbiddenEnumeration.from_spec(gm)
    lang = ExactSI(gm)
    f = box_from_sides((4,)).shape
    words = [p for p in enumerate_locally_admissible(f, gm) if lang.contains(p)]
    for t in (1, 3, 6):
        ext = set(extendable_set(f, ExtendabilityParams(t, 1), enum))
        assert set(words) <= ext


def test_providers():
    gm = golden_mean(1)
    full = FullShift(A2, 1)
    assert full.contains(word(1, 1)) and full.si_gap == 0
    assert not LocalOverapprox(gm).contains(word(1, 1))
    assert LocalOverapprox(gm).exact is False
    spec = abc()
    exact = ExactSI(spec)
    b = spec.alphabet.index("b")
    assert not exact.contains(word(0, b))
    assert exact.contains(word(0, 2, 0))
    assert exact.assumptions() == frozenset({"si_gap=1"})
    user = UserOracle(gm, lambda v: 1 not in v.symbols, name="zeros_only")
    assert user.contains(word(0, 0)) and not user.contains(word(1))
    assert "zeros_only" in user.assumptions()
    assert isinstance(default_provider(SftSpec.full_shift(2, 2)), FullShift)
    assert isinstance(default_provider(abc(None)), LocalOverapprox)
    assert isinstance(default_provider(gm), ExactSI)


def test_exact_provider_raises_when_undecided():
    lang = ExactSI(abc(), max_level=3, cap=3)
    with pytest.raises(LanguageUndecided):
        lang.contains(word(0))


def test_periodic_oracle_agrees_on_golden():
    gm = golden_mean(1)
    ref = oracles.periodic_language_1d(gm, 5, 6)
    for n in range(1, 6):
        for w in itertools.product((0, 1), repeat=n):
            assert (decide_globally_admissible(word(*w), gm).decision is Decision.IN) == (w in ref)
