import itertools
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from shiftpressure.errors import DimensionMismatch, ParseError
from shiftpressure.lattice import Shape, box_from_sides
from shiftpressure.subshift import (Alphabet, ForbiddenEnumeration, Pattern, SftSpec,
                                    enumerate_locally_admissible, format_sft, golden_mean, hard_squares,
                                    is_locally_admissible, parse_pattern_line, parse_sft)

DATA = Path(__file__).resolve().parent.parent / "data"
A2 = Alphabet(("0", "1"))


def fib(n):
    a, b = 1, 2
    for _ in range(n - 1):
        a, b = b, a + b
    return a


def test_golden_counts_are_fibonacci():
    gm = golden_mean(1)
    for n in range(1, 12):
        assert len(enumerate_locally_admissible(box_from_sides((n,)), gm)) == fib(n + 1)


def test_hard_squares_4x4_count():
    assert len(enumerate_locally_admissible(box_from_sides((4, 4)), hard_squares())) == 1234


@st.composite
def small_specs(draw):
    words = []
    for _ in range(draw(st.integers(1, 3))):
        sites = draw(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=3, unique=True))
        syms = draw(st.lists(st.integers(0, 1), min_size=len(sites), max_size=len(sites)))
        words.append(Pattern(Shape(sites), syms))
    return SftSpec(A2, 2, tuple(words))


@settings(max_examples=40, deadline=None)
@given(small_specs(), st.integers(1, 3), st.integers(1, 3))
def test_enumeration_matches_brute_force(spec, w, h):
    shape = box_from_sides((w, h)).shape
    got = set(enumerate_locally_admissible(shape, spec))
    ref = set(oracles.brute_patterns(shape, spec))
    assert got == ref


def test_locally_admissible_examples():
    gm = golden_mean(1)
    assert is_locally_admissible(Pattern.from_word((1, 0, 1)), gm.forbidden)
    assert not is_locally_admissible(Pattern.from_word((0, 1, 1)), gm.forbidden)
    with pytest.raises(DimensionMismatch):
        is_locally_admissible(Pattern.from_word((0, 1)), hard_squares().forbidden)


def test_pattern_identity_and_translation():
    p = Pattern.from_mapping({(1, 0): 1, (0, 0): 0})
    q = Pattern(Shape([(0, 0), (1, 0)]), (0, 1))
    assert p == q and hash(p) == hash(q)
    assert p.translate((2, 3)).normalized() == p
    assert p.restrict(Shape([(1, 0)])).symbols == (1,)
    with pytest.raises(ValueError):
        Pattern(Shape([(0,)]), (0, 1))


@pytest.mark.parametrize("name", ["golden.sft", "hard_squares.sft", "abc.sft", "full3.sft"])
def test_sft_round_trip(name):
    spec = parse_sft((DATA / name).read_text())
    assert parse_sft(format_sft(spec)) == spec


def test_sft_parse_errors_carry_line_numbers():
    bad = "dim 1\nalphabet 0 1\nforbidden\n(0):2\nend\n"
    with pytest.raises(ParseError) as exc:
        parse_sft(bad)
    assert exc.value.line == 4
    with pytest.raises(ParseError):
        parse_sft("alphabet 0 1\n")
    with pytest.raises(ParseError):
        parse_sft("dim 1\nalphabet 0 1\nforbidden\n(0):1\n")
    with pytest.raises(ParseError):
        parse_pattern_line("(0):1 (0):0", A2)


def test_alphabet_validation():
    with pytest.raises(ValueError):
        Alphabet(("a", "a"))
    with pytest.raises(ValueError):
        Alphabet(())
    assert Alphabet.of("x", "y").index("y") == 1


def test_forbidden_enumeration_prefix_is_lazy():
    calls = []

    def word(i):
        calls.append(i)
        return Pattern.from_word((1,) * (i + 1)) if i <= 5 else None

    enum = ForbiddenEnumeration(A2, 1, word)
    assert len(enum.prefix(2)) == 2
    assert max(calls) == 2
    assert len(enum.prefix(100)) == 5
    assert enum.spec(3).forbidden == enum.prefix(3)


def test_safe_symbol():
    assert golden_mean(1).safe_symbol() == 0
    assert parse_sft((DATA / "abc.sft").read_text()).safe_symbol() is None
    assert SftSpec.full_shift(3, 2).safe_symbol() == 0
    lonely = SftSpec(Alphabet(("a", "b", "c")), 1, (Pattern.from_word((1, 1)),))
    assert lonely.safe_symbol() == 0


def test_enumeration_order_is_lexicographic():
    rows = [p.symbols for p in enumerate_locally_admissible(box_from_sides((4,)), golden_mean(1))]
    assert rows == sorted(rows)
    assert all(p in rows for p in itertools.product((0, 1), repeat=4) if "11" not in "".join(map(str, p)))
