import itertools
import math
import random
from fractions import Fraction

import mpmath
import pytest

import oracles
from shiftpressure.errors import EmptySubshift, ResourceLimit
from shiftpressure.lattice import box_from_sides
from shiftpressure.potential import (LocallyConstantPotential, scale, sft_embedding_potential, single_site,
                                     zero_potential)
from shiftpressure.pressure import Budget, Method
from shiftpressure.transfer import (full_shift_pressure_2d, higher_block_recode, legal_columns,
                                    perron_pressure_1d, transfer_matrix_b, transfer_sum_identity_check)
from shiftpressure.subshift import Alphabet, Pattern, SftSpec, golden_mean, hard_squares

A2 = Alphabet(("0", "1"))
FULL2 = SftSpec.full_shift(A2, 2)


def encloses(iv, x):
    return iv.contains(oracles.mpf_to_fraction(x))


def test_recode_golden_is_its_own_graph():
    rs = higher_block_recode(golden_mean(1), zero_potential(A2, 1))
    assert rs.size == 2
    assert rs.adjacency[0].astype(int).tolist() == [[1, 1], [1, 0]]


def test_recode_widens_to_the_window():
    pot = LocallyConstantPotential(A2, box_from_sides((2, 1)).shape, {(1, 1): 1})
    rs = higher_block_recode(FULL2, pot)
    assert rs.size == 4 and rs.window.sides == (2, 1)
    # horizontal steps must agree on the shared site
    assert rs.n_legal_pairs(0) == 8
    assert rs.n_legal_pairs(1) == 16
    assert sorted(rs.weights) == [0, 0, 0, 1]
    assert rs.lift(3).symbols == (1, 1)


def test_b0_rows_carry_the_column_weight():
    rs = higher_block_recode(FULL2, single_site(A2, 2, [0, 1]))
    b = transfer_matrix_b(0, rs)
    assert b.n == 2
    for j in range(2):
        assert b[0, j].contains(1)
        assert encloses(b[1, j], mpmath.e)


def test_hard_squares_columns():
    rs = higher_block_recode(hard_squares(), zero_potential(A2, 2))
    assert legal_columns(rs, 3, 100).shape == (5, 3)
    b = transfer_matrix_b(1, rs)
    assert b.n == 5
    # the all-zero column is compatible with every column
    zero_col = [i for i, lab in enumerate(b.labels) if all(s == "0" for s in lab)][0]
    assert all(b[zero_col, j].contains(1) for j in range(5))
    with pytest.raises(ValueError):
        transfer_matrix_b(-1, rs)


@pytest.mark.parametrize("m_param", [0, 1])
def test_identity_check_on_random_potentials(m_param):
    rng = random.Random(11 + m_param)
    for _ in range(3):
        window = box_from_sides(rng.choice([(1, 1), (2, 1), (1, 2)])).shape
        table = {k: Fraction(rng.randint(-6, 6), rng.randint(1, 4))
                 for k in itertools.product((0, 1), repeat=len(window)) if rng.random() < 0.5}
        pot = LocallyConstantPotential(A2, window, table)
        lhs, rhs = transfer_sum_identity_check(higher_block_recode(FULL2, pot), m_param)
        assert lhs.intersects(rhs)


def test_identity_check_zero_potential_counts_patterns():
    rs = higher_block_recode(FULL2, zero_potential(A2, 2))
    lhs, rhs = transfer_sum_identity_check(rs, 1)
    assert lhs.contains(2 ** (4 * 3)) and rhs.contains(2 ** (4 * 3))


@pytest.mark.parametrize("weights", [[0, 0], [Fraction(-1, 3), Fraction(5, 4)], [2, -1]])
def test_full_shift_single_site_exact(weights):
    est = full_shift_pressure_2d(single_site(A2, 2, weights), 8)
    exact = mpmath.log(sum(mpmath.exp(mpmath.mpf(w.numerator if isinstance(w, Fraction) else w)
                                      / (w.denominator if isinstance(w, Fraction) else 1)) for w in weights))
    assert encloses(est.value, exact)
    assert est.value.width_float() <= 2.0**-8
    assert est.method is Method.TransferMatrix


def test_full_shift_pair_potential_bounds():
    domino = LocallyConstantPotential(A2, box_from_sides((2, 1)).shape, {(1, 1): -1})
    est = full_shift_pressure_2d(domino, 5, m_param=3)
    # phi <= 0 caps P at log 2; the Bernoulli(1/2) measure gives log 2 - 1/4
    assert est.value.lower_float() <= math.log(2)
    assert est.value.upper_float() >= math.log(2) - 0.25
    assert est.params["M"] == 3 and est.params["rho"] == 1
    # the rho gap in the gluing bound forces a huge M for 2^-5
    with pytest.raises(ResourceLimit):
        full_shift_pressure_2d(domino, 5, budget=Budget(max_states=5000, max_edges=50000, max_patterns=10**5))
    with pytest.raises(ValueError):
        full_shift_pressure_2d(domino, 0)


def test_perron_golden():
    est = perron_pressure_1d(golden_mean(1), zero_potential(A2, 1), Fraction(1, 10**12))
    assert encloses(est.value, oracles.LOG_GOLDEN)
    assert est.value.width_float() <= 1e-12
    assert est.method is Method.PerronRoot1D


def test_perron_embedding_at_beta_8():
    pot = scale(sft_embedding_potential(golden_mean(1)), 8)
    est = perron_pressure_1d(SftSpec.full_shift(A2, 1), pot, Fraction(1, 10**10))
    q = mpmath.exp(-8)
    lam = ((1 + q) + mpmath.sqrt((1 - q) ** 2 + 4)) / 2
    assert encloses(est.value, mpmath.log(lam))
    assert abs(float(mpmath.log(lam)) - 0.4812691335) < 1e-9


def test_perron_non_primitive_and_empty():
    # only the periodic point 0101...; entropy zero, pressure from a 2-cycle
    spec = SftSpec(A2, 1, (Pattern.from_word((0, 0)), Pattern.from_word((1, 1))))
    est = perron_pressure_1d(spec, single_site(A2, 1, [0, 1]), Fraction(1, 10**6))
    assert est.value.upper_float() >= 0.5 - 1e-12
    if est.value.lo is not None:
        assert encloses(est.value, mpmath.mpf(1) / 2)
    empty = SftSpec(A2, 1, (Pattern.from_word((0,)), Pattern.from_word((1,))))
    with pytest.raises(EmptySubshift):
        perron_pressure_1d(empty, zero_potential(A2, 1))
    with pytest.raises(ValueError):
        perron_pressure_1d(hard_squares(), zero_potential(A2, 2))
