import random
from fractions import Fraction

import pytest

from rmsingular.algrec import (
    IntegerLattice,
    class_order,
    factor_degrees_mod,
    lattice_reduce,
    p_unit_certify,
    poly_eval,
    prime_form,
    recognize_algebraic,
    recognize_up_to_ambiguity,
    split_primes,
    splitting_check,
)
from rmsingular.padic import PrecisionError, PrimeContext, hensel_sqrt, teichmuller
from rmsingular.quadratic import BinaryQF


def test_lattice_validation():
    with pytest.raises(ValueError):
        IntegerLattice(((1, 2), (2, 4)))
    with pytest.raises(ValueError):
        IntegerLattice(((1, 2), (3,)))


def test_reduction_preserves_the_lattice():
    rng = random.Random(0)
    for _ in range(20):
        rows = tuple(tuple(rng.randint(-50, 50) for _ in range(4)) for _ in range(3))
        try:
            L = IntegerLattice(rows)
        except ValueError:
            continue
        R = lattice_reduce(L)
        assert R.gram_det() == L.gram_det()
        assert lattice_reduce(R).gram_det() == L.gram_det()
    ident = IntegerLattice(((1, 0, 0), (0, 1, 0), (0, 0, 1)))
    assert sorted(map(tuple, (map(abs, r) for r in lattice_reduce(ident).basis))) == sorted(
        ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    )


def test_planted_short_vector_is_found():
    big = 10**12
    rows = ((1, 0, 0, big * 3), (0, 1, 0, big * 5), (0, 0, 1, big * 7), (0, 0, 0, big * 1000003))
    R = lattice_reduce(IntegerLattice(rows))
    first = min(R.basis, key=lambda v: sum(x * x for x in v))
    assert first[3] == 0 and sum(x * x for x in first) <= 3 * 16


def test_recognises_rationals_and_quadratics():
    ctx = PrimeContext(5, 12)
    assert recognize_algebraic(ctx(7), 2, 50) == [1, -7]
    assert recognize_algebraic(ctx(Fraction(3, 7)), 2, 50) == [7, -3]
    i = teichmuller(ctx, 2)
    assert recognize_algebraic(i, 2, 50) == [1, 0, 1]
    s = hensel_sqrt(ctx(12))
    assert recognize_algebraic(s, 2, 50) == [1, 0, -12]


def test_ambiguity_search_finds_a_disguised_unit():
    ctx = PrimeContext(5, 12)
    i = teichmuller(ctx, 2)
    u = (ctx(3) + ctx(4) * i) / ctx(5)
    disguised = u * teichmuller(ctx, 1, 1) * ctx(25)
    hit = recognize_up_to_ambiguity(disguised, 2, 20)
    # -u is an equally good answer: the ambiguity includes -1
    assert hit["poly"] in ([5, -6, 5], [5, 6, 5])
    assert poly_eval(hit["poly"], hit["root"]).is_zero


def test_recognition_is_stable_under_extra_digits():
    ctx, wide = PrimeContext(5, 12), PrimeContext(5, 17)
    for c in (ctx, wide):
        i = teichmuller(c, 2)
        u = (c(3) + c(4) * i) / c(5)
        assert recognize_algebraic(u, 2, 20) == [5, -6, 5]


def test_low_precision_is_reported():
    ctx = PrimeContext(5, 3)
    x = ctx(1, 1) + ctx(Fraction(1, 7))
    with pytest.raises(PrecisionError):
        recognize_algebraic(x, 2, 1000)


def test_p_unit_certification():
    ok, info = p_unit_certify([5, -6, 5], 5)
    assert ok and info["v_p_leading"] == 1
    assert p_unit_certify([1, 0, 1], 5)[0]
    assert p_unit_certify([1, -3], 5)[0] is False
    assert p_unit_certify([1, -5], 5)[0]
    with pytest.raises(ValueError):
        p_unit_certify([1, 0, -1], 5)


def test_splitting_prediction_and_negative_control():
    D = 12
    primes = split_primes(D, 10, exclude=[5])
    good = splitting_check([5, -6, 5], D, primes)
    assert good["checked"] == 10 and good["matches"] == 10
    bad = splitting_check([5, -6, 7], D, primes)
    assert bad["matches"] < bad["checked"]


def test_class_orders_and_prime_forms():
    f = prime_form(12, 11)
    assert f.D == 12 and f.a == 11
    assert class_order(BinaryQF(1, 2, -2)) == 1
    assert class_order(BinaryQF(-1, 2, 2)) == 2
    assert factor_degrees_mod([1, 0, 1], 5) == [1, 1]
    assert factor_degrees_mod([1, 0, 1], 7) == [2]
