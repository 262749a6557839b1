import random

import pytest

from rmsingular.padic import PadicDomainError, PrimeContext
from rmsingular.quadratic import (
    BinaryQF,
    DiscriminantError,
    GenusChar,
    RMPoint,
    class_rep,
    compose,
    embed_rm_point,
    form_for_point,
    genus_eps,
    is_fundamental,
    kronecker,
    narrow_class_of_point,
    pell_automorph,
    principal_form,
    reduce_and_classgroup,
    reduce_definite,
    rm_points,
)

# class numbers (narrow for D > 0) from standard tables
CLASS_NUMBERS = {-3: 1, -4: 1, -23: 3, -47: 5, -84: 4, 5: 1, 12: 2, 13: 1, 21: 2, 60: 4}


@pytest.mark.parametrize("D,h", sorted(CLASS_NUMBERS.items()))
def test_class_numbers(D, h):
    assert len(reduce_and_classgroup(D)) == h


def test_fundamental_and_kronecker():
    assert [d for d in range(-20, 0) if is_fundamental(d)] == [-20, -19, -15, -11, -8, -7, -4, -3]
    assert kronecker(12, 5) == -1 and kronecker(12, 11) == 1 and kronecker(-4, 3) == -1


def _random_sl2(rng):
    m = ((1, 0), (0, 1))
    for _ in range(6):
        k = rng.randint(-3, 3)
        step = ((1, k), (0, 1)) if rng.random() < 0.5 else ((1, 0), (k, 1))
        (a, b), (c, d) = m
        (e, f), (g, h) = step
        m = ((a * e + b * g, a * f + b * h), (c * e + d * g, c * f + d * h))
    return m


@pytest.mark.parametrize("D", [-23, -84, 12, 60])
def test_reduction_is_a_class_invariant(D):
    rng = random.Random(D)
    rep = reduce_definite if D < 0 else class_rep
    for f in reduce_and_classgroup(D):
        for _ in range(20):
            g = f.act(_random_sl2(rng))
            assert g.D == D and rep(g) == rep(f)


@pytest.mark.parametrize("D", [-23, -47, 60])
def test_composition_is_a_group_law(D):
    rep = reduce_definite if D < 0 else class_rep
    one = rep(principal_form(D))
    forms = [rep(f) for f in reduce_and_classgroup(D)]
    for f in forms:
        assert rep(compose(f, one)) == f
        for g in forms:
            assert rep(compose(f, g)) == rep(compose(g, f))
            assert rep(compose(f, g)) in forms


@pytest.mark.parametrize("f", [BinaryQF(1, 2, -2), BinaryQF(-1, 2, 2), BinaryQF(1, 1, -1), BinaryQF(2, 6, -3)])
def test_pell_automorph_fixes_the_form(f):
    m = pell_automorph(f)
    (a, b), (c, d) = m
    assert a * d - b * c == 1 and a + d > 2
    assert f.act(m) == f


def test_form_for_point_tracks_the_root():
    f = BinaryQF(1, 2, -2)
    m = ((2, 1), (1, 1))
    g = form_for_point(m, f)
    r = f.roots_real()[0]
    s = g.roots_real()[0]
    assert abs((2 * r + 1) / (r + 1) - s) < 1e-12


def test_genus_character_is_multiplicative_and_matches_eps():
    chi = GenusChar(-3, -4)
    for m in range(1, 60):
        for n in range(1, 60):
            try:
                lhs = chi.on_norm(m * n)
                rhs = chi.on_norm(m) * chi.on_norm(n)
            except PadicDomainError:
                continue
            assert lhs == rhs
    for n in (1, 2, 3, 11, 13, 22, 39):
        assert genus_eps(n, chi) == chi.on_norm(n)


def test_genus_character_validation():
    with pytest.raises(DiscriminantError):
        GenusChar(-4, -8)
    with pytest.raises(DiscriminantError):
        GenusChar(-3, -12)


def test_rm_points_need_an_inert_prime():
    assert len(rm_points(12, 5)) == 2
    with pytest.raises(PadicDomainError):
        RMPoint(BinaryQF(1, 2, -2), 11)
    with pytest.raises(DiscriminantError):
        RMPoint(BinaryQF(1, 0, -4), 5)


def test_embedded_rm_point_is_a_root():
    ctx = PrimeContext(5, 10)
    for tau in rm_points(12, 5):
        f = tau.form
        t = embed_rm_point(tau, ctx)
        assert (t * t * ctx(f.a) + t * ctx(f.b) + ctx(f.c)).is_zero
        assert narrow_class_of_point(tau) == class_rep(f)
