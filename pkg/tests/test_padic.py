from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from rmsingular.padic import (
    PadicDomainError,
    PadicQuad,
    PrecisionError,
    PrimeContext,
    hensel_sqrt,
    log_rational,
    padic_log,
    principal_part,
    teichmuller,
)

PRIMES = [2, 3, 5, 7]


def units(p, N):
    return st.tuples(st.integers(0, p**N - 1), st.integers(0, p**N - 1)).filter(
        lambda t: t[0] % p or t[1] % p
    )


@pytest.mark.parametrize("p", PRIMES)
def test_generator_is_not_a_square_mod_p(p):
    ctx = PrimeContext(p, 6)
    w = ctx.omega()
    if p == 2:
        assert w * w + w + 1 == 0
    else:
        assert w * w == ctx(ctx.r)


@settings(max_examples=200)
@given(st.sampled_from(PRIMES), st.data())
def test_log_is_a_homomorphism(p, data):
    ctx = PrimeContext(p, 8)
    x = ctx(*data.draw(units(p, 8)))
    y = ctx(*data.draw(units(p, 8)))
    assert padic_log(x * y).equals(padic_log(x) + padic_log(y), prec=6)


@settings(max_examples=60)
@given(st.sampled_from(PRIMES), st.data())
def test_teichmuller_is_idempotent_and_torsion(p, data):
    ctx = PrimeContext(p, 8)
    a, b = data.draw(units(p, 1))
    t = teichmuller(ctx, a, b)
    assert teichmuller(ctx, *t.residue()) == t
    assert t ** (p * p - 1) == 1
    assert padic_log(t).is_zero


@settings(max_examples=100)
@given(st.sampled_from(PRIMES), st.data())
def test_hensel_sqrt_squares_back(p, data):
    ctx = PrimeContext(p, 10)
    x = ctx(*data.draw(units(p, 10)))
    sq = x * x
    r = hensel_sqrt(sq)
    assert (r * r).equals(sq, prec=sq.prec - (3 if p == 2 else 0))


def test_sqrt_of_inert_discriminant_lives_in_the_extension():
    ctx = PrimeContext(5, 6)
    s = hensel_sqrt(ctx(12))
    assert s.a % 5 == 0 and s.b % 5 != 0
    assert s * s == ctx(12)


def test_teichmuller_of_two_squares_to_minus_one():
    ctx = PrimeContext(5, 3)
    t = teichmuller(ctx, 2)
    assert t.a == 57
    assert t * t == -1


@settings(max_examples=100)
@given(st.sampled_from(PRIMES), st.data())
def test_norm_and_trace_are_rational(p, data):
    ctx = PrimeContext(p, 6)
    x = ctx(*data.draw(units(p, 6)))
    assert x.norm().is_rational() and x.trace().is_rational()
    assert (x.frobenius().frobenius()) == x


@settings(max_examples=100)
@given(st.sampled_from(PRIMES), st.integers(-3, 3), st.data())
def test_json_round_trip(p, v, data):
    ctx = PrimeContext(p, 7)
    x = ctx(*data.draw(units(p, 7))) * ctx(Fraction(p) ** v)
    assert PadicQuad.from_json(x.to_json(), N=ctx.N) == x
    assert PadicQuad.from_json(x.to_json()).to_json() == x.to_json()


def test_precision_tracking():
    ctx = PrimeContext(5, 6)
    x = ctx(Fraction(1, 5))
    assert x.val == -1 and x.prec == 6
    assert (x * ctx(5)) == 1
    with pytest.raises(PrecisionError):
        ctx.zero().inverse()


def test_log_rejects_non_units_and_kills_p():
    ctx = PrimeContext(5, 6)
    with pytest.raises(PadicDomainError):
        padic_log(ctx(5))
    assert log_rational(ctx, 5).is_zero
    assert log_rational(ctx, 6).equals(log_rational(ctx, 2) + log_rational(ctx, 3))


def test_principal_part_is_one_mod_p():
    ctx = PrimeContext(7, 6)
    x = ctx(3, 5) * ctx(49)
    u = principal_part(x)
    assert u.val == 0 and (u - 1).val >= 1
