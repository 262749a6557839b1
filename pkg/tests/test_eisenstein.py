from fractions import Fraction
from types import SimpleNamespace

import pytest

from rmsingular.eisenstein import (
    FamilyInstance,
    NotProportionalError,
    QExpansion,
    derivative_coeff,
    derivative_expansion,
    e2_level_p,
    eis_diag_coeff,
    eis_diag_coeff_with,
    extract_constant_term,
    finite_difference_coeff,
    hecke_tl,
    ordinary_projection,
    proportionality_residual,
    rho_default,
    rho_true,
    sigma_prime_to,
    up_operator,
)
from rmsingular.padic import PadicDomainError

INST = FamilyInstance(12, -3, -4, 5, N=4)


def test_weight_one_specialisation_vanishes_for_inert_p():
    assert all(eis_diag_coeff(INST, 1, n) == 0 for n in range(1, 41))


def test_weight_one_does_not_vanish_for_a_split_prime():
    split = SimpleNamespace(D=12, D1=-3, D2=-4, p=11)
    assert any(eis_diag_coeff(split, 1, n) for n in range(1, 41))


def test_instance_validation():
    with pytest.raises(PadicDomainError):
        FamilyInstance(12, -3, -4, 11)
    with pytest.raises(ValueError):
        FamilyInstance(24, -3, -4, 5)


def test_coefficients_match_an_independent_weighting():
    chi = INST.chi
    for n in range(1, 15):
        assert eis_diag_coeff(INST, 3, n) == eis_diag_coeff_with(12, n, lambda m: chi.on_norm(m) * m * m, p=5)


@pytest.mark.parametrize("p", [2, 3, 5, 7, 13])
def test_up_fixes_e2(p):
    f = e2_level_p(p, 4 * p)
    g = up_operator(f, p)
    assert g.coeffs == f.coeffs[: g.n_max + 1]


@pytest.mark.parametrize("p,ell", [(5, 2), (5, 3), (7, 2), (13, 3)])
def test_hecke_eigenvalue_of_e2(p, ell):
    f = e2_level_p(p, 60)
    g = hecke_tl(f, ell)
    assert all(g[n] == (1 + ell) * f[n] for n in range(g.n_max + 1))


def test_rho_values():
    assert rho_true(5) == Fraction(1, 6) and rho_default(5) == 2 * rho_true(5)
    assert e2_level_p(5, 3)[0] == rho_true(5)


def test_qexpansion_json_round_trip():
    f = derivative_expansion(INST, 6)
    assert QExpansion.from_json(f.to_json()).to_json() == f.to_json()


@pytest.mark.parametrize("m", [1, 2, 3])
def test_weight_congruences(m):
    """k = 1 + (p-1)p^m is p-adically close to k = 1."""
    p = INST.p
    k = 1 + (p - 1) * p**m
    for n in range(1, 12):
        assert (eis_diag_coeff(INST, k, n) - eis_diag_coeff(INST, 1, n)) % p ** (m + 1) == 0


@pytest.mark.parametrize("n", [1, 2, 3, 6, 7])
def test_derivative_matches_finite_differences(n):
    m = 3
    fd = finite_difference_coeff(INST, n, m)
    assert fd.equals(derivative_coeff(INST, n), prec=min(INST.N, m))


def test_ordinary_projection_is_proportional_to_e2_and_idempotent():
    p, terms, prec = INST.p, 4, 2
    e = ordinary_projection(None, p, terms, prec, inst=INST)
    assert proportionality_residual(e, p, prec) >= prec
    # an exact multiple of E_2 built from e is fixed by the projection
    ordinary = QExpansion([e[0]] + [e[1] * INST.ctx(sigma_prime_to(n, p)) for n in range(1, terms * p**2 + 1)],
                          2, p, "Qp")
    again = ordinary_projection(ordinary, p, terms, prec)
    for n in range(1, terms + 1):
        assert again[n].equals(e[n], prec=prec)
    a0, a1 = extract_constant_term(e, p, prec, rho=rho_true(p))
    assert a0.equals(a1 * INST.ctx(rho_true(p)), prec=prec)


def test_extract_constant_term_rejects_non_eisenstein_input():
    ctx = INST.ctx
    f = QExpansion([ctx.zero(), ctx(1), ctx(1), ctx(1), ctx(1)], 2, 5, "Qp")
    with pytest.raises(NotProportionalError):
        extract_constant_term(f, 5, 3)
    with pytest.raises(ValueError):
        extract_constant_term(f, 11, 3)
