import math
import random
from fractions import Fraction

import pytest

from rmsingular.padic import PrimeContext, principal_part
from rmsingular.quadratic import QuadElt, RMPoint, embed_quad, form_for_point, rm_points
from rmsingular.cocycles import (
    BoundaryMeasure,
    CocycleEvaluation,
    GeodesicTangency,
    TrivialCocycle,
    UnitRing,
    UpperPoint,
    WindingCocycle,
    dedekind_rademacher_phi,
    delta_U,
    dr_cocycle,
    hecke_reduce,
    hecke_reps,
    hecke_translate,
    in_gamma_orbit,
    intersection_number,
    mat_adj,
    mat_mul,
    mobius_boundary,
    mult_integral,
    orbit_crossings,
    period_integral,
    rm_theta_eval,
    separating_geodesics,
    sl2z_word,
    trivial_eval,
    winding_eval,
    winding_to_dr_ratio,
    word_matrix,
)

P = 5
CTX = PrimeContext(P, 4)
TAUS = rm_points(12, P)


def random_sl2z(rng, n=6):
    m = ((1, 0), (0, 1))
    for _ in range(n):
        k = rng.randint(-3, 3)
        m = mat_mul(m, ((1, k), (0, 1)) if rng.random() < 0.5 else ((1, 0), (k, 1)))
    return m


def random_gamma0(rng, p, n=3):
    gens = [((1, 1), (0, 1)), ((1, 0), (p, 1)), ((2, 1), (p, (p + 1) // 2)) if p % 2 else ((1, 0), (2 * p, 1))]
    m = ((1, 0), (0, 1))
    for _ in range(n):
        g = rng.choice(gens)
        if rng.random() < 0.5:
            g = mat_adj(g)
        m = mat_mul(m, g)
    return m


def _endpoint(rng):
    if rng.random() < 0.05:
        return None
    return Fraction(rng.randint(-40, 40), rng.randint(1, 12))


# intersection numbers ------------------------------------------------------------------


def test_intersection_convention():
    assert intersection_number(Fraction(0), Fraction(2), Fraction(1), Fraction(3)) == -1
    assert intersection_number(Fraction(0), Fraction(2), Fraction(3), Fraction(1)) == 1
    assert intersection_number(Fraction(0), Fraction(1), Fraction(2), Fraction(3)) == 0
    with pytest.raises(GeodesicTangency):
        intersection_number(Fraction(0), Fraction(1), Fraction(1), Fraction(3))


def test_intersection_invariance_and_antisymmetry():
    rng = random.Random(1)
    done = 0
    while done < 500:
        pts = [_endpoint(rng) for _ in range(4)]
        if len({str(x) for x in pts}) < 4:
            continue
        r, s, w, w2 = pts
        g = random_sl2z(rng)
        e = intersection_number(r, s, w, w2)
        assert intersection_number(w, w2, r, s) == -e
        moved = [mobius_boundary(g, x) for x in pts]
        assert intersection_number(*moved) == e
        done += 1


def test_intersection_with_quadratic_endpoints():
    w = TAUS[0].real_value()
    e = intersection_number(Fraction(0), None, w, w.conj())
    assert e in (-1, 1)
    assert intersection_number(Fraction(100), None, w, w.conj()) == 0


# separating geodesics and the winding cocycle -------------------------------------------


def test_separating_geodesics_match_brute_force():
    A = UpperPoint(Fraction(3, 11), Fraction(13, 10))
    B = A.act(((2, 1), (1, 1)))
    from rmsingular.cocycles import path_intersection

    got = {(g.r, g.s): I for g, I in separating_geodesics(A, B, P, 1)}
    brute = {}
    for k in range(2):
        n = P**k
        for y in range(0, 30):
            for v in range(0, 30):
                for x in range(-60, 61):
                    # solve u*y - x*v = n for u
                    if y == 0:
                        if x * v != -n:
                            continue
                        us = range(-60, 61)
                    elif (n + x * v) % y:
                        continue
                    else:
                        us = [(n + x * v) // y]
                    for u in us:
                        if math.gcd(x, y) != 1 or math.gcd(u, v) != 1:
                            continue
                        r = None if y == 0 else Fraction(x, y)
                        s = None if v == 0 else Fraction(u, v)
                        I = path_intersection(r, s, A, B)
                        if I:
                            brute[(r, s)] = I
    # brute force covers small denominators only, all of which must be found
    assert brute
    for (r, s), I in brute.items():
        assert got.get((r, s)) == I or got.get((s, r)) == -I


def test_winding_value_is_base_point_independent():
    a = winding_eval(TAUS[0], CTX)
    b = winding_eval(TAUS[0], CTX, xi=UpperPoint(Fraction(-2, 7), Fraction(5, 3)))
    assert a.value.equals(b.value, prec=min(a.prec, b.prec))


@pytest.mark.parametrize("g", [((2, 1), (1, 1)), ((1, -3), (0, 1)), ((0, -1), (1, 4))])
def test_winding_value_is_constant_on_gamma_orbits(g):
    tau = TAUS[0]
    moved = RMPoint(form_for_point(g, tau.form), P)
    a, b = winding_eval(tau, CTX), winding_eval(moved, CTX)
    assert a.value.equals(b.value, prec=min(a.prec, b.prec))


def test_cocycle_relation_up_to_scalars():
    rng = random.Random(3)
    R = UnitRing(CTX, CTX.N + 2)
    coc = WindingCocycle(P, 3)
    z1, z2 = (1, 1), (3, 1)
    for _ in range(5):
        g, h = random_sl2z(rng, 3), random_sl2z(rng, 3)
        ratios = []
        for z in (z1, z2):
            lhs = coc.raw(mat_mul(g, h)).eval_pair(R, z)
            rhs = R.mul(coc.raw(g).eval_pair(R, z), coc.raw(h).eval_pair(R, R.mobius(mat_adj(g), z)))
            ratios.append(R.mul(lhs, R.inv(rhs)))
        a, b = (R.to_padic(x, 3) for x in ratios)
        assert a.equals(b, prec=3)


def test_sl2z_words_multiply_back():
    rng = random.Random(4)
    for _ in range(100):
        g = random_sl2z(rng)
        w = word_matrix(sl2z_word(g))
        assert w == g or w == tuple(tuple(-x for x in row) for row in g)


# the trivial cocycle ---------------------------------------------------------------------


def test_trivial_cocycle_recovers_the_fundamental_unit():
    tr = trivial_eval(TAUS[0], CTX)
    eps = principal_part(embed_quad(QuadElt(Fraction(2), Fraction(1, 2), 12), CTX))
    assert tr.value.equals(eps, prec=4) or tr.value.equals(eps.inverse(), prec=4)
    assert tr.log_norm.is_zero


@pytest.mark.parametrize("ell", [2, 3])
def test_hecke_on_trivial_cocycle_is_a_power(ell):
    tr = trivial_eval(TAUS[0], CTX)
    h = hecke_translate(TAUS[0], ell, CTX, cocycle=TrivialCocycle(6))
    assert h.value.equals(tr.value ** (ell + 1), prec=4)


# Dedekind-Rademacher homomorphism and residues ------------------------------------------


def test_phi_dr_is_a_homomorphism():
    rng = random.Random(5)
    for _ in range(100):
        g, h = random_gamma0(rng, P), random_gamma0(rng, P)
        assert dedekind_rademacher_phi(mat_mul(g, h), P) == (
            dedekind_rademacher_phi(g, P) + dedekind_rademacher_phi(h, P)
        )
    assert dedekind_rademacher_phi(((1, 1), (0, 1)), P) == P - 1
    with pytest.raises(ValueError):
        dedekind_rademacher_phi(((1, 0), (1, 1)), P)


@pytest.mark.parametrize("m", [((11, 2), (5, 1)), ((1, 0), (5, 1)), ((4, 1), (15, 4))])
def test_phi_dr_matches_the_period_integral(m):
    val = period_integral(m, P)
    assert abs(val - dedekind_rademacher_phi(m, P)) < 1e-15


def _hecke_hom(phi, n):
    def out(g):
        return sum(phi(hecke_reduce(mat_mul(alpha, g), n)[0]) for alpha in hecke_reps(n))

    return out


def test_hecke_on_residues():
    rng = random.Random(6)
    w = WindingCocycle(P, 1)
    res = lambda g: delta_U(w, g)  # noqa: E731
    T2, T3 = _hecke_hom(res, 2), _hecke_hom(res, 3)
    T2T3 = _hecke_hom(T3, 2)
    T3T2 = _hecke_hom(T2, 3)
    for _ in range(4):
        g = random_gamma0(rng, P, 2)
        assert T2(g) == 3 * res(g) and T3(g) == 4 * res(g)
        assert T2T3(g) == T3T2(g) == 12 * res(g)


def test_winding_residue_is_a_multiple_of_phi_dr():
    c = winding_to_dr_ratio(P)
    assert c == Fraction(-1, 2)
    rng = random.Random(7)
    w = WindingCocycle(P, 1)
    for _ in range(10):
        g = random_gamma0(rng, P, 2)
        assert delta_U(w, g) == c * dedekind_rademacher_phi(g, P)


# measures and multiplicative integrals ---------------------------------------------------


def test_measures_are_harmonic_and_consistent_across_depths():
    coc = WindingCocycle(P, 3)
    g = ((2, 1), (5, 3))
    fine, coarse = coc.measure(g, 3), coc.measure(g, 2)
    assert fine.total() == 0
    for (kind, c) in coarse.masses:
        assert fine.mass(kind, c, 2) == coarse.mass(kind, c, 2)
        assert sum(fine.mass(kind, c + j * P**2, 3) for j in range(P)) == coarse.mass(kind, c, 2)


def test_measure_json_round_trip():
    mu = dr_cocycle(P, 2).measure(((2, 1), (5, 3)))
    assert BoundaryMeasure.from_json(mu.to_json()) == mu


def test_zero_measure_integrates_to_one():
    assert mult_integral(BoundaryMeasure.zero(P, 3), CTX.omega()) == 1


def test_multiplicative_integral_is_additive_and_converges():
    z = CTX.omega() + CTX(2)
    a, b, c = Fraction(3), Fraction(7, 2), Fraction(1, 5)
    exact = (z - CTX(a)) / (z - CTX(b))
    for depth in (2, 3, 4):
        mu = BoundaryMeasure.from_point_masses(P, depth, [(a, 1), (b, -1)])
        assert mult_integral(mu, z).equals(exact, prec=depth)
    mu1 = BoundaryMeasure.from_point_masses(P, 4, [(a, 1), (b, -1)])
    mu2 = BoundaryMeasure.from_point_masses(P, 4, [(c, 2), (b, -2)])
    both = BoundaryMeasure.from_point_masses(P, 4, [(a, 1), (b, -1), (c, 2), (b, -2)])
    assert mult_integral(both, z) == mult_integral(mu1, z) * mult_integral(mu2, z)


# evaluation records -----------------------------------------------------------------------


def test_evaluation_json_round_trip():
    ev = winding_eval(TAUS[1], CTX)
    back = CocycleEvaluation.from_json(ev.to_json())
    assert back.to_json() == ev.to_json()


# RM theta cocycles ---------------------------------------------------------------------------


def test_rm_theta_orbit_is_discrete():
    tau1, tau2 = TAUS
    (a, b), (c, d) = tau2.automorph
    cr = orbit_crossings(tau1, Fraction(a, c), 3)
    per = [sum(1 for k, _, _ in cr if k == j) for j in range(4)]
    assert per == [6, 0, 480, 0]
    assert all(in_gamma_orbit(w, tau1) for _, w, _ in cr)


def test_rm_theta_truncations_agree():
    ev = rm_theta_eval(TAUS[0], TAUS[1], CTX, level=2)
    assert ev.prec >= 2
    assert ev.extra["orbit_points_per_level"] == [6, 0, 480]
