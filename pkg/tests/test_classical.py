import random

import mpmath
import pytest

from rmsingular.classical import (
    ComplexBall,
    gz_pairs,
    gz_product,
    gz_rhs,
    j_eval,
    reduce_to_fundamental_domain,
    siegel_archimedean_sum,
    verify_gz_pair,
)
from rmsingular.padic import PrecisionError

RHO = mpmath.mpc(-0.5, mpmath.sqrt(3) / 2)


def test_j_at_elliptic_points():
    with mpmath.workdps(40):
        assert j_eval(mpmath.mpc(0, 1)).contains(1728)
        # the input is only an approximation of rho, where j has a triple zero
        near_rho = j_eval(mpmath.mpc(-0.5, mpmath.sqrt(3) / 2))
        assert abs(near_rho.mid) + near_rho.rad < mpmath.mpf(10) ** -100


def test_j_is_periodic_and_modular():
    rng = random.Random(0)
    with mpmath.workdps(40):
        for _ in range(50):
            tau = mpmath.mpc(rng.uniform(-0.5, 0.5), rng.uniform(0.9, 2.0))
            ref = j_eval(tau)
            assert abs(j_eval(tau + 1).mid - ref.mid) <= ref.rad * 4 + mpmath.mpf(10) ** -20
            a, b, c, d = 1, 0, 0, 1
            for _ in range(3):
                k = rng.randint(-2, 2)
                a, b, c, d = (a * k - b, a, c * k - d, c) if rng.random() < 0.5 else (a, a * k + b, c, c * k + d)
            moved = (a * tau + b) / (c * tau + d)
            if moved.imag < 0.05:
                continue
            other = j_eval(moved)
            assert abs(other.mid - ref.mid) <= (other.rad + ref.rad) * 4 + abs(ref.mid) * mpmath.mpf(10) ** -25


def test_fundamental_domain_reduction():
    tau = reduce_to_fundamental_domain(mpmath.mpc(3.3, 0.01))
    assert abs(tau.real) <= 0.5 and abs(tau) >= 1 - 1e-20


def test_ball_arithmetic_encloses():
    a = ComplexBall(mpmath.mpc(2, 1), mpmath.mpf("1e-10"))
    b = ComplexBall(mpmath.mpc(-1, 3), mpmath.mpf("1e-10"))
    assert (a * b).contains(mpmath.mpc(2, 1) * mpmath.mpc(-1, 3))
    assert (a / b).contains(mpmath.mpc(2, 1) / mpmath.mpc(-1, 3))
    assert ComplexBall(mpmath.mpc(4.9), mpmath.mpf(0.2)).integers_inside() == [5]


@pytest.mark.parametrize("D1,D2,rhs", [(-3, -4, 12), (-4, -7, 5103)])
def test_known_gross_zagier_values(D1, D2, rhs):
    assert gz_rhs(D1, D2) == rhs
    assert gz_product(D1, D2).integers_inside() == [rhs]


def test_gross_zagier_is_symmetric():
    assert gz_rhs(-3, -8) == gz_rhs(-8, -3)
    a, b = gz_product(-3, -8), gz_product(-8, -3)
    assert a.integers_inside() == b.integers_inside()


def test_siegel_sum_matches_minus_log_rhs():
    with mpmath.workdps(40):
        for D1, D2 in [(-3, -4), (-4, -7), (-3, -8)]:
            s = siegel_archimedean_sum(D1, D2)
            assert abs(s.mid + mpmath.log(gz_rhs(D1, D2))) < mpmath.mpf(10) ** -30


def test_rejects_bad_pairs():
    with pytest.raises(ValueError):
        gz_rhs(-4, -8)
    with pytest.raises(ValueError):
        gz_product(-3, -12)


def test_escalation_gives_up_with_a_precision_error():
    with pytest.raises(PrecisionError):
        verify_gz_pair(-4, -163, terms=3, dps=15, max_radius=1e-300, escalations=0)


def test_sweep_small_pairs():
    pairs = gz_pairs(300)
    assert len(pairs) > 20
    assert all(verify_gz_pair(a, b)["match"] for a, b in pairs)
