"""Archimedean side: certified values of j, the Gross-Zagier product and its factorisation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
from sympy import factorint

from .padic import PrecisionError
from .quadratic import (
    GenusChar,
    RealQuadraticField,
    genus_eps,
    ideal_divisors,
    is_fundamental,
    reduce_and_classgroup,
    trace_slice,
)


@dataclass(frozen=True)
class ComplexBall:
    """Closed disc {z : |z - mid| <= rad}; mid is an mpmath complex."""

    mid: object
    rad: object

    @classmethod
    def exact(cls, z):
        return cls(mpmath.mpc(z), mpmath.mpf(0))

    def _slack(self, z):
        # two units in the last place of the working precision
        return abs(z) * mpmath.ldexp(1, 2 - mpmath.mp.prec)

    def __add__(self, o):
        o = _ball(o)
        m = self.mid + o.mid
        return ComplexBall(m, self.rad + o.rad + self._slack(m))

    def __sub__(self, o):
        o = _ball(o)
        m = self.mid - o.mid
        return ComplexBall(m, self.rad + o.rad + self._slack(m))

    def __mul__(self, o):
        o = _ball(o)
        m = self.mid * o.mid
        r = abs(self.mid) * o.rad + abs(o.mid) * self.rad + self.rad * o.rad
        return ComplexBall(m, r + self._slack(m))

    __radd__ = __add__
    __rmul__ = __mul__

    def inverse(self):
        a = abs(self.mid)
        if a <= self.rad:
            raise PrecisionError("ball contains zero", deficit=1)
        m = 1 / self.mid
        return ComplexBall(m, self.rad / (a * (a - self.rad)) + self._slack(m))

    def __truediv__(self, o):
        return self * _ball(o).inverse()

    def abs_bounds(self):
        a = abs(self.mid)
        return max(mpmath.mpf(0), a - self.rad), a + self.rad

    def contains(self, x) -> bool:
        return abs(self.mid - x) <= self.rad

    def integers_inside(self):
        """Integers in the real interval [Re mid - rad, Re mid + rad] (if the disc meets R)."""
        with mpmath.workdps(self.digits()):
            if abs(self.mid.imag) > self.rad:
                return []
            lo = int(mpmath.ceil(self.mid.real - self.rad))
            hi = int(mpmath.floor(self.mid.real + self.rad))
        if hi - lo > 10:
            raise PrecisionError("ball too wide to list integers", deficit=hi - lo)
        return list(range(lo, hi + 1))

    def digits(self) -> int:
        """Decimal digits needed to print the midpoint down to the radius."""
        size = abs(self.mid) + 1
        return int(mpmath.log10(size)) + 25

    def to_json(self):
        with mpmath.workdps(self.digits()):
            d = self.digits()
            return [mpmath.nstr(self.mid.real, d), mpmath.nstr(self.mid.imag, d), mpmath.nstr(self.rad, 5)]


def _ball(x):
    return x if isinstance(x, ComplexBall) else ComplexBall.exact(x)


def reduce_to_fundamental_domain(tau):
    """Move tau into |Re| <= 1/2, |tau| >= 1 by translations and inversion."""
    tau = mpmath.mpc(tau)
    if tau.imag <= 0:
        raise ValueError("tau must lie in the upper half plane")
    for _ in range(10000):
        tau = tau - mpmath.nint(tau.real)
        if abs(tau) < 1 - mpmath.mpf(10) ** (-mpmath.mp.dps + 5):
            tau = -1 / tau
        else:
            return tau
    raise RuntimeError("reduction did not terminate")


@lru_cache(maxsize=None)
def _sigma_table(k: int, n_max: int):
    s = [0] * (n_max + 1)
    for d in range(1, n_max + 1):
        dk = d**k
        for m in range(d, n_max + 1, d):
            s[m] += dk
    return tuple(s)


def _eisenstein_ball(q, k: int, c: int, terms: int) -> ComplexBall:
    """1 + c sum sigma_{k-1}(n) q^n, with a bound for the omitted tail."""
    sig = _sigma_table(k - 1, terms)
    total = mpmath.mpc(1)
    qn = mpmath.mpc(1)
    for n in range(1, terms + 1):
        qn *= q
        total += c * sig[n] * qn
    aq = abs(q)
    # sigma_{k-1}(n) <= 2 n^{k-1}; the tail is dominated by a geometric series
    M = terms + 1
    ratio = (mpmath.mpf(M + 1) / M) ** (k - 1) * aq
    if ratio >= 1:
        raise PrecisionError("q too large for the tail bound", deficit=terms)
    tail = abs(c) * 2 * mpmath.mpf(M) ** (k - 1) * aq**M / (1 - ratio)
    return ComplexBall(total, tail)


def j_eval(tau, terms: int = 60, max_radius=None) -> ComplexBall:
    """j(tau) = 1728 E4^3 / (E4^3 - E6^2) after reduction to the fundamental domain."""
    t = reduce_to_fundamental_domain(tau)
    q = mpmath.exp(2j * mpmath.pi * t)
    e4 = _eisenstein_ball(q, 4, 240, terms)
    e6 = _eisenstein_ball(q, 6, -504, terms)
    e43 = e4 * e4 * e4
    j = 1728 * e43 / (e43 - e6 * e6)
    if max_radius is not None and j.rad > max_radius:
        want = terms
        while True:
            want = int(want * 1.5) + 10
            est = mpmath.mpf(want) ** 5 * abs(q) ** want * abs(j.mid) ** 2
            if est < max_radius or want > 100000:
                break
        raise PrecisionError(f"radius {mpmath.nstr(j.rad, 3)} too large; try terms={want}", deficit=want)
    return j


def _w(D: int) -> int:
    return {-3: 6, -4: 4}.get(D, 2)


def _check_pair(D1: int, D2: int):
    for D in (D1, D2):
        if D >= 0 or not is_fundamental(D):
            raise ValueError(f"{D} is not a negative fundamental discriminant")
    if math.gcd(D1, D2) != 1:
        raise ValueError(f"discriminants {D1}, {D2} are not coprime")


def cm_points(D: int):
    """(-b + sqrt D)/(2a) for the reduced forms of discriminant D < 0."""
    out = []
    for f in reduce_and_classgroup(D):
        out.append((mpmath.mpf(-f.b) + mpmath.sqrt(mpmath.mpf(D))) / (2 * f.a))
    return out


def _cm_j_values(D: int, terms: int, dps: int):
    with mpmath.workdps(dps):
        return [j_eval(t, terms) for t in cm_points(D)]


def gz_product(D1: int, D2: int, terms: int = 60, dps: int = 60) -> ComplexBall:
    """|J(D1, D2)|^2 with J = prod (j(tau1) - j(tau2))^{4/(w1 w2)}, as a certified real ball."""
    _check_pair(D1, D2)
    with mpmath.workdps(dps):
        j1 = _cm_j_values(D1, terms, dps)
        j2 = _cm_j_values(D2, terms, dps)
        e = mpmath.mpf(8) / (_w(D1) * _w(D2))
        lo_log = mpmath.mpf(0)
        hi_log = mpmath.mpf(0)
        for a in j1:
            for b in j2:
                lo, hi = (a - b).abs_bounds()
                if lo <= 0:
                    raise PrecisionError("difference of j-values not separated from 0", deficit=dps)
                lo_log += e * mpmath.log(lo)
                hi_log += e * mpmath.log(hi)
        # round the log bounds outwards before exponentiating
        eps = mpmath.ldexp(1, 8 - mpmath.mp.prec) * (abs(lo_log) + abs(hi_log) + 1)
        lo, hi = mpmath.exp(lo_log - eps), mpmath.exp(hi_log + eps)
        return ComplexBall(mpmath.mpc((lo + hi) / 2), (hi - lo) / 2)


def gz_rhs(D1: int, D2: int) -> int:
    """prod over x^2 + 4 n n' = D1 D2 with n, n' > 0 of n^{eps(n')}."""
    _check_pair(D1, D2)
    D = D1 * D2
    chi = GenusChar(D1, D2)
    result = Fraction(1)
    x = -math.isqrt(D)
    while x * x < D:
        m = D - x * x
        if m % 4 == 0:
            m //= 4
            for n in range(1, m + 1):
                if m % n == 0:
                    e = genus_eps(m // n, chi)
                    result *= Fraction(n) ** e
        x += 1
    if result.denominator != 1:
        raise ArithmeticError(f"non-integral right-hand side {result}")
    return int(result)


def siegel_archimedean_sum(D1: int, D2: int, dps: int = 40) -> ComplexBall:
    """sum over nu in the trace-one slice of sum_{n | nu d} chi(n) log Nm n."""
    _check_pair(D1, D2)
    F = RealQuadraticField(D1 * D2)
    chi = GenusChar(D1, D2)
    exps = {}
    for nu in trace_slice(F, 1):
        for norm, _ in ideal_divisors(F, nu):
            c = chi.on_norm(norm)
            for q, e in factorint(norm).items():
                exps[q] = exps.get(q, 0) + c * e
    with mpmath.workdps(dps):
        val = mpmath.mpf(0)
        for q, c in exps.items():
            val += c * mpmath.log(q)
        return ComplexBall(mpmath.mpc(val), abs(val) * mpmath.ldexp(1, 8 - mpmath.mp.prec))


def negative_fundamental_discriminants(bound: int):
    return [D for D in range(-3, -bound - 1, -1) if is_fundamental(D)]


def gz_pairs(bound: int):
    """Coprime pairs D1 > D2 of negative fundamental discriminants with |D1 D2| <= bound."""
    ds = negative_fundamental_discriminants(bound // 3)
    out = []
    for i, a in enumerate(ds):
        for b in ds[i + 1:]:
            if a * b <= bound and math.gcd(a, b) == 1:
                out.append((a, b))
    return out


def verify_gz_pair(D1: int, D2: int, terms: int = 60, dps: int = 60, max_radius=0.4, escalations=3):
    """Report dict comparing the certified |J|^2 ball with the exact right-hand side."""
    rhs = gz_rhs(D1, D2)
    for _ in range(escalations + 1):
        ball = gz_product(D1, D2, terms, dps)
        if ball.rad < max_radius:
            break
        dps += 10 + int(mpmath.log10(abs(ball.mid) + 1))
        terms += 20
    else:
        raise PrecisionError(f"could not certify |J|^2 for ({D1}, {D2})", deficit=dps)
    ints = ball.integers_inside()
    return {
        "D1": D1,
        "D2": D2,
        "lhs_sq_ball": [ball.to_json()[0], ball.to_json()[2]],
        "rhs_int": rhs,
        "match": ints == [rhs],
    }
