"""Theta cocycles on SL2(Z[1/p]) and their values at RM points.

The winding cocycle is realised as an explicit truncated product of cross
ratios over the geodesics of the orbit of (0, oo) that separate a pair of base
points.  Cocycles are only defined modulo scalars; values at RM points are
taken on the restriction to SL2(Z), where an honest lift exists and is unique
up to the twelfth roots of unity.  We therefore carry twelfth powers
internally and extract the principal root at the end.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .padic import (
    PadicDomainError,
    PadicQuad,
    PrecisionError,
    PrimeContext,
    _conj_pair,
    _mul_pair,
    _norm_pair,
    padic_log,
    principal_part,
)
from sympy import divisors

from .quadratic import (
    BinaryQF,
    QuadElt,
    RMPoint,
    class_rep,
    embed_quad,
    embed_rm_point,
    narrow_class_of_point,
)

IDENTITY = ((1, 0), (0, 1))
S_MAT = ((0, -1), (1, 0))
T_MAT = ((1, 1), (0, 1))


# matrices ---------------------------------------------------------------------------


def mat_mul(x, y):
    return (
        (x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]),
        (x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]),
    )


def mat_det(m):
    return m[0][0] * m[1][1] - m[0][1] * m[1][0]


def mat_adj(m):
    """Adjugate; the inverse when det = 1."""
    (a, b), (c, d) = m
    return ((d, -b), (-c, a))


def mat_inv(m):
    det = Fraction(mat_det(m))
    (a, b), (c, d) = m
    return ((d / det, -b / det), (-c / det, a / det))


def mat_normalise(m):
    """Entries as ints when integral, else Fractions."""
    out = []
    for row in m:
        r = []
        for x in row:
            x = Fraction(x)
            r.append(int(x) if x.denominator == 1 else x)
        out.append(tuple(r))
    return tuple(out)


def is_gamma_matrix(m, p) -> bool:
    """Determinant one with entries in Z[1/p]."""
    if mat_det(m) != 1:
        return False
    for row in m:
        for x in row:
            den = Fraction(x).denominator
            while den % p == 0:
                den //= p
            if den != 1:
                return False
    return True


def mobius_boundary(m, x):
    """Action on P^1(Q); None stands for infinity."""
    (a, b), (c, d) = m
    if x is None:
        return None if c == 0 else Fraction(a) / c
    x = Fraction(x)
    den = c * x + d
    if den == 0:
        return None
    return (a * x + b) / den


# points of the complex upper half plane ----------------------------------------------


@dataclass(frozen=True)
class UpperPoint:
    """x + i*sqrt(y2) with exact rational x and y2 > 0."""

    x: Fraction
    y2: Fraction

    def act(self, m) -> "UpperPoint":
        (a, b), (c, d) = m
        det = Fraction(mat_det(m))
        if det <= 0:
            raise ValueError("orientation reversing matrix")
        den = (c * self.x + d) ** 2 + c * c * self.y2
        x = ((a * self.x + b) * (c * self.x + d) + a * c * self.y2) / den
        y2 = self.y2 * det * det / (den * den)
        return UpperPoint(x, y2)

    def scale(self, t) -> "UpperPoint":
        t = Fraction(t)
        return UpperPoint(self.x * t, self.y2 * t * t)

    def to_complex(self):
        return complex(float(self.x), math.sqrt(self.y2))


class GeodesicTangency(ValueError):
    pass


def _side(z, r, s) -> int:
    """+1 if z lies to the left of the oriented geodesic r -> s, else -1."""
    if r is None and s is None:
        raise ValueError("degenerate geodesic")
    if s is None:
        if z.x == r:
            raise GeodesicTangency("point on geodesic")
        return 1 if z.x < r else -1
    if r is None:
        if z.x == s:
            raise GeodesicTangency("point on geodesic")
        return 1 if z.x > s else -1
    c = (r + s) / 2
    d = (z.x - c) ** 2 + z.y2 - ((s - r) / 2) ** 2
    if d == 0:
        raise GeodesicTangency("point on geodesic")
    outside = 1 if d > 0 else -1
    return outside if r < s else -outside


def path_intersection(r, s, A: UpperPoint, B: UpperPoint) -> int:
    """Signed intersection of the geodesic r -> s with any path A -> B."""
    return (_side(A, r, s) - _side(B, r, s)) // 2


def _real_key(w):
    """Comparable value for a real endpoint: Fraction, QuadElt or None (infinity)."""
    return w


def _cmp_real(a, b) -> int:
    """Exact sign of a - b for rationals or real quadratic numbers."""
    if isinstance(a, QuadElt) or isinstance(b, QuadElt):
        D = a.D if isinstance(a, QuadElt) else b.D
        qa = a if isinstance(a, QuadElt) else QuadElt(Fraction(a), Fraction(0), D)
        qb = b if isinstance(b, QuadElt) else QuadElt(Fraction(b), Fraction(0), D)
        return (qa - qb).sign()
    d = Fraction(a) - Fraction(b)
    return (d > 0) - (d < 0)


def intersection_number(r, s, w, w2) -> int:
    """Signed intersection (r,s)(w,w2) of two oriented geodesics with real endpoints.

    Endpoints may be rationals, real quadratic numbers (QuadElt) or None for
    infinity.  The convention is r < w < s < w2 gives -1.
    """
    pts = [r, s, w, w2]
    for i in range(4):
        for j in range(i + 1, 4):
            a, b = pts[i], pts[j]
            if (a is None and b is None) or (
                a is not None and b is not None and _cmp_real(a, b) == 0
            ):
                if {i, j} in ({0, 2}, {0, 3}, {1, 2}, {1, 3}):
                    raise GeodesicTangency("geodesics share an endpoint")
                raise ValueError("degenerate geodesic")

    def side_real(t):
        # side of a boundary point t relative to r -> s: +1 left, -1 right
        if s is None:
            return 1 if _cmp_real(t, r) < 0 or t is None else -1
        if r is None:
            return 1 if t is None or _cmp_real(t, s) > 0 else -1
        if t is None:
            inside = False
        else:
            lo, hi = (r, s) if _cmp_real(r, s) < 0 else (s, r)
            inside = _cmp_real(lo, t) < 0 < _cmp_real(hi, t) or (
                _cmp_real(t, lo) > 0 and _cmp_real(t, hi) < 0
            )
        outside = -1 if inside else 1
        return outside if _cmp_real(r, s) < 0 else -outside

    return (side_real(w) - side_real(w2)) // 2


# enumeration of the orbit of (0, oo) -----------------------------------------------------


@dataclass(frozen=True)
class Geodesic:
    """Oriented geodesic x/y -> u/v with u*y - x*v = p^k (y = 0 or v = 0 for infinity)."""

    x: int
    y: int
    u: int
    v: int
    k: int

    @property
    def r(self):
        return None if self.y == 0 else Fraction(self.x, self.y)

    @property
    def s(self):
        return None if self.v == 0 else Fraction(self.u, self.v)


def separating_geodesics(A: UpperPoint, B: UpperPoint, p: int, K: int):
    """All geodesics in the orbit of (0, oo) with level k <= K crossing a path A -> B.

    Each unoriented geodesic is listed once, oriented so that u*y - x*v = +p^k,
    together with its signed intersection number with the path.
    """
    out = []
    ia, ib = _int_point(A), _int_point(B)
    xa, xb = min(A.x, B.x), max(A.x, B.x)
    h2 = min(A.y2, B.y2)
    h = math.sqrt(h2) * (1 - 1e-12)
    for k in range(K + 1):
        pk = p**k
        # vertical lines Re = x / p^k oriented upwards: (x/p^k, oo), u*y - x*v = p^k
        lo = math.floor(xa * pk)
        hi = math.ceil(xb * pk)
        for x in range(lo, hi + 1):
            if k > 0 and x % p == 0:
                continue
            g = Geodesic(x, pk, 1, 0, k)
            I = path_intersection(g.r, None, A, B)
            if I:
                out.append((g, I))
        bound = int(pk / (2 * h)) + 1
        for y in range(1, bound + 1):
            for v in range(1, bound // y + 1):
                gg = math.gcd(y, v)
                if pk % gg:
                    continue
                y1, v1, pk1 = y // gg, v // gg, pk // gg
                x0 = 0 if y1 == 1 else (-pk1 * pow(v1, -1, y1)) % y1
                for xlo, xhi in _crossing_windows(pk / (2 * y * v), A, B, y):
                    start = xlo + ((x0 - xlo) % y1)
                    for x in range(start, xhi + 1, y1):
                        if math.gcd(x, y) != 1:
                            continue
                        num = pk + x * v
                        if num % y:
                            continue
                        u = num // y
                        if math.gcd(u, v) != 1:
                            continue
                        I = _circle_crossing(x, y, u, v, ia, ib)
                        if I:
                            out.append((Geodesic(x, y, u, v, k), I))
    return out


def _int_point(P: UpperPoint):
    """(a, b, m) with Re P = a/m and |Im P|^2 = b/m^2."""
    m = math.lcm(P.x.denominator, P.y2.denominator)
    return (P.x * m).numerator, (P.y2 * m * m).numerator, m


def _circle_crossing(x, y, u, v, ia, ib) -> int:
    """Intersection number of x/y -> u/v (x/y < u/v, y, v > 0) with the path A -> B.

    P lies outside the half circle iff (yX - x)(vX - u) + yv Y^2 > 0, and the
    outside is the left side for this orientation.
    """
    sides = []
    for a, b, m in (ia, ib):
        d = (y * a - x * m) * (v * a - u * m) + y * v * b
        if d == 0:
            raise GeodesicTangency("point on geodesic")
        sides.append(1 if d > 0 else -1)
    return (sides[0] - sides[1]) // 2


def _crossing_windows(R: float, A: UpperPoint, B: UpperPoint, y: int):
    """Integer windows for x such that the half circle from x/y of radius R may separate A and B.

    A point P lies under the circle iff x/y lies in (P.x - R - w, P.x - R + w)
    with w = sqrt(R^2 - |Im P|^2); separation needs x/y in the symmetric
    difference of the two intervals.  Windows are padded; the caller checks exactly.
    """
    ivs = []
    for P in (A, B):
        px = float(P.x)
        d = R * R - float(P.y2)
        if d <= 0:
            ivs.append(None)
        else:
            w = math.sqrt(d)
            ivs.append((px - R - w, px - R + w))
    a, b = ivs
    if a is None and b is None:
        return []
    if a is None or b is None:
        regions = [a or b]
    else:
        regions = [(min(a[0], b[0]), max(a[0], b[0])), (min(a[1], b[1]), max(a[1], b[1]))]
    out = []
    pad = 1e-9 * (R + 1) + 1e-9
    for lo, hi in regions:
        out.append((math.floor((lo - pad) * y) - 1, math.ceil((hi + pad) * y) + 1))
    if len(out) == 2 and out[0][1] >= out[1][0]:
        out = [(out[0][0], max(out[0][1], out[1][1]))]
    return out


# fast unit arithmetic in Z_{p^2} / p^M --------------------------------------------------


class UnitRing:
    """Integer pairs (a, b) = a + b*w modulo p^M, used in hot loops."""

    def __init__(self, ctx: PrimeContext, M: int):
        self.ctx = ctx
        self.p = ctx.p
        self.r = ctx.r
        self.M = M
        self.mod = ctx.p**M

    def mul(self, x, y):
        a, b = _mul_pair(x[0], x[1], y[0], y[1], self.p, self.r)
        return a % self.mod, b % self.mod

    def inv(self, x):
        n = _norm_pair(x[0], x[1], self.p, self.r) % self.mod
        if n % self.p == 0:
            raise PrecisionError("non-unit encountered in unit arithmetic", deficit=1)
        ni = pow(n, -1, self.mod)
        c = _conj_pair(x[0], x[1], self.p)
        return c[0] * ni % self.mod, c[1] * ni % self.mod

    def pow(self, x, e):
        if e < 0:
            x = self.inv(x)
            e = -e
        out = (1, 0)
        while e:
            if e & 1:
                out = self.mul(out, x)
            x = self.mul(x, x)
            e >>= 1
        return out

    def from_padic(self, z: PadicQuad):
        if z.is_zero or z.val != 0:
            raise PadicDomainError("expected a unit")
        return z.a % self.mod, z.b % self.mod

    def to_padic(self, x, prec=None) -> PadicQuad:
        prec = min(self.M, self.ctx.N) if prec is None else prec
        return PadicQuad(self.ctx, 0, x[0], x[1], prec)

    def mobius(self, m, z):
        """(a z + b)/(c z + d) for an integer matrix and a unit z (result must be a unit)."""
        (a, b), (c, d) = m
        num = ((a * z[0] + b) % self.mod, (a * z[1]) % self.mod)
        den = ((c * z[0] + d) % self.mod, (c * z[1]) % self.mod)
        return self.mul(num, self.inv(den))

    def root(self, x, m):
        """Principal m-th root of a principal unit (p does not divide m)."""
        if m % self.p == 0:
            raise PadicDomainError("root order divisible by p")
        if (x[0] - 1) % self.p or x[1] % self.p:
            raise PadicDomainError("root of a non-principal unit")
        y = (1, 0)
        minv = pow(m, -1, self.mod)
        for _ in range(self.M.bit_length() + 3):
            ym1 = self.pow(y, m - 1)
            ym = self.mul(ym1, y)
            diff = ((ym[0] - x[0]) % self.mod, (ym[1] - x[1]) % self.mod)
            if diff == (0, 0):
                break
            step = self.mul(diff, self.inv(ym1))
            y = ((y[0] - step[0] * minv) % self.mod, (y[1] - step[1] * minv) % self.mod)
        return y


# rational functions given by divisors -------------------------------------------------


@dataclass
class FactoredRigidFunction:
    """prod (v z - u)^e / (y z - x)^e over geodesics, times a constant.

    Only the class modulo constants matters for theta cocycles; ``scalar`` is
    kept for completeness (1 by default).
    """

    factors: list  # of (Geodesic, exponent)
    level: int

    def eval_pair(self, R: UnitRing, z):
        num = (1, 0)
        den = (1, 0)
        mod = R.mod
        za, zb = z
        for g, e in self.factors:
            A = ((g.v * za - g.u) % mod, (g.v * zb) % mod)
            B = ((g.y * za - g.x) % mod, (g.y * zb) % mod)
            if e < 0:
                A, B, e = B, A, -e
            for _ in range(e):
                num = R.mul(num, A)
                den = R.mul(den, B)
        return R.mul(num, R.inv(den))

    def __len__(self):
        return len(self.factors)


def t_w_eval(w, z: PadicQuad) -> PadicQuad:
    """t_w(z): z - w if |w| <= 1, z/w - 1 if |w| > 1, and 1 at w = infinity."""
    ctx = z.ctx
    if w is None:
        return ctx.one()
    if not isinstance(w, PadicQuad):
        w = ctx(Fraction(w))
    if (z - w).is_zero:
        raise PadicDomainError("pole: z = w at working precision")
    if w.is_zero or w.val >= 0:
        return z - w
    return z / w - 1


# the winding cocycle -------------------------------------------------------------------

DEFAULT_XI = UpperPoint(Fraction(3, 11), Fraction(13, 10))


class WindingCocycle:
    """Raw winding cocycle for the base point xi (complex component) at prime p.

    ``raw(g)`` returns the truncated product over separating geodesics of level
    <= ``level`` as a FactoredRigidFunction; the p-adic base point only
    contributes a constant per g and is dropped.
    """

    tag = "winding"

    def __init__(self, p: int, level: int, xi: UpperPoint = DEFAULT_XI):
        self.p = p
        self.level = level
        self.xi = xi
        self._cache = {}

    def raw(self, g) -> FactoredRigidFunction:
        key = mat_normalise(g)
        if key not in self._cache:
            A = self.xi
            B = self.xi.act(g)
            geos = separating_geodesics(A, B, self.p, self.level)
            # each unoriented geodesic occurs twice in the orbit, with equal contributions
            self._cache[key] = FactoredRigidFunction([(gd, 2 * I) for gd, I in geos], self.level)
        return self._cache[key]

    def shifted(self, t) -> "WindingCocycle":
        """Same cocycle with the complex base point scaled by t (a Hecke translate at p)."""
        return WindingCocycle(self.p, self.level, self.xi.scale(t))

    def measure(self, g, depth: int):
        """The boundary measure sum I * (delta_s - delta_r) of raw(g), on balls of level depth."""
        return WindingMeasure(self.p, [(gd, 2 * I) for gd, I in separating_geodesics(
            self.xi, self.xi.act(g), self.p, depth)], depth)


# SL2(Z) words and honest lifts ------------------------------------------------------------


def sl2z_word(g):
    """Letters ('S', 1) / ('T', k) whose product is g in SL2(Z)."""
    (a, b), (c, d) = g
    if a * d - b * c != 1:
        raise ValueError("matrix not in SL2(Z)")
    letters = []
    while c != 0:
        q = a // c
        if q:
            letters.append(("T", q))
        a, b = a - q * c, b - q * d
        letters.append(("S", 1))
        a, b, c, d = c, d, -a, -b
    if a == 1:
        if b:
            letters.append(("T", b))
    else:
        letters.extend([("S", 1), ("S", 1)])
        if b:
            letters.append(("T", -b))
    return letters


def word_matrix(letters):
    m = IDENTITY
    for name, k in letters:
        if name == "S":
            m = mat_mul(m, S_MAT)
        else:
            m = mat_mul(m, ((1, k), (0, 1)))
    return m


class HonestLift:
    """Twelfth power of the honest lift to SL2(Z) of a theta cocycle.

    ``generator_raw(name)`` must return the raw function (modulo scalars) of
    the cocycle on S and T.  Scalars a_S, a_T are fixed by the relators
    S^4 = 1 and (ST)^3 S^2 = 1; only their twelfth powers are needed:
    a_S^12 = K1^-3 and a_T^12 = K1^5 K2^-4.
    """

    def __init__(self, cocycle, R: UnitRing, test_points=None):
        self.cocycle = cocycle
        self.R = R
        self.fS = cocycle.raw(S_MAT)
        self.fT = cocycle.raw(T_MAT)
        pts = test_points or [_default_test_point(R, 0), _default_test_point(R, 1)]
        k1 = [self._raw_word([("S", 1)] * 4, z) for z in pts]
        k2 = [self._raw_word([("S", 1), ("T", 1)] * 3 + [("S", 1)] * 2, z) for z in pts]
        self.relator_defect = max(_pair_distance(R, k1[0], k1[1]), _pair_distance(R, k2[0], k2[1]))
        if self.relator_defect < min(R.M, cocycle.level + 1) - 2:
            raise PrecisionError(
                "relator products are not constant: cocycle relation fails",
                deficit=R.M - self.relator_defect,
            )
        K1, K2 = k1[0], k2[0]
        self.AS = R.pow(K1, -3)
        self.AT = R.mul(R.pow(K1, 5), R.pow(K2, -4))

    def _raw_gen(self, name, w):
        return (self.fS if name == "S" else self.fT).eval_pair(self.R, w)

    def _raw_word(self, letters, z):
        """Product of raw generator values along a word via the cocycle rule."""
        R = self.R
        val = (1, 0)
        g = IDENTITY
        for name, k in letters:
            w = R.mobius(mat_adj(g), z)
            if name == "S":
                val = R.mul(val, self._raw_gen("S", w))
                g = mat_mul(g, S_MAT)
            else:
                if k > 0:
                    for i in range(k):
                        val = R.mul(val, self._raw_gen("T", R.mobius(((1, -i), (0, 1)), w)))
                else:
                    for i in range(1, -k + 1):
                        val = R.mul(val, R.inv(self._raw_gen("T", R.mobius(((1, i), (0, 1)), w))))
                g = mat_mul(g, ((1, k), (0, 1)))
        return val

    def value12(self, g, z):
        """J'(g)(z)^12 for g in SL2(Z) and z a unit pair in H_p^{<=0}."""
        R = self.R
        letters = sl2z_word(g)
        eS = sum(1 for n, _ in letters if n == "S")
        eT = sum(k for n, k in letters if n == "T")
        raw = self._raw_word(letters, z)
        out = R.pow(raw, 12)
        out = R.mul(out, R.pow(self.AS, eS))
        out = R.mul(out, R.pow(self.AT, eT))
        return out


def _default_test_point(R: UnitRing, i: int):
    # omega + i and a second generic unit; both reduce to the standard vertex
    p = R.p
    return ((1 + i) % R.mod, 1) if p != 2 else ((i % R.mod), 1)


def _pair_distance(R: UnitRing, x, y) -> int:
    """Number of agreeing p-adic digits of two units."""
    d0 = (x[0] - y[0]) % R.mod
    d1 = (x[1] - y[1]) % R.mod
    v = R.M
    for t in (d0, d1):
        if t:
            vt = 0
            while t % R.p == 0:
                t //= R.p
                vt += 1
            v = min(v, vt)
    return v


# Hecke operators ----------------------------------------------------------------------


def hecke_reps(n: int):
    """Upper triangular representatives (a b; 0 d), ad = n, 0 <= b < d."""
    return [((a, b), (0, n // a)) for a in range(1, n + 1) if n % a == 0 for b in range(n // a)]


def hecke_reduce(m, n):
    """Write an integer matrix of determinant n as gamma * alpha with alpha a Hecke rep."""
    (a, b), (c, d) = m
    # row operations (left SL2(Z) action) bringing the first column to (g, 0)
    g0 = IDENTITY  # accumulates the inverse transformation
    A = [[a, b], [c, d]]
    left = [[1, 0], [0, 1]]  # left * m = A
    while A[1][0] != 0:
        q = A[0][0] // A[1][0]
        A[0] = [A[0][0] - q * A[1][0], A[0][1] - q * A[1][1]]
        left[0] = [left[0][0] - q * left[1][0], left[0][1] - q * left[1][1]]
        A[0], A[1] = A[1], [-A[0][0], -A[0][1]]
        left[0], left[1] = left[1], [-left[0][0], -left[0][1]]
    if A[0][0] < 0:
        A = [[-x for x in A[0]], [-x for x in A[1]]]
        left = [[-x for x in left[0]], [-x for x in left[1]]]
    aa, dd = A[0][0], A[1][1]
    q = A[0][1] // dd
    A[0] = [A[0][0], A[0][1] - q * dd]
    left[0] = [left[0][0] - q * left[1][0], left[0][1] - q * left[1][1]]
    alpha = ((aa, A[0][1]), (0, dd))
    L = ((left[0][0], left[0][1]), (left[1][0], left[1][1]))
    gamma = mat_adj(L)  # m = L^{-1} alpha
    if mat_mul(gamma, alpha) != tuple(map(tuple, m)) and mat_mul(gamma, alpha) != m:
        raise RuntimeError("Hecke representative permutation failure")
    return gamma, alpha


# evaluation records ----------------------------------------------------------------------


@dataclass
class CocycleEvaluation:
    value: PadicQuad
    cocycle: str
    form: list
    trunc_level: int
    prec: int
    log_norm: PadicQuad = None
    power: int = 1
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "value": self.value.to_json(),
            "ambiguity": "mu_inf_x_pZ",
            "trunc_level": self.trunc_level,
            "cocycle": self.cocycle,
            "form": list(self.form),
            "prec": self.prec,
            "power": self.power,
            "log_norm": None if self.log_norm is None else self.log_norm.to_json(),
        }

    @classmethod
    def from_json(cls, data):
        ln = data.get("log_norm")
        return cls(
            value=PadicQuad.from_json(data["value"]),
            cocycle=data["cocycle"],
            form=list(data["form"]),
            trunc_level=data["trunc_level"],
            prec=data["prec"],
            log_norm=None if ln is None else PadicQuad.from_json(ln),
            power=data.get("power", 1),
        )


def _finish(R: UnitRing, v12, tag, tau: RMPoint, level, prec, extra=None) -> CocycleEvaluation:
    """Turn a twelfth power into a value modulo roots of unity and p^Z."""
    ctx = R.ctx
    X = R.to_padic(v12, prec)
    pp = principal_part(X)
    logn = padic_log(X.norm()) / ctx(12)
    if 12 % ctx.p:
        root = R.root(R.from_padic(pp), 12)
        value = R.to_padic(root, prec)
        power = 1
    else:
        value = pp
        power = 12
    return CocycleEvaluation(
        value=value,
        cocycle=tag,
        form=tau.form.as_list(),
        trunc_level=level,
        prec=prec,
        log_norm=logn,
        power=power,
        extra=extra or {},
    )


def _setup(tau: RMPoint, ctx: PrimeContext, level):
    if tau.p != ctx.p:
        raise ValueError("RM point prime differs from context prime")
    level = ctx.N - 1 if level is None else level
    R = UnitRing(ctx, ctx.N + 2)
    z = R.from_padic(embed_rm_point(tau, ctx))
    return level, R, z


def winding_eval(tau: RMPoint, ctx: PrimeContext, xi: UpperPoint = DEFAULT_XI, level=None,
                 cocycle=None) -> CocycleEvaluation:
    """J_{(0,oo)}[tau] = J(gamma_tau)(tau) on the honest SL2(Z) lift."""
    level, R, z = _setup(tau, ctx, level)
    cocycle = cocycle or WindingCocycle(ctx.p, level, xi)
    lift = HonestLift(cocycle, R)
    v12 = lift.value12(tau.automorph, z)
    prec = min(ctx.N, level + 1, lift.relator_defect)
    return _finish(R, v12, "winding", tau, level, prec)


def hecke_value12(lift: HonestLift, n: int, gamma, z):
    """(T_n J)(gamma)(z)^12 for p not dividing n, via coset permutation."""
    R = lift.R
    out = (1, 0)
    for alpha in hecke_reps(n):
        gi, _ = hecke_reduce(mat_mul(alpha, gamma), n)
        out = R.mul(out, lift.value12(gi, R.mobius(alpha, z)))
    return out


def hecke_translate(tau: RMPoint, n: int, ctx: PrimeContext, cocycle=None, level=None,
                    xi: UpperPoint = DEFAULT_XI) -> CocycleEvaluation:
    """(T_n J)[tau] for the winding cocycle (default) or a supplied cocycle.

    For n = p^a m with p not dividing m, T_{p^a} acts on the winding cocycle by
    moving the complex base point xi to p^a xi; T_m uses the double coset
    decomposition into upper triangular representatives.
    """
    if n < 1:
        raise ValueError("n must be positive")
    level, R, z = _setup(tau, ctx, level)
    p = ctx.p
    a = 0
    m = n
    while m % p == 0:
        m //= p
        a += 1
    if cocycle is None:
        cocycle = WindingCocycle(p, level, xi)
    if a:
        if not hasattr(cocycle, "shifted"):
            raise ValueError("T_p is only available for the winding cocycle")
        cocycle = cocycle.shifted(p**a)
    lift = HonestLift(cocycle, R)
    v12 = hecke_value12(lift, m, tau.automorph, z)
    prec = min(ctx.N, level + 1, lift.relator_defect)
    return _finish(R, v12, f"T{n}({cocycle.tag})", tau, level, prec)


# Dedekind-Rademacher homomorphism -------------------------------------------------------


def _saw(t: Fraction) -> Fraction:
    if t.denominator == 1:
        return Fraction(0)
    return t - (t.numerator // t.denominator) - Fraction(1, 2)


@lru_cache(maxsize=65536)
def dedekind_sum(h: int, k: int) -> Fraction:
    """s(h, k) = sum_{r mod k} ((r/k)) ((h r/k)) for k >= 1, via reciprocity."""
    if k <= 0:
        raise ValueError("k must be positive")
    h %= k
    if h == 0 or k == 1:
        return Fraction(0)
    if k < 50:
        return sum((_saw(Fraction(r, k)) * _saw(Fraction(h * r, k)) for r in range(1, k)), Fraction(0))
    # s(h,k) + s(k,h) = (h/k + k/h + 1/(hk))/12 - 1/4
    return (Fraction(h, k) + Fraction(k, h) + Fraction(1, h * k)) / 12 - Fraction(1, 4) - dedekind_sum(k, h)


def rademacher_phi(m) -> Fraction:
    """Rademacher's function on SL2(Z)."""
    (a, b), (c, d) = m
    if c == 0:
        return Fraction(b, d)
    sg = 1 if c > 0 else -1
    return Fraction(a + d, c) - 12 * sg * dedekind_sum(d, abs(c))


def dedekind_rademacher_phi(m, p: int) -> int:
    """Period homomorphism Gamma_0(p) -> Z of 24 E_2^{(p)}(z) dz."""
    (a, b), (c, d) = m
    if a * d - b * c != 1 or c % p:
        raise ValueError("matrix not in Gamma_0(p)")
    val = rademacher_phi(((a, p * b), (c // p, d))) - rademacher_phi(m)
    if val.denominator != 1:
        raise RuntimeError("non-integral Dedekind-Rademacher value")
    return int(val)


def period_integral(m, p: int, z0=None, terms: int = 400, dps: int = 30):
    """24 * integral of E_2^{(p)} from z0 to m z0 (numerical, via mpmath)."""
    import mpmath

    mpmath.mp.dps = dps
    (a, b), (c, d) = m
    if z0 is None:
        # a point with the path well inside the upper half plane
        z0 = mpmath.mpc(-mpmath.mpf(d) / c, 1 / mpmath.mpf(abs(c))) if c else mpmath.mpc(0, 1)
    z1 = (a * z0 + b) / (c * z0 + d)
    sig = [0] + [sum(e for e in range(1, n + 1) if n % e == 0 and e % p) for n in range(1, terms + 1)]

    def prim(z):
        q = mpmath.exp(2j * mpmath.pi * z)
        s = mpmath.mpf(p - 1) / 24 * z
        qn = 1
        for n in range(1, terms + 1):
            qn *= q
            s += sig[n] * qn / (2j * mpmath.pi * n)
        return s

    return 24 * (prim(z1) - prim(z0))


# boundary measures and multiplicative integrals -----------------------------------------


@dataclass
class BoundaryMeasure:
    """Integer masses on the level-``depth`` cover of P^1(Q_p).

    Keys ('Z', a) stand for a + p^depth Z_p (0 <= a < p^depth); keys ('I', b)
    for the image of b + p^depth Z_p under t -> 1/t with b in pZ_p (b = 0 holds
    infinity).
    """

    p: int
    depth: int
    masses: dict

    @classmethod
    def zero(cls, p, depth):
        return cls(p, depth, {})

    @classmethod
    def from_point_masses(cls, p, depth, points):
        mod = p**depth
        masses = defaultdict(Fraction)
        for t, m in points:
            masses[ball_key(t, p, mod)] += m
        return cls(p, depth, {k: v for k, v in masses.items() if v})

    def scaled(self, c):
        c = Fraction(c)
        return BoundaryMeasure(self.p, self.depth, {k: v * c for k, v in self.masses.items() if v * c})

    def total(self):
        return sum(self.masses.values(), Fraction(0))

    def mass(self, kind: str, center: int, level: int) -> Fraction:
        """Mass of the ball of the given kind, centre and level (<= depth)."""
        if level > self.depth:
            raise ValueError("ball finer than the stored depth")
        mod = self.p**level
        return sum(
            (m for (kd, c), m in self.masses.items() if kd == kind and (c - center) % mod == 0),
            Fraction(0),
        )

    def mass_edge(self, source, target) -> Fraction:
        from .tree import edge_to_ball

        ball = edge_to_ball(source, target)
        return self.mass_ball(ball)

    def mass_ball(self, ball) -> Fraction:
        """Mass of a tree Ball (centre + p^r Z_p or its complement)."""
        tot = Fraction(0)
        for (kd, c), m in self.masses.items():
            t = _ball_sample(kd, c, self.p)
            if ball.contains(t):
                tot += m
        return tot

    def to_json(self):
        return {
            "p": self.p,
            "depth": self.depth,
            "masses": [[k[0], k[1], str(v)] for k, v in sorted(self.masses.items())],
        }

    @classmethod
    def from_json(cls, data):
        return cls(data["p"], data["depth"], {(k, c): Fraction(v) for k, c, v in data["masses"]})


def _ball_sample(kind, c, p):
    if kind == "Z":
        return Fraction(c)
    return None if c == 0 else Fraction(1, c)


def ball_key(t, p: int, mod: int):
    """Key of the level ball containing t (a rational or None for infinity)."""
    if t is None:
        return ("I", 0)
    t = Fraction(t)
    den = t.denominator
    if den % p:
        return ("Z", t.numerator * pow(den, -1, mod) % mod)
    s = 1 / t  # lies in pZ_p
    return ("I", s.numerator * pow(s.denominator, -1, mod) % mod)


class WindingMeasure(BoundaryMeasure):
    """Boundary measure sum e * (delta_s - delta_r) of a winding cocycle value."""

    def __init__(self, p, weighted_geodesics, depth):
        pts = []
        for g, e in weighted_geodesics:
            if g.k >= depth:
                continue  # both endpoints in one ball of this level
            pts.append((g.s, e))
            pts.append((g.r, -e))
        m = BoundaryMeasure.from_point_masses(p, depth, pts)
        super().__init__(p, depth, m.masses)


def mult_integral(mu: BoundaryMeasure, z: PadicQuad) -> PadicQuad:
    """Riemann product prod_B t_{B}(z)^{mu(B)} over the level cover (left endpoints)."""
    ctx = z.ctx
    R = UnitRing(ctx, ctx.N + 2)
    zz = R.from_padic(z)
    return R.to_padic(_mult_integral_pair(mu, R, zz), min(ctx.N, mu.depth))


def _mult_integral_pair(mu: BoundaryMeasure, R: UnitRing, z):
    num = (1, 0)
    den = (1, 0)
    mod = R.mod
    for (kind, c), m in mu.masses.items():
        if m.denominator != 1:
            raise ValueError("multiplicative integral needs integral masses")
        e = int(m)
        if kind == "Z":
            t = ((z[0] - c) % mod, z[1] % mod)
        elif c == 0:
            continue
        else:
            # t_w(z) = z/w - 1 = c z - 1 for w = 1/c
            t = ((c * z[0] - 1) % mod, (c * z[1]) % mod)
        if e > 0:
            num = R.mul(num, R.pow(t, e))
        else:
            den = R.mul(den, R.pow(t, -e))
    return R.mul(num, R.inv(den))


def delta_U(cocycle, g) -> Fraction:
    """Annular residue along 1 < |z| < p: the mass of Z_p under the measure of g."""
    mu = cocycle.measure(g, 1)
    return sum((m for (kd, _), m in mu.masses.items() if kd == "Z"), Fraction(0))


GAMMA0_TEST = (((1, 1), (0, 1)), ((1, 0), (1, 1)))


def gamma0_generators(p: int):
    """A few elements of Gamma_0(p) used to compare homomorphisms."""
    return [((1, 1), (0, 1)), ((1, 0), (p, 1)), ((2, 1), (p * 1, (p + 1) // 2)) if p % 2 else ((1, 0), (2 * p, 1))]


class MeasureCocycle:
    """Theta cocycle g -> mult. integral of a measure-valued cocycle, on balls of level ``depth``.

    The measure of g is a rational multiple of the winding measure (the
    genus-zero situation); ``scale`` is that multiple.
    """

    def __init__(self, p: int, depth: int, scale, xi: UpperPoint = DEFAULT_XI, tag="dr"):
        self.p = p
        self.level = depth
        self.depth = depth
        self.scale = Fraction(scale)
        self.winding = WindingCocycle(p, depth - 1, xi)
        self.tag = tag
        self._cache = {}

    def measure(self, g, depth=None):
        depth = self.depth if depth is None else depth
        return self.winding.measure(g, depth).scaled(self.scale)

    def raw(self, g):
        key = mat_normalise(g)
        if key not in self._cache:
            self._cache[key] = _MeasureFunction(self.measure(g))
        return self._cache[key]

    def shifted(self, t):
        return MeasureCocycle(self.p, self.depth, self.scale, self.winding.xi.scale(t), self.tag)


class _MeasureFunction:
    def __init__(self, mu):
        self.mu = mu

    def eval_pair(self, R, z):
        return _mult_integral_pair(self.mu, R, z)


def winding_to_dr_ratio(p: int, xi: UpperPoint = DEFAULT_XI, check=True) -> Fraction:
    """c with delta_U(winding)(g) = c * phi_DR(g) on Gamma_0(p)."""
    w = WindingCocycle(p, 1, xi)
    T = ((1, 1), (0, 1))
    c = Fraction(delta_U(w, T)) / dedekind_rademacher_phi(T, p)
    if check:
        for g in gamma0_generators(p):
            if delta_U(w, g) != c * dedekind_rademacher_phi(g, p):
                raise RuntimeError("winding residue is not proportional to phi_DR")
    return c


def measure_from_cocycle(phi, g, depth: int, p: int, xi: UpperPoint = DEFAULT_XI) -> BoundaryMeasure:
    """Harmonic measure of g attached to a homomorphism phi on Gamma_0(p).

    At genus-zero levels every such phi is a multiple lambda of phi_DR, and the
    lift is lambda / c times the winding measure where c is the residue ratio.
    """
    T = ((1, 1), (0, 1))
    lam = Fraction(phi(T)) / dedekind_rademacher_phi(T, p)
    for h in gamma0_generators(p):
        if Fraction(phi(h)) != lam * dedekind_rademacher_phi(h, p):
            raise ValueError("phi is not proportional to phi_DR (non genus-zero input)")
    if lam == 0:
        return BoundaryMeasure.zero(p, depth)
    c = winding_to_dr_ratio(p, xi)
    return WindingCocycle(p, depth - 1, xi).measure(g, depth).scaled(lam / c)


def dr_cocycle(p: int, depth: int, xi: UpperPoint = DEFAULT_XI) -> MeasureCocycle:
    return MeasureCocycle(p, depth, 1 / winding_to_dr_ratio(p, xi), xi, tag="dr")


def dr_eval(tau: RMPoint, ctx: PrimeContext, depth=None, xi: UpperPoint = DEFAULT_XI) -> CocycleEvaluation:
    """J_DR[tau] via multiplicative integrals of the lifted measure, on the honest SL2(Z) lift."""
    depth = ctx.N if depth is None else depth
    level, R, z = _setup(tau, ctx, depth)
    coc = dr_cocycle(ctx.p, depth, xi)
    lift = HonestLift(coc, R)
    v12 = lift.value12(tau.automorph, z)
    prec = min(ctx.N, depth, lift.relator_defect)
    return _finish(R, v12, "dr", tau, depth, prec)


# the trivial cocycle -----------------------------------------------------------------------


class TrivialCocycle:
    """g -> (c z + d), the automorphy factor."""

    tag = "trivial"

    def __init__(self, level=64):
        self.level = level

    def raw(self, g):
        return _Affine(g)


class _Affine:
    def __init__(self, g):
        self.g = g

    def eval_pair(self, R, z):
        (a, b), (c, d) = self.g
        return ((c * z[0] + d) % R.mod, (c * z[1]) % R.mod)


def trivial_eval(tau: RMPoint, ctx: PrimeContext) -> CocycleEvaluation:
    level, R, z = _setup(tau, ctx, ctx.N)
    lift = HonestLift(TrivialCocycle(ctx.N + 2), R)
    v12 = lift.value12(tau.automorph, z)
    return _finish(R, v12, "trivial", tau, level, ctx.N)


# RM theta cocycles -------------------------------------------------------------------------


def point_form(w: QuadElt):
    """Primitive form (a, b, c) with w = (-b + sqrt(b^2 - 4ac)) / (2a)."""
    if w.y == 0:
        raise ValueError("rational point")
    s, n = 2 * w.x, w.x * w.x - w.y * w.y * w.D  # w^2 - s w + n = 0
    den = math.lcm(s.denominator, n.denominator)
    a, b, c = den, -int(s * den), int(n * den)
    g = math.gcd(math.gcd(a, b), c)
    a, b, c = a // g, b // g, c // g
    if a * w.y < 0:
        a, b, c = -a, -b, -c
    return BinaryQF(a, b, c)


def _lower_conductor(w: QuadElt, p: int):
    """One det-p step w -> M w lowering the p-part of the discriminant, or None."""
    D = point_form(w).D
    cands = [QuadElt(w.x * p, w.y * p, w.D)] + [QuadElt((w.x + j) / p, w.y / p, w.D) for j in range(p)]
    for c in cands:
        if point_form(c).D * p * p == D:
            return c
    return None


def in_gamma_orbit(w: QuadElt, tau: RMPoint) -> bool:
    """Whether w lies in the SL2(Z[1/p])-orbit of the RM point tau."""
    p = tau.p
    D0 = tau.D
    D = point_form(w).D
    steps = 0
    while D != D0:
        if D % (p * p) or D < D0:
            return False
        w = _lower_conductor(w, p)
        if w is None:
            return False
        D = point_form(w).D
        steps += 1
    if steps % 2:
        return False
    return class_rep(point_form(w)) == narrow_class_of_point(tau)


def orbit_crossings(tau1: RMPoint, x0: Fraction, K: int):
    """Points w of the orbit of tau1, up to p-conductor p^K, whose geodesic (w, w') crosses (x0, oo).

    Yields (k, w, exponent) with exponent the signed intersection number (x0, oo).(w, w').
    """
    p, D0 = tau1.p, tau1.D
    x0 = Fraction(x0)
    a0, c0 = x0.numerator, x0.denominator
    out = []
    for k in range(K + 1):
        Dk = D0 * p ** (2 * k)
        lim = math.isqrt(Dk * c0 * c0)
        for T in range(-lim, lim + 1):
            num = Dk * c0 * c0 - T * T
            if num <= 0 or num % 4:
                continue
            Nn = num // 4  # = -A * f(a0, c0)
            for A in divisors(Nn):
                for sA in (A, -A):
                    if (T - 2 * sA * a0) % c0:
                        continue
                    B = (T - 2 * sA * a0) // c0
                    if (B * B - Dk) % (4 * sA):
                        continue
                    C = (B * B - Dk) // (4 * sA)
                    if math.gcd(math.gcd(sA, B), C) != 1:
                        continue
                    w = QuadElt(Fraction(-B, 2 * sA), Fraction(p**k, 2 * sA), D0)
                    if not in_gamma_orbit(w, tau1):
                        continue
                    e = intersection_number(x0, None, w, w.conj())
                    if e:
                        out.append((k, w, e))
    return out


def rm_theta_eval(tau1: RMPoint, tau2: RMPoint, ctx: PrimeContext, level=None) -> CocycleEvaluation:
    """J_{tau1}[tau2] from the orbit product, truncated at p-conductor ``level``.

    The claimed precision is the agreement between the last two truncations
    (0 when they do not agree at all); it is an empirical bound.
    """
    if tau1.p != tau2.p or tau1.p != ctx.p:
        raise ValueError("points and context must share the prime")
    level = 2 if level is None else level
    g = tau2.automorph
    (a, b), (c, d) = g
    if c == 0:
        raise ValueError("automorph fixes infinity")
    x0 = Fraction(a, c)
    z = embed_rm_point(tau2, ctx)
    crossings = orbit_crossings(tau1, x0, level)
    partial = {}
    val = ctx.one()
    counts = defaultdict(int)
    for k in range(level + 1):
        for kk, w, e in crossings:
            if kk != k:
                continue
            wz = embed_quad(w, ctx)
            gap = z - wz
            if gap.is_zero or gap.val >= ctx.N:
                raise PadicDomainError("orbit point collides with the evaluation point")
            f = t_w_eval(wz, z)
            val = val * (f if e > 0 else f.inverse()) if abs(e) == 1 else val * _pow_padic(f, e)
            counts[k] += 1
        partial[k] = principal_part(val)
    # compare the two finest truncations that actually added orbit points
    filled = [k for k in range(level + 1) if counts[k]]
    prec = ctx.N
    if len(filled) >= 2:
        diff = partial[filled[-1]] - partial[filled[-2]]
        prec = ctx.N if diff.is_zero else max(0, min(ctx.N, diff.val))
    value = partial[level]
    return CocycleEvaluation(
        value=value.truncate(prec) if prec else value,
        cocycle="rm_theta",
        form=tau2.form.as_list(),
        trunc_level=level,
        prec=prec,
        log_norm=padic_log(value.norm()),
        power=1,
        extra={"tau1": tau1.form.as_list(), "orbit_points_per_level": [counts[k] for k in range(level + 1)]},
    )


def _pow_padic(x: PadicQuad, e: int) -> PadicQuad:
    if e < 0:
        x, e = x.inverse(), -e
    out = x.ctx.one()
    for _ in range(e):
        out = out * x
    return out
