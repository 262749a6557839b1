"""Binary quadratic forms, narrow classes, genus characters and RM points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from sympy import factorint
from sympy.ntheory.residue_ntheory import sqrt_mod

from .padic import PadicDomainError, PrimeContext, PadicQuad, hensel_sqrt


class DiscriminantError(ValueError):
    pass


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n)."""
    if n == 0:
        return 1 if abs(a) == 1 else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    if v:
        if a % 2 == 0:
            return 0
        if v % 2 and a % 8 in (3, 5):
            result = -result
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def is_discriminant(D: int) -> bool:
    return D != 0 and D % 4 in (0, 1) and not (D > 0 and is_square(D))


def is_fundamental(D: int) -> bool:
    if not is_discriminant(D):
        return False
    if D % 4 == 1:
        return _squarefree(D)
    m = D // 4
    return m % 4 in (2, 3) and _squarefree(m)


def _squarefree(n: int) -> bool:
    return all(e == 1 for e in factorint(abs(n)).values())


@dataclass(frozen=True, order=True)
class BinaryQF:
    a: int
    b: int
    c: int

    def __post_init__(self):
        if math.gcd(math.gcd(self.a, self.b), self.c) != 1:
            raise ValueError(f"form {self.as_list()} is not primitive")

    @property
    def D(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def as_list(self):
        return [self.a, self.b, self.c]

    def __call__(self, x, y):
        return self.a * x * x + self.b * x * y + self.c * y * y

    def act(self, m):
        """The form f((x, y) M) transformed by M = ((p, q), (r, s)) in SL2(Z).

        Convention: if tau is the root of f then m^{-1}... see ``root_transform``.
        Returns f(p x + q y, r x + s y).
        """
        (p, q), (r, s) = m
        a, b, c = self.a, self.b, self.c
        na = a * p * p + b * p * r + c * r * r
        nb = 2 * a * p * q + b * (p * s + q * r) + 2 * c * r * s
        nc = a * q * q + b * q * s + c * s * s
        return BinaryQF(na, nb, nc)

    def roots_real(self):
        s = math.sqrt(self.D)
        return (-self.b + s) / (2 * self.a), (-self.b - s) / (2 * self.a)

    def to_json(self):
        return self.as_list()


def form_for_point(m, f: BinaryQF) -> BinaryQF:
    """The form whose (+)-root is g*tau when tau is the (+)-root of f and g = m.

    If f(tau, 1) = 0 and g = ((p, q), (r, s)) then the form
    f(s x - q y, -r x + p y) vanishes at g*tau; the leading-root choice
    (-b + sqrt D)/(2a) is preserved by this substitution for det g = 1.
    """
    (p, q), (r, s) = m
    return f.act(((s, -q), (-r, p)))


# definite forms ----------------------------------------------------------------


def reduce_definite(f: BinaryQF) -> BinaryQF:
    a, b, c = f.a, f.b, f.c
    if a < 0:
        raise DiscriminantError("only positive definite forms are reduced")
    while True:
        if b > a or b <= -a:
            # b <- b mod 2a into (-a, a]
            k = (a - b) // (2 * a)
            b2 = b + 2 * a * k
            c = (b2 * b2 - f.D) // (4 * a)
            b = b2
        if a > c:
            a, b, c = c, -b, a
            continue
        if a == c and b < 0:
            b = -b
        return BinaryQF(a, b, c)


def _classes_negative(D):
    out = []
    a = 1
    while 3 * a * a <= -D:
        for b in range(-a + 1, a + 1):
            if (b * b - D) % (4 * a):
                continue
            c = (b * b - D) // (4 * a)
            if c < a:
                continue
            if a == c and b < 0:
                continue
            if math.gcd(math.gcd(a, b), c) != 1:
                continue
            out.append(BinaryQF(a, b, c))
        a += 1
    return sorted(out)


# indefinite forms --------------------------------------------------------------


def _isqrt_real(D):
    return math.isqrt(D)


def is_reduced_indefinite(f: BinaryQF) -> bool:
    D = f.D
    s = math.sqrt(D)
    return 0 < f.b < s and s - f.b < 2 * abs(f.a) < s + f.b


def rho(f: BinaryQF) -> BinaryQF:
    """One step of the reduction operator (proper equivalence)."""
    D = f.D
    c = f.c
    ac = abs(c)
    r = _isqrt_real(D)
    if ac > r:
        # -|c| < b' <= |c|
        b2 = (-f.b) % (2 * ac)
        if b2 > ac:
            b2 -= 2 * ac
    else:
        # sqrt(D) - 2|c| < b' < sqrt(D)
        b2 = (-f.b) % (2 * ac)
        # largest b2 with b2 <= r (r < sqrt(D) since D not square)
        b2 = b2 + 2 * ac * ((r - b2) // (2 * ac))
    return BinaryQF(c, b2, (b2 * b2 - D) // (4 * c))


def reduce_indefinite(f: BinaryQF) -> BinaryQF:
    g = f
    for _ in range(10000):
        if is_reduced_indefinite(g):
            return g
        g = rho(g)
    raise RuntimeError("indefinite reduction did not terminate")


def cycle(f: BinaryQF):
    g = reduce_indefinite(f)
    out = [g]
    h = rho(g)
    while h != g:
        out.append(h)
        h = rho(h)
    return out


def class_rep(f: BinaryQF) -> BinaryQF:
    """Canonical representative of the proper (SL2(Z)) class of f."""
    if f.D < 0:
        if f.a < 0:
            raise DiscriminantError("negative definite forms are not classified")
        return reduce_definite(f)
    return min(cycle(f))


def _classes_positive(D):
    r = _isqrt_real(D)
    seen = set()
    reps = []
    for b in range(1, r + 1):
        if (b - D) % 2:
            continue
        n = (D - b * b) // 4
        if n <= 0:
            continue
        for a in range(1, n + 1):
            if n % a:
                continue
            for sa in (a, -a):
                c = -n // sa
                f = BinaryQF.__new__(BinaryQF)
                if math.gcd(math.gcd(sa, b), c) != 1:
                    continue
                f = BinaryQF(sa, b, c)
                if not is_reduced_indefinite(f) or f in seen:
                    continue
                cyc = cycle(f)
                seen.update(cyc)
                reps.append(min(cyc))
    return sorted(reps)


@lru_cache(maxsize=512)
def _class_list(D):
    if not is_discriminant(D):
        raise DiscriminantError(f"{D} is not a valid non-square discriminant")
    if D < 0:
        return tuple(_classes_negative(D))
    return tuple(_classes_positive(D))


def reduce_and_classgroup(D: int):
    """One form per (narrow, for D > 0) class, sorted lexicographically."""
    return list(_class_list(D))


def compose(f: BinaryQF, g: BinaryQF) -> BinaryQF:
    """Gauss composition (Cohen, Alg. 5.4.7), result reduced to its class rep."""
    if f.D != g.D:
        raise DiscriminantError("composition needs equal discriminants")
    D = f.D
    a1, b1, c1 = f.a, f.b, f.c
    a2, b2, c2 = g.a, g.b, g.c
    if abs(a1) > abs(a2):
        a1, b1, c1, a2, b2, c2 = a2, b2, c2, a1, b1, c1
    s = (b1 + b2) // 2
    n = b2 - s
    d1, u, v = _xgcd(a1, a2)
    d, x1, y1 = _xgcd(s, d1)
    # d = x1*s + y1*d1
    u, v, w = y1 * u, y1 * v, -x1
    a3 = a1 * a2 // (d * d)
    m = 2 * a3
    b3 = (b2 + 2 * (a2 // d) * (v * (s - b2) + w * c2)) % abs(m)
    c3 = (b3 * b3 - D) // (4 * a3)
    return class_rep(BinaryQF(a3, b3, c3))


def _xgcd(a, b):
    """(g, x, y) with x*a + y*b = g >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def principal_form(D: int) -> BinaryQF:
    if D % 4 == 0:
        return BinaryQF(1, 0, -D // 4)
    return BinaryQF(1, 1, (1 - D) // 4)


def inverse_form(f: BinaryQF) -> BinaryQF:
    return class_rep(BinaryQF(f.a, -f.b, f.c))


# Pell equation and automorphs -------------------------------------------------------


@lru_cache(maxsize=2048)
def pell_fundamental(D: int):
    """Least (t, u) with t, u > 0 and t^2 - D u^2 = 4."""
    if D <= 0 or is_square(D):
        raise DiscriminantError("Pell equation needs a positive non-square D")
    # continued fraction of (b0 + sqrt D)/2 via the principal cycle: iterate
    # the automorph of the principal form composed along its cycle.
    f0 = reduce_indefinite(principal_form(D))
    # track the transformation matrix along the rho steps until the cycle closes
    m = ((1, 0), (0, 1))
    g = f0
    while True:
        c = g.c
        h = rho(g)
        t = (h.b + g.b) // (2 * c)
        step = ((0, -1), (1, t))
        m = _matmul(m, step)
        g = h
        if g == f0:
            break
    # m transforms f0 to itself; its trace gives t
    tr = m[0][0] + m[1][1]
    t = abs(tr)
    u2 = (t * t - 4)
    if u2 % D:
        raise RuntimeError("inconsistent Pell cycle")
    u = math.isqrt(u2 // D)
    if t * t - D * u * u != 4:
        raise RuntimeError("Pell solution check failed")
    return t, u


def _matmul(x, y):
    return (
        (x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]),
        (x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]),
    )


def pell_automorph(f: BinaryQF):
    """SL2(Z) generator of the stabiliser of the roots of f (trace > 2)."""
    if f.D <= 0:
        raise DiscriminantError("automorphs exist for indefinite forms only")
    t, u = pell_fundamental(f.D)
    a, b, c = f.a, f.b, f.c
    return (((t - b * u) // 2, -c * u), (a * u, (t + b * u) // 2))


# genus characters -----------------------------------------------------------------


@dataclass(frozen=True)
class GenusChar:
    D1: int
    D2: int

    def __post_init__(self):
        if math.gcd(self.D1, self.D2) != 1:
            raise DiscriminantError("genus character needs coprime discriminants")
        if not (is_fundamental(self.D1) and is_fundamental(self.D2)):
            raise DiscriminantError("genus character needs fundamental discriminants")
        if is_square(self.D1 * self.D2):
            raise DiscriminantError("D1*D2 must not be a square")

    @property
    def D(self):
        return self.D1 * self.D2

    @property
    def totally_odd(self):
        return self.D1 < 0 and self.D2 < 0

    def at_prime(self, q: int) -> int:
        """Value on a prime ideal of norm q (q rational prime, not inert)."""
        if self.D1 % q != 0 or (q == 2 and self.D1 % 4 != 0 and self.D1 % 2 != 0):
            if self.D1 % q != 0:
                return kronecker(self.D1, q)
        return kronecker(self.D2, q)

    def psi(self, q: int) -> int:
        # (D1/q) unless q | D1, then (D2/q); agrees with eps on split primes and
        # gives the decided value on ramified primes
        if self.D1 % q:
            return kronecker(self.D1, q)
        return kronecker(self.D2, q)

    def on_norm(self, n: int) -> int:
        """chi of an integral ideal of norm n (completely multiplicative in n)."""
        if n <= 0:
            raise ValueError("ideal norms are positive")
        out = 1
        for q, e in factorint(n).items():
            if e % 2 and kronecker(self.D, q) == -1:
                raise PadicDomainError(f"no ideal has odd exponent at inert prime {q}")
            out *= self.psi(q) ** e
        return out


def genus_eps(n: int, chi: GenusChar) -> int:
    """epsilon(n) as defined for Gross-Zagier: multiplicative, from Kronecker symbols."""
    if n < 1:
        raise ValueError("n must be positive")
    out = 1
    for q, e in factorint(n).items():
        if kronecker(chi.D, q) == -1:
            raise PadicDomainError(f"eps undefined: ({chi.D}/{q}) = -1")
        if chi.D1 % q:
            val = kronecker(chi.D1, q)
        else:
            val = kronecker(chi.D2, q)
        out *= val**e
    return out


# real quadratic field data ---------------------------------------------------------


@dataclass(frozen=True)
class QuadElt:
    """(x + y sqrt(D)) with rational x, y; D the field discriminant."""

    x: Fraction
    y: Fraction
    D: int

    def __add__(self, o):
        return QuadElt(self.x + o.x, self.y + o.y, self.D)

    def __sub__(self, o):
        return QuadElt(self.x - o.x, self.y - o.y, self.D)

    def __mul__(self, o):
        if isinstance(o, (int, Fraction)):
            return QuadElt(self.x * o, self.y * o, self.D)
        return QuadElt(self.x * o.x + self.D * self.y * o.y, self.x * o.y + self.y * o.x, self.D)

    __rmul__ = __mul__

    def conj(self):
        return QuadElt(self.x, -self.y, self.D)

    def norm(self) -> Fraction:
        return self.x * self.x - self.D * self.y * self.y

    def trace(self) -> Fraction:
        return 2 * self.x

    def inverse(self):
        n = self.norm()
        return QuadElt(self.x / n, -self.y / n, self.D)

    def __truediv__(self, o):
        return self * o.inverse()

    def totally_positive(self) -> bool:
        return self.x > 0 and self.norm() > 0

    def embeddings(self):
        s = math.sqrt(self.D)
        return float(self.x + self.y * s), float(self.x - self.y * s)

    def sign(self):
        """Exact sign of x + y sqrt(D)."""
        x, y = self.x, self.y
        if y == 0:
            return (x > 0) - (x < 0)
        if x == 0:
            return (y > 0) - (y < 0)
        if (x > 0) == (y > 0):
            return 1 if x > 0 else -1
        # opposite signs: compare x^2 with D y^2
        d = x * x - self.D * y * y
        if d == 0:
            return 0
        return (1 if x > 0 else -1) if d > 0 else (1 if y > 0 else -1)

    def is_integral(self) -> bool:
        # integral iff trace and norm are integers
        return self.trace().denominator == 1 and self.norm().denominator == 1

    def to_json(self):
        return [str(self.x), str(self.y)]


def Q(D, x, y=0):
    return QuadElt(Fraction(x), Fraction(y), D)


@dataclass(frozen=True)
class RealQuadraticField:
    D: int

    def __post_init__(self):
        if self.D <= 0 or not is_fundamental(self.D):
            raise DiscriminantError(f"{self.D} is not a positive fundamental discriminant")

    def omega(self) -> QuadElt:
        """omega = (D + sqrt D)/2, so O = Z + Z*omega."""
        return QuadElt(Fraction(self.D, 2), Fraction(1, 2), self.D)

    def sqrtD(self) -> QuadElt:
        return QuadElt(Fraction(0), Fraction(1), self.D)

    def coords(self, e: QuadElt):
        """Coordinates (m, n) with e = m + n*omega."""
        n = 2 * e.y
        m = e.x - n * Fraction(self.D, 2)
        return m, n

    def splitting(self, q: int) -> int:
        return kronecker(self.D, q)


# ideals ------------------------------------------------------------------------


def _hnf2(vectors):
    """HNF basis ((a, b), (0, c)) of the Z-span of integer vectors in Z^2.

    Rows are (coef of 1, coef of omega); returns a, b, c with the lattice
    spanned by (a, 0) and (b, c), 0 <= b < a, a, c > 0.
    """
    # column 2 gcd
    vecs = [list(v) for v in vectors if v[0] or v[1]]
    c = 0
    piv = None
    for v in vecs:
        if v[1]:
            if piv is None:
                piv = v
                c = v[1]
            else:
                g, x, y = _xgcd(piv[1], v[1])
                newp = [x * piv[0] + y * v[0], g]
                other = [v[1] // g * piv[0] - piv[1] // g * v[0], 0]
                vecs.append(other)
                piv = newp
    a = 0
    for v in vecs:
        if v is piv:
            continue
        if piv is not None and v[1]:
            k = v[1] // piv[1]
            r = [v[0] - k * piv[0], v[1] - k * piv[1]]
        else:
            r = v
        if r[1] == 0:
            a = math.gcd(a, r[0])
    if piv is None or a == 0:
        raise ValueError("vectors do not span a full lattice")
    b, c = piv
    if c < 0:
        b, c = -b, -c
    return a, b % a, c


@dataclass(frozen=True)
class IdealRep:
    """Fractional ideal scale * (Z a + Z (b + c omega)) of a real quadratic field."""

    D: int
    a: int
    b: int
    c: int
    scale: Fraction = Fraction(1)

    @property
    def norm(self) -> Fraction:
        return self.scale * self.scale * self.a * self.c

    def basis(self):
        F = RealQuadraticField(self.D)
        w = F.omega()
        return (Q(self.D, self.a) * self.scale, (Q(self.D, self.b) + w * self.c) * self.scale)

    def integral_part(self):
        return IdealRep(self.D, self.a, self.b, self.c)

    def is_integral(self) -> bool:
        return all(e.is_integral() for e in self.basis())

    def contains(self, e: QuadElt) -> bool:
        F = RealQuadraticField(self.D)
        m, n = F.coords(e * (Fraction(1) / self.scale))
        if n.denominator != 1 or n % self.c:
            return False
        k = n // self.c
        r = m - k * self.b
        return r.denominator == 1 and r % self.a == 0

    def __mul__(self, other: "IdealRep") -> "IdealRep":
        F = RealQuadraticField(self.D)
        gens = []
        for x in self.integral_part().basis():
            for y in other.integral_part().basis():
                m, n = F.coords(x * y)
                gens.append((int(m), int(n)))
        a, b, c = _hnf2(gens)
        return IdealRep(self.D, a, b, c, self.scale * other.scale)

    def to_json(self):
        return {"D": self.D, "hnf": [self.a, self.b, self.c], "scale": str(self.scale)}


def principal_ideal(F: RealQuadraticField, e: QuadElt) -> IdealRep:
    den = 1
    for t in (e.x, e.y):
        den = den * t.denominator // math.gcd(den, t.denominator)
    den *= 2
    ei = e * den
    w = F.omega()
    gens = []
    for g in (Q(F.D, 1), w):
        m, n = F.coords(ei * g)
        gens.append((int(m), int(n)))
    a, b, c = _hnf2(gens)
    return IdealRep(F.D, a, b, c, Fraction(1, den))


def unit_ideal(D):
    return IdealRep(D, 1, 0, 1)


def ideal_of_form(f: BinaryQF) -> IdealRep:
    """Integral ideal [|a|, (-b + sqrt D)/2] attached to a form of field discriminant D."""
    D = f.D
    a = abs(f.a)
    # (-b + sqrt D)/2 = omega - (b + D)/2
    b = (-(f.b + D) // 2) % a
    return IdealRep(D, a, b, 1)


def genus_char_ideal(n: IdealRep, chi: GenusChar) -> int:
    N = n.norm
    if N.denominator != 1:
        # fractional: chi(n) = chi(num)/chi(den), values are +-1
        return chi.on_norm(N.numerator) * chi.on_norm(N.denominator)
    return chi.on_norm(int(N))


# trace slices and divisors ------------------------------------------------------


def trace_slice(F: RealQuadraticField, n: int):
    """Totally positive nu in the inverse different with Tr(nu) = n.

    nu = (x + n sqrt D) / (2 sqrt D) with x = nD mod 2 and x^2 < n^2 D.
    Returned as QuadElt, ordered by x.
    """
    if n < 1:
        raise ValueError("n must be positive")
    D = F.D
    bound = n * n * D
    xs = []
    x0 = -math.isqrt(bound)
    for x in range(x0, -x0 + 1):
        if x * x >= bound or (x - n * D) % 2:
            continue
        xs.append(x)
    # nu = n/2 + x/(2 sqrt D) = n/2 + x sqrt(D)/(2D)
    return [QuadElt(Fraction(n, 2), Fraction(x, 2 * D), D) for x in xs]


def slice_generator(nu: QuadElt) -> QuadElt:
    """Integral generator nu*sqrt(D) of the ideal (nu) d."""
    return nu * QuadElt(Fraction(0), Fraction(1), nu.D)


@lru_cache(maxsize=4096)
def _sqrt_mod_prime_power(D, q, k):
    r = sqrt_mod(D % q**k, q**k)
    if r is None:
        raise ValueError(f"{D} has no square root mod {q}^{k}")
    return r


def _vq(n: Fraction, q: int) -> int:
    num, den = n.numerator, n.denominator
    v = 0
    while num % q == 0:
        num //= q
        v += 1
    while den % q == 0:
        den //= q
        v -= 1
    return v


def prime_factorization(F: RealQuadraticField, beta: QuadElt):
    """Prime ideal exponents of the integral element beta.

    Returns list of (q, kind, exponents) with kind in {'split', 'inert', 'ramified'};
    for split primes exponents = (e1, e2) for the primes sqrt(D) -> +s, -s.
    """
    N = abs(beta.norm())
    if N.denominator != 1:
        raise ValueError("element is not integral")
    N = int(N)
    if N == 0:
        raise ValueError("zero element")
    out = []
    for q, e in sorted(factorint(N).items()):
        k = kronecker(F.D, q)
        if k == 0:
            out.append((q, "ramified", (e,)))
        elif k == -1:
            out.append((q, "inert", (e // 2,)))
        else:
            prec = e + 3
            s = _sqrt_mod_prime_power(F.D, q, prec)
            mod = q**prec
            # embedding sqrt(D) -> s; beta = x + y sqrt D
            def emb(sign):
                x, y = beta.x, beta.y
                num = (x + y * sign * s)
                # num is rational with denominator prime to q when q odd; for q = 2
                # the half-integers are handled by working with 2*beta
                return num
            e1 = _vq_capped(emb(1), q, mod, e)
            out.append((q, "split", (e1, e - e1)))
    return out


def _vq_capped(x: Fraction, q: int, mod: int, cap: int) -> int:
    num = x.numerator
    den = x.denominator
    dv = 0
    while den % q == 0:
        den //= q
        dv += 1
    num %= mod
    if num == 0:
        return cap
    v = 0
    while num % q == 0 and v < cap + dv:
        num //= q
        v += 1
    return min(v - dv, cap)


def ideal_divisors(F: RealQuadraticField, nu: QuadElt, p=None):
    """Divisors of (nu) d as (norm, chi-relevant factor data, IdealRep).

    Returns a list of dicts {"norm": int, "primes": tuple} where primes lists the
    (q, exponent) contributions to the norm; ideals with p | Nm are dropped when
    ``p`` is given.
    """
    beta = slice_generator(nu)
    fac = prime_factorization(F, beta)
    divs = [(1, ())]
    for q, kind, ex in fac:
        new = []
        for nm, tag in divs:
            if kind == "split":
                e1, e2 = ex
                for i in range(e1 + 1):
                    for j in range(e2 + 1):
                        new.append((nm * q ** (i + j), tag + ((q, "split", i, j),)))
            elif kind == "ramified":
                for i in range(ex[0] + 1):
                    new.append((nm * q**i, tag + ((q, "ramified", i),)))
            else:
                for i in range(ex[0] + 1):
                    new.append((nm * q ** (2 * i), tag + ((q, "inert", i),)))
        divs = new
    if p is not None:
        divs = [d for d in divs if d[0] % p]
    return divs


def prime_ideal(F: RealQuadraticField, q: int, sign: int = 1) -> IdealRep:
    """A prime ideal above q (for split q: the one where sqrt D -> sign*s)."""
    k = kronecker(F.D, q)
    if k == -1:
        return IdealRep(F.D, q, 0, q)
    s = sqrt_mod(F.D % (4 * q), 4 * q) if q == 2 else sqrt_mod(F.D % q, q)
    D = F.D
    w = F.omega()
    # generators q and (sqrt D - sign*s)/? ; build from q and omega - t with
    # omega = (D + sqrt D)/2 -> sqrt D = 2 omega - D
    for t in range(q):
        e = w - Q(D, t)
        if (e.norm() % q) == 0 and e.norm().denominator == 1:
            cand = [(q, 0), (-t, 1)]
            a, b, c = _hnf2(cand)
            I = IdealRep(D, a, b, c)
            if k == 0 or _split_sign_ok(I, q, sign, s):
                return I
    raise RuntimeError("prime ideal not found")


def _split_sign_ok(I, q, sign, s):
    # the element b + omega lies in the prime where sqrt D -> sign*s iff its
    # image there has positive valuation
    D = I.D
    x = Fraction(I.b) + Fraction(D, 2)
    y = Fraction(1, 2)
    sq = sqrt_mod(D % q**4, q**4)
    val = x + y * sign * (sq if (sq - s) % q == 0 else -sq)
    return _vq_capped(val, q, q**4, 4) > 0


# RM points -----------------------------------------------------------------------


@dataclass(frozen=True)
class RMPoint:
    form: BinaryQF
    p: int
    sign: int = 1

    def __post_init__(self):
        D = self.form.D
        if D <= 0 or is_square(D):
            raise DiscriminantError("RM points need a positive non-square discriminant")
        if kronecker(D, self.p) != -1:
            raise PadicDomainError(f"p = {self.p} is not inert for D = {D}")

    @property
    def D(self):
        return self.form.D

    @property
    def automorph(self):
        f = self.form
        m = pell_automorph(f)
        if self.sign == 1:
            return m
        # the other root: same matrix fixes both roots
        return m

    def real_value(self) -> QuadElt:
        f = self.form
        return QuadElt(Fraction(-f.b, 2 * f.a), Fraction(self.sign, 2 * f.a), f.D)

    def conjugate_value(self) -> QuadElt:
        return self.real_value().conj()

    def to_json(self):
        return {"form": self.form.as_list(), "p": self.p, "sign": self.sign}


def embed_rm_point(tau: RMPoint, ctx: PrimeContext) -> PadicQuad:
    if ctx.p != tau.p:
        raise ValueError("context prime differs from the RM point's prime")
    f = tau.form
    if kronecker(f.D, ctx.p) != -1:
        raise PadicDomainError("split prime: the point is not in the p-adic upper half plane")
    sq = hensel_sqrt(ctx(f.D))
    return (ctx(-f.b) + sq * tau.sign) / ctx(2 * f.a)


def embed_quad(e: QuadElt, ctx: PrimeContext) -> PadicQuad:
    """Image of x + y sqrt(D) under the fixed embedding sqrt(D) -> hensel_sqrt(D)."""
    sq = hensel_sqrt(ctx(e.D))
    return ctx(e.x) + sq * ctx(e.y)


def c_tau_ideal(tau: RMPoint) -> IdealRep:
    """Z + tau Z if tau - tau' > 0, else sqrt(D) (Z + tau Z)."""
    f = tau.form
    D = f.D
    if not is_fundamental(D):
        raise DiscriminantError("c_tau is implemented for fundamental discriminants")
    a = f.a
    t = tau.real_value()
    # Z + tau Z = (1/a) [a, a*tau]; a*tau = (-b + sign*sqrt D)/2
    at = t * a
    F = RealQuadraticField(D)
    gens = []
    for g in (Q(D, a), at):
        m, n = F.coords(g)
        gens.append((int(m), int(n)))
    A, B, C = _hnf2(gens)
    base = IdealRep(D, A, B, C, Fraction(1, abs(a)))
    diff = (t - t.conj()).sign()
    if diff > 0:
        return base
    sd = principal_ideal(F, F.sqrtD())
    return sd * base


def narrow_class_of_point(tau: RMPoint) -> BinaryQF:
    """Class representative of the form attached to tau (its narrow class)."""
    f = tau.form if tau.sign == 1 else BinaryQF(-tau.form.a, -tau.form.b, -tau.form.c)
    return class_rep(f)


def chi_c_tau(tau: RMPoint, chi: GenusChar) -> int:
    return genus_char_ideal(c_tau_ideal(tau), chi)


def forms_of_discriminant(D: int):
    """Representatives of SL2(Z)-classes of primitive forms of discriminant D."""
    return reduce_and_classgroup(D)


def rm_points(D: int, p: int):
    """One RM point per narrow class of discriminant D, for the inert prime p."""
    return [RMPoint(f, p) for f in reduce_and_classgroup(D)]
