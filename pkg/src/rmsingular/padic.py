"""Fixed-precision arithmetic in Q_p and its unramified quadratic extension.

Elements are stored as ``p^val * (a + b*w)`` where ``(a, b)`` is a pair of
residues modulo ``p^(prec - val)`` and ``prec`` is the absolute precision.
For odd ``p`` the generator satisfies ``w^2 = r`` with ``r`` the least
quadratic non-residue; for ``p = 2`` it satisfies ``w^2 + w + 1 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache


class PrecisionError(ArithmeticError):
    """Raised when a result cannot be certified at the requested precision."""

    def __init__(self, message, deficit=None):
        super().__init__(message)
        self.deficit = deficit


class PadicDomainError(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def valuation(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of zero")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@lru_cache(maxsize=None)
def _seed(p):
    return 0 if p == 2 else least_nonresidue(p)


def least_nonresidue(p: int) -> int:
    for r in range(2, p):
        if pow(r, (p - 1) // 2, p) == p - 1:
            return r
    raise ValueError(f"no non-residue mod {p}")


@dataclass(frozen=True)
class PrimeContext:
    p: int
    N: int

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        if self.N < 1:
            raise ValueError("precision must be at least 1")

    @property
    def r(self) -> int:
        """Inertial seed: w^2 = r for odd p; 0 marks the x^2+x+1 model at p=2."""
        return _seed(self.p)

    @property
    def q(self) -> int:
        return self.p * self.p

    def with_precision(self, N: int) -> "PrimeContext":
        return PrimeContext(self.p, N)

    # constructors -----------------------------------------------------------

    def zero(self, prec=None) -> "PadicQuad":
        return PadicQuad(self, 0, 0, 0, self.N if prec is None else prec, True)

    def one(self) -> "PadicQuad":
        return self(1)

    def __call__(self, x, y=0, prec=None) -> "PadicQuad":
        """Build ``x + y*w`` from integers or fractions."""
        return PadicQuad.from_rational(self, x, y, prec)

    def omega(self) -> "PadicQuad":
        return self(0, 1)


def _mul_pair(a, b, c, d, p, r):
    if p == 2:
        bd = b * d
        return a * c - bd, a * d + b * c - bd
    return a * c + r * b * d, a * d + b * c


def _norm_pair(a, b, p, r):
    if p == 2:
        return a * a - a * b + b * b
    return a * a - r * b * b


def _conj_pair(a, b, p):
    if p == 2:
        return a - b, -b
    return a, -b


def _rational_parts(x):
    x = Fraction(x)
    return x.numerator, x.denominator


class PadicQuad:
    """Element of Q_{p^2} with tracked absolute precision (immutable)."""

    __slots__ = ("ctx", "val", "a", "b", "prec", "is_zero")

    def __init__(self, ctx, val, a, b, prec, is_zero=False):
        prec = min(prec, ctx.N)
        p = ctx.p
        if not is_zero:
            rel = prec - val
            if rel <= 0:
                is_zero = True
            else:
                m = p**rel
                a %= m
                b %= m
                while a % p == 0 and b % p == 0:
                    if rel <= 1:
                        is_zero = True
                        break
                    a //= p
                    b //= p
                    val += 1
                    rel -= 1
                if not is_zero:
                    m = p**rel
                    a %= m
                    b %= m
        if is_zero:
            val, a, b = prec, 0, 0
        object.__setattr__(self, "ctx", ctx)
        object.__setattr__(self, "val", val)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "prec", prec)
        object.__setattr__(self, "is_zero", is_zero)

    def __setattr__(self, key, value):
        raise AttributeError("PadicQuad is immutable")

    @classmethod
    def from_rational(cls, ctx, x, y=0, prec=None):
        p = ctx.p
        prec = ctx.N if prec is None else prec
        xn, xd = _rational_parts(x)
        yn, yd = _rational_parts(y)
        den = xd * yd // _gcd(xd, yd)
        xn *= den // xd
        yn *= den // yd
        if xn == 0 and yn == 0:
            return ctx.zero(prec)
        dv = valuation(den, p)
        du = den // p**dv
        # numerator valuation (common to both coordinates)
        nv = min(valuation(t, p) for t in (xn, yn) if t != 0)
        val = nv - dv
        rel = prec - val
        if rel <= 0:
            return ctx.zero(prec)
        m = p**rel
        inv = pow(du, -1, m)
        a = (xn // p**nv) * inv
        b = (yn // p**nv) * inv
        return cls(ctx, val, a, b, prec)

    # basic accessors ----------------------------------------------------------

    @property
    def p(self):
        return self.ctx.p

    @property
    def rel_prec(self):
        return 0 if self.is_zero else self.prec - self.val

    def unit_pair(self):
        return self.a, self.b

    def lift(self):
        """Integer pair (x, y) with self = (x + y w) * p^min(val,0) mod p^prec."""
        if self.is_zero:
            return 0, 0, 0
        return self.a, self.b, self.val

    def is_rational(self) -> bool:
        return self.is_zero or self.b == 0

    def to_fraction_pair(self):
        """Exact rationals (x, y) representing the stored digits."""
        if self.is_zero:
            return Fraction(0), Fraction(0)
        s = Fraction(self.p) ** self.val
        return self.a * s, self.b * s

    def residue(self):
        """Residue of a unit in F_{p^2} as a pair mod p."""
        if self.val != 0 or self.is_zero:
            raise PadicDomainError("residue requested for a non-unit")
        return self.a % self.p, self.b % self.p

    def __repr__(self):
        if self.is_zero:
            return f"O({self.p}^{self.prec})"
        return f"PadicQuad(p={self.p}, val={self.val}, unit=({self.a}, {self.b}), prec={self.prec})"

    # comparisons ----------------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, PadicQuad):
            if other.ctx.p != self.ctx.p:
                raise ValueError("mismatched primes")
            return other
        if isinstance(other, (int, Fraction)):
            return PadicQuad.from_rational(self.ctx, other)
        return NotImplemented

    def equals(self, other, prec=None) -> bool:
        """Congruence up to the joint precision (or ``prec`` if smaller)."""
        other = self._coerce(other)
        d = self - other
        if prec is None:
            return d.is_zero
        return d.is_zero or d.val >= prec

    def __eq__(self, other):
        if not isinstance(other, (PadicQuad, int, Fraction)):
            return NotImplemented
        return self.equals(other)

    def __hash__(self):
        return hash((self.p, self.val, self.a, self.b, self.prec, self.is_zero))

    # arithmetic -------------------------------------------------------------

    def __neg__(self):
        if self.is_zero:
            return self
        return PadicQuad(self.ctx, self.val, -self.a, -self.b, self.prec)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        prec = min(self.prec, other.prec)
        if self.is_zero:
            return PadicQuad(self.ctx, other.val, other.a, other.b, prec, other.is_zero)
        if other.is_zero:
            return PadicQuad(self.ctx, self.val, self.a, self.b, prec)
        p = self.p
        v = min(self.val, other.val)
        s1 = p ** (self.val - v)
        s2 = p ** (other.val - v)
        return PadicQuad(
            self.ctx, v, self.a * s1 + other.a * s2, self.b * s1 + other.b * s2, prec
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_zero or other.is_zero:
            vx = self.val if not self.is_zero else self.prec
            vy = other.val if not other.is_zero else other.prec
            if self.is_zero and other.is_zero:
                return self.ctx.zero(self.prec + other.prec)
            if self.is_zero:
                return self.ctx.zero(self.prec + vy)
            return self.ctx.zero(other.prec + vx)
        rel = min(self.rel_prec, other.rel_prec)
        a, b = _mul_pair(self.a, self.b, other.a, other.b, self.p, self.ctx.r)
        v = self.val + other.val
        return PadicQuad(self.ctx, v, a, b, v + rel)

    __rmul__ = __mul__

    def inverse(self):
        if self.is_zero:
            raise PrecisionError("division by an element indistinguishable from zero",
                                 deficit=1)
        p, r = self.p, self.ctx.r
        rel = self.rel_prec
        m = p**rel
        nrm = _norm_pair(self.a, self.b, p, r) % m
        ni = pow(nrm, -1, m)
        ca, cb = _conj_pair(self.a, self.b, p)
        return PadicQuad(self.ctx, -self.val, ca * ni, cb * ni, -self.val + rel)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        if n == 0:
            return self.ctx(1, 0, self.prec if self.is_zero else self.ctx.N)
        if self.is_zero:
            return self.ctx.zero(self.prec * n)
        p, r = self.p, self.ctx.r
        rel = self.rel_prec
        m = p**rel
        ra, rb = 1, 0
        ba, bb = self.a, self.b
        k = n
        while k:
            if k & 1:
                ra, rb = _mul_pair(ra, rb, ba, bb, p, r)
                ra %= m
                rb %= m
            k >>= 1
            if k:
                ba, bb = _mul_pair(ba, bb, ba, bb, p, r)
                ba %= m
                bb %= m
        v = self.val * n
        return PadicQuad(self.ctx, v, ra, rb, v + rel)

    def lift_precision(self, prec):
        """Declare more digits (used when the digits are known to be exact)."""
        return PadicQuad(self.ctx, self.val, self.a, self.b, prec, self.is_zero)

    def truncate(self, prec):
        return PadicQuad(self.ctx, self.val, self.a, self.b, min(prec, self.prec), self.is_zero)

    # field structure ----------------------------------------------------------

    def frobenius(self):
        if self.is_zero:
            return self
        a, b = _conj_pair(self.a, self.b, self.p)
        return PadicQuad(self.ctx, self.val, a, b, self.prec)

    def norm(self):
        return self * self.frobenius()

    def trace(self):
        return self + self.frobenius()

    def unit_part(self):
        """self / p^val (a unit)."""
        if self.is_zero:
            raise PrecisionError("unit part of zero", deficit=1)
        return PadicQuad(self.ctx, 0, self.a, self.b, self.rel_prec)

    def to_json(self) -> dict:
        p = self.p
        n = self.rel_prec
        return {
            "p": p,
            "prec": self.prec,
            "val": self.val,
            "unit": _digits(self.a, p, n),
            "ext": _digits(self.b, p, n),
        }

    @classmethod
    def from_json(cls, data: dict, N=None) -> "PadicQuad":
        p = data["p"]
        prec = data["prec"]
        ctx = PrimeContext(p, max(N or prec, prec, 1))
        a = sum(d * p**i for i, d in enumerate(data["unit"]))
        b = sum(d * p**i for i, d in enumerate(data["ext"]))
        if not data["unit"] and not data["ext"]:
            return ctx.zero(prec)
        return cls(ctx, data["val"], a, b, prec)


def _digits(x, p, n):
    out = []
    for _ in range(n):
        out.append(x % p)
        x //= p
    return out


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return abs(a)


def arith(x: PadicQuad, y: PadicQuad, op: str) -> PadicQuad:
    if x.ctx.p != y.ctx.p:
        raise ValueError("operands live over different primes")
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "div":
        return x / y
    raise ValueError(f"unknown op {op!r}")


# Teichmuller lifts -------------------------------------------------------------


def teichmuller(ctx: PrimeContext, a, b=0) -> PadicQuad:
    """The (q-1)-th root of unity congruent to ``a + b*w`` mod p."""
    p = ctx.p
    if a % p == 0 and b % p == 0:
        raise PadicDomainError("Teichmuller lift of zero residue")
    q = p if b % p == 0 else p * p
    x = ctx(a % p, b % p)
    for _ in range(ctx.N + 1):
        y = x**q
        if (y - x).is_zero:
            break
        x = y
    return x.lift_precision(ctx.N)


def teichmuller_of_unit(u: PadicQuad) -> PadicQuad:
    a, b = u.residue()
    return teichmuller(u.ctx, a, b)


def principal_part(x: PadicQuad) -> PadicQuad:
    """Project x to 1 + pO by removing p^val and the Teichmuller factor."""
    u = x.unit_part()
    return u / teichmuller_of_unit(u).truncate(u.prec)


# logarithm --------------------------------------------------------------------


def _log_one_plus(y: PadicQuad) -> PadicQuad:
    """Series log(1+y) for v(y) >= 1 (>= 2 when p = 2)."""
    ctx = y.ctx
    prec = y.prec
    if y.is_zero:
        return ctx.zero(prec)
    p, r = ctx.p, ctx.r
    vy = y.val
    # number of terms: n*vy - v_p(n) >= prec
    nmax = 1
    while True:
        if (nmax + 1) * vy - _vp_floor_log(nmax + 1, p) >= prec and nmax * vy - _vp_floor_log(nmax, p) >= prec:
            break
        nmax += 1
    extra = _vp_floor_log(nmax, p) + 2
    M = prec + extra
    mod = p**M
    # y = p^vy * (ya + yb w)
    ya, yb = y.a, y.b
    sa, sb = 0, 0  # accumulated sum, scaled by p^0 (integers mod p^M)
    ta, tb = 1, 0  # (ya + yb w)^n
    for n in range(1, nmax + 1):
        ta, tb = _mul_pair(ta, tb, ya, yb, p, r)
        ta %= mod
        tb %= mod
        k = valuation(n, p)
        e = n * vy - k
        if e >= M:
            continue
        inv = pow(n // p**k, -1, mod)
        # term = p^(n*vy) * t / n = p^e * t * inv
        fa = ta * inv * p**e
        fb = tb * inv * p**e
        if n % 2 == 0:
            fa, fb = -fa, -fb
        sa = (sa + fa) % mod
        sb = (sb + fb) % mod
    return PadicQuad(ctx, 0, sa, sb, prec)


def _vp_floor_log(n, p):
    k = 0
    m = p
    while m <= n:
        k += 1
        m *= p
    return k


def padic_log(u: PadicQuad) -> PadicQuad:
    """Iwasawa logarithm of a unit (the Teichmuller part is killed)."""
    if u.is_zero or u.val != 0:
        raise PadicDomainError("padic_log expects a unit")
    ctx = u.ctx
    p = ctx.p
    e = ctx.q - 1
    if p == 2:
        e *= 2
    w = u**e
    lg = _log_one_plus(w - 1)
    return lg / ctx(e)


def log_iwasawa(x: PadicQuad) -> PadicQuad:
    """Iwasawa branch on all of Q_{p^2}^x: log(p) = 0."""
    return padic_log(x.unit_part())


def log_rational(ctx: PrimeContext, x) -> PadicQuad:
    """Iwasawa log of a nonzero rational number."""
    x = Fraction(x)
    if x == 0:
        raise PadicDomainError("log of zero")
    return log_iwasawa(ctx(x))


@lru_cache(maxsize=4096)
def log_prime(p: int, N: int, q: int) -> PadicQuad:
    return log_rational(PrimeContext(p, N), q)


def norm_trace_frob(x: PadicQuad):
    f = x.frobenius()
    return x * f, x + f, f


# square roots -------------------------------------------------------------------


def _sqrt_residue(ctx, a, b):
    """All square roots of a + b w in F_{p^2}, as pairs."""
    p = ctx.p
    out = []
    for x in range(p):
        for y in range(p):
            sa, sb = _mul_pair(x, y, x, y, p, ctx.r)
            if sa % p == a % p and sb % p == b % p:
                out.append((x, y))
    return out


def _canonical_key(pair, p):
    x, y = pair
    half = (p - 1) // 2
    if p == 2:
        return pair
    # prefer first coordinate in 1..(p-1)/2, else (x == 0) second coordinate there
    if x % p != 0:
        return (0 if 1 <= x % p <= half else 1, x, y)
    return (0 if 1 <= y % p <= half else 1, x, y)


def hensel_sqrt(d: PadicQuad) -> PadicQuad:
    """Square root in Q_{p^2} with a fixed deterministic sign.

    For odd p the root is the one whose first nonzero residue coordinate lies
    in 1..(p-1)/2.  For p = 2 the lexicographically smallest residue pair
    mod 4 is taken.
    """
    ctx = d.ctx
    p = ctx.p
    if d.is_zero:
        raise PrecisionError("square root of an element indistinguishable from zero", 1)
    if d.val % 2:
        raise PadicDomainError("odd valuation: no square root in the unramified extension")
    u = d.unit_part()
    if p != 2:
        roots = _sqrt_residue(ctx, u.a, u.b)
        if not roots:
            raise PadicDomainError("unit is not a square mod p")
        x0 = min(roots, key=lambda t: _canonical_key(t, p))
        x = ctx(*x0).lift_precision(u.prec)
        two = ctx(2)
        for _ in range(u.prec.bit_length() + 2):
            x = (x + u / x) / two
        root = x
    else:
        root = _sqrt_2adic(u)
    s = ctx(1).lift_precision(ctx.N)
    scale = ctx(Fraction(p) ** (d.val // 2))
    out = root * scale
    return out.truncate(d.prec - d.val // 2)


def _sqrt_2adic(u: PadicQuad) -> PadicQuad:
    ctx = u.ctx
    prec = u.rel_prec
    M = prec + 4
    mod = 2**M
    cands = []
    for x in range(8):
        for y in range(8):
            sa, sb = _mul_pair(x, y, x, y, 2, 0)
            if (sa - u.a) % 8 == 0 and (sb - u.b) % 8 == 0:
                cands.append((x, y))
    if not cands:
        raise PadicDomainError("not a square in the unramified extension of Q_2")
    cands.sort(key=lambda t: (t[0] % 4, t[1] % 4))
    xa, xb = cands[0]
    # Newton on integer pairs: x <- (x + u/x)/2, exact modulo 2^(M+k)
    work = 2 ** (M + 8)
    for _ in range(M + 2):
        n = _norm_pair(xa, xb, 2, 0) % work
        ni = pow(n, -1, work)
        ca, cb = _conj_pair(xa, xb, 2)
        qa, qb = _mul_pair(u.a, u.b, ca, cb, 2, 0)
        sa, sb = (xa + qa * ni) % work, (xb + qb * ni) % work
        # sa, sb are even once x is a root mod 8
        xa, xb = sa // 2, sb // 2
    # the halving step loses one digit
    return PadicQuad(ctx, 0, xa % mod, xb % mod, prec - 1)
