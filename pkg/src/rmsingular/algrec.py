"""Recognising p-adic numbers as algebraic numbers, and checking the answers."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from sympy import Matrix, Poly, QQ, ZZ, symbols
from sympy.matrices.normalforms import hermite_normal_form
from sympy.polys.matrices import DomainMatrix

from .padic import PadicQuad, PrecisionError, PrimeContext, teichmuller
from .quadratic import (
    BinaryQF,
    class_rep,
    compose,
    kronecker,
    principal_form,
    reduce_definite,
)

X = symbols("x")


@dataclass(frozen=True)
class IntegerLattice:
    """Lattice spanned by the rows of ``basis``."""

    basis: tuple

    def __post_init__(self):
        rows = [tuple(int(x) for x in r) for r in self.basis]
        object.__setattr__(self, "basis", tuple(rows))
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValueError("ragged or empty basis")
        if DomainMatrix([[ZZ(x) for x in r] for r in rows], (len(rows), len(rows[0])), ZZ).rank() != len(rows):
            raise ValueError("basis vectors are linearly dependent")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def gram_det(self) -> int:
        M = DomainMatrix([[ZZ(x) for x in r] for r in self.basis], (self.dim, len(self.basis[0])), ZZ)
        return int((M * M.transpose()).det())


def lattice_reduce(L: IntegerLattice, delta=Fraction(99, 100)) -> IntegerLattice:
    """LLL-reduced basis of the same lattice."""
    delta = Fraction(delta)
    if not Fraction(1, 4) < delta < 1:
        raise ValueError("delta must lie in (1/4, 1)")
    M = DomainMatrix([[ZZ(x) for x in r] for r in L.basis], (L.dim, len(L.basis[0])), ZZ)
    R = M.lll(delta=QQ(delta.numerator, delta.denominator))
    return IntegerLattice(tuple(tuple(int(x) for x in row) for row in R.to_list()))


# recognition --------------------------------------------------------------------------


def _coords_mod(x: PadicQuad, shift: int, M: int):
    """Integer coordinates of p^shift * x modulo p^M (x * p^shift must be integral)."""
    p = x.ctx.p
    mod = p**M
    a, b = x.to_fraction_pair()
    out = []
    for c in (a, b):
        c = c * Fraction(p) ** shift
        if c.denominator % p == 0:
            raise ValueError("element not integral after shift")
        out.append(c.numerator * pow(c.denominator, -1, mod) % mod)
    return out


def poly_eval(coeffs, alpha: PadicQuad) -> PadicQuad:
    """Horner evaluation; coefficients are listed from the leading one down."""
    ctx = alpha.ctx
    acc = ctx.zero()
    for c in coeffs:
        acc = acc * alpha + ctx(c)
    return acc


def _primitive(coeffs):
    g = 0
    for c in coeffs:
        g = math.gcd(g, c)
    coeffs = [c // g for c in coeffs]
    while coeffs and coeffs[0] == 0:
        coeffs = coeffs[1:]
    if coeffs and coeffs[0] < 0:
        coeffs = [-c for c in coeffs]
    return coeffs


def _relation_lattice(alpha: PadicQuad, d: int, slack: int, weight_extra: int = 2):
    """Rows spanning integer relations among 1, alpha, ..., alpha^d modulo p^M.

    Returns (rows, M) where M is the number of known digits of the scaled powers
    minus the slack.
    """
    ctx = alpha.ctx
    p = ctx.p
    powers = [ctx.one()]
    for _ in range(d):
        powers.append(powers[-1] * alpha)
    shift = max(0, -min(0 if q.is_zero else q.val for q in powers))
    M = min(q.prec for q in powers) + shift - slack
    if M < 1:
        raise PrecisionError(f"precision leaves nothing after slack {slack}", deficit=1 - M)
    weight = p ** (M + weight_extra)
    rows = []
    mod = p**M
    for i, q in enumerate(powers):
        a, b = _coords_mod(q, shift, M)
        rows.append([1 if j == i else 0 for j in range(d + 1)] + [weight * a, weight * b])
    rows.append([0] * (d + 1) + [weight * mod, 0])
    rows.append([0] * (d + 1) + [0, weight * mod])
    return rows, M


def recognize_algebraic(alpha: PadicQuad, maxdeg: int, maxheight: int, slack: int = 5):
    """Integer polynomial (leading coefficient first) of degree <= maxdeg and height
    <= maxheight vanishing at alpha, or None.

    Relations are searched with ``slack`` digits held back and must then hold to
    the full precision of alpha; the root must be simple there.  Raises
    PrecisionError when nothing is found and some degree was under-determined.
    """
    p = alpha.ctx.p
    rational = alpha.is_zero or alpha.b == 0
    deficit = 0
    for d in range(1, maxdeg + 1):
        rows, M = _relation_lattice(alpha, d, slack)
        digits = M if rational else 2 * M
        need = (d + 1) * math.log(maxheight + 1, p)
        R = lattice_reduce(IntegerLattice(tuple(tuple(r) for r in _independent_basis(rows))))
        kernel = [row[: d + 1] for row in R.basis if not any(row[d + 1:])]
        found = []
        # the relation need not be a basis vector: also try small combinations
        for mult in itertools.product((-1, 0, 1), repeat=len(kernel)):
            if not any(mult):
                continue
            vec = [sum(m * k[i] for m, k in zip(mult, kernel)) for i in range(d + 1)]
            coeffs = _primitive(list(reversed(vec)))
            if len(coeffs) < 2 or max(abs(c) for c in coeffs) > maxheight:
                continue
            if _confirm(coeffs, alpha):
                found.append((max(abs(c) for c in coeffs), coeffs))
        if found:
            return min(found)[1]
        if need > digits:
            deficit = max(deficit, math.ceil(need - digits))
    if deficit:
        raise PrecisionError(f"degree <= {maxdeg}, height {maxheight} under-determined", deficit=deficit)
    return None


def _independent_basis(rows):
    """A basis of the lattice generated by possibly dependent rows (via Hermite normal form)."""
    H = hermite_normal_form(Matrix(rows).T).T
    return [[int(x) for x in H.row(i)] for i in range(H.rows) if any(H.row(i))]


def _confirm(coeffs, alpha: PadicQuad) -> bool:
    val = poly_eval(coeffs, alpha)
    if not val.is_zero:
        return False
    deriv = [c * (len(coeffs) - 1 - i) for i, c in enumerate(coeffs[:-1])]
    dv = poly_eval(deriv, alpha) if deriv else None
    # a simple root whose derivative is known to some digits is Hensel-isolated
    return dv is not None and not dv.is_zero and dv.val < alpha.prec // 2 + 1


def roots_of_unity(ctx: PrimeContext):
    """The (p^2 - 1)-st roots of unity in Q_{p^2}, via Teichmuller lifts of residues."""
    p = ctx.p
    out = []
    for a in range(p):
        for b in range(p):
            if (a, b) != (0, 0):
                out.append(teichmuller(ctx, a, b))
    return out


def recognize_up_to_ambiguity(alpha: PadicQuad, maxdeg: int, maxheight: int, slack: int = 5,
                              shifts=range(-2, 3)):
    """Search alpha * zeta * p^m over roots of unity zeta and small m.

    Returns the lowest-height hit as a dict, or None.
    """
    ctx = alpha.ctx
    best = None
    short = None
    for k, z in enumerate(roots_of_unity(ctx)):
        for m in shifts:
            cand = alpha * z * ctx(Fraction(ctx.p) ** m)
            try:
                f = recognize_algebraic(cand, maxdeg, maxheight, slack)
            except PrecisionError as exc:
                short, f = exc, None
            if f is None:
                continue
            key = (len(f), max(abs(c) for c in f))
            if best is None or key < best[0]:
                best = (key, {"poly": f, "zeta_index": k, "p_shift": m, "root": cand})
    if best is None and short is not None:
        raise short
    return None if best is None else best[1]


# certification ------------------------------------------------------------------------


def p_unit_certify(coeffs, p: int):
    """All roots are p-units iff the leading and constant coefficients are +- powers of p."""
    f = Poly(coeffs, X, domain=ZZ)
    if f.degree() < 1 or not f.is_irreducible:
        raise ValueError("polynomial must be irreducible of positive degree")
    lead, const = int(coeffs[0]), int(coeffs[-1])

    def ppow(n):
        n = abs(n)
        if n == 0:
            return None
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        return e if n == 1 else None

    vl, vc = ppow(lead), ppow(const)
    ok = vl is not None and vc is not None
    return ok, {"p": p, "v_p_leading": vl, "v_p_constant": vc, "degree": f.degree()}


def factor_degrees_mod(coeffs, q: int):
    """Sorted degrees of the irreducible factors of f modulo q (with multiplicity)."""
    f = Poly(coeffs, X, modulus=q)
    out = []
    for g, e in f.factor_list()[1]:
        out += [g.degree()] * e
    return sorted(out)


def class_order(f: BinaryQF) -> int:
    """Order of the class of f in the (narrow) form class group."""
    D = f.D
    one = class_rep(principal_form(D)) if D > 0 else principal_form(D)
    rep = class_rep if D > 0 else reduce_definite
    g = rep(f)
    k = 1
    while g != one:
        g = rep(compose(g, f))
        k += 1
        if k > 10000:
            raise RuntimeError("class order search did not terminate")
    return k


def prime_form(D: int, q: int) -> BinaryQF:
    """A form (q, b, c) of discriminant D: the ideal class of a prime above q."""
    for b in range(D % 2, 2 * q, 2):
        if (b * b - D) % (4 * q) == 0:
            return BinaryQF(q, b, (b * b - D) // (4 * q))
    raise ValueError(f"{q} is not split in discriminant {D}")


def splitting_check(coeffs, D: int, sample_primes, exclude=()):
    """Compare factorisation types of f mod q with the class-field prediction.

    For q split in Q(sqrt D), a prime above q has Frobenius of order equal to
    the order of its narrow class; when the roots of f generate the narrow
    class field over Q(sqrt D), f mod q then factors into pieces of exactly
    that degree.
    """
    disc = int(Poly(coeffs, X).discriminant())
    report = []
    for q in sample_primes:
        if kronecker(D, q) != 1 or disc % q == 0 or any(q % e == 0 for e in exclude) or coeffs[0] % q == 0:
            report.append({"q": q, "skipped": True})
            continue
        order = class_order(prime_form(D, q))
        got = factor_degrees_mod(coeffs, q)
        predicted = [order] * (sum(got) // order) if sum(got) % order == 0 else None
        report.append({"q": q, "class_order": order, "degrees": got, "predicted": predicted,
                       "match": got == predicted})
    checked = [r for r in report if not r.get("skipped")]
    return {
        "checked": len(checked),
        "matches": sum(r["match"] for r in checked),
        "primes": report,
    }


def split_primes(D: int, count: int, exclude=(), start: int = 3):
    """The first ``count`` primes split in Q(sqrt D) not dividing anything in exclude."""
    from sympy import nextprime

    out = []
    q = start
    while len(out) < count:
        q = nextprime(q)
        if kronecker(D, q) == 1 and all(e % q for e in exclude):
            out.append(q)
    return out
