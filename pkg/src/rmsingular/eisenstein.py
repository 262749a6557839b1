"""Diagonal restrictions of p-adic Hilbert Eisenstein families and their derivatives."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from sympy import divisors, factorint

from .padic import PadicDomainError, PadicQuad, PrimeContext, log_prime
from .quadratic import (
    GenusChar,
    RealQuadraticField,
    ideal_divisors,
    kronecker,
    trace_slice,
)

GENUS0_PRIMES = (2, 3, 5, 7, 13)

# Constant term over first coefficient of the weight 2 Eisenstein series at level p.
# (E2(z) - p E2(pz)) / -24 has (p - 1)/24; the default (p - 1)/12 differs by exactly 2,
# and both are reported side by side wherever a constant term is extracted.
def rho_default(p: int) -> Fraction:
    return Fraction(p - 1, 12)


def rho_true(p: int) -> Fraction:
    return Fraction(p - 1, 24)


class NotProportionalError(ValueError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass
class QExpansion:
    """Truncated q-expansion a_0 + a_1 q + ... + a_{n_max} q^{n_max}."""

    coeffs: list
    weight: object = 2
    level: int = 1
    ring: str = "Q"  # "Q" for exact rationals, "Qp" for PadicQuad values

    @property
    def n_max(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n):
        return self.coeffs[n]

    def _check(self, other):
        if self.level != other.level or self.ring != other.ring:
            raise ValueError("incompatible q-expansions")

    def __add__(self, other):
        self._check(other)
        m = min(self.n_max, other.n_max)
        return QExpansion([self[i] + other[i] for i in range(m + 1)], self.weight, self.level, self.ring)

    def __sub__(self, other):
        self._check(other)
        m = min(self.n_max, other.n_max)
        return QExpansion([self[i] - other[i] for i in range(m + 1)], self.weight, self.level, self.ring)

    def scale(self, c):
        return QExpansion([c * a for a in self.coeffs], self.weight, self.level, self.ring)

    def to_json(self):
        if self.ring == "Q":
            data = [str(Fraction(a)) for a in self.coeffs]
        else:
            data = [a.to_json() for a in self.coeffs]
        return {"ring": self.ring, "weight": self.weight, "level": self.level, "coeffs": data}

    @classmethod
    def from_json(cls, data):
        if data["ring"] == "Q":
            coeffs = [Fraction(a) for a in data["coeffs"]]
        else:
            coeffs = [PadicQuad.from_json(a) for a in data["coeffs"]]
        return cls(coeffs, data["weight"], data["level"], data["ring"])


def sigma_prime_to(n: int, p: int) -> int:
    return sum(d for d in divisors(n) if d % p)


def e2_level_p(p: int, n_max: int, rho=None) -> QExpansion:
    """rho + sum sigma^{(p)}(n) q^n; rho defaults to the true value (p-1)/24."""
    rho = rho_true(p) if rho is None else Fraction(rho)
    return QExpansion([rho] + [Fraction(sigma_prime_to(n, p)) for n in range(1, n_max + 1)], 2, p, "Q")


def hecke_tl(f: QExpansion, ell: int) -> QExpansion:
    """T_ell on a weight-k q-expansion of level N with ell prime, ell not dividing N."""
    if f.level % ell == 0:
        raise ValueError("ell divides the level")
    k = f.weight
    m = f.n_max // ell
    out = []
    for n in range(m + 1):
        a = f[ell * n]
        if n % ell == 0:
            a = a + Fraction(ell) ** (k - 1) * f[n // ell]
        out.append(a)
    return QExpansion(out, f.weight, f.level, f.ring)


# the family ----------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilyInstance:
    D: int
    D1: int
    D2: int
    p: int
    N: int = 8

    def __post_init__(self):
        if self.D1 * self.D2 != self.D:
            raise ValueError("D must equal D1 * D2")
        RealQuadraticField(self.D)
        GenusChar(self.D1, self.D2)
        if kronecker(self.D, self.p) != -1:
            raise PadicDomainError(f"p = {self.p} is not inert in Q(sqrt {self.D})")
        if not (self.D1 < 0 and self.D2 < 0):
            raise ValueError("the genus character must be totally odd")

    @property
    def F(self):
        return RealQuadraticField(self.D)

    @property
    def chi(self):
        return GenusChar(self.D1, self.D2)

    @property
    def ctx(self):
        return PrimeContext(self.p, self.N)

    def to_json(self):
        return {"D": self.D, "D1": self.D1, "D2": self.D2, "p": self.p, "prec": self.N}


def split_instance_ok(D, D1, D2, p):
    return kronecker(D, p) == 1


@lru_cache(maxsize=200000)
def _slice_data(D: int, D1: int, D2: int, p: int, n: int):
    """List over nu and divisors n | (nu)d with p not dividing Nm n: (chi(n), Nm n)."""
    F = RealQuadraticField(D)
    chi = GenusChar(D1, D2)
    out = []
    for nu in trace_slice(F, n):
        for norm, _ in ideal_divisors(F, nu, p):
            out.append((chi.on_norm(norm), norm))
    return tuple(out)


def eis_diag_coeff(inst, k: int, n: int, p_filter=True) -> int:
    """a_n of the diagonal restriction of the weight k specialisation (exact)."""
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be an odd positive integer")
    if n < 1:
        raise ValueError("n must be positive")
    D, D1, D2, p = inst.D, inst.D1, inst.D2, inst.p
    data = _slice_data(D, D1, D2, p, n) if p_filter else _slice_data_nofilter(D, D1, D2, n)
    return 4 * sum(c * norm ** (k - 1) for c, norm in data)


@lru_cache(maxsize=4096)
def _slice_data_nofilter(D, D1, D2, n):
    F = RealQuadraticField(D)
    chi = GenusChar(D1, D2)
    return tuple(
        (chi.on_norm(norm), norm) for nu in trace_slice(F, n) for norm, _ in ideal_divisors(F, nu)
    )


def eis_diag_coeff_with(D, n, weight_fn, p=None) -> int:
    """4 * sum over the same index set of weight_fn(norm) (used by oracle tests)."""
    F = RealQuadraticField(D)
    total = 0
    for nu in trace_slice(F, n):
        for norm, _ in ideal_divisors(F, nu, p):
            total += weight_fn(norm)
    return 4 * total


def derivative_log_vector(inst, n: int) -> dict:
    """a'_n as an exact combination {q: c_q} meaning sum c_q log_p(q)."""
    vec = defaultdict(int)
    for c, norm in _slice_data(inst.D, inst.D1, inst.D2, inst.p, n):
        if norm == 1:
            continue
        for q, e in factorint(norm).items():
            vec[q] += 4 * c * e
    return {q: c for q, c in sorted(vec.items()) if c}


def log_vector_value(vec: dict, ctx: PrimeContext) -> PadicQuad:
    out = ctx.zero()
    for q, c in vec.items():
        if q == ctx.p:
            continue  # log_p(p) = 0 on the Iwasawa branch
        out = out + log_prime(ctx.p, ctx.N, q) * ctx(c)
    return out


def derivative_coeff(inst, n: int) -> PadicQuad:
    """a'_n = 4 sum chi(n) log_p Nm(n), the weight derivative at k = 1."""
    return log_vector_value(derivative_log_vector(inst, n), inst.ctx)


def derivative_expansion(inst, n_max: int) -> QExpansion:
    ctx = inst.ctx
    coeffs = [ctx.zero()] + [derivative_coeff(inst, n) for n in range(1, n_max + 1)]
    return QExpansion(coeffs, 2, inst.p, "Qp")


def finite_difference_coeff(inst, n: int, m: int) -> PadicQuad:
    """(a_n(1 + (p-1)p^m) - a_n(1)) / ((p-1)p^m) in Q_p."""
    p = inst.p
    h = (p - 1) * p**m
    k = 1 + h
    top = eis_diag_coeff(inst, k, n) - eis_diag_coeff(inst, 1, n)
    ctx = inst.ctx.with_precision(inst.N + m + 2)
    return (ctx(top) / ctx(h)).lift_precision(inst.N)


# U_p and the ordinary projection ---------------------------------------------------------


def up_operator(f: QExpansion, p: int) -> QExpansion:
    if f.n_max < p:
        raise ValueError(f"U_{p} needs at least {p} coefficients")
    m = f.n_max // p
    return QExpansion([f[p * n] for n in range(m + 1)], f.weight, f.level, f.ring)


def ordinary_projection_from_coeffs(coeff_fn, p: int, M: int, m: int, zero) -> QExpansion:
    """e_ord f approximated by U_p^m f, reading only the coefficients a_{p^m n}."""
    pm = p**m
    return QExpansion([zero] + [coeff_fn(pm * n) for n in range(1, M + 1)], 2, p, "Qp")


def ordinary_projection(f, p: int, target_terms: int, target_prec: int, slope_gap: float = 1.0,
                        inst=None) -> QExpansion:
    """e_ord f to ``target_terms`` coefficients modulo p^target_prec.

    ``f`` is a QExpansion (must reach index target_terms * p^m) or, when
    ``inst`` is given, ignored in favour of computing the needed coefficients
    of the derivative family directly.
    """
    m = max(1, int(-(-target_prec // slope_gap)))
    need = target_terms * p**m
    if inst is not None:
        ctx = inst.ctx
        out = ordinary_projection_from_coeffs(lambda n: derivative_coeff(inst, n), p, target_terms, m,
                                              ctx.zero())
    else:
        if f.n_max < need:
            raise ValueError(f"ordinary projection needs n_max >= {need} (have {f.n_max})")
        g = f
        for _ in range(m):
            g = up_operator(g, p)
        out = QExpansion(g.coeffs[: target_terms + 1], g.weight, g.level, g.ring)
    coeffs = [c.lift_precision(min(c.prec, target_prec)) if isinstance(c, PadicQuad) else c
              for c in out.coeffs]
    return QExpansion(coeffs, out.weight, out.level, out.ring)


def proportionality_residual(f: QExpansion, p: int, prec: int) -> int:
    """Least p-adic valuation of a_n - a_1 sigma^{(p)}(n) over n >= 1 (capped at prec)."""
    a1 = f[1]
    worst = prec
    for n in range(2, f.n_max + 1):
        d = f[n] - a1 * sigma_prime_to(n, p)
        v = d.prec if d.is_zero else d.val
        worst = min(worst, v)
    return worst


def extract_constant_term(f_ord: QExpansion, p: int, prec: int, rho=None):
    """a_0 = rho_p * a_1 for f_ord proportional to E_2^{(p)}; returns (a_0, a_1)."""
    if p not in GENUS0_PRIMES:
        raise ValueError(f"p = {p} is not a genus-zero prime")
    rho = rho_default(p) if rho is None else Fraction(rho)
    res = proportionality_residual(f_ord, p, prec)
    if res < prec:
        raise NotProportionalError(
            f"not proportional to E_2^({p}) beyond p^{res}", residual=res
        )
    a1 = f_ord[1]
    ctx = a1.ctx
    return a1 * ctx(rho), a1
