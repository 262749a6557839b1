"""Bruhat-Tits tree of PGL2(Q_p): vertices, edges as balls, reduction map."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .padic import PadicQuad, PadicDomainError, valuation


def _vp(x: Fraction, p: int) -> float:
    if x == 0:
        return float("inf")
    return valuation(x.numerator, p) - valuation(x.denominator, p)


def _mod_pn(u: Fraction, p: int, n: int) -> Fraction:
    """Representative of u in Z_(p)[1/p] / p^n Z_p of the form A / p^e, 0 <= A < p^(n+e)."""
    e = valuation(u.denominator, p)
    k = n + e
    if k <= 0:
        return Fraction(0)
    unit = u.denominator // p**e
    mod = p**k
    return Fraction(u.numerator * pow(unit, -1, mod) % mod, p**e)


@dataclass(frozen=True)
class TreeVertex:
    """Class of the lattice with basis matrix (p^n, u; 0, 1)."""

    p: int
    n: int
    u: Fraction

    def __post_init__(self):
        object.__setattr__(self, "u", _mod_pn(Fraction(self.u), self.p, self.n))

    @classmethod
    def root(cls, p: int) -> "TreeVertex":
        return cls(p, 0, Fraction(0))

    def neighbors(self):
        p, n, u = self.p, self.n, self.u
        out = [TreeVertex(p, n - 1, u)]
        step = Fraction(p) ** n
        out.extend(TreeVertex(p, n + 1, u + k * step) for k in range(p))
        return out

    def parent(self) -> "TreeVertex":
        return TreeVertex(self.p, self.n - 1, self.u)

    def children(self):
        return self.neighbors()[1:]

    def distance(self, other: "TreeVertex") -> int:
        if other.p != self.p:
            raise ValueError("vertices of different trees")
        m = min(self.n, other.n, _vp(self.u - other.u, self.p))
        return int(self.n - m + other.n - m)

    def act(self, g) -> "TreeVertex":
        """Image under g in GL2(Q)."""
        (a, b), (c, d) = g
        p = self.p
        pn = Fraction(p) ** self.n
        return vertex_from_matrix(
            p,
            ((a * pn, a * self.u + b), (c * pn, c * self.u + d)),
        )

    def to_json(self):
        num, den = self.u.numerator, self.u.denominator
        return {"n": self.n, "u_num": num, "u_valp": -valuation(den, self.p)}

    @classmethod
    def from_json(cls, p, data):
        u = Fraction(data["u_num"]) * Fraction(p) ** data["u_valp"]
        return cls(p, data["n"], u)


def vertex_from_matrix(p: int, m) -> TreeVertex:
    """Vertex of the lattice spanned by the columns of an invertible rational matrix."""
    (a, b), (c, d) = [[Fraction(x) for x in row] for row in m]
    if a * d - b * c == 0:
        raise ValueError("singular matrix")
    if c != 0 and (d == 0 or _vp(c, p) < _vp(d, p)):
        a, b, c, d = b, a, d, c
    if c != 0:
        t = c / d
        a, c = a - t * b, Fraction(0)
    return TreeVertex(p, int(_vp(a / d, p)), b / d)


@dataclass(frozen=True)
class Ball:
    """The set center + p^r Z_p, or its complement in P^1(Q_p)."""

    p: int
    center: Fraction
    r: int
    complement: bool = False

    def contains(self, x) -> bool:
        """Membership for x rational or None (infinity)."""
        if x is None:
            inside = False
        else:
            inside = _vp(Fraction(x) - self.center, self.p) >= self.r
        return inside != self.complement


def edge_to_ball(source: TreeVertex, target: TreeVertex) -> Ball:
    """Ball of ends reached by walking along the oriented edge source -> target."""
    if source.distance(target) != 1:
        raise ValueError("not an edge")
    if target.n == source.n + 1:
        return Ball(source.p, target.u, target.n)
    return Ball(source.p, source.u, source.n, complement=True)


def ball_to_edge(ball: Ball):
    v_in = TreeVertex(ball.p, ball.r, ball.center)
    v_out = v_in.parent()
    return (v_in, v_out) if ball.complement else (v_out, v_in)


def reduction_vertex(tau: PadicQuad) -> TreeVertex:
    """Vertex to which a point of the p-adic upper half plane reduces."""
    if tau.is_zero:
        raise PadicDomainError("0 lies in P^1(Q_p)")
    x, y = tau.to_fraction_pair()
    if y == 0:
        raise PadicDomainError("point lies in P^1(Q_p)")
    p = tau.ctx.p
    n = int(_vp(y, p))
    if n >= tau.prec:
        raise PadicDomainError("point is too close to P^1(Q_p) at this precision")
    return TreeVertex(p, n, x)
