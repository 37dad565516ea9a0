"""Yangian presentation layer: generator tokens, the evaluation maps, the
extended coproduct with its correction families, iterated composites, and
the defining-relation residual templates.

Token images are SumExpressions over slot-tagged current algebras.  Level-0
generators are identified with current combinations outright; level-1
generators stay abstract inside coproduct images (GenSymbol kinds H1/XP1/XM1)
until an evaluation map realizes them, while their brackets against currents
are always available through the evaluated-commutator formulas that define
the extended algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .current import AlgElement, Ambient, AmbientError, GenSymbol, Perturbation, SlotSpec
from .modesum import (
    INT,
    NAT,
    AtomFactor,
    LinForm,
    SumExpression,
    UnsupportedShapeError,
    from_gen,
    sum_commutator,
)
from .scalar import ONE, ParamScalar, ZERO, csym, eps, hbar, symbol
from .shape import BlockShape, cartan_effective


class YangianError(ValueError):
    pass


class Token(NamedTuple):
    kind: str  # "H" | "X+" | "X-"
    i: int
    r: int

    def pretty(self):
        return f"{self.kind}[{self.i},{self.r}]"


class EToken(NamedTuple):
    i: int
    j: int
    s: int

    def pretty(self):
        return f"e[{self.i},{self.j}]t^{self.s}"


def all_tokens(n: int):
    return [Token(k, i, r) for r in (0, 1) for k in ("H", "X+", "X-")
            for i in range(n)]


# ---------------------------------------------------------------------------
# ambients
# ---------------------------------------------------------------------------

def amb_ev(n: int, central_delta: ParamScalar | None = None,
           perturb: Perturbation | None = None) -> Ambient:
    """Codomain of the evaluation map: gl(n) currents, c = (-n*hbar-eps)/hbar."""
    if n < 3:
        raise YangianError("rank must be at least 3")
    c = (-n * hbar - eps) / hbar
    if central_delta is not None:
        c = c + central_delta
    return Ambient({1: SlotSpec(n, c)}, perturb=perturb)


def amb_ext(n: int, a: int) -> Ambient:
    if a < n:
        raise YangianError("extended rank must satisfy a >= n")
    if n < 3:
        raise YangianError("rank must be at least 3")
    return Ambient({1: SlotSpec(a, -(n * hbar + eps) / hbar)})


def amb_domain(size: int) -> Ambient:
    """One-slot domain algebra with a free central symbol c0."""
    return Ambient({0: SlotSpec(size, csym(0))})


def amb_pair(a: int, b: int) -> Ambient:
    """Two legs a >= b with symbolic centrals and the tensor quotient
    c1 - c2 = -(a - b) applied during canonicalization."""
    return Ambient({1: SlotSpec(a, csym(1)), 2: SlotSpec(b, csym(2))},
                   central_subst={"c1": csym(2) - (a - b)})


def amb_chain(shape: BlockShape, g: int = 1) -> Ambient:
    """Legs g..l with free central symbols (no quotient substitution; the
    per-step coproduct still needs the individual symbols)."""
    slots = {r: SlotSpec(shape.q[r - 1], csym(r)) for r in range(g, shape.l + 1)}
    return Ambient(slots)


def amb_evl(shape: BlockShape, alpha_delta: tuple[int, ParamScalar] | None = None) -> Ambient:
    slots = {}
    for r in range(1, shape.l + 1):
        c = shape.alpha(r)
        if alpha_delta is not None and alpha_delta[0] == r:
            c = c + alpha_delta[1]
        slots[r] = SlotSpec(shape.q[r - 1], c)
    return Ambient(slots)


# ---------------------------------------------------------------------------
# evaluation formulas
# ---------------------------------------------------------------------------

def level0(amb: Ambient, leg: int, n: int, token: Token) -> AlgElement:
    """The current combination identified with H_{i,0} / X^pm_{i,0}."""
    kind, i, _ = token
    E = lambda p, q, m=0: AlgElement.gen(amb, amb.E(leg, p, q, m))
    if kind == "H":
        if i == 0:
            return (E(n, n) - E(1, 1)
                    + AlgElement.unit(amb, amb.spec(leg).central))
        return E(i, i) - E(i + 1, i + 1)
    if kind == "X+":
        return E(n, 1, 1) if i == 0 else E(i, i + 1)
    if kind == "X-":
        return E(1, n, -1) if i == 0 else E(i + 1, i)
    raise YangianError(f"not a level-0 token: {token}")


def _sum1(amb, leg, entries, coeff=ONE):
    """sum_{s>=0} over 2-factor patterns given as ((i1,j1,a1,b1),(i2,j2,a2,b2))
    with modes a*s + b."""
    out = SumExpression.zero(amb)
    for (i1, j1, a1, b1), (i2, j2, a2, b2) in entries:
        out = out + SumExpression.atom(
            amb, (NAT,),
            (AtomFactor(leg, i1, j1, LinForm((a1,), b1)),
             AtomFactor(leg, i2, j2, LinForm((a2,), b2))), coeff)
    return out


def ev_hat_level1(amb: Ambient, leg: int, n: int, token: Token,
                  shift: ParamScalar | None = None) -> SumExpression:
    """The displayed level-1 image (with the slot's central charge, bound or
    symbolic), plus an optional evaluation shift x * (level-0 image)."""
    kind, i, r = token
    if r != 1:
        raise YangianError(f"not a level-1 token: {token}")
    c = amb.spec(leg).central
    h = hbar
    out = SumExpression.zero(amb)
    lv0 = SumExpression.from_elem(level0(amb, leg, n, Token(kind, i, 0)))
    if kind == "H":
        if i == 0:
            out = out + lv0.scale(h * c)  # hbar*c*h_0
            Enn = AlgElement.gen(amb, amb.E(leg, n, n, 0))
            E11 = AlgElement.gen(amb, amb.E(leg, 1, 1, 0))
            out = out - SumExpression.from_elem(
                Enn * (E11 - AlgElement.unit(amb, c))).scale(h)
            out = out + _sum1(amb, leg,
                              [((n, k, -1, 0), (k, n, 1, 0)) for k in range(1, n + 1)], h)
            out = out - _sum1(amb, leg,
                              [((1, k, -1, -1), (k, 1, 1, 1)) for k in range(1, n + 1)], h)
        else:
            out = out + lv0.scale(-ParamScalar.from_int(i) * h / 2)
            Eii = AlgElement.gen(amb, amb.E(leg, i, i, 0))
            Ejj = AlgElement.gen(amb, amb.E(leg, i + 1, i + 1, 0))
            out = out - SumExpression.from_elem(Eii * Ejj).scale(h)
            out = out + _sum1(amb, leg,
                              [((i, k, -1, 0), (k, i, 1, 0)) for k in range(1, i + 1)], h)
            out = out + _sum1(amb, leg,
                              [((i, k, -1, -1), (k, i, 1, 1)) for k in range(i + 1, n + 1)], h)
            out = out - _sum1(amb, leg,
                              [((i + 1, k, -1, 0), (k, i + 1, 1, 0)) for k in range(1, i + 1)], h)
            out = out - _sum1(amb, leg,
                              [((i + 1, k, -1, -1), (k, i + 1, 1, 1))
                               for k in range(i + 1, n + 1)], h)
    elif kind == "X+":
        if i == 0:
            out = out + lv0.scale(h * c)
            out = out + _sum1(amb, leg,
                              [((n, k, -1, 0), (k, 1, 1, 1)) for k in range(1, n + 1)], h)
        else:
            out = out + lv0.scale(-ParamScalar.from_int(i) * h / 2)
            out = out + _sum1(amb, leg,
                              [((i, k, -1, 0), (k, i + 1, 1, 0)) for k in range(1, i + 1)], h)
            out = out + _sum1(amb, leg,
                              [((i, k, -1, -1), (k, i + 1, 1, 1))
                               for k in range(i + 1, n + 1)], h)
    elif kind == "X-":
        if i == 0:
            out = out + lv0.scale(h * c)
            out = out + _sum1(amb, leg,
                              [((1, k, -1, -1), (k, n, 1, 0)) for k in range(1, n + 1)], h)
        else:
            out = out + lv0.scale(-ParamScalar.from_int(i) * h / 2)
            out = out + _sum1(amb, leg,
                              [((i + 1, k, -1, 0), (k, i, 1, 0)) for k in range(1, i + 1)], h)
            out = out + _sum1(amb, leg,
                              [((i + 1, k, -1, -1), (k, i, 1, 1))
                               for k in range(i + 1, n + 1)], h)
    else:
        raise YangianError(f"unknown token kind {kind}")
    if shift is not None and not shift.is_zero():
        out = out + lv0.scale(shift)
    return out


# ---------------------------------------------------------------------------
# image maps
# ---------------------------------------------------------------------------

@dataclass
class ImageMap:
    """Assignment of generator tokens to SumExpressions."""

    name: str
    ambient: Ambient
    n: int
    _images: dict = field(default_factory=dict)
    deviations: tuple = ()
    e_rule: object = None

    def image(self, token) -> SumExpression:
        hit = self._images.get(token)
        if hit is not None:
            return hit
        if isinstance(token, EToken) and self.e_rule is not None:
            img = self.e_rule(token)
            self._images[token] = img
            return img
        raise YangianError(f"{self.name} has no image for {token}")

    def tokens(self):
        return list(self._images)


def ev_images(n: int, central_delta=None, perturb=None, x: ParamScalar | None = None,
              ambient: Ambient | None = None) -> ImageMap:
    """Theorem images of the evaluation map; c bound to (-n*hbar-eps)/hbar."""
    amb = ambient if ambient is not None else amb_ev(n, central_delta, perturb)
    m = ImageMap("ev", amb, n)
    for tok in all_tokens(n):
        if tok.r == 0:
            m._images[tok] = SumExpression.from_elem(level0(amb, 1, n, tok))
        else:
            m._images[tok] = ev_hat_level1(amb, 1, n, tok, shift=x)
    return m


def ext_ev_images(n: int, a: int, x: ParamScalar = ZERO) -> ImageMap:
    """ev~^x on the extended algebra: currents map identically (full range
    1..a), level-1 images shift by x * level-0."""
    amb = amb_ext(n, a)
    m = ev_images(n, x=x, ambient=amb)
    m.name = "ext_ev"
    m.e_rule = lambda tok: from_gen(amb, amb.E(1, tok.i, tok.j, tok.s))
    m._images["C"] = SumExpression.from_elem(
        AlgElement.unit(amb, -(n * hbar + eps) / hbar))
    return m


# -- coproduct correction families ---------------------------------------------

def _pair_sum_nat(amb, rows, coeff=ONE):
    out = SumExpression.zero(amb)
    for (l1, i1, j1, a1, b1), (l2, i2, j2, a2, b2) in rows:
        out = out + SumExpression.atom(
            amb, (NAT,),
            (AtomFactor(l1, i1, j1, LinForm((a1,), b1)),
             AtomFactor(l2, i2, j2, LinForm((a2,), b2))), coeff)
    return out


def _pair_sum_int(amb, rows, coeff=ONE):
    out = SumExpression.zero(amb)
    for (l1, i1, j1, a1, b1), (l2, i2, j2, a2, b2) in rows:
        out = out + SumExpression.atom(
            amb, (INT,),
            (AtomFactor(l1, i1, j1, LinForm((a1,), b1)),
             AtomFactor(l2, i2, j2, LinForm((a2,), b2))), coeff)
    return out


def cop_F(amb, n, a, b, kind, i, legs=(1, 2)) -> SumExpression:
    """Cross-leg bi-infinite families F_i / F^pm_i of the coproduct."""
    l1, l2 = legs
    h = hbar
    if kind == "H":
        p, q = (n, 1) if i == 0 else (i, i + 1)
        rows = [((l1, v, p, 1, 0), (l2, p, v, -1, 0)) for v in range(n + 1, b + 1)]
        out = _pair_sum_int(amb, rows, h)
        rows = [((l1, v, q, 1, 0), (l2, q, v, -1, 0)) for v in range(n + 1, b + 1)]
        return out - _pair_sum_int(amb, rows, h)
    if kind == "X+":
        if i == 0:
            rows = [((l1, u, 1, -1, 0), (l2, n, u, 1, 1)) for u in range(n + 1, b + 1)]
        else:
            rows = [((l1, u, i + 1, -1, 0), (l2, i, u, 1, 0)) for u in range(n + 1, b + 1)]
        return _pair_sum_int(amb, rows, h)
    if kind == "X-":
        if i == 0:
            rows = [((l1, u, n, -1, 0), (l2, 1, u, 1, -1)) for u in range(n + 1, b + 1)]
        else:
            rows = [((l1, u, i, -1, 0), (l2, i + 1, u, 1, 0)) for u in range(n + 1, b + 1)]
        return _pair_sum_int(amb, rows, h)
    raise YangianError(kind)


def cop_A(amb, n, a, b, kind, i, legs=(1, 2)) -> SumExpression:
    """The GNW-type quadratic tails A_i / A^pm_i."""
    l1, l2 = legs
    h = hbar
    c_a = amb.spec(l1).central
    c_b = amb.spec(l2).central
    E1 = lambda p, q, m=0: AlgElement.gen(amb, amb.E(l1, p, q, m))
    E2 = lambda p, q, m=0: AlgElement.gen(amb, amb.E(l2, p, q, m))
    out = SumExpression.zero(amb)
    if kind == "H":
        if i == 0:
            fin = (E1(1, 1) * E2(n, n) + E1(n, n) * E2(1, 1)).scale(-h)
            fin = fin + (E1(n, n) - E1(1, 1)).scale(h * c_b)
            fin = fin + (E2(n, n) - E2(1, 1)).scale(h * c_a)
            fin = fin + AlgElement.unit(amb, h * c_a * c_b)
            out = out + SumExpression.from_elem(fin)
            rows_m = [((l1, u, n, -1, -1), (l2, n, u, 1, 1)) for u in range(1, n + 1)]
            rows_p = [((l1, n, u, -1, 0), (l2, u, n, 1, 0)) for u in range(1, n + 1)]
            out = out - _pair_sum_nat(amb, rows_m, h) + _pair_sum_nat(amb, rows_p, h)
            rows_m2 = [((l1, u, 1, -1, 0), (l2, 1, u, 1, 0)) for u in range(1, n + 1)]
            rows_p2 = [((l1, 1, u, -1, -1), (l2, u, 1, 1, 1)) for u in range(1, n + 1)]
            out = out + _pair_sum_nat(amb, rows_m2, h) - _pair_sum_nat(amb, rows_p2, h)
            return out
        fin = (E1(i, i) * E2(i + 1, i + 1) + E1(i + 1, i + 1) * E2(i, i)).scale(-h)
        out = out + SumExpression.from_elem(fin)
        for p, sgn in ((i, ONE), (i + 1, -ONE)):
            rows_m = [((l1, u, p, -1, -1), (l2, p, u, 1, 1)) for u in range(1, i + 1)]
            rows_p = [((l1, p, u, -1, 0), (l2, u, p, 1, 0)) for u in range(1, i + 1)]
            out = out + (_pair_sum_nat(amb, rows_p, h) - _pair_sum_nat(amb, rows_m, h)).scale(sgn)
            rows_m = [((l1, u, p, -1, 0), (l2, p, u, 1, 0)) for u in range(i + 1, n + 1)]
            rows_p = [((l1, p, u, -1, -1), (l2, u, p, 1, 1)) for u in range(i + 1, n + 1)]
            out = out + (_pair_sum_nat(amb, rows_p, h) - _pair_sum_nat(amb, rows_m, h)).scale(sgn)
        return out
    if kind == "X+":
        if i == 0:
            out = out + SumExpression.from_elem(E2(n, 1, 1).scale(h * c_a))
            rows = [((l1, u, 1, -1, 0), (l2, n, u, 1, 1)) for u in range(1, n + 1)]
            out = out + _pair_sum_nat(amb, rows, h)
            rows = [((l1, n, u, -1, 0), (l2, u, 1, 1, 1)) for u in range(1, n + 1)]
            out = out - _pair_sum_nat(amb, rows, h)
            return out
        rows_m = [((l1, u, i + 1, -1, -1), (l2, i, u, 1, 1)) for u in range(1, i + 1)]
        rows_p = [((l1, i, u, -1, 0), (l2, u, i + 1, 1, 0)) for u in range(1, i + 1)]
        out = out + _pair_sum_nat(amb, rows_p, h) - _pair_sum_nat(amb, rows_m, h)
        rows_m = [((l1, u, i + 1, -1, 0), (l2, i, u, 1, 0)) for u in range(i + 1, n + 1)]
        rows_p = [((l1, i, u, -1, -1), (l2, u, i + 1, 1, 1)) for u in range(i + 1, n + 1)]
        out = out + _pair_sum_nat(amb, rows_p, h) - _pair_sum_nat(amb, rows_m, h)
        return out
    if kind == "X-":
        if i == 0:
            out = out + SumExpression.from_elem(E1(1, n, -1).scale(h * c_b))
            rows_m = [((l1, u, n, -1, -1), (l2, 1, u, 1, 0)) for u in range(1, n + 1)]
            rows_p = [((l1, 1, u, -1, -1), (l2, u, n, 1, 0)) for u in range(1, n + 1)]
            out = out - _pair_sum_nat(amb, rows_m, h) + _pair_sum_nat(amb, rows_p, h)
            return out
        rows_m = [((l1, u, i, -1, -1), (l2, i + 1, u, 1, 1)) for u in range(1, i + 1)]
        rows_p = [((l1, i + 1, u, -1, 0), (l2, u, i, 1, 0)) for u in range(1, i + 1)]
        out = out + _pair_sum_nat(amb, rows_p, h) - _pair_sum_nat(amb, rows_m, h)
        rows_m = [((l1, u, i, -1, 0), (l2, i + 1, u, 1, 0)) for u in range(i + 1, n + 1)]
        rows_p = [((l1, i + 1, u, -1, -1), (l2, u, i, 1, 1)) for u in range(i + 1, n + 1)]
        out = out + _pair_sum_nat(amb, rows_p, h) - _pair_sum_nat(amb, rows_m, h)
        return out
    raise YangianError(kind)


def cop_B(amb, n, a, b, kind, i, leg=1) -> SumExpression:
    """The one-leg tails B_i / B^pm_i over the extra rows b+1..a."""
    h = hbar
    c_a = amb.spec(leg).central
    out = SumExpression.zero(amb)
    us = range(b + 1, a + 1)
    if kind == "H":
        if i == 0:
            rows = []
            for u in us:
                rows.append(((leg, u, n, -1, -1), (leg, n, u, 1, 1)))
                rows.append(((leg, n, u, -1, 0), (leg, u, n, 1, 0)))
            out = out + _pair_sum_nat(amb, rows, h)
            rows = []
            for u in us:
                rows.append(((leg, u, 1, -1, -1), (leg, 1, u, 1, 1)))
                rows.append(((leg, 1, u, -1, 0), (leg, u, 1, 1, 0)))
            out = out - _pair_sum_nat(amb, rows, h)
            fin = AlgElement.zero(amb)
            for u in us:
                fin = fin - AlgElement.gen(amb, amb.E(leg, u, u, 0))
            fin = fin + AlgElement.gen(amb, amb.E(leg, n, n, 0)).scale(a - b)
            fin = fin + AlgElement.unit(amb, (a - b) * c_a)
            return out + SumExpression.from_elem(fin.scale(h))
        rows = [((leg, u, i, -1, -1), (leg, i, u, 1, 1)) for u in us]
        out = out + _pair_sum_nat(amb, rows, h)
        rows = [((leg, u, i + 1, -1, 0), (leg, i + 1, u, 1, 0)) for u in us]
        return out - _pair_sum_nat(amb, rows, h)
    if kind == "X+":
        rows = []
        if i == 0:
            for u in us:
                rows.append(((leg, u, 1, -1, -1), (leg, n, u, 1, 2)))
                rows.append(((leg, n, u, -1, 1), (leg, u, 1, 1, 0)))
        else:
            for u in us:
                rows.append(((leg, u, i + 1, -1, -1), (leg, i, u, 1, 1)))
                rows.append(((leg, i, u, -1, 0), (leg, u, i + 1, 1, 0)))
        return _pair_sum_nat(amb, rows, h)
    if kind == "X-":
        rows = []
        if i == 0:
            for u in us:
                rows.append(((leg, u, n, -1, -1), (leg, 1, u, 1, 0)))
                rows.append(((leg, 1, u, -1, -1), (leg, u, n, 1, 0)))
            out = _pair_sum_nat(amb, rows, h)
            out = out + SumExpression.from_elem(
                AlgElement.gen(amb, amb.E(leg, 1, n, -1)).scale((a - b) * hbar))
            return out
        for u in us:
            rows.append(((leg, u, i, -1, -1), (leg, i + 1, u, 1, 0)))
            rows.append(((leg, i + 1, u, -1, -1), (leg, u, i, 1, 0)))
        return _pair_sum_nat(amb, rows, h)
    raise YangianError(kind)


def coproduct_images(n: int, a: int, b: int, legs=(1, 2),
                     ambient: Ambient | None = None) -> ImageMap:
    """Delta^{a,b} token images in a two-leg algebra (or a chain segment).

    Level-1 tokens keep abstract per-leg generators (kinds H1/XP1/XM1); the
    second-leg terms printed with node 0 are implemented at node i, which the
    level-0 compatibility and the rectangular remark force.
    """
    if not (a >= b >= n >= 3):
        raise YangianError("need a >= b >= n >= 3")
    amb = ambient if ambient is not None else amb_pair(a, b)
    l1, l2 = legs
    m = ImageMap("coproduct", amb, n,
                 deviations=("cop-leg2-node", "cop-B0-finite"))
    abstract = {"H": "H1", "X+": "XP1", "X-": "XM1"}
    for tok in all_tokens(n):
        kind, i, r = tok
        if r == 0:
            m._images[tok] = (SumExpression.from_elem(level0(amb, l1, n, tok))
                              + SumExpression.from_elem(level0(amb, l2, n, tok)))
        else:
            lead = from_gen(amb, GenSymbol(l1, abstract[kind], i, 0, 0))
            second = from_gen(amb, GenSymbol(l2, abstract[kind], i, 0, 0))
            m._images[tok] = (lead + cop_B(amb, n, a, b, kind, i, leg=l1)
                              + second
                              + cop_A(amb, n, a, b, kind, i, legs=legs)
                              - cop_F(amb, n, a, b, kind, i, legs=legs))
    def e_rule(tok: EToken):
        img = from_gen(amb, amb.E(l1, tok.i, tok.j, tok.s))
        if tok.i <= b and tok.j <= b:
            img = img + from_gen(amb, amb.E(l2, tok.i, tok.j, tok.s))
        return img

    m.e_rule = e_rule
    m._images["C"] = SumExpression.from_elem(
        AlgElement.unit(amb, amb.spec(l1).central + amb.spec(l2).central))
    return m


# ---------------------------------------------------------------------------
# applying maps to expressions (pattern-level substitution)
# ---------------------------------------------------------------------------

@dataclass
class SlotRule:
    """How one source leg maps into target legs.

    factor_targets(i, j) -> list of (target_leg, gate) for an e_{i,j} pattern;
    the mode is preserved.  token_target(kind, node) -> SumExpression for the
    abstract level-1 generators of this leg.  central -> ParamScalar image of
    this leg's central symbol.
    """

    factor_targets: object
    token_target: object
    central: ParamScalar


def apply_map(expr: SumExpression, rules: dict[int, SlotRule],
              target: Ambient) -> SumExpression:
    """Substitute generator images through `rules`, slot by slot.

    Pattern factors must map pattern-linearly (same mode, retagged slots) --
    true for every map here.  Abstract level-1 generators are replaced by
    their image expressions; they must stand alone in their monomial factor.
    """
    csub = {}
    for slot, rule in rules.items():
        csub[f"c{slot}"] = rule.central

    def subst_coeff(c: ParamScalar) -> ParamScalar:
        if c.symbols() & set(csub):
            return c.substitute(csub)
        return c

    out = SumExpression.zero(target)
    for mono, coeff in expr.finite.items():
        coeff = subst_coeff(coeff)
        abstract = [g for g in mono if g.kind in ("H1", "XP1", "XM1")]
        if abstract:
            if len(mono) != 1:
                raise UnsupportedShapeError(
                    "abstract level-1 generators must stand alone in a monomial")
            g = mono[0]
            out = out + rules[g.slot].token_target(g.kind, g.a).scale(coeff)
            continue
        pieces = [SumExpression.from_elem(AlgElement.unit(target, coeff))]
        for g in mono:
            rule = rules[g.slot]
            expanded = SumExpression.zero(target)
            for leg, gate in rule.factor_targets(g.a, g.b):
                if gate:
                    expanded = expanded + from_gen(
                        target, GenSymbol(leg, g.kind, g.a, g.b, g.mode))
            pieces = [p * expanded for p in pieces]
        for p in pieces:
            out = out + p
    for atom, coeff in expr.atoms.items():
        coeff = subst_coeff(coeff)
        choices = [[]]
        for f in atom.factors:
            rule = rules[f.slot]
            opts = [AtomFactor(leg, f.i, f.j, f.mode)
                    for leg, gate in rule.factor_targets(f.i, f.j) if gate]
            choices = [c + [o] for c in choices for o in opts]
        for combo in choices:
            out = out + SumExpression.atom(target, atom.ranges, tuple(combo), coeff)
    if expr.divergent:
        raise UnsupportedShapeError("cannot map a divergent expression")
    return out


def delta_slot_rules(n: int, a: int, b: int, src_leg: int, tgt_legs: tuple[int, int],
                     target: Ambient, other_legs=()) -> dict[int, SlotRule]:
    """Rules for Delta^{a,b} acting on `src_leg`, identity on `other_legs`."""
    la, lb = tgt_legs
    cop = coproduct_images(n, a, b, legs=tgt_legs, ambient=target)

    def targets(i, j):
        return [(la, True), (lb, i <= b and j <= b)]

    def token_target(kind, node):
        kind_map = {"H1": "H", "XP1": "X+", "XM1": "X-"}[kind]
        return cop.image(Token(kind_map, node, 1))

    rules = {src_leg: SlotRule(targets, token_target,
                               target.spec(la).central + target.spec(lb).central)}
    for leg in other_legs:
        rules[leg] = SlotRule(
            lambda i, j, leg=leg: [(leg, True)],
            lambda kind, node, leg=leg: from_gen(
                target, GenSymbol(leg, kind, node, 0, 0)),
            target.spec(leg).central)
    return rules


def delta_l(shape: BlockShape) -> ImageMap:
    """The iterated coproduct Delta^l into the l-leg chain algebra; level-1
    images keep abstract per-leg generators until an evaluation realizes
    them."""
    n = shape.q[-1]
    if n < 3:
        raise YangianError("smallest block must be >= 3")
    l = shape.l
    chain = amb_chain(shape, g=l)
    m = ImageMap(f"delta_l{shape.q}", chain, n)
    abstract = {"H": "H1", "X+": "XP1", "X-": "XM1"}
    for tok in all_tokens(n):
        if tok.r == 0:
            m._images[tok] = SumExpression.from_elem(level0(chain, l, n, tok))
        else:
            m._images[tok] = from_gen(chain, GenSymbol(l, abstract[tok.kind], tok.i, 0, 0))
    for g in range(l - 1, 0, -1):
        target = amb_chain(shape, g=g)
        rules = delta_slot_rules(
            n, shape.q[g - 1], shape.q[g], src_leg=g + 1, tgt_legs=(g, g + 1),
            target=target, other_legs=tuple(range(g + 2, l + 1)))
        for tok in list(m._images):
            m._images[tok] = apply_map(m._images[tok], rules, target)
        m.ambient = target
    return m


def ev_l_realize(shape: BlockShape, expr: SumExpression,
                 target: Ambient | None = None,
                 alpha_delta: tuple[int, ParamScalar] | None = None) -> SumExpression:
    """Apply the leg-wise evaluations: abstract level-1 generators become the
    displayed formulas shifted by a_r = -hbar * sum_{y>r} alpha_y, and each
    leg's central charge binds to alpha_r."""
    n = shape.q[-1]
    amb = target if target is not None else amb_evl(shape, alpha_delta)

    def mk_rule(leg):
        def token_target(kind, node, leg=leg):
            kind_map = {"H1": "H", "XP1": "X+", "XM1": "X-"}[kind]
            shift = shape.shift_a(leg)
            if alpha_delta is not None:
                s = ZERO
                for y in range(leg + 1, shape.l + 1):
                    av = shape.alpha(y)
                    if y == alpha_delta[0]:
                        av = av + alpha_delta[1]
                    s = s + av
                shift = -hbar * s
            return ev_hat_level1(amb, leg, n, Token(kind_map, node, 1), shift=shift)

        return SlotRule(lambda i, j, leg=leg: [(leg, True)], token_target,
                        amb.spec(leg).central)

    rules = {leg: mk_rule(leg) for leg in range(1, shape.l + 1)}
    return apply_map(expr, rules, amb)


def evl_delta_images(shape: BlockShape,
                     alpha_delta: tuple[int, ParamScalar] | None = None) -> ImageMap:
    """The fully evaluated composite ev^l o Delta^l on all tokens."""
    dl = delta_l(shape)
    amb = amb_evl(shape, alpha_delta)
    m = ImageMap(f"evl_delta{shape.q}", amb, dl.n)
    for tok in dl.tokens():
        m._images[tok] = ev_l_realize(shape, dl.image(tok), target=amb,
                                      alpha_delta=alpha_delta)
    return m


# ---------------------------------------------------------------------------
# relation residuals
# ---------------------------------------------------------------------------

RELATION_IDS = tuple(f"R2.{k}" for k in range(1, 11))


def _anticomm(x, y):
    return x * y + y * x


def relation_residual(m: ImageMap, rel: str, i: int = 0, j: int = 0,
                      sign: int = +1, r: int = 0, s: int = 1,
                      serre_power: int | None = None,
                      eps_param: ParamScalar | None = None) -> SumExpression:
    """LHS - RHS of a defining relation under the token images of `m`.

    `sign` selects the +/- case where relevant; `eps_param` overrides the
    domain parameter (defaults to the global eps symbol).
    """
    n = m.n
    acar = cartan_effective(n)
    ev = m.image
    e = eps if eps_param is None else eps_param
    Xp = "X+" if sign > 0 else "X-"
    Xm = "X-" if sign > 0 else "X+"
    sg = ONE if sign > 0 else -ONE

    def H(p, rr):
        return ev(Token("H", p, rr))

    def X(kind, p, rr):
        return ev(Token(kind, p, rr))

    def Htil(p):
        return H(p, 1) - (H(p, 0) * H(p, 0)).scale(hbar / 2)

    if rel == "R2.1":
        return H(i, r).bracket(H(j, s))
    if rel == "R2.2":
        res = X("X+", i, 0).bracket(X("X-", j, 0))
        if i == j:
            res = res - H(i, 0)
        return res
    if rel == "R2.3":
        lhs = X("X+", i, 1).bracket(X("X-", j, 0)) if r == 0 else \
            X("X+", i, 0).bracket(X("X-", j, 1))
        if i == j:
            lhs = lhs - H(i, 1)
        return lhs
    if rel == "R2.4":
        res = H(i, 0).bracket(X(Xp, j, r))
        return res - X(Xp, j, r).scale(sg * acar[i][j])
    if rel == "R2.5":
        if (i, j) in ((0, n - 1), (n - 1, 0)):
            raise YangianError("R2.5 excludes the corner pairs; use R2.6/R2.7")
        return Htil(i).bracket(X(Xp, j, 0)) - X(Xp, j, 1).scale(sg * acar[i][j])
    if rel == "R2.6":
        lhs = Htil(0).bracket(X(Xp, n - 1, 0))
        rhs = (X(Xp, n - 1, 1) - X(Xp, n - 1, 0).scale(e + n * hbar / 2)).scale(-sg)
        return lhs - rhs
    if rel == "R2.7":
        lhs = Htil(n - 1).bracket(X(Xp, 0, 0))
        rhs = (X(Xp, 0, 1) + X(Xp, 0, 0).scale(e + n * hbar / 2)).scale(-sg)
        return lhs - rhs
    if rel == "R2.8":
        if (i, j) in ((0, n - 1), (n - 1, 0)):
            raise YangianError("R2.8 excludes the corner pairs; use R2.9")
        lhs = X(Xp, i, 1).bracket(X(Xp, j, 0)) - X(Xp, i, 0).bracket(X(Xp, j, 1))
        rhs = _anticomm(X(Xp, i, 0), X(Xp, j, 0)).scale(sg * acar[i][j] * hbar / 2)
        return lhs - rhs
    if rel == "R2.9":
        lhs = X(Xp, 0, 1).bracket(X(Xp, n - 1, 0)) - X(Xp, 0, 0).bracket(X(Xp, n - 1, 1))
        rhs = _anticomm(X(Xp, 0, 0), X(Xp, n - 1, 0)).scale(-sg * hbar / 2) \
            - X(Xp, 0, 0).bracket(X(Xp, n - 1, 0)).scale(e + n * hbar / 2)
        return lhs - rhs
    if rel == "R2.10":
        if i == j:
            raise YangianError("Serre relation needs i != j")
        power = serre_power if serre_power is not None else 1 - acar[i][j]
        res = X(Xp, j, 0)
        for _ in range(power):
            res = X(Xp, i, 0).bracket(res)
        return res
    _ = Xm
    raise YangianError(f"unknown relation id {rel!r}")


def relation_instances(n: int):
    """Every (rel, kwargs) instance of R2.1-R2.10 for rank n."""
    out = []
    corners = {(0, n - 1), (n - 1, 0)}
    for i in range(n):
        for j in range(n):
            for r, s in ((0, 0), (0, 1), (1, 1)):
                out.append(("R2.1", dict(i=i, j=j, r=r, s=s)))
            out.append(("R2.2", dict(i=i, j=j)))
            for r in (0, 1):
                out.append(("R2.3", dict(i=i, j=j, r=r)))
            for sign in (+1, -1):
                for r in (0, 1):
                    out.append(("R2.4", dict(i=i, j=j, sign=sign, r=r)))
                if (i, j) not in corners:
                    out.append(("R2.5", dict(i=i, j=j, sign=sign)))
                    if i != j:
                        out.append(("R2.8", dict(i=i, j=j, sign=sign)))
                if i != j:
                    out.append(("R2.10", dict(i=i, j=j, sign=sign)))
    for sign in (+1, -1):
        out.append(("R2.6", dict(sign=sign)))
        out.append(("R2.7", dict(sign=sign)))
        out.append(("R2.9", dict(sign=sign)))
    return out


# ---------------------------------------------------------------------------
# parameter conversion between the two published presentations
# ---------------------------------------------------------------------------

def convert_parameters(eps1: ParamScalar, eps2: ParamScalar, n: int):
    """Return (hbar, eps) for the (eps1, eps2) presentation and the triangular
    token change: psi(H_{i,1}) = h_{i,1} + (i/2)(eps1-eps2) h_{i,0}."""
    hb = eps1 + eps2
    ev = -n * eps2

    def psi(token: Token):
        if token.kind == "H" and token.r == 1 and token.i != 0:
            coeff = ParamScalar.from_int(token.i) / 2 * (eps1 - eps2)
            return [(token, ONE), (Token("H", token.i, 0), coeff)]
        return [(token, ONE)]

    def psi_inverse(token: Token):
        if token.kind == "H" and token.r == 1 and token.i != 0:
            coeff = ParamScalar.from_int(token.i) / 2 * (eps1 - eps2)
            return [(token, ONE), (Token("H", token.i, 0), -coeff)]
        return [(token, ONE)]

    return hb, ev, psi, psi_inverse
