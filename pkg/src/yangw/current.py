"""Slot-tagged current (super)algebra: generators, super brackets, and PBW
straightening to a canonical normal form.

Generators live in numbered tensor slots.  A slot is either a plain affine
gl(size) current algebra (central element c<slot>, z = 1 throughout), or a
"W context" slot carrying a block shape, where even generators e_{i,j} need
col(i) >= col(j), odd generators psi_{i,j} need col(i) > col(j), and the
central pairing is alpha_{col(i)} from the shape.

Monomials are kept strictly ordered: mode ascending (most negative modes
leftmost, so vacuum-module annihilators sit on the right), ties broken by
slot, even before odd, then index pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

from .scalar import ONE, ParamScalar, ZERO, csym
from .shape import BlockShape


class AmbientError(ValueError):
    pass


class GenSymbol(NamedTuple):
    slot: int
    kind: str  # "E" | "psi" | "H1" | "XP1" | "XM1"
    a: int
    b: int
    mode: int

    def degree(self) -> int:
        if self.kind in ("E", "psi"):
            return self.mode
        if self.kind == "XP1":
            return 1 if self.a == 0 else 0
        if self.kind == "XM1":
            return -1 if self.a == 0 else 0
        return 0

    def parity(self) -> int:
        return 1 if self.kind == "psi" else 0

    def sort_key(self):
        kind_rank = {"E": 0, "psi": 1, "H1": 2, "XP1": 3, "XM1": 4}[self.kind]
        return (self.degree(), self.slot, kind_rank, self.a, self.b)

    def pretty(self) -> str:
        if self.kind == "E":
            return f"E[r={self.slot};{self.a},{self.b};m={self.mode}]"
        if self.kind == "psi":
            return f"psi[{self.a},{self.b};m={self.mode}]"
        label = {"H1": "H1", "XP1": "X+1", "XM1": "X-1"}[self.kind]
        return f"{label}[{self.a};r={self.slot}]"


@dataclass(frozen=True)
class SlotSpec:
    size: int
    central: ParamScalar
    wshape: Optional[BlockShape] = None


@dataclass(frozen=True)
class Perturbation:
    """Negative-control hook: tweaks one named constant by `delta`.

    kind "structure": scales the delta_{b1,a2} structure term of the bracket
    [E_{a1,b1}, E_{a2,b2}] in `slot` for the given index quadruple.
    """

    kind: str
    slot: int = 0
    indices: tuple = ()
    delta: ParamScalar = ONE


class Ambient:
    """Declared tensor slots plus central bookkeeping; shared by elements."""

    def __init__(self, slots: dict[int, SlotSpec], central_subst: dict | None = None,
                 perturb: Perturbation | None = None):
        self.slots = dict(slots)
        self.central_subst = dict(central_subst or {})
        self.perturb = perturb
        self._no_memo: dict = {}

    @staticmethod
    def single(size: int, central: ParamScalar | None = None, slot: int = 1,
               wshape: BlockShape | None = None) -> "Ambient":
        if central is None:
            central = csym(slot)
        return Ambient({slot: SlotSpec(size, central, wshape)})

    def spec(self, slot: int) -> SlotSpec:
        try:
            return self.slots[slot]
        except KeyError:
            raise AmbientError(f"slot {slot} not declared") from None

    def central_for(self, slot: int, row_index: int) -> ParamScalar:
        sp = self.spec(slot)
        if sp.wshape is not None:
            return sp.wshape.alpha(sp.wshape.col(row_index))
        return sp.central

    def reduce(self, s: ParamScalar) -> ParamScalar:
        if self.central_subst and (s.symbols() & set(self.central_subst)):
            return s.substitute(self.central_subst)
        return s

    def same(self, other: "Ambient") -> bool:
        return self is other or (self.slots == other.slots
                                 and self.central_subst == other.central_subst
                                 and self.perturb == other.perturb)

    def check_same(self, other: "Ambient"):
        if not self.same(other):
            raise AmbientError("ambient mismatch between operands")

    # -- generator constructors ------------------------------------------------

    def E(self, slot: int, i: int, j: int, mode: int) -> GenSymbol:
        sp = self.spec(slot)
        if not (1 <= i <= sp.size and 1 <= j <= sp.size):
            raise AmbientError(f"indices ({i},{j}) outside slot {slot} size {sp.size}")
        if sp.wshape is not None and sp.wshape.col(i) < sp.wshape.col(j):
            raise AmbientError(f"e[{i},{j}] not in the lower-triangular support")
        return GenSymbol(slot, "E", i, j, mode)

    def psi(self, slot: int, i: int, j: int, mode: int) -> GenSymbol:
        sp = self.spec(slot)
        if sp.wshape is None:
            raise AmbientError("psi generators need a W-context slot")
        if not (1 <= i <= sp.size and 1 <= j <= sp.size):
            raise AmbientError(f"indices ({i},{j}) outside slot {slot} size {sp.size}")
        if not sp.wshape.col(i) > sp.wshape.col(j):
            raise AmbientError(f"psi[{i},{j}] needs col({i}) > col({j})")
        return GenSymbol(slot, "psi", i, j, mode)


def bracket_terms(g1: GenSymbol, g2: GenSymbol, ambient: Ambient):
    """Super bracket [g1, g2] as a list of (GenSymbol-or-None, coeff);
    None stands for the unit monomial (central contributions)."""
    if g1.slot != g2.slot:
        return []
    k1, k2 = g1.kind, g2.kind
    if k1 == "psi" and k2 == "psi":
        return []
    if k1 in ("E", "psi") and k2 in ("E", "psi"):
        if k1 == "psi":  # [psi, e] = -[e, psi]
            return [(g, -c) for g, c in bracket_terms(g2, g1, ambient)]
        slot, mode = g1.slot, g1.mode + g2.mode
        out = []
        mk = ambient.E if k2 == "E" else ambient.psi
        if g1.b == g2.a:
            coeff = ONE
            p = ambient.perturb
            if (p is not None and p.kind == "structure" and p.slot == slot
                    and p.indices == (g1.a, g1.b, g2.a, g2.b)):
                coeff = coeff + p.delta
            out.append((mk(slot, g1.a, g2.b, mode), coeff))
        if g1.a == g2.b:
            out.append((mk(slot, g2.a, g1.b, mode), -ONE))
        if k2 == "E" and mode == 0 and g1.mode != 0:
            m = ParamScalar.from_int(g1.mode)
            if g1.b == g2.a and g1.a == g2.b:
                out.append((None, m * ambient.central_for(slot, g1.a)))
            if g1.a == g1.b and g2.a == g2.b:
                out.append((None, m))  # z acts as 1
        return out
    raise AmbientError(
        f"bracket of abstract generator {g1.pretty()} / {g2.pretty()} is not "
        "defined at this layer")


def _merge(dst: dict, src: dict, factor: ParamScalar):
    if factor.is_zero():
        return
    for mono, c in src.items():
        nc = dst.get(mono, ZERO) + c * factor
        if nc.is_zero():
            dst.pop(mono, None)
        else:
            dst[mono] = nc


def normal_order(factors, ambient: Ambient) -> dict:
    """Straighten a product of generators into canonical monomials.

    Returns dict monomial-tuple -> ParamScalar, equal to the product in the
    enveloping algebra.  Terminates: each swap lowers the inversion count and
    bracket remainders are strictly shorter.
    """
    factors = tuple(factors)
    memo = ambient._no_memo

    def rec(fs: tuple) -> dict:
        hit = memo.get(fs)
        if hit is not None:
            return hit
        for idx in range(len(fs) - 1):
            x, y = fs[idx], fs[idx + 1]
            kx, ky = x.sort_key(), y.sort_key()
            if kx == ky and x == y and x.parity():
                memo[fs] = {}
                return {}
            if kx > ky:
                sign = -ONE if (x.parity() and y.parity()) else ONE
                out: dict = {}
                _merge(out, rec(fs[:idx] + (y, x) + fs[idx + 2:]), sign)
                for g, coeff in bracket_terms(x, y, ambient):
                    rest = fs[:idx] + ((g,) if g is not None else ()) + fs[idx + 2:]
                    _merge(out, rec(rest), coeff)
                memo[fs] = out
                return out
        out = {fs: ONE}
        memo[fs] = out
        return out

    return rec(factors)


class AlgElement:
    """Finite linear combination of PBW-normal-ordered monomials."""

    __slots__ = ("ambient", "terms")

    def __init__(self, ambient: Ambient, terms: dict | None = None):
        self.ambient = ambient
        self.terms = terms or {}

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def zero(ambient: Ambient) -> "AlgElement":
        return AlgElement(ambient)

    @staticmethod
    def unit(ambient: Ambient, coeff: ParamScalar = ONE) -> "AlgElement":
        if coeff.is_zero():
            return AlgElement(ambient)
        return AlgElement(ambient, {(): coeff})

    @staticmethod
    def gen(ambient: Ambient, g: GenSymbol, coeff: ParamScalar = ONE) -> "AlgElement":
        if coeff.is_zero():
            return AlgElement(ambient)
        return AlgElement(ambient, {(g,): coeff})

    @staticmethod
    def word(ambient: Ambient, factors, coeff: ParamScalar = ONE) -> "AlgElement":
        ordered = normal_order(factors, ambient)
        out: dict = {}
        _merge(out, ordered, coeff)
        return AlgElement(ambient, out)

    # -- arithmetic --------------------------------------------------------------

    def __add__(self, other: "AlgElement") -> "AlgElement":
        self.ambient.check_same(other.ambient)
        out = dict(self.terms)
        _merge(out, other.terms, ONE)
        return AlgElement(self.ambient, out)

    def __sub__(self, other: "AlgElement") -> "AlgElement":
        self.ambient.check_same(other.ambient)
        out = dict(self.terms)
        _merge(out, other.terms, -ONE)
        return AlgElement(self.ambient, out)

    def __neg__(self) -> "AlgElement":
        return AlgElement(self.ambient, {m: -c for m, c in self.terms.items()})

    def scale(self, coeff) -> "AlgElement":
        if not isinstance(coeff, ParamScalar):
            coeff = ParamScalar.from_int(coeff)
        if coeff.is_zero():
            return AlgElement(self.ambient)
        return AlgElement(self.ambient, {m: c * coeff for m, c in self.terms.items()})

    def __mul__(self, other: "AlgElement") -> "AlgElement":
        self.ambient.check_same(other.ambient)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                _merge(out, normal_order(m1 + m2, self.ambient), c1 * c2)
        return AlgElement(self.ambient, out)

    def bracket(self, other: "AlgElement") -> "AlgElement":
        return self * other - other * self

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, AlgElement):
            return NotImplemented
        return self.ambient.same(other.ambient) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # -- queries -----------------------------------------------------------------

    def degrees(self) -> set:
        return {sum(g.degree() for g in m) for m in self.terms}

    def parity_of(self, mono) -> int:
        return sum(g.parity() for g in mono) % 2

    def map_coeffs(self, fn) -> "AlgElement":
        out = {}
        for m, c in self.terms.items():
            nc = fn(c)
            if not nc.is_zero():
                out[m] = nc
        return AlgElement(self.ambient, out)

    def pretty(self) -> str:
        if not self.terms:
            return "0"
        keys = sorted(self.terms, key=lambda m: tuple(g.sort_key() for g in m))
        parts = []
        for m in keys:
            body = "*".join(g.pretty() for g in m) or "1"
            parts.append(f"({self.terms[m]})*{body}")
        return " + ".join(parts)

    __repr__ = pretty
