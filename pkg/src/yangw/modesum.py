"""Symbolic calculus of half-infinite and bi-infinite normally ordered mode
sums.

A SumExpression is a finite AlgElement plus a bag of mode-sum atoms.  An atom
is  coeff * sum_{vars} f_1 f_2 ... f_k  (k <= 4), where each factor is an
even current generator whose mode is an integer-linear form in the summation
variables; variable ranges are {s >= 0} or {s in Z}.  Coefficients may be
polynomial in the summation variables (internal symbols @0, @1, ...).

Canonicalization straightens factors into a fixed within-atom order (bracket
corrections tracked exactly, Kronecker deltas on modes resolved against the
ranges), normalizes variable labels/signs/shifts, and merges like atoms.
Summands left constant along an infinite range are divergent: they are kept
as first-class flagged data and must cancel before an expression counts as a
verified result.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

from .current import AlgElement, Ambient, AmbientError, GenSymbol, normal_order
from .scalar import ONE, ParamScalar, ZERO, symbol

NAT = "nat"  # s >= 0
INT = "int"  # s in Z

_VAR_NAMES = ("s", "w", "y")


class UnsupportedShapeError(ValueError):
    pass


class DivergenceError(ValueError):
    def __init__(self, msg, atom=None):
        super().__init__(msg)
        self.atom = atom


def _vsym(v: int) -> ParamScalar:
    return symbol(f"@{v}")


class LinForm(NamedTuple):
    """Integer-linear form  sum_i coeffs[i]*var_i + const."""

    coeffs: tuple[int, ...]
    const: int

    @staticmethod
    def constant(c: int, nvars: int = 0) -> "LinForm":
        return LinForm((0,) * nvars, c)

    @staticmethod
    def var(v: int, nvars: int, const: int = 0, sign: int = 1) -> "LinForm":
        cs = [0] * nvars
        cs[v] = sign
        return LinForm(tuple(cs), const)

    def plus(self, other: "LinForm") -> "LinForm":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return LinForm(tuple(x + y for x, y in zip(a, b)), self.const + other.const)

    def is_const(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def depends_on(self, v: int) -> bool:
        return v < len(self.coeffs) and self.coeffs[v] != 0

    def shift(self, v: int, t: int) -> "LinForm":
        # substitute var_v -> var_v + t
        if not self.depends_on(v):
            return self
        return LinForm(self.coeffs, self.const + self.coeffs[v] * t)

    def subst(self, v: int, expr: "LinForm") -> "LinForm":
        """Substitute var_v -> expr (expr given over the same variable list)."""
        if not self.depends_on(v):
            return self
        a = self.coeffs[v]
        cs = list(self.coeffs)
        cs[v] = 0
        base = LinForm(tuple(cs), self.const)
        scaled = LinForm(tuple(a * c for c in expr.coeffs), a * expr.const)
        return base.plus(scaled)

    def relabel(self, perm: tuple[int, ...], signs: tuple[int, ...]) -> "LinForm":
        # old var i becomes sign[i] * new var perm[i]
        cs = [0] * len(perm)
        for i, c in enumerate(self.coeffs):
            if c:
                if i >= len(perm):
                    raise UnsupportedShapeError("stale variable in linear form")
                cs[perm[i]] += c * signs[i]
        return LinForm(tuple(cs), self.const)

    def drop_var(self, v: int) -> "LinForm":
        cs = self.coeffs[:v] + self.coeffs[v + 1:]
        return LinForm(cs, self.const)

    def to_scalar(self) -> ParamScalar:
        out = ParamScalar.from_int(self.const)
        for i, c in enumerate(self.coeffs):
            if c:
                out = out + c * _vsym(i)
        return out

    def evaluate(self, values) -> int:
        return self.const + sum(c * v for c, v in zip(self.coeffs, values))

    def pretty(self) -> str:
        parts = []
        for i, c in enumerate(self.coeffs):
            if not c:
                continue
            name = _VAR_NAMES[i] if i < len(_VAR_NAMES) else f"v{i}"
            if c == 1:
                parts.append(f"+{name}")
            elif c == -1:
                parts.append(f"-{name}")
            else:
                parts.append(f"{c:+d}*{name}")
        if self.const or not parts:
            parts.append(f"{self.const:+d}")
        s = "".join(parts)
        return s[1:] if s.startswith("+") else s


class AtomFactor(NamedTuple):
    slot: int
    i: int
    j: int
    mode: LinForm

    def key(self):
        return (self.slot, self.mode.coeffs, self.mode.const, self.i, self.j)

    def pretty(self) -> str:
        return f"E[r={self.slot};{self.i},{self.j};m={self.mode.pretty()}]"


def _coeff_subst_var(coeff: ParamScalar, v: int, value) -> ParamScalar:
    name = f"@{v}"
    if name not in coeff.symbols():
        return coeff
    if isinstance(value, LinForm):
        value = value.to_scalar()
    elif isinstance(value, int):
        value = ParamScalar.from_int(value)
    return coeff.substitute({name: value})


def _coeff_relabel(coeff: ParamScalar, perm, signs) -> ParamScalar:
    syms = coeff.symbols()
    sub = {}
    for i, p in enumerate(perm):
        if f"@{i}" in syms:
            sub[f"@{i}"] = signs[i] * symbol(f"@@{p}")
    if not sub:
        return coeff
    out = coeff.substitute(sub)
    back = {f"@@{p}": _vsym(p) for p in range(len(perm)) if f"@@{p}" in out.symbols()}
    return out.substitute(back) if back else out


def _coeff_drop_var(coeff: ParamScalar, v: int, nvars: int) -> ParamScalar:
    # renumber @w for w > v down by one
    syms = coeff.symbols()
    sub = {}
    for w in range(v + 1, nvars):
        if f"@{w}" in syms:
            sub[f"@{w}"] = symbol(f"@@{w - 1}")
    out = coeff.substitute(sub) if sub else coeff
    back = {f"@@{w}": _vsym(w) for w in range(nvars - 1) if f"@@{w}" in out.symbols()}
    return out.substitute(back) if back else out


class Atom(NamedTuple):
    ranges: tuple[str, ...]
    factors: tuple[AtomFactor, ...]

    def pretty(self, coeff: ParamScalar | None = None) -> str:
        heads = []
        for i, r in enumerate(self.ranges):
            name = _VAR_NAMES[i] if i < len(_VAR_NAMES) else f"v{i}"
            heads.append(f"sum{{{name}>=0}}" if r == NAT else f"sum{{{name} in Z}}")
        body = " * ".join(f.pretty() for f in self.factors) or "1"
        prefix = f"({coeff})*" if coeff is not None else ""
        return prefix + " ".join(heads) + " " + body


def _serialize(ranges, factors, coeff):
    return (ranges, tuple((f.slot, f.i, f.j, f.mode.coeffs, f.mode.const) for f in factors),
            str(coeff))


# ---------------------------------------------------------------------------
# atom normalization
# ---------------------------------------------------------------------------

def _pattern_bracket(x: AtomFactor, y: AtomFactor, ambient: Ambient):
    """[x, y] for two atom factors: list of (factor-or-None, coeff, delta).

    `delta` is None (no constraint) or a LinForm that must vanish for the
    term to contribute (the mode Kronecker delta of the central terms).
    """
    if x.slot != y.slot:
        return []
    out = []
    msum = x.mode.plus(y.mode)
    if x.j == y.i:
        out.append((AtomFactor(x.slot, x.i, y.j, msum), ONE, None))
    if x.i == y.j:
        out.append((AtomFactor(x.slot, y.i, x.j, msum), -ONE, None))
    central_pair = ZERO
    if x.j == y.i and x.i == y.j:
        central_pair = central_pair + ambient.central_for(x.slot, x.i)
    if x.i == x.j and y.i == y.j:
        central_pair = central_pair + 1  # z = 1
    if not central_pair.is_zero():
        out.append((None, x.mode.to_scalar() * central_pair, msum))
    return out


def _solve_delta(ranges, caps, factors, coeff, constraint: LinForm):
    """Resolve `constraint == 0` against the ranges.

    Returns a list of (ranges, caps, factors, coeff) with one variable
    eliminated (and others possibly shifted or expanded to honour a nat
    range)."""
    from math import ceil, floor, gcd

    live = [v for v, c in enumerate(constraint.coeffs) if c]
    if not live:
        return [(ranges, caps, factors, coeff)] if constraint.const == 0 else []
    g = 0
    for v in live:
        g = gcd(g, abs(constraint.coeffs[v]))
    if constraint.const % g:
        return []
    constraint = LinForm(tuple(c // g for c in constraint.coeffs), constraint.const // g)
    live = [v for v, c in enumerate(constraint.coeffs) if c]
    unit = [v for v in live if abs(constraint.coeffs[v]) == 1]
    if not unit:
        raise UnsupportedShapeError(
            f"cannot solve mode constraint {constraint.pretty()} over the supported class")
    int_unit = [v for v in unit if ranges[v] == INT]
    v = int_unit[-1] if int_unit else unit[-1]
    a = constraint.coeffs[v]
    rest = LinForm(tuple(0 if i == v else c for i, c in enumerate(constraint.coeffs)),
                   constraint.const)
    expr = LinForm(tuple(-c * a for c in rest.coeffs), -rest.const * a)
    nv = len(ranges)
    if ranges[v] == INT or (expr.is_const() and expr.const >= 0):
        r2, f2, c2 = _eliminate_var(ranges, factors, coeff, v, expr)
        caps2 = _caps_drop(_caps_subst(caps, v, expr, nv), v, nv)
        return [(r2, caps2, f2, c2)]
    if expr.is_const():
        return []  # nat variable forced negative
    live_u = [u for u, c in enumerate(expr.coeffs) if c]
    if len(live_u) != 1 or abs(expr.coeffs[live_u[0]]) != 1 or ranges[live_u[0]] != NAT:
        raise UnsupportedShapeError(
            f"range constraint {expr.pretty()} >= 0 outside the supported class")
    u = live_u[0]
    au, bu = expr.coeffs[u], expr.const
    out = []
    if au > 0:
        lo = max(0, ceil(-bu / au))
        f2, c2, e2, caps2 = factors, coeff, expr, caps
        if lo:
            sub = LinForm.var(u, nv, const=lo)
            f2 = tuple(f._replace(mode=f.mode.subst(u, sub)) for f in factors)
            c2 = _coeff_subst_var(coeff, u, sub)
            e2 = expr.subst(u, sub)
            caps2 = _caps_shift(caps, u, lo, nv)
        r3, f3, c3 = _eliminate_var(ranges, f2, c2, v, e2)
        caps3 = _caps_drop(_caps_subst(caps2, v, e2, nv), v, nv)
        out.append((r3, caps3, f3, c3))
    else:
        hi = floor(bu / (-au))
        for val in range(0, hi + 1):
            sub = LinForm.constant(val, nv)
            f2 = tuple(f._replace(mode=f.mode.subst(u, sub)) for f in factors)
            c2 = _coeff_subst_var(coeff, u, val)
            e2 = expr.subst(u, sub)
            r3, f3, c3 = _eliminate_var(ranges, f2, c2, v, e2)
            caps3 = _caps_drop(_caps_subst(caps, v, e2, nv), v, nv)
            u3 = u - 1 if u > v else u
            r4, f4, c4 = _eliminate_var(r3, f3, c3, u3,
                                        LinForm.constant(val, len(r3)))
            caps4 = _caps_drop(_caps_subst(caps3, u3, LinForm.constant(val, len(r3)),
                                           len(r3)), u3, len(r3))
            out.append((r4, caps4, f4, c4))
    return out


def _eliminate_var(ranges, factors, coeff, v, expr: LinForm):
    factors = tuple(f._replace(mode=f.mode.subst(v, expr)) for f in factors)
    coeff = _coeff_subst_var(coeff, v, expr)
    ranges2 = ranges[:v] + ranges[v + 1:]
    factors2 = tuple(f._replace(mode=f.mode.drop_var(v)) for f in factors)
    coeff2 = _coeff_drop_var(coeff, v, len(ranges))
    return (ranges2, factors2, coeff2)


def _choose_shift(a: int, b: int) -> int:
    """t with b + a*t in [0, |a|)."""
    r = b % abs(a)
    return (r - b) // a


def _falling_sums(k: int):
    """Coefficients of sum_{j=0}^{T} j^k as a polynomial in T (Fractions)."""
    from fractions import Fraction

    table = {
        0: [1, 1],
        1: [0, Fraction(1, 2), Fraction(1, 2)],
        2: [0, Fraction(1, 6), Fraction(1, 2), Fraction(1, 3)],
        3: [0, 0, Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)],
        4: [0, Fraction(-1, 30), 0, Fraction(1, 3), Fraction(1, 2), Fraction(1, 5)],
        5: [0, 0, Fraction(-1, 12), 0, Fraction(5, 12), Fraction(1, 2), Fraction(1, 6)],
        6: [0, Fraction(1, 42), 0, Fraction(-1, 6), 0, Fraction(1, 2),
            Fraction(1, 2), Fraction(1, 7)],
    }
    if k not in table:
        raise UnsupportedShapeError(f"fiber-sum power {k} too large")
    return table[k]


def _fiber_sum(coeff: ParamScalar, v_keep: int, v_drop: int, nvars: int) -> ParamScalar:
    """sum_{j=0}^{T} coeff(sigma)|_{v_keep -> T - j, v_drop -> j} as a
    polynomial in the internal symbol @v_keep standing for T."""
    from fractions import Fraction

    t = _vsym(v_keep)
    name_keep, name_drop = f"@{v_keep}", f"@{v_drop}"
    shifted = coeff
    if name_keep in shifted.symbols():
        shifted = shifted.substitute({name_keep: t - symbol("@@j")})
    if name_drop in shifted.symbols():
        shifted = shifted.substitute({name_drop: symbol("@@j")})
    deg = 0
    for mono in shifted.num:
        for s, e in mono:
            if s == "@@j":
                deg = max(deg, e)
    pts = list(range(deg + 1))
    vals = [shifted.substitute({"@@j": ParamScalar.from_int(p)}) for p in pts]
    coeffs = _newton_coeffs(pts, vals)
    out = ZERO
    for k, ck in enumerate(coeffs):
        if ck.is_zero():
            continue
        term = ZERO
        for p, cp in enumerate(_falling_sums(k)):
            if cp:
                term = term + ParamScalar.from_fraction(Fraction(cp)) * t ** p
        out = out + ck * term
    return out


def _newton_coeffs(pts, vals):
    """Monomial coefficients of the polynomial through (pts, vals)."""
    n = len(pts)
    divided = list(vals)
    for level in range(1, n):
        for idx in range(n - 1, level - 1, -1):
            divided[idx] = (divided[idx] - divided[idx - 1]) / (pts[idx] - pts[idx - level])
    # expand Newton form into monomial coefficients
    coeffs = [ZERO] * n
    basis = [ONE]  # coefficients of prod (x - pts[i])
    for level in range(n):
        for k, bc in enumerate(basis):
            coeffs[k] = coeffs[k] + divided[level] * bc
        new_basis = [ZERO] * (len(basis) + 1)
        for k, bc in enumerate(basis):
            new_basis[k] = new_basis[k] - bc * pts[level]
            new_basis[k + 1] = new_basis[k + 1] + bc
        basis = new_basis
    return coeffs


# Exact range bounds against a single formal cutoff N: a nat variable v runs
# over 0 <= v <= a*N + L, an int variable over aLo*N + LLo <= v <= aHi*N + LHi,
# with L integer-linear in the other variables.  Bounds matter only while a
# variable can still die inside the rewriting cascade; alive variables of
# emitted (normally ordered) atoms reset to the default, which changes the
# series only by boundary terms at the cutoff.

def _default_cap(kind):
    if kind == NAT:
        return ("nat", 1, LinForm((), 0))
    return ("int", -1, LinForm((), 0), 1, LinForm((), 0))


NINF = "xN"  # formal cutoff symbol (x-class keeps it out of the fixed ranks)


def _ninf() -> ParamScalar:
    return symbol(NINF)


def _coeff_has_ninf(c: ParamScalar) -> bool:
    return NINF in c.symbols()


def _split_ninf(c: ParamScalar):
    """c = finite + ninf-part (numerator monomials containing the cutoff)."""
    if not _coeff_has_ninf(c):
        return c, ZERO
    fin_num = {}
    inf_num = {}
    for mono, cc in c.num.items():
        if any(sname == NINF for sname, _ in mono):
            inf_num[mono] = cc
        else:
            fin_num[mono] = cc
    fin = ParamScalar(fin_num, dict(c.den)) if fin_num else ZERO
    inf = ParamScalar(inf_num, dict(c.den)) if inf_num else ZERO
    return fin, inf


class _Normalizer:
    def __init__(self, ambient: Ambient):
        self.ambient = ambient
        self.memo: dict = {}

    def normalize(self, ranges, factors, coeff, caps=None):
        """Full canonical decomposition of one raw atom.

        Returns (atoms, finite, divergent): dicts keyed by Atom / monomial.
        """
        coeff = self.ambient.reduce(coeff)
        if coeff.is_zero():
            return {}, {}, {}
        nv = len(ranges)
        factors = tuple(
            f if len(f.mode.coeffs) == nv else f._replace(
                mode=LinForm(f.mode.coeffs[:nv] + (0,) * (nv - len(f.mode.coeffs)),
                             f.mode.const))
            for f in factors)
        if caps is None:
            caps = tuple(_default_cap(r) for r in ranges)
        else:
            caps = tuple(_cap_pad(c, nv) for c in caps)
        if not ranges:
            finite: dict = {}
            divergent: dict = {}
            cfin, cinf = _split_ninf(coeff)
            mono = tuple(GenSymbol(f.slot, "E", f.i, f.j, f.mode.const) for f in factors)
            for m, c in normal_order(mono, self.ambient).items():
                if not cfin.is_zero():
                    nc = finite.get(m, ZERO) + c * cfin
                    if nc.is_zero():
                        finite.pop(m, None)
                    else:
                        finite[m] = nc
                if not cinf.is_zero():
                    key = Atom((), _mono_to_factors(m))
                    nc = divergent.get(key, ZERO) + c * cinf
                    if nc.is_zero():
                        divergent.pop(key, None)
                    else:
                        divergent[key] = nc
            return {}, finite, divergent
        has_vars = any(f"@{v}" in coeff.symbols() for v in range(nv))
        key = None
        if not has_vars and not _coeff_has_ninf(coeff):
            key = (ranges, tuple(factors), _caps_key(caps))
            hit = self.memo.get(key)
            if hit is not None:
                return _scale_result(hit, coeff)
        result = self._normalize_inner(ranges, caps, tuple(factors),
                                       coeff if key is None else ONE)
        if key is not None:
            self.memo[key] = result
            return _scale_result(result, coeff)
        return _scale_result(result, ONE)

    def _normalize_inner(self, ranges, caps, factors, coeff):
        best = None
        nv = len(ranges)
        int_vars = [v for v in range(nv) if ranges[v] == INT]
        for perm in itertools.permutations(range(nv)):
            for flips in itertools.product(*[(1, -1) if v in int_vars else (1,)
                                             for v in range(nv)]):
                cand = self._candidate(ranges, caps, factors, coeff, perm, flips)
                if best is None or cand[0] < best[0]:
                    best = cand
        _, catoms, cfinite, cdiv = best
        return dict(catoms), dict(cfinite), dict(cdiv)

    def _candidate(self, ranges, caps, factors, coeff, perm, flips):
        nv = len(ranges)
        nr = [None] * nv
        nc = [None] * nv
        for i, p in enumerate(perm):
            nr[p] = ranges[i]
            cap = caps[i]
            cap = _cap_relabel(cap, perm, flips)
            if flips[i] < 0 and cap[0] == "int":
                cap = ("int", -cap[3], _lin_neg(cap[4]), -cap[1], _lin_neg(cap[2]))
            nc[p] = cap
        nranges = tuple(nr)
        ncaps = tuple(nc)
        nfactors = tuple(f._replace(mode=f.mode.relabel(perm, flips)) for f in factors)
        ncoeff = _coeff_relabel(coeff, perm, flips)
        atoms: dict = {}
        finite: dict = {}
        divergent: dict = {}
        self._straighten(nranges, ncaps, nfactors, ncoeff, atoms, finite, divergent)
        ser = tuple(sorted(
            [_serialize(a.ranges, a.factors, c) for a, c in atoms.items()]
            + [_serialize(a.ranges, a.factors, c) for a, c in divergent.items()]
            + [(("#",), tuple(g for g in m), str(c)) for m, c in finite.items()]
        ))
        return ser, atoms, finite, divergent

    def _straighten(self, ranges, caps, factors, coeff, atoms, finite, divergent):
        """Sort factors (slot-major, then mode form) emitting corrections."""
        if coeff.is_zero():
            return
        fs = list(factors)
        changed = True
        while changed:
            changed = False
            for idx in range(len(fs) - 1):
                x, y = fs[idx], fs[idx + 1]
                if x.key() > y.key():
                    for g, mult, delta in _pattern_bracket(x, y, self.ambient):
                        nfs = tuple(fs[:idx]) + ((g,) if g is not None else ()) + tuple(fs[idx + 2:])
                        ncoeff = coeff * mult
                        if delta is None:
                            self._resolve_and_recurse(ranges, caps, nfs, ncoeff,
                                                      atoms, finite, divergent)
                        else:
                            for r2, c2, f2, cf2 in _solve_delta(ranges, caps, nfs,
                                                                ncoeff, delta):
                                self._resolve_and_recurse(r2, c2, f2, cf2,
                                                          atoms, finite, divergent)
                    fs[idx], fs[idx + 1] = y, x
                    changed = True
        self._emit(ranges, caps, tuple(fs), coeff, atoms, finite, divergent)

    def _resolve_and_recurse(self, ranges, caps, factors, coeff, atoms, finite,
                             divergent):
        a2, f2, d2 = self.normalize(ranges, factors, coeff, caps=caps)
        _merge_dict(atoms, a2)
        _merge_dict(finite, f2)
        _merge_dict(divergent, d2)

    def _emit(self, ranges, caps, factors, coeff, atoms, finite, divergent):
        """Domain-normalize a sorted atom (quadrant splits, shears, diagonal
        collapses, dead-variable counts, variable shifts) and emit it."""
        if coeff.is_zero():
            return
        if not ranges:
            self._resolve_and_recurse(ranges, caps, factors, coeff, atoms, finite,
                                      divergent)
            return
        nv = len(ranges)
        # (0) dead variables: extract the exact lattice count into the coeff
        for v in range(nv):
            if any(f.mode.depends_on(v) for f in factors):
                continue
            cap = caps[v]
            if cap[0] == "nat":
                count = cap[1] * _ninf() + cap[2].to_scalar() + 1
            else:
                count = (cap[3] - cap[1]) * _ninf() + (cap[4].to_scalar()
                                                       - cap[2].to_scalar()) + 1
            r2, f2, c2 = _eliminate_var(ranges, factors, coeff * count, v,
                                        LinForm.constant(0, nv))
            caps2 = _caps_drop(caps, v, nv)
            self._resolve_and_recurse(r2, caps2, f2, c2, atoms, finite, divergent)
            return
        # (1) split quadrants on mixed-sign forms over two nat variables
        for f in factors:
            pos = [v for v, c in enumerate(f.mode.coeffs) if c > 0 and ranges[v] == NAT]
            neg = [v for v, c in enumerate(f.mode.coeffs) if c < 0 and ranges[v] == NAT]
            if pos and neg:
                vp, vn = pos[0], neg[0]
                if abs(f.mode.coeffs[vp]) != 1 or abs(f.mode.coeffs[vn]) != 1:
                    raise UnsupportedShapeError(
                        f"mixed quadrant form {f.mode.pretty()} outside the supported class")
                # region 1: v_pos = v_neg + u, u in [0, capP - v_neg]
                sub1 = LinForm.var(vn, nv).plus(LinForm.var(vp, nv))
                f1 = tuple(x._replace(mode=x.mode.subst(vp, sub1)) for x in factors)
                c1 = _coeff_subst_var(coeff, vp, sub1)
                caps1 = list(_caps_subst(caps, vp, sub1, nv))
                capP = caps1[vp]
                caps1[vp] = ("nat", capP[1], capP[2].plus(_lin_neg(LinForm.var(vn, nv))))
                self._resolve_and_recurse(ranges, tuple(caps1), f1, c1, atoms,
                                          finite, divergent)
                # region 2: v_neg = v_pos + 1 + u, u in [0, capN - v_pos - 1]
                sub2 = LinForm.var(vp, nv).plus(LinForm.var(vn, nv)).plus(
                    LinForm.constant(1, nv))
                f2 = tuple(x._replace(mode=x.mode.subst(vn, sub2)) for x in factors)
                c2 = _coeff_subst_var(coeff, vn, sub2)
                caps2 = list(_caps_subst(caps, vn, sub2, nv))
                capN = caps2[vn]
                caps2[vn] = ("nat", capN[1], capN[2].plus(
                    _lin_neg(LinForm.var(vp, nv, const=1))))
                self._resolve_and_recurse(ranges, tuple(caps2), f2, c2, atoms,
                                          finite, divergent)
                return
        # (2) shear int variables so the first factor depending on each one
        # carries it purely
        for v in range(nv):
            if ranges[v] != INT:
                continue
            anchor = next((f for f in factors if f.mode.depends_on(v)), None)
            if anchor is None:
                continue
            others = [(u, c) for u, c in enumerate(anchor.mode.coeffs) if c and u != v]
            if not others:
                continue
            av = anchor.mode.coeffs[v]
            if abs(av) != 1:
                raise UnsupportedShapeError("strided shear outside the supported class")
            cs = [0] * nv
            cs[v] = 1
            for u, cu in others:
                cs[u] = -av * cu
            sub = LinForm(tuple(cs), 0)
            f2 = tuple(x._replace(mode=x.mode.subst(v, sub)) for x in factors)
            c2 = _coeff_subst_var(coeff, v, sub)
            caps2 = _caps_subst(caps, v, sub, nv)
            self._resolve_and_recurse(ranges, caps2, f2, c2, atoms, finite, divergent)
            return
        # (3) collapse invariant lattice directions
        if nv >= 2:
            for vp in range(nv):
                for vn in range(nv):
                    if vp == vn:
                        continue
                    if all(f.mode.coeffs[vp] == f.mode.coeffs[vn] for f in factors):
                        if ranges[vp] == NAT and ranges[vn] == NAT:
                            newc = _fiber_sum(coeff, vp, vn, nv)
                            f2 = tuple(x._replace(mode=x.mode.subst(
                                vn, LinForm.constant(0, nv))) for x in factors)
                            r2, f2, c2 = _eliminate_var(ranges, f2, newc, vn,
                                                        LinForm.constant(0, nv))
                            capsum = _caps_plus(caps[vp], caps[vn])
                            caps2 = list(_caps_drop(caps, vn, nv))
                            caps2[vp if vp < vn else vp - 1] = capsum
                            self._resolve_and_recurse(r2, tuple(caps2), f2, c2,
                                                      atoms, finite, divergent)
                            return
                        # fibers along an int variable are infinite
                        key = Atom(ranges, factors)
                        cur = divergent.get(key, ZERO) + coeff
                        if cur.is_zero():
                            divergent.pop(key, None)
                        else:
                            divergent[key] = cur
                        return
        # (4) shift-normalize each variable
        for v in range(nv):
            anchor = next(f for f in factors if f.mode.depends_on(v))
            a = anchor.mode.coeffs[v]
            b = anchor.mode.const
            t = _choose_shift(a, b)
            if t == 0:
                continue
            if ranges[v] == INT:
                factors = tuple(f._replace(mode=f.mode.shift(v, t)) for f in factors)
                coeff = _coeff_subst_var(coeff, v, LinForm.var(v, nv, const=t))
                caps = _caps_shift(caps, v, t, nv)
            else:
                shifted = tuple(f._replace(mode=f.mode.shift(v, t)) for f in factors)
                scoeff = _coeff_subst_var(coeff, v, LinForm.var(v, nv, const=t))
                if t > 0:
                    rng = range(-t, 0)
                    sign = ONE
                else:
                    rng = range(0, -t)
                    sign = -ONE
                for val in rng:
                    bfact = tuple(f._replace(mode=f.mode.subst(
                        v, LinForm.constant(val, nv))) for f in shifted)
                    bcoeff = _coeff_subst_var(scoeff, v, val) * sign
                    r2, f2, c2 = _eliminate_var(ranges, bfact, bcoeff, v,
                                                LinForm.constant(val, nv))
                    caps2 = _caps_drop(caps, v, nv)
                    self._resolve_and_recurse(r2, caps2, f2, c2, atoms, finite,
                                              divergent)
                factors, coeff = shifted, scoeff
                caps = _caps_shift(caps, v, t, nv)
        # (5) emit with reset bounds; residual cutoff dependence is divergent
        cfin, cinf = _split_ninf(coeff)
        key = Atom(ranges, factors)
        if not cfin.is_zero():
            cur = atoms.get(key, ZERO) + cfin
            if cur.is_zero():
                atoms.pop(key, None)
            else:
                atoms[key] = cur
        if not cinf.is_zero():
            cur = divergent.get(key, ZERO) + cinf
            if cur.is_zero():
                divergent.pop(key, None)
            else:
                divergent[key] = cur


def _lin_neg(L: LinForm) -> LinForm:
    return LinForm(tuple(-c for c in L.coeffs), -L.const)


def _caps_key(caps):
    out = []
    for cap in caps:
        if cap[0] == "nat":
            out.append(("nat", cap[1], cap[2].coeffs, cap[2].const))
        else:
            out.append(("int", cap[1], cap[2].coeffs, cap[2].const,
                        cap[3], cap[4].coeffs, cap[4].const))
    return tuple(out)


def _lin_pad(L: LinForm, nv: int) -> LinForm:
    if len(L.coeffs) == nv:
        return L
    if len(L.coeffs) < nv:
        return LinForm(L.coeffs + (0,) * (nv - len(L.coeffs)), L.const)
    if any(L.coeffs[nv:]):
        raise UnsupportedShapeError("stale variable in range bound")
    return LinForm(L.coeffs[:nv], L.const)


def _cap_pad(cap, nv):
    if cap[0] == "nat":
        return ("nat", cap[1], _lin_pad(cap[2], nv))
    return ("int", cap[1], _lin_pad(cap[2], nv), cap[3], _lin_pad(cap[4], nv))


def _cap_relabel(cap, perm, flips):
    if cap[0] == "nat":
        return ("nat", cap[1], cap[2].relabel(perm, flips))
    return ("int", cap[1], cap[2].relabel(perm, flips),
            cap[3], cap[4].relabel(perm, flips))


def _caps_subst(caps, v, sub: LinForm, nv):
    out = []
    for cap in caps:
        if cap[0] == "nat":
            out.append(("nat", cap[1], cap[2].subst(v, sub)))
        else:
            out.append(("int", cap[1], cap[2].subst(v, sub),
                        cap[3], cap[4].subst(v, sub)))
    return tuple(out)


def _caps_shift(caps, v, t, nv):
    # variable v reparametrized v -> v + t: bounds referencing v shift via
    # subst; v's own bounds move by -t
    sub = LinForm.var(v, nv, const=t)
    out = list(_caps_subst(caps, v, sub, nv))
    cap = out[v]
    if cap[0] == "nat":
        out[v] = ("nat", cap[1], LinForm(cap[2].coeffs, cap[2].const - t))
    else:
        out[v] = ("int", cap[1], LinForm(cap[2].coeffs, cap[2].const - t),
                  cap[3], LinForm(cap[4].coeffs, cap[4].const - t))
    return tuple(out)


def _caps_drop(caps, v, nv):
    out = []
    for i, cap in enumerate(caps):
        if i == v:
            continue
        if cap[0] == "nat":
            out.append(("nat", cap[1], cap[2].drop_var(v)))
        else:
            out.append(("int", cap[1], cap[2].drop_var(v), cap[3], cap[4].drop_var(v)))
    return tuple(out)


def _caps_plus(c1, c2):
    return ("nat", c1[1] + c2[1], c1[2].plus(c2[2]))


def _scale_result(result, coeff):
    atoms, finite, divergent = result
    if coeff.is_one():
        return dict(atoms), dict(finite), dict(divergent)
    return (
        {k: v * coeff for k, v in atoms.items()},
        {k: v * coeff for k, v in finite.items()},
        {k: v * coeff for k, v in divergent.items()},
    )


def _merge_dict(dst, src):
    for k, v in src.items():
        cur = dst.get(k, ZERO) + v
        if cur.is_zero():
            dst.pop(k, None)
        else:
            dst[k] = cur


def _normalizer(ambient: Ambient) -> _Normalizer:
    nz = getattr(ambient, "_ms_normalizer", None)
    if nz is None:
        nz = _Normalizer(ambient)
        ambient._ms_normalizer = nz
    return nz


# ---------------------------------------------------------------------------
# SumExpression
# ---------------------------------------------------------------------------

class SumExpression:
    __slots__ = ("ambient", "finite", "atoms", "divergent")

    def __init__(self, ambient: Ambient, finite=None, atoms=None, divergent=None):
        self.ambient = ambient
        self.finite: dict = finite or {}
        self.atoms: dict = atoms or {}
        self.divergent: dict = divergent or {}

    # -- constructors -----------------------------------------------------------

    @staticmethod
    def zero(ambient: Ambient) -> "SumExpression":
        return SumExpression(ambient)

    @staticmethod
    def from_elem(elem: AlgElement) -> "SumExpression":
        out = SumExpression(elem.ambient)
        for m, c in elem.terms.items():
            c = elem.ambient.reduce(c)
            if not c.is_zero():
                out.finite[m] = c
        return out

    @staticmethod
    def atom(ambient: Ambient, ranges, factors, coeff=ONE) -> "SumExpression":
        """Build from one raw atom; canonicalizes immediately."""
        if len(factors) > 4:
            raise UnsupportedShapeError("atoms support at most 4 generator factors")
        a, f, d = _normalizer(ambient).normalize(tuple(ranges), tuple(factors), coeff)
        return SumExpression(ambient, f, a, d)

    def clone(self) -> "SumExpression":
        return SumExpression(self.ambient, dict(self.finite), dict(self.atoms),
                             dict(self.divergent))

    # -- ring operations -----------------------------------------------------------

    def __add__(self, other: "SumExpression") -> "SumExpression":
        self.ambient.check_same(other.ambient)
        out = self.clone()
        _merge_dict(out.finite, other.finite)
        _merge_dict(out.atoms, other.atoms)
        _merge_dict(out.divergent, other.divergent)
        return out

    def __sub__(self, other: "SumExpression") -> "SumExpression":
        return self + other.scale(-ONE)

    def __neg__(self) -> "SumExpression":
        return self.scale(-ONE)

    def scale(self, coeff) -> "SumExpression":
        if not isinstance(coeff, ParamScalar):
            coeff = ParamScalar.from_int(coeff)
        if coeff.is_zero():
            return SumExpression(self.ambient)
        return SumExpression(
            self.ambient,
            {m: c * coeff for m, c in self.finite.items()},
            {a: c * coeff for a, c in self.atoms.items()},
            {a: c * coeff for a, c in self.divergent.items()},
        )

    def __mul__(self, other: "SumExpression") -> "SumExpression":
        self.ambient.check_same(other.ambient)
        if self.divergent or other.divergent:
            raise DivergenceError("cannot multiply expressions with divergent parts")
        out = SumExpression(self.ambient)
        # finite x finite
        if self.finite and other.finite:
            prod = AlgElement(self.ambient, dict(self.finite)) * AlgElement(
                self.ambient, dict(other.finite))
            _merge_dict(out.finite, SumExpression.from_elem(prod).finite)
        # finite x atom and atom x finite
        for left in (True, False):
            fin = self.finite if left else other.finite
            ats = other.atoms if left else self.atoms
            for mono, c1 in fin.items():
                mf = _mono_to_factors(mono)
                for at, c2 in ats.items():
                    mff = tuple(
                        AtomFactor(f.slot, f.i, f.j,
                                   LinForm((0,) * len(at.ranges), f.mode.const))
                        for f in mf)
                    fl = (mff + at.factors) if left else (at.factors + mff)
                    if len(fl) > 4:
                        raise UnsupportedShapeError("product exceeds the 4-factor atom cap")
                    sub = SumExpression.atom(self.ambient, at.ranges, fl, c1 * c2)
                    _merge_dict(out.finite, sub.finite)
                    _merge_dict(out.atoms, sub.atoms)
                    _merge_dict(out.divergent, sub.divergent)
        # atom x atom
        for a1, c1 in self.atoms.items():
            for a2, c2 in other.atoms.items():
                n1, n2 = len(a1.ranges), len(a2.ranges)
                ranges = a1.ranges + a2.ranges
                f1 = tuple(f._replace(mode=LinForm(f.mode.coeffs + (0,) * n2, f.mode.const))
                           for f in a1.factors)
                f2 = tuple(f._replace(mode=LinForm((0,) * n1 + f.mode.coeffs, f.mode.const))
                           for f in a2.factors)
                if len(f1) + len(f2) > 4:
                    raise UnsupportedShapeError("product exceeds the 4-factor atom cap")
                c2r = _coeff_relabel(c2, tuple(range(n1, n1 + n2)), (1,) * n2) if n2 else c2
                sub = SumExpression.atom(self.ambient, ranges, f1 + f2, c1 * c2r)
                _merge_dict(out.finite, sub.finite)
                _merge_dict(out.atoms, sub.atoms)
                _merge_dict(out.divergent, sub.divergent)
        return out

    def bracket(self, other: "SumExpression") -> "SumExpression":
        return self * other - other * self

    def map_coeffs(self, fn) -> "SumExpression":
        out = SumExpression(self.ambient)
        for m, c in self.finite.items():
            nc = fn(c)
            if not nc.is_zero():
                out.finite[m] = nc
        for dst, src in ((out.atoms, self.atoms), (out.divergent, self.divergent)):
            for a, c in src.items():
                nc = fn(c)
                if not nc.is_zero():
                    dst[a] = nc
        return out

    # -- canonical form / comparison --------------------------------------------------

    def canonicalize(self) -> "SumExpression":
        """Re-run normalization (idempotent; entry point for raw data)."""
        out = SumExpression(self.ambient)
        nz = _normalizer(self.ambient)
        for m, c in self.finite.items():
            c = self.ambient.reduce(c)
            for m2, c2 in normal_order(m, self.ambient).items():
                cur = out.finite.get(m2, ZERO) + c2 * c
                if cur.is_zero():
                    out.finite.pop(m2, None)
                else:
                    out.finite[m2] = cur
        for src in (self.atoms, self.divergent):
            for at, c in src.items():
                a2, f2, d2 = nz.normalize(at.ranges, at.factors, c)
                _merge_dict(out.atoms, a2)
                _merge_dict(out.finite, f2)
                _merge_dict(out.divergent, d2)
        return out

    def is_zero(self) -> bool:
        return not self.finite and not self.atoms and not self.divergent

    def first_term(self) -> str:
        if self.divergent:
            a = min(self.divergent, key=lambda x: _serialize(x.ranges, x.factors, ""))
            return "divergent " + a.pretty(self.divergent[a])
        if self.atoms:
            a = min(self.atoms, key=lambda x: _serialize(x.ranges, x.factors, ""))
            return a.pretty(self.atoms[a])
        if self.finite:
            m = min(self.finite, key=lambda m: tuple(g.sort_key() for g in m))
            body = "*".join(g.pretty() for g in m) or "1"
            return f"({self.finite[m]})*{body}"
        return "0"

    def term_count(self) -> int:
        return len(self.finite) + len(self.atoms) + len(self.divergent)

    def degrees(self) -> set:
        degs = {sum(g.degree() for g in m) for m in self.finite}
        for a in self.atoms:
            degs.add(sum(f.mode.const for f in a.factors)
                     + 0)  # homogeneous atoms: variable parts cancel
        return degs

    def pretty(self) -> str:
        parts = []
        for m in sorted(self.finite, key=lambda m: tuple(g.sort_key() for g in m)):
            body = "*".join(g.pretty() for g in m) or "1"
            parts.append(f"({self.finite[m]})*{body}")
        for a in sorted(self.atoms, key=lambda x: _serialize(x.ranges, x.factors, "")):
            parts.append(a.pretty(self.atoms[a]))
        for a in sorted(self.divergent, key=lambda x: _serialize(x.ranges, x.factors, "")):
            parts.append("DIV " + a.pretty(self.divergent[a]))
        return " + ".join(parts) if parts else "0"

    __repr__ = pretty


def _mono_to_factors(mono):
    out = []
    for g in mono:
        if g.kind != "E":
            raise UnsupportedShapeError(
                f"only even current generators may enter mode sums ({g.pretty()})")
        out.append(AtomFactor(g.slot, g.a, g.b, LinForm((), g.mode)))
    return tuple(out)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def from_gen(ambient: Ambient, g: GenSymbol, coeff=ONE) -> SumExpression:
    return SumExpression.from_elem(AlgElement.gen(ambient, g, coeff))


def sum_commutator(expr: SumExpression, other) -> SumExpression:
    """[expr, other] with `other` a GenSymbol, AlgElement or SumExpression."""
    if isinstance(other, GenSymbol):
        other = AlgElement.gen(expr.ambient, other)
    if isinstance(other, AlgElement):
        other = SumExpression.from_elem(other)
    return expr.bracket(other)


def sq(expr: SumExpression, target: Ambient, legs=(1, 2),
       central_map=None) -> SumExpression:
    """The two-leg duplication y -> y (x) 1 + 1 (x) y of a one-leg element.

    `central_map` maps the single source central symbol per leg (the copy in
    leg r reads that leg's central charge).
    """
    slots = {f.slot for a in expr.atoms for f in a.factors}
    slots |= {g.slot for m in expr.finite for g in m}
    if len(slots) > 1:
        raise AmbientError("sq needs a single-leg expression")
    if expr.divergent:
        raise DivergenceError("sq of a divergent expression")
    out = SumExpression.zero(target)
    for leg in legs:
        def retag_f(f, leg=leg):
            return AtomFactor(leg, f.i, f.j, f.mode)

        def retag_g(g, leg=leg):
            return GenSymbol(leg, g.kind, g.a, g.b, g.mode)

        sub = central_map(leg) if central_map else None
        for m, c in expr.finite.items():
            c2 = c.substitute(sub) if sub and (c.symbols() & set(sub)) else c
            piece = SumExpression.from_elem(
                AlgElement.word(target, tuple(retag_g(g) for g in m), c2))
            out = out + piece
        for a, c in expr.atoms.items():
            c2 = c.substitute(sub) if sub and (c.symbols() & set(sub)) else c
            out = out + SumExpression.atom(target, a.ranges,
                                           tuple(retag_f(f) for f in a.factors), c2)
    return out


class Verdict(NamedTuple):
    equal: bool
    first_mismatch: str
    residual_terms: int
    oracle_checked: bool = False
    oracle_equal: bool | None = None

    def __bool__(self):
        return self.equal


def equals(e1: SumExpression, e2: SumExpression, oracle=None, depth: int = 2) -> Verdict:
    """Canonical-form comparison; optionally cross-checked on a module."""
    diff = (e1 - e2).canonicalize()
    if diff.divergent:
        raise DivergenceError(
            f"divergent residual: {diff.first_term()}",
            atom=next(iter(diff.divergent)))
    ok = diff.is_zero()
    oc, oe = False, None
    if oracle is not None:
        oc = True
        oe = oracle.expressions_agree(e1, e2, depth)
    return Verdict(ok, "0" if ok else diff.first_term(), diff.term_count(), oc, oe)
