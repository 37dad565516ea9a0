"""Exact rational functions in the formal parameters (hbar, eps, k, z, c-tags, x-tags).

Every coefficient in the engine is a ParamScalar: a reduced fraction of
multivariate integer polynomials, canonical under the degree-lexicographic
monomial order with symbol order hbar < eps < k < z < c<tag> < x<tag>.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd


# ---------------------------------------------------------------------------
# symbols and monomials
# ---------------------------------------------------------------------------

_FIXED_RANK = {"hbar": 0, "eps": 1, "k": 2, "z": 3}


@lru_cache(maxsize=None)
def _symkey(name: str) -> tuple:
    if name in _FIXED_RANK:
        return (_FIXED_RANK[name], name)
    if name.startswith("c") and name[1:].isdigit():
        return (4, len(name), name)
    if name.startswith("x"):
        return (5, len(name), name)
    if name.startswith("@"):
        # internal summation-variable symbols, ranked last
        return (7, len(name), name)
    return (6, len(name), name)


# A monomial is a tuple of (symbol, exponent) pairs, sorted by _symkey,
# all exponents positive.  The empty tuple is the constant monomial.

def _mono_mul(a, b):
    if not a:
        return b
    if not b:
        return a
    out = dict(a)
    for s, e in b:
        out[s] = out.get(s, 0) + e
    return tuple(sorted(out.items(), key=lambda p: _symkey(p[0])))


def _mono_deg(m):
    return sum(e for _, e in m)


def _mono_sortable(m):
    # deterministic total order for hashing/serialization (not deglex)
    return (_mono_deg(m), tuple((_symkey(s), e) for s, e in m))


def _mono_greater(a, b):
    da, db = _mono_deg(a), _mono_deg(b)
    if da != db:
        return da > db
    ia, ib = 0, 0
    while ia < len(a) and ib < len(b):
        ka, kb = _symkey(a[ia][0]), _symkey(b[ib][0])
        if ka != kb:
            # the earlier symbol has positive exponent only on one side
            return ka < kb
        if a[ia][1] != b[ib][1]:
            return a[ia][1] > b[ib][1]
        ia += 1
        ib += 1
    return ia < len(a)


def _mono_divides(a, b):
    """Does monomial a divide b?"""
    db = dict(b)
    return all(db.get(s, 0) >= e for s, e in a)


def _mono_div(b, a):
    out = dict(b)
    for s, e in a:
        out[s] -= e
        if out[s] == 0:
            del out[s]
    return tuple(sorted(out.items(), key=lambda p: _symkey(p[0])))


def _mono_gcd(a, b):
    db = dict(b)
    out = []
    for s, e in a:
        if s in db:
            out.append((s, min(e, db[s])))
    return tuple(sorted(out, key=lambda p: _symkey(p[0])))


# ---------------------------------------------------------------------------
# polynomials: dict monomial -> int coefficient (no zero values stored)
# ---------------------------------------------------------------------------

def _padd(a, b):
    out = dict(a)
    for m, c in b.items():
        nc = out.get(m, 0) + c
        if nc:
            out[m] = nc
        else:
            out.pop(m, None)
    return out


def _pneg(a):
    return {m: -c for m, c in a.items()}


def _pmul(a, b):
    if not a or not b:
        return {}
    if len(a) > len(b):
        a, b = b, a
    out = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = _mono_mul(ma, mb)
            nc = out.get(m, 0) + ca * cb
            if nc:
                out[m] = nc
            else:
                out.pop(m, None)
    return out


def _pscale(a, c):
    if c == 0:
        return {}
    return {m: c * v for m, v in a.items()}


def _pcontent(a):
    g = 0
    for c in a.values():
        g = gcd(g, abs(c))
        if g == 1:
            return 1
    return g


def _plead(a):
    lm = None
    for m in a:
        if lm is None or _mono_greater(m, lm):
            lm = m
    return lm


def _pmono_content(a):
    it = iter(a)
    try:
        common = next(it)
    except StopIteration:
        return ()
    for m in it:
        if not common:
            return ()
        common = _mono_gcd(common, m)
    return common


def _pdiv_mono(a, mono, c=1):
    return {_mono_div(m, mono): v // c for m, v in a.items()}


def _psymbols(a):
    out = set()
    for m in a:
        for s, _ in m:
            out.add(s)
    return out


def _pdiv_exact(a, b):
    """Exact polynomial division a / b; raises ValueError when not exact."""
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    rem = dict(a)
    out = {}
    lb = _plead(b)
    cb = b[lb]
    while rem:
        lr = _plead(rem)
        if not _mono_divides(lb, lr):
            raise ValueError("inexact polynomial division")
        q, r = divmod(rem[lr], cb)
        if r:
            raise ValueError("inexact polynomial division")
        m = _mono_div(lr, lb)
        out[m] = q
        rem = _padd(rem, _pmul({m: -q}, b))
    return out


def _as_univariate(a, var):
    """View a as a dense list of coefficient polys in the remaining symbols."""
    coeffs = {}
    deg = 0
    for m, c in a.items():
        dm = dict(m)
        e = dm.pop(var, 0)
        rest = tuple(sorted(dm.items(), key=lambda p: _symkey(p[0])))
        coeffs.setdefault(e, {})
        coeffs[e] = _padd(coeffs[e], {rest: c})
        deg = max(deg, e)
    return [coeffs.get(i, {}) for i in range(deg + 1)]


def _from_univariate(coeffs, var):
    out = {}
    for e, poly in enumerate(coeffs):
        for m, c in poly.items():
            if e:
                m = _mono_mul(m, ((var, e),))
            if c:
                out[m] = out.get(m, 0) + c
    return {m: c for m, c in out.items() if c}


def _utrim(u):
    while u and not u[-1]:
        u.pop()
    return u


def _upseudo_rem(a, b, var_ring_mul):
    """Pseudo-remainder of dense univariate polys with polynomial coeffs."""
    a = list(a)
    db, lb = len(b) - 1, b[-1]
    while len(a) - 1 >= db and _utrim(a):
        da = len(a) - 1
        la = a[-1]
        shift = da - db
        a = [var_ring_mul(c, lb) for c in a]
        sub = [{} for _ in range(shift)] + [var_ring_mul(c, la) for c in b]
        a = [_padd(x, _pneg(y)) for x, y in zip(a, sub + [{}] * (len(a) - len(sub)))]
        a = _utrim(a[: da])  # leading term cancels by construction
        if not a:
            break
    return a


def _pgcd(a, b):
    """Polynomial gcd over the integers (subresultant-free primitive PRS)."""
    if not a:
        return dict(b)
    if not b:
        return dict(a)
    syms = sorted(_psymbols(a) | _psymbols(b), key=_symkey)
    if not syms:
        return {(): gcd(a.get((), 0), b.get((), 0))}
    var = syms[-1]
    if var not in _psymbols(a) or var not in _psymbols(b):
        # gcd divides both, hence involves no symbol missing from either
        if var in _psymbols(a):
            other = b
            uni = _as_univariate(a, var)
        else:
            other = a
            uni = _as_univariate(b, var)
        g = dict(other)
        for c in uni:
            g = _pgcd(g, c)
            if g == {(): 1}:
                return g
        return g

    def content_of(u):
        g = {}
        for c in u:
            g = _pgcd(g, c)
        return g

    ua, ub = _utrim(_as_univariate(a, var)), _utrim(_as_univariate(b, var))
    ca, cb = content_of(ua), content_of(ub)
    cont = _pgcd(ca, cb)
    ua = [_pdiv_exact(c, ca) if c else {} for c in ua]
    ub = [_pdiv_exact(c, cb) if c else {} for c in ub]
    while True:
        if len(ua) < len(ub):
            ua, ub = ub, ua
        if not ub:
            g = ua
            break
        r = _upseudo_rem(ua, ub, _pmul)
        if not r:
            g = ub
            break
        cr = content_of(r)
        r = [_pdiv_exact(c, cr) if c else {} for c in r]
        ua, ub = ub, r
    gc = content_of(g)
    g = [_pdiv_exact(c, gc) if c else {} for c in g]
    res = _pmul(_from_univariate(g, var), cont)
    lead = _plead(res)
    if lead is not None and res[lead] < 0:
        res = _pneg(res)
    return res


def _pstr(a):
    if not a:
        return "0"
    parts = []
    from functools import cmp_to_key

    def _cmp(x, y):
        if x == y:
            return 0
        return -1 if _mono_greater(x, y) else 1

    for m in sorted(a, key=cmp_to_key(_cmp)):
        c = a[m]
        factors = []
        for s, e in m:
            factors.append(s if e == 1 else f"{s}^{e}")
        body = "*".join(factors)
        if not body:
            term = str(abs(c))
        elif abs(c) == 1:
            term = body
        else:
            term = f"{abs(c)}*{body}"
        parts.append(("- " if c < 0 else "+ ") + term)
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else "-" + s[2:]


# ---------------------------------------------------------------------------
# ParamScalar
# ---------------------------------------------------------------------------

class ParamScalar:
    """A reduced fraction num/den of integer polynomials; immutable."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num, den=None, _normalized=False):
        if den is None:
            den = {(): 1}
        if _normalized:
            self.num, self.den = num, den
            self._hash = None
            return
        if not den:
            raise ZeroDivisionError("zero denominator")
        if not num:
            self.num, self.den = {}, {(): 1}
            self._hash = None
            return
        ic = gcd(_pcontent(num), _pcontent(den))
        if ic > 1:
            num = {m: c // ic for m, c in num.items()}
            den = {m: c // ic for m, c in den.items()}
        mc = _mono_gcd(_pmono_content(num), _pmono_content(den))
        if mc:
            num = _pdiv_mono(num, mc)
            den = _pdiv_mono(den, mc)
        if len(den) > 1 or _plead(den) != ():
            g = _pgcd(num, den)
            if len(g) > 1 or _plead(g) != () or g.get((), 1) != 1:
                num = _pdiv_exact(num, g)
                den = _pdiv_exact(den, g)
        if den[_plead(den)] < 0:
            num, den = _pneg(num), _pneg(den)
        self.num, self.den = num, den
        self._hash = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def from_int(n: int) -> "ParamScalar":
        return _INT_CACHE.get(n) or ParamScalar({(): n} if n else {})

    @staticmethod
    def from_fraction(f: Fraction) -> "ParamScalar":
        return ParamScalar({(): f.numerator} if f.numerator else {}, {(): f.denominator})

    # -- ring/field structure -------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, ParamScalar):
            return other
        if isinstance(other, int):
            return ParamScalar.from_int(other)
        if isinstance(other, Fraction):
            return ParamScalar.from_fraction(other)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if not self.num:
            return o
        if not o.num:
            return self
        if self.den == o.den:
            return ParamScalar(_padd(self.num, o.num), dict(self.den))
        return ParamScalar(
            _padd(_pmul(self.num, o.den), _pmul(o.num, self.den)),
            _pmul(self.den, o.den),
        )

    __radd__ = __add__

    def __neg__(self):
        return ParamScalar(_pneg(self.num), dict(self.den), _normalized=True)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if not self.num or not o.num:
            return ZERO
        return ParamScalar(_pmul(self.num, o.num), _pmul(self.den, o.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if not o.num:
            raise ZeroDivisionError("division by zero scalar")
        return ParamScalar(_pmul(self.num, o.den), _pmul(self.den, o.num))

    def __rtruediv__(self, other):
        o = self._coerce(other)
        return o / self

    def __pow__(self, n: int):
        if n < 0:
            return ONE / (self ** (-n))
        out = ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- predicates / identity -------------------------------------------------

    def is_zero(self) -> bool:
        return not self.num

    def is_one(self) -> bool:
        return self.num == {(): 1} and self.den == {(): 1}

    def _key(self):
        return (
            tuple(sorted(self.num.items(), key=lambda p: _mono_sortable(p[0]))),
            tuple(sorted(self.den.items(), key=lambda p: _mono_sortable(p[0]))),
        )

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self.num == o.num and self.den == o.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    def __bool__(self):
        return bool(self.num)

    # -- symbol plumbing --------------------------------------------------------

    def symbols(self) -> set:
        return _psymbols(self.num) | _psymbols(self.den)

    def substitute(self, bindings: dict) -> "ParamScalar":
        """Simultaneous exact substitution symbol -> ParamScalar."""
        if not bindings or not (self.symbols() & set(bindings)):
            return self

        def eval_poly(p):
            total = ZERO
            for m, c in p.items():
                term = ParamScalar.from_int(c)
                for s, e in m:
                    base = bindings.get(s)
                    if base is None:
                        base = symbol(s)
                    term = term * base ** e
                total = total + term
            return total

        num_v = eval_poly(self.num)
        den_v = eval_poly(self.den)
        if den_v.is_zero():
            raise ZeroDivisionError("denominator vanishes under substitution")
        return num_v / den_v

    def evaluate(self, point: dict) -> Fraction:
        """Plain evaluation at integer/Fraction points (independent oracle)."""

        def ev(p):
            total = Fraction(0)
            for m, c in p.items():
                t = Fraction(c)
                for s, e in m:
                    t *= Fraction(point[s]) ** e
                total += t
            return total

        dv = ev(self.den)
        if dv == 0:
            raise ZeroDivisionError("denominator vanishes at evaluation point")
        return ev(self.num) / dv

    # -- printing / parsing ------------------------------------------------------

    def __str__(self):
        if self.den == {(): 1}:
            return _pstr(self.num)
        return f"({_pstr(self.num)})/({_pstr(self.den)})"

    __repr__ = __str__


_INT_CACHE = {}


def symbol(name: str) -> ParamScalar:
    cached = _SYM_CACHE.get(name)
    if cached is None:
        cached = ParamScalar({((name, 1),): 1})
        _SYM_CACHE[name] = cached
    return cached


_SYM_CACHE: dict = {}

ZERO = ParamScalar({})
ONE = ParamScalar({(): 1})
for _n in range(-8, 9):
    _INT_CACHE[_n] = ParamScalar({(): _n} if _n else {})

hbar = symbol("hbar")
eps = symbol("eps")
kk = symbol("k")
zz = symbol("z")


def csym(tag: int) -> ParamScalar:
    """Central-charge symbol for tensor slot `tag`."""
    return symbol(f"c{tag}")


def arith(a: ParamScalar, b: ParamScalar, kind: str) -> ParamScalar:
    """Field arithmetic dispatch: kind in add|mul|neg|div."""
    if kind == "add":
        return a + b
    if kind == "mul":
        return a * b
    if kind == "neg":
        return -a
    if kind == "div":
        return a / b
    raise ValueError(f"unknown arith kind {kind!r}")


# ---------------------------------------------------------------------------
# parser for the pretty-print grammar
# ---------------------------------------------------------------------------

def parse(text: str) -> ParamScalar:
    """Parse the printing grammar: integers, symbols, + - * / ^ and parens."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(("int", int(text[i:j])))
            i = j
        elif ch.isalpha() or ch in "@_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "@_"):
                j += 1
            tokens.append(("sym", text[i:j]))
            i = j
        elif ch in "+-*/^()":
            tokens.append((ch, ch))
            i += 1
        else:
            raise ValueError(f"unexpected character {ch!r} in scalar literal")
    pos = 0

    def peek():
        return tokens[pos][0] if pos < len(tokens) else None

    def take():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        return tok

    def atom():
        kind, val = take()
        if kind == "int":
            return ParamScalar.from_int(val)
        if kind == "sym":
            return symbol(val)
        if kind == "(":
            e = expr()
            if peek() != ")":
                raise ValueError("unbalanced parenthesis in scalar literal")
            take()
            return e
        if kind == "-":
            return -atom_pow()
        raise ValueError(f"unexpected token {val!r} in scalar literal")

    def atom_pow():
        base = atom()
        while peek() == "^":
            take()
            kind, val = take()
            if kind != "int":
                raise ValueError("exponent must be an integer literal")
            base = base ** val
        return base

    def term():
        out = atom_pow()
        while peek() in ("*", "/"):
            op, _ = take()
            rhs = atom_pow()
            out = out * rhs if op == "*" else out / rhs
        return out

    def expr():
        out = term()
        while peek() in ("+", "-"):
            op, _ = take()
            rhs = term()
            out = out + rhs if op == "+" else out - rhs
        return out

    result = expr()
    if pos != len(tokens):
        raise ValueError("trailing input in scalar literal")
    return result
