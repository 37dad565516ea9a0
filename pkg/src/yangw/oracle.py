"""Independent verification backend: graded vacuum modules on which every
map acts exactly.

The module is induced from the trivial representation of the non-negative
modes: the vacuum is killed by every E t^m with m >= 0, per-slot centrals act
by the ambient's central scalars and z by 1.  Vectors are finite linear
combinations of PBW monomials in strictly-negative-mode generators; the
action is computed by exact straightening, with no truncation anywhere, so
act is a genuine representation.  The cutoff D only limits which graded
pieces get enumerated as bases.
"""

from __future__ import annotations

import itertools

from .current import AlgElement, Ambient, GenSymbol, normal_order
from .modesum import SumExpression, UnsupportedShapeError
from .scalar import ONE, ParamScalar, ZERO


class OracleError(ValueError):
    pass


def _energy(mono) -> int:
    return -sum(g.mode for g in mono)


class VacuumModule:
    def __init__(self, ambient: Ambient, depth: int):
        if depth < 0:
            raise OracleError("cutoff must be >= 0")
        self.ambient = ambient
        self.depth = depth
        self._bases: dict[int, list] = {}
        self._act_cache: dict = {}

    # -- basis enumeration -----------------------------------------------------

    def _negative_generators(self, energy: int):
        out = []
        for slot in sorted(self.ambient.slots):
            size = self.ambient.slots[slot].size
            for i in range(1, size + 1):
                for j in range(1, size + 1):
                    out.append(GenSymbol(slot, "E", i, j, -energy))
        return out

    def basis(self, d: int) -> list:
        """All normal monomials in negative-mode generators of total energy d."""
        if d < 0:
            return []
        if d in self._bases:
            return self._bases[d]
        partitions = []

        def parts(rest, mx, acc):
            if rest == 0:
                partitions.append(tuple(acc))
                return
            for p in range(min(rest, mx), 0, -1):
                parts(rest - p, p, acc + [p])

        parts(d, d if d else 1, [])
        if d == 0:
            partitions = [()]
        basis = []
        for part in partitions:
            pools = []
            for energy, reps in itertools.groupby(part):
                r = len(list(reps))
                pool = self._negative_generators(energy)
                pools.append(list(itertools.combinations_with_replacement(pool, r)))
            for combo in itertools.product(*pools):
                factors = tuple(g for grp in combo for g in grp)
                mono = tuple(sorted(factors, key=lambda g: g.sort_key()))
                basis.append(mono)
        basis.sort(key=lambda m: tuple(g.sort_key() for g in m))
        self._bases[d] = basis
        return basis

    def graded_dimensions(self) -> tuple[int, ...]:
        return tuple(len(self.basis(d)) for d in range(self.depth + 1))

    def vacuum(self) -> dict:
        return {(): ONE}

    # -- action ---------------------------------------------------------------------

    def _apply_monomial(self, mono, vec: dict) -> dict:
        out: dict = {}
        for mv, cv in vec.items():
            key = (mono, mv)
            hit = self._act_cache.get(key)
            if hit is None:
                hit = {}
                for m2, c2 in normal_order(mono + mv, self.ambient).items():
                    if m2 and m2[-1].mode >= 0:
                        continue  # annihilates the vacuum
                    hit[m2] = c2
                self._act_cache[key] = hit
            for m2, c2 in hit.items():
                cur = out.get(m2, ZERO) + c2 * cv
                if cur.is_zero():
                    out.pop(m2, None)
                else:
                    out[m2] = cur
        return out

    def act_elem(self, elem: AlgElement, vec: dict) -> dict:
        out: dict = {}
        for mono, c in elem.terms.items():
            for g in mono:
                if g.kind not in ("E",):
                    raise OracleError(
                        f"cannot act with unrealized generator {g.pretty()}")
            piece = self._apply_monomial(mono, vec)
            for m2, c2 in piece.items():
                cur = out.get(m2, ZERO) + c2 * c
                if cur.is_zero():
                    out.pop(m2, None)
                else:
                    out[m2] = cur
        return out

    def _atom_assignments(self, atom, coeff, slot_energy: dict):
        """Feasible summation-variable assignments on vectors with the given
        per-slot energies.  Factors in distinct slots act on distinct tensor
        legs, so the annihilation bounds apply slot by slot."""
        nv = len(atom.ranges)
        factors = atom.factors
        constraints = []
        for slot in {f.slot for f in factors}:
            fs = [f for f in factors if f.slot == slot]
            e = slot_energy.get(slot, 0)
            for j in range(len(fs)):
                cs = [0] * nv
                const = 0
                for f in fs[j:]:
                    for v, c in enumerate(f.mode.coeffs):
                        cs[v] += c
                    const += f.mode.const
                constraints.append((tuple(cs), e - const))

        def feasible(sigma):
            return all(
                bound - sum(c * s for c, s in zip(cs, sigma)) >= 0
                for cs, bound in constraints)

        # unboundedness check along small integer directions
        dirs = [d for d in itertools.product(range(-3, 4), repeat=nv) if any(d)]
        for d in dirs:
            if any(atom.ranges[v] == "nat" and d[v] < 0 for v in range(nv)):
                continue
            if all(sum(c * dv for c, dv in zip(cs, d)) <= 0 for cs, _ in constraints):
                raise OracleError(
                    "mode-sum atom has no annihilating tail on this module: "
                    + atom.pretty(coeff))
        bound = (max(slot_energy.values(), default=0)
                 + sum(abs(f.mode.const) for f in factors) + 8)
        axes = []
        for v in range(nv):
            lo = 0 if atom.ranges[v] == "nat" else -bound
            axes.append(range(lo, bound + 1))
        hits = [s for s in itertools.product(*axes) if feasible(s)]
        for s in hits:
            if any(abs(x) >= bound for x in s):
                raise OracleError("assignment window guard tripped; enlarge bound")
        return hits

    def act_expr(self, expr: SumExpression, vec: dict) -> dict:
        if expr.divergent:
            raise OracleError("cannot act with a divergent expression")
        out = self.act_elem(AlgElement(self.ambient, dict(expr.finite)), vec)
        by_energy: dict[tuple, dict] = {}
        for mv, cv in vec.items():
            se: dict[int, int] = {}
            for g in mv:
                se[g.slot] = se.get(g.slot, 0) - g.mode
            key = tuple(sorted(se.items()))
            by_energy.setdefault(key, {})[mv] = cv
        for atom, coeff in expr.atoms.items():
            for ekey, sub in by_energy.items():
                for sigma in self._atom_assignments(atom, coeff, dict(ekey)):
                    mono = tuple(
                        GenSymbol(f.slot, "E", f.i, f.j, f.mode.evaluate(sigma))
                        for f in atom.factors)
                    c = coeff
                    if c.symbols() & {f"@{v}" for v in range(len(sigma))}:
                        c = c.substitute(
                            {f"@{v}": ParamScalar.from_int(s) for v, s in enumerate(sigma)})
                    piece = self._apply_monomial(mono, sub)
                    for m2, c2 in piece.items():
                        cur = out.get(m2, ZERO) + c2 * c
                        if cur.is_zero():
                            out.pop(m2, None)
                        else:
                            out[m2] = cur
        return out

    def act(self, expr, vec: dict) -> dict:
        if isinstance(expr, AlgElement):
            return self.act_elem(expr, vec)
        return self.act_expr(expr, vec)

    # -- matrices and comparisons ------------------------------------------------------

    def _expr_degree(self, expr) -> int:
        degs = set()
        if isinstance(expr, AlgElement):
            degs = expr.degrees()
        else:
            for m in expr.finite:
                degs.add(sum(g.degree() for g in m))
            for a in expr.atoms:
                per_var = [0] * len(a.ranges)
                const = 0
                for f in a.factors:
                    const += f.mode.const
                    for v, c in enumerate(f.mode.coeffs):
                        per_var[v] += c
                if any(per_var):
                    raise OracleError("inhomogeneous mode-sum atom")
                degs.add(const)
        if len(degs) > 1:
            raise OracleError(f"element is not degree-homogeneous: {sorted(degs)}")
        return degs.pop() if degs else 0

    def operator_matrix(self, expr, d: int):
        """Matrix of the action from the degree-d piece, rows indexed by the
        degree-(d - deg) piece."""
        s = self._expr_degree(expr)
        if not (0 <= d <= self.depth):
            raise OracleError(f"degree {d} out of range 0..{self.depth}")
        dout = d - s
        if dout < 0 or dout > self.depth:
            raise OracleError(f"target degree {dout} out of range 0..{self.depth}")
        cols = self.basis(d)
        rows = self.basis(dout)
        index = {m: i for i, m in enumerate(rows)}
        mat = [[ZERO for _ in cols] for _ in rows]
        for cix, mono in enumerate(cols):
            img = self.act(expr, {mono: ONE})
            for m2, c2 in img.items():
                if m2 not in index:
                    raise OracleError("action left the expected graded piece")
                mat[index[m2]][cix] = c2
        return mat

    def is_zero_operator(self, expr, depth: int | None = None) -> bool:
        depth = self.depth if depth is None else min(depth, self.depth)
        for d in range(depth + 1):
            for mono in self.basis(d):
                if self.act(expr, {mono: ONE}):
                    return False
        return True

    def expressions_agree(self, e1, e2, depth: int | None = None) -> bool:
        depth = self.depth if depth is None else min(depth, self.depth)
        for d in range(depth + 1):
            for mono in self.basis(d):
                v = {mono: ONE}
                if self.act(e1, v) != self.act(e2, v):
                    return False
        return True


def matrix_is_zero(mat) -> bool:
    return all(c.is_zero() for row in mat for c in row)


def format_matrix(mat) -> str:
    if not mat:
        return "(empty)"
    cells = [[str(c) for c in row] for row in mat]
    width = max(len(s) for row in cells for s in row)
    return "\n".join("  ".join(s.rjust(width) for s in row) for row in cells)
