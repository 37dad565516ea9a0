"""Block-shape combinatorics: the composition q_1 >= ... >= q_l, column/row
coordinates, hat/tilde shifts, the nilpotent f, and the scalar families
alpha_v, gamma_a and the evaluation shifts a_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .scalar import ParamScalar, ZERO, hbar, kk


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class BlockShape:
    q: tuple[int, ...]
    l: int = field(init=False)
    N: int = field(init=False)

    def __post_init__(self):
        q = self.q
        if not q:
            raise ShapeError("empty composition")
        if any(x < 1 for x in q):
            raise ShapeError("block sizes must be >= 1")
        if any(q[i] < q[i + 1] for i in range(len(q) - 1)):
            raise ShapeError(f"composition must be weakly decreasing: {q}")
        object.__setattr__(self, "l", len(q))
        object.__setattr__(self, "N", sum(q))
        cols, rows = [0], [0]  # 1-based; index 0 unused
        for c, qc in enumerate(q, start=1):
            for r in range(1, qc + 1):
                cols.append(c)
                rows.append(r)
        object.__setattr__(self, "_col", tuple(cols))
        object.__setattr__(self, "_row", tuple(rows))
        # index of (col, row) pairs for the inverse lookup
        offs = [0]
        for qc in q:
            offs.append(offs[-1] + qc)
        object.__setattr__(self, "_off", tuple(offs))

    # -- coordinates ---------------------------------------------------------

    def col(self, i: int) -> int:
        self._check(i)
        return self._col[i]

    def row(self, i: int) -> int:
        self._check(i)
        return self._row[i]

    def index(self, c: int, r: int) -> int | None:
        """The index with column c and row r, or None when absent."""
        if not (1 <= c <= self.l) or not (1 <= r <= self.q[c - 1]):
            return None
        return self._off[c - 1] + r

    def hat(self, i: int) -> int | None:
        """Same row, next column; None when that block has no such row."""
        self._check(i)
        return self.index(self._col[i] + 1, self._row[i])

    def tilde(self, j: int) -> int | None:
        """Same row, previous column; None in the first column."""
        self._check(j)
        return self.index(self._col[j] - 1, self._row[j])

    def _check(self, i: int):
        if not (1 <= i <= self.N):
            raise ShapeError(f"index {i} out of range 1..{self.N}")

    # -- nilpotent and gradings ------------------------------------------------

    def nilpotent_f(self) -> list[tuple[int, int]]:
        """The matrix-unit support of f: pairs (hat(j), j) where hat exists."""
        out = []
        for j in range(1, self.N + 1):
            h = self.hat(j)
            if h is not None:
                out.append((h, j))
        return out

    def degree(self, i: int, j: int) -> int:
        """Column grading of the matrix unit e_{i,j}."""
        return self.col(j) - self.col(i)

    # -- scalar families ---------------------------------------------------------

    def alpha(self, v: int) -> ParamScalar:
        """k + N - q_v."""
        if not (1 <= v <= self.l):
            raise ShapeError(f"alpha index {v} out of range 1..{self.l}")
        return kk + (self.N - self.q[v - 1])

    def gamma(self, a: int) -> ParamScalar:
        """Sum of alpha_u for u = a+1 .. l; gamma(l) = 0."""
        if not (1 <= a <= self.l):
            raise ShapeError(f"gamma index {a} out of range 1..{self.l}")
        out = ZERO
        for u in range(a + 1, self.l + 1):
            out = out + self.alpha(u)
        return out

    def shift_a(self, i: int) -> ParamScalar:
        """Evaluation shift of leg i: -hbar * sum_{y>i} alpha_y; zero for i=l."""
        if not (1 <= i <= self.l):
            raise ShapeError(f"shift index {i} out of range 1..{self.l}")
        return -hbar * self.gamma(i)


def build_shape(q) -> BlockShape:
    return BlockShape(tuple(int(x) for x in q))


def parse_shape(text: str) -> BlockShape:
    """Parse comma-separated block sizes, e.g. '4,3,3'."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ShapeError(f"cannot parse shape from {text!r}")
    try:
        q = [int(p) for p in parts]
    except ValueError as exc:
        raise ShapeError(f"cannot parse shape from {text!r}") from exc
    return build_shape(q)


def cartan(n: int) -> list[list[int]]:
    """The affine matrix printed in the defining presentation, indexed 0..n-1.

    Note the corner entries (0, n-1) and (n-1, 0) carry +1 here; the relation
    templates use the cyclic-adjacency value -1 instead (see cartan_effective),
    which is what the defining relations need to close under the evaluation
    map.  The discrepancy is surfaced as the `cartan-corner` deviation tag.
    """
    if n < 3:
        raise ShapeError("rank must be at least 3")
    a = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                a[i][j] = 2
            elif j == i + 1 or j == i - 1:
                a[i][j] = -1
            elif (i, j) in ((0, n - 1), (n - 1, 0)):
                a[i][j] = 1
    return a


def cartan_effective(n: int) -> list[list[int]]:
    """Affine A_{n-1} Cartan matrix with cyclic adjacency = -1 everywhere."""
    a = cartan(n)
    a[0][n - 1] = -1
    a[n - 1][0] = -1
    return a
