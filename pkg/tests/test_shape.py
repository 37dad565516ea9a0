import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yangw.scalar import ZERO, kk
from yangw.shape import ShapeError, build_shape, cartan, cartan_effective, parse_shape


def test_basic_counts():
    s = build_shape((4, 3, 3))
    assert s.N == 10
    assert s.l == 3


def test_col_row_small():
    s = build_shape((2, 1))
    assert [s.col(i) for i in (1, 2, 3)] == [1, 1, 2]
    assert [s.row(i) for i in (1, 2, 3)] == [1, 2, 1]


def test_rejects_weakly_increasing():
    with pytest.raises(ShapeError):
        build_shape((3, 1, 2))


def test_hat_tilde():
    s = build_shape((2, 1))
    assert s.hat(1) == 3
    assert s.hat(2) is None
    assert s.tilde(3) == 1


def test_nilpotent_f():
    assert build_shape((2, 1)).nilpotent_f() == [(3, 1)]
    assert build_shape((1, 1)).nilpotent_f() == [(2, 1)]
    assert build_shape((5,)).nilpotent_f() == []


def test_degree_grading():
    s = build_shape((2, 1))
    for i in range(1, 4):
        for j in range(1, 4):
            assert s.degree(i, j) == s.col(j) - s.col(i)


def test_alpha_gamma_shift():
    s = build_shape((4, 3, 3))
    assert s.alpha(1) == kk + 6
    assert s.gamma(1) == 2 * kk + 14
    assert s.gamma(s.l) == ZERO
    assert s.shift_a(s.l) == ZERO
    s2 = build_shape((4, 3))
    from yangw.scalar import hbar

    assert s2.shift_a(1) == -hbar * (kk + 4)


def test_gamma_telescoping():
    s = build_shape((5, 4, 4, 2))
    for a in range(2, s.l + 1):
        assert s.gamma(a - 1) - s.gamma(a) == s.alpha(a)


def test_parse_shape():
    assert parse_shape("4,3,3").q == (4, 3, 3)
    with pytest.raises(ShapeError):
        parse_shape("")
    with pytest.raises(ShapeError):
        parse_shape("3,x")


def test_cartan_printed_entries():
    a3 = cartan(3)
    assert a3[0][2] == 1
    assert a3[0][0] == 2
    assert cartan(4)[0][2] == 0
    with pytest.raises(ShapeError):
        cartan(2)


def test_cartan_effective_corners():
    a = cartan_effective(4)
    assert a[0][3] == -1 and a[3][0] == -1
    assert a[0][1] == -1 and a[1][2] == -1


shapes = st.lists(st.integers(1, 5), min_size=1, max_size=4).map(
    lambda xs: build_shape(tuple(sorted(xs, reverse=True)))
)


@settings(max_examples=50, deadline=None)
@given(shapes)
def test_col_row_round_trip(s):
    for i in range(1, s.N + 1):
        assert s.index(s.col(i), s.row(i)) == i
        assert i == s.row(i) + sum(s.q[: s.col(i) - 1])


@settings(max_examples=50, deadline=None)
@given(shapes)
def test_hat_tilde_inverse(s):
    for i in range(1, s.N + 1):
        h = s.hat(i)
        if h is not None:
            assert s.tilde(h) == i
        t = s.tilde(i)
        if t is not None:
            assert s.hat(t) == i
