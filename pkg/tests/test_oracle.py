import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yangw.current import AlgElement, Ambient, SlotSpec
from yangw.modesum import INT, NAT, AtomFactor, LinForm, SumExpression, equals
from yangw.oracle import OracleError, VacuumModule, matrix_is_zero
from yangw.scalar import ONE, csym


def F(slot, i, j, coeffs, const):
    return AtomFactor(slot, i, j, LinForm(tuple(coeffs), const))


def test_graded_dimensions_gl2():
    mod = VacuumModule(Ambient.single(2), 2)
    assert mod.graded_dimensions() == (1, 4, 14)


def test_graded_dimensions_two_gl1_slots():
    amb = Ambient({1: SlotSpec(1, csym(1)), 2: SlotSpec(1, csym(2))})
    mod = VacuumModule(amb, 1)
    assert mod.graded_dimensions() == (1, 2)


def test_depth_zero_dimension_one():
    assert VacuumModule(Ambient.single(3), 0).graded_dimensions() == (1,)


def test_nonnegative_modes_kill_vacuum():
    amb = Ambient.single(3)
    mod = VacuumModule(amb, 2)
    assert mod.act(AlgElement.gen(amb, amb.E(1, 1, 1, 0)), mod.vacuum()) == {}
    assert mod.act(AlgElement.gen(amb, amb.E(1, 2, 3, 4)), mod.vacuum()) == {}


def test_central_acts_as_scalar():
    amb = Ambient.single(3)
    mod = VacuumModule(amb, 1)
    vec = {(amb.E(1, 1, 2, -1),): ONE}
    got = mod.act(AlgElement.unit(amb, csym(1)), vec)
    assert got == {(amb.E(1, 1, 2, -1),): csym(1)}


def test_annihilating_tail_sum_on_vacuum():
    amb = Ambient.single(3)
    mod = VacuumModule(amb, 2)
    total = SumExpression.zero(amb)
    for k in range(1, 4):
        total = total + SumExpression.atom(
            amb, (NAT,), (F(1, 3, k, (-1,), 0), F(1, k, 3, (1,), 0)))
    assert mod.act(total, mod.vacuum()) == {}


def test_biinfinite_window_is_finite():
    amb = Ambient({1: SlotSpec(2, csym(1)), 2: SlotSpec(2, csym(2))})
    mod = VacuumModule(amb, 2)
    e = SumExpression.atom(amb, (INT,), (F(1, 1, 2, (1,), 0), F(2, 2, 1, (-1,), 0)))
    vec = {(amb.E(1, 2, 1, -1), amb.E(2, 1, 2, -1)): ONE}
    mod.act(e, vec)  # must terminate and stay exact


def test_wrong_order_biinfinite_errors():
    amb = Ambient.single(2)
    mod = VacuumModule(amb, 1)
    e = SumExpression(amb, atoms={
        __import__("yangw.modesum", fromlist=["Atom"]).Atom(
            (INT,), (F(1, 1, 2, (1,), 0), F(1, 2, 1, (-1,), 0))): ONE})
    with pytest.raises(OracleError):
        mod.act(e, mod.vacuum())


def test_operator_matrix_identity_and_zero():
    amb = Ambient.single(2)
    mod = VacuumModule(amb, 2)
    one = AlgElement.unit(amb)
    for d in (0, 1, 2):
        mat = mod.operator_matrix(one, d)
        n = len(mod.basis(d))
        assert all(
            (mat[i][j] == ONE if i == j else mat[i][j].is_zero())
            for i in range(n) for j in range(n))
    assert matrix_is_zero(mod.operator_matrix(AlgElement.zero(amb), 1))


def test_degree_out_of_range():
    amb = Ambient.single(2)
    mod = VacuumModule(amb, 1)
    raising = AlgElement.gen(amb, amb.E(1, 1, 2, -1))  # degree -1
    with pytest.raises(OracleError):
        mod.operator_matrix(raising, 1)  # would land at degree 2 > D


gens = st.tuples(st.integers(1, 2), st.integers(1, 2), st.integers(-2, 2))


@settings(max_examples=25, deadline=None)
@given(st.lists(gens, min_size=1, max_size=2), st.lists(gens, min_size=1, max_size=2))
def test_act_is_representation(xs, ys):
    amb = Ambient.single(2)
    mod = VacuumModule(amb, 2)
    x = AlgElement.word(amb, tuple(amb.E(1, i, j, m) for i, j, m in xs))
    y = AlgElement.word(amb, tuple(amb.E(1, i, j, m) for i, j, m in ys))
    for d in (0, 1, 2):
        for mono in mod.basis(d):
            v = {mono: ONE}
            lhs = mod.act(x * y, v)
            rhs = mod.act(x, mod.act(y, v))
            assert lhs == rhs


def test_symbolic_equality_matches_module_equality():
    amb = Ambient.single(2)
    mod = VacuumModule(amb, 3)
    a = SumExpression.atom(amb, (NAT,), (F(1, 1, 2, (-1,), -1), F(1, 2, 1, (1,), 1)))
    base = SumExpression.atom(amb, (NAT,), (F(1, 1, 2, (-1,), 0), F(1, 2, 1, (1,), 0)))
    boundary = SumExpression.from_elem(
        AlgElement.word(amb, (amb.E(1, 1, 2, 0), amb.E(1, 2, 1, 0))))
    v = equals(a, base - boundary, oracle=mod, depth=3)
    assert v.equal and v.oracle_checked and v.oracle_equal
