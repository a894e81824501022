"""Tests for limits at infinity, restrictions and the elementary decomposition."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.errors import DomainError, PreconditionError
from app.models.expr import Const, VarSet, rho
from app.services.decomp import (
    ElementaryDecomposition,
    check_contraction,
    check_kernel_characterization,
    check_part_properties,
    check_reconstruction,
    check_uniqueness,
    degree,
    elementary_decompose,
    is_elementary,
    limit_at_infinity,
    reconstruct,
    restrict,
)
from app.services.fnalg import INFINITY, equals, evaluate, parse_expr

MIXED = "2 + res([1, 0], 1, 1) + exp([0, 1]) + res([1, 0], 1, 1)*exp([0, 1])"


@pytest.fixture
def mixed():
    return parse_expr(MIXED, 2)


class TestLimits:
    """Limits as real parts go to infinity"""

    def test_limit_keeps_first_variable(self, mixed):
        limit = limit_at_infinity(mixed, VarSet.from_labels(2, [1]))
        assert limit.n == 1
        assert evaluate(limit, 1.0) == pytest.approx(2.5)

    def test_limit_over_empty_set_is_constant(self, mixed):
        limit = limit_at_infinity(mixed, VarSet(2))
        assert isinstance(limit, Const)
        assert limit.n == 0
        assert limit.c == pytest.approx(2.0)

    def test_full_set_is_identity(self, mixed):
        assert equals(limit_at_infinity(mixed, VarSet.full(2)), mixed)


class TestRestrict:
    """Restrictions with fixed points, infinity and derivatives"""

    def test_fixed_point(self):
        g = restrict(rho([1.0, 2.0]), VarSet.from_labels(2, [1]), {1: 1.0})
        assert evaluate(g, 1.0) == pytest.approx(1.0 / 6.0)

    def test_infinity(self):
        g = restrict(rho([1.0, 2.0]), VarSet.from_labels(2, [1]), {1: INFINITY})
        assert evaluate(g, 1.0) == pytest.approx(0.0)

    def test_derivative_before_substitution(self):
        g = restrict(rho([1.0, 2.0]), VarSet.from_labels(2, [1]), {1: 1.0}, psi=VarSet.from_labels(2, [2]))
        assert evaluate(g, 1.0) == pytest.approx(-1.0 / 18.0)

    def test_everything_fixed(self):
        g = restrict(rho([1.0, 2.0]), VarSet(2), {0: 1.0, 1: 1.0})
        assert g.c == pytest.approx(1.0 / 6.0)

    def test_psi_inside_omega_rejected(self):
        with pytest.raises(PreconditionError):
            restrict(rho([1.0, 2.0]), VarSet.from_labels(2, [1]), {1: 1.0}, psi=VarSet.from_labels(2, [1]))

    def test_missing_point_rejected(self):
        with pytest.raises(PreconditionError):
            restrict(rho([1.0, 2.0]), VarSet.from_labels(2, [1]), {})

    def test_point_outside_half_plane_rejected(self):
        with pytest.raises(DomainError):
            restrict(rho([1.0, 2.0]), VarSet.from_labels(2, [1]), {1: -1.0 + 1j})


class TestDecomposition:
    """f = sum over Omega of the elementary parts"""

    def test_all_four_parts(self, mixed):
        decomposition = elementary_decompose(mixed)
        assert [omega.labels for omega, _ in decomposition.items()] == [[], [1], [2], [1, 2]]
        assert evaluate(decomposition.part_at(VarSet(2)), [1.0, 1.0]) == pytest.approx(2.0)
        expected = parse_expr("res([1, 0], 1, 1)*exp([0, 1])", 2)
        assert equals(decomposition.part_at(VarSet.full(2)), expected)

    def test_reconstruction(self, mixed):
        decomposition = elementary_decompose(mixed)
        assert equals(reconstruct(decomposition), mixed)
        assert check_reconstruction(mixed, decomposition).passed

    @settings(max_examples=20, deadline=None)
    @given(
        c=st.floats(min_value=-3.0, max_value=3.0),
        lam=st.floats(min_value=0.2, max_value=4.0),
        a=st.floats(min_value=0.1, max_value=3.0),
    )
    def test_reconstruction_of_generated_functions(self, c, lam, a):
        f = parse_expr(f"{c!r} + res([1, 0], {lam!r}, 1)*exp([0, {a!r}]) + exp([{a!r}, 0])", 2)
        assert check_reconstruction(f).passed

    def test_part_properties(self, mixed):
        assert check_part_properties(elementary_decompose(mixed)).passed

    def test_json_form(self, mixed):
        decomposition = elementary_decompose(mixed)
        restored = ElementaryDecomposition.from_json(decomposition.to_json(), 2)
        assert equals(reconstruct(restored), mixed)

    def test_elementary(self, mixed):
        assert not is_elementary(mixed)
        assert is_elementary(parse_expr("res([1, 0], 1, 1)*exp([0, 1])", 2))
        assert is_elementary(Const(2, 0))

    def test_degree(self, mixed):
        assert degree(mixed) == 2
        assert degree(parse_expr("3 + exp([0, 1])", 2)) == 1

    def test_uniqueness(self):
        f = parse_expr("res([1, 0], 1, 1)*(1 + exp([0, 1]))", 2)
        g = parse_expr("res([1, 0], 1, 1) + res([1, 0], 1, 1)*exp([0, 1])", 2)
        assert check_uniqueness(f, g).passed

    def test_kernel_characterization(self):
        f = parse_expr("res([1, 0], 1, 1) - res([1, 0], 1, 1)", 2)
        assert check_kernel_characterization(f).passed

    @pytest.mark.slow
    def test_parts_contract_the_norm(self, mixed, spec):
        rows = check_contraction(mixed, spec)
        assert len(rows) == 4
        assert all(row.passed for row in rows)
