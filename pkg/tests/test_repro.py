"""Tests for the reproducing kernel, Q_n, the shift semigroup and sums of variables."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.errors import DimensionError, DomainError, IntegrabilityError, PreconditionError
from app.models.expr import Const, resolvent, rho, s_nu
from app.services.fnalg import equals, evaluate, parse_expr
from app.services.repro import (
    PointKernel,
    apply_Qn,
    check_integrability,
    check_kernel_square_mass,
    check_reproduction,
    check_shift_semigroup,
    check_sum_of_vars_bounded,
    kernel,
    kernel_n,
    reproduce_elementary,
    reproduce_shifted,
    shift,
    smoothed_identity,
    sum_of_vars,
)


class TestKernel:
    """K(z, lambda) and its products"""

    def test_value(self):
        assert kernel(1.0, 1.0) == pytest.approx(-1.0 / (2.0 * math.pi))

    def test_outside_half_plane(self):
        with pytest.raises(DomainError):
            kernel(-1.0, 1.0)

    def test_product_kernel(self):
        assert kernel_n([1.0, 2.0], [1.0, 1.0]) == pytest.approx(kernel(1.0, 1.0) * kernel(2.0, 1.0))

    def test_product_kernel_sizes(self):
        with pytest.raises(DimensionError):
            kernel_n([1.0, 2.0], [1.0])

    def test_point_kernel_conjugates(self):
        k = PointKernel(1.0)
        lam = np.array([1.0 - 1j])
        assert k(lam)[0] == pytest.approx(kernel(1.0, 1.0 + 1j))

    def test_square_mass(self, spec):
        assert check_kernel_square_mass(spec).passed


class TestQn:
    """Q_n applied to derivatives"""

    def test_reproduces_resolvent(self, spec):
        z = 0.7 - 0.4j
        res = apply_Qn(-resolvent(0, 1.0, 1, nu=2.0), z, spec)
        assert abs(res.value - 1.0 / (z + 1.0)) < 1e-6

    def test_callable_integrand(self, spec):
        res = apply_Qn(lambda pts: -(pts[..., 0] + 1.0) ** -2, [1.0], spec)
        assert abs(res.value - 0.5) < 1e-6

    def test_integrability_of_derivative(self, spec):
        assert check_integrability(-resolvent(0, 1.0, 1, nu=2.0), spec).passed

    def test_constant_is_not_integrable(self, spec):
        with pytest.raises(IntegrabilityError):
            apply_Qn(Const(1, 1.0), 1.0, spec)

    def test_zero_function(self, spec):
        assert apply_Qn(Const(1, 0.0), 1.0, spec).value == 0


class TestReproducingFormulas:
    """Elementary, shifted and smoothed reproducing identities"""

    def test_elementary_one_variable(self, spec):
        f = 1.0 + resolvent(0, 1.0, 1)
        result = reproduce_elementary(f, 0.5 + 1j, spec)
        assert result.passed
        assert result.lhs == pytest.approx(1.0 / (1.5 + 1j))

    def test_shifted(self, spec):
        result = reproduce_shifted(resolvent(0, 1.0, 1), 0.5, 2.0, spec)
        assert result.passed
        assert result.lhs == pytest.approx(1.0 / 3.5)

    def test_shifted_needs_elementary_function(self, spec):
        with pytest.raises(PreconditionError):
            reproduce_shifted(1.0 + resolvent(0, 1.0, 1), 0.5, 0.0, spec)

    def test_shifted_rejects_negative_shift(self, spec):
        with pytest.raises(PreconditionError):
            reproduce_shifted(resolvent(0, 1.0, 1), 0.5, -1.0, spec)

    def test_smoothed_identity(self, spec):
        assert smoothed_identity(resolvent(0, 2.0, 1), 1.0 + 0.5j, 0.5, spec).passed

    @pytest.mark.slow
    def test_two_variable_reproduction(self, spec):
        f = parse_expr("1 + res([1, 0], 1, 1) + res([1, 0], 1, 1)*exp([0, 1])", 2)
        rows = check_reproduction(f, spec, count=3, seed=5)
        assert all(row.passed for row in rows)


class TestShiftAndSums:
    """The shift semigroup and f(z_1 + ... + z_n)"""

    def test_shift_moves_parameter(self):
        assert equals(shift(resolvent(0, 1.0, 1), 1.0), resolvent(0, 2.0, 1))

    def test_shift_broadcasts_scalar(self):
        g = shift(rho([1.0, 1.0]), 0.5)
        assert evaluate(g, [1.0, 1.0]) == pytest.approx(1.0 / 6.25)

    def test_semigroup(self):
        f = parse_expr("res([1, 1], 1, 1)*exp([0.5, 0])", 2)
        assert check_shift_semigroup(f, [0.5, 1.0], [2.0, 0.25]).passed

    @settings(max_examples=25, deadline=None)
    @given(
        s=st.lists(st.floats(min_value=0.0, max_value=4.0), min_size=2, max_size=2),
        t=st.lists(st.floats(min_value=0.0, max_value=4.0), min_size=2, max_size=2),
    )
    def test_semigroup_any_shifts(self, s, t):
        f = parse_expr("res([1, 2], 1+1i, 2) + exp([1, 0.5])*res([0, 1], 0.5, 1)", 2)
        assert check_shift_semigroup(f, s, t).passed

    def test_sum_of_vars(self):
        assert equals(sum_of_vars(resolvent(0, 1.0, 1), 2), s_nu(1.0, 1.0, 2))

    def test_sum_of_vars_exponential(self):
        g = sum_of_vars(parse_expr("exp([2])", 1), 3)
        assert evaluate(g, [0.1, 0.2, 0.3]) == pytest.approx(math.exp(-1.2))

    def test_sum_of_vars_needs_one_variable(self):
        with pytest.raises(DimensionError):
            sum_of_vars(rho([1.0, 1.0]), 2)

    def test_sum_of_vars_bounded(self, spec):
        assert check_sum_of_vars_bounded(resolvent(0, 1.0, 1), 2, spec).passed
