"""Tests for the function algebra: DSL, evaluation, derivatives, supports and substitutions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.errors import DimensionError, DomainError, InvalidAtomError, ParseError
from app.models.expr import Const, Exp, ResLin, VarSet, exp_tau, resolvent, rho
from app.services.fnalg import (
    INFINITY,
    boundary_sup,
    dilate,
    embed,
    equals,
    evaluate,
    expand_terms,
    is_zero,
    parse_expr,
    partial,
    project,
    substitute,
    sup_norm,
    support,
    to_text,
    translate,
    values,
)


class TestParsing:
    """DSL parsing and printing"""

    def test_parse_resolvent(self):
        f = parse_expr("res([1], 1+0i, 1)", 1)
        assert isinstance(f, ResLin)
        assert f.w == (1.0,)
        assert f.lam == 1 + 0j
        assert f.nu == 1.0

    def test_parse_compound_expression(self):
        f = parse_expr("2*exp([1, 0])*res([0, 1], 2, 1) - 0.5", 2)
        z = np.array([1.0 + 1j, 0.5 - 2j])
        expected = 2 * np.exp(-z[0]) / (z[1] + 2) - 0.5
        assert abs(evaluate(f, z) - expected) < 1e-12

    def test_complex_lambda(self):
        f = parse_expr("res([1], 1-2i, 1)", 1)
        assert f.lam == 1 - 2j

    def test_to_text_round_trip(self):
        text = "exp([0.5, 0])*res([0, 1], 1, 1) + res([1, 0], 2, 1)"
        f = parse_expr(text, 2)
        g = parse_expr(to_text(f), 2)
        assert equals(f, g)

    def test_syntax_error_carries_position(self):
        with pytest.raises(ParseError) as excinfo:
            parse_expr("res([1], 1, 1) +", 1)
        assert excinfo.value.position is not None
        assert isinstance(excinfo.value, ValueError)

    def test_unknown_atom(self):
        with pytest.raises(ParseError):
            parse_expr("log([1])", 1)

    def test_weight_length_mismatch(self):
        with pytest.raises(DimensionError):
            parse_expr("res([1, 0], 1, 1)", 1)

    def test_nonpositive_lambda(self):
        with pytest.raises(InvalidAtomError):
            parse_expr("res([1], -1, 1)", 1)

    def test_zero_weights_rejected(self):
        with pytest.raises(InvalidAtomError):
            parse_expr("res([0, 0], 1, 1)", 2)

    def test_negative_exponent_rejected(self):
        with pytest.raises(InvalidAtomError):
            Exp(1, (-1.0,))


class TestEvaluation:
    """Exact evaluation on the poly-half-plane"""

    def test_resolvent_value(self):
        assert evaluate(resolvent(0, 1.0, 1), 1.0) == pytest.approx(0.5)

    def test_fractional_power_principal_branch(self):
        f = ResLin(1, (1.0,), 1.0, 0.5)
        assert evaluate(f, 3.0) == pytest.approx(0.5)

    def test_exponential_value(self):
        assert evaluate(exp_tau(2.0, 2), [0.5, 0.25]) == pytest.approx(math.exp(-1.5))

    def test_outside_domain_raises(self):
        with pytest.raises(DomainError):
            evaluate(resolvent(0, 1.0, 1), -0.5)

    def test_boundary_values_allowed_in_values(self):
        out = values(resolvent(0, 1.0, 1), np.array([[0.0 + 2j]]))
        assert out[0] == pytest.approx(1 / (1 + 2j))

    def test_wrong_point_dimension(self):
        with pytest.raises(DimensionError):
            evaluate(rho([1.0, 1.0]), [1.0, 1.0, 1.0])


class TestDerivatives:
    """Formal partial derivatives"""

    def test_resolvent_derivative(self):
        d = partial(resolvent(0, 1.0, 1), [0])
        assert evaluate(d, 1.0) == pytest.approx(-0.25)

    def test_exponential_derivative(self):
        d = partial(Exp(2, (1.0, 2.0)), VarSet.full(2))
        z = np.array([0.3 + 1j, 0.2])
        assert evaluate(d, z) == pytest.approx(2.0 * np.exp(-z[0] - 2 * z[1]))

    def test_constant_derivative_is_zero(self):
        assert is_zero(partial(Const(2, 5.0), [1]))

    def test_derivative_against_finite_difference(self):
        f = parse_expr("exp([1, 0])*res([1, 1], 1, 2) + res([0, 1], 2, 1)", 2)
        z = np.array([0.7 + 0.3j, 1.1 - 0.4j])
        h = 1e-6
        step = np.array([h, 0.0])
        numeric = (evaluate(f, z + step) - evaluate(f, z - step)) / (2 * h)
        assert abs(evaluate(partial(f, [0]), z) - numeric) < 1e-6

    @settings(max_examples=25, deadline=None)
    @given(
        lam1=st.floats(min_value=0.2, max_value=5.0),
        lam2=st.floats(min_value=0.2, max_value=5.0),
        a=st.floats(min_value=0.0, max_value=3.0),
    )
    def test_partials_commute(self, lam1, lam2, a):
        f = parse_expr(f"res([1, 1], {lam1}, 1)*exp([{a}, 0]) + res([1, 0], {lam2}, 2)", 2)
        assert equals(partial(partial(f, [0]), [1]), partial(partial(f, [1]), [0]))


class TestSupport:
    """Supports and zero tests"""

    def test_support_of_partial_dependence(self):
        f = parse_expr("1 + res([1, 0], 1, 1)", 2)
        assert support(f).labels == [1]

    def test_cancelled_dependence_is_not_support(self):
        f = parse_expr("res([0, 1], 1, 1) - res([0, 1], 1, 1) + exp([1, 0])", 2)
        assert support(f).labels == [1]

    def test_constant_has_empty_support(self):
        assert len(support(Const(3, 2.0))) == 0

    def test_is_zero(self):
        assert is_zero(resolvent(0, 1.0, 1) - resolvent(0, 1.0, 1))
        assert not is_zero(resolvent(0, 1.0, 1))


class TestSubstitutions:
    """Substitution, translation, dilation, projection"""

    def test_substitute_value(self):
        f = rho([1.0, 2.0])
        g = substitute(f, [0, 3.0], 1)
        assert evaluate(g, 1.0) == pytest.approx(0.5 * 0.2)

    def test_substitute_infinity_kills_decaying_factor(self):
        f = parse_expr("1 + res([1, 0], 1, 1)*exp([0, 1])", 2)
        g = substitute(f, [INFINITY, 0], 1)
        assert equals(g, Const(1, 1.0))

    def test_merge_variables(self):
        f = rho([1.0, 1.0])
        g = substitute(f, [0, 0], 1)
        assert evaluate(g, 1.0) == pytest.approx(0.25)

    def test_translate_positive_and_negative(self):
        f = resolvent(0, 2.0, 1)
        assert evaluate(translate(f, [1.0]), 1.0) == pytest.approx(0.25)
        assert evaluate(translate(f, [-1.0]), 1.0) == pytest.approx(0.5)

    def test_translate_into_singularity_rejected(self):
        with pytest.raises(InvalidAtomError):
            translate(resolvent(0, 1.0, 1), [-2.0])

    def test_dilate(self):
        f = exp_tau(1.0, 1)
        assert evaluate(dilate(f, 3.0), 1.0) == pytest.approx(math.exp(-3.0))

    def test_project_and_embed(self):
        f = parse_expr("res([0, 1, 0], 1, 1)*exp([0, 0, 2])", 3)
        omega = VarSet.from_labels(3, [2, 3])
        g = project(f, omega)
        assert g.n == 2
        assert equals(embed(g, omega), f)

    def test_project_outside_variables_rejected(self):
        f = parse_expr("res([1, 0], 1, 1)", 2)
        with pytest.raises(DimensionError):
            project(f, VarSet.from_labels(2, [2]))


class TestTerms:
    """Expansion into coefficient-times-atoms terms"""

    def test_like_terms_combine(self):
        f = parse_expr("exp([1])*exp([2]) + 2*exp([3])", 1)
        terms = expand_terms(f)
        assert len(terms) == 1
        assert terms[0].coef == pytest.approx(3.0)

    def test_separation(self):
        f = parse_expr("res([1, 0], 1, 1)*exp([0, 2])", 2)
        (term,) = expand_terms(f)
        factors = term.separate()
        assert factors is not None
        assert evaluate(factors[0], 1.0) == pytest.approx(0.5)
        assert evaluate(factors[1], 1.0) == pytest.approx(math.exp(-2.0))

    def test_coupled_term_does_not_separate(self):
        (term,) = expand_terms(parse_expr("res([1, 1], 1, 1)", 2))
        assert term.separate() is None

    def test_split_coupled(self):
        (term,) = expand_terms(parse_expr("res([1, 1], 1, 2)*exp([0, 3])", 2))
        factors, coupled = term.split_coupled()
        assert [atom.w for atom in coupled] == [(1.0, 1.0)]
        assert isinstance(factors[0], Const)
        assert evaluate(factors[1], 1.0) == pytest.approx(math.exp(-3.0))


class TestSupNorms:
    """Grid estimates of suprema"""

    def test_resolvent_sup_norm(self):
        assert sup_norm(resolvent(0, 2.0, 1)) == pytest.approx(0.5, rel=1e-6)

    def test_boundary_sup_of_exponential(self):
        assert boundary_sup(exp_tau(1.0, 2)) == pytest.approx(1.0)

    def test_constant(self):
        assert sup_norm(Const(2, -3.0)) == 3.0
