"""Tests for the named verification suites."""

import numpy as np
import pytest

from app.errors import PreconditionError
from app.models.expr import rho
from app.services.fnalg import parse_expr
from app.services.suites import (
    DEFAULT_FAMILIES,
    SUITES,
    SuiteContext,
    default_family,
    diagonal_kron_pair,
    parse_family,
    resolvent_norm_rows,
    run_suite,
)


class TestFamilies:
    """Default function families and DSL lists"""

    def test_default_families(self):
        assert len(default_family(1)) == len(DEFAULT_FAMILIES[1])
        assert len(default_family(2)) == 7
        assert all(f.n == 3 for f in default_family(3))

    def test_default_keyword(self):
        fns = parse_family(["default", "exp([2])"], 1)
        assert len(fns) == len(DEFAULT_FAMILIES[1]) + 1
        assert fns[-1].n == 1

    def test_elementary_members(self, diagonal_pair, spec):
        ctx = SuiteContext(default_family(2), diagonal_pair, spec, 0)
        assert len(ctx.elementary()) == 4

    def test_kron_pair_commutes(self):
        pair = diagonal_kron_pair([0.5, 2.0], [1.0, 3.0 + 1.0j])
        a, b = pair.matrices
        assert pair.dim == 4
        assert np.allclose(a @ b, b @ a)


class TestRunSuite:
    """run_suite argument handling and small suite runs"""

    def test_suite_names(self):
        assert {"homomorphism", "shift", "merge", "operator-sum", "spectral", "reproduce", "decomposition",
                "qt", "norm-bound", "hp", "gsf", "estimates", "norms"} == set(SUITES)

    def test_unknown_suite(self):
        with pytest.raises(PreconditionError):
            run_suite("nonexistent")

    def test_dimension_mismatch(self, scalar_tuple):
        with pytest.raises(PreconditionError):
            run_suite("hp", fns=[rho([1.0, 1.0])], tup=scalar_tuple)

    def test_resolvent_norms(self, spec):
        rows = resolvent_norm_rows(spec)
        assert len(rows) == 8
        assert all(row.passed for row in rows)

    def test_decomposition_suite(self, scalar_tuple, spec):
        fns = parse_family(["res([1], 1, 1)", "1 + res([1], 2, 1)"], 1)
        report = run_suite("decomposition", fns=fns, tup=scalar_tuple, spec=spec, seed=1)
        assert report.passed
        assert report.n_failed == 0
        assert report.seed == 1

    def test_hp_suite(self, scalar_tuple, spec):
        report = run_suite("hp", fns=default_family(1), tup=scalar_tuple, spec=spec)
        assert report.passed
        assert report.n_passed == 2 * len(DEFAULT_FAMILIES[1])

    def test_merge_suite(self, diagonal_pair, spec):
        fns = [parse_expr("res([1, 0], 1, 1)*res([0, 1], 2, 1)", 2)]
        report = run_suite("merge", fns=fns, tup=diagonal_pair, spec=spec)
        assert report.passed
        assert len(report.rows) == 2

    def test_spectral_suite(self, diagonal_pair, spec):
        report = run_suite("spectral", fns=[rho([1.0, 2.0])], tup=diagonal_pair, spec=spec)
        assert report.passed
        assert len(report.rows) == 3

    def test_report_serializes_counts(self, scalar_tuple, spec):
        data = run_suite("hp", fns=default_family(1)[:1], tup=scalar_tuple, spec=spec).model_dump()
        assert data["suite"] == "hp"
        assert data["passed"] is True
        assert data["n_failed"] == 0

    @pytest.mark.slow
    def test_gsf_suite(self, scalar_tuple, coarse_spec):
        report = run_suite("gsf", tup=scalar_tuple, spec=coarse_spec)
        assert report.passed

    @pytest.mark.slow
    def test_homomorphism_suite_on_random_tuple(self, coarse_spec):
        report = run_suite("homomorphism", spec=coarse_spec, seed=3, n=1)
        assert report.passed
