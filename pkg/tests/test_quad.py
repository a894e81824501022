"""Tests for the adaptive quadrature over half-lines, lines and half-planes."""

import math

import numpy as np
import pytest

from app.errors import DimensionError, IntegrabilityError, QuadratureError
from app.models.expr import Const, resolvent, rho
from app.schemas.quad import QuadSpec
from app.services import quad
from app.services.fnalg import parse_expr
from app.services.quad import (
    integrate_against_kernels,
    integrate_dVn,
    integrate_halfline,
    integrate_lines,
)
from app.services.repro import PointKernel


class TestQuadSpec:
    """QuadSpec parameters and their text form"""

    def test_defaults(self):
        spec = QuadSpec()
        assert spec.mapping == "compact"
        assert spec.tail_decay == 4.0

    def test_text_form(self):
        spec = QuadSpec(rel_tol=1e-4, mapping="truncate")
        restored = QuadSpec.from_text("# comment\n" + spec.to_text())
        assert restored == spec

    def test_text_form_rejects_garbage(self):
        with pytest.raises(ValueError):
            QuadSpec.from_text("rel_tol 1e-3")

    def test_tightened(self):
        spec = QuadSpec(rel_tol=1e-4, max_refine_depth=12).tightened()
        assert spec.rel_tol == pytest.approx(1e-5)
        assert spec.max_refine_depth == 12

    def test_invalid_tail_decay(self):
        with pytest.raises(ValueError):
            QuadSpec(tail_decay=2.0)


class TestHalflineAndLines:
    """Real-axis integrals with known values"""

    def test_exponential(self, spec):
        res = integrate_halfline(lambda t: np.exp(-t[..., 0]), 1, spec)
        assert res.value.real == pytest.approx(1.0, rel=1e-8)
        assert res.converged

    def test_two_dimensional_exponential(self, spec):
        res = integrate_halfline(lambda t: np.exp(-t[..., 0] - 2.0 * t[..., 1]), 2, spec)
        assert res.value.real == pytest.approx(0.5, rel=1e-7)

    def test_algebraic_decay(self, spec):
        res = integrate_halfline(lambda t: 1.0 / (1.0 + t[..., 0]) ** 2, 1, spec)
        assert res.value.real == pytest.approx(1.0, rel=1e-6)

    def test_lorentzian_line(self, spec):
        res = integrate_lines(lambda b: 1.0 / (1.0 + b[..., 0] ** 2), 1, spec)
        assert res.value.real == pytest.approx(math.pi, rel=1e-7)

    def test_truncated_mapping_reports_tail(self):
        spec = QuadSpec(mapping="truncate", alpha_max=50.0)
        res = integrate_halfline(lambda t: 1.0 / (1.0 + t[..., 0]) ** 4, 1, spec)
        assert res.value.real == pytest.approx(1.0 / 3.0, rel=1e-4)
        assert res.truncation_est > 0

    def test_non_finite_samples_rejected(self, spec):
        with pytest.raises(QuadratureError):
            integrate_halfline(lambda t: np.full(t.shape[:-1], np.nan), 1, spec)


class TestHalfPlane:
    """Integrals against dV_n"""

    def test_kernel_square_mass(self, spec):
        res = integrate_dVn(lambda pts: (4.0 / math.pi ** 2) * np.abs(1.0 + np.conj(pts[..., 0])) ** -4, 1, spec)
        assert res.value.real == pytest.approx(1.0 / math.pi, rel=1e-6)

    def test_separable_product(self, spec):
        def g(pts):
            return np.prod(np.abs(1.0 + pts) ** -4, axis=-1)

        one = integrate_dVn(g, 1, spec).value.real
        two = integrate_dVn(g, 2, spec).value.real
        assert one == pytest.approx(math.pi / 4.0, rel=1e-6)
        assert two == pytest.approx(one ** 2, rel=1e-5)

    def test_dimension_mismatch(self, spec):
        with pytest.raises(DimensionError):
            integrate_dVn(rho([1.0, 1.0]), 1, spec)


class TestKernelIntegrals:
    """Term-by-term integration against kernel factors"""

    def test_resolvent_is_reproduced(self, spec):
        g = -resolvent(0, 1.0, 1, nu=2.0)
        z = 0.8 + 0.3j
        res = integrate_against_kernels(g, [PointKernel(z)], spec)
        assert abs(res.value - 1.0 / (z + 1.0)) < 1e-6

    def test_separated_product_factorizes(self, spec):
        g = resolvent(0, 1.0, 2, nu=2.0) * resolvent(1, 2.0, 2, nu=2.0)
        z = [1.0, 0.5 + 1j]
        res = integrate_against_kernels(g, [PointKernel(complex(x)) for x in z], spec)
        expected = (1.0 / (z[0] + 1.0)) * (1.0 / (z[1] + 2.0))
        assert abs(res.value - expected) < 1e-6

    def test_constant_term_not_integrable(self, spec):
        g = Const(1, 1.0) + resolvent(0, 1.0, 1, nu=2.0)
        with pytest.raises(IntegrabilityError):
            integrate_against_kernels(g, [PointKernel(1.0)], spec)

    def test_kernel_count_mismatch(self, spec):
        with pytest.raises(DimensionError):
            integrate_against_kernels(resolvent(0, 1.0, 2, nu=2.0), [PointKernel(1.0)], spec)

    def test_coupled_resolvent_via_laplace(self, spec):
        # d1 d2 (1 + z1 + z2)^-1 = 2 (1 + z1 + z2)^-3
        g = parse_expr("2*res([1, 1], 1, 3)", 2)
        z = [0.5, 1.0 + 0.5j]
        res = integrate_against_kernels(g, [PointKernel(complex(x)) for x in z], spec)
        assert abs(res.value - 1.0 / (1.0 + z[0] + z[1])) < 1e-5
        assert isinstance(res.converged, bool)

    def test_coupled_term_constant_in_a_variable(self, spec):
        g = parse_expr("res([1, 1, 0], 1, 2)", 3)
        with pytest.raises(IntegrabilityError):
            integrate_against_kernels(g, [PointKernel(1.0)] * 3, spec)


class TestAdaptiveRefinement:
    """Refinement rounds, the node budget and reported errors"""

    @staticmethod
    def peak(t):
        return np.exp(-100.0 * ((t[..., 0] - 1.0) ** 2 + (t[..., 1] - 1.0) ** 2))

    def test_converged_is_a_plain_bool(self, spec):
        res = integrate_halfline(lambda t: np.exp(-t[..., 0]), 1, spec)
        assert type(res.converged) is bool

    def test_budget_refines_worst_axis_only(self):
        spec = QuadSpec(max_points=5000)
        res = integrate_halfline(self.peak, 2, spec)
        assert res.rounds == 1
        assert res.n_evals == 60 * 60 + 75 * 60
        assert res.converged is False
        assert abs(res.value.real - math.pi / 100.0) <= res.err_est

    def test_unconverged_error_covers_last_change(self):
        coarse = integrate_halfline(self.peak, 2, QuadSpec(max_refine_depth=0))
        once = integrate_halfline(self.peak, 2, QuadSpec(max_refine_depth=1))
        assert once.rounds == 1
        if not once.converged:
            assert once.err_est >= abs(once.value - coarse.value)

    def test_linearity_within_error(self, spec):
        def f(t):
            return np.exp(-t[..., 0])

        def g(t):
            return 1.0 / (1.0 + t[..., 0]) ** 2

        rf = integrate_halfline(f, 1, spec)
        rg = integrate_halfline(g, 1, spec)
        rh = integrate_halfline(lambda t: f(t) + 2.0 * g(t), 1, spec)
        assert abs(rh.value - (rf.value + 2.0 * rg.value)) <= rh.budget + rf.budget + 2.0 * rg.budget

    def test_tightening_stays_within_budget(self):
        spec = QuadSpec(rel_tol=1e-4, mapping="truncate", alpha_max=50.0)

        def g(t):
            return 1.0 / (1.0 + t[..., 0]) ** 4

        loose = integrate_halfline(g, 1, spec)
        tight = integrate_halfline(g, 1, spec.tightened())
        assert abs(tight.value - loose.value) <= loose.budget + tight.budget

    def test_worker_count_does_not_change_results(self, monkeypatch, spec):
        monkeypatch.setattr(quad, "_CHUNK_POINTS", 120)
        g = lambda t: np.exp(-t[..., 0] - 2.0 * t[..., 1])  # noqa: E731
        monkeypatch.setenv("BESOV_WORKERS", "1")
        serial = integrate_halfline(g, 2, spec)
        monkeypatch.setenv("BESOV_WORKERS", "4")
        threaded = integrate_halfline(g, 2, spec)
        assert serial.value == threaded.value
        assert serial.err_est == threaded.err_est
        assert serial.n_evals == threaded.n_evals
