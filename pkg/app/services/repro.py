"""
The kernels K and K_n, the operator Q_n, the reproducing formulas, the shift
semigroup T(t) and the sum-of-variables embedding B^1 -> B^n.
"""
import logging
import math
from dataclasses import dataclass
from functools import singledispatch
from threading import Lock
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..errors import DimensionError, DomainError, IntegrabilityError, PreconditionError
from ..models.expr import Const, Exp, FnExpr, Prod, ResLin, Scale, Sum, VarSet, make_prod, make_scale, make_sum, rho
from ..schemas.quad import QuadResult, QuadSpec
from ..schemas.reports import GapReport, ReproResult, encode_complex
from .besov import bnorm
from .decomp import elementary_decompose, is_elementary
from .fnalg import (
    DEFAULT_SEED,
    evaluate,
    expand_terms,
    is_zero,
    partial,
    sample_points,
    support,
    to_text,
    translate,
    values,
)
from .quad import integrate_against_kernels, integrate_dVn

logger = logging.getLogger(__name__)

KERNEL_SCALE = -2.0 / math.pi


def kernel(z: complex, lam: complex) -> complex:
    """K(z, lambda) = (-2/pi) (z + lambda)^(-2)."""
    z, lam = complex(z), complex(lam)
    if not (z.real > 0 and lam.real > 0):
        raise DomainError(f"kernel needs Re z > 0 and Re lambda > 0, got z={z}, lambda={lam}")
    return KERNEL_SCALE / (z + lam) ** 2


def kernel_n(z: Sequence[complex], lam: Sequence[complex]) -> complex:
    """K_n(z, lambda) = prod_j K(z_j, lambda_j)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    if z.shape != lam.shape:
        raise DimensionError(f"kernel points of sizes {z.size} and {lam.size}")
    return complex(math.prod(kernel(a, b) for a, b in zip(z, lam)))


@dataclass(frozen=True)
class PointKernel:
    """lambda -> factor * (z + conj(lambda))^(-power); K(z, conj lambda) with the defaults."""

    z: complex
    power: float = 2.0
    factor: complex = KERNEL_SCALE
    value_shape: tuple = ()

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        return self.factor * (self.z + np.conj(lam)) ** (-self.power)


def _point(z, n: Optional[int] = None) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex)).reshape(-1)
    if n is not None and z.size != n:
        raise DimensionError(f"point has {z.size} coordinates, expected {n}")
    if np.any(z.real <= 0):
        raise DomainError(f"point {z.tolist()} is outside the open poly-half-plane")
    return z


def _nonneg(t, n: int) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size == 1 and n > 1:
        t = np.full(n, t[0])
    if t.size != n:
        raise DimensionError(f"shift vector has {t.size} entries, expected {n}")
    if np.any(t < 0):
        raise PreconditionError(f"shifts must be nonnegative, got {t.tolist()}")
    return t


# ---------------------------------------------------------------------------
# Integrability of Q_n integrands
# ---------------------------------------------------------------------------

_integrability_cache: dict = {}
_cache_lock = Lock()


def _cut_integral(h: Callable, k: int, radius: float, spec: QuadSpec) -> float:
    """int |h| prod_j |lambda_j|^(-2) (1 + |lambda_j|^2 / R^2)^(-1) dV_k."""

    def integrand(pts):
        mod2 = np.abs(pts) ** 2
        return h(pts) * np.prod(1.0 / (mod2 * (1.0 + mod2 / radius ** 2)), axis=-1)

    return float(integrate_dVn(integrand, k, spec).value.real)


def _modulus_bound(g: FnExpr, radius: float, spec: QuadSpec) -> float:
    total = 0.0
    for term in expand_terms(g):
        parts = term.separate()
        if parts is None:
            expr = term.to_expr()
            total += _cut_integral(lambda pts, e=expr: np.abs(values(e, pts)), g.n, radius, spec)
            continue
        value = abs(term.coef)
        for phi in parts:
            value *= _cut_integral(lambda pts, p=phi: np.abs(values(p, pts)), 1, radius, spec)
        total += value
    return total


def check_integrability(g: FnExpr, spec: QuadSpec, radius: float = 1e3) -> GapReport:
    """
    Numerical check of int |g(lambda)| prod_j Re lambda_j / |lambda_j|^2 dS_n(lambda) < infinity.

    Each expanded term is bounded by the integral of its modulus (a product of
    one-variable integrals for separated terms) under a smooth cutoff at radius R.
    The bound is accepted when doubling R moves it by at most 5%.
    """
    key = (to_text(g), radius)
    with _cache_lock:
        if key in _integrability_cache:
            return _integrability_cache[key]
    if is_zero(g):
        report = GapReport.of("integrability", 0.0, 0.05, lhs=0.0, rhs=0.0, detail=to_text(g))
    else:
        coarse = spec.model_copy(update={
            "mapping": "compact",
            "rel_tol": max(spec.rel_tol, 1e-3),
            "max_refine_depth": min(spec.max_refine_depth, 3),
        })
        inner = _modulus_bound(g, radius, coarse)
        outer = _modulus_bound(g, 2.0 * radius, coarse)
        change = abs(outer - inner) / max(abs(outer), 1e-300)
        report = GapReport.of("integrability", change, 0.05, lhs=outer, rhs=inner, detail=to_text(g))
    with _cache_lock:
        _integrability_cache[key] = report
    return report


def apply_Qn(g: Union[FnExpr, Callable], z, spec: QuadSpec, check: bool = True) -> QuadResult:
    """
    (Q_n g)(z) = int K_n(z, conj lambda) g(lambda) dV_n(lambda).

    Expressions are checked for integrability first and integrated term by term;
    callables (points (..., n) -> values) go straight to the dV_n quadrature.

    Raises:
        IntegrabilityError: the integrability check failed
    """
    if not isinstance(g, FnExpr):
        z = _point(z)

        def integrand(pts):
            return g(pts) * np.prod(KERNEL_SCALE * (z + np.conj(pts)) ** -2, axis=-1)

        return integrate_dVn(integrand, z.size, spec)
    z = _point(z, g.n)
    if is_zero(g):
        return QuadResult(value=0j, err_est=0.0, n_evals=1)
    if check:
        report = check_integrability(g, spec)
        if not report.passed:
            raise IntegrabilityError(
                f"{to_text(g)} fails the integrability check (bound moved by {report.gap:.1%} under doubling)"
            )
    return integrate_against_kernels(g, [PointKernel(complex(zj)) for zj in z], spec)


# ---------------------------------------------------------------------------
# Reproducing formulas
# ---------------------------------------------------------------------------


def reproduce_elementary(f: FnExpr, z, spec: QuadSpec) -> ReproResult:
    """f_el(z) against (Q_n D_n f)(z), with f_el the Omega = I_n part of f."""
    z = _point(z, f.n)
    full = VarSet.full(f.n)
    lhs = complex(evaluate(elementary_decompose(f).part_at(full), z))
    res = apply_Qn(partial(f, full), z, spec)
    gap = abs(lhs - res.value)
    budget = res.budget + 1e-4
    return ReproResult(
        name="reproduce elementary",
        z=[encode_complex(x) for x in z],
        lhs=lhs,
        rhs=res.value,
        gap=gap,
        budget=budget,
        passed=bool(gap <= budget),
        n_evals=res.n_evals,
    )


def reproduce_shifted(f: FnExpr, z, t, spec: QuadSpec) -> ReproResult:
    """
    f(z + t) against int K_n(z + t, conj lambda) (D_n f)(lambda) dV_n(lambda).

    Raises:
        PreconditionError: f is not elementary with support I_n
    """
    z = _point(z, f.n)
    t = _nonneg(t, f.n)
    full = VarSet.full(f.n)
    if not is_zero(f) and (support(f) != full or not is_elementary(f)):
        raise PreconditionError(f"{to_text(f)} does not vanish at infinity in every variable")
    lhs = complex(evaluate(f, z + t))
    res = apply_Qn(partial(f, full), z + t, spec)
    gap = abs(lhs - res.value)
    budget = res.budget + 1e-4
    return ReproResult(
        name="reproduce shifted",
        z=[encode_complex(x) for x in z],
        lhs=lhs,
        rhs=res.value,
        gap=gap,
        budget=budget,
        passed=bool(gap <= budget),
        n_evals=res.n_evals,
    )


def smoothed_identity(f: FnExpr, z, t, spec: QuadSpec) -> ReproResult:
    """
    (-2/pi)^n int D_n(f rho_1^2)(lambda) rho_{t + conj lambda}(z)^2 dV_n(lambda)
    against (T(t)f)(z) rho_{1+t}(z)^2.
    """
    z = _point(z, f.n)
    t = _nonneg(t, f.n)
    full = VarSet.full(f.n)
    smoothed = f * rho([1.0] * f.n, 2.0)
    res = apply_Qn(partial(smoothed, full), z + t, spec)
    rhs = complex(evaluate(shift(f, t) * rho(list(1.0 + t), 2.0), z))
    gap = abs(res.value - rhs)
    budget = res.budget + 1e-4
    return ReproResult(
        name=f"smoothed identity t={t.tolist()}",
        z=[encode_complex(x) for x in z],
        lhs=res.value,
        rhs=rhs,
        gap=gap,
        budget=budget,
        passed=bool(gap <= budget),
        n_evals=res.n_evals,
    )


# ---------------------------------------------------------------------------
# Shift semigroup and sums of variables
# ---------------------------------------------------------------------------


def shift(f: FnExpr, t) -> FnExpr:
    """(T(t)f)(z) = f(z + t) for t >= 0 componentwise."""
    return translate(f, _nonneg(t, f.n))


@singledispatch
def _spread(f: FnExpr, n: int) -> FnExpr:
    raise TypeError(f"cannot spread {type(f).__name__}")


@_spread.register
def _(f: Const, n: int) -> FnExpr:
    return Const(n, f.c)


@_spread.register
def _(f: ResLin, n: int) -> FnExpr:
    return ResLin(n, (f.w[0],) * n, f.lam, f.nu)


@_spread.register
def _(f: Exp, n: int) -> FnExpr:
    return Exp(n, (f.a[0],) * n)


@_spread.register
def _(f: Sum, n: int) -> FnExpr:
    return make_sum(_spread(child, n) for child in f.children)


@_spread.register
def _(f: Prod, n: int) -> FnExpr:
    return make_prod(_spread(child, n) for child in f.children)


@_spread.register
def _(f: Scale, n: int) -> FnExpr:
    return make_scale(f.c, _spread(f.child, n))


def sum_of_vars(f: FnExpr, n_target: int) -> FnExpr:
    """g(z) = f(z_1 + ... + z_n) for a one-variable f."""
    if f.n != 1:
        raise DimensionError(f"sum_of_vars needs a one-variable function, got dimension {f.n}")
    if n_target < 1:
        raise DimensionError(f"target dimension must be positive, got {n_target}")
    return _spread(f, n_target)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_reproduction(f: FnExpr, spec: QuadSpec, count: int = 20, seed: int = DEFAULT_SEED) -> list[GapReport]:
    """Q_n D_n f reproduces the elementary part at sampled points."""
    rows = []
    for k, z in enumerate(sample_points(f.n, count, seed, re_range=(0.2, 5.0), im_half=3.0)):
        result = reproduce_elementary(f, z, spec)
        rows.append(result.as_gap().model_copy(update={"name": f"reproduce {to_text(f)} #{k}"}))
    return rows


def check_shift_semigroup(f: FnExpr, s, t, count: int = 20, tol: float = 1e-12) -> GapReport:
    """T(t)T(s)f = T(s+t)f pointwise."""
    s = _nonneg(s, f.n)
    t = _nonneg(t, f.n)
    z = sample_points(f.n, count, DEFAULT_SEED)
    lhs = values(shift(shift(f, s), t), z)
    rhs = values(shift(f, s + t), z)
    gap = float(np.max(np.abs(lhs - rhs)))
    return GapReport.of("shift semigroup", gap, tol * (1.0 + float(np.max(np.abs(rhs)))), detail=to_text(f))


def check_shift_contraction(f: FnExpr, ts: Sequence, spec: QuadSpec) -> list[GapReport]:
    """||T(t)f||_{B^n} <= ||f||_{B^n} on a grid of shifts."""
    base = bnorm(f, spec, False)
    rows = []
    for t in ts:
        shifted = bnorm(shift(f, t), spec, False)
        budget = base.err_est + shifted.err_est + 1e-9
        rows.append(GapReport.inequality(f"shift contraction t={np.ravel(t).tolist()}", shifted.total, base.total, budget))
    return rows


def check_shift_continuity(f: FnExpr, small, large, spec: QuadSpec) -> GapReport:
    """||T(t)f - f||_{B^n} is smaller for the smaller shift."""
    near = bnorm(shift(f, small) - f, spec, False)
    far = bnorm(shift(f, large) - f, spec, False)
    return GapReport(
        name="shift continuity",
        gap=max(0.0, near.total - far.total),
        budget=near.err_est + far.err_est,
        passed=bool(near.total < far.total),
        lhs=near.total,
        rhs=far.total,
        detail=to_text(f),
    )


def check_sum_of_vars_bounded(f: FnExpr, n_target: int, spec: QuadSpec) -> GapReport:
    """The image of f under sum_of_vars has a finite B^n norm."""
    report = bnorm(sum_of_vars(f, n_target), spec, True)
    finite = math.isfinite(report.total) and not report.diverged
    return GapReport(
        name=f"sum of variables n={n_target}",
        gap=0.0 if finite else report.total,
        budget=0.0,
        passed=finite,
        lhs=report.total,
        detail=report.expr,
    )


def check_kernel_square_mass(spec: QuadSpec) -> GapReport:
    """int_{C_+} |K(1, conj lambda)|^2 dV(lambda) = 1/pi."""
    res = integrate_dVn(lambda pts: np.abs(KERNEL_SCALE * (1.0 + np.conj(pts[..., 0])) ** -2) ** 2, 1, spec)
    target = 1.0 / math.pi
    return GapReport.of("kernel square mass", abs(res.value.real - target), res.budget + 1e-8,
                        lhs=res.value.real, rhs=target)
