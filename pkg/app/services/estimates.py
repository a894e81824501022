"""
Closed-form B_0^n norm bounds for damped, spectrally separated and bandlimited
functions, and their comparison against computed norms.
"""
import csv
import io
import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from ..errors import DomainError, NotDiagonalizableError, PreconditionError, UnsupportedAtomError
from ..models.expr import Exp, FnExpr, VarSet, exp_tau, make_prod, make_sum, r_nu, s_nu
from ..models.tuples import OperatorTuple
from ..schemas.quad import QuadSpec
from ..schemas.reports import BoundReport, GapReport
from .besov import seminorm
from .fnalg import (
    DEFAULT_SEED,
    boundary_sup,
    expand_terms,
    partial,
    sample_points,
    slice_sup,
    sup_norm,
    to_text,
    translate,
    values,
)
from .linalg import opnorm
from .opcalc import calc, diag_oracle, gsf_constant, hp_calc
from .quad import integrate_halfline

logger = logging.getLogger(__name__)


def _margin(lam: complex, omega: float) -> float:
    m = min(float(omega), complex(lam).real)
    if not m > 0:
        raise DomainError(f"need omega > 0 and Re lambda > 0, got omega={omega}, lambda={lam}")
    return m


def bound_R(nu: float, lam: complex, omega: float, n: int, hnorm: float) -> float:
    """||R^nu_lambda f||_{B_0^n} <= ||f||_{H^inf_omega} (1/(2 nu) + m^(-nu))^n, m = min(omega, Re lambda)."""
    m = _margin(lam, omega)
    return float(hnorm * (1.0 / (2.0 * nu) + m ** (-nu)) ** n)


def bound_S(nu: float, lam: complex, omega: float, n: int, hnorm: float) -> float:
    """||S^nu_lambda f||_{B_0^n} <= ||f||_{H^inf_omega} m^(-nu) (n/(2 nu) + 1)^n."""
    m = _margin(lam, omega)
    return float(hnorm * m ** (-nu) * (n / (2.0 * nu) + 1.0) ** n)


def bound_exp_window(tau: float, omega: float, n: int, hnorm: float) -> float:
    """Spectrum in [tau, inf)^n: ||f||_{B_0^n} <= ||f||_{H^inf_omega} e^(-n omega tau) (1 + log(1 + 1/(tau omega))/2)^n."""
    if not (tau > 0 and omega > 0):
        raise DomainError(f"need tau > 0 and omega > 0, got tau={tau}, omega={omega}")
    return float(hnorm * math.exp(-n * omega * tau) * (1.0 + 0.5 * math.log1p(1.0 / (tau * omega))) ** n)


def bound_bandlimited(eps: float, sigma: float, n: int, supnorm: float) -> float:
    """Spectrum in [eps, sigma]^n: ||f||_{B_0^n} <= 2^(n+1) ||f||_inf log(1 + (2 sigma/eps)^n)^n."""
    if not 0 < eps < sigma:
        raise DomainError(f"need 0 < eps < sigma, got eps={eps}, sigma={sigma}")
    return float(2 ** (n + 1) * supnorm * math.log1p((2.0 * sigma / eps) ** n) ** n)


def jk_bound(k: int, a: float) -> float:
    """4^k log^k(1 + 1/a)."""
    if not 0 < a < 1:
        raise DomainError(f"J_k needs a in (0, 1), got {a}")
    return float(4 ** k * math.log1p(1.0 / a) ** k)


def jk_numeric(k: int, a: float, spec: QuadSpec) -> float:
    """J_k(a) = int_{R_+^k} dt / (prod_j t_j + a exp(sum_j t_j))."""
    if not 0 < a < 1:
        raise DomainError(f"J_k needs a in (0, 1), got {a}")
    if k not in (1, 2, 3):
        raise DomainError(f"J_k is computed for k in 1..3, got {k}")

    def integrand(t):
        return 1.0 / (np.prod(t, axis=-1) + a * np.exp(np.sum(t, axis=-1)))

    res = integrate_halfline(integrand, k, spec, label=f"J_{k}({a:g})")
    return float(res.value.real)


def h_infty_omega(f: FnExpr, omega: float) -> float:
    """sup |f| over Re z_j > -omega, via the translate z -> f(z - omega)."""
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    return sup_norm(translate(f, [-float(omega)] * f.n))


def _exponential_sum(f: FnExpr) -> list:
    """(coefficient, exponent vector) pairs of an exponential sum; other atoms are rejected."""
    out = []
    for term in expand_terms(f):
        rate = np.zeros(f.n)
        for atom in term.atoms:
            if not isinstance(atom, Exp):
                raise PreconditionError(f"{to_text(f)} is not an exponential sum")
            rate += np.asarray(atom.a)
        out.append((term.coef, rate))
    return out


def bernstein_check(f: FnExpr, omega: VarSet, sigma: Optional[float] = None,
                    alphas: Sequence[float] = (0.05, 0.2, 1.0, 3.0)) -> GapReport:
    """
    sup_beta |D_Omega f(alpha + i beta)| <= sigma^|Omega| sup_beta |f(alpha + i beta)| on a diagonal alpha grid.

    Raises:
        PreconditionError: f is not an exponential sum with exponents in [0, sigma]^n
    """
    pieces = _exponential_sum(f)
    top = max((float(np.max(rate)) for _, rate in pieces), default=0.0)
    sigma = top if sigma is None else float(sigma)
    if top > sigma:
        raise PreconditionError(f"exponent {top} of {to_text(f)} exceeds sigma = {sigma}")
    g = partial(f, omega)
    everything = list(range(f.n))
    rows = np.repeat(np.asarray(alphas, dtype=float)[:, None], f.n, axis=1)
    lhs = slice_sup(g, everything, rows)
    rhs = sigma ** len(omega) * slice_sup(f, everything, rows)
    excess = float(np.max((lhs - rhs) / np.maximum(rhs, 1e-300)))
    return GapReport.of(f"Bernstein {omega} {to_text(f)}", max(0.0, excess), 1e-3, detail=f"sigma={sigma:g}")


def poisson_check(f: FnExpr, tau: float, count: int = 20, seed: int = DEFAULT_SEED) -> GapReport:
    """|f(z)| <= exp(-tau sum_j Re z_j) sup_{Re z = 0} |f| for exponential sums with exponents >= tau."""
    pieces = _exponential_sum(f)
    if any(float(np.min(rate)) < tau for _, rate in pieces):
        raise PreconditionError(f"{to_text(f)} has exponents below tau = {tau}")
    z = sample_points(f.n, count, seed)
    edge = boundary_sup(f)
    lhs = np.abs(values(f, z))
    rhs = np.exp(-tau * np.sum(z.real, axis=-1)) * edge
    excess = float(np.max(lhs - rhs * (1.0 + 1e-9)))
    return GapReport.of(f"Poisson bound tau={tau:g}", max(0.0, excess), 1e-12, detail=to_text(f))


def bandlimited_product(eps: float, sigma: float, n: int) -> FnExpr:
    """prod_j (exp(-eps z_j) - exp(-sigma z_j)), spectrum in [eps, sigma]^n."""
    factors = []
    for j in range(n):
        low = [0.0] * n
        high = [0.0] * n
        low[j] = eps
        high[j] = sigma
        factors.append(make_sum([Exp(n, tuple(low)), -1.0 * Exp(n, tuple(high))]))
    return make_prod(factors)


def _b0(f: FnExpr, spec: QuadSpec) -> tuple[float, float]:
    entry = seminorm(f, VarSet.full(f.n), spec)
    return entry.value, entry.err_est


def function_estimate_suite(spec: QuadSpec, dims: Sequence[int] = (1, 2)) -> list[BoundReport]:
    """
    Every closed-form bound against the computed B_0^n norm over the grid
    eps/sigma in {1/2, 1/4}, tau omega in {0.25, 1, 4}, nu in {1/2, 1, 2}, n in {1, 2},
    plus J_k for k in {1, 2, 3}.
    """
    rows = []
    omega, lam = 1.0, 1.0
    for n in dims:
        for nu in (0.5, 1.0, 2.0):
            params = {"n": n, "nu": nu, "lambda": lam, "omega": omega}
            hnorm = 1.0
            value, err = _b0(r_nu(nu, lam, n), spec)
            rows.append(BoundReport.of("resolvent-product", params, bound_R(nu, lam, omega, n, hnorm), value, budget=err))
            value, err = _b0(s_nu(nu, lam, n), spec)
            rows.append(BoundReport.of("resolvent-sum", params, bound_S(nu, lam, omega, n, hnorm), value, budget=err))
        for tau_omega in (0.25, 1.0, 4.0):
            tau = tau_omega / omega
            f = exp_tau(tau, n)
            value, err = _b0(f, spec)
            params = {"n": n, "tau": tau, "omega": omega}
            bound = bound_exp_window(tau, omega, n, h_infty_omega(f, omega))
            rows.append(BoundReport.of("exponential-window", params, bound, value, budget=err))
        sigma = 2.0
        for ratio in (0.5, 0.25):
            eps = ratio * sigma
            f = bandlimited_product(eps, sigma, n)
            value, err = _b0(f, spec)
            params = {"n": n, "eps": eps, "sigma": sigma}
            rows.append(BoundReport.of("bandlimited", params, bound_bandlimited(eps, sigma, n, sup_norm(f)), value,
                                       budget=err))
    for k in (1, 2, 3):
        for a in (0.1, 0.5, 0.9):
            rows.append(BoundReport.of("jk", {"k": k, "a": a}, jk_bound(k, a), jk_numeric(k, a, spec)))
    failed = sum(1 for r in rows if not r.passed)
    logger.info(f"function estimates: {len(rows)} bounds, {failed} exceeded")
    return rows


def _operator_value(f: FnExpr, tup: OperatorTuple, spec: QuadSpec) -> tuple[np.ndarray, float]:
    try:
        return hp_calc(f, tup), 0.0
    except UnsupportedAtomError:
        pass
    try:
        return diag_oracle(f, tup), 0.0
    except NotDiagonalizableError:
        result = calc(f, tup, spec)
        return result.value, result.budget


def operator_estimate_suite(tup: OperatorTuple, spec: QuadSpec, gamma: Optional[float] = None) -> list[BoundReport]:
    """
    ||f(A)|| against gamma * (function bound) for the three estimate families, with
    gamma the calculus constant (2/pi)^n gamma_upper of the full tuple.
    """
    n = tup.n
    if gamma is None:
        gamma = gsf_constant(tup, VarSet.full(n), spec).calc_bound
    rows = []
    omega, lam = 1.0, 1.0
    for nu in (1.0, 2.0):
        params = {"n": n, "nu": nu, "lambda": lam, "omega": omega, "gamma": gamma}
        value, budget = _operator_value(r_nu(nu, lam, n), tup, spec)
        rows.append(BoundReport.of("operator resolvent-product", params, gamma * bound_R(nu, lam, omega, n, 1.0),
                                   opnorm(value), budget=budget))
        value, budget = _operator_value(s_nu(nu, lam, n), tup, spec)
        rows.append(BoundReport.of("operator resolvent-sum", params, gamma * bound_S(nu, lam, omega, n, 1.0),
                                   opnorm(value), budget=budget))
    tau = 1.0
    f = exp_tau(tau, n)
    value, budget = _operator_value(f, tup, spec)
    bound = gamma * bound_exp_window(tau, omega, n, h_infty_omega(f, omega))
    rows.append(BoundReport.of("operator exponential-window", {"n": n, "tau": tau, "omega": omega, "gamma": gamma},
                               bound, opnorm(value), budget=budget))
    eps, sigma = 1.0, 2.0
    f = bandlimited_product(eps, sigma, n)
    value, budget = _operator_value(f, tup, spec)
    bound = gamma * bound_bandlimited(eps, sigma, n, sup_norm(f))
    rows.append(BoundReport.of("operator bandlimited", {"n": n, "eps": eps, "sigma": sigma, "gamma": gamma},
                               bound, opnorm(value), budget=budget))
    return rows


CSV_COLUMNS = ("lemma", "params", "bound", "empirical", "ratio")


def to_csv(rows: Iterable[BoundReport]) -> str:
    """lemma, params, bound, empirical, ratio; params as sorted key=value pairs."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        params = ";".join(f"{key}={row.params[key]}" for key in sorted(row.params))
        writer.writerow([row.lemma, params, repr(row.bound), repr(row.empirical), repr(row.ratio)])
    return buffer.getvalue()
