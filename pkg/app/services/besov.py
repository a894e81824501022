"""
H_Omega f, the seminorms ||f||_{B^n_Omega}, the B^n norm and the norm-level checks.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from ..config import get_engine_config
from ..errors import DimensionError, DomainError
from ..models.expr import Const, Exp, FnExpr, VarSet, make_prod, power_set
from ..schemas.quad import QuadSpec
from ..schemas.reports import GapReport, SeminormEntry, SeminormReport
from .fnalg import (
    dilate,
    evaluate,
    expand_terms,
    is_zero,
    partial,
    project,
    sample_points,
    slice_sup,
    sup_norm,
    support,
    to_text,
)
from .quad import integrate_halfline

logger = logging.getLogger(__name__)


def _check_alpha(omega: VarSet, alpha) -> np.ndarray:
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (len(omega),):
        raise DimensionError(f"need {len(omega)} real parts for {omega}, got {alpha.shape[0]}")
    if np.any(alpha <= 0):
        raise DomainError(f"real parts must be positive, got {alpha.tolist()}")
    return alpha


def h_omega(f: FnExpr, omega: VarSet, alpha, rounds: int = 3) -> float:
    """
    Estimate H_Omega f(alpha) = sup |D_Omega f(z)| over z with Re z_j = alpha_j (j in Omega).

    The variables outside Omega range over the closed half-plane. The value is a
    grid-refined lower estimate of the supremum.
    """
    alpha = _check_alpha(omega, alpha)
    g = partial(f, omega)
    if isinstance(g, Const):
        return abs(g.c)
    return float(slice_sup(g, omega.indices, alpha[None, :], rounds=rounds)[0])


def cauchy_bound(f: FnExpr, omega: VarSet, alpha, sup: Optional[float] = None) -> float:
    """Upper bound ||f||_inf / (2^|Omega| prod_j alpha_j) for H_Omega f(alpha)."""
    alpha = _check_alpha(omega, alpha)
    sup = sup_norm(f) if sup is None else sup
    return float(sup / (2.0 ** len(omega) * np.prod(alpha)))


class _SliceSupCache:
    """H_Omega g on rows of real parts, memoized across refinement rounds."""

    def __init__(self, g: FnExpr, fixed: Sequence[int]):
        self.g = g
        self.fixed = list(fixed)
        self.cache: dict = {}

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        shape = pts.shape[:-1]
        rows = pts.reshape(-1, pts.shape[-1])
        keys = [r.tobytes() for r in rows]
        missing = [i for i, key in enumerate(keys) if key not in self.cache]
        if missing:
            fresh = slice_sup(self.g, self.fixed, rows[missing])
            for i, v in zip(missing, fresh):
                self.cache[keys[i]] = v
        return np.array([self.cache[key] for key in keys]).reshape(shape)


def _looks_divergent(hfun, k: int, spec: QuadSpec) -> bool:
    """Two doublings of the truncation both move the integral by more than rel_tol,
    and the second move is not smaller than 0.9 times the first."""
    values, errs = [], []
    for i in range(3):
        trunc = spec.model_copy(update={
            "mapping": "truncate",
            "alpha_max": spec.alpha_max * 2 ** i,
            "max_refine_depth": min(spec.max_refine_depth, 4),
        })
        res = integrate_halfline(hfun, k, trunc, label=f"divergence probe {i}")
        values.append(res.value.real)
        errs.append(res.err_est)
    d1 = abs(values[1] - values[0])
    d2 = abs(values[2] - values[1])
    floor = max(spec.rel_tol * abs(values[2]), errs[1] + errs[2])
    return d1 > floor and d2 > floor and d2 >= 0.9 * d1


def _split_exp(atom: FnExpr) -> list[FnExpr]:
    if not isinstance(atom, Exp):
        return [atom]
    out = []
    for j, a in enumerate(atom.a):
        if a > 0:
            rate = [0.0] * atom.n
            rate[j] = a
            out.append(Exp(atom.n, tuple(rate)))
    return out


def product_groups(f: FnExpr) -> Optional[tuple[complex, list[tuple[VarSet, FnExpr]]]]:
    """
    Split a single-term f into c * prod_g f_g with pairwise disjoint variable groups.

    Returns None when f expands into several terms or has a single group.
    """
    terms = expand_terms(f)
    if len(terms) != 1 or not terms[0].atoms:
        return None
    term = terms[0]
    atoms = [piece for atom in term.atoms for piece in _split_exp(atom)]
    groups: list[tuple[set, list]] = []
    for atom in atoms:
        vars_ = set(support(atom).indices)
        merged_vars, merged_atoms = set(vars_), [atom]
        rest = []
        for g_vars, g_atoms in groups:
            if g_vars & merged_vars:
                merged_vars |= g_vars
                merged_atoms = g_atoms + merged_atoms
            else:
                rest.append((g_vars, g_atoms))
        groups = rest + [(merged_vars, merged_atoms)]
    if len(groups) < 2:
        return None
    groups.sort(key=lambda item: min(item[0]))
    return term.coef, [(VarSet.of(f.n, sorted(v)), make_prod(a)) for v, a in groups]


def _generic_seminorm(f: FnExpr, omega: VarSet, spec: QuadSpec, check_divergence: bool) -> SeminormEntry:
    supp = support(f)
    reduced = project(f, supp)
    position = {j: k for k, j in enumerate(supp.indices)}
    local = VarSet.of(len(supp), [position[j] for j in omega.indices])
    g = partial(reduced, local)
    if is_zero(g):
        return SeminormEntry(omega=omega.labels, value=0.0, err_est=0.0, method="zero")
    hfun = _SliceSupCache(g, local.indices)
    res = integrate_halfline(hfun, len(local), spec, label=f"seminorm {omega}")
    diverged = _looks_divergent(hfun, len(local), spec) if check_divergence else False
    if diverged:
        logger.warning(f"seminorm {omega} of {to_text(f)} looks divergent")
    return SeminormEntry(
        omega=omega.labels,
        value=max(0.0, float(res.value.real)),
        err_est=res.err_est + res.truncation_est,
        converged=res.converged,
        diverged=diverged,
        method="generic",
    )


def seminorm(f: FnExpr, omega: VarSet, spec: QuadSpec, check_divergence: bool = False) -> SeminormEntry:
    """
    ||f||_{B^n_Omega}: the integral over R_+^|Omega| of H_Omega f.

    Omega = empty gives the H^inf estimate. Products of factors in disjoint variable
    groups are integrated group by group.
    """
    if omega.n != f.n:
        raise DimensionError(f"variable set over {omega.n} variables used with dimension {f.n}")
    if len(omega) == 0:
        return SeminormEntry(omega=[], value=sup_norm(f), err_est=0.0, method="sup")
    if not omega.issubset(support(f)):
        return SeminormEntry(omega=omega.labels, value=0.0, err_est=0.0, method="zero")
    split = product_groups(f)
    if split is None:
        return _generic_seminorm(f, omega, spec, check_divergence)
    coef, groups = split
    vals, errs = [], []
    converged = True
    diverged = False
    for group_vars, factor in groups:
        sub = omega & group_vars
        reduced = project(factor, group_vars)
        position = {j: k for k, j in enumerate(group_vars.indices)}
        local = VarSet.of(len(group_vars), [position[j] for j in sub.indices])
        entry = seminorm(reduced, local, spec, check_divergence)
        vals.append(entry.value)
        errs.append(entry.err_est)
        converged = converged and entry.converged
        diverged = diverged or entry.diverged
    value = abs(coef) * math.prod(vals)
    err = abs(coef) * sum(e * math.prod(vals[:i] + vals[i + 1:]) for i, e in enumerate(errs))
    return SeminormEntry(
        omega=omega.labels,
        value=value,
        err_est=err,
        converged=converged,
        diverged=diverged,
        method="factored",
    )


def bnorm(f: FnExpr, spec: QuadSpec, check_divergence: bool = True) -> SeminormReport:
    """All 2^n seminorms of f, in increasing mask order, and their sum."""
    subsets = power_set(f.n)
    workers = get_engine_config()["workers"]

    def one(omega: VarSet) -> SeminormEntry:
        return seminorm(f, omega, spec, check_divergence)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(one, subsets))
    else:
        entries = [one(omega) for omega in subsets]
    total = float(sum(e.value for e in entries))
    report = SeminormReport(
        expr=to_text(f),
        n=f.n,
        entries=entries,
        total=total,
        err_est=float(sum(e.err_est for e in entries)),
        hinfty=entries[0].value,
        b0=entries[-1].value,
        diverged=any(e.diverged for e in entries),
        quad=spec.model_dump(),
    )
    logger.info(f"B^{f.n} norm of {report.expr}: {total:.6g} (err {report.err_est:.2e})")
    if report.diverged:
        logger.warning(f"{report.expr} is likely not in B^{f.n}: divergent seminorm")
    return report


def check_uniform_continuity(f: FnExpr, spec: QuadSpec, count: int = 20, seed: Optional[int] = None) -> GapReport:
    """|f(z) - f(z')| <= 2 sum_j ||f||_{B^n_{j}} on sampled pairs."""
    seed = get_engine_config()["seed"] if seed is None else seed
    z = sample_points(f.n, count, seed)
    w = sample_points(f.n, count, seed + 1)
    lhs = float(np.max(np.abs(evaluate(f, z) - evaluate(f, w))))
    entries = [seminorm(f, VarSet.of(f.n, [j]), spec) for j in range(f.n)]
    rhs = 2.0 * sum(e.value for e in entries)
    budget = 2.0 * sum(e.err_est for e in entries) + 1e-12
    return GapReport.inequality("uniform continuity", lhs, rhs, budget, detail=to_text(f))


def check_submultiplicative(f: FnExpr, g: FnExpr, spec: QuadSpec) -> GapReport:
    """||fg||_{B^n} <= ||f||_{B^n} ||g||_{B^n}."""
    nf, ng, nfg = bnorm(f, spec, False), bnorm(g, spec, False), bnorm(f * g, spec, False)
    rhs = nf.total * ng.total
    budget = nfg.err_est + nf.err_est * ng.total + ng.err_est * nf.total + 1e-9
    return GapReport.inequality("submultiplicative", nfg.total, rhs, budget, detail=f"{nf.expr} ; {ng.expr}")


def check_b0_equivalence(f: FnExpr, spec: QuadSpec) -> GapReport:
    """||f||_{B^n} <= 2^n ||f||_{B_0^n} for f vanishing at infinity in each variable."""
    report = bnorm(f, spec, False)
    rhs = 2 ** f.n * report.b0
    budget = report.err_est + 2 ** f.n * report.entries[-1].err_est + 1e-9
    return GapReport.inequality("B_0 equivalence", report.total, rhs, budget, detail=report.expr)


def check_monotonicity(f: FnExpr, omega: VarSet, grid: Sequence[float] = (0.1, 0.3, 1.0, 3.0, 10.0)) -> GapReport:
    """H_Omega f is non-increasing along each alpha_j (checked on the diagonal grid and per axis)."""
    grid = sorted(float(x) for x in grid)
    worst = 0.0
    for j in range(len(omega)):
        values = []
        for x in grid:
            alpha = np.ones(len(omega))
            alpha[j] = x
            values.append(h_omega(f, omega, alpha))
        increases = np.diff(values)
        worst = max(worst, float(np.max(increases, initial=0.0)))
    return GapReport.of(f"monotone H_{omega}", max(0.0, worst), 1e-9, detail=to_text(f))


def check_scaling(f: FnExpr, b: float, spec: QuadSpec) -> GapReport:
    """||f(b .)||_{B^n} = ||f||_{B^n} for b > 0."""
    before = bnorm(f, spec, False)
    after = bnorm(dilate(f, b), spec, False)
    budget = before.err_est + after.err_est + 1e-3 * before.total
    return GapReport.of(f"scaling b={b:g}", abs(after.total - before.total), budget, lhs=after.total, rhs=before.total)
