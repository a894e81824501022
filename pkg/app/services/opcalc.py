"""
The B^n functional calculus for commuting matrix tuples.

f(A) is assembled from the elementary decomposition: the empty part contributes
a multiple of the identity, every other part f_{Omega,0} contributes the kernel
integral (-2/pi)^|Omega| int prod_{j in Omega} (A_j + conj lambda_j)^(-2)
(D_Omega f_{Omega,0})(lambda) dV(lambda). Independent oracles (diagonalization,
Hille-Phillips) and the GSF constants live here as well.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import singledispatch
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize_scalar

from ..config import get_engine_config
from ..errors import (
    DimensionError,
    DomainError,
    PreconditionError,
    TupleValidationError,
    UnsupportedAtomError,
)
from ..models.expr import Const, Exp, FnExpr, Prod, ResLin, Scale, Sum, VarSet, power_set, rho
from ..models.tuples import OperatorTuple
from ..schemas.quad import QuadResult, QuadSpec
from ..schemas.reports import (
    CalcPart,
    CalcResult,
    GapReport,
    GsfEntry,
    GsfReport,
    decode_matrix,
    encode_matrix,
)
from .besov import seminorm
from .decomp import ElementaryDecomposition, elementary_decompose
from .fnalg import partial, project, substitute, to_text, values
from .linalg import MatrixKernel, apply_diagonal, joint_diagonalize, opnorm, resolvent_power, shifted_resolvent
from .quad import integrate_against_kernels, integrate_lines
from .repro import shift, sum_of_vars

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Tuples
# ---------------------------------------------------------------------------


def validate_tuple(matrices: Sequence, tol: float = 1e-10) -> OperatorTuple:
    """
    Build an OperatorTuple after checking shapes, commutation and spectra.

    Raises:
        TupleValidationError: with every violated check listed
    """
    violations = []
    mats = []
    for j, m in enumerate(matrices):
        m = np.asarray(m, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            violations.append(f"A_{j + 1} is not square (shape {m.shape})")
        elif not np.all(np.isfinite(m)):
            violations.append(f"A_{j + 1} has non-finite entries")
        mats.append(m)
    if not mats:
        violations.append("empty tuple")
    if violations:
        raise TupleValidationError(violations)
    dims = {m.shape[0] for m in mats}
    if len(dims) > 1:
        raise TupleValidationError([f"matrices of different sizes {sorted(dims)}"])
    for j in range(len(mats)):
        for k in range(j + 1, len(mats)):
            comm = opnorm(mats[j] @ mats[k] - mats[k] @ mats[j])
            allowed = tol * opnorm(mats[j]) * opnorm(mats[k])
            if comm > allowed:
                violations.append(f"A_{j + 1}, A_{k + 1} do not commute (||[A_j, A_k]|| = {comm:.3e})")
    eigenvalues = []
    for j, m in enumerate(mats):
        eig = la.eigvals(m)
        eigenvalues.append(eig)
        floor = -1e-12 * max(1.0, opnorm(m))
        bad = eig[eig.real < floor]
        if bad.size:
            violations.append(f"A_{j + 1} has eigenvalues in the open left half-plane: {bad.tolist()}")
    if violations:
        raise TupleValidationError(violations)
    return OperatorTuple(tuple(mats), tol, tuple(eigenvalues))


def load_tuple(path: Union[str, Path]) -> OperatorTuple:
    """
    Read a tuple file {"n", "dim", "matrices", "commutation_tol"?}, entries as [re, im] pairs or reals.

    Raises:
        FileNotFoundError: missing file
        TupleValidationError: malformed content or invalid tuple
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"matrix file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise TupleValidationError([f"{path.name}: invalid JSON ({e.msg} at line {e.lineno})"]) from e
    try:
        matrices = [decode_matrix(rows) for rows in data["matrices"]]
    except (KeyError, TypeError, ValueError) as e:
        raise TupleValidationError([f"{path.name}: bad matrices entry ({e})"]) from e
    problems = []
    if "n" in data and int(data["n"]) != len(matrices):
        problems.append(f"n = {data['n']} but {len(matrices)} matrices given")
    if "dim" in data and any(m.shape[0] != int(data["dim"]) for m in matrices):
        problems.append(f"dim = {data['dim']} does not match the matrices")
    if problems:
        raise TupleValidationError(problems)
    return validate_tuple(matrices, float(data.get("commutation_tol", 1e-10)))


def dump_tuple(tup: OperatorTuple) -> dict:
    return {
        "n": tup.n,
        "dim": tup.dim,
        "matrices": [encode_matrix(m) for m in tup.matrices],
        "commutation_tol": tup.commutation_tol,
    }


def random_commuting_tuple(n: int, dim: int, seed: Optional[int] = None, diagonal: bool = False) -> OperatorTuple:
    """
    S diag(e_j) S^(-1) with a well-conditioned S (I plus a small complex perturbation)
    and joint eigenvalues with real parts in [0.5, 3].
    """
    seed = get_engine_config()["seed"] if seed is None else seed
    rng = np.random.default_rng(seed)
    basis = np.eye(dim, dtype=complex)
    if not diagonal:
        basis = basis + 0.3 * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(dim)
    matrices = []
    for _ in range(n):
        eig = rng.uniform(0.5, 3.0, size=dim) + 1j * rng.uniform(-1.0, 1.0, size=dim)
        matrices.append(apply_diagonal(basis, eig))
    return validate_tuple(matrices, 1e-9)


# ---------------------------------------------------------------------------
# The calculus
# ---------------------------------------------------------------------------


def kernel_op(tup: OperatorTuple, lam: Sequence[complex]) -> np.ndarray:
    """(-2/pi)^n prod_j (A_j + conj lambda_j)^(-2)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    if lam.size != tup.n:
        raise DimensionError(f"{lam.size} kernel coordinates for a tuple of {tup.n}")
    if np.any(lam.real <= 0):
        raise DomainError(f"kernel point {lam.tolist()} outside the open poly-half-plane")
    out = tup.identity()
    for j, lj in enumerate(lam):
        out = out @ MatrixKernel(tup[j])(np.asarray(lj))
    return out


def _check_dims(f: FnExpr, tup: OperatorTuple) -> None:
    if f.n != tup.n:
        raise DimensionError(f"function of {f.n} variables applied to a tuple of {tup.n} matrices")


def _part_integral(part: FnExpr, omega: VarSet, tup: OperatorTuple, spec: QuadSpec,
                   shift_by: float = 0.0) -> QuadResult:
    local = project(part, omega)
    g = partial(local, VarSet.full(len(omega)))
    kernels = [MatrixKernel(tup[j], shift=shift_by) for j in omega.indices]
    if isinstance(g, Const) and g.c == 0:
        return QuadResult(value=np.zeros((tup.dim, tup.dim), dtype=complex), err_est=0.0, n_evals=1)
    return integrate_against_kernels(g, kernels, spec)


def calc(f: FnExpr, tup: OperatorTuple, spec: QuadSpec,
         decomposition: Optional[ElementaryDecomposition] = None) -> CalcResult:
    """
    f(A) = sum over Omega of f_{Omega,0}(A_Omega).

    Part integrals run on BESOV_WORKERS threads and are summed in increasing
    mask order.
    """
    _check_dims(f, tup)
    decomposition = decomposition or elementary_decompose(f)
    items = decomposition.items()

    def one(item):
        omega, part = item
        if len(omega) == 0:
            c = complex(values(part, np.ones(f.n)))
            return QuadResult(value=c * tup.identity(), err_est=0.0, n_evals=1)
        return _part_integral(part, omega, tup, spec)

    workers = get_engine_config()["workers"]
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(item) for item in items]

    value = np.zeros((tup.dim, tup.dim), dtype=complex)
    parts = []
    for (omega, part), res in zip(items, results):
        value = value + res.value
        parts.append(CalcPart(
            omega=omega.labels,
            expr=to_text(part),
            err_est=res.err_est,
            truncation_est=res.truncation_est,
            n_evals=res.n_evals,
            converged=res.converged,
        ))
    result = CalcResult(
        value=value,
        parts=parts,
        err_est=float(sum(p.err_est for p in parts)),
        truncation_est=float(sum(p.truncation_est for p in parts)),
        converged=all(p.converged for p in parts),
        quad=spec.model_dump(),
    )
    logger.info(f"calc {to_text(f)} on a {tup.n}-tuple of {tup.dim}x{tup.dim} matrices: "
                f"{len(parts)} parts, err {result.err_est:.2e}")
    if not result.converged:
        logger.warning(f"calc {to_text(f)}: some part integrals did not meet the tolerance")
    return result


def rho_one_squared(tup: OperatorTuple, t: float = 0.0) -> np.ndarray:
    """prod_j (A_j + 1 + t)^(-2)."""
    out = tup.identity()
    for m in tup.matrices:
        out = out @ resolvent_power(m, 1.0 + t, 2)
    return out


def calc_qt(f: FnExpr, tup: OperatorTuple, t: float, spec: QuadSpec) -> CalcResult:
    """Q_t(f; A) = (-2/pi)^n int D_n(f rho_1^2)(lambda) prod_j (A_j + t + conj lambda_j)^(-2) dV_n."""
    _check_dims(f, tup)
    if not t > 0:
        raise DomainError(f"Q_t needs t > 0, got {t}")
    full = VarSet.full(f.n)
    smoothed = f * rho([1.0] * f.n, 2.0)
    res = _part_integral(smoothed, full, tup, spec, shift_by=float(t))
    return CalcResult(
        value=res.value,
        parts=[CalcPart(omega=full.labels, expr=to_text(smoothed), err_est=res.err_est,
                        truncation_est=res.truncation_est, n_evals=res.n_evals, converged=res.converged)],
        err_est=res.err_est,
        truncation_est=res.truncation_est,
        converged=res.converged,
        quad=spec.model_dump(),
    )


def qt_convergence(f: FnExpr, tup: OperatorTuple, ts: Sequence[float], spec: QuadSpec,
                   extrapolated_tol: float = 2e-3) -> list[GapReport]:
    """
    Q_t(f; A) -> f(A) rho_1(A)^2 as t -> 0.

    Rows: the closed form Q_t = f(A + t) rho_{1+t}(A)^2 for every t, the gap to the
    limit for every t, strict decrease of those gaps, and the Richardson value
    2 Q_{t/2} - Q_t at the smallest t.
    """
    ts = sorted((float(t) for t in ts), reverse=True)
    target_res = calc(f, tup, spec)
    target = target_res.value @ rho_one_squared(tup)
    rows = []
    gaps = []
    qts = {}
    for t in ts + [ts[-1] / 2.0]:
        qt = calc_qt(f, tup, t, spec)
        qts[t] = qt
        closed = calc(f, tup.shifted([t] * tup.n), spec)
        closed_value = closed.value @ rho_one_squared(tup, t)
        budget = qt.budget + closed.budget + 1e-6 * max(1.0, opnorm(closed_value))
        rows.append(GapReport.of(f"Q_t closed form t={t:g}", opnorm(qt.value - closed_value), budget))
        if t in ts:
            gap = opnorm(qt.value - target)
            gaps.append(gap)
            rows.append(GapReport(name=f"Q_t gap t={t:g}", gap=gap, budget=gap, passed=True))
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    rows.append(GapReport(name="Q_t gaps decreasing", gap=0.0 if decreasing else 1.0, budget=0.0,
                          passed=decreasing, detail=", ".join(f"{g:.3e}" for g in gaps)))
    small = ts[-1]
    extrapolated = 2.0 * qts[small / 2.0].value - qts[small].value
    budget = extrapolated_tol + 2.0 * qts[small / 2.0].budget + qts[small].budget + target_res.budget
    rows.append(GapReport.of(f"Q_t extrapolated t={small:g}", opnorm(extrapolated - target), budget))
    return rows


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


@singledispatch
def _hp(f: FnExpr, tup: OperatorTuple) -> np.ndarray:
    raise UnsupportedAtomError(f"no Hille-Phillips image for {type(f).__name__}")


@_hp.register
def _(f: Const, tup: OperatorTuple) -> np.ndarray:
    return f.c * tup.identity()


@_hp.register
def _(f: Exp, tup: OperatorTuple) -> np.ndarray:
    generator = sum(a * m for a, m in zip(f.a, tup.matrices))
    return la.expm(-generator)


@_hp.register
def _(f: ResLin, tup: OperatorTuple) -> np.ndarray:
    if not float(f.nu).is_integer():
        raise UnsupportedAtomError(f"resolvent power {f.nu} is not an integer")
    generator = sum(w * m for w, m in zip(f.w, tup.matrices))
    return np.asarray(shifted_resolvent(generator, np.asarray(f.lam), int(f.nu)))


@_hp.register
def _(f: Sum, tup: OperatorTuple) -> np.ndarray:
    return sum((_hp(child, tup) for child in f.children), np.zeros((tup.dim, tup.dim), dtype=complex))


@_hp.register
def _(f: Prod, tup: OperatorTuple) -> np.ndarray:
    out = tup.identity()
    for child in f.children:
        out = out @ _hp(child, tup)
    return out


@_hp.register
def _(f: Scale, tup: OperatorTuple) -> np.ndarray:
    return f.c * _hp(f.child, tup)


def hp_calc(f: FnExpr, tup: OperatorTuple) -> np.ndarray:
    """
    f(A) through semigroup and resolvent identities: exp(-a.z) -> expm(-sum_j a_j A_j),
    (lam + w.z)^(-nu) -> (lam + sum_j w_j A_j)^(-nu) for integer nu.

    Raises:
        UnsupportedAtomError: a resolvent atom with non-integer power
    """
    _check_dims(f, tup)
    return _hp(f, tup)


def diag_oracle(f: FnExpr, tup: OperatorTuple, seed: int = 0) -> np.ndarray:
    """
    S diag(f(lambda^(i))) S^(-1) over the joint eigenvalues lambda^(i).

    Raises:
        NotDiagonalizableError: no common eigenbasis
        DomainError: a joint eigenvalue with negative real part
    """
    _check_dims(f, tup)
    basis, eigen_tuples, _ = joint_diagonalize(tup, seed)
    if np.any(eigen_tuples.real < -1e-10):
        raise DomainError("joint eigenvalue outside the closed right half-plane")
    points = eigen_tuples.real.clip(min=0.0) + 1j * eigen_tuples.imag
    return apply_diagonal(basis, values(f, points))


# ---------------------------------------------------------------------------
# GSF constants
# ---------------------------------------------------------------------------

_ALPHA_GRID = np.logspace(-3, 3, 40)
_ALPHA_GRID_2D = np.logspace(-3, 3, 12)
_PAIRS = 20


def _unit_pairs(dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(_PAIRS, dim)) + 1j * rng.normal(size=(_PAIRS, dim))
    y = rng.normal(size=(_PAIRS, dim)) + 1j * rng.normal(size=(_PAIRS, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    return x, y


def _gsf_integrand(mats: Sequence[np.ndarray], alpha: np.ndarray, x: np.ndarray, y: np.ndarray):
    """beta -> [||M(beta)||, |<M(beta) x_k, y_k>| ...] with M = prod_j alpha_j (A_j + alpha_j - i beta_j)^(-2)."""

    def g(pts):
        m = None
        for j, a in enumerate(mats):
            factor = alpha[j] * shifted_resolvent(a, alpha[j] - 1j * pts[..., j], 2)
            m = factor if m is None else m @ factor
        norms = np.linalg.norm(m, ord=2, axis=(-2, -1))
        pairs = np.abs(np.einsum("kd,...de,ke->...k", y.conj(), m, x))
        return np.concatenate([norms[..., None], pairs], axis=-1)

    return g


def _gsf_at(mats, alpha, x, y, spec: QuadSpec) -> tuple[float, float, float, int]:
    scales = [a + max(0.0, float(np.min(la.eigvals(m).real))) for a, m in zip(alpha, mats)]
    res = integrate_lines(_gsf_integrand(mats, np.asarray(alpha), x, y), len(mats), spec, scale=scales,
                          label=f"gsf alpha={np.round(alpha, 4).tolist()}")
    vals = np.real(res.value)
    return float(vals[0]), float(np.max(vals[1:])), res.budget, res.n_evals


def gsf_constant(tup: OperatorTuple, omega: VarSet, spec: QuadSpec, seed: Optional[int] = None) -> GsfEntry:
    """
    gamma bracket of A_Omega: sup over alpha of int_{R^|Omega|} ||prod_j alpha_j (A_j + alpha_j - i beta_j)^(-2)|| dbeta
    (upper) and of the same integral of |<. x, y>| over 20 sampled unit pairs (lower).

    One variable: 40 log-spaced alpha in [1e-3, 1e3] plus a bounded search around
    the best point. Two variables: a 12 x 12 log grid. Three or more: the product
    of the one-variable upper constants.
    """
    seed = get_engine_config()["seed"] if seed is None else seed
    k = len(omega)
    if k == 0:
        return GsfEntry(omega=[], gamma_upper=1.0, gamma_lower=1.0, calc_bound=1.0, method="identity")
    work = spec.model_copy(update={"rel_tol": max(spec.rel_tol, 1e-5), "max_refine_depth": min(spec.max_refine_depth, 6)})
    mats = [tup[j] for j in omega.indices]
    x, y = _unit_pairs(tup.dim, seed)
    if k >= 3:
        singles = [gsf_constant(tup, VarSet.of(tup.n, [j]), spec, seed) for j in omega.indices]
        upper = math.prod(e.gamma_upper for e in singles)
        return GsfEntry(
            omega=omega.labels,
            gamma_upper=upper,
            gamma_lower=0.0,
            calc_bound=(2.0 / math.pi) ** k * upper,
            alpha_star=[a for e in singles for a in e.alpha_star],
            grid_points=sum(e.grid_points for e in singles),
            err_est=sum(e.err_est for e in singles),
            method="product",
        )
    if k == 1:
        grid = [np.array([a]) for a in _ALPHA_GRID]
    else:
        grid = [np.array([a, b]) for a in _ALPHA_GRID_2D for b in _ALPHA_GRID_2D]
    best_upper, best_lower, best_alpha, err = -1.0, 0.0, grid[0], 0.0
    uppers = []
    for alpha in grid:
        upper, lower, budget, _ = _gsf_at(mats, alpha, x, y, work)
        uppers.append(upper)
        if upper > best_upper:
            best_upper, best_alpha, err = upper, alpha, budget
        best_lower = max(best_lower, lower)
    points = len(grid)
    if k == 1:
        i = int(np.argmax(uppers))
        lo = math.log(_ALPHA_GRID[max(i - 1, 0)])
        hi = math.log(_ALPHA_GRID[min(i + 1, len(_ALPHA_GRID) - 1)])
        found = minimize_scalar(lambda s: -_gsf_at(mats, np.array([math.exp(s)]), x, y, work)[0],
                                bounds=(lo, hi), method="bounded", options={"xatol": 1e-3})
        points += int(found.nfev)
        if -found.fun > best_upper:
            best_alpha = np.array([math.exp(found.x)])
            best_upper, best_lower_at, err, _ = _gsf_at(mats, best_alpha, x, y, work)
            best_lower = max(best_lower, best_lower_at)
    best_lower = min(best_lower, best_upper)
    logger.info(f"gamma bracket for {omega}: [{best_lower:.6g}, {best_upper:.6g}] at alpha={best_alpha.tolist()}")
    return GsfEntry(
        omega=omega.labels,
        gamma_upper=best_upper,
        gamma_lower=best_lower,
        calc_bound=(2.0 / math.pi) ** k * best_upper,
        alpha_star=[float(a) for a in best_alpha],
        grid_points=points,
        err_est=err,
        method="direct",
    )


def gsf_report(tup: OperatorTuple, spec: QuadSpec, seed: Optional[int] = None,
               omegas: Optional[Sequence[VarSet]] = None) -> GsfReport:
    omegas = omegas if omegas is not None else power_set(tup.n)
    entries = [gsf_constant(tup, omega, spec, seed) for omega in omegas]
    return GsfReport(n=tup.n, dim=tup.dim, entries=entries, quad=spec.model_dump())


# ---------------------------------------------------------------------------
# Compatibility checks
# ---------------------------------------------------------------------------


def _floor(tol: float, *mats) -> float:
    return tol * max([1.0] + [opnorm(m) for m in mats])


def check_homomorphism(f: FnExpr, g: FnExpr, tup: OperatorTuple, spec: QuadSpec, tol: float = 1e-5) -> GapReport:
    """(fg)(A) = f(A) g(A)."""
    fa, ga, fga = calc(f, tup, spec), calc(g, tup, spec), calc(f * g, tup, spec)
    gap = opnorm(fga.value - fa.value @ ga.value)
    budget = fga.budget + fa.budget * opnorm(ga.value) + ga.budget * opnorm(fa.value) + fa.budget * ga.budget
    budget += _floor(tol, fga.value)
    return GapReport.of(f"homomorphism {to_text(f)} * {to_text(g)}", gap, budget)


def check_shift(f: FnExpr, tup: OperatorTuple, t, spec: QuadSpec, tol: float = 1e-6) -> GapReport:
    """f(A + t) = (T(t)f)(A)."""
    t = np.broadcast_to(np.asarray(t, dtype=float), (tup.n,))
    lhs = calc(f, tup.shifted(t), spec)
    rhs = calc(shift(f, t), tup, spec)
    gap = opnorm(lhs.value - rhs.value)
    return GapReport.of(f"shift {to_text(f)} t={t.tolist()}", gap, lhs.budget + rhs.budget + _floor(tol, lhs.value))


def merge_calc(f: FnExpr, pi: Sequence[int], tilde: OperatorTuple, spec: QuadSpec, tol: float = 1e-5) -> GapReport:
    """
    (Upsilon f)(A~) = f(A) with A_j = A~_{pi(j)} and (Upsilon f)(w) = f(w_{pi(1)}, ..., w_{pi(n)}).

    pi lists the 1-based image of each of the n variables.

    Raises:
        PreconditionError: pi is not a surjection onto the m variables of A~
    """
    pi = [int(p) for p in pi]
    if len(pi) != f.n:
        raise DimensionError(f"map has {len(pi)} entries for {f.n} variables")
    if any(p < 1 or p > tilde.n for p in pi) or set(pi) != set(range(1, tilde.n + 1)):
        raise PreconditionError(f"{pi} is not a surjection onto 1..{tilde.n}")
    merged = substitute(f, [p - 1 for p in pi], tilde.n)
    pulled = OperatorTuple(tuple(tilde[p - 1] for p in pi), tilde.commutation_tol)
    lhs = calc(merged, tilde, spec)
    rhs = calc(f, pulled, spec)
    gap = opnorm(lhs.value - rhs.value)
    return GapReport.of(f"merge {to_text(f)} pi={pi}", gap, lhs.budget + rhs.budget + _floor(tol, rhs.value),
                        detail=to_text(merged))


def operator_sum_calc(f1d: FnExpr, tup: OperatorTuple, spec: QuadSpec, tol: float = 1e-5) -> GapReport:
    """f(A_1 + ... + A_n) against f^[n](A) with f^[n](z) = f(z_1 + ... + z_n)."""
    if f1d.n != 1:
        raise DimensionError(f"operator sums take a one-variable function, got dimension {f1d.n}")
    total = validate_tuple([tup.operator_sum()], tup.commutation_tol)
    lhs = calc(f1d, total, spec)
    rhs = calc(sum_of_vars(f1d, tup.n), tup, spec)
    gap = opnorm(lhs.value - rhs.value)
    return GapReport.of(f"operator sum {to_text(f1d)}", gap, lhs.budget + rhs.budget + _floor(tol, lhs.value))


def check_linearity(f: FnExpr, g: FnExpr, a: complex, b: complex, tup: OperatorTuple, spec: QuadSpec,
                    tol: float = 1e-8) -> GapReport:
    """(af + bg)(A) = a f(A) + b g(A)."""
    combined = calc(a * f + b * g, tup, spec)
    fa, ga = calc(f, tup, spec), calc(g, tup, spec)
    gap = opnorm(combined.value - a * fa.value - b * ga.value)
    budget = combined.budget + abs(a) * fa.budget + abs(b) * ga.budget + _floor(tol, combined.value)
    return GapReport.of("linearity", gap, budget, detail=f"{to_text(f)} ; {to_text(g)}")


def check_norm_bound(f: FnExpr, tup: OperatorTuple, spec: QuadSpec, gsf: Optional[GsfEntry] = None) -> GapReport:
    """||f(A)|| <= calc_bound(I_n) ||f||_{B_0^n} for f elementary with support I_n."""
    full = VarSet.full(f.n)
    gsf = gsf or gsf_constant(tup, full, spec)
    fa = calc(f, tup, spec)
    b0 = seminorm(f, full, spec)
    rhs = gsf.calc_bound * b0.value
    budget = fa.budget + gsf.calc_bound * b0.err_est + (2.0 / math.pi) ** f.n * gsf.err_est * b0.value + 1e-9
    return GapReport.inequality(f"norm bound {to_text(f)}", opnorm(fa.value), rhs, budget)


def check_hp_agreement(f: FnExpr, tup: OperatorTuple, spec: QuadSpec, tol: float = 1e-3) -> GapReport:
    fa = calc(f, tup, spec)
    oracle = hp_calc(f, tup)
    return GapReport.of(f"Hille-Phillips {to_text(f)}", opnorm(fa.value - oracle), fa.budget + _floor(tol, oracle))


def check_oracle_agreement(f: FnExpr, tup: OperatorTuple, spec: QuadSpec, tol: float = 1e-3) -> GapReport:
    """Relative gap between calc and the diagonalization oracle."""
    fa = calc(f, tup, spec)
    oracle = diag_oracle(f, tup)
    scale = max(opnorm(oracle), 1e-300)
    return GapReport.of(f"diagonal oracle {to_text(f)}", opnorm(fa.value - oracle) / scale, tol + fa.budget / scale)
