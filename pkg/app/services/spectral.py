"""
Joint spectra of simultaneously diagonalizable commuting tuples, and the
spectral inclusion / mapping checks for f(A).
"""
import logging
from typing import Optional

import numpy as np
import scipy.linalg as la

from ..errors import NotDiagonalizableError, PreconditionError
from ..models.expr import FnExpr, VarSet, power_set
from ..models.tuples import OperatorTuple
from ..schemas.quad import QuadSpec
from ..schemas.reports import CalcResult, GapReport, JointSpectrum
from .decomp import is_elementary, limit_at_infinity
from .fnalg import is_zero, support, to_text, values
from .linalg import DIAG_RESIDUAL, joint_diagonalize, opnorm
from .opcalc import calc

logger = logging.getLogger(__name__)


def _cluster(points: np.ndarray, tol: float) -> tuple[np.ndarray, list[int]]:
    distinct: list[np.ndarray] = []
    counts: list[int] = []
    for p in points:
        for k, q in enumerate(distinct):
            if np.max(np.abs(p - q)) <= tol:
                counts[k] += 1
                break
        else:
            distinct.append(p)
            counts.append(1)
    return np.array(distinct).reshape(len(distinct), points.shape[1]), counts


def joint_spectrum(tup: OperatorTuple, seed: int = 0) -> JointSpectrum:
    """
    Joint eigenvalue tuples read off a common eigenvector basis; equal tuples are
    listed once with their multiplicity.

    Raises:
        NotDiagonalizableError: residual above 1e-8
    """
    basis, eigen_tuples, residual = joint_diagonalize(tup, seed)
    scale = max(1.0, float(np.max(np.abs(eigen_tuples))))
    points, counts = _cluster(eigen_tuples, 1e-6 * scale)
    order = np.lexsort([points[:, j].imag for j in reversed(range(tup.n))]
                       + [points[:, j].real for j in reversed(range(tup.n))])
    points = points[order]
    counts = [counts[i] for i in order]
    logger.info(f"joint spectrum: {len(counts)} distinct points of {tup.dim}, residual {residual:.2e}")
    return JointSpectrum(points=points, multiplicities=counts, residual=residual,
                         basis=basis, eigen_tuples=eigen_tuples)


def _directed(xs: np.ndarray, ys: np.ndarray) -> float:
    if len(xs) == 0:
        return 0.0
    if len(ys) == 0:
        return float("inf")
    diff = xs[:, None, ...] - ys[None, :, ...]
    dist = np.abs(diff) if diff.ndim == 2 else np.linalg.norm(diff, axis=-1)
    return float(np.max(np.min(dist, axis=1)))


def hausdorff_distance(xs, ys) -> float:
    """Two-sided Hausdorff distance between finite sets of complex numbers or complex tuples."""
    xs = np.asarray(xs, dtype=complex)
    ys = np.asarray(ys, dtype=complex)
    return max(_directed(xs, ys), _directed(ys, xs))


def check_similarity_invariance(tup: OperatorTuple, basis: np.ndarray, tol: float = 1e-8) -> GapReport:
    """joint_spectrum(S A S^(-1)) = joint_spectrum(A)."""
    conjugated = conjugate(tup, basis)
    before = joint_spectrum(tup).points
    after = joint_spectrum(conjugated).points
    scale = max(1.0, float(np.max(np.abs(before))))
    return GapReport.of("similarity invariance", hausdorff_distance(before, after), tol * scale)


def check_spectral_inclusion(f: FnExpr, tup: OperatorTuple, spec: QuadSpec, tol: float = 1e-3,
                             result: Optional[CalcResult] = None) -> GapReport:
    """f(lambda) lies in sigma(f(A)) for every joint eigenvalue lambda."""
    result = result or calc(f, tup, spec)
    eigs = la.eigvals(result.value)
    points = joint_spectrum(tup).points
    images = values(f, points.real.clip(min=0.0) + 1j * points.imag)
    gap = _directed(np.atleast_1d(images), eigs)
    return GapReport.of(f"spectral inclusion {to_text(f)}", gap, tol + result.budget)


def check_spectral_mapping_equality(f: FnExpr, tup: OperatorTuple, spec: QuadSpec, tol: float = 1e-3,
                                    result: Optional[CalcResult] = None) -> GapReport:
    """
    sigma(f(A)) = f(sigma(A)) for f elementary with support I_n; otherwise
    sigma(f(A)) inside the union over Omega of f_Omega(sigma(A)).

    Raises:
        PreconditionError: some joint eigenvalue has Re <= 0
    """
    points = joint_spectrum(tup).points
    if np.any(points.real <= 0):
        raise PreconditionError("spectral mapping equality needs every joint eigenvalue in the open half-plane")
    result = result or calc(f, tup, spec)
    eigs = la.eigvals(result.value)
    budget = tol + result.budget
    full = VarSet.full(f.n)
    if is_zero(f) or (support(f) == full and is_elementary(f)):
        gap = hausdorff_distance(eigs, values(f, points))
        return GapReport.of(f"spectral mapping {to_text(f)}", gap, budget)
    images = []
    for omega in power_set(f.n):
        limit = limit_at_infinity(f, omega)
        if len(omega) == 0:
            images.append(np.full(len(points), complex(limit.c)))
        else:
            images.append(np.atleast_1d(values(limit, points[:, list(omega.indices)])))
    union = np.concatenate(images)
    gap = _directed(eigs, union)
    return GapReport.of(f"spectral mapping (union) {to_text(f)}", gap, budget)


def check_eigenvector_mapping(f: FnExpr, tup: OperatorTuple, x, spec: QuadSpec, tol: float = 1e-3,
                              result: Optional[CalcResult] = None) -> GapReport:
    """
    f(A) x = f(lambda) x for a joint eigenvector x with A_j x = lambda_j x.

    Raises:
        NotDiagonalizableError: x is not a joint eigenvector
    """
    x = np.asarray(x, dtype=complex).reshape(-1)
    size = float(np.linalg.norm(x))
    if size == 0:
        raise NotDiagonalizableError("the zero vector is not an eigenvector")
    lam = np.empty(tup.n, dtype=complex)
    for j, m in enumerate(tup.matrices):
        lam[j] = np.vdot(x, m @ x) / size ** 2
        residual = float(np.linalg.norm(m @ x - lam[j] * x))
        if residual > DIAG_RESIDUAL * max(1.0, opnorm(m)) * size:
            raise NotDiagonalizableError(f"x is not an eigenvector of A_{j + 1} (residual {residual:.2e})")
    result = result or calc(f, tup, spec)
    fx = complex(values(f, lam.real.clip(min=0.0) + 1j * lam.imag))
    gap = float(np.linalg.norm(result.value @ x - fx * x))
    return GapReport.of(f"eigenvector mapping {to_text(f)}", gap, (tol + result.budget) * size)


def conjugate(tup: OperatorTuple, basis: np.ndarray) -> OperatorTuple:
    """(S A_1 S^(-1), ..., S A_n S^(-1))."""
    mats = tuple(la.solve(basis.T, (basis @ m).T).T for m in tup.matrices)
    return OperatorTuple(mats, tup.commutation_tol)
