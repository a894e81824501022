"""
Dense matrix primitives for commuting tuples: shifted resolvent powers, matrix
kernel factors for the calculus integrals and joint diagonalization.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from ..errors import NotDiagonalizableError, QuadratureError
from ..models.tuples import OperatorTuple

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12
DIAG_RESIDUAL = 1e-8


def opnorm(m) -> float:
    """Spectral norm (largest singular value)."""
    m = np.asarray(m)
    if m.ndim < 2:
        return float(np.abs(m))
    return float(np.linalg.norm(m, ord=2))


def shifted_resolvent(a: np.ndarray, s: np.ndarray, power: int = 1) -> np.ndarray:
    """
    (A + s)^(-power) for every complex shift in s, by batched pivoted solves.

    Returns:
        np.ndarray: shape s.shape + (d, d)

    Raises:
        QuadratureError: some shift has condition number above 1e12
    """
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    s = np.asarray(s, dtype=complex)
    eye = np.eye(d, dtype=complex)
    shifted = a + s[..., None, None] * eye
    if d > 1:
        cond = np.linalg.cond(shifted.reshape(-1, d, d))
        if np.max(cond) > COND_LIMIT:
            raise QuadratureError(f"shifted matrix with condition number {np.max(cond):.2e}")
    rhs = np.broadcast_to(eye, shifted.shape)
    inv = np.linalg.solve(shifted, rhs)
    out = inv
    for _ in range(power - 1):
        out = out @ inv
    return out


def resolvent_power(a: np.ndarray, lam: complex, nu: float = 1.0) -> np.ndarray:
    """(A + lam)^(-nu); integer nu by solves, other nu by the principal fractional power."""
    a = np.asarray(a, dtype=complex)
    if float(nu).is_integer():
        return np.asarray(shifted_resolvent(a, np.asarray(lam), int(nu)))
    return la.fractional_matrix_power(a + complex(lam) * np.eye(a.shape[0]), -float(nu))


@dataclass(frozen=True, eq=False)
class MatrixKernel:
    """lambda -> factor * (A + shift + conj(lambda))^(-power), a matrix-valued kernel factor."""

    matrix: np.ndarray
    shift: float = 0.0
    power: int = 2
    factor: complex = -2.0 / math.pi
    value_shape: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "value_shape", tuple(np.shape(self.matrix)))

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        return self.factor * shifted_resolvent(self.matrix, self.shift + np.conj(lam), self.power)


def joint_diagonalize(tup: OperatorTuple, seed: int = 0) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Common eigenvector basis of a commuting tuple.

    A random real combination sum_j c_j A_j separates the joint eigenvalues
    generically; its eigenvectors are then checked against every A_j.

    Returns:
        (S, eigen_tuples, residual): columns of S are joint eigenvectors,
        eigen_tuples[i, j] is the eigenvalue of A_j on column i

    Raises:
        NotDiagonalizableError: residual above 1e-8 or a singular basis
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(0.5, 1.5, size=tup.n)
    combo = sum(c * m for c, m in zip(coeffs, tup.matrices))
    _, basis = la.eig(combo)
    if np.linalg.cond(basis) > COND_LIMIT:
        raise NotDiagonalizableError("no well-conditioned common eigenbasis")
    inverse = la.solve(basis, np.eye(tup.dim))
    eigen_tuples = np.empty((tup.dim, tup.n), dtype=complex)
    residual = 0.0
    for j, m in enumerate(tup.matrices):
        diag = np.diag(inverse @ m @ basis)
        eigen_tuples[:, j] = diag
        gap = opnorm(m @ basis - basis * diag[None, :]) / max(1.0, opnorm(m))
        residual = max(residual, gap)
    if residual > DIAG_RESIDUAL:
        raise NotDiagonalizableError(f"joint diagonalization residual {residual:.2e} exceeds {DIAG_RESIDUAL:g}")
    logger.debug(f"joint diagonalization of {tup.n} matrices, residual {residual:.2e}")
    return basis, eigen_tuples, residual


def apply_diagonal(basis: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """S diag(values) S^(-1)."""
    return la.solve(basis.T, (basis * diag[None, :]).T).T
