from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import VarSet


@dataclass(frozen=True, eq=False)
class OperatorTuple:
    """n pairwise-commuting d x d complex matrices with spectra in the closed right half-plane.

    Instances are built by opcalc.validate_tuple; the matrices are stored read-only.
    """

    matrices: tuple[np.ndarray, ...]
    commutation_tol: float = 1e-10
    eigenvalues: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        frozen = []
        for m in self.matrices:
            m = np.array(m, dtype=complex)
            m.setflags(write=False)
            frozen.append(m)
        object.__setattr__(self, "matrices", tuple(frozen))
        if not self.eigenvalues:
            object.__setattr__(self, "eigenvalues", tuple(np.linalg.eigvals(m) for m in frozen))

    @property
    def n(self) -> int:
        return len(self.matrices)

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def __getitem__(self, j: int) -> np.ndarray:
        return self.matrices[j]

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def sub(self, omega: VarSet) -> "OperatorTuple":
        """The subtuple A_Omega, in increasing coordinate order."""
        return OperatorTuple(
            tuple(self.matrices[j] for j in omega.indices),
            self.commutation_tol,
            tuple(self.eigenvalues[j] for j in omega.indices),
        )

    def shifted(self, t: Sequence[float]) -> "OperatorTuple":
        """(A_1 + t_1, ..., A_n + t_n)."""
        t = np.broadcast_to(np.asarray(t, dtype=float), (self.n,))
        eye = self.identity()
        return OperatorTuple(
            tuple(m + s * eye for m, s in zip(self.matrices, t)),
            self.commutation_tol,
            tuple(e + s for e, s in zip(self.eigenvalues, t)),
        )

    def operator_sum(self) -> np.ndarray:
        return sum(self.matrices[1:], self.matrices[0].copy())
