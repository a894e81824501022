from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_serializer

from .. import __version__


def encode_matrix(m) -> list:
    """Matrix as rows of [re, im] pairs."""
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def decode_matrix(rows) -> np.ndarray:
    """Inverse of encode_matrix; plain real entries are accepted as well."""
    out = []
    for row in rows:
        out_row = []
        for x in row:
            if isinstance(x, (list, tuple)):
                if len(x) != 2:
                    raise ValueError(f"complex entries are [re, im] pairs, got {x}")
                out_row.append(complex(float(x[0]), float(x[1])))
            else:
                out_row.append(complex(float(x)))
        out.append(out_row)
    m = np.array(out, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def encode_complex(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


class SeminormEntry(BaseModel):
    """One seminorm of the B^n norm"""
    omega: list[int] = Field(..., description="1-based variable labels of Omega")
    value: float = Field(..., ge=0, description="Seminorm value")
    err_est: float = Field(..., ge=0, description="Quadrature error estimate")
    converged: bool = Field(True, description="Whether the tolerance was met")
    diverged: bool = Field(False, description="Numerical divergence flag")
    method: str = Field("generic", description="sup | zero | factored | generic")


class SeminormReport(BaseModel):
    """All 2^n seminorms of f and their sum"""
    expr: str = Field(..., description="Function in DSL form")
    n: int = Field(..., ge=1)
    entries: list[SeminormEntry]
    total: float = Field(..., ge=0, description="B^n norm: sum of the entries")
    err_est: float = Field(..., ge=0)
    hinfty: float = Field(..., ge=0, description="Omega = empty entry (sup norm estimate)")
    b0: float = Field(..., ge=0, description="Omega = I_n entry (B_0 seminorm)")
    diverged: bool = Field(False, description="Some seminorm looks divergent")
    quad: dict = Field(default_factory=dict, description="QuadSpec used")
    version: str = __version__

    def entry(self, labels) -> SeminormEntry:
        labels = sorted(labels)
        for e in self.entries:
            if e.omega == labels:
                return e
        raise KeyError(f"no seminorm for omega {labels}")


class GsfEntry(BaseModel):
    """gamma bracket of one subtuple"""
    omega: list[int]
    gamma_upper: float = Field(..., ge=0, description="sup_alpha of the integral of operator norms")
    gamma_lower: float = Field(..., ge=0, description="sup over sampled unit vector pairs")
    calc_bound: float = Field(..., ge=0, description="(2/pi)^|Omega| * gamma_upper")
    alpha_star: list[float] = Field(default_factory=list, description="Maximizing alpha")
    grid_points: int = Field(0, ge=0, description="alpha grid points evaluated")
    err_est: float = Field(0.0, ge=0)
    method: str = Field("direct", description="direct | product")


class GsfReport(BaseModel):
    n: int
    dim: int
    entries: list[GsfEntry]
    quad: dict = Field(default_factory=dict)
    version: str = __version__

    def entry(self, labels) -> GsfEntry:
        labels = sorted(labels)
        for e in self.entries:
            if e.omega == labels:
                return e
        raise KeyError(f"no GSF entry for omega {labels}")


class CalcPart(BaseModel):
    omega: list[int]
    expr: str
    err_est: float = Field(0.0, ge=0)
    truncation_est: float = Field(0.0, ge=0)
    n_evals: int = Field(0, ge=0)
    converged: bool = True


class CalcResult(BaseModel):
    """f(A) as a matrix, with per-part quadrature errors"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: Any = Field(..., description="f(A) as a complex matrix")
    parts: list[CalcPart] = Field(default_factory=list, description="Elementary parts integrated")
    err_est: float = Field(0.0, ge=0)
    truncation_est: float = Field(0.0, ge=0)
    converged: bool = True
    quad: dict = Field(default_factory=dict)
    version: str = __version__

    @field_serializer("value")
    def serialize_value(self, value):
        return encode_matrix(value)

    @property
    def budget(self) -> float:
        return self.err_est + self.truncation_est


class GapReport(BaseModel):
    """One verified identity or inequality"""
    name: str
    gap: float = Field(..., ge=0, description="Identity gap, or the excess of an inequality")
    budget: float = Field(..., ge=0, description="Allowed gap")
    passed: bool
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    detail: str = ""

    @classmethod
    def of(cls, name: str, gap: float, budget: float, **kwargs) -> "GapReport":
        gap = float(gap)
        budget = float(budget)
        return cls(name=name, gap=gap, budget=budget, passed=bool(gap <= budget), **kwargs)

    @classmethod
    def inequality(cls, name: str, lhs: float, rhs: float, budget: float, **kwargs) -> "GapReport":
        return cls.of(name, max(0.0, float(lhs) - float(rhs)), budget, lhs=float(lhs), rhs=float(rhs), **kwargs)


class SuiteReport(BaseModel):
    suite: str
    rows: list[GapReport] = Field(default_factory=list)
    quad: dict = Field(default_factory=dict)
    seed: Optional[int] = None
    version: str = __version__

    @computed_field
    @property
    def n_passed(self) -> int:
        return sum(1 for r in self.rows if r.passed)

    @computed_field
    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if not r.passed)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


class BoundReport(BaseModel):
    """A closed-form bound against its empirical counterpart"""
    lemma: str
    params: dict = Field(default_factory=dict)
    bound: float
    empirical: float
    ratio: float
    budget: float = 0.0
    passed: bool = True

    @classmethod
    def of(cls, lemma: str, params: dict, bound: float, empirical: float, tol: float = 1e-2,
           budget: float = 0.0) -> "BoundReport":
        bound = float(bound)
        empirical = float(empirical)
        ratio = empirical / bound if bound > 0 else (0.0 if empirical == 0 else float("inf"))
        passed = empirical <= bound * (1.0 + tol) + budget
        return cls(lemma=lemma, params=params, bound=bound, empirical=empirical, ratio=ratio,
                   budget=float(budget), passed=bool(passed))

    def as_gap(self) -> GapReport:
        name = f"{self.lemma} " + " ".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        excess = max(0.0, self.empirical - self.bound)
        return GapReport(name=name, gap=excess, budget=self.budget + 1e-2 * self.bound, passed=self.passed,
                         lhs=self.empirical, rhs=self.bound, detail=f"ratio={self.ratio:.4g}")


class JointSpectrum(BaseModel):
    """Joint eigenvalue tuples of a simultaneously diagonalizable tuple"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    points: Any = Field(..., description="Distinct joint eigenvalues, shape (m, n)")
    multiplicities: list[int] = Field(default_factory=list)
    residual: float = Field(0.0, ge=0, description="max_j ||A_j S - S diag||")
    basis: Any = Field(None, exclude=True, description="Common eigenvector basis S (columns)")
    eigen_tuples: Any = Field(None, exclude=True, description="Joint eigenvalue per basis column, shape (d, n)")

    @field_serializer("points")
    def serialize_points(self, points):
        return [[encode_complex(z) for z in row] for row in np.asarray(points)]


class ReproResult(BaseModel):
    """Both sides of a reproducing identity at one point"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    z: list[list[float]] = Field(default_factory=list, description="Evaluation point as [re, im] pairs")
    lhs: complex
    rhs: complex
    gap: float = Field(..., ge=0)
    budget: float = Field(..., ge=0)
    passed: bool
    n_evals: int = 0

    @field_serializer("lhs", "rhs")
    def serialize_side(self, value):
        return encode_complex(value)

    def as_gap(self) -> GapReport:
        return GapReport.of(self.name, self.gap, self.budget, lhs=abs(self.lhs), rhs=abs(self.rhs))
