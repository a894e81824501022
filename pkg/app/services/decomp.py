"""
Limits at infinity, restrictions and the elementary decomposition f = sum_Omega f_{Omega,0}.
"""
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from ..errors import DomainError, PreconditionError
from ..models.expr import Const, FnExpr, VarSet, make_sum, power_set
from ..schemas.quad import QuadSpec
from ..schemas.reports import GapReport
from .besov import bnorm
from .fnalg import (
    DEFAULT_SEED,
    INFINITY,
    expand_terms,
    is_zero,
    parse_expr,
    partial,
    project,
    sample_points,
    substitute,
    support,
    to_text,
    values,
)

logger = logging.getLogger(__name__)

_FAR = (1e6, 1e8)


def canonical(f: FnExpr) -> FnExpr:
    """Re-assemble f from its expanded terms, so cancelling terms disappear."""
    terms = expand_terms(f)
    if not terms:
        return Const(f.n, 0)
    return make_sum(term.to_expr() for term in terms)


def limit_embedded(f: FnExpr, omega: VarSet) -> FnExpr:
    """f_Omega as an n-variable expression: Re z_j -> infinity for j outside Omega."""
    mapping = [j if j in omega else INFINITY for j in range(f.n)]
    limit = substitute(f, mapping, f.n)
    _confirm_limit(f, omega, limit)
    return limit


def _confirm_limit(f: FnExpr, omega: VarSet, limit: FnExpr, tol: float = 1e-6) -> None:
    if len(omega) == f.n:
        return
    z = sample_points(f.n, 5, DEFAULT_SEED)
    target = values(limit, z)
    gaps = []
    for far in _FAR:
        probe = z.copy()
        for j in range(f.n):
            if j not in omega:
                probe[:, j] = far + 1j * z[:, j].imag
        gaps.append(float(np.max(np.abs(values(f, probe) - target))))
    if gaps[0] > tol * (1.0 + float(np.max(np.abs(target)))) and not gaps[1] < gaps[0]:
        logger.warning(f"limit of {to_text(f)} at infinity outside {omega} not confirmed (gap {gaps[0]:.2e})")


def limit_at_infinity(f: FnExpr, omega: VarSet) -> FnExpr:
    """
    f_Omega = lim f as Re z_j -> infinity for every j outside Omega.

    The result is an expression in the |Omega| variables of Omega (a dimension-0
    constant when Omega is empty).
    """
    limit = limit_embedded(f, omega)
    if len(omega) == 0:
        return Const(0, limit.c if isinstance(limit, Const) else complex(values(limit, np.ones(f.n))))
    return project(limit, omega)


def restrict(
    f: FnExpr,
    omega: VarSet,
    zeta: Mapping[int, Union[complex, str]],
    psi: Optional[VarSet] = None,
) -> FnExpr:
    """
    z_Omega -> (D_Psi f)(z) with z_j = zeta_j fixed for j outside Omega.

    Args:
        f: function of n variables
        omega: surviving variables
        zeta: 0-based index -> point of C_+ or INFINITY, for every j outside Omega
        psi: variables differentiated before substitution, a subset of the complement

    Raises:
        PreconditionError: psi not inside the complement, or zeta incomplete
        DomainError: some zeta_j with Re <= 0
    """
    psi = psi if psi is not None else VarSet(f.n)
    complement = omega.complement()
    if not psi.issubset(complement):
        raise PreconditionError(f"Psi = {psi} is not contained in the complement {complement}")
    position = {j: k for k, j in enumerate(omega.indices)}
    mapping = []
    for j in range(f.n):
        if j in omega:
            mapping.append(position[j])
            continue
        if j not in zeta:
            raise PreconditionError(f"no value given for variable {j + 1}")
        value = zeta[j]
        if isinstance(value, str):
            if value != INFINITY:
                raise DomainError(f"invalid point '{value}' for variable {j + 1}")
            mapping.append(INFINITY)
            continue
        value = complex(value)
        if not value.real > 0:
            raise DomainError(f"zeta_{j + 1} = {value} is outside the open half-plane")
        mapping.append(value)
    g = partial(f, psi)
    out = substitute(g, mapping, max(len(omega), 1))
    if len(omega) == 0:
        return Const(0, out.c if isinstance(out, Const) else complex(values(out, np.ones(1))))
    return out


@dataclass(frozen=True)
class ElementaryDecomposition:
    """Parts f_{Omega,0} keyed by the mask of Omega, each stored over all n variables."""

    n: int
    parts: dict = field(default_factory=dict)

    def part_at(self, omega: VarSet) -> FnExpr:
        return self.parts.get(omega.mask, Const(self.n, 0))

    def items(self) -> list[tuple[VarSet, FnExpr]]:
        return [(VarSet(self.n, mask), self.parts[mask]) for mask in sorted(self.parts)]

    def to_json(self) -> list[dict]:
        return [{"omega": omega.labels, "expr": to_text(part)} for omega, part in self.items()]

    @classmethod
    def from_json(cls, rows: list[dict], n: int) -> "ElementaryDecomposition":
        parts = {}
        for row in rows:
            omega = VarSet.from_labels(n, row["omega"])
            parts[omega.mask] = parse_expr(row["expr"], n)
        return cls(n, parts)


def elementary_decompose(f: FnExpr) -> ElementaryDecomposition:
    """
    f_{Omega,0} = sum over Psi in Omega of (-1)^(|Omega|-|Psi|) f_Psi.

    Parts that vanish at 50 sampled points (|value| <= 1e-12) are dropped.
    """
    limits: dict[int, FnExpr] = {}
    parts = {}
    for omega in power_set(f.n):
        signed = []
        for psi in omega.subsets():
            if psi.mask not in limits:
                limits[psi.mask] = limit_embedded(f, psi)
            sign = -1.0 if (len(omega) - len(psi)) % 2 else 1.0
            signed.append(sign * limits[psi.mask])
        part = canonical(make_sum(signed))
        if not is_zero(part):
            parts[omega.mask] = part
    decomposition = ElementaryDecomposition(f.n, parts)
    logger.info(f"decomposed {to_text(f)} into {len(parts)} elementary parts")
    return decomposition


def reconstruct(decomposition: ElementaryDecomposition) -> FnExpr:
    parts = [part for _, part in decomposition.items()]
    return make_sum(parts) if parts else Const(decomposition.n, 0)


def is_elementary(f: FnExpr) -> bool:
    """Single nonzero part, sitting at Omega = support(f) (the zero function counts)."""
    decomposition = elementary_decompose(f)
    if not decomposition.parts:
        return True
    return list(decomposition.parts) == [support(f).mask]


def degree(f: FnExpr) -> int:
    return len(support(f))


def check_reconstruction(f: FnExpr, decomposition: Optional[ElementaryDecomposition] = None,
                         count: int = 50, tol: float = 1e-9) -> GapReport:
    decomposition = decomposition or elementary_decompose(f)
    z = sample_points(f.n, count, DEFAULT_SEED)
    gap = float(np.max(np.abs(values(reconstruct(decomposition), z) - values(f, z))))
    return GapReport.of("reconstruction", gap, tol, detail=to_text(f))


def check_part_properties(decomposition: ElementaryDecomposition, tol: float = 1e-5) -> GapReport:
    """Each part has support inside its Omega and vanishes when a variable of Omega goes to infinity."""
    worst = 0.0
    bad = []
    z = sample_points(decomposition.n, 10, DEFAULT_SEED)
    for omega, part in decomposition.items():
        if not support(part).issubset(omega):
            bad.append(str(omega))
        for j in omega.indices:
            probe = z.copy()
            probe[:, j] = 1e6 + 1j * z[:, j].imag
            worst = max(worst, float(np.max(np.abs(values(part, probe)))))
    if bad:
        return GapReport(name="elementary parts", gap=worst, budget=tol, passed=False,
                         detail="support violations: " + ",".join(bad))
    return GapReport.of("elementary parts", worst, tol)


def check_contraction(f: FnExpr, spec: QuadSpec, decomposition: Optional[ElementaryDecomposition] = None) -> list[GapReport]:
    """||f_{Omega,0}||_{B^n} <= ||f||_{B^n} for every part."""
    decomposition = decomposition or elementary_decompose(f)
    whole = bnorm(f, spec, False)
    rows = []
    for omega, part in decomposition.items():
        report = bnorm(part, spec, False)
        budget = report.err_est + whole.err_est + 1e-9
        rows.append(GapReport.inequality(f"contraction {omega}", report.total, whole.total, budget))
    return rows


def check_uniqueness(f: FnExpr, g: FnExpr, count: int = 50, tol: float = 1e-9) -> GapReport:
    """Two pointwise-equal constructions decompose into pointwise-equal parts."""
    df, dg = elementary_decompose(f), elementary_decompose(g)
    z = sample_points(f.n, count, DEFAULT_SEED)
    worst = 0.0
    for omega in power_set(f.n):
        gap = np.abs(values(df.part_at(omega), z) - values(dg.part_at(omega), z))
        worst = max(worst, float(np.max(gap)))
    return GapReport.of("decomposition uniqueness", worst, tol, detail=f"{to_text(f)} ; {to_text(g)}")


def check_kernel_characterization(f: FnExpr, count: int = 50, tol: float = 1e-9) -> GapReport:
    """If D_n f = 0 and every f_Omega with Omega != I_n vanishes, then f = 0."""
    full = VarSet.full(f.n)
    hypothesis = is_zero(partial(f, full)) and all(
        is_zero(limit_embedded(f, omega)) for omega in power_set(f.n) if omega != full
    )
    if not hypothesis:
        return GapReport.of("kernel characterization", 0.0, tol, detail="hypothesis not met")
    z = sample_points(f.n, count, DEFAULT_SEED)
    return GapReport.of("kernel characterization", float(np.max(np.abs(values(f, z)))), tol, detail=to_text(f))
