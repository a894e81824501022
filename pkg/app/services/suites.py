"""
Named verification suites shared by the command line and the HTTP surface.

Every suite turns a function family, an operator tuple and a QuadSpec into a
list of GapReport rows; run_suite wraps them into a SuiteReport.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..config import get_engine_config
from ..errors import NotDiagonalizableError, PreconditionError, UnsupportedAtomError
from ..models.expr import FnExpr, VarSet, exp_tau, power_set, resolvent, rho
from ..models.tuples import OperatorTuple
from ..schemas.quad import QuadSpec
from ..schemas.reports import GapReport, SuiteReport
from .besov import bnorm, seminorm
from .decomp import check_contraction, check_part_properties, check_reconstruction, elementary_decompose, is_elementary
from .estimates import function_estimate_suite, operator_estimate_suite
from .fnalg import is_zero, parse_expr, sample_points, support, to_text
from .opcalc import (
    check_homomorphism,
    check_hp_agreement,
    check_linearity,
    check_norm_bound,
    check_oracle_agreement,
    check_shift,
    gsf_constant,
    merge_calc,
    operator_sum_calc,
    qt_convergence,
    random_commuting_tuple,
    validate_tuple,
)
from .repro import check_kernel_square_mass, check_reproduction, check_shift_semigroup, reproduce_shifted
from .spectral import (
    check_eigenvector_mapping,
    check_spectral_inclusion,
    check_spectral_mapping_equality,
    joint_spectrum,
)

logger = logging.getLogger(__name__)

DEFAULT_FAMILIES = {
    1: [
        "res([1], 1, 1)",
        "exp([1])",
        "res([1], 1, 2)",
        "1 + res([1], 2, 1)",
    ],
    2: [
        "res([1, 0], 1, 1)",
        "res([1, 0], 1, 1)*res([0, 1], 1, 1)",
        "res([1, 0], 1, 1)*res([0, 1], 2, 1)",
        "exp([1, 1])",
        "exp([1, 1])*res([1, 0], 1, 1)*res([0, 1], 1, 1)",
        "exp([0.5, 0])*res([0, 1], 1, 1) + res([1, 0], 2, 1)",
        "1 + res([1, 0], 1, 1)*res([0, 1], 1, 1)",
    ],
}

QT_STEPS = (1.0, 0.5, 0.25, 0.125)


def default_family(n: int) -> list[FnExpr]:
    if n in DEFAULT_FAMILIES:
        return [parse_expr(text, n) for text in DEFAULT_FAMILIES[n]]
    r = rho([1.0] * n)
    return [resolvent(0, 1.0, n), r, exp_tau(1.0, n), exp_tau(1.0, n) * r, 1 + r]


def parse_family(texts: Sequence[str], n: int) -> list[FnExpr]:
    """DSL texts to expressions; the single word "default" expands to the default family."""
    fns = []
    for text in texts:
        if text.strip() == "default":
            fns.extend(default_family(n))
        else:
            fns.append(parse_expr(text, n))
    return fns


@dataclass(frozen=True)
class SuiteContext:
    fns: list
    tup: OperatorTuple
    spec: QuadSpec
    seed: int

    @property
    def n(self) -> int:
        return self.tup.n

    def elementary(self) -> list:
        """Family members that are elementary with support I_n."""
        full = VarSet.full(self.n)
        return [f for f in self.fns if not is_zero(f) and support(f) == full and is_elementary(f)]


def _homomorphism(ctx: SuiteContext) -> list[GapReport]:
    rows = [check_homomorphism(f, g, ctx.tup, ctx.spec) for f, g in zip(ctx.fns, ctx.fns[1:])]
    if len(ctx.fns) >= 2:
        rows.append(check_linearity(ctx.fns[0], ctx.fns[1], 2.0, -1.0 + 0.5j, ctx.tup, ctx.spec))
    return rows


def _shift(ctx: SuiteContext) -> list[GapReport]:
    uneven = np.linspace(0.25, 1.0, ctx.n)
    rows = []
    for f in ctx.fns:
        rows.append(check_shift(f, ctx.tup, 0.5, ctx.spec))
        rows.append(check_shift(f, ctx.tup, uneven, ctx.spec))
        rows.append(check_shift_semigroup(f, 0.3, uneven))
    return rows


def _merge(ctx: SuiteContext) -> list[GapReport]:
    single = ctx.tup.sub(VarSet.of(ctx.n, [0]))
    reverse = list(range(ctx.n, 0, -1))
    rows = []
    for f in ctx.fns:
        rows.append(merge_calc(f, [1] * ctx.n, single, ctx.spec))
        rows.append(merge_calc(f, reverse, ctx.tup, ctx.spec))
    return rows


def _operator_sum(ctx: SuiteContext) -> list[GapReport]:
    return [operator_sum_calc(f, ctx.tup, ctx.spec) for f in default_family(1)]


def _spectral(ctx: SuiteContext) -> list[GapReport]:
    spectrum = joint_spectrum(ctx.tup, ctx.seed)
    x = spectrum.basis[:, 0]
    rows = []
    for f in ctx.fns:
        rows.append(check_spectral_inclusion(f, ctx.tup, ctx.spec))
        try:
            rows.append(check_spectral_mapping_equality(f, ctx.tup, ctx.spec))
        except PreconditionError as e:
            logger.warning(f"skipping spectral mapping for {to_text(f)}: {e}")
        rows.append(check_eigenvector_mapping(f, ctx.tup, x, ctx.spec))
    return rows


def _reproduce(ctx: SuiteContext) -> list[GapReport]:
    per_function = max(2, 20 // max(1, len(ctx.fns)))
    rows = [check_kernel_square_mass(ctx.spec)]
    for f in ctx.fns:
        rows.extend(check_reproduction(f, ctx.spec, count=per_function, seed=ctx.seed))
    points = sample_points(ctx.n, 2, ctx.seed, re_range=(0.2, 2.0), im_half=2.0)
    for f in ctx.elementary():
        for k, z in enumerate(points):
            result = reproduce_shifted(f, z, 0.5, ctx.spec)
            rows.append(result.as_gap().model_copy(update={"name": f"reproduce shifted {to_text(f)} #{k}"}))
    return rows


def _decomposition(ctx: SuiteContext) -> list[GapReport]:
    rows = []
    for f in ctx.fns:
        decomposition = elementary_decompose(f)
        rows.append(check_reconstruction(f, decomposition))
        rows.append(check_part_properties(decomposition))
        rows.extend(check_contraction(f, ctx.spec, decomposition))
    return rows


def _qt(ctx: SuiteContext) -> list[GapReport]:
    return qt_convergence(ctx.fns[0], ctx.tup, QT_STEPS, ctx.spec)


def _norm_bound(ctx: SuiteContext) -> list[GapReport]:
    gsf = gsf_constant(ctx.tup, VarSet.full(ctx.n), ctx.spec, ctx.seed)
    return [check_norm_bound(f, ctx.tup, ctx.spec, gsf) for f in ctx.elementary()]


def _hp(ctx: SuiteContext) -> list[GapReport]:
    rows = []
    for f in ctx.fns:
        try:
            rows.append(check_hp_agreement(f, ctx.tup, ctx.spec))
        except UnsupportedAtomError as e:
            logger.debug(f"no Hille-Phillips oracle for {to_text(f)}: {e}")
        try:
            rows.append(check_oracle_agreement(f, ctx.tup, ctx.spec))
        except NotDiagonalizableError as e:
            logger.warning(f"skipping diagonal oracle for {to_text(f)}: {e}")
    return rows


def diagonal_kron_pair(a: Sequence[complex], b: Sequence[complex]) -> OperatorTuple:
    """(diag(a) (x) I, I (x) diag(b)), a pair whose gamma bracket factors."""
    first = np.kron(np.diag(np.asarray(a, dtype=complex)), np.eye(len(b)))
    second = np.kron(np.eye(len(a)), np.diag(np.asarray(b, dtype=complex)))
    return validate_tuple([first, second])


def _gsf(ctx: SuiteContext) -> list[GapReport]:
    rows = []
    # contraction semigroups: K = 1
    for a in (0.0, 0.5, 2.0):
        scalar = validate_tuple([np.array([[a]], dtype=complex)])
        entry = gsf_constant(scalar, VarSet.full(1), ctx.spec, ctx.seed)
        rows.append(GapReport.inequality(f"semigroup constant a={a:g}", entry.calc_bound, 2.0, 1e-2))
    for omega in power_set(ctx.n):
        entry = gsf_constant(ctx.tup, omega, ctx.spec, ctx.seed)
        rows.append(GapReport.inequality(f"gamma bracket {omega}", entry.gamma_lower, entry.gamma_upper,
                                         entry.err_est + 1e-9))
    pair = diagonal_kron_pair([0.5, 2.0], [1.0, 3.0 + 1.0j])
    both = gsf_constant(pair, VarSet.full(2), ctx.spec, ctx.seed)
    first = gsf_constant(pair, VarSet.of(2, [0]), ctx.spec, ctx.seed)
    second = gsf_constant(pair, VarSet.of(2, [1]), ctx.spec, ctx.seed)
    product = first.gamma_upper * second.gamma_upper
    rows.append(GapReport.of("gamma tensor factorization", abs(both.gamma_upper - product) / product, 1e-2,
                             lhs=both.gamma_upper, rhs=product))
    return rows


def _estimates(ctx: SuiteContext) -> list[GapReport]:
    reports = function_estimate_suite(ctx.spec) + operator_estimate_suite(ctx.tup, ctx.spec)
    return [r.as_gap() for r in reports]


SUITES: dict[str, Callable[[SuiteContext], list[GapReport]]] = {
    "homomorphism": _homomorphism,
    "shift": _shift,
    "merge": _merge,
    "operator-sum": _operator_sum,
    "spectral": _spectral,
    "reproduce": _reproduce,
    "decomposition": _decomposition,
    "qt": _qt,
    "norm-bound": _norm_bound,
    "hp": _hp,
    "gsf": _gsf,
    "estimates": _estimates,
    "norms": lambda ctx: resolvent_norm_rows(ctx.spec),
}


def run_suite(
    name: str,
    fns: Optional[Sequence[FnExpr]] = None,
    tup: Optional[OperatorTuple] = None,
    spec: Optional[QuadSpec] = None,
    seed: Optional[int] = None,
    n: int = 2,
) -> SuiteReport:
    """
    Run one named suite.

    Without a tuple a random commuting 3 x 3 tuple is drawn from the seed; without
    functions the default family of the tuple's dimension is used.

    Raises:
        PreconditionError: unknown suite, or functions whose dimension differs from the tuple's
    """
    if name not in SUITES:
        raise PreconditionError(f"unknown suite '{name}', expected one of {', '.join(SUITES)}")
    seed = get_engine_config()["seed"] if seed is None else seed
    spec = spec or QuadSpec()
    if tup is None:
        n = fns[0].n if fns else n
        tup = random_commuting_tuple(n, 3, seed)
    fns = list(fns) if fns else default_family(tup.n)
    mismatched = [to_text(f) for f in fns if f.n != tup.n]
    if mismatched:
        raise PreconditionError(f"functions {mismatched} do not have the tuple's {tup.n} variables")
    logger.info(f"running suite {name}: {len(fns)} functions, tuple n={tup.n} dim={tup.dim}, seed={seed}")
    rows = SUITES[name](SuiteContext(fns, tup, spec, seed))
    report = SuiteReport(suite=name, rows=rows, quad=spec.model_dump(), seed=seed)
    if report.passed:
        logger.info(f"suite {name} passed: {report.n_passed} rows")
    else:
        logger.warning(f"suite {name}: {report.n_failed} of {len(rows)} rows failed")
    return report


def _relative(value: float, target: float) -> float:
    return abs(value - target) / abs(target) if target else abs(value)


def resolvent_norm_rows(spec: QuadSpec) -> list[GapReport]:
    """||r_w||_{B_0^1} = 1/Re w, ||r_w||_{B^1} = 2/Re w and the product rule for rho_w."""
    rows = []
    for re_w in (0.5, 1.0, 2.0):
        f = resolvent(0, complex(re_w, 0.7), 1)
        report = bnorm(f, spec)
        rows.append(GapReport.of(f"resolvent B_0 Re w={re_w:g}", _relative(report.b0, 1.0 / re_w), 1e-3))
        rows.append(GapReport.of(f"resolvent B Re w={re_w:g}", _relative(report.total, 2.0 / re_w), 1e-3))
    for ws in ([1.0, 2.0], [0.5, 1.0, 2.0]):
        f = rho(ws)
        entry = seminorm(f, VarSet.full(len(ws)), spec)
        rows.append(GapReport.of(f"product rule {ws}", _relative(entry.value, 1.0 / math.prod(ws)), 5e-3))
    return rows
