"""
Adaptive tensor-product quadrature over products of half-planes, half-lines and lines.

Every axis carries a panelled 7-point Gauss / 15-point Kronrod pair. A tensor pass
evaluates the integrand once on the full product grid and contracts it with the
Kronrod weights; replacing one axis' weights by the Kronrod-minus-Gauss difference
gives a per-panel error for that axis, and the worst panels of every axis are
split until the tolerances or the refinement budget are met.

Axes are mapped from a parameter interval:

* half-line  alpha = c u / (1 - u)^2,         u in [0, 1)   (compact mapping)
* line       beta  = c v / (1 - v^2)^2,       v in (-1, 1)  (compact mapping)
* window     beta  = B v on [-B, B] plus asymptotic tail pseudo-nodes, for factors
             carrying exp(-a lambda), whose integrand oscillates like exp(-i a beta)
* laplace    s     = S t^2 on [0, 1], for the Laplace variable of a coupled resolvent

With mapping="truncate" the half-line and line axes are cut at alpha_max / beta_max
and a tail estimate from the declared decay exponent is reported instead.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import numpy as np
from scipy.special import gammaincc

from ..config import get_engine_config
from ..errors import DimensionError, IntegrabilityError, QuadratureError
from ..models.expr import Const, Exp, FnExpr, ResLin, make_prod
from ..schemas.quad import QuadResult, QuadSpec
from .fnalg import Term, exp_rate, expand_terms, values

logger = logging.getLogger(__name__)

# Kronrod abscissae (positive half, descending) and weights; Gauss weights sit on
# every other abscissa plus the centre.
_XGK = np.array([
    0.991455371120812639, 0.949107912342758525, 0.864864423359769073, 0.741531185599394440,
    0.586087235467691130, 0.405845151377397167, 0.207784955007898468, 0.0,
])
_WGK = np.array([
    0.022935322010529225, 0.063092092629978553, 0.104790010322250184, 0.140653259715525919,
    0.169004726639267903, 0.190350578064785410, 0.204432940075298892, 0.209482141084727828,
])
_WG = np.array([0.129484966168869693, 0.279705391489276668, 0.381830050505118945, 0.417959183673469388])

_NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
_KRONROD = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_GAUSS = np.zeros(15)
_GAUSS[[1, 13]] = _WG[0]
_GAUSS[[3, 11]] = _WG[1]
_GAUSS[[5, 9]] = _WG[2]
_GAUSS[7] = _WG[3]

_AXIS_LETTERS = "abcdefghijklmnopqrstuvw"
_CHAIN_LETTERS = "MNOPQRSTUV"
_CHUNK_POINTS = 2_000_000
_LAPLACE_PANELS = 2
# below this total rate a factor's oscillation is resolved on a plain line axis
_WINDOW_MIN_RATE = 0.25


class KernelFactor(Protocol):
    """One-variable kernel k_j(lambda_j), scalar (value_shape ()) or matrix ((d, d))."""

    value_shape: tuple

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True)
class AxisRule:
    nodes: np.ndarray
    wk: np.ndarray
    wg: np.ndarray
    wt: np.ndarray
    panel: np.ndarray
    n_panels: int


class Axis:
    """One integration axis with its panel list in parameter space."""

    def __init__(self, kind: str, spec: QuadSpec, weight_alpha: bool = False,
                 scale: Optional[float] = None, rate: float = 0.0, half_width: Optional[float] = None,
                 extent: Optional[float] = None):
        if kind not in ("halfline", "line", "window", "laplace"):
            raise ValueError(f"unknown axis kind '{kind}'")
        self.kind = kind
        self.mapping = spec.mapping
        self.c = float(scale) if scale is not None else spec.scale
        self.weight_alpha = weight_alpha
        self.rate = float(rate)
        self.tail_decay = spec.tail_decay
        if kind == "window":
            if not self.rate > 0:
                raise ValueError("window axes need a positive oscillation rate")
            self.half_width = float(half_width) if half_width is not None else max(spec.osc_window, 30.0 / self.rate)
            count = max(spec.base_panels, math.ceil(self.half_width * self.rate / math.pi))
            edges = np.linspace(-1.0, 1.0, count + 1)
        elif kind == "laplace":
            # s = extent * t^2 on [0, 1]
            if extent is None or not extent > 0:
                raise ValueError("laplace axes need a positive extent")
            self.extent = float(extent)
            edges = np.linspace(0.0, 1.0, _LAPLACE_PANELS + 1)
        elif kind == "halfline":
            self.extent = spec.alpha_max
            edges = np.linspace(0.0, 1.0, spec.base_panels + 1)
        else:
            self.extent = spec.beta_max
            edges = np.linspace(-1.0, 1.0, spec.base_panels + 1)
        self.panels = list(zip(edges[:-1], edges[1:]))

    def _map(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "window":
            return self.half_width * t, np.full_like(t, self.half_width)
        if self.kind == "laplace":
            return self.extent * t * t, 2.0 * self.extent * t
        if self.mapping == "truncate":
            return self.extent * t, np.full_like(t, self.extent)
        if self.kind == "halfline":
            return self.c * t / (1.0 - t) ** 2, self.c * (1.0 + t) / (1.0 - t) ** 3
        s = 1.0 - t * t
        return self.c * t / s ** 2, self.c * (1.0 + 3.0 * t * t) / s ** 3

    @property
    def n_nodes(self) -> int:
        return 15 * len(self.panels) + (4 if self.kind == "window" else 0)

    def rule(self) -> AxisRule:
        lo = np.array([p[0] for p in self.panels])
        hi = np.array([p[1] for p in self.panels])
        half = 0.5 * (hi - lo)
        t = (0.5 * (hi + lo))[:, None] + half[:, None] * _NODES[None, :]
        x, jac = self._map(t)
        wk = half[:, None] * _KRONROD[None, :] * jac
        wg = half[:, None] * _GAUSS[None, :] * jac
        if self.weight_alpha:
            wk = wk * x
            wg = wg * x
        nodes = x.ravel()
        wk = wk.ravel().astype(complex)
        wg = wg.ravel().astype(complex)
        wt = np.zeros_like(wk)
        panel = np.repeat(np.arange(len(self.panels)), 15)
        if self.kind == "window":
            tail_nodes, tail_w, tail_t = self._tail()
            nodes = np.concatenate([nodes, tail_nodes])
            wk = np.concatenate([wk, tail_w])
            wg = np.concatenate([wg, tail_w])
            wt = np.concatenate([wt, tail_t])
            panel = np.concatenate([panel, np.full(4, -1)])
        return AxisRule(nodes, wk, wg, wt, panel, len(self.panels))

    def _tail(self):
        """Pseudo-nodes for the two oscillatory tails |beta| > B.

        With h(beta) = exp(-i a beta) s(beta) and s smooth, integration by parts gives
        int_B^inf h = h(B)/(ia) + exp(-iaB) s'(B)/(ia)^2 + ..., with s' taken as a
        one-sided difference over delta; the lower tail is the mirror image.
        """
        b = self.half_width
        delta = b / 100.0
        ia = 1j * self.rate
        second = 1.0 / (ia * ia * delta)
        nodes = np.array([b, b - delta, -b, -b + delta])
        w2 = np.array([second, -np.exp(-ia * delta) * second, second, -np.exp(ia * delta) * second])
        w1 = np.array([1.0 / ia, 0.0, -1.0 / ia, 0.0])
        return nodes, w1 + w2, w2

    def split(self, panel_ids: Sequence[int]) -> None:
        chosen = set(int(p) for p in panel_ids)
        out = []
        for k, (lo, hi) in enumerate(self.panels):
            if k in chosen:
                mid = 0.5 * (lo + hi)
                out.extend([(lo, mid), (mid, hi)])
            else:
                out.append((lo, hi))
        self.panels = out

    def outside_fraction(self) -> float:
        """Mass of the declared decay model beyond the truncation (truncate mapping only)."""
        if self.mapping != "truncate" or self.kind in ("window", "laplace"):
            return 0.0
        p = self.tail_decay
        edge = 1.0 + self.extent
        if self.kind == "halfline" and self.weight_alpha:
            return (p - 1.0) * edge ** (2.0 - p) - (p - 2.0) * edge ** (1.0 - p)
        return edge ** (1.0 - p)


def _magnitude(value) -> float:
    return float(np.max(np.abs(value))) if np.ndim(value) else abs(value)


def _contract(grid: np.ndarray, weights: Sequence[np.ndarray], factors, open_axis: int) -> np.ndarray:
    """Sum grid * weights * factors over every axis except open_axis."""
    k = len(weights)
    letters = _AXIS_LETTERS[:k]
    grid_values = "XY"[: grid.ndim - k]
    operands = [grid]
    terms = [letters + grid_values]
    for i, w in enumerate(weights):
        if i != open_axis:
            operands.append(w)
            terms.append(letters[i])
    out_values = grid_values
    matrix_chain = bool(factors) and factors[0][2].ndim == 4
    for pos, (i, j, arr) in enumerate(factors):
        operands.append(arr)
        if matrix_chain:
            terms.append(letters[i] + letters[j] + _CHAIN_LETTERS[pos] + _CHAIN_LETTERS[pos + 1])
        else:
            terms.append(letters[i] + letters[j])
    if matrix_chain:
        out_values = _CHAIN_LETTERS[0] + _CHAIN_LETTERS[len(factors)]
    subscripts = ",".join(terms) + "->" + letters[open_axis] + out_values
    return np.einsum(subscripts, *operands, optimize=True)


def _slice_factors(factors, idx: np.ndarray):
    out = []
    for i, j, arr in factors:
        if i == 0:
            arr = arr[idx]
        elif j == 0:
            arr = arr[:, idx]
        out.append((i, j, arr))
    return out


def _tensor_pass(grid_fn: Callable, rules: Sequence[AxisRule], factors, workers: int):
    """One evaluation of the integrand on the product grid.

    Returns (value, per-axis panel errors, truncation part, evaluations). The grid is
    processed in chunks along the first axis; chunk results are reduced in chunk order.
    """
    k = len(rules)
    sizes = [len(r.nodes) for r in rules]
    rest = int(np.prod(sizes[1:])) if k > 1 else 1
    chunk = max(1, _CHUNK_POINTS // max(rest, 1))
    starts = list(range(0, sizes[0], chunk))

    def run(start: int):
        idx = np.arange(start, min(start + chunk, sizes[0]))
        nodes = [rules[0].nodes[idx]] + [r.nodes for r in rules[1:]]
        grid = np.asarray(grid_fn(nodes))
        if not np.all(np.isfinite(grid)):
            raise QuadratureError("non-finite integrand sample")
        weights = [rules[0].wk[idx]] + [r.wk for r in rules[1:]]
        sliced = _slice_factors(factors, idx)
        return [_contract(grid, weights, sliced, axis) for axis in range(k)]

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]

    open_sums = [np.concatenate([p[0] for p in parts], axis=0)]
    for axis in range(1, k):
        acc = parts[0][axis]
        for p in parts[1:]:
            acc = acc + p[axis]
        open_sums.append(acc)

    value = np.tensordot(rules[0].wk, open_sums[0], axes=(0, 0))
    panel_errors = []
    truncation = 0.0
    for rule, v in zip(rules, open_sums):
        diff = (rule.wk - rule.wg).reshape((-1,) + (1,) * (v.ndim - 1)) * v
        keep = rule.panel >= 0
        per_panel = np.zeros((rule.n_panels,) + v.shape[1:], dtype=complex)
        np.add.at(per_panel, rule.panel[keep], diff[keep])
        panel_errors.append(np.abs(per_panel).reshape(rule.n_panels, -1).max(axis=1))
        if np.any(rule.wt != 0):
            truncation += _magnitude(np.tensordot(rule.wt, v, axes=(0, 0)))
    return value, panel_errors, truncation, int(np.prod(sizes))


def _refinement_plan(axes: Sequence[Axis], panel_errors: Sequence[np.ndarray], max_points: float):
    """Panels to split on each axis, or None when no split fits the node budget.

    The default plan splits every panel within a factor 4 of the worst one on all
    axes. When that overshoots the budget, only the worst axis is refined, worst
    panels first, as far as the budget allows.
    """
    worst = max(float(e.max()) for e in panel_errors)
    plan = [np.flatnonzero(e >= 0.25 * worst) for e in panel_errors]
    projected = 1
    for axis, chosen in zip(axes, plan):
        projected *= axis.n_nodes + 15 * len(chosen)
    if projected <= max_points:
        return plan
    target = int(np.argmax([float(e.max()) for e in panel_errors]))
    others = math.prod(axis.n_nodes for k, axis in enumerate(axes) if k != target)
    allowed = int((max_points // others - axes[target].n_nodes) // 15)
    if allowed < 1:
        return None
    order = np.argsort(-panel_errors[target], kind="stable")
    chosen = np.sort(np.intersect1d(order[:allowed], plan[target]))
    fallback = [np.array([], dtype=int) for _ in axes]
    fallback[target] = chosen
    return fallback


def _adaptive(grid_fn: Callable, axes: Sequence[Axis], spec: QuadSpec, factors_fn: Optional[Callable] = None,
              label: str = "integral") -> QuadResult:
    workers = get_engine_config()["workers"]
    n_evals = 0
    rounds = 0
    previous = None
    while True:
        rules = [axis.rule() for axis in axes]
        factors = factors_fn(rules) if factors_fn is not None else []
        value, panel_errors, truncation, evals = _tensor_pass(grid_fn, rules, factors, workers)
        n_evals += evals
        err = float(sum(e.sum() for e in panel_errors))
        target = max(spec.abs_tol, spec.rel_tol * _magnitude(value))
        logger.debug(f"{label}: round {rounds}, {evals} nodes, err {err:.3e} (target {target:.3e})")
        converged = bool(err <= target)
        if converged or rounds >= spec.max_refine_depth:
            break
        plan = _refinement_plan(axes, panel_errors, spec.max_points)
        if plan is None:
            logger.warning(f"{label}: node budget {spec.max_points} reached after {rounds} rounds")
            break
        for axis, chosen in zip(axes, plan):
            if len(chosen):
                axis.split(chosen)
        previous = value
        rounds += 1
    if not converged:
        if previous is not None:
            # never report less than the change over the last refinement
            err = max(err, _magnitude(value - previous))
        logger.warning(f"{label}: tolerance not met (err {err:.3e}, target {target:.3e})")
    inside = 1.0
    for axis in axes:
        inside *= 1.0 - axis.outside_fraction()
    truncation += _magnitude(value) * (1.0 / inside - 1.0)
    return QuadResult(
        value=value,
        err_est=err,
        n_evals=max(n_evals, 1),
        truncation_est=truncation,
        converged=converged,
        rounds=rounds,
    )


def _mesh(nodes: Sequence[np.ndarray]) -> np.ndarray:
    return np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1)


def _lambda_grid(nodes: Sequence[np.ndarray]) -> np.ndarray:
    """Complex points (..., n) from interleaved (alpha_j, beta_j) node arrays."""
    k = len(nodes)
    shape = [len(x) for x in nodes]
    coords = []
    for j in range(k // 2):
        view_a = [1] * k
        view_a[2 * j] = shape[2 * j]
        view_b = [1] * k
        view_b[2 * j + 1] = shape[2 * j + 1]
        lam = nodes[2 * j].reshape(view_a) + 1j * nodes[2 * j + 1].reshape(view_b)
        coords.append(np.broadcast_to(lam, shape))
    return np.stack(coords, axis=-1)


def _dv_axes(spec: QuadSpec, rates: Sequence[float], scale: Optional[float] = None,
             half_widths: Optional[Sequence[Optional[float]]] = None) -> list[Axis]:
    axes = []
    half_widths = half_widths if half_widths is not None else [None] * len(rates)
    for a, width in zip(rates, half_widths):
        axes.append(Axis("halfline", spec, weight_alpha=True, scale=scale))
        if a > 0:
            axes.append(Axis("window", spec, rate=a, half_width=width))
        else:
            axes.append(Axis("line", spec, scale=scale))
    return axes


def integrate_dVn(g, n: int, spec: QuadSpec, tail_decay: Optional[float] = None) -> QuadResult:
    """
    Integrate g over C_+^n against dV_n = prod_j alpha_j dalpha_j dbeta_j.

    Args:
        g: FnExpr of dimension n, or a callable taking complex points of shape (..., n)
           and returning values of shape (...) or (..., d, d)
        n: dimension
        spec: quadrature parameters
        tail_decay: decay exponent p of |g| declared for the truncate mapping

    Returns:
        QuadResult: value (scalar or matrix) with error and truncation estimates
    """
    if isinstance(g, FnExpr):
        if g.n != n:
            raise DimensionError(f"integrand of dimension {g.n} integrated over C_+^{n}")
        expr = g
        g = lambda pts: values(expr, pts)  # noqa: E731
    if tail_decay is not None:
        spec = spec.model_copy(update={"tail_decay": tail_decay})
    axes = _dv_axes(spec, [0.0] * n)
    return _adaptive(lambda nodes: g(_lambda_grid(nodes)), axes, spec, label=f"dV_{n}")


def integrate_halfline(g: Callable, k: int, spec: QuadSpec, label: str = "halfline") -> QuadResult:
    """Integrate g over R_+^k; g takes real points of shape (..., k) and returns (...)."""
    axes = [Axis("halfline", spec) for _ in range(k)]
    return _adaptive(lambda nodes: g(_mesh(nodes)), axes, spec, label=label)


def integrate_lines(g: Callable, k: int, spec: QuadSpec, scale=None, label: str = "lines") -> QuadResult:
    """Integrate g over R^k; g takes real points of shape (..., k).

    scale is one length scale for every axis or one per axis.
    """
    scales = [None] * k if scale is None else list(np.broadcast_to(np.asarray(scale, dtype=float), (k,)))
    axes = [Axis("line", spec, scale=s) for s in scales]
    return _adaptive(lambda nodes: g(_mesh(nodes)), axes, spec, label=label)


def _combine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b if np.ndim(a) >= 2 else a * b


def _norm(a) -> float:
    return float(np.linalg.norm(a)) if np.ndim(a) else abs(a)


def _factor_integral(phi: FnExpr, kernel: KernelFactor, spec: QuadSpec, rate: Optional[float] = None,
                     half_width: Optional[float] = None) -> QuadResult:
    """int_{C_+} k(lambda) phi(lambda) dV(lambda) for a one-variable phi.

    rate overrides the oscillation rate read off phi (0 selects a plain line axis).
    """
    axes = _dv_axes(spec, [exp_rate(phi) if rate is None else rate], half_widths=[half_width])

    def grid_fn(nodes):
        lam = nodes[0][:, None] + 1j * nodes[1][None, :]
        return values(phi, lam[..., None])

    def factors_fn(rules):
        lam = rules[0].nodes[:, None] + 1j * rules[1].nodes[None, :]
        return [(0, 1, kernel(lam))]

    return _adaptive(grid_fn, axes, spec, factors_fn, label=f"factor {phi}")


def _separated_term(term: Term, parts: Sequence[FnExpr], kernels: Sequence[KernelFactor], spec: QuadSpec):
    results = []
    for j, (phi, kernel) in enumerate(zip(parts, kernels)):
        if isinstance(phi, Const):
            raise IntegrabilityError(f"term {term.to_expr()} is constant in variable {j + 1}")
        results.append(_factor_integral(phi, kernel, spec))
    value = results[0].value
    for res in results[1:]:
        value = _combine(value, res.value)
    value = term.coef * value
    width = kernels[0].value_shape[0] if kernels[0].value_shape else 1
    norms = [_norm(r.value) for r in results]
    err = 0.0
    trunc = 0.0
    for j, res in enumerate(results):
        others = math.prod(norms[:j] + norms[j + 1:])
        err += width * res.err_est * others
        trunc += width * res.truncation_est * others
    return QuadResult(
        value=value,
        err_est=abs(term.coef) * err,
        n_evals=sum(r.n_evals for r in results),
        truncation_est=abs(term.coef) * trunc,
        converged=all(r.converged for r in results),
        rounds=max(r.rounds for r in results),
    )


def _laplace_cutoff(nu: float, rel_tol: float) -> float:
    """x beyond which x^(nu-1) e^(-x) has dropped below rel_tol / 100 of its peak."""
    big = math.log(100.0 / rel_tol)
    if nu <= 1.0:
        return max(1.0, big)
    x = nu - 1.0 + big
    for _ in range(30):
        x = (nu - 1.0) + big + (nu - 1.0) * math.log(x / (nu - 1.0))
    return x


def _window_half_width(rate: float, spec: QuadSpec) -> float:
    return max(30.0 / rate, min(spec.osc_window, 80.0 * rate ** -0.75))


class _CoupledFactors:
    """Memoised one-variable integrals F_j(sigma) = int k_j(lambda) phi_j(lambda) exp(-sigma lambda) dV."""

    def __init__(self, parts: Sequence[FnExpr], kernels: Sequence[KernelFactor], spec: QuadSpec):
        self.parts = parts
        self.kernels = kernels
        self.spec = spec
        self.cache: dict = {}

    def get(self, j: int, sigma: float) -> QuadResult:
        key = (j, float(sigma))
        if key not in self.cache:
            phi = self.parts[j]
            if sigma > 0:
                phi = make_prod([phi, Exp(1, (float(sigma),))])
            rate = exp_rate(phi)
            if rate < _WINDOW_MIN_RATE:
                res = _factor_integral(phi, self.kernels[j], self.spec, rate=0.0)
            else:
                res = _factor_integral(phi, self.kernels[j], self.spec, half_width=_window_half_width(rate, self.spec))
            self.cache[key] = res
        return self.cache[key]

    @property
    def n_evals(self) -> int:
        return sum(r.n_evals for r in self.cache.values())


def _laplace_term(term: Term, parts: Sequence[FnExpr], coupled: Sequence[ResLin],
                  kernels: Sequence[KernelFactor], spec: QuadSpec) -> QuadResult:
    """
    Term with resolvent atoms coupling several variables.

    Each coupled atom is written as a Laplace integral

        (lam0 + w.z)^(-nu) = 1/Gamma(nu) int_0^inf s^(nu-1) e^(-s lam0) prod_j e^(-s w_j z_j) ds

    so the term becomes an integral over s (one axis per coupled atom) of products of
    one-variable integrals F_j(sigma_j), sigma_j = sum_m s_m w_mj. The s axes are
    refined by the same adaptive rule; the F_j errors are carried through the outer
    weights into err_est and the s cut-off into truncation_est.
    """
    expr = term.to_expr()
    missing = set(range(term.n)) - term.variables()
    if missing:
        raise IntegrabilityError(f"term {expr} is constant in variables {sorted(j + 1 for j in missing)}")
    weights = np.array([atom.w for atom in coupled], dtype=float)
    lam0 = np.array([atom.lam for atom in coupled], dtype=complex)
    nus = np.array([atom.nu for atom in coupled], dtype=float)
    cutoffs = [_laplace_cutoff(nu, spec.rel_tol) for nu in nus]
    axes = [Axis("laplace", spec, extent=x / lam.real) for x, lam in zip(cutoffs, lam0)]
    factors = _CoupledFactors(parts, kernels, spec)
    width = kernels[0].value_shape[0] if kernels[0].value_shape else 1

    def prefactor(s: np.ndarray) -> np.ndarray:
        logs = (nus - 1.0) * np.log(s) - s * lam0 - np.array([math.lgamma(nu) for nu in nus])
        return term.coef * np.exp(logs.sum(axis=-1))

    def node_values(s: np.ndarray):
        """Integrand, inner error and inner truncation at one point of the s grid."""
        sigma = s @ weights
        results = [factors.get(j, sigma[j]) for j in range(term.n)]
        value = results[0].value
        for res in results[1:]:
            value = _combine(value, res.value)
        norms = [_norm(r.value) for r in results]
        err = trunc = 0.0
        for j, res in enumerate(results):
            others = math.prod(norms[:j] + norms[j + 1:])
            err += width * res.err_est * others
            trunc += width * res.truncation_est * others
        pre = prefactor(s)
        return pre * value, abs(pre) * err, abs(pre) * trunc, math.prod(norms)

    def grid_fn(nodes):
        mesh = _mesh(nodes)
        flat = mesh.reshape(-1, len(nodes))
        out = [node_values(s)[0] for s in flat]
        return np.asarray(out).reshape(mesh.shape[:-1] + np.shape(out[0]))

    result = _adaptive(grid_fn, axes, spec, label=f"term {expr}")
    rules = [axis.rule() for axis in axes]
    outer = np.ones(())
    for rule in rules:
        outer = np.multiply.outer(outer, np.abs(rule.wk))
    inner_err = inner_trunc = 0.0
    for idx in np.ndindex(*outer.shape):
        s = np.array([rule.nodes[k] for rule, k in zip(rules, idx)])
        _, err, trunc, _ = node_values(s)
        inner_err += outer[idx] * err
        inner_trunc += outer[idx] * trunc
    # dropped s tails: regularised upper gamma mass times |prod F_j| at the cut-off
    edge = node_values(np.array([rule.nodes[-1] for rule in rules]))[3]
    mass = float(np.prod(lam0.real ** -nus))
    tail = abs(term.coef) * edge * mass * float(sum(gammaincc(nu, x) for nu, x in zip(nus, cutoffs)))
    err = result.err_est + inner_err
    target = max(spec.abs_tol, spec.rel_tol * _magnitude(result.value))
    return QuadResult(
        value=result.value,
        err_est=err,
        n_evals=result.n_evals + factors.n_evals,
        truncation_est=result.truncation_est + inner_trunc + tail,
        converged=bool(result.converged and err <= target),
        rounds=result.rounds,
    )


def integrate_against_kernels(g: FnExpr, kernels: Sequence[KernelFactor], spec: QuadSpec) -> QuadResult:
    """
    Integrate prod_j k_j(lambda_j) * g(lambda) over C_+^n against dV_n.

    g is expanded into terms; a term whose atoms each involve one variable factors
    into one-variable integrals combined by products (matrix products for matrix
    kernels, which commute for commuting tuples). Terms with resolvent atoms that
    couple several variables go through a Laplace integral over those atoms.
    """
    if len(kernels) != g.n:
        raise DimensionError(f"{len(kernels)} kernels for an integrand of dimension {g.n}")
    value_shape = tuple(kernels[0].value_shape)
    total = np.zeros(value_shape, dtype=complex) if value_shape else 0j
    err = trunc = 0.0
    n_evals = 0
    rounds = 0
    converged = True
    for term in expand_terms(g):
        parts, coupled = term.split_coupled()
        if coupled:
            res = _laplace_term(term, parts, coupled, kernels, spec)
        else:
            res = _separated_term(term, parts, kernels, spec)
        total = total + res.value
        err += res.err_est
        trunc += res.truncation_est
        n_evals += res.n_evals
        rounds = max(rounds, res.rounds)
        converged = converged and res.converged
    return QuadResult(
        value=total,
        err_est=err,
        n_evals=max(n_evals, 1),
        truncation_est=trunc,
        converged=converged,
        rounds=rounds,
    )
