"""Function algebra: DSL parsing and printing, exact evaluation, formal partial
derivatives, supports, structural substitutions and grid sup-norm estimates.
"""
import logging
import math
import re
from dataclasses import dataclass
from functools import singledispatch
from itertools import product
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from ..errors import DimensionError, DomainError, InvalidAtomError, ParseError
from ..models.expr import (
    Const,
    Exp,
    FnExpr,
    Prod,
    ResLin,
    Scale,
    Sum,
    VarSet,
    make_prod,
    make_scale,
    make_sum,
)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 1729

# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i)?"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*(),\[\]])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num | imag | name | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character '{text[pos]}'", pos)
        if match.group("number") is not None:
            kind = "imag" if match.group("imag") else "num"
            tokens.append(_Token(kind, match.group("number"), pos))
        elif match.group("name") is not None:
            tokens.append(_Token("name", match.group("name"), pos))
        elif match.group("op") is not None:
            tokens.append(_Token("op", match.group("op"), pos))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over the grammar

        expr    := term { ("+"|"-") term }
        term    := factor { "*" factor }
        factor  := complex | atom | "(" expr ")" | "-" factor
        atom    := "res" "(" weights "," complex "," number ")" | "exp" "(" weights ")"
        weights := "[" number { "," number } "]"
        complex := ["-"] number [("+"|"-") number "i"]
    """

    def __init__(self, text: str, n: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n

    def peek(self, offset: int = 0) -> _Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            found = tok.text or "end of input"
            raise ParseError(f"expected '{text}' but found '{found}'", tok.pos)
        return self.advance()

    def parse(self) -> FnExpr:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected '{tok.text}'", tok.pos)
        return node

    def expr(self) -> FnExpr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = node + rhs if op == "+" else node - rhs
        return node

    def term(self) -> FnExpr:
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text == "*":
            self.advance()
            node = make_prod([node, self.factor()])
        return node

    def factor(self) -> FnExpr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "op" and tok.text == "-":
            if self.peek(1).kind == "num":
                return Const(self.n, self.complex_literal())
            self.advance()
            return make_scale(-1.0, self.factor())
        if tok.kind == "num":
            return Const(self.n, self.complex_literal())
        if tok.kind == "imag":
            self.advance()
            return Const(self.n, complex(0.0, float(tok.text)))
        if tok.kind == "name":
            return self.atom()
        found = tok.text or "end of input"
        raise ParseError(f"unexpected '{found}'", tok.pos)

    def number(self) -> float:
        sign = 1.0
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            sign = -1.0
        tok = self.peek()
        if tok.kind != "num":
            found = tok.text or "end of input"
            raise ParseError(f"expected a number but found '{found}'", tok.pos)
        self.advance()
        return sign * float(tok.text)

    def complex_literal(self) -> complex:
        real = self.number()
        nxt, after = self.peek(), self.peek(1)
        if nxt.kind == "op" and nxt.text in "+-" and after.kind == "imag":
            self.advance()
            self.advance()
            imag = float(after.text)
            return complex(real, imag if nxt.text == "+" else -imag)
        return complex(real, 0.0)

    def weights(self) -> tuple[float, ...]:
        start = self.expect("[").pos
        values = [self.number()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            values.append(self.number())
        self.expect("]")
        if len(values) != self.n:
            raise DimensionError(
                f"weight vector at position {start} has {len(values)} entries, expected {self.n}"
            )
        return tuple(values)

    def atom(self) -> FnExpr:
        tok = self.advance()
        name = tok.text
        if name not in ("res", "exp"):
            raise ParseError(f"unknown function '{name}'", tok.pos)
        self.expect("(")
        w = self.weights()
        try:
            if name == "exp":
                self.expect(")")
                return Exp(self.n, w)
            self.expect(",")
            lam = self.complex_literal()
            self.expect(",")
            nu = self.number()
            self.expect(")")
            return ResLin(self.n, w, lam, nu)
        except InvalidAtomError as e:
            raise InvalidAtomError(f"{e} (atom at position {tok.pos})") from e


def parse_expr(text: str, n: int) -> FnExpr:
    """
    Parse DSL text into an FnExpr of dimension n.

    Raises:
        ParseError: syntax error, with the character position
        DimensionError: weight vectors of the wrong length
        InvalidAtomError: invalid atom parameters such as Re lambda <= 0
    """
    if n < 1:
        raise DimensionError(f"dimension must be positive, got {n}")
    return _Parser(text, n).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _fmt_real(x: float) -> str:
    return repr(float(x))


def _fmt_complex(c: complex) -> str:
    if c.imag == 0:
        return _fmt_real(c.real)
    sign = "+" if c.imag >= 0 else "-"
    return f"{_fmt_real(c.real)}{sign}{_fmt_real(abs(c.imag))}i"


def _fmt_coef(c: complex) -> str:
    return _fmt_real(c.real) if c.imag == 0 else f"({_fmt_complex(c)})"


def _fmt_vector(values: Sequence[float]) -> str:
    return "[" + ", ".join(_fmt_real(v) for v in values) + "]"


@singledispatch
def _fmt(f: FnExpr) -> str:
    raise TypeError(f"cannot print {type(f).__name__}")


@_fmt.register
def _(f: Const) -> str:
    return _fmt_coef(f.c)


@_fmt.register
def _(f: ResLin) -> str:
    return f"res({_fmt_vector(f.w)}, {_fmt_complex(f.lam)}, {_fmt_real(f.nu)})"


@_fmt.register
def _(f: Exp) -> str:
    return f"exp({_fmt_vector(f.a)})"


@_fmt.register
def _(f: Sum) -> str:
    return " + ".join(_fmt(child) for child in f.children)


@_fmt.register
def _(f: Prod) -> str:
    return "*".join(_fmt_factor(child) for child in f.children)


@_fmt.register
def _(f: Scale) -> str:
    return f"{_fmt_coef(f.c)}*{_fmt_factor(f.child)}"


def _fmt_factor(f: FnExpr) -> str:
    if isinstance(f, (Sum, Scale)):
        return f"({_fmt(f)})"
    return _fmt(f)


def to_text(f: FnExpr) -> str:
    """Print f in the DSL grammar; parse_expr(to_text(f), f.n) rebuilds the same tree."""
    return _fmt(f)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@singledispatch
def _value(f: FnExpr, z: np.ndarray) -> np.ndarray:
    raise TypeError(f"cannot evaluate {type(f).__name__}")


@_value.register
def _(f: Const, z: np.ndarray) -> np.ndarray:
    return np.full(z.shape[:-1], f.c, dtype=complex)


@_value.register
def _(f: ResLin, z: np.ndarray) -> np.ndarray:
    base = f.lam + z @ np.asarray(f.w)
    if float(f.nu).is_integer():
        return np.reciprocal(base) ** int(f.nu)
    return np.power(base, -f.nu)


@_value.register
def _(f: Exp, z: np.ndarray) -> np.ndarray:
    return np.exp(-(z @ np.asarray(f.a)))


@_value.register
def _(f: Sum, z: np.ndarray) -> np.ndarray:
    out = _value(f.children[0], z)
    for child in f.children[1:]:
        out = out + _value(child, z)
    return out


@_value.register
def _(f: Prod, z: np.ndarray) -> np.ndarray:
    out = _value(f.children[0], z)
    for child in f.children[1:]:
        out = out * _value(child, z)
    return out


@_value.register
def _(f: Scale, z: np.ndarray) -> np.ndarray:
    return f.c * _value(f.child, z)


def _as_points(f: FnExpr, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if f.n == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        z = z[..., None]
    if z.shape[-1] != f.n:
        raise DimensionError(f"points have {z.shape[-1]} coordinates, expected {f.n}")
    return z


def values(f: FnExpr, z) -> np.ndarray:
    """Vectorized evaluation on points of shape (..., n) without domain checks.

    Atoms extend continuously to the closed poly-half-plane, so boundary points
    with Re z_j = 0 are accepted here.
    """
    return _value(f, _as_points(f, z))


def evaluate(f: FnExpr, z) -> Union[complex, np.ndarray]:
    """
    Evaluate f at a point of C_+^n (or an array of points, last axis of size n).

    Raises:
        DomainError: some Re z_j <= 0
    """
    pts = _as_points(f, z)
    if np.any(pts.real <= 0):
        raise DomainError("evaluation point outside the open poly-half-plane")
    out = _value(f, pts)
    return complex(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------


@singledispatch
def _derive(f: FnExpr, j: int) -> FnExpr:
    raise TypeError(f"cannot differentiate {type(f).__name__}")


@_derive.register
def _(f: Const, j: int) -> FnExpr:
    return Const(f.n, 0)


@_derive.register
def _(f: ResLin, j: int) -> FnExpr:
    if f.w[j] == 0:
        return Const(f.n, 0)
    return make_scale(-f.nu * f.w[j], ResLin(f.n, f.w, f.lam, f.nu + 1))


@_derive.register
def _(f: Exp, j: int) -> FnExpr:
    if f.a[j] == 0:
        return Const(f.n, 0)
    return make_scale(-f.a[j], f)


@_derive.register
def _(f: Sum, j: int) -> FnExpr:
    return make_sum(_derive(child, j) for child in f.children)


@_derive.register
def _(f: Prod, j: int) -> FnExpr:
    terms = []
    for k, child in enumerate(f.children):
        d = _derive(child, j)
        if isinstance(d, Const) and d.c == 0:
            continue
        terms.append(make_prod(f.children[:k] + (d,) + f.children[k + 1:]))
    return make_sum(terms) if terms else Const(f.n, 0)


@_derive.register
def _(f: Scale, j: int) -> FnExpr:
    return make_scale(f.c, _derive(f.child, j))


def _indices(f: FnExpr, omega: Union[VarSet, Iterable[int]]) -> tuple[int, ...]:
    if isinstance(omega, VarSet):
        if omega.n != f.n:
            raise DimensionError(f"variable set over {omega.n} variables used with dimension {f.n}")
        return omega.indices
    idx = tuple(sorted(set(omega)))
    if any(not 0 <= j < f.n for j in idx):
        raise DimensionError(f"variable indices {idx} outside dimension {f.n}")
    return idx


def partial(f: FnExpr, omega: Union[VarSet, Iterable[int]]) -> FnExpr:
    """D_Omega f: differentiate once in each coordinate of omega (0-based indices)."""
    out = f
    for j in _indices(f, omega):
        out = _derive(out, j)
    return out


# ---------------------------------------------------------------------------
# Sampling, support, equality
# ---------------------------------------------------------------------------


def sample_points(n: int, count: int, seed: int = DEFAULT_SEED, re_range=(0.1, 10.0), im_half=5.0) -> np.ndarray:
    """Pseudo-random points of C_+^n with log-uniform real parts."""
    rng = np.random.default_rng(seed)
    re_part = np.exp(rng.uniform(math.log(re_range[0]), math.log(re_range[1]), size=(count, n)))
    im_part = rng.uniform(-im_half, im_half, size=(count, n))
    return re_part + 1j * im_part


def is_zero(f: FnExpr, count: int = 50, seed: int = DEFAULT_SEED, tol: float = 1e-12) -> bool:
    if isinstance(f, Const):
        return abs(f.c) <= tol
    return bool(np.max(np.abs(values(f, sample_points(f.n, count, seed)))) <= tol)


def equals(f: FnExpr, g: FnExpr, count: int = 50, seed: int = DEFAULT_SEED, tol: float = 1e-9) -> bool:
    """Pointwise-sampled equality."""
    if f.n != g.n:
        return False
    pts = sample_points(f.n, count, seed)
    fv, gv = values(f, pts), values(g, pts)
    return bool(np.max(np.abs(fv - gv)) <= tol * (1.0 + np.max(np.abs(fv))))


@singledispatch
def _structural_support(f: FnExpr) -> set:
    raise TypeError(f"no support rule for {type(f).__name__}")


@_structural_support.register
def _(f: Const) -> set:
    return set()


@_structural_support.register
def _(f: ResLin) -> set:
    return {j for j, w in enumerate(f.w) if w > 0}


@_structural_support.register
def _(f: Exp) -> set:
    return {j for j, a in enumerate(f.a) if a > 0}


@_structural_support.register(Sum)
@_structural_support.register(Prod)
def _(f) -> set:
    out = set()
    for child in f.children:
        out |= _structural_support(child)
    return out


@_structural_support.register
def _(f: Scale) -> set:
    return _structural_support(f.child)


def support(f: FnExpr, seed: int = DEFAULT_SEED) -> VarSet:
    """Coordinates j with D_j f not identically zero: structural candidates confirmed at 5 sampled points."""
    confirmed = [j for j in sorted(_structural_support(f)) if not is_zero(_derive(f, j), count=5, seed=seed)]
    return VarSet.of(f.n, confirmed)


# ---------------------------------------------------------------------------
# Structural substitutions
# ---------------------------------------------------------------------------

INFINITY = "inf"


def substitute(f: FnExpr, mapping: Sequence, n_new: int) -> FnExpr:
    """
    Substitute every variable of f.

    mapping[j] is either an int k (z_j <- w_k, 0-based into the new variables),
    a complex value zeta (z_j <- zeta, Re zeta > 0), or INFINITY (Re z_j -> infinity).
    """
    if len(mapping) != f.n:
        raise DimensionError(f"substitution covers {len(mapping)} variables, expected {f.n}")
    return _subst(f, tuple(mapping), n_new)


def _linear_parts(coeffs: Sequence[float], mapping, n_new: int):
    """Split sum_j c_j z_j under a substitution into (new coefficients, constant, hits infinity)."""
    new = [0.0] * n_new
    shift = 0j
    to_infinity = False
    for c, target in zip(coeffs, mapping):
        if c == 0:
            continue
        if isinstance(target, str):
            to_infinity = True
        elif isinstance(target, (int, np.integer)):
            new[int(target)] += c
        else:
            shift += c * complex(target)
    return new, shift, to_infinity


@singledispatch
def _subst(f: FnExpr, mapping, n_new: int) -> FnExpr:
    raise TypeError(f"cannot substitute into {type(f).__name__}")


@_subst.register
def _(f: Const, mapping, n_new: int) -> FnExpr:
    return Const(n_new, f.c)


@_subst.register
def _(f: ResLin, mapping, n_new: int) -> FnExpr:
    w, shift, to_infinity = _linear_parts(f.w, mapping, n_new)
    if to_infinity:
        return Const(n_new, 0)
    lam = f.lam + shift
    if not lam.real > 0:
        raise InvalidAtomError(f"substitution moves resolvent parameter to {lam}")
    if not any(x > 0 for x in w):
        return Const(n_new, complex(lam) ** (-f.nu))
    return ResLin(n_new, tuple(w), lam, f.nu)


@_subst.register
def _(f: Exp, mapping, n_new: int) -> FnExpr:
    a, shift, to_infinity = _linear_parts(f.a, mapping, n_new)
    if to_infinity:
        return Const(n_new, 0)
    body = Exp(n_new, tuple(a)) if any(x > 0 for x in a) else Const(n_new, 1)
    return make_scale(np.exp(-shift), body)


@_subst.register
def _(f: Sum, mapping, n_new: int) -> FnExpr:
    return make_sum(_subst(child, mapping, n_new) for child in f.children)


@_subst.register
def _(f: Prod, mapping, n_new: int) -> FnExpr:
    return make_prod(_subst(child, mapping, n_new) for child in f.children)


@_subst.register
def _(f: Scale, mapping, n_new: int) -> FnExpr:
    return make_scale(f.c, _subst(f.child, mapping, n_new))


@singledispatch
def _translate(f: FnExpr, t: np.ndarray) -> FnExpr:
    raise TypeError(f"cannot translate {type(f).__name__}")


@_translate.register
def _(f: Const, t: np.ndarray) -> FnExpr:
    return f


@_translate.register
def _(f: ResLin, t: np.ndarray) -> FnExpr:
    lam = f.lam + float(np.dot(f.w, t))
    if not lam.real > 0:
        raise InvalidAtomError(f"translation moves resolvent singularity into the half-plane (lambda -> {lam})")
    return ResLin(f.n, f.w, lam, f.nu)


@_translate.register
def _(f: Exp, t: np.ndarray) -> FnExpr:
    return make_scale(math.exp(-float(np.dot(f.a, t))), f)


@_translate.register
def _(f: Sum, t: np.ndarray) -> FnExpr:
    return make_sum(_translate(child, t) for child in f.children)


@_translate.register
def _(f: Prod, t: np.ndarray) -> FnExpr:
    return make_prod(_translate(child, t) for child in f.children)


@_translate.register
def _(f: Scale, t: np.ndarray) -> FnExpr:
    return make_scale(f.c, _translate(f.child, t))


def translate(f: FnExpr, t: Sequence[float]) -> FnExpr:
    """z -> f(z + t) for real t of either sign; negative t must keep every atom holomorphic."""
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.size == 1 and f.n > 1:
        t = np.full(f.n, t[0])
    if t.size != f.n:
        raise DimensionError(f"translation vector has {t.size} entries, expected {f.n}")
    return _translate(f, t)


def dilate(f: FnExpr, b: float) -> FnExpr:
    """z -> f(b z) for b > 0."""
    if not b > 0:
        raise DomainError(f"dilation factor must be positive, got {b}")
    return _dilate(f, float(b))


@singledispatch
def _dilate(f: FnExpr, b: float) -> FnExpr:
    raise TypeError(f"cannot dilate {type(f).__name__}")


@_dilate.register
def _(f: Const, b: float) -> FnExpr:
    return f


@_dilate.register
def _(f: ResLin, b: float) -> FnExpr:
    return ResLin(f.n, tuple(b * w for w in f.w), f.lam, f.nu)


@_dilate.register
def _(f: Exp, b: float) -> FnExpr:
    return Exp(f.n, tuple(b * a for a in f.a))


@_dilate.register
def _(f: Sum, b: float) -> FnExpr:
    return make_sum(_dilate(child, b) for child in f.children)


@_dilate.register
def _(f: Prod, b: float) -> FnExpr:
    return make_prod(_dilate(child, b) for child in f.children)


@_dilate.register
def _(f: Scale, b: float) -> FnExpr:
    return make_scale(f.c, _dilate(f.child, b))


def project(f: FnExpr, omega: VarSet) -> FnExpr:
    """Rewrite an expression whose atoms only involve omega as a |omega|-variable expression."""
    if len(omega) == 0:
        raise DimensionError("cannot project onto the empty variable set")
    outside = set(_structural_support(f)) - set(omega.indices)
    if outside:
        labels = sorted(j + 1 for j in outside)
        raise DimensionError(f"expression depends on variables {labels} outside {omega}")
    position = {j: k for k, j in enumerate(omega.indices)}
    mapping = [position.get(j, 0) for j in range(f.n)]
    return _subst(f, tuple(mapping), len(omega))


def embed(f: FnExpr, omega: VarSet) -> FnExpr:
    """Inverse of project: place a |omega|-variable expression on the coordinates of omega."""
    if f.n != len(omega):
        raise DimensionError(f"expression of dimension {f.n} cannot sit on {omega}")
    return _subst(f, tuple(omega.indices), omega.n)


# ---------------------------------------------------------------------------
# Term expansion and separation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    """coef * product of atoms, with exponentials merged and equal resolvent bases combined."""

    n: int
    coef: complex
    atoms: tuple[FnExpr, ...]

    def to_expr(self) -> FnExpr:
        if not self.atoms:
            return Const(self.n, self.coef)
        return make_scale(self.coef, make_prod(self.atoms))

    def variables(self) -> set:
        out = set()
        for atom in self.atoms:
            out |= _structural_support(atom)
        return out

    def split_coupled(self) -> tuple[list[FnExpr], list[ResLin]]:
        """Per-variable one-variable factors and the resolvent atoms that couple several
        variables, with term = coef * prod_j phi_j(z_j) * prod(coupled)."""
        factors: list[list[FnExpr]] = [[] for _ in range(self.n)]
        coupled: list[ResLin] = []
        for atom in self.atoms:
            if isinstance(atom, ResLin):
                active = [j for j, w in enumerate(atom.w) if w > 0]
                if len(active) > 1:
                    coupled.append(atom)
                    continue
                j = active[0]
                factors[j].append(ResLin(1, (atom.w[j],), atom.lam, atom.nu))
            else:
                for j, a in enumerate(atom.a):
                    if a > 0:
                        factors[j].append(Exp(1, (a,)))
        return [make_prod(parts) if parts else Const(1, 1) for parts in factors], coupled

    def separate(self) -> Optional[list[FnExpr]]:
        """One-variable factors phi_j with term = coef * prod_j phi_j(z_j), or None when some
        resolvent atom couples several variables."""
        factors, coupled = self.split_coupled()
        return None if coupled else factors


def _atom_key(atom: FnExpr):
    if isinstance(atom, Exp):
        return (0, atom.a, 0.0, 0.0, 0.0)
    return (1, atom.w, atom.lam.real, atom.lam.imag, atom.nu)


def _merge_atoms(n: int, atoms: Iterable[FnExpr]) -> tuple[FnExpr, ...]:
    rate = np.zeros(n)
    powers: dict = {}
    for atom in atoms:
        if isinstance(atom, Exp):
            rate += np.asarray(atom.a)
        else:
            key = (atom.w, atom.lam)
            powers[key] = powers.get(key, 0.0) + atom.nu
    merged: list[FnExpr] = [ResLin(n, w, lam, nu) for (w, lam), nu in powers.items()]
    if np.any(rate > 0):
        merged.append(Exp(n, tuple(rate)))
    return tuple(sorted(merged, key=_atom_key))


@singledispatch
def _expand(f: FnExpr) -> list:
    raise TypeError(f"cannot expand {type(f).__name__}")


@_expand.register
def _(f: Const) -> list:
    return [(f.c, ())]


@_expand.register(ResLin)
@_expand.register(Exp)
def _(f) -> list:
    return [(1 + 0j, (f,))]


@_expand.register
def _(f: Sum) -> list:
    out = []
    for child in f.children:
        out.extend(_expand(child))
    return out


@_expand.register
def _(f: Prod) -> list:
    out = [(1 + 0j, ())]
    for child in f.children:
        out = [(c1 * c2, a1 + a2) for (c1, a1), (c2, a2) in product(out, _expand(child))]
    return out


@_expand.register
def _(f: Scale) -> list:
    return [(f.c * c, atoms) for c, atoms in _expand(f.child)]


def expand_terms(f: FnExpr) -> list[Term]:
    """Distribute products over sums; like terms are combined and zero terms dropped."""
    combined: dict = {}
    for coef, atoms in _expand(f):
        key = _merge_atoms(f.n, atoms)
        combined[key] = combined.get(key, 0j) + coef
    return [Term(f.n, coef, atoms) for atoms, coef in combined.items() if coef != 0]


def exp_rate(f: FnExpr) -> float:
    """Total exponential rate of a one-variable product of atoms (0 when there is no exponential)."""
    if isinstance(f, Exp):
        return float(sum(f.a))
    if isinstance(f, Prod):
        return float(sum(exp_rate(child) for child in f.children))
    if isinstance(f, Scale):
        return exp_rate(f.child)
    return 0.0


# ---------------------------------------------------------------------------
# Grid sup estimates
# ---------------------------------------------------------------------------

_GRID_BUDGET = 400_000
_CHUNK_BUDGET = 2_000_000


def _im_grid(k: int) -> np.ndarray:
    pos = np.logspace(-2, 3, k)
    return np.concatenate([-pos[::-1], [0.0], pos])


def _re_grid(k: int) -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-3, 3, k)])


def _search_layout(f: FnExpr, fixed: Sequence[int]) -> tuple[list, int]:
    """Search dimensions as (coordinate, 're'|'im') pairs and the grid parameter k."""
    dims = []
    for j in range(f.n):
        if j not in fixed:
            dims.append((j, "re"))
        dims.append((j, "im"))
    k = 12
    while k > 4:
        size = 1
        for _, part in dims:
            size *= (k + 1) if part == "re" else (2 * k + 1)
        if size <= _GRID_BUDGET:
            break
        k -= 2
    return dims, k


def _points_from_dims(f: FnExpr, fixed: Sequence[int], fixed_re: np.ndarray, dims, dim_values) -> np.ndarray:
    """Assemble points of shape (m, s_1, ..., s_d, n) from per-dimension value arrays of shape (m, s_i)."""
    m = fixed_re.shape[0]
    d = len(dims)
    shape = [m] + [v.shape[1] for v in dim_values]

    def along(values: np.ndarray, axis: int) -> np.ndarray:
        view = [m] + [1] * d
        view[axis + 1] = values.shape[1]
        return values.reshape(view)

    coords = []
    for j in range(f.n):
        if j in fixed:
            re_part = fixed_re[:, list(fixed).index(j)].reshape([m] + [1] * d)
        else:
            re_part = along(dim_values[dims.index((j, "re"))], dims.index((j, "re")))
        im_part = along(dim_values[dims.index((j, "im"))], dims.index((j, "im")))
        coords.append(np.broadcast_to(re_part + 1j * im_part, shape))
    return np.stack(coords, axis=-1)


def slice_sup(
    f: FnExpr,
    fixed: Sequence[int],
    fixed_re: np.ndarray,
    rounds: int = 3,
) -> np.ndarray:
    """
    Estimate sup |f| over the points whose coordinates in `fixed` have the given
    real parts (one row of fixed_re per query) while every other coordinate ranges
    over the closed half-plane.

    The search evaluates a boundary-refined grid (imaginary parts symmetric
    log-spaced in [1e-2, 1e3], free real parts {0} plus log-spaced [1e-3, 1e3])
    and then zooms around the best point for `rounds` rounds. The result is a
    lower estimate of the supremum.

    Returns:
        np.ndarray: one estimate per row of fixed_re
    """
    fixed = list(fixed)
    fixed_re = np.atleast_2d(np.asarray(fixed_re, dtype=float))
    if fixed_re.shape[1] != len(fixed):
        raise DimensionError(f"fixed real parts have {fixed_re.shape[1]} columns, expected {len(fixed)}")
    dims, k = _search_layout(f, fixed)
    base = [_re_grid(k) if part == "re" else _im_grid(k) for _, part in dims]
    grid_size = int(np.prod([len(b) for b in base]))
    local = 21 if len(dims) <= 2 else (11 if len(dims) <= 4 else 7)
    chunk = max(1, _CHUNK_BUDGET // max(grid_size, local ** len(dims)))
    out = np.empty(fixed_re.shape[0])
    for start in range(0, fixed_re.shape[0], chunk):
        rows = fixed_re[start:start + chunk]
        out[start:start + chunk] = _slice_sup_chunk(f, fixed, rows, dims, base, local, rounds)
    return out


def _slice_sup_chunk(f, fixed, rows, dims, base, local, rounds) -> np.ndarray:
    m = rows.shape[0]
    dim_values = [np.broadcast_to(b, (m, len(b))) for b in base]
    vals = np.abs(values(f, _points_from_dims(f, fixed, rows, dims, dim_values))).reshape(m, -1)
    best = vals.max(axis=1)
    flat = vals.argmax(axis=1)
    centers, halfwidths = [], []
    for axis, idx in enumerate(np.unravel_index(flat, [len(b) for b in base])):
        grid = base[axis]
        gaps = np.diff(grid)
        left = np.where(idx > 0, gaps[np.maximum(idx - 1, 0)], 0.0)
        right = np.where(idx < len(grid) - 1, gaps[np.minimum(idx, len(gaps) - 1)], 0.0)
        centers.append(grid[idx])
        halfwidths.append(np.maximum(left, right))
    offsets = np.linspace(-1.0, 1.0, local)
    for _ in range(rounds):
        dim_values = []
        for axis, (_, part) in enumerate(dims):
            vals_axis = centers[axis][:, None] + halfwidths[axis][:, None] * offsets[None, :]
            if part == "re":
                vals_axis = np.maximum(vals_axis, 0.0)
            dim_values.append(vals_axis)
        vals = np.abs(values(f, _points_from_dims(f, fixed, rows, dims, dim_values))).reshape(m, -1)
        flat = vals.argmax(axis=1)
        best = np.maximum(best, vals.max(axis=1))
        for axis, idx in enumerate(np.unravel_index(flat, [local] * len(dims))):
            centers[axis] = dim_values[axis][np.arange(m), idx]
            halfwidths[axis] = halfwidths[axis] * 2.0 / (local - 1)
    return best


def sup_norm(f: FnExpr) -> float:
    """Grid estimate of sup |f| over C_+^n (a lower estimate, not a certificate)."""
    if isinstance(f, Const):
        return abs(f.c)
    return float(slice_sup(f, [], np.zeros((1, 0)))[0])


def boundary_sup(f: FnExpr) -> float:
    """Grid estimate of sup |f| over the distinguished boundary Re z = 0."""
    if isinstance(f, Const):
        return abs(f.c)
    return float(slice_sup(f, list(range(f.n)), np.zeros((1, f.n)))[0])
