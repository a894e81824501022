"""Expression trees for bounded holomorphic functions on the poly-half-plane C_+^n.

Atoms are constants, linear resolvent powers (lam + sum_j w_j z_j)^(-nu) and
exponentials exp(-sum_j a_j z_j); sums, products and scalar multiples combine
them. Trees are immutable and normalized on construction through the
make_sum / make_prod / make_scale builders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Number
from typing import Iterable, Iterator, Sequence

from ..errors import DimensionError, InvalidAtomError


@dataclass(frozen=True)
class VarSet:
    """A subset Omega of I_n, stored as a bitmask over 0-based coordinates."""

    n: int
    mask: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise DimensionError(f"dimension must be non-negative, got {self.n}")
        if self.mask < 0 or self.mask >> self.n:
            raise DimensionError(f"mask {self.mask:#b} does not fit in {self.n} variables")

    @classmethod
    def of(cls, n: int, indices: Iterable[int]) -> "VarSet":
        mask = 0
        for j in indices:
            if not 0 <= j < n:
                raise DimensionError(f"variable index {j + 1} outside 1..{n}")
            mask |= 1 << j
        return cls(n, mask)

    @classmethod
    def from_labels(cls, n: int, labels: Iterable[int]) -> "VarSet":
        """Build from 1-based labels, the numbering used in DSL text and reports."""
        return cls.of(n, (int(label) - 1 for label in labels))

    @classmethod
    def parse(cls, text: str, n: int) -> "VarSet":
        body = text.strip().strip("{}").strip()
        if not body:
            return cls(n)
        try:
            labels = [int(part) for part in body.split(",") if part.strip()]
        except ValueError as e:
            raise DimensionError(f"invalid variable set '{text}'") from e
        return cls.from_labels(n, labels)

    @classmethod
    def full(cls, n: int) -> "VarSet":
        return cls(n, (1 << n) - 1)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(j for j in range(self.n) if self.mask >> j & 1)

    @property
    def labels(self) -> list[int]:
        return [j + 1 for j in self.indices]

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, j: int) -> bool:
        return 0 <= j < self.n and bool(self.mask >> j & 1)

    def complement(self) -> "VarSet":
        return VarSet(self.n, ((1 << self.n) - 1) & ~self.mask)

    def __or__(self, other: "VarSet") -> "VarSet":
        return VarSet(self.n, self.mask | other.mask)

    def __and__(self, other: "VarSet") -> "VarSet":
        return VarSet(self.n, self.mask & other.mask)

    def __sub__(self, other: "VarSet") -> "VarSet":
        return VarSet(self.n, self.mask & ~other.mask)

    def issubset(self, other: "VarSet") -> bool:
        return self.mask & ~other.mask == 0

    def subsets(self) -> list["VarSet"]:
        """All subsets of this set in increasing mask order."""
        out = []
        sub = 0
        while True:
            out.append(VarSet(self.n, sub))
            if sub == self.mask:
                return out
            sub = (sub - self.mask) & self.mask

    def __str__(self) -> str:
        return "{" + ",".join(str(label) for label in self.labels) + "}"


def power_set(n: int) -> list[VarSet]:
    """P_n in increasing mask order; the empty set comes first, I_n last."""
    return [VarSet(n, mask) for mask in range(1 << n)]


@dataclass(frozen=True)
class FnExpr:
    n: int

    def __add__(self, other):
        return make_sum([self, _coerce(other, self.n)])

    def __radd__(self, other):
        return make_sum([_coerce(other, self.n), self])

    def __sub__(self, other):
        return make_sum([self, make_scale(-1.0, _coerce(other, self.n))])

    def __rsub__(self, other):
        return make_sum([_coerce(other, self.n), make_scale(-1.0, self)])

    def __mul__(self, other):
        if isinstance(other, Number):
            return make_scale(complex(other), self)
        return make_prod([self, other])

    def __rmul__(self, other):
        if isinstance(other, Number):
            return make_scale(complex(other), self)
        return make_prod([other, self])

    def __neg__(self):
        return make_scale(-1.0, self)

    def __str__(self) -> str:
        from ..services.fnalg import to_text

        return to_text(self)


@dataclass(frozen=True)
class Const(FnExpr):
    c: complex

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))


@dataclass(frozen=True)
class ResLin(FnExpr):
    """(lam + sum_j w_j z_j)^(-nu), principal branch."""

    w: tuple[float, ...]
    lam: complex
    nu: float = 1.0

    def __post_init__(self):
        w = tuple(float(x) for x in self.w)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "nu", float(self.nu))
        if len(w) != self.n:
            raise DimensionError(f"resolvent weights have length {len(w)}, expected {self.n}")
        if any(not math.isfinite(x) or x < 0 for x in w):
            raise InvalidAtomError(f"resolvent weights must be finite and nonnegative, got {list(w)}")
        if not any(x > 0 for x in w):
            raise InvalidAtomError("resolvent weights must contain a positive entry")
        if not self.lam.real > 0 or not math.isfinite(abs(self.lam)):
            raise InvalidAtomError(f"resolvent needs Re lambda > 0, got {self.lam}")
        if not self.nu > 0 or not math.isfinite(self.nu):
            raise InvalidAtomError(f"resolvent power must be positive, got {self.nu}")


@dataclass(frozen=True)
class Exp(FnExpr):
    """exp(-sum_j a_j z_j)."""

    a: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        object.__setattr__(self, "a", a)
        if len(a) != self.n:
            raise DimensionError(f"exponent vector has length {len(a)}, expected {self.n}")
        if any(not math.isfinite(x) or x < 0 for x in a):
            raise InvalidAtomError(f"exponents must be finite and nonnegative, got {list(a)}")


@dataclass(frozen=True)
class Sum(FnExpr):
    children: tuple[FnExpr, ...]

    def __post_init__(self):
        _check_children(self.n, self.children)


@dataclass(frozen=True)
class Prod(FnExpr):
    children: tuple[FnExpr, ...]

    def __post_init__(self):
        _check_children(self.n, self.children)


@dataclass(frozen=True)
class Scale(FnExpr):
    c: complex
    child: FnExpr

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))
        _check_children(self.n, (self.child,))


def _check_children(n: int, children: Sequence[FnExpr]) -> None:
    if not children:
        raise DimensionError("compound expressions need at least one child")
    for child in children:
        if child.n != n:
            raise DimensionError(f"child of dimension {child.n} inside expression of dimension {n}")


def _coerce(value, n: int) -> FnExpr:
    if isinstance(value, FnExpr):
        return value
    return Const(n, complex(value))


def make_sum(children: Iterable[FnExpr]) -> FnExpr:
    children = list(children)
    if not children:
        raise DimensionError("empty sum")
    n = children[0].n
    flat: list[FnExpr] = []
    total = 0j
    for child in children:
        if child.n != n:
            raise DimensionError(f"cannot add dimension {child.n} to dimension {n}")
        parts = child.children if isinstance(child, Sum) else (child,)
        for part in parts:
            if isinstance(part, Const):
                total += part.c
            else:
                flat.append(part)
    if total != 0:
        flat.insert(0, Const(n, total))
    if not flat:
        return Const(n, 0)
    if len(flat) == 1:
        return flat[0]
    return Sum(n, tuple(flat))


def make_prod(children: Iterable[FnExpr]) -> FnExpr:
    children = list(children)
    if not children:
        raise DimensionError("empty product")
    n = children[0].n
    flat: list[FnExpr] = []
    coef = 1 + 0j
    for child in children:
        if child.n != n:
            raise DimensionError(f"cannot multiply dimension {child.n} by dimension {n}")
        parts = child.children if isinstance(child, Prod) else (child,)
        for part in parts:
            if isinstance(part, Scale):
                coef *= part.c
                part = part.child
            if isinstance(part, Const):
                coef *= part.c
            elif isinstance(part, Prod):
                flat.extend(part.children)
            else:
                flat.append(part)
    if coef == 0:
        return Const(n, 0)
    if not flat:
        return Const(n, coef)
    body = flat[0] if len(flat) == 1 else Prod(n, tuple(flat))
    return make_scale(coef, body)


def make_scale(c: complex, child: FnExpr) -> FnExpr:
    c = complex(c)
    if c == 0:
        return Const(child.n, 0)
    if c == 1:
        return child
    if isinstance(child, Const):
        return Const(child.n, c * child.c)
    if isinstance(child, Scale):
        return make_scale(c * child.c, child.child)
    return Scale(child.n, c, child)


def const(c: complex, n: int) -> Const:
    return Const(n, complex(c))


def resolvent(j: int, lam: complex, n: int, nu: float = 1.0) -> ResLin:
    """r_{lam,j}(z) = (z_j + lam)^(-nu) for a 0-based coordinate j."""
    w = [0.0] * n
    w[j] = 1.0
    return ResLin(n, tuple(w), lam, nu)


def rho(lams: Sequence[complex], nu: float = 1.0) -> FnExpr:
    """rho_lam(z) = prod_j (z_j + lam_j)^(-nu)."""
    n = len(lams)
    return make_prod([resolvent(j, lam, n, nu) for j, lam in enumerate(lams)])


def exp_tau(tau: float, n: int) -> Exp:
    """e_tau(z) = exp(-tau (z_1 + ... + z_n))."""
    return Exp(n, (float(tau),) * n)


def r_nu(nu: float, lam: complex, n: int) -> FnExpr:
    """prod_j (lam + z_j)^(-nu)."""
    return rho([lam] * n, nu)


def s_nu(nu: float, lam: complex, n: int) -> ResLin:
    """(lam + z_1 + ... + z_n)^(-nu)."""
    return ResLin(n, (1.0,) * n, lam, nu)
