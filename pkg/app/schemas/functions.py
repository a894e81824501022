from typing import Optional

from pydantic import BaseModel, Field, field_validator

from .quad import QuadSpec


def _check_pairs(v: list[list[float]]) -> list[list[float]]:
    for pair in v:
        if len(pair) != 2:
            raise ValueError(f"complex numbers are [re, im] pairs, got {pair}")
    return v


class FunctionRequest(BaseModel):
    """A function in DSL form together with its number of variables"""
    expr: str = Field(
        ...,
        description="Function in DSL form, e.g. res([1, 0], 1, 1)*exp([0, 2])",
        min_length=1,
        max_length=4000,
    )
    n: int = Field(..., ge=1, le=6, description="Number of variables")

    @field_validator("expr")
    @classmethod
    def strip_expr(cls, v):
        v = v.strip()
        if not v:
            raise ValueError("expression text is empty")
        return v


class ParseResponse(BaseModel):
    expr: str = Field(..., description="Normalized DSL text")
    n: int
    support: list[int] = Field(..., description="1-based labels of the variables f depends on")
    degree: int = Field(..., ge=0)
    elementary: bool


class EvalRequest(FunctionRequest):
    z: list[list[float]] = Field(..., min_length=1, description="Point as [re, im] pairs, one per variable")

    @field_validator("z")
    @classmethod
    def validate_point(cls, v):
        return _check_pairs(v)


class EvalResponse(BaseModel):
    expr: str
    value: list[float] = Field(..., description="f(z) as [re, im]")


class NormRequest(FunctionRequest):
    quad: Optional[QuadSpec] = Field(None, description="Quadrature parameters (defaults when omitted)")
    check_divergence: bool = Field(True, description="Flag seminorms that look divergent")


class DecompositionPart(BaseModel):
    omega: list[int]
    expr: str


class DecomposeResponse(BaseModel):
    expr: str
    n: int
    parts: list[DecompositionPart]


class ReproduceRequest(FunctionRequest):
    z: list[list[float]] = Field(..., min_length=1, description="Point as [re, im] pairs")
    t: Optional[list[float]] = Field(None, description="Nonnegative shift; omitted for the elementary form")
    quad: Optional[QuadSpec] = None

    @field_validator("z")
    @classmethod
    def validate_point(cls, v):
        return _check_pairs(v)

    @field_validator("t")
    @classmethod
    def validate_shift(cls, v):
        if v is not None and any(x < 0 for x in v):
            raise ValueError("shifts must be nonnegative")
        return v
