from typing import Optional

from pydantic import BaseModel, Field, field_validator

from .quad import QuadSpec
from .reports import decode_matrix


class TupleRequest(BaseModel):
    """A commuting tuple as matrices of [re, im] pairs (plain reals accepted)"""
    matrices: list[list[list]] = Field(..., min_length=1, max_length=6, description="A_1, ..., A_n")
    commutation_tol: float = Field(1e-10, gt=0, description="Relative commutator tolerance")

    @field_validator("matrices")
    @classmethod
    def validate_matrices(cls, v):
        for k, rows in enumerate(v):
            m = decode_matrix(rows)
            if m.shape[0] > 64:
                raise ValueError(f"A_{k + 1} is larger than 64 x 64")
        return v

    def decoded(self) -> list:
        return [decode_matrix(rows) for rows in self.matrices]


class CalcRequest(TupleRequest):
    expr: str = Field(..., min_length=1, max_length=4000, description="Function in DSL form")
    quad: Optional[QuadSpec] = None


class GsfRequest(TupleRequest):
    omega: Optional[list[int]] = Field(None, description="Only this variable set (1-based); all sets when omitted")
    quad: Optional[QuadSpec] = None
    seed: Optional[int] = None


class SpectrumRequest(TupleRequest):
    pass
