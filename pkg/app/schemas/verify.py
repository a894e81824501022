from typing import Optional

from pydantic import BaseModel, Field

from .operators import TupleRequest
from .quad import QuadSpec


class VerifyRequest(BaseModel):
    """Inputs of a verification suite; everything is optional"""
    fns: list[str] = Field(default_factory=lambda: ["default"], description="DSL functions, 'default' for the family")
    n: int = Field(2, ge=1, le=4, description="Variables when no tuple is given")
    operators: Optional[TupleRequest] = Field(None, description="Operator tuple; a random one is drawn when omitted")
    quad: Optional[QuadSpec] = None
    seed: Optional[int] = None


class BoundsResponse(BaseModel):
    """Closed-form bound values for the given parameters"""
    n: int
    resolvent_product: Optional[float] = None
    resolvent_sum: Optional[float] = None
    exponential_window: Optional[float] = None
    bandlimited: Optional[float] = None
    jk: Optional[float] = None
