from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class QuadSpec(BaseModel):
    """Truncation and refinement parameters for half-plane quadrature"""

    model_config = ConfigDict(frozen=True)

    alpha_max: float = Field(200.0, gt=0, description="Truncation of each real-part axis (truncate mapping, divergence checks)")
    beta_max: float = Field(2000.0, gt=0, description="Truncation of each imaginary-part axis (truncate mapping)")
    base_panels: int = Field(4, ge=4, description="Initial panels per axis")
    max_refine_depth: int = Field(8, ge=0, le=12, description="Maximum refinement rounds")
    rel_tol: float = Field(1e-6, gt=0, description="Relative tolerance")
    abs_tol: float = Field(1e-10, gt=0, description="Absolute tolerance")
    mapping: Literal["compact", "truncate"] = Field("compact", description="Axis mapping")
    scale: float = Field(1.0, gt=0, description="Length scale c of the compactifying maps")
    osc_window: float = Field(40.0, gt=0, description="Minimum half-width of oscillatory imaginary windows")
    tail_decay: float = Field(4.0, gt=2, description="Declared decay exponent p of truncated integrands")
    max_points: int = Field(16_000_000, ge=1000, description="Node budget of one tensor pass")

    def to_text(self) -> str:
        """Flat key=value serialization, one field per line in declaration order."""
        return "\n".join(f"{key}={value}" for key, value in self.model_dump().items())

    @classmethod
    def from_text(cls, text: str) -> "QuadSpec":
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"expected key=value, got '{line}'")
            values[key.strip()] = value.strip()
        return cls(**values)

    def tightened(self, factor: float = 10.0, extra_depth: int = 1) -> "QuadSpec":
        return self.model_copy(
            update={
                "rel_tol": self.rel_tol / factor,
                "abs_tol": self.abs_tol / factor,
                "max_refine_depth": min(12, self.max_refine_depth + extra_depth),
            }
        )


class QuadResult(BaseModel):
    """Value with error estimates; value is a complex scalar or a complex matrix"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    value: Any = Field(..., description="Integral value")
    err_est: float = Field(..., ge=0, description="Embedded-rule error estimate")
    n_evals: int = Field(..., gt=0, description="Integrand evaluations")
    truncation_est: float = Field(0.0, ge=0, description="Tail / truncation error estimate")
    converged: bool = Field(True, description="Whether the tolerances were met")
    rounds: int = Field(0, ge=0, description="Refinement rounds used")

    @field_validator("value")
    @classmethod
    def coerce_value(cls, v):
        if isinstance(v, np.ndarray) and v.ndim > 0:
            return v.astype(complex)
        return complex(v)

    @property
    def budget(self) -> float:
        return self.err_est + self.truncation_est
