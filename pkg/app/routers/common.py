"""
Shared pieces of the HTTP routers: engine error mapping and quadrature defaults.
"""
import logging
from typing import Optional

from fastapi import HTTPException, status

from ..config import default_quad_spec
from ..errors import EngineError, ParseError, TupleValidationError
from ..schemas.quad import QuadSpec

logger = logging.getLogger(__name__)


def http_error(e: Exception, action: str) -> HTTPException:
    """
    ValueError-based engine errors become 400, everything else 500.
    """
    if isinstance(e, ParseError):
        logger.warning(f"{action}: parse error at position {e.position}: {e}")
        return HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail={"error": "parse_error", "message": str(e), "position": e.position},
        )
    if isinstance(e, TupleValidationError):
        logger.warning(f"{action}: invalid tuple: {e}")
        return HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail={"error": "invalid_tuple", "violations": e.violations},
        )
    if isinstance(e, EngineError) and isinstance(e, ValueError):
        logger.warning(f"{action}: {type(e).__name__}: {e}")
        return HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail={"error": type(e).__name__, "message": str(e)},
        )
    logger.error(f"{action} failed: {str(e)}")
    return HTTPException(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        detail=f"Failed to {action}: {str(e)}",
    )


def quad_or_default(spec: Optional[QuadSpec]) -> QuadSpec:
    return spec if spec is not None else default_quad_spec()
