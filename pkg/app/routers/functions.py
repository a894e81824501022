"""
Functions router: parsing, evaluation, B^n norms, elementary decompositions and
the reproducing formula.
"""
import logging

import numpy as np
from fastapi import APIRouter, Depends
from fastapi.concurrency import run_in_threadpool

from ..schemas.functions import (
    DecomposeResponse,
    DecompositionPart,
    EvalRequest,
    EvalResponse,
    FunctionRequest,
    NormRequest,
    ParseResponse,
    ReproduceRequest,
)
from ..schemas.reports import ReproResult, SeminormReport, encode_complex
from ..security import get_api_key
from ..services.besov import bnorm
from ..services.decomp import degree, elementary_decompose, is_elementary
from ..services.fnalg import evaluate, parse_expr, support, to_text
from ..services.repro import reproduce_elementary, reproduce_shifted
from .common import http_error, quad_or_default

logger = logging.getLogger(__name__)

router = APIRouter(
    prefix="/functions",
    tags=["functions"],
    responses={
        400: {"description": "Invalid function or arguments"},
        401: {"description": "Invalid API key"},
        500: {"description": "Internal server error"}
    }
)


def _point(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs])


@router.post("/parse", response_model=ParseResponse)
async def parse_function(payload: FunctionRequest, api_key: str = Depends(get_api_key)):
    """
    Parse DSL text and report its normalized form, support and elementarity.
    """
    try:
        f = parse_expr(payload.expr, payload.n)
        return ParseResponse(
            expr=to_text(f),
            n=f.n,
            support=support(f).labels,
            degree=degree(f),
            elementary=is_elementary(f),
        )
    except Exception as e:
        raise http_error(e, "parse function")


@router.post("/eval", response_model=EvalResponse)
async def evaluate_function(payload: EvalRequest, api_key: str = Depends(get_api_key)):
    """Value of f at one point of the closed poly-half-plane."""
    try:
        f = parse_expr(payload.expr, payload.n)
        value = evaluate(f, _point(payload.z))
        return EvalResponse(expr=to_text(f), value=encode_complex(value))
    except Exception as e:
        raise http_error(e, "evaluate function")


@router.post("/norm", response_model=SeminormReport)
async def function_norm(payload: NormRequest, api_key: str = Depends(get_api_key)):
    """
    All 2^n seminorms of f and the B^n norm.

    Runs in the threadpool; higher dimensions can take minutes.
    """
    try:
        f = parse_expr(payload.expr, payload.n)
        spec = quad_or_default(payload.quad)
        logger.info(f"Computing B^{f.n} norm of {to_text(f)}")
        return await run_in_threadpool(bnorm, f, spec, payload.check_divergence)
    except Exception as e:
        raise http_error(e, "compute norm")


@router.post("/decompose", response_model=DecomposeResponse)
async def decompose_function(payload: FunctionRequest, api_key: str = Depends(get_api_key)):
    """Elementary parts f_{Omega,0}, each with its variable set."""
    try:
        f = parse_expr(payload.expr, payload.n)
        decomposition = await run_in_threadpool(elementary_decompose, f)
        return DecomposeResponse(
            expr=to_text(f),
            n=f.n,
            parts=[DecompositionPart(**row) for row in decomposition.to_json()],
        )
    except Exception as e:
        raise http_error(e, "decompose function")


@router.post("/reproduce", response_model=ReproResult)
async def reproduce_function(payload: ReproduceRequest, api_key: str = Depends(get_api_key)):
    """
    Reproducing formula at z: the elementary form when t is omitted, the shifted
    form f(z + t) otherwise.
    """
    try:
        f = parse_expr(payload.expr, payload.n)
        spec = quad_or_default(payload.quad)
        z = _point(payload.z)
        if payload.t is None:
            return await run_in_threadpool(reproduce_elementary, f, z, spec)
        t = payload.t[0] if len(payload.t) == 1 else payload.t
        return await run_in_threadpool(reproduce_shifted, f, z, t, spec)
    except Exception as e:
        raise http_error(e, "reproduce function")
