"""
Operators router: f(A) for commuting tuples, gamma brackets and joint spectra.
"""
import logging

from fastapi import APIRouter, Depends
from fastapi.concurrency import run_in_threadpool

from ..models.expr import VarSet
from ..schemas.operators import CalcRequest, GsfRequest, SpectrumRequest
from ..schemas.reports import CalcResult, GsfReport, JointSpectrum
from ..security import get_api_key
from ..services.fnalg import parse_expr
from ..services.opcalc import calc, gsf_report, validate_tuple
from ..services.spectral import joint_spectrum
from .common import http_error, quad_or_default

logger = logging.getLogger(__name__)

router = APIRouter(
    prefix="/operators",
    tags=["operators"],
    responses={
        400: {"description": "Invalid tuple or function"},
        401: {"description": "Invalid API key"},
        500: {"description": "Internal server error"}
    }
)


@router.post("/calc", response_model=CalcResult)
async def calc_operator(payload: CalcRequest, api_key: str = Depends(get_api_key)):
    """
    f(A) for the commuting tuple A, with per-part quadrature errors.

    The function's dimension is the number of matrices.
    """
    try:
        tup = validate_tuple(payload.decoded(), payload.commutation_tol)
        f = parse_expr(payload.expr, tup.n)
        spec = quad_or_default(payload.quad)
        logger.info(f"Computing f(A) for a {tup.n}-tuple of {tup.dim}x{tup.dim} matrices")
        return await run_in_threadpool(calc, f, tup, spec)
    except Exception as e:
        raise http_error(e, "compute f(A)")


@router.post("/gsf", response_model=GsfReport)
async def gsf_operator(payload: GsfRequest, api_key: str = Depends(get_api_key)):
    """gamma brackets for every variable set, or only for `omega`."""
    try:
        tup = validate_tuple(payload.decoded(), payload.commutation_tol)
        spec = quad_or_default(payload.quad)
        omegas = None if payload.omega is None else [VarSet.from_labels(tup.n, payload.omega)]
        return await run_in_threadpool(gsf_report, tup, spec, payload.seed, omegas)
    except Exception as e:
        raise http_error(e, "compute gamma brackets")


@router.post("/spectrum", response_model=JointSpectrum)
async def spectrum_operator(payload: SpectrumRequest, api_key: str = Depends(get_api_key)):
    """Distinct joint eigenvalues with multiplicities."""
    try:
        tup = validate_tuple(payload.decoded(), payload.commutation_tol)
        return await run_in_threadpool(joint_spectrum, tup)
    except Exception as e:
        raise http_error(e, "compute joint spectrum")
