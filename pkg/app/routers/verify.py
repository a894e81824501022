"""
Verification suites and the closed-form bound calculator.
"""
import logging
from typing import Optional

from fastapi import APIRouter, Depends, HTTPException, Query, status
from fastapi.concurrency import run_in_threadpool

from ..schemas.reports import SuiteReport
from ..schemas.verify import BoundsResponse, VerifyRequest
from ..security import get_api_key
from ..services.estimates import bound_bandlimited, bound_exp_window, bound_R, bound_S, jk_bound
from ..services.opcalc import validate_tuple
from ..services.suites import SUITES, parse_family, run_suite
from .common import http_error, quad_or_default

logger = logging.getLogger(__name__)

router = APIRouter(
    tags=["verify"],
    responses={
        401: {"description": "Invalid API key"},
        500: {"description": "Internal server error"}
    }
)


@router.post("/verify/{suite}", response_model=SuiteReport)
async def verify_suite(suite: str, payload: Optional[VerifyRequest] = None, api_key: str = Depends(get_api_key)):
    """
    Run a named suite. Failing rows are reported with passed=false, not as errors.
    """
    if suite not in SUITES:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail=f"Unknown suite '{suite}'. Available: {', '.join(SUITES)}"
        )
    payload = payload or VerifyRequest()
    try:
        tup = None
        if payload.operators is not None:
            tup = validate_tuple(payload.operators.decoded(), payload.operators.commutation_tol)
        n = tup.n if tup is not None else payload.n
        fns = parse_family(payload.fns, n)
        spec = quad_or_default(payload.quad)
        logger.info(f"Running suite {suite} over {len(fns)} functions")
        return await run_in_threadpool(run_suite, suite, fns, tup, spec, payload.seed, n)
    except Exception as e:
        raise http_error(e, f"run suite {suite}")


@router.get("/estimates/bounds", response_model=BoundsResponse)
async def estimate_bounds(
    n: int = Query(1, ge=1, le=6),
    nu: Optional[float] = Query(None, gt=0),
    lam: float = Query(1.0, gt=0, description="Re lambda"),
    omega: float = Query(1.0, gt=0),
    hnorm: float = Query(1.0, ge=0),
    tau: Optional[float] = Query(None, gt=0),
    eps: Optional[float] = Query(None, gt=0),
    sigma: Optional[float] = Query(None, gt=0),
    supnorm: float = Query(1.0, ge=0),
    k: Optional[int] = Query(None, ge=1, le=3),
    a: Optional[float] = Query(None, gt=0, lt=1),
    api_key: str = Depends(get_api_key),
):
    """
    Closed-form bounds for whichever families the given parameters determine:
    nu for the resolvent families, tau for the exponential window, eps and sigma
    for the bandlimited bound, k and a for J_k.
    """
    try:
        response = BoundsResponse(n=n)
        if nu is not None:
            response.resolvent_product = bound_R(nu, lam, omega, n, hnorm)
            response.resolvent_sum = bound_S(nu, lam, omega, n, hnorm)
        if tau is not None:
            response.exponential_window = bound_exp_window(tau, omega, n, hnorm)
        if eps is not None and sigma is not None:
            response.bandlimited = bound_bandlimited(eps, sigma, n, supnorm)
        if k is not None and a is not None:
            response.jk = jk_bound(k, a)
        return response
    except Exception as e:
        raise http_error(e, "compute bounds")
