import logging
from contextlib import asynccontextmanager

from fastapi import Depends, FastAPI

from . import __version__
from .config import default_quad_spec, get_engine_config
from .routers.functions import router as functions_router
from .routers.operators import router as operators_router
from .routers.verify import router as verify_router
from .security import (
    HTTPSEnforcementMiddleware,
    SecurityHeadersMiddleware,
    get_api_key,
    get_security_config,
)

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Manage application lifecycle"""
    config = get_engine_config()
    logger.info(f"Engine starting: workers={config['workers']}, seed={config['seed']}, "
                f"rel_tol={default_quad_spec().rel_tol:g}")
    yield
    logger.info("Engine stopped")


security_config = get_security_config()

app = FastAPI(
    title="Besov Calculus",
    description="B^n norms, elementary decompositions, reproducing formulas and the functional calculus "
                "f(A) for commuting matrix tuples, with verification suites for every identity.",
    version=__version__,
    lifespan=lifespan
)

if security_config["enforce_https"]:
    app.add_middleware(HTTPSEnforcementMiddleware, enforce_https=True)

app.add_middleware(SecurityHeadersMiddleware)

app.include_router(functions_router)
app.include_router(operators_router)
app.include_router(verify_router)


@app.get("/")
async def root(api_key: str = Depends(get_api_key)):
    """Root endpoint"""
    return {"message": "Besov Calculus API", "version": __version__}


@app.get("/health")
async def health_check(api_key: str = Depends(get_api_key)):
    """Health check endpoint"""
    return {"status": "healthy"}
