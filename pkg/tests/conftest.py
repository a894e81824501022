import os

import numpy as np
import pytest
import pytest_asyncio
from httpx import ASGITransport, AsyncClient

from app.schemas.quad import QuadSpec


@pytest.fixture(scope="session", autouse=True)
def _set_test_env():
    # Disable API key enforcement and HTTPS redirects in tests
    os.environ["REQUIRE_API_KEY"] = "false"
    os.environ["ENFORCE_HTTPS"] = "false"
    os.environ["API_KEY"] = "test-api-key-123"
    os.environ["PYTEST_RUNNING"] = "1"
    os.environ.setdefault("BESOV_SEED", "20240601")

    from app.main import app
    from app.security import get_api_key as _get_api_key
    app.dependency_overrides[_get_api_key] = lambda: ""

    yield


@pytest_asyncio.fixture
async def client():
    """Test client bound to the app through ASGITransport"""
    from app.main import app

    async with AsyncClient(
        transport=ASGITransport(app=app),
        base_url="http://test",
        headers={"X-API-Key": "test-api-key-123"}
    ) as ac:
        yield ac


@pytest.fixture
def spec() -> QuadSpec:
    return QuadSpec()


@pytest.fixture
def coarse_spec() -> QuadSpec:
    """Looser tolerances for the heavier operator tests."""
    return QuadSpec(rel_tol=1e-5, max_refine_depth=6)


@pytest.fixture
def diagonal_pair():
    from app.services.opcalc import validate_tuple

    return validate_tuple([np.diag([1.0, 2.0 + 0.5j]), np.diag([0.5, 3.0])])


@pytest.fixture
def random_pair():
    from app.services.opcalc import random_commuting_tuple

    return random_commuting_tuple(2, 3, seed=7)


@pytest.fixture
def scalar_tuple():
    from app.services.opcalc import validate_tuple

    return validate_tuple([np.array([[1.5]])])
