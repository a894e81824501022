import pytest
from httpx import AsyncClient

SCALAR = {"matrices": [[[1.5]]]}
PAIR = {"matrices": [[[1.0, 0.0], [0.0, 2.0]], [[0.5, 0.0], [0.0, 3.0]]]}
QUAD = {"rel_tol": 1e-5, "max_refine_depth": 6}


@pytest.mark.asyncio
async def test_root_endpoint(client: AsyncClient):
    """Test the root endpoint"""
    response = await client.get("/")
    assert response.status_code == 200
    data = response.json()
    assert data["message"] == "Besov Calculus API"
    assert "version" in data


@pytest.mark.asyncio
async def test_health_endpoint(client: AsyncClient):
    """Test the health endpoint"""
    response = await client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "healthy"}


@pytest.mark.asyncio
async def test_security_headers(client: AsyncClient):
    """Every response carries the security headers"""
    response = await client.get("/health")
    assert response.headers["X-Content-Type-Options"] == "nosniff"
    assert response.headers["Cache-Control"] == "no-store"


@pytest.mark.asyncio
async def test_parse_function(client: AsyncClient):
    """Parsing reports support, degree and elementarity"""
    response = await client.post("/functions/parse", json={"expr": "  1 + res([1, 0], 1, 1)  ", "n": 2})
    assert response.status_code == 200
    data = response.json()
    assert data["n"] == 2
    assert data["support"] == [1]
    assert data["degree"] == 1
    assert data["elementary"] is False


@pytest.mark.asyncio
async def test_parse_error_position(client: AsyncClient):
    """Syntax errors come back as 400 with the error position"""
    response = await client.post("/functions/parse", json={"expr": "res([1], 1, 1) *", "n": 1})
    assert response.status_code == 400
    detail = response.json()["detail"]
    assert detail["error"] == "parse_error"
    assert detail["position"] is not None


@pytest.mark.asyncio
async def test_dimension_error(client: AsyncClient):
    """Weight vectors of the wrong length are rejected"""
    response = await client.post("/functions/parse", json={"expr": "res([1, 0], 1, 1)", "n": 1})
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "DimensionError"


@pytest.mark.asyncio
async def test_empty_expression_rejected(client: AsyncClient):
    """Blank expressions fail request validation"""
    response = await client.post("/functions/parse", json={"expr": "   ", "n": 1})
    assert response.status_code == 422


@pytest.mark.asyncio
async def test_eval_function(client: AsyncClient):
    """Evaluate a resolvent at a complex point"""
    response = await client.post("/functions/eval", json={"expr": "res([1], 1, 1)", "n": 1, "z": [[1.0, 0.0]]})
    assert response.status_code == 200
    assert response.json()["value"] == pytest.approx([0.5, 0.0])


@pytest.mark.asyncio
async def test_eval_outside_domain(client: AsyncClient):
    """Points with negative real part are a 400"""
    response = await client.post("/functions/eval", json={"expr": "res([1], 1, 1)", "n": 1, "z": [[-2.0, 0.0]]})
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "DomainError"


@pytest.mark.asyncio
async def test_norm(client: AsyncClient):
    """B^1 norm of a resolvent"""
    response = await client.post("/functions/norm", json={"expr": "res([1], 1, 1)", "n": 1, "quad": QUAD})
    assert response.status_code == 200
    data = response.json()
    assert data["total"] == pytest.approx(2.0, rel=1e-4)
    assert [e["omega"] for e in data["entries"]] == [[], [1]]
    assert data["quad"]["rel_tol"] == 1e-5


@pytest.mark.asyncio
async def test_decompose(client: AsyncClient):
    """Elementary parts with their variable sets"""
    response = await client.post("/functions/decompose", json={"expr": "2 + res([1, 0], 1, 1)", "n": 2})
    assert response.status_code == 200
    parts = response.json()["parts"]
    assert [p["omega"] for p in parts] == [[], [1]]


@pytest.mark.asyncio
async def test_reproduce_shifted(client: AsyncClient):
    """Shifted reproducing formula for an elementary function"""
    response = await client.post(
        "/functions/reproduce",
        json={"expr": "res([1], 1, 1)", "n": 1, "z": [[0.5, 0.0]], "t": [1.0], "quad": QUAD},
    )
    assert response.status_code == 200
    data = response.json()
    assert data["passed"] is True
    assert data["lhs"] == pytest.approx([0.4, 0.0])


@pytest.mark.asyncio
async def test_reproduce_negative_shift(client: AsyncClient):
    """Negative shifts fail request validation"""
    response = await client.post(
        "/functions/reproduce",
        json={"expr": "res([1], 1, 1)", "n": 1, "z": [[0.5, 0.0]], "t": [-1.0]},
    )
    assert response.status_code == 422


@pytest.mark.asyncio
async def test_calc(client: AsyncClient):
    """f(A) for a 1x1 tuple"""
    response = await client.post("/operators/calc", json={**SCALAR, "expr": "res([1], 1, 1)", "quad": QUAD})
    assert response.status_code == 200
    data = response.json()
    assert data["value"][0][0] == pytest.approx([0.4, 0.0], abs=1e-5)
    assert data["parts"][0]["omega"] == [1]


@pytest.mark.asyncio
async def test_calc_non_commuting(client: AsyncClient):
    """Non-commuting tuples list their violations"""
    payload = {"matrices": [[[1.0, 0.0], [0.0, 2.0]], [[1.0, 1.0], [0.0, 1.0]]], "expr": "res([1, 0], 1, 1)"}
    response = await client.post("/operators/calc", json=payload)
    assert response.status_code == 400
    detail = response.json()["detail"]
    assert detail["error"] == "invalid_tuple"
    assert any("commute" in v for v in detail["violations"])


@pytest.mark.asyncio
async def test_calc_complex_entries(client: AsyncClient):
    """Matrix entries may be [re, im] pairs"""
    payload = {"matrices": [[[[1.5, 0.5]]]], "expr": "exp([1])"}
    response = await client.post("/operators/calc", json=payload)
    assert response.status_code == 200


@pytest.mark.asyncio
async def test_non_square_matrix(client: AsyncClient):
    """Malformed matrices fail request validation"""
    response = await client.post("/operators/spectrum", json={"matrices": [[[1.0, 2.0]]]})
    assert response.status_code == 422


@pytest.mark.asyncio
async def test_spectrum(client: AsyncClient):
    """Joint spectrum of a diagonal pair"""
    response = await client.post("/operators/spectrum", json=PAIR)
    assert response.status_code == 200
    data = response.json()
    assert data["multiplicities"] == [1, 1]
    assert data["points"][0][0] == pytest.approx([1.0, 0.0], abs=1e-9)
    assert data["points"][0][1] == pytest.approx([0.5, 0.0], abs=1e-9)
    assert "basis" not in data


@pytest.mark.asyncio
async def test_gsf_single_set(client: AsyncClient):
    """gamma bracket of a scalar generator"""
    response = await client.post("/operators/gsf", json={**SCALAR, "omega": [1], "quad": QUAD})
    assert response.status_code == 200
    (entry,) = response.json()["entries"]
    assert entry["gamma_lower"] <= entry["gamma_upper"]
    assert entry["calc_bound"] <= 2.0 + 1e-2


@pytest.mark.asyncio
async def test_verify_unknown_suite(client: AsyncClient):
    """Unknown suites are a 404"""
    response = await client.post("/verify/nonexistent")
    assert response.status_code == 404


@pytest.mark.asyncio
async def test_verify_hp(client: AsyncClient):
    """Oracle agreement on a scalar tuple"""
    payload = {"fns": ["res([1], 1, 1)", "exp([1])"], "operators": SCALAR, "quad": QUAD}
    response = await client.post("/verify/hp", json=payload)
    assert response.status_code == 200
    data = response.json()
    assert data["suite"] == "hp"
    assert data["passed"] is True
    assert data["n_failed"] == 0


@pytest.mark.asyncio
async def test_verify_bad_function(client: AsyncClient):
    """Parse errors inside a suite request are a 400"""
    response = await client.post("/verify/hp", json={"fns": ["res(["], "operators": SCALAR})
    assert response.status_code == 400


@pytest.mark.asyncio
async def test_bounds(client: AsyncClient):
    """Closed-form bounds for the given parameters only"""
    response = await client.get("/estimates/bounds", params={"n": 2, "nu": 1.0, "eps": 1.0, "sigma": 2.0})
    assert response.status_code == 200
    data = response.json()
    assert data["resolvent_product"] == pytest.approx(2.25)
    assert data["resolvent_sum"] == pytest.approx(4.0)
    assert data["exponential_window"] is None
    assert data["jk"] is None


@pytest.mark.asyncio
async def test_bounds_invalid_band(client: AsyncClient):
    """eps must lie below sigma"""
    response = await client.get("/estimates/bounds", params={"eps": 2.0, "sigma": 1.0})
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "DomainError"


@pytest.mark.asyncio
async def test_bounds_jk(client: AsyncClient):
    """J_k bound"""
    response = await client.get("/estimates/bounds", params={"k": 1, "a": 0.5})
    assert response.status_code == 200
    assert response.json()["jk"] == pytest.approx(4.39445, rel=1e-4)
