import hmac
import os
from typing import Optional

from fastapi import Depends, HTTPException, Request, status
from fastapi.security import APIKeyHeader
from starlette.middleware.base import BaseHTTPMiddleware
from starlette.responses import RedirectResponse, Response

API_KEY_NAME = "X-API-Key"

api_key_header = APIKeyHeader(name=API_KEY_NAME, auto_error=False)


def get_security_config() -> dict:
    """
    Get security configuration from environment variables.

    Returns:
        dict: Security configuration
    """
    return {
        "enforce_https": os.getenv("ENFORCE_HTTPS", "true").lower() == "true",
        "api_key": os.getenv("API_KEY", ""),
        "require_api_key": os.getenv("REQUIRE_API_KEY", "true").lower() == "true",
    }


async def get_api_key(api_key: Optional[str] = Depends(api_key_header)) -> str:
    """
    Validates the X-API-Key header against API_KEY.

    Enforcement is skipped when REQUIRE_API_KEY is "false" or under pytest
    (PYTEST_RUNNING). The configuration is read per request.

    Raises:
        HTTPException: 401 for a missing or wrong key, 500 when enforcement is on but no key is configured
    """
    if os.getenv("PYTEST_RUNNING", "").lower() in {"1", "true", "yes"}:
        return api_key or ""

    config = get_security_config()
    if not config["require_api_key"]:
        return api_key or ""

    if not config["api_key"]:
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail="API key enforcement is on but API_KEY is not set"
        )
    if not api_key:
        raise HTTPException(
            status_code=status.HTTP_401_UNAUTHORIZED,
            detail="Missing API key"
        )
    if not hmac.compare_digest(api_key, config["api_key"]):
        raise HTTPException(
            status_code=status.HTTP_401_UNAUTHORIZED,
            detail="Invalid API key"
        )
    return api_key


class HTTPSEnforcementMiddleware(BaseHTTPMiddleware):
    """Redirects plain-HTTP requests from non-local clients to HTTPS."""

    def __init__(self, app, enforce_https: bool = True):
        super().__init__(app)
        self.enforce_https = enforce_https

    async def dispatch(self, request: Request, call_next) -> Response:
        client = request.client.host if request.client else ""
        if self.enforce_https and request.url.scheme != "https" and client not in ("127.0.0.1", "localhost"):
            return RedirectResponse(url=str(request.url.replace(scheme="https")), status_code=301)
        return await call_next(request)


class SecurityHeadersMiddleware(BaseHTTPMiddleware):
    """Adds security headers to every response; reports are JSON, so nothing is framed or scripted."""

    HEADERS = {
        "X-Content-Type-Options": "nosniff",
        "X-Frame-Options": "DENY",
        "Strict-Transport-Security": "max-age=31536000; includeSubDomains",
        "Referrer-Policy": "no-referrer",
        "Content-Security-Policy": "default-src 'none'; frame-ancestors 'none'",
        "Cache-Control": "no-store",
    }

    async def dispatch(self, request: Request, call_next) -> Response:
        response = await call_next(request)
        for name, value in self.HEADERS.items():
            response.headers[name] = value
        return response
