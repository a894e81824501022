import os


def get_engine_config() -> dict:
    """
    Get engine configuration from environment variables.

    Returns:
        dict: Engine configuration
    """
    return {
        "workers": max(1, int(os.getenv("BESOV_WORKERS", "1"))),
        "seed": int(os.getenv("BESOV_SEED", "20240601")),
        "log_level": os.getenv("BESOV_LOG_LEVEL", "INFO").upper(),
        "max_points": int(os.getenv("BESOV_MAX_POINTS", "16000000")),
    }


def default_quad_spec():
    """
    Build the default QuadSpec, honouring BESOV_REL_TOL / BESOV_ABS_TOL overrides.
    """
    from .schemas.quad import QuadSpec

    overrides = {}
    if os.getenv("BESOV_REL_TOL"):
        overrides["rel_tol"] = float(os.environ["BESOV_REL_TOL"])
    if os.getenv("BESOV_ABS_TOL"):
        overrides["abs_tol"] = float(os.environ["BESOV_ABS_TOL"])
    overrides["max_points"] = get_engine_config()["max_points"]
    return QuadSpec(**overrides)
