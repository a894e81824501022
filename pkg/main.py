import logging
import os

from app.config import get_engine_config
from app.main import app

if __name__ == "__main__":
    import uvicorn

    logging.basicConfig(level=get_engine_config()["log_level"])
    uvicorn.run(
        "app.main:app",
        host=os.getenv("HOST", "0.0.0.0"),
        port=int(os.getenv("PORT", "8000")),
        reload=os.getenv("RELOAD", "false").lower() == "true",
    )
