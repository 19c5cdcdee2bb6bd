import logging
import sys
from contextlib import asynccontextmanager
from datetime import datetime, timezone

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from routers import kernels, predictions, experiments
from utils.settings import get_settings

logger = logging.getLogger("kriglab.api")


@asynccontextmanager
async def lifespan(app: FastAPI):
    settings = get_settings()
    logging.basicConfig(level=settings.log_level.upper(), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    app.state.settings = settings

    logger.info("🔧 Threads: %d, truncation tol: %g, extended dps: %d",
                settings.max_workers, settings.truncation_tol, settings.extended_dps)
    logger.info("🚀 Kriging API Ready")
    yield
    logger.info("👋 Kriging API shutting down")


app = FastAPI(title="Kriging Consistency Laboratory API", lifespan=lifespan)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include Routers
app.include_router(kernels.router, prefix="/kernels", tags=["Kernels"])
app.include_router(predictions.router, prefix="/predictions", tags=["Predictions"])
app.include_router(experiments.router, prefix="/experiments", tags=["Experiments"])


@app.get("/health")
async def health():
    return {"status": "healthy", "timestamp": datetime.now(timezone.utc).isoformat()}


if __name__ == "__main__":
    import uvicorn

    settings = get_settings()
    uvicorn.run("main:app", host=settings.host, port=settings.port)
