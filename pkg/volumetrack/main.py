from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from volumetrack import __version__
from volumetrack.config import get_settings
from volumetrack.routes import runs
from volumetrack.utils.logging import configure_logging

settings = get_settings()


@asynccontextmanager
async def lifespan(app: FastAPI):
    configure_logging(settings)
    yield


app = FastAPI(
    title="volumetrack API",
    description="People tracking and hand localization on voxelized point clouds",
    version=__version__,
    lifespan=lifespan,
)

# Allow all origins in dev mode, specific origins in production
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"] if settings.DEV_MODE else settings.CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(runs.router, prefix="/api")


@app.get("/api/health")
async def health():
    return {"status": "ok", "service": "volumetrack", "version": __version__}
