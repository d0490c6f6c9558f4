import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .config import settings
from .routers import families_router, oracle_router, params_router

logging.basicConfig(level=settings.LOG_LEVEL)

app = FastAPI(
    title="Hardy Toolkit API",
    description="Admissibility checks, sharpness sweeps and finite-difference oracles "
                "for chained Hardy and Hardy-Sobolev-Maz'ya inequalities",
    version="1.0.0"
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(params_router.router)
app.include_router(families_router.router)
app.include_router(oracle_router.router)


@app.get("/")
async def root():
    return {
        "message": "Hardy Toolkit API",
        "version": "1.0.0",
        "status": "active"
    }


@app.get("/health")
async def health_check():
    return {"status": "healthy"}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "app.main:app",
        host="0.0.0.0",
        port=8000,
        reload=True
    )
