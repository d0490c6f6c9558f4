from fastapi import APIRouter, HTTPException, Path, status

from ..models import Command
from ..schemas import RunRequest
from . import execute_or_raise

router = APIRouter(prefix="/params", tags=["params"])


@router.post("/check-beta")
async def check_beta(request: RunRequest):
    """Admissibility certificate of a beta sequence"""
    return execute_or_raise(Command.CHECK_BETA, request)


@router.post("/alpha2beta")
async def alpha_to_beta(request: RunRequest):
    return execute_or_raise(Command.ALPHA2BETA, request)


@router.post("/gamma")
async def gamma(request: RunRequest):
    return execute_or_raise(Command.GAMMA, request)


@router.post("/exponents")
async def exponents(request: RunRequest):
    """Sobolev exponent table; an invalid choice is reported with its reason"""
    return execute_or_raise(Command.EXPONENTS, request)


@router.post("/canonical")
async def canonical(request: RunRequest):
    return execute_or_raise(Command.CANONICAL, request)


@router.get("/sn/{n}")
async def sobolev_constant(n: int = Path(ge=1)):
    """Sharp Sobolev constant S_n"""
    if n < 3:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=f"n must be at least 3, got {n}"
        )
    return execute_or_raise(Command.SN, RunRequest(n=n))
