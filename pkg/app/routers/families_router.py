from fastapi import APIRouter

from ..models import Command
from ..schemas import RunRequest
from . import execute_or_raise

router = APIRouter(prefix="/families", tags=["families"])


@router.post("/sharpness")
def sharpness(request: RunRequest):
    """Sweep Q_q over the cutoff levels and fit the limit"""
    return execute_or_raise(Command.SHARPNESS, request)


@router.post("/failure")
def failure(request: RunRequest):
    """Sobolev quotient sweep of the failure family toward epsilon = 0"""
    return execute_or_raise(Command.FAILURE, request)


@router.post("/sobolev")
def sobolev(request: RunRequest):
    return execute_or_raise(Command.SOBOLEV, request)


@router.post("/rayleigh")
def rayleigh(request: RunRequest):
    return execute_or_raise(Command.RAYLEIGH, request)
