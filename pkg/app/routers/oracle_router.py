from fastapi import APIRouter

from ..models import Command
from ..schemas import RunRequest
from . import execute_or_raise

router = APIRouter(prefix="/oracle", tags=["oracle"])


@router.post("/run")
def run_oracle(request: RunRequest):
    """Finite-difference oracle over the requested grid refinements"""
    return execute_or_raise(Command.ORACLE, request)
