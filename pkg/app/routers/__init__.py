from fastapi import HTTPException, status

from ..errors import HardyToolkitError
from ..models import Command
from ..schemas import RunConfig, RunRequest
from ..services.run_service import run_service


def execute_or_raise(command: Command, request: RunRequest) -> dict:
    """Run one command for the HTTP surface; rejected verdicts are regular responses"""
    try:
        config = RunConfig(command=command, **request.model_dump())
        _, report, _ = run_service.execute(config)
    except ValueError as exc:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(exc))
    except HardyToolkitError as exc:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))
    return report
