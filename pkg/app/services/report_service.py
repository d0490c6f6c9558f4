import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Optional

import pandas as pd
from pydantic import BaseModel

from ..models import Command
from ..schemas import FailureReport, OracleReport, RunConfig, SharpnessReport

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# fields of RunConfig that steer output, not computation
_OUTPUT_FIELDS = {"command", "output", "csv", "save", "workers"}


def to_plain(obj: Any) -> Any:
    """JSON-ready copy: models dumped, enums by value, non-finite floats as strings"""
    if isinstance(obj, BaseModel):
        return to_plain(obj.model_dump(mode="python"))
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(to_plain(k)): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


class ReportService:
    """Versioned JSON reports and CSV sweep tables"""

    @staticmethod
    def build(config: RunConfig, result: Any) -> dict:
        settings_used = {
            k: v for k, v in config.model_dump(mode="python").items() if k not in _OUTPUT_FIELDS
        }
        return {
            "schema_version": SCHEMA_VERSION,
            "command": config.command.value,
            "config": to_plain(settings_used),
            "result": to_plain(result),
        }

    @staticmethod
    def dumps(report: dict) -> str:
        return json.dumps(report, indent=2, sort_keys=True, allow_nan=False)

    @staticmethod
    def sweep_table(command: Command, result: Any) -> Optional[pd.DataFrame]:
        """One row per grid point: parameter, value, error estimate and extras"""
        if command == Command.SHARPNESS and isinstance(result, SharpnessReport):
            return pd.DataFrame({
                "k": result.k_grid,
                "value": result.values,
                "error": result.errors,
                "denominator": result.denominators,
            })
        if command == Command.FAILURE and isinstance(result, FailureReport):
            return pd.DataFrame({
                "epsilon": result.eps_grid,
                "value": result.ratios,
                "error": result.errors,
                "numerator": result.numerators,
                "denominator": result.denominators,
            })
        if command == Command.ORACLE and isinstance(result, OracleReport):
            return pd.DataFrame({
                "cells_per_axis": [e.grid.cells_per_axis for e in result.estimates],
                "value": [
                    math.nan if e.lambda_min is None else e.lambda_min for e in result.estimates
                ],
                "error": [e.residual_norm for e in result.estimates],
                "iterations": [e.iterations for e in result.estimates],
                "inner_stalls": [e.inner_stalls for e in result.estimates],
                "flagged": [e.flagged for e in result.estimates],
            })
        return None

    @staticmethod
    def write_json(report: dict, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(ReportService.dumps(report) + "\n", encoding="utf-8")
        logger.info("report written to %s", path)
        return path

    @staticmethod
    def write_csv(table: pd.DataFrame, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format="%.17g", na_rep="nan")
        logger.info("table written to %s", path)
        return path


report_service = ReportService()
