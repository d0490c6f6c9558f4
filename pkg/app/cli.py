"""Command-line surface: ``python -m app.cli <command> [flags]``.

Every command prints one JSON report on stdout. Exit codes: 0 success, 2 rejected or
invalid verdict, 1 runtime failure, 64 usage error, 65 numeric validation failure.
"""
import argparse
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Optional

from .config import settings
from .errors import HardyToolkitError
from .models import CanonicalVariant, Command, FamilyKind, OracleMass, WeightKind
from .schemas import RunConfig
from .services.report_service import report_service
from .services.run_service import run_service

logger = logging.getLogger(__name__)

EXIT_RUNTIME = 1
EXIT_USAGE = 64
EXIT_INVALID = 65

_NEGATIVE_VALUE = re.compile(r"^-(\d|\.\d|inf)")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(value: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}")


def _ints(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def _add(parser: argparse.ArgumentParser, *names: str) -> None:
    options = {
        "n": dict(type=int, help="dimension"),
        "k0": dict(type=int, choices=(1, 3), help="first chain index"),
        "alpha": dict(type=_floats, help="comma-separated alpha_k0..alpha_n"),
        "beta": dict(type=_floats, help="comma-separated beta_k0..beta_n"),
        "Q": dict(type=float, help="Sobolev exponent"),
        "weight": dict(
            dest="weight_kind", type=WeightKind, choices=list(WeightKind),
            help="Sobolev weight: |X_2| (X2) or |x_1| (x1)"
        ),
        "k": dict(type=int, help="codimension index of the canonical choice"),
        "variant": dict(type=CanonicalVariant, choices=list(CanonicalVariant)),
        "family": dict(type=FamilyKind, choices=[FamilyKind.STEP3, FamilyKind.STEPQ]),
        "q": dict(type=int, help="cutoff index of the stepq family"),
        "level": dict(type=float, help="cutoff level k of the family"),
        "target": dict(type=int, help="Hardy index in the denominator"),
        "k-grid": dict(dest="k_grid", type=_floats, help="increasing cutoff levels"),
        "k3": dict(type=float, help="cutoff level on |X_3| (inf removes it)"),
        "eps-grid": dict(dest="eps_grid", type=_floats, help="decreasing epsilons"),
        "epsilon": dict(type=float),
        "tol": dict(type=float, help="quadrature relative tolerance"),
        "cells": dict(type=_ints, help="increasing cells per axis, even"),
        "box": dict(type=float, help="box half width L"),
        "mass": dict(type=OracleMass, choices=list(OracleMass)),
        "seed": dict(type=int),
        "workers": dict(type=int, help="process count for sweeps"),
    }
    for name in names:
        parser.add_argument(f"--{name}", default=None, **options[name])


_COMMANDS = {
    Command.CHECK_BETA: ("admissibility certificate of a beta sequence", ("n", "k0", "beta")),
    Command.ALPHA2BETA: ("beta sequence of an alpha sequence", ("n", "k0", "alpha")),
    Command.GAMMA: ("ground-state exponents gamma", ("n", "k0", "alpha")),
    Command.EXPONENTS: ("Sobolev exponent table", ("n", "k0", "alpha", "Q", "weight")),
    Command.CANONICAL: ("canonical alpha choice and its beta", ("n", "k", "variant")),
    Command.SHARPNESS: (
        "sharpness sweep over cutoff levels",
        ("n", "family", "alpha", "q", "k-grid", "k3", "tol", "workers"),
    ),
    Command.FAILURE: (
        "failure sweep at alpha_n = 0",
        ("n", "alpha", "Q", "weight", "eps-grid", "k3", "tol", "workers"),
    ),
    Command.SOBOLEV: (
        "single Sobolev quotient of the failure family",
        ("n", "alpha", "Q", "weight", "epsilon", "k3", "tol", "seed"),
    ),
    Command.RAYLEIGH: (
        "single Rayleigh quotient of a sharpness family",
        ("n", "family", "alpha", "q", "level", "k3", "beta", "target", "tol", "seed"),
    ),
    Command.ORACLE: (
        "finite-difference oracle over grid refinements",
        ("n", "target", "beta", "cells", "box", "mass", "seed"),
    ),
    Command.SN: ("sharp Sobolev constant S_n", ("n",)),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardy-toolkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command, (help_text, names) in _COMMANDS.items():
        p = sub.add_parser(command.value, help=help_text)
        _add(p, *names)
        p.add_argument("--config", type=Path, help="JSON file with defaults; flags override")
        p.add_argument("--output", help="also write the JSON report here")
        p.add_argument("--csv", help="write the sweep table here")
        p.add_argument("--save", action="store_true", help="write into REPORT_DIR")
        p.add_argument("--verbose", action="store_true")
    return parser


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Rewrite `--flag -0.5,0` as `--flag=-0.5,0` so argparse does not read an option"""
    out: list[str] = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if (
            token.startswith("--") and "=" not in token and i + 1 < len(argv)
            and _NEGATIVE_VALUE.match(argv[i + 1])
        ):
            out.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        out.append(token)
        i += 1
    return out


def _load_config_file(path: Optional[Path]) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return payload


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    values = _load_config_file(args.config)
    for key, value in vars(args).items():
        if key in ("config", "verbose", "command") or value is None:
            continue
        if key == "save" and not value:
            continue
        values[key] = value
    values["command"] = args.command
    return RunConfig(**values)


def _write_outputs(config: RunConfig, report: dict, table) -> None:
    if config.output:
        report_service.write_json(report, Path(config.output))
    if config.csv and table is not None:
        report_service.write_csv(table, Path(config.csv))
    if config.save:
        base = Path(settings.REPORT_DIR) / config.command.value
        report_service.write_json(report, base.with_suffix(".json"))
        if table is not None:
            report_service.write_csv(table, base.with_suffix(".csv"))


def main(argv: Optional[list[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = build_parser().parse_args(_attach_negative_values(list(argv)))
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.LOG_LEVEL,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    try:
        config = _config_from_args(args)
        status, report, table = run_service.execute(config)
        print(report_service.dumps(report))
        _write_outputs(config, report, table)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except HardyToolkitError as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return status


if __name__ == "__main__":
    sys.exit(main())
