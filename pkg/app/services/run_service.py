import logging
from typing import Any, Callable, Optional

import pandas as pd

from ..models import Command, FamilyKind, Verdict
from ..schemas import AlphaSeq, BetaSeq, ProblemFrame, RunConfig
from .family_service import family_service
from .oracle_service import oracle_service
from .param_service import param_service
from .quotient_service import quotient_service
from .report_service import report_service

logger = logging.getLogger(__name__)

OK = 0
REJECTED = 2


def _frame(config: RunConfig) -> ProblemFrame:
    return ProblemFrame(n=config.n, k0=config.k0)


def _alpha(config: RunConfig) -> Optional[AlphaSeq]:
    return AlphaSeq(values=config.alpha) if config.alpha is not None else None


def _check_beta(config: RunConfig) -> tuple[int, Any]:
    cert = param_service.alpha_from_beta(_frame(config), BetaSeq(values=config.beta))
    return (OK if cert.verdict == Verdict.ACCEPTED else REJECTED), cert


def _alpha2beta(config: RunConfig) -> tuple[int, Any]:
    alpha = _alpha(config)
    beta = param_service.beta_from_alpha(_frame(config), alpha)
    return OK, {"alpha": alpha.values, "beta": beta.values}


def _gamma(config: RunConfig) -> tuple[int, Any]:
    alpha = _alpha(config)
    gamma = param_service.gamma_from_alpha(_frame(config), alpha)
    return OK, {"alpha": alpha.values, "gamma": gamma.values}


def _exponents(config: RunConfig) -> tuple[int, Any]:
    spec = param_service.sobolev_spec(_frame(config), _alpha(config), config.Q, config.weight_kind)
    return (OK if spec.valid else REJECTED), spec


def _canonical(config: RunConfig) -> tuple[int, Any]:
    frame = _frame(config)
    alpha = param_service.canonical_alpha(frame, config.k, config.variant)
    beta = param_service.beta_from_alpha(frame, alpha)
    return OK, {"variant": config.variant, "k": config.k, "alpha": alpha.values, "beta": beta.values}


def _sharpness(config: RunConfig) -> tuple[int, Any]:
    report = quotient_service.sharpness_sweep(
        config.family,
        _frame(config),
        config.k_grid,
        alpha=_alpha(config),
        q=config.q,
        k3=config.k3,
        tol=config.tol,
        workers=config.workers
    )
    return OK, report


def _failure(config: RunConfig) -> tuple[int, Any]:
    report = quotient_service.failure_sweep(
        _frame(config),
        _alpha(config),
        config.Q,
        config.eps_grid,
        weight_kind=config.weight_kind,
        k3=config.k3,
        tol=config.tol,
        workers=config.workers
    )
    return OK, report


def _sobolev(config: RunConfig) -> tuple[int, Any]:
    frame = _frame(config)
    alpha = _alpha(config)
    spec = param_service.sobolev_spec(frame, alpha, config.Q, config.weight_kind)
    desc = family_service.failure(frame, alpha, config.epsilon, config.k3)
    beta = param_service.beta_from_alpha(frame, alpha)
    quotient = quotient_service.sobolev_quotient(desc, beta, spec, config.tol, seed=config.seed)
    return OK, {"spec": spec, "quotient": quotient}


def _rayleigh(config: RunConfig) -> tuple[int, Any]:
    frame = _frame(config)
    alpha = _alpha(config)
    if config.family == FamilyKind.STEP3:
        q = 3
        desc = family_service.step3(frame, config.level)
    else:
        if config.q is None or alpha is None:
            raise ValueError("stepq quotients need q and alpha")
        q = config.q
        desc = family_service.stepq(frame, alpha, q, config.level, config.k3)
    if config.beta is not None:
        beta = BetaSeq(values=config.beta)
    else:
        beta = quotient_service.reference_beta(frame, alpha, q)
    target = q if config.target is None else config.target
    return OK, quotient_service.rayleigh_quotient(desc, beta, target, config.tol, seed=config.seed)


def _oracle(config: RunConfig) -> tuple[int, Any]:
    report = oracle_service.refinement_run(
        config.n,
        config.cells,
        target=config.target,
        beta=BetaSeq(values=config.beta) if config.beta is not None else None,
        box_half_width=config.box,
        mass=config.mass,
        seed=config.seed
    )
    return OK, report


def _sn(config: RunConfig) -> tuple[int, Any]:
    return OK, {"n": config.n, "S_n": param_service.sobolev_constant(config.n)}


_HANDLERS: dict[Command, Callable[[RunConfig], tuple[int, Any]]] = {
    Command.CHECK_BETA: _check_beta,
    Command.ALPHA2BETA: _alpha2beta,
    Command.GAMMA: _gamma,
    Command.EXPONENTS: _exponents,
    Command.CANONICAL: _canonical,
    Command.SHARPNESS: _sharpness,
    Command.FAILURE: _failure,
    Command.SOBOLEV: _sobolev,
    Command.RAYLEIGH: _rayleigh,
    Command.ORACLE: _oracle,
    Command.SN: _sn,
}


class RunService:
    """Dispatch of one validated RunConfig, shared by the CLI and the routers"""

    @staticmethod
    def execute(config: RunConfig) -> tuple[int, dict, Optional[pd.DataFrame]]:
        """Return (exit status, JSON report, sweep table or None)"""
        logger.debug("dispatching %s", config.command.value)
        status, result = _HANDLERS[config.command](config)
        report = report_service.build(config, result)
        table = report_service.sweep_table(config.command, result)
        return status, report, table


run_service = RunService()
