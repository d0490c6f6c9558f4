"""Adaptive quadrature over chained radii.

An integrand on R^n that depends only on the radii |X_{m_1}| <= ... <= |X_{m_D}| = |x|
is integrated in nested polar coordinates: the outer variable is R = |x|, and each
inner radius is rho_i = rho_{i+1} * sin(theta_i). Every level runs
``scipy.integrate.quad_vec`` on a logarithmic variable, so power-law singularities at
the radial origins become exponentials. Integrands are vector valued: all labeled terms
of a quotient are integrated in one pass.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln
from scipy.stats import qmc

from ..config import settings
from ..errors import DivergenceError, QuadratureBudgetError
from ..schemas import MeasureDescription, QuadratureBundle, QuadratureResult, ReducedChain

logger = logging.getLogger(__name__)

DETERMINISTIC_MAX_DIMENSION = 3
HALF_PI = 0.5 * math.pi


def sphere_area(d: int) -> float:
    """Area of the unit sphere S^{d-1} in R^d (2 for d = 1)"""
    return 2.0 * math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d))


@dataclass(frozen=True)
class ProjectedWeight:
    """Factor |P_k x|**power with P_k the projection on the first k coordinates"""
    k: int
    power: float

    def angular_mean(self, d: int) -> float:
        """Mean of |P_k ω|**power over the unit sphere of the first block"""
        if self.k == d:
            return 1.0
        if self.k + self.power <= 0:
            raise DivergenceError(
                f"weight |P_{self.k} x|^{self.power:g} is not locally integrable"
            )
        return math.exp(
            gammaln(0.5 * d) + gammaln(0.5 * (self.k + self.power))
            - gammaln(0.5 * self.k) - gammaln(0.5 * (d + self.power))
        )


@dataclass(frozen=True)
class ChainIntegrand:
    """Vector-valued integrand of the chained radii with its declared singularity structure.

    ``func`` maps radii of shape (..., D) to values of shape (..., T). ``powers[t, i]`` is
    the exponent of term t as radius i tends to 0 (``inf`` when the term vanishes there).
    ``floors[i]`` is a radius below which every term vanishes; ``breakpoints[i]`` lists
    radius values where the integrand is not smooth.
    """
    func: Callable[[np.ndarray], np.ndarray]
    labels: tuple[str, ...]
    powers: np.ndarray
    floors: tuple[float, ...] = ()
    breakpoints: tuple[tuple[float, ...], ...] = ()
    support: float = math.inf
    power_at_infinity: Optional[np.ndarray] = None
    weight: Optional[ProjectedWeight] = None

    @classmethod
    def scalar(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        powers: Sequence[float],
        label: str = "value",
        **kwargs
    ) -> "ChainIntegrand":
        def vector(radii: np.ndarray) -> np.ndarray:
            return np.asarray(func(radii), dtype=float)[..., None]

        pinf = kwargs.pop("power_at_infinity", None)
        if pinf is not None:
            pinf = np.array([pinf], dtype=float)
        return cls(
            func=vector,
            labels=(label,),
            powers=np.array([powers], dtype=float),
            power_at_infinity=pinf,
            **kwargs
        )


@dataclass
class _Levels:
    """Precomputed per-level structure of one chain integral"""
    dims: tuple[int, ...]
    floors: np.ndarray
    points: list[np.ndarray]
    exponents: np.ndarray
    weight_power: float
    evaluations: int = 0
    budget_hit: bool = False
    worst_status: int = 0


class QuadratureService:
    """Chained-radius measure reduction and adaptive integration"""

    @staticmethod
    def reduce_measure(chain: ReducedChain) -> MeasureDescription:
        dims = chain.group_dims
        return MeasureDescription(
            constant=math.prod(sphere_area(d) for d in dims),
            group_dims=dims,
            radii=chain.radii,
            weight_powers=tuple(d - 1 for d in dims)
        )

    @staticmethod
    def integrate_chain(
        chain: ReducedChain,
        integrand: ChainIntegrand,
        tol: Optional[float] = None,
        seed: int = 0
    ) -> QuadratureResult:
        if len(integrand.labels) != 1:
            raise ValueError("integrate_chain expects a scalar integrand; use integrate_terms")
        bundle = QuadratureService.integrate_terms(chain, integrand, tol, seed)
        return bundle.result(integrand.labels[0])

    @staticmethod
    def integrate_terms(
        chain: ReducedChain,
        integrand: ChainIntegrand,
        tol: Optional[float] = None,
        seed: int = 0
    ) -> QuadratureBundle:
        tol = settings.QUAD_TOL if tol is None else tol
        if not tol > 0:
            raise ValueError(f"tolerance must be positive, got {tol}")
        levels = _prepare(chain, integrand)
        measure = QuadratureService.reduce_measure(chain)
        constant = measure.constant
        if integrand.weight is not None:
            constant *= integrand.weight.angular_mean(levels.dims[0])

        if len(levels.dims) <= DETERMINISTIC_MAX_DIMENSION:
            values, errors = _outer_level(integrand, levels, tol)
            stochastic = False
        else:
            values, errors = _quasi_monte_carlo(integrand, levels, seed)
            stochastic = True

        values = values * constant
        errors = np.abs(errors) * constant
        if levels.budget_hit:
            raise QuadratureBudgetError(
                f"tolerance {tol:g} not reached within {settings.QUAD_MAX_SUBINTERVALS} subintervals",
                value=values,
                abs_error_estimate=float(np.max(errors))
            )
        if not np.all(np.isfinite(values)):
            raise DivergenceError("integrand produced non-finite values")
        logger.debug(
            "chain %s: %d evaluations, max error %.3e, quad_vec status %d",
            chain.radii, levels.evaluations, float(np.max(errors)), levels.worst_status
        )
        return QuadratureBundle(
            labels=integrand.labels,
            values=tuple(float(v) for v in values),
            errors=tuple(float(e) for e in errors),
            evaluations=levels.evaluations,
            stochastic=stochastic
        )


def _prepare(chain: ReducedChain, integrand: ChainIntegrand) -> _Levels:
    dims = chain.group_dims
    depth = len(dims)
    powers = np.atleast_2d(np.asarray(integrand.powers, dtype=float))
    if powers.shape != (len(integrand.labels), depth):
        raise ValueError(
            f"powers must have shape ({len(integrand.labels)}, {depth}), got {powers.shape}"
        )
    floors = np.zeros(depth)
    if integrand.floors:
        floors[:] = integrand.floors
    floors = np.maximum.accumulate(floors)

    breakpoints = list(integrand.breakpoints) + [()] * (depth - len(integrand.breakpoints))
    raw = [set(b) | ({f} if f > 0 else set()) for b, f in zip(breakpoints, integrand.floors or [0.0] * depth)]
    points = []
    collected: set[float] = set()
    for i in range(depth):
        collected |= {c for c in raw[i] if c > 0}
        points.append(np.array(sorted(collected)))

    weight_power = 0.0
    if integrand.weight is not None:
        if integrand.weight.k > dims[0]:
            raise ValueError("projected weight must act inside the first coordinate block")
        weight_power = integrand.weight.power
        powers = powers.copy()
        powers[:, 0] += weight_power

    chain_index = np.cumsum(dims)
    with np.errstate(invalid="ignore"):
        exponents = np.cumsum(powers, axis=1) + (chain_index - 1)[None, :]
    for i in range(depth):
        if floors[i] > 0:
            continue
        bad = np.isfinite(exponents[:, i]) & (exponents[:, i] <= -1)
        if np.any(bad):
            label = integrand.labels[int(np.argmax(bad))]
            raise DivergenceError(
                f"term '{label}' is not integrable at radius {chain.radii[i]} = 0 "
                f"(exponent {exponents[int(np.argmax(bad)), i]:g} <= -1 after the measure weight)"
            )
    if math.isinf(integrand.support):
        pinf = integrand.power_at_infinity
        if pinf is not None:
            bad = np.asarray(pinf) + chain.n >= 0
            if np.any(bad):
                label = integrand.labels[int(np.argmax(bad))]
                raise DivergenceError(f"term '{label}' is not integrable at infinity")
    return _Levels(
        dims=dims,
        floors=floors,
        points=points,
        exponents=exponents,
        weight_power=weight_power
    )


def _quad(func, a: float, b: float, tol: float, points, levels: _Levels):
    inner = [p for p in points if a < p < b] if points is not None else []
    res, err, info = integrate.quad_vec(
        func,
        a,
        b,
        epsrel=tol,
        norm="max",
        limit=settings.QUAD_MAX_SUBINTERVALS,
        points=inner or None,
        full_output=True
    )
    if info.status == 1:
        levels.budget_hit = True
    elif info.status != 0:
        # rounding-limited; the estimate is kept
        levels.worst_status = max(levels.worst_status, info.status)
    return res, err


def _evaluate(integrand: ChainIntegrand, levels: _Levels, radii: np.ndarray) -> np.ndarray:
    levels.evaluations += 1
    values = np.asarray(integrand.func(radii), dtype=float)
    return values * radii[0] ** (levels.dims[0] - 1 + levels.weight_power)


def _tail(values_at_cut: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """∫_{-inf}^{cut} of a log-variable power law with the given exponents"""
    out = np.zeros_like(values_at_cut)
    finite = np.isfinite(exponents)
    out[finite] = values_at_cut[finite] / (exponents[finite] + 1.0)
    return out


def _angle_level(
    integrand: ChainIntegrand,
    levels: _Levels,
    i: int,
    outer: np.ndarray,
    tol: float
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate over theta_i given rho_{i+1..D-1} in ``outer``"""
    terms = len(integrand.labels)
    rho_next = outer[0]
    d_next = levels.dims[i + 1]
    floor = levels.floors[i]
    if floor >= rho_next:
        return np.zeros(terms), np.zeros(terms)

    pts = levels.points[i]
    pts = pts[(pts > floor) & (pts < rho_next)]
    angles = np.arcsin(pts / rho_next)
    if floor > 0:
        lo = math.asin(floor / rho_next)
    else:
        first = angles[0] if angles.size else HALF_PI
        lo = settings.QUAD_TAIL_FRACTION * first
    scale = rho_next ** d_next

    def f(w: float) -> np.ndarray:
        theta = math.exp(w)
        rho = rho_next * math.sin(theta)
        jac = theta * scale * math.cos(theta) ** (d_next - 1)
        radii = np.concatenate(([rho], outer))
        if i == 0:
            vals = _evaluate(integrand, levels, radii)
            errs = np.zeros(terms)
        else:
            vals, errs = _angle_level(integrand, levels, i - 1, radii, 0.1 * tol)
        return np.concatenate((vals * jac, errs * jac))

    res, err = _quad(f, math.log(lo), math.log(HALF_PI), tol, np.log(angles), levels)
    vals = res[:terms]
    errs = res[terms:] + err
    if floor <= 0:
        vals = vals + _tail(f(math.log(lo))[:terms], levels.exponents[:, i])
    return vals, errs


def _outer_level(
    integrand: ChainIntegrand,
    levels: _Levels,
    tol: float
) -> tuple[np.ndarray, np.ndarray]:
    terms = len(integrand.labels)
    depth = len(levels.dims)
    top = depth - 1
    floor = levels.floors[top]
    pts = levels.points[top]

    def inner(radius: float) -> tuple[np.ndarray, np.ndarray]:
        if depth == 1:
            return _evaluate(integrand, levels, np.array([radius])), np.zeros(terms)
        return _angle_level(integrand, levels, top - 1, np.array([radius]), 0.1 * tol)

    def f_log(u: float) -> np.ndarray:
        radius = math.exp(u)
        vals, errs = inner(radius)
        return np.concatenate((vals * radius, errs * radius))

    def f_direct(radius: float) -> np.ndarray:
        vals, errs = inner(radius)
        return np.concatenate((vals, errs))

    bounded = math.isfinite(integrand.support)
    hi = integrand.support if bounded else max([1.0] + [float(p) for p in pts])
    pts = pts[(pts > floor) & (pts < hi)]
    if floor > 0:
        lo = floor
    else:
        lo = settings.QUAD_TAIL_FRACTION * (pts[0] if pts.size else hi)
    if lo >= hi:
        return np.zeros(terms), np.zeros(terms)

    res, err = _quad(f_log, math.log(lo), math.log(hi), tol, np.log(pts), levels)
    vals = res[:terms]
    errs = res[terms:] + err
    if floor <= 0:
        vals = vals + _tail(f_log(math.log(lo))[:terms], levels.exponents[:, top])
    if not bounded:
        res_inf, err_inf = _quad(f_direct, hi, math.inf, tol, None, levels)
        vals = vals + res_inf[:terms]
        errs = errs + res_inf[terms:] + err_inf
    return vals, errs


def _quasi_monte_carlo(
    integrand: ChainIntegrand,
    levels: _Levels,
    seed: int
) -> tuple[np.ndarray, np.ndarray]:
    if not math.isfinite(integrand.support):
        raise ValueError("quasi-Monte Carlo path needs a bounded support")
    depth = len(levels.dims)
    rng = np.random.default_rng(seed)
    estimates = []
    for _ in range(settings.QMC_REPLICATES):
        sampler = qmc.Sobol(d=depth, scramble=True, seed=rng)
        z = sampler.random_base2(m=settings.QMC_LOG2_SAMPLES)
        count = z.shape[0]
        radii = np.empty((count, depth))
        weight = np.ones(count)

        top = depth - 1
        hi = integrand.support
        pts = levels.points[top]
        pts = pts[(pts > levels.floors[top]) & (pts < hi)]
        lo = levels.floors[top] if levels.floors[top] > 0 else (
            settings.QUAD_TAIL_FRACTION * (pts[0] if pts.size else hi)
        )
        span = math.log(hi) - math.log(lo)
        radii[:, top] = np.exp(math.log(lo) + z[:, top] * span)
        weight *= radii[:, top] * span

        for i in range(top - 1, -1, -1):
            rho_next = radii[:, i + 1]
            d_next = levels.dims[i + 1]
            floor = levels.floors[i]
            if floor > 0:
                weight *= floor < rho_next
                theta_lo = np.arcsin(np.clip(floor / rho_next, 0.0, 1.0))
            else:
                first = levels.points[i][0] if levels.points[i].size else np.inf
                theta_lo = settings.QUAD_TAIL_FRACTION * np.arcsin(
                    np.minimum(first / rho_next, 1.0)
                )
            span = np.log(HALF_PI) - np.log(theta_lo)
            theta = np.exp(np.log(theta_lo) + z[:, i] * span)
            radii[:, i] = rho_next * np.sin(theta)
            weight *= theta * span * rho_next ** d_next * np.cos(theta) ** (d_next - 1)

        weight *= radii[:, 0] ** (levels.dims[0] - 1 + levels.weight_power)
        levels.evaluations += count
        values = np.asarray(integrand.func(radii), dtype=float)
        estimates.append(np.mean(values * weight[:, None], axis=0))

    estimates = np.array(estimates)
    mean = estimates.mean(axis=0)
    stderr = estimates.std(axis=0, ddof=1) / math.sqrt(len(estimates))
    return mean, stderr


quadrature_service = QuadratureService()
