import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable, Optional, Sequence

import numpy as np

from ..config import settings
from ..errors import ConsistencyError
from ..models import FamilyKind, WeightKind
from ..schemas import (
    AlphaSeq,
    BetaSeq,
    CutoffSpec,
    FailureReport,
    FamilyDescriptor,
    ProblemFrame,
    QuadratureBundle,
    QuotientReport,
    SharpnessReport,
    SobolevSpec,
)
from .family_service import TestFamily, family_service
from .param_service import param_service
from .quadrature_service import ChainIntegrand, ProjectedWeight, quadrature_service

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _Sample:
    radii: np.ndarray
    p: np.ndarray
    v: np.ndarray
    comps: dict[str, np.ndarray]


class _Terms:
    """Labeled integrands of one quotient, evaluated together"""

    def __init__(self, family: TestFamily):
        self.family = family
        self.labels: list[str] = []
        self.powers: list[np.ndarray] = []
        self.makers: list[Callable[[_Sample], np.ndarray]] = []

    def add(self, label: str, powers: np.ndarray, maker: Callable[[_Sample], np.ndarray]) -> None:
        self.labels.append(label)
        self.powers.append(powers)
        self.makers.append(maker)

    def add_energy(self) -> list[str]:
        fam = self.family
        added = []
        base = 2.0 * fam.prefix_exponents()
        for a, b in combinations_with_replacement(fam.component_labels, 2):
            ca, cb = fam.column(fam.component_column(a)), fam.column(fam.component_column(b))
            powers = base + fam.component_exponents(a) + fam.component_exponents(b)
            if ca != cb:
                lo, hi = min(ca, cb), max(ca, cb)
                powers[lo] += 1.0
                powers[hi] -= 1.0
            label = f"energy:{a}" if a == b else f"energy:mixed[{a},{b}]"
            factor = 1.0 if a == b else 2.0

            def maker(s: _Sample, a=a, b=b, ca=ca, cb=cb, factor=factor) -> np.ndarray:
                dot = _dot(s.radii, ca, cb)
                return factor * s.p ** 2 * s.comps[a] * s.comps[b] * dot

            self.add(label, powers, maker)
            added.append(label)
        return added

    def add_hardy(self, label: str, m: int, coefficient: float) -> None:
        fam = self.family
        col = fam.column(m)
        powers = 2.0 * (fam.prefix_exponents() + fam.v_exponents())
        powers[col] -= 2.0

        def maker(s: _Sample) -> np.ndarray:
            return coefficient * (s.p * s.v) ** 2 / s.radii[..., col] ** 2

        self.add(label, powers, maker)

    def add_total_energy(self) -> None:
        """|∇u|² expanded over every direction e_m, prefix included"""
        fam = self.family

        def maker(s: _Sample) -> np.ndarray:
            parts = [(fam.column(fam.component_column(a)), s.comps[a]) for a in fam.component_labels]
            parts += [
                (fam.column(j), -g * s.v / s.radii[..., fam.column(j)]) for j, g in fam.prefix
            ]
            total = np.zeros_like(s.v)
            for i, k in combinations_with_replacement(range(len(parts)), 2):
                (ca, xa), (cb, xb) = parts[i], parts[k]
                factor = 1.0 if i == k else 2.0
                total = total + factor * xa * xb * _dot(s.radii, ca, cb)
            return s.p ** 2 * total

        # every radius sits above a floor, so the declared powers are never consulted
        self.add("total_energy", np.zeros(fam.dimension), maker)

    def integrand(self, weight: Optional[ProjectedWeight] = None) -> ChainIntegrand:
        fam = self.family
        makers = tuple(self.makers)

        def func(radii: np.ndarray) -> np.ndarray:
            p, v, comps = fam.evaluate(radii)
            sample = _Sample(radii=np.asarray(radii, dtype=float), p=p, v=v, comps=comps)
            return np.stack([m(sample) for m in makers], axis=-1)

        return ChainIntegrand(
            func=func,
            labels=tuple(self.labels),
            powers=np.array(self.powers),
            floors=fam.floors,
            breakpoints=fam.breakpoints,
            support=fam.support,
            weight=weight
        )


def _dot(radii: np.ndarray, ca: int, cb: int) -> np.ndarray | float:
    """e_a·e_b = r_min/r_max for nested subspaces"""
    if ca == cb:
        return 1.0
    lo, hi = min(ca, cb), max(ca, cb)
    return radii[..., lo] / radii[..., hi]


def _check_beta(frame: ProblemFrame, beta: BetaSeq) -> None:
    if len(beta.values) != frame.length:
        raise ValueError(f"beta has {len(beta.values)} entries, frame needs {frame.length}")


def _finite_k3(desc: FamilyDescriptor) -> bool:
    return desc.kind != FamilyKind.STEP3 and desc.cutoffs[0].active


def _doubled_k3(desc: FamilyDescriptor) -> FamilyDescriptor:
    first = desc.cutoffs[0]
    cutoffs = (CutoffSpec(j=first.j, k=2.0 * first.k),) + desc.cutoffs[1:]
    return desc.model_copy(update={"cutoffs": cutoffs})


def _potential_terms(family: TestFamily, beta: BetaSeq, skip: Optional[int]) -> dict[str, tuple[int, float]]:
    """Subtracted potential terms in ground-state form: label -> (index, coefficient)"""
    frame = family.descriptor.frame
    terms = {}
    for m, b in zip(frame.indices, beta.values):
        if m == skip:
            continue
        if m < family.prefix_end:
            diff = family.ground_state_beta.get(m, 0.0) - b
            if diff != 0:
                terms[f"prefix_mismatch[{m}]"] = (m, diff)
        elif b != 0:
            terms[f"hardy[{m}]"] = (m, -b)
    return terms


def _energy_gap(bundle: QuadratureBundle, energy_labels: list[str], family: TestFamily) -> tuple[float, float]:
    """Return (labeled energy + ground-state terms − direct total, combined error)"""
    labels = energy_labels + [f"ground_state[{j}]" for j, b in family.ground_state_beta.items() if b != 0]
    parts = [bundle.value(l) for l in labels]
    gap = math.fsum(parts) - bundle.value("total_energy")
    err = math.fsum(bundle.error(l) for l in labels) + bundle.error("total_energy")
    return gap, err


class QuotientService:
    """Rayleigh and Sobolev quotients of the test families, and their sweeps"""

    @staticmethod
    def reference_beta(frame: ProblemFrame, alpha: Optional[AlphaSeq], q: int) -> BetaSeq:
        """Coefficients of the family's own ground state below q, zero from q on"""
        values = [0.0] * frame.length
        if q > 3:
            sub = ProblemFrame(n=q - 1, k0=3)
            prefix = param_service.beta_from_alpha(sub, AlphaSeq(values=alpha.values[: q - 3]))
            values[: q - 3] = prefix.values
        return BetaSeq(values=tuple(values))

    @staticmethod
    def rayleigh_quotient(
        desc: FamilyDescriptor,
        beta: BetaSeq,
        target_index: int,
        tol: Optional[float] = None,
        seed: int = 0
    ) -> QuotientReport:
        tol = settings.QUAD_TOL if tol is None else tol
        report = QuotientService._rayleigh(desc, beta, target_index, tol, seed)
        if _finite_k3(desc):
            report = _insensitivity_check(
                report, QuotientService._rayleigh(_doubled_k3(desc), beta, target_index, tol, seed), tol
            )
        return report

    @staticmethod
    def _rayleigh(
        desc: FamilyDescriptor,
        beta: BetaSeq,
        target_index: int,
        tol: float,
        seed: int
    ) -> QuotientReport:
        frame = desc.frame
        _check_beta(frame, beta)
        frame.position(target_index)
        probe = family_service.build_family(desc)
        if target_index < probe.prefix_end:
            raise ValueError(
                f"target index {target_index} lies inside the ground-state prefix 3..{probe.prefix_end - 1}"
            )
        potential = _potential_terms(probe, beta, skip=target_index)
        with_total = all(c.active for c in desc.cutoffs)
        extra = {target_index} | {m for m, _ in potential.values()}
        if with_total:
            extra |= set(probe.ground_state_beta)
        family = family_service.build_family(desc, extra_radii=sorted(extra))

        terms = _Terms(family)
        energy = terms.add_energy()
        for label, (m, coeff) in potential.items():
            terms.add_hardy(label, m, coeff)
        terms.add_hardy("denominator", target_index, 1.0)
        if with_total:
            terms.add_total_energy()
            for j, b in family.ground_state_beta.items():
                if b != 0:
                    terms.add_hardy(f"ground_state[{j}]", j, b)

        bundle = quadrature_service.integrate_terms(family.chain, terms.integrand(), tol, seed)
        numerator_labels = energy + list(potential)
        numerator_terms = {l: bundle.value(l) for l in numerator_labels}
        denominator = bundle.value("denominator")
        total = None
        if with_total:
            total = bundle.value("total_energy")
            _verify_energy(bundle, energy, family, tol)

        value = math.fsum(numerator_terms.values()) / denominator
        logger.debug(
            "rayleigh %s n=%d target=%d: %.17g (%d evaluations)",
            desc.kind.value, frame.n, target_index, value, bundle.evaluations
        )
        return QuotientReport(
            numerator_terms=numerator_terms,
            denominator=denominator,
            value=value,
            quadrature_errors={l: bundle.error(l) for l in numerator_labels},
            denominator_error=bundle.error("denominator") / abs(denominator),
            total_energy=total,
            evaluations=bundle.evaluations,
            stochastic=bundle.stochastic
        )

    @staticmethod
    def sobolev_quotient(
        desc: FamilyDescriptor,
        beta: BetaSeq,
        spec: SobolevSpec,
        tol: Optional[float] = None,
        seed: int = 0
    ) -> QuotientReport:
        tol = settings.QUAD_TOL if tol is None else tol
        report = QuotientService._sobolev(desc, beta, spec, tol, seed)
        if _finite_k3(desc):
            report = _insensitivity_check(
                report, QuotientService._sobolev(_doubled_k3(desc), beta, spec, tol, seed), tol
            )
        return report

    @staticmethod
    def _sobolev(
        desc: FamilyDescriptor,
        beta: BetaSeq,
        spec: SobolevSpec,
        tol: float,
        seed: int
    ) -> QuotientReport:
        frame = desc.frame
        _check_beta(frame, beta)
        weight = ProjectedWeight(
            k=2 if spec.weight_kind == WeightKind.X2 else 1,
            power=spec.maz_power
        )
        probe = family_service.build_family(desc)
        potential = _potential_terms(probe, beta, skip=None)
        with_total = all(c.active for c in desc.cutoffs)
        extra = {m for m, _ in potential.values()}
        if with_total:
            extra |= set(probe.ground_state_beta)
        family = family_service.build_family(desc, extra_radii=sorted(extra))
        Q = spec.Q

        numerator = _Terms(family)
        energy = numerator.add_energy()
        for label, (m, coeff) in potential.items():
            numerator.add_hardy(label, m, coeff)
        if with_total:
            numerator.add_total_energy()
            for j, b in family.ground_state_beta.items():
                if b != 0:
                    numerator.add_hardy(f"ground_state[{j}]", j, b)
        bundle = quadrature_service.integrate_terms(family.chain, numerator.integrand(), tol, seed)

        # the weight enters through the closed-form angular mean, so it is a separate integral
        norm_terms = _Terms(family)
        norm_terms.add(
            "weighted_norm",
            Q * (family.prefix_exponents() + family.v_exponents()),
            lambda s: np.abs(s.p * s.v) ** Q
        )
        norm = quadrature_service.integrate_chain(
            family.chain, norm_terms.integrand(weight=weight), tol, seed
        )

        numerator_labels = energy + list(potential)
        numerator_terms = {l: bundle.value(l) for l in numerator_labels}
        denominator = norm.value ** (2.0 / Q)
        total = None
        if with_total:
            total = bundle.value("total_energy")
            _verify_energy(bundle, energy, family, tol)
        value = math.fsum(numerator_terms.values()) / denominator
        logger.debug(
            "sobolev %s n=%d Q=%g: N=%.6g D=%.6g",
            desc.kind.value, frame.n, Q, value * denominator, denominator
        )
        return QuotientReport(
            numerator_terms=numerator_terms,
            denominator=denominator,
            value=value,
            quadrature_errors={l: bundle.error(l) for l in numerator_labels},
            denominator_error=2.0 / Q * norm.abs_error_estimate / abs(norm.value),
            weighted_norm=norm.value,
            total_energy=total,
            evaluations=bundle.evaluations + norm.evaluations,
            stochastic=bundle.stochastic or norm.stochastic
        )

    @staticmethod
    def sharpness_sweep(
        kind: FamilyKind,
        frame: ProblemFrame,
        k_grid: Sequence[float],
        alpha: Optional[AlphaSeq] = None,
        q: Optional[int] = None,
        k3: Optional[float] = None,
        tol: Optional[float] = None,
        workers: int = 1
    ) -> SharpnessReport:
        """Evaluate Q_q over increasing k and fit a + b/ln k (and a + b/ln k + c/ln² k)"""
        k_grid = tuple(float(k) for k in k_grid)
        if len(k_grid) < 3 or any(b <= a for a, b in zip(k_grid, k_grid[1:])):
            raise ValueError("k_grid must be increasing with at least 3 points")
        if kind == FamilyKind.FAILURE:
            raise ValueError("sharpness sweeps use the step3 or stepq family")
        k3 = settings.DEFAULT_K3 if k3 is None else k3
        if kind == FamilyKind.STEP3:
            q = 3
        elif q is None or alpha is None:
            raise ValueError("stepq sweeps need q and alpha")

        beta = QuotientService.reference_beta(frame, alpha, q)
        tasks = [(kind, frame, alpha, q, k, k3, beta, tol) for k in k_grid]
        reports = _map(_sharpness_point, tasks, workers)

        values = np.array([r.value for r in reports])
        errors = tuple(r.error_estimate for r in reports)
        inv_log = 1.0 / np.log(np.array(k_grid))

        two = np.column_stack((np.ones_like(inv_log), inv_log))
        (a, b), *_ = np.linalg.lstsq(two, values, rcond=None)
        residual = float(np.linalg.norm(values - two @ np.array([a, b])))
        three = np.column_stack((two, inv_log ** 2))
        (ra, rb, rc), *_ = np.linalg.lstsq(three, values, rcond=None)

        decreasing = all(y < x for x, y in zip(values, values[1:]))
        inconclusive = max(errors) > residual or any(r.inconclusive for r in reports)
        if inconclusive:
            logger.warning(
                "sharpness sweep inconclusive: quadrature error %.3e vs fit residual %.3e",
                max(errors), residual
            )
        return SharpnessReport(
            kind=kind,
            n=frame.n,
            q=q,
            alpha=alpha.values if alpha is not None else (),
            k3=k3,
            k_grid=k_grid,
            values=tuple(float(v) for v in values),
            errors=errors,
            denominators=tuple(r.denominator for r in reports),
            limit=float(a),
            rate=float(b),
            fit_residual=residual,
            refined_limit=float(ra),
            refined_rate=float(rb),
            refined_curvature=float(rc),
            strictly_decreasing=decreasing,
            inconclusive=inconclusive
        )

    @staticmethod
    def failure_sweep(
        frame: ProblemFrame,
        alpha: AlphaSeq,
        Q: float,
        eps_grid: Sequence[float],
        weight_kind: WeightKind = WeightKind.X2,
        k3: Optional[float] = None,
        tol: Optional[float] = None,
        workers: int = 1
    ) -> FailureReport:
        eps_grid = tuple(float(e) for e in eps_grid)
        if len(eps_grid) < 2 or any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
            raise ValueError("eps_grid must decrease toward 0 with at least 2 points")
        if alpha.values[-1] != 0:
            raise ValueError(f"failure sweep needs alpha_n = 0, got {alpha.values[-1]!r}")
        spec = param_service.sobolev_spec(frame, alpha, Q, weight_kind)
        beta = param_service.beta_from_alpha(frame, alpha)

        tasks = [(frame, alpha, eps, k3, beta, spec, tol) for eps in eps_grid]
        reports = _map(_failure_point, tasks, workers)

        numerators = np.array([r.numerator for r in reports])
        denominators = np.array([r.denominator for r in reports])
        ratios = np.array([r.value for r in reports])
        errors = tuple(r.error_estimate for r in reports)
        slope, intercept = np.polyfit(np.log(eps_grid), np.log(denominators), 1)
        spread = float(numerators.max() / numerators.min()) if numerators.min() > 0 else math.inf

        decreasing = all(y < x for x, y in zip(ratios, ratios[1:]))
        swamped = any(
            abs(x - y) <= ex + ey for (x, ex), (y, ey) in zip(zip(ratios, errors), zip(ratios[1:], errors[1:]))
        )
        inconclusive = swamped or any(r.inconclusive for r in reports)
        if inconclusive:
            logger.warning("failure sweep inconclusive: quotient differences within quadrature error")
        return FailureReport(
            n=frame.n,
            Q=Q,
            weight_kind=weight_kind,
            alpha=alpha.values,
            eps_grid=eps_grid,
            numerators=tuple(float(x) for x in numerators),
            denominators=tuple(float(x) for x in denominators),
            ratios=tuple(float(x) for x in ratios),
            errors=errors,
            d_exponent=float(slope),
            d_intercept=float(intercept),
            expected_exponent=-2.0 / Q,
            numerator_spread=spread,
            strictly_decreasing=decreasing,
            inconclusive=inconclusive
        )


def _verify_energy(bundle: QuadratureBundle, energy: list[str], family: TestFamily, tol: float) -> None:
    gap, err = _energy_gap(bundle, energy, family)
    scale = max(1.0, abs(bundle.value("total_energy")))
    if abs(gap) > 10.0 * err + 100.0 * tol * scale:
        raise ConsistencyError(
            f"energy decomposition misses the direct total by {gap:.3e} (error budget {err:.3e})"
        )


def _insensitivity_check(report: QuotientReport, doubled: QuotientReport, tol: float) -> QuotientReport:
    change = abs(doubled.value - report.value)
    allowed = max(report.error_estimate + doubled.error_estimate, tol * max(1.0, abs(report.value)))
    if change > allowed:
        logger.warning("doubling k3 moved the quotient by %.3e (allowed %.3e)", change, allowed)
        return report.model_copy(update={"inconclusive": True})
    return report


def _sharpness_point(task) -> QuotientReport:
    kind, frame, alpha, q, k, k3, beta, tol = task
    if kind == FamilyKind.STEP3:
        desc = family_service.step3(frame, k)
    else:
        desc = family_service.stepq(frame, alpha, q, k, k3)
    return quotient_service.rayleigh_quotient(desc, beta, q, tol)


def _failure_point(task) -> QuotientReport:
    frame, alpha, eps, k3, beta, spec, tol = task
    desc = family_service.failure(frame, alpha, eps, k3)
    return quotient_service.sobolev_quotient(desc, beta, spec, tol)


def _map(func, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(func, tasks))


quotient_service = QuotientService()
