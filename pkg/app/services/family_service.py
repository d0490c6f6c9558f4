import logging
import math
from typing import Sequence, Union

import numpy as np
from scipy.special import expit

from ..config import settings
from ..models import FamilyKind
from ..schemas import (
    AlphaSeq,
    BumpProfile,
    CutoffSpec,
    FamilyDescriptor,
    ProblemFrame,
    ReducedChain,
)
from .param_service import param_service

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def smooth_step(t: ArrayLike) -> np.ndarray:
    """C^∞ step from 0 (t <= 0) to 1 (t >= 1) built from e^{-1/t}"""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    safe = np.where(inside, t, 0.5)
    value = expit(1.0 / (1.0 - safe) - 1.0 / safe)
    return np.where(inside, value, np.where(t >= 1, 1.0, 0.0))


def smooth_step_derivative(t: ArrayLike) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    safe = np.where(inside, t, 0.5)
    s = expit(1.0 / (1.0 - safe) - 1.0 / safe)
    slope = s * (1.0 - s) * (1.0 / safe ** 2 + 1.0 / (1.0 - safe) ** 2)
    return np.where(inside, slope, 0.0)


class TestFamily:
    """Evaluable test function u = scale * P * v on a chain of radii.

    P = Π_{j in prefix} r_j^{-γ_j} is the truncated ground state and
    v = r_s^a * Π_c h_{k_c}(r_c) * φ(|x|). The gradient of v is a sum of components
    along the unit vectors e_m = X_m/|X_m|, with e_a·e_b = r_min/r_max.
    """

    __test__ = False

    def __init__(
        self,
        descriptor: FamilyDescriptor,
        chain: ReducedChain,
        prefix: tuple[tuple[int, float], ...],
        power_index: int,
        power: float,
        prefix_end: int,
        ground_state_beta: dict[int, float]
    ):
        self.descriptor = descriptor
        self.chain = chain
        self.columns = {m: i for i, m in enumerate(chain.radii)}
        self.prefix = prefix
        self.power_index = power_index
        self.power = power
        # -ΔP/P = Σ_{3 <= j < prefix_end} ground_state_beta[j] / r_j²
        self.prefix_end = prefix_end
        self.ground_state_beta = ground_state_beta
        self.cutoffs = tuple(c for c in descriptor.cutoffs if c.active)
        self.bump = descriptor.bump

        labels = []
        if power != 0:
            labels.append("power")
        labels.extend(f"cutoff[{c.j}]" for c in self.cutoffs)
        labels.append("bump")
        self.component_labels = tuple(labels)

    @property
    def dimension(self) -> int:
        return self.chain.reduced_dimension

    @property
    def stochastic(self) -> bool:
        return self.dimension > 3

    @property
    def support(self) -> float:
        return self.bump.outer

    @property
    def floors(self) -> tuple[float, ...]:
        floors = [0.0] * self.dimension
        for c in self.cutoffs:
            floors[self.columns[c.j]] = 1.0 / c.k ** 2
        return tuple(floors)

    @property
    def breakpoints(self) -> tuple[tuple[float, ...], ...]:
        points: list[set[float]] = [set() for _ in range(self.dimension)]
        for c in self.cutoffs:
            points[self.columns[c.j]] |= {1.0 / c.k ** 2, 1.0 / c.k}
        points[-1] |= {self.bump.inner, self.bump.outer}
        return tuple(tuple(sorted(p)) for p in points)

    def column(self, m: int) -> int:
        return self.columns[m]

    # ---- singularity exponents at the radial origins ----
    def prefix_exponents(self) -> np.ndarray:
        e = np.zeros(self.dimension)
        for j, g in self.prefix:
            e[self.columns[j]] -= g
        return e

    def v_exponents(self) -> np.ndarray:
        e = np.zeros(self.dimension)
        e[self.columns[self.power_index]] += self.power
        return e

    def component_exponents(self, label: str) -> np.ndarray:
        e = self.v_exponents()
        if label == "power":
            e[self.columns[self.power_index]] -= 1.0
        elif label == "bump":
            e[-1] = math.inf
        else:
            e[self.columns[self.component_column(label)]] -= 1.0
        return e

    def component_column(self, label: str) -> int:
        """Chain index m of the direction e_m carried by a gradient component"""
        if label == "power":
            return self.power_index
        if label == "bump":
            return self.chain.n
        return int(label[len("cutoff["):-1])

    # ---- vectorised evaluation on radii of shape (..., D) ----
    def prefix_value(self, radii: np.ndarray) -> np.ndarray:
        p = np.ones(radii.shape[:-1])
        for j, g in self.prefix:
            p = p * radii[..., self.columns[j]] ** (-g)
        return p

    def evaluate(self, radii: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
        """Return P, v and the gradient components of v"""
        radii = np.asarray(radii, dtype=float)
        r_s = radii[..., self.columns[self.power_index]]
        r_n = radii[..., -1]
        scale = self.descriptor.scale

        base = scale * r_s ** self.power if self.power != 0 else np.full(r_s.shape, scale)
        h_values = {
            c.j: family_service.cutoff_h(c, radii[..., self.columns[c.j]]) for c in self.cutoffs
        }
        h_prod = np.ones(r_s.shape)
        for h in h_values.values():
            h_prod = h_prod * h
        phi = family_service.bump_value(self.bump, r_n)
        v = base * h_prod * phi

        comps: dict[str, np.ndarray] = {}
        if self.power != 0:
            comps["power"] = self.power * base / r_s * h_prod * phi
        for c in self.cutoffs:
            others = np.ones(r_s.shape)
            for j, h in h_values.items():
                if j != c.j:
                    others = others * h
            dh = family_service.cutoff_dh(c, radii[..., self.columns[c.j]])
            comps[f"cutoff[{c.j}]"] = base * dh * others * phi
        comps["bump"] = base * h_prod * family_service.bump_derivative(self.bump, r_n)
        return self.prefix_value(radii), v, comps

    # ---- pointwise evaluation in R^n ----
    def _radii_of(self, x: np.ndarray) -> np.ndarray:
        partial = np.sqrt(np.cumsum(x * x, axis=-1))
        return partial[..., [m - 1 for m in self.chain.radii]]

    def value(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=float)
        p, v, _ = self.evaluate(self._radii_of(x))
        return float(p * v)

    def gradient(self, x: Sequence[float]) -> np.ndarray:
        """Analytic gradient of u at x (piecewise, as the cutoffs are)"""
        x = np.asarray(x, dtype=float)
        n = x.size
        radii = self._radii_of(x)
        p, v, comps = self.evaluate(radii)

        def direction(m: int) -> np.ndarray:
            e = np.zeros(n)
            e[:m] = x[:m]
            return e / radii[self.columns[m]]

        grad = np.zeros(n)
        for label, coeff in comps.items():
            grad += coeff * direction(self.component_column(label))
        for j, g in self.prefix:
            grad += v * (-g) / radii[self.columns[j]] * direction(j)
        return p * grad


class FamilyService:
    """Cutoffs, bump profiles and extremal test families"""

    @staticmethod
    def cutoff_h(spec: CutoffSpec, r: ArrayLike) -> ArrayLike:
        if not spec.active:
            return np.ones_like(np.asarray(r, dtype=float)) if np.ndim(r) else 1.0
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            value = np.clip(2.0 + np.log(r) / math.log(spec.k), 0.0, 1.0)
        return value if value.ndim else float(value)

    @staticmethod
    def cutoff_dh(spec: CutoffSpec, r: ArrayLike) -> ArrayLike:
        """Weak derivative 1/(r ln k) on the band [1/k², 1/k)"""
        r = np.asarray(r, dtype=float)
        if not spec.active:
            out = np.zeros_like(r)
        else:
            band = (r >= 1.0 / spec.k ** 2) & (r < 1.0 / spec.k)
            safe = np.where(band, r, 1.0)
            out = np.where(band, 1.0 / (safe * math.log(spec.k)), 0.0)
        return out if out.ndim else float(out)

    @staticmethod
    def bump_value(bump: BumpProfile, r: ArrayLike) -> ArrayLike:
        t = (bump.outer - np.asarray(r, dtype=float)) / (bump.outer - bump.inner)
        out = smooth_step(t)
        return out if out.ndim else float(out)

    @staticmethod
    def bump_derivative(bump: BumpProfile, r: ArrayLike) -> ArrayLike:
        width = bump.outer - bump.inner
        t = (bump.outer - np.asarray(r, dtype=float)) / width
        out = -smooth_step_derivative(t) / width
        return out if out.ndim else float(out)

    @staticmethod
    def step3(frame: ProblemFrame, k: float, scale: float = 1.0) -> FamilyDescriptor:
        return FamilyDescriptor(
            kind=FamilyKind.STEP3,
            frame=frame,
            cutoffs=(CutoffSpec(j=3, k=k),),
            scale=scale
        )

    @staticmethod
    def stepq(
        frame: ProblemFrame,
        alpha: AlphaSeq,
        q: int,
        k: float,
        k3: float | None = None,
        scale: float = 1.0
    ) -> FamilyDescriptor:
        k3 = settings.DEFAULT_K3 if k3 is None else k3
        return FamilyDescriptor(
            kind=FamilyKind.STEPQ,
            frame=frame,
            alpha=alpha,
            q=q,
            cutoffs=(CutoffSpec(j=3, k=k3), CutoffSpec(j=q, k=k)),
            scale=scale
        )

    @staticmethod
    def failure(
        frame: ProblemFrame,
        alpha: AlphaSeq,
        epsilon: float,
        k3: float | None = None,
        scale: float = 1.0
    ) -> FamilyDescriptor:
        k3 = settings.DEFAULT_K3 if k3 is None else k3
        return FamilyDescriptor(
            kind=FamilyKind.FAILURE,
            frame=frame,
            alpha=alpha,
            epsilon=epsilon,
            cutoffs=(CutoffSpec(j=3, k=k3),),
            scale=scale
        )

    @staticmethod
    def build_family(desc: FamilyDescriptor, extra_radii: Sequence[int] = ()) -> TestFamily:
        frame = desc.frame
        n = frame.n
        if desc.kind == FamilyKind.STEP3:
            prefix_end, power_index, power = 3, 3, -0.5
            gamma: tuple[float, ...] = ()
            family_beta: tuple[float, ...] = ()
        else:
            prefix_end = desc.q if desc.kind == FamilyKind.STEPQ else n
            alpha_prefix = desc.alpha.values[: prefix_end - 3]
            gamma = family_beta = ()
            if alpha_prefix:
                sub = ProblemFrame(n=prefix_end - 1, k0=3)
                sub_alpha = AlphaSeq(values=alpha_prefix)
                gamma = param_service.gamma_from_alpha(sub, sub_alpha).values
                family_beta = param_service.beta_from_alpha(sub, sub_alpha).values
            if desc.kind == FamilyKind.STEPQ:
                power_index = desc.q
                power = (alpha_prefix[-1] if alpha_prefix else 0.0) - 0.5
            else:
                power_index = n
                gamma_n = param_service.gamma_from_alpha(frame, desc.alpha).values[-1]
                power = -gamma_n + desc.epsilon

        prefix = tuple((3 + i, g) for i, g in enumerate(gamma) if g != 0)
        radii = {n, power_index}
        radii |= {c.j for c in desc.cutoffs if c.active}
        radii |= {j for j, _ in prefix}
        radii |= set(extra_radii)
        chain = ReducedChain(n=n, indices=tuple(sorted(radii)))
        family = TestFamily(
            desc,
            chain,
            prefix,
            power_index,
            power,
            prefix_end,
            {3 + i: b for i, b in enumerate(family_beta)}
        )
        if family.stochastic:
            logger.info(
                "family %s on chain %s has reduced dimension %d: quasi-Monte Carlo evaluation",
                desc.kind.value, chain.radii, family.dimension
            )
        return family


family_service = FamilyService()
