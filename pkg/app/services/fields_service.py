import logging
from typing import Sequence, Union

import numpy as np

from ..config import settings
from ..errors import PreconditionError, SingularPointError
from ..schemas import GammaSeq, Point, PotentialSpec

logger = logging.getLogger(__name__)

PointLike = Union[Point, Sequence[float], np.ndarray]


def _coords(p: PointLike) -> np.ndarray:
    if isinstance(p, Point):
        return np.asarray(p.coords, dtype=float)
    return np.asarray(p, dtype=float)


def _chain_start(n: int, length: int) -> int:
    k0 = n - length + 1
    if k0 not in (1, 3):
        raise ValueError(f"sequence of length {length} does not fit a chain in dimension {n}")
    return k0


def _chain_radii(x: np.ndarray, k0: int, coeff: np.ndarray) -> np.ndarray:
    """|X_m| for m = k0..n; radii whose coefficient vanishes are returned as 1"""
    radii = np.sqrt(np.cumsum(x * x))[k0 - 1:]
    singular = radii < settings.SINGULAR_RADIUS
    if np.any(singular & (coeff != 0)):
        m = k0 + int(np.argmax(singular & (coeff != 0)))
        raise SingularPointError(f"point lies on S_{m}")
    return np.where(singular, 1.0, radii)


class FieldsService:
    """Pointwise distances, potentials, ground states and the field F"""

    @staticmethod
    def dist_subspace(p: PointLike, m: int, k0: int = 1) -> float:
        x = _coords(p)
        if not k0 <= m <= x.size:
            raise ValueError(f"m must lie in {k0}..{x.size}, got {m}")
        return float(np.sqrt(np.sum(x[:m] ** 2)))

    @staticmethod
    def potential_value(p: PointLike, spec: PotentialSpec) -> float:
        x = _coords(p)
        if x.size != spec.frame.n:
            raise ValueError(f"point has {x.size} coordinates, frame needs {spec.frame.n}")
        beta = np.asarray(spec.beta.values)
        radii = _chain_radii(x, spec.frame.k0, beta)
        return float(np.sum(beta / radii ** 2))

    @staticmethod
    def log_ground_state(p: PointLike, gamma: GammaSeq) -> float:
        x = _coords(p)
        g = np.asarray(gamma.values)
        radii = _chain_radii(x, _chain_start(x.size, g.size), g)
        return float(-np.sum(g * np.log(radii)))

    @staticmethod
    def ground_state_value(p: PointLike, gamma: GammaSeq) -> float:
        return float(np.exp(FieldsService.log_ground_state(p, gamma)))

    @staticmethod
    def vector_field_value(p: PointLike, gamma: GammaSeq) -> Point:
        """F = Σ γ_m X_m/|X_m|²"""
        x = _coords(p)
        g = np.asarray(gamma.values)
        k0 = _chain_start(x.size, g.size)
        radii = _chain_radii(x, k0, g)
        # coefficient of x_i collects every m >= max(i, k0)
        weights = g / radii ** 2
        tail = np.cumsum(weights[::-1])[::-1]
        coeff = np.empty(x.size)
        coeff[:k0] = tail[0]
        coeff[k0:] = tail[1:]
        return Point(coords=tuple(coeff * x))

    @staticmethod
    def divF_minus_F2(p: PointLike, gamma: GammaSeq) -> float:
        x = _coords(p)
        g = np.asarray(gamma.values)
        k0 = _chain_start(x.size, g.size)
        inv = 1.0 / _chain_radii(x, k0, g) ** 2
        m = np.arange(k0, x.size + 1)

        div_f = np.sum(g * (m - 2) * inv)
        # X_m·X_j = |X_j|² for j < m, so the cross products reduce to 1/|X_m|²
        earlier = np.concatenate(([0.0], np.cumsum(g)[:-1]))
        f_squared = np.sum(g * g * inv) + 2.0 * np.sum(g * earlier * inv)
        return float(div_f - f_squared)

    @staticmethod
    def ground_state_residual(p: PointLike, gamma: GammaSeq, h: float) -> float:
        """Relative residual of the central-difference Laplacian of φ against div F − |F|²"""
        if not h > 0:
            raise ValueError(f"step h must be positive, got {h}")
        x = _coords(p)
        g = np.asarray(gamma.values)
        k0 = _chain_start(x.size, g.size)
        n = x.size
        radii_sq = np.cumsum(x * x)[k0 - 1:]
        nearest = float(np.sqrt(radii_sq[0]))
        if nearest < 10 * h:
            raise PreconditionError(
                f"point is {nearest:.3g} from a singular subspace, needs >= 10*h = {10 * h:.3g}"
            )

        m = np.arange(k0, n + 1)
        total = 0.0
        for i in range(n):
            # S_m with m >= i+1 sees the shift of x_i
            touched = m >= i + 1
            for sign in (1.0, -1.0):
                ratio = (2.0 * sign * h * x[i] + h * h) / radii_sq
                delta = -0.5 * np.sum(g[touched] * np.log1p(ratio[touched]))
                total += np.expm1(delta)
        laplacian_ratio = total / (h * h)

        exact = FieldsService.divF_minus_F2(x, gamma)
        residual = abs(laplacian_ratio + exact) / max(1.0, abs(exact))
        logger.debug("ground state residual %.3e at h=%.1e", residual, h)
        return float(residual)


fields_service = FieldsService()
