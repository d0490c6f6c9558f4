import logging
import math

from scipy.special import gammaln

from ..config import settings
from ..errors import ConsistencyError
from ..models import AlphaContext, CanonicalVariant, Verdict, WeightKind
from ..schemas import (
    AdmissibilityCertificate,
    AlphaSeq,
    BetaSeq,
    GammaSeq,
    ProblemFrame,
    SobolevSpec,
)

logger = logging.getLogger(__name__)


def _check_length(frame: ProblemFrame, values: tuple[float, ...], name: str) -> None:
    if len(values) != frame.length:
        raise ValueError(
            f"{name} has {len(values)} entries, frame n={frame.n}, k0={frame.k0} needs {frame.length}"
        )


class ParamService:
    """Recursions, admissibility decisions and exponent tables for chained Hardy potentials"""

    @staticmethod
    def beta_from_alpha(frame: ProblemFrame, alpha: AlphaSeq) -> BetaSeq:
        a = alpha.values
        _check_length(frame, a, "alpha")
        betas = [0.25 - a[0] ** 2]
        for prev, cur in zip(a, a[1:]):
            betas.append((prev - 0.5) ** 2 - cur ** 2)
        return BetaSeq(values=tuple(betas))

    @staticmethod
    def alpha_from_beta(
        frame: ProblemFrame,
        beta: BetaSeq,
        tol: float | None = None
    ) -> AdmissibilityCertificate:
        """Run the nonpositive-root recursion; rejection is returned, not raised"""
        _check_length(frame, beta.values, "beta")
        tol = settings.PARAM_TOL if tol is None else tol

        alphas: list[float] = []
        for m, b in zip(frame.indices, beta.values):
            bound = 0.25 if not alphas else (alphas[-1] - 0.5) ** 2
            radicand = bound - b
            if radicand < -tol:
                logger.debug("beta rejected at m=%d, radicand=%.17g", m, radicand)
                return AdmissibilityCertificate(
                    verdict=Verdict.REJECTED,
                    fail_index=m,
                    slack=radicand
                )
            alphas.append(-math.sqrt(radicand) if radicand > 0 else 0.0)

        return AdmissibilityCertificate(
            verdict=Verdict.ACCEPTED,
            alpha=AlphaSeq(values=tuple(alphas), context=AlphaContext.CHARACTERIZATION),
            slack=min(a * a for a in alphas)
        )

    @staticmethod
    def gamma_from_alpha(frame: ProblemFrame, alpha: AlphaSeq) -> GammaSeq:
        a = alpha.values
        _check_length(frame, a, "alpha")
        # gamma_{k0} = alpha_{k0} + (k0 - 2)/2 keeps -Δφ/φ equal to the potential for k0 = 1 too
        gammas = [a[0] + (frame.k0 - 2) / 2]
        for prev, cur in zip(a, a[1:]):
            gammas.append(cur - prev + 0.5)
        return GammaSeq(values=tuple(gammas))

    @staticmethod
    def headroom(frame: ProblemFrame, alpha: AlphaSeq, m: int) -> float:
        """Largest admissible beta_m given the certificate prefix alpha_{k0..m-1}"""
        pos = frame.position(m)
        if pos == 0:
            return 0.25
        if pos > len(alpha.values):
            raise ValueError(f"alpha prefix too short for index {m}")
        return (alpha.values[pos - 1] - 0.5) ** 2

    @staticmethod
    def sobolev_spec(
        frame: ProblemFrame,
        alpha: AlphaSeq,
        Q: float,
        weight_kind: WeightKind = WeightKind.X2
    ) -> SobolevSpec:
        a = alpha.values
        _check_length(frame, a, "alpha")
        if not Q > 2:
            raise ValueError(f"Q must exceed 2, got {Q}")
        if any(v > 0 for v in a):
            raise ValueError("Sobolev exponents need nonpositive alpha")

        n = frame.n
        s = (Q + 2) / 2
        q = Q / s
        maz_power = (Q - 2) * n / 2 - Q

        reasons = []
        critical = 2 * n / (n - 2)
        if Q > critical + 1e-12:
            reasons.append(f"Q = {Q!r} exceeds the critical exponent 2n/(n-2) = {critical!r}")
        if weight_kind == WeightKind.X1 and Q <= 2 * (n - 1) / (n - 2) + 1e-12:
            reasons.append(
                f"weight is not locally integrable: |x_1| power {maz_power!r} <= -1"
            )
        if not a[-1] < 0:
            reasons.append("alpha_n = 0: no positive Sobolev constant")

        sigma: dict[int, float] = {}
        c: dict[int, float] = {}
        c_closed: dict[int, float] = {}

        if frame.k0 == 1 and weight_kind != WeightKind.X1:
            raise ValueError("the half-space chain k0=1 uses the |x_1| weight")

        gamma = ParamService.gamma_from_alpha(frame, alpha).values
        lead = ((Q - 2) * n - 2 * Q) / 4
        first = 2 if weight_kind == WeightKind.X2 else 1
        sigma[first] = lead
        if frame.k0 == 3 and first == 1:
            sigma[2] = 0.0
        # for k0 = 1 the |x_1| exponent carries both the weight and gamma_1
        for m, g in zip(frame.indices, gamma):
            sigma[m] = sigma.get(m, 0.0) - (Q + 2) / 2 * g
        B = lead - 1 + (Q - 2) * n / (2 * Q)
        b = lead - 1 + (q - 1) * n / q

        running = 0.0
        for l in range(first, n + 1):
            running += sigma[l]
            c[l] = running + l - 1
            if l >= frame.k0:
                c_closed[l] = (Q + 2) / 2 * (
                    -a[frame.position(l)] + (Q - 2) * (n - l) / (2 * (Q + 2))
                )
            elif l == 2:
                c_closed[l] = (Q - 2) * (n - 2) / 4
        for l, closed in c_closed.items():
            if abs(closed - c[l]) > 1e-10 * max(1.0, abs(closed)):
                raise ConsistencyError(
                    f"c_{l}: summation {c[l]!r} differs from closed form {closed!r}"
                )

        return SobolevSpec(
            Q=Q,
            weight_kind=weight_kind,
            sigma=sigma,
            s=s,
            q=q,
            b=b,
            B=B,
            c=c,
            c_closed=c_closed,
            maz_power=maz_power,
            valid=not reasons,
            reason="; ".join(reasons)
        )

    @staticmethod
    def canonical_alpha(frame: ProblemFrame, k: int, variant: CanonicalVariant) -> AlphaSeq:
        if frame.k0 != 3:
            raise ValueError("canonical choices are defined for the interior chain k0=3")
        n = frame.n
        if not 3 <= k <= n:
            raise ValueError(f"k must satisfy 3 <= k <= {n}, got {k}")

        values = []
        for m in frame.indices:
            if variant == CanonicalVariant.SATS1 or m < k:
                values.append(-(m - 2) / 2)
            elif variant == CanonicalVariant.COR1 or m == k or m == n:
                values.append(0.0)
            else:
                values.append(-(m - k) / 2)
        return AlphaSeq(values=tuple(values), context=AlphaContext.CHARACTERIZATION)

    @staticmethod
    def sobolev_constant(n: int) -> float:
        """Sharp Sobolev constant S_n = πn(n-2)(Γ(n/2)/Γ(n))^{2/n}"""
        if n < 3:
            raise ValueError(f"n must be at least 3, got {n}")
        return math.pi * n * (n - 2) * math.exp(2.0 / n * (gammaln(n / 2) - gammaln(n)))


param_service = ParamService()
