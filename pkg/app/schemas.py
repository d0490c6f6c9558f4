import math
from typing import Annotated, Literal, Optional

from pydantic import (
    AfterValidator,
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from .config import settings
from .models import (
    AlphaContext,
    CanonicalVariant,
    Command,
    FamilyKind,
    OracleMass,
    Verdict,
    WeightKind,
)


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True)


def _require_finite(values: tuple[float, ...]) -> tuple[float, ...]:
    if not all(math.isfinite(v) for v in values):
        raise ValueError("sequence entries must be finite")
    return values


FiniteSeq = Annotated[tuple[float, ...], Field(min_length=1), AfterValidator(_require_finite)]


# ============ Parameter Schemas ============
class ProblemFrame(FrozenModel):
    """Dimension n and the first index k0 of the singularity chain"""
    n: int = Field(ge=3)
    k0: Literal[1, 3] = 3

    @model_validator(mode="after")
    def _check_start(self):
        if self.k0 > self.n:
            raise ValueError(f"k0={self.k0} exceeds n={self.n}")
        return self

    @property
    def length(self) -> int:
        return self.n - self.k0 + 1

    @property
    def indices(self) -> range:
        return range(self.k0, self.n + 1)

    def position(self, m: int) -> int:
        if not self.k0 <= m <= self.n:
            raise ValueError(f"index {m} outside chain {self.k0}..{self.n}")
        return m - self.k0


class AlphaSeq(FrozenModel):
    values: FiniteSeq
    context: AlphaContext = AlphaContext.FORWARD

    @model_validator(mode="after")
    def _check_sign(self):
        if self.context == AlphaContext.CHARACTERIZATION and any(a > 0 for a in self.values):
            raise ValueError("alpha entries must be nonpositive in a characterization context")
        return self


class BetaSeq(FrozenModel):
    values: FiniteSeq


class GammaSeq(FrozenModel):
    values: FiniteSeq


class AdmissibilityCertificate(FrozenModel):
    verdict: Verdict
    alpha: Optional[AlphaSeq] = None
    fail_index: Optional[int] = None
    slack: float

    @model_validator(mode="after")
    def _check_verdict(self):
        if self.verdict == Verdict.ACCEPTED:
            if self.alpha is None or self.fail_index is not None:
                raise ValueError("accepted certificate carries alpha and no fail_index")
        else:
            if self.alpha is not None or self.fail_index is None:
                raise ValueError("rejected certificate carries fail_index and no alpha")
            if not self.slack < 0:
                raise ValueError("rejected certificate needs negative slack")
        return self


class SobolevSpec(FrozenModel):
    """Derived exponents of the Hardy-Sobolev-Maz'ya remainder for one Q"""
    Q: float
    weight_kind: WeightKind
    sigma: dict[int, float]
    s: float
    q: float
    b: Optional[float] = None
    B: Optional[float] = None
    c: dict[int, float]
    c_closed: dict[int, float]
    maz_power: float
    valid: bool
    reason: str = ""

    @model_validator(mode="after")
    def _check_product(self):
        if abs(self.s * self.q - self.Q) > 1e-14 * max(1.0, abs(self.Q)):
            raise ValueError("s*q must equal Q")
        return self


# ============ Field Schemas ============
class Point(FrozenModel):
    coords: FiniteSeq

    @property
    def dimension(self) -> int:
        return len(self.coords)


class PotentialSpec(FrozenModel):
    frame: ProblemFrame
    beta: BetaSeq

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.beta.values) != self.frame.length:
            raise ValueError(
                f"beta has {len(self.beta.values)} entries, frame needs {self.frame.length}"
            )
        return self


# ============ Quadrature Schemas ============
class ReducedChain(FrozenModel):
    n: int = Field(ge=1)
    indices: tuple[int, ...]

    @model_validator(mode="after")
    def _check_indices(self):
        if not self.indices:
            raise ValueError("chain needs at least one radius index")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("chain indices must be strictly increasing")
        if self.indices[0] < 1 or self.indices[-1] > self.n:
            raise ValueError(f"chain indices must lie in 1..{self.n}")
        return self

    @property
    def radii(self) -> tuple[int, ...]:
        """Chained radius indices with the full radius |x| appended"""
        if self.indices[-1] < self.n:
            return self.indices + (self.n,)
        return self.indices

    @property
    def group_dims(self) -> tuple[int, ...]:
        radii = self.radii
        return (radii[0],) + tuple(b - a for a, b in zip(radii, radii[1:]))

    @property
    def reduced_dimension(self) -> int:
        return len(self.radii)


class MeasureDescription(FrozenModel):
    """``∫ f dx = constant * ∫ f(radii(t)) * prod t_i**(d_i - 1) dt`` over t >= 0"""
    constant: float
    group_dims: tuple[int, ...]
    radii: tuple[int, ...]
    weight_powers: tuple[int, ...]


class QuadratureResult(FrozenModel):
    value: float
    abs_error_estimate: float = Field(ge=0.0)
    evaluations: int = Field(ge=0)
    stochastic: bool = False


class QuadratureBundle(FrozenModel):
    """Labeled components of one vector-valued chain integral"""
    labels: tuple[str, ...]
    values: tuple[float, ...]
    errors: tuple[float, ...]
    evaluations: int
    stochastic: bool = False

    def result(self, label: str) -> QuadratureResult:
        i = self.labels.index(label)
        return QuadratureResult(
            value=self.values[i],
            abs_error_estimate=self.errors[i],
            evaluations=self.evaluations,
            stochastic=self.stochastic,
        )

    def value(self, label: str) -> float:
        return self.values[self.labels.index(label)]

    def error(self, label: str) -> float:
        return self.errors[self.labels.index(label)]


# ============ Family Schemas ============
class CutoffSpec(FrozenModel):
    j: int = Field(ge=1)
    k: float

    @field_validator("k")
    @classmethod
    def _check_level(cls, k: float) -> float:
        if math.isnan(k) or not k > 1:
            raise ValueError("cutoff level k must exceed 1")
        return k

    @property
    def active(self) -> bool:
        return math.isfinite(self.k)


class BumpProfile(FrozenModel):
    """Smooth radial step: 1 up to ``inner``, 0 from ``outer``"""
    inner: float = 0.5
    outer: float = 1.0

    @model_validator(mode="after")
    def _check_band(self):
        if not 0 < self.inner < self.outer:
            raise ValueError("bump needs 0 < inner < outer")
        return self

    @property
    def derivative_bound(self) -> float:
        # the e^{-1/t} smooth step peaks with slope 2 at the band centre
        return 2.0 / (self.outer - self.inner)


class FamilyDescriptor(FrozenModel):
    kind: FamilyKind
    frame: ProblemFrame
    alpha: Optional[AlphaSeq] = None
    cutoffs: tuple[CutoffSpec, ...]
    epsilon: float = Field(default=0.0, ge=0.0)
    q: Optional[int] = None
    bump: BumpProfile = BumpProfile()
    scale: float = 1.0

    @model_validator(mode="after")
    def _check_kind(self):
        if self.frame.k0 != 3:
            raise ValueError("test families are defined for the interior chain k0=3")
        if self.scale == 0 or not math.isfinite(self.scale):
            raise ValueError("scale must be a nonzero finite number")
        js = [c.j for c in self.cutoffs]
        n = self.frame.n
        if self.kind == FamilyKind.STEP3:
            if js != [3]:
                raise ValueError("step3 family uses exactly one cutoff at j=3")
        elif self.kind == FamilyKind.STEPQ:
            if self.q is None or not 4 <= self.q <= n:
                raise ValueError(f"stepq family needs 4 <= q <= {n}")
            if js != [3, self.q]:
                raise ValueError("stepq family uses cutoffs at j=3 and j=q")
            if self.alpha is None or len(self.alpha.values) < self.q - 3:
                raise ValueError(f"stepq family needs alpha_3..alpha_{self.q - 1}")
        else:
            if js != [3]:
                raise ValueError("failure family uses exactly one cutoff at j=3")
            if not self.epsilon > 0:
                raise ValueError("failure family needs epsilon > 0")
            if self.alpha is None or len(self.alpha.values) != self.frame.length:
                raise ValueError("failure family needs the full alpha sequence")
        if self.kind != FamilyKind.FAILURE and self.epsilon != 0:
            raise ValueError("epsilon is only used by the failure family")
        return self


class QuotientReport(FrozenModel):
    numerator_terms: dict[str, float]
    denominator: float
    value: float
    quadrature_errors: dict[str, float]
    denominator_error: float = 0.0
    weighted_norm: Optional[float] = None
    total_energy: Optional[float] = None
    evaluations: int = 0
    stochastic: bool = False
    inconclusive: bool = False

    @computed_field
    @property
    def numerator(self) -> float:
        return math.fsum(self.numerator_terms.values())

    @computed_field
    @property
    def error_estimate(self) -> float:
        """Propagated absolute error of ``value``"""
        num_err = math.fsum(self.quadrature_errors.values())
        return (num_err + abs(self.value) * self.denominator_error) / abs(self.denominator)

    @model_validator(mode="after")
    def _check_value(self):
        expected = self.numerator / self.denominator
        if abs(expected - self.value) > 1e-12 * max(1.0, abs(expected)):
            raise ValueError("value does not match numerator_terms / denominator")
        return self


class SharpnessReport(FrozenModel):
    kind: FamilyKind
    n: int
    q: int
    alpha: tuple[float, ...] = ()
    k3: float
    k_grid: tuple[float, ...]
    values: tuple[float, ...]
    errors: tuple[float, ...]
    denominators: tuple[float, ...]
    limit: float
    rate: float
    fit_residual: float
    refined_limit: float
    refined_rate: float
    refined_curvature: float
    strictly_decreasing: bool
    inconclusive: bool = False


class FailureReport(FrozenModel):
    n: int
    Q: float
    weight_kind: WeightKind
    alpha: tuple[float, ...]
    eps_grid: tuple[float, ...]
    numerators: tuple[float, ...]
    denominators: tuple[float, ...]
    ratios: tuple[float, ...]
    errors: tuple[float, ...]
    d_exponent: float
    d_intercept: float
    expected_exponent: float
    numerator_spread: float
    strictly_decreasing: bool
    inconclusive: bool = False


# ============ Oracle Schemas ============
class GridSpec(FrozenModel):
    n: Literal[3, 4]
    cells_per_axis: int = Field(ge=8)
    box_half_width: float = Field(default=1.0, gt=0.0)
    stagger: Literal[0.5] = 0.5

    @field_validator("cells_per_axis")
    @classmethod
    def _check_even(cls, cells: int) -> int:
        if cells % 2:
            raise ValueError("cells_per_axis must be even so no node lies on a singular subspace")
        return cells

    @property
    def h(self) -> float:
        return 2.0 * self.box_half_width / self.cells_per_axis

    @property
    def node_count(self) -> int:
        return self.cells_per_axis ** self.n


class EigEstimate(FrozenModel):
    lambda_min: Optional[float] = None
    residual_norm: float
    iterations: int
    grid: Optional[GridSpec] = None
    flagged: bool = False
    probe_value: Optional[float] = None
    inner_stalls: int = 0  # inner CG solves that stopped short of rtol


class OracleReport(FrozenModel):
    n: int
    target: Optional[int]
    mass: OracleMass
    beta: tuple[float, ...] = ()
    box_half_width: float
    estimates: tuple[EigEstimate, ...]
    nonincreasing: bool
    reference: Optional[float] = None


# ============ Run Schemas ============
class RunRequest(BaseModel):
    """Parameters shared by the CLI and the HTTP surface"""
    n: Optional[int] = None
    k0: Literal[1, 3] = 3
    alpha: Optional[tuple[float, ...]] = None
    beta: Optional[tuple[float, ...]] = None
    Q: Optional[float] = None
    weight_kind: WeightKind = WeightKind.X2
    k: Optional[int] = None
    level: Optional[float] = Field(default=None, gt=1.0)
    target: Optional[int] = None
    variant: Optional[CanonicalVariant] = None
    family: FamilyKind = FamilyKind.STEP3
    q: Optional[int] = None
    k_grid: tuple[float, ...] = (1e2, 1e4, 1e6)
    k3: float = settings.DEFAULT_K3
    eps_grid: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    epsilon: Optional[float] = None
    tol: float = Field(default=settings.QUAD_TOL, gt=0.0)
    cells: tuple[int, ...] = (24, 48)
    box: float = Field(default=1.0, gt=0.0)
    mass: OracleMass = OracleMass.HARDY
    seed: int = 0
    workers: int = Field(default=settings.SWEEP_WORKERS, ge=1)


_REQUIRED = {
    Command.CHECK_BETA: ("n", "beta"),
    Command.ALPHA2BETA: ("n", "alpha"),
    Command.GAMMA: ("n", "alpha"),
    Command.EXPONENTS: ("n", "alpha", "Q"),
    Command.CANONICAL: ("n", "k", "variant"),
    Command.SHARPNESS: ("n",),
    Command.FAILURE: ("n", "alpha", "Q"),
    Command.SOBOLEV: ("n", "alpha", "Q", "epsilon"),
    Command.RAYLEIGH: ("n", "level"),
    Command.ORACLE: ("n",),
    Command.SN: ("n",),
}


class RunConfig(RunRequest):
    command: Command
    output: Optional[str] = None
    csv: Optional[str] = None
    save: bool = False

    @model_validator(mode="after")
    def _check_command(self):
        missing = [f for f in _REQUIRED[self.command] if getattr(self, f) is None]
        if missing:
            raise ValueError(f"{self.command.value} needs {', '.join(missing)}")
        if self.command == Command.SHARPNESS:
            if len(self.k_grid) < 3:
                raise ValueError("k_grid needs at least 3 points")
            if any(b <= a for a, b in zip(self.k_grid, self.k_grid[1:])):
                raise ValueError("k_grid must be increasing")
            if self.family == FamilyKind.FAILURE:
                raise ValueError("sharpness sweeps use the step3 or stepq family")
        if self.command == Command.RAYLEIGH and self.family == FamilyKind.FAILURE:
            raise ValueError("rayleigh quotients use the step3 or stepq family")
        if self.command == Command.FAILURE:
            if len(self.eps_grid) < 2:
                raise ValueError("eps_grid needs at least 2 points")
            if any(b >= a for a, b in zip(self.eps_grid, self.eps_grid[1:])):
                raise ValueError("eps_grid must decrease toward 0")
        if self.command == Command.ORACLE:
            if any(b <= a for a, b in zip(self.cells, self.cells[1:])):
                raise ValueError("cells must increase")
        return self
