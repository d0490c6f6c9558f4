"""Finite-difference cross-check of the Hardy quotients on a staggered box grid.

The box [-L, L]^n carries nodes x = -L + (i + 1/2)h, h = 2L/N, with Dirichlet zeros on the
ghost layer. With N even no coordinate vanishes, so every |X_m| is positive at the nodes and
the singular weights need no capping.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from ..config import settings
from ..errors import ConvergenceError, PreconditionError
from ..models import OracleMass
from ..schemas import BetaSeq, EigEstimate, GridSpec, OracleReport, ProblemFrame

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric sparse matrix in CSR form"""
    matrix: sparse.csr_matrix

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def symmetry_defect(self) -> float:
        diff = self.matrix - self.matrix.T
        return float(abs(diff).max()) if diff.nnz else 0.0


@dataclass(frozen=True)
class Assembly:
    grid: GridSpec
    stiffness: DiscreteOperator
    target_mass: DiscreteOperator
    # (β_m, M_m) for every nonzero numerator coefficient
    weighted_masses: tuple[tuple[float, DiscreteOperator], ...]


def node_coordinates(grid: GridSpec) -> np.ndarray:
    i = np.arange(grid.cells_per_axis)
    return -grid.box_half_width + (i + 0.5) * grid.h


def _laplacian_1d(cells: int) -> sparse.csr_matrix:
    return sparse.diags(
        [-np.ones(cells - 1), 2.0 * np.ones(cells), -np.ones(cells - 1)],
        [-1, 0, 1],
        format="csr"
    )


def _squared_radii(grid: GridSpec) -> np.ndarray:
    """|X_m|² at every node, shape (n, N**n); row m-1 holds |X_m|²"""
    x = node_coordinates(grid)
    axes = np.meshgrid(*([x] * grid.n), indexing="ij")
    squares = np.stack([a.ravel() ** 2 for a in axes])
    return np.cumsum(squares, axis=0)


class OracleService:
    """Stiffness/mass assembly and smallest generalized Rayleigh values"""

    @staticmethod
    def stiffness(grid: GridSpec) -> DiscreteOperator:
        """h^{n-2} times the Kronecker sum of tridiag(-1, 2, -1)"""
        cells, n = grid.cells_per_axis, grid.n
        t = _laplacian_1d(cells)
        k = sparse.csr_matrix((cells ** n, cells ** n))
        for axis in range(n):
            left = sparse.identity(cells ** axis, format="csr")
            right = sparse.identity(cells ** (n - axis - 1), format="csr")
            k = k + sparse.kron(left, sparse.kron(t, right), format="csr")
        return DiscreteOperator(matrix=(grid.h ** (n - 2) * k).tocsr())

    @staticmethod
    def assemble(
        grid: GridSpec,
        beta: Optional[BetaSeq] = None,
        target: Optional[int] = None
    ) -> Assembly:
        n = grid.n
        frame = ProblemFrame(n=n, k0=3)
        if beta is not None and len(beta.values) != frame.length:
            raise ValueError(f"beta has {len(beta.values)} entries, n={n} needs {frame.length}")
        if target is not None:
            frame.position(target)

        radii_sq = _squared_radii(grid)
        if float(radii_sq[0].min()) <= 0.0:
            raise PreconditionError("grid has a node on a singular subspace")
        volume = grid.h ** n

        def mass(m: int) -> DiscreteOperator:
            return DiscreteOperator(matrix=sparse.diags(volume / radii_sq[m - 1], format="csr"))

        if target is None:
            target_mass = DiscreteOperator(
                matrix=sparse.identity(grid.node_count, format="csr") * volume
            )
        else:
            target_mass = mass(target)

        weighted = []
        if beta is not None:
            for m, b in zip(frame.indices, beta.values):
                if b != 0 and m != target:
                    weighted.append((b, mass(m)))

        logger.debug("assembled n=%d N=%d: %d unknowns", n, grid.cells_per_axis, grid.node_count)
        return Assembly(
            grid=grid,
            stiffness=OracleService.stiffness(grid),
            target_mass=target_mass,
            weighted_masses=tuple(weighted)
        )

    @staticmethod
    def min_rayleigh(
        K: sparse.spmatrix,
        M: sparse.spmatrix,
        tol: Optional[float] = None,
        max_iterations: Optional[int] = None,
        seed: int = 0,
        grid: Optional[GridSpec] = None
    ) -> EigEstimate:
        """Smallest λ with K v = λ M v by inverse iteration, inner solves by preconditioned CG.

        M must be diagonal with a positive diagonal; the residual is measured in the dual
        norm ‖K v − λ M v‖_{M⁻¹} with ‖v‖_M = 1.
        """
        tol = settings.ORACLE_OUTER_TOL if tol is None else tol
        max_iterations = settings.ORACLE_MAX_ITERATIONS if max_iterations is None else max_iterations
        K = sparse.csr_matrix(K)
        M = sparse.csr_matrix(M)
        m_diag = M.diagonal()
        if np.any(m_diag <= 0):
            raise PreconditionError("mass matrix needs a positive diagonal")
        k_diag = K.diagonal()
        if np.any(k_diag <= 0):
            raise PreconditionError("stiffness matrix needs a positive diagonal")
        jacobi = sparse.diags(1.0 / k_diag)

        rng = np.random.default_rng(seed)
        v = rng.random(K.shape[0]) + 0.5
        v /= math.sqrt(v @ (M @ v))
        lam = float(v @ (K @ v))
        residual = math.inf
        stalls = 0

        for iteration in range(1, max_iterations + 1):
            w, info = cg(
                K,
                M @ v,
                x0=v / lam,
                rtol=settings.ORACLE_INNER_RTOL,
                maxiter=settings.ORACLE_MAX_CG_ITERATIONS,
                M=jacobi
            )
            if info > 0:
                stalls += 1
                logger.debug("inner CG stopped after %d iterations without reaching rtol", info)
            v = w / math.sqrt(w @ (M @ w))
            kv = K @ v
            lam = float(v @ kv)
            r = kv - lam * (M @ v)
            residual = math.sqrt(float(r @ (r / m_diag)))
            logger.debug("inverse iteration %d: lambda=%.12g residual=%.3e", iteration, lam, residual)
            if residual <= tol:
                if stalls:
                    logger.warning(
                        "inverse iteration converged with %d of %d inner solves short of rtol",
                        stalls, iteration
                    )
                return EigEstimate(
                    lambda_min=lam, residual_norm=residual, iterations=iteration,
                    grid=grid, inner_stalls=stalls
                )

        raise ConvergenceError(
            f"inverse iteration did not reach residual {tol:g} in {max_iterations} steps",
            estimate=EigEstimate(
                lambda_min=lam, residual_norm=residual, iterations=max_iterations,
                grid=grid, inner_stalls=stalls
            )
        )

    @staticmethod
    def shifted_min_rayleigh(
        K: sparse.spmatrix,
        weighted_masses: Sequence[tuple[float, sparse.spmatrix]],
        M_target: sparse.spmatrix,
        tol: Optional[float] = None,
        seed: int = 0,
        grid: Optional[GridSpec] = None
    ) -> EigEstimate:
        """Smallest Rayleigh value of (K − Σ β_m M_m, M_target).

        The numerator is first probed: with K₊ = K + Σ_{β<0} |β| M and S = Σ_{β>0} β M,
        the form K − Σ β M is positive definite iff the smallest value of (K₊, S)
        exceeds 1. Otherwise a flagged estimate with probe_value = λ_probe − 1 is returned.
        """
        weighted = [(b, sparse.csr_matrix(m)) for b, m in weighted_masses if b != 0]
        if not weighted:
            return OracleService.min_rayleigh(K, M_target, tol, seed=seed, grid=grid)

        K = sparse.csr_matrix(K)
        k_plus = K + sum((-b * m for b, m in weighted if b < 0), sparse.csr_matrix(K.shape))
        positive = [(b, m) for b, m in weighted if b > 0]
        if positive:
            s = sum((b * m for b, m in positive), sparse.csr_matrix(K.shape))
            probe = OracleService.min_rayleigh(k_plus, s, tol, seed=seed, grid=grid)
            if probe.lambda_min <= 1.0:
                logger.warning(
                    "numerator form indefinite on this grid: probe value %.6g <= 1", probe.lambda_min
                )
                return EigEstimate(
                    residual_norm=probe.residual_norm,
                    iterations=probe.iterations,
                    grid=grid,
                    inner_stalls=probe.inner_stalls,
                    flagged=True,
                    probe_value=probe.lambda_min - 1.0
                )

        shifted = K - sum((b * m for b, m in weighted), sparse.csr_matrix(K.shape))
        return OracleService.min_rayleigh(shifted, M_target, tol, seed=seed, grid=grid)

    @staticmethod
    def refinement_run(
        n: int,
        cells: Sequence[int],
        target: Optional[int] = None,
        beta: Optional[BetaSeq] = None,
        box_half_width: float = 1.0,
        mass: OracleMass = OracleMass.HARDY,
        tol: Optional[float] = None,
        seed: int = 0
    ) -> OracleReport:
        """Run the oracle over increasing grids and report the refinement trend"""
        if mass == OracleMass.HARDY:
            target = n if target is None else target
        elif target is not None:
            raise ValueError("identity mass takes no target index")

        estimates = []
        for count in cells:
            grid = GridSpec(n=n, cells_per_axis=count, box_half_width=box_half_width)
            assembly = OracleService.assemble(grid, beta, target)
            estimate = OracleService.shifted_min_rayleigh(
                assembly.stiffness.matrix,
                [(b, m.matrix) for b, m in assembly.weighted_masses],
                assembly.target_mass.matrix,
                tol,
                seed=seed,
                grid=grid
            )
            logger.info(
                "oracle n=%d N=%d: lambda=%s flagged=%s",
                n, count, estimate.lambda_min, estimate.flagged
            )
            estimates.append(estimate)

        lambdas = [e.lambda_min for e in estimates]
        nonincreasing = None not in lambdas and all(b <= a for a, b in zip(lambdas, lambdas[1:]))

        reference = None
        if beta is None or not any(beta.values):
            if mass == OracleMass.HARDY:
                reference = ((target - 2) / 2) ** 2
            else:
                reference = n * math.pi ** 2 / (2.0 * box_half_width) ** 2
        return OracleReport(
            n=n,
            target=target,
            mass=mass,
            beta=beta.values if beta is not None else (),
            box_half_width=box_half_width,
            estimates=tuple(estimates),
            nonincreasing=nonincreasing,
            reference=reference
        )

    @staticmethod
    def discrete_box_eigenvalue(grid: GridSpec) -> float:
        """Exact smallest eigenvalue of the stencil with identity mass"""
        s = math.sin(math.pi / (2 * (grid.cells_per_axis + 1)))
        return grid.n * 4.0 * s * s / grid.h ** 2

    @staticmethod
    def continuum_box_eigenvalue(grid: GridSpec) -> float:
        """Dirichlet ground state of the box bounded by the ghost layer, width 2L + h"""
        return grid.n * math.pi ** 2 / (2.0 * grid.box_half_width + grid.h) ** 2


oracle_service = OracleService()
