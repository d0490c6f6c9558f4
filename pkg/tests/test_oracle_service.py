import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.config import settings
from app.errors import ConvergenceError
from app.models import OracleMass
from app.schemas import BetaSeq, GridSpec
from app.services.oracle_service import node_coordinates, oracle_service


def test_grid_avoids_singular_subspaces():
    grid = GridSpec(n=3, cells_per_axis=8)
    x = node_coordinates(grid)
    assert_allclose(grid.h, 0.25)
    assert np.all(np.abs(x) >= grid.h / 2 - 1e-15)
    assert_allclose(x[0], -1.0 + grid.h / 2)


def test_grid_needs_even_cells():
    with pytest.raises(ValueError):
        GridSpec(n=3, cells_per_axis=9)
    with pytest.raises(ValueError):
        GridSpec(n=5, cells_per_axis=8)


def test_assembly_is_symmetric():
    grid = GridSpec(n=3, cells_per_axis=8)
    assembly = oracle_service.assemble(grid, BetaSeq(values=(0.1,)), target=None)
    assert assembly.stiffness.dimension == grid.node_count
    assert assembly.stiffness.symmetry_defect() == 0.0
    assert len(assembly.weighted_masses) == 1
    assert_allclose(assembly.target_mass.matrix.diagonal(), grid.h ** 3)


def test_assembly_rejects_bad_beta():
    with pytest.raises(ValueError):
        oracle_service.assemble(GridSpec(n=4, cells_per_axis=8), BetaSeq(values=(0.1,)), target=4)


def test_identity_mass_matches_discrete_box():
    grid = GridSpec(n=3, cells_per_axis=16)
    assembly = oracle_service.assemble(grid)
    estimate = oracle_service.min_rayleigh(assembly.stiffness.matrix, assembly.target_mass.matrix, grid=grid)
    assert_allclose(estimate.lambda_min, oracle_service.discrete_box_eigenvalue(grid), rtol=1e-6)
    assert estimate.residual_norm <= 1e-6


def test_identity_mass_near_continuum_box():
    grid = GridSpec(n=3, cells_per_axis=24)
    assembly = oracle_service.assemble(grid)
    estimate = oracle_service.min_rayleigh(assembly.stiffness.matrix, assembly.target_mass.matrix, grid=grid)
    assert_allclose(estimate.lambda_min, oracle_service.continuum_box_eigenvalue(grid), rtol=0.02)


def test_identity_refinement_reference():
    report = oracle_service.refinement_run(3, (8, 12), mass=OracleMass.IDENTITY)
    assert report.target is None
    assert_allclose(report.reference, 3 * np.pi ** 2 / 4)
    with pytest.raises(ValueError):
        oracle_service.refinement_run(3, (8,), target=3, mass=OracleMass.IDENTITY)


def test_hardy_quotient_is_scale_invariant():
    first = oracle_service.refinement_run(3, (12,), box_half_width=1.0)
    second = oracle_service.refinement_run(3, (12,), box_half_width=2.0)
    assert_allclose(second.estimates[0].lambda_min, first.estimates[0].lambda_min, rtol=1e-6)


def test_hardy_refinement_three_dimensions():
    report = oracle_service.refinement_run(3, (24, 48))
    lambdas = [e.lambda_min for e in report.estimates]
    assert report.target == 3
    assert report.reference == 0.25
    assert report.nonincreasing
    assert all(0.2 < lam < 1.0 for lam in lambdas)
    assert not any(e.flagged for e in report.estimates)


@pytest.mark.slow
def test_hardy_refinement_three_dimensions_fine():
    report = oracle_service.refinement_run(3, (24, 48, 96))
    lambdas = [e.lambda_min for e in report.estimates]
    assert report.nonincreasing
    assert 0.2 < lambdas[-1] < 0.6


def test_hardy_refinement_four_dimensions():
    report = oracle_service.refinement_run(4, (8, 12, 16, 24))
    lambdas = [e.lambda_min for e in report.estimates]
    assert report.reference == 1.0
    assert report.nonincreasing
    assert all(0.95 < lam < 4.0 for lam in lambdas)
    assert 0.95 <= lambdas[-1] <= 1.60


def test_chain_beta_shifts_toward_quarter():
    cells = (8, 12, 16)
    base = oracle_service.refinement_run(4, cells, target=4)
    shifted = oracle_service.refinement_run(4, cells, target=4, beta=BetaSeq(values=(0.25, 0.0)))
    assert shifted.nonincreasing
    for plain, chained in zip(base.estimates, shifted.estimates):
        assert not chained.flagged
        # 1/|X_3|^2 >= 1/|X_4|^2 at every node
        assert chained.lambda_min <= plain.lambda_min - 0.25 + 1e-4
        assert chained.lambda_min > 0.2


def test_zero_beta_matches_plain_rayleigh():
    grid = GridSpec(n=3, cells_per_axis=8)
    assembly = oracle_service.assemble(grid, target=3)
    plain = oracle_service.min_rayleigh(assembly.stiffness.matrix, assembly.target_mass.matrix, seed=5)
    shifted = oracle_service.shifted_min_rayleigh(
        assembly.stiffness.matrix,
        [(0.0, assembly.target_mass.matrix)],
        assembly.target_mass.matrix,
        seed=5
    )
    assert shifted.lambda_min == plain.lambda_min


def test_negative_beta_raises_the_quotient():
    base = oracle_service.refinement_run(4, (8,), target=4)
    raised = oracle_service.refinement_run(4, (8,), target=4, beta=BetaSeq(values=(-1.0, 0.0)))
    assert raised.estimates[0].lambda_min > base.estimates[0].lambda_min
    assert raised.reference is None


def test_admissible_chain_beta_is_not_flagged():
    report = oracle_service.refinement_run(4, (8, 12), target=4, beta=BetaSeq(values=(0.25, 0.0)))
    for estimate in report.estimates:
        assert not estimate.flagged
        assert estimate.lambda_min > 0


def test_indefinite_numerator_is_flagged():
    report = oracle_service.refinement_run(4, (8,), target=4, beta=BetaSeq(values=(20.0, 0.0)))
    estimate = report.estimates[0]
    assert estimate.flagged
    assert estimate.lambda_min is None
    assert estimate.probe_value < 0
    assert not report.nonincreasing


def test_convergence_error_carries_estimate():
    grid = GridSpec(n=3, cells_per_axis=8)
    assembly = oracle_service.assemble(grid, target=3)
    with pytest.raises(ConvergenceError) as excinfo:
        oracle_service.min_rayleigh(
            assembly.stiffness.matrix, assembly.target_mass.matrix, tol=1e-30, max_iterations=2
        )
    assert excinfo.value.estimate.lambda_min > 0
    assert excinfo.value.estimate.iterations == 2


def test_refinement_is_deterministic():
    first = oracle_service.refinement_run(3, (8,), seed=11)
    second = oracle_service.refinement_run(3, (8,), seed=11)
    assert first.estimates[0].lambda_min == second.estimates[0].lambda_min


def test_inner_solver_stalls_are_reported(monkeypatch):
    grid = GridSpec(n=3, cells_per_axis=8)
    assembly = oracle_service.assemble(grid, target=3)
    monkeypatch.setattr(settings, "ORACLE_MAX_CG_ITERATIONS", 1)
    with pytest.raises(ConvergenceError) as excinfo:
        oracle_service.min_rayleigh(
            assembly.stiffness.matrix, assembly.target_mass.matrix, tol=1e-30, max_iterations=3
        )
    assert excinfo.value.estimate.inner_stalls == 3


def test_converged_run_has_no_stalls():
    grid = GridSpec(n=3, cells_per_axis=8)
    assembly = oracle_service.assemble(grid, target=3)
    estimate = oracle_service.min_rayleigh(assembly.stiffness.matrix, assembly.target_mass.matrix)
    assert estimate.inner_stalls == 0
