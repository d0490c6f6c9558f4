import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import PreconditionError, SingularPointError
from app.schemas import AlphaSeq, BetaSeq, GammaSeq, Point, PotentialSpec, ProblemFrame
from app.services.fields_service import fields_service
from app.services.param_service import param_service


def _gamma(*values):
    return GammaSeq(values=values)


def test_dist_subspace_known_values():
    assert fields_service.dist_subspace((3, 4, 0, 0, 0), 3) == 5.0
    assert fields_service.dist_subspace((1, 1, 1, 1), 4) == 2.0
    assert fields_service.dist_subspace(Point(coords=(3.0, 4.0, 12.0)), 2) == 5.0


def test_dist_subspace_rejects_index():
    with pytest.raises(ValueError):
        fields_service.dist_subspace((1, 1, 1), 4)


def test_potential_value_known_values(frame3, frame4):
    spec3 = PotentialSpec(frame=frame3, beta=BetaSeq(values=(0.25,)))
    assert_allclose(fields_service.potential_value((2.0, 0.0, 0.0), spec3), 1 / 16)
    spec4 = PotentialSpec(frame=frame4, beta=BetaSeq(values=(0.0, 1.0)))
    assert_allclose(fields_service.potential_value((1.0, 0.0, 0.0, 0.0), spec4), 1.0)


def test_potential_value_singular(frame3):
    spec = PotentialSpec(frame=frame3, beta=BetaSeq(values=(0.25,)))
    with pytest.raises(SingularPointError):
        fields_service.potential_value((0.0, 0.0, 0.0), spec)


def test_potential_spec_checks_length(frame4):
    with pytest.raises(ValueError):
        PotentialSpec(frame=frame4, beta=BetaSeq(values=(0.25,)))


def test_ground_state_value_known_values():
    assert_allclose(fields_service.ground_state_value((4.0, 0.0, 0.0), _gamma(0.5)), 0.5)
    # zero coefficient on S_3 tolerates a point on it
    assert_allclose(fields_service.ground_state_value((0.0, 0.0, 0.0, 2.0), _gamma(0.0, 1.0)), 0.5)


def test_vector_field_known_values():
    f = fields_service.vector_field_value((1.0, 0.0, 0.0), _gamma(1.0))
    assert_allclose(f.coords, (1.0, 0.0, 0.0))
    f = fields_service.vector_field_value((0.0, 0.0, 0.0, 2.0), _gamma(0.0, 1.0))
    assert_allclose(f.coords, (0.0, 0.0, 0.0, 0.5))


def test_vector_field_is_minus_log_gradient(rng):
    gamma = _gamma(0.3, -0.2, 0.7)
    x = rng.uniform(0.2, 1.0, size=5)
    h = 1e-6
    grad = np.empty(5)
    for i in range(5):
        e = np.zeros(5)
        e[i] = h
        grad[i] = (fields_service.log_ground_state(x + e, gamma)
                   - fields_service.log_ground_state(x - e, gamma)) / (2 * h)
    f = fields_service.vector_field_value(x, gamma)
    assert_allclose(f.coords, -grad, rtol=1e-7, atol=1e-9)


def test_divF_minus_F2_known_values():
    assert_allclose(fields_service.divF_minus_F2((1.0, 0.0, 0.0), _gamma(0.5)), 0.25)
    assert_allclose(fields_service.divF_minus_F2((1.0, 0.0, 0.0, 0.0), _gamma(0.0, 1.0)), 1.0)


def test_divF_minus_F2_matches_potential(rng):
    frame = ProblemFrame(n=6, k0=3)
    alpha = AlphaSeq(values=tuple(rng.uniform(-1.0, 0.0, size=frame.length)))
    gamma = param_service.gamma_from_alpha(frame, alpha)
    spec = PotentialSpec(frame=frame, beta=param_service.beta_from_alpha(frame, alpha))
    for _ in range(10):
        x = rng.uniform(-1.0, 1.0, size=frame.n)
        assert_allclose(
            fields_service.divF_minus_F2(x, gamma),
            fields_service.potential_value(x, spec),
            rtol=1e-10
        )


def test_ground_state_residual_small():
    residual = fields_service.ground_state_residual((0.5, 0.5, 0.5), _gamma(0.5), 1e-4)
    assert residual <= 1e-6


def test_ground_state_residual_second_order():
    coarse = fields_service.ground_state_residual((0.5, 0.5, 0.5), _gamma(0.5), 1e-2)
    fine = fields_service.ground_state_residual((0.5, 0.5, 0.5), _gamma(0.5), 1e-4)
    assert 1e4 / 3 <= coarse / fine <= 3e4


def test_ground_state_residual_random_chain(rng):
    frame = ProblemFrame(n=5, k0=3)
    checked = 0
    while checked < 100:
        x = rng.uniform(-1.0, 1.0, size=frame.n)
        if np.linalg.norm(x[:3]) < 0.1:
            continue
        alpha = AlphaSeq(values=tuple(rng.uniform(-1.0, 0.0, size=frame.length)))
        gamma = param_service.gamma_from_alpha(frame, alpha)
        assert fields_service.ground_state_residual(x, gamma, 1e-4) <= 1e-5
        checked += 1


def test_ground_state_residual_second_order_five_dimensions():
    frame = ProblemFrame(n=5, k0=3)
    gamma = param_service.gamma_from_alpha(frame, AlphaSeq(values=(-0.5, -0.25, -0.1)))
    x = (0.6, -0.4, 0.5, 0.3, -0.7)
    coarse = fields_service.ground_state_residual(x, gamma, 1e-2)
    fine = fields_service.ground_state_residual(x, gamma, 1e-4)
    assert 1e4 / 3 <= coarse / fine <= 3e4


def test_ground_state_value_homogeneity(rng):
    gamma = _gamma(0.5, -0.3, 1.2)
    degree = -sum(gamma.values)
    for _ in range(20):
        x = rng.uniform(-1.0, 1.0, size=5)
        lam = float(rng.uniform(0.1, 10.0))
        assert_allclose(
            fields_service.ground_state_value(lam * x, gamma),
            lam ** degree * fields_service.ground_state_value(x, gamma),
            rtol=1e-12
        )


def test_ground_state_residual_near_singular_set():
    with pytest.raises(PreconditionError):
        fields_service.ground_state_residual((1e-4, 0.0, 0.0), _gamma(0.5), 1e-4)
