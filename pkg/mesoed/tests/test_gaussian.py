"""
Tests for the closed-form Gaussian calculus
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mesoed.devices import GaussianDeviceSpec, PoissonDetectorSpec
from mesoed.gaussian import (
    AffineGaussianSpec,
    gaussian_compose,
    gaussian_dress,
    linear_medium_equivalence,
    marginal_total,
    sum_bare,
)
from mesoed.propagators import ModeSpec, retarded_single_mode
from mesoed.timegrid import CausalKernel, TimeGrid, Trajectory


@pytest.fixture
def grid():
    return TimeGrid(dt=0.1, n_steps=12)


@pytest.fixture
def G(grid):
    return retarded_single_mode(grid, ModeSpec(2.0))


@pytest.fixture
def pair(grid):
    first = GaussianDeviceSpec.white(grid, sigma=1.0, mu0=0.2, chi=0.7, device_id="a")
    second = GaussianDeviceSpec.stationary(
        grid, sigma=0.5, correlation_time=0.3, mu0=-0.1, chi=-0.4, device_id="b"
    )
    return first, second


def test_from_device_response(grid):
    device = GaussianDeviceSpec.white(grid, sigma=2.0, mu0=1.0, chi=0.5)
    spec = AffineGaussianSpec.from_device(device)
    field = Trajectory.constant(grid, 2.0)
    assert_allclose(spec.mean(field), 2.0)
    assert_allclose(spec.mean(), 1.0)
    assert_allclose(np.diag(spec.Sigma), 4.0)
    assert spec.block_ids == ["gaussian"]
    assert AffineGaussianSpec.from_device(spec) is spec


def test_from_device_rejects_other_devices():
    grid = TimeGrid(dt=0.1, n_steps=4, n_modes=2)
    with pytest.raises(TypeError):
        AffineGaussianSpec.from_device(PoissonDetectorSpec(grid, input_mode=0, output_mode=1))


def test_spec_validation(grid):
    size = grid.size
    with pytest.raises(ValueError, match="mu0"):
        AffineGaussianSpec(grid, np.zeros(size + 1), np.zeros((size, size)), np.eye(size))
    with pytest.raises(ValueError, match="S has shape"):
        AffineGaussianSpec(grid, np.zeros(size), np.zeros((size, 2)), np.eye(size))
    with pytest.raises(ValueError, match="Sigma has shape"):
        AffineGaussianSpec(grid, np.zeros(size), np.zeros((size, size)), np.eye(2))
    asymmetric = np.eye(size)
    asymmetric[0, 1] = 0.5
    with pytest.raises(ValueError, match="symmetric"):
        AffineGaussianSpec(grid, np.zeros(size), np.zeros((size, size)), asymmetric)
    with pytest.raises(ValueError, match="semidefinite"):
        AffineGaussianSpec(grid, np.zeros(size), np.zeros((size, size)), -np.eye(size))


def test_characteristic_at_origin(grid, pair):
    spec = AffineGaussianSpec.from_device(pair[0])
    assert spec.characteristic(np.zeros(grid.size)) == pytest.approx(1.0)


def test_characteristic_of_single_step():
    grid = TimeGrid(dt=1.0, n_steps=1)
    spec = AffineGaussianSpec(grid, [1.0], [[0.0]], [[4.0]])
    expected = np.exp(0.5j - 0.5 * 4.0 * 0.25)
    assert spec.characteristic([0.5]) == pytest.approx(expected)


@settings(deadline=None, max_examples=30)
@given(st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=12, max_size=12))
def test_bare_sum_characteristic_is_product(zeta):
    grid = TimeGrid(dt=0.1, n_steps=12)
    first = GaussianDeviceSpec.white(grid, sigma=1.0, mu0=0.2, chi=0.7, device_id="a")
    second = GaussianDeviceSpec.stationary(grid, sigma=0.5, correlation_time=0.3, chi=-0.4, device_id="b")
    field = Trajectory.from_function(grid, np.sin)
    total = sum_bare([first, second])
    product = (
        AffineGaussianSpec.from_device(first).characteristic(zeta, field)
        * AffineGaussianSpec.from_device(second).characteristic(zeta, field)
    )
    assert abs(total.characteristic(zeta, field) - product) < 1e-12


def test_sum_bare(grid, pair):
    total = sum_bare(pair)
    first, second = (AffineGaussianSpec.from_device(device) for device in pair)
    assert total.block_ids == ["a+b"]
    assert_allclose(total.Sigma, first.Sigma + second.Sigma)
    assert_allclose(total.S, first.S + second.S)
    with pytest.raises(ValueError):
        sum_bare([])


def test_dress_with_zero_propagator(grid, pair):
    bare = AffineGaussianSpec.from_device(pair[1])
    dressed = gaussian_dress(pair[1], CausalKernel.zeros(grid))
    assert_allclose(dressed.mu0, bare.mu0, atol=1e-15)
    assert_allclose(dressed.S, bare.S, atol=1e-15)
    assert_allclose(dressed.Sigma, bare.Sigma, atol=1e-15)


def test_dress_rejects_same_time_propagator(grid, pair):
    with pytest.raises(ValueError, match="strict"):
        gaussian_dress(pair[0], CausalKernel.local(grid, 1.0))


def test_dress_two_step_delay():
    grid = TimeGrid(dt=1.0, n_steps=2)
    device = GaussianDeviceSpec.white(grid, sigma=1.0, chi=1.0)
    G = CausalKernel(grid, [[0.0, 0.0], [1.0, 0.0]])
    dressed = gaussian_dress(device, G)
    assert_allclose(dressed.Sigma, [[1.0, 1.0], [1.0, 2.0]], atol=1e-14)
    # the earlier field reaches the later current twice
    assert_allclose(dressed.mean([0.7, 0.4]), [0.7, 0.4 + 0.7], atol=1e-14)


def test_dressed_response_is_causal(grid, G, pair):
    dressed = gaussian_dress(pair[0], G)
    assert not np.any(dressed.S[CausalKernel.acausal_mask(grid, strict=False)])
    assert np.all(np.linalg.eigvalsh(dressed.Sigma) > -1e-12)


def test_compose_single_device_is_dressing(G, pair):
    composed = gaussian_compose([pair[0]], G)
    dressed = gaussian_dress(pair[0], G)
    assert_allclose(composed.Sigma, dressed.Sigma, atol=1e-14)
    assert_allclose(composed.mean(), dressed.mean(), atol=1e-14)
    with pytest.raises(ValueError):
        gaussian_compose([], G)


def test_compose_without_propagator_is_bare_sum(grid, pair):
    total = marginal_total(gaussian_compose(pair, CausalKernel.zeros(grid)))
    bare = sum_bare(pair)
    assert_allclose(total.Sigma, bare.Sigma, atol=1e-14)
    assert_allclose(total.S, bare.S, atol=1e-14)
    assert_allclose(total.mu0, bare.mu0, atol=1e-14)


def test_compose_commutes(grid, G, pair):
    field = Trajectory.from_function(grid, np.cos)
    forward = gaussian_compose(pair, G)
    backward = gaussian_compose(pair[::-1], G)
    assert forward.block_ids == ["a", "b"]
    assert_allclose(marginal_total(forward).Sigma, marginal_total(backward).Sigma, atol=1e-12)
    assert_allclose(marginal_total(forward).mean(field), marginal_total(backward).mean(field), atol=1e-12)
    assert_allclose(forward.block("a").Sigma, backward.block(1).Sigma, atol=1e-12)


def test_compose_blocks_are_correlated(G, pair):
    joint = gaussian_compose(pair, G)
    size = joint.grid.size
    assert np.any(np.abs(joint.Sigma[size:, :size]) > 1e-6)


def test_nested_composition_is_associative(grid, G):
    devices = [
        GaussianDeviceSpec.white(grid, sigma=1.0, chi=0.3, device_id="a"),
        GaussianDeviceSpec.white(grid, sigma=0.5, chi=-0.6, device_id="b"),
        GaussianDeviceSpec.stationary(grid, sigma=0.7, correlation_time=0.2, chi=0.5, device_id="c"),
    ]
    flat = marginal_total(gaussian_compose(devices, G))
    left = marginal_total(gaussian_compose([sum_bare(devices[:2]), devices[2]], G))
    right = marginal_total(gaussian_compose([devices[0], sum_bare(devices[1:])], G))
    for nested in (left, right):
        assert_allclose(nested.Sigma, flat.Sigma, atol=1e-12)
        assert_allclose(nested.S, flat.S, atol=1e-12)


def test_medium_equivalence(grid, G, pair):
    Pi = CausalKernel(grid, 0.5 * retarded_single_mode(grid, ModeSpec(3.0)).values)
    field = Trajectory.from_function(grid, lambda t: np.sin(5 * t))
    for device in pair:
        assert linear_medium_equivalence(device, Pi, G, A_e=field) < 1e-10


@settings(deadline=None, max_examples=20)
@given(
    st.floats(min_value=-1.0, max_value=1.0),
    st.floats(min_value=-2.0, max_value=2.0),
    st.floats(min_value=0.0, max_value=4.0),
)
def test_medium_equivalence_property(chi, strength, omega):
    grid = TimeGrid(dt=0.1, n_steps=10)
    G = retarded_single_mode(grid, ModeSpec(1.5))
    Pi = CausalKernel(grid, strength * retarded_single_mode(grid, ModeSpec(omega)).values)
    device = GaussianDeviceSpec.white(grid, sigma=1.0, mu0=0.3, chi=chi)
    assert linear_medium_equivalence(device, Pi, G, A_e=Trajectory.constant(grid, 1.0)) < 1e-10
