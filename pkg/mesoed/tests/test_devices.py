"""
Tests for devices, sampling and moment estimation
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mesoed.devices import (
    GaussianDeviceSpec,
    LocalField,
    PoissonDetectorSpec,
    check_classicality,
    draw_bare,
    estimate_moments,
    noise_factor,
    radiate,
    sample_bare,
)
from mesoed.dressing import dress
from mesoed.network import compose_bare
from mesoed.propagators import ModeSpec, retarded_single_mode
from mesoed.timegrid import CausalKernel, TimeGrid, Trajectory, apply_kernel
from mesoed.util.util import RandomStreams, max_standard_errors


@pytest.fixture
def grid():
    return TimeGrid(dt=0.1, n_steps=12)


# ================================================================================================
#                                   radiate
# ================================================================================================


def test_radiate_zero_current(grid):
    G = retarded_single_mode(grid, ModeSpec(1.0))
    assert not np.any(radiate(G, Trajectory.zeros(grid)).values)


def test_radiate_impulse(grid):
    G = retarded_single_mode(grid, ModeSpec(1.0))
    field = radiate(G, Trajectory.impulse(grid, 4))
    assert_allclose(field.flat, grid.dt * G.values[:, 4])


def test_radiate_convolution():
    grid = TimeGrid(dt=0.05, n_steps=40)
    G = retarded_single_mode(grid, ModeSpec(1.0))
    J = Trajectory.from_function(grid, np.sin)
    expected = np.zeros(grid.n_steps)
    for n in range(grid.n_steps):
        for m in range(n):
            tau = (n - m) * grid.dt
            expected[n] += grid.dt * np.sin(tau) * np.sin(m * grid.dt)
    assert_allclose(radiate(G, J).flat, expected, atol=1e-12)


# ================================================================================================
#                                   Gaussian devices
# ================================================================================================


def test_noiseless_device_is_exact(grid):
    rng = np.random.default_rng(0)
    chi_values = np.tril(rng.normal(size=(grid.size, grid.size)))
    chi = CausalKernel(grid, chi_values, strict=False)
    mu0 = Trajectory(grid, rng.normal(size=grid.shape))
    device = GaussianDeviceSpec.zero_noise(grid, mu0=mu0, chi=chi, device_id="quiet")
    field = Trajectory(grid, rng.normal(size=grid.shape))
    current = sample_bare(device, field, RandomStreams(3))
    assert_allclose(current.values, (mu0 + apply_kernel(chi, field)).values, rtol=1e-12, atol=1e-12)


def test_scalar_mean_and_variance():
    grid = TimeGrid(dt=1.0, n_steps=1)
    J0, chi, mu0, A_loc = 1.5, 0.5, 0.2, 2.0
    device = GaussianDeviceSpec.white(grid, sigma=J0, mu0=mu0, chi=chi, device_id="scalar")
    samples = draw_bare(device, Trajectory.constant(grid, A_loc), RandomStreams(2024), 100000)
    report = estimate_moments(samples, grid=grid)
    assert max_standard_errors(report.mean.flat - (mu0 + chi * A_loc), report.mean_std_err.ravel()) < 4
    assert max_standard_errors(report.cov - J0**2, report.cov_std_err) < 5


def test_white_device_properties():
    grid = TimeGrid(dt=0.5, n_steps=4, n_modes=3)
    device = GaussianDeviceSpec.white(grid, sigma=2.0, mu0=1.0, chi=0.3, modes=[1], device_id="d")
    assert device.emission_modes == (1,)
    assert device.field_sensitive
    assert device.same_time_response
    assert device.mu0.values[:, 0].sum() == 0.0
    assert_allclose(np.diag(device.noise_cov).reshape(grid.shape)[:, 1], 4.0)
    assert_allclose(device.factor @ device.factor.T, device.noise_cov, atol=1e-12)
    with pytest.raises(ValueError):
        GaussianDeviceSpec.white(grid, sigma=1.0, modes=[3])


def test_unresponsive_device():
    grid = TimeGrid(dt=0.5, n_steps=4)
    device = GaussianDeviceSpec.white(grid, sigma=1.0)
    assert not device.field_sensitive
    assert not device.same_time_response


def test_stationary_covariance():
    grid = TimeGrid(dt=0.1, n_steps=5)
    device = GaussianDeviceSpec.stationary(grid, sigma=2.0, correlation_time=0.2, device_id="s")
    assert device.noise_cov[0, 0] == pytest.approx(4.0)
    assert device.noise_cov[2, 0] == pytest.approx(4.0 * np.exp(-1.0))
    with pytest.raises(ValueError):
        GaussianDeviceSpec.stationary(grid, sigma=1.0, correlation_time=0.0)


def test_gaussian_device_validation(grid):
    with pytest.raises(ValueError):
        GaussianDeviceSpec(grid, noise_cov=np.eye(3))
    with pytest.raises(TypeError):
        GaussianDeviceSpec(grid, chi=0.5)
    with pytest.raises(ValueError):
        GaussianDeviceSpec(grid, device_id="")


def test_noise_factor():
    singular = np.ones((3, 3))
    factor = noise_factor(singular)
    assert_allclose(factor @ factor.T, singular, atol=1e-12)
    assert not np.any(noise_factor(np.zeros((2, 2))))
    with pytest.raises(ValueError, match="symmetric"):
        noise_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="positive semidefinite"):
        noise_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_draws_are_reproducible(grid):
    device = GaussianDeviceSpec.stationary(grid, sigma=1.0, correlation_time=0.3, device_id="r")
    first = draw_bare(device, None, RandomStreams(8), 20)
    second = draw_bare(device, None, RandomStreams(8), 20)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, draw_bare(device, None, RandomStreams(9), 20))


def test_replication_is_addressable(grid):
    device = GaussianDeviceSpec.white(grid, sigma=1.0, device_id="r")
    batch = draw_bare(device, None, RandomStreams(8), 10, chunk_size=4)
    single = sample_bare(device, None, RandomStreams(8), replication=7)
    assert_allclose(single.values, batch[7], rtol=1e-14, atol=1e-14)


# ================================================================================================
#                                   Poisson detector
# ================================================================================================


def test_poisson_validation():
    grid = TimeGrid(dt=0.1, n_steps=4, n_modes=2)
    assert PoissonDetectorSpec(grid).output_mode == 1
    with pytest.raises(ValueError):
        PoissonDetectorSpec(grid, input_mode=2)
    with pytest.raises(ValueError):
        PoissonDetectorSpec(grid, efficiency=1.5)
    with pytest.raises(ValueError):
        PoissonDetectorSpec(grid, dark_rate=-1.0)


def test_poisson_dark_counts():
    grid = TimeGrid(dt=0.1, n_steps=50)
    q, dark_rate = 0.5, 2.0
    detector = PoissonDetectorSpec(grid, efficiency=0.8, dark_rate=dark_rate, charge=q, device_id="pd")
    currents = draw_bare(detector, None, RandomStreams(4), 20000)
    charge = currents[:, :, 0].sum(axis=1) * grid.dt
    expected = q * dark_rate * grid.duration
    std_err = np.std(charge, ddof=1) / np.sqrt(charge.size)
    assert abs(charge.mean() - expected) < 4 * std_err
    # counts are integers
    counts = currents * grid.dt / q
    assert_allclose(counts, np.round(counts), atol=1e-9)


def test_poisson_rate_follows_intensity():
    grid = TimeGrid(dt=0.05, n_steps=20, n_modes=2)
    detector = PoissonDetectorSpec(grid, input_mode=0, output_mode=1, efficiency=0.5, device_id="pd")
    field = np.zeros(grid.shape)
    field[:, 0] = 3.0
    currents = draw_bare(detector, field, RandomStreams(6), 20000)
    assert not np.any(currents[:, :, 0])
    counts = currents[:, :, 1].sum(axis=1) * grid.dt
    expected = 0.5 * 9.0 * grid.duration
    std_err = np.std(counts, ddof=1) / np.sqrt(counts.size)
    assert abs(counts.mean() - expected) < 4 * std_err
    assert detector.emission_modes == (1,)


def test_poisson_without_light_is_silent():
    grid = TimeGrid(dt=0.1, n_steps=10)
    detector = PoissonDetectorSpec(grid, device_id="pd")
    assert not np.any(draw_bare(detector, None, RandomStreams(0), 50))


# ================================================================================================
#                                   Causality of samplers
# ================================================================================================


def shipped_devices(grid):
    chi = np.tril(np.ones((grid.size, grid.size)), k=-1) * 0.2
    return [
        GaussianDeviceSpec.white(grid, sigma=1.0, chi=0.7, device_id="white"),
        GaussianDeviceSpec.stationary(grid, sigma=1.0, correlation_time=0.2, chi=-0.3, device_id="colored"),
        GaussianDeviceSpec(grid, chi=CausalKernel(grid, chi), noise_cov=np.eye(grid.size), device_id="delayed"),
        PoissonDetectorSpec(grid, efficiency=0.9, dark_rate=1.0, device_id="pd"),
    ]


@settings(deadline=None, max_examples=30)
@given(st.integers(min_value=0, max_value=9), st.floats(min_value=-5, max_value=5).filter(lambda x: x != 0))
def test_future_field_does_not_change_past(m, delta):
    grid = TimeGrid(dt=0.1, n_steps=10)
    base = np.sin(np.arange(grid.n_steps))[:, None] + 1.0
    perturbed = base.copy()
    perturbed[m] += delta
    for device in shipped_devices(grid):
        before = draw_bare(device, base, RandomStreams(1), 8)
        after = draw_bare(device, perturbed, RandomStreams(1), 8)
        assert np.array_equal(before[:, :m], after[:, :m])
        if not device.same_time_response:
            assert np.array_equal(before[:, m], after[:, m])


# ================================================================================================
#                                   Moments
# ================================================================================================


def test_identical_samples_have_no_covariance(grid):
    sample = Trajectory(grid, np.arange(12.0))
    report = estimate_moments([sample, sample, sample])
    assert not np.any(report.cov)
    assert_allclose(report.mean.values, sample.values)


def test_two_point_samples():
    grid = TimeGrid(dt=1.0, n_steps=1)
    report = estimate_moments([Trajectory(grid, [1.0]), Trajectory(grid, [-1.0])])
    assert report.mean.flat[0] == 0.0
    assert report.cov[0, 0] == pytest.approx(2.0)
    assert report.variance()[0, 0] == pytest.approx(2.0)


def test_unit_normal_mean():
    grid = TimeGrid(dt=1.0, n_steps=1)
    samples = np.random.default_rng(12).standard_normal((100000, 1, 1))
    report = estimate_moments(samples, grid=grid)
    assert abs(report.mean.flat[0]) < 4 / np.sqrt(100000)
    assert report.mean_std_err[0, 0] == pytest.approx(1 / np.sqrt(100000), rel=0.02)


def test_raw_second_moments():
    grid = TimeGrid(dt=1.0, n_steps=2)
    samples = np.array([[[1.0], [2.0]], [[3.0], [4.0]]])
    report = estimate_moments(samples, grid=grid, central=False)
    assert not report.central
    assert_allclose(report.cov, [[5.0, 7.0], [7.0, 10.0]])
    value, _ = report.covariance(1, 0, 0, 0)
    assert value == pytest.approx(7.0)


def test_estimate_moments_errors(grid):
    with pytest.raises(ValueError):
        estimate_moments([Trajectory.zeros(grid)])
    with pytest.raises(ValueError):
        estimate_moments(np.zeros((5, 12, 1)))
    with pytest.raises(ValueError):
        estimate_moments(np.zeros((5, 3, 1)), grid=grid)
    with pytest.raises(ValueError):
        estimate_moments([Trajectory.zeros(grid), Trajectory.zeros(grid.with_modes(2))])


def test_radiation_reduction(grid):
    G = retarded_single_mode(grid, ModeSpec(2.0))
    device = GaussianDeviceSpec.stationary(grid, sigma=1.0, correlation_time=0.3, mu0=0.5, device_id="src")
    currents = draw_bare(device, None, RandomStreams(5), 500)
    fields = G.apply(currents)
    current_report = estimate_moments(currents, grid=grid)
    field_report = estimate_moments(fields, grid=grid)
    assert_allclose(field_report.mean.values, radiate(G, current_report.mean).values, atol=1e-12)
    # joint moments of current and field reduce to current moments
    mixed = currents.reshape(500, -1).T @ fields.reshape(500, -1) / 500
    raw = estimate_moments(currents, grid=grid, central=False).cov
    assert_allclose(mixed, grid.dt * raw @ G.values.T, atol=1e-10)


# ================================================================================================
#                                   LocalField and classicality
# ================================================================================================


def test_local_field_resolves_rows(grid):
    external = np.ones(grid.shape)
    radiated = np.zeros((3,) + grid.shape)
    field = LocalField(grid, 3, [external, radiated])
    radiated[:, 2] = 5.0
    assert field.values[0, 2, 0] == 1.0
    field.resolve(2)
    assert field.values[0, 2, 0] == 6.0
    extended = field.extended(np.full(grid.shape, 2.0))
    assert len(extended.terms) == 3
    assert extended.values[0, 2, 0] == 8.0


class IndefiniteNoiseDevice(GaussianDeviceSpec):
    """A Gaussian device whose noise covariance has a negative eigenvalue."""

    @property
    def noise_cov(self):
        cov = np.eye(self.grid.size)
        cov[0, 0] = -0.5
        return cov


class NegativeRateDetector(PoissonDetectorSpec):
    def rate(self, field):
        return self.dark_rate - 1.0 + 0.0 * field


class UndefinedRateDetector(PoissonDetectorSpec):
    def rate(self, field):
        return np.full(np.shape(field), np.nan)


def test_check_classicality(grid):
    report = check_classicality(PoissonDetectorSpec(grid, device_id="pd"))
    assert report == {"device_id": "pd", "kinds": ["poisson"], "classical": True, "reasons": []}
    with pytest.raises(TypeError):
        check_classicality("device")


def test_check_classicality_resolves_dressed_and_composed(grid):
    G = retarded_single_mode(grid, ModeSpec(2.0))
    source = GaussianDeviceSpec.white(grid, sigma=1.0, chi=0.5, device_id="src")
    detector = PoissonDetectorSpec(grid, dark_rate=2.0, device_id="pd")
    pair = compose_bare([dress(source, G), detector])
    report = check_classicality(pair)
    assert report["classical"]
    assert report["kinds"] == ["gaussian", "poisson"]


def test_check_classicality_rejects_indefinite_noise(grid):
    device = IndefiniteNoiseDevice(grid, device_id="bad")
    report = check_classicality(device)
    assert not report["classical"]
    assert report["reasons"] == ["bad: noise covariance has a negative eigenvalue -5.000e-01"]


def test_check_classicality_rejects_negative_or_undefined_rates(grid):
    report = check_classicality(NegativeRateDetector(grid, dark_rate=0.5, device_id="pd"))
    assert not report["classical"]
    assert "count rate reaches" in report["reasons"][0]
    report = check_classicality(UndefinedRateDetector(grid, device_id="pd"))
    assert report["reasons"] == ["pd: count rate is not finite"]
    with pytest.raises(ValueError, match="dark_rate"):
        PoissonDetectorSpec(grid, dark_rate=np.nan)
