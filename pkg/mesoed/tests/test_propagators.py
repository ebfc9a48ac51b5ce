"""
Tests for retarded propagators, the Kubo relation and medium absorption
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mesoed.propagators import (
    ModeSpec,
    annihilation_operator,
    dyson_absorb,
    fock_retarded_kernel,
    kubo_check,
    mode_operator_series,
    neumann_series,
    retarded_propagator,
    retarded_single_mode,
    wave_commutator,
)
from mesoed.timegrid import CausalKernel, TimeGrid


def strict_ones(grid):
    return CausalKernel(grid, np.tril(np.ones((grid.size, grid.size)), k=-1))


def test_mode_spec():
    mode = ModeSpec(2.0, hbar=0.5)
    assert mode.period == pytest.approx(np.pi)
    assert mode.amplitude == pytest.approx(0.25)
    with pytest.raises(ValueError):
        ModeSpec(-1.0)
    with pytest.raises(ValueError):
        ModeSpec(1.0, hbar=0.0)
    with pytest.raises(ValueError):
        ModeSpec(0.0).period


def test_quarter_period_entry():
    grid = TimeGrid(dt=np.pi / 2, n_steps=3)
    kernel = retarded_single_mode(grid, ModeSpec(1.0))
    assert kernel.values[1, 0] == pytest.approx(1.0, abs=1e-15)
    assert kernel.strict


def test_no_entries_at_or_above_diagonal():
    grid = TimeGrid(dt=0.1, n_steps=16)
    kernel = retarded_single_mode(grid, ModeSpec(3.0))
    assert not np.any(np.triu(kernel.values))


@pytest.mark.parametrize("omega", [1e-6, 1e-9])
def test_static_limit(omega):
    grid = TimeGrid(dt=0.25, n_steps=8)
    static = retarded_single_mode(grid, ModeSpec(0.0))
    assert static.values[5, 1] == pytest.approx(1.0)
    assert_allclose(retarded_single_mode(grid, ModeSpec(omega)).values, static.values, atol=1e-9)


def test_independent_of_hbar():
    grid = TimeGrid(dt=0.1, n_steps=32)
    reference = retarded_single_mode(grid, ModeSpec(1.0, hbar=1.0)).values
    for hbar in (0.5, 2.0):
        assert np.array_equal(retarded_single_mode(grid, ModeSpec(1.0, hbar=hbar)).values, reference)


def test_single_mode_needs_single_grid():
    with pytest.raises(ValueError):
        retarded_single_mode(TimeGrid(dt=0.1, n_steps=4, n_modes=2), ModeSpec(1.0))


def test_multimode_propagator():
    grid = TimeGrid(dt=0.2, n_steps=6, n_modes=2)
    kernel = retarded_propagator(grid, [ModeSpec(1.0), ModeSpec(4.0)])
    single = grid.with_modes(1)
    assert np.array_equal(kernel.tensor[:, 1, :, 1], retarded_single_mode(single, ModeSpec(4.0)).values)
    assert not np.any(kernel.tensor[:, 0, :, 1])
    with pytest.raises(ValueError):
        retarded_propagator(grid, [ModeSpec(1.0)])


def test_annihilation_operator():
    a = annihilation_operator(4)
    assert_allclose(a @ np.array([0, 1, 0, 0.0]), [1, 0, 0, 0])
    # [a, a^dagger] = 1 except in the last retained state
    commutator = a @ a.T - a.T @ a
    assert_allclose(np.diag(commutator)[:-1], 1.0)
    with pytest.raises(ValueError):
        annihilation_operator(1)


def test_mode_operator_is_hermitian():
    grid = TimeGrid(dt=0.3, n_steps=5)
    series = mode_operator_series(grid, ModeSpec(1.3, hbar=2.0), 6)
    assert_allclose(series, np.conj(np.swapaxes(series, 1, 2)))


def test_kubo_relation():
    grid = TimeGrid(dt=0.1, n_steps=32)
    assert kubo_check(grid, ModeSpec(1.0), n_max=2) < 1e-8


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n_max", [2, 10])
def test_kubo_relation_cutoff_and_hbar(hbar, n_max):
    grid = TimeGrid(dt=0.1, n_steps=32)
    assert kubo_check(grid, ModeSpec(1.0, hbar=hbar), n_max=n_max) < 1e-8


def test_fock_kernel_cutoff_independent():
    grid = TimeGrid(dt=0.1, n_steps=32)
    low = fock_retarded_kernel(grid, ModeSpec(2.5), n_max=2).values
    high = fock_retarded_kernel(grid, ModeSpec(2.5), n_max=10).values
    assert_allclose(low, high, atol=1e-12)


def test_fock_kernel_needs_frequency():
    with pytest.raises(ValueError):
        fock_retarded_kernel(TimeGrid(dt=0.1, n_steps=4), ModeSpec(0.0))


def test_wave_commutator():
    grid = TimeGrid(dt=0.1, n_steps=8)
    kernel = retarded_single_mode(grid, ModeSpec(1.0))
    commutator = wave_commutator(kernel, hbar=2.0)
    assert_allclose(commutator, -commutator.T)
    assert commutator[3, 1] == pytest.approx(-2j * kernel.values[3, 1])
    with pytest.raises(ValueError):
        wave_commutator(CausalKernel.local(grid, 1.0))


def test_wave_commutator_matches_fock():
    grid = TimeGrid(dt=0.1, n_steps=8)
    mode = ModeSpec(1.7, hbar=0.5)
    series = mode_operator_series(grid, mode, 2)
    vacuum = np.einsum("nj,mj->nm", series[:, 0, :], series[:, :, 0])
    assert_allclose(vacuum - vacuum.T, wave_commutator(retarded_single_mode(grid, mode), hbar=0.5), atol=1e-12)


def test_dyson_without_medium():
    grid = TimeGrid(dt=0.1, n_steps=6)
    G = retarded_single_mode(grid, ModeSpec(1.0))
    assert_allclose(dyson_absorb(G, CausalKernel.zeros(grid)).values, G.values)


def test_dyson_three_steps():
    grid = TimeGrid(dt=1.0, n_steps=3)
    G = strict_ones(grid)
    assert_allclose(dyson_absorb(G, strict_ones(grid)).values, G.values)


def test_dyson_four_steps():
    grid = TimeGrid(dt=1.0, n_steps=4)
    dressed = dyson_absorb(strict_ones(grid), strict_ones(grid))
    assert dressed.values[3, 0] == pytest.approx(2.0)
    assert dressed.strict


def test_dyson_needs_strict_kernels():
    grid = TimeGrid(dt=1.0, n_steps=3)
    with pytest.raises(ValueError):
        dyson_absorb(strict_ones(grid), CausalKernel.local(grid, 1.0))


@settings(deadline=None, max_examples=25)
@given(
    st.floats(min_value=0.05, max_value=0.2),
    st.floats(min_value=0.0, max_value=5.0),
    st.floats(min_value=-1.0, max_value=1.0),
)
def test_dyson_matches_neumann_series(dt, omega, coupling):
    grid = TimeGrid(dt=dt, n_steps=12)
    G = retarded_single_mode(grid, ModeSpec(omega))
    Pi = CausalKernel(grid, coupling * G.values)
    dressed = dyson_absorb(G, Pi)
    assert dressed.is_causal(strict=True)
    assert_allclose(dressed.values, neumann_series(G, Pi).values, rtol=1e-9, atol=1e-10)
    # G' = G + G Pi G'
    dt2 = dt * dt
    assert_allclose(dressed.values, G.values + dt2 * G.values @ Pi.values @ dressed.values, rtol=1e-9, atol=1e-10)
