"""
Retarded propagators of free field modes.

A free mode of angular frequency ``omega`` radiates with the retarded kernel
``G(t, t') = sin(omega (t - t')) / omega`` for ``t > t'``. The same kernel
follows from the commutator of the quantised mode, which is checked here
against truncated Fock-space operators. Passive linear media are absorbed
into the propagator by solving the Dyson equation in time order.
"""
import numpy as np
from scipy.linalg import solve_triangular

from mesoed import log
from mesoed.timegrid import CausalKernel, compose_kernels

__all__ = [
    "ModeSpec",
    "retarded_single_mode",
    "retarded_propagator",
    "annihilation_operator",
    "mode_operator_series",
    "fock_retarded_kernel",
    "kubo_check",
    "wave_commutator",
    "dyson_absorb",
    "neumann_series",
]


class ModeSpec:
    """
    A free field mode.

    Parameters
    ----------
    omega : `float`
        Angular frequency in rad/s. Zero selects the static limit.
    hbar : `float`, optional
        Action scale of the quantised mode, default 1.
    """

    def __init__(self, omega, hbar=1.0):
        omega = float(omega)
        hbar = float(hbar)
        if not np.isfinite(omega) or omega < 0:
            raise ValueError(f"omega must be finite and non-negative, got {omega}.")
        if not np.isfinite(hbar) or hbar <= 0:
            raise ValueError(f"hbar must be positive, got {hbar}.")
        self._omega = omega
        self._hbar = hbar

    @property
    def omega(self):
        """(`float`) Angular frequency in rad/s."""
        return self._omega

    @property
    def hbar(self):
        """(`float`) Action scale."""
        return self._hbar

    @property
    def period(self):
        """(`float`) Oscillation period ``2 pi / omega`` in seconds."""
        if self._omega == 0:
            raise ValueError("A static mode has no period.")
        return 2 * np.pi / self._omega

    @property
    def amplitude(self):
        """(`float`) Zero-point amplitude ``sqrt(hbar / (2 omega))``."""
        if self._omega == 0:
            raise ValueError("A static mode has no zero-point amplitude.")
        return np.sqrt(self._hbar / (2 * self._omega))

    def __repr__(self):
        return f"ModeSpec(omega={self._omega!r}, hbar={self._hbar!r})"


def _lags(grid):
    steps = np.arange(grid.n_steps)
    return (steps[:, None] - steps[None, :]) * grid.dt


def retarded_single_mode(grid, mode):
    """
    The retarded propagator of one free mode.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
        A single-mode grid.
    mode : `ModeSpec`

    Returns
    -------
    kernel : `~mesoed.timegrid.CausalKernel`
        Strict kernel with ``sin(omega tau) / omega`` at lag ``tau > 0``
        (``tau`` for the static mode). ``hbar`` does not enter.
    """
    if grid.n_modes != 1:
        raise ValueError(f"retarded_single_mode needs a single-mode grid, got {grid.n_modes} modes.")
    tau = _lags(grid)
    if mode.omega == 0:
        values = tau.copy()
    else:
        values = np.sin(mode.omega * tau) / mode.omega
    values[tau <= 0] = 0.0
    return CausalKernel(grid, values, strict=True)


def retarded_propagator(grid, modes):
    """
    The mode-diagonal retarded propagator of several free modes.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    modes : `list` of `ModeSpec`
        One mode per grid mode.

    Returns
    -------
    kernel : `~mesoed.timegrid.CausalKernel`
    """
    if isinstance(modes, ModeSpec):
        modes = [modes]
    single = grid.with_modes(1)
    kernels = [retarded_single_mode(single, mode) for mode in modes]
    return CausalKernel.block_diagonal(grid, kernels)


def annihilation_operator(n_max):
    """
    The truncated annihilation operator on ``n_max`` Fock states.

    Parameters
    ----------
    n_max : `int`
        Number of retained Fock states, at least 2.

    Returns
    -------
    a : `numpy.ndarray`
        ``(n_max, n_max)`` matrix with ``sqrt(n)`` on the first superdiagonal.
    """
    n_max = int(n_max)
    if n_max < 2:
        raise ValueError(f"The Fock cutoff must be at least 2, got {n_max}.")
    return np.diag(np.sqrt(np.arange(1, n_max, dtype=float)), k=1)


def mode_operator_series(grid, mode, n_max):
    """
    The free-field operator ``A(t) = sqrt(hbar/2 omega) (a e^{-i omega t} + h.c.)``.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    mode : `ModeSpec`
    n_max : `int`
        Fock cutoff.

    Returns
    -------
    series : `numpy.ndarray`
        Complex array of shape ``(n_steps, n_max, n_max)``.
    """
    a = annihilation_operator(n_max)
    phase = np.exp(-1j * mode.omega * grid.times)[:, None, None]
    lowering = mode.amplitude * phase * a
    return lowering + np.conj(np.swapaxes(lowering, 1, 2))


def fock_retarded_kernel(grid, mode, n_max=2):
    """
    The Kubo kernel ``(i/hbar) <0|[A(t_n), A(t_m)]|0>`` for ``m < n``.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
        A single-mode grid.
    mode : `ModeSpec`
        A mode with ``omega > 0``.
    n_max : `int`, optional
        Fock cutoff, default 2.

    Returns
    -------
    kernel : `~mesoed.timegrid.CausalKernel`
    """
    if grid.n_modes != 1:
        raise ValueError(f"fock_retarded_kernel needs a single-mode grid, got {grid.n_modes} modes.")
    if mode.omega == 0:
        raise ValueError("The Fock construction needs omega > 0.")
    series = mode_operator_series(grid, mode, n_max)
    # <0| A_n A_m |0> from the first row of A_n and the first column of A_m
    products = np.einsum("nj,mj->nm", series[:, 0, :], series[:, :, 0])
    commutator = products - products.T
    values = np.real(1j * commutator / mode.hbar)
    values[_lags(grid) <= 0] = 0.0
    return CausalKernel(grid, values, strict=True)


def kubo_check(grid, mode, n_max=2):
    """
    Compare the Fock-space Kubo kernel with `retarded_single_mode`.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    mode : `ModeSpec`
    n_max : `int`, optional
        Fock cutoff, at least 2.

    Returns
    -------
    deviation : `float`
        Maximum absolute difference between the two kernels.
    """
    quantum = fock_retarded_kernel(grid, mode, n_max=n_max)
    classical = retarded_single_mode(grid, mode)
    deviation = float(np.max(np.abs(quantum.values - classical.values)))
    log.debug(f"Kubo check at omega={mode.omega}, n_max={n_max}: deviation {deviation:.3e}")
    return deviation


def wave_commutator(kernel, hbar=1.0):
    """
    The c-number field commutator implied by a retarded propagator.

    ``[A(t), A(t')] = -i hbar (G(t, t') - G(t', t))``.

    Parameters
    ----------
    kernel : `~mesoed.timegrid.CausalKernel`
        A strict retarded propagator.
    hbar : `float`, optional

    Returns
    -------
    commutator : `numpy.ndarray`
        Complex antisymmetric ``(size, size)`` matrix.
    """
    if not kernel.strict:
        raise ValueError("The wave commutator is defined for strict propagators only.")
    return -1j * float(hbar) * (kernel.values - kernel.values.T)


def _check_strict_pair(G, Pi):
    G.grid.check_same(Pi.grid, "Pi")
    if not (G.strict and Pi.strict):
        raise ValueError("Both the propagator and the medium kernel must be strict.")


def dyson_absorb(G, Pi):
    """
    Absorb a passive linear medium into the propagator.

    Solves ``G' = G + G Pi G'`` (kernel products carry ``dt`` weights) by
    forward substitution. Both kernels are strict, so the system is unit lower
    triangular in time order.

    Parameters
    ----------
    G : `~mesoed.timegrid.CausalKernel`
        Strict free propagator.
    Pi : `~mesoed.timegrid.CausalKernel`
        Strict polarisation kernel of the medium.

    Returns
    -------
    G_dressed : `~mesoed.timegrid.CausalKernel`
        Strict dressed propagator.
    """
    _check_strict_pair(G, Pi)
    dt = G.grid.dt
    system = np.eye(G.grid.size) - dt * dt * (G.values @ Pi.values)
    values = solve_triangular(system, G.values, lower=True, unit_diagonal=True)
    return CausalKernel(G.grid, values, strict=True)


def neumann_series(G, Pi, order=None):
    """
    The truncated series ``sum_k (G Pi)^k G`` for ``k = 0 .. order``.

    Parameters
    ----------
    G, Pi : `~mesoed.timegrid.CausalKernel`
        Strict kernels on the same grid.
    order : `int`, optional
        Highest power kept. Defaults to ``n_steps``, past which every term
        vanishes.

    Returns
    -------
    kernel : `~mesoed.timegrid.CausalKernel`
    """
    _check_strict_pair(G, Pi)
    if order is None:
        order = G.grid.n_steps
    loop = compose_kernels(G, Pi)
    term = G
    total = G.values.copy()
    for _ in range(order):
        term = compose_kernels(loop, term)
        if term.is_zero:
            break
        total += term.values
    return CausalKernel(G.grid, total, strict=True)
