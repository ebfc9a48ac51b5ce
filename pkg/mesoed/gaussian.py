"""
Closed-form calculus of affine Gaussian devices.

A Gaussian device with a linear response is fully described by its mean
current at zero field, the linear map from the external field to the mean
current, and the noise covariance. Dressing and composition map such a
description onto another one by a unit lower triangular solve in time
order, which makes this module the exact counterpart of the sampling
engine for Gaussian devices.

Nothing in this module carries Planck's constant.
"""
import numpy as np
from scipy.linalg import eigvalsh, solve_triangular

from mesoed.devices import GaussianDeviceSpec
from mesoed.propagators import dyson_absorb
from mesoed.util.util import get_numeric

__all__ = [
    "AffineGaussianSpec",
    "gaussian_dress",
    "gaussian_compose",
    "marginal_total",
    "sum_bare",
    "linear_medium_equivalence",
]


class AffineGaussianSpec:
    """
    A Gaussian conditional distribution ``J ~ N(mu0 + S A_e, Sigma)``.

    Joint descriptions of several devices stack the device currents block by
    block; ``S`` then maps the single external field onto every block.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    mu0 : array_like
        Mean current at zero external field, length ``n_blocks * size``.
    S : array_like
        ``(n_blocks * size, size)`` response of the mean to the external field.
    Sigma : array_like
        ``(n_blocks * size, n_blocks * size)`` covariance, symmetric PSD.
    block_ids : `list` of `str`, optional
        Names of the stacked blocks, default a single block ``"total"``.

    Raises
    ------
    ValueError: If shapes are inconsistent or ``Sigma`` is not symmetric PSD.
    """

    def __init__(self, grid, mu0, S, Sigma, block_ids=None):
        block_ids = ["total"] if block_ids is None else list(block_ids)
        length = len(block_ids) * grid.size
        mu0 = np.array(mu0, dtype=float).reshape(-1)
        S = np.array(S, dtype=float)
        Sigma = np.array(Sigma, dtype=float)
        if mu0.shape != (length,):
            raise ValueError(f"mu0 has shape {mu0.shape}, expected {(length,)}.")
        if S.shape != (length, grid.size):
            raise ValueError(f"S has shape {S.shape}, expected {(length, grid.size)}.")
        if Sigma.shape != (length, length):
            raise ValueError(f"Sigma has shape {Sigma.shape}, expected {(length, length)}.")
        tolerance = get_numeric("psd_tolerance", 1e-10)
        scale = max(1.0, float(np.max(np.abs(Sigma)))) if Sigma.size else 1.0
        if not np.allclose(Sigma, Sigma.T, rtol=0, atol=tolerance * scale):
            raise ValueError("Sigma must be symmetric.")
        if np.any(Sigma) and eigvalsh(Sigma)[0] < -tolerance * scale:
            raise ValueError("Sigma must be positive semidefinite.")
        self._grid = grid
        self._mu0 = mu0
        self._S = S
        self._Sigma = Sigma
        self._block_ids = block_ids

    @classmethod
    def from_device(cls, device):
        """
        The closed form of a `~mesoed.devices.GaussianDeviceSpec`.

        The response map is ``S = dt * chi`` so that ``S @ A`` equals
        ``apply_kernel(chi, A)``.
        """
        if isinstance(device, AffineGaussianSpec):
            return device
        if not isinstance(device, GaussianDeviceSpec):
            raise TypeError(f"Expected a GaussianDeviceSpec, got {type(device).__name__}.")
        grid = device.grid
        return cls(
            grid,
            device.mu0.flat,
            grid.dt * device.chi.values,
            device.noise_cov,
            block_ids=[device.device_id],
        )

    @property
    def grid(self):
        """(`~mesoed.timegrid.TimeGrid`) The grid of each block."""
        return self._grid

    @property
    def mu0(self):
        """(`numpy.ndarray`) Mean current at zero external field."""
        return self._mu0

    @property
    def S(self):
        """(`numpy.ndarray`) Response of the mean current to the external field."""
        return self._S

    @property
    def Sigma(self):
        """(`numpy.ndarray`) Covariance of the stacked currents."""
        return self._Sigma

    @property
    def block_ids(self):
        """(`list`) Names of the stacked blocks."""
        return list(self._block_ids)

    @property
    def n_blocks(self):
        """(`int`) Number of stacked blocks."""
        return len(self._block_ids)

    def _field(self, A_e):
        if A_e is None:
            return np.zeros(self._grid.size)
        if hasattr(A_e, "grid"):
            self._grid.check_same(A_e.grid, "A_e")
            return A_e.flat
        return np.asarray(A_e, dtype=float).reshape(-1)

    def mean(self, A_e=None):
        """
        The mean current ``mu0 + S A_e``.

        Parameters
        ----------
        A_e : `~mesoed.timegrid.Trajectory` or array_like, optional
            External field, default zero.

        Returns
        -------
        mean : `numpy.ndarray`
        """
        return self._mu0 + self._S @ self._field(A_e)

    def characteristic(self, zeta, A_e=None):
        """
        The characteristic functional ``exp(i zeta.mean - zeta.Sigma.zeta / 2)``.

        Parameters
        ----------
        zeta : array_like
            Test function, same length as ``mu0``.
        A_e : `~mesoed.timegrid.Trajectory` or array_like, optional

        Returns
        -------
        value : `complex`
        """
        zeta = np.asarray(zeta, dtype=float).reshape(-1)
        return complex(np.exp(1j * zeta @ self.mean(A_e) - 0.5 * zeta @ self._Sigma @ zeta))

    def block(self, index):
        """
        The marginal description of one block.

        Parameters
        ----------
        index : `int` or `str`
            Block position or block id.

        Returns
        -------
        spec : `AffineGaussianSpec`
        """
        if isinstance(index, str):
            index = self._block_ids.index(index)
        size = self._grid.size
        window = slice(index * size, (index + 1) * size)
        return AffineGaussianSpec(
            self._grid,
            self._mu0[window],
            self._S[window],
            self._Sigma[window, window],
            block_ids=[self._block_ids[index]],
        )

    def __repr__(self):
        return f"AffineGaussianSpec(blocks={self._block_ids!r}, grid={self._grid!r})"


def _strict_propagator(G, grid):
    grid.check_same(G.grid, "G")
    if not G.strict:
        raise ValueError("Gaussian dressing needs a strict propagator.")


def _time_major_order(grid, n_blocks):
    index = np.arange(n_blocks * grid.size)
    block, position = np.divmod(index, grid.size)
    step, mode = np.divmod(position, grid.n_modes)
    return np.lexsort((mode, block, step))


def _causal_solve(system, rhs, order):
    """Solve ``system @ x = rhs`` where ``system[order][:, order]`` is unit lower triangular."""
    reordered = system[np.ix_(order, order)]
    solution = solve_triangular(reordered, rhs[order], lower=True, unit_diagonal=True)
    out = np.empty_like(solution)
    out[order] = solution
    return out


def _dress_stack(specs, G):
    grid = specs[0].grid
    _strict_propagator(G, grid)
    size = grid.size
    n_blocks = len(specs)
    response = np.zeros((n_blocks * size, n_blocks * size))
    noise = np.zeros((n_blocks * size, n_blocks * size))
    for k, spec in enumerate(specs):
        grid.check_same(spec.grid, f"spec {k}")
        if spec.n_blocks != 1:
            raise ValueError("Only single-block specs can be composed.")
        window = slice(k * size, (k + 1) * size)
        response[window, window] = spec.S
        noise[window, window] = spec.Sigma
    summing = np.tile(np.eye(size), (1, n_blocks))
    feedback = summing.T @ (grid.dt * G.values) @ summing
    system = np.eye(n_blocks * size) - response @ feedback
    order = _time_major_order(grid, n_blocks)

    mu0 = _causal_solve(system, np.concatenate([spec.mu0 for spec in specs]), order)
    S = _causal_solve(system, response @ summing.T, order)
    half = _causal_solve(system, noise, order)
    Sigma = _causal_solve(system, half.T, order)
    Sigma = 0.5 * (Sigma + Sigma.T)
    block_ids = [spec.block_ids[0] for spec in specs]
    return AffineGaussianSpec(grid, mu0, S, Sigma, block_ids=block_ids)


def gaussian_dress(spec, G):
    """
    Dress an affine Gaussian device with its own radiated field.

    With ``M = I - S (dt G)`` the dressed description is
    ``mu0' = M^-1 mu0``, ``S' = M^-1 S`` and ``Sigma' = M^-1 Sigma M^-T``.

    Parameters
    ----------
    spec : `AffineGaussianSpec` or `~mesoed.devices.GaussianDeviceSpec`
    G : `~mesoed.timegrid.CausalKernel`
        Strict retarded propagator.

    Returns
    -------
    dressed : `AffineGaussianSpec`

    Raises
    ------
    ValueError: If ``G`` is not strict.
    """
    return _dress_stack([AffineGaussianSpec.from_device(spec)], G)


def gaussian_compose(specs, G):
    """
    Compose Gaussian devices through a shared radiated field.

    Solves ``J_k = mu0_k + S_k (A_e + dt G sum_l J_l) + xi_k`` for the joint
    distribution of all device currents.

    Parameters
    ----------
    specs : `list` of `AffineGaussianSpec` or `~mesoed.devices.GaussianDeviceSpec`
    G : `~mesoed.timegrid.CausalKernel`
        Strict retarded propagator.

    Returns
    -------
    joint : `AffineGaussianSpec`
        One block per device, in the given order.
    """
    if not specs:
        raise ValueError("At least one device is required.")
    return _dress_stack([AffineGaussianSpec.from_device(spec) for spec in specs], G)


def marginal_total(joint):
    """
    The distribution of the summed current of a joint description.

    Parameters
    ----------
    joint : `AffineGaussianSpec`

    Returns
    -------
    total : `AffineGaussianSpec`
    """
    size = joint.grid.size
    summing = np.tile(np.eye(size), (1, joint.n_blocks))
    return AffineGaussianSpec(
        joint.grid,
        summing @ joint.mu0,
        summing @ joint.S,
        summing @ joint.Sigma @ summing.T,
    )


def sum_bare(specs):
    """
    The bare composition of independent Gaussian devices seeing the same field.

    Means, responses and covariances add.
    """
    specs = [AffineGaussianSpec.from_device(spec) for spec in specs]
    if not specs:
        raise ValueError("At least one device is required.")
    grid = specs[0].grid
    for k, spec in enumerate(specs):
        grid.check_same(spec.grid, f"spec {k}")
        if spec.n_blocks != 1:
            raise ValueError("Only single-block specs can be summed.")
    return AffineGaussianSpec(
        grid,
        sum(spec.mu0 for spec in specs),
        sum(spec.S for spec in specs),
        sum(spec.Sigma for spec in specs),
        block_ids=["+".join(spec.block_ids[0] for spec in specs)],
    )


def linear_medium_equivalence(spec, Pi, G, A_e=None):
    """
    Compare an explicit passive medium with its absorption into the propagator.

    The device is composed explicitly with a noiseless medium whose current is
    ``Pi A_loc``. Alternatively the medium is absorbed into ``G' =
    dyson_absorb(G, Pi)``, the external field is screened by the medium, and
    the device is dressed with ``G'`` alone. Both must describe the device
    current identically.

    Parameters
    ----------
    spec : `AffineGaussianSpec` or `~mesoed.devices.GaussianDeviceSpec`
    Pi : `~mesoed.timegrid.CausalKernel`
        Strict polarisation kernel of the medium.
    G : `~mesoed.timegrid.CausalKernel`
        Strict free propagator.
    A_e : `~mesoed.timegrid.Trajectory` or array_like, optional
        External field used for the mean comparison.

    Returns
    -------
    deviation : `float`
        Largest absolute difference in mean, response and covariance.
    """
    spec = AffineGaussianSpec.from_device(spec)
    grid = spec.grid
    size = grid.size
    medium = AffineGaussianSpec(
        grid, np.zeros(size), grid.dt * Pi.values, np.zeros((size, size)), block_ids=["medium"]
    )
    explicit = gaussian_compose([spec, medium], G).block(0)

    absorbed = gaussian_dress(spec, dyson_absorb(G, Pi))
    # the medium screens the external field: A -> (I - dt G dt Pi)^-1 A
    screening = np.eye(size) - (grid.dt * G.values) @ (grid.dt * Pi.values)
    screened_response = solve_triangular(
        screening.T, absorbed.S.T, lower=False, unit_diagonal=True
    ).T
    field = explicit._field(A_e)
    screened_field = solve_triangular(screening, field, lower=True, unit_diagonal=True)

    deviations = [
        np.max(np.abs(explicit.mean(field) - absorbed.mean(screened_field))),
        np.max(np.abs(explicit.S - screened_response)),
        np.max(np.abs(explicit.Sigma - absorbed.Sigma)),
    ]
    return float(max(deviations))
