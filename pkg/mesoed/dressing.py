"""
Electromagnetic self-action.

A bare device responds to the local field, which includes the field it
radiates itself. Dressing turns ``p[J | A_loc]`` into ``p[J | A_e]`` with
``A_loc = A_e + G J``. A strict propagator lets the self-field at step ``n``
depend only on currents at earlier steps, so the dressed sampler advances
step by step without any fixed-point iteration.

The two scalar quadrature probes in this module show what goes wrong
without that delay: a same-time self-action leaves the conditional density
unnormalised, while a delayed one yields a normalised density that factors
into conditionals.
"""
import numpy as np
from scipy import integrate

from mesoed import log
from mesoed.devices import BareDevice, DeviceSampler
from mesoed.util.util import get_numeric

__all__ = [
    "DressedDevice",
    "DressedSampler",
    "TwoTimeReport",
    "dress",
    "normalization_probe_instantaneous",
    "two_time_causal_check",
]

# Half-width of the quadrature window in effective standard deviations
WINDOW_WIDTHS = 10.0


class DressedSampler(DeviceSampler):
    """
    Batch sampler of a `DressedDevice`.

    The sampler keeps the history of its own current and adds the field it
    radiated to whatever field it is handed.
    """

    def __init__(self, device, streams, replications):
        replications = list(replications)
        super().__init__(len(replications))
        grid = device.grid
        self._G = device.G
        self._bare = device.bare.sampler(streams, replications)
        self._history = np.zeros((self.n_reps,) + grid.shape)
        self._self_field = np.zeros((self.n_reps,) + grid.shape)
        self._source = None
        self._field = None

    def step(self, n, field):
        if field is not self._source:
            self._source = field
            self._field = field.extended(self._self_field)
        self._self_field[:, n] = self._G.row_apply(n, self._history)
        self._field.resolve(n)
        current = self._bare.step(n, self._field)
        self._history[:, n] = current
        return current


class DressedDevice(BareDevice):
    """
    A device conditioned on the external field, ``p[J | A_e] = p^I[J | A_e + G J]``.

    Use `dress` to construct one. The dressed device shares the id, and hence
    the random stream, of its bare device.

    Parameters
    ----------
    bare : `~mesoed.devices.BareDevice`
    G : `~mesoed.timegrid.CausalKernel`
        Strict retarded propagator.
    """

    kind = "dressed"

    def __init__(self, bare, G):
        if not isinstance(bare, BareDevice):
            raise TypeError(f"Expected a BareDevice, got {type(bare).__name__}.")
        bare.grid.check_same(G.grid, "G")
        if not G.strict:
            raise ValueError(
                "Dressing needs a strict propagator: same-time self-action leaves the "
                "dressed distribution unnormalised."
            )
        super().__init__(bare.grid, bare.device_id)
        self._bare = bare
        self._G = G

    @property
    def bare(self):
        """(`~mesoed.devices.BareDevice`) The undressed device."""
        return self._bare

    @property
    def G(self):
        """(`~mesoed.timegrid.CausalKernel`) The propagator of the self-field."""
        return self._G

    @property
    def field_sensitive(self):
        return self._bare.field_sensitive

    @property
    def same_time_response(self):
        return self._bare.same_time_response

    @property
    def emission_modes(self):
        return self._bare.emission_modes

    def sampler(self, streams, replications):
        return DressedSampler(self, streams, replications)


def dress(bare, G):
    """
    Dress a device with its own radiated field.

    Parameters
    ----------
    bare : `~mesoed.devices.BareDevice`
    G : `~mesoed.timegrid.CausalKernel`
        Strict retarded propagator.

    Returns
    -------
    dressed : `DressedDevice`

    Raises
    ------
    ValueError: If ``G`` allows same-time entries.
    """
    return DressedDevice(bare, G)


def _gaussian(x, mean, width):
    return np.exp(-((x - mean) ** 2) / (2 * width**2)) / (np.sqrt(2 * np.pi) * width)


def normalization_probe_instantaneous(chi, g, J0, A_e=0.0):
    """
    Integrate the dressed density of a current with same-time self-action.

    With ``A_loc = A_e + g J`` acting on the same current, the dressed density
    ``exp(-(J - chi g J - chi A_e)**2 / 2 J0**2) / (sqrt(2 pi) J0)``
    integrates to ``1 / (1 - chi g)`` instead of one.

    Parameters
    ----------
    chi : `float`
        Response of the current to the field.
    g : `float`
        Same-time propagator value.
    J0 : `float`
        Noise amplitude of the bare current, positive.
    A_e : `float`, optional
        External field.

    Returns
    -------
    normalization : `float`

    Raises
    ------
    ValueError: If ``|chi g| >= 1`` or ``J0 <= 0``.
    """
    if J0 <= 0:
        raise ValueError(f"J0 must be positive, got {J0}.")
    loop = chi * g
    if abs(loop) >= 1:
        raise ValueError(f"The probe diverges for |chi * g| >= 1, got chi * g = {loop}.")
    tolerance = get_numeric("quadrature_tolerance", 1e-8)
    peak = chi * A_e / (1 - loop)
    width = J0 / abs(1 - loop)

    def density(J):
        return _gaussian(J - loop * J, chi * A_e, J0)

    value, error = integrate.quad(
        density,
        peak - WINDOW_WIDTHS * width,
        peak + WINDOW_WIDTHS * width,
        epsabs=tolerance * 1e-2,
        epsrel=1e-10,
        limit=200,
    )
    log.debug(f"Instantaneous probe chi*g={loop}: {value} (quadrature error {error:.1e})")
    return value


class TwoTimeReport:
    """
    Quadrature results for a pair of currents with delayed self-action.

    Attributes
    ----------
    normalization : `float`
        Integral of the joint density, one for a causal interaction.
    factorization_residual : `float`
        Largest difference between the joint density and the product of the
        conditional densities on the evaluation grid.
    later_mean : `float`
    later_variance : `float`
    covariance : `float`
        Covariance between the later and the earlier current.
    """

    def __init__(self, normalization, factorization_residual, later_mean, later_variance, covariance):
        self.normalization = normalization
        self.factorization_residual = factorization_residual
        self.later_mean = later_mean
        self.later_variance = later_variance
        self.covariance = covariance

    def __repr__(self):
        return (
            f"TwoTimeReport(normalization={self.normalization!r}, "
            f"factorization_residual={self.factorization_residual!r})"
        )


def two_time_causal_check(chi, g, J0, A_e=0.0, A_e_earlier=0.0, grid_points=50):
    """
    Integrate the dressed density of two currents with delayed self-action.

    The earlier current ``J'`` sees ``A_e'`` only, the later one sees
    ``A_e + g J'``. The joint density is normalised and equals
    ``p(J | A_e, J') p'(J' | A_e')``.

    Parameters
    ----------
    chi, g, J0 : `float`
        Response, delayed propagator value and noise amplitude.
    A_e : `float`, optional
        External field at the later time.
    A_e_earlier : `float`, optional
        External field at the earlier time.
    grid_points : `int`, optional
        Points per axis of the factorization check, default 50.

    Returns
    -------
    report : `TwoTimeReport`
    """
    if J0 <= 0:
        raise ValueError(f"J0 must be positive, got {J0}.")
    tolerance = get_numeric("quadrature_tolerance", 1e-8)
    earlier_mean = chi * A_e_earlier

    def joint(J, J_earlier):
        later = J - chi * g * J_earlier - chi * A_e
        earlier = J_earlier - earlier_mean
        return np.exp(-(later**2 + earlier**2) / (2 * J0**2)) / (2 * np.pi * J0**2)

    def conditional_later(J, J_earlier):
        return _gaussian(J, chi * g * J_earlier + chi * A_e, J0)

    def marginal_earlier(J_earlier):
        return _gaussian(J_earlier, earlier_mean, J0)

    earlier_lo = earlier_mean - WINDOW_WIDTHS * J0
    earlier_hi = earlier_mean + WINDOW_WIDTHS * J0

    def later_lo(J_earlier):
        return chi * (g * J_earlier + A_e) - WINDOW_WIDTHS * J0

    def later_hi(J_earlier):
        return chi * (g * J_earlier + A_e) + WINDOW_WIDTHS * J0

    def moment(weight):
        # dblquad integrates func(inner, outer); the later current is inner
        value, _ = integrate.dblquad(
            lambda J, J_earlier: weight(J, J_earlier) * joint(J, J_earlier),
            earlier_lo,
            earlier_hi,
            later_lo,
            later_hi,
            epsabs=tolerance * 1e-2,
            epsrel=1e-10,
        )
        return value

    normalization = moment(lambda J, J_earlier: 1.0)
    later_mean = moment(lambda J, J_earlier: J)
    later_second = moment(lambda J, J_earlier: J * J)
    cross = moment(lambda J, J_earlier: J * J_earlier)
    later_variance = later_second - later_mean**2
    covariance = cross - later_mean * earlier_mean

    J_earlier_axis = np.linspace(earlier_lo, earlier_hi, grid_points)
    centre = chi * A_e + chi * g * earlier_mean
    spread = WINDOW_WIDTHS * J0 * np.sqrt(1 + (chi * g) ** 2)
    J_axis = np.linspace(centre - spread, centre + spread, grid_points)
    later, earlier = np.meshgrid(J_axis, J_earlier_axis, indexing="ij")
    residual = np.max(
        np.abs(joint(later, earlier) - conditional_later(later, earlier) * marginal_earlier(earlier))
    )
    log.debug(f"Two-time check: normalization {normalization}, residual {residual:.1e}")
    return TwoTimeReport(normalization, float(residual), later_mean, later_variance, covariance)
