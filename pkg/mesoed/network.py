"""
Networks of devices coupled through the shared field.

All devices of a network see the same local field, the external field plus
the field radiated by every device. A single time loop advances all devices
together; at step ``n`` the radiated field depends on currents at steps
before ``n`` only, so each step is an explicit update.

Besides the simulation loop this module checks the structural identities of
composition: dressing the two halves of a network reproduces the network,
composition is associative, responses are retarded and no device reacts to
the future of the external field.
"""
import numpy as np

from mesoed import log
from mesoed.devices import (
    BareDevice,
    DeviceSampler,
    LocalField,
    draw_bare,
    estimate_moments,
)
from mesoed.dressing import dress
from mesoed.gaussian import AffineGaussianSpec, gaussian_compose, marginal_total, sum_bare
from mesoed.timegrid import Trajectory
from mesoed.util.config import get_thread_count
from mesoed.util.exceptions import warn_accuracy
from mesoed.util.util import (
    RandomStreams,
    get_numeric,
    map_chunks,
    max_standard_errors,
    replication_chunks,
)

__all__ = [
    "ComposedDevice",
    "NetworkSpec",
    "NetworkSamples",
    "CommutationReport",
    "SusceptibilityResult",
    "AuditResult",
    "compose_bare",
    "simulate_network",
    "compose_dressed_commutation",
    "associativity_check",
    "susceptibility",
    "causality_audit",
]


# ================================================================================================
#                                   BARE COMPOSITION
# ================================================================================================


class ComposedSampler(DeviceSampler):
    """Batch sampler of a `ComposedDevice`."""

    def __init__(self, device, streams, replications):
        replications = list(replications)
        super().__init__(len(replications))
        self._samplers = [component.sampler(streams, replications) for component in device.components]

    def step(self, n, field):
        parts = [sampler.step(n, field) for sampler in self._samplers]
        total = np.array(parts[0], dtype=float)
        for part in parts[1:]:
            total += part
        return total


class ComposedDevice(BareDevice):
    """
    Independent devices seeing the same local field, emitting the sum of their currents.

    Nested compositions are flattened, so composing ``[A, B]`` and then
    ``C`` gives the same device as composing ``[A, B, C]``. Components keep
    their own ids and random streams.

    Parameters
    ----------
    devices : `list` of `~mesoed.devices.BareDevice`
    device_id : `str`, optional
        Defaults to the component ids joined with ``+``.
    """

    kind = "composed"

    def __init__(self, devices, device_id=None):
        components = []
        for device in devices:
            if not isinstance(device, BareDevice):
                raise TypeError(f"Expected a BareDevice, got {type(device).__name__}.")
            components.extend(device.components)
        if not components:
            raise ValueError("At least one device is required.")
        grid = components[0].grid
        for component in components:
            grid.check_same(component.grid, f"device {component.device_id!r}")
        _check_unique_ids(components)
        if device_id is None:
            device_id = "+".join(component.device_id for component in components)
        super().__init__(grid, device_id)
        self._components = tuple(components)

    @property
    def components(self):
        return self._components

    @property
    def field_sensitive(self):
        return any(component.field_sensitive for component in self._components)

    @property
    def same_time_response(self):
        return any(component.same_time_response for component in self._components)

    @property
    def emission_modes(self):
        modes = set()
        for component in self._components:
            modes.update(component.emission_modes)
        return tuple(sorted(modes))

    def sampler(self, streams, replications):
        return ComposedSampler(self, streams, replications)


def _check_unique_ids(components):
    seen = set()
    for component in components:
        if component.device_id in seen:
            raise ValueError(f"Device id {component.device_id!r} is used more than once.")
        seen.add(component.device_id)


def compose_bare(devices, device_id=None):
    """
    Compose devices that share a local field without coupling them.

    Parameters
    ----------
    devices : `list` of `~mesoed.devices.BareDevice`
    device_id : `str`, optional

    Returns
    -------
    device : `ComposedDevice`
    """
    return ComposedDevice(devices, device_id=device_id)


# ================================================================================================
#                                   NETWORK SIMULATION
# ================================================================================================


class NetworkSpec:
    """
    Devices coupled through a retarded propagator.

    Parameters
    ----------
    devices : `list` of `~mesoed.devices.BareDevice`
    G : `~mesoed.timegrid.CausalKernel`
        Strict retarded propagator.
    A_e : `~mesoed.timegrid.Trajectory`, optional
        External field, default zero.
    n_reps : `int`, optional
        Number of replications, default 1.
    seed : `int`, optional
        Global seed of the random streams, default 0.
    """

    def __init__(self, devices, G, A_e=None, n_reps=1, seed=0):
        devices = list(devices)
        if not devices:
            raise ValueError("A network needs at least one device.")
        grid = G.grid
        if not G.strict:
            raise ValueError("The network propagator must be strict.")
        components = []
        for device in devices:
            if not isinstance(device, BareDevice):
                raise TypeError(f"Expected a BareDevice, got {type(device).__name__}.")
            grid.check_same(device.grid, f"device {device.device_id!r}")
            components.extend(device.components)
        _check_unique_ids(components)
        if A_e is None:
            A_e = Trajectory.zeros(grid)
        grid.check_same(A_e.grid, "A_e")
        if int(n_reps) < 1:
            raise ValueError(f"n_reps must be positive, got {n_reps}.")
        self._devices = devices
        self._G = G
        self._A_e = A_e
        self._n_reps = int(n_reps)
        self._seed = int(seed)

    @property
    def devices(self):
        """(`list`) The devices of the network."""
        return list(self._devices)

    @property
    def device_ids(self):
        """(`list`) Ids of the devices, in order."""
        return [device.device_id for device in self._devices]

    @property
    def G(self):
        """(`~mesoed.timegrid.CausalKernel`) The retarded propagator."""
        return self._G

    @property
    def A_e(self):
        """(`~mesoed.timegrid.Trajectory`) The external field."""
        return self._A_e

    @property
    def grid(self):
        """(`~mesoed.timegrid.TimeGrid`) The grid of the network."""
        return self._G.grid

    @property
    def n_reps(self):
        """(`int`) Number of replications."""
        return self._n_reps

    @property
    def seed(self):
        """(`int`) Global seed."""
        return self._seed

    @property
    def same_time_response(self):
        """(`bool`) Whether any device reacts to the field at the same step."""
        return any(device.same_time_response for device in self._devices)

    def replace(self, devices=None, A_e=None, n_reps=None, seed=None):
        """Return a copy with some of the attributes replaced."""
        return NetworkSpec(
            self._devices if devices is None else devices,
            self._G,
            A_e=self._A_e if A_e is None else A_e,
            n_reps=self._n_reps if n_reps is None else n_reps,
            seed=self._seed if seed is None else seed,
        )

    def __repr__(self):
        return f"NetworkSpec(devices={self.device_ids!r}, n_reps={self._n_reps}, seed={self._seed})"


class NetworkSamples:
    """
    Joint samples of a network run.

    Attributes
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    currents : `dict`
        Device id to current samples of shape ``(n_reps, n_steps, n_modes)``.
    total : `numpy.ndarray`
        Summed current of all devices.
    field : `numpy.ndarray`
        Field radiated by the summed current.
    """

    def __init__(self, grid, currents, total, field):
        self.grid = grid
        self.currents = currents
        self.total = total
        self.field = field

    @property
    def n_reps(self):
        """(`int`) Number of replications."""
        return self.total.shape[0]

    def report(self, kind="total", central=True):
        """
        Moments of one of the sampled quantities.

        Parameters
        ----------
        kind : `str`
            ``"total"``, ``"field"`` or a device id.
        central : `bool`, optional

        Returns
        -------
        report : `~mesoed.devices.MomentReport`
        """
        if kind == "total":
            samples = self.total
        elif kind == "field":
            samples = self.field
        elif kind in self.currents:
            samples = self.currents[kind]
        else:
            raise KeyError(f"Unknown quantity {kind!r}; expected 'total', 'field' or a device id.")
        return estimate_moments(samples, grid=self.grid, central=central)

    def mixed_moment(self):
        """
        Raw mixed moments ``<J(i) A(j)>`` of the summed current and the radiated field.

        Returns
        -------
        moments : `numpy.ndarray`
            ``(size, size)`` matrix indexed by flattened current and field positions.
        """
        current = self.total.reshape(self.n_reps, -1)
        field = self.field.reshape(self.n_reps, -1)
        return current.T @ field / self.n_reps


def _network_chunk(devices, G, field_values, streams, chunk):
    grid = G.grid
    shape = (len(chunk),) + grid.shape
    samplers = [device.sampler(streams, chunk) for device in devices]
    currents = [np.zeros(shape) for _ in devices]
    radiated = [np.zeros(shape) for _ in devices]
    field = LocalField(grid, len(chunk), [field_values] + radiated)
    for n in range(grid.n_steps):
        for current, part in zip(currents, radiated):
            part[:, n] = G.row_apply(n, current)
        field.resolve(n)
        for sampler, current in zip(samplers, currents):
            current[:, n] = sampler.step(n, field)
    return currents


def _run_chunks(func, net, threads, chunk_size):
    chunks = replication_chunks(net.n_reps, chunk_size)
    results = map_chunks(func, chunks, threads=get_thread_count(threads))
    n_devices = len(results[0])
    return [np.concatenate([result[k] for result in results]) for k in range(n_devices)]


def _total(currents):
    total = currents[0].copy()
    for current in currents[1:]:
        total += current
    return total


def simulate_network(net, threads=None, chunk_size=None):
    """
    Run a network of devices coupled through the shared field.

    At each step the field radiated by every device is updated from its
    past currents, the local field is resolved and every device draws its
    current.

    Parameters
    ----------
    net : `NetworkSpec`
    threads : `int`, optional
        Worker threads. Defaults to ``MESOED_THREADS`` or the configuration.
    chunk_size : `int`, optional
        Replications per batch.

    Returns
    -------
    samples : `NetworkSamples`
    """
    streams = RandomStreams(net.seed)
    log.debug(f"Simulating {net!r} on {net.grid!r}")

    def run(chunk):
        return _network_chunk(net.devices, net.G, net.A_e.values, streams, chunk)

    currents = _run_chunks(run, net, threads, chunk_size)
    total = _total(currents)
    return NetworkSamples(
        net.grid,
        dict(zip(net.device_ids, currents)),
        total,
        net.G.apply(total),
    )


# ================================================================================================
#                                   COMPOSITION IDENTITIES
# ================================================================================================


class CommutationReport:
    """
    Outcome of comparing a two-device network with its dressed halves.

    Attributes
    ----------
    identical : `bool`
        Whether every current is bit-identical.
    max_deviation : `float`
    n_reps : `int`
    """

    def __init__(self, identical, max_deviation, n_reps):
        self.identical = identical
        self.max_deviation = max_deviation
        self.n_reps = n_reps

    def __bool__(self):
        return self.identical

    def __repr__(self):
        return f"CommutationReport(identical={self.identical}, max_deviation={self.max_deviation!r})"


def _dressed_pair_chunk(devices, G, field_values, streams, chunk):
    grid = G.grid
    shape = (len(chunk),) + grid.shape
    samplers = [dress(device, G).sampler(streams, chunk) for device in devices]
    currents = [np.zeros(shape), np.zeros(shape)]
    radiated = [np.zeros(shape), np.zeros(shape)]
    # each dressed device sees the external field plus the other device's radiation
    fields = [
        LocalField(grid, len(chunk), [field_values, radiated[1]]),
        LocalField(grid, len(chunk), [field_values, radiated[0]]),
    ]
    for n in range(grid.n_steps):
        for current, part in zip(currents, radiated):
            part[:, n] = G.row_apply(n, current)
        for field in fields:
            field.resolve(n)
        for sampler, field, current in zip(samplers, fields, currents):
            current[:, n] = sampler.step(n, field)
    return currents


def compose_dressed_commutation(net, threads=None, chunk_size=None):
    """
    Check that dressing the halves of a two-device network reproduces it.

    The network is run once as bare devices sharing the total radiated
    field, and once as two dressed devices, each fed the external field plus
    the field radiated by the other. Both runs use the same random streams.

    Parameters
    ----------
    net : `NetworkSpec`
        A network with exactly two devices.

    Returns
    -------
    report : `CommutationReport`
    """
    if len(net.devices) != 2:
        raise ValueError(f"The commutation check needs exactly 2 devices, got {len(net.devices)}.")
    network = simulate_network(net, threads=threads, chunk_size=chunk_size)
    streams = RandomStreams(net.seed)

    def run(chunk):
        return _dressed_pair_chunk(net.devices, net.G, net.A_e.values, streams, chunk)

    dressed = _run_chunks(run, net, threads, chunk_size)
    bare = [network.currents[device_id] for device_id in net.device_ids]
    identical = all(np.array_equal(a, b) for a, b in zip(bare, dressed))
    deviation = max(float(np.max(np.abs(a - b))) for a, b in zip(bare, dressed))
    return CommutationReport(identical, deviation, net.n_reps)


def associativity_check(devices, G, A_e=None, engine="gaussian", n_reps=1000, seed=0):
    """
    Compare the network ``{A, B, C}`` with ``{compose_bare([A, B]), C}``.

    Parameters
    ----------
    devices : `list`
        Three devices. `~mesoed.gaussian.AffineGaussianSpec` or
        `~mesoed.devices.GaussianDeviceSpec` for the Gaussian engine, any
        `~mesoed.devices.BareDevice` for the Monte Carlo engine.
    G : `~mesoed.timegrid.CausalKernel`
    A_e : `~mesoed.timegrid.Trajectory`, optional
    engine : `str`, optional
        ``"gaussian"`` (closed form) or ``"mc"`` (sampling).
    n_reps, seed : `int`, optional
        Monte Carlo settings.

    Returns
    -------
    deviation : `float`
        Gaussian engine: largest absolute difference of mean, response and
        covariance of the total current. Monte Carlo engine: largest
        difference of mean and covariance entries in units of their
        combined standard error.
    """
    if len(devices) != 3:
        raise ValueError(f"The associativity check needs 3 devices, got {len(devices)}.")
    first, second, third = devices
    if engine == "gaussian":
        flat = marginal_total(gaussian_compose([first, second, third], G))
        nested = marginal_total(gaussian_compose([sum_bare([first, second]), third], G))
        field = None if A_e is None else A_e.flat
        return float(
            max(
                np.max(np.abs(flat.mean(field) - nested.mean(field))),
                np.max(np.abs(flat.S - nested.S)),
                np.max(np.abs(flat.Sigma - nested.Sigma)),
            )
        )
    if engine == "mc":
        flat = NetworkSpec([first, second, third], G, A_e=A_e, n_reps=n_reps, seed=seed)
        nested = flat.replace(devices=[compose_bare([first, second]), third])
        a = simulate_network(flat).report("total")
        b = simulate_network(nested).report("total")
        return max(
            max_standard_errors(
                a.mean.values - b.mean.values, np.hypot(a.mean_std_err, b.mean_std_err), atol=1e-9
            ),
            max_standard_errors(a.cov - b.cov, np.hypot(a.cov_std_err, b.cov_std_err), atol=1e-9),
        )
    raise ValueError(f"Unknown engine {engine!r}; expected 'gaussian' or 'mc'.")


# ================================================================================================
#                                   SUSCEPTIBILITIES
# ================================================================================================


class SusceptibilityResult:
    """
    Finite-difference functional derivatives of current moments.

    Attributes
    ----------
    values : `numpy.ndarray`
        For order ``(1, n)`` the shape is ``(n_responses,) + (n_probes,) * n``,
        for order ``(2, n)`` it is ``(n_responses, n_responses) + (n_probes,) * n``.
    order : `tuple`
        ``(moment order, derivative order)``.
    responses : `list` of `tuple`
        ``(step, mode)`` of the current factors.
    probes : `list` of `tuple`
        ``(step, mode)`` of the field perturbations.
    h : `float`
        Finite-difference step.
    richardson_deviation : `float`
        Largest difference between the derivatives at ``h`` and ``2 h``.
    """

    def __init__(self, values, order, responses, probes, h, richardson_deviation):
        self.values = values
        self.order = order
        self.responses = responses
        self.probes = probes
        self.h = h
        self.richardson_deviation = richardson_deviation

    def __repr__(self):
        return f"SusceptibilityResult(order={self.order}, shape={self.values.shape}, h={self.h!r})"


def _moment_function(target, moment_order, grid, n_reps, seed, threads):
    if isinstance(target, AffineGaussianSpec):
        spec = target if target.n_blocks == 1 else marginal_total(target)

        def moments(field):
            mean = spec.mean(field.reshape(-1))
            if moment_order == 1:
                return mean
            return spec.Sigma + np.outer(mean, mean)

        return moments

    if isinstance(target, NetworkSpec):
        def sample(field):
            spec = target.replace(A_e=Trajectory(grid, field), n_reps=n_reps, seed=seed)
            return simulate_network(spec, threads=threads).total
    else:
        streams = RandomStreams(0 if seed is None else seed)
        replications = 1000 if n_reps is None else n_reps

        def sample(field):
            return draw_bare(target, field, streams, replications)

    def moments(field):
        samples = sample(field)
        flat = samples.reshape(samples.shape[0], -1)
        if moment_order == 1:
            return flat.mean(axis=0)
        return flat.T @ flat / flat.shape[0]

    return moments


def _difference(moments, base, flat_probes, h, derivative_order):
    n_probes = len(flat_probes)

    def shifted(*shifts):
        field = base.copy()
        for index, amount in shifts:
            field[index] += amount
        return moments(field.reshape(base.shape))

    if derivative_order == 1:
        columns = [
            (shifted((p, h)) - shifted((p, -h))) / (2 * h) for p in flat_probes
        ]
        return np.stack(columns, axis=-1)
    out = None
    for i, p in enumerate(flat_probes):
        for j, q in enumerate(flat_probes):
            value = (
                shifted((p, h), (q, h))
                - shifted((p, h), (q, -h))
                - shifted((p, -h), (q, h))
                + shifted((p, -h), (q, -h))
            ) / (4 * h * h)
            if out is None:
                out = np.zeros(value.shape + (n_probes, n_probes))
            out[..., i, j] = value
    return out


def susceptibility(
    target,
    A_e=None,
    order=(1, 1),
    probes=None,
    responses=None,
    h=None,
    n_reps=None,
    seed=None,
    threads=None,
):
    """
    Generalised susceptibilities by central finite differences.

    Computes ``d^n <J(t'_1) ... J(t'_m)> / dA_e(t_1) ... dA_e(t_n)`` around
    the given external field, divided by ``dt**n`` so that the result is a
    functional derivative. Sampled targets use common random numbers for
    every perturbed run. The derivative is repeated with step ``2 h``; a
    disagreement larger than ``[numerics] richardson_rtol`` issues a
    `~mesoed.util.exceptions.NumericalAccuracyWarning`.

    Parameters
    ----------
    target : `~mesoed.devices.BareDevice`, `NetworkSpec` or `~mesoed.gaussian.AffineGaussianSpec`
    A_e : `~mesoed.timegrid.Trajectory`, optional
        The field around which to differentiate, default zero.
    order : `tuple`, optional
        ``(m, n)`` with ``m`` current factors and ``n`` field derivatives,
        each 1 or 2. Default ``(1, 1)``.
    probes : `list` of `tuple`, optional
        ``(step, mode)`` positions of the field derivatives, default all.
    responses : `list` of `tuple`, optional
        ``(step, mode)`` positions of the current factors, default all.
    h : `float`, optional
        Finite-difference step, default ``fd_relative_step * max(1, max|A_e|)``.
    n_reps, seed : `int`, optional
        Sampling settings for sampled targets. A `NetworkSpec` falls back to
        its own settings, a bare device to 1000 replications and seed 0.
    threads : `int`, optional

    Returns
    -------
    result : `SusceptibilityResult`
    """
    moment_order, derivative_order = (int(value) for value in order)
    if moment_order not in (1, 2) or derivative_order not in (1, 2):
        raise ValueError(f"Supported orders are (1|2, 1|2), got {order}.")
    grid = target.grid
    base = np.zeros(grid.shape) if A_e is None else np.array(A_e.values, dtype=float)
    if h is None:
        h = get_numeric("fd_relative_step", 1e-4) * max(1.0, float(np.max(np.abs(base))))
    if h <= 0:
        raise ValueError(f"The finite-difference step must be positive, got {h}.")
    all_points = [(step, mode) for step in range(grid.n_steps) for mode in range(grid.n_modes)]
    probes = all_points if probes is None else [tuple(p) for p in probes]
    responses = all_points if responses is None else [tuple(r) for r in responses]
    flat_probes = [grid.flat_index(*p) for p in probes]
    flat_responses = [grid.flat_index(*r) for r in responses]

    moments = _moment_function(target, moment_order, grid, n_reps, seed, threads)
    scale = grid.dt**derivative_order

    def evaluate(step):
        values = _difference(moments, base, flat_probes, step, derivative_order) / scale
        if moment_order == 1:
            return values[flat_responses]
        return values[np.ix_(flat_responses, flat_responses)]

    values = evaluate(h)
    coarse = evaluate(2 * h)
    deviation = float(np.max(np.abs(values - coarse)))
    rtol = get_numeric("richardson_rtol", 1e-3)
    if deviation > rtol * max(1.0, float(np.max(np.abs(values)))):
        warn_accuracy(
            f"Finite differences at h={h:.3e} and 2h disagree by {deviation:.3e}; "
            "the derivative may be dominated by noise."
        )
    return SusceptibilityResult(values, (moment_order, derivative_order), responses, probes, h, deviation)


# ================================================================================================
#                                   CAUSALITY AUDIT
# ================================================================================================


class AuditResult:
    """
    Outcome of a causality audit.

    Attributes
    ----------
    passed : `bool`
    step : `int`
        The perturbed step.
    checked_steps : `int`
        Number of leading steps required to be bit-identical.
    max_deviation : `float`
        Largest change of any current within the checked steps.
    """

    def __init__(self, passed, step, checked_steps, max_deviation):
        self.passed = passed
        self.step = step
        self.checked_steps = checked_steps
        self.max_deviation = max_deviation

    def __bool__(self):
        return self.passed

    def __repr__(self):
        return f"AuditResult(passed={self.passed}, step={self.step}, max_deviation={self.max_deviation!r})"


def _audit_currents(target, field, n_reps, seed, threads):
    if isinstance(target, NetworkSpec):
        samples = simulate_network(
            target.replace(A_e=Trajectory(target.grid, field), n_reps=n_reps, seed=seed),
            threads=threads,
        )
        return np.stack([samples.currents[i] for i in target.device_ids] + [samples.total])
    return draw_bare(target, field, RandomStreams(seed), n_reps)[None]


def causality_audit(target, step, A_e=None, amplitude=1.0, mode=None, n_reps=16, seed=0, threads=None):
    """
    Perturb the external field at one step and check that the past is untouched.

    Both runs use the same random streams. Currents before ``step`` must be
    bit-identical; so must the current at ``step`` when no device responds
    to the field at the same step.

    Parameters
    ----------
    target : `~mesoed.devices.BareDevice` or `NetworkSpec`
    step : `int`
        The perturbed step.
    A_e : `~mesoed.timegrid.Trajectory`, optional
        Unperturbed external field, default zero (or the network's field).
    amplitude : `float`, optional
        Size of the perturbation, default 1.
    mode : `int`, optional
        Perturbed mode, default all modes.
    n_reps, seed : `int`, optional

    Returns
    -------
    result : `AuditResult`
    """
    grid = target.grid
    if not 0 <= step < grid.n_steps:
        raise ValueError(f"Step {step} out of range for {grid.n_steps} steps.")
    if A_e is None:
        A_e = target.A_e if isinstance(target, NetworkSpec) else Trajectory.zeros(grid)
    base = np.array(A_e.values, dtype=float)
    perturbed = base.copy()
    if mode is None:
        perturbed[step] += amplitude
    else:
        perturbed[step, mode] += amplitude

    before = _audit_currents(target, base, n_reps, seed, threads)
    after = _audit_currents(target, perturbed, n_reps, seed, threads)
    checked = step if target.same_time_response else step + 1
    passed = bool(np.array_equal(before[:, :, :checked], after[:, :, :checked]))
    deviation = float(np.max(np.abs(before[:, :, :checked] - after[:, :, :checked]))) if checked else 0.0
    if not passed:
        log.debug(f"Causality audit failed at step {step}: deviation {deviation:.3e}")
    return AuditResult(passed, step, checked, deviation)
