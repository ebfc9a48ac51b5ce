"""
Photodetection as a source-detector cascade.

A source radiates into an input mode; a detector reads the field in that
mode and emits its photocurrent into a separate output mode. The source does
not respond to the field and the propagator keeps the modes apart, so the
detector never acts back on what it detects. The cascade is a two-device
network and runs through `~mesoed.network.simulate_network`.
"""
import numpy as np

from mesoed import log
from mesoed.devices import BareDevice, PoissonDetectorSpec, estimate_moments
from mesoed.network import NetworkSpec, simulate_network
from mesoed.propagators import retarded_propagator, retarded_single_mode
from mesoed.timegrid import CausalKernel, Trajectory

__all__ = [
    "CascadeSpec",
    "CascadeResult",
    "cascade_kernel",
    "run_cascade",
    "detected_field_samples",
    "detected_field_report",
]


def cascade_kernel(grid, mode_in, mode_out):
    """
    The mode-diagonal propagator of a two-mode cascade.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
        A two-mode grid.
    mode_in, mode_out : `~mesoed.propagators.ModeSpec`
        The input (detected) and output (photocurrent) modes.

    Returns
    -------
    kernel : `~mesoed.timegrid.CausalKernel`
    """
    if grid.n_modes != 2:
        raise ValueError(f"A cascade kernel needs a two-mode grid, got {grid.n_modes} modes.")
    return retarded_propagator(grid, [mode_in, mode_out])


class CascadeSpec:
    """
    A field-insensitive source feeding a detector.

    Parameters
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
        Grid with at least two modes.
    source : `~mesoed.devices.BareDevice`
        Emits only in the input mode and ignores the field.
    detector : `~mesoed.devices.BareDevice`
        Emits only in the output mode, usually a
        `~mesoed.devices.PoissonDetectorSpec` reading the input mode.
    G_in : `~mesoed.timegrid.CausalKernel`
        Strict single-mode propagator of the input mode.
    G_out : `~mesoed.timegrid.CausalKernel`, optional
        Strict single-mode propagator of the output mode, default zero.
    input_mode, output_mode : `int`, optional
        Defaults 0 and 1.
    A_e : `~mesoed.timegrid.Trajectory`, optional
        External field, default zero.

    Raises
    ------
    ValueError: If the source responds to the field, a device emits into
        the wrong mode or a propagator is not strict.
    """

    def __init__(self, grid, source, detector, G_in, G_out=None, input_mode=0, output_mode=1, A_e=None):
        if grid.n_modes < 2:
            raise ValueError(f"A cascade needs at least two modes, got {grid.n_modes}.")
        for name, mode in (("input_mode", input_mode), ("output_mode", output_mode)):
            if not 0 <= mode < grid.n_modes:
                raise ValueError(f"{name} {mode} out of range for {grid.n_modes} modes.")
        if input_mode == output_mode:
            raise ValueError("The input and output modes must differ.")
        for name, device in (("source", source), ("detector", detector)):
            if not isinstance(device, BareDevice):
                raise TypeError(f"{name} must be a BareDevice, got {type(device).__name__}.")
            grid.check_same(device.grid, name)
        if source.field_sensitive:
            raise ValueError("The source must not respond to the field.")
        if set(source.emission_modes) - {input_mode}:
            raise ValueError(
                f"The source emits in modes {source.emission_modes}, only {input_mode} is allowed."
            )
        if set(detector.emission_modes) - {output_mode}:
            raise ValueError(
                f"The detector emits in modes {detector.emission_modes}, only {output_mode} is allowed."
            )
        if isinstance(detector, PoissonDetectorSpec) and detector.input_mode != input_mode:
            raise ValueError(
                f"The detector reads mode {detector.input_mode}, the cascade input is {input_mode}."
            )
        single = grid.with_modes(1)
        if G_out is None:
            G_out = CausalKernel.zeros(single)
        for name, kernel in (("G_in", G_in), ("G_out", G_out)):
            single.check_same(kernel.grid, name)
            if not kernel.strict:
                raise ValueError(f"{name} must be strict.")
        if A_e is None:
            A_e = Trajectory.zeros(grid)
        grid.check_same(A_e.grid, "A_e")
        self._grid = grid
        self._source = source
        self._detector = detector
        self._G_in = G_in
        self._G_out = G_out
        self._input_mode = int(input_mode)
        self._output_mode = int(output_mode)
        self._A_e = A_e

    @classmethod
    def from_modes(cls, grid, source, detector, mode_in, mode_out, A_e=None):
        """
        A cascade on a two-mode grid with free-mode propagators.

        Parameters
        ----------
        grid : `~mesoed.timegrid.TimeGrid`
        source, detector : `~mesoed.devices.BareDevice`
        mode_in, mode_out : `~mesoed.propagators.ModeSpec`
        A_e : `~mesoed.timegrid.Trajectory`, optional
        """
        single = grid.with_modes(1)
        return cls(
            grid,
            source,
            detector,
            retarded_single_mode(single, mode_in),
            retarded_single_mode(single, mode_out),
            A_e=A_e,
        )

    @property
    def grid(self):
        """(`~mesoed.timegrid.TimeGrid`) The cascade grid."""
        return self._grid

    @property
    def source(self):
        """(`~mesoed.devices.BareDevice`) The source."""
        return self._source

    @property
    def detector(self):
        """(`~mesoed.devices.BareDevice`) The detector."""
        return self._detector

    @property
    def input_mode(self):
        """(`int`) The detected mode."""
        return self._input_mode

    @property
    def output_mode(self):
        """(`int`) The photocurrent mode."""
        return self._output_mode

    @property
    def A_e(self):
        """(`~mesoed.timegrid.Trajectory`) The external field."""
        return self._A_e

    @property
    def G(self):
        """(`~mesoed.timegrid.CausalKernel`) The mode-diagonal propagator of the cascade."""
        single = self._grid.with_modes(1)
        kernels = [CausalKernel.zeros(single) for _ in range(self._grid.n_modes)]
        kernels[self._input_mode] = self._G_in
        kernels[self._output_mode] = self._G_out
        return CausalKernel.block_diagonal(self._grid, kernels)

    def network(self, n_reps, seed=0, with_detector=True):
        """
        The cascade as a network.

        Parameters
        ----------
        n_reps : `int`
        seed : `int`, optional
        with_detector : `bool`, optional
            Leave the detector out when False.

        Returns
        -------
        net : `~mesoed.network.NetworkSpec`
        """
        devices = [self._source, self._detector] if with_detector else [self._source]
        return NetworkSpec(devices, self.G, A_e=self._A_e, n_reps=n_reps, seed=seed)

    def __repr__(self):
        return (
            f"CascadeSpec(source={self._source.device_id!r}, detector={self._detector.device_id!r}, "
            f"input_mode={self._input_mode}, output_mode={self._output_mode})"
        )


class CascadeResult:
    """
    Photocurrent statistics of a cascade run.

    Attributes
    ----------
    photocurrent : `numpy.ndarray`
        Output-mode current, shape ``(n_reps, n_steps)``.
    detected_field : `numpy.ndarray`
        Input-mode local field seen by the detector, shape ``(n_reps, n_steps)``.
    charge : `numpy.ndarray`
        Total charge per replication.
    counts : `numpy.ndarray`
        Total photocounts per replication, ``charge / q``.
    report : `~mesoed.devices.MomentReport`
        Moments of the photocurrent.
    predicted_variance : `float` or None
        Count variance of a doubly stochastic Poisson process driven by the
        sampled detected field, ``E[L] + Var[L]`` with ``L`` the integrated
        rate. Only available for Poisson detectors.
    samples : `~mesoed.network.NetworkSamples`
    """

    def __init__(self, photocurrent, detected_field, charge, counts, report, predicted_variance, samples):
        self.photocurrent = photocurrent
        self.detected_field = detected_field
        self.charge = charge
        self.counts = counts
        self.report = report
        self.predicted_variance = predicted_variance
        self.samples = samples

    @property
    def n_reps(self):
        """(`int`) Number of replications."""
        return self.counts.shape[0]

    @property
    def mean_count(self):
        """(`float`) Mean number of counts per replication."""
        return float(np.mean(self.counts))

    @property
    def mean_count_std_err(self):
        """(`float`) Standard error of `mean_count`."""
        return float(np.std(self.counts, ddof=1) / np.sqrt(self.n_reps))

    @property
    def count_variance(self):
        """(`float`) Unbiased variance of the counts."""
        return float(np.var(self.counts, ddof=1))

    @property
    def fano_factor(self):
        """(`float`) ``count_variance / mean_count``; nan without counts."""
        mean = self.mean_count
        return self.count_variance / mean if mean > 0 else float("nan")

    def __repr__(self):
        return f"CascadeResult(n_reps={self.n_reps}, mean_count={self.mean_count!r})"


def _detected_field(spec, samples):
    source_current = samples.currents[spec.source.device_id]
    radiated = spec.G.apply(source_current)
    return spec.A_e.values[None, :, spec.input_mode] + radiated[:, :, spec.input_mode]


def run_cascade(spec, n_reps, seed=0, threads=None):
    """
    Run a source-detector cascade.

    Parameters
    ----------
    spec : `CascadeSpec`
    n_reps : `int`
    seed : `int`, optional
    threads : `int`, optional

    Returns
    -------
    result : `CascadeResult`
    """
    grid = spec.grid
    samples = simulate_network(spec.network(n_reps, seed), threads=threads)
    photocurrent = samples.currents[spec.detector.device_id][:, :, spec.output_mode]
    field = _detected_field(spec, samples)
    charge = photocurrent.sum(axis=1) * grid.dt
    detector = spec.detector
    quantum = getattr(detector, "charge", 1.0)
    counts = charge / quantum
    predicted = None
    if isinstance(detector, PoissonDetectorSpec):
        integrated = detector.rate(field).sum(axis=1) * grid.dt
        predicted = float(np.mean(integrated) + np.var(integrated, ddof=1))
    report = estimate_moments(photocurrent[:, :, None], grid=grid.with_modes(1))
    log.debug(f"Cascade {spec!r}: mean count {np.mean(counts):.4g} over {n_reps} replications")
    return CascadeResult(photocurrent, field, charge, counts, report, predicted, samples)


def detected_field_samples(spec, n_reps, seed=0, with_detector=False, threads=None):
    """
    Samples of the field in the input mode.

    Parameters
    ----------
    spec : `CascadeSpec`
    n_reps : `int`
    seed : `int`, optional
    with_detector : `bool`, optional
        Run the full cascade instead of the solitary source, default False.
    threads : `int`, optional

    Returns
    -------
    field : `numpy.ndarray`
        Shape ``(n_reps, n_steps)``.
    """
    samples = simulate_network(spec.network(n_reps, seed, with_detector=with_detector), threads=threads)
    return _detected_field(spec, samples)


def detected_field_report(spec, n_reps, seed=0, with_detector=False, threads=None):
    """
    Moments of the field in the input mode.

    Returns
    -------
    report : `~mesoed.devices.MomentReport`
        On the single-mode version of the cascade grid.
    """
    field = detected_field_samples(spec, n_reps, seed, with_detector=with_detector, threads=threads)
    return estimate_moments(field[:, :, None], grid=spec.grid.with_modes(1))
