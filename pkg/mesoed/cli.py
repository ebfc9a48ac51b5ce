"""
Command line scenario runner.

``mesoed run <scenario.json> --out <dir>`` validates a scenario, runs its
experiment and writes ``results.csv``, ``meta.json`` and, for causality
audits, ``verdicts.csv``. ``mesoed validate`` only checks a scenario and
``mesoed list-experiments`` lists the experiment kinds.

Exit codes: 0 on success, 2 for an invalid scenario or arguments, 3 when a
causality audit fails.
"""
import argparse
import json
import sys
import time
from collections import OrderedDict
from pathlib import Path

import numpy as np

import mesoed
from mesoed import log
from mesoed.devices import GaussianDeviceSpec, PoissonDetectorSpec, draw_bare, estimate_moments
from mesoed.dressing import dress, normalization_probe_instantaneous, two_time_causal_check
from mesoed.gaussian import gaussian_compose, gaussian_dress, marginal_total
from mesoed.network import (
    NetworkSpec,
    associativity_check,
    causality_audit,
    compose_dressed_commutation,
    simulate_network,
    susceptibility,
)
from mesoed.photodetection import CascadeSpec, run_cascade
from mesoed.propagators import ModeSpec, kubo_check, retarded_propagator
from mesoed.timegrid import CausalKernel, TimeGrid, Trajectory
from mesoed.timenormal import FockOracle, acausal_weight, pfunctional_match
from mesoed.util.config import get_thread_count
from mesoed.util.io import CSVResultsHandler, ResultsTable
from mesoed.util.schema import ScenarioSchema
from mesoed.util.util import RandomStreams, max_standard_errors
from mesoed.util.validation import validate_scenario

__all__ = ["main", "run", "Scenario", "build_scenario", "run_experiment", "EXPERIMENTS", "MANIFEST"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_AUDIT_FAILED = 3

EXPERIMENTS = OrderedDict(
    [
        ("dress", "Dress one device with its own radiated field and report current moments."),
        ("compose", "Run all devices as a network; check the dressed-pair construction for two devices."),
        ("detect", "Run a source-detector cascade and report photocount statistics."),
        ("audit-causality", "Perturb the external field at each step and check that the past is unchanged."),
        ("susceptibility", "Linear susceptibility of the network current by finite differences."),
        ("oracle-compare", "Compare sampled network moments of Gaussian devices with the closed form."),
        ("appendix-a", "Normalization of the dressed density with same-time and delayed self-action."),
        ("timenormal", "Time-normal moments of a free mode against a classical random field."),
    ]
)


def _entry(description, relation, reference):
    return {"description": description, "relation": relation, "reference": reference}


# Every quantity written to results.csv, the relation it checks and the
# operation that computes or defines it.
MANIFEST = {
    "dressed_mean": _entry(
        "Sample mean of the dressed current.",
        "<J>_dressed sampled with the self-field G J fed back causally",
        "mesoed.dressing.dress",
    ),
    "dressed_variance": _entry(
        "Sample variance of the dressed current.",
        "Var[J]_dressed sampled with the self-field G J fed back causally",
        "mesoed.dressing.dress",
    ),
    "closed_form_mean": _entry(
        "Mean of the dressed current from the Gaussian closed form.",
        "mu' = (I - S dtG)^-1 (mu0 + S A_e)",
        "mesoed.gaussian.gaussian_dress",
    ),
    "closed_form_variance": _entry(
        "Variance of the dressed current from the Gaussian closed form.",
        "Sigma' = M^-1 Sigma M^-T with M = I - S dtG",
        "mesoed.gaussian.gaussian_dress",
    ),
    "total_mean": _entry(
        "Sample mean of the summed network current.",
        "<J_1 + ... + J_N> with every device driven by A_e + G J",
        "mesoed.network.simulate_network",
    ),
    "total_variance": _entry(
        "Sample variance of the summed network current.",
        "Var[J_1 + ... + J_N] with every device driven by A_e + G J",
        "mesoed.network.simulate_network",
    ),
    "closed_form_total_mean": _entry(
        "Mean of the summed current from the Gaussian closed form.",
        "marginal of the jointly dressed stacked currents",
        "mesoed.gaussian.marginal_total",
    ),
    "closed_form_total_variance": _entry(
        "Variance of the summed current from the Gaussian closed form.",
        "marginal of the jointly dressed stacked currents",
        "mesoed.gaussian.marginal_total",
    ),
    "commutation_identical": _entry(
        "1 if the network and the dressed-pair loop give bit-identical currents.",
        "dress(A + B, G) = network of dress(A) and dress(B) coupled through G",
        "mesoed.network.compose_dressed_commutation",
    ),
    "commutation_max_deviation": _entry(
        "Largest difference between the network and the dressed-pair currents.",
        "dress(A + B, G) = network of dress(A) and dress(B) coupled through G",
        "mesoed.network.compose_dressed_commutation",
    ),
    "associativity_deviation": _entry(
        "Closed-form difference between networks {A, B, C} and {A+B, C}.",
        "dress(A + B + C) = dress((A + B) + C)",
        "mesoed.network.associativity_check",
    ),
    "mean_count": _entry(
        "Mean photocounts per replication.",
        "E[n] = E[integral of the detection rate]",
        "mesoed.photodetection.run_cascade",
    ),
    "count_variance": _entry(
        "Variance of the photocounts per replication.",
        "sample variance of the counts",
        "mesoed.photodetection.run_cascade",
    ),
    "fano_factor": _entry(
        "Count variance divided by the mean count.",
        "F = Var[n] / E[n], 1 for a deterministic drive",
        "mesoed.photodetection.CascadeResult",
    ),
    "predicted_count_variance": _entry(
        "Doubly stochastic Poisson prediction E[L] + Var[L] of the count variance.",
        "Var[n] = E[L] + eta^2 Var[integral of I dt]",
        "mesoed.photodetection.CascadeResult",
    ),
    "photocurrent_mean": _entry(
        "Sample mean of the photocurrent.",
        "<J_det> with no back-action on the source",
        "mesoed.photodetection.run_cascade",
    ),
    "detected_field_mean": _entry(
        "Sample mean of the field in the detector's input mode.",
        "A_in = A_e + G_in J_source",
        "mesoed.photodetection.detected_field_report",
    ),
    "audit_passed": _entry(
        "1 if perturbing the field at this step left earlier currents bit-identical.",
        "J(t_k) independent of A_e(t_m) for k < m",
        "mesoed.network.causality_audit",
    ),
    "audit_max_deviation": _entry(
        "Largest change of a current that must not respond to the perturbation.",
        "J(t_k) independent of A_e(t_m) for k < m",
        "mesoed.network.causality_audit",
    ),
    "susceptibility": _entry(
        "Derivative of the mean current at (step, mode) by the field at (step2, mode2).",
        "d<J(t)>/dA_e(t') / dt, zero for t' > t",
        "mesoed.network.susceptibility",
    ),
    "richardson_deviation": _entry(
        "Difference between finite differences at step h and 2h.",
        "|D(h) - D(2h)|",
        "mesoed.network.susceptibility",
    ),
    "mc_total_mean": _entry(
        "Sample mean of the summed current of Gaussian devices.",
        "<J_1 + ... + J_N> sampled",
        "mesoed.network.simulate_network",
    ),
    "max_mean_sigma": _entry(
        "Largest deviation of sampled means from the closed form in standard errors.",
        "|mean_mc - mean_closed| / std_err",
        "mesoed.util.util.max_standard_errors",
    ),
    "max_cov_sigma": _entry(
        "Largest deviation of sampled covariances from the closed form in standard errors.",
        "|cov_mc - cov_closed| / std_err",
        "mesoed.util.util.max_standard_errors",
    ),
    "normalization_instantaneous": _entry(
        "Integral of the dressed density with same-time self-action.",
        "integral of p(J | A_e + g J) dJ = 1 / (1 - chi g)",
        "mesoed.dressing.normalization_probe_instantaneous",
    ),
    "normalization_causal": _entry(
        "Integral of the dressed density of two currents with delayed self-action.",
        "integral of p(J2 | A_e + g J1) p(J1 | A_e') dJ1 dJ2 = 1",
        "mesoed.dressing.two_time_causal_check",
    ),
    "factorization_residual": _entry(
        "Largest difference between the joint density and the product of conditionals.",
        "p(J1, J2) = p(J2 | J1) p(J1)",
        "mesoed.dressing.two_time_causal_check",
    ),
    "later_mean": _entry(
        "Mean of the later current with delayed self-action.",
        "E[J2] = chi (A_e + g E[J1])",
        "mesoed.dressing.TwoTimeReport",
    ),
    "later_variance": _entry(
        "Variance of the later current with delayed self-action.",
        "Var[J2] = J0^2 + (chi g)^2 Var[J1]",
        "mesoed.dressing.TwoTimeReport",
    ),
    "later_covariance": _entry(
        "Covariance of the later and the earlier current.",
        "Cov[J2, J1] = chi g Var[J1]",
        "mesoed.dressing.TwoTimeReport",
    ),
    "first_moment": _entry(
        "Mean of the free-field operator.",
        "<A(t)> = Tr[rho A(t)]",
        "mesoed.timenormal.FockOracle.first_moment",
    ),
    "time_normal_moment": _entry(
        "Time-normal second moment of the free-field operator.",
        "<T:A(t) A(t'):> from the frequency parts ordered by time",
        "mesoed.timenormal.time_normal_second_moment",
    ),
    "truncation_error": _entry(
        "Population discarded by the Fock cutoff.",
        "1 - sum of populations up to n_max",
        "mesoed.timenormal.FockOracle.truncation_error",
    ),
    "leakage_residual": _entry(
        "Deviation of the filtered mode operator from its positive-frequency part.",
        "filter(+) of A(t) = sqrt(hbar / 2 omega) a exp(-i omega t)",
        "mesoed.timenormal.FockOracle.leakage_residual",
    ),
    "acausal_weight": _entry(
        "Relative weight of future samples in the positive-frequency filter.",
        "|upper triangle of P(+)| / |P(+)|",
        "mesoed.timenormal.acausal_weight",
    ),
    "kubo_deviation": _entry(
        "Largest difference between the Fock commutator kernel and sin(omega tau)/omega.",
        "G_R(t, t') = (i / hbar) [A(t), A(t')] for t > t'",
        "mesoed.propagators.kubo_check",
    ),
    "pfunctional_max_deviation": _entry(
        "Largest difference between time-normal and classical moments.",
        "<T:A A:> quantum = <A A> classical",
        "mesoed.timenormal.pfunctional_match",
    ),
    "pfunctional_max_sigma": _entry(
        "The same difference in units of the sampling standard error.",
        "<T:A A:> quantum = <A A> classical",
        "mesoed.timenormal.pfunctional_match",
    ),
}


# ================================================================================================
#                                   SCENARIO
# ================================================================================================


class Scenario:
    """
    A validated scenario with its objects built.

    Attributes
    ----------
    grid : `~mesoed.timegrid.TimeGrid`
    G : `~mesoed.timegrid.CausalKernel`
    devices : `list` of `~mesoed.devices.BareDevice`
    field : `~mesoed.timegrid.Trajectory`
    n_reps : `int`
    seed : `int`
    experiment : `str`
    parameters : `dict`
        Experiment parameters completed with their defaults.
    """

    def __init__(self, grid, G, devices, field, n_reps, seed, experiment, parameters):
        self.grid = grid
        self.G = G
        self.devices = devices
        self.field = field
        self.n_reps = n_reps
        self.seed = seed
        self.experiment = experiment
        self.parameters = parameters

    def network(self):
        """The devices of the scenario as a `~mesoed.network.NetworkSpec`."""
        return NetworkSpec(self.devices, self.G, A_e=self.field, n_reps=self.n_reps, seed=self.seed)


def _resolve(base_dir, name):
    path = Path(name)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return path


def _matrix(section, base_dir):
    if section.get("values") is not None:
        return np.array(section["values"], dtype=float)
    return np.loadtxt(_resolve(base_dir, section["file"]), dtype=float, ndmin=2)


def build_grid(section):
    """Build the `~mesoed.timegrid.TimeGrid` of a scenario."""
    section = ScenarioSchema().apply_defaults("grid", section)
    return TimeGrid(section["dt"], section["n_steps"], n_modes=section["n_modes"], t0=section["t0"])


def build_propagator(section, grid, base_dir=None):
    """Build the strict propagator of a scenario; no section means no coupling."""
    if section is None or section["kind"] == "zero":
        return CausalKernel.zeros(grid)
    if section["kind"] == "modes":
        return retarded_propagator(grid, [ModeSpec(omega) for omega in section["omega"]])
    return CausalKernel(grid, _matrix(section, base_dir), strict=True)


def build_device(section, grid):
    """Build one device of a scenario."""
    section = ScenarioSchema().apply_defaults("device", section)
    if section["kind"] == "poisson":
        return PoissonDetectorSpec(
            grid,
            input_mode=section["input_mode"],
            output_mode=section.get("output_mode"),
            efficiency=section["efficiency"],
            dark_rate=section["dark_rate"],
            charge=section["charge"],
            device_id=section["id"],
        )
    common = dict(
        mu0=section["mu0"], chi=section["chi"], modes=section.get("modes"), device_id=section["id"]
    )
    if section.get("correlation_time") is not None:
        return GaussianDeviceSpec.stationary(grid, section["sigma"], section["correlation_time"], **common)
    return GaussianDeviceSpec.white(grid, section["sigma"], **common)


def build_field(section, grid, base_dir=None):
    """Build the external field of a scenario; no section means no field."""
    if section is None:
        return Trajectory.zeros(grid)
    section = ScenarioSchema().apply_defaults("field", section)
    if section["kind"] == "samples":
        values = _matrix(section, base_dir).reshape(grid.shape)
        return Trajectory(grid, values)
    if section["kind"] == "constant":
        waveform = np.full(grid.n_steps, float(section["value"]))
    else:
        waveform = section["amplitude"] * np.cos(section["omega"] * grid.times + section["phase"])
    values = np.zeros(grid.shape)
    if section.get("mode") is None:
        values[:] = waveform[:, None]
    else:
        values[:, section["mode"]] = waveform
    return Trajectory(grid, values)


def build_scenario(raw, base_dir=None):
    """
    Build the objects of a validated scenario.

    Parameters
    ----------
    raw : `dict`
        The parsed scenario.
    base_dir : `str`, optional
        Directory for relative file names.

    Returns
    -------
    scenario : `Scenario`
    """
    schema = ScenarioSchema()
    top = schema.apply_defaults("scenario", raw)
    grid = build_grid(top["grid"])
    return Scenario(
        grid,
        build_propagator(top.get("propagator"), grid, base_dir),
        [build_device(device, grid) for device in top["devices"]],
        build_field(top.get("field"), grid, base_dir),
        int(top["n_reps"]),
        int(top["seed"]),
        top["experiment"],
        schema.apply_defaults("parameters", top["parameters"]),
    )


# ================================================================================================
#                                   EXPERIMENTS
# ================================================================================================


def _variance_rows(results, quantity, report):
    grid = report.grid
    results.add_trajectory(
        quantity, report.variance(), std_err=np.diag(report.cov_std_err).reshape(grid.shape)
    )


def _all_gaussian(devices):
    return all(isinstance(device, GaussianDeviceSpec) for device in devices)


def _run_dress(scenario, results, threads):
    device = scenario.devices[0]
    dressed = dress(device, scenario.G)
    samples = draw_bare(dressed, scenario.field, RandomStreams(scenario.seed), scenario.n_reps)
    report = estimate_moments(samples, grid=scenario.grid)
    results.add_trajectory("dressed_mean", report.mean.values, std_err=report.mean_std_err)
    _variance_rows(results, "dressed_variance", report)
    if isinstance(device, GaussianDeviceSpec):
        closed = gaussian_dress(device, scenario.G)
        shape = scenario.grid.shape
        results.add_trajectory("closed_form_mean", closed.mean(scenario.field).reshape(shape))
        results.add_trajectory("closed_form_variance", np.diag(closed.Sigma).reshape(shape))
    return None


def _run_compose(scenario, results, threads):
    net = scenario.network()
    samples = simulate_network(net, threads=threads)
    report = samples.report("total")
    results.add_trajectory("total_mean", report.mean.values, std_err=report.mean_std_err)
    _variance_rows(results, "total_variance", report)
    if _all_gaussian(scenario.devices):
        closed = marginal_total(gaussian_compose(scenario.devices, scenario.G))
        shape = scenario.grid.shape
        results.add_trajectory("closed_form_total_mean", closed.mean(scenario.field).reshape(shape))
        results.add_trajectory("closed_form_total_variance", np.diag(closed.Sigma).reshape(shape))
        if len(scenario.devices) == 3:
            deviation = associativity_check(scenario.devices, scenario.G, A_e=scenario.field)
            results.add("associativity_deviation", deviation)
    if len(scenario.devices) == 2:
        commutation = compose_dressed_commutation(net, threads=threads)
        results.add("commutation_identical", 1.0 if commutation.identical else 0.0)
        results.add("commutation_max_deviation", commutation.max_deviation)
    return None


def _mode_kernel(G, mode):
    single = G.grid.with_modes(1)
    return CausalKernel(single, G.tensor[:, mode, :, mode], strict=G.strict)


def _run_detect(scenario, results, threads):
    source, detector = scenario.devices
    spec = CascadeSpec(
        scenario.grid,
        source,
        detector,
        _mode_kernel(scenario.G, detector.input_mode),
        _mode_kernel(scenario.G, detector.output_mode),
        input_mode=detector.input_mode,
        output_mode=detector.output_mode,
        A_e=scenario.field,
    )
    result = run_cascade(spec, scenario.n_reps, seed=scenario.seed, threads=threads)
    results.add("mean_count", result.mean_count, std_err=result.mean_count_std_err)
    results.add("count_variance", result.count_variance)
    results.add("fano_factor", result.fano_factor)
    if result.predicted_variance is not None:
        results.add("predicted_count_variance", result.predicted_variance)
    report = result.report
    for step in range(scenario.grid.n_steps):
        results.add(
            "photocurrent_mean",
            report.mean.values[step, 0],
            step=step,
            mode=spec.output_mode,
            std_err=report.mean_std_err[step, 0],
        )
    field_mean = result.detected_field.mean(axis=0)
    for step in range(scenario.grid.n_steps):
        results.add("detected_field_mean", field_mean[step], step=step, mode=spec.input_mode)
    return None


def _run_audit(scenario, results, threads):
    net = scenario.network()
    steps = scenario.parameters.get("steps")
    if steps is None:
        steps = range(scenario.grid.n_steps)
    verdicts = []
    for step in steps:
        audit = causality_audit(
            net,
            step,
            amplitude=scenario.parameters["amplitude"],
            n_reps=scenario.n_reps,
            seed=scenario.seed,
            threads=threads,
        )
        results.add("audit_passed", 1.0 if audit.passed else 0.0, step=step)
        results.add("audit_max_deviation", audit.max_deviation, step=step)
        verdicts.append(
            {
                "experiment": scenario.experiment,
                "target": "+".join(net.device_ids),
                "step": step,
                "passed": audit.passed,
                "max_deviation": audit.max_deviation,
            }
        )
    return verdicts


def _run_susceptibility(scenario, results, threads):
    if scenario.parameters["engine"] == "gaussian":
        target = marginal_total(gaussian_compose(scenario.devices, scenario.G))
    else:
        target = scenario.network()
    result = susceptibility(
        target,
        A_e=scenario.field,
        order=(1, 1),
        h=scenario.parameters.get("h"),
        n_reps=scenario.n_reps,
        seed=scenario.seed,
        threads=threads,
    )
    for i, (step, mode) in enumerate(result.responses):
        for j, (step2, mode2) in enumerate(result.probes):
            results.add("susceptibility", result.values[i, j], step=step, mode=mode, step2=step2, mode2=mode2)
    results.add("richardson_deviation", result.richardson_deviation)
    return None


def _run_oracle_compare(scenario, results, threads):
    samples = simulate_network(scenario.network(), threads=threads)
    report = samples.report("total")
    closed = marginal_total(gaussian_compose(scenario.devices, scenario.G))
    shape = scenario.grid.shape
    closed_mean = closed.mean(scenario.field)
    results.add_trajectory("mc_total_mean", report.mean.values, std_err=report.mean_std_err)
    results.add_trajectory("closed_form_total_mean", closed_mean.reshape(shape))
    results.add_trajectory("closed_form_total_variance", np.diag(closed.Sigma).reshape(shape))
    results.add(
        "max_mean_sigma",
        max_standard_errors(report.mean.flat - closed_mean, report.mean_std_err.reshape(-1), atol=1e-9),
    )
    results.add(
        "max_cov_sigma", max_standard_errors(report.cov - closed.Sigma, report.cov_std_err, atol=1e-9)
    )
    if len(scenario.devices) == 3:
        results.add(
            "associativity_deviation",
            associativity_check(scenario.devices, scenario.G, A_e=scenario.field),
        )
    return None


def _run_appendix_a(scenario, results, threads):
    parameters = scenario.parameters
    chi, g, J0, A_e, A_e_earlier = (
        float(parameters[key]) for key in ("chi", "g", "J0", "A_e", "A_e_earlier")
    )
    results.add("normalization_instantaneous", normalization_probe_instantaneous(chi, g, J0, A_e=A_e))
    report = two_time_causal_check(chi, g, J0, A_e=A_e, A_e_earlier=A_e_earlier)
    results.add("normalization_causal", report.normalization)
    results.add("factorization_residual", report.factorization_residual)
    results.add("later_mean", report.later_mean)
    results.add("later_variance", report.later_variance)
    results.add("later_covariance", report.covariance)
    return None


def _run_timenormal(scenario, results, threads):
    parameters = scenario.parameters
    grid = scenario.grid.with_modes(1)
    mode = ModeSpec(parameters["omega"], hbar=parameters["hbar"])
    oracle = FockOracle(
        grid,
        mode,
        n_max=parameters["n_max"],
        state=parameters["state"],
        alpha=complex(parameters["alpha_re"], parameters["alpha_im"]),
        nbar=parameters["nbar"],
    )
    for step, value in enumerate(oracle.first_moment()):
        results.add("first_moment", value, step=step, mode=0)
    moments = oracle.moment_matrix()
    for step in range(grid.n_steps):
        for step2 in range(grid.n_steps):
            results.add("time_normal_moment", moments[step, step2], step=step, mode=0, step2=step2, mode2=0)
    results.add("truncation_error", oracle.truncation_error)
    results.add("leakage_residual", oracle.leakage_residual)
    results.add("acausal_weight", acausal_weight(grid))
    results.add("kubo_deviation", kubo_check(grid, mode, n_max=parameters["n_max"]))
    match = pfunctional_match(oracle, n_samples=scenario.n_reps, seed=scenario.seed)
    results.add("pfunctional_max_deviation", match.max_deviation)
    results.add("pfunctional_max_sigma", match.max_sigma)
    return None


_RUNNERS = {
    "dress": _run_dress,
    "compose": _run_compose,
    "detect": _run_detect,
    "audit-causality": _run_audit,
    "susceptibility": _run_susceptibility,
    "oracle-compare": _run_oracle_compare,
    "appendix-a": _run_appendix_a,
    "timenormal": _run_timenormal,
}


def run_experiment(scenario, threads=None):
    """
    Run the experiment of a scenario.

    Parameters
    ----------
    scenario : `Scenario`
    threads : `int`, optional

    Returns
    -------
    results : `~mesoed.util.io.ResultsTable`
    verdicts : `list` of `dict` or None
        Audit verdicts, for causality audits only.

    Raises
    ------
    KeyError: If the experiment kind is unknown.
    """
    if scenario.experiment not in _RUNNERS:
        raise KeyError(f"Unknown experiment: {scenario.experiment}")
    results = ResultsTable(scenario.experiment)
    verdicts = _RUNNERS[scenario.experiment](scenario, results, threads)
    return results, verdicts


# ================================================================================================
#                                   COMMANDS
# ================================================================================================


def _load(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f), []
    except OSError:
        return None, [f"Could not open scenario file at path: {path}"]
    except json.JSONDecodeError as exc:
        return None, [f"Scenario file is not valid JSON: {exc}"]


def _report_errors(errors):
    for error in errors:
        print(error, file=sys.stderr)


def run(scenario_path, out_dir, reps=None, seed=None, threads=None):
    """
    Validate and run a scenario file, writing its results.

    Parameters
    ----------
    scenario_path : `str`
    out_dir : `str` or None
        Output directory; None writes to ``[general] working_dir`` in a
        subdirectory named after the scenario file.
    reps : `int`, optional
        Overrides the scenario's ``n_reps``.
    seed : `int`, optional
        Overrides the scenario's ``seed``.
    threads : `int`, optional
        Worker threads; see `~mesoed.util.config.get_thread_count`.

    Returns
    -------
    exit_code : `int`
    """
    raw, errors = _load(scenario_path)
    if raw is not None:
        if isinstance(raw, dict):
            if reps is not None:
                raw["n_reps"] = reps
            if seed is not None:
                raw["seed"] = seed
        errors = validate_scenario(raw, base_dir=str(Path(scenario_path).parent))
    if errors:
        _report_errors(errors)
        return EXIT_INVALID

    start = time.perf_counter()
    try:
        threads = get_thread_count(threads)
        scenario = build_scenario(raw, base_dir=str(Path(scenario_path).parent))
        with log.run_context(scenario.experiment, scenario.seed) as run_log:
            log.info(f"Running {scenario.n_reps} replications on {threads} threads")
            results, verdicts = run_experiment(scenario, threads=threads)
    except ValueError as exc:
        _report_errors([str(exc)])
        return EXIT_INVALID
    wall_time = time.perf_counter() - start

    if out_dir is None:
        out_dir = Path(mesoed.config.get("general", "working_dir")).expanduser() / Path(scenario_path).stem

    grid = scenario.grid
    meta = {
        "schema_version": ScenarioSchema().version,
        "version": mesoed.__version__,
        "experiment": scenario.experiment,
        "seed": scenario.seed,
        "n_reps": scenario.n_reps,
        "grid": {"dt": grid.dt, "n_steps": grid.n_steps, "n_modes": grid.n_modes, "t0": grid.t0},
        "wall_time_s": wall_time,
        "accuracy_warnings": run_log.accuracy_warnings,
        "manifest": {quantity: MANIFEST[quantity] for quantity in results.quantities},
    }
    CSVResultsHandler().save_results(results, out_dir, verdicts=verdicts, meta=meta)
    log.info(f"Wrote {len(results)} result rows to {out_dir}")
    if verdicts is not None and not all(verdict["passed"] for verdict in verdicts):
        failed = [verdict["step"] for verdict in verdicts if not verdict["passed"]]
        print(f"Causality audit failed at steps {failed}", file=sys.stderr)
        return EXIT_AUDIT_FAILED
    return EXIT_OK


def _validate_command(scenario_path):
    raw, errors = _load(scenario_path)
    if raw is not None:
        errors = validate_scenario(raw, base_dir=str(Path(scenario_path).parent))
    if errors:
        for error in errors:
            print(error)
        return EXIT_INVALID
    print(f"{scenario_path}: valid")
    return EXIT_OK


def _list_command():
    width = max(len(kind) for kind in EXPERIMENTS)
    for kind, description in EXPERIMENTS.items():
        print(f"{kind:<{width}}  {description}")
    return EXIT_OK


def _parser():
    parser = argparse.ArgumentParser(
        prog="mesoed", description="Discretized-time mesoscopic electrodynamics."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {mesoed.__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Run a scenario and write its results.")
    run_parser.add_argument("scenario", help="Path of the scenario JSON file.")
    run_parser.add_argument(
        "--out", default=None, help="Output directory (default: <working_dir>/<scenario name>)."
    )
    run_parser.add_argument("--reps", type=int, default=None, help="Number of replications.")
    run_parser.add_argument("--seed", type=int, default=None, help="Global seed.")
    run_parser.add_argument(
        "--threads", type=int, default=None, help="Worker threads (default: MESOED_THREADS or config)."
    )

    validate_parser = commands.add_parser("validate", help="Check a scenario file.")
    validate_parser.add_argument("scenario", help="Path of the scenario JSON file.")

    commands.add_parser("list-experiments", help="List the experiment kinds.")
    return parser


def main(argv=None):
    """
    Entry point of the ``mesoed`` command.

    Parameters
    ----------
    argv : `list` of `str`, optional
        Arguments without the program name, default ``sys.argv[1:]``.

    Returns
    -------
    exit_code : `int`
    """
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    if args.command == "run":
        return run(args.scenario, args.out, reps=args.reps, seed=args.seed, threads=args.threads)
    if args.command == "validate":
        return _validate_command(args.scenario)
    return _list_command()


if __name__ == "__main__":
    sys.exit(main())
