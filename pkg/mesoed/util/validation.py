"""
This module validates scenario files against the scenario schema.
"""
import json
from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np

from mesoed.util.schema import ScenarioSchema
from mesoed.util.util import is_power_of_two

__all__ = ["validate", "validate_scenario", "ScenarioValidator"]

_TYPE_CHECKS = {
    "str": lambda value: isinstance(value, str),
    "int": lambda value: isinstance(value, int) and not isinstance(value, bool),
    "float": lambda value: isinstance(value, (int, float)) and not isinstance(value, bool),
    "bool": lambda value: isinstance(value, bool),
    "list": lambda value: isinstance(value, list),
    "object": lambda value: isinstance(value, dict),
}


def validate(filepath):
    """
    Validate a scenario file.

    Parameters
    ----------
    filepath : `str`
        A fully specified file path.

    Returns
    -------
    errors : `list[str]`
        A list of validation errors. A valid file results in an empty list.
    """
    file_extension = Path(filepath).suffix
    if file_extension == ".json":
        validator = ScenarioValidator()
    else:
        raise ValueError(f"Unsupported file type: {file_extension}")
    return validator.validate(filepath)


def validate_scenario(scenario, base_dir=None):
    """
    Validate a scenario that is already loaded.

    Parameters
    ----------
    scenario : `dict`
        The parsed scenario.
    base_dir : `str`, optional
        Directory that relative file names in the scenario refer to.

    Returns
    -------
    errors : `list[str]`
    """
    return ScenarioValidator().validate_scenario(scenario, base_dir=base_dir)


class RunInputValidator(ABC):
    """
    Abstract base class for validators of run inputs.
    """

    @abstractmethod
    def validate(self, file_path):
        """
        Validate an input file.

        Parameters
        ----------
        file_path : `str`
            The path to the file.

        Returns
        -------
        errors : `list[str]`
            A list of validation errors. A valid file results in an empty list.
        """
        pass


class ScenarioValidator(RunInputValidator):
    """
    Validator for JSON scenario files.
    """

    def __init__(self):
        super().__init__()
        self.schema = ScenarioSchema()

    def validate(self, file_path):
        """
        Validate a JSON scenario file.

        Parameters
        ----------
        file_path : `str`

        Returns
        -------
        errors : `list[str]`
        """
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                scenario = json.load(f)
        except OSError:
            return [f"Could not open scenario file at path: {file_path}"]
        except json.JSONDecodeError as exc:
            return [f"Scenario file is not valid JSON: {exc}"]
        return self.validate_scenario(scenario, base_dir=str(Path(file_path).parent))

    def validate_scenario(self, scenario, base_dir=None):
        """
        Validate a parsed scenario.

        Parameters
        ----------
        scenario : `dict`
        base_dir : `str`, optional

        Returns
        -------
        errors : `list[str]`
        """
        if not isinstance(scenario, dict):
            return ["Scenario must be a JSON object."]
        errors = self._validate_section(scenario, "scenario", "scenario")
        grid = scenario.get("grid")
        if not isinstance(grid, dict):
            return errors
        grid_errors = self._validate_section(grid, "grid", "grid")
        errors.extend(grid_errors)
        if grid_errors:
            return errors
        grid = self.schema.apply_defaults("grid", grid)

        if isinstance(scenario.get("propagator"), dict):
            errors.extend(self._validate_propagator(scenario["propagator"], grid, base_dir))
        devices = scenario.get("devices", [])
        if isinstance(devices, list):
            errors.extend(self._validate_devices(devices, grid))
        if isinstance(scenario.get("field"), dict):
            errors.extend(self._validate_field(scenario["field"], grid, base_dir))
        parameters = scenario.get("parameters", {})
        if isinstance(parameters, dict):
            errors.extend(self._validate_section(parameters, "parameters", "parameters"))
        if not errors:
            errors.extend(self._validate_experiment(scenario, grid))
        return errors

    def _validate_section(self, values, section, prefix):
        """
        Check keys, types, valid values and bounds of one scenario object.
        """
        section_errors = []
        entries = self.schema.section(section)
        for key in values:
            if key not in entries:
                section_errors.append(f"{prefix}: Unknown key '{key}'.")
        for key, info in entries.items():
            if key not in values:
                if info["required"]:
                    section_errors.append(f"{prefix}: Required key '{key}' not present.")
                continue
            value = values[key]
            if value is None and not info["required"]:
                continue
            if not _TYPE_CHECKS[info["type"]](value):
                section_errors.append(
                    f"{prefix}.{key}: Expected type {info['type']}, got {type(value).__name__}."
                )
                continue
            if info["valid_values"] is not None and value not in info["valid_values"]:
                section_errors.append(
                    f"{prefix}.{key}: Value {value!r} not one of valid options {info['valid_values']}."
                )
            items = value if info["type"] == "list" else [value]
            if info["type"] == "list" and any(isinstance(item, list) for item in items):
                continue
            section_errors.extend(self._check_bounds(items, info, f"{prefix}.{key}"))
        return section_errors

    @staticmethod
    def _check_bounds(items, info, name):
        bound_errors = []
        minimum = info.get("minimum")
        maximum = info.get("maximum")
        exclusive = info.get("exclusive_minimum", False)
        for item in items:
            if not _TYPE_CHECKS["float"](item):
                if minimum is not None or maximum is not None:
                    bound_errors.append(f"{name}: Expected numbers, got {type(item).__name__}.")
                continue
            if minimum is not None and (item < minimum or (exclusive and item == minimum)):
                relation = ">" if exclusive else ">="
                bound_errors.append(f"{name}: Value {item!r} must be {relation} {minimum}.")
            if maximum is not None and item > maximum:
                bound_errors.append(f"{name}: Value {item!r} must be <= {maximum}.")
        return bound_errors

    @staticmethod
    def _mode_errors(modes, grid, name):
        return [
            f"{name}: Mode {mode} out of range for {grid['n_modes']} modes."
            for mode in modes
            if isinstance(mode, int) and not 0 <= mode < grid["n_modes"]
        ]

    def _validate_propagator(self, propagator, grid, base_dir):
        errors = self._validate_section(propagator, "propagator", "propagator")
        if errors:
            return errors
        size = grid["n_steps"] * grid["n_modes"]
        kind = propagator["kind"]
        if kind == "modes":
            omega = propagator.get("omega")
            if omega is None:
                errors.append("propagator.omega: Required for kind 'modes'.")
            elif len(omega) != grid["n_modes"]:
                errors.append(
                    f"propagator.omega: Expected {grid['n_modes']} frequencies, got {len(omega)}."
                )
        elif kind == "matrix":
            errors.extend(
                _matrix_errors(propagator, (size, size), base_dir, "propagator", strict_causal=grid)
            )
        return errors

    def _validate_devices(self, devices, grid):
        errors = []
        seen = set()
        for index, device in enumerate(devices):
            prefix = f"devices[{index}]"
            if not isinstance(device, dict):
                errors.append(f"{prefix}: Expected an object.")
                continue
            device_errors = self._validate_section(device, "device", prefix)
            errors.extend(device_errors)
            if device_errors:
                continue
            if device["id"] in seen:
                errors.append(f"{prefix}.id: Device id '{device['id']}' is used more than once.")
            seen.add(device["id"])
            modes = list(device.get("modes") or [])
            for key in ("input_mode", "output_mode"):
                if device.get(key) is not None:
                    modes.append(device[key])
            errors.extend(self._mode_errors(modes, grid, prefix))
        return errors

    def _validate_field(self, field, grid, base_dir):
        errors = self._validate_section(field, "field", "field")
        if errors:
            return errors
        if field.get("mode") is not None:
            errors.extend(self._mode_errors([field["mode"]], grid, "field"))
        if field["kind"] == "samples":
            errors.extend(
                _matrix_errors(field, (grid["n_steps"], grid["n_modes"]), base_dir, "field")
            )
        return errors

    def _validate_experiment(self, scenario, grid):
        errors = []
        experiment = scenario["experiment"]
        devices = scenario.get("devices", [])
        parameters = self.schema.apply_defaults("parameters", scenario.get("parameters", {}))
        kinds = [device["kind"] for device in devices]
        needs_devices = ("dress", "compose", "detect", "audit-causality", "susceptibility", "oracle-compare")
        if experiment in needs_devices and not devices:
            errors.append(f"devices: Experiment '{experiment}' needs at least one device.")
            return errors
        if experiment == "dress" and len(devices) != 1:
            errors.append(f"devices: Experiment 'dress' needs exactly one device, got {len(devices)}.")
        if experiment == "detect":
            if grid["n_modes"] < 2:
                errors.append("grid.n_modes: Experiment 'detect' needs at least two modes.")
            if kinds != ["gaussian", "poisson"]:
                errors.append("devices: Experiment 'detect' needs a gaussian source followed by a poisson detector.")
            elif devices[0].get("chi", 0.0) != 0.0:
                errors.append("devices[0].chi: The source of a cascade must not respond to the field.")
            elif devices[0].get("modes") != [devices[1].get("input_mode", 0)]:
                errors.append("devices[0].modes: The source must emit only in the detector's input mode.")
        if experiment in ("oracle-compare",) or (
            experiment == "susceptibility" and parameters["engine"] == "gaussian"
        ):
            if any(kind != "gaussian" for kind in kinds):
                errors.append(f"devices: Experiment '{experiment}' needs gaussian devices only.")
        if experiment == "audit-causality" and parameters.get("steps") is not None:
            for step in parameters["steps"]:
                if not 0 <= step < grid["n_steps"]:
                    errors.append(f"parameters.steps: Step {step} out of range for {grid['n_steps']} steps.")
        if experiment == "appendix-a" and abs(parameters["chi"] * parameters["g"]) >= 1:
            errors.append("parameters: Experiment 'appendix-a' needs |chi * g| < 1.")
        if experiment == "timenormal":
            if not is_power_of_two(grid["n_steps"]):
                errors.append(
                    f"grid.n_steps: Experiment 'timenormal' needs a power of two, got {grid['n_steps']}."
                )
            if parameters.get("omega") is None:
                errors.append("parameters.omega: Required for experiment 'timenormal'.")
        return errors


def _matrix_errors(values, shape, base_dir, prefix, strict_causal=None):
    """Check inline or file matrix data for shape and, for kernels, strict causality."""
    if values.get("values") is None and values.get("file") is None:
        return [f"{prefix}: Either 'values' or 'file' is required."]
    if values.get("values") is not None:
        try:
            data = np.array(values["values"], dtype=float)
        except (TypeError, ValueError):
            return [f"{prefix}.values: Expected a matrix of numbers."]
    else:
        path = Path(values["file"])
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if not path.exists():
            return [f"{prefix}.file: File not found: {path}"]
        try:
            data = np.loadtxt(path, dtype=float, ndmin=2)
        except ValueError:
            return [f"{prefix}.file: Could not read numbers from {path}"]
    if data.ndim == 1 and shape[1] == 1:
        data = data[:, None]
    if data.shape != shape:
        return [f"{prefix}: Expected shape {shape}, got {data.shape}."]
    if not np.all(np.isfinite(data)):
        return [f"{prefix}: Values must be finite."]
    if strict_causal is not None:
        steps = np.repeat(np.arange(strict_causal["n_steps"]), strict_causal["n_modes"])
        if np.any(data[steps[None, :] >= steps[:, None]] != 0):
            return [f"{prefix}: Kernel has nonzero entries at or above the step diagonal."]
    return []
