"""
This module provides the scenario schema.
"""
from collections import OrderedDict
from copy import deepcopy
from pathlib import Path

import yaml
from astropy.table import Table

import mesoed
from mesoed import log

__all__ = ["ScenarioSchema"]

DEFAULT_SCENARIO_SCHEMA_FILE = "scenario_schema.yaml"

# Sections describing the keys of nested scenario objects
SECTIONS = ("scenario", "grid", "propagator", "device", "field", "parameters")


class ScenarioSchema:
    """
    The schema of scenario files.

    The schema is loaded from ``mesoed/data/scenario_schema.yaml``. It lists,
    for every section of a scenario, the accepted keys with their description,
    type, default, valid values and numeric bounds.

    Examples
    --------
    >>> from mesoed.util.schema import ScenarioSchema
    >>> schema = ScenarioSchema()
    >>> schema.section("grid")["n_modes"]["default"]
    1
    """

    def __init__(self):
        super().__init__()
        self._schema = ScenarioSchema._load_default_schema()

    @property
    def schema(self):
        """(`dict`) The complete schema, keyed by section."""
        return self._schema

    @property
    def version(self):
        """(`str`) Version of the scenario format."""
        return str(self._schema["schema_version"])

    @property
    def experiment_kinds(self):
        """(`list`) The experiment kinds a scenario may request."""
        return list(self._schema["scenario"]["experiment"]["valid_values"])

    def section(self, name):
        """
        The key descriptions of one section.

        Parameters
        ----------
        name : `str`
            One of ``scenario``, ``grid``, ``propagator``, ``device``,
            ``field`` or ``parameters``.

        Returns
        -------
        section : `dict`

        Raises
        ------
        KeyError: If ``name`` is not a schema section.
        """
        if name not in SECTIONS:
            raise KeyError(f"Unknown schema section: {name}")
        return self._schema[name]

    def defaults(self, name):
        """
        The default values of one section.

        Keys without a default are left out.

        Returns
        -------
        defaults : `dict`
        """
        return {
            key: deepcopy(info["default"])
            for key, info in self.section(name).items()
            if info["default"] is not None
        }

    def apply_defaults(self, name, values):
        """Return ``values`` completed with the defaults of section ``name``."""
        completed = self.defaults(name)
        completed.update(values)
        return completed

    @staticmethod
    def _load_default_schema():
        # The schema file is contained in the `mesoed/data` directory
        default_schema_path = str(Path(mesoed.__file__).parent / "data" / DEFAULT_SCENARIO_SCHEMA_FILE)
        return ScenarioSchema._load_yaml_data(yaml_file_path=default_schema_path)

    @staticmethod
    def _load_yaml_data(yaml_file_path):
        """
        Function to load data from a Yaml file.

        Parameters
        ----------
        yaml_file_path: `str`
            Path to the schema file.

        Raises
        ------
        FileNotFoundError: If the file does not exist.
        """
        if not Path(yaml_file_path).exists():
            raise FileNotFoundError(f"Schema file not found: {yaml_file_path}")
        yaml_data = {}
        with open(yaml_file_path, "r") as f:
            try:
                yaml_data = yaml.safe_load(f)
            except yaml.YAMLError as exc:
                log.critical(exc)
        return yaml_data

    @staticmethod
    def scenario_template():
        """
        Function to generate a template of the keys a scenario must provide.

        Returns
        -------
        template : `OrderedDict`
            Required keys set to None; the ``grid`` entry lists its own
            required keys.
        """
        schema = ScenarioSchema()
        template = OrderedDict()
        for key, info in schema.section("scenario").items():
            if info["required"]:
                template[key] = None
        template["grid"] = OrderedDict(
            (key, None) for key, info in schema.section("grid").items() if info["required"]
        )
        return template

    @staticmethod
    def info(section="scenario", key=None):
        """
        Function to generate a `astropy.table.Table` of information about the
        keys of one schema section. The table contains:

        - description: (`str`) A brief description of the key
        - type: (`str`) The expected type
        - required: (`bool`) Whether the key must be present
        - default: (`str`) The default value used if none is provided

        Parameters
        ----------
        section : `str`, optional
            The schema section, default ``scenario``.
        key : `str`, optional
            Limit the table to one key.

        Returns
        -------
        info: `astropy.table.Table`

        Raises
        ------
        KeyError: If ``section`` or ``key`` is not known.
        """
        entries = ScenarioSchema().section(section)
        names = list(entries.keys())
        rows = [
            {
                "description": " ".join(str(info["description"]).split()),
                "type": info["type"],
                "required": bool(info["required"]),
                "default": str(info["default"]),
            }
            for info in entries.values()
        ]
        info = Table(rows=rows)
        info.add_column(col=names, name="Key", index=0)

        if key and key in info["Key"]:
            info = info[info["Key"] == key]
        elif key and key not in info["Key"]:
            raise KeyError(f"Cannot find schema information for key: {key}")
        return info
