"""
This module writes and reads run results.
"""
import json
from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np
from astropy.table import Table

__all__ = ["ResultsTable", "CSVResultsHandler", "RESULTS_COLUMNS", "VERDICT_COLUMNS"]

RESULTS_COLUMNS = ("experiment", "quantity", "step", "mode", "step2", "mode2", "value", "std_err")
VERDICT_COLUMNS = ("experiment", "target", "step", "passed", "max_deviation")

# Integer columns use this marker for "not applicable"; it is written as an empty cell
MISSING_INDEX = -1


class ResultsTable:
    """
    Results of a run in long format.

    Rows are kept in insertion order. Index columns that do not apply to a
    quantity hold ``-1`` and a missing standard error is ``nan``; both are
    written as empty cells.

    Examples
    --------
    >>> from mesoed.util.io import ResultsTable
    >>> results = ResultsTable("appendix-a")
    >>> results.add("normalization_causal", 1.0)
    >>> len(results)
    1
    """

    def __init__(self, experiment):
        self._experiment = experiment
        self._rows = []

    @property
    def experiment(self):
        """(`str`) The experiment the results belong to."""
        return self._experiment

    @property
    def table(self):
        """(`~astropy.table.Table`) The result rows."""
        if not self._rows:
            return Table(names=RESULTS_COLUMNS, dtype=(str, str, int, int, int, int, float, float))
        return Table(rows=self._rows, names=RESULTS_COLUMNS)

    @property
    def quantities(self):
        """(`list`) Quantity names in order of first appearance."""
        return list(dict.fromkeys(row[1] for row in self._rows))

    def add(self, quantity, value, step=None, mode=None, step2=None, mode2=None, std_err=None):
        """
        Append one result row.

        Parameters
        ----------
        quantity : `str`
        value : `float`
        step, mode, step2, mode2 : `int`, optional
            Grid positions the value refers to.
        std_err : `float`, optional
        """
        self._rows.append(
            (
                self._experiment,
                quantity,
                MISSING_INDEX if step is None else int(step),
                MISSING_INDEX if mode is None else int(mode),
                MISSING_INDEX if step2 is None else int(step2),
                MISSING_INDEX if mode2 is None else int(mode2),
                float(value),
                np.nan if std_err is None else float(std_err),
            )
        )

    def add_trajectory(self, quantity, values, std_err=None):
        """
        Append one row per step and mode of a ``(n_steps, n_modes)`` array.
        """
        values = np.asarray(values)
        for step in range(values.shape[0]):
            for mode in range(values.shape[1]):
                err = None if std_err is None else std_err[step, mode]
                self.add(quantity, values[step, mode], step=step, mode=mode, std_err=err)

    def __len__(self):
        return len(self._rows)


def _format_index(value):
    return "" if value == MISSING_INDEX else str(int(value))


def _format_float(value):
    return "" if np.isnan(value) else repr(float(value))


# ================================================================================================
#                                   ABSTRACT HANDLER
# ================================================================================================


class ResultsIOHandler(ABC):
    """
    Abstract base class for handling input/output of run results.
    """

    @abstractmethod
    def load_results(self, file_path):
        """
        Load results from a file.

        Parameters
        ----------
        file_path : `str`
            A fully specified file path.

        Returns
        -------
        results : `~astropy.table.Table`
        """
        pass

    @abstractmethod
    def save_results(self, results, out_dir, verdicts=None, meta=None):
        """
        Save results into a directory.

        Parameters
        ----------
        results : `ResultsTable`
        out_dir : `str`
        verdicts : `list` of `dict`, optional
        meta : `dict`, optional
        """
        pass


# ================================================================================================
#                                   CSV HANDLER
# ================================================================================================


class CSVResultsHandler(ResultsIOHandler):
    """
    Results as UTF-8 CSV with LF line endings plus a JSON metadata file.

    Floats are written in their shortest round-trip decimal form, so the same
    results always produce the same bytes.
    """

    RESULTS_FILE = "results.csv"
    VERDICTS_FILE = "verdicts.csv"
    META_FILE = "meta.json"

    def load_results(self, file_path):
        """
        Load a ``results.csv`` file.

        Parameters
        ----------
        file_path : `str`

        Returns
        -------
        results : `~astropy.table.Table`
            Empty cells are masked.
        """
        if not Path(file_path).exists():
            raise FileNotFoundError(f"Results could not be loaded from path: {file_path}")
        return Table.read(file_path, format="ascii.csv")

    def save_results(self, results, out_dir, verdicts=None, meta=None):
        """
        Write ``results.csv`` and, when given, ``verdicts.csv`` and ``meta.json``.

        Returns
        -------
        paths : `list` of `pathlib.Path`
            The files written.
        """
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [self._write_results(results, out_dir / self.RESULTS_FILE)]
        if verdicts is not None:
            paths.append(self._write_verdicts(verdicts, out_dir / self.VERDICTS_FILE))
        if meta is not None:
            path = out_dir / self.META_FILE
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(meta, f, indent=2, sort_keys=True)
                f.write("\n")
            paths.append(path)
        return paths

    @staticmethod
    def _write_results(results, path):
        lines = [",".join(RESULTS_COLUMNS)]
        for row in results.table:
            lines.append(
                ",".join(
                    [
                        str(row["experiment"]),
                        str(row["quantity"]),
                        _format_index(row["step"]),
                        _format_index(row["mode"]),
                        _format_index(row["step2"]),
                        _format_index(row["mode2"]),
                        _format_float(row["value"]),
                        _format_float(row["std_err"]),
                    ]
                )
            )
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
        return path

    @staticmethod
    def _write_verdicts(verdicts, path):
        lines = [",".join(VERDICT_COLUMNS)]
        for verdict in verdicts:
            lines.append(
                ",".join(
                    [
                        str(verdict["experiment"]),
                        str(verdict["target"]),
                        str(int(verdict["step"])),
                        "pass" if verdict["passed"] else "fail",
                        repr(float(verdict["max_deviation"])),
                    ]
                )
            )
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
        return path
