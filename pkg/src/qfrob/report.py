"""JSON reports and CSV writers for the command line front end.

A report has five top-level keys: ``command``, ``config``, ``results``,
``timing`` and ``provenance``.  Only ``timing`` varies between identical
runs; ``results`` is serialized with sorted keys so that it reproduces
byte for byte.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["AnalysisReport", "jsonable", "dumps", "write_csv"]


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2)


@dataclass
class AnalysisReport:
    command: list
    config: dict
    results: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)
    timing: dict = field(default_factory=dict)

    def finish(self):
        self.timing = {"wall_seconds": time.perf_counter() - self.started}
        return self

    def results_json(self) -> str:
        return dumps(self.results)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "timing": self.timing,
            "provenance": {
                **self.provenance,
                "package_version": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(self.to_dict()) + "\n")
        return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
