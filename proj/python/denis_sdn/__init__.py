"""Python front of the DENIS-SDN controller and simulator.

Everything returns plain dicts and lists with the same field names as the
northbound API.
"""

import csv
import io
import json

from . import _core
from ._core import DenisError

__all__ = [
    "DenisError",
    "Controller",
    "arena",
    "max_neighbors",
    "range_preset",
    "disconnected",
    "run_scenario",
    "run_matrix",
    "rows",
    "summarize",
]


def arena(density, mode):
    """Arena deployment: {"nodes": [...], "plan": {...}}."""
    return json.loads(_core.arena(density, mode))


def max_neighbors(density, range_m):
    return _core.max_neighbors(density, float(range_m))


def range_preset(name):
    return _core.range_preset(name)


def disconnected(nodes, range_m, target, strategy="reverse"):
    """Ids with no path to `target` in the unit-disk graph of `nodes`."""
    return _core.disconnected(json.dumps(nodes), float(range_m), target, strategy)


def run_scenario(config):
    """One seed of a single-scenario config (dict). Returns the PDR report,
    plus "event_log" (empty unless config["record_log"])."""
    return json.loads(_core.run_scenario(json.dumps(config)))


def run_matrix(config, workers=1):
    """Runs a matrix config (dict) and returns results.csv as text."""
    return _core.run_matrix(json.dumps(config), workers)


def rows(results_csv):
    """results.csv text as one dict per run."""
    return list(csv.DictReader(io.StringIO(results_csv)))


def summarize(results_csv):
    """{"network": [...], "slices": [...], "verdicts": [...]}"""
    return json.loads(_core.summarize(results_csv))


class Controller:
    def __init__(self, nodes, range_m, plan):
        self._c = _core.Controller(json.dumps(nodes), float(range_m), json.dumps(plan))

    def topology(self):
        return json.loads(self._c.topology())

    def plan(self):
        return json.loads(self._c.plan())

    def density(self):
        return json.loads(self._c.density())

    def flows(self):
        return json.loads(self._c.flows())

    def set_plan(self, plan):
        return json.loads(self._c.set_plan(json.dumps(plan)))

    def apply_delta(self, delta):
        return json.loads(self._c.apply_delta(json.dumps(delta)))

    def codet_run(self, slice_id="", now=0.0):
        return json.loads(self._c.codet_run(slice_id, now))
