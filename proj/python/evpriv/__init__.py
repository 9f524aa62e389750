"""Privacy-preserving decentralized EV charging simulator."""

import json
import os

from . import _core
from ._core import (
    ConvergenceError,
    DimensionError,
    Error,
    InfeasibleError,
    NumericalError,
    RunResult,
    TopologyError,
    ValidationError,
    build_adjacency,
    obfuscate,
    project_feasible,
    recover,
    voltage_profile,
)

__all__ = [
    "ConvergenceError",
    "DimensionError",
    "Error",
    "InfeasibleError",
    "NumericalError",
    "RunResult",
    "TopologyError",
    "ValidationError",
    "audit",
    "build_adjacency",
    "load_scenario",
    "obfuscate",
    "oracle",
    "feeder13_scenario",
    "project_feasible",
    "recover",
    "run",
    "voltage_profile",
]


def _doc(scenario):
    """(json text, base dir) for a dict, JSON string or path."""
    if isinstance(scenario, dict):
        return json.dumps(scenario), ""
    if isinstance(scenario, (str, os.PathLike)) and os.path.exists(scenario):
        with open(scenario) as fh:
            return fh.read(), os.path.dirname(os.path.abspath(scenario))
    if isinstance(scenario, str):
        return scenario, ""
    raise TypeError("scenario must be a dict, JSON text or a path")


def feeder13_scenario(**kwargs):
    """The 13-bus experiment scenario as a dict."""
    return json.loads(_core.feeder13_scenario(**kwargs))


def load_scenario(scenario):
    text, base = _doc(scenario)
    _core.validate_scenario(text, base)
    return json.loads(text)


def run(scenario, seed=None, mode=None, sigma_sq=None, m=None):
    text, base = _doc(scenario)
    return _core.run(text, base, seed=seed, mode=mode, sigma_sq=sigma_sq, m=m)


def oracle(scenario, max_size=500):
    text, base = _doc(scenario)
    profiles, objective, iterations = _core.oracle(text, base, max_size)
    return {"profiles": profiles, "objective": objective, "iterations": iterations}


def audit(result_or_transcript, ground_truth=None, scale_trials=100):
    """Audit a RunResult, or a (transcript.jsonl, ground_truth.json) pair of paths."""
    if isinstance(result_or_transcript, RunResult):
        return json.loads(result_or_transcript.audit_json(scale_trials))
    if ground_truth is None:
        raise TypeError("auditing files needs both transcript and ground_truth paths")
    return json.loads(_core.audit_files(os.fspath(result_or_transcript), os.fspath(ground_truth)))
