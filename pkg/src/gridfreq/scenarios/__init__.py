"""
Scenario files, bundled fixtures, synthetic networks and result bundles.
"""

from importlib.resources import files
from pathlib import Path

from .loader import (
    build_scenario,
    dump_scenario,
    load_scenario,
    oslc_problem_from_scenario,
    read_scenario_file,
)
from .results import ResultBundle, emit_results, marginal_costs, timeseries_frame, to_jsonable
from .schema import ScenarioFile, json_pointer, parse_scenario_document, scenario_json_schema
from .synthetic import PRESETS, generate_synthetic_network, preset_network

BUNDLED = ("tutorial_4bus", "mixed_10bus", "observer_4bus")


def bundled_scenario_path(name: str) -> Path:
    """Path of a bundled scenario file, e.g. ``tutorial_4bus``."""
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in BUNDLED:
        raise KeyError(f"No bundled scenario '{name}'; available: {', '.join(BUNDLED)}")
    return Path(str(files("gridfreq") / "data" / f"{stem}.json"))


__all__ = [
    "BUNDLED",
    "PRESETS",
    "ResultBundle",
    "ScenarioFile",
    "build_scenario",
    "bundled_scenario_path",
    "dump_scenario",
    "emit_results",
    "generate_synthetic_network",
    "json_pointer",
    "load_scenario",
    "marginal_costs",
    "oslc_problem_from_scenario",
    "parse_scenario_document",
    "preset_network",
    "read_scenario_file",
    "scenario_json_schema",
    "timeseries_frame",
    "to_jsonable",
]
