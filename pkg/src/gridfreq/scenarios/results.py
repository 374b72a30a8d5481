"""
Result bundles: time series CSV, JSON reports, scenario copy, plot stub and
run metadata.

Data files carry no timestamps so identical runs give identical bytes; the
wall-clock time lives only in run_metadata.json.
"""

import datetime
import hashlib
import json
import logging
import math
from enum import Enum
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ..devices.base import Role
from ..network import NetworkModel
from ..simulation.state import Scenario, Trajectory
from .loader import dump_scenario

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
TIMESERIES = "timeseries.csv"
REPORTS = "reports.json"
SCENARIO = "scenario.json"
PLOT_SCRIPT = "plot.gp"
METADATA = "run_metadata.json"
VERSIONED_PACKAGES = ("gridfreq", "numpy", "scipy", "pandas", "pydantic", "networkx", "control")


class ResultBundle(BaseModel):
    out_dir: Path
    timeseries: Path
    reports: Path
    plot_script: Path
    metadata: Path
    scenario: Optional[Path] = None
    rows: int
    columns: List[str]


def to_jsonable(value: Any) -> Any:
    """
    Plain JSON data from reports: models become dicts (with their ``ok`` verdict),
    arrays become lists, non-finite floats become null.
    """
    if isinstance(value, BaseModel):
        fields = type(value).model_fields
        data = {name: to_jsonable(getattr(value, name)) for name, info in fields.items() if not info.exclude}
        for flag in ("ok", "failures", "worst_margin"):
            if hasattr(type(value), flag) and isinstance(getattr(type(value), flag), property):
                data[flag] = to_jsonable(getattr(value, flag))
        return data
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items() if not str(k).startswith("_")}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def marginal_costs(trajectory: Trajectory, network: NetworkModel) -> np.ndarray:
    """
    Marginal cost per sample and bus: C'(p_M) where the bus has a supply cost,
    otherwise -C_d'(d_c) where it has a demand cost, NaN elsewhere.

    Both sides equal p_c - omega at a steady state with unsaturated devices.
    """
    out = np.full(trajectory.omega.shape, np.nan)
    for j, bus in enumerate(network.buses):
        for role, column, sign in ((Role.SUPPLY, trajectory.p_M, 1.0), (Role.DEMAND, trajectory.d_c, -1.0)):
            costs = [b.implied_cost() for b in bus.blocks(role)]
            costs = [c for c in costs if c is not None]
            if costs:
                out[:, j] = sign * np.asarray(costs[0].derivative(column[:, j]), dtype=float)
                break
    return out


def timeseries_frame(trajectory: Trajectory, network: Optional[NetworkModel] = None) -> pd.DataFrame:
    """Columns in a fixed order: time, per-bus groups, then the V components."""
    columns: Dict[str, np.ndarray] = {"time": trajectory.t}
    groups = [("omega", trajectory.omega), ("pc", trajectory.pc), ("s", trajectory.s), ("du", trajectory.d_u)]
    if network is not None:
        groups.append(("marginal_cost", marginal_costs(trajectory, network)))
    for prefix, values in groups:
        for j, bus_id in enumerate(trajectory.bus_ids):
            columns[f"{prefix}_{bus_id}"] = values[:, j]
    frame = pd.DataFrame(columns)
    if trajectory.lyapunov:
        energy = pd.DataFrame([v.model_dump(exclude={"storage_complete"}) for v in trajectory.lyapunov])
        frame = pd.concat([frame, energy.rename(columns={"total": "V"})], axis=1)
    return frame


def _plot_script(columns: List[str]) -> str:
    def series(prefix: str) -> str:
        picks = [i + 1 for i, c in enumerate(columns) if c.startswith(prefix)]
        return ", ".join(f"'{TIMESERIES}' using 1:{i} with lines title columnhead({i})" for i in picks)

    lines = [
        "# gnuplot script for the time series next to it",
        "set datafile separator ','",
        "set xlabel 'time (s)'",
        "set terminal pngcairo size 1000,600",
        "set output 'frequency.png'",
        "set ylabel 'omega (p.u.)'",
        f"plot {series('omega_')}",
    ]
    if any(c.startswith("marginal_cost_") for c in columns):
        lines += [
            "set output 'marginal_costs.png'",
            "set ylabel 'marginal cost'",
            f"plot {series('marginal_cost_')}",
        ]
    return "\n".join(lines) + "\n"


def _versions() -> Dict[str, Optional[str]]:
    found: Dict[str, Optional[str]] = {}
    for name in VERSIONED_PACKAGES:
        try:
            found[name] = version(name)
        except PackageNotFoundError:
            found[name] = None
    return found


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(to_jsonable(data), indent=2, allow_nan=False) + "\n", encoding="utf-8")


def emit_results(
    trajectory: Trajectory,
    reports: Dict[str, Any],
    out_dir: Union[str, Path],
    scenario: Optional[Scenario] = None,
    seed: Optional[int] = None,
) -> ResultBundle:
    """
    Write a result bundle.

    Args:
        trajectory: Sampled run
        reports: Named reports (pydantic models or plain data)
        out_dir: Target directory, created if missing
        scenario: Scenario of the run; enables marginal-cost columns and the scenario copy
        seed: Seed used by the run, if any

    Returns:
        ResultBundle with the written paths

    Raises:
        OSError: On any I/O failure, unchanged
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    network = scenario.network if scenario is not None else None

    frame = timeseries_frame(trajectory, network)
    csv_path = out / TIMESERIES
    frame.to_csv(csv_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    reports_path = out / REPORTS
    _write_json(reports_path, dict(sorted(reports.items())))

    plot_path = out / PLOT_SCRIPT
    plot_path.write_text(_plot_script(list(frame.columns)), encoding="utf-8")

    scenario_path = None
    scenario_hash = None
    if scenario is not None and scenario.source is not None:
        text = dump_scenario(scenario)
        scenario_path = out / SCENARIO
        scenario_path.write_text(text, encoding="utf-8")
        scenario_hash = hashlib.sha256(text.encode("utf-8")).hexdigest()

    metadata_path = out / METADATA
    _write_json(metadata_path, {
        "scenario": None if scenario is None else scenario.name,
        "scenario_sha256": scenario_hash,
        "seed": seed,
        "samples": len(trajectory),
        "integration": trajectory.metadata,
        "versions": _versions(),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    })

    logger.info("Wrote %d samples and %d report(s) to %s", len(frame), len(reports), out)
    return ResultBundle(
        out_dir=out,
        timeseries=csv_path,
        reports=reports_path,
        plot_script=plot_path,
        metadata=metadata_path,
        scenario=scenario_path,
        rows=len(frame),
        columns=list(frame.columns),
    )
