"""
Build runnable scenarios from scenario files and write them back out.
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Union

from pydantic import ValidationError as PydanticValidationError

from ..devices.base import DeviceBlock
from ..devices.blocks import (
    CubicDamping,
    FifthOrderTurbine,
    FirstOrderSupply,
    LagDamping,
    LinearDamping,
    PrefilteredBlock,
    SecondOrderTurbine,
)
from ..devices.params import CostSpec, PrefilterParams
from ..exceptions import ConfigurationError, ValidationError
from ..network import Bus, CommLink, Line, NetworkModel, validate
from ..oslc import PRICE_FUNCTION, OslcProblem, QuadraticCost, oslc_blocks
from ..simulation.equilibrium import dispatch_problem
from ..simulation.state import ControllerConfig, Disturbance, Scenario, SimConfig
from .schema import BusSpec, DampingSpec, ScenarioFile, parse_scenario_document

logger = logging.getLogger(__name__)


def _cost(spec: CostSpec) -> QuadraticCost:
    return QuadraticCost(spec.coefficient, spec.lower, spec.upper)


def _prefiltered(block: DeviceBlock, prefilter: Optional[PrefilterParams]) -> DeviceBlock:
    if prefilter is None:
        return block
    return PrefilteredBlock(block, prefilter.t_lead, prefilter.t_lag)


def _turbine_damping(params) -> List[DeviceBlock]:
    # share of lambda not reported inside s goes to the bus damping
    rest = (1.0 - params.supply_damping_share) * params.damping
    return [LinearDamping(rest)] if rest > 0 else []


def _supply_blocks(spec) -> List[DeviceBlock]:
    if spec.type == "static":
        supply, _ = oslc_blocks(_cost(spec.cost_with_bounds()), None)
        return [_prefiltered(supply, spec.prefilter)]
    if spec.type == "first_order":
        block = FirstOrderSupply(spec.params.mu, _cost(spec.cost_with_bounds()))
        return [_prefiltered(block, spec.prefilter)]
    if spec.type == "turbine2":
        block = SecondOrderTurbine.from_params(spec.params)
    else:
        block = FifthOrderTurbine(spec.params)
    return [_prefiltered(block, spec.prefilter)] + _turbine_damping(spec.params)


def _demand_block(spec) -> DeviceBlock:
    tau = spec.params.tau if spec.type == "dynamic" else None
    _, block = oslc_blocks(None, _cost(spec.cost_with_bounds()), demand_tau=tau)
    return _prefiltered(block, spec.prefilter)


def _damping_block(spec: DampingSpec) -> DeviceBlock:
    p = spec.params
    if spec.type == "linear":
        return LinearDamping(p.gain)
    if spec.type == "lag":
        return LagDamping(p.gain, p.tau)
    return CubicDamping(p.gain, p.cubic)


def build_bus(spec: BusSpec) -> Bus:
    devices: List[DeviceBlock] = []
    if spec.devices.supply is not None:
        devices.extend(_supply_blocks(spec.devices.supply))
    if spec.devices.demand is not None:
        devices.append(_demand_block(spec.devices.demand))
    if spec.devices.damping is not None:
        devices.append(_damping_block(spec.devices.damping))
    return Bus(id=spec.id, kind=spec.kind, inertia=spec.inertia, gamma=spec.gamma, devices=tuple(devices))


def build_scenario(file: ScenarioFile, name: Optional[str] = None) -> Scenario:
    """
    Turn a validated scenario file into a Scenario.

    Raises:
        ConfigurationError: For an unsupported price function
        ValidationError: When the network violates a structural assumption
    """
    if file.controller.price_function != PRICE_FUNCTION:
        raise ConfigurationError(
            f"Unsupported price function '{file.controller.price_function}'; only '{PRICE_FUNCTION}' is available"
        )
    network = NetworkModel(
        buses=tuple(build_bus(b) for b in file.buses),
        lines=tuple(Line(tail=l.tail, head=l.head, susceptance=l.susceptance, nominal_flow=l.nominal_flow)
                    for l in file.lines),
        comm_links=tuple(CommLink(tail=c.tail, head=c.head, gamma=c.gamma) for c in file.comm_links),
        base_mva=file.base_mva,
    )
    report = validate(network)
    if not report.ok:
        raise ValidationError("Network validation failed", report.violations)

    try:
        return Scenario(
            network=network,
            controller=ControllerConfig(**file.controller.model_dump()),
            disturbances=tuple(Disturbance(**d.model_dump()) for d in file.disturbances),
            sim=SimConfig(**file.sim.model_dump()),
            initial=file.initial,
            name=name or file.name or "scenario",
            source=file,
        )
    except PydanticValidationError as e:
        errors = [f"/{'/'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ValidationError("Scenario is inconsistent", errors) from e


def read_scenario_file(path: Union[str, Path], strict: bool = True) -> ScenarioFile:
    """
    Parse and schema-check a scenario file without building the network.

    Raises:
        ValidationError: On malformed JSON or schema violations
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValidationError(f"Scenario file {path} is not valid JSON", [f"line {e.lineno} column {e.colno}: {e.msg}"]) from e
    return parse_scenario_document(document, strict=strict)


def load_scenario(path: Union[str, Path], strict: bool = True) -> Scenario:
    """
    Load, validate and build a scenario.

    Args:
        path: Scenario JSON file
        strict: Reject unknown keys; when False they are dropped with a warning

    Returns:
        Validated Scenario named after the file unless it names itself

    Raises:
        ValidationError: On parse, schema or network validation failure
        ConfigurationError: For unsupported controller options
        OSError: When the file cannot be read
    """
    path = Path(path)
    file = read_scenario_file(path, strict=strict)
    scenario = build_scenario(file, name=file.name or path.stem)
    logger.info("Loaded scenario '%s' (%d buses, %d lines, %d comm links)", scenario.name,
                len(scenario.network.buses), len(scenario.network.lines), len(scenario.network.comm_links))
    return scenario


def dump_scenario(scenario: Union[Scenario, ScenarioFile]) -> str:
    """
    Canonical JSON text of a scenario file; loading it rebuilds an equal scenario.

    Raises:
        ConfigurationError: When the scenario was built in code rather than loaded
    """
    file = scenario.source if isinstance(scenario, Scenario) else scenario
    if file is None:
        raise ConfigurationError("Scenario has no scenario file to dump; build it with load_scenario or build_scenario")
    return json.dumps(file.model_dump(mode="json", by_alias=True, exclude_none=True, exclude_defaults=True), indent=2) + "\n"


def oslc_problem_from_scenario(scenario: Scenario) -> OslcProblem:
    """Dispatch problem induced by the scenario's blocks under its final load."""
    return dispatch_problem(scenario.network, scenario.final_load())
