"""
JSON scenario file schema.

Devices are tagged unions on ``type``; unknown keys are rejected in strict mode
and dropped with a warning in lenient mode. Validation errors are reported as
JSON pointers into the submitted document.
"""

import copy
import logging
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from ..devices.params import (
    CostSpec,
    FifthOrderTurbineParams,
    PrefilterParams,
    SecondOrderTurbineParams,
)
from ..exceptions import ValidationError
from ..network import BusKind
from ..simulation.state import ControllerMode, IntegrationMethod

logger = logging.getLogger(__name__)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class _Priced(_Strict):
    cost: CostSpec
    bounds: Optional[Tuple[float, float]] = Field(default=None, description="[lower, upper] overriding the cost bounds")
    prefilter: Optional[PrefilterParams] = None

    @model_validator(mode="after")
    def _ordered(self):
        if self.bounds is not None and self.bounds[0] > self.bounds[1]:
            raise ValueError(f"bounds {list(self.bounds)} are not ordered")
        return self

    def cost_with_bounds(self) -> CostSpec:
        if self.bounds is None:
            return self.cost
        return self.cost.model_copy(update={"lower": self.bounds[0], "upper": self.bounds[1]})


class MuParams(_Strict):
    mu: float = Field(gt=0)


class TauParams(_Strict):
    tau: float = Field(gt=0)


class StaticSupplySpec(_Priced):
    type: Literal["static"]


class FirstOrderSupplySpec(_Priced):
    type: Literal["first_order"]
    params: MuParams


class SecondOrderTurbineSpec(_Strict):
    type: Literal["turbine2"]
    params: SecondOrderTurbineParams
    prefilter: Optional[PrefilterParams] = None


class FifthOrderTurbineSpec(_Strict):
    type: Literal["turbine5"]
    params: FifthOrderTurbineParams
    prefilter: Optional[PrefilterParams] = None


class StaticDemandSpec(_Priced):
    type: Literal["static"]


class DynamicDemandSpec(_Priced):
    type: Literal["dynamic"]
    params: TauParams


class DampingFields(_Strict):
    gain: float = Field(gt=0)
    tau: Optional[float] = Field(default=None, gt=0)
    cubic: float = Field(default=0.0, ge=0)


class DampingSpec(_Strict):
    type: Literal["linear", "lag", "cubic"]
    params: DampingFields

    @model_validator(mode="after")
    def _lag_needs_tau(self):
        if self.type == "lag" and self.params.tau is None:
            raise ValueError("lag damping requires params.tau")
        return self


SupplySpec = Annotated[
    Union[StaticSupplySpec, FirstOrderSupplySpec, SecondOrderTurbineSpec, FifthOrderTurbineSpec],
    Field(discriminator="type"),
]
DemandSpec = Annotated[Union[StaticDemandSpec, DynamicDemandSpec], Field(discriminator="type")]


class DevicesSpec(_Strict):
    supply: Optional[SupplySpec] = None
    demand: Optional[DemandSpec] = None
    damping: Optional[DampingSpec] = None


class BusSpec(_Strict):
    id: str = Field(min_length=1)
    kind: BusKind
    inertia: Optional[float] = Field(default=None, gt=0)
    gamma: float = Field(default=1.0, gt=0)
    devices: DevicesSpec = DevicesSpec()


class LineSpec(_Strict):
    tail: str = Field(alias="from")
    head: str = Field(alias="to")
    susceptance: float = Field(gt=0)
    nominal_flow: float = 0.0


class CommLinkSpec(_Strict):
    tail: str = Field(alias="from")
    head: str = Field(alias="to")
    gamma: float = Field(default=1.0, gt=0)


class ControllerSpec(_Strict):
    mode: ControllerMode = ControllerMode.DIRECT
    tau_chi: float = Field(default=1.0, gt=0)
    du_scale: float = Field(default=1.0, gt=0)
    price_function: str = "p_c - omega"


class DisturbanceSpec(_Strict):
    bus: str
    time_s: float = Field(ge=0)
    delta_pu: float


class SimSpec(_Strict):
    t_end_s: float = Field(default=200.0, gt=0)
    dt_s: float = Field(default=1e-3, gt=0)
    method: IntegrationMethod = IntegrationMethod.RK4
    decimation: int = Field(default=10, ge=1)


class ScenarioFile(_Strict):
    """Top-level scenario document."""

    name: Optional[str] = None
    description: Optional[str] = None
    base_mva: float = Field(default=100.0, gt=0)
    buses: List[BusSpec] = Field(min_length=1)
    lines: List[LineSpec] = []
    comm_links: List[CommLinkSpec] = []
    controller: ControllerSpec = ControllerSpec()
    disturbances: List[DisturbanceSpec] = []
    sim: SimSpec = SimSpec()
    initial: Dict[str, Dict[str, float]] = {}

    @field_validator("buses")
    @classmethod
    def _unique_ids(cls, buses: List[BusSpec]) -> List[BusSpec]:
        seen = set()
        for bus in buses:
            if bus.id in seen:
                raise ValueError(f"duplicate bus id '{bus.id}'")
            seen.add(bus.id)
        return buses


def json_pointer(document: Any, loc: Tuple[Any, ...]) -> str:
    """
    Pointer into ``document`` for a pydantic error location.

    Union tags that pydantic inserts into the location are skipped.
    """
    parts: List[str] = []
    node = document
    for key in loc:
        if isinstance(node, dict) and key in node:
            node = node[key]
        elif isinstance(node, list) and isinstance(key, int) and 0 <= key < len(node):
            node = node[key]
        elif isinstance(node, dict) and node.get("type") == key:
            continue
        else:
            node = None
        parts.append(str(key).replace("~", "~0").replace("/", "~1"))
    return "/" + "/".join(parts)


def _format_errors(document: Any, error: PydanticValidationError) -> List[str]:
    return [f"{json_pointer(document, tuple(e['loc']))}: {e['msg']}" for e in error.errors()]


def _drop(document: Any, loc: Tuple[Any, ...]) -> bool:
    node = document
    for key in loc[:-1]:
        if isinstance(node, dict) and key in node:
            node = node[key]
        elif isinstance(node, list) and isinstance(key, int) and 0 <= key < len(node):
            node = node[key]
        elif isinstance(node, dict) and node.get("type") == key:
            continue
        else:
            return False
    if isinstance(node, dict) and loc[-1] in node:
        del node[loc[-1]]
        return True
    return False


def parse_scenario_document(document: Any, strict: bool = True) -> ScenarioFile:
    """
    Validate a decoded JSON document.

    Args:
        document: Parsed JSON
        strict: Reject unknown keys; when False they are dropped with a warning

    Raises:
        ValidationError: With one JSON-pointer-prefixed message per problem
    """
    try:
        return ScenarioFile.model_validate(document)
    except PydanticValidationError as e:
        errors = e.errors()
        if strict or any(err["type"] != "extra_forbidden" for err in errors):
            raise ValidationError("Scenario file does not match the schema", _format_errors(document, e)) from e

    cleaned = copy.deepcopy(document)
    for err in errors:
        loc = tuple(err["loc"])
        logger.warning("Ignoring unknown key %s", json_pointer(document, loc))
        _drop(cleaned, loc)
    try:
        return ScenarioFile.model_validate(cleaned)
    except PydanticValidationError as e:
        raise ValidationError("Scenario file does not match the schema", _format_errors(cleaned, e)) from e


def scenario_json_schema() -> Dict[str, Any]:
    """JSON Schema of the scenario file format."""
    return ScenarioFile.model_json_schema(by_alias=True)
