"""
Steady-state controller maps k_pM(zeta) and k_dc(zeta) induced by the costs.
"""

import logging
from typing import Any, List, Optional, Sequence, Tuple

from ..exceptions import ConfigurationError
from .costs import CostFunction

logger = logging.getLogger(__name__)

PRICE_FUNCTION = "p_c - omega"


class ControllerMap:
    """
    Static map zeta -> clip((C')^-1(sign * (p_c - omega))).

    sign is +1 for generation (k_pM) and -1 for controllable demand (k_dc).
    The OSLC device blocks evaluate through one of these, so a block's static
    I/O map is the synthesized map itself.
    """

    def __init__(self, cost: CostFunction, sign: float = 1.0):
        if sign not in (1.0, -1.0):
            raise ValueError(f"sign must be +1 or -1, got {sign}")
        self.cost = cost
        self.sign = float(sign)

    def __call__(self, zeta: Sequence[Any]) -> Any:
        return self.cost.response(self.sign * (zeta[0] + zeta[1]))

    def __repr__(self) -> str:
        name = "k_pM" if self.sign > 0 else "k_dc"
        return f"{name}({type(self.cost).__name__})"

    @classmethod
    def can_stack(cls, maps: List["ControllerMap"]) -> bool:
        if len({m.sign for m in maps}) != 1:
            return False
        costs = [m.cost for m in maps]
        return type(costs[0]).can_stack(costs)

    @classmethod
    def stack(cls, maps: List["ControllerMap"]) -> "ControllerMap":
        costs = [m.cost for m in maps]
        return cls(type(costs[0]).stack(costs), maps[0].sign)


def _check_price_function(f: str) -> None:
    if f != PRICE_FUNCTION:
        raise ConfigurationError(f"Unsupported price function '{f}'; only '{PRICE_FUNCTION}' is available")


def synthesize_controller_maps(
    supply_cost: Optional[CostFunction],
    demand_cost: Optional[CostFunction],
    f: str = PRICE_FUNCTION,
) -> Tuple[Optional[ControllerMap], Optional[ControllerMap]]:
    """
    Build k_pM(zeta) = clip((C')^-1(f(zeta))) and k_dc(zeta) = clip((C_d')^-1(-f(zeta))).

    Args:
        supply_cost: Generation cost with bounds, or None
        demand_cost: Demand disutility with bounds, or None
        f: Price function of zeta = [-omega, p_c]; only p_c - omega is supported

    Returns:
        (k_pM, k_dc); an entry is None when its cost is None

    Raises:
        ConfigurationError: When a marginal cost is not invertible or f is unsupported
    """
    _check_price_function(f)
    maps = []
    for cost, sign in ((supply_cost, 1.0), (demand_cost, -1.0)):
        if cost is None:
            maps.append(None)
            continue
        cost.check_increasing()
        maps.append(ControllerMap(cost, sign))
    return maps[0], maps[1]


def oslc_blocks(
    supply_cost: Optional[CostFunction],
    demand_cost: Optional[CostFunction],
    demand_tau: Optional[float] = None,
    f: str = PRICE_FUNCTION,
):
    """
    Supply and demand blocks driven by the synthesized maps.

    A demand time constant gives the Dynamic OSLC load, otherwise the Static one.
    """
    from ..devices.blocks import DynamicDemand, StaticDemand, StaticSupply

    k_pM, k_dc = synthesize_controller_maps(supply_cost, demand_cost, f)
    supply = None if k_pM is None else StaticSupply.from_map(k_pM)
    if k_dc is None:
        demand = None
    elif demand_tau is None:
        demand = StaticDemand.from_map(k_dc)
    else:
        demand = DynamicDemand.from_map(k_dc, demand_tau)
    return supply, demand
