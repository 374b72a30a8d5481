"""
Device blocks: generation p^M, controllable demand d^c and damping d^u.
"""

from .base import DeviceBlock, Role, device_equilibrium, device_eval, linearize
from .blocks import (
    CallableBlock,
    CubicDamping,
    DynamicDemand,
    FifthOrderTurbine,
    FirstOrderSupply,
    LagDamping,
    LinearDamping,
    PrefilteredBlock,
    SecondOrderTurbine,
    StaticDemand,
    StaticSupply,
)
from .realization import (
    LtiRealization,
    assemble_bus_realization,
    governor_transfer_function,
    second_order_turbine_realization,
    tf_to_state_space,
)

__all__ = [
    "DeviceBlock",
    "Role",
    "device_eval",
    "device_equilibrium",
    "linearize",
    "StaticSupply",
    "FirstOrderSupply",
    "SecondOrderTurbine",
    "FifthOrderTurbine",
    "StaticDemand",
    "DynamicDemand",
    "LinearDamping",
    "LagDamping",
    "CubicDamping",
    "PrefilteredBlock",
    "CallableBlock",
    "LtiRealization",
    "assemble_bus_realization",
    "governor_transfer_function",
    "second_order_turbine_realization",
    "tf_to_state_space",
]
