"""
Dissipativity certificates and bus passivity checks.
"""

from .dissipativity import (
    Certificate,
    SupplyRateMode,
    SupplyRateSpec,
    bus_realization,
    bus_storage,
    certify_network,
    check_assumption_b_zeros,
    check_bus,
    check_lti_dissipativity,
    check_memoryless,
    lmi_residual,
    minimum_damping,
    supply_rate_eval,
    synthesize_storage,
)
from .passivity import PassivityReport, check_bus_passivity

__all__ = [
    "Certificate",
    "SupplyRateMode",
    "SupplyRateSpec",
    "bus_realization",
    "bus_storage",
    "certify_network",
    "check_assumption_b_zeros",
    "check_bus",
    "check_lti_dissipativity",
    "check_memoryless",
    "lmi_residual",
    "minimum_damping",
    "supply_rate_eval",
    "synthesize_storage",
    "PassivityReport",
    "check_bus_passivity",
]
