"""
Parameter models for the bundled device blocks.
"""

import logging
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)


class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class CostSpec(_Params):
    """Quadratic cost 1/2 * coefficient * p^2 with saturation bounds."""

    kind: Literal["quadratic"] = "quadratic"
    coefficient: float = Field(gt=0, description="Marginal cost slope")
    lower: float = Field(default=float("-inf"), description="Lower saturation bound (p.u.)")
    upper: float = Field(default=float("inf"), description="Upper saturation bound (p.u.)")

    @model_validator(mode="after")
    def _ordered_bounds(self) -> "CostSpec":
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")
        return self


class SecondOrderTurbineParams(_Params):
    """Two-lag turbine-governor with static power-command dependence."""

    K: float = Field(gt=0, description="Feedback gain")
    tau_a: float = Field(gt=0, description="Governor time constant (s)")
    tau_b: float = Field(gt=0, description="Turbine time constant (s)")
    damping: float = Field(gt=0, alias="lambda", description="Frequency damping lambda")
    lambda_pc: float = Field(gt=0, description="Static power-command coefficient")
    damping_share: Optional[float] = Field(
        default=None, ge=0, le=1, description="Fraction of lambda*omega reported inside s; None picks it from K"
    )

    @property
    def supply_damping_share(self) -> float:
        """
        theta in s = z + lambda_pc p_c - theta lambda omega, d^u = (1 - theta) lambda omega.

        theta = (K/4 - lambda_pc)/lambda clipped to [0, 1] makes the bus
        dissipative for every tau_a, tau_b whenever K < 8 lambda_pc <= 8 lambda.
        """
        if self.damping_share is not None:
            return self.damping_share
        return min(1.0, max(0.0, (self.K / 4.0 - self.lambda_pc) / self.damping))

    @model_validator(mode="after")
    def _certified_region(self) -> "SecondOrderTurbineParams":
        if self.lambda_pc > self.damping:
            raise ValueError(f"lambda_pc={self.lambda_pc} must not exceed lambda={self.damping}")
        if self.K >= 8 * self.lambda_pc:
            logger.warning(
                "Turbine gain K=%g is outside the region K < 8*lambda_pc=%g; certify explicitly",
                self.K, 8 * self.lambda_pc,
            )
        return self


class FifthOrderTurbineParams(_Params):
    """Droop and time constants of G(s) = K/(1+sTs) (1+sT3)/(1+sTc) (1+sT4)/(1+sT5)."""

    K: float = Field(gt=0, description="Droop gain")
    T_s: float = Field(gt=0)
    T_3: float = Field(gt=0)
    T_c: float = Field(gt=0)
    T_4: float = Field(gt=0)
    T_5: float = Field(gt=0)
    damping: float = Field(gt=0, alias="lambda")
    lambda_pc: float = Field(gt=0)
    damping_share: float = Field(default=0.0, ge=0, le=1)

    @property
    def supply_damping_share(self) -> float:
        return self.damping_share


class PrefilterParams(_Params):
    """Lead/lag compensator (1 + s t_lead) / (1 + s t_lag) on the power command."""

    t_lead: float = Field(ge=0)
    t_lag: float = Field(gt=0)
