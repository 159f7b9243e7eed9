from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field

from ..errors import InputError
from ..model.Car import A0Constraint
from ..model.Report import DEFAULT_QUANTILES
from ..model.Sampler import ChainConfig


class PriorConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma2_shape: float = Field(1.0, gt=0)
    sigma2_scale: float = Field(0.01, gt=0)
    tau2_shape: float = Field(1.0, gt=0)
    tau2_scale: float = Field(1.0 / 7.0, gt=0)


class ConstraintConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    a0_max: Optional[float] = Field(None, gt=0)
    a0_min: float = Field(0.0, ge=0)
    m0: int = Field(3, ge=1)

    def constraint(self) -> Optional[A0Constraint]:
        if self.a0_max is None and self.a0_min == 0:
            return None
        return A0Constraint(a0_max=self.a0_max if self.a0_max is not None else float("inf"), a0_min=self.a0_min)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    model: Literal["beta_binomial", "logitnormal", "car"] = "car"
    chain: ChainConfig = ChainConfig()
    priors: PriorConfig = PriorConfig()
    constraint: ConstraintConfig = ConstraintConfig()
    a_bounds: Tuple[float, float] = (0.0, 100.0)
    quantiles: Tuple[float, ...] = DEFAULT_QUANTILES
    jobs: int = Field(1, ge=1)

    def merged(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Apply dotted overrides such as {"chain.seed": 7}; None values are skipped."""
        data = self.model_dump()
        for key, value in overrides.items():
            if value is None:
                continue
            target = data
            *parents, leaf = key.split(".")
            for part in parents:
                target = target[part]
            target[leaf] = value
        return RunConfig.model_validate(data)


def load_config(source: Union[str, Path, None]) -> RunConfig:
    if source is None:
        return RunConfig()
    try:
        with open(source, encoding="utf-8") as handle:
            payload = yaml.safe_load(handle) or {}
    except OSError as e:
        raise InputError(f"cannot read config {source}: {e}") from e
    except yaml.YAMLError as e:
        raise InputError(f"config {source} is not valid YAML: {e}") from e
    if not isinstance(payload, dict):
        raise InputError(f"config {source} must be a mapping at the top level")
    return RunConfig.model_validate(payload)
