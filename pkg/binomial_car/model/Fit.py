from typing import Any, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .Diagnostics import Diagnostics, diagnose
from .Sampler import PosteriorSamples


class InformativenessSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    measure: str
    mean: float
    median: float
    q025: float
    q975: float
    draws: int


class FitResult(BaseModel):
    """Completed fit: hyperparameter draws, per-region pi draws and per-draw
    informativeness (a, a_hat or a0 depending on the model)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: str
    stratum: str
    region_ids: Tuple[str, ...]
    samples: PosteriorSamples
    pi_draws: np.ndarray
    informativeness: np.ndarray
    measure: str
    diagnostics: Diagnostics
    settings: Dict[str, Any] = {}

    @property
    def hyper_names(self) -> List[str]:
        return [name for name in self.samples.names if "[" not in name]

    @property
    def n_draws(self) -> int:
        return self.pi_draws.shape[0]

    @classmethod
    def from_samples(cls, kind: str, data, samples: PosteriorSamples, measure: str, settings=None) -> "FitResult":
        pi_columns = [samples.names.index(f"pi[{rid}]") for rid in data.region_ids]
        return cls(
            kind=kind,
            stratum=data.stratum,
            region_ids=tuple(data.region_ids),
            samples=samples,
            pi_draws=samples.draws[:, pi_columns],
            informativeness=samples.column(measure),
            measure=measure,
            diagnostics=diagnose(samples),
            settings=dict(settings or {}),
        )


def posterior_informativeness(fit: FitResult) -> InformativenessSummary:
    draws = fit.informativeness
    q025, median, q975 = np.quantile(draws, [0.025, 0.5, 0.975])
    return InformativenessSummary(
        measure=fit.measure,
        mean=float(draws.mean()),
        median=float(median),
        q025=float(q025),
        q975=float(q975),
        draws=len(draws),
    )
