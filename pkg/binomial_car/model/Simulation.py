"""Simulation study comparing the beta-binomial and logitnormal hierarchies.

Datasets are drawn from the beta-binomial model over a grid of
(regions, a, pi0) cells and fitted under both hierarchies. Each replicate has
its own substream of the base seed, so results do not depend on `jobs` or on
completion order.
"""

import math
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from ..database.Counts import CountData
from ..errors import BinomialCarError, InputError
from .BetaBinomial import fit_beta_binomial
from .LogitNormal import fit_logitnormal
from .Model import get_logger
from .Sampler import ChainConfig, make_rng

logger = get_logger(__name__)

MODELS = ("beta_binomial", "logitnormal")
RECORD_COLUMNS = ["cell", "I", "a", "pi0", "replicate", "model", "informativeness", "pi0_estimate", "error"]
EXPECTED_EVENTS = (1.0, 20.0)
TRIAL_RULE = "n_i ~ uniform integer on [ceil(1/pi0), floor(20/pi0)], resampled per replicate"


class ScenarioGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    I_values: Tuple[int, ...] = (50, 100, 200)
    a_values: Tuple[float, ...] = (4.0, 8.0, 12.0, 16.0, 20.0)
    pi0_values: Tuple[float, ...] = (0.01, 0.05, 0.10, 0.20, 0.40)
    L: int = Field(100, ge=0, description="replicates per cell")
    seed: int = Field(0, ge=0)

    @field_validator("I_values", "a_values")
    @classmethod
    def check_positive(cls, values):
        if not values or any(v <= 0 for v in values):
            raise ValueError(f"grid values must be positive and non-empty, got {values}")
        return values

    @field_validator("pi0_values")
    @classmethod
    def check_rates(cls, values):
        if not values or any(not 0 < v < 1 for v in values):
            raise ValueError(f"pi0 values must lie in (0, 1), got {values}")
        return values

    def cells(self) -> List[Tuple[int, int, float, float]]:
        """(cell index, I, a, pi0) in I-major order."""
        combos = [(I, a, p) for I in self.I_values for a in self.a_values for p in self.pi0_values]
        return [(k, I, a, p) for k, (I, a, p) in enumerate(combos)]


def trial_range(pi0: float) -> Tuple[int, int]:
    """Integer trial counts giving between 1 and 20 expected events."""
    lo = math.ceil(EXPECTED_EVENTS[0] / pi0 - 1e-9)
    hi = math.floor(EXPECTED_EVENTS[1] / pi0 + 1e-9)
    if lo > hi:
        raise InputError(f"pi0={pi0} leaves no trial count with 1 to 20 expected events")
    return lo, hi


def generate_dataset(I: int, a: float, pi0: float, seed: int, key: Tuple[int, ...] = ()) -> CountData:
    if I < 1:
        raise InputError(f"need at least one region, got I={I}")
    if a <= 0:
        raise InputError(f"a must be positive, got {a}")
    if not 0 < pi0 < 1:
        raise InputError(f"pi0 must lie in (0, 1), got {pi0}")
    lo, hi = trial_range(pi0)
    rng = make_rng(seed, *key)
    b = a * (1.0 - pi0) / pi0
    n = rng.integers(lo, hi, size=I, endpoint=True)
    pi = rng.beta(a, b, size=I)
    y = rng.binomial(n, pi)
    return CountData.from_arrays(n, y, stratum="simulated")


def _chain_for(chain: ChainConfig, seed: int, cell: int, replicate: int) -> ChainConfig:
    derived = int(np.random.SeedSequence(seed, spawn_key=(cell, replicate, 1)).generate_state(1)[0])
    return chain.model_copy(update={"seed": derived})


def _replicate(cell: int, I: int, a: float, pi0: float, replicate: int, seed: int, chain: ChainConfig) -> List[Dict]:
    base = {"cell": cell, "I": I, "a": a, "pi0": pi0, "replicate": replicate}
    data = generate_dataset(I, a, pi0, seed, key=(cell, replicate, 0))
    config = _chain_for(chain, seed, cell, replicate)
    rows = []
    for name, fit in (("beta_binomial", fit_beta_binomial), ("logitnormal", fit_logitnormal)):
        try:
            result = fit(data, config)
            rows.append({
                **base,
                "model": name,
                "informativeness": float(result.informativeness.mean()),
                "pi0_estimate": float(result.samples.column("pi0").mean()),
                "error": "",
            })
        except BinomialCarError as e:
            logger.warning(f"cell {cell} replicate {replicate} ({name}) failed: {e}")
            rows.append({**base, "model": name, "informativeness": np.nan, "pi0_estimate": np.nan, "error": str(e)})
    return rows


class StudyResult(BaseModel):
    """Posterior means per (cell, replicate, model)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: ScenarioGrid
    chain: ChainConfig
    records: pd.DataFrame

    @property
    def metadata(self) -> Dict[str, str]:
        return {
            "trial_rule": TRIAL_RULE,
            "replicates": str(self.grid.L),
            "grid_seed": str(self.grid.seed),
            "failed_fits": str(int((self.records["error"] != "").sum())),
        }

    def summary(self) -> pd.DataFrame:
        """Per-cell mean estimates, RMSEs and RMSE ratios."""
        columns = ["cell", "I", "a", "pi0"]
        frame = pd.DataFrame(
            [{"cell": k, "I": I, "a": a, "pi0": p} for k, I, a, p in self.grid.cells()], columns=columns
        )
        for target, column, truth in (("informativeness", "informativeness", "a"), ("pi0", "pi0_estimate", "pi0")):
            for model in MODELS:
                rows = self.records[self.records["model"] == model]
                means = rows.groupby("cell")[column].mean()
                frame[f"mean_{target}_{model}"] = frame["cell"].map(means)
                frame[f"rmse_{target}_{model}"] = frame["cell"].map(_cell_rmse(rows, column, truth))
            ratios = rmse_ratio(self, target)
            frame[f"ratio_{target}"] = ratios["ratio"].to_numpy()
            frame[f"zero_denominator_{target}"] = ratios["zero_denominator"].to_numpy()
        return frame


def _cell_rmse(rows: pd.DataFrame, column: str, truth: str) -> pd.Series:
    if rows.empty:
        return pd.Series(dtype=float)
    sq = (rows[column] - rows[truth]) ** 2
    return np.sqrt(sq.groupby(rows["cell"]).mean())


def rmse_ratio(result: StudyResult, target: str) -> pd.DataFrame:
    """RMSE(logitnormal) / RMSE(beta-binomial) per cell; above 1 favours the beta-binomial.

    A zero or missing denominator gives NaN with `zero_denominator` set.
    """
    column, truth = {"informativeness": ("informativeness", "a"), "pi0": ("pi0_estimate", "pi0")}.get(target, (None, None))
    if column is None:
        raise InputError(f"target must be 'informativeness' or 'pi0', got {target!r}")
    records = result.records
    beta = _cell_rmse(records[records["model"] == "beta_binomial"], column, truth)
    logitnormal = _cell_rmse(records[records["model"] == "logitnormal"], column, truth)
    rows = []
    for cell, I, a, pi0 in result.grid.cells():
        num, den = logitnormal.get(cell, np.nan), beta.get(cell, np.nan)
        zero = not (np.isfinite(den) and den > 0)
        rows.append({"cell": cell, "I": I, "a": a, "pi0": pi0, "ratio": np.nan if zero else num / den, "zero_denominator": zero})
    return pd.DataFrame(rows, columns=["cell", "I", "a", "pi0", "ratio", "zero_denominator"])


def run_study(grid: ScenarioGrid, chain: ChainConfig, jobs: int = 1, progress: bool = False) -> StudyResult:
    tasks = [
        (cell, I, a, pi0, rep)
        for cell, I, a, pi0 in grid.cells()
        for rep in range(grid.L)
    ]
    logger.info(f"simulation study: {len(grid.cells())} cells x {grid.L} replicates, jobs={jobs}")
    rows: List[Dict] = []
    if tasks:
        results = Parallel(n_jobs=jobs, return_as="generator")(
            delayed(_replicate)(cell, I, a, pi0, rep, grid.seed, chain) for cell, I, a, pi0, rep in tasks
        )
        for chunk in tqdm(results, total=len(tasks), disable=not progress, desc="replicates"):
            rows.extend(chunk)
    records = pd.DataFrame(rows, columns=RECORD_COLUMNS)
    if not records.empty:
        records = records.sort_values(["cell", "replicate", "model"], kind="mergesort").reset_index(drop=True)
    return StudyResult(grid=grid, chain=chain, records=records)
