"""Posterior summaries, crude rates and between-stratum disparities."""

import math
from typing import List, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from ..database.Counts import CountData, CountTable
from ..errors import InputError
from .Fit import FitResult, posterior_informativeness
from .Model import get_logger

logger = get_logger(__name__)

DEFAULT_QUANTILES = (0.025, 0.5, 0.975)
DISPARITY_CAVEAT = (
    "strata may not be mutually exclusive (an individual can be counted in more than one group); "
    "ratios compare group rates and carry no correction for overlap"
)


def crude_rates(data: CountData) -> np.ndarray:
    """y_i / n_i, NaN where n_i = 0."""
    n = data.trials
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, data.events / np.where(n > 0, n, 1.0), np.nan)


def quantile_label(p: float) -> str:
    return f"q{p:g}"


def _check_probs(quantiles: Sequence[float]) -> List[float]:
    probs = [float(p) for p in quantiles]
    if not probs:
        raise InputError("at least one quantile is required")
    bad = [p for p in probs if not 0 <= p <= 1]
    if bad:
        raise InputError(f"quantiles must lie in [0, 1], got {bad}")
    return sorted(probs)


def summarize(fit: FitResult, quantiles: Sequence[float] = DEFAULT_QUANTILES, data: CountData = None) -> pd.DataFrame:
    """One row per region: crude rate (when `data` is given), posterior mean,
    sd and the requested quantiles of pi, followed by the fit's
    informativeness summary repeated on every row."""
    probs = _check_probs(quantiles)
    draws = fit.pi_draws
    frame = pd.DataFrame({"region_id": list(fit.region_ids)})
    if data is not None:
        if tuple(data.region_ids) != tuple(fit.region_ids):
            raise InputError("count data and fit cover different regions")
        frame["crude_rate"] = crude_rates(data)
    frame["mean"] = draws.mean(axis=0)
    frame["sd"] = draws.std(axis=0, ddof=1) if draws.shape[0] > 1 else 0.0
    for p, row in zip(probs, np.quantile(draws, probs, axis=0)):
        frame[quantile_label(p)] = row

    info = posterior_informativeness(fit)
    measure = info.measure
    frame[f"{measure}_mean"] = info.mean
    frame[f"{measure}_median"] = info.median
    frame[f"{measure}_q0.025"] = info.q025
    frame[f"{measure}_q0.975"] = info.q975
    return frame


class DisparityEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    region_id: str
    mean: float
    median: float
    q025: float
    q975: float
    significant: bool

    @model_validator(mode="after")
    def check_interval(self):
        if not self.q025 <= self.median <= self.q975:
            raise ValueError(f"{self.region_id}: quantiles out of order")
        if self.significant != (self.q025 > 1 or self.q975 < 1):
            raise ValueError(f"{self.region_id}: significance flag disagrees with the interval")
        return self


def disparity(fit_a: FitResult, fit_b: FitResult) -> List[DisparityEstimate]:
    """Rate ratio pi_a / pi_b per region, pairing draws by index.

    `fit_a` is the comparison stratum, `fit_b` the reference. A region is
    significant when its 95% equal-tailed interval excludes 1.
    """
    if tuple(fit_a.region_ids) != tuple(fit_b.region_ids):
        raise InputError(f"strata {fit_a.stratum!r} and {fit_b.stratum!r} cover different regions")
    if fit_a.n_draws != fit_b.n_draws:
        raise InputError(f"retained draw counts differ ({fit_a.n_draws} vs {fit_b.n_draws})")
    ratio = fit_a.pi_draws / fit_b.pi_draws
    q025, median, q975 = np.quantile(ratio, [0.025, 0.5, 0.975], axis=0)
    means = ratio.mean(axis=0)
    estimates = [
        DisparityEstimate(
            region_id=rid,
            mean=float(means[i]),
            median=float(median[i]),
            q025=float(q025[i]),
            q975=float(q975[i]),
            significant=bool(q025[i] > 1 or q975[i] < 1),
        )
        for i, rid in enumerate(fit_a.region_ids)
    ]
    flagged = sum(e.significant for e in estimates)
    logger.info(f"disparity {fit_a.stratum}/{fit_b.stratum}: {flagged} of {len(estimates)} regions significant")
    return estimates


def disparity_frame(estimates: Sequence[DisparityEstimate]) -> pd.DataFrame:
    columns = ["region_id", "mean", "median", "q025", "q975", "significant"]
    return pd.DataFrame([e.model_dump() for e in estimates], columns=columns)


def describe_counts(table: CountTable) -> pd.DataFrame:
    """Per-stratum totals and the sparsity of the per-region counts."""
    rows = []
    for stratum in table.strata():
        part = table.frame[table.frame["stratum"] == stratum]
        trials, events = int(part["n"].sum()), int(part["y"].sum())
        rows.append({
            "stratum": stratum,
            "regions": len(part),
            "trials": trials,
            "events": events,
            "rate": events / trials if trials else math.nan,
            "regions_under_10_trials": int((part["n"] < 10).sum()),
            "regions_under_10_events": int((part["y"] < 10).sum()),
            "median_events": float(part["y"].median()),
        })
    columns = [
        "stratum", "regions", "trials", "events", "rate",
        "regions_under_10_trials", "regions_under_10_events", "median_events",
    ]
    return pd.DataFrame(rows, columns=columns)


def suggest_a0_threshold(data: CountData) -> float:
    """Mean events per region: a prior carrying more than this outweighs a typical region's data."""
    if data.size == 0:
        raise InputError("no regions to average over")
    return float(data.events.sum() / data.size)


def years_to_threshold(data: CountData, a_hat: float, target: float, years: int = 1) -> pd.Series:
    """Years of data each region needs before y_i + a_hat reaches `target`,
    assuming the annual event count stays at y_i / years.

    Regions with no events never get there and report <NA>.
    """
    if years < 1:
        raise InputError(f"years must be at least 1, got {years}")
    if a_hat < 0:
        raise InputError(f"a_hat must be non-negative, got {a_hat}")
    annual = data.events / years
    needed = max(target - a_hat, 0.0)
    values = []
    for rate in annual:
        if needed == 0:
            values.append(1)
        elif rate > 0:
            values.append(max(1, math.ceil(needed / rate - 1e-12)))
        else:
            values.append(pd.NA)
    return pd.Series(values, index=list(data.region_ids), dtype="Int64", name="years")
