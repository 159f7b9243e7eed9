from typing import Dict, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..errors import InputError


class EffectiveSampleSize(NamedTuple):
    value: float
    degenerate: bool = False


class Diagnostics(BaseModel):
    model_config = ConfigDict(frozen=True)

    ess: Dict[str, float]
    geweke: Dict[str, float]
    acceptance: Dict[str, float]


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Normalised autocorrelation at all lags via FFT."""
    n = len(x)
    centered = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conjugate(spectrum), size)[:n] / n
    return acov / acov[0]


def effective_sample_size(draws) -> EffectiveSampleSize:
    """Geyer's initial positive sequence estimator, capped at N."""
    x = np.asarray(draws, dtype=float)
    n = len(x)
    if n < 10:
        raise InputError(f"effective sample size needs at least 10 draws, got {n}")
    if np.ptp(x) == 0:
        return EffectiveSampleSize(float(n), degenerate=True)

    rho = autocorrelation(x)
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    total = 0.0
    for gamma in pairs:
        if gamma <= 0:
            break
        total += gamma
    tau = -1.0 + 2.0 * total
    if tau <= 0:
        return EffectiveSampleSize(float(n))
    return EffectiveSampleSize(float(min(n, n / tau)))


def geweke(draws, first_frac: float = 0.1, last_frac: float = 0.5) -> float:
    """z-score comparing the mean of the first and last windows of a chain.

    Window variances are spectral-density estimates at zero, taken here as
    variance / ESS of each window.
    """
    x = np.asarray(draws, dtype=float)
    if not (0 < first_frac < 1 and 0 < last_frac < 1):
        raise InputError("window fractions must lie in (0, 1)")
    if first_frac + last_frac > 1:
        raise InputError(f"windows overlap: first_frac + last_frac = {first_frac + last_frac} > 1")
    n = len(x)
    first = x[: int(first_frac * n)]
    last = x[n - int(last_frac * n):]
    if len(first) < 10 or len(last) < 10:
        raise InputError(f"series of {n} draws is too short for Geweke windows of at least 10 points")

    def mean_variance(window):
        ess = effective_sample_size(window)
        return window.var(ddof=1) / ess.value

    se2 = mean_variance(first) + mean_variance(last)
    if se2 == 0:
        return 0.0 if first.mean() == last.mean() else float(np.sign(first.mean() - last.mean()) * np.inf)
    return float((first.mean() - last.mean()) / np.sqrt(se2))


def diagnose(samples) -> Diagnostics:
    """ESS and Geweke per recorded column and derived quantity of a chain."""
    columns = list(zip(samples.names, samples.draws.T)) + list(zip(samples.derived_names, samples.derived.T))
    ess: Dict[str, float] = {}
    z: Dict[str, float] = {}
    for name, series in columns:
        if len(series) < 10:
            ess[name], z[name] = float(len(series)), float("nan")
            continue
        ess[name] = effective_sample_size(series).value
        try:
            z[name] = geweke(series)
        except InputError:
            z[name] = float("nan")
    return Diagnostics(ess=ess, geweke=z, acceptance=dict(samples.acceptance))
