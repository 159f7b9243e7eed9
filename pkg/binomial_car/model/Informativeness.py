"""Closed-form mathematics linking beta and logitnormal priors.

Informativeness is measured in equivalent prior events: a Beta(a, b) prior
carries exactly `a`, and a logitnormal prior LogitNorm(mu, sigma2) is matched
to the beta prior with the same delta-method mean and variance.

Every formula works in log space through `logaddexp`/`expit`, so large |mu|
does not overflow the intermediate exp(mu) terms.
"""

import math
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats
from scipy.special import expit, logsumexp

from ..errors import InputError
from .Model import get_logger

logger = get_logger(__name__)


class BetaParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float = Field(gt=0, description="prior event count")
    b: float = Field(gt=0, description="prior non-event count")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def variance(self) -> float:
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1.0))


class LogitNormalParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float
    sigma2: float = Field(gt=0)


class CarHyperState(BaseModel):
    model_config = ConfigDict(frozen=True)

    xbeta: float
    sigma2: float = Field(gt=0)
    tau2: float = Field(gt=0)
    m: int = Field(ge=1)


class Sigma2Bounds(NamedTuple):
    sigma2_lo: float
    sigma2_hi: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.sigma2_hi)

    @property
    def gamma_lo(self) -> float:
        return 0.0 if self.unbounded else 1.0 / self.sigma2_hi

    @property
    def gamma_hi(self) -> float:
        return 1.0 / self.sigma2_lo


# ------------------------
# Vectorised kernels
# ------------------------
def one_plus_exp(mu):
    return np.exp(np.logaddexp(0.0, mu))


def informativeness(mu, sigma2):
    """a_hat = (1 + e^mu) / sigma2 - e^mu / (1 + e^mu); arrays broadcast."""
    return one_plus_exp(mu) / sigma2 - expit(mu)


def car_bound(xbeta, sigma2, tau2, m):
    """Lower bound on the informativeness of the CAR prior for a region with m
    neighbours, from the conditional variance bound sigma2 + (sigma2 + tau2) / m."""
    return informativeness(xbeta, sigma2 + (sigma2 + tau2) / m)


def sigma2_for(mu, a_hat):
    """Inverse of `informativeness` in sigma2 at fixed mu."""
    return one_plus_exp(mu) / (a_hat + expit(mu))


# ------------------------
# Typed operations
# ------------------------
def beta_posterior(y: int, n: int, prior: BetaParams) -> BetaParams:
    if y < 0 or n < 0:
        raise InputError(f"counts must be non-negative, got y={y}, n={n}")
    if y > n:
        raise InputError(f"events exceed trials: y={y} > n={n}")
    return BetaParams(a=y + prior.a, b=n - y + prior.b)


def delta_moments(p: LogitNormalParams) -> tuple[float, float]:
    """Delta-method mean and variance of expit(theta), theta ~ N(mu, sigma2).

    The variance uses the squared first derivative of the inverse logit.
    """
    mean = float(expit(p.mu))
    slope = mean * float(expit(-p.mu))
    return mean, p.sigma2 * slope * slope


def beta_to_logitnormal(prior: BetaParams) -> LogitNormalParams:
    a, b = prior.a, prior.b
    s = a + b
    return LogitNormalParams(mu=math.log(a) - math.log(b), sigma2=s * s / (a * b * (s + 1.0)))


def logitnormal_informativeness(p: LogitNormalParams) -> float:
    return float(informativeness(p.mu, p.sigma2))


def logitnormal_to_beta(p: LogitNormalParams) -> BetaParams:
    a_hat = logitnormal_informativeness(p)
    if not a_hat > 0:
        raise InputError(
            f"logitnormal prior (mu={p.mu}, sigma2={p.sigma2}) implies a_hat={a_hat:.6g}; "
            "no beta prior matches a non-positive event count"
        )
    return BetaParams(a=a_hat, b=a_hat * math.exp(-p.mu))


def car_informativeness(h: CarHyperState) -> float:
    return float(car_bound(h.xbeta, h.sigma2, h.tau2, h.m))


def global_informativeness(h: CarHyperState, m0: int = 3) -> float:
    return float(car_bound(h.xbeta, h.sigma2, h.tau2, m0))


def informativeness_sigma2_bounds(mu: float, a_lo: float, a_hi: float) -> Sigma2Bounds:
    """sigma2 range keeping a_hat in (a_lo, a_hi) at location mu.

    a_hat decreases in sigma2, so a_hi gives the lower sigma2 bound and a_lo the
    upper one. When a_lo + expit(mu) <= 0 the upper bound is +inf.
    """
    if not 0 <= a_lo < a_hi:
        raise InputError(f"informativeness bounds must satisfy 0 <= a_lo < a_hi, got ({a_lo}, {a_hi})")
    shift = float(expit(mu))
    sigma2_lo = float(sigma2_for(mu, a_hi))
    if a_lo + shift <= 0:
        logger.warning(f"a_lo={a_lo} leaves sigma2 unbounded above at mu={mu}")
        return Sigma2Bounds(sigma2_lo, math.inf)
    return Sigma2Bounds(sigma2_lo, float(sigma2_for(mu, a_lo)))


# ------------------------
# Posterior quantiles (approximation accuracy)
# ------------------------
def beta_posterior_quantiles(y: int, n: int, prior: BetaParams, probs: Sequence[float]) -> np.ndarray:
    post = beta_posterior(y, n, prior)
    return stats.beta.ppf(np.asarray(probs, dtype=float), post.a, post.b)


def logitnormal_posterior_quantiles(
    y: int, n: int, prior: LogitNormalParams, probs: Sequence[float], grid_size: int = 200001
) -> np.ndarray:
    """Quantiles of pi under a binomial likelihood and a logitnormal prior.

    Numerical integration on a dense theta grid spanning the prior +-12 sd
    widened toward the empirical logit; the CDF is accumulated with the
    trapezoidal rule and inverted by linear interpolation.
    """
    if y < 0 or y > n:
        raise InputError(f"invalid counts y={y}, n={n}")
    sd = math.sqrt(prior.sigma2)
    lo, hi = prior.mu - 12 * sd, prior.mu + 12 * sd
    if n > 0:
        emp = math.log((y + 0.5) / (n - y + 0.5))
        lo, hi = min(lo, emp - 12.0), max(hi, emp + 12.0)
    theta = np.linspace(lo, hi, grid_size)
    log_dens = (
        y * theta
        - n * np.logaddexp(0.0, theta)
        - 0.5 * (theta - prior.mu) ** 2 / prior.sigma2
    )
    dens = np.exp(log_dens - logsumexp(log_dens))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]))])
    cdf /= cdf[-1]
    return expit(np.interp(np.asarray(probs, dtype=float), cdf, theta))


def compare_prior_quantiles(
    a: float, pi0: float, counts: Sequence[int], probs: Sequence[float] = (0.025, 0.5, 0.975)
) -> pd.DataFrame:
    """Beta versus moment-matched logitnormal posterior quantiles when the data
    agree with the prior mean (y / n = pi0)."""
    if not 0 < pi0 < 1:
        raise InputError(f"pi0 must lie in (0, 1), got {pi0}")
    beta_prior = BetaParams(a=a, b=a * (1 - pi0) / pi0)
    ln_prior = beta_to_logitnormal(beta_prior)
    rows = []
    for y in counts:
        n = int(round(y / pi0))
        q_beta = beta_posterior_quantiles(y, n, beta_prior, probs)
        q_ln = logitnormal_posterior_quantiles(y, n, ln_prior, probs)
        for p, qb, ql in zip(probs, q_beta, q_ln):
            rows.append({
                "y": y, "n": n, "prob": p,
                "beta": qb, "logitnormal": ql,
                "abs_diff": ql - qb, "rel_diff": (ql - qb) / qb,
            })
    return pd.DataFrame(rows)
