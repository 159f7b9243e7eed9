from typing import List, Optional, Tuple

import numpy as np
from scipy.special import expit, logit

from ..database.Counts import CountData
from ..errors import ConstraintError, InputError
from .Fit import FitResult
from .Informativeness import LogitNormalParams, informativeness, sigma2_for
from .Model import Model
from .Sampler import ChainConfig, State, UpdateBlock, metropolis_step, run_chain

MU_RANGE = (-10.0, 10.0)


def binomial_logit_loglik(theta, y, n):
    """log Bin(y | n, expit(theta)) up to a constant, component-wise."""
    return y * theta - n * np.logaddexp(0.0, theta)


def empirical_logit(y, n):
    """logit of y/n with +0.5/+1 continuity correction at y in {0, n}."""
    y = np.asarray(y, dtype=float)
    n = np.asarray(n, dtype=float)
    edge = (y == 0) | (y == n)
    p = np.where(edge, (y + 0.5) / (n + 1.0), y / np.where(n > 0, n, 1.0))
    return logit(p)


class LogitNormalModel(Model):
    """y_i ~ Bin(n_i, pi_i), logit(pi_i) = theta_i ~ N(mu, 1/gamma),
    mu ~ Unif(-10, 10), gamma ~ Unif(gamma_L(mu), gamma_U(mu)).

    The gamma bounds keep a_hat inside `a_bounds`. Since a_hat is affine in
    gamma at fixed mu, the hyperprior is uniform on (mu, a_hat) over
    (-10, 10) x a_bounds and the hyperparameters are sampled on that scale.
    """

    kind = "logitnormal"

    def __init__(
        self,
        data: CountData,
        a_bounds: Tuple[float, float] = (0.0, 100.0),
        fixed_prior: Optional[LogitNormalParams] = None,
    ):
        super().__init__()
        a_lo, a_hi = a_bounds
        if fixed_prior is None:
            if a_lo < 0:
                raise InputError(f"lower informativeness bound must be non-negative, got {a_lo}")
            if not a_lo < a_hi:
                raise ConstraintError(f"informativeness bounds {a_bounds} leave an empty support for every mu")
            if data.size < 2:
                raise InputError("the hierarchical logitnormal model needs at least 2 regions")
        self.data = data
        self.a_bounds = (float(a_lo), float(a_hi))
        self.fixed_prior = fixed_prior
        self.y = data.events
        self.n = data.trials
        self.parameter_names: List[str] = ["mu", "sigma2", "pi0"] + [f"pi[{rid}]" for rid in data.region_ids]
        self.derived_names: List[str] = ["a_hat"]

    # ------------------------
    # State
    # ------------------------
    def sigma2(self, state: State) -> float:
        if self.fixed_prior is not None:
            return self.fixed_prior.sigma2
        return float(sigma2_for(state["mu"], state["a_hat"]))

    def initial_state(self, rng: np.random.Generator) -> State:
        theta = empirical_logit(self.y, self.n)
        pooled = float(empirical_logit(self.y.sum(), self.n.sum()))
        theta = np.where(self.n > 0, theta, pooled)
        if self.fixed_prior is not None:
            mu = self.fixed_prior.mu
            a_hat = float(informativeness(mu, self.fixed_prior.sigma2))
        else:
            mu = float(np.clip(pooled, MU_RANGE[0] + 0.1, MU_RANGE[1] - 0.1))
            a_lo, a_hi = self.a_bounds
            a_hat = a_lo + 0.1 * (a_hi - a_lo)
        return {"theta": theta, "mu": mu, "a_hat": a_hat}

    def blocks(self) -> List[UpdateBlock]:
        blocks = [UpdateBlock("theta", self.data.size, self._update_theta)]
        if self.fixed_prior is None:
            blocks += [
                UpdateBlock("mu", 1, self._update_mu),
                UpdateBlock("a_hat", 1, self._update_a_hat),
            ]
        return blocks

    # ------------------------
    # Updates
    # ------------------------
    def _update_theta(self, state: State, rng, scale) -> np.ndarray:
        mu, s2 = state["mu"], self.sigma2(state)

        def log_target(theta):
            return binomial_logit_loglik(theta, self.y, self.n) - 0.5 * (theta - mu) ** 2 / s2

        state["theta"], _, accepted = metropolis_step(state["theta"], log_target, scale, rng)
        return accepted

    def _hyper_log_density(self, mu: float, a_hat: float, theta: np.ndarray) -> float:
        s2 = float(sigma2_for(mu, a_hat))
        return float(-0.5 * theta.size * np.log(s2) - 0.5 * np.sum((theta - mu) ** 2) / s2)

    def _update_mu(self, state: State, rng, scale) -> np.ndarray:
        lo, hi = MU_RANGE
        width = hi - lo
        a_hat, theta = state["a_hat"], state["theta"]

        def log_target(u):
            frac = expit(u[0])
            if not 0 < frac < 1:
                return np.array([-np.inf])
            mu = lo + width * frac
            return np.array([self._hyper_log_density(mu, a_hat, theta) + np.log(frac) + np.log1p(-frac)])

        u, _, accepted = metropolis_step(np.array([logit((state["mu"] - lo) / width)]), log_target, scale, rng)
        state["mu"] = float(lo + width * expit(u[0]))
        return accepted

    def _update_a_hat(self, state: State, rng, scale) -> np.ndarray:
        lo, hi = self.a_bounds
        width = hi - lo
        mu, theta = state["mu"], state["theta"]

        def log_target(u):
            frac = expit(u[0])
            if not 0 < frac < 1:
                return np.array([-np.inf])
            a_hat = lo + width * frac
            return np.array([self._hyper_log_density(mu, a_hat, theta) + np.log(frac) + np.log1p(-frac)])

        u, _, accepted = metropolis_step(np.array([logit((state["a_hat"] - lo) / width)]), log_target, scale, rng)
        state["a_hat"] = float(lo + width * expit(u[0]))
        return accepted

    # ------------------------
    # Output
    # ------------------------
    def in_support(self, state: State) -> bool:
        if not np.all(np.isfinite(state["theta"])):
            return False
        if self.fixed_prior is not None:
            return True
        lo, hi = self.a_bounds
        return bool(MU_RANGE[0] < state["mu"] < MU_RANGE[1] and lo < state["a_hat"] < hi)

    def record(self, state: State) -> np.ndarray:
        mu = state["mu"]
        return np.concatenate([[mu, self.sigma2(state), expit(mu)], expit(state["theta"])])

    def derive(self, state: State) -> np.ndarray:
        if self.fixed_prior is None:
            return np.array([state["a_hat"]])
        return np.array([informativeness(state["mu"], self.sigma2(state))])


def fit_logitnormal(
    data: CountData,
    config: ChainConfig,
    a_bounds: Tuple[float, float] = (0.0, 100.0),
    fixed_prior: Optional[LogitNormalParams] = None,
) -> FitResult:
    model = LogitNormalModel(data, a_bounds=a_bounds, fixed_prior=fixed_prior)
    samples = run_chain(model, config)
    settings = {"model": model.kind, "a_lo": model.a_bounds[0], "a_hi": model.a_bounds[1]}
    if fixed_prior is not None:
        settings.update(fixed_mu=fixed_prior.mu, fixed_sigma2=fixed_prior.sigma2)
    return FitResult.from_samples(model.kind, data, samples, measure="a_hat", settings=settings)
