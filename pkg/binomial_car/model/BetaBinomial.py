from typing import List, Optional

import numpy as np
from scipy.special import betaln, expit, logit

from ..database.Counts import CountData
from ..errors import FitError, InputError
from .Fit import FitResult
from .Informativeness import BetaParams
from .Model import Model
from .Sampler import ChainConfig, State, UpdateBlock, metropolis_step, run_chain

A_MAX = 100.0
TINY = 1e-300


class BetaBinomialModel(Model):
    """y_i ~ Bin(n_i, pi_i), pi_i ~ Beta(a, b), b = a (1 - pi0) / pi0,
    a ~ Unif(0, 100), pi0 ~ Unif(0, 1).

    (a, pi0) move by random-walk Metropolis on logit scales against the
    marginal likelihood with pi integrated out; each sweep then draws pi
    exactly from its conjugate full conditional.
    """

    kind = "beta_binomial"

    def __init__(self, data: CountData, fixed_prior: Optional[BetaParams] = None):
        super().__init__()
        if data.size < 2 and fixed_prior is None:
            raise InputError("the hierarchical beta-binomial model needs at least 2 regions")
        if not data.trials.any():
            raise FitError("every region has n = 0; the data carry no information")
        self.data = data
        self.fixed_prior = fixed_prior
        self.y = data.events
        self.n = data.trials
        self.parameter_names: List[str] = ["a", "b", "pi0"] + [f"pi[{rid}]" for rid in data.region_ids]
        self.derived_names: List[str] = []

    def b_of(self, state: State) -> float:
        if self.fixed_prior is not None:
            return self.fixed_prior.b
        return state["a"] * (1.0 - state["pi0"]) / state["pi0"]

    def initial_state(self, rng: np.random.Generator) -> State:
        if self.fixed_prior is not None:
            state = {"a": self.fixed_prior.a, "pi0": self.fixed_prior.mean}
        else:
            pooled = (self.y.sum() + 0.5) / (self.n.sum() + 1.0)
            state = {"a": 10.0, "pi0": float(pooled)}
        self._draw_pi(state, rng)
        return state

    def _log_marginal(self, a: float, pi0: float) -> float:
        if not (0 < a < A_MAX and 0 < pi0 < 1):
            return -np.inf
        b = a * (1.0 - pi0) / pi0
        return float(np.sum(betaln(self.y + a, self.n - self.y + b) - betaln(a, b)))

    def blocks(self) -> List[UpdateBlock]:
        blocks = []
        if self.fixed_prior is None:
            blocks += [
                UpdateBlock("a", 1, self._update_a),
                UpdateBlock("pi0", 1, self._update_pi0),
            ]
        blocks.append(UpdateBlock("pi", self.data.size, self._update_pi, adaptive=False))
        return blocks

    def _update_a(self, state: State, rng, scale) -> np.ndarray:
        pi0 = state["pi0"]

        def log_target(u):
            a = A_MAX * expit(u[0])
            lp = self._log_marginal(a, pi0)
            return np.array([lp + np.log(a) + np.log1p(-a / A_MAX) if np.isfinite(lp) else -np.inf])

        u, _, accepted = metropolis_step(np.array([logit(state["a"] / A_MAX)]), log_target, scale, rng)
        state["a"] = float(A_MAX * expit(u[0]))
        return accepted

    def _update_pi0(self, state: State, rng, scale) -> np.ndarray:
        a = state["a"]

        def log_target(v):
            pi0 = expit(v[0])
            lp = self._log_marginal(a, pi0)
            return np.array([lp + np.log(pi0) + np.log1p(-pi0) if np.isfinite(lp) else -np.inf])

        v, _, accepted = metropolis_step(np.array([logit(state["pi0"])]), log_target, scale, rng)
        state["pi0"] = float(expit(v[0]))
        return accepted

    def _draw_pi(self, state: State, rng) -> None:
        pi = rng.beta(self.y + state["a"], self.n - self.y + self.b_of(state))
        state["pi"] = np.clip(pi, TINY, 1.0 - 1e-16)

    def _update_pi(self, state: State, rng, scale) -> np.ndarray:
        self._draw_pi(state, rng)
        return np.ones(self.data.size)

    def in_support(self, state: State) -> bool:
        pi = state["pi"]
        return bool(0 < state["a"] and 0 < state["pi0"] < 1 and np.all((pi > 0) & (pi < 1)))

    def record(self, state: State) -> np.ndarray:
        return np.concatenate([[state["a"], self.b_of(state), state["pi0"]], state["pi"]])

    def derive(self, state: State) -> np.ndarray:
        return np.empty(0)


def fit_beta_binomial(
    data: CountData, config: ChainConfig, fixed_prior: Optional[BetaParams] = None
) -> FitResult:
    model = BetaBinomialModel(data, fixed_prior=fixed_prior)
    samples = run_chain(model, config)
    settings = {"model": model.kind, "a_max": A_MAX}
    if fixed_prior is not None:
        settings.update(fixed_a=fixed_prior.a, fixed_b=fixed_prior.b)
    return FitResult.from_samples(model.kind, data, samples, measure="a", settings=settings)
