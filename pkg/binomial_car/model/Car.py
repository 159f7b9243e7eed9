"""BYM model with an optional constraint on its global informativeness.

    y_i ~ Bin(n_i, pi_i),  logit(pi_i) = theta_i
    theta_i | beta0, z, sigma2 ~ N(beta0 + z_i, sigma2)
    z_i | z_(i), tau2 ~ N(mean of neighbouring z, tau2 / m_i)
    p(beta0) flat, sigma2 ~ IG(1, 1/100), tau2 ~ IG(1, 1/7)

With a constraint the hyperparameters live on the truncated support
a0_min < a0(beta0, sigma2, tau2) < a0_max, where a0 is the CAR informativeness
bound evaluated for a region with m0 neighbours.
"""

import math
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..database.Counts import CountData
from ..database.Graph import RegionGraph, color_classes
from ..errors import ConstraintError, GraphError
from .Fit import FitResult
from .Informativeness import car_bound
from .LogitNormal import binomial_logit_loglik, empirical_logit
from .Model import Model
from .Sampler import ChainConfig, State, UpdateBlock, metropolis_step, run_chain

FALLBACK_LOG_STEP = 0.5


class A0Constraint(BaseModel):
    model_config = ConfigDict(frozen=True)

    a0_max: float = math.inf
    a0_min: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def check_order(self):
        if not self.a0_min < self.a0_max:
            raise ValueError(f"a0_min ({self.a0_min}) must be below a0_max ({self.a0_max})")
        return self

    def admits(self, a0: float) -> bool:
        return self.a0_min < a0 < self.a0_max


class CarModelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    graph: RegionGraph
    sigma2_shape: float = Field(1.0, gt=0)
    sigma2_scale: float = Field(0.01, gt=0)
    tau2_shape: float = Field(1.0, gt=0)
    tau2_scale: float = Field(1.0 / 7.0, gt=0)
    constraint: Optional[A0Constraint] = None
    m0: int = Field(3, ge=1)
    fixed_sigma2: Optional[float] = Field(None, gt=0)
    fixed_tau2: Optional[float] = Field(None, gt=0)
    fix_spatial: bool = False
    max_retries: int = Field(50, ge=1)

    @model_validator(mode="after")
    def check_pinning(self):
        if self.fix_spatial and self.fixed_tau2 is None:
            raise ValueError("fix_spatial pins z at 0 and needs fixed_tau2 for the informativeness bound")
        return self


class CarModel(Model):
    kind = "car"

    def __init__(self, data: CountData, spec: CarModelSpec):
        super().__init__()
        graph = spec.graph
        if tuple(data.region_ids) != tuple(graph.region_ids):
            raise GraphError(
                f"count data regions ({data.size}) do not match the adjacency graph order ({graph.size}); "
                "align them with CountData.from_table(..., graph=graph)"
            )
        self.data = data
        self.spec = spec
        self.y = data.events
        self.n = data.trials
        self.size = graph.size
        self.m = graph.m.astype(float)
        self.edges = graph.edges()
        self.classes = color_classes(graph)
        weights = graph.weights()
        self.class_weights = [weights[c] for c in self.classes]
        self.tau2_rank = self.size - graph.n_components
        self.parameter_names: List[str] = (
            ["beta0", "sigma2", "tau2"]
            + [f"z[{rid}]" for rid in data.region_ids]
            + [f"pi[{rid}]" for rid in data.region_ids]
        )
        self.derived_names: List[str] = ["a0"]

    # ------------------------
    # Informativeness
    # ------------------------
    def a0(self, state: State, **override) -> float:
        values = {**state, **override}
        return float(car_bound(values["beta0"], values["sigma2"], values["tau2"], self.spec.m0))

    def admits(self, state: State, **override) -> bool:
        if self.spec.constraint is None:
            return True
        return self.spec.constraint.admits(self.a0(state, **override))

    # ------------------------
    # State
    # ------------------------
    def initial_state(self, rng: np.random.Generator) -> State:
        pooled = float(empirical_logit(self.y.sum(), self.n.sum()))
        theta = np.where(self.n > 0, empirical_logit(self.y, self.n), pooled)
        state = {
            "theta": theta,
            "z": np.zeros(self.size),
            "beta0": pooled,
            "sigma2": self.spec.fixed_sigma2 or 0.1,
            "tau2": self.spec.fixed_tau2 or 0.1,
        }
        self._project(state)
        return state

    def _project(self, state: State) -> None:
        """Scale the free variances until a0 satisfies the constraint."""
        constraint = self.spec.constraint
        if constraint is None:
            return
        free = [name for name, fixed in (("sigma2", self.spec.fixed_sigma2), ("tau2", self.spec.fixed_tau2)) if fixed is None]
        for _ in range(400):
            a0 = self.a0(state)
            if constraint.admits(a0) or not free:
                break
            factor = 1.25 if a0 >= constraint.a0_max else 0.8
            for name in free:
                state[name] *= factor
        if not constraint.admits(self.a0(state)):
            raise ConstraintError(
                f"no starting point satisfies {constraint.a0_min} < a0 < {constraint.a0_max} "
                f"(a0 = {self.a0(state):.4g} at beta0 = {state['beta0']:.4g})"
            )
        self.logger.debug(f"initial state projected to a0 = {self.a0(state):.4g}")

    def blocks(self) -> List[UpdateBlock]:
        constrained = self.spec.constraint is not None
        blocks = [UpdateBlock("theta", self.size, self._update_theta)]
        if not self.spec.fix_spatial:
            blocks.append(UpdateBlock("z", self.size, self._update_z, adaptive=False))
        blocks.append(UpdateBlock("beta0", 1, self._update_beta0, adaptive=False, constrained=constrained))
        if self.spec.fixed_sigma2 is None:
            blocks.append(UpdateBlock("sigma2", 1, self._update_sigma2, adaptive=False, constrained=constrained))
        if self.spec.fixed_tau2 is None:
            blocks.append(UpdateBlock("tau2", 1, self._update_tau2, adaptive=False, constrained=constrained))
        return blocks

    # ------------------------
    # Updates
    # ------------------------
    def _update_theta(self, state: State, rng, scale) -> np.ndarray:
        centre = state["beta0"] + state["z"]
        s2 = state["sigma2"]

        def log_target(theta):
            return binomial_logit_loglik(theta, self.y, self.n) - 0.5 * (theta - centre) ** 2 / s2

        state["theta"], _, accepted = metropolis_step(state["theta"], log_target, scale, rng)
        return accepted

    def _update_z(self, state: State, rng, scale) -> np.ndarray:
        z = state["z"]
        offset = state["theta"] - state["beta0"]
        s2, t2 = state["sigma2"], state["tau2"]
        for members, weights in zip(self.classes, self.class_weights):
            m = self.m[members]
            neighbour_mean = weights.dot(z) / m
            precision = m / t2 + 1.0 / s2
            mean = (m * neighbour_mean / t2 + offset[members] / s2) / precision
            z[members] = mean + rng.standard_normal(len(members)) / np.sqrt(precision)
        z -= z.mean()
        return np.ones(self.size)

    def _truncated_draw(
        self,
        state: State,
        name: str,
        draw: Callable[[], float],
        log_density: Callable[[float], float],
        positive: bool,
        rng: np.random.Generator,
        step: float,
    ) -> np.ndarray:
        """Draw `name` from its full conditional restricted to the constraint.

        Rejection from the untruncated conditional for up to `max_retries`
        attempts, then one random-walk Metropolis step on the truncated
        conditional (log scale for variances).
        """
        retries = self.spec.max_retries if self.spec.constraint is not None else 1
        for _ in range(retries):
            candidate = draw()
            if self.admits(state, **{name: candidate}):
                state[name] = candidate
                return np.ones(1)

        def log_target(u):
            value = math.exp(u[0]) if positive else u[0]
            if not self.admits(state, **{name: value}):
                return np.array([-np.inf])
            jacobian = u[0] if positive else 0.0
            return np.array([log_density(value) + jacobian])

        current = math.log(state[name]) if positive else state[name]
        u, _, accepted = metropolis_step(np.array([current]), log_target, np.array([step]), rng)
        state[name] = math.exp(u[0]) if positive else float(u[0])
        return accepted

    def _update_beta0(self, state: State, rng, scale) -> np.ndarray:
        mean = float(np.mean(state["theta"] - state["z"]))
        sd = math.sqrt(state["sigma2"] / self.size)
        return self._truncated_draw(
            state, "beta0",
            draw=lambda: mean + sd * rng.standard_normal(),
            log_density=lambda b: -0.5 * ((b - mean) / sd) ** 2,
            positive=False, rng=rng, step=sd,
        )

    def _update_sigma2(self, state: State, rng, scale) -> np.ndarray:
        resid = state["theta"] - state["beta0"] - state["z"]
        shape = self.spec.sigma2_shape + 0.5 * self.size
        rate = self.spec.sigma2_scale + 0.5 * float(resid @ resid)
        return self._truncated_draw(
            state, "sigma2",
            draw=lambda: rate / rng.gamma(shape),
            log_density=lambda v: -(shape + 1.0) * math.log(v) - rate / v,
            positive=True, rng=rng, step=FALLBACK_LOG_STEP,
        )

    def _update_tau2(self, state: State, rng, scale) -> np.ndarray:
        z = state["z"]
        diffs = z[self.edges[:, 0]] - z[self.edges[:, 1]]
        shape = self.spec.tau2_shape + 0.5 * self.tau2_rank
        rate = self.spec.tau2_scale + 0.5 * float(diffs @ diffs)
        return self._truncated_draw(
            state, "tau2",
            draw=lambda: rate / rng.gamma(shape),
            log_density=lambda v: -(shape + 1.0) * math.log(v) - rate / v,
            positive=True, rng=rng, step=FALLBACK_LOG_STEP,
        )

    # ------------------------
    # Output
    # ------------------------
    def in_support(self, state: State) -> bool:
        if not (np.all(np.isfinite(state["theta"])) and np.all(np.isfinite(state["z"]))):
            return False
        if not (state["sigma2"] > 0 and state["tau2"] > 0 and math.isfinite(state["beta0"])):
            return False
        if abs(float(state["z"].sum())) >= 1e-8:
            return False
        return self.admits(state)

    def record(self, state: State) -> np.ndarray:
        pi = 1.0 / (1.0 + np.exp(-state["theta"]))
        return np.concatenate([[state["beta0"], state["sigma2"], state["tau2"]], state["z"], pi])

    def derive(self, state: State) -> np.ndarray:
        return np.array([self.a0(state)])


def fit_car(data: CountData, spec: CarModelSpec, config: ChainConfig) -> FitResult:
    model = CarModel(data, spec)
    samples = run_chain(model, config)
    constraint = spec.constraint
    settings = {
        "model": model.kind,
        "m0": spec.m0,
        "a0_max": constraint.a0_max if constraint else "none",
        "a0_min": constraint.a0_min if constraint else "none",
        "sigma2_prior": f"IG({spec.sigma2_shape:g}, {spec.sigma2_scale:g})",
        "tau2_prior": f"IG({spec.tau2_shape:g}, {spec.tau2_scale:g})",
    }
    return FitResult.from_samples(model.kind, data, samples, measure="a0", settings=settings)
