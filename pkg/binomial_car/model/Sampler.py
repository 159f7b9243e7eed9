"""Seed-reproducible Metropolis-within-Gibbs engine.

A model hands the engine its update blocks. Metropolis blocks receive a
per-component proposal scale that is tuned by Robbins-Monro toward 0.44
acceptance during the adaptation window and frozen afterwards; Gibbs blocks
ignore it and report acceptance 1.
"""

import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import ConstraintError, NonFiniteDensityError, SupportError
from .Model import get_logger

logger = get_logger(__name__)

State = Dict[str, Any]
TARGET_ACCEPTANCE = 0.44


class ChainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int = Field(20000, gt=0)
    burn_in: int = Field(5000, ge=0)
    thin: int = Field(3, ge=1)
    seed: int = Field(0, ge=0)
    adapt_window: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def check_schedule(self):
        if self.burn_in >= self.iterations:
            raise ValueError(f"burn_in ({self.burn_in}) must be less than iterations ({self.iterations})")
        if self.adapt_window is not None and self.adapt_window > self.burn_in:
            raise ValueError(f"adapt_window ({self.adapt_window}) must fit within burn_in ({self.burn_in})")
        return self

    @property
    def adaptation(self) -> int:
        return self.burn_in if self.adapt_window is None else self.adapt_window

    @property
    def retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


class PosteriorSamples(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    names: List[str]
    draws: np.ndarray
    derived_names: List[str]
    derived: np.ndarray
    acceptance: Dict[str, float]
    seed: int
    config: ChainConfig

    def column(self, name: str) -> np.ndarray:
        if name in self.names:
            return self.draws[:, self.names.index(name)]
        return self.derived[:, self.derived_names.index(name)]

    def to_frame(self) -> pd.DataFrame:
        data = np.hstack([self.draws, self.derived])
        return pd.DataFrame(data, columns=self.names + self.derived_names)


@dataclass
class UpdateBlock:
    """One step of a sweep.

    `update(state, rng, scale)` mutates `state` and returns per-component
    acceptance indicators of length `size`.
    """

    name: str
    size: int
    update: Callable[[State, np.random.Generator, np.ndarray], np.ndarray]
    adaptive: bool = True
    constrained: bool = False
    initial_scale: float = 0.5


class ChainModel(Protocol):
    parameter_names: List[str]
    derived_names: List[str]

    def initial_state(self, rng: np.random.Generator) -> State: ...

    def blocks(self) -> List[UpdateBlock]: ...

    def in_support(self, state: State) -> bool: ...

    def record(self, state: State) -> np.ndarray: ...

    def derive(self, state: State) -> np.ndarray: ...


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the substream `key` of `seed`."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def check_density(values, what: str) -> None:
    values = np.asarray(values)
    if np.isnan(values).any() or np.isposinf(values).any():
        raise NonFiniteDensityError(f"non-finite log density in {what}")


def metropolis_step(current, log_target, scale, rng: np.random.Generator, current_log=None):
    """Component-wise random-walk Metropolis on an unbounded scale.

    `log_target` maps an array of values to component-wise log densities
    (scalars broadcast). Returns (new values, new log densities, accepted).
    """
    current = np.asarray(current, dtype=float)
    log_cur = log_target(current) if current_log is None else current_log
    check_density(log_cur, "current state")
    if np.isneginf(log_cur).any():
        raise NonFiniteDensityError("current state has zero density")
    proposal = current + scale * rng.standard_normal(current.shape)
    log_prop = log_target(proposal)
    check_density(log_prop, "proposal")
    accept = np.log(rng.uniform(size=current.shape)) < (log_prop - log_cur)
    return (
        np.where(accept, proposal, current),
        np.where(accept, log_prop, log_cur),
        accept.astype(float),
    )


class ProposalTuner:
    """Robbins-Monro adaptation of log proposal scales."""

    def __init__(self, block: UpdateBlock, decay: float = 0.6):
        self.block = block
        self.log_scale = np.full(block.size, np.log(block.initial_scale))
        self.decay = decay
        self.accepted = np.zeros(block.size)
        self.steps = 0
        self.frozen = False
        self.idle = 0

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    def observe(self, accepted: np.ndarray, t: int) -> None:
        self.accepted += accepted
        self.steps += 1
        self.idle = 0 if np.any(accepted > 0) else self.idle + 1
        if self.block.adaptive and not self.frozen:
            self.log_scale += (accepted - TARGET_ACCEPTANCE) / (t + 1) ** self.decay
            np.clip(self.log_scale, -12.0, 6.0, out=self.log_scale)

    def rate(self) -> float:
        return float(self.accepted.mean() / self.steps) if self.steps else 0.0


def run_chain(model: ChainModel, config: ChainConfig, key: Sequence[int] = ()) -> PosteriorSamples:
    """Run one chain; output is a deterministic function of (model, config.seed, key)."""
    rng = make_rng(config.seed, *key)
    state = model.initial_state(rng)
    if not model.in_support(state):
        raise SupportError(f"{type(model).__name__} rejected its own initial state")

    blocks = model.blocks()
    tuners = [ProposalTuner(block) for block in blocks]
    kept = config.retained
    draws = np.empty((kept, len(model.parameter_names)))
    derived = np.empty((kept, len(model.derived_names)))
    adaptation = config.adaptation

    logger.info(
        f"{type(model).__name__}: {config.iterations} iterations, burn-in {config.burn_in}, "
        f"thin {config.thin}, seed {config.seed}"
    )
    started = time.perf_counter()
    row = 0
    for t in range(config.iterations):
        if t == adaptation:
            for tuner in tuners:
                tuner.frozen = True
            logger.debug("proposal scales frozen: " + ", ".join(
                f"{tu.block.name}={np.median(tu.scale):.4g}" for tu in tuners if tu.block.adaptive
            ))
        for block, tuner in zip(blocks, tuners):
            try:
                accepted = block.update(state, rng, tuner.scale)
            except NonFiniteDensityError as e:
                raise NonFiniteDensityError(f"block {block.name!r}: {e}", iteration=t) from e
            tuner.observe(np.asarray(accepted, dtype=float), t)
            if block.constrained and tuner.idle >= adaptation > 0:
                raise ConstraintError(
                    f"block {block.name!r} rejected every proposal for {tuner.idle} iterations "
                    f"(up to iteration {t}); the informativeness constraint leaves no usable support"
                )

        if t >= config.burn_in and (t - config.burn_in + 1) % config.thin == 0:
            if not model.in_support(state):
                raise SupportError(f"retained draw at iteration {t} is outside the model support")
            values = model.record(state)
            extra = model.derive(state)
            if not (np.all(np.isfinite(values)) and np.all(np.isfinite(extra))):
                raise NonFiniteDensityError("non-finite value in retained draw", iteration=t)
            draws[row], derived[row] = values, extra
            row += 1

    acceptance = {tuner.block.name: tuner.rate() for tuner in tuners}
    logger.info(
        f"{type(model).__name__}: kept {row} draws in {time.perf_counter() - started:.1f}s; acceptance "
        + ", ".join(f"{k}={v:.2f}" for k, v in acceptance.items())
    )
    return PosteriorSamples(
        names=list(model.parameter_names),
        draws=draws,
        derived_names=list(model.derived_names),
        derived=derived,
        acceptance=acceptance,
        seed=config.seed,
        config=config,
    )
