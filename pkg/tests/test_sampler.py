from typing import List

import numpy as np
import pytest
from pydantic import ValidationError

from binomial_car.errors import ConstraintError, InputError, NonFiniteDensityError, SupportError
from binomial_car.model.Diagnostics import autocorrelation, diagnose, effective_sample_size, geweke
from binomial_car.model.Sampler import ChainConfig, UpdateBlock, make_rng, metropolis_step, run_chain


class NormalTarget:
    """x ~ N(mean, 1) sampled by random-walk Metropolis."""

    def __init__(self, mean: float = 1.0, log_density=None, constrained: bool = False, start_in_support: bool = True):
        self.mean = mean
        self.log_density = log_density or (lambda x: -0.5 * (x - self.mean) ** 2)
        self.constrained = constrained
        self.start_in_support = start_in_support
        self.parameter_names: List[str] = ["x"]
        self.derived_names: List[str] = ["x2"]

    def initial_state(self, rng):
        return {"x": np.array([0.0])}

    def _update(self, state, rng, scale):
        state["x"], _, accepted = metropolis_step(state["x"], self.log_density, scale, rng)
        return accepted

    def blocks(self):
        return [UpdateBlock("x", 1, self._update, constrained=self.constrained)]

    def in_support(self, state):
        return self.start_in_support

    def record(self, state):
        return state["x"].copy()

    def derive(self, state):
        return state["x"] ** 2


class StuckBlock(NormalTarget):
    def _update(self, state, rng, scale):
        return np.zeros(1)


class TestChainConfig:
    def test_defaults(self):
        config = ChainConfig()
        assert (config.iterations, config.burn_in, config.thin) == (20000, 5000, 3)
        assert config.retained == 5000
        assert config.adaptation == 5000

    def test_burn_in_must_leave_draws(self):
        with pytest.raises(ValidationError):
            ChainConfig(iterations=100, burn_in=100)

    def test_adapt_window_within_burn_in(self):
        with pytest.raises(ValidationError):
            ChainConfig(iterations=100, burn_in=10, adapt_window=20)
        assert ChainConfig(iterations=100, burn_in=10, adapt_window=5).adaptation == 5

    def test_thin_positive(self):
        with pytest.raises(ValidationError):
            ChainConfig(thin=0)


class TestRunChain:
    def test_retained_count_and_thinning(self):
        config = ChainConfig(iterations=100, burn_in=10, thin=3, seed=1)
        samples = run_chain(NormalTarget(), config)
        assert samples.draws.shape == (30, 1)
        assert samples.derived.shape == (30, 1)
        np.testing.assert_allclose(samples.derived[:, 0], samples.draws[:, 0] ** 2)

    def test_seed_determinism(self):
        config = ChainConfig(iterations=500, burn_in=100, thin=1, seed=5)
        a = run_chain(NormalTarget(), config)
        b = run_chain(NormalTarget(), config)
        np.testing.assert_array_equal(a.draws, b.draws)
        c = run_chain(NormalTarget(), config, key=(1,))
        assert not np.array_equal(a.draws, c.draws)

    def test_recovers_target_and_adapts(self):
        config = ChainConfig(iterations=20000, burn_in=2000, thin=1, seed=3)
        samples = run_chain(NormalTarget(mean=1.0), config)
        x = samples.column("x")
        ess = effective_sample_size(x).value
        assert abs(x.mean() - 1.0) < 4 / np.sqrt(ess)
        assert x.var() == pytest.approx(1.0, rel=0.15)
        assert 0.3 < samples.acceptance["x"] < 0.6

    def test_nan_density_raises_with_iteration(self):
        def log_density(x):
            return np.where(x > 3, np.nan, -0.5 * x ** 2)

        with pytest.raises(NonFiniteDensityError) as err:
            run_chain(NormalTarget(log_density=log_density), ChainConfig(iterations=20000, burn_in=10, seed=2))
        assert err.value.iteration is not None

    def test_initial_state_outside_support(self):
        with pytest.raises(SupportError):
            run_chain(NormalTarget(start_in_support=False), ChainConfig(iterations=20, burn_in=5))

    def test_idle_constrained_block(self):
        with pytest.raises(ConstraintError, match="rejected every proposal"):
            run_chain(StuckBlock(constrained=True), ChainConfig(iterations=200, burn_in=50))

    def test_idle_unconstrained_block_runs(self):
        samples = run_chain(StuckBlock(), ChainConfig(iterations=200, burn_in=50, thin=1))
        assert np.all(samples.draws == 0)
        assert samples.acceptance["x"] == 0

    def test_to_frame_columns(self):
        samples = run_chain(NormalTarget(), ChainConfig(iterations=60, burn_in=10, thin=5))
        frame = samples.to_frame()
        assert list(frame.columns) == ["x", "x2"]
        assert len(frame) == 10


class TestMetropolisStep:
    def test_minus_infinity_proposal_rejects(self):
        rng = make_rng(0)

        def log_target(x):
            return np.where(x > 0, -0.5 * x ** 2, -np.inf)

        current = np.full(1000, 0.5)
        values, _, accepted = metropolis_step(current, log_target, 5.0, rng)
        assert np.all(values > 0)
        np.testing.assert_array_equal(values[accepted == 0], 0.5)

    def test_zero_density_current_state(self):
        with pytest.raises(NonFiniteDensityError):
            metropolis_step(np.array([1.0]), lambda x: np.array([-np.inf]), 1.0, make_rng(0))


class TestDiagnostics:
    def test_white_noise_ess(self):
        x = make_rng(1).standard_normal(5000)
        ess = effective_sample_size(x)
        assert ess.value == pytest.approx(5000, rel=0.2)
        assert not ess.degenerate

    def test_ar1_ess(self):
        rng = make_rng(2)
        phi, n = 0.9, 20000
        x = np.empty(n)
        x[0] = rng.standard_normal()
        for t in range(1, n):
            x[t] = phi * x[t - 1] + rng.standard_normal()
        expected = n * (1 - phi) / (1 + phi)
        assert effective_sample_size(x).value == pytest.approx(expected, rel=0.3)

    def test_constant_series(self):
        ess = effective_sample_size(np.full(50, 2.0))
        assert ess.degenerate and ess.value == 50

    def test_ess_needs_draws(self):
        with pytest.raises(InputError):
            effective_sample_size(np.arange(5.0))

    def test_autocorrelation_lag_zero(self):
        rho = autocorrelation(make_rng(3).standard_normal(100))
        assert rho[0] == pytest.approx(1.0)

    def test_geweke_white_noise(self):
        assert abs(geweke(make_rng(4).standard_normal(4000))) < 4

    def test_geweke_detects_drift(self):
        x = np.linspace(0, 5, 2000) + make_rng(5).standard_normal(2000) * 0.1
        assert abs(geweke(x)) > 3

    def test_geweke_overlap(self):
        with pytest.raises(InputError, match="overlap"):
            geweke(np.zeros(100), 0.6, 0.5)

    def test_geweke_short(self):
        with pytest.raises(InputError, match="too short"):
            geweke(make_rng(6).standard_normal(50))

    def test_diagnose_names(self):
        samples = run_chain(NormalTarget(), ChainConfig(iterations=600, burn_in=100, thin=1))
        diag = diagnose(samples)
        assert set(diag.ess) == {"x", "x2"}
        assert set(diag.geweke) == {"x", "x2"}
        assert diag.acceptance == samples.acceptance
