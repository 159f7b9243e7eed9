from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from .. import __version__
from ..database.Counts import CountData, CountTable, load_counts
from ..database.Database import ResultsStore, config_hash, fit_metadata
from ..database.Graph import RegionGraph
from ..database.parser import load_adjacency
from ..errors import BinomialCarError, InputError
from ..model.BetaBinomial import fit_beta_binomial
from ..model.Car import CarModelSpec, fit_car
from ..model.Fit import FitResult
from ..model.Informativeness import (
    BetaParams,
    LogitNormalParams,
    beta_to_logitnormal,
    compare_prior_quantiles,
    logitnormal_informativeness,
    logitnormal_to_beta,
)
from ..model.LogitNormal import fit_logitnormal
from ..model.Model import get_logger
from ..model.Report import DISPARITY_CAVEAT, describe_counts, disparity, disparity_frame, summarize
from ..model.Simulation import ScenarioGrid, run_study
from .Config import RunConfig, load_config

PathLike = Union[str, Path]


class IO:
    """
    IO is the façade between the command line and the statistics packages.
    It loads inputs, runs fits and writes result files.

    Return contract for public methods:
    - dict with keys { ok: bool, data: Any | None, error: str | None, kind: str | None }
    - kind is "validation" for bad inputs and "runtime" for failed fits or writes
    - never raise on expected failures; capture and return error string
    """

    def __init__(self):
        self.logger = get_logger(__name__ + ".IO")

    # ------------------------
    # Helpers (internal)
    # ------------------------
    def _ok(self, data: Any = None) -> Dict[str, Any]:
        return {"ok": True, "data": data, "error": None, "kind": None}

    def _err(self, msg: str, kind: str) -> Dict[str, Any]:
        return {"ok": False, "data": None, "error": msg, "kind": kind}

    def _call(self, what: str, fn: Callable[[], Any]) -> Dict[str, Any]:
        try:
            return self._ok(fn())
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(p) for p in first.get("loc", ()))
            message = first.get("msg", str(e))
            return self._err(f"{what}: {where + ': ' if where else ''}{message}", "validation")
        except InputError as e:
            return self._err(f"{what}: {e}", "validation")
        except BinomialCarError as e:
            self.logger.error(f"{what} failed: {e}")
            return self._err(f"{what}: {e}", "runtime")
        except Exception as e:
            self.logger.exception(f"{what} failed unexpectedly")
            return self._err(f"{what}: {e}", "runtime")

    def _load(self, counts: PathLike, adjacency: Optional[PathLike]) -> tuple:
        table = load_counts(counts)
        graph = load_adjacency(adjacency) if adjacency is not None else None
        return table, graph

    def _stratum(self, table: CountTable, stratum: str, graph: Optional[RegionGraph]) -> CountData:
        return CountData.from_table(table, stratum, graph=graph)

    def _fit(self, data: CountData, config: RunConfig, graph: Optional[RegionGraph], seed: int) -> FitResult:
        chain = config.chain.model_copy(update={"seed": seed})
        if config.model == "beta_binomial":
            return fit_beta_binomial(data, chain)
        if config.model == "logitnormal":
            return fit_logitnormal(data, chain, a_bounds=config.a_bounds)
        if graph is None:
            raise InputError("the CAR model needs an adjacency file (--adjacency)")
        spec = CarModelSpec(
            graph=graph,
            constraint=config.constraint.constraint(),
            m0=config.constraint.m0,
            **config.priors.model_dump(),
        )
        return fit_car(data, spec, chain)

    @staticmethod
    def _stratum_seed(seed: int, index: int) -> int:
        return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])

    def _metadata(self, fit: FitResult, config: RunConfig, **extra) -> Dict[str, Any]:
        meta = fit_metadata(fit, config.model_dump(), **extra)
        meta["seed"] = config.chain.seed
        meta["chain_seed"] = fit.samples.seed
        meta["m0"] = config.constraint.m0 if config.model == "car" else "none"
        return meta

    # ------------------------
    # Fitting
    # ------------------------
    def fit(
        self,
        counts: PathLike,
        stratum: str,
        config: RunConfig,
        adjacency: Optional[PathLike] = None,
        out_dir: Optional[PathLike] = None,
    ) -> Dict[str, Any]:
        """Fit `config.model` to one stratum; write summary, samples and metadata."""

        def run():
            table, graph = self._load(counts, adjacency)
            data = self._stratum(table, stratum, graph)
            fit = self._fit(data, config, graph, config.chain.seed)
            summary = summarize(fit, config.quantiles, data=data)
            meta = self._metadata(fit, config)
            paths: List[Path] = []
            if out_dir is not None:
                store = ResultsStore(out_dir)
                store.write_summary(summary, stratum)
                store.write_samples(fit)
                store.write_metadata(meta)
                paths = list(store.written)
            self.logger.info(f"fitted {fit.kind} to stratum {stratum!r} ({data.size} regions)")
            return {"fit": fit, "summary": summary, "metadata": meta, "paths": paths}

        return self._call(f"fit {config.model}", run)

    def summarize(
        self,
        counts: PathLike,
        config: RunConfig,
        adjacency: Optional[PathLike] = None,
        strata: Optional[Sequence[str]] = None,
        out_dir: Optional[PathLike] = None,
    ) -> Dict[str, Any]:
        """Fit every requested stratum (all by default) and write one summary table per stratum."""

        def run():
            table, graph = self._load(counts, adjacency)
            chosen = list(strata) if strata else table.strata()
            if not chosen:
                raise InputError("the count table has no strata to summarize")
            summaries, meta = {}, {}
            for index, stratum in enumerate(chosen):
                data = self._stratum(table, stratum, graph)
                fit = self._fit(data, config, graph, self._stratum_seed(config.chain.seed, index))
                summaries[stratum] = summarize(fit, config.quantiles, data=data)
                for key, value in self._metadata(fit, config).items():
                    meta.setdefault(key, value)
                meta[f"chain_seed_{stratum}"] = fit.samples.seed
            meta["stratum"] = ",".join(chosen)
            meta.pop("chain_seed", None)
            meta = {k: v for k, v in meta.items() if not k.startswith("acceptance_") and k != "retained"}
            paths: List[Path] = []
            if out_dir is not None:
                store = ResultsStore(out_dir)
                for stratum, frame in summaries.items():
                    store.write_summary(frame, stratum)
                store.write_metadata(meta)
                paths = list(store.written)
            return {"summaries": summaries, "metadata": meta, "paths": paths}

        return self._call("summarize", run)

    def disparity(
        self,
        counts: PathLike,
        stratum: str,
        reference: str,
        config: RunConfig,
        adjacency: Optional[PathLike] = None,
        out_dir: Optional[PathLike] = None,
    ) -> Dict[str, Any]:
        """Fit comparison and reference strata separately; ratio of their rates per region."""

        def run():
            if stratum == reference:
                raise InputError("comparison and reference strata must differ")
            table, graph = self._load(counts, adjacency)
            fits = []
            for index, name in enumerate((stratum, reference)):
                data = self._stratum(table, name, graph)
                fits.append(self._fit(data, config, graph, self._stratum_seed(config.chain.seed, index)))
            estimates = disparity(fits[0], fits[1])
            frame = disparity_frame(estimates)
            meta = self._metadata(fits[0], config, reference=reference, caveat=DISPARITY_CAVEAT)
            meta.pop("retained", None)
            meta = {k: v for k, v in meta.items() if not k.startswith("acceptance_")}
            meta["chain_seed"] = f"{fits[0].samples.seed},{fits[1].samples.seed}"
            meta["significant_regions"] = int(frame["significant"].sum())
            paths: List[Path] = []
            if out_dir is not None:
                store = ResultsStore(out_dir)
                store.write_disparity(frame, stratum, reference)
                for fit in fits:
                    store.write_summary(summarize(fit, config.quantiles), fit.stratum)
                store.write_metadata(meta)
                paths = list(store.written)
            return {"estimates": estimates, "frame": frame, "fits": fits, "metadata": meta, "paths": paths}

        return self._call("disparity", run)

    # ------------------------
    # Simulation
    # ------------------------
    def simulate(
        self,
        grid: ScenarioGrid,
        config: RunConfig,
        out_dir: Optional[PathLike] = None,
        progress: bool = False,
    ) -> Dict[str, Any]:
        def run():
            result = run_study(grid, config.chain, jobs=config.jobs, progress=progress)
            meta = {
                "software_version": __version__,
                "model": "simulation",
                "seed": grid.seed,
                "config_hash": config_hash({"grid": grid.model_dump(), "chain": config.chain.model_dump()}),
                "iterations": config.chain.iterations,
                "burn_in": config.chain.burn_in,
                "thin": config.chain.thin,
                "I_values": ",".join(str(v) for v in grid.I_values),
                "a_values": ",".join(f"{v:g}" for v in grid.a_values),
                "pi0_values": ",".join(f"{v:g}" for v in grid.pi0_values),
                **result.metadata,
            }
            paths: List[Path] = []
            if out_dir is not None:
                store = ResultsStore(out_dir)
                store.write_study(result)
                store.write_metadata(meta)
                paths = list(store.written)
            return {"result": result, "summary": result.summary(), "metadata": meta, "paths": paths}

        return self._call("simulate", run)

    # ------------------------
    # Closed-form tools
    # ------------------------
    def informativeness(
        self,
        mu: Optional[float] = None,
        sigma2: Optional[float] = None,
        a: Optional[float] = None,
        b: Optional[float] = None,
    ) -> Dict[str, Any]:
        """Map a logitnormal prior to its informativeness and matching beta prior, or the reverse."""

        def run():
            if mu is not None and sigma2 is not None and a is None and b is None:
                params = LogitNormalParams(mu=mu, sigma2=sigma2)
                a_hat = logitnormal_informativeness(params)
                result = {"mu": mu, "sigma2": sigma2, "a_hat": a_hat, "a": None, "b": None}
                # a_hat <= 0 for very diffuse priors: reported raw, no beta counterpart
                if a_hat > 0:
                    beta = logitnormal_to_beta(params)
                    result.update(a=beta.a, b=beta.b)
                return result
            if a is not None and b is not None and mu is None and sigma2 is None:
                params = beta_to_logitnormal(BetaParams(a=a, b=b))
                return {"a": a, "b": b, "mu": params.mu, "sigma2": params.sigma2, "a_hat": logitnormal_informativeness(params)}
            raise InputError("give either --mu and --sigma2, or --a and --b")

        return self._call("informativeness", run)

    def compare_priors(self, a: float, pi0: float, counts: Sequence[int], quantiles: Sequence[float]) -> Dict[str, Any]:
        return self._call("compare-priors", lambda: compare_prior_quantiles(a, pi0, counts, quantiles))

    def describe(self, counts: PathLike) -> Dict[str, Any]:
        return self._call("describe", lambda: describe_counts(load_counts(counts)))

    # ------------------------
    # Inputs and plain tables
    # ------------------------
    def config(self, path: Optional[PathLike], overrides: Dict[str, Any]) -> Dict[str, Any]:
        """Load an optional YAML config and apply dotted flag overrides."""
        return self._call("config", lambda: load_config(path).merged(overrides))

    def grid(self, **fields) -> Dict[str, Any]:
        return self._call("simulate", lambda: ScenarioGrid(**{k: v for k, v in fields.items() if v is not None}))

    def save_table(self, frame, out_dir: PathLike, name: str) -> Dict[str, Any]:
        return self._call(f"write {name}", lambda: ResultsStore(out_dir).save_frame(name, frame))
