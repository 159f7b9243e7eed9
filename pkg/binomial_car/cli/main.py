"""Command-line entry point.

Exit codes: 0 success, 1 usage or validation error, 2 fit or runtime failure.
File formats are described in binomial_car/database/schema.md.
"""

import logging
import os
import sys
from typing import Any, Dict, Optional, Sequence

import click
import numpy as np

from ..io.IO import IO
from ..model.Model import set_level

EXIT_CODES = {"validation": 1, "runtime": 2}
FORMATS = "See binomial_car/database/schema.md for the counts, adjacency, config and output formats."


def parse_quantiles(ctx, param, value: Optional[str]):
    if value is None:
        return None
    try:
        return tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")


def chain_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML run configuration."),
        click.option("--seed", type=int, help="Base random seed (default 0)."),
        click.option("--iterations", type=int, help="Total MCMC iterations (default 20000)."),
        click.option("--burn-in", type=int, help="Discarded initial iterations (default 5000)."),
        click.option("--thin", type=int, help="Keep every k-th draw after burn-in (default 3)."),
        click.option("--quantiles", callback=parse_quantiles, help="Comma-separated summary quantiles (default 0.025,0.5,0.975)."),
        click.option("--out-dir", type=click.Path(file_okay=False), help="Directory for result files."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def constraint_options(fn):
    options = [
        click.option("--constrain-a0", "a0_max", type=float, help="Upper bound on the global informativeness a0."),
        click.option("--a0-min", type=float, help="Lower bound on a0 (default 0)."),
        click.option("--m0", type=int, help="Neighbour count at which a0 is evaluated (default 3)."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def chain_overrides(kw: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "chain.seed": kw.get("seed"),
        "chain.iterations": kw.get("iterations"),
        "chain.burn_in": kw.get("burn_in"),
        "chain.thin": kw.get("thin"),
        "quantiles": kw.get("quantiles"),
    }


def constraint_overrides(kw: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "constraint.a0_max": kw.get("a0_max"),
        "constraint.a0_min": kw.get("a0_min"),
        "constraint.m0": kw.get("m0"),
    }


def report(result: Dict[str, Any]) -> int:
    if result["ok"]:
        return 0
    click.echo(f"error: {result['error']}", err=True)
    return EXIT_CODES.get(result["kind"], 2)


def build_config(kw: Dict[str, Any], **extra) -> Dict[str, Any]:
    return IO().config(kw.get("config_path"), {**chain_overrides(kw), **extra})


def echo_fit(data: Dict[str, Any]) -> None:
    fit = data["fit"]
    draws = fit.informativeness
    click.echo(
        f"{fit.kind} / {fit.stratum}: {fit.n_draws} draws, {fit.measure} posterior median "
        f"{float(np.median(draws)):.3f}"
    )
    click.echo(data["summary"].to_string(index=False, float_format=lambda v: f"{v:.4g}"))
    for path in data["paths"]:
        click.echo(f"wrote {path}")


@click.group(help=f"Bayesian small-area rate estimation with measured prior informativeness. {FORMATS}")
@click.option("--verbose", is_flag=True, help="Debug logging.")
def cli(verbose: bool):
    if verbose:
        os.environ["BINOMIAL_CAR_LOG_LEVEL"] = "DEBUG"
        set_level(logging.DEBUG)


def _fit_command(model: str, kw: Dict[str, Any], extra: Dict[str, Any]) -> int:
    built = build_config(kw, model=model, **extra)
    if not built["ok"]:
        return report(built)
    result = IO().fit(kw["counts"], kw["stratum"], built["data"], adjacency=kw.get("adjacency"), out_dir=kw.get("out_dir"))
    if result["ok"]:
        echo_fit(result["data"])
    return report(result)


@cli.command("fit-bb", help=f"Fit the beta-binomial model to one stratum. {FORMATS}")
@click.option("--counts", required=True, type=click.Path(dir_okay=False), help="Counts CSV (region_id,stratum,n,y).")
@click.option("--stratum", required=True, help="Stratum to fit.")
@click.option("--adjacency", type=click.Path(dir_okay=False), help="Optional adjacency file fixing region order.")
@chain_options
def fit_bb(**kw):
    return _fit_command("beta_binomial", kw, {})


@cli.command("fit-ln", help=f"Fit the hierarchical logitnormal model to one stratum. {FORMATS}")
@click.option("--counts", required=True, type=click.Path(dir_okay=False), help="Counts CSV (region_id,stratum,n,y).")
@click.option("--stratum", required=True, help="Stratum to fit.")
@click.option("--adjacency", type=click.Path(dir_okay=False), help="Optional adjacency file fixing region order.")
@click.option("--a-max", type=float, help="Upper bound of the uniform prior on a_hat (default 100).")
@chain_options
def fit_ln(**kw):
    extra = {"a_bounds": (0.0, kw["a_max"])} if kw.get("a_max") is not None else {}
    return _fit_command("logitnormal", kw, extra)


@cli.command("fit-car", help=f"Fit the BYM/CAR model, optionally constraining a0. {FORMATS}")
@click.option("--counts", required=True, type=click.Path(dir_okay=False), help="Counts CSV (region_id,stratum,n,y).")
@click.option("--adjacency", required=True, type=click.Path(dir_okay=False), help="Adjacency file.")
@click.option("--stratum", required=True, help="Stratum to fit.")
@constraint_options
@chain_options
def fit_car(**kw):
    return _fit_command("car", kw, constraint_overrides(kw))


@cli.command(help=f"Fit each stratum and write per-region summary tables. {FORMATS}")
@click.option("--counts", required=True, type=click.Path(dir_okay=False), help="Counts CSV (region_id,stratum,n,y).")
@click.option("--adjacency", type=click.Path(dir_okay=False), help="Adjacency file (required for --model car).")
@click.option("--stratum", "strata", multiple=True, help="Stratum to include; repeat for several (default all).")
@click.option("--model", type=click.Choice(["beta_binomial", "logitnormal", "car"]), help="Model to fit (default car).")
@constraint_options
@chain_options
def summarize(**kw):
    built = build_config(kw, model=kw.get("model"), **constraint_overrides(kw))
    if not built["ok"]:
        return report(built)
    result = IO().summarize(
        kw["counts"], built["data"], adjacency=kw.get("adjacency"), strata=kw.get("strata") or None, out_dir=kw.get("out_dir")
    )
    if result["ok"]:
        for stratum, frame in result["data"]["summaries"].items():
            click.echo(f"[{stratum}]")
            click.echo(frame.to_string(index=False, float_format=lambda v: f"{v:.4g}"))
        for path in result["data"]["paths"]:
            click.echo(f"wrote {path}")
    return report(result)


@cli.command(help=f"Rate ratio of a comparison stratum to a reference stratum per region. {FORMATS}")
@click.option("--counts", required=True, type=click.Path(dir_okay=False), help="Counts CSV (region_id,stratum,n,y).")
@click.option("--adjacency", type=click.Path(dir_okay=False), help="Adjacency file (required for --model car).")
@click.option("--stratum", required=True, help="Comparison stratum (numerator).")
@click.option("--reference", required=True, help="Reference stratum (denominator).")
@click.option("--model", type=click.Choice(["beta_binomial", "logitnormal", "car"]), help="Model to fit (default car).")
@constraint_options
@chain_options
def disparity(**kw):
    built = build_config(kw, model=kw.get("model"), **constraint_overrides(kw))
    if not built["ok"]:
        return report(built)
    result = IO().disparity(
        kw["counts"], kw["stratum"], kw["reference"], built["data"], adjacency=kw.get("adjacency"), out_dir=kw.get("out_dir")
    )
    if result["ok"]:
        data = result["data"]
        click.echo(data["frame"].to_string(index=False, float_format=lambda v: f"{v:.4g}"))
        click.echo(f"{data['metadata']['significant_regions']} of {len(data['frame'])} regions significant")
        for path in data["paths"]:
            click.echo(f"wrote {path}")
    return report(result)


@cli.command(help=f"Simulation study comparing the beta-binomial and logitnormal models. {FORMATS}")
@click.option("--I", "I_values", type=int, multiple=True, help="Number of regions; repeat for several (default 50,100,200).")
@click.option("--a", "a_values", type=float, multiple=True, help="True informativeness; repeat (default 4..20 by 4).")
@click.option("--pi0", "pi0_values", type=float, multiple=True, help="True mean rate; repeat (default 0.01..0.40).")
@click.option("--L", "L", type=int, help="Replicates per cell (default 100).")
@click.option("--jobs", type=int, help="Parallel workers (default 1).")
@click.option("--progress/--no-progress", default=False, help="Show a progress bar.")
@chain_options
def simulate(**kw):
    built = build_config(kw, jobs=kw.get("jobs"))
    if not built["ok"]:
        return report(built)
    config = built["data"]
    fields = {
        "I_values": kw["I_values"] or None,
        "a_values": kw["a_values"] or None,
        "pi0_values": kw["pi0_values"] or None,
        "L": kw.get("L"),
        "seed": config.chain.seed,
    }
    io = IO()
    grid = io.grid(**fields)
    if not grid["ok"]:
        return report(grid)
    result = io.simulate(grid["data"], config, out_dir=kw.get("out_dir"), progress=kw["progress"])
    if result["ok"]:
        summary = result["data"]["summary"]
        columns = ["I", "a", "pi0", "mean_informativeness_beta_binomial", "mean_informativeness_logitnormal",
                   "mean_pi0_beta_binomial", "mean_pi0_logitnormal", "ratio_informativeness", "ratio_pi0"]
        click.echo(summary[columns].to_string(index=False, float_format=lambda v: f"{v:.4g}"))
        for path in result["data"]["paths"]:
            click.echo(f"wrote {path}")
    return report(result)


@cli.command(help="Informativeness of a logitnormal prior (--mu/--sigma2) or of a beta prior (--a/--b).")
@click.option("--mu", type=float, help="Logitnormal mean.")
@click.option("--sigma2", type=float, help="Logitnormal variance.")
@click.option("--a", type=float, help="Beta prior a.")
@click.option("--b", type=float, help="Beta prior b.")
def informativeness(mu, sigma2, a, b):
    result = IO().informativeness(mu=mu, sigma2=sigma2, a=a, b=b)
    if result["ok"]:
        d = result["data"]
        click.echo(f"a_hat = {d['a_hat']:.3f}")
        click.echo(f"mu = {d['mu']:.6g}, sigma2 = {d['sigma2']:.6g}")
        if d["a"] is None:
            click.echo("beta: no matching prior")
        else:
            click.echo(f"beta: a = {d['a']:.6g}, b = {d['b']:.6g}")
    return report(result)


@cli.command("compare-priors", help="Posterior quantiles under a beta prior and its matched logitnormal prior.")
@click.option("--a", required=True, type=float, help="Prior informativeness.")
@click.option("--pi0", required=True, type=float, help="Prior mean rate.")
@click.option("--events", type=int, multiple=True, help="Observed event counts; repeat (default 1..20).")
@click.option("--quantiles", callback=parse_quantiles, help="Comma-separated quantiles (default 0.025,0.5,0.975).")
@click.option("--out-dir", type=click.Path(file_okay=False), help="Directory for compare_priors.csv.")
def compare_priors(a, pi0, events, quantiles, out_dir):
    io = IO()
    result = io.compare_priors(a, pi0, events or tuple(range(1, 21)), quantiles or (0.025, 0.5, 0.975))
    if result["ok"]:
        frame = result["data"]
        click.echo(frame.to_string(index=False, float_format=lambda v: f"{v:.4g}"))
        if out_dir is not None:
            saved = io.save_table(frame, out_dir, "compare_priors.csv")
            if not saved["ok"]:
                return report(saved)
            click.echo(f"wrote {saved['data']}")
    return report(result)


@cli.command(help=f"Descriptive statistics of a counts file per stratum. {FORMATS}")
@click.option("--counts", required=True, type=click.Path(dir_okay=False), help="Counts CSV (region_id,stratum,n,y).")
def describe(counts):
    result = IO().describe(counts)
    if result["ok"]:
        click.echo(result["data"].to_string(index=False, float_format=lambda v: f"{v:.4g}"))
    return report(result)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        code = cli.main(args=list(argv) if argv is not None else None, prog_name="binomial-car", standalone_mode=False)
    except click.exceptions.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    return code if isinstance(code, int) else 0


if __name__ == "__main__":
    sys.exit(main())
