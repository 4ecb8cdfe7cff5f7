"""Command-line entry points: simulate, experiment, calibrate, serve."""

from __future__ import annotations

import json
from pathlib import Path

import click
import yaml

from .bisect import RULE_CREDIBLE, RULE_THEORETICAL, MapbConfig, PiecewiseDensity, mapb_align
from .calibrate import calibrate_from_logs, load_comparison_log, load_estimate_log
from .core import EUCLIDEAN, PARAMETRIC_KAPPA, DistanceSpec, OracleParams, SimulatedResponder
from .harness import ExperimentConfig, crossing_kappa, sweep


@click.group()
def main() -> None:
    """Preference-alignment toolkit: bisection runs, sweeps, calibration, service."""


@main.command()
@click.option("--theta-star", type=float, required=True, help="Simulated truth.")
@click.option("--epsilon", type=float, default=0.1, show_default=True)
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--prior-lo", type=float, default=-1.0, show_default=True)
@click.option("--prior-hi", type=float, default=1.0, show_default=True)
@click.option("--granularity", type=float, default=0.1, show_default=True)
@click.option("--local-radius", type=float, default=0.3, show_default=True)
@click.option("--gamma", type=float, default=1.0, show_default=True)
@click.option("--kappa", type=float, default=0.3, show_default=True)
@click.option("--lambda-delta", type=float, default=1.0, show_default=True)
@click.option("--eta", type=float, default=0.1, show_default=True)
@click.option("--update-weight", type=float, default=0.9, show_default=True)
@click.option("--rule", type=click.Choice([RULE_CREDIBLE, RULE_THEORETICAL]),
              default=RULE_CREDIBLE, show_default=True)
@click.option("--distance", type=click.Choice([PARAMETRIC_KAPPA, EUCLIDEAN]),
              default=PARAMETRIC_KAPPA, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None,
              help="Write the per-move trace as JSONL.")
def simulate(theta_star: float, epsilon: float, delta: float, prior_lo: float,
             prior_hi: float, granularity: float, local_radius: float,
             gamma: float, kappa: float, lambda_delta: float, eta: float,
             update_weight: float, rule: str, distance: str, seed: int,
             trace_out: str | None) -> None:
    """Run one simulated bisection session and print the outcome."""
    if not prior_lo < theta_star < prior_hi:
        raise click.BadParameter("theta-star must lie inside the prior range")
    config = MapbConfig(
        epsilon=epsilon, delta=delta, granularity=granularity,
        local_radius=local_radius, eta=eta, update_weight=update_weight,
        prior_half_width=0.5 * (prior_hi - prior_lo), kappa=kappa,
        lambda_delta=lambda_delta, gamma=gamma, horizontal_rule=rule,
    )
    if distance == PARAMETRIC_KAPPA:
        spec = DistanceSpec(kind=PARAMETRIC_KAPPA, lambda_delta=lambda_delta,
                            kappa=kappa)
    else:
        spec = DistanceSpec(kind=EUCLIDEAN)
    responder = SimulatedResponder(
        OracleParams(theta_star=theta_star, gamma=gamma, distance=spec), seed=seed)
    prior = PiecewiseDensity.uniform(prior_lo, prior_hi)
    theta_hat, trace = mapb_align(config, prior, responder)
    if trace_out:
        Path(trace_out).write_text(trace.to_jsonl())
    click.echo(json.dumps({
        "theta_hat": theta_hat,
        "abs_error": abs(theta_hat - theta_star),
        "moves": len(trace.moves),
        "total_comparisons": trace.total_comparisons,
        "reason": trace.reason,
    }, indent=2))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="YAML file of ExperimentConfig fields.")
@click.option("--output", type=click.Path(dir_okay=False), default=None,
              help="Override the CSV output path from the config file.")
def experiment(config_path: str, output: str | None) -> None:
    """Run a matched-budget sweep from a declarative config file."""
    raw = yaml.safe_load(Path(config_path).read_text()) or {}
    for key in ("sigmas", "gammas", "kappa_grid"):
        if key in raw:
            raw[key] = tuple(raw[key])
    if output:
        raw["output_path"] = output
    config = ExperimentConfig(**raw)
    result = sweep(config)
    for sigma in config.sigmas:
        for gamma in config.gammas:
            kappas, ratios = result.ratio_curve(sigma, gamma)
            crossing = crossing_kappa(kappas, ratios)
            click.echo(f"sigma={sigma} gamma={gamma} "
                       f"median ratios={[round(float(r), 3) for r in ratios]} "
                       f"crossing={crossing}")
    if config.output_path:
        click.echo(f"rows written to {config.output_path}")


@main.command()
@click.option("--comparisons", type=click.Path(exists=True, dir_okay=False),
              required=True, help="CSV with theta,theta_star,correct columns.")
@click.option("--estimates", type=click.Path(exists=True, dir_okay=False),
              required=True, help="CSV with response,theta_star columns.")
@click.option("--resamples", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the full calibration report as JSON.")
def calibrate(comparisons: str, estimates: str, resamples: int, seed: int,
              out: str | None) -> None:
    """Fit the choice model and noise scale from exported session logs."""
    result = calibrate_from_logs(load_comparison_log(comparisons),
                                 load_estimate_log(estimates),
                                 n_resamples=resamples, seed=seed)
    report = {
        "kappa_hat": result.kappa_hat,
        "rate_hat": result.rate_hat,
        "sigma_hat": result.sigma_hat,
        "bootstrap_means": list(result.bootstrap_means),
        "bootstrap_variances": list(result.bootstrap_variances),
        "n_resamples": result.n_resamples,
        "degenerate": result.degenerate,
    }
    if out:
        Path(out).write_text(json.dumps(report, indent=2) + "\n")
    click.echo(json.dumps(report, indent=2))


@main.command()
@click.option("--store-dir", type=click.Path(file_okay=False), default="./sessions",
              show_default=True, help="Directory for per-session event logs.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(store_dir: str, host: str, port: int) -> None:
    """Serve the session API over HTTP."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(store_dir), host=host, port=port)


if __name__ == "__main__":
    main()
