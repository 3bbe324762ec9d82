"""Command line entry point (``rhvrp``)."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .cuts import separate_rci
from .formats import FORMATS, ParseError, format_cuts, load_result, parse_fractional, write_canonical
from .runner import RunConfig, best_of, load_problem, recheck, run_all, sweep
from .uncertainty import FAMILIES, build_set
from .instance import Variant

_VARIANTS = [v.value for v in Variant]


def _problem_options(f):
    f = click.option("--capacity-inflation", type=float, default=1.10, show_default=True,
                     help="Multiply every vehicle capacity by this factor.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    f = click.option("--beta", type=float, default=0.0, show_default=True)(f)
    f = click.option("--alpha", type=float, default=0.0, show_default=True)(f)
    f = click.option("--set", "family", type=click.Choice(FAMILIES), default="singleton", show_default=True)(f)
    f = click.option("--variant", type=click.Choice(_VARIANTS), default=None,
                     help="Variant derived from the file data (default: as stored).")(f)
    f = click.option("--format", "fmt", type=click.Choice(FORMATS), default="golden_taillard", show_default=True)(f)
    f = click.option("--instance", type=click.Path(exists=True, dir_okay=False), required=True)(f)
    return f


def _parse_params(items) -> dict:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected key=value, got {item!r}", param_hint="--param")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


@click.group()
def main():
    """Robust heterogeneous vehicle routing under demand uncertainty."""


@main.command()
@_problem_options
@click.option("--solver", type=click.Choice(["ils", "amp"]), default="ils", show_default=True)
@click.option("--time-limit", type=float, default=1000.0, show_default=True, help="Seconds per run.")
@click.option("--max-tabu-calls", type=int, default=None, help="Stop each run after this many tabu searches.")
@click.option("--runs", type=int, default=1, show_default=True)
@click.option("--workers", type=int, default=None, help="Parallel runs (default from RHVRP_WORKERS).")
@click.option("--param", multiple=True, help="Search parameter override, e.g. --param mu=8.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for results and traces.")
def solve(instance, fmt, variant, family, alpha, beta, seed, capacity_inflation, solver, time_limit,
          max_tabu_calls, runs, workers, param, out):
    """Run ILS or AMP and print the best solution as JSON."""
    cfg = RunConfig(instance=instance, format=fmt, variant=variant, family=family, alpha=alpha, beta=beta,
                    seed=seed, solver=solver, time_limit=time_limit, max_tabu_calls=max_tabu_calls, runs=runs,
                    capacity_inflation=capacity_inflation, params=_parse_params(param), out=out, workers=workers)
    results = run_all(cfg)
    best = best_of(results)
    click.echo(json.dumps({
        "cost": best.cost,
        "feasible": best.feasible,
        "seed": best.seed,
        "runs": [{"seed": r.seed, "cost": r.cost, "feasible": r.feasible} for r in results],
        "routes": [{"type": r.vehicle_type, "customers": r.customers, "load": r.load} for r in best.routes],
    }, indent=2))


@main.command("validate")
@click.argument("result", type=click.Path(exists=True, dir_okay=False))
def validate_cmd(result):
    """Re-derive cost and feasibility of a stored result."""
    try:
        res = load_result(result)
    except ParseError as exc:
        raise click.ClickException(str(exc))
    sol, report = recheck(res)
    same_cost = abs(sol.cost - res.cost) <= 1e-6 * max(1.0, abs(res.cost))
    ok = report.partition_ok and report.fleet_ok and same_cost and report.feasible == res.feasible
    click.echo(json.dumps({
        "cost": sol.cost,
        "stored_cost": res.cost,
        "partition_ok": report.partition_ok,
        "fleet_ok": report.fleet_ok,
        "capacity_ok": report.capacity_ok,
        "site_ok": report.site_ok,
        "feasible": report.feasible,
        "consistent": ok,
    }, indent=2))
    sys.exit(0 if ok else 1)


@main.command("wc-load")
@_problem_options
@click.option("--customers", required=True, help="Comma-separated customer ids.")
def wc_load(instance, fmt, variant, family, alpha, beta, seed, capacity_inflation, customers):
    """Worst-case load of a customer set."""
    inst = load_problem(instance, fmt, variant, capacity_inflation)
    uset = build_set(inst, family, alpha, beta, seed)
    try:
        ids = [int(c) for c in customers.split(",") if c.strip()]
    except ValueError:
        raise click.BadParameter("customer ids must be integers", param_hint="--customers")
    try:
        click.echo(repr(uset.worst_case_load(ids)))
    except ValueError as exc:
        raise click.ClickException(str(exc))


@main.command()
@_problem_options
@click.option("--fractional", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--type", "vtype", type=int, default=None, help="Vehicle type (default: all).")
@click.option("--restarts", type=int, default=10, show_default=True)
@click.option("--stall", type=int, default=50, show_default=True)
def separate(instance, fmt, variant, family, alpha, beta, seed, capacity_inflation, fractional, vtype,
             restarts, stall):
    """Search for violated robust rounded capacity inequalities."""
    inst = load_problem(instance, fmt, variant, capacity_inflation)
    uset = build_set(inst, family, alpha, beta, seed)
    try:
        fs = parse_fractional(Path(fractional).read_text(), fractional)
    except ParseError as exc:
        raise click.ClickException(str(exc))
    if (fs.n, fs.m) != (inst.n, inst.m):
        raise click.ClickException(f"fractional solution is for n={fs.n}, m={fs.m}")
    rng = np.random.default_rng(seed)
    cuts = []
    for k in [vtype] if vtype is not None else range(inst.m):
        cuts += separate_rci(fs, k, uset, inst, rng, restarts, stall)
    click.echo(format_cuts(cuts), nl=False)


@main.command("sweep")
@click.option("--instance", "instances", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--format", "fmt", type=click.Choice(FORMATS), default="golden_taillard", show_default=True)
@click.option("--variant", type=click.Choice(_VARIANTS), default=None)
@click.option("--set", "family", type=click.Choice(FAMILIES), default="gamma", show_default=True)
@click.option("--alpha", type=float, default=0.1, show_default=True)
@click.option("--betas", default="0,0.2,0.4,0.6,0.8,1", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--solver", type=click.Choice(["ils", "amp"]), default="ils", show_default=True)
@click.option("--time-limit", type=float, default=60.0, show_default=True)
@click.option("--max-tabu-calls", type=int, default=None)
@click.option("--runs", type=int, default=3, show_default=True)
@click.option("--capacity-inflation", type=float, default=1.10, show_default=True)
@click.option("--workers", type=int, default=None)
def sweep_cmd(instances, fmt, variant, family, alpha, betas, seed, solver, time_limit, max_tabu_calls, runs,
              capacity_inflation, workers):
    """Price of robustness over a beta grid; prints raw rows then per-beta means."""
    cfg = RunConfig(instance=instances[0], format=fmt, variant=variant, family=family, alpha=alpha, seed=seed,
                    solver=solver, time_limit=time_limit, max_tabu_calls=max_tabu_calls, runs=runs,
                    capacity_inflation=capacity_inflation, workers=workers)
    grid = [float(b) for b in betas.split(",") if b.strip()]
    rows, table = sweep(cfg, grid, list(instances))
    click.echo("instance,beta,cost,reference,increase_pct,feasible,error")
    for r in rows:
        click.echo(f"{r.instance},{r.beta},{r.cost},{r.reference},{r.increase},{r.feasible},{r.error or ''}")
    click.echo("")
    click.echo("beta,mean_increase_pct")
    for b, v in table.items():
        click.echo(f"{b},{v}")


@main.command()
@click.option("--instance", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--format", "fmt", type=click.Choice(FORMATS), default="golden_taillard", show_default=True)
@click.option("--variant", type=click.Choice(_VARIANTS), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default stdout).")
def convert(instance, fmt, variant, out):
    """Rewrite an instance in the canonical format."""
    try:
        inst = load_problem(instance, fmt, variant)
    except ParseError as exc:
        raise click.ClickException(str(exc))
    text = write_canonical(inst)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
