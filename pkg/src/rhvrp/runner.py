"""Run orchestration: build the instance and set, launch seeded solver runs, write results.

Per-run seeds come from ``numpy.random.SeedSequence(seed).spawn(runs)``; run
``i`` uses the first 64-bit word of child ``i``.  The uncertainty set is
built with ``set_seed`` (defaulting to ``seed``), so the set stays fixed
across runs.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .formats import RouteRecord, RunResult, emit_result, parse_instance
from .instance import Instance, Variant, apply_variant, validate
from .local_search import PenaltyWeights
from .metaheuristics import SearchParams, adaptive_memory_programming, iterated_local_search
from .uncertainty import build_set, save_set

SOLVERS = {"ils": iterated_local_search, "amp": adaptive_memory_programming}
WORKERS_ENV = "RHVRP_WORKERS"


class RunError(RuntimeError):
    """A solver returned a solution that breaks the partition or fleet rules."""


@dataclass
class RunConfig:
    instance: str
    format: str = "golden_taillard"
    variant: str | None = None
    family: str = "singleton"
    alpha: float = 0.0
    beta: float = 0.0
    seed: int = 0
    set_seed: int | None = None
    solver: str = "ils"
    time_limit: float = 1000.0
    max_tabu_calls: int | None = None
    runs: int = 1
    capacity_inflation: float = 1.10
    params: dict = field(default_factory=dict)
    out: str | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.capacity_inflation <= 0:
            raise ValueError("capacity inflation must be positive")

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        d.pop("out")
        return d


def load_problem(instance: str, fmt: str = "golden_taillard", variant: str | None = None,
                 capacity_inflation: float = 1.0) -> Instance:
    """Parse, derive the variant and inflate capacities."""
    base = parse_instance(instance, fmt, Variant.HVRPFD if fmt == "golden_taillard" else None)
    inst = apply_variant(base, variant) if variant else base
    return inst.with_capacity_factor(capacity_inflation) if capacity_inflation != 1.0 else inst


def problem_for(config: RunConfig):
    inst = load_problem(config.instance, config.format, config.variant, config.capacity_inflation)
    seed = config.seed if config.set_seed is None else config.set_seed
    uset = build_set(inst, config.family, config.alpha, config.beta, seed)
    return inst, uset


def run_seeds(seed: int, runs: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(runs)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _one(config: RunConfig, run_seed: int) -> RunResult:
    inst, uset = problem_for(config)
    params = SearchParams(t_lim=config.time_limit, seed=run_seed, max_tabu_calls=config.max_tabu_calls,
                          **config.params)
    w = PenaltyWeights.default(inst)
    t0 = time.perf_counter()
    res = SOLVERS[config.solver](inst, uset, params, w)
    wall = time.perf_counter() - t0
    report = validate(res.best, inst, uset)
    if not (report.partition_ok and report.fleet_ok):
        raise RunError(f"solver returned a solution violating partition or fleet limits (seed {run_seed})")
    routes = [RouteRecord(list(r.customers), r.vehicle_type, rc.load, rc.slack)
              for r, rc in zip(res.best.routes, report.routes)]
    return RunResult(
        cost=res.best.cost,
        penalized_cost=res.best.penalized(w),
        feasible=report.feasible,
        routes=routes,
        seed=run_seed,
        wall_time=wall,
        tabu_calls=res.tabu_calls,
        trace=[list(e) for e in res.trace],
        config=config.echo(),
    )


def _one_packed(args):
    return _one(*args)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_all(config: RunConfig) -> list[RunResult]:
    """Every run of the configuration, in seed order."""
    seeds = run_seeds(config.seed, config.runs)
    workers = min(config.workers or default_workers(), len(seeds))
    jobs = [(config, s) for s in seeds]
    if workers <= 1:
        results = [_one_packed(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_packed, jobs))
    if config.out:
        write_results(config, results)
    return results


def best_of(results: list[RunResult]) -> RunResult:
    return min(results, key=lambda r: (not r.feasible, r.penalized_cost, r.seed))


def run(config: RunConfig) -> RunResult:
    """Best result over ``config.runs`` seeded runs."""
    return best_of(run_all(config))


def write_results(config: RunConfig, results: list[RunResult]) -> None:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    inst, uset = problem_for(config)
    save_set(uset, out / "set.json", {"family": config.family, "alpha": config.alpha, "beta": config.beta})
    for i, res in enumerate(results):
        emit_result(res, out / f"run_{i:03d}.json")
        with open(out / f"trace_{i:03d}.csv", "w") as fh:
            fh.write("elapsed_ms,iteration,best_cost\n")
            for ms, call, cost in res.trace:
                fh.write(f"{int(ms)},{int(call)},{cost!r}\n")
    emit_result(best_of(results), out / "best.json")


def recheck(result: RunResult, instance: Instance | None = None):
    """Rebuild cost and feasibility of a stored result from its configuration."""
    cfg = RunConfig(**result.config)
    if instance is None:
        inst, uset = problem_for(cfg)
    else:
        inst = instance
        seed = cfg.seed if cfg.set_seed is None else cfg.set_seed
        uset = build_set(inst, cfg.family, cfg.alpha, cfg.beta, seed)
    sol = result.solution(inst, uset)
    return sol, validate(sol, inst, uset)


# -- price-of-robustness sweep ------------------------------------------------


@dataclass
class SweepRow:
    instance: str
    beta: float
    cost: float
    reference: float
    increase: float
    feasible: bool
    error: str | None = None


def sweep(config: RunConfig, betas, instances=None) -> tuple[list[SweepRow], dict[float, float]]:
    """Percentage cost increase over the deterministic run, per instance and beta.

    The deterministic reference uses the same solver settings with the set
    shrunk to ``{q0}``.  A failing cell is recorded and the sweep goes on.
    """
    betas = [float(b) for b in betas]
    if not betas:
        raise ValueError("beta grid is empty")
    rows = []
    for path in instances or [config.instance]:
        base = RunConfig(**{**asdict(config), "instance": str(path), "out": None})
        try:
            ref = run(RunConfig(**{**asdict(base), "family": "singleton", "alpha": 0.0, "beta": 0.0})).cost
        except Exception as exc:  # keep sweeping other instances
            rows += [SweepRow(str(path), b, float("nan"), float("nan"), float("nan"), False, str(exc)) for b in betas]
            continue
        for b in betas:
            try:
                res = run(RunConfig(**{**asdict(base), "beta": b}))
                rows.append(SweepRow(str(path), b, res.cost, ref, 100.0 * (res.cost - ref) / ref, res.feasible))
            except Exception as exc:
                rows.append(SweepRow(str(path), b, float("nan"), ref, float("nan"), False, str(exc)))
    table = {}
    for b in betas:
        vals = [r.increase for r in rows if r.beta == b and r.error is None]
        table[b] = float(np.mean(vals)) if vals else float("nan")
    return rows, table
