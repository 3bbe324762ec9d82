"""Time tabu search with the compiled and the interpreted kernels.

    python benchmarks/bench_kernels.py [--family gamma] [--repeats 3]

Both backends start from the same construction and seed, so they follow the
same trajectory; the script checks that and reports seconds per call.
"""
import argparse
import time

import numpy as np

from rhvrp.formats import bundled
from rhvrp.kernels import available_backends
from rhvrp.local_search import PenaltyWeights, tabu_search
from rhvrp.metaheuristics import construct_solution
from rhvrp.runner import load_problem
from rhvrp.uncertainty import build_set


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instance", default=str(bundled("cmt_01")))
    ap.add_argument("--variant", default="FSMF")
    ap.add_argument("--family", default="budget")
    ap.add_argument("--stall", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    inst = load_problem(args.instance, variant=args.variant, capacity_inflation=1.1)
    uset = build_set(inst, args.family, 0.1, 0.5, seed=0)
    w = PenaltyWeights.default(inst)
    start = construct_solution(inst, uset, 3, np.random.default_rng(0), w)

    times, costs = {}, {}
    for name in available_backends():
        runs = []
        for _ in range(args.repeats):
            t = time.perf_counter()
            out = tabu_search(start, inst, uset, w, np.random.default_rng(1), stall_limit=args.stall, backend=name)
            runs.append(time.perf_counter() - t)
        times[name], costs[name] = min(runs), out.cost
        print(f"{name:7s} {times[name]:8.3f} s per call  final cost {out.cost:.2f}")
    if len(times) == 2:
        same = abs(costs["cython"] - costs["python"]) < 1e-9
        print(f"speed-up {times['python'] / times['cython']:.1f}x, same trajectory: {same}")
    else:
        print("compiled kernels not built; only the interpreted backend was timed")


if __name__ == "__main__":
    main()
