"""Independent reference computations and random generators for the tests.

The oracles avoid the closed forms used by the library: polytope sets are
maximised by enumerating vertices, the ellipsoid by plugging in the explicit
maximiser, the cardinality set by enumerating deviating subsets, routing
optima by enumerating partitions and orders, and rounded capacity cuts by
scoring every customer subset.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from rhvrp import kernels
from rhvrp.cuts import FractionalSolution
from rhvrp.instance import Instance, Route, Solution, Variant, VehicleType, apply_variant
from rhvrp.local_search import (
    Move, MoveError, PenaltyWeights, SearchState, apply_move, evaluate_move, move_sequences, penalized_cost,
)
from rhvrp.uncertainty import (
    BudgetSet, DiscreteSet, EllipsoidSet, FactorSet, GammaSet, SingletonSet, build_set,
)

TOL = 1e-9


def rel_close(a: float, b: float, rtol: float = 1e-9, atol: float = 1e-12) -> bool:
    return abs(a - b) <= max(atol, rtol * max(abs(a), abs(b)))


# -- worst-case load oracles ------------------------------------------------------


def budget_vertices(uset: BudgetSet, S) -> float:
    """Maximise ``sum_S q`` by enumerating vertices of the polytope projected on ``S``.

    Customers outside ``S`` sit at their lower bounds, which only loosens the
    budgets.  Each coordinate is at a bound or free; free coordinates are
    fixed by an equal number of tight budgets.
    """
    S = sorted(S)
    if not S:
        return 0.0
    lo, hi = uset.lower[S], uset.upper[S]
    rows, rhs = [], []
    for ids, bound in uset.budgets:
        ids = set(ids)
        rows.append(np.array([1.0 if i in ids else 0.0 for i in S]))
        rhs.append(bound - sum(uset.lower[i] for i in ids if i not in S))
    rows, rhs = np.array(rows).reshape(len(rows), len(S)), np.array(rhs)
    best = -math.inf
    d = len(S)
    for state in itertools.product((0, 1, 2), repeat=d):
        free = [t for t in range(d) if state[t] == 2]
        if len(free) > len(rows):
            continue
        q = np.where(np.array(state) == 1, hi, lo).astype(float)
        for tight in itertools.combinations(range(len(rows)), len(free)):
            if free:
                A = rows[np.ix_(tight, free)]
                if abs(np.linalg.det(A)) < 1e-12:
                    continue
                fixed = [t for t in range(d) if t not in free]
                b = rhs[list(tight)] - rows[np.ix_(tight, fixed)] @ q[fixed]
                q = q.copy()
                q[free] = np.linalg.solve(A, b)
            ok = np.all(q >= lo - TOL * (1 + abs(lo))) and np.all(q <= hi + TOL * (1 + abs(hi)))
            if len(rows):
                ok = ok and np.all(rows @ q <= rhs + TOL * (1 + np.abs(rhs)))
            if ok:
                best = max(best, float(q.sum()))
            if not free:
                break
    return best


def factor_vertices(uset: FactorSet, S) -> float:
    """Enumerate vertices of the box cut by ``|sum(xi)| <= beta F``."""
    S = sorted(S)
    if not S:
        return 0.0
    F = uset.F
    g = uset.psi[S].sum(axis=0)
    A = np.vstack([np.eye(F), -np.eye(F), np.ones((1, F)), -np.ones((1, F))])
    b = np.concatenate([np.ones(2 * F), [uset.beta * F, uset.beta * F]])
    best = -math.inf
    for rows in itertools.combinations(range(A.shape[0]), F):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        xi = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ xi <= b + 1e-9):
            best = max(best, float(g @ xi))
    return float(uset.q0[S].sum()) + best


def ellipsoid_plugin(uset: EllipsoidSet, S) -> tuple[float, np.ndarray]:
    """Value at the explicit maximiser and the maximiser itself."""
    S = sorted(S)
    if not S:
        return 0.0, np.zeros(uset.n)
    n = uset.n
    root = np.diag(uset.sigma[1:]) if uset.axis_parallel else uset.sqrt_cov
    ones = np.zeros(n)
    ones[[i - 1 for i in S]] = 1.0
    v = root @ ones
    norm = float(np.linalg.norm(v))
    xi = v / norm if norm > 0 else np.zeros(n)
    q = uset.q0[1:] + root @ xi
    return float(q[[i - 1 for i in S]].sum()), xi


def gamma_subsets(uset: GammaSet, S) -> float:
    """Vertices of ``{xi in [0,1]^n : sum xi <= gamma}`` have at most one fractional entry."""
    S = sorted(S)
    if not S:
        return 0.0
    base = float(uset.q0[S].sum())
    best = 0.0
    G, gamma = uset.G, uset.gamma
    for r in range(0, min(G, len(S)) + 1):
        for D in itertools.combinations(S, r):
            val = float(uset.qhat[list(D)].sum())
            best = max(best, val)
            left = min(1.0, gamma - r)
            if left > 0:
                for j in S:
                    if j not in D:
                        best = max(best, val + left * float(uset.qhat[j]))
    return base + best


def discrete_vertices(uset: DiscreteSet, S) -> float:
    S = sorted(S)
    if not S:
        return 0.0
    return max(float(row[S].sum()) for row in uset.scenarios)


def oracle_load(uset, S) -> float:
    if isinstance(uset, BudgetSet):
        return budget_vertices(uset, S)
    if isinstance(uset, FactorSet):
        return factor_vertices(uset, S)
    if isinstance(uset, EllipsoidSet):
        return ellipsoid_plugin(uset, S)[0]
    if isinstance(uset, GammaSet):
        return gamma_subsets(uset, S)
    if isinstance(uset, DiscreteSet):
        return discrete_vertices(uset, S)
    if isinstance(uset, SingletonSet):
        return float(uset.nominal()[sorted(S)].sum()) if S else 0.0
    raise TypeError(type(uset))


# -- random sets -------------------------------------------------------------------

MICRO_FAMILIES = ("budget", "factor", "ellipsoid-ax", "ellipsoid-gen", "gamma", "discrete")


def random_set(family: str, n: int, rng: np.random.Generator):
    q0 = rng.uniform(0, 20, n)
    if family == "budget":
        lo = q0 * rng.uniform(0.5, 1.0, n)
        hi = q0 * rng.uniform(1.0, 1.6, n)
        perm = rng.permutation(np.arange(1, n + 1))
        L = int(rng.integers(0, min(3, n) + 1))
        cuts = sorted(rng.choice(np.arange(1, n), size=min(L, n - 1), replace=False)) if n > 1 else []
        groups = [g for g in np.split(perm, cuts) if g.size][:L]
        budgets = []
        for g in groups:
            a, b = lo[g - 1].sum(), hi[g - 1].sum()
            budgets.append((g.tolist(), float(a + rng.uniform(0, 1.2) * (b - a))))
        return BudgetSet(lo, hi, budgets)
    if family == "factor":
        F = int(rng.integers(1, 5))
        return FactorSet(q0, rng.uniform(-3, 3, (n, F)), float(rng.choice([0.0, 1.0, rng.uniform()])))
    if family == "ellipsoid-ax":
        return EllipsoidSet(q0, sigma=rng.uniform(0, 5, n))
    if family == "ellipsoid-gen":
        A = rng.normal(size=(n, n))
        vals, vecs = np.linalg.eigh(A @ A.T)
        root = (vecs * np.sqrt(np.maximum(vals, 0))) @ vecs.T
        return EllipsoidSet(q0, sqrt_cov=0.5 * (root + root.T))
    if family == "gamma":
        qhat = rng.uniform(0, 8, n)
        if rng.uniform() < 0.3:
            qhat = np.round(qhat)  # ties
        gamma = float(rng.choice([0.0, float(n), float(rng.integers(0, n + 1)), rng.uniform(0, n)]))
        return GammaSet(q0, qhat, gamma)
    if family == "discrete":
        D = int(rng.integers(1, 6))
        return DiscreteSet(rng.uniform(0, 20, (D, n)))
    raise ValueError(family)


def random_subset(n: int, rng: np.random.Generator) -> list[int]:
    k = int(rng.integers(0, n + 1))
    return sorted(rng.choice(np.arange(1, n + 1), size=k, replace=False).tolist())


# -- random instances and solutions ------------------------------------------------


def random_instance(rng, n, m, variant="HVRPFD", site=False, limited=True) -> Instance:
    coords = rng.uniform(0, 100, (n + 1, 2))
    dem = rng.integers(1, 20, n + 1).astype(float)
    types = [VehicleType(float(rng.integers(20, 60)), float(rng.integers(0, 50)),
                         int(rng.integers(1, 4)) if limited else n, float(rng.uniform(0.8, 1.5)))
             for _ in range(m)]
    allowed = None
    if site:
        allowed = rng.random((n + 1, m)) < 0.7
        allowed[:, 0] = True
    return Instance(coords, dem, types, variant=variant, allowed=allowed)


def random_solution(rng, inst: Instance, uset=None, max_routes=5) -> Solution:
    perm = rng.permutation(np.arange(1, inst.n + 1))
    H = int(rng.integers(1, min(inst.n, max_routes) + 1))
    cuts = sorted(rng.choice(np.arange(1, inst.n), H - 1, replace=False)) if H > 1 else []
    parts = np.split(perm, cuts)
    return Solution.build([Route(p.tolist(), int(rng.integers(inst.m))) for p in parts], inst, uset)


# -- exact routing ---------------------------------------------------------------


def best_cycle(costs: np.ndarray, members: tuple[int, ...]) -> tuple[float, tuple[int, ...]]:
    best, arg = math.inf, ()
    for perm in itertools.permutations(members):
        if len(perm) > 1 and perm[0] > perm[-1]:
            continue
        nodes = (0,) + perm + (0,)
        c = sum(costs[a, b] for a, b in zip(nodes[:-1], nodes[1:]))
        if c < best:
            best, arg = c, perm
    return best, arg


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [(first,)] + part
        for i in range(len(part)):
            yield part[:i] + [(first,) + part[i]] + part[i + 1:]


def exhaustive_single_type(inst: Instance, uset) -> float:
    """Optimal cost for one vehicle type by enumerating partitions and visit orders."""
    (vt,) = inst.vehicle_types
    cap = vt.capacity
    costs = inst.costs[0]
    cycle = {}
    best = math.inf
    for part in set_partitions(range(1, inst.n + 1)):
        if len(part) > vt.count:
            continue
        total = 0.0
        for block in part:
            key = tuple(sorted(block))
            if uset.worst_case_load(key) > cap * (1 + 1e-9):
                total = math.inf
                break
            if key not in cycle:
                cycle[key] = best_cycle(costs, key)[0]
            total += cycle[key] + vt.fixed_cost
        best = min(best, total)
    return best


def toy_cvrp(rng, n=6) -> Instance:
    coords = rng.uniform(0, 100, (n + 1, 2))
    dem = rng.integers(1, 10, n + 1).astype(float)
    total = dem[1:].sum()
    cap = float(max(dem[1:].max(), rng.uniform(0.3, 0.7) * total))
    return Instance(coords, dem, [VehicleType(cap, 0.0, n)], Variant.CVRP)


# -- rounded capacity inequalities ------------------------------------------------


def rci_max_violation(fs, k: int, uset, inst: Instance) -> tuple[float, tuple[int, ...]]:
    """Most violated set over every subset of the eligible customers.

    The cut value is ``in.deg - in' X in`` for a 0/1 membership vector, so all
    subsets are scored with a couple of matrix products.
    """
    cap = float(inst.capacities[k])
    pool = [i for i in range(1, inst.n + 1) if uset.worst_case_load([i]) <= cap * (1 + 1e-9)]
    if not pool:
        return -math.inf, ()
    N = inst.n + 1
    X = np.zeros((N, N))
    for (i, j, kk), v in fs.x.items():
        if kk == k:
            X[i, j] += v
            X[j, i] += v
    y = np.zeros(N)
    for (i, kk), v in fs.y.items():
        if kk == k:
            y[i] = v
    masks = np.array(list(itertools.product((0, 1), repeat=len(pool)))[1:], dtype=float)
    M = np.zeros((masks.shape[0], N))
    M[:, pool] = masks
    lhs = M @ X.sum(axis=1) - np.einsum("si,ij,sj->s", M, X, M) + M @ (2.0 * (1.0 - y))
    loads = np.array([uset.worst_case_load([pool[t] for t in np.flatnonzero(row)]) for row in masks])
    rhs = 2.0 * np.ceil(loads / cap - 1e-9)
    viol = rhs - lhs
    best = int(np.argmax(viol))
    return float(viol[best]), tuple(pool[t] for t in np.flatnonzero(masks[best]))


def random_routes(rng, n: int, m: int, max_cuts: int = 4) -> list[Route]:
    perm = rng.permutation(np.arange(1, n + 1))
    size = int(rng.integers(0, min(max_cuts, n - 1) + 1))
    cuts = np.sort(rng.choice(np.arange(1, n), size=size, replace=False)) if n > 1 else []
    return [Route(tuple(int(c) for c in p), int(rng.integers(m))) for p in np.split(perm, cuts)]


def feasible_routes(rng, inst: Instance, uset) -> list[Route]:
    """Random order, packed into the largest type while the worst case fits."""
    k = int(np.argmax(inst.capacities))
    cap = inst.capacities[k]
    routes, cur = [], []
    for c in rng.permutation(np.arange(1, inst.n + 1)).tolist():
        if cur and uset.worst_case_load(cur + [c]) > cap * (1 + 1e-9):
            routes.append(Route(cur, k))
            cur = []
        cur.append(c)
    routes.append(Route(cur, k))
    return routes


def mix_fractional(a, b):
    """Midpoint of two fractional solutions."""
    x, y = {}, {}
    for f in (a, b):
        for key, v in f.x.items():
            x[key] = x.get(key, 0.0) + v / 2
        for key, v in f.y.items():
            y[key] = y.get(key, 0.0) + v / 2
    return FractionalSolution(a.n, a.m, x, y)


# -- move fuzzing ---------------------------------------------------------------

MOVE_FAMILIES = ("singleton",) + MICRO_FAMILIES


def _random_move(rng, routes):
    H = len(routes)
    kind = int(rng.integers(3))
    a, b = int(rng.integers(H)), int(rng.integers(H))
    La, Lb = len(routes[a]), len(routes[b])
    if kind == 0:
        return Move("relocate", a, int(rng.integers(1, La + 1)), b, int(rng.integers(0, Lb + 1)))
    if kind == 1:
        return Move("exchange", a, int(rng.integers(1, La + 1)), b, int(rng.integers(1, Lb + 1)))
    return Move("two_opt", a, int(rng.integers(0, La + 1)), b, int(rng.integers(0, Lb + 1)))


def fuzz_deltas(n_moves, seed=0, backends=None):
    """Worst gap between incremental and from-scratch deltas over random moves."""
    backends = kernels.available_backends() if backends is None else backends
    rng = np.random.default_rng(seed)
    worst, done, trial = 0.0, 0, 0
    per_trial = 100
    while done < n_moves:
        fam = MOVE_FAMILIES[trial % len(MOVE_FAMILIES)]
        variant = ["HVRPFD", "FSMFD", "SDVRP"][trial % 3]
        trial += 1
        inst = random_instance(rng, int(rng.integers(3, 9)), int(rng.integers(1, 4)), variant,
                               site=variant == "SDVRP")
        if variant == "FSMFD":
            inst = apply_variant(inst, "FSMFD")
        uset = build_set(inst, fam, float(rng.uniform()), float(rng.uniform()), seed=trial)
        w = PenaltyWeights.default(inst)
        sol = random_solution(rng, inst, uset)
        base = penalized_cost(sol, inst, uset, w)
        routes = [list(r.customers) for r in sol.routes]
        trackers = []
        for r in sol.routes:
            t = uset.tracker()
            for c in r.customers:
                t.add(c)
            trackers.append(t)
        states = []
        for be in backends:
            s = SearchState(inst, uset, w, be)
            s.load(sol)
            states.append(s)
        moves = 0
        while moves < per_trial:
            mv = _random_move(rng, routes)
            try:
                move_sequences(routes, mv)
            except MoveError:
                continue
            moves += 1
            d, types = evaluate_move(sol, mv, trackers, uset, w, inst)
            full = penalized_cost(apply_move(sol, mv, inst, uset, types), inst, uset, w) - base
            worst = max(worst, abs(d - full))
            for s in states:
                kind = {"relocate": 0, "exchange": 1, "two_opt": 2}[mv.kind]
                dk, ka, kb, _ = s.core.eval_move(kind, mv.a, mv.pa, mv.b, mv.pb)
                fk = penalized_cost(apply_move(sol, mv, inst, uset, (ka, kb)), inst, uset, w) - base
                worst = max(worst, abs(dk - fk))
        done += moves
    return worst, done
