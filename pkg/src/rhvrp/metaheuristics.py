"""Solution drivers: iterated local search and adaptive memory programming.

Both drivers share the greedy construction heuristic below, run the tabu
search of :mod:`rhvrp.local_search` on every start point and keep the best
solution seen.  A single seeded generator feeds every random choice of a run,
in program order, so a run is reproducible whenever it is bounded by
``max_tabu_calls`` rather than by the wall clock.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .instance import Instance, Route, Solution, route_cost, violation
from .local_search import PenaltyWeights, best_vehicle_type, penalized_cost, tabu_search
from .uncertainty import UncertaintySet, loads_with

_FIT_RTOL = 1e-9


@dataclass(frozen=True)
class SearchParams:
    chi: int = 10
    eta: int = 3
    nu: int = 30
    zeta: int = 500
    delta: float | None = None  # None means half the reference cost
    theta: float = 0.7
    mu: int = 16
    t_lim: float = 1000.0
    seed: int = 0
    max_tabu_calls: int | None = None
    max_tabu_iterations: int | None = None
    backend: str | None = None

    def __post_init__(self):
        for name in ("chi", "eta", "nu", "zeta", "mu"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.t_lim <= 0:
            raise ValueError("t_lim must be positive")
        if self.max_tabu_calls is not None and self.max_tabu_calls < 1:
            raise ValueError("max_tabu_calls must be at least 1")

    def radius(self, instance: Instance) -> float:
        return 0.5 * instance.reference_cost() if self.delta is None else self.delta

    def with_(self, **changes) -> "SearchParams":
        return replace(self, **changes)


def _rank(sol: Solution, pen: float) -> tuple[int, float]:
    # feasible solutions first, then penalized cost
    return (0 if sol.feasible else 1, pen)


def _route_ratio(route: Route, instance: Instance, uset: UncertaintySet) -> float:
    """Cost per unit of worst-case load; +inf for empty or zero-load routes."""
    if not route.customers:
        return math.inf
    load = uset.worst_case_load(route.customers)
    if load <= 0:
        return math.inf
    return route_cost(route, instance) / load


# -- construction -----------------------------------------------------------


class _Builder:
    """Insertion machinery shared by construction, perturbation and AMP."""

    def __init__(self, instance: Instance, uset: UncertaintySet, w: PenaltyWeights):
        self.instance = instance
        self.uset = uset
        self.w = w
        self.costs = instance.costs
        self.relaxed = instance.relaxed_costs
        self.caps = instance.capacities
        self.single = np.array([0.0] + [uset.max_single_demand(i) for i in range(1, instance.n + 1)])
        self.allowed = instance.allowed

    def fits(self, load, k: int):
        cap = self.caps[k]
        return load <= cap + _FIT_RTOL * cap

    def insertion(self, route: list[int], k: int, cands: np.ndarray):
        """Cheapest insertion position and cost increase for each candidate."""
        c = self.costs[k]
        nodes = np.array([0] + route + [0], dtype=np.int64)
        prev, nxt = nodes[:-1], nodes[1:]
        delta = c[prev][:, cands] + c[cands][:, nxt].T - c[prev, nxt][:, None]
        pos = np.argmin(delta, axis=0)
        return pos, delta[pos, np.arange(cands.size)]

    def grow(self, k: int, unrouted: np.ndarray, eta: int, rng: np.random.Generator) -> list[int]:
        """Fill one route of type ``k`` from a restricted candidate list."""
        cands = unrouted[self.fits(self.single[unrouted], k)]
        if self.allowed is not None:
            cands = cands[self.allowed[cands, k]]
        route: list[int] = []
        while cands.size:
            if route:
                cands = cands[self.fits(loads_with(self.uset, route, cands), k)]
                if not cands.size:
                    break
            pos, cost = self.insertion(route, k, cands)
            order = np.argsort(cost, kind="stable")[:eta]
            pick = int(order[rng.integers(order.size)])
            route.insert(int(pos[pick]), int(cands[pick]))
            cands = np.delete(cands, pick)
        return route

    def fallback(self, routes: list[Route], leftover, rng: np.random.Generator, usage: np.ndarray) -> list[Route]:
        """Insert customers no new route could take, weighing violation against cost."""
        routes = list(routes)
        for x in leftover:
            x = int(x)
            if not routes:
                k = _spare(self.instance, usage)
                routes.append(Route((x,), k))
                usage[k] += 1
                continue
            viol = np.empty(len(routes))
            cost = np.empty(len(routes))
            where = np.empty(len(routes), dtype=np.int64)
            xs = np.array([x])
            for h, r in enumerate(routes):
                k = r.vehicle_type
                cs = list(r.customers)
                before = violation(self.uset.worst_case_load(cs), self.caps[k])
                after = violation(float(loads_with(self.uset, cs, xs)[0]), self.caps[k])
                sites = 0 if self.allowed is None or self.allowed[x, k] else 1
                viol[h] = self.w.capacity * (after - before) + self.w.site * sites
                pos, dc = self._relaxed_insertion(cs, k, x)
                cost[h], where[h] = dc, pos
            u = rng.uniform()
            score = u * _normalise(viol) + (1.0 - u) * _normalise(cost)
            h = int(np.argmin(score))
            cs = list(routes[h].customers)
            cs.insert(int(where[h]), x)
            routes[h] = Route(cs, routes[h].vehicle_type)
        return routes

    def _relaxed_insertion(self, route: list[int], k: int, x: int) -> tuple[int, float]:
        c = self.relaxed[k]
        nodes = [0] + route + [0]
        best, best_pos = math.inf, 0
        for p in range(len(nodes) - 1):
            d = c[nodes[p], x] + c[x, nodes[p + 1]] - c[nodes[p], nodes[p + 1]]
            if d < best:
                best, best_pos = d, p
        return best_pos, best


def _normalise(v: np.ndarray) -> np.ndarray:
    lo, hi = float(v.min()), float(v.max())
    return np.zeros_like(v) if hi - lo <= 0 else (v - lo) / (hi - lo)


def _spare(instance: Instance, usage: np.ndarray) -> int:
    caps, counts = instance.capacities, instance.counts
    free = [k for k in range(instance.m) if usage[k] < counts[k]]
    pool = free or list(range(instance.m))
    return max(pool, key=lambda k: (caps[k], -k))


def _fill(builder: _Builder, routes: list[Route], eta: int, rng: np.random.Generator,
          memory: "ReferenceSet | None" = None, theta: float = 0.0) -> list[Route]:
    instance, uset = builder.instance, builder.uset
    routed = np.zeros(instance.n + 1, dtype=bool)
    usage = np.zeros(instance.m, dtype=np.int64)
    for r in routes:
        routed[list(r.customers)] = True
        usage[r.vehicle_type] += 1
    routes = list(routes)
    while not routed[1:].all():
        unrouted = np.flatnonzero(~routed[1:]) + 1
        best, best_ratio = None, math.inf
        for k in range(instance.m):
            if usage[k] >= instance.counts[k]:
                continue
            # draw only when the choice is random, so theta = 0 replays plain construction
            if memory is not None and (theta >= 1.0 or (theta > 0.0 and rng.uniform() < theta)):
                cand = memory.candidate(k, routed, builder, usage)
            else:
                seq = builder.grow(k, unrouted, eta, rng)
                cand = Route(seq, k) if seq else None
            if cand is None:
                continue
            ratio = _route_ratio(cand, instance, uset)
            if ratio < best_ratio:
                best, best_ratio = cand, ratio
        if best is None:
            break
        routes.append(best)
        routed[list(best.customers)] = True
        usage[best.vehicle_type] += 1
    leftover = np.flatnonzero(~routed[1:]) + 1
    if leftover.size:
        routes = builder.fallback(routes, leftover, rng, usage)
    return routes


def construct_solution(instance: Instance, uset: UncertaintySet, eta: int, rng: np.random.Generator,
                       w: PenaltyWeights | None = None, partial=None) -> Solution:
    """Greedy randomized construction.

    Each round grows one candidate route per vehicle type with spare
    vehicles, drawing customers from the ``eta`` cheapest insertions while
    the worst-case load still fits, and adopts the candidate with the lowest
    cost per unit of load.  Customers left over are forced into existing
    routes.  ``partial`` routes are kept as they are.
    """
    if eta < 1:
        raise ValueError("eta must be at least 1")
    builder = _Builder(instance, uset, w or PenaltyWeights.default(instance))
    routes = _fill(builder, list(partial or []), eta, rng)
    return Solution.build(routes, instance, uset)


def perturb(sol: Solution, delta: float, instance: Instance, uset: UncertaintySet,
            rng: np.random.Generator, eta: int = 3, w: PenaltyWeights | None = None) -> Solution:
    """Drop the least efficient route and its neighbours, then rebuild greedily.

    Routes closer than ``delta`` to the least efficient route go with it;
    when none is that close the single nearest route goes instead.
    """
    routes = list(sol.routes)
    if not routes:
        return construct_solution(instance, uset, eta, rng, w)
    ratios = [_route_ratio(r, instance, uset) for r in routes]
    t = max(range(len(routes)), key=lambda h: (ratios[h], -h))
    drop = {t}
    if len(routes) > 1:
        prox = instance.min_costs()
        target = list(routes[t].customers)
        dist = {h: float(prox[np.ix_(target, list(r.customers))].max())
                for h, r in enumerate(routes) if h != t}
        close = {h for h, d in dist.items() if d < delta}
        drop |= close or {min(dist, key=lambda h: (dist[h], h))}
    keep = [r for h, r in enumerate(routes) if h not in drop]
    return construct_solution(instance, uset, eta, rng, w, partial=keep)


# -- adaptive memory ----------------------------------------------------------


class ReferenceSet:
    """Elite pool with an undirected per-type edge frequency table."""

    def __init__(self, instance: Instance, capacity: int):
        if capacity < 1:
            raise ValueError("reference set capacity must be at least 1")
        self.instance = instance
        self.capacity = capacity
        self.members: list[Solution] = []
        self.costs: list[float] = []
        self.freq = np.zeros((instance.m, instance.n + 1, instance.n + 1), dtype=np.int64)

    def __len__(self):
        return len(self.members)

    def _count(self, sol: Solution, sign: int) -> None:
        for r in sol.routes:
            nodes = r.nodes()
            a, b = np.array(nodes[:-1]), np.array(nodes[1:])
            np.add.at(self.freq[r.vehicle_type], (a, b), sign)
            np.add.at(self.freq[r.vehicle_type], (b, a), sign)

    def recount(self) -> np.ndarray:
        self.freq[:] = 0
        for s in self.members:
            self._count(s, 1)
        return self.freq

    def contains(self, sol: Solution) -> bool:
        key = sol.canonical()
        return any(s.canonical() == key for s in self.members)

    def add(self, sol: Solution, cost: float) -> bool:
        if len(self.members) >= self.capacity or self.contains(sol):
            return False
        self.members.append(sol)
        self.costs.append(cost)
        self._count(sol, 1)
        return True

    def worst(self) -> int:
        return max(range(len(self.costs)), key=lambda i: (self.costs[i], i))

    def update(self, sol: Solution, cost: float) -> bool:
        """Replace the worst member when ``sol`` is strictly cheaper and new."""
        if len(self.members) < self.capacity:
            return self.add(sol, cost)
        i = self.worst()
        if not cost < self.costs[i] or self.contains(sol):
            return False
        self._count(self.members[i], -1)
        self.members[i] = sol
        self.costs[i] = cost
        self._count(sol, 1)
        return True

    def weights(self) -> np.ndarray:
        c = np.asarray(self.costs, dtype=float)
        lo, hi = c.min(), c.max()
        if hi - lo <= 1e-12 * max(1.0, abs(hi)):
            return np.ones_like(c)
        return (hi - c) / (hi - lo)

    def candidate(self, k: int, routed: np.ndarray, builder: _Builder, usage: np.ndarray) -> Route | None:
        """Highest-scoring remembered type-``k`` route, minus routed customers."""
        w = self.weights()
        free = ~routed
        free[0] = True
        best, best_score = None, 0.0
        for s, ws in zip(self.members, w):
            for r in s.routes:
                if r.vehicle_type != k:
                    continue
                nodes = np.array(r.nodes())
                a, b = nodes[:-1], nodes[1:]
                score = ws * float((self.freq[k, a, b] * (free[a] & free[b])).sum())
                if score > best_score:
                    best, best_score = r, score
        if best is None:
            return None
        seq = [c for c in best.customers if not routed[c]]
        if not seq:
            return None
        avail = [j for j in range(builder.instance.m) if usage[j] < builder.instance.counts[j]]
        kk = best_vehicle_type(Route(seq, k), builder.instance, builder.uset, builder.w, avail)
        return Route(seq, kk)


def construct_provisional(P: ReferenceSet, theta: float, instance: Instance, uset: UncertaintySet,
                          rng: np.random.Generator, eta: int = 3, w: PenaltyWeights | None = None) -> Solution:
    """Build a start point from elite routes (probability ``theta``) or greedily."""
    if len(P) == 0:
        raise ValueError("reference set is empty")
    builder = _Builder(instance, uset, w or PenaltyWeights.default(instance))
    routes = _fill(builder, [], eta, rng, memory=P, theta=theta)
    return Solution.build(routes, instance, uset)


def update_reference_set(P: ReferenceSet, candidate: Solution, cost: float) -> ReferenceSet:
    P.update(candidate, cost)
    return P


# -- drivers -------------------------------------------------------------------


@dataclass
class SearchResult:
    best: Solution
    best_cost: float
    tabu_calls: int
    elapsed: float
    trace: list[tuple[int, int, float]] = field(default_factory=list)


class _Run:
    """Budget, incumbent and progress trace shared by both drivers."""

    def __init__(self, instance, uset, params: SearchParams, w, on_progress=None):
        self.instance, self.uset, self.params = instance, uset, params
        self.w = w or PenaltyWeights.default(instance)
        self.rng = np.random.default_rng(params.seed)
        self.t0 = time.perf_counter()
        self.calls = 0
        self.longest = 0.0
        self.best: Solution | None = None
        self.best_key = (2, math.inf)
        self.trace: list[tuple[int, int, float]] = []
        self.on_progress = on_progress

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def alive(self) -> bool:
        p = self.params
        if p.max_tabu_calls is not None and self.calls >= p.max_tabu_calls:
            return False
        # skip a call that would likely overrun the limit
        return self.elapsed() + self.longest < p.t_lim

    def pen(self, sol: Solution) -> float:
        return penalized_cost(sol, self.instance, self.uset, self.w)

    def search(self, sol: Solution) -> tuple[Solution, float]:
        p = self.params
        t = time.perf_counter()
        out = tabu_search(sol, self.instance, self.uset, self.w, self.rng, p.nu, p.zeta,
                          p.max_tabu_iterations, p.backend)
        self.longest = max(self.longest, time.perf_counter() - t)
        self.calls += 1
        cost = self.pen(out)
        key = _rank(out, cost)
        if key < self.best_key:
            self.best, self.best_key = out, key
            event = (int(self.elapsed() * 1000), self.calls, cost)
            self.trace.append(event)
            if self.on_progress:
                self.on_progress(*event)
        return out, cost

    def result(self) -> SearchResult:
        return SearchResult(self.best, self.best_key[1], self.calls, self.elapsed(), self.trace)


def iterated_local_search(instance: Instance, uset: UncertaintySet, params: SearchParams = SearchParams(),
                          w: PenaltyWeights | None = None, on_progress=None) -> SearchResult:
    """Restarted construction, then perturb-and-search until ``chi`` failures in a row."""
    run = _Run(instance, uset, params, w, on_progress)
    delta = params.radius(instance)
    while run.best is None or run.alive():
        sol = construct_solution(instance, uset, params.eta, run.rng, run.w)
        sol, cost = run.search(sol)
        # the walk always continues from the latest solution; cur_key only resets the counter
        cur_key = _rank(sol, cost)
        counter = 0
        while counter < params.chi and run.alive():
            sol = perturb(sol, delta, instance, uset, run.rng, params.eta, run.w)
            sol, cost = run.search(sol)
            if _rank(sol, cost) < cur_key:
                cur_key, counter = _rank(sol, cost), 0
            else:
                counter += 1
    return run.result()


def adaptive_memory_programming(instance: Instance, uset: UncertaintySet, params: SearchParams = SearchParams(),
                                w: PenaltyWeights | None = None, on_progress=None) -> SearchResult:
    """Fill a reference set with searched constructions, then search provisional solutions."""
    run = _Run(instance, uset, params, w, on_progress)
    P = ReferenceSet(instance, params.mu)
    attempts = 0
    # duplicates are not stored, so cap the attempts on tiny instances
    while len(P) < params.mu and attempts < 4 * params.mu and (run.best is None or run.alive()):
        sol = construct_solution(instance, uset, params.eta, run.rng, run.w)
        sol, cost = run.search(sol)
        P.add(sol, cost)
        attempts += 1
    while run.alive():
        sol = construct_provisional(P, params.theta, instance, uset, run.rng, params.eta, run.w)
        sol, cost = run.search(sol)
        P.update(sol, cost)
    return run.result()
