"""Robust local search: penalized cost, move evaluation and tabu search.

Moves follow one position convention throughout (customers sit at positions
1..L of a route, the depot at 0 and L+1):

* relocate ``(a, p, b, t)`` takes the customer at position ``p`` of route
  ``a`` and inserts it after position ``t`` of route ``b`` (original
  numbering, so an intra-route move needs ``t`` not in ``{p-1, p}``);
* exchange ``(a, p, b, q)`` swaps two customers;
* 2-opt ``(a, p, a, q)`` reverses positions ``p..q``; between two routes it
  keeps the first ``p`` customers of ``a`` and the first ``q`` of ``b`` and
  swaps the remaining tails.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .instance import Instance, Route, Solution, relaxed_route_cost, site_violations, violation
from .uncertainty import H_GAMMA, GammaSet, UncertaintySet

MOVE_KINDS = ("relocate", "exchange", "two_opt")
_KIND_CODE = {"relocate": kernels.RELOCATE, "exchange": kernels.EXCHANGE, "two_opt": kernels.TWO_OPT}


class MoveError(ValueError):
    """A move that does not fit the solution it is applied to."""


@dataclass(frozen=True)
class PenaltyWeights:
    capacity: float
    site: float = 0.0

    def __post_init__(self):
        if self.capacity < 0 or self.site < 0:
            raise ValueError("penalty weights must be nonnegative")

    @classmethod
    def default(cls, instance: Instance) -> "PenaltyWeights":
        ref = instance.reference_cost()
        return cls(1000.0 * ref / float(instance.capacities.max()), 100.0 * ref)


@dataclass(frozen=True)
class Move:
    kind: str
    a: int
    pa: int
    b: int
    pb: int
    types: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in MOVE_KINDS:
            raise MoveError(f"unknown move kind {self.kind!r}")

    @property
    def scope(self) -> str:
        return "intra" if self.a == self.b else "inter"


class TabuList:
    """Move attributes ``(customer, route id)`` forbidden for ``tenure`` iterations."""

    def __init__(self, tenure: int):
        if tenure < 0:
            raise ValueError("tenure must be nonnegative")
        self.tenure = tenure
        self._expiry: dict[tuple[int, int], int] = {}

    def add(self, attr: tuple[int, int], iteration: int) -> None:
        self._expiry[attr] = iteration + self.tenure

    def is_tabu(self, attr: tuple[int, int], iteration: int) -> bool:
        exp = self._expiry.get(attr)
        return exp is not None and iteration <= exp

    def active(self, iteration: int) -> list[tuple[int, int]]:
        self._expiry = {k: v for k, v in self._expiry.items() if iteration <= v}
        return list(self._expiry)

    def __len__(self):
        return len(self._expiry)


def penalized_cost(sol: Solution, instance: Instance, uset: UncertaintySet, w: PenaltyWeights) -> float:
    """Transportation cost plus weighted capacity and site violations, from scratch."""
    total = 0.0
    for r in sol.routes:
        if not r.customers:
            continue
        k = r.vehicle_type
        load = uset.worst_case_load(r.customers)
        total += relaxed_route_cost(r, instance)
        total += w.capacity * violation(load, instance.vehicle_types[k].capacity)
        total += w.site * site_violations(r, instance)
    return total


# -- vehicle types -----------------------------------------------------------


def _type_penalty(load: float, k: int, sites: int, instance: Instance, w: PenaltyWeights) -> float:
    return w.capacity * violation(load, instance.vehicle_types[k].capacity) + w.site * sites


def _pick_type(customers, load: float, instance: Instance, w: PenaltyWeights, candidates) -> int:
    best = None
    best_p = math.inf
    best_c = 0.0
    caps = instance.capacities
    for k in candidates:
        route = Route(customers, k)
        p = _type_penalty(load, k, site_violations(route, instance), instance, w)
        c = relaxed_route_cost(route, instance)
        if best is None or p < best_p:
            best, best_p, best_c = k, p, c
        elif p == best_p:
            if p == 0.0 and c != best_c:
                if c < best_c:
                    best, best_c = k, c
            elif caps[k] < caps[best]:
                best, best_c = k, c
    return best


def best_vehicle_type(route: Route, instance: Instance, uset: UncertaintySet,
                      w: PenaltyWeights | None = None, available=None) -> int:
    """Type that serves the route with least violation, then least cost.

    ``available`` restricts the candidate types (for instance to those with
    vehicles left).  Ties go to the smaller capacity, then the smaller index.
    """
    w = w or PenaltyWeights.default(instance)
    cands = range(instance.m) if available is None else sorted(available)
    load = uset.worst_case_load(route.customers)
    return _pick_type(route.customers, load, instance, w, cands)


def swap_types(ra: Route, rb: Route, instance: Instance, uset: UncertaintySet,
               w: PenaltyWeights | None = None) -> tuple[int, int]:
    """Limited fleets: keep the two types or exchange them, whichever is cheaper."""
    w = w or PenaltyWeights.default(instance)
    ka, kb = ra.vehicle_type, rb.vehicle_type

    def pen(cs, k):
        if not cs:
            return 0.0
        r = Route(cs, k)
        load = uset.worst_case_load(cs)
        return relaxed_route_cost(r, instance) + _type_penalty(load, k, site_violations(r, instance), instance, w)

    keep = pen(ra.customers, ka) + pen(rb.customers, kb)
    swap = pen(ra.customers, kb) + pen(rb.customers, ka)
    return (kb, ka) if swap < keep else (ka, kb)


# -- moves -----------------------------------------------------------------


def _check_move(routes, mv: Move) -> None:
    H = len(routes)
    if not (0 <= mv.a < H and 0 <= mv.b < H):
        raise MoveError("route index out of range")
    La, Lb = len(routes[mv.a]), len(routes[mv.b])
    if mv.kind == "relocate":
        ok = 1 <= mv.pa <= La and 0 <= mv.pb <= Lb
        if mv.a == mv.b:
            ok = ok and mv.pb not in (mv.pa - 1, mv.pa)
    elif mv.kind == "exchange":
        ok = 1 <= mv.pa <= La and 1 <= mv.pb <= Lb and not (mv.a == mv.b and mv.pa >= mv.pb)
    else:
        if mv.a == mv.b:
            ok = 1 <= mv.pa < mv.pb <= La
        else:
            ok = 0 <= mv.pa <= La and 0 <= mv.pb <= Lb
    if not ok:
        raise MoveError(f"malformed move {mv}")


def move_sequences(routes, mv: Move) -> dict[int, list[int]]:
    """New customer sequences of the routes touched by ``mv``."""
    _check_move(routes, mv)
    A = list(routes[mv.a])
    if mv.a == mv.b:
        p, q = mv.pa, mv.pb
        if mv.kind == "relocate":
            x = A.pop(p - 1)
            A.insert(q if q < p else q - 1, x)
        elif mv.kind == "exchange":
            A[p - 1], A[q - 1] = A[q - 1], A[p - 1]
        else:
            A[p - 1:q] = A[p - 1:q][::-1]
        return {mv.a: A}
    B = list(routes[mv.b])
    if mv.kind == "relocate":
        x = A.pop(mv.pa - 1)
        B.insert(mv.pb, x)
    elif mv.kind == "exchange":
        A[mv.pa - 1], B[mv.pb - 1] = B[mv.pb - 1], A[mv.pa - 1]
    else:
        A, B = A[:mv.pa] + B[mv.pb:], B[:mv.pb] + A[mv.pa:]
    return {mv.a: A, mv.b: B}


def apply_move(sol: Solution, mv: Move, instance: Instance, uset: UncertaintySet,
               types: tuple[int, int] | None = None) -> Solution:
    """Solution after ``mv``; inter-route moves take ``types`` (or ``mv.types``)."""
    routes = [r.customers for r in sol.routes]
    kinds = [r.vehicle_type for r in sol.routes]
    seqs = move_sequences(routes, mv)
    types = types or mv.types
    if mv.a != mv.b and types is not None:
        kinds[mv.a], kinds[mv.b] = types
    for h, s in seqs.items():
        routes[h] = s
    return Solution.build([Route(c, k) for c, k in zip(routes, kinds)], instance, uset)


def evaluate_move(sol: Solution, mv: Move, trackers, uset: UncertaintySet, w: PenaltyWeights,
                  instance: Instance) -> tuple[float, tuple[int, int]]:
    """Penalized-cost delta of ``mv`` and the vehicle types it assigns.

    ``trackers[h]`` holds the load tracker of route ``h``.  Inter-route loads
    are obtained by adding and removing customers on those trackers and then
    undoing the changes, so they are left as they were.
    """
    routes = [r.customers for r in sol.routes]
    seqs = move_sequences(routes, mv)
    a, b = mv.a, mv.b
    ka, kb = sol.routes[a].vehicle_type, sol.routes[b].vehicle_type
    old = 0.0
    for h in {a, b}:
        r = sol.routes[h]
        old += relaxed_route_cost(r, instance)
        old += _type_penalty(trackers[h].z, r.vehicle_type, site_violations(r, instance), instance, w)
    if a == b:
        new_route = Route(seqs[a], ka)
        new = relaxed_route_cost(new_route, instance)
        new += _type_penalty(trackers[a].z, ka, site_violations(new_route, instance), instance, w)
        return new - old, (ka, ka)

    loads = {}
    for h, other in ((a, b), (b, a)):
        t = trackers[h]
        gone = [c for c in routes[h] if c not in set(seqs[h])]
        came = [c for c in seqs[h] if c not in set(routes[h])]
        for c in gone:
            t.remove(c)
        for c in came:
            t.add(c)
        loads[h] = t.z if seqs[h] else 0.0
        for c in came:
            t.remove(c)
        for c in gone:
            t.add(c)

    def pen(h, k):
        cs = seqs[h]
        if not cs:
            return 0.0
        r = Route(cs, k)
        return relaxed_route_cost(r, instance) + _type_penalty(loads[h], k, site_violations(r, instance), instance, w)

    if instance.unlimited_fleet:
        if seqs[a]:
            ka = _pick_type(seqs[a], loads[a], instance, w, range(instance.m))
        if seqs[b]:
            kb = _pick_type(seqs[b], loads[b], instance, w, range(instance.m))
    else:
        if pen(a, kb) + pen(b, ka) < pen(a, ka) + pen(b, kb):
            ka, kb = kb, ka
    return pen(a, ka) + pen(b, kb) - old, (ka, kb)


# -- kernel-backed search state ---------------------------------------------


def make_core(instance: Instance, uset: UncertaintySet, w: PenaltyWeights, backend: str | None = None):
    mod = kernels.load_backend(backend) if backend else kernels._mod
    n = instance.n
    if instance.allowed is not None:
        bad = (~np.asarray(instance.allowed)).astype(np.intc)
        bad[0, :] = 0
    else:
        bad = np.zeros((n + 1, instance.m), dtype=np.intc)
    if isinstance(uset, GammaSet):
        code, base, contrib = H_GAMMA, np.zeros(1), uset.q0[:, None]
        beta, qhat, rank, G, frac = 0.0, uset.qhat, uset.rank, uset.G, uset.frac
    else:
        code, base, contrib, params = uset.linear_form()
        beta = params.get("beta", 0.0)
        qhat, rank, G, frac = np.zeros(n + 1), np.zeros(n + 1, dtype=np.intc), 0, 0.0
    return mod.Core(
        instance.relaxed_costs, instance.fixed_costs, instance.capacities, bad, code, base, contrib,
        beta, qhat, rank, G, frac, int(instance.unlimited_fleet), w.capacity, w.site,
    )


class SearchState:
    """Current routes mirrored into a kernel core, with stable route ids."""

    def __init__(self, instance: Instance, uset: UncertaintySet, w: PenaltyWeights,
                 backend: str | None = None):
        self.instance = instance
        self.uset = uset
        self.w = w
        self.core = make_core(instance, uset, w, backend)
        self.routes: list[list[int]] = []
        self.types: list[int] = []
        self.ids: list[int] = []
        self._next_id = 0
        self.caps = instance.capacities
        self.counts = instance.counts

    def load(self, sol: Solution) -> None:
        self.routes, self.types, self.ids = [], [], []
        for r in sol.routes:
            if r.customers:
                self._append(list(r.customers), r.vehicle_type)

    def _append(self, customers, k):
        h = len(self.routes)
        self.routes.append(customers)
        self.types.append(k)
        self.ids.append(self._next_id)
        self._next_id += 1
        self.core.set_route(h, customers, k)

    def usage(self) -> np.ndarray:
        return np.bincount(np.asarray(self.types, dtype=np.int64), minlength=self.instance.m)

    def spare_type(self) -> int | None:
        """Largest-capacity type with a vehicle left (smaller index on ties)."""
        used = self.usage()
        best = None
        for k in range(self.instance.m):
            if used[k] < self.counts[k] and (best is None or self.caps[k] > self.caps[best]):
                best = k
        return best

    def penalized(self) -> float:
        return float(sum(self.core.slot_pen(h) for h in range(len(self.routes))))

    def infeasible_routes(self) -> int:
        return int(sum(self.core.slot_infeasible(h) for h in range(len(self.routes))))

    def snapshot(self) -> list[tuple[tuple[int, ...], int]]:
        return [(tuple(r), k) for r, k in zip(self.routes, self.types)]

    def solution(self) -> Solution:
        return Solution.build([Route(r, k) for r, k in zip(self.routes, self.types)], self.instance, self.uset)

    def apply(self, kind: int, a: int, pa: int, b: int, pb: int, ka: int, kb: int) -> list[tuple[int, int]]:
        """Apply a kernel move; returns the tabu attributes it creates."""
        name = MOVE_KINDS[kind]
        H = len(self.routes)
        if b == H:
            # the spare empty slot becomes a real route
            self.routes.append([])
            self.types.append(kb)
            self.ids.append(self._next_id)
            self._next_id += 1
        mv = Move(name, a, pa, b, pb)
        before = {h: self.routes[h] for h in {a, b}}
        seqs = move_sequences(self.routes, mv)
        attrs = []
        if a == b:
            r = before[a]
            if name == "relocate":
                attrs.append((r[pa - 1], self.ids[a]))
            else:
                attrs += [(r[pa - 1], self.ids[a]), (r[pb - 1], self.ids[a])]
        else:
            ra, rb = before[a], before[b]
            if name == "relocate":
                attrs.append((ra[pa - 1], self.ids[a]))
            elif name == "exchange":
                attrs += [(ra[pa - 1], self.ids[a]), (rb[pb - 1], self.ids[b])]
            else:
                if pa < len(ra):
                    attrs.append((ra[pa], self.ids[a]))
                if pb < len(rb):
                    attrs.append((rb[pb], self.ids[b]))
            self.types[a], self.types[b] = ka, kb
        for h, s in seqs.items():
            self.routes[h] = s
            self.core.set_route(h, s, self.types[h])
        empty = [h for h in sorted(seqs) if not self.routes[h]]
        if empty:
            for h in reversed(empty):
                del self.routes[h], self.types[h], self.ids[h]
            for h in range(empty[0], len(self.routes)):
                self.core.set_route(h, self.routes[h], self.types[h])
        return attrs


def _rank_key(infeasible: int, pen: float) -> tuple[int, float]:
    return (1 if infeasible > 0 else 0, pen)


def tabu_search(sol: Solution, instance: Instance, uset: UncertaintySet, w: PenaltyWeights,
                rng: np.random.Generator, tenure: int = 30, stall_limit: int = 500,
                max_iterations: int | None = None, backend: str | None = None,
                stats: dict | None = None) -> Solution:
    """Tabu search over relocate, exchange and 2-opt with robust penalized costs.

    Each iteration draws one neighbourhood uniformly, scans it in
    lexicographic order and takes the first admissible improving move, or
    else the best admissible one.  Stops after ``stall_limit`` iterations
    without improving the best solution found.  Returns the best solution,
    ranked by feasibility first and penalized cost second.
    """
    state = SearchState(instance, uset, w, backend)
    state.load(sol)
    core = state.core
    N, hmax = instance.n + 1, instance.n + 1
    tabu = TabuList(tenure)
    cur = state.penalized()
    cur_inf = state.infeasible_routes()
    best = state.snapshot()
    best_pen, best_inf = cur, int(cur_inf > 0)
    feas_seen = cur_inf == 0
    it = stall = 0
    while stall < stall_limit and (max_iterations is None or it < max_iterations):
        kind = int(rng.integers(3))
        H = len(state.routes)
        nslots = H
        if kind == kernels.RELOCATE and H < hmax:
            k_empty = state.spare_type()
            if k_empty is not None:
                core.clear_route(H, k_empty)
                nslots = H + 1
        flags = np.zeros((N, hmax), dtype=np.uint8)
        slot = {rid: h for h, rid in enumerate(state.ids)}
        for c, rid in tabu.active(it + 1):
            h = slot.get(rid)
            if h is not None:
                flags[c, h] = 1
        eps = 1e-9 * max(1.0, abs(cur))
        it += 1
        found = core.scan(kind, nslots, flags, cur, best_pen, best_inf, cur_inf, int(feas_seen), eps)
        if found:
            mk, a, pa, b, pb, ka, kb, delta, _ = core.selected()
            for attr in state.apply(mk, a, pa, b, pb, ka, kb):
                tabu.add(attr, it)
            cur = state.penalized()
            cur_inf = state.infeasible_routes()
            if cur_inf == 0:
                feas_seen = True
        key = _rank_key(cur_inf, cur)
        if key[0] < best_inf or (key[0] == best_inf and cur < best_pen - eps):
            best, best_pen, best_inf = state.snapshot(), cur, key[0]
            stall = 0
        else:
            stall += 1
    if stats is not None:
        stats["iterations"] = it
        stats["evaluations"] = core.evaluations()
    out = Solution.build([Route(r, k) for r, k in best], instance, uset)
    return out
