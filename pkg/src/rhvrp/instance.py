"""Deterministic HVRP data: instances, routes, solutions and their evaluation.

Node 0 is the depot and customers are numbered 1..n.  Vehicle types are
indexed from 0.  Routing costs are held in a dense ``(m, n+1, n+1)`` array so
that every variant (vehicle-dependent multipliers, site dependencies, depot
legs of the multi-depot problem) is served by the same lookups.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

CAPACITY_RTOL = 1e-9


class InstanceError(ValueError):
    """Invalid instance data or an operation that does not fit the data."""


class Variant(str, enum.Enum):
    CVRP = "CVRP"
    HVRPFD = "HVRPFD"
    HVRPD = "HVRPD"
    FSMFD = "FSMFD"
    FSMD = "FSMD"
    FSMF = "FSMF"
    SDVRP = "SDVRP"
    MDVRP = "MDVRP"

    @property
    def unlimited_fleet(self) -> bool:
        return self in (Variant.FSMFD, Variant.FSMD, Variant.FSMF, Variant.MDVRP)

    @property
    def vehicle_dependent_costs(self) -> bool:
        return self in (Variant.HVRPFD, Variant.HVRPD, Variant.FSMFD, Variant.FSMD)


ROUNDING_MODES = ("none", "one_decimal", "integer")


@dataclass(frozen=True)
class VehicleType:
    capacity: float
    fixed_cost: float = 0.0
    count: int = 1
    cost_multiplier: float = 1.0

    def __post_init__(self):
        if not self.capacity > 0:
            raise InstanceError(f"vehicle capacity must be positive, got {self.capacity}")
        if self.fixed_cost < 0:
            raise InstanceError(f"fixed cost must be nonnegative, got {self.fixed_cost}")
        if self.count < 1:
            raise InstanceError(f"vehicle count must be at least 1, got {self.count}")
        if not self.cost_multiplier > 0:
            raise InstanceError("cost multiplier must be positive")


def _distances(a: np.ndarray, b: np.ndarray, rounding: str) -> np.ndarray:
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    if rounding == "one_decimal":
        d = np.floor(d * 10.0) / 10.0
    elif rounding == "integer":
        d = np.floor(d + 0.5)
    return d


class Instance:
    """Immutable HVRP instance.

    Parameters
    ----------
    coords : (n+1, 2) array
        Node coordinates; row 0 is the depot.
    demand : (n+1,) or (n,) array
        Nominal customer demands.  A length-n vector is padded with a zero
        depot entry.
    vehicle_types : sequence of VehicleType
    variant : Variant
        Selects the routing-cost rule.  Fixed costs and fleet sizes are taken
        as given; :func:`apply_variant` performs the Table-style transforms.
    allowed : (n+1, m) bool array, optional
        Site dependencies (SDVRP).  Row 0 is ignored.
    depots : (m, 2) array, optional
        Per-type depot coordinates (MDVRP).
    rounding : {"none", "one_decimal", "integer"}
        Rounding applied to Euclidean distances.
    """

    def __init__(
        self,
        coords,
        demand,
        vehicle_types: Sequence[VehicleType],
        variant: Variant | str = Variant.HVRPFD,
        name: str = "",
        allowed=None,
        depots=None,
        rounding: str = "none",
    ):
        coords = np.array(coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 2:
            raise InstanceError("coords must have shape (n+1, 2) with n >= 1")
        n = coords.shape[0] - 1
        demand = np.array(demand, dtype=float).ravel()
        if demand.shape[0] == n:
            demand = np.concatenate([[0.0], demand])
        if demand.shape[0] != n + 1:
            raise InstanceError(f"expected {n} demands, got {demand.shape[0]}")
        demand[0] = 0.0
        if np.any(demand < 0) or not np.all(np.isfinite(demand)):
            raise InstanceError("demands must be finite and nonnegative")
        types = tuple(vehicle_types)
        if not types:
            raise InstanceError("at least one vehicle type is required")
        if rounding not in ROUNDING_MODES:
            raise InstanceError(f"unknown rounding mode {rounding!r}")
        variant = Variant(variant)
        m = len(types)
        if allowed is not None:
            allowed = np.array(allowed, dtype=bool)
            if allowed.shape != (n + 1, m):
                raise InstanceError(f"allowed must have shape {(n + 1, m)}")
            allowed[0, :] = True
            if not np.all(allowed[1:].any(axis=1)):
                raise InstanceError("every customer needs at least one allowed vehicle type")
        elif variant is Variant.SDVRP:
            raise InstanceError("SDVRP requires per-customer allowed vehicle types")
        if depots is not None:
            depots = np.array(depots, dtype=float)
            if depots.shape != (m, 2):
                raise InstanceError(f"depots must have shape {(m, 2)}")
        elif variant is Variant.MDVRP:
            raise InstanceError("MDVRP requires one depot per vehicle type")
        if variant is Variant.CVRP and m != 1:
            raise InstanceError("CVRP instances have a single vehicle type")

        self.name = name
        self.variant = variant
        self.rounding = rounding
        self.coords = coords
        self.demand = demand
        self.vehicle_types = types
        self.allowed = allowed
        self.depots = depots
        self.costs = self._build_costs()
        for arr in (self.coords, self.demand, self.costs):
            arr.setflags(write=False)
        if self.allowed is not None:
            self.allowed.setflags(write=False)
        if self.depots is not None:
            self.depots.setflags(write=False)

    # -- derived data -------------------------------------------------
    def _build_costs(self) -> np.ndarray:
        n, m = self.n, self.m
        e = _distances(self.coords, self.coords, self.rounding)
        costs = np.empty((m, n + 1, n + 1))
        for k, vt in enumerate(self.vehicle_types):
            mult = vt.cost_multiplier if self.variant.vehicle_dependent_costs else 1.0
            costs[k] = mult * e
        if self.variant is Variant.MDVRP:
            legs = _distances(self.depots, self.coords[1:], self.rounding)
            for k in range(m):
                costs[k, 0, 1:] = legs[k]
                costs[k, 1:, 0] = legs[k]
                costs[k, 0, 0] = 0.0
        # sentinel stays finite so deltas never see inf - inf
        self.big = 10.0 * float(costs.max(axis=0).sum()) + 1.0
        self.relaxed_costs = costs.copy()
        self.relaxed_costs.setflags(write=False)
        if self.variant is Variant.SDVRP:
            ok = self.allowed
            for k in range(m):
                mask = ~(ok[:, k][:, None] & ok[:, k][None, :])
                costs[k][mask] = self.big
        return costs

    @property
    def n(self) -> int:
        return self.coords.shape[0] - 1

    @property
    def m(self) -> int:
        return len(self.vehicle_types)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([vt.capacity for vt in self.vehicle_types])

    @property
    def fixed_costs(self) -> np.ndarray:
        return np.array([vt.fixed_cost for vt in self.vehicle_types])

    @property
    def counts(self) -> np.ndarray:
        return np.array([vt.count for vt in self.vehicle_types], dtype=np.int64)

    @property
    def unlimited_fleet(self) -> bool:
        # a type with n vehicles can never run out, whatever the variant says
        return all(vt.count >= self.n for vt in self.vehicle_types)

    def allowed_types(self, i: int) -> frozenset[int]:
        if self.allowed is None:
            return frozenset(range(self.m))
        return frozenset(np.flatnonzero(self.allowed[i]).tolist())

    def min_costs(self) -> np.ndarray:
        """Vehicle-independent proximity ``min_k c_ijk`` (site sentinels ignored)."""
        return self.relaxed_costs.min(axis=0)

    def reference_cost(self) -> float:
        """``max_{i,j customers} min_k c_ijk``, the scale used for penalties."""
        c = self.min_costs()
        inner = c[1:, 1:]
        val = float(inner.max()) if self.n > 1 else float(c[0, 1:].max())
        return val if val > 0 else 1.0

    def is_infinite(self, cost: float) -> bool:
        return cost >= self.big

    def with_capacity_factor(self, factor: float) -> "Instance":
        types = [replace(vt, capacity=vt.capacity * factor) for vt in self.vehicle_types]
        return self.replace(vehicle_types=types)

    def replace(self, **changes) -> "Instance":
        kw = dict(
            coords=self.coords,
            demand=self.demand,
            vehicle_types=self.vehicle_types,
            variant=self.variant,
            name=self.name,
            allowed=self.allowed,
            depots=self.depots,
            rounding=self.rounding,
        )
        kw.update(changes)
        return Instance(**kw)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.name == other.name
            and self.variant == other.variant
            and self.rounding == other.rounding
            and self.vehicle_types == other.vehicle_types
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.demand, other.demand)
            and _opt_equal(self.allowed, other.allowed)
            and _opt_equal(self.depots, other.depots)
        )

    __hash__ = None

    def __repr__(self):
        return f"Instance(name={self.name!r}, variant={self.variant.value}, n={self.n}, m={self.m})"


def _opt_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


@dataclass(frozen=True)
class Route:
    customers: tuple[int, ...]
    vehicle_type: int

    def __init__(self, customers: Iterable[int], vehicle_type: int):
        object.__setattr__(self, "customers", tuple(int(c) for c in customers))
        object.__setattr__(self, "vehicle_type", int(vehicle_type))
        if len(set(self.customers)) != len(self.customers):
            raise InstanceError(f"route visits a customer twice: {self.customers}")

    def __len__(self):
        return len(self.customers)

    def __iter__(self):
        return iter(self.customers)

    def nodes(self) -> list[int]:
        return [0, *self.customers, 0]


def _check_route(route: Route, instance: Instance) -> None:
    if not 0 <= route.vehicle_type < instance.m:
        raise InstanceError(f"invalid vehicle type {route.vehicle_type}")
    for c in route.customers:
        if not 1 <= c <= instance.n:
            raise InstanceError(f"invalid customer id {c}")


def route_cost(route: Route, instance: Instance) -> float:
    """Fixed cost plus routing cost of the closed cycle through the depot."""
    _check_route(route, instance)
    k = route.vehicle_type
    nodes = route.nodes()
    c = instance.costs[k]
    total = instance.vehicle_types[k].fixed_cost
    for a, b in zip(nodes[:-1], nodes[1:]):
        total += c[a, b]
    return float(total)


def violation(load: float, capacity: float) -> float:
    """Capacity excess, with the feasibility tolerance treated as zero."""
    excess = load - capacity
    return excess if excess > CAPACITY_RTOL * capacity else 0.0


def relaxed_route_cost(route: Route, instance: Instance) -> float:
    """Route cost with site incompatibilities priced at plain distance."""
    if not route.customers:
        return 0.0
    k = route.vehicle_type
    nodes = route.nodes()
    c = instance.relaxed_costs[k]
    return float(instance.vehicle_types[k].fixed_cost + c[nodes[:-1], nodes[1:]].sum())


def site_violations(route: Route, instance: Instance) -> int:
    if instance.allowed is None:
        return 0
    k = route.vehicle_type
    return int(sum(not instance.allowed[i, k] for i in route.customers))


@dataclass(frozen=True)
class Solution:
    """A set of routes with cached cost and worst-case violations.

    Solutions are immutable snapshots; build them with :meth:`build` so the
    caches always match the routes.  Empty routes are dropped.
    """

    routes: tuple[Route, ...]
    cost: float = 0.0
    violation: float = 0.0
    site_violation: int = 0
    loads: tuple[float, ...] = field(default=(), compare=False)
    relaxed_cost: float = field(default=0.0, compare=False)

    @classmethod
    def build(cls, routes: Iterable[Route], instance: Instance, uset=None) -> "Solution":
        from .uncertainty import SingletonSet

        if uset is None:
            uset = SingletonSet(instance.demand[1:])
        kept = tuple(r for r in routes if len(r) > 0)
        cost = relaxed = viol = 0.0
        site = 0
        loads = []
        for r in kept:
            cost += route_cost(r, instance)
            relaxed += relaxed_route_cost(r, instance)
            load = uset.worst_case_load(r.customers)
            loads.append(load)
            viol += violation(load, instance.vehicle_types[r.vehicle_type].capacity)
            site += site_violations(r, instance)
        return cls(kept, cost, viol, site, tuple(loads), relaxed)

    @classmethod
    def empty(cls) -> "Solution":
        return cls(())

    def penalized(self, weights) -> float:
        """Penalized cost; site conflicts are charged by the site weight, not the sentinel."""
        return self.relaxed_cost + weights.capacity * self.violation + weights.site * self.site_violation

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0 and self.site_violation == 0

    def customers(self) -> list[int]:
        return [c for r in self.routes for c in r.customers]

    def fleet_usage(self, m: int) -> np.ndarray:
        used = np.zeros(m, dtype=np.int64)
        for r in self.routes:
            used[r.vehicle_type] += 1
        return used

    def canonical(self) -> tuple:
        """Order-independent key: routes as (type, orientation-normalized sequence)."""
        keys = []
        for r in self.routes:
            seq = r.customers
            if seq and seq[-1] < seq[0]:
                seq = tuple(reversed(seq))
            keys.append((r.vehicle_type, seq))
        return tuple(sorted(keys))


def solution_cost(sol: Solution, instance: Instance) -> float:
    return float(sum(route_cost(r, instance) for r in sol.routes))


@dataclass(frozen=True)
class RouteCheck:
    load: float
    capacity: float
    capacity_ok: bool
    site_ok: bool

    @property
    def slack(self) -> float:
        return self.capacity - self.load

    @property
    def excess(self) -> float:
        return self.load - self.capacity


@dataclass(frozen=True)
class FeasibilityReport:
    partition_ok: bool
    fleet_ok: bool
    routes: tuple[RouteCheck, ...]
    missing: tuple[int, ...] = ()
    repeated: tuple[int, ...] = ()
    fleet_usage: tuple[int, ...] = ()

    @property
    def capacity_ok(self) -> bool:
        return all(r.capacity_ok for r in self.routes)

    @property
    def site_ok(self) -> bool:
        return all(r.site_ok for r in self.routes)

    @property
    def feasible(self) -> bool:
        return self.partition_ok and self.fleet_ok and self.capacity_ok and self.site_ok

    @property
    def total_excess(self) -> float:
        return float(sum(max(0.0, r.excess) for r in self.routes))


def validate(sol: Solution, instance: Instance, uset=None) -> FeasibilityReport:
    """Check partition, fleet availability and robust capacity of every route."""
    from .uncertainty import SingletonSet

    if uset is None:
        uset = SingletonSet(instance.demand[1:])
    visits = np.zeros(instance.n + 1, dtype=np.int64)
    usage = np.zeros(instance.m, dtype=np.int64)
    checks = []
    for r in sol.routes:
        _check_route(r, instance)
        for c in r.customers:
            visits[c] += 1
        usage[r.vehicle_type] += 1
        cap = instance.vehicle_types[r.vehicle_type].capacity
        load = uset.worst_case_load(r.customers) if len(r) else 0.0
        checks.append(
            RouteCheck(
                load=load,
                capacity=cap,
                capacity_ok=load <= cap + CAPACITY_RTOL * cap,
                site_ok=site_violations(r, instance) == 0,
            )
        )
    missing = tuple(int(i) for i in np.flatnonzero(visits[1:] == 0) + 1)
    repeated = tuple(int(i) for i in np.flatnonzero(visits[1:] > 1) + 1)
    fleet_ok = bool(np.all(usage <= instance.counts))
    return FeasibilityReport(
        partition_ok=not missing and not repeated,
        fleet_ok=fleet_ok,
        routes=tuple(checks),
        missing=missing,
        repeated=repeated,
        fleet_usage=tuple(int(u) for u in usage),
    )


def apply_variant(base: Instance, variant: Variant | str) -> Instance:
    """Derive a problem variant from raw benchmark data.

    Zeroes fixed costs for HVRPD/FSMD/SDVRP/MDVRP/CVRP, saturates fleet sizes
    (``m_k = n``) for the fleet-size-and-mix variants and MDVRP, and switches
    the routing-cost rule.
    """
    variant = Variant(variant)
    n = base.n
    zero_fixed = variant in (Variant.HVRPD, Variant.FSMD, Variant.SDVRP, Variant.MDVRP, Variant.CVRP)
    unlimited = variant.unlimited_fleet
    if variant is Variant.SDVRP and base.allowed is None:
        raise InstanceError("SDVRP needs site-dependency data")
    if variant is Variant.MDVRP:
        if base.depots is None:
            raise InstanceError("MDVRP needs per-type depot coordinates")
        caps = {vt.capacity for vt in base.vehicle_types}
        if len(caps) != 1:
            raise InstanceError("MDVRP vehicle types must share one capacity")
    if variant is Variant.CVRP and base.m != 1:
        raise InstanceError("CVRP needs exactly one vehicle type")
    types = []
    for vt in base.vehicle_types:
        types.append(
            replace(
                vt,
                fixed_cost=0.0 if zero_fixed else vt.fixed_cost,
                count=n if unlimited else vt.count,
            )
        )
    return base.replace(vehicle_types=types, variant=variant)


def total_demand(instance: Instance) -> float:
    return float(instance.demand.sum())


def is_close(a: float, b: float, rtol: float = 1e-9, atol: float = 1e-12) -> bool:
    return math.isclose(a, b, rel_tol=rtol, abs_tol=atol)
