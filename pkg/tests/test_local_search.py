import numpy as np
import pytest

from oracles import best_cycle, fuzz_deltas, random_instance, set_partitions
from rhvrp import kernels
from rhvrp.instance import Instance, Route, Solution, Variant, VehicleType, validate
from rhvrp.local_search import (
    Move, MoveError, PenaltyWeights, TabuList, apply_move, best_vehicle_type, evaluate_move,
    move_sequences, penalized_cost, swap_types, tabu_search,
)
from rhvrp.uncertainty import SingletonSet, build_set

BACKENDS = kernels.available_backends()


@pytest.mark.parametrize("backend", BACKENDS)
def test_delta_matches_recomputation(backend):
    worst, count = fuzz_deltas(2000, seed=3, backends=[backend])
    assert count >= 2000
    assert worst <= 1e-6


def test_penalized_cost_of_feasible_solution_is_its_cost():
    inst = Instance([[0, 0], [1, 0], [2, 0]], [0, 3, 4], [VehicleType(10)])
    sol = Solution.build([Route([1, 2], 0)], inst)
    assert penalized_cost(sol, inst, SingletonSet([3, 4]), PenaltyWeights(50.0)) == pytest.approx(sol.cost)


def test_capacity_penalty_arithmetic():
    inst = Instance([[0, 0], [1, 0], [2, 0]], [0, 5, 7], [VehicleType(10)])
    sol = Solution.build([Route([1, 2], 0)], inst)
    assert penalized_cost(sol, inst, SingletonSet([5, 7]), PenaltyWeights(50.0)) == pytest.approx(sol.cost + 100)


def test_site_penalty_arithmetic():
    allowed = [[True, True], [True, False], [True, False]]
    inst = Instance([[0, 0], [1, 0], [2, 0]], [0, 1, 1], [VehicleType(10), VehicleType(10)], Variant.SDVRP,
                    allowed=allowed)
    sol = Solution.build([Route([1, 2], 1)], inst)
    plain = 4.0
    assert penalized_cost(sol, inst, SingletonSet([1, 1]), PenaltyWeights(1.0, 10.0)) == pytest.approx(plain + 20)


def test_intra_route_two_opt_delta_is_routing_only():
    inst = Instance([[0, 0], [0, 10], [10, 10], [10, 0]], [0, 5, 5, 5], [VehicleType(10)])
    uset = SingletonSet([5, 5, 5])
    w = PenaltyWeights(1000.0)
    sol = Solution.build([Route([1, 3, 2], 0)], inst, uset)
    t = uset.tracker()
    for c in (1, 3, 2):
        t.add(c)
    mv = Move("two_opt", 0, 1, 0, 3)
    d, types = evaluate_move(sol, mv, [t], uset, w, inst)
    after = apply_move(sol, mv, inst, uset, types)
    assert after.violation == sol.violation
    assert d == pytest.approx(after.cost - sol.cost)


def test_relocate_into_new_route_penalises_receiver():
    inst = Instance([[0, 0], [1, 0], [2, 0], [3, 0]], [0, 6, 6, 12], [VehicleType(10, 0, 3)])
    uset = SingletonSet([6, 6, 12])
    w = PenaltyWeights(10.0)
    full = Solution.build([Route([1, 2, 3], 0)], inst, uset)
    sol = Solution(full.routes + (Route([], 0),))  # transient empty route, as inside the search
    t = uset.tracker()
    for c in (1, 2, 3):
        t.add(c)
    mv = Move("relocate", 0, 3, 1, 0)
    d, types = evaluate_move(sol, mv, [t, uset.tracker()], uset, w, inst)
    after = apply_move(sol, mv, inst, uset, types)
    assert after.violation == pytest.approx(2 + 2)  # donor 12 over 10, receiver 12 over 10
    assert d == pytest.approx(penalized_cost(after, inst, uset, w) - penalized_cost(full, inst, uset, w))


def _three_types():
    coords = [[0, 0], [1, 0]]
    return Instance(coords, [0, 8], [VehicleType(5, 1, 1), VehicleType(10, 2, 1), VehicleType(20, 3, 1)],
                    Variant.FSMF)


def test_best_type_is_cheapest_feasible():
    inst = _three_types()
    assert best_vehicle_type(Route([1], 0), inst, SingletonSet([8])) == 1


def test_best_type_minimises_violation_when_nothing_fits():
    inst = _three_types()
    assert best_vehicle_type(Route([1], 0), inst, SingletonSet([25])) == 2


def test_best_type_ties_prefer_smaller_capacity():
    inst = Instance([[0, 0], [1, 0]], [0, 1], [VehicleType(10, 5, 1), VehicleType(8, 5, 1)], Variant.FSMF)
    assert best_vehicle_type(Route([1], 0), inst, SingletonSet([1])) == 1


def test_swap_types_matches_exhaustive_pairs():
    inst = Instance([[0, 0], [1, 0], [0, 1]], [0, 9, 4],
                    [VehicleType(5, 0, 1), VehicleType(10, 0, 1)], Variant.HVRPD)
    uset = SingletonSet([9, 4])
    w = PenaltyWeights.default(inst)
    ra, rb = Route([1], 0), Route([2], 1)
    got = swap_types(ra, rb, inst, uset, w)
    options = {}
    for ka, kb in [(0, 1), (1, 0)]:  # the fleet holds one of each, so only these pairs keep C2
        sol = Solution.build([Route([1], ka), Route([2], kb)], inst, uset)
        options[(ka, kb)] = penalized_cost(sol, inst, uset, w)
    assert got == min(options, key=options.get) == (1, 0)


def test_tabu_list_expiry():
    tl = TabuList(2)
    tl.add((3, 1), 5)
    assert tl.is_tabu((3, 1), 7)
    assert not tl.is_tabu((3, 1), 8)
    assert tl.active(8) == []


@pytest.mark.parametrize("backend", BACKENDS)
def test_tabu_uncrosses_rectangle(backend):
    inst = Instance([[5, -1], [0, 0], [10, 0], [10, 5], [0, 5]], [0, 1, 1, 1, 1], [VehicleType(10, 0, 1)],
                    Variant.CVRP)
    uset = SingletonSet([1, 1, 1, 1])
    w = PenaltyWeights.default(inst)
    start = Solution.build([Route([1, 3, 2, 4], 0)], inst, uset)
    out = tabu_search(start, inst, uset, w, np.random.default_rng(0), stall_limit=30, backend=backend)
    opt, _ = best_cycle(inst.costs[0], (1, 2, 3, 4))
    assert out.cost == pytest.approx(opt)
    assert out.cost < start.cost


@pytest.mark.parametrize("backend", BACKENDS)
def test_tabu_leaves_local_optimum_alone(backend):
    inst = Instance([[0, 0], [1, 0], [2, 0]], [0, 1, 1], [VehicleType(10, 0, 1)], Variant.CVRP)
    uset = SingletonSet([1, 1])
    w = PenaltyWeights.default(inst)
    start = Solution.build([Route([1, 2], 0)], inst, uset)
    out = tabu_search(start, inst, uset, w, np.random.default_rng(0), stall_limit=1, backend=backend)
    assert out.canonical() == start.canonical()


@pytest.mark.parametrize("seed", range(5))
def test_tabu_repairs_infeasible_start(seed):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, 100, (7, 2))
    dem = np.array([0, 4, 5, 6, 4, 5, 6], dtype=float)
    inst = Instance(coords, dem, [VehicleType(16, 0, 6)], Variant.CVRP)
    uset = SingletonSet(dem[1:])
    feasible_split = any(all(dem[list(b)].sum() <= 16 for b in p) and len(p) == 2
                         for p in set_partitions(range(1, 7)))
    assert feasible_split
    w = PenaltyWeights.default(inst)
    start = Solution.build([Route(list(range(1, 7)), 0)], inst, uset)
    out = tabu_search(start, inst, uset, w, np.random.default_rng(seed), stall_limit=100)
    assert out.violation == 0.0
    assert out.penalized(w) <= start.penalized(w)


@pytest.mark.parametrize("seed", range(6))
def test_tabu_keeps_partition_and_fleet(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 12, 3, site=seed % 2 == 0, variant="SDVRP" if seed % 2 == 0 else "HVRPFD")
    uset = build_set(inst, ["gamma", "budget", "ellipsoid"][seed % 3], 0.2, 0.5)
    w = PenaltyWeights.default(inst)
    start = Solution.build([Route(list(range(1, 13)), 0)], inst, uset)
    out = tabu_search(start, inst, uset, w, np.random.default_rng(seed), stall_limit=60)
    rep = validate(out, inst, uset)
    assert rep.partition_ok and rep.fleet_ok
    assert out.penalized(w) <= start.penalized(w) + 1e-9


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
def test_backends_agree_on_tabu_trajectory():
    rng = np.random.default_rng(5)
    inst = random_instance(rng, 25, 2, "FSMFD", limited=False)
    uset = build_set(inst, "gamma", 0.2, 0.3)
    w = PenaltyWeights.default(inst)
    perm = rng.permutation(np.arange(1, 26)).tolist()
    sol = Solution.build([Route(perm[i:i + 5], 0) for i in range(0, 25, 5)], inst, uset)
    a = tabu_search(sol, inst, uset, w, np.random.default_rng(0), max_iterations=30, backend="cython")
    b = tabu_search(sol, inst, uset, w, np.random.default_rng(0), max_iterations=30, backend="python")
    assert a.canonical() == b.canonical()


def test_never_returns_violating_after_feasible():
    rng = np.random.default_rng(9)
    inst = random_instance(rng, 10, 2, "FSMFD", limited=False)
    uset = build_set(inst, "gamma", 0.1, 0.3)
    w = PenaltyWeights.default(inst)
    start = Solution.build([Route([c], 1) for c in range(1, 11)], inst, uset)
    if not validate(start, inst, uset).capacity_ok:
        pytest.skip("singleton start infeasible")
    out = tabu_search(start, inst, uset, w, np.random.default_rng(1), stall_limit=80)
    assert out.violation == 0.0


def test_move_errors():
    with pytest.raises(MoveError):
        Move("swap", 0, 1, 0, 1)
    with pytest.raises(MoveError):
        move_sequences([[1, 2]], Move("relocate", 0, 3, 0, 0))
