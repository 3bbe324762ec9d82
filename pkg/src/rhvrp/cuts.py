"""Robust heterogeneous rounded capacity inequalities.

For a vehicle type ``k`` and a customer set ``S`` whose members each fit a
type-``k`` vehicle on their own, the inequality reads::

    x_k(delta(S)) + 2 * sum_{i in S} (1 - y_ik)  >=  2 * ceil(wc(S) / Q_k)

where ``wc`` is the worst-case load over the uncertainty set and ``delta(S)``
holds the edges (depot edges included) with exactly one end in ``S``.
Separation is heuristic: a short tabu search over ``S`` that adds or drops
one customer at a time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instance import Instance, Solution
from .uncertainty import UncertaintySet, loads_with

VIOLATION_TOL = 1e-6
_FIT_RTOL = 1e-9


class CutError(ValueError):
    """Customer set or type outside the domain of the inequality."""


class FractionalSolution:
    """Edge values ``x[i, j, k]`` (``i < j``) and assignments ``y[i, k]``."""

    def __init__(self, n: int, m: int, x: dict, y: dict):
        if n < 1 or m < 1:
            raise ValueError("n and m must be positive")
        self.n, self.m = n, m
        self.x: dict[tuple[int, int, int], float] = {}
        self.y: dict[tuple[int, int], float] = {}
        for (i, j, k), v in x.items():
            i, j = (i, j) if i < j else (j, i)
            if not (0 <= i < j <= n and 0 <= k < m):
                raise ValueError(f"edge ({i}, {j}, {k}) out of range")
            top = 2.0 if i == 0 else 1.0
            if not -1e-9 <= v <= top + 1e-9:
                raise ValueError(f"x[{i}, {j}, {k}] = {v} outside [0, {top}]")
            self.x[(i, j, k)] = self.x.get((i, j, k), 0.0) + float(v)
        for (i, k), v in y.items():
            if not (1 <= i <= n and 0 <= k < m):
                raise ValueError(f"assignment ({i}, {k}) out of range")
            if not -1e-9 <= v <= 1.0 + 1e-9:
                raise ValueError(f"y[{i}, {k}] = {v} outside [0, 1]")
            self.y[(i, k)] = float(v)
        total = np.zeros(n + 1)
        for (i, _), v in self.y.items():
            total[i] += v
        if np.any(total > 1.0 + 1e-6):
            raise ValueError("assignments of a customer sum to more than 1")

    def edge_matrix(self, k: int) -> np.ndarray:
        X = np.zeros((self.n + 1, self.n + 1))
        for (i, j, kk), v in self.x.items():
            if kk == k:
                X[i, j] += v
                X[j, i] += v
        return X

    def assignment(self, k: int) -> np.ndarray:
        out = np.zeros(self.n + 1)
        for (i, kk), v in self.y.items():
            if kk == k:
                out[i] = v
        return out

    @classmethod
    def from_solution(cls, sol: Solution, instance: Instance) -> "FractionalSolution":
        """Integer encoding of a route set; a one-customer route gets ``x = 2``."""
        x, y = {}, {}
        for r in sol.routes:
            k = r.vehicle_type
            nodes = r.nodes()
            for a, b in zip(nodes[:-1], nodes[1:]):
                key = (min(a, b), max(a, b), k)
                x[key] = x.get(key, 0.0) + 1.0
            for i in r.customers:
                y[(i, k)] = 1.0
        return cls(instance.n, instance.m, x, y)


@dataclass(frozen=True)
class Cut:
    S: tuple[int, ...]
    k: int
    lhs: float
    rhs: float

    @property
    def violation(self) -> float:
        return self.rhs - self.lhs


def eligible(instance: Instance, uset: UncertaintySet, k: int) -> np.ndarray:
    """Customers whose worst-case demand alone fits type ``k``."""
    cap = instance.capacities[k]
    return np.array([i for i in range(1, instance.n + 1)
                     if uset.max_single_demand(i) <= cap + _FIT_RTOL * cap], dtype=np.int64)


def _rhs(load: float, cap: float) -> float:
    return 2.0 * math.ceil(load / cap - 1e-9)


def _check(S, k: int, instance: Instance, uset: UncertaintySet) -> list[int]:
    if not 0 <= k < instance.m:
        raise CutError(f"vehicle type {k} out of range")
    S = sorted({int(i) for i in S})
    if not S:
        raise CutError("customer set is empty")
    allowed = set(eligible(instance, uset, k).tolist())
    bad = [i for i in S if i not in allowed]
    if bad:
        raise CutError(f"customers {bad} do not fit vehicle type {k} on their own")
    return S


def rci_rhs(S, k: int, uset: UncertaintySet, instance: Instance) -> float:
    S = _check(S, k, instance, uset)
    return _rhs(uset.worst_case_load(S), float(instance.capacities[k]))


def rci_lhs(fs: FractionalSolution, S, k: int) -> float:
    inside = np.zeros(fs.n + 1, dtype=bool)
    inside[list(S)] = True
    lhs = sum(v for (i, j, kk), v in fs.x.items() if kk == k and inside[i] != inside[j])
    y = fs.assignment(k)
    return float(lhs + 2.0 * sum(1.0 - y[i] for i in S))


def rci_violation(fs: FractionalSolution, S, k: int, uset: UncertaintySet, instance: Instance) -> float:
    """Right-hand side minus left-hand side; positive means violated."""
    S = _check(S, k, instance, uset)
    return rci_rhs(S, k, uset, instance) - rci_lhs(fs, S, k)


def separate_rci(fs: FractionalSolution, k: int, uset: UncertaintySet, instance: Instance,
                 rng: np.random.Generator, restarts: int = 10, stall_limit: int = 50,
                 tenure: int = 3, check_every: int | None = None) -> list[Cut]:
    """Tabu search for violated inequalities of type ``k``.

    Every restart begins from a random eligible singleton and greedily adds
    or drops the customer that most increases the violation, skipping moves
    that undo one of the last ``tenure`` moves unless they beat the best
    violation of the restart.  Returns the distinct violated sets found,
    most violated first.  ``check_every`` recomputes the tracked load from
    scratch every that many accepted moves (a debugging aid).
    """
    pool = eligible(instance, uset, k)
    if pool.size == 0:
        return []
    cap = float(instance.capacities[k])
    X = fs.edge_matrix(k)
    deg = X.sum(axis=1)
    pen = 2.0 * (1.0 - fs.assignment(k))
    found: dict[tuple[int, ...], Cut] = {}
    accepted = 0
    for _ in range(restarts):
        s = int(pool[rng.integers(pool.size)])
        inside = np.zeros(fs.n + 1, dtype=bool)
        inside[s] = True
        members = [s]
        tracker = uset.tracker()
        tracker.add(s)
        cross_in = X[:, s].copy()  # weight from each node into S
        lhs = deg[s] + pen[s]
        tabu_until = np.zeros(fs.n + 1, dtype=np.int64)
        best_restart = -math.inf
        stall = it = 0
        while stall < stall_limit:
            it += 1
            viol = _rhs(tracker.z, cap) - lhs
            if viol > VIOLATION_TOL:
                key = tuple(sorted(members))
                if key not in found:
                    found[key] = Cut(key, k, float(lhs), _rhs(tracker.z, cap))
            out = pool[~inside[pool]]
            add_v = np.full(out.size, -math.inf)
            if out.size:
                loads = loads_with(uset, members, out)
                add_lhs = lhs + deg[out] - 2.0 * cross_in[out] + pen[out]
                add_v = 2.0 * np.ceil(loads / cap - 1e-9) - add_lhs
            rem_v = np.full(len(members), -math.inf)
            if len(members) > 1:
                for t, i in enumerate(members):
                    z = tracker.remove(i)
                    tracker.add(i)
                    rem_v[t] = _rhs(z, cap) - (lhs - deg[i] + 2.0 * cross_in[i] - pen[i])
            cand_ids = np.concatenate([out, np.asarray(members, dtype=np.int64)])
            cand_v = np.concatenate([add_v, rem_v])
            admissible = (tabu_until[cand_ids] < it) | (cand_v > best_restart + 1e-12)
            admissible &= np.isfinite(cand_v)
            if not admissible.any():
                break
            score = np.where(admissible, cand_v, -math.inf)
            pick = int(np.argmax(score))
            i = int(cand_ids[pick])
            if pick < out.size:
                lhs += deg[i] - 2.0 * cross_in[i] + pen[i]
                inside[i] = True
                members.append(i)
                tracker.add(i)
                cross_in += X[:, i]
            else:
                lhs -= deg[i] - 2.0 * cross_in[i] + pen[i]
                inside[i] = False
                members.remove(i)
                tracker.remove(i)
                cross_in -= X[:, i]
            tabu_until[i] = it + tenure
            accepted += 1
            if check_every and accepted % check_every == 0:
                ref = uset.worst_case_load(members)
                if abs(ref - tracker.z) > 1e-9 * max(1.0, abs(ref)):
                    raise AssertionError(f"tracked load {tracker.z} differs from {ref}")
            v = float(score[pick])
            if v > best_restart + 1e-12:
                best_restart, stall = v, 0
            else:
                stall += 1
        viol = _rhs(tracker.z, cap) - lhs
        if viol > VIOLATION_TOL:
            key = tuple(sorted(members))
            found.setdefault(key, Cut(key, k, float(lhs), _rhs(tracker.z, cap)))
    cuts = [Cut(c.S, c.k, rci_lhs(fs, c.S, k), c.rhs) for c in found.values()]
    cuts = [c for c in cuts if c.violation > VIOLATION_TOL]
    return sorted(cuts, key=lambda c: (-c.violation, c.S))
