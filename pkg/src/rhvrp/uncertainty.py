"""Demand uncertainty sets, worst-case route loads and incremental trackers.

Every set exposes ``worst_case_load(S)`` (the maximum total demand of the
customers in ``S`` over all demand vectors in the set) in closed form.  All
families except the cardinality-constrained one reduce to a vector of running
sums ``stats = base + sum(contrib[i] for i in S)`` followed by a cheap scalar
map, which is what the trackers and the compiled search kernels exploit.

Customer ids run from 1 to n.  Vectors passed to constructors are indexed by
customer (length n); internally they are padded with a zero depot row so that
ids index them directly.
"""
from __future__ import annotations

import heapq
import json
import math
from typing import Iterable, Sequence

import numpy as np

REL_TOL = 1e-9
ABS_TOL = 1e-12

FAMILIES = ("singleton", "budget", "factor", "ellipsoid", "ellipsoid-ax", "ellipsoid-gen", "gamma", "discrete")

# scalar maps shared with the kernels
H_SUM, H_BUDGET, H_FACTOR, H_ELL_AX, H_ELL_GEN, H_MAX, H_GAMMA = range(7)


class UncertaintyError(ValueError):
    """Invalid set parameters or customer ids."""


class TrackerError(RuntimeError):
    """Duplicate add or removal of an absent customer."""


def loads_close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=ABS_TOL)


def _pad(vec, n=None, name="vector") -> np.ndarray:
    v = np.asarray(vec, dtype=float).ravel()
    if n is not None and v.shape[0] != n:
        raise UncertaintyError(f"{name} must have length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise UncertaintyError(f"{name} must be finite")
    return np.concatenate([[0.0], v])


def _pad_rows(mat, n, name="matrix") -> np.ndarray:
    a = np.asarray(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != n:
        raise UncertaintyError(f"{name} must have {n} rows")
    return np.vstack([np.zeros((1, a.shape[1])), a])


def factor_excess(rho: np.ndarray, beta: float) -> float:
    """``max rho.xi`` over ``xi in [-1,1]^F`` with ``|sum(xi)| <= beta F``.

    Evaluated through its dual ``min_lam sum|rho_f - lam| + beta F |lam|``
    whose minimiser sits at zero or at one of two order statistics of rho.
    """
    F = rho.shape[0]
    order = np.sort(rho)[::-1]
    lp = math.ceil((1.0 + beta) * F / 2.0 - 1e-12)
    lm = max(1, math.ceil((1.0 - beta) * F / 2.0 - 1e-12))
    bF = beta * F
    best = math.inf
    for lam in (0.0, order[lp - 1], order[lm - 1]):
        val = float(np.abs(rho - lam).sum()) + bF * abs(lam)
        best = min(best, val)
    return best


class UncertaintySet:
    """Common interface.  Subclasses are immutable after construction."""

    family: str = ""
    n: int = 0

    def _check_ids(self, S) -> np.ndarray:
        ids = np.fromiter((int(i) for i in S), dtype=np.int64)
        if ids.size and (ids.min() < 1 or ids.max() > self.n):
            raise UncertaintyError(f"customer ids must lie in 1..{self.n}")
        if np.unique(ids).size != ids.size:
            raise UncertaintyError("customer set contains duplicates")
        return ids

    def worst_case_load(self, S: Iterable[int]) -> float:
        raise NotImplementedError

    def max_single_demand(self, i: int) -> float:
        return self.worst_case_load([i])

    def nominal(self) -> np.ndarray:
        """Nominal demand vector (length n+1, zero depot entry)."""
        raise NotImplementedError

    def tracker(self) -> "LoadTracker":
        raise NotImplementedError

    # -- linear-statistics view used by trackers and kernels ---------------
    def linear_form(self):
        """Return ``(code, base, contrib, params)`` or None for gamma sets."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


class _LinearSet(UncertaintySet):
    code = H_SUM

    def _stats(self, ids: np.ndarray) -> np.ndarray:
        base, contrib = self._base, self._contrib
        if ids.size == 0:
            return base.copy()
        return base + contrib[ids].sum(axis=0)

    def _h(self, stats: np.ndarray, empty: bool) -> float:
        if empty:
            return 0.0
        return scalar_map(self.code, stats, self._params)

    def worst_case_load(self, S) -> float:
        ids = self._check_ids(S)
        return self._h(self._stats(ids), ids.size == 0)

    def linear_form(self):
        return self.code, self._base, self._contrib, self._params

    def tracker(self) -> "LinearTracker":
        return LinearTracker(self)


def scalar_map(code: int, s: np.ndarray, params: dict) -> float:
    if code == H_SUM:
        return float(s[0])
    if code == H_BUDGET:
        return float(s[0] - np.maximum(s[1:], 0.0).sum())
    if code == H_FACTOR:
        return float(s[0] + factor_excess(s[1:], params["beta"]))
    if code == H_ELL_AX:
        return float(s[0] + math.sqrt(max(s[1], 0.0)))
    if code == H_ELL_GEN:
        return float(s[0] + math.sqrt(float(np.dot(s[1:], s[1:]))))
    if code == H_MAX:
        return float(s.max())
    raise ValueError(f"unknown scalar map {code}")


class SingletonSet(_LinearSet):
    """The deterministic set ``{q0}``."""

    family = "singleton"
    code = H_SUM

    def __init__(self, nominal):
        self.q0 = _pad(nominal, name="nominal demand")
        if np.any(self.q0 < 0):
            raise UncertaintyError("demands must be nonnegative")
        self.n = self.q0.shape[0] - 1
        self._base = np.zeros(1)
        self._contrib = self.q0[:, None].copy()
        self._params = {}

    def nominal(self):
        return self.q0

    def to_dict(self):
        return {"family": self.family, "nominal": self.q0[1:].tolist()}


class BudgetSet(_LinearSet):
    """Box ``[lower, upper]`` cut by disjoint budget constraints.

    ``budgets`` is a list of ``(customer ids, bound)`` pairs.
    """

    family = "budget"
    code = H_BUDGET

    def __init__(self, lower, upper, budgets: Sequence[tuple[Iterable[int], float]] = ()):
        self.lower = _pad(lower, name="lower bound")
        n = self.lower.shape[0] - 1
        self.upper = _pad(upper, n, name="upper bound")
        self.n = n
        if np.any(self.lower < 0) or np.any(self.lower > self.upper + ABS_TOL):
            raise UncertaintyError("bounds must satisfy 0 <= lower <= upper")
        member = np.full(n + 1, -1, dtype=np.int64)
        self.budgets = []
        slack = []
        for l, (ids, bound) in enumerate(budgets):
            ids = tuple(sorted(int(i) for i in ids))
            for i in ids:
                if not 1 <= i <= n:
                    raise UncertaintyError(f"budget customer {i} out of range")
                if member[i] >= 0:
                    raise UncertaintyError("budget subsets must be pairwise disjoint")
                member[i] = l
            s = float(bound) - float(self.lower[list(ids)].sum())
            if s < -ABS_TOL * max(1.0, abs(bound)):
                raise UncertaintyError(f"budget {l} is below the sum of its lower bounds")
            self.budgets.append((ids, float(bound)))
            slack.append(max(s, 0.0))
        self.membership = member
        L = len(self.budgets)
        self._base = np.concatenate([[0.0], -np.array(slack, dtype=float)])
        contrib = np.zeros((n + 1, L + 1))
        contrib[:, 0] = self.upper
        for i in range(1, n + 1):
            if member[i] >= 0:
                contrib[i, 1 + member[i]] = self.upper[i] - self.lower[i]
        self._contrib = contrib
        self._params = {}

    def worst_case_load(self, S) -> float:
        ids = self._check_ids(S)
        total = float(self.upper[ids].sum())
        for l, (members, _) in enumerate(self.budgets):
            inside = ids[self.membership[ids] == l]
            spread = float((self.upper[inside] - self.lower[inside]).sum())
            total -= max(0.0, spread + self._base[1 + l])
        return total

    def nominal(self):
        return 0.5 * (self.lower + self.upper)

    def to_dict(self):
        return {
            "family": self.family,
            "lower": self.lower[1:].tolist(),
            "upper": self.upper[1:].tolist(),
            "budgets": [[list(ids), b] for ids, b in self.budgets],
        }


class FactorSet(_LinearSet):
    """``q0 + Psi xi`` with ``xi`` in the box cut by ``|sum(xi)| <= beta F``."""

    family = "factor"
    code = H_FACTOR

    def __init__(self, nominal, loadings, beta: float):
        self.q0 = _pad(nominal, name="nominal demand")
        self.n = self.q0.shape[0] - 1
        self.psi = _pad_rows(loadings, self.n, "loading matrix")
        self.F = self.psi.shape[1]
        if self.F < 1:
            raise UncertaintyError("at least one factor is required")
        if not 0.0 <= beta <= 1.0:
            raise UncertaintyError("beta must lie in [0, 1]")
        self.beta = float(beta)
        self._base = np.zeros(self.F + 1)
        self._contrib = np.hstack([self.q0[:, None], self.psi])
        self._params = {"beta": self.beta}

    def nominal(self):
        return self.q0

    def to_dict(self):
        return {
            "family": self.family,
            "nominal": self.q0[1:].tolist(),
            "loadings": self.psi[1:].tolist(),
            "beta": self.beta,
        }


class EllipsoidSet(_LinearSet):
    """``q0 + Sigma^{1/2} xi`` with ``||xi|| <= 1``.

    Pass ``sigma`` (per-customer semi-axes) for the axis-parallel case or
    ``sqrt_cov`` (a symmetric square root of the covariance) otherwise.
    """

    family = "ellipsoid"

    def __init__(self, nominal, sigma=None, sqrt_cov=None):
        self.q0 = _pad(nominal, name="nominal demand")
        n = self.n = self.q0.shape[0] - 1
        if (sigma is None) == (sqrt_cov is None):
            raise UncertaintyError("give exactly one of sigma or sqrt_cov")
        if sigma is not None:
            self.axis_parallel = True
            self.sigma = _pad(sigma, n, "sigma")
            if np.any(self.sigma < 0):
                raise UncertaintyError("semi-axes must be nonnegative")
            self.sqrt_cov = None
            self.code = H_ELL_AX
            self._base = np.zeros(2)
            self._contrib = np.stack([self.q0, self.sigma**2], axis=1)
        else:
            self.axis_parallel = False
            root = np.asarray(sqrt_cov, dtype=float)
            if root.shape != (n, n):
                raise UncertaintyError(f"sqrt_cov must be {n}x{n}")
            if not np.allclose(root, root.T, rtol=1e-10, atol=1e-12):
                raise UncertaintyError("sqrt_cov must be symmetric")
            self.sigma = None
            self.sqrt_cov = root
            self.code = H_ELL_GEN
            self._base = np.zeros(n + 1)
            contrib = np.zeros((n + 1, n + 1))
            contrib[:, 0] = self.q0
            # row i holds column i of the root
            contrib[1:, 1:] = root.T
            self._contrib = contrib
        self._params = {}

    def nominal(self):
        return self.q0

    def to_dict(self):
        d = {"family": self.family, "nominal": self.q0[1:].tolist()}
        if self.axis_parallel:
            d["sigma"] = self.sigma[1:].tolist()
        else:
            d["sqrt_cov"] = self.sqrt_cov.tolist()
        return d


class DiscreteSet(_LinearSet):
    """Convex hull of finitely many demand scenarios."""

    family = "discrete"
    code = H_MAX

    def __init__(self, scenarios):
        sc = np.asarray(scenarios, dtype=float)
        if sc.ndim != 2 or sc.shape[0] < 1:
            raise UncertaintyError("need at least one scenario")
        if np.any(sc < 0) or not np.all(np.isfinite(sc)):
            raise UncertaintyError("scenarios must be finite and nonnegative")
        self.D, self.n = sc.shape
        self.scenarios = np.hstack([np.zeros((self.D, 1)), sc])
        self._base = np.zeros(self.D)
        self._contrib = self.scenarios.T.copy()
        self._params = {}

    def nominal(self):
        return self.scenarios[0]

    def to_dict(self):
        return {"family": self.family, "scenarios": self.scenarios[:, 1:].tolist()}


class GammaSet(UncertaintySet):
    """Cardinality-constrained deviations ``q0 + qhat * xi``, ``sum(xi) <= gamma``."""

    family = "gamma"
    code = H_GAMMA

    def __init__(self, nominal, deviation, gamma: float):
        self.q0 = _pad(nominal, name="nominal demand")
        n = self.n = self.q0.shape[0] - 1
        self.qhat = _pad(deviation, n, "deviation")
        if np.any(self.qhat < 0) or np.any(self.q0 < 0):
            raise UncertaintyError("demands and deviations must be nonnegative")
        if not 0.0 <= gamma <= n + ABS_TOL:
            raise UncertaintyError(f"gamma must lie in [0, {n}]")
        self.gamma = float(min(gamma, n))
        self.G = int(math.floor(self.gamma + 1e-12))
        self.frac = self.gamma - self.G if self.gamma - self.G > 1e-12 else 0.0
        # rank 0 is the largest deviation; ties by ascending id
        order = sorted(range(1, n + 1), key=lambda i: (-self.qhat[i], i))
        self.rank = np.zeros(n + 1, dtype=np.int64)
        for r, i in enumerate(order):
            self.rank[i] = r
        self.by_rank = np.array(order, dtype=np.int64)

    def ordered(self, ids) -> list[int]:
        return sorted((int(i) for i in ids), key=lambda i: self.rank[i])

    def worst_case_load(self, S) -> float:
        ids = self._check_ids(S)
        if ids.size == 0:
            return 0.0
        dev = self.qhat[self.ordered(ids)]
        k = min(ids.size, self.G)
        total = float(self.q0[ids].sum()) + float(dev[:k].sum())
        if ids.size >= self.G + 1:
            total += self.frac * float(dev[self.G])
        return total

    def nominal(self):
        return self.q0

    def tracker(self) -> "GammaTracker":
        return GammaTracker(self)

    def to_dict(self):
        return {
            "family": self.family,
            "nominal": self.q0[1:].tolist(),
            "deviation": self.qhat[1:].tolist(),
            "gamma": self.gamma,
        }


# -- trackers -------------------------------------------------------------


class LoadTracker:
    """Mutable worst-case load of a growing and shrinking customer set."""

    def __init__(self):
        self.members: set[int] = set()
        self.z = 0.0

    def add(self, j: int) -> float:
        raise NotImplementedError

    def remove(self, j: int) -> float:
        raise NotImplementedError

    def _check_add(self, j):
        if j in self.members:
            raise TrackerError(f"customer {j} is already tracked")

    def _check_remove(self, j):
        if j not in self.members:
            raise TrackerError(f"customer {j} is not tracked")


class LinearTracker(LoadTracker):
    def __init__(self, uset: _LinearSet):
        super().__init__()
        self.uset = uset
        self.stats = uset._base.copy()

    def add(self, j: int) -> float:
        j = int(j)
        self._check_add(j)
        self.members.add(j)
        self.stats += self.uset._contrib[j]
        self.z = self.uset._h(self.stats, False)
        return self.z

    def remove(self, j: int) -> float:
        j = int(j)
        self._check_remove(j)
        self.members.discard(j)
        if not self.members:
            # avoid drift: the empty state is known exactly
            self.stats = self.uset._base.copy()
            self.z = 0.0
        else:
            self.stats -= self.uset._contrib[j]
            self.z = self.uset._h(self.stats, False)
        return self.z

    @property
    def pi(self) -> float:
        return float(self.stats[0])

    @property
    def rho(self) -> np.ndarray:
        return self.stats[1:]


class GammaTracker(LoadTracker):
    """Top-G deviations in a min-heap, the (G+1)-th in ``rho0``, the rest in a max-heap.

    Heap entries are keys ``(qhat, -id)`` so ties resolve by ascending id;
    removed entries are deleted lazily.
    """

    def __init__(self, uset: GammaSet):
        super().__init__()
        self.uset = uset
        self.pi = 0.0
        self.s = 0.0
        self.h_plus: list[tuple[float, int]] = []
        self.h_minus: list[tuple[float, int]] = []
        self.rho0: tuple[float, int] | None = None
        self.where: dict[int, str] = {}
        self.n_plus = 0
        self.n_minus = 0

    def _key(self, j):
        return (float(self.uset.qhat[j]), -j)

    def _clean_plus(self):
        while self.h_plus and self.where.get(-self.h_plus[0][1]) != "+":
            heapq.heappop(self.h_plus)

    def _clean_minus(self):
        while self.h_minus and self.where.get(self.h_minus[0][1]) != "-":
            heapq.heappop(self.h_minus)

    def _push_plus(self, key):
        heapq.heappush(self.h_plus, key)
        self.where[-key[1]] = "+"
        self.n_plus += 1
        self.s += key[0]

    def _pop_plus_min(self):
        self._clean_plus()
        key = heapq.heappop(self.h_plus)
        self.n_plus -= 1
        self.s -= key[0]
        del self.where[-key[1]]
        return key

    def _push_minus(self, key):
        # max-heap via negated value; id stored positive so ties pop lowest id
        heapq.heappush(self.h_minus, (-key[0], -key[1]))
        self.where[-key[1]] = "-"
        self.n_minus += 1

    def _pop_minus_max(self):
        self._clean_minus()
        v, j = heapq.heappop(self.h_minus)
        self.n_minus -= 1
        del self.where[j]
        return (-v, -j)

    def _set_rho0(self, key):
        self.rho0 = key
        if key is not None:
            self.where[-key[1]] = "0"

    def _place_below(self, key):
        if self.rho0 is None:
            self._set_rho0(key)
        elif key > self.rho0:
            old = self.rho0
            self._push_minus(old)
            self._set_rho0(key)
        else:
            self._push_minus(key)

    def _compact(self):
        if len(self.h_plus) > 2 * self.n_plus + 16:
            self.h_plus = list({k for k in self.h_plus if self.where.get(-k[1]) == "+"})
            heapq.heapify(self.h_plus)
        if len(self.h_minus) > 2 * self.n_minus + 16:
            self.h_minus = list({k for k in self.h_minus if self.where.get(k[1]) == "-"})
            heapq.heapify(self.h_minus)

    def _refresh(self):
        self._compact()
        if self.n_plus == 0:
            self.s = 0.0
        if not self.members:
            self.pi = 0.0
        lam = self.uset.frac * self.rho0[0] if self.rho0 is not None else 0.0
        self.z = self.pi + self.s + lam
        return self.z

    def add(self, j: int) -> float:
        j = int(j)
        self._check_add(j)
        self.members.add(j)
        self.pi += float(self.uset.q0[j])
        key = self._key(j)
        G = self.uset.G
        if self.n_plus < G:
            self._push_plus(key)
        else:
            if G > 0:
                self._clean_plus()
                if key > self.h_plus[0]:
                    bumped = self._pop_plus_min()
                    self._push_plus(key)
                    key = bumped
            self._place_below(key)
        return self._refresh()

    def remove(self, j: int) -> float:
        j = int(j)
        self._check_remove(j)
        self.members.discard(j)
        self.pi -= float(self.uset.q0[j])
        loc = self.where.pop(j)
        key = self._key(j)
        if loc == "+":
            self.n_plus -= 1
            self.s -= key[0]
            if self.rho0 is not None:
                self._push_plus(self.rho0)
                self.rho0 = None
                if self.n_minus:
                    self._set_rho0(self._pop_minus_max())
        elif loc == "0":
            self.rho0 = None
            if self.n_minus:
                self._set_rho0(self._pop_minus_max())
        else:
            self.n_minus -= 1
        return self._refresh()

    # -- inspection for invariant checks ------------------------------
    def plus_keys(self) -> list[tuple[float, int]]:
        return sorted({k for k in self.h_plus if self.where.get(-k[1]) == "+"})

    def minus_keys(self) -> list[tuple[float, int]]:
        return sorted({(-v, -j) for v, j in self.h_minus if self.where.get(j) == "-"})

    def check_invariants(self) -> None:
        plus, minus = self.plus_keys(), self.minus_keys()
        G = self.uset.G
        assert len(plus) == self.n_plus == min(len(self.members), G)
        assert len(minus) == self.n_minus
        assert len(plus) + len(minus) + (self.rho0 is not None) == len(self.members)
        if self.rho0 is not None:
            assert all(k > self.rho0 for k in plus)
            assert all(k < self.rho0 for k in minus)
        else:
            assert not minus
        assert math.isclose(self.s, sum(k[0] for k in plus), rel_tol=1e-9, abs_tol=1e-9)


def tracker_create(uset: UncertaintySet) -> LoadTracker:
    return uset.tracker()


def tracker_add(t: LoadTracker, j: int) -> float:
    return t.add(j)


def tracker_remove(t: LoadTracker, j: int) -> float:
    return t.remove(j)


def worst_case_load(uset: UncertaintySet, S: Iterable[int]) -> float:
    return uset.worst_case_load(S)


def max_single_demand(uset: UncertaintySet, i: int) -> float:
    return uset.max_single_demand(i)


def _rows_map(code: int, s: np.ndarray, params: dict) -> np.ndarray:
    if code == H_SUM:
        return s[:, 0].copy()
    if code == H_BUDGET:
        return s[:, 0] - np.maximum(s[:, 1:], 0.0).sum(axis=1)
    if code == H_FACTOR:
        rho = s[:, 1:]
        F = rho.shape[1]
        beta = params["beta"]
        order = -np.sort(-rho, axis=1)
        lp = math.ceil((1.0 + beta) * F / 2.0 - 1e-12)
        lm = max(1, math.ceil((1.0 - beta) * F / 2.0 - 1e-12))
        best = np.abs(rho).sum(axis=1)
        for lam in (order[:, lp - 1], order[:, lm - 1]):
            val = np.abs(rho - lam[:, None]).sum(axis=1) + beta * F * np.abs(lam)
            best = np.minimum(best, val)
        return s[:, 0] + best
    if code == H_ELL_AX:
        return s[:, 0] + np.sqrt(np.maximum(s[:, 1], 0.0))
    if code == H_ELL_GEN:
        return s[:, 0] + np.sqrt((s[:, 1:] ** 2).sum(axis=1))
    if code == H_MAX:
        return s.max(axis=1)
    raise ValueError(f"unknown scalar map {code}")


def loads_with(uset: UncertaintySet, S: Sequence[int], cands) -> np.ndarray:
    """Worst-case loads of ``S + [c]`` for every candidate ``c`` not in ``S``."""
    cands = np.asarray(cands, dtype=np.int64)
    if cands.size == 0:
        return np.zeros(0)
    ids = np.asarray(list(S), dtype=np.int64)
    if isinstance(uset, GammaSet):
        G, frac = uset.G, uset.frac
        d = np.sort(uset.qhat[ids])[::-1] if ids.size else np.zeros(0)
        pre = np.concatenate([[0.0], np.cumsum(d)])
        L = d.size
        v = uset.qhat[cands]
        # r = how many members of S rank ahead of the newcomer (value ties are harmless)
        r = L - np.searchsorted(d[::-1], v, side="left")
        top = np.where(r >= G, pre[min(G, L)], pre[np.minimum(G - 1, L)] + v) if G > 0 else np.zeros(cands.size)
        out = float(uset.q0[ids].sum()) + uset.q0[cands] + top
        if frac > 0.0 and L + 1 >= G + 1:
            nxt = np.where(r > G, d[min(G, L - 1)] if L else 0.0,
                           np.where(r == G, v, d[np.clip(G - 1, 0, max(L - 1, 0))] if L else 0.0))
            out = out + frac * nxt
        return out
    code, base, contrib, params = uset.linear_form()
    stats = base + (contrib[ids].sum(axis=0) if ids.size else 0.0)
    return _rows_map(code, stats[None, :] + contrib[cands], params)


# -- benchmark-derived builders -------------------------------------------


def quadrants(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Assign customers (rows 1..n of ``coords``) to NE, NW, SW, SE.

    The origin is the customer centroid; a customer with ``x >= ox`` is east
    and with ``y >= oy`` is north.  Returns the quadrant index per node
    (depot gets -1) and the origin.
    """
    pts = coords[1:]
    origin = pts.mean(axis=0)
    east = pts[:, 0] >= origin[0]
    north = pts[:, 1] >= origin[1]
    q = np.where(north, np.where(east, 0, 1), np.where(east, 3, 2))
    return np.concatenate([[-1], q]).astype(np.int64), origin


def factor_loadings(coords: np.ndarray, demand: np.ndarray, alpha: float) -> np.ndarray:
    """Loadings ``alpha q0_i psi_if / sum_f psi_if`` with inverse-distance ``psi``."""
    quad, origin = quadrants(coords)
    pts = coords[1:]
    cents = np.empty((4, 2))
    for f in range(4):
        sel = pts[quad[1:] == f]
        cents[f] = sel.mean(axis=0) if len(sel) else origin
    dist = np.sqrt(((pts[:, None, :] - cents[None, :, :]) ** 2).sum(axis=-1))
    inv = 1.0 / np.maximum(dist, 1e-9)
    weights = inv / inv.sum(axis=1, keepdims=True)
    return alpha * demand[1:, None] * weights


def sqrt_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    root = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
    return 0.5 * (root + root.T)


def build_set(instance, family: str, alpha: float, beta: float, seed: int = 0) -> UncertaintySet:
    """Build one of the benchmark uncertainty sets around the instance demands.

    ``family`` is one of ``singleton``, ``budget``, ``factor``, ``ellipsoid``
    (axis-parallel exactly when ``beta == 1``), ``ellipsoid-ax``,
    ``ellipsoid-gen``, ``gamma`` or ``discrete``.
    """
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise UncertaintyError("alpha and beta must lie in [0, 1]")
    if family not in FAMILIES:
        raise UncertaintyError(f"unknown family {family!r}")
    q0 = np.asarray(instance.demand, dtype=float)
    coords = np.asarray(instance.coords, dtype=float)
    n = q0.shape[0] - 1
    nom = q0[1:]
    if family == "singleton":
        return SingletonSet(nom)
    if family == "budget":
        quad, _ = quadrants(coords)
        budgets = []
        for f in range(4):
            ids = np.flatnonzero(quad == f)
            if ids.size:
                budgets.append((ids.tolist(), (1.0 + alpha * beta) * float(q0[ids].sum())))
        return BudgetSet((1.0 - alpha) * nom, (1.0 + alpha) * nom, budgets)
    if family == "factor":
        return FactorSet(nom, factor_loadings(coords, q0, alpha), beta)
    if family == "ellipsoid-ax" or (family == "ellipsoid" and beta == 1.0):
        return EllipsoidSet(nom, sigma=alpha * nom)
    if family in ("ellipsoid", "ellipsoid-gen"):
        psi = factor_loadings(coords, q0, alpha)
        cov = (1.0 - beta) * psi @ psi.T + beta * np.diag((alpha * nom) ** 2)
        return EllipsoidSet(nom, sqrt_cov=sqrt_psd(cov))
    if family == "gamma":
        return GammaSet(nom, alpha * nom, beta * n)
    # discrete
    count = int(math.floor(beta * n + 0.5))
    rng = np.random.default_rng(seed)
    draws = rng.uniform((1.0 - alpha) * nom, (1.0 + alpha) * nom, size=(count, n))
    return DiscreteSet(np.vstack([nom[None, :], draws]))


# -- sidecar serialization ------------------------------------------------

SIDECAR_VERSION = 1


def set_from_dict(d: dict) -> UncertaintySet:
    fam = d["family"]
    if fam == "singleton":
        return SingletonSet(d["nominal"])
    if fam == "budget":
        return BudgetSet(d["lower"], d["upper"], [(ids, b) for ids, b in d["budgets"]])
    if fam == "factor":
        return FactorSet(d["nominal"], d["loadings"], d["beta"])
    if fam == "ellipsoid":
        if "sigma" in d:
            return EllipsoidSet(d["nominal"], sigma=d["sigma"])
        return EllipsoidSet(d["nominal"], sqrt_cov=d["sqrt_cov"])
    if fam == "gamma":
        return GammaSet(d["nominal"], d["deviation"], d["gamma"])
    if fam == "discrete":
        return DiscreteSet(d["scenarios"])
    raise UncertaintyError(f"unknown family {fam!r}")


def save_set(uset: UncertaintySet, path, build: dict | None = None) -> None:
    """Write a JSON sidecar; floats round-trip exactly through ``repr``."""
    body = {"version": SIDECAR_VERSION, "set": uset.to_dict(), "build": build or {}}
    with open(path, "w") as fh:
        json.dump(body, fh, sort_keys=True)
        fh.write("\n")


def load_set(path) -> UncertaintySet:
    with open(path) as fh:
        body = json.load(fh)
    if body.get("version") != SIDECAR_VERSION:
        raise UncertaintyError(f"unsupported sidecar version {body.get('version')!r}")
    return set_from_dict(body["set"])
