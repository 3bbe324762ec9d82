# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Neighbourhood scanning core for the robust tabu search.

Written in Cython's pure-Python mode: the build compiles this file into an
extension module, and the very same source runs unmodified under CPython as
the fallback.  Both paths execute identical arithmetic in identical order, so
searches are reproducible whichever backend is active.

Routes live in numbered slots.  For every slot the core keeps the sequence
(depot at both ends), per-type prefix path costs, per-type prefix site
conflict counts and prefix load statistics, so that the effect of any
relocate, exchange or 2-opt move on cost and worst-case load is available in
constant (or, for the cardinality set, logarithmic) time.
"""
import cython
import numpy as np

INF = cython.declare(cython.double, 1e300)

# scalar maps, mirrored from the uncertainty module
H_SUM = cython.declare(cython.int, 0)
H_BUDGET = cython.declare(cython.int, 1)
H_FACTOR = cython.declare(cython.int, 2)
H_ELL_AX = cython.declare(cython.int, 3)
H_ELL_GEN = cython.declare(cython.int, 4)
H_MAX = cython.declare(cython.int, 5)
H_GAMMA = cython.declare(cython.int, 6)

# move kinds
RELOCATE = cython.declare(cython.int, 0)
EXCHANGE = cython.declare(cython.int, 1)
TWO_OPT = cython.declare(cython.int, 2)

COMPILED = cython.compiled


@cython.cclass
class Core:
    n: cython.int
    m: cython.int
    N: cython.int
    hmax: cython.int
    P: cython.int
    code: cython.int
    F: cython.int
    lp: cython.int
    lm: cython.int
    bF: cython.double
    G: cython.int
    frac: cython.double
    unlimited: cython.int
    phiQ: cython.double
    phiS: cython.double

    costs: cython.double[:, :, ::1]
    fixed: cython.double[::1]
    cap: cython.double[::1]
    bad: cython.int[:, ::1]
    base: cython.double[::1]
    contrib: cython.double[:, ::1]
    qhat: cython.double[::1]
    rank: cython.int[::1]

    seq: cython.int[:, ::1]
    lens: cython.int[::1]
    rtype: cython.int[::1]
    pc: cython.double[:, :, ::1]
    psite: cython.int[:, :, ::1]
    pre: cython.double[:, :, ::1]
    load: cython.double[::1]
    rpen: cython.double[::1]
    rinf: cython.int[::1]
    gsrt: cython.double[:, ::1]
    gps: cython.double[:, ::1]

    tmp: cython.double[::1]
    tmp2: cython.double[::1]
    fbuf: cython.double[::1]
    mark: cython.int[::1]
    cA: cython.double[::1]
    cB: cython.double[::1]
    sA: cython.int[::1]
    sB: cython.int[::1]

    # result of the last evaluation
    e_ka: cython.int
    e_kb: cython.int
    e_newinf: cython.int
    e_feas: cython.int
    # selected move of the last scan
    mv_found: cython.int
    mv_improving: cython.int
    mv_kind: cython.int
    mv_a: cython.int
    mv_pa: cython.int
    mv_b: cython.int
    mv_pb: cython.int
    mv_ka: cython.int
    mv_kb: cython.int
    mv_delta: cython.double
    n_evals: cython.longlong

    def __init__(self, costs, fixed, cap, bad, code, base, contrib, beta, qhat, rank, G, frac,
                 unlimited, phiQ, phiS):
        self.costs = np.array(costs, dtype=np.float64, order="C")
        self.m = self.costs.shape[0]
        self.N = self.costs.shape[1]
        self.n = self.N - 1
        self.hmax = self.n + 1
        self.fixed = np.array(fixed, dtype=np.float64, order="C")
        self.cap = np.array(cap, dtype=np.float64, order="C")
        self.bad = np.array(bad, dtype=np.intc, order="C")
        self.code = code
        self.base = np.array(base, dtype=np.float64, order="C")
        self.contrib = np.array(contrib, dtype=np.float64, order="C")
        self.P = self.base.shape[0]
        self.F = self.P - 1
        if code == H_FACTOR:
            lp = int(np.ceil((1.0 + beta) * self.F / 2.0 - 1e-12))
            lm = max(1, int(np.ceil((1.0 - beta) * self.F / 2.0 - 1e-12)))
            self.lp = lp
            self.lm = lm
            self.bF = beta * self.F
        else:
            self.lp = 1
            self.lm = 1
            self.bF = 0.0
        self.qhat = np.array(qhat, dtype=np.float64, order="C")
        self.rank = np.array(rank, dtype=np.intc, order="C")
        self.G = G
        self.frac = frac
        self.unlimited = unlimited
        self.phiQ = phiQ
        self.phiS = phiS
        H = self.hmax
        N = self.N
        m = self.m
        self.seq = np.zeros((H, N + 1), dtype=np.intc)
        self.lens = np.zeros(H, dtype=np.intc)
        self.rtype = np.zeros(H, dtype=np.intc)
        self.pc = np.zeros((H, m, N + 1), dtype=np.float64)
        self.psite = np.zeros((H, m, N + 1), dtype=np.intc)
        self.pre = np.zeros((H, N, self.P), dtype=np.float64)
        self.load = np.zeros(H, dtype=np.float64)
        self.rpen = np.zeros(H, dtype=np.float64)
        self.rinf = np.zeros(H, dtype=np.intc)
        gn = N if code == H_GAMMA else 1
        self.gsrt = np.zeros((H, gn), dtype=np.float64)
        self.gps = np.zeros((H, gn + 1), dtype=np.float64)
        self.tmp = np.zeros(self.P, dtype=np.float64)
        self.tmp2 = np.zeros(self.P, dtype=np.float64)
        self.fbuf = np.zeros(max(self.F, 1), dtype=np.float64)
        self.mark = np.zeros(N, dtype=np.intc)
        self.cA = np.zeros(m, dtype=np.float64)
        self.cB = np.zeros(m, dtype=np.float64)
        self.sA = np.zeros(m, dtype=np.intc)
        self.sB = np.zeros(m, dtype=np.intc)
        self.n_evals = 0

    # ------------------------------------------------------------------
    # slot maintenance
    # ------------------------------------------------------------------
    def set_route(self, h: cython.int, customers, k: cython.int):
        """Load a customer sequence of vehicle type ``k`` into slot ``h``."""
        L: cython.int = len(customers)
        t: cython.int
        kk: cython.int
        d: cython.int
        u: cython.int
        v: cython.int
        self.lens[h] = L
        self.rtype[h] = k
        self.seq[h, 0] = 0
        for t in range(L):
            self.seq[h, t + 1] = customers[t]
        self.seq[h, L + 1] = 0
        for kk in range(self.m):
            self.pc[h, kk, 0] = 0.0
            self.psite[h, kk, 0] = 0
            for t in range(L + 1):
                u = self.seq[h, t]
                v = self.seq[h, t + 1]
                self.pc[h, kk, t + 1] = self.pc[h, kk, t] + self.costs[kk, u, v]
                if t < L:
                    self.psite[h, kk, t + 1] = self.psite[h, kk, t] + self.bad[v, kk]
        for d in range(self.P):
            self.pre[h, 0, d] = self.base[d]
        for t in range(L):
            v = self.seq[h, t + 1]
            for d in range(self.P):
                self.pre[h, t + 1, d] = self.pre[h, t, d] + self.contrib[v, d]
        if self.code == H_GAMMA:
            self._gamma_rebuild(h)
        self.load[h] = self._slot_load(h)
        self._refresh_pen(h)

    def clear_route(self, h: cython.int, k: cython.int):
        self.set_route(h, [], k)

    @cython.cfunc
    def _refresh_pen(self, h: cython.int) -> cython.void:
        k: cython.int = self.rtype[h]
        L: cython.int = self.lens[h]
        vq: cython.double
        if L == 0:
            self.rpen[h] = 0.0
            self.rinf[h] = 0
            return
        vq = self._viol(self.load[h], k)
        self.rpen[h] = (self.fixed[k] + self.pc[h, k, L + 1] + self.phiQ * vq
                        + self.phiS * self.psite[h, k, L])
        self.rinf[h] = 1 if (vq > 0.0 or self.psite[h, k, L] > 0) else 0

    @cython.cfunc
    def _gamma_rebuild(self, h: cython.int) -> cython.void:
        L: cython.int = self.lens[h]
        t: cython.int
        r: cython.int
        c: cython.int
        for t in range(L):
            self.mark[self.rank[self.seq[h, t + 1]]] = self.seq[h, t + 1]
        c = 0
        self.gps[h, 0] = 0.0
        for r in range(self.n):
            if self.mark[r] != 0:
                self.gsrt[h, c] = self.qhat[self.mark[r]]
                self.gps[h, c + 1] = self.gps[h, c] + self.gsrt[h, c]
                self.mark[r] = 0
                c += 1

    @cython.cfunc
    def _slot_load(self, h: cython.int) -> cython.double:
        L: cython.int = self.lens[h]
        d: cython.int
        top: cython.double
        if L == 0:
            return 0.0
        if self.code == H_GAMMA:
            top = self.gps[h, self.G if self.G < L else L]
            if self.G < L:
                top += self.frac * self.gsrt[h, self.G]
            return self.pre[h, L, 0] + top
        for d in range(self.P):
            self.tmp[d] = self.pre[h, L, d]
        return self._hmap(self.tmp)

    def slot_load(self, h):
        return self.load[h]

    def slot_pen(self, h):
        return self.rpen[h]

    def slot_infeasible(self, h):
        return self.rinf[h]

    def slot_routing(self, h, k):
        return self.pc[h, k, self.lens[h] + 1]

    # ------------------------------------------------------------------
    # scalar helpers
    # ------------------------------------------------------------------
    @cython.cfunc
    @cython.exceptval(check=False)
    def _viol(self, L: cython.double, k: cython.int) -> cython.double:
        e: cython.double = L - self.cap[k]
        if e > 1e-9 * self.cap[k]:
            return e
        return 0.0

    @cython.cfunc
    @cython.exceptval(check=False)
    def _hmap(self, s: cython.double[::1]) -> cython.double:
        d: cython.int
        r: cython.double
        v: cython.double
        if self.code == H_SUM:
            return s[0]
        if self.code == H_BUDGET:
            r = s[0]
            for d in range(1, self.P):
                if s[d] > 0.0:
                    r -= s[d]
            return r
        if self.code == H_ELL_AX:
            v = s[1]
            if v < 0.0:
                v = 0.0
            return s[0] + v ** 0.5
        if self.code == H_ELL_GEN:
            v = 0.0
            for d in range(1, self.P):
                v += s[d] * s[d]
            return s[0] + v ** 0.5
        if self.code == H_MAX:
            r = s[0]
            for d in range(1, self.P):
                if s[d] > r:
                    r = s[d]
            return r
        return s[0] + self._factor(s)

    @cython.cfunc
    @cython.exceptval(check=False)
    def _factor(self, s: cython.double[::1]) -> cython.double:
        F: cython.int = self.F
        i: cython.int
        j: cython.int
        x: cython.double
        lam: cython.double
        val: cython.double
        best: cython.double
        c: cython.int
        for i in range(F):
            x = s[i + 1]
            j = i
            while j > 0 and self.fbuf[j - 1] < x:
                self.fbuf[j] = self.fbuf[j - 1]
                j -= 1
            self.fbuf[j] = x
        best = INF
        for c in range(3):
            if c == 0:
                lam = 0.0
            elif c == 1:
                lam = self.fbuf[self.lp - 1]
            else:
                lam = self.fbuf[self.lm - 1]
            val = self.bF * (lam if lam >= 0.0 else -lam)
            for i in range(F):
                x = s[i + 1] - lam
                val += x if x >= 0.0 else -x
            if val < best:
                best = val
        return best

    @cython.cfunc
    @cython.exceptval(check=False)
    def _lin_mod(self, h: cython.int, rem: cython.int, add: cython.int) -> cython.double:
        """Load of slot ``h`` without ``rem`` and with ``add`` (0 = none)."""
        d: cython.int
        L: cython.int = self.lens[h]
        for d in range(self.P):
            self.tmp[d] = self.pre[h, L, d] - self.contrib[rem, d] + self.contrib[add, d]
        return self._hmap(self.tmp)

    @cython.cfunc
    @cython.exceptval(check=False)
    def _gpos(self, h: cython.int, L: cython.int, v: cython.double) -> cython.int:
        """Number of entries of the descending array strictly greater than ``v``."""
        lo: cython.int = 0
        hi: cython.int = L
        mid: cython.int
        while lo < hi:
            mid = (lo + hi) >> 1
            if self.gsrt[h, mid] > v:
                lo = mid + 1
            else:
                hi = mid
        return lo

    @cython.cfunc
    @cython.exceptval(check=False)
    def _gelem(self, h: cython.int, L: cython.int, rp: cython.int, ip: cython.int,
               v: cython.double, t: cython.int) -> cython.double:
        # element t after removing index rp (-1: none) and inserting v at ip (-1: none)
        if ip >= 0:
            if t == ip:
                return v
            if t > ip:
                t -= 1
        if rp >= 0 and t >= rp:
            t += 1
        return self.gsrt[h, t]

    @cython.cfunc
    @cython.exceptval(check=False)
    def _gpref(self, h: cython.int, L: cython.int, rp: cython.int, ip: cython.int,
               v: cython.double, t: cython.int) -> cython.double:
        # sum of the first t elements of the modified array
        extra: cython.double = 0.0
        if ip >= 0 and t > ip:
            t -= 1
            extra = v
        if rp >= 0 and t > rp:
            return self.gps[h, t + 1] - self.gsrt[h, rp] + extra
        return self.gps[h, t] + extra

    @cython.cfunc
    @cython.exceptval(check=False)
    def _gamma_mod(self, h: cython.int, rem: cython.int, add: cython.int) -> cython.double:
        L: cython.int = self.lens[h]
        Ln: cython.int = L
        rp: cython.int = -1
        ip: cython.int = -1
        cnt: cython.int
        v: cython.double = 0.0
        nom: cython.double = self.pre[h, L, 0] - self.contrib[rem, 0] + self.contrib[add, 0]
        top: cython.double
        k: cython.int
        if rem != 0:
            rp = self._gpos(h, L, self.qhat[rem])
            Ln -= 1
        if add != 0:
            v = self.qhat[add]
            cnt = self._gpos(h, L, v)
            if rp >= 0 and rp < cnt:
                cnt -= 1
            ip = cnt
            Ln += 1
        if Ln == 0:
            return 0.0
        k = self.G if self.G < Ln else Ln
        top = self._gpref(h, L, rp, ip, v, k)
        if self.G < Ln:
            top += self.frac * self._gelem(h, L, rp, ip, v, self.G)
        return nom + top

    @cython.cfunc
    @cython.exceptval(check=False)
    def _load_mod(self, h: cython.int, rem: cython.int, add: cython.int, newlen: cython.int) -> cython.double:
        if newlen == 0:
            return 0.0
        if self.code == H_GAMMA:
            return self._gamma_mod(h, rem, add)
        return self._lin_mod(h, rem, add)

    @cython.cfunc
    @cython.exceptval(check=False)
    def _load_tails(self, a: cython.int, p: cython.int, b: cython.int, q: cython.int) -> cython.double:
        """Load of the first ``p`` customers of ``a`` followed by the tail of ``b`` after ``q``."""
        LB: cython.int = self.lens[b]
        d: cython.int
        t: cython.int
        r: cython.int
        c: cython.int
        cnt: cython.int
        top: cython.double
        last: cython.double
        if p + LB - q == 0:
            return 0.0
        if self.code != H_GAMMA:
            for d in range(self.P):
                self.tmp[d] = self.pre[a, p, d] + self.pre[b, LB, d] - self.pre[b, q, d]
            return self._hmap(self.tmp)
        for t in range(1, p + 1):
            c = self.seq[a, t]
            self.mark[self.rank[c]] = c
        for t in range(q + 1, LB + 1):
            c = self.seq[b, t]
            self.mark[self.rank[c]] = c
        cnt = 0
        top = 0.0
        last = 0.0
        for r in range(self.n):
            if cnt > self.G:
                break
            c = self.mark[r]
            if c != 0:
                if cnt < self.G:
                    top += self.qhat[c]
                else:
                    last = self.qhat[c]
                cnt += 1
        for t in range(1, p + 1):
            self.mark[self.rank[self.seq[a, t]]] = 0
        for t in range(q + 1, LB + 1):
            self.mark[self.rank[self.seq[b, t]]] = 0
        return self.pre[a, p, 0] + self.pre[b, LB, 0] - self.pre[b, q, 0] + top + self.frac * last

    # ------------------------------------------------------------------
    # vehicle type choice for the two routes touched by an inter-route move
    # ------------------------------------------------------------------
    @cython.cfunc
    @cython.exceptval(check=False)
    def _pen(self, c: cython.double[::1], s: cython.int[::1], load: cython.double,
             k: cython.int) -> cython.double:
        return c[k] + self.phiQ * self._viol(load, k) + self.phiS * s[k]

    @cython.cfunc
    @cython.exceptval(check=False)
    def _lower(self, c: cython.double[::1], s: cython.int[::1], k0: cython.int,
               k1: cython.int) -> cython.double:
        # cheapest cost-plus-site value over the admissible types (violation ignored)
        k: cython.int
        v: cython.double
        best: cython.double = INF
        if self.unlimited:
            for k in range(self.m):
                v = c[k] + self.phiS * s[k]
                if v < best:
                    best = v
            return best
        v = c[k0] + self.phiS * s[k0]
        best = c[k1] + self.phiS * s[k1]
        return v if v < best else best

    @cython.cfunc
    @cython.exceptval(check=False)
    def _best_type(self, c: cython.double[::1], s: cython.int[::1], load: cython.double) -> cython.int:
        k: cython.int
        best: cython.int = 0
        p: cython.double
        pb: cython.double = INF
        for k in range(self.m):
            p = self.phiQ * self._viol(load, k) + self.phiS * s[k]
            if p < pb:
                best = k
                pb = p
            elif p == pb:
                if p == 0.0 and c[k] != c[best]:
                    if c[k] < c[best]:
                        best = k
                elif self.cap[k] < self.cap[best]:
                    best = k
        return best

    @cython.cfunc
    @cython.exceptval(check=False)
    def _finish_pair(self, a: cython.int, b: cython.int, LA: cython.int, LB: cython.int,
                     loadA: cython.double, loadB: cython.double) -> cython.double:
        """Choose types for the new routes (buffers cA/sA, cB/sB) and return the delta."""
        ka: cython.int = self.rtype[a]
        kb: cython.int = self.rtype[b]
        penA: cython.double = 0.0
        penB: cython.double = 0.0
        p1: cython.double
        p2: cython.double
        infA: cython.int = 0
        infB: cython.int = 0
        if self.unlimited:
            if LA > 0:
                ka = self._best_type(self.cA, self.sA, loadA)
            if LB > 0:
                kb = self._best_type(self.cB, self.sB, loadB)
        else:
            p1 = 0.0
            p2 = 0.0
            if LA > 0:
                p1 += self._pen(self.cA, self.sA, loadA, ka)
                p2 += self._pen(self.cA, self.sA, loadA, kb)
            if LB > 0:
                p1 += self._pen(self.cB, self.sB, loadB, kb)
                p2 += self._pen(self.cB, self.sB, loadB, ka)
            if p2 < p1:
                ka, kb = kb, ka
        if LA > 0:
            penA = self._pen(self.cA, self.sA, loadA, ka)
            infA = 1 if (self._viol(loadA, ka) > 0.0 or self.sA[ka] > 0) else 0
        if LB > 0:
            penB = self._pen(self.cB, self.sB, loadB, kb)
            infB = 1 if (self._viol(loadB, kb) > 0.0 or self.sB[kb] > 0) else 0
        self.e_ka = ka
        self.e_kb = kb
        self.e_newinf = infA + infB - self.rinf[a] - self.rinf[b]
        self.e_feas = 1 if (infA == 0 and infB == 0) else 0
        return penA + penB - self.rpen[a] - self.rpen[b]

    @cython.cfunc
    @cython.exceptval(check=False)
    def _pair_bound(self, a: cython.int, b: cython.int, LA: cython.int, LB: cython.int) -> cython.double:
        lb: cython.double = -self.rpen[a] - self.rpen[b]
        if LA > 0:
            lb += self._lower(self.cA, self.sA, self.rtype[a], self.rtype[b])
        if LB > 0:
            lb += self._lower(self.cB, self.sB, self.rtype[b], self.rtype[a])
        return lb

    # ------------------------------------------------------------------
    # move evaluation; each returns INF when the lower bound reaches ``bound``
    # ------------------------------------------------------------------
    @cython.cfunc
    @cython.exceptval(check=False)
    def _ev_relocate(self, a: cython.int, p: cython.int, b: cython.int, t: cython.int,
                     bound: cython.double) -> cython.double:
        k: cython.int
        LA: cython.int = self.lens[a]
        LB: cython.int = self.lens[b]
        x: cython.int = self.seq[a, p]
        u: cython.int = self.seq[a, p - 1]
        w: cython.int = self.seq[a, p + 1]
        y: cython.int
        z: cython.int
        d: cython.double
        lb: cython.double
        loadA: cython.double
        loadB: cython.double
        self.e_newinf = 0
        self.e_feas = 1
        if a == b:
            # customer set unchanged: only the routing cost of the current type moves
            k = self.rtype[a]
            y = self.seq[a, t]
            z = self.seq[a, t + 1]
            d = (self.costs[k, u, w] - self.costs[k, u, x] - self.costs[k, x, w]
                 + self.costs[k, y, x] + self.costs[k, x, z] - self.costs[k, y, z])
            self.e_ka = k
            self.e_kb = k
            return d
        y = self.seq[b, t]
        z = self.seq[b, t + 1]
        for k in range(self.m):
            if LA > 1:
                self.cA[k] = (self.fixed[k] + self.pc[a, k, LA + 1] + self.costs[k, u, w]
                              - self.costs[k, u, x] - self.costs[k, x, w])
            else:
                self.cA[k] = 0.0
            self.sA[k] = self.psite[a, k, LA] - self.bad[x, k]
            self.cB[k] = (self.fixed[k] + self.pc[b, k, LB + 1] - self.costs[k, y, z]
                          + self.costs[k, y, x] + self.costs[k, x, z])
            self.sB[k] = self.psite[b, k, LB] + self.bad[x, k]
        lb = self._pair_bound(a, b, LA - 1, LB + 1)
        if lb >= bound:
            return INF
        self.n_evals += 1
        loadA = self._load_mod(a, x, 0, LA - 1)
        loadB = self._load_mod(b, 0, x, LB + 1)
        return self._finish_pair(a, b, LA - 1, LB + 1, loadA, loadB)

    @cython.cfunc
    @cython.exceptval(check=False)
    def _ev_exchange(self, a: cython.int, p: cython.int, b: cython.int, q: cython.int,
                     bound: cython.double) -> cython.double:
        k: cython.int
        LA: cython.int = self.lens[a]
        LB: cython.int = self.lens[b]
        x: cython.int = self.seq[a, p]
        u: cython.int = self.seq[a, p - 1]
        w: cython.int = self.seq[a, p + 1]
        y: cython.int = self.seq[b, q]
        r: cython.int = self.seq[b, q - 1]
        z: cython.int = self.seq[b, q + 1]
        lb: cython.double
        loadA: cython.double
        loadB: cython.double
        self.e_newinf = 0
        self.e_feas = 1
        if a == b:
            k = self.rtype[a]
            self.e_ka = k
            self.e_kb = k
            if q == p + 1:
                return (self.costs[k, u, y] + self.costs[k, x, z]
                        - self.costs[k, u, x] - self.costs[k, y, z])
            return (self.costs[k, u, y] + self.costs[k, y, w] + self.costs[k, r, x] + self.costs[k, x, z]
                    - self.costs[k, u, x] - self.costs[k, x, w] - self.costs[k, r, y] - self.costs[k, y, z])
        for k in range(self.m):
            self.cA[k] = (self.fixed[k] + self.pc[a, k, LA + 1] + self.costs[k, u, y] + self.costs[k, y, w]
                          - self.costs[k, u, x] - self.costs[k, x, w])
            self.sA[k] = self.psite[a, k, LA] - self.bad[x, k] + self.bad[y, k]
            self.cB[k] = (self.fixed[k] + self.pc[b, k, LB + 1] + self.costs[k, r, x] + self.costs[k, x, z]
                          - self.costs[k, r, y] - self.costs[k, y, z])
            self.sB[k] = self.psite[b, k, LB] - self.bad[y, k] + self.bad[x, k]
        lb = self._pair_bound(a, b, LA, LB)
        if lb >= bound:
            return INF
        self.n_evals += 1
        loadA = self._load_mod(a, x, y, LA)
        loadB = self._load_mod(b, y, x, LB)
        return self._finish_pair(a, b, LA, LB, loadA, loadB)

    @cython.cfunc
    @cython.exceptval(check=False)
    def _ev_two_opt(self, a: cython.int, p: cython.int, b: cython.int, q: cython.int,
                    bound: cython.double) -> cython.double:
        k: cython.int
        LA: cython.int = self.lens[a]
        LB: cython.int = self.lens[b]
        nA: cython.int
        nB: cython.int
        u: cython.int
        w: cython.int
        r: cython.int
        z: cython.int
        lb: cython.double
        loadA: cython.double
        loadB: cython.double
        self.e_newinf = 0
        self.e_feas = 1
        if a == b:
            # reverse positions p..q
            k = self.rtype[a]
            self.e_ka = k
            self.e_kb = k
            u = self.seq[a, p - 1]
            w = self.seq[a, p]
            r = self.seq[a, q]
            z = self.seq[a, q + 1]
            return self.costs[k, u, r] + self.costs[k, w, z] - self.costs[k, u, w] - self.costs[k, r, z]
        # a keeps its first p customers then takes b's tail after q, and vice versa
        nA = p + LB - q
        nB = q + LA - p
        u = self.seq[a, p]
        w = self.seq[a, p + 1]
        r = self.seq[b, q]
        z = self.seq[b, q + 1]
        for k in range(self.m):
            if nA > 0:
                self.cA[k] = (self.fixed[k] + self.pc[a, k, p] + self.costs[k, u, z]
                              + self.pc[b, k, LB + 1] - self.pc[b, k, q + 1])
            else:
                self.cA[k] = 0.0
            if nB > 0:
                self.cB[k] = (self.fixed[k] + self.pc[b, k, q] + self.costs[k, r, w]
                              + self.pc[a, k, LA + 1] - self.pc[a, k, p + 1])
            else:
                self.cB[k] = 0.0
            self.sA[k] = self.psite[a, k, p] + self.psite[b, k, LB] - self.psite[b, k, q]
            self.sB[k] = self.psite[b, k, q] + self.psite[a, k, LA] - self.psite[a, k, p]
        lb = self._pair_bound(a, b, nA, nB)
        if lb >= bound:
            return INF
        self.n_evals += 1
        loadA = self._load_tails(a, p, b, q)
        loadB = self._load_tails(b, q, a, p)
        return self._finish_pair(a, b, nA, nB, loadA, loadB)

    def eval_move(self, kind, a, pa, b, pb):
        """Delta of one move without pruning; returns ``(delta, ka, kb, feasible)``."""
        d: cython.double
        if kind == RELOCATE:
            d = self._ev_relocate(a, pa, b, pb, INF)
        elif kind == EXCHANGE:
            d = self._ev_exchange(a, pa, b, pb, INF)
        else:
            d = self._ev_two_opt(a, pa, b, pb, INF)
        return d, self.e_ka, self.e_kb, bool(self.e_feas)

    # ------------------------------------------------------------------
    # neighbourhood scans
    # ------------------------------------------------------------------
    @cython.cfunc
    def _consider(self, kind: cython.int, a: cython.int, pa: cython.int, b: cython.int, pb: cython.int,
                  tabu: cython.int, cur: cython.double, best_pen: cython.double, best_inf: cython.int,
                  cur_inf: cython.int, feas_seen: cython.int, eps: cython.double) -> cython.int:
        """Evaluate one move and record it; returns 1 when the scan should stop."""
        bound: cython.double = self.mv_delta if self.mv_delta > -eps else -eps
        asp: cython.double
        d: cython.double
        newinf: cython.int
        if tabu and best_inf == 0:
            asp = best_pen - eps - cur
            if asp < bound:
                bound = asp
        if kind == RELOCATE:
            d = self._ev_relocate(a, pa, b, pb, bound)
        elif kind == EXCHANGE:
            d = self._ev_exchange(a, pa, b, pb, bound)
        else:
            d = self._ev_two_opt(a, pa, b, pb, bound)
        if d >= INF:
            return 0
        if feas_seen and not self.e_feas:
            return 0
        if tabu:
            newinf = 1 if cur_inf + self.e_newinf > 0 else 0
            if not (newinf < best_inf or (newinf == best_inf and cur + d < best_pen - eps)):
                return 0
        if d < -eps or d < self.mv_delta:
            self.mv_found = 1
            self.mv_kind = kind
            self.mv_a = a
            self.mv_pa = pa
            self.mv_b = b
            self.mv_pb = pb
            self.mv_ka = self.e_ka
            self.mv_kb = self.e_kb
            self.mv_delta = d
            if d < -eps:
                self.mv_improving = 1
                return 1
        return 0

    def scan(self, kind: cython.int, nslots: cython.int, flags, cur: cython.double,
             best_pen: cython.double, best_inf: cython.int, cur_inf: cython.int,
             feas_seen: cython.int, eps: cython.double):
        """Traverse one neighbourhood in lexicographic order.

        ``flags[c, h]`` marks moving customer ``c`` into slot ``h`` as tabu.
        Stops at the first admissible improving move; otherwise keeps the
        admissible move of smallest delta.  Returns True when a move was found.
        """
        fl: cython.uchar[:, ::1] = flags
        a: cython.int
        b: cython.int
        p: cython.int
        q: cython.int
        LA: cython.int
        LB: cython.int
        x: cython.int
        tabu: cython.int
        qlo: cython.int
        self.mv_found = 0
        self.mv_improving = 0
        self.mv_delta = INF
        for a in range(nslots):
            LA = self.lens[a]
            if kind == RELOCATE:
                for p in range(1, LA + 1):
                    x = self.seq[a, p]
                    for b in range(nslots):
                        LB = self.lens[b]
                        tabu = fl[x, b]
                        for q in range(0, LB + 1):
                            if b == a and (q == p or q == p - 1):
                                continue
                            if self._consider(kind, a, p, b, q, tabu, cur, best_pen, best_inf,
                                              cur_inf, feas_seen, eps):
                                return True
            elif kind == EXCHANGE:
                for p in range(1, LA + 1):
                    x = self.seq[a, p]
                    for b in range(a, nslots):
                        LB = self.lens[b]
                        qlo = p + 1 if b == a else 1
                        for q in range(qlo, LB + 1):
                            tabu = fl[x, b] | fl[self.seq[b, q], a]
                            if self._consider(kind, a, p, b, q, tabu, cur, best_pen, best_inf,
                                              cur_inf, feas_seen, eps):
                                return True
            else:
                for p in range(0, LA + 1):
                    for b in range(a, nslots):
                        LB = self.lens[b]
                        if b == a:
                            if p == 0:
                                continue
                            for q in range(p + 1, LA + 1):
                                if p == 1 and q == LA:
                                    continue
                                tabu = fl[self.seq[a, p], a] | fl[self.seq[a, q], a]
                                if self._consider(kind, a, p, a, q, tabu, cur, best_pen, best_inf,
                                                  cur_inf, feas_seen, eps):
                                    return True
                        else:
                            for q in range(0, LB + 1):
                                if (p == 0 and q == 0) or (p == LA and q == LB):
                                    continue
                                tabu = 0
                                if p < LA:
                                    tabu |= fl[self.seq[a, p + 1], b]
                                if q < LB:
                                    tabu |= fl[self.seq[b, q + 1], a]
                                if self._consider(kind, a, p, b, q, tabu, cur, best_pen, best_inf,
                                                  cur_inf, feas_seen, eps):
                                    return True
        return bool(self.mv_found)

    def selected(self):
        return (self.mv_kind, self.mv_a, self.mv_pa, self.mv_b, self.mv_pb,
                self.mv_ka, self.mv_kb, self.mv_delta, bool(self.mv_improving))

    def evaluations(self):
        return self.n_evals
