# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: worst-case start-time tables, the exhaustive adversary,
and the exact route search. Semantics match ``_pykernels`` exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

ctypedef cnp.int64_t i64


cdef inline i64 _max(i64 a, i64 b) nogil:
    return a if a > b else b


cdef void _base_layer(i64[:, ::1] layer, int first, i64[:, ::1] tbar, i64[:, ::1] that,
                      i64[::1] tlo, i64 wlo, int gp, int gt) nogil:
    cdef int a, b
    cdef i64 v0 = _max(tlo[first], wlo + tbar[0, first])
    cdef i64 v1 = _max(tlo[first], wlo + tbar[0, first] + that[0, first])
    for a in range(gp + 1):
        layer[a, 0] = v0
        for b in range(1, gt + 1):
            layer[a, b] = v1


cdef void _extend_layer(i64[:, ::1] src, i64[:, ::1] dst, int prev, int cur,
                        i64[:, ::1] tbar, i64[:, ::1] that, i64[::1] pbar, i64[::1] phat,
                        i64[::1] tlo, int gp, int gt) nogil:
    cdef int a, b, zp, zt
    cdef i64 svc = pbar[prev], svd = phat[prev]
    cdef i64 trv = tbar[prev, cur], trd = that[prev, cur]
    cdef i64 lo = tlo[cur], best, v
    for a in range(gp + 1):
        for b in range(gt + 1):
            best = lo
            for zp in range(2):
                if zp > a:
                    break
                for zt in range(2):
                    if zt > b:
                        break
                    v = src[a - zp, b - zt] + svc + zp * svd + trv + zt * trd
                    if v > best:
                        best = v
            dst[a, b] = best


cdef i64 _ret_from_layer(i64[:, ::1] layer, int last, i64[::1] pbar, i64[::1] phat,
                         i64[:, ::1] tbar, i64[:, ::1] that, int gp, int gt,
                         i64 wlo, int n1) nogil:
    cdef i64 ret = wlo, v
    cdef int zp, zt
    for zp in range(2):
        if zp > gp:
            break
        for zt in range(2):
            if zt > gt:
                break
            v = (layer[gp - zp, gt - zt] + pbar[last] + zp * phat[last]
                 + tbar[last, n1] + zt * that[last, n1])
            if v > ret:
                ret = v
    return ret


def start_table(route, tbar, that, pbar, phat, tlo, thi, wlo, gamma_p, gamma_t):
    cdef cnp.ndarray[i64, ndim=1] r = np.ascontiguousarray(route, dtype=np.int64)
    cdef int L = r.shape[0]
    cdef i64[:, ::1] tb = np.ascontiguousarray(tbar, dtype=np.int64)
    cdef i64[:, ::1] th = np.ascontiguousarray(that, dtype=np.int64)
    cdef i64[::1] pb = np.ascontiguousarray(pbar, dtype=np.int64)
    cdef i64[::1] ph = np.ascontiguousarray(phat, dtype=np.int64)
    cdef i64[::1] lo = np.ascontiguousarray(tlo, dtype=np.int64)
    cdef int gp = min(int(gamma_p), L)
    cdef int gt = min(int(gamma_t), L + 1)
    cdef i64 w0 = int(wlo)
    cdef int n1 = tb.shape[0] - 1
    cdef cnp.ndarray[i64, ndim=3] starts = np.zeros((L, gp + 1, gt + 1), dtype=np.int64)
    cdef i64[:, :, ::1] s = starts
    cdef int p
    _base_layer(s[0], <int> r[0], tb, th, lo, w0, gp, gt)
    for p in range(1, L):
        _extend_layer(s[p - 1], s[p], <int> r[p - 1], <int> r[p], tb, th, pb, ph, lo, gp, gt)
    cdef i64 ret = _ret_from_layer(s[L - 1], <int> r[L - 1], pb, ph, tb, th, gp, gt, w0, n1)
    return starts, int(ret)


def oracle_worst(route, tbar, that, pbar, phat, tlo, thi, wlo, gamma_p, gamma_t):
    cdef cnp.ndarray[i64, ndim=1] r = np.ascontiguousarray(route, dtype=np.int64)
    cdef int L = r.shape[0]
    cdef i64[:, ::1] tb = np.ascontiguousarray(tbar, dtype=np.int64)
    cdef i64[:, ::1] th = np.ascontiguousarray(that, dtype=np.int64)
    cdef i64[::1] pb = np.ascontiguousarray(pbar, dtype=np.int64)
    cdef i64[::1] ph = np.ascontiguousarray(phat, dtype=np.int64)
    cdef i64[::1] lo = np.ascontiguousarray(tlo, dtype=np.int64)
    cdef int gp = min(int(gamma_p), L)
    cdef int gt = min(int(gamma_t), L + 1)
    cdef i64 w0 = int(wlo)
    cdef int n1 = tb.shape[0] - 1
    cdef cnp.ndarray[i64, ndim=1] worst = np.zeros(L, dtype=np.int64)
    cdef i64[::1] w = worst
    cdef i64 worst_ret = w0
    cdef unsigned int sp, st, full_p = 1u << L, full_t = 1u << (L + 1)
    cdef int p, prev, cur
    cdef i64 t
    for sp in range(full_p):
        if _popcount(sp) > gp:
            continue
        for st in range(full_t):
            if _popcount(st) > gt:
                continue
            cur = <int> r[0]
            t = w0 + tb[0, cur] + (th[0, cur] if (st & 1u) else 0)
            t = _max(t, lo[cur])
            if t > w[0]:
                w[0] = t
            for p in range(1, L):
                prev = cur
                cur = <int> r[p]
                t += pb[prev] + (ph[prev] if (sp >> (p - 1)) & 1u else 0)
                t += tb[prev, cur] + (th[prev, cur] if (st >> p) & 1u else 0)
                t = _max(t, lo[cur])
                if t > w[p]:
                    w[p] = t
            prev = cur
            t += pb[prev] + (ph[prev] if (sp >> (L - 1)) & 1u else 0)
            t += tb[prev, n1] + (th[prev, n1] if (st >> L) & 1u else 0)
            if t > worst_ret:
                worst_ret = t
    return worst, int(worst_ret)


cdef inline int _popcount(unsigned int x) nogil:
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


cdef struct SearchState:
    i64 best_cost
    i64 best_travel
    i64 best_ret
    int found


cdef void _tsp_dfs(int depth, int m, int last, i64 travel,
                   i64[:, :, ::1] layers, int[::1] seq, cnp.uint8_t[::1] visited,
                   int[::1] order, int[::1] best_seq, i64[::1] best_rank, i64[::1] cur_rank,
                   i64[:, ::1] tb, i64[:, ::1] th, i64[::1] pb, i64[::1] ph,
                   i64[::1] lo, i64[::1] hi, i64 wlo, i64 whi, i64[:, ::1] dc, i64 wage,
                   i64[::1] minc, i64[::1] mint, i64 minc_ret, i64 mint_ret,
                   i64[::1] rank, int gp, int gt, int n1, bint use_bounds,
                   SearchState* st) nogil:
    cdef int i, x, p
    cdef i64 ret, total, t_lb, cost_lb
    cdef bint better
    if depth == m:
        ret = _ret_from_layer(layers[depth - 1], last, pb, ph, tb, th, gp, gt, wlo, n1)
        if ret > whi:
            return
        total = travel + dc[last, n1] + wage * (ret - wlo)
        better = 0
        if not st.found or total < st.best_cost:
            better = 1
        elif total == st.best_cost:
            for p in range(m):
                if cur_rank[p] != best_rank[p]:
                    better = cur_rank[p] < best_rank[p]
                    break
        if better:
            st.found = 1
            st.best_cost = total
            st.best_travel = travel + dc[last, n1]
            st.best_ret = ret
            for p in range(m):
                best_seq[p] = seq[p]
                best_rank[p] = cur_rank[p]
        return
    if use_bounds:
        t_lb = layers[depth - 1, gp, gt] + pb[last] + mint_ret
        cost_lb = travel + minc_ret
        for i in range(m):
            x = order[i]
            if not visited[x]:
                t_lb += mint[x] + pb[x]
                cost_lb += minc[x]
        if t_lb > whi:
            return
        cost_lb += wage * (t_lb - wlo)
        if st.found and cost_lb > st.best_cost:
            return
    for i in range(m):
        x = order[i]
        if visited[x]:
            continue
        _extend_layer(layers[depth - 1], layers[depth], last, x, tb, th, pb, ph, lo, gp, gt)
        if layers[depth, gp, gt] > hi[x]:
            continue
        visited[x] = 1
        seq[depth] = x
        cur_rank[depth] = rank[x]
        _tsp_dfs(depth + 1, m, x, travel + dc[last, x], layers, seq, visited, order,
                 best_seq, best_rank, cur_rank, tb, th, pb, ph, lo, hi, wlo, whi, dc,
                 wage, minc, mint, minc_ret, mint_ret, rank, gp, gt, n1, use_bounds, st)
        visited[x] = 0


cdef _tsp_common(patients, tbar, that, pbar, phat, tlo, thi, wlo, whi, dcost, wage,
                 gamma_p, gamma_t, lex_rank, bint use_bounds):
    cdef i64[:, ::1] tb = np.ascontiguousarray(tbar, dtype=np.int64)
    cdef i64[:, ::1] th = np.ascontiguousarray(that, dtype=np.int64)
    cdef i64[::1] pb = np.ascontiguousarray(pbar, dtype=np.int64)
    cdef i64[::1] ph = np.ascontiguousarray(phat, dtype=np.int64)
    cdef i64[::1] lo = np.ascontiguousarray(tlo, dtype=np.int64)
    cdef i64[::1] hi = np.ascontiguousarray(thi, dtype=np.int64)
    cdef i64[:, ::1] dc = np.ascontiguousarray(dcost, dtype=np.int64)
    cdef i64[::1] rank = np.ascontiguousarray(lex_rank, dtype=np.int64)
    cdef i64 w0 = int(wlo), w1 = int(whi), wg = int(wage)

    pats = sorted(patients, key=lambda i: rank[i])
    cdef int m = len(pats)
    if m == 0:
        return np.asarray([], dtype=np.int64), 0, int(w0)
    cdef int gp = min(int(gamma_p), m)
    cdef int gt = min(int(gamma_t), m + 1)
    cdef int n1 = tb.shape[0] - 1
    cdef int n = tb.shape[0]

    cdef cnp.ndarray[i64, ndim=1] minc = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] mint = np.zeros(n, dtype=np.int64)
    cdef i64 minc_ret = 0, mint_ret = 0
    cdef i64 mc, mt, v
    cdef int i, j
    first = True
    for i in pats:
        mc, mt = dc[0, i], tb[0, i]
        for j in pats:
            if j != i:
                if dc[j, i] < mc:
                    mc = dc[j, i]
                if tb[j, i] < mt:
                    mt = tb[j, i]
        minc[i] = mc
        mint[i] = mt
        if first or dc[i, n1] < minc_ret:
            minc_ret = dc[i, n1]
        if first or tb[i, n1] < mint_ret:
            mint_ret = tb[i, n1]
        first = False

    # candidate order fixed by (window close, lexical rank)
    order_py = sorted(pats, key=lambda i: (hi[i], rank[i]))
    cdef cnp.ndarray[int, ndim=1] order = np.asarray(order_py, dtype=np.intc)
    cdef cnp.ndarray[i64, ndim=3] layers = np.zeros((m + 1, gp + 1, gt + 1), dtype=np.int64)
    cdef cnp.ndarray[int, ndim=1] seq = np.zeros(m, dtype=np.intc)
    cdef cnp.ndarray[int, ndim=1] best_seq = np.zeros(m, dtype=np.intc)
    cdef cnp.ndarray[i64, ndim=1] best_rank_arr = np.zeros(m, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] cur_rank = np.zeros(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] visited = np.zeros(n, dtype=np.uint8)

    cdef SearchState st
    st.found = 0
    st.best_cost = 0
    st.best_travel = 0
    st.best_ret = 0

    cdef i64[:, :, ::1] lv = layers
    cdef int[::1] ov = order
    cdef int x

    # seed the incumbent with the deadline-ordered route when feasible; it
    # only tightens pruning, never changes the optimum or tie-breaking
    cdef bint seed_ok = use_bounds
    cdef i64 seed_travel = 0
    cdef i64 seed_ret
    if seed_ok:
        for i in range(m):
            x = ov[i]
            if i == 0:
                _base_layer(lv[0], x, tb, th, lo, w0, gp, gt)
                seed_travel = dc[0, x]
            else:
                _extend_layer(lv[i - 1], lv[i], ov[i - 1], x, tb, th, pb, ph, lo, gp, gt)
                seed_travel += dc[ov[i - 1], x]
            if lv[i, gp, gt] > hi[x]:
                seed_ok = 0
                break
        if seed_ok:
            seed_ret = _ret_from_layer(lv[m - 1], ov[m - 1], pb, ph, tb, th, gp, gt, w0, n1)
            if seed_ret <= w1:
                st.found = 1
                st.best_cost = seed_travel + dc[ov[m - 1], n1] + wg * (seed_ret - w0)
                st.best_travel = seed_travel + dc[ov[m - 1], n1]
                st.best_ret = seed_ret
                for i in range(m):
                    best_seq[i] = ov[i]
                    best_rank_arr[i] = rank[ov[i]]

    for i in range(m):
        x = ov[i]
        _base_layer(lv[0], x, tb, th, lo, w0, gp, gt)
        if lv[0, gp, gt] > hi[x]:
            continue
        visited[x] = 1
        seq[0] = x
        cur_rank[0] = rank[x]
        _tsp_dfs(1, m, x, dc[0, x], lv, seq, visited, ov, best_seq, best_rank_arr,
                 cur_rank, tb, th, pb, ph, lo, hi, w0, w1, dc, wg, minc, mint,
                 minc_ret, mint_ret, rank, gp, gt, n1, use_bounds, &st)
        visited[x] = 0

    if not st.found:
        return None
    return best_seq.astype(np.int64), int(st.best_travel), int(st.best_ret)


def knap_dp(vbars, loads, cap_n, cap_w):
    """Suffix knapsack tables: dp[t, c, w] = best value-bound sum from
    candidates t.. using <= c picks of total workload <= w."""
    cdef double[::1] vb = np.ascontiguousarray(vbars, dtype=np.float64)
    cdef long[::1] ld = np.ascontiguousarray(loads, dtype=np.int64)
    cdef int f = vb.shape[0]
    cdef int cn = cap_n
    cdef long cw = cap_w
    cdef cnp.ndarray[double, ndim=3] out = np.zeros((f + 1, cn + 1, cw + 1))
    cdef double[:, :, ::1] dp = out
    cdef int t, c
    cdef long w, l
    cdef double v, cand
    for t in range(f - 1, -1, -1):
        dp[t] = dp[t + 1]
        v = vb[t]
        l = ld[t]
        if v > 0 and l <= cw:
            for c in range(1, cn + 1):
                for w in range(l, cw + 1):
                    cand = dp[t + 1, c - 1, w - l] + v
                    if cand > dp[t, c, w]:
                        dp[t, c, w] = cand
    return out


cdef class _Walk:
    cdef long[::1] order
    cdef double[::1] vb
    cdef long[::1] ld
    cdef double[::1] pen
    cdef double[:, :, ::1] dp
    cdef double[:, :, ::1] dp2
    cdef double[::1] vb2
    cdef long[::1] anchor
    cdef long[::1] ld_true
    cdef int f, capn
    cdef long capw, fmask, quantum, load_mand
    cdef double base, base2, ud, eps, wage
    cdef long wlo, whi
    cdef set tried
    cdef dict mask_values
    cdef object evaluate

    cdef long run(self, int t, int used_n, long used_w, double prefix, double prefix2,
                  long anch, long used_true, long mask):
        # every route here covers the mandatory and included patients, so its
        # worst return is at least the latest of their window anchors
        if anch > self.whi:
            return -1
        cdef int rn = self.capn - used_n
        cdef long rw = self.capw - used_w
        cdef double bound = self.base + prefix + self.dp[t, rn, rw]
        cdef double joint, v
        cdef long w2, floor_m, ls
        if bound > self.ud + self.eps:
            # joint bound: value <= sum(R - pen - minc) - wage*max(loads, floor)
            # scanned over the suffix knapsack's load levels
            floor_m = anch - self.wlo
            joint = -1e300
            for w2 in range(rw + 1):
                ls = self.load_mand + used_true + w2 * self.quantum
                if ls < floor_m:
                    ls = floor_m
                v = self.dp2[t, rn, w2] - self.wage * ls
                if v > joint:
                    joint = v
            joint += self.base2 + prefix2
            if joint < bound:
                bound = joint
        if bound <= self.ud + self.eps:
            return -1
        cdef int c = self.capn - used_n
        cdef long w = self.capw - used_w
        cdef long sel = mask
        cdef int s
        for s in range(t, self.f):
            if self.vb[s] > 0 and c >= 1 and w >= self.ld[s] and \
                    self.dp[s + 1, c - 1, w - self.ld[s]] + self.vb[s] > self.dp[s + 1, c, w]:
                sel |= (<long> 1) << s
                c -= 1
                w -= self.ld[s]
        cdef long full = self.fmask
        for s in range(self.f):
            if sel >> s & 1:
                full |= (<long> 1) << self.order[s]
        cdef double val, pen_sum
        if full not in self.tried:
            self.tried.add(full)
            obj = self.mask_values.get(full)
            if obj is None:
                obj = self.evaluate(full)
                self.mask_values[full] = obj
            val = obj
            if val > -1e290:
                pen_sum = 0.0
                for s in range(self.pen.shape[0]):
                    if full >> s & 1:
                        pen_sum += self.pen[s]
                if val - pen_sum > self.ud + self.eps:
                    return full
        if t == self.f:
            return -1
        cdef long hit, anch2
        if used_n + 1 <= self.capn and used_w + self.ld[t] <= self.capw:
            anch2 = self.anchor[t] if self.anchor[t] > anch else anch
            hit = self.run(t + 1, used_n + 1, used_w + self.ld[t],
                           prefix + self.vb[t], prefix2 + self.vb2[t], anch2,
                           used_true + self.ld_true[t], mask | ((<long> 1) << t))
            if hit != -1:
                return hit
        return self.run(t + 1, used_n, used_w, prefix, prefix2, anch, used_true, mask)


def price_walk(order, vbars, loads, pen, cap_n, cap_w, base, u_d, tol,
               forced_mask, dp, mask_values, evaluate,
               dp2, vbars2, anchors, base2, wage, wlo, whi, anchor0,
               loads_true, load_mand, quantum):
    """Depth-first accept/reject walk for day-level pricing.

    ``order`` maps walk position -> static candidate index (sorted by
    descending value bound); ``dp[t, c, w]`` is the knapsack relaxation over
    positions t..; selections are bitmasks over static candidate indices,
    memoized in ``mask_values`` (route value, or -inf when infeasible), with
    ``evaluate`` called on misses. Returns the first selection mask whose
    routed pricing value beats u_d, or -1 when the tree exhausts.
    """
    cdef _Walk wk = _Walk()
    wk.order = np.ascontiguousarray(order, dtype=np.int64)
    wk.vb = np.ascontiguousarray(vbars, dtype=np.float64)
    wk.ld = np.ascontiguousarray(loads, dtype=np.int64)
    wk.pen = np.ascontiguousarray(pen, dtype=np.float64)
    wk.dp = dp
    wk.dp2 = dp2
    wk.vb2 = np.ascontiguousarray(vbars2, dtype=np.float64)
    wk.anchor = np.ascontiguousarray(anchors, dtype=np.int64)
    wk.f = wk.order.shape[0]
    wk.capn = cap_n
    wk.capw = cap_w
    wk.fmask = forced_mask
    wk.base = base
    wk.base2 = base2
    wk.wage = wage
    wk.wlo = wlo
    wk.whi = whi
    wk.ud = u_d
    wk.eps = tol
    wk.ld_true = np.ascontiguousarray(loads_true, dtype=np.int64)
    wk.load_mand = load_mand
    wk.quantum = quantum
    wk.tried = set()
    wk.mask_values = mask_values
    wk.evaluate = evaluate
    return wk.run(0, 0, 0, 0.0, 0.0, anchor0, 0, 0)


def tsp_search(patients, tbar, that, pbar, phat, tlo, thi, wlo, whi, dcost, wage,
               gamma_p, gamma_t, lex_rank):
    return _tsp_common(patients, tbar, that, pbar, phat, tlo, thi, wlo, whi, dcost,
                       wage, gamma_p, gamma_t, lex_rank, True)


def tsp_brute(patients, tbar, that, pbar, phat, tlo, thi, wlo, whi, dcost, wage,
              gamma_p, gamma_t, lex_rank):
    return _tsp_common(patients, tbar, that, pbar, phat, tlo, thi, wlo, whi, dcost,
                       wage, gamma_p, gamma_t, lex_rank, False)
