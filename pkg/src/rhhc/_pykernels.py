"""Pure-Python fallback for the hot kernels in ``_kernels.pyx``.

Semantics are identical to the compiled module; this one is only selected
when the extension is unavailable (or forced via RHHC_PURE_PYTHON=1).
"""

from __future__ import annotations

import itertools

import numpy as np

BACKEND = "python"


def _as_lists(*arrays):
    return tuple(a.tolist() for a in arrays)


def start_table(route, tbar, that, pbar, phat, tlo, thi, wlo, gamma_p, gamma_t):
    """Worst-case start times along a fixed route.

    State (a, b) of position p holds the worst start over scenarios where at
    most ``a`` service and ``b`` travel deviations hit the prefix ending at p.
    Starts clamp up to the window opening (waiting). Returns the full table
    with budgets clamped to the route length, plus the worst depot return.
    """
    route = list(route)
    L = len(route)
    tbar, that, pbar, phat, tlo, thi = _as_lists(tbar, that, pbar, phat, tlo, thi)
    gp = min(int(gamma_p), L)
    gt = min(int(gamma_t), L + 1)
    wlo = int(wlo)
    n1 = len(tbar) - 1  # depot return index

    starts = [[[0] * (gt + 1) for _ in range(gp + 1)] for _ in range(L)]
    first = route[0]
    for a in range(gp + 1):
        for b in range(gt + 1):
            dev = that[0][first] if b >= 1 else 0
            starts[0][a][b] = max(tlo[first], wlo + tbar[0][first] + dev)
    for p in range(1, L):
        prev, cur = route[p - 1], route[p]
        svc, svd = pbar[prev], phat[prev]
        trv, trd = tbar[prev][cur], that[prev][cur]
        for a in range(gp + 1):
            for b in range(gt + 1):
                best = tlo[cur]
                for zp in (0, 1):
                    if zp > a:
                        break
                    for zt in (0, 1):
                        if zt > b:
                            break
                        v = starts[p - 1][a - zp][b - zt] + svc + zp * svd + trv + zt * trd
                        if v > best:
                            best = v
                starts[p][a][b] = best

    last = route[-1]
    ret = wlo
    for zp in (0, 1):
        if zp > gp:
            break
        for zt in (0, 1):
            if zt > gt:
                break
            v = (
                starts[L - 1][gp - zp][gt - zt]
                + pbar[last]
                + zp * phat[last]
                + tbar[last][n1]
                + zt * that[last][n1]
            )
            if v > ret:
                ret = v
    return np.asarray(starts, dtype=np.int64), int(ret)


def oracle_worst(route, tbar, that, pbar, phat, tlo, thi, wlo, gamma_p, gamma_t):
    """Exhaustive adversary: enumerate every binary deviation scenario within
    the budgets, simulate the schedule forward with waiting, and return the
    per-position maximum start plus the maximum depot return."""
    route = list(route)
    L = len(route)
    tbar, that, pbar, phat, tlo, thi = _as_lists(tbar, that, pbar, phat, tlo, thi)
    gp = min(int(gamma_p), L)
    gt = min(int(gamma_t), L + 1)
    wlo = int(wlo)
    n1 = len(tbar) - 1

    worst = [0] * L
    worst_ret = wlo
    svc_sets = [
        set(c) for size in range(gp + 1) for c in itertools.combinations(range(L), size)
    ]
    arc_sets = [
        set(c) for size in range(gt + 1) for c in itertools.combinations(range(L + 1), size)
    ]
    for sp in svc_sets:
        for st in arc_sets:
            t = wlo + tbar[0][route[0]] + (that[0][route[0]] if 0 in st else 0)
            for p in range(L):
                cur = route[p]
                if p > 0:
                    prev = route[p - 1]
                    t += pbar[prev] + (phat[prev] if (p - 1) in sp else 0)
                    t += tbar[prev][cur] + (that[prev][cur] if p in st else 0)
                t = max(t, tlo[cur])
                if t > worst[p]:
                    worst[p] = t
            last = route[-1]
            t += pbar[last] + (phat[last] if (L - 1) in sp else 0)
            t += tbar[last][n1] + (that[last][n1] if L in st else 0)
            if t > worst_ret:
                worst_ret = t
    return np.asarray(worst, dtype=np.int64), int(worst_ret)


def _ret_from_layer(layer, last, pbar, phat, tbar, that, gp, gt, wlo, n1):
    ret = wlo
    for zp in (0, 1):
        if zp > gp:
            break
        for zt in (0, 1):
            if zt > gt:
                break
            v = (
                layer[gp - zp][gt - zt]
                + pbar[last]
                + zp * phat[last]
                + tbar[last][n1]
                + zt * that[last][n1]
            )
            if v > ret:
                ret = v
    return ret


def tsp_search(
    patients, tbar, that, pbar, phat, tlo, thi, wlo, whi, dcost, wage, gamma_p, gamma_t, lex_rank
):
    """Exact branch-and-bound over orderings of ``patients``.

    Minimizes travel cost + wage * (worst return - shift start) subject to
    robust window feasibility. Ties on cost break toward the sequence that is
    lexicographically smallest in patient-id rank. Returns
    (order, travel_cost, ret) or None when no ordering is feasible.
    """
    pats = sorted(patients, key=lambda i: lex_rank[i])
    m = len(pats)
    tbar_l, that_l, pbar_l, phat_l, tlo_l, thi_l, dcost_l, rank_l = _as_lists(
        tbar, that, pbar, phat, tlo, thi, dcost, lex_rank
    )
    wlo, whi, wage = int(wlo), int(whi), int(wage)
    if m == 0:
        return np.asarray([], dtype=np.int64), 0, wlo
    gp = min(int(gamma_p), m)
    gt = min(int(gamma_t), m + 1)
    n1 = len(tbar_l) - 1

    minc = {}
    mint = {}
    for i in pats:
        sources = [0] + [j for j in pats if j != i]
        minc[i] = min(dcost_l[j][i] for j in sources)
        mint[i] = min(tbar_l[j][i] for j in sources)
    minc_ret = min(dcost_l[i][n1] for i in pats)
    mint_ret = min(tbar_l[i][n1] for i in pats)

    best = {"cost": None, "seq": None, "travel": 0, "ret": 0}
    order_key = lambda seq: tuple(rank_l[i] for i in seq)

    def extend_layer(layer, prev, cur):
        svc, svd = pbar_l[prev], phat_l[prev]
        trv, trd = tbar_l[prev][cur], that_l[prev][cur]
        out = [[0] * (gt + 1) for _ in range(gp + 1)]
        lo = tlo_l[cur]
        for a in range(gp + 1):
            for b in range(gt + 1):
                bestv = lo
                for zp in (0, 1):
                    if zp > a:
                        break
                    for zt in (0, 1):
                        if zt > b:
                            break
                        v = layer[a - zp][b - zt] + svc + zp * svd + trv + zt * trd
                        if v > bestv:
                            bestv = v
                out[a][b] = bestv
        return out

    def dfs(seq, layer, travel):
        remaining = [i for i in pats if i not in seq]
        last = seq[-1]
        if not remaining:
            ret = _ret_from_layer(layer, last, pbar_l, phat_l, tbar_l, that_l, gp, gt, wlo, n1)
            if ret > whi:
                return
            total = travel + dcost_l[last][n1] + wage * (ret - wlo)
            if (
                best["cost"] is None
                or total < best["cost"]
                or (total == best["cost"] and order_key(seq) < order_key(best["seq"]))
            ):
                best.update(cost=total, seq=list(seq), travel=travel + dcost_l[last][n1], ret=ret)
            return
        t_lb = (
            layer[gp][gt]
            + pbar_l[last]
            + sum(mint[i] + pbar_l[i] for i in remaining)
            + mint_ret
        )
        if t_lb > whi:
            return
        cost_lb = travel + sum(minc[i] for i in remaining) + minc_ret + wage * (t_lb - wlo)
        if best["cost"] is not None and cost_lb > best["cost"]:
            return
        cands = sorted(remaining, key=lambda i: (thi_l[i], rank_l[i]))
        for x in cands:
            nl = extend_layer(layer, last, x)
            if nl[gp][gt] > thi_l[x]:
                continue
            dfs(seq + [x], nl, travel + dcost_l[last][x])

    for x in sorted(pats, key=lambda i: (thi_l[i], rank_l[i])):
        base = [
            [
                max(tlo_l[x], wlo + tbar_l[0][x] + (that_l[0][x] if b >= 1 else 0))
                for b in range(gt + 1)
            ]
            for _ in range(gp + 1)
        ]
        if base[gp][gt] > thi_l[x]:
            continue
        dfs([x], base, dcost_l[0][x])

    if best["cost"] is None:
        return None
    return np.asarray(best["seq"], dtype=np.int64), int(best["travel"]), int(best["ret"])


def knap_dp(vbars, loads, cap_n, cap_w):
    """Suffix knapsack tables; see _kernels.knap_dp."""
    f = len(vbars)
    dp = np.zeros((f + 1, cap_n + 1, cap_w + 1))
    for t in range(f - 1, -1, -1):
        dp[t] = dp[t + 1]
        if vbars[t] > 0 and loads[t] <= cap_w and cap_n >= 1:
            np.maximum(
                dp[t, 1:, loads[t]:],
                dp[t + 1, :-1, : cap_w + 1 - loads[t]] + vbars[t],
                out=dp[t, 1:, loads[t]:],
            )
    return dp


def price_walk(order, vbars, loads, pen, cap_n, cap_w, base, u_d, tol,
               forced_mask, dp, mask_values, evaluate,
               dp2, vbars2, anchors, base2, wage, wlo, whi, anchor0,
               loads_true, load_mand, quantum):
    """Reference twin of the compiled pricing walk; see _kernels.price_walk."""
    order = list(order)
    vb = list(vbars)
    vb2 = list(vbars2)
    anc = list(anchors)
    ld = list(loads)
    ldt = list(loads_true)
    pen = list(pen)
    dp_l = dp.tolist()
    dp2_l = dp2.tolist()
    f = len(order)
    tried = set()

    def run(t, used_n, used_w, prefix, prefix2, anchor, used_true, mask):
        if anchor > whi:
            return -1
        rn, rw = cap_n - used_n, cap_w - used_w
        bound = base + prefix + dp_l[t][rn][rw]
        if bound > u_d + tol:
            floor_m = anchor - wlo
            row = dp2_l[t][rn]
            joint = max(
                row[w2] - wage * max(load_mand + used_true + w2 * quantum, floor_m)
                for w2 in range(rw + 1)
            )
            bound = min(bound, base2 + prefix2 + joint)
        if bound <= u_d + tol:
            return -1
        c, w, sel = cap_n - used_n, cap_w - used_w, mask
        for s in range(t, f):
            if vb[s] > 0 and c >= 1 and w >= ld[s] and dp_l[s + 1][c - 1][w - ld[s]] + vb[s] > dp_l[s + 1][c][w]:
                sel |= 1 << s
                c -= 1
                w -= ld[s]
        full = forced_mask
        for s in range(f):
            if sel >> s & 1:
                full |= 1 << order[s]
        if full not in tried:
            tried.add(full)
            val = mask_values.get(full)
            if val is None:
                val = evaluate(full)
                mask_values[full] = val
            if val > -1e290:
                pen_sum = sum(pen[s] for s in range(len(pen)) if full >> s & 1)
                if val - pen_sum > u_d + tol:
                    return full
        if t == f:
            return -1
        if used_n + 1 <= cap_n and used_w + ld[t] <= cap_w:
            hit = run(t + 1, used_n + 1, used_w + ld[t], prefix + vb[t],
                      prefix2 + vb2[t], max(anchor, anc[t]), used_true + ldt[t],
                      mask | (1 << t))
            if hit != -1:
                return hit
        return run(t + 1, used_n, used_w, prefix, prefix2, anchor, used_true, mask)

    return run(0, 0, 0, 0.0, 0.0, anchor0, 0, 0)


def tsp_brute(
    patients, tbar, that, pbar, phat, tlo, thi, wlo, whi, dcost, wage, gamma_p, gamma_t, lex_rank
):
    """Reference enumeration over all permutations; same contract as tsp_search."""
    pats = sorted(patients, key=lambda i: lex_rank[i])
    m = len(pats)
    wlo_i, whi_i, wage_i = int(wlo), int(whi), int(wage)
    if m == 0:
        return np.asarray([], dtype=np.int64), 0, wlo_i
    n1 = tbar.shape[0] - 1
    gp = min(int(gamma_p), m)
    gt = min(int(gamma_t), m + 1)

    best = None
    for perm in itertools.permutations(pats):
        starts, ret = start_table(perm, tbar, that, pbar, phat, tlo, thi, wlo_i, gp, gt)
        if ret > whi_i:
            continue
        if any(starts[p][gp][gt] > thi[perm[p]] for p in range(m)):
            continue
        travel = int(dcost[0][perm[0]])
        for a, b in zip(perm, perm[1:]):
            travel += int(dcost[a][b])
        travel += int(dcost[perm[-1]][n1])
        total = travel + wage_i * (ret - wlo_i)
        key = (total, tuple(int(lex_rank[i]) for i in perm))
        if best is None or key < best[0]:
            best = (key, list(perm), travel, ret)
    if best is None:
        return None
    return np.asarray(best[1], dtype=np.int64), int(best[2]), int(best[3])
