"""Day-level pricing: generate an improving route for one (caregiver, day)
or prove that none exists.

The search is a branch-and-bound over accept/reject decisions for new
patients, guided by per-patient value bounds and a two-capacity knapsack
relaxation; accepted selections are routed exactly via the R-TSPTW solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .backend import kernels
from .errors import Incompatible
from .master import DualPrices2, pricing_penalty
from .model import Instance
from .rtsptw import RouteCache, RoutedDay, solve_rtsptw

IMPROVE_TOL = 1e-6

#: knapsack workloads are floored to this many minutes in the bound tables
_LOAD_QUANTUM = 8


@dataclass(frozen=True)
class PatientValueBound:
    patient: str
    vbar: float


@dataclass(frozen=True)
class KnapsackBound:
    value: float
    selection: frozenset  # chosen free candidates (mandatory patients excluded)


@dataclass(frozen=True)
class DayFixings:
    include: frozenset = frozenset()
    exclude: frozenset = frozenset()


@lru_cache(maxsize=None)
def _min_tables(inst: Instance, k: int):
    """Per-caregiver minima over potential neighbor locations I_k + depot:
    cheapest outgoing expected travel time and cheapest incoming travel cost."""
    arr = inst.arrays
    members = [0]
    for p in inst.patients:
        i = inst.patient_index[p.id]
        if p.is_new or (p.preassignment is not None and p.preassignment[0] == inst.caregivers[k].id):
            members.append(i)
    mtout = {}
    mtin = {}
    mcin = {}
    for i in range(1, arr.n + 1):
        sources = [j for j in members if j != i]
        mtout[i] = int(min(arr.tbar[i, j] for j in sources))
        mtin[i] = int(min(arr.tbar[j, i] for j in sources))
        for d in range(arr.n_days):
            mcin[(d, i)] = int(min(arr.cost[d, j, i] for j in sources))
    return mtout, mtin, mcin


def workload(pid: str, k: int, inst: Instance) -> int:
    """Lower bound on the time a visit occupies: min travel + expected service."""
    mtout, _, _ = _min_tables(inst, k)
    i = inst.patient_index[pid]
    return mtout[i] + int(inst.arrays.pbar[i])


def value_bound(
    pid: str, caregiver: str, day: int, duals2: DualPrices2, w_star: dict, inst: Instance
) -> float:
    """Upper bound on the value generated by one visit of ``pid`` on ``day``:
    revenue minus lower bounds on wage and travel cost, minus the dual
    penalties (new patients only)."""
    k = inst.caregiver_index[caregiver]
    arr = inst.arrays
    i = inst.patient_index[pid]
    if not arr.compat[k, day, i]:
        raise Incompatible(f"{pid} with {caregiver} on day {inst.days[day]}")
    mtout, _, mcin = _min_tables(inst, k)
    vbar = float(arr.revenue[k, i])
    vbar -= float(arr.wage[k]) * (mtout[i] + float(arr.pbar[i]))
    vbar -= mcin[(day, i)]
    if inst.patients[i - 1].is_new:
        vbar -= pricing_penalty(pid, day, duals2, w_star, inst)
    return vbar


def knapsack_bound(
    candidates, fixed_in, fixed_out, caregiver: str, day: int, inst: Instance
) -> Optional[KnapsackBound]:
    """Maximize the sum of value bounds subject to the workload and patient
    count capacities; mandatory patients (pre-assigned existing plus
    ``fixed_in``) are forced. Returns None when the mandatory set alone does
    not fit (the pricing node prunes)."""
    assert not (set(fixed_in) & set(fixed_out))
    k = inst.caregiver_index[caregiver]
    arr = inst.arrays
    existing = inst.existing_by_kd[(caregiver, day)]
    mandatory = list(existing) + sorted(set(fixed_in) - set(existing))

    by_pid = {c.patient: c for c in candidates}
    cap_n = arr.n_max - len(mandatory)
    span = int(arr.whi[k, day] - arr.wlo[k, day]) if arr.wlo[k, day] >= 0 else 0
    cap_w = span - sum(workload(pid, k, inst) for pid in mandatory)
    if cap_n < 0 or cap_w < 0:
        return None

    base = 0.0
    for pid in existing:
        base += _mandatory_vbar(pid, caregiver, day, inst)
    for pid in mandatory[len(existing):]:
        base += by_pid[pid].vbar if pid in by_pid else _mandatory_vbar(pid, caregiver, day, inst)

    items = [
        c
        for c in candidates
        if c.patient not in fixed_out and c.patient not in mandatory
    ]
    if not items or cap_n == 0:
        return KnapsackBound(value=base, selection=frozenset())

    # dp[c, w]: best value with <= c items of total load <= w; per-item take
    # masks allow reconstructing one maximizer (ties prefer not taking).
    items = sorted(items, key=lambda c: (-c.vbar, c.patient))
    loads = [workload(c.patient, k, inst) for c in items]
    dp = np.zeros((cap_n + 1, cap_w + 1))
    takes = []
    for item, load in zip(items, loads):
        if item.vbar <= 0 or load > cap_w:
            takes.append(None)
            continue
        shifted = dp[:-1, : cap_w + 1 - load] + item.vbar
        target = dp[1:, load:]
        take = shifted > target
        np.maximum(target, shifted, out=target)
        takes.append(take)
    best = float(dp[cap_n, cap_w])
    chosen = []
    c, w = cap_n, cap_w
    for idx in range(len(items) - 1, -1, -1):
        take = takes[idx]
        load = loads[idx]
        if take is not None and c >= 1 and w >= load and take[c - 1, w - load]:
            chosen.append(items[idx].patient)
            c -= 1
            w -= load
    return KnapsackBound(value=base + best, selection=frozenset(chosen))


def _mandatory_vbar(pid: str, caregiver: str, day: int, inst: Instance) -> float:
    """Value bound of a forced patient; dual penalties only apply to new
    patients priced as candidates, so this is the dual-free part."""
    k = inst.caregiver_index[caregiver]
    arr = inst.arrays
    i = inst.patient_index[pid]
    mtout, _, mcin = _min_tables(inst, k)
    v = float(arr.revenue[k, i]) - float(arr.wage[k]) * (mtout[i] + float(arr.pbar[i]))
    return v - mcin[(day, i)]


@lru_cache(maxsize=None)
def _day_static(inst: Instance, caregiver: str, day: int):
    """Dual-free per-(caregiver, day) pricing data: the fixed candidate list
    (new compatible patients, sorted by id; list position = mask bit), their
    static value parts and workloads, and the mandatory existing load/value."""
    arr = inst.arrays
    k = inst.caregiver_index[caregiver]
    existing = inst.existing_by_kd[(caregiver, day)]
    ex_value = sum(_mandatory_vbar(pid, caregiver, day, inst) for pid in existing)
    ex_load = sum(workload(pid, k, inst) for pid in existing)
    cand_ids = []
    for p in inst.patients:
        pid = p.id
        if not p.is_new or pid in existing:
            continue
        i = inst.patient_index[pid]
        if not arr.compat[k, day, i]:
            continue
        cand_ids.append(pid)
    cand_ids = tuple(sorted(cand_ids))
    base_vals = tuple(_mandatory_vbar(pid, caregiver, day, inst) for pid in cand_ids)
    loads = tuple(workload(pid, k, inst) for pid in cand_ids)
    span = int(arr.whi[k, day] - arr.wlo[k, day])
    ex_idx = tuple(inst.patient_index[pid] for pid in existing)
    cand_idx = tuple(inst.patient_index[pid] for pid in cand_ids)
    rev = tuple(int(arr.revenue[k, i]) for i in cand_idx)
    ex_rev = int(sum(arr.revenue[k, i] for i in ex_idx))

    # window anchors: a route visiting i cannot return before the window
    # opening plus service plus one outgoing leg (wage floor for the walk)
    mtout, mtin, _ = _min_tables(inst, k)
    wlo = int(arr.wlo[k, day]) if arr.wlo[k, day] >= 0 else 0

    def anchor(i: int) -> int:
        start = max(int(arr.tlo[day, i]), wlo + mtin[i])
        return start + int(arr.pbar[i]) + mtout[i]

    anchors = tuple(anchor(i) for i in cand_idx)
    anchor_ex = max([wlo] + [anchor(i) for i in ex_idx])
    return (
        frozenset(existing), ex_value, ex_load, cand_ids, base_vals, loads, span,
        ex_idx, cand_idx, rev, ex_rev, anchors, anchor_ex,
    )


def price_day(
    caregiver: str,
    day: int,
    duals2: DualPrices2,
    w_star: dict,
    fixings: DayFixings,
    inst: Instance,
    cache: RouteCache = None,
) -> Optional[RoutedDay]:
    """Search for a route whose pricing value exceeds the day dual u*_d.

    Candidate new patients with a nonpositive value bound are set aside first;
    if the positive-bound tree exhausts without an improving route they are
    branched on as well, so an absent answer is exact.
    """
    k = inst.caregiver_index[caregiver]
    arr = inst.arrays
    if arr.wlo[k, day] < 0:
        return None
    u_d = duals2.u[day]
    (existing, ex_value, ex_load, cand_ids, base_vals, loads, span,
     ex_idx, cand_idx, rev, ex_rev, anchors, anchor_ex) = _day_static(inst, caregiver, day)

    m = len(cand_ids)
    pen = np.zeros(m)
    forced_mask = 0
    forced_value = 0.0
    forced_load = 0
    free = []
    pen_table = duals2.pen
    for s, pid in enumerate(cand_ids):
        if pid in fixings.exclude:
            continue
        if pen_table is not None and (pid, day) in pen_table:
            pen[s] = pen_table[(pid, day)]
        else:
            pen[s] = pricing_penalty(pid, day, duals2, w_star, inst)
        vbar = base_vals[s] - pen[s]
        if pid in fixings.include:
            forced_mask |= 1 << s
            forced_value += vbar
            forced_load += loads[s]
        else:
            free.append((vbar, s))

    cap_n = arr.n_max - len(existing) - bin(forced_mask).count("1")
    cap_w = span - ex_load - forced_load
    if cap_n < 0 or cap_w < 0:
        return None
    base = ex_value + forced_value

    # positive value bounds lead; the nonpositive tail is only reached when
    # the promising subtrees exhaust, so an absent answer stays exact
    free.sort(key=lambda t: (-t[0], cand_ids[t[1]]))
    order = np.array([s for _, s in free], dtype=np.int64)
    vbars = np.array([v for v, _ in free])
    lds = np.array([loads[s] for _, s in free], dtype=np.int64)

    # workload quantization relaxes the knapsack capacity (floor sums never
    # exceed the floored capacity), keeping the bound valid while shrinking
    # the DP tables an order of magnitude
    lds_q = lds // _LOAD_QUANTUM
    cap_w_q = cap_w // _LOAD_QUANTUM
    dp = kernels.knap_dp(vbars, lds_q, cap_n, cap_w_q)

    wage_f = float(arr.wage[k])
    vbars2 = vbars + wage_f * lds
    dp2 = kernels.knap_dp(vbars2, lds_q, cap_n, cap_w_q)
    anchors_ord = np.array([anchors[s] for _, s in free], dtype=np.int64)
    base2 = base + wage_f * (ex_load + forced_load)
    anchor0 = anchor_ex
    for s, pid in enumerate(cand_ids):
        if pid in fixings.include and anchors[s] > anchor0:
            anchor0 = anchors[s]

    mask_values = cache.mask_table(caregiver, day) if cache is not None else {}
    wlo = int(arr.wlo[k, day])
    whi = int(arr.whi[k, day])
    wage = int(arr.wage[k])
    tlo_d = arr.tlo[day]
    thi_d = arr.thi[day]
    cost_d = arr.cost[day]

    def evaluate(full_mask: int) -> float:
        idx = list(ex_idx)
        value = ex_rev
        for s in range(m):
            if full_mask >> s & 1:
                idx.append(cand_idx[s])
                value += rev[s]
        res = kernels.tsp_search(
            np.asarray(idx, dtype=np.int64), arr.tbar, arr.that, arr.pbar, arr.phat,
            tlo_d, thi_d, wlo, whi, cost_d, wage, arr.gamma_p, arr.gamma_t, arr.lex_rank,
        )
        if res is None:
            return float("-inf")
        _, travel, ret = res
        return float(value - travel - wage * (ret - wlo))

    hit = kernels.price_walk(
        order, vbars, lds_q, pen, cap_n, cap_w_q, base, u_d, IMPROVE_TOL,
        forced_mask, dp, mask_values, evaluate,
        dp2, vbars2, anchors_ord, base2, wage_f, wlo, whi, anchor0,
        lds, ex_load + forced_load, _LOAD_QUANTUM,
    )
    if hit < 0:
        return None
    pids = set(existing)
    for s in range(m):
        if hit >> s & 1:
            pids.add(cand_ids[s])
    return solve_rtsptw(pids, day, caregiver, inst, cache)
