"""Independent certification of plans, profit accounting, the exhaustive
tiny-instance oracle, and Monte-Carlo lateness reporting.

Certification never touches the recursive label scheme: robustness is checked
through the brute-force adversary, so solver and certifier share no
worst-case-schedule code path.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import InfeasibleInstance, InvalidPlan, TooLarge
from .master import weekly_column, empty_routed_day
from .model import Instance, day_patterns
from .plan import Plan, plan_from_columns
from .robust_time import adversarial_oracle
from .rtsptw import RoutedDay

ENUM_LIMIT = 1_000_000


# -- validation ---------------------------------------------------------------


def validate_plan(plan: Plan, inst: Instance):
    """Check constraints (2)-(10) plus the daily patient limit, independently
    of the solver. Returns a list of (constraint, message); empty means valid.
    """
    v = []
    seen_kd = set()
    visits = {}  # pid -> list of (caregiver, day)
    for r in plan.routes:
        if r.caregiver not in inst.caregiver_index:
            v.append(("9", f"unknown caregiver {r.caregiver}"))
            continue
        if (r.caregiver, r.day) in seen_kd:
            v.append(("9", f"two routes for {r.caregiver} on {inst.days[r.day]}"))
            continue
        seen_kd.add((r.caregiver, r.day))
        k = inst.caregiver_index[r.caregiver]
        if inst.arrays.wlo[k, r.day] < 0 and r.route:
            v.append(("3", f"{r.caregiver} does not work on {inst.days[r.day]}"))
            continue
        if len(set(r.route)) != len(r.route):
            v.append(("9", f"duplicate visit in route of {r.caregiver} on {inst.days[r.day]}"))
            continue
        unknown = [pid for pid in r.route if pid not in inst.patient_index]
        if unknown:
            v.append(("9", f"unknown patients {unknown}"))
            continue
        if len(r.route) > inst.max_patients_per_caregiver_day:
            v.append(
                ("n_k", f"{r.caregiver} visits {len(r.route)} patients on {inst.days[r.day]}")
            )
        for pid in r.route:
            visits.setdefault(pid, []).append((r.caregiver, r.day))
            if not inst.compatible(pid, r.caregiver, r.day):
                v.append(("7", f"{pid} incompatible with {r.caregiver} on {inst.days[r.day]}"))
        if r.route:
            worst, ret = adversarial_oracle(r.route, r.day, r.caregiver, inst)
            for pid, start in worst.items():
                hi = inst.patient(pid).windows[r.day].hi
                if start > hi:
                    v.append(
                        ("2", f"worst start {start} of {pid} exceeds window end {hi}")
                    )
            whi = inst.caregiver(r.caregiver).work_windows[inst.days[r.day]].hi
            if ret > whi:
                v.append(("3", f"worst return {ret} of {r.caregiver} exceeds shift end {whi}"))

    for pid, where in visits.items():
        p = inst.patient(pid)
        caregivers = {c for c, _ in where}
        if len(caregivers) > 1:
            v.append(("5", f"{pid} split across caregivers {sorted(caregivers)}"))
        if len(where) != p.visits_required:
            v.append(
                ("4", f"{pid} visited {len(where)} times, requires {p.visits_required}")
            )
        days = sorted(d for _, d in where)
        if len(days) != len(set(days)):
            v.append(("8", f"{pid} visited twice on one day"))
        elif any(b - a < p.min_gap_days + 1 for a, b in zip(days, days[1:])):
            v.append(("8", f"visit days {days} of {pid} violate the minimum gap"))

    for p in inst.patients:
        if p.preassignment is None:
            continue
        cid, day_labels = p.preassignment
        want = {(cid, inst.day_index[lbl]) for lbl in day_labels}
        got = set(visits.get(p.id, []))
        if got != want:
            v.append(("6", f"{p.id} not served on the pre-assigned (caregiver, days)"))
    return v


@dataclass(frozen=True)
class ProfitBreakdown:
    revenue: int
    travel_cost: int
    wage_cost: int
    profit: int


def profit(plan: Plan, inst: Instance, validate: bool = True) -> ProfitBreakdown:
    """Recompute the profit split from scratch; worst-case return times come
    from the adversary, not from the solver's labels."""
    if validate:
        violations = validate_plan(plan, inst)
        if violations:
            raise InvalidPlan(f"plan is invalid: {violations[:3]}")
    arr = inst.arrays
    revenue = travel = wage = 0
    for r in plan.routes:
        k = inst.caregiver_index[r.caregiver]
        idx = [inst.patient_index[pid] for pid in r.route]
        revenue += int(sum(arr.revenue[k, i] for i in idx))
        hops = [0] + idx + [inst.n + 1]
        travel += int(sum(arr.cost[r.day, a, b] for a, b in zip(hops, hops[1:])))
        if r.route:
            _, ret = adversarial_oracle(r.route, r.day, r.caregiver, inst)
            wage += int(arr.wage[k]) * (ret - int(arr.wlo[k, r.day]))
    return ProfitBreakdown(
        revenue=revenue,
        travel_cost=travel,
        wage_cost=wage,
        profit=revenue - travel - wage,
    )


# -- exhaustive oracle --------------------------------------------------------


def brute_route(pids, day: int, caregiver: str, inst: Instance):
    """Optimal route over a fixed set by full permutation enumeration."""
    arr = inst.arrays
    k = inst.caregiver_index[caregiver]
    if arr.wlo[k, day] < 0:
        return empty_routed_day(caregiver, day) if not pids else None
    idx = sorted(inst.patient_index[p] for p in pids)
    res = kernels.tsp_brute(
        np.asarray(idx, dtype=np.int64),
        arr.tbar,
        arr.that,
        arr.pbar,
        arr.phat,
        arr.tlo[day],
        arr.thi[day],
        int(arr.wlo[k, day]),
        int(arr.whi[k, day]),
        arr.cost[day],
        int(arr.wage[k]),
        arr.gamma_p,
        arr.gamma_t,
        arr.lex_rank,
    )
    if res is None:
        return None
    order, travel, ret = res
    by_index = {inst.patient_index[p]: p for p in pids}
    route = tuple(by_index[int(i)] for i in order)
    return RoutedDay(
        caregiver=caregiver,
        day=day,
        route=route,
        travel_cost=int(travel),
        wage_cost=int(arr.wage[k]) * (int(ret) - int(arr.wlo[k, day])),
        revenue=int(sum(arr.revenue[k, inst.patient_index[p]] for p in pids)),
        ret=int(ret),
        covered=frozenset(pids),
        labels=None,
    )


def exhaustive_solve(inst: Instance) -> Plan:
    """Global optimality oracle: enumerate every acceptance, assignment and
    day-pattern combination and route each daily set by permutation
    enumeration. Only viable for tiny instances."""
    n_days = len(inst.days)
    arr = inst.arrays
    new_patients = [p for p in inst.patients if p.is_new]

    options = []
    for p in new_patients:
        opts = [None]
        for c in inst.caregivers:
            k = inst.caregiver_index[c.id]
            i = inst.patient_index[p.id]
            ok = {d for d in range(n_days) if arr.wlo[k, d] >= 0 and arr.compat[k, d, i]}
            for D in day_patterns(p, n_days):
                if set(D) <= ok:
                    opts.append((c.id, D))
        options.append(opts)

    total = 1
    for opts in options:
        total *= len(opts)
        if total > ENUM_LIMIT:
            raise TooLarge(f"more than {ENUM_LIMIT} combinations")

    base_sets = {
        (c.id, d): frozenset(inst.existing_by_kd[(c.id, d)])
        for c in inst.caregivers
        for d in range(n_days)
    }
    memo: dict = {}

    def routed(cid: str, d: int, pids: frozenset):
        key = (cid, d, pids)
        if key not in memo:
            memo[key] = brute_route(pids, d, cid, inst)
        return memo[key]

    best_cols = None
    best_profit = None
    for combo in itertools.product(*options):
        sets = {kd: set(pids) for kd, pids in base_sets.items()}
        ok = True
        for p, choice in zip(new_patients, combo):
            if choice is None:
                continue
            cid, D = choice
            for d in D:
                sets[(cid, d)].add(p.id)
                if len(sets[(cid, d)]) > inst.max_patients_per_caregiver_day:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        value = 0
        cols = {}
        for c in inst.caregivers:
            per_day = {}
            for d in range(n_days):
                r = routed(c.id, d, frozenset(sets[(c.id, d)]))
                if r is None:
                    ok = False
                    break
                per_day[d] = r
                value += r.value
            if not ok:
                break
            cols[c.id] = per_day
        if not ok:
            continue
        if best_profit is None or value > best_profit:
            best_profit = value
            best_cols = cols

    if best_cols is None:
        raise InfeasibleInstance("no combination admits a robust schedule")
    columns = {cid: weekly_column(inst, cid, per_day) for cid, per_day in best_cols.items()}
    return plan_from_columns(inst, columns)


# -- simulation ---------------------------------------------------------------


@dataclass
class SimulationResult:
    samples: int
    rows: list  # per-scenario aggregates
    late_visits: int
    total_lateness: int
    max_lateness: int
    overtime_days: int
    total_overtime: int
    max_overtime: int

    CSV_HEADER = (
        "scenario,late_visits,total_lateness,max_lateness,"
        "overtime_days,total_overtime,max_overtime"
    )


def simulate(
    plan: Plan, inst: Instance, samples: int, seed: int, deviation_prob: float = 0.2
) -> SimulationResult:
    """Draw delay scenarios inside the uncertainty budgets and measure
    lateness beyond the window ends and overtime beyond the shift ends.

    Each service and arc independently takes its full deviation with the
    given probability; draws exceeding a budget are thinned to a uniform
    random subset of budget size. For a valid plan every in-budget scenario
    is served on time by construction.
    """
    violations = validate_plan(plan, inst)
    if violations:
        raise InvalidPlan(f"plan is invalid: {violations[:3]}")
    arr = inst.arrays
    rng = random.Random(seed)
    gp, gt = inst.budgets.gamma_p, inst.budgets.gamma_t

    rows = []
    agg = dict(late=0, tl=0, ml=0, od=0, to=0, mo=0)
    for s in range(samples):
        late = tlate = mlate = odays = tover = mover = 0
        for r in plan.routes:
            if not r.route:
                continue
            k = inst.caregiver_index[r.caregiver]
            idx = [inst.patient_index[pid] for pid in r.route]
            L = len(idx)
            svc = [p for p in range(L) if rng.random() < deviation_prob]
            arcs = [a for a in range(L + 1) if rng.random() < deviation_prob]
            if len(svc) > gp:
                svc = sorted(rng.sample(svc, gp))
            if len(arcs) > gt:
                arcs = sorted(rng.sample(arcs, gt))
            svc_set, arc_set = set(svc), set(arcs)
            hops = [0] + idx + [inst.n + 1]
            t = int(arr.wlo[k, r.day])
            for p in range(L):
                t += int(arr.tbar[hops[p], hops[p + 1]])
                if p in arc_set:
                    t += int(arr.that[hops[p], hops[p + 1]])
                t = max(t, int(arr.tlo[r.day, idx[p]]))
                lateness = max(0, t - int(arr.thi[r.day, idx[p]]))
                if lateness:
                    late += 1
                    tlate += lateness
                    mlate = max(mlate, lateness)
                t += int(arr.pbar[idx[p]])
                if p in svc_set:
                    t += int(arr.phat[idx[p]])
            t += int(arr.tbar[idx[-1], inst.n + 1])
            if L in arc_set:
                t += int(arr.that[idx[-1], inst.n + 1])
            over = max(0, t - int(arr.whi[k, r.day]))
            if over:
                odays += 1
                tover += over
                mover = max(mover, over)
        rows.append((s, late, tlate, mlate, odays, tover, mover))
        agg["late"] += late
        agg["tl"] += tlate
        agg["ml"] = max(agg["ml"], mlate)
        agg["od"] += odays
        agg["to"] += tover
        agg["mo"] = max(agg["mo"], mover)

    return SimulationResult(
        samples=samples,
        rows=rows,
        late_visits=agg["late"],
        total_lateness=agg["tl"],
        max_lateness=agg["ml"],
        overtime_days=agg["od"],
        total_overtime=agg["to"],
        max_overtime=agg["mo"],
    )
