"""LP relaxations of the two restricted master problems and their duals.

Level 1 selects one weekly plan per caregiver subject to single-coverage of
new patients. Level 2, per caregiver, selects one route per day subject to
visit counts, the all-or-nothing linking rows, and the minimum-gap windows.
Branching decisions are enforced upstream by filtering the column pools, so
the duals keep their plain interpretation here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingInitialColumn
from .lp_core import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, solve_lp
from .model import Instance
from .rtsptw import RoutedDay


@dataclass(frozen=True)
class WeeklyColumn:
    """One caregiver's full weekly plan, as a level-1 column."""

    caregiver: str
    routes: tuple  # RoutedDay per day, aligned with Instance.days
    value: int  # cents: revenue - travel - wage over the week
    coverage: frozenset  # new patients served exactly visits_required times


def weekly_column(inst: Instance, caregiver: str, routes_by_day: dict) -> WeeklyColumn:
    """Assemble and sanity-check a weekly column from per-day routes."""
    routes = []
    visits: dict = {}
    for d in range(len(inst.days)):
        r = routes_by_day.get(d)
        if r is None:
            r = empty_routed_day(caregiver, d)
        assert r.day == d and r.caregiver == caregiver
        routes.append(r)
        for pid in r.covered:
            visits[pid] = visits.get(pid, 0) + 1
    coverage = set()
    for pid, count in visits.items():
        p = inst.patient(pid)
        if not p.is_new:
            continue
        assert count == p.visits_required, f"{pid}: {count} visits != {p.visits_required}"
        days = sorted(d for d, r in enumerate(routes) if pid in r.covered)
        assert all(b - a >= p.min_gap_days + 1 for a, b in zip(days, days[1:]))
        coverage.add(pid)
    for (cid, d), pids in inst.existing_by_kd.items():
        if cid == caregiver:
            assert set(pids) <= set(routes[d].covered)
    value = sum(r.value for r in routes)
    return WeeklyColumn(
        caregiver=caregiver, routes=tuple(routes), value=int(value), coverage=frozenset(coverage)
    )


def empty_routed_day(caregiver: str, day: int) -> RoutedDay:
    return RoutedDay(
        caregiver=caregiver,
        day=day,
        route=(),
        travel_cost=0,
        wage_cost=0,
        revenue=0,
        ret=0,
        covered=frozenset(),
        labels=None,
    )


@dataclass
class DualPrices1:
    v: dict  # caregiver id -> free dual of the convexity row
    w: dict  # new patient id -> nonnegative dual of the coverage row


@dataclass
class DualPrices2:
    u: dict  # day index -> free dual of the one-route-per-day row
    z: dict  # patient id -> dual of the <= visits_required row
    y: dict  # (patient id, day) -> dual of the linking row
    q: dict  # (patient id, window start day) -> dual of the min-gap row
    windows: dict  # patient id -> tuple of (start, tuple of days)
    pen: dict = None  # (patient id, day) -> full pricing penalty, precomputed


def gap_windows(inst: Instance, pid: str) -> tuple:
    """Minimum-gap windows: every run of gap+1 consecutive days (gap >= 1)."""
    p = inst.patient(pid)
    n_days = len(inst.days)
    if p.min_gap_days <= 0:
        return ()
    if n_days <= p.min_gap_days:
        return ((0, tuple(range(n_days))),)
    return tuple(
        (s, tuple(range(s, s + p.min_gap_days + 1))) for s in range(n_days - p.min_gap_days)
    )


# -- level 1 ----------------------------------------------------------------


def solve_rmp1(columns: dict, inst: Instance, seeds: dict = None):
    """LP relaxation of the weekly-plan selection problem.

    ``columns`` maps caregiver id -> list of WeeklyColumn; ``seeds``
    optionally names one column per caregiver forming a known feasible basis.
    Returns (lambda by column, DualPrices1, objective).
    """
    for c in inst.caregivers:
        if not columns.get(c.id):
            raise MissingInitialColumn(f"caregiver {c.id} has no columns")
    flat = [col for c in inst.caregivers for col in columns[c.id]]
    new_pids = [p.id for p in inst.patients if p.is_new]

    n = len(flat)
    obj = np.array([float(col.value) for col in flat])
    rows = []
    for c in inst.caregivers:
        coeff = np.array([1.0 if col.caregiver == c.id else 0.0 for col in flat])
        rows.append((coeff, "=", 1.0))
    for pid in new_pids:
        coeff = np.array([1.0 if pid in col.coverage else 0.0 for col in flat])
        rows.append((coeff, "<=", 1.0))

    hint = None
    if seeds:
        pos = {id(col): j for j, col in enumerate(flat)}
        hint = [None] * len(rows)
        ok = True
        for i, c in enumerate(inst.caregivers):
            j = pos.get(id(seeds.get(c.id)))
            if j is None:
                ok = False
                break
            hint[i] = j
        if not ok:
            hint = None

    res = solve_lp(LinearProgram(objective=obj, rows=rows), basis_hint=hint)
    if res.status != OPTIMAL:
        raise RuntimeError(f"RMP1 unexpectedly {res.status}")
    lam = {col: float(res.x[j]) for j, col in enumerate(flat)}
    k_count = len(inst.caregivers)
    duals = DualPrices1(
        v={c.id: float(res.duals[i]) for i, c in enumerate(inst.caregivers)},
        w={pid: float(res.duals[k_count + i]) for i, pid in enumerate(new_pids)},
    )
    return lam, duals, float(res.objective)


def rmp1_reduced_cost(col: WeeklyColumn, duals: DualPrices1) -> float:
    return col.value - duals.v[col.caregiver] - sum(duals.w.get(pid, 0.0) for pid in col.coverage)


# -- level 2 ----------------------------------------------------------------


def rmp2_objective_coeff(r: RoutedDay, w_star: dict, inst: Instance) -> float:
    coeff = float(r.value)
    for pid in r.covered:
        p = inst.patient(pid)
        if p.is_new:
            coeff -= w_star.get(pid, 0.0) / p.visits_required
    return coeff


def solve_rmp2(caregiver: str, columns: dict, w_star: dict, inst: Instance, scope=None,
               seeds: dict = None):
    """LP relaxation of one caregiver's weekly route-selection problem.

    ``columns`` maps day index -> list of RoutedDay (each day nonempty);
    ``seeds`` optionally names one column per day forming a known feasible
    basis (the mandatory-coverage routes). ``scope`` limits the new patients
    that get rows; defaults to all new patients. Returns
    (lambda by column, DualPrices2, objective).
    """
    n_days = len(inst.days)
    for d in range(n_days):
        if not columns.get(d):
            raise MissingInitialColumn(f"day {d} has no columns for caregiver {caregiver}")
    if scope is None:
        scope = [p.id for p in inst.patients if p.is_new]
    scope = list(scope)
    scope_set = set(scope)

    flat = [(d, r) for d in range(n_days) for r in columns[d]]
    n_cols = len(flat)
    day_of = np.array([d for d, _ in flat])
    scope_pos = {pid: i for i, pid in enumerate(scope)}
    covers = np.zeros((len(scope), n_cols))
    for j, (_, r) in enumerate(flat):
        for pid in r.covered:
            i = scope_pos.get(pid)
            if i is not None:
                covers[i, j] = 1.0
    values = np.array([float(r.value) for _, r in flat])
    wv = np.array(
        [w_star.get(pid, 0.0) / inst.patient(pid).visits_required for pid in scope]
    )
    obj = values - wv @ covers

    day_masks = [(day_of == d).astype(float) for d in range(n_days)]
    rows = []
    meta = []
    for d in range(n_days):
        rows.append((day_masks[d], "=", 1.0))
        meta.append(("u", d))
    for i, pid in enumerate(scope):
        p = inst.patient(pid)
        rows.append((covers[i], "<=", float(p.visits_required)))
        meta.append(("z", pid))
        if p.visits_required >= 2:
            for d in range(n_days):
                coeff = covers[i] * (p.visits_required * day_masks[d] - 1.0)
                rows.append((coeff, "<=", 0.0))
                meta.append(("y", (pid, d)))
        for start, win in gap_windows(inst, pid):
            win_mask = day_masks[win[0]].copy()
            for dd in win[1:]:
                win_mask += day_masks[dd]
            rows.append((covers[i] * win_mask, "<=", 1.0))
            meta.append(("q", (pid, start)))

    hint = None
    if seeds:
        pos = {(d, id(r)): j for j, (d, r) in enumerate(flat)}
        hint = [None] * len(rows)
        ok = True
        for d in range(n_days):
            j = pos.get((d, id(seeds.get(d))))
            if j is None:
                ok = False
                break
            hint[d] = j
        if not ok:
            hint = None

    res = solve_lp(LinearProgram(objective=obj, rows=rows), basis_hint=hint)
    if res.status != OPTIMAL:
        raise RuntimeError(f"RMP2 unexpectedly {res.status}")

    lam = {}
    for j, (d, r) in enumerate(flat):
        lam[(d, r)] = float(res.x[j])
    duals = DualPrices2(u={}, z={}, y={}, q={}, windows={pid: gap_windows(inst, pid) for pid in scope})
    for val, (kind, key) in zip(res.duals, meta):
        getattr(duals, kind)[key] = float(val)

    # penalty table, vectorized over (patient, day)
    n_scope = len(scope)
    z_arr = np.array([duals.z.get(pid, 0.0) for pid in scope])
    v_arr = np.array([float(inst.patient(pid).visits_required) for pid in scope])
    y_arr = np.zeros((n_scope, n_days))
    q_arr = np.zeros((n_scope, n_days))
    for (pid, d), val in duals.y.items():
        y_arr[scope_pos[pid], d] = val
    for (pid, start), val in duals.q.items():
        for d in dict(duals.windows[pid])[start]:
            q_arr[scope_pos[pid], d] += val
    pen_m = (
        wv[:, None]
        + z_arr[:, None]
        + v_arr[:, None] * y_arr
        - y_arr.sum(axis=1)[:, None]
        + q_arr
    )
    duals.pen = {
        (pid, d): float(pen_m[i, d]) for i, pid in enumerate(scope) for d in range(n_days)
    }
    return lam, duals, float(res.objective)


def pricing_penalty(pid: str, day: int, duals2: DualPrices2, w_star: dict, inst: Instance) -> float:
    """Dual-side cost of covering a new patient on a day: the full column
    coefficient combining acceptance, visit-count, linking and gap duals.

    The linking term is v_i*y_{i,d} - sum_d y_{i,d}, the sign the LP dual of
    the all-or-nothing rows actually produces: a visit on a binding day
    triggers the full-coverage obligation, visits on other days discharge it.
    """
    p = inst.patient(pid)
    pen = w_star.get(pid, 0.0) / p.visits_required + duals2.z.get(pid, 0.0)
    y_total = sum(duals2.y.get((pid, d), 0.0) for d in range(len(inst.days)))
    pen += p.visits_required * duals2.y.get((pid, day), 0.0) - y_total
    for start, win in duals2.windows.get(pid, ()):
        if day in win:
            pen += duals2.q.get((pid, start), 0.0)
    return pen


def route_pricing_value(r: RoutedDay, duals2: DualPrices2, w_star: dict, inst: Instance) -> float:
    """Objective of the day-level pricing problem for a candidate route."""
    val = float(r.value)
    for pid in r.covered:
        if inst.patient(pid).is_new:
            val -= pricing_penalty(pid, r.day, duals2, w_star, inst)
    return val


def rmp2_reduced_cost(day: int, r: RoutedDay, duals2: DualPrices2, w_star: dict, inst: Instance) -> float:
    return route_pricing_value(r, duals2, w_star, inst) - duals2.u[day]


def dump_lp(lp: LinearProgram, path) -> None:
    """Plain-text listing of an LP, for debugging."""
    lines = ["max " + " + ".join(f"{c:g} x{j}" for j, c in enumerate(lp.objective) if c)]
    for coeffs, rel, rhs in lp.rows:
        terms = " + ".join(f"{c:g} x{j}" for j, c in enumerate(coeffs) if c)
        lines.append(f"  {terms or '0'} {rel} {rhs:g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
