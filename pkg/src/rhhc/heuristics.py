"""Initial feasible columns: the reject-all plan and the greedy acceptance
heuristic that seeds column generation."""

from __future__ import annotations

from .errors import InfeasibleInstance, TooManyPatients
from .master import WeeklyColumn, empty_routed_day, weekly_column
from .model import Instance, day_patterns
from .pricing import _mandatory_vbar
from .rtsptw import RouteCache, solve_rtsptw


def _route_mandatory(inst: Instance, caregiver: str, day: int, pids, cache):
    """Route a mandatory set, or the empty day when the caregiver is off."""
    k = inst.caregiver_index[caregiver]
    if inst.arrays.wlo[k, day] < 0:
        if pids:
            return None
        return empty_routed_day(caregiver, day)
    return solve_rtsptw(pids, day, caregiver, inst, cache)


def reject_all(inst: Instance, cache: RouteCache = None) -> dict:
    """Optimal routes over the pre-assigned visits only; all new patients
    rejected. Raises InfeasibleInstance when some pre-assigned set cannot be
    robustly scheduled."""
    columns = {}
    for c in inst.caregivers:
        per_day = {}
        for d in range(len(inst.days)):
            pids = inst.existing_by_kd[(c.id, d)]
            routed = _route_mandatory(inst, c.id, d, pids, cache)
            if routed is None:
                raise InfeasibleInstance(
                    f"existing visits of {c.id} on {inst.days[d]} cannot be robustly scheduled"
                )
            per_day[d] = routed
        columns[c.id] = weekly_column(inst, c.id, per_day)
    return columns


def greedy_plan(inst: Instance, cache: RouteCache = None) -> dict:
    """Iteratively commit the most valuable (patient, caregiver, pattern)
    assignment whose insertion keeps every affected daily route feasible.

    The value of an assignment is the revenue minus estimated wage and travel
    cost, summed over the pattern days; nonpositive candidates are skipped.
    Degenerates to reject_all when nothing fits.
    """
    arr = inst.arrays
    n_days = len(inst.days)
    candidates = []
    for p in inst.patients:
        if not p.is_new:
            continue
        for c in inst.caregivers:
            k = inst.caregiver_index[c.id]
            ok_days = {
                d
                for d in range(n_days)
                if arr.wlo[k, d] >= 0 and arr.compat[k, d, inst.patient_index[p.id]]
            }
            for pattern in day_patterns(p, n_days):
                if not set(pattern) <= ok_days:
                    continue
                value = sum(_mandatory_vbar(p.id, c.id, d, inst) for d in pattern)
                if value > 0:
                    candidates.append((value, p.id, c.id, pattern))
    candidates.sort(key=lambda t: (-t[0], t[1], t[2], t[3]))

    sets = {
        (c.id, d): set(inst.existing_by_kd[(c.id, d)])
        for c in inst.caregivers
        for d in range(n_days)
    }
    accepted = set()
    for _value, pid, cid, pattern in candidates:
        if pid in accepted:
            continue
        if any(len(sets[(cid, d)]) + 1 > inst.max_patients_per_caregiver_day for d in pattern):
            continue
        try:
            routes = [
                solve_rtsptw(sets[(cid, d)] | {pid}, d, cid, inst, cache) for d in pattern
            ]
        except TooManyPatients:
            continue
        if any(r is None for r in routes):
            continue
        accepted.add(pid)
        for d in pattern:
            sets[(cid, d)].add(pid)

    columns = {}
    for c in inst.caregivers:
        per_day = {}
        for d in range(n_days):
            routed = _route_mandatory(inst, c.id, d, sets[(c.id, d)], cache)
            if routed is None:
                raise InfeasibleInstance(
                    f"existing visits of {c.id} on {inst.days[d]} cannot be robustly scheduled"
                )
            per_day[d] = routed
        columns[c.id] = weekly_column(inst, c.id, per_day)
    return columns
