"""Worst-case schedules along a fixed route.

``label_route`` runs the recursive worst-case start-time scheme: a forward
dynamic program over states (position, consumed service budget, consumed
travel budget). ``adversarial_oracle`` is the independent brute force that
enumerates every binary deviation scenario; the two must agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .backend import kernels
from .errors import CaregiverUnavailable, RouteTooLong, UnknownCaregiver, UnknownPatient
from .model import Instance

ORACLE_MAX_LEN = 10


@dataclass(frozen=True, eq=False)
class RobustLabelTable:
    route: tuple  # patient ids, visit order
    start: np.ndarray  # (L, gp_eff+1, gt_eff+1) worst starts, minutes
    ret: int  # worst-case depot return
    feasible: bool
    #: (position 0-based or "return", (gamma_p, gamma_t), violated upper bound)
    first_violation: Optional[tuple] = None

    @property
    def gamma_p_eff(self) -> int:
        return self.start.shape[1] - 1 if self.start.size else 0

    @property
    def gamma_t_eff(self) -> int:
        return self.start.shape[2] - 1 if self.start.size else 0

    def worst_start(self, position: int) -> int:
        return int(self.start[position, -1, -1])


def _day_context(inst: Instance, day, caregiver: str):
    arr = inst.arrays
    if isinstance(day, str):
        day = inst.day_index[day]
    if caregiver not in inst.caregiver_index:
        raise UnknownCaregiver(caregiver)
    k = inst.caregiver_index[caregiver]
    if arr.wlo[k, day] < 0:
        raise CaregiverUnavailable(f"{caregiver} does not work on day {inst.days[day]}")
    return arr, k, day


def _route_indices(inst: Instance, route) -> list[int]:
    idx = []
    for pid in route:
        if pid not in inst.patient_index:
            raise UnknownPatient(pid)
        idx.append(inst.patient_index[pid])
    if len(set(idx)) != len(idx):
        raise UnknownPatient(f"duplicate patient in route: {route}")
    return idx


def label_route(route, day, caregiver: str, inst: Instance) -> RobustLabelTable:
    """Worst-case start-time table for visiting ``route`` in order.

    Feasible iff every worst-case start fits its window and the worst-case
    return fits the shift. Budgets are clamped to the route length.
    """
    arr, k, d = _day_context(inst, day, caregiver)
    idx = _route_indices(inst, route)
    wlo = int(arr.wlo[k, d])
    whi = int(arr.whi[k, d])
    if not idx:
        table = np.zeros((0, 1, 1), dtype=np.int64)
        return RobustLabelTable(route=tuple(route), start=table, ret=wlo, feasible=True)
    starts, ret = kernels.start_table(
        np.asarray(idx, dtype=np.int64),
        arr.tbar,
        arr.that,
        arr.pbar,
        arr.phat,
        arr.tlo[d],
        arr.thi[d],
        wlo,
        arr.gamma_p,
        arr.gamma_t,
    )
    violation = None
    for p, i in enumerate(idx):
        hi = int(arr.thi[d, i])
        if starts[p, -1, -1] > hi:
            state = _first_violating_state(starts[p], hi)
            violation = (p, state, hi)
            break
    if violation is None and ret > whi:
        gp, gt = starts.shape[1] - 1, starts.shape[2] - 1
        violation = ("return", (gp, gt), whi)
    return RobustLabelTable(
        route=tuple(route),
        start=starts,
        ret=int(ret),
        feasible=violation is None,
        first_violation=violation,
    )


def _first_violating_state(layer: np.ndarray, hi: int) -> tuple:
    for a in range(layer.shape[0]):
        for b in range(layer.shape[1]):
            if layer[a, b] > hi:
                return (a, b)
    return (layer.shape[0] - 1, layer.shape[1] - 1)


def adversarial_oracle(route, day, caregiver: str, inst: Instance):
    """Brute-force worst per-patient start times and worst return.

    Enumerates every deviation scenario inside the budgets; exponential, so
    routes are capped at length 10. Returns (dict pid -> worst start, ret).
    """
    arr, k, d = _day_context(inst, day, caregiver)
    idx = _route_indices(inst, route)
    if len(idx) > ORACLE_MAX_LEN:
        raise RouteTooLong(f"oracle handles at most {ORACLE_MAX_LEN} patients, got {len(idx)}")
    wlo = int(arr.wlo[k, d])
    if not idx:
        return {}, wlo
    worst, ret = kernels.oracle_worst(
        np.asarray(idx, dtype=np.int64),
        arr.tbar,
        arr.that,
        arr.pbar,
        arr.phat,
        arr.tlo[d],
        arr.thi[d],
        wlo,
        arr.gamma_p,
        arr.gamma_t,
    )
    return {pid: int(worst[p]) for p, pid in enumerate(route)}, int(ret)
