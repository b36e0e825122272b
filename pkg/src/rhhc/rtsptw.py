"""Exact robust TSP with time windows and wage cost on a fixed patient set."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .backend import kernels
from .errors import IncompatiblePatient, TooManyPatients
from .model import Instance
from .robust_time import RobustLabelTable, _day_context


@dataclass(frozen=True)
class RoutedDay:
    """A priced daily route: ordering, cost split and coverage."""

    caregiver: str
    day: int
    route: tuple  # patient ids in visit order
    travel_cost: int
    wage_cost: int
    revenue: int
    ret: int  # worst-case depot return time
    covered: frozenset = field(default_factory=frozenset)
    #: worst-case start-time table; filled on demand (plan assembly), since
    #: pricing only needs the return time
    labels: RobustLabelTable = field(compare=False, default=None)

    @property
    def value(self) -> int:
        return self.revenue - self.travel_cost - self.wage_cost


def solve_rtsptw(
    patients, day, caregiver: str, inst: Instance, cache: "RouteCache" = None
) -> Optional[RoutedDay]:
    """Minimum-cost robust-feasible ordering of ``patients``, or None.

    Cost is travel plus wage of the worst-case shift span; revenue is
    attached afterwards (it is constant for a fixed patient set). Ties on
    cost break toward the lexicographically smallest patient-id sequence.
    """
    pids = frozenset(patients)
    if cache is not None and not isinstance(day, str):
        hit, value = cache.lookup((caregiver, day, pids))
        if hit:
            return value

    arr, k, d = _day_context(inst, day, caregiver)
    if len(pids) > arr.n_max:
        raise TooManyPatients(f"{len(pids)} patients exceed the daily limit {arr.n_max}")
    for pid in pids:
        i = inst.patient_index.get(pid)
        if i is None or not arr.compat[k, d, i]:
            raise IncompatiblePatient(f"{pid} is not compatible with {caregiver} on day {inst.days[d]}")

    routed = _solve_uncached(pids, d, caregiver, k, inst)
    if cache is not None:
        routed = cache.insert((caregiver, d, pids), routed)
    return routed


def _solve_uncached(pids: frozenset, d: int, caregiver: str, k: int, inst: Instance):
    arr = inst.arrays
    idx = sorted(inst.patient_index[p] for p in pids)
    res = kernels.tsp_search(
        np.asarray(idx, dtype=np.int64),
        arr.tbar,
        arr.that,
        arr.pbar,
        arr.phat,
        arr.tlo[d],
        arr.thi[d],
        int(arr.wlo[k, d]),
        int(arr.whi[k, d]),
        arr.cost[d],
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
    wage_cost = int(arr.wage[k]) * (ret - int(arr.wlo[k, d]))
    revenue = int(sum(arr.revenue[k, inst.patient_index[p]] for p in pids))
    return RoutedDay(
        caregiver=caregiver,
        day=d,
        route=route,
        travel_cost=int(travel),
        wage_cost=wage_cost,
        revenue=revenue,
        ret=int(ret),
        covered=pids,
        labels=None,
    )


class RouteCache:
    """Global memo table for solved patient sets.

    Keys are (caregiver id, day index, frozenset of patient ids); values may
    be None (proven infeasible). Insert-once semantics: the first stored
    value wins, so concurrent duplicate solves stay consistent.
    """

    def __init__(self) -> None:
        self._table: dict = {}
        self._masks: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def mask_table(self, caregiver: str, day: int) -> dict:
        """Per-(caregiver, day) memo of candidate-bitmask -> route value,
        shared by all pricing walks for that day."""
        key = (caregiver, int(day))
        with self._lock:
            return self._masks.setdefault(key, {})

    @staticmethod
    def _key(key) -> tuple:
        caregiver, day, pids = key
        return (caregiver, int(day), frozenset(pids))

    def lookup(self, key):
        """Returns (found, value); value may be None for cached infeasibility."""
        k = self._key(key)
        with self._lock:
            if k in self._table:
                self.hits += 1
                return True, self._table[k]
            self.misses += 1
            return False, None

    def insert(self, key, value):
        k = self._key(key)
        with self._lock:
            return self._table.setdefault(k, value)

    def __len__(self) -> int:
        return len(self._table)
