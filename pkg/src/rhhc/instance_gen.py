"""Deterministic synthetic instance generator.

Reproduces the case study's factor design: two regions calibrated by mean
pairwise travel time, two disciplines with their service mixes, three time
window styles and four uncertainty budgets. For a fixed seed, instances
differ across window styles only in the windows and across uncertainty
levels only in the budgets, and windows/budget sets are nested, so optimal
profits are comparable across those factors.

All money is integer cents, all times integer minutes. Pre-assigned visits
are placed with full-deviation spacing, so the reject-all plan stays
robustly feasible at every budget level.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .model import (
    BUDGET_PRESETS,
    Budgets,
    Caregiver,
    EXISTING,
    Instance,
    NEW,
    Patient,
    TimeWindow,
    TravelMatrix,
    patterns_for,
    validate_instance,
)

REGIONS = {
    "t20": (20.0, 22.60),  # mean travel minutes, mean distance km
    "t60": (60.0, 74.69),
}

#: name -> (weekly visits, min gap days, duration min, hourly wage $, billing factor)
SERVICES = {
    "nursing": {
        "SN": (1, 0, 50, 26.86, 0.9),
        "RN": (1, 1, 55, 42.80, 1.0),
        "LPN": (1, 0, 50, 26.86, 0.9),
    },
    "pt": {
        "PTA": (2, 0, 50, 31.01, 0.9),
        "PT": (1, 0, 55, 47.10, 1.1),
    },
}

#: who may serve whom: caregiver qualification -> set of patient services
QUALIFIES = {
    "SN": {"SN"},
    "LPN": {"LPN", "SN"},
    "RN": {"RN", "LPN", "SN"},
    "PTA": {"PTA"},
    "PT": {"PT", "PTA"},
}

HOURLY_BILLING_CENTS = 10200  # nursing billing rate per hour
TRAVEL_COST_CENTS_PER_MILE = 56
KM_PER_MILE = 1.609344

FULL_TIME = (540, 1020)  # 9:00 - 17:00
PART_TIME = (480, 720)  # 8:00 - 12:00
NARROW_HALF_WIDTH = 30
NOON = 720

DAY_LABELS = ["Mon", "Tue", "Wed", "Thu", "Fri"]

_PLACEMENT_RETRIES = 400


def _round(x: float) -> int:
    return int(x + 0.5)


@dataclass
class _Draft:
    service: str
    kind: str
    location: tuple


def generate(
    region: str,
    discipline: str,
    tw: str,
    uncertainty: str,
    n_existing: int,
    n_new_per_day: int,
    seed: int,
    n_caregivers: int = 3,
    n_days: int = 5,
) -> Instance:
    region = region.lower()
    discipline = discipline.lower()
    tw = tw.lower()
    uncertainty = uncertainty.lower()
    if region not in REGIONS:
        raise ValueError(f"unknown region {region!r}")
    if discipline not in SERVICES:
        raise ValueError(f"unknown discipline {discipline!r}")
    if tw not in ("wide", "narrow", "tight"):
        raise ValueError(f"unknown time window style {tw!r}")
    if uncertainty not in BUDGET_PRESETS:
        raise ValueError(f"unknown uncertainty level {uncertainty!r}")
    if min(n_existing, n_new_per_day, seed if seed >= 0 else -1, n_caregivers - 1, n_days - 1) < 0:
        raise ValueError("counts must be nonnegative, caregivers and days >= 1")

    rng = random.Random(seed)
    services = SERVICES[discipline]
    top = "RN" if discipline == "nursing" else "PT"
    days = [DAY_LABELS[d] if d < len(DAY_LABELS) else f"D{d + 1}" for d in range(n_days)]

    # caregivers: index 0 is always fully qualified so every patient has a home
    cg_services = [top] + [
        rng.choice(sorted(services)) for _ in range(n_caregivers - 1)
    ]
    caregivers = []
    for k, svc in enumerate(cg_services):
        lo, hi = PART_TIME if k % 4 == 3 else FULL_TIME
        caregivers.append(
            Caregiver(
                id=f"k{k + 1}",
                wage_rate=_round(services[svc][3] * 100.0 / 60.0),
                work_windows={d: TimeWindow(lo, hi) for d in days},
            )
        )

    # patients: services, then locations (one rng stream, independent of tw
    # and uncertainty so those factors change nothing else)
    n_new = n_new_per_day * n_days
    n = n_existing + n_new
    drafts = []
    for i in range(n):
        svc = rng.choice(sorted(services))
        drafts.append(_Draft(service=svc, kind=EXISTING if i < n_existing else NEW, location=None))
    for d in drafts:
        d.location = (rng.random(), rng.random())

    mean_minutes, mean_km = REGIONS[region]
    locs = [(0.5, 0.5)] + [d.location for d in drafts]  # 0 = depot
    dist = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(n + 1):
            dx = locs[i][0] - locs[j][0]
            dy = locs[i][1] - locs[j][1]
            dist[i, j] = (dx * dx + dy * dy) ** 0.5
    if n >= 2:
        pair = dist[1:, 1:]
        mean_dist = pair.sum() / (n * (n - 1))
    else:
        mean_dist = 0.52  # expected distance of two uniform points in the unit square
    tbar = np.rint(dist * (mean_minutes / mean_dist)).astype(np.int64)
    that = np.rint(0.2 * tbar).astype(np.int64)
    km = dist * (mean_km / mean_dist)
    cost = np.rint(TRAVEL_COST_CENTS_PER_MILE * km / KM_PER_MILE).astype(np.int64)
    np.fill_diagonal(tbar, 0)
    np.fill_diagonal(that, 0)
    np.fill_diagonal(cost, 0)

    qualified = {
        svc: [k for k, cs in enumerate(cg_services) if svc in QUALIFIES[cs]] for svc in services
    }

    # place pre-assigned visits; chains[(k, d)] is the visit order on that day
    chains: dict = {(k, d): [] for k in range(n_caregivers) for d in range(n_days)}

    def allmax_span(k: int, d: int, order) -> int:
        """Shift time consumed when every deviation hits (depot to depot)."""
        if not order:
            return 0
        t = 0
        prev = 0
        for i in order:
            t += int(tbar[prev, i] + that[prev, i])
            svc = services[drafts[i - 1].service]
            t += svc[2] + _round(0.2 * svc[2])
            prev = i
        t += int(tbar[prev, 0] + that[prev, 0])
        return t

    preassign: dict = {}
    for i in range(1, n_existing + 1):
        draft = drafts[i - 1]
        visits, gap = services[draft.service][0], services[draft.service][1]
        pats = patterns_for(visits, gap, n_days)
        ks = qualified[draft.service]
        if not pats or not ks:
            raise RuntimeError(f"no feasible placement for service {draft.service}")
        placed = False
        for _attempt in range(_PLACEMENT_RETRIES):
            k = rng.choice(ks)
            pattern = pats[rng.randrange(len(pats))]
            lo, hi = (PART_TIME if k % 4 == 3 else FULL_TIME)
            if all(
                allmax_span(k, d, chains[(k, d)] + [i]) <= hi - lo for d in pattern
            ):
                for d in pattern:
                    chains[(k, d)].append(i)
                preassign[i] = (k, pattern)
                placed = True
                break
        if not placed:
            raise RuntimeError(
                f"could not place existing patient {i} after {_PLACEMENT_RETRIES} attempts; "
                "reduce n_existing or add caregivers"
            )

    # appointment times: earliest all-max chain plus sorted random offsets
    appointment: dict = {}
    for (k, d), order in sorted(chains.items()):
        if not order:
            continue
        lo, hi = (PART_TIME if k % 4 == 3 else FULL_TIME)
        earliest = []
        t = lo
        prev = 0
        for i in order:
            t += int(tbar[prev, i] + that[prev, i])
            earliest.append(t)
            svc = services[drafts[i - 1].service]
            t += svc[2] + _round(0.2 * svc[2])
            prev = i
        slack = hi - (t + int(tbar[prev, 0] + that[prev, 0]))
        assert slack >= 0
        offsets = sorted(rng.randint(0, slack) for _ in order)
        for i, e, o in zip(order, earliest, offsets):
            appointment[(i, k, d)] = e + o

    def wide_window(t_start: int, k: int) -> TimeWindow:
        lo, hi = (PART_TIME if k % 4 == 3 else FULL_TIME)
        if t_start - NARROW_HALF_WIDTH >= lo and t_start + NARROW_HALF_WIDTH <= NOON:
            return TimeWindow(lo, NOON)
        if t_start - NARROW_HALF_WIDTH >= NOON and t_start + NARROW_HALF_WIDTH <= hi:
            return TimeWindow(NOON, hi)
        return TimeWindow(lo, hi)

    def styled_window(t_start: int, k: int) -> TimeWindow:
        wide = wide_window(t_start, k)
        if tw == "wide":
            return wide
        if tw == "narrow":
            return TimeWindow(
                max(t_start - NARROW_HALF_WIDTH, wide.lo),
                min(t_start + NARROW_HALF_WIDTH, wide.hi),
            )
        return TimeWindow(t_start, t_start)

    patients = []
    width = len(str(max(n, 1)))
    for i in range(1, n + 1):
        draft = drafts[i - 1]
        visits, gap, duration, _wage, factor = services[draft.service]
        revenue = {c.id: _round(HOURLY_BILLING_CENTS * factor) for c in caregivers}
        if draft.kind == EXISTING:
            k, pattern = preassign[i]
            cid = caregivers[k].id
            windows = []
            for d in range(n_days):
                if d in pattern:
                    windows.append(styled_window(appointment[(i, k, d)], k))
                else:
                    windows.append(TimeWindow(0, 1440))
            compat = {cid: frozenset(days[d] for d in pattern)}
            pre = (cid, frozenset(days[d] for d in pattern))
            pid = f"e{i:0{width}d}"
        else:
            windows = [TimeWindow(0, 1440)] * n_days
            compat = {
                caregivers[k].id: frozenset(days) for k in qualified[draft.service]
            }
            pre = None
            pid = f"n{i:0{width}d}"
        patients.append(
            Patient(
                id=pid,
                kind=draft.kind,
                visits_required=visits,
                min_gap_days=gap,
                windows=tuple(windows),
                service_mean=duration,
                service_dev=_round(0.2 * duration),
                revenue=revenue,
                compatibility=compat,
                preassignment=pre,
            )
        )

    gamma_p, gamma_t = BUDGET_PRESETS[uncertainty]
    inst = Instance(
        days=tuple(days),
        caregivers=tuple(caregivers),
        patients=tuple(patients),
        travel=TravelMatrix(
            mean=tbar, dev=that, cost=np.stack([cost] * n_days)
        ),
        budgets=Budgets(gamma_p=gamma_p, gamma_t=gamma_t),
        max_patients_per_caregiver_day=8,
    )
    validate_instance(inst)
    return inst
