"""Domain types, instance validation and the canonical on-disk format.

Conventions used across the whole package:

* times are integer minutes from midnight,
* money is integer cents (64-bit),
* travel matrices are stored once with index 0 as the depot and patients at
  1..n in file order; the second depot copy (index n+1) is an addressing
  convention of the solver, not a stored row,
* days and caregivers are referenced by their string ids in files and by
  dense indices internally.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError, ValidationError

Money = int
Minutes = int

MINUTES_PER_DAY = 1440

#: budget presets: level -> (gamma_p, gamma_t)
BUDGET_PRESETS = {
    "none": (0, 0),
    "low": (2, 2),
    "medium": (4, 4),
    "high": (8, 8),
}

#: deviation fraction used when a preset instance carries no explicit dev matrix
DEFAULT_DEV_FRACTION = 0.2

EXISTING = "existing"
NEW = "new"


@dataclass(frozen=True)
class TimeWindow:
    lo: Minutes
    hi: Minutes

    def __post_init__(self) -> None:
        if not (0 <= self.lo <= self.hi <= MINUTES_PER_DAY):
            raise ValidationError(
                f"time window [{self.lo}, {self.hi}] must satisfy 0 <= lo <= hi <= {MINUTES_PER_DAY}"
            )

    def as_pair(self) -> list[int]:
        return [self.lo, self.hi]


@dataclass(frozen=True, eq=False)
class Patient:
    id: str
    kind: str  # EXISTING or NEW
    visits_required: int
    min_gap_days: int
    windows: tuple[TimeWindow, ...]  # aligned with Instance.days
    service_mean: Minutes
    service_dev: Minutes
    revenue: dict  # caregiver id -> cents per visit
    compatibility: dict  # caregiver id -> frozenset of day labels
    preassignment: Optional[tuple[str, frozenset]] = None  # (caregiver id, day labels)

    @property
    def is_new(self) -> bool:
        return self.kind == NEW


@dataclass(frozen=True, eq=False)
class Caregiver:
    id: str
    wage_rate: Money  # cents per minute
    work_windows: dict  # day label -> TimeWindow; absent day = unavailable


@dataclass(frozen=True, eq=False)
class TravelMatrix:
    """Travel times and per-day travel costs between depot (0) and patients (1..n)."""

    mean: np.ndarray  # (n+1, n+1) minutes
    dev: np.ndarray  # (n+1, n+1) minutes
    cost: np.ndarray  # (n_days, n+1, n+1) cents

    @property
    def n(self) -> int:
        return self.mean.shape[0] - 1


@dataclass(frozen=True)
class Budgets:
    gamma_p: int
    gamma_t: int


@dataclass(frozen=True, eq=False)
class Instance:
    days: tuple[str, ...]
    caregivers: tuple[Caregiver, ...]
    patients: tuple[Patient, ...]
    travel: TravelMatrix
    budgets: Budgets
    max_patients_per_caregiver_day: int = 8

    # -- index helpers ----------------------------------------------------

    @cached_property
    def day_index(self) -> dict:
        return {d: i for i, d in enumerate(self.days)}

    @cached_property
    def caregiver_index(self) -> dict:
        return {c.id: i for i, c in enumerate(self.caregivers)}

    @cached_property
    def patient_index(self) -> dict:
        """Patient id -> matrix index in 1..n."""
        return {p.id: i + 1 for i, p in enumerate(self.patients)}

    def patient(self, pid: str) -> Patient:
        return self.patients[self.patient_index[pid] - 1]

    def caregiver(self, cid: str) -> Caregiver:
        return self.caregivers[self.caregiver_index[cid]]

    @property
    def n(self) -> int:
        return len(self.patients)

    @cached_property
    def existing_by_kd(self) -> dict:
        """(caregiver id, day index) -> sorted tuple of pre-assigned patient ids."""
        table: dict = {(c.id, d): [] for c in self.caregivers for d in range(len(self.days))}
        for p in self.patients:
            if p.preassignment is None:
                continue
            cid, day_labels = p.preassignment
            for lbl in day_labels:
                table[(cid, self.day_index[lbl])].append(p.id)
        return {k: tuple(sorted(v)) for k, v in table.items()}

    @cached_property
    def arrays(self) -> "InstanceArrays":
        return InstanceArrays.build(self)

    def compatible(self, pid: str, cid: str, day: int) -> bool:
        p = self.patient(pid)
        return self.days[day] in p.compatibility.get(cid, ())


@dataclass(frozen=True, eq=False)
class InstanceArrays:
    """Dense numpy views used by the numeric kernels.

    Matrix indices run over 0..n+1 where both 0 and n+1 address the depot.
    """

    n: int
    n_days: int
    n_caregivers: int
    tbar: np.ndarray  # (n+2, n+2) int64
    that: np.ndarray
    cost: np.ndarray  # (n_days, n+2, n+2) int64
    pbar: np.ndarray  # (n+1,) int64, index 0 unused
    phat: np.ndarray
    tlo: np.ndarray  # (n_days, n+1) int64
    thi: np.ndarray
    wlo: np.ndarray  # (K, n_days) int64, -1 if unavailable
    whi: np.ndarray
    wage: np.ndarray  # (K,) int64 cents per minute
    revenue: np.ndarray  # (K, n+1) int64 cents
    compat: np.ndarray  # (K, n_days, n+1) bool
    lex_rank: np.ndarray  # (n+1,) rank of patient id, for deterministic tie-breaks
    gamma_p: int
    gamma_t: int
    n_max: int

    @staticmethod
    def build(inst: Instance) -> "InstanceArrays":
        n = inst.n
        n_days = len(inst.days)
        n_k = len(inst.caregivers)

        def expand(m: np.ndarray) -> np.ndarray:
            out = np.zeros((n + 2, n + 2), dtype=np.int64)
            out[: n + 1, : n + 1] = m
            out[n + 1, : n + 1] = m[0, :]
            out[: n + 1, n + 1] = m[:, 0]
            return out

        tbar = expand(inst.travel.mean)
        that = expand(inst.travel.dev)
        cost = np.stack([expand(inst.travel.cost[d]) for d in range(n_days)])

        pbar = np.zeros(n + 1, dtype=np.int64)
        phat = np.zeros(n + 1, dtype=np.int64)
        tlo = np.zeros((n_days, n + 1), dtype=np.int64)
        thi = np.zeros((n_days, n + 1), dtype=np.int64)
        revenue = np.zeros((n_k, n + 1), dtype=np.int64)
        compat = np.zeros((n_k, n_days, n + 1), dtype=bool)
        for i, p in enumerate(inst.patients, start=1):
            pbar[i] = p.service_mean
            phat[i] = p.service_dev
            for d in range(n_days):
                tlo[d, i] = p.windows[d].lo
                thi[d, i] = p.windows[d].hi
            for cid, days in p.compatibility.items():
                k = inst.caregiver_index.get(cid)
                if k is None:
                    continue
                for lbl in days:
                    compat[k, inst.day_index[lbl], i] = True
            for cid, cents in p.revenue.items():
                k = inst.caregiver_index.get(cid)
                if k is not None:
                    revenue[k, i] = cents

        wlo = np.full((n_k, n_days), -1, dtype=np.int64)
        whi = np.full((n_k, n_days), -1, dtype=np.int64)
        wage = np.zeros(n_k, dtype=np.int64)
        for k, c in enumerate(inst.caregivers):
            wage[k] = c.wage_rate
            for lbl, tw in c.work_windows.items():
                d = inst.day_index[lbl]
                wlo[k, d] = tw.lo
                whi[k, d] = tw.hi

        order = sorted(range(1, n + 1), key=lambda i: inst.patients[i - 1].id)
        lex_rank = np.zeros(n + 1, dtype=np.int64)
        for rank, idx in enumerate(order):
            lex_rank[idx] = rank

        return InstanceArrays(
            n=n,
            n_days=n_days,
            n_caregivers=n_k,
            tbar=tbar,
            that=that,
            cost=cost,
            pbar=pbar,
            phat=phat,
            tlo=tlo,
            thi=thi,
            wlo=wlo,
            whi=whi,
            wage=wage,
            revenue=revenue,
            compat=compat,
            lex_rank=lex_rank,
            gamma_p=inst.budgets.gamma_p,
            gamma_t=inst.budgets.gamma_t,
            n_max=inst.max_patients_per_caregiver_day,
        )


# -- day patterns ---------------------------------------------------------


def day_patterns(patient: Patient, days: int) -> tuple[tuple[int, ...], ...]:
    """All visit-day patterns for a patient over ``days`` days (0-based indices).

    A pattern is a sorted tuple of day indices of size ``visits_required``
    where consecutive chosen days differ by at least ``min_gap_days + 1``.
    """
    return patterns_for(patient.visits_required, patient.min_gap_days, days)


def patterns_for(visits: int, gap: int, days: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for combo in itertools.combinations(range(days), visits):
        if all(b - a >= gap + 1 for a, b in zip(combo, combo[1:])):
            out.append(combo)
    return tuple(out)


# -- file format ----------------------------------------------------------


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def _parse_window(raw, what: str) -> TimeWindow:
    if not (isinstance(raw, (list, tuple)) and len(raw) == 2):
        raise ParseError(f"{what}: expected [lo, hi]")
    lo, hi = raw
    if not (isinstance(lo, int) and isinstance(hi, int)):
        raise ParseError(f"{what}: times must be integer minutes")
    return TimeWindow(lo, hi)


def _parse_matrix(raw, size: int, what: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=object)
    if arr.shape != (size, size):
        raise ParseError(f"{what}: expected a {size}x{size} matrix")
    try:
        out = np.asarray(raw, dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: entries must be integers") from exc
    return out


def load_instance(path) -> Instance:
    """Load and validate an instance file. See docs/instance-schema.md."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return instance_from_dict(raw)


def instance_from_dict(raw: dict) -> Instance:
    if not isinstance(raw, dict):
        raise ParseError("instance document must be a JSON object")
    for key in ("days", "caregivers", "patients", "travel", "budgets"):
        if key not in raw:
            raise ParseError(f"missing top-level key {key!r}")

    days = tuple(raw["days"])
    _require(len(days) >= 1, "at least one day required")
    _require(len(set(days)) == len(days), "day labels must be unique")

    caregivers = []
    for c in raw["caregivers"]:
        ww = {}
        for lbl, pair in c.get("work_windows", {}).items():
            _require(lbl in days, f"caregiver {c.get('id')}: unknown day {lbl!r}")
            ww[lbl] = _parse_window(pair, f"caregiver {c.get('id')} work window")
        _require(int(c["wage_rate"]) >= 0, f"caregiver {c.get('id')}: wage_rate must be >= 0")
        caregivers.append(Caregiver(id=str(c["id"]), wage_rate=int(c["wage_rate"]), work_windows=ww))
    _require(len({c.id for c in caregivers}) == len(caregivers), "caregiver ids must be unique")
    cg_ids = {c.id for c in caregivers}

    patients = []
    for p in raw["patients"]:
        pid = str(p["id"])
        kind = p["kind"]
        _require(kind in (EXISTING, NEW), f"patient {pid}: kind must be 'existing' or 'new'")
        visits = int(p["visits_required"])
        gap = int(p["min_gap_days"])
        _require(visits >= 1, f"patient {pid}: visits_required must be >= 1")
        _require(visits <= len(days), f"patient {pid}: visits_required exceeds horizon")
        _require(gap >= 0, f"patient {pid}: min_gap_days must be >= 0")
        wins = p.get("windows", {})
        _require(set(wins) == set(days), f"patient {pid}: windows must cover every day")
        windows = tuple(_parse_window(wins[d], f"patient {pid} window on {d}") for d in days)
        mean = int(p["service_mean"])
        dev = int(p["service_dev"])
        _require(mean >= 0 and dev >= 0, f"patient {pid}: service times must be >= 0")
        compat = {}
        for cid, dlist in p.get("compatibility", {}).items():
            _require(cid in cg_ids, f"patient {pid}: unknown caregiver {cid!r} in compatibility")
            for lbl in dlist:
                _require(lbl in days, f"patient {pid}: unknown day {lbl!r} in compatibility")
            compat[cid] = frozenset(dlist)
        revenue = {}
        for cid, cents in p.get("revenue", {}).items():
            _require(cid in cg_ids, f"patient {pid}: unknown caregiver {cid!r} in revenue")
            revenue[cid] = int(cents)

        pre = None
        if p.get("preassignment") is not None:
            pr = p["preassignment"]
            pre = (str(pr["caregiver"]), frozenset(pr["days"]))
        patient = Patient(
            id=pid,
            kind=kind,
            visits_required=visits,
            min_gap_days=gap,
            windows=windows,
            service_mean=mean,
            service_dev=dev,
            revenue=revenue,
            compatibility=compat,
            preassignment=pre,
        )
        patients.append(patient)
    _require(len({p.id for p in patients}) == len(patients), "patient ids must be unique")

    n = len(patients)
    traw = raw["travel"]
    mean = _parse_matrix(traw["mean"], n + 1, "travel.mean")
    braw = raw["budgets"]
    if "preset" in braw:
        preset = str(braw["preset"]).lower()
        _require(preset in BUDGET_PRESETS, f"unknown uncertainty preset {braw['preset']!r}")
        gamma_p, gamma_t = BUDGET_PRESETS[preset]
        if "dev" in traw:
            dev_m = _parse_matrix(traw["dev"], n + 1, "travel.dev")
        else:
            dev_m = np.rint(DEFAULT_DEV_FRACTION * mean).astype(np.int64)
    else:
        gamma_p = int(braw.get("gamma_p", 0))
        gamma_t = int(braw.get("gamma_t", 0))
        dev_m = _parse_matrix(traw["dev"], n + 1, "travel.dev")
    _require(gamma_p >= 0 and gamma_t >= 0, "budgets nonnegative")

    craw = traw["cost"]
    if isinstance(craw, dict):
        _require(set(craw) == set(days), "travel.cost: per-day costs must cover every day")
        cost = np.stack([_parse_matrix(craw[d], n + 1, f"travel.cost[{d}]") for d in days])
    elif craw and isinstance(craw[0][0], list):
        _require(len(craw) == len(days), "travel.cost: need one matrix per day")
        cost = np.stack([_parse_matrix(m, n + 1, "travel.cost") for m in craw])
    else:
        cost = np.stack([_parse_matrix(craw, n + 1, "travel.cost")] * len(days))

    limits = raw.get("limits", {})
    n_max = int(limits.get("max_patients_per_caregiver_day", 8))
    _require(n_max >= 1, "max_patients_per_caregiver_day must be >= 1")

    inst = Instance(
        days=days,
        caregivers=tuple(caregivers),
        patients=tuple(patients),
        travel=TravelMatrix(mean=mean, dev=dev_m, cost=cost),
        budgets=Budgets(gamma_p=gamma_p, gamma_t=gamma_t),
        max_patients_per_caregiver_day=n_max,
    )
    validate_instance(inst)
    return inst


def validate_instance(inst: Instance) -> None:
    """Check every model invariant; raise ValidationError naming the first violation."""
    n = inst.n
    for name, m in (("mean", inst.travel.mean), ("dev", inst.travel.dev)):
        _require(m.shape == (n + 1, n + 1), f"travel.{name}: wrong shape")
        _require((m >= 0).all(), f"travel.{name}: entries must be >= 0")
        _require((np.diag(m) == 0).all(), f"travel.{name}: diagonal must be 0")
    _require(inst.travel.cost.shape == (len(inst.days), n + 1, n + 1), "travel.cost: wrong shape")
    _require((inst.travel.cost >= 0).all(), "travel.cost: entries must be >= 0")
    for d in range(len(inst.days)):
        _require((np.diagonal(inst.travel.cost[d]) == 0).all(), "travel.cost: diagonal must be 0")
    _require(inst.budgets.gamma_p >= 0 and inst.budgets.gamma_t >= 0, "budgets nonnegative")

    for p in inst.patients:
        if p.kind == NEW:
            _require(p.preassignment is None, f"patient {p.id}: new patients have no preassignment")
            continue
        _require(p.preassignment is not None, f"patient {p.id}: existing patient without preassignment")
        cid, day_labels = p.preassignment
        _require(cid in inst.caregiver_index, f"patient {p.id}: preassigned caregiver {cid!r} does not exist")
        _require(
            len(day_labels) == p.visits_required,
            f"patient {p.id}: preassignment must cover exactly {p.visits_required} day(s)",
        )
        idxs = sorted(inst.day_index[lbl] for lbl in day_labels)
        _require(
            all(b - a >= p.min_gap_days + 1 for a, b in zip(idxs, idxs[1:])),
            f"patient {p.id}: preassigned days violate the minimum gap",
        )
        cg = inst.caregiver(cid)
        for lbl in day_labels:
            _require(
                lbl in p.compatibility.get(cid, ()),
                f"patient {p.id}: not compatible with {cid} on {lbl}",
            )
            _require(lbl in cg.work_windows, f"patient {p.id}: caregiver {cid} does not work on {lbl}")


def instance_to_dict(inst: Instance) -> dict:
    patients = []
    for p in inst.patients:
        entry = {
            "id": p.id,
            "kind": p.kind,
            "visits_required": p.visits_required,
            "min_gap_days": p.min_gap_days,
            "windows": {d: p.windows[i].as_pair() for i, d in enumerate(inst.days)},
            "service_mean": p.service_mean,
            "service_dev": p.service_dev,
            "revenue": {k: p.revenue[k] for k in sorted(p.revenue)},
            "compatibility": {k: sorted(p.compatibility[k]) for k in sorted(p.compatibility)},
        }
        if p.preassignment is not None:
            entry["preassignment"] = {
                "caregiver": p.preassignment[0],
                "days": sorted(p.preassignment[1], key=inst.day_index.get),
            }
        patients.append(entry)

    cost = inst.travel.cost
    if all((cost[d] == cost[0]).all() for d in range(len(inst.days))):
        cost_repr = cost[0].tolist()
    else:
        cost_repr = [cost[d].tolist() for d in range(len(inst.days))]

    return {
        "days": list(inst.days),
        "caregivers": [
            {
                "id": c.id,
                "wage_rate": c.wage_rate,
                "work_windows": {
                    d: c.work_windows[d].as_pair() for d in inst.days if d in c.work_windows
                },
            }
            for c in inst.caregivers
        ],
        "patients": patients,
        "travel": {
            "mean": inst.travel.mean.tolist(),
            "dev": inst.travel.dev.tolist(),
            "cost": cost_repr,
        },
        "budgets": {"gamma_p": inst.budgets.gamma_p, "gamma_t": inst.budgets.gamma_t},
        "limits": {"max_patients_per_caregiver_day": inst.max_patients_per_caregiver_day},
    }


def save_instance(inst: Instance, path) -> None:
    """Write the canonical form: sorted keys, two-space indent, trailing newline."""
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2, sort_keys=True) + "\n")
