"""The integrated weekly solution and its JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError
from .model import Instance
from .robust_time import label_route

STATUS_OPTIMAL = "optimal"
STATUS_TIME_LIMIT = "time_limit"


@dataclass(frozen=True, eq=False)
class PlanRoute:
    caregiver: str
    day: int  # index into Instance.days
    route: tuple  # patient ids in visit order
    worst_start: dict  # patient id -> worst-case start, minutes
    worst_return: int
    travel_cost: int
    wage_cost: int
    revenue: int


@dataclass(eq=False)
class Plan:
    accepted: tuple  # new patient ids taken on
    assignment: dict  # patient id -> caregiver id, for every served patient
    routes: tuple  # PlanRoute, only days with visits
    revenue: int
    travel_cost: int
    wage_cost: int
    profit: int
    budgets: tuple  # (gamma_p, gamma_t)
    status: str = STATUS_OPTIMAL


def plan_from_columns(inst: Instance, columns: dict, status: str = STATUS_OPTIMAL) -> Plan:
    """Assemble a Plan from one WeeklyColumn per caregiver."""
    routes = []
    assignment = {}
    accepted = set()
    revenue = travel = wage = 0
    for c in inst.caregivers:
        col = columns[c.id]
        for d, r in enumerate(col.routes):
            if not r.route:
                continue
            labels = r.labels or label_route(r.route, d, c.id, inst)
            worst = {pid: int(labels.worst_start(p)) for p, pid in enumerate(r.route)}
            routes.append(
                PlanRoute(
                    caregiver=c.id,
                    day=d,
                    route=tuple(r.route),
                    worst_start=worst,
                    worst_return=r.ret,
                    travel_cost=r.travel_cost,
                    wage_cost=r.wage_cost,
                    revenue=r.revenue,
                )
            )
            revenue += r.revenue
            travel += r.travel_cost
            wage += r.wage_cost
            for pid in r.route:
                assignment[pid] = c.id
                if inst.patient(pid).is_new:
                    accepted.add(pid)
    return Plan(
        accepted=tuple(sorted(accepted)),
        assignment=assignment,
        routes=tuple(sorted(routes, key=lambda r: (r.caregiver, r.day))),
        revenue=int(revenue),
        travel_cost=int(travel),
        wage_cost=int(wage),
        profit=int(revenue - travel - wage),
        budgets=(inst.budgets.gamma_p, inst.budgets.gamma_t),
        status=status,
    )


def plan_to_dict(plan: Plan, inst: Instance) -> dict:
    return {
        "status": plan.status,
        "accepted": list(plan.accepted),
        "assignment": {pid: plan.assignment[pid] for pid in sorted(plan.assignment)},
        "routes": [
            {
                "caregiver": r.caregiver,
                "day": inst.days[r.day],
                "route": list(r.route),
                "worst_start": {pid: r.worst_start[pid] for pid in r.route},
                "worst_return": r.worst_return,
                "travel_cost": r.travel_cost,
                "wage_cost": r.wage_cost,
                "revenue": r.revenue,
            }
            for r in plan.routes
        ],
        "profit": {
            "revenue": plan.revenue,
            "travel_cost": plan.travel_cost,
            "wage_cost": plan.wage_cost,
            "profit": plan.profit,
        },
        "budgets": {"gamma_p": plan.budgets[0], "gamma_t": plan.budgets[1]},
    }


def plan_from_dict(raw: dict, inst: Instance) -> Plan:
    try:
        routes = tuple(
            PlanRoute(
                caregiver=r["caregiver"],
                day=inst.day_index[r["day"]],
                route=tuple(r["route"]),
                worst_start={pid: int(v) for pid, v in r.get("worst_start", {}).items()},
                worst_return=int(r.get("worst_return", 0)),
                travel_cost=int(r.get("travel_cost", 0)),
                wage_cost=int(r.get("wage_cost", 0)),
                revenue=int(r.get("revenue", 0)),
            )
            for r in raw["routes"]
        )
        profit = raw.get("profit", {})
        budgets = raw.get("budgets", {})
        return Plan(
            accepted=tuple(raw.get("accepted", [])),
            assignment=dict(raw.get("assignment", {})),
            routes=routes,
            revenue=int(profit.get("revenue", 0)),
            travel_cost=int(profit.get("travel_cost", 0)),
            wage_cost=int(profit.get("wage_cost", 0)),
            profit=int(profit.get("profit", 0)),
            budgets=(int(budgets.get("gamma_p", 0)), int(budgets.get("gamma_t", 0))),
            status=raw.get("status", STATUS_OPTIMAL),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed plan document: {exc}") from exc


def save_plan(plan: Plan, inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(plan, inst), indent=2, sort_keys=True) + "\n")


def load_plan(path, inst: Instance) -> Plan:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return plan_from_dict(raw, inst)
