"""Shared helpers: hand-built instances for worked examples and small
generated instances for randomized checks."""

from __future__ import annotations

import pytest

from rhhc.instance_gen import generate
from rhhc.model import Instance, instance_from_dict


def build_instance(
    *,
    days=("Mon",),
    caregivers=None,
    patients=None,
    mean=None,
    dev=None,
    cost=None,
    gamma_p=0,
    gamma_t=0,
    n_max=8,
) -> Instance:
    """Assemble an instance dict and run it through the validating loader."""
    caregivers = caregivers or [
        {"id": "k1", "wage_rate": 50, "work_windows": {d: [0, 1440] for d in days}}
    ]
    patients = patients or []
    n = len(patients)
    if mean is None:
        mean = [[0] * (n + 1) for _ in range(n + 1)]
    if dev is None:
        dev = [[0] * (n + 1) for _ in range(n + 1)]
    if cost is None:
        cost = [[0] * (n + 1) for _ in range(n + 1)]
    return instance_from_dict(
        {
            "days": list(days),
            "caregivers": caregivers,
            "patients": patients,
            "travel": {"mean": mean, "dev": dev, "cost": cost},
            "budgets": {"gamma_p": gamma_p, "gamma_t": gamma_t},
            "limits": {"max_patients_per_caregiver_day": n_max},
        }
    )


def patient(
    pid,
    *,
    days=("Mon",),
    kind="new",
    visits=1,
    gap=0,
    window=(0, 1440),
    windows=None,
    service_mean=30,
    service_dev=0,
    revenue=10000,
    caregivers=("k1",),
    preassignment=None,
):
    return {
        "id": pid,
        "kind": kind,
        "visits_required": visits,
        "min_gap_days": gap,
        "windows": windows or {d: list(window) for d in days},
        "service_mean": service_mean,
        "service_dev": service_dev,
        "revenue": {k: revenue for k in caregivers},
        "compatibility": {k: list(days) for k in caregivers},
        **({"preassignment": preassignment} if preassignment else {}),
    }


def symmetric(n, base, depot_row=None):
    """(n+1)x(n+1) matrix with ``base`` off-diagonal, optional depot row."""
    m = [[0 if i == j else base for j in range(n + 1)] for i in range(n + 1)]
    if depot_row is not None:
        for j, v in enumerate(depot_row):
            m[0][j + 1] = v
            m[j + 1][0] = v
    return m


def tiny_generated(seed: int, **overrides):
    params = dict(
        region=["t20", "t60"][(seed // 3) % 2],
        discipline=["nursing", "pt"][seed % 2],
        tw=["wide", "narrow", "tight"][seed % 3],
        uncertainty=["none", "low"][seed % 2],
        n_existing=seed % 3,
        n_new_per_day=1 if seed % 4 else 0,
        seed=seed,
        n_caregivers=1 + seed % 2,
        n_days=2,
    )
    params.update(overrides)
    return generate(**params)


@pytest.fixture(scope="session")
def small_medium_instance():
    return generate(
        "t20", "nursing", "narrow", "low",
        n_existing=6, n_new_per_day=1, seed=3, n_caregivers=2, n_days=3,
    )
