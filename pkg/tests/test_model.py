import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import build_instance, patient
from rhhc.errors import ParseError, ValidationError
from rhhc.model import (
    Patient,
    TimeWindow,
    day_patterns,
    instance_from_dict,
    load_instance,
    patterns_for,
    save_instance,
)


def test_empty_instance_loads():
    inst = build_instance(days=("Mon",))
    assert inst.n == 0
    assert len(inst.caregivers) == 1


def test_negative_budget_rejected():
    with pytest.raises(ValidationError, match="budgets nonnegative"):
        build_instance(gamma_p=-1)


def test_uncertainty_preset_medium(tmp_path):
    doc = {
        "days": ["Mon"],
        "caregivers": [{"id": "k1", "wage_rate": 50, "work_windows": {"Mon": [0, 1440]}}],
        "patients": [patient("p1", service_mean=30)],
        "travel": {"mean": [[0, 13], [13, 0]], "cost": [[0, 2], [2, 0]]},
        "budgets": {"preset": "medium"},
    }
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(doc))
    inst = load_instance(path)
    assert (inst.budgets.gamma_p, inst.budgets.gamma_t) == (4, 4)
    assert (inst.travel.dev == np.rint(0.2 * inst.travel.mean)).all()


def test_round_trip_is_byte_identical(tmp_path):
    inst = build_instance(
        days=("Mon", "Tue"),
        caregivers=[
            {"id": "k1", "wage_rate": 45, "work_windows": {"Mon": [540, 1020], "Tue": [540, 1020]}}
        ],
        patients=[
            patient(
                "e1",
                days=("Mon", "Tue"),
                kind="existing",
                window=(600, 700),
                preassignment={"caregiver": "k1", "days": ["Mon"]},
            )
        ],
        mean=[[0, 10], [10, 0]],
        dev=[[0, 2], [2, 0]],
        cost=[[0, 3], [3, 0]],
        gamma_p=1,
        gamma_t=1,
    )
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    save_instance(inst, first)
    save_instance(load_instance(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_malformed_json_raises_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_instance(path)


def test_missing_file_raises_parse_error(tmp_path):
    with pytest.raises(ParseError):
        load_instance(tmp_path / "nope.json")


def test_existing_without_preassignment_rejected():
    with pytest.raises(ValidationError, match="without preassignment"):
        build_instance(patients=[patient("e1", kind="existing")])


def test_new_with_preassignment_rejected():
    with pytest.raises(ValidationError, match="no preassignment"):
        build_instance(
            patients=[patient("n1", preassignment={"caregiver": "k1", "days": ["Mon"]})]
        )


def test_preassignment_gap_enforced():
    with pytest.raises(ValidationError, match="minimum gap"):
        build_instance(
            days=("Mon", "Tue"),
            patients=[
                patient(
                    "e1",
                    days=("Mon", "Tue"),
                    kind="existing",
                    visits=2,
                    gap=1,
                    preassignment={"caregiver": "k1", "days": ["Mon", "Tue"]},
                )
            ],
        )


def test_nonzero_diagonal_rejected():
    with pytest.raises(ValidationError, match="diagonal"):
        build_instance(patients=[patient("p1")], mean=[[0, 5], [5, 1]])


def _patient(visits, gap):
    return Patient(
        id="x",
        kind="new",
        visits_required=visits,
        min_gap_days=gap,
        windows=(TimeWindow(0, 1440),) * 5,
        service_mean=30,
        service_dev=0,
        revenue={},
        compatibility={},
    )


def test_day_patterns_singletons():
    assert day_patterns(_patient(1, 0), 5) == ((0,), (1,), (2,), (3,), (4,))


def test_day_patterns_pairs_with_gap():
    got = day_patterns(_patient(2, 1), 5)
    assert got == ((0, 2), (0, 3), (0, 4), (1, 3), (1, 4), (2, 4))


def test_day_patterns_triple_with_gap():
    assert day_patterns(_patient(3, 1), 5) == ((0, 2, 4),)


@given(
    visits=st.integers(1, 4),
    gap=st.integers(0, 3),
    days=st.integers(1, 7),
)
def test_day_patterns_window_property(visits, gap, days):
    """Each pattern has at most one visit in any run of gap+1 consecutive days."""
    for pat in patterns_for(visits, gap, days):
        assert len(pat) == visits
        for start in range(days):
            window = set(range(start, min(start + gap + 1, days)))
            assert len(window & set(pat)) <= 1


def test_instance_requires_all_top_level_keys():
    with pytest.raises(ParseError, match="missing top-level key"):
        instance_from_dict({"days": ["Mon"]})
