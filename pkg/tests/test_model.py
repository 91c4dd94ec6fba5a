import numpy as np
import pytest
from utils_model import (
    ServiceRateCurve, Policy, Occupancy, Trajectory, validate, check
)
from utils_errors import ValidationError
from conftest import homogeneous


def constraints(spec, policy = Policy("random")):
    return {v.constraint for v in validate(spec, policy)}


def test_table1_is_valid(table1, table2):
    assert validate(table1, Policy("random")) == []
    assert validate(table2, Policy("jbt")) == []


def test_decreasing_total_rate_is_rejected():
    spec = homogeneous(0.5, [1.0, 0.9])
    assert "nondecreasing-total-rate" in constraints(spec)


def test_increasing_per_job_rate_is_rejected():
    spec = homogeneous(0.5, [1.0, 2.5])
    assert "nonincreasing-per-job-rate" in constraints(spec)


def test_decimal_rates_pass_monotonicity():
    # 0.8*3 is 2.4000000000000004 in binary, the per-job check must not trip on it
    assert validate(homogeneous(1.0, [0.8, 1.6, 2.4]), Policy("random")) == []


def test_stability_and_arrival_rate(table1):
    assert "stability" in constraints(table1.with_lambda(1.5))
    assert "arrival-rate" in constraints(table1.with_lambda(-0.1))
    assert validate(table1.with_lambda(0.0), Policy("jsq")) == []


def test_unit_rate_must_be_positive():
    assert "positive-unit-rate" in constraints(homogeneous(0.0, [0.0, 0.0]))


def test_type_fractions(table2):
    assert "type-fractions-sum" in constraints(table2.with_gammas([0.75, 0.3]))
    assert "type-fraction" in constraints(table2.with_gammas([1.2, -0.2]))


def test_policy_requirements(table1):
    no_mpl = homogeneous(1.25, [1.0, 1.1, 1.2, 1.3, 1.4, 1.5])
    assert "policy-mpl" in constraints(no_mpl, Policy("jbt"))
    assert "policy-d" in constraints(table1, Policy("jsqd"))
    assert "policy-control" in constraints(table1, Policy("jsq", p = 0.0))
    assert "mpl" in constraints(table1.with_mpl([11]))


def test_check_raises(table1):
    with pytest.raises(ValidationError) as e:
        check(table1.with_lambda(2.0), Policy("random"))
    assert e.value.violations[0].constraint == "stability"


@pytest.mark.parametrize("name, expected", [
    ("random", Policy("random")),
    ("JSQ", Policy("jsq")),
    ("JSQ(5)", Policy("jsqd", d = 5)),
    ("jsq2", Policy("jsqd", d = 2)),
    ("jsqd:20", Policy("jsqd", d = 20)),
])
def test_policy_from_name(name, expected):
    assert Policy.from_name(name) == expected


def test_policy_from_name_rejects_garbage():
    with pytest.raises(ValueError):
        Policy.from_name("round-robin")


def test_policy_labels():
    assert Policy("jsqd", d = 2).label == "JSQ(2)"
    assert Policy("jsq", p = 0.3).label == "JSQ p=0.3"
    assert Policy("jsqd", d = 5, p = 0.5).slug == "jsq5_p0.5"


def test_occupancy_helpers(table2):
    empty = Occupancy.empty(table2)
    assert np.allclose(empty.masses, [0.75, 0.25])
    assert empty.min_level() == 0
    back = Occupancy.from_flat(empty.flat, table2)
    assert back.allclose(empty, atol = 0.0)

    x = Occupancy([[0.0, 0.0, 0.005, 0.995]])
    assert x.min_level() == 2
    assert x.min_level(0.01) == 3
    assert x.violations([1.0]) == []
    assert x.violations([0.9])[0].constraint == "occupancy-mass"


def test_occupancy_is_read_only(table1):
    v = Occupancy.empty(table1)
    with pytest.raises(ValueError):
        v[0][0] = 0.5


def test_service_curve_buffer():
    curve = ServiceRateCurve.from_mu([1.0, 1.1, 1.2])
    assert curve.buffer == 3
    assert curve.rates[0] == 0.0


def test_trajectory_frame_and_distance(table1):
    v0 = Occupancy.empty(table1)
    v1 = Occupancy([np.r_[0.5, 0.5, np.zeros(9)]])
    a = Trajectory([0.0, 1.0], [v0, v1])
    b = Trajectory([0.0, 1.0], [v0, v0])
    frame = a.to_frame()
    assert list(frame.columns) == ["t", "k", "i", "fraction"]
    assert len(frame) == 2*11
    assert a.distance(b) == pytest.approx(0.5)
    assert a.distance(b, exclude = [1.0], window = 0.1) == 0.0
    assert list(a.kink_times()) == []
