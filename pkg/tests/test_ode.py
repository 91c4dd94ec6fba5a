import numpy as np
import pytest
from utils_model import Occupancy, Policy
from utils_ode import rhs, residual, integrate, solve_to_stationarity, project_simplex
from utils_stationary import solve_random, solve_jsqd, solve_jsq, solve_jiq


def test_rhs_from_empty(table2):
    for policy in (Policy("random"), Policy("jsq"), Policy("jbt")):
        d = rhs(Occupancy.empty(table2), table2, policy)
        for dv, g in zip(d, table2.gammas):
            assert dv[0] == pytest.approx(-1.6*g)
            assert dv[1] == pytest.approx(1.6*g)
            assert np.all(dv[2:] == 0)


def test_rhs_conserves_mass(table2):
    rng = np.random.default_rng(0)
    for policy in (Policy("random"), Policy("jiq"), Policy("jsqd", d = 2), Policy("jsq", p = 0.5)):
        x = Occupancy([g*rng.dirichlet(np.ones(11)) for g in table2.gammas])
        for dv in rhs(x, table2, policy):
            assert abs(dv.sum()) < 1e-12


def test_random_stationary_point_has_zero_rhs(table1):
    report = solve_random(table1)
    assert residual(report.nu, table1, Policy("random")) < 1e-12


def test_no_arrivals_gives_constant_trajectory(table1):
    spec = table1.with_lambda(0.0)
    traj = integrate(Occupancy.empty(spec), spec, Policy("jsq"), 5.0, dt = 0.01, sample_interval = 1.0)
    assert list(traj.times) == pytest.approx([0, 1, 2, 3, 4, 5])
    for state in traj.states:
        assert state.allclose(Occupancy.empty(spec), atol = 0.0)


def test_mass_conserved_along_trajectory(table2):
    traj = integrate(Occupancy.empty(table2), table2, Policy("jsq"), 20.0, dt = 0.01, sample_interval = 0.5)
    for state in traj.states:
        assert np.allclose(state.masses, [0.75, 0.25], atol = 1e-9)
        assert all(np.all(p >= 0) for p in state)


def test_jsqd_trajectory_settles(table1):
    traj = integrate(Occupancy.empty(table1), table1, Policy("jsqd", d = 2), 200.0, dt = 0.01, sample_interval = 10.0)
    assert residual(traj.final, table1, Policy("jsqd", d = 2)) < 1e-6


def test_midpoint_is_second_order(table1):
    v0 = Occupancy.empty(table1)
    finals = [
        integrate(v0, table1, Policy("random"), 5.0, dt = dt).final
        for dt in (0.02, 0.01, 0.005)
    ]
    ratio = finals[0].distance(finals[1])/finals[1].distance(finals[2])
    assert 3.0 < ratio < 5.0


def test_jsq_trajectory_has_kinks(table1):
    traj = integrate(Occupancy.empty(table1), table1, Policy("jsq"), 30.0, dt = 0.01, sample_interval = 0.1)
    kinks = traj.kink_times(threshold = 0.05)
    assert len(kinks) >= 2
    assert traj.final.min_level(0.05) == 3


def test_jsq_trajectory_reaches_upkeep_point(table1):
    traj = integrate(Occupancy.empty(table1), table1, Policy("jsq"), 100.0, dt = 2e-3, sample_interval = 10.0)
    nu = traj.final[0]
    assert nu[3] == pytest.approx(0.5, abs = 5e-3)
    assert nu[4] == pytest.approx(0.5, abs = 5e-3)
    assert traj.final.distance(solve_jsq(table1).nu) < 5e-3


def test_supercritical_jiq_trajectory_reaches_upkeep_point(table1):
    traj = integrate(Occupancy.empty(table1), table1, Policy("jiq"), 200.0, dt = 5e-3, sample_interval = 50.0)
    target = solve_jiq(table1).nu
    assert traj.final[0][1] == pytest.approx(target[0][1], abs = 1e-2)
    assert traj.final.distance(target) < 1e-2


def test_heterogeneous_jsq_trajectory_leaves_level_one(table2):
    traj = integrate(Occupancy.empty(table2), table2, Policy("jsq"), 100.0, dt = 2e-3, sample_interval = 10.0)
    assert traj.final.distance(solve_jsq(table2).nu) < 1e-2


def test_stationarity_matches_closed_form(table1):
    v = solve_to_stationarity(Occupancy.empty(table1), table1, Policy("random"))
    assert v.distance(solve_random(table1).nu) < 1e-7


def test_subcritical_jiq_lives_on_zero_and_one(table1):
    spec = table1.with_lambda(0.95)
    v = solve_to_stationarity(Occupancy.empty(spec), spec, Policy("jiq"))
    assert v[0][2:].sum() < 1e-8
    assert v[0][1] == pytest.approx(0.95, abs = 1e-6)


def test_jbt_settles_below_threshold(table1):
    v = solve_to_stationarity(Occupancy.empty(table1), table1, Policy("jbt"))
    assert v[0][6:].sum() < 1e-8
    assert v[0][:5].sum() > 0


def test_stationarity_agrees_with_direct_solve(table1):
    v = solve_to_stationarity(Occupancy.empty(table1), table1, Policy("jsqd", d = 2))
    assert v.distance(solve_jsqd(table1, 2).nu) < 1e-6


def test_project_simplex():
    out = project_simplex(np.array([0.7, -0.1, 0.5]), 1.0)
    assert out.sum() == pytest.approx(1.0)
    assert np.all(out >= 0)
    assert np.allclose(project_simplex(np.array([0.25, 0.75]), 1.0), [0.25, 0.75])
