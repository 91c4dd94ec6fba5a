import numpy as np
import pytest
from scipy.special import comb
from utils_model import Policy
from utils_ctmc import states, finite_dispatch, generator, stationary_distribution, stationary_occupancy
from utils_stationary import solve, solve_random
from utils_sim import replicate
from conftest import homogeneous


def test_states_enumeration():
    assert states(2, 1) == [(0, 2), (1, 1), (2, 0)]
    space = states(5, 3)
    assert len(space) == comb(8, 3, exact = True)
    assert all(sum(c) == 5 for c in space)
    assert len(set(space)) == len(space)


def test_jsqd_sees_every_server_when_d_covers_them():
    spec = homogeneous(0.5, [1.0])
    probs = finite_dispatch((1, 1), spec, Policy("jsqd", d = 2))
    assert list(probs) == [1.0, 0.0]
    # d larger than the cluster is clamped
    assert list(finite_dispatch((1, 1), spec, Policy("jsqd", d = 7))) == [1.0, 0.0]


def test_jsqd_hypergeometric_probabilities():
    spec = homogeneous(0.5, [1.0, 1.0])
    # 4 servers: one empty, two with one job, one full; sample 2 of them
    probs = finite_dispatch((1, 2, 1), spec, Policy("jsqd", d = 2))
    assert probs == pytest.approx([3/6, 3/6, 0.0])
    assert probs.sum() == pytest.approx(1.0)


def test_partial_control_mixes_in_random():
    spec = homogeneous(0.5, [1.0, 1.0])
    probs = finite_dispatch((1, 2, 1), spec, Policy("jsq", p = 0.4))
    assert probs == pytest.approx(0.4*np.array([1.0, 0, 0]) + 0.6*np.array([0.25, 0.5, 0.25]))


@pytest.mark.parametrize("policy", [Policy("random"), Policy("jiq"), Policy("jsq"), Policy("jsqd", d = 2)])
def test_generator_rows_sum_to_zero(policy):
    spec = homogeneous(0.7, [1.0, 1.0, 1.2])
    space, Q = generator(4, spec, policy)
    assert Q.shape == (len(space), len(space))
    assert np.allclose(Q.sum(axis = 1), 0.0, atol = 1e-12)
    assert np.all(Q - np.diag(np.diag(Q)) >= 0)


def test_generator_needs_one_type(table2):
    with pytest.raises(ValueError):
        generator(3, table2, Policy("random"))


def test_stationary_distribution_is_a_distribution():
    spec = homogeneous(0.7, [1.0, 1.0])
    space, pi = stationary_distribution(5, spec, Policy("jsq"))
    assert pi.sum() == pytest.approx(1.0)
    assert np.all(pi >= 0)
    _, Q = generator(5, spec, Policy("jsq"))
    assert np.max(np.abs(pi @ Q)) < 1e-10


def test_random_exact_matches_limit():
    # Random dispatch splits into independent single-server queues at any size
    spec = homogeneous(0.8, [1.0, 1.2])
    exact = stationary_occupancy(3, spec, Policy("random"))
    assert exact.distance(solve_random(spec).nu) < 1e-10


@pytest.mark.parametrize("policy", [Policy("jiq"), Policy("jsq"), Policy("jsqd", d = 2)])
def test_exact_approaches_limit_as_n_grows(policy):
    spec = homogeneous(0.7, [1.0, 1.0])
    limit = solve(spec, policy).nu
    gaps = [stationary_occupancy(n, spec, policy).distance(limit) for n in (3, 6, 12, 24)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


@pytest.mark.slow
@pytest.mark.parametrize("policy", [
    Policy("random"), Policy("jiq"), Policy("jsq"), Policy("jsqd", d = 2), Policy("jbt")
])
def test_simulation_agrees_with_exact_solve(policy):
    spec = homogeneous(0.7, [1.0, 1.0], mpl = 2)
    exact = stationary_occupancy(3, spec, policy)[0]
    results = replicate(spec, policy, 3, 2000.0, 42, 100.0, 16)
    averages = np.array([res.time_average[0] for res in results])
    se = averages.std(axis = 0, ddof = 1)/np.sqrt(len(results))
    assert np.all(np.abs(averages.mean(axis = 0) - exact) <= 4*se + 2e-3)
