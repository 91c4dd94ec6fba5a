import numpy as np
import pytest
from utils_model import Occupancy, Policy
from utils_dispatch import (
    f_random, f_jiq, f_jsq, f_jsqd_limit, f_jbt, f_partial, dispatch_field,
    ServerPool, sample_target, LOSS
)
from conftest import homogeneous, pool_with_lengths


def as_arrays(field):
    return [np.asarray(p) for p in field.parts]


def assert_same_field(a, b, atol = 1e-12):
    for pa, pb in zip(a.parts, b.parts):
        assert np.allclose(pa, pb, atol = atol, rtol = 0)
    assert a.loss == pytest.approx(b.loss, abs = atol)


def random_state(rng, sizes, masses):
    return Occupancy([m*rng.dirichlet(np.ones(n)) for n, m in zip(sizes, masses)])


def test_random_uniform_state():
    x = Occupancy([np.full(11, 1/11)])
    f = f_random(x)
    assert np.allclose(f[0][:10], 1/11)
    assert f[0][10] == 0.0
    assert f.loss == pytest.approx(1/11)


def test_random_full_type_is_all_loss():
    x = Occupancy([[0.0, 0.0, 0.6], [0.2, 0.2, 0.0]])
    f = f_random(x)
    assert f[0].sum() == 0.0
    assert f.loss == pytest.approx(0.6)


def test_jiq_splits_by_idle_share():
    x = Occupancy([[0.2, 0.3, 0.0], [0.3, 0.2, 0.0]])
    f = f_jiq(x)
    assert f[0][0] == pytest.approx(0.4)
    assert f[1][0] == pytest.approx(0.6)


def test_jiq_without_idle_queues_is_random():
    x = Occupancy([[0.0, 0.3, 0.2], [0.0, 0.4, 0.1]])
    assert_same_field(f_jiq(x), f_random(x), atol = 0.0)


def test_jsq_targets_shortest_level():
    x = Occupancy([np.r_[0, 0, 0, 0.5, 0.5, np.zeros(6)]])
    f = f_jsq(x)
    assert f[0][3] == 1.0
    assert f[0].sum() == 1.0


def test_jsq_saturated_is_all_loss():
    f = f_jsq(Occupancy([[0.0, 0.0, 1.0]]))
    assert f.loss == 1.0 and f.admitted == 0.0


def test_jsqd_two_choices():
    f = f_jsqd_limit(Occupancy([[0.5, 0.5]]), 2)
    assert f[0][0] == pytest.approx(0.75)
    assert f.loss == pytest.approx(0.25)


def test_jsqd_reductions():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = random_state(rng, [6, 4], [0.6, 0.4])
        assert_same_field(f_jsqd_limit(x, 1), f_random(x))
    x = Occupancy([np.r_[0, 0, 0, 0.5, 0.5, np.zeros(6)]])
    assert_same_field(f_jsqd_limit(x, 10**6), f_jsq(x), atol = 1e-9)


def test_jbt_reductions():
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = random_state(rng, [6, 4], [0.6, 0.4])
        assert_same_field(f_jbt(x, [1, 1]), f_jiq(x))
        # No full queues: thresholds at the buffer behave like Random
        parts = [np.r_[p[:-1], 0.0] for p in x.parts]
        parts = [p*m/p.sum() for p, m in zip(parts, [0.6, 0.4])]
        y = Occupancy(parts)
        assert_same_field(f_jbt(y, [5, 3]), f_random(y))


def test_jbt_all_above_threshold_is_random():
    x = Occupancy([[0.0, 0.0, 0.5, 0.5]])
    assert_same_field(f_jbt(x, [2]), f_random(x), atol = 0.0)


def test_partial_control():
    rng = np.random.default_rng(3)
    x = random_state(rng, [11], [1.0])
    inner = f_jsq(x)
    assert f_partial(inner, x, 1.0) is inner
    assert_same_field(f_partial(f_random(x), x, 0.5), f_random(x))
    mixed = f_partial(inner, x, 0.3)
    assert np.allclose(mixed[0], 0.3*inner[0] + 0.7*f_random(x)[0])


@pytest.mark.parametrize("policy", [
    Policy("random"), Policy("jiq"), Policy("jsq"), Policy("jsqd", d = 3),
    Policy("jbt"), Policy("jsq", p = 0.4)
])
def test_fields_are_probabilities(table2, policy):
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = random_state(rng, [11, 11], [0.75, 0.25])
        f = dispatch_field(x, table2, policy)
        assert all(np.all(p >= 0) for p in f.parts)
        assert all(p[-1] == 0 for p in f.parts)
        assert f.admitted + f.loss == pytest.approx(1.0, abs = 1e-12)


def test_sample_jiq_picks_idle(table1):
    rng = np.random.default_rng(5)
    pool = pool_with_lengths(table1, [0, 5])
    for _ in range(50):
        assert sample_target(pool, table1, Policy("jiq"), rng) == 0


def test_sample_jsq_ties_are_uniform(table1):
    rng = np.random.default_rng(6)
    pool = pool_with_lengths(table1, [2, 2, 7])
    picks = [sample_target(pool, table1, Policy("jsq"), rng) for _ in range(4000)]
    share = np.mean(np.array(picks) == 0)
    assert set(picks) == {0, 1}
    assert share == pytest.approx(0.5, abs = 0.03)


def test_sample_jsqd_clamps_d(table1):
    rng = np.random.default_rng(7)
    pool = pool_with_lengths(table1, [4, 1])
    for _ in range(50):
        assert sample_target(pool, table1, Policy("jsqd", d = 5), rng) == 1


def test_sample_full_server_is_loss():
    spec = homogeneous(0.5, [1.0, 1.0])
    rng = np.random.default_rng(8)
    pool = pool_with_lengths(spec, [2, 2])
    assert sample_target(pool, spec, Policy("random"), rng) == LOSS
    assert sample_target(pool, spec, Policy("jsq"), rng) == LOSS


def test_sampling_matches_mean_field_field(table1):
    """Frozen state with 10^4 servers: JSQ(2) choice frequencies vs the limit field."""
    rng = np.random.default_rng(9)
    lengths = [0]*4000 + [1]*3000 + [2]*3000
    pool = pool_with_lengths(table1, lengths)
    draws = 20000
    seen = np.bincount(
        [pool.length[sample_target(pool, table1, Policy("jsqd", d = 2), rng)] for _ in range(draws)],
        minlength = 3
    )
    expected = f_jsqd_limit(pool.occupancy(), 2)[0][:3]
    assert np.allclose(expected, [0.64, 0.27, 0.09])
    sigma = np.sqrt(expected*(1 - expected)/draws)
    assert np.all(np.abs(seen/draws - expected) < 4*sigma)


def test_pool_moves_keep_buckets_consistent(table2):
    pool = ServerPool(table2, (3, 1))
    pool.move(0, 2)
    pool.move(3, 1)
    pool.move(0, 1)
    assert pool.counts(0)[:3] == [2, 1, 0]
    assert pool.counts(1)[:2] == [0, 1]
    occ = pool.occupancy()
    assert np.allclose(occ.masses, [0.75, 0.25])
