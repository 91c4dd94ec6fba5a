import json
import pytest
from utils_model import ClusterSpec, ServerType, ServiceRateCurve
from utils_dispatch import ServerPool

# Homogeneous set: one type, rates grow up to 1.5 and stay there
TABLE1_MU = [1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.5, 1.5, 1.5, 1.5]
# Heterogeneous set: a constant-rate type and a type that speeds up to 4.0
TYPE1_MU = [1.0]*10
TYPE2_MU = [0.8, 1.6, 2.4, 3.2, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0]


def homogeneous(lam, mu, mpl = None):
    return ClusterSpec(lam = lam, types = (ServerType(gamma = 1.0, curve = ServiceRateCurve.from_mu(mu), mpl = mpl),))


@pytest.fixture
def table1():
    return homogeneous(1.25, TABLE1_MU, mpl = 5)


@pytest.fixture
def table2():
    return ClusterSpec(lam = 1.6, types = (
        ServerType(gamma = 0.75, curve = ServiceRateCurve.from_mu(TYPE1_MU), mpl = 1),
        ServerType(gamma = 0.25, curve = ServiceRateCurve.from_mu(TYPE2_MU), mpl = 5),
    ))


@pytest.fixture
def table1_b5(table1):
    return table1.with_buffer(5)


@pytest.fixture
def table1_doc():
    return {
        "lambda": 1.25,
        "types": [{"gamma": 1.0, "mu": TABLE1_MU, "mpl": 5}],
        "policy": {"kind": "random"},
        "run": {"n_servers": 50, "horizon": 20.0, "dt": 0.01, "sample_interval": 1.0, "seed": 7}
    }


@pytest.fixture
def write_config(tmp_path):
    def write(doc, name = "config.json"):
        path = tmp_path/name
        path.write_text(json.dumps(doc))
        return str(path)
    return write


def pool_with_lengths(spec, lengths):
    """Single-type pool where server s holds lengths[s] jobs."""
    pool = ServerPool(spec, [len(lengths)])
    for s, length in enumerate(lengths):
        pool.move(s, length)
    return pool
