import numpy as np
import pandas as pd
import pytest
from utils_summary import replication_summary, density_cdf, ks_distance, histogram_frame


def test_replication_summary():
    data = pd.DataFrame({
        "policy": ["JSQ"]*3 + ["JIQ"]*3,
        "value": [1.0, 2.0, 3.0, 4.0, 4.0, 4.0]
    })
    out = replication_summary(data, ["policy"])
    assert list(out["policy"]) == ["JSQ", "JIQ"]
    assert list(out["mean"]) == pytest.approx([2.0, 4.0])
    assert out["se"].iloc[0] == pytest.approx(1/np.sqrt(3))
    assert out["se"].iloc[1] == 0.0


def test_density_cdf_of_exponential():
    t = np.linspace(0.01, 30, 3000)
    grid, cdf = density_cdf(t, np.exp(-t))
    assert grid[0] == 0.0
    assert cdf[0] == 0.0
    assert np.allclose(cdf, 1 - np.exp(-grid), atol = 1e-3)


def test_ks_distance_small_for_matching_samples():
    rng = np.random.default_rng(3)
    samples = rng.exponential(1.0, 5000)
    t = np.linspace(0.005, 20, 4000)
    assert ks_distance(samples, t, np.exp(-t)) < 0.03
    assert ks_distance(samples, t, 0.5*np.exp(-0.5*t)) > 0.15


def test_histogram_integrates_to_one():
    rng = np.random.default_rng(4)
    frame = histogram_frame(rng.exponential(2.0, 1000), np.linspace(0, 40, 81))
    assert list(frame.columns) == ["left", "right", "density"]
    assert np.sum(frame["density"]*(frame["right"] - frame["left"])) == pytest.approx(1.0)
