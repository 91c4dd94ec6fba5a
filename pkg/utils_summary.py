import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid
from scipy.stats import kstest


def replication_summary(data, by, column = "value"):
    """
    Mean and standard error across replications, per group.

    Example output (by = ["policy", "n"]):
      policy     n      mean        se
    0    JIQ    10  3.182541  0.011248
    1    JIQ   100  2.953310  0.004012
    2    JSQ    10  2.920137  0.009764
    """
    return (data
        .groupby(by, sort = False)
        .agg(
            mean = (column, "mean"),
            se = (column, "sem")
        ).reset_index())


def density_cdf(t_grid, density):
    """
    CDF of a density sampled on t_grid, by the cumulative trapezoid rule from
    t = 0 (the first sample is held flat down to 0). Flagged (NaN) samples
    count as 0.
    """
    t = np.asarray(t_grid, dtype = float)
    h = np.nan_to_num(np.asarray(density, dtype = float))
    if t[0] > 0:
        t = np.insert(t, 0, 0.0)
        h = np.insert(h, 0, h[0])
    return t, np.clip(cumulative_trapezoid(h, t, initial = 0.0), 0.0, 1.0)


def ks_distance(samples, t_grid, density):
    """Kolmogorov-Smirnov statistic of the samples against the integrated density."""
    t, cdf = density_cdf(t_grid, density)
    return float(kstest(
        np.asarray(samples, dtype = float),
        lambda x: np.interp(x, t, cdf, left = 0.0, right = 1.0)
    ).statistic)


def histogram_frame(samples, edges):
    counts, edges = np.histogram(samples, bins = edges, density = True)
    return pd.DataFrame({
        "left": edges[:-1],
        "right": edges[1:],
        "density": counts
    })
