import logging
import pandas as pd
from utils_model import Occupancy
from utils_ode import integrate
from utils_sim import replicate
from utils_errors import ConfigError

logger = logging.getLogger(__name__)


def average_trajectories(results):
    """Mean occupancy over replications, same `t, k, i, fraction` layout as a single run."""
    frames = [res.trajectory.to_frame() for res in results]
    if len(frames) == 1:
        return frames[0]
    return (pd.concat(frames)
        .groupby(["t", "k", "i"], sort = True)["fraction"]
        .mean()
        .reset_index())


def loss_summary(results):
    return (pd.concat([res.loss_frame() for res in results])
        .assign(replication = range(len(results)))
        .reset_index(drop = True))


def start_transient(spec, policy, run, seed = None, overlay_sim = False, n = None, replications = 1):
    """
    Mean-field trajectory from the empty system, plus the (replication-averaged)
    simulated trajectory on the same sampling grid when overlay_sim is set.
    Returns {file name: DataFrame}.
    """
    mf = integrate(Occupancy.empty(spec), spec, policy, run.horizon, run.dt, run.sample_interval)
    outputs = {"mf.csv": mf.to_frame()}
    if not overlay_sim:
        return outputs

    n = run.n_servers if n is None else n
    if n is None:
        raise ConfigError("a simulation overlay needs n_servers (or --n)", where = "run/n_servers")
    results = replicate(spec, policy, n, run.horizon, seed, run.sample_interval,
                        replications, burn_in = run.burn_in)
    outputs["sim.csv"] = average_trajectories(results)
    outputs["sim_loss.csv"] = loss_summary(results)
    return outputs
