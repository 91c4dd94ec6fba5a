import logging
import numpy as np
from utils_stationary import solve
from utils_systemtime import distribution
from utils_sim import replicate
from utils_summary import histogram_frame, ks_distance
from utils_errors import ConfigError

logger = logging.getLogger(__name__)

# Above this many jobs per queue the transforms get stiff and the grid coarse
LARGE_BUFFER = 10


def time_grid(t_max, points):
    """points equally spaced times in (0, t_max]; t = 0 itself can't be inverted."""
    return np.linspace(0.0, t_max, points + 1)[1:]


def simulated_sojourns(spec, policy, n, run, seed, replications):
    results = replicate(spec, policy, n, run.horizon, seed, run.sample_interval,
                        replications, burn_in = run.burn_in)
    return np.concatenate([
        res.stationary_sojourns().eval("departure - arrival").to_numpy() for res in results
    ])


def start_dist(spec, policies, run, seed = None, t_max = 20.0, points = 400, bins = 80,
               discipline = "fifo", overlay_sim = False, n = None, replications = 1):
    """
    System time density of admitted jobs for each policy, optionally with a
    histogram of simulated sojourns on [0, t_max]. Returns {file name: frame}
    plus a "summary.json" document keyed by policy slug.
    """
    if spec.max_buffer > LARGE_BUFFER:
        logger.warning("Buffers up to %d: inversion may be slow and less reliable", spec.max_buffer)
    n = run.n_servers if n is None else n
    if overlay_sim and n is None:
        raise ConfigError("a simulation overlay needs n_servers (or --n)", where = "run/n_servers")

    t_grid = time_grid(t_max, points)
    outputs = {}
    summary = {}
    for policy in policies:
        report = solve(spec, policy)
        dist = distribution(spec, policy, report, discipline)
        inversion = dist.density(t_grid)
        outputs[f"density_{policy.slug}.csv"] = inversion.to_frame()

        admitted = dist.evaluator(np.zeros(1, dtype = complex))[0].real
        entry = {
            "policy": policy.label,
            "discipline": discipline,
            "mean": float(dist.mean),
            "loss_prob": float(dist.loss_prob),
            "mass_check": float(admitted + dist.loss_prob),
            "method": inversion.method,
            "nodes": int(inversion.nodes),
            "crosscheck_error": float(inversion.crosscheck_error),
            "flagged": int(inversion.flags.sum())
        }
        if overlay_sim:
            samples = simulated_sojourns(spec, policy, n, run, seed, replications)
            edges = np.linspace(0.0, t_max, bins + 1)
            outputs[f"histogram_{policy.slug}.csv"] = histogram_frame(samples, edges)
            entry["n_servers"] = int(n)
            entry["samples"] = int(len(samples))
            entry["ks_distance"] = ks_distance(samples, inversion.t, inversion.density) if len(samples) else None
        summary[policy.slug] = entry

    outputs["summary.json"] = summary
    return outputs
