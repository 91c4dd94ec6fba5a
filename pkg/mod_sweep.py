import numpy as np
import pandas as pd
from utils_model import Occupancy, Policy
from utils_ode import integrate

DEFAULT_DS = (2, 5, 20, 100)

# Levels holding less than this count as empty when locating JSQ's kinks
KINK_FLOOR = 1e-3


def kink_threshold(spec, dt):
    """
    The integrator chatters along JSQ's switching surface, leaving up to about
    one step of completions (max rate * dt) on the level below the shortest one.
    """
    top = max(float(np.max(t.curve.mu)) for t in spec.types)
    return max(KINK_FLOOR, 2*top*dt)


def start_sweep(spec, ds, run, p = 1.0):
    """
    Mean-field trajectories of JSQ(d) for every d next to the JSQ limit, all
    from the empty system on the same grid. distances.csv holds each d's
    sup-distance to JSQ, overall and away from the times where JSQ's shortest
    occupied level changes.

    Example output (distances.csv):
         d  sup_distance  sup_distance_off_kinks
    0    2      0.142016                0.142016
    1    5      0.047751                0.047751
    2   20      0.012338                0.009170
    """
    v0 = Occupancy.empty(spec)
    reference = integrate(v0, spec, Policy("jsq", p = p), run.horizon, run.dt, run.sample_interval)
    kinks = reference.kink_times(kink_threshold(spec, run.dt))
    window = 2*run.sample_interval

    outputs = {"trajectory_jsq.csv": reference.to_frame()}
    distances = []
    for d in ds:
        traj = integrate(v0, spec, Policy("jsqd", d = d, p = p), run.horizon, run.dt, run.sample_interval)
        outputs[f"trajectory_jsq{d}.csv"] = traj.to_frame()
        distances.append({
            "d": d,
            "sup_distance": traj.distance(reference),
            "sup_distance_off_kinks": traj.distance(reference, exclude = kinks, window = window)
        })
    outputs["distances.csv"] = pd.DataFrame(distances)
    return outputs
