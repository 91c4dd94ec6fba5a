"""
Event-driven simulation of N servers fed by a Poisson(N*lam) stream.

The whole system is one continuous-time Markov chain, so we race the total
arrival rate against the aggregate service rate of each (type, length) bucket,
pick the winning category and then a uniform member of it. Queues are FIFO and
every admitted job leaves a sojourn record.
"""
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import numpy as np
import pandas as pd
from threadpoolctl import threadpool_limits
from utils_model import Occupancy, Trajectory, Violation
from utils_dispatch import ServerPool, sample_target, LOSS
from utils_errors import ValidationError
import runtime_config

logger = logging.getLogger(__name__)


def servers_per_type(spec, n):
    """
    Split n servers over the types by largest remainder. Every type gets at
    least one server, taken from the biggest type if rounding left it empty.
    """
    if n < spec.K:
        raise ValidationError([Violation(
            "server-count", (), f"{n} servers can't cover {spec.K} server types"
        )])
    quotas = spec.gammas*n
    counts = np.floor(quotas).astype(int)
    left = n - counts.sum()
    order = np.argsort(-(quotas - counts), kind = "stable")
    counts[order[:left]] += 1
    for k in np.flatnonzero(counts == 0):
        donor = int(np.argmax(counts))
        counts[donor] -= 1
        counts[k] += 1
    return tuple(int(c) for c in counts)


def seed_sequence(seed, replication = 0):
    """Independent stream for each replication index, whatever order they run in."""
    return np.random.SeedSequence(seed, spawn_key = (replication,))


@dataclass(eq = False)
class SimResult:
    trajectory: Trajectory
    # arrival, departure, type, length_seen
    sojourns: pd.DataFrame
    arrivals: int
    losses: int
    completions: int
    in_flight: int
    # Time-averaged occupancy over [burn_in, horizon]
    time_average: Occupancy
    servers: tuple
    burn_in: float
    horizon: float

    @property
    def admitted(self):
        return self.arrivals - self.losses

    def stationary_sojourns(self):
        """Jobs that arrived after the burn-in (completed ones only)."""
        return self.sojourns.query("arrival >= @self.burn_in")

    def mean_sojourn(self):
        times = self.stationary_sojourns().eval("departure - arrival")
        return float(times.mean()) if len(times) else np.nan

    def mean_sojourn_per_type(self):
        return (self.stationary_sojourns()
            .assign(sojourn = lambda x: x["departure"] - x["arrival"])
            .groupby("type")["sojourn"]
            .mean())

    def loss_frame(self):
        return pd.DataFrame({
            "arrivals": [self.arrivals],
            "losses": [self.losses],
            "completions": [self.completions],
            "in_flight": [self.in_flight],
            "loss_fraction": [self.losses/self.arrivals if self.arrivals else 0.0]
        })


def run(spec, policy, n, horizon, seed, sample_interval, burn_in = None, replication = 0):
    """
    Simulate the cluster with n servers over [0, horizon]. The trajectory is
    sampled every sample_interval starting at 0. burn_in (default horizon/2)
    only affects the time-averaged occupancy and the stationary statistics;
    every sojourn is recorded.
    """
    burn_in = horizon/2 if burn_in is None else burn_in
    counts = servers_per_type(spec, n)
    rng = np.random.default_rng(seed_sequence(seed, replication))

    pool = ServerPool(spec, counts)
    mu = [list(t.curve.rates) for t in spec.types]
    buffers = spec.buffers
    queues = [deque() for _ in range(pool.n)]
    arrival_rate = pool.n*spec.lam

    area = [[0.0]*(B + 1) for B in buffers]
    last = [[burn_in]*(B + 1) for B in buffers]

    def touch(k, i, now):
        # Accumulate the bucket's server-time before its count changes
        start = last[k][i]
        if now > start:
            area[k][i] += len(pool.buckets[k][i])*(now - start)
            last[k][i] = now

    n_samples = int(np.floor(horizon/sample_interval + 1e-9)) + 1
    sample_idx = 0
    sample_times = []
    states = []

    arr_t, dep_t, types, seen = [], [], [], []
    arrivals = losses = completions = 0
    t = 0.0

    while True:
        service = 0.0
        for k in range(spec.K):
            rates, buckets = mu[k], pool.buckets[k]
            for i in range(1, buffers[k] + 1):
                if buckets[i]:
                    service += rates[i]*len(buckets[i])
        total = arrival_rate + service
        t_next = t + rng.exponential(1/total) if total > 0 else np.inf

        while sample_idx < n_samples and sample_idx*sample_interval <= t_next:
            sample_times.append(sample_idx*sample_interval)
            states.append(pool.occupancy())
            sample_idx += 1
        if t_next > horizon:
            break
        t = t_next

        u = rng.random()*total
        if u < arrival_rate:
            arrivals += 1
            s = sample_target(pool, spec, policy, rng)
            if s == LOSS:
                losses += 1
                continue
            k, i = pool.kind[s], pool.length[s]
            touch(k, i, t)
            touch(k, i + 1, t)
            queues[s].append((t, i))
            pool.move(s, i + 1)
            continue

        # Service completion: find the (type, length) bucket, then a member of it
        u -= arrival_rate
        chosen = None
        for k in range(spec.K):
            rates, buckets = mu[k], pool.buckets[k]
            for i in range(1, buffers[k] + 1):
                c = len(buckets[i])
                if not c:
                    continue
                chosen = (k, i, c)
                r = rates[i]*c
                if u < r:
                    break
                u -= r
            else:
                continue
            break
        k, i, c = chosen
        # u is uniform on [0, mu_i*c) here, so it also picks the member
        s = pool.buckets[k][i][min(int(u/mu[k][i]), c - 1)]
        arrived, length_seen = queues[s].popleft()
        arr_t.append(arrived)
        dep_t.append(t)
        types.append(k)
        seen.append(length_seen)
        completions += 1
        touch(k, i, t)
        touch(k, i - 1, t)
        pool.move(s, i - 1)

    window = horizon - burn_in
    if window > 0:
        for k, B in enumerate(buffers):
            for i in range(B + 1):
                touch(k, i, horizon)
        time_average = Occupancy([np.array(a)/(pool.n*window) for a in area])
    else:
        time_average = pool.occupancy()

    sojourns = pd.DataFrame({
        "arrival": np.array(arr_t, dtype = float),
        "departure": np.array(dep_t, dtype = float),
        "type": np.array(types, dtype = int),
        "length_seen": np.array(seen, dtype = int)
    })
    logger.debug("run n=%d replication=%d: %d arrivals, %d lost", n, replication, arrivals, losses)
    return SimResult(
        trajectory = Trajectory(sample_times, states),
        sojourns = sojourns,
        arrivals = arrivals,
        losses = losses,
        completions = completions,
        in_flight = sum(len(q) for q in queues),
        time_average = time_average,
        servers = counts,
        burn_in = burn_in,
        horizon = horizon
    )


def _run_one(args):
    spec, policy, n, horizon, seed, sample_interval, burn_in, replication = args
    # One replication per process; keep BLAS from oversubscribing the cores
    with threadpool_limits(limits = 1):
        return run(spec, policy, n, horizon, seed, sample_interval,
                   burn_in = burn_in, replication = replication)


def replicate(spec, policy, n, horizon, seed, sample_interval, r, burn_in = None, workers = None):
    """
    r independent runs, replication i seeded with (seed, i). Results come back
    ordered by replication index, however many workers ran them.
    """
    if seed is None:
        seed = np.random.SeedSequence().entropy
        logger.info("No seed given, using %d", seed)
    workers = runtime_config.workers if workers is None else workers
    jobs = [(spec, policy, n, horizon, seed, sample_interval, burn_in, i) for i in range(r)]
    if workers <= 1 or r == 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers = min(workers, r)) as pool:
        return list(pool.map(_run_one, jobs))
