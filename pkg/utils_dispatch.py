"""
Dispatch rules in two flavours: the mean-field dispatch functions f_i^(k)(x)
(probability that an arriving job joins a type-k queue of length i, given the
normalized state x), and the finite-N sampler used by the simulator.
"""
import numpy as np
from utils_model import Occupancy

# Masses below this count as empty when a rule looks for idle/shortest/available queues
ZERO = 1e-12

# sample_target's answer when the chosen queue is full
LOSS = -1


class DispatchField:
    """
    parts[k][i] = f_i^(k). Entries at i = B_k are always 0: a job sent to a full
    queue is lost, and that probability is kept in `loss` instead.
    """
    def __init__(self, parts, loss):
        self.parts = tuple(np.asarray(p, dtype = float) for p in parts)
        self.loss = float(loss)

    @classmethod
    def from_raw(cls, raw):
        """raw[k][i] includes full queues; move that mass over to the loss channel."""
        parts = []
        loss = 0.0
        for r in raw:
            r = np.array(r, dtype = float)
            loss += r[-1]
            r[-1] = 0.0
            parts.append(r)
        return cls(parts, loss)

    def __getitem__(self, k):
        return self.parts[k]

    @property
    def admitted(self):
        return float(sum(p.sum() for p in self.parts))


def f_random(x):
    return DispatchField.from_raw(x.parts)


def f_jiq(x):
    y0 = sum(part[0] for part in x)
    if y0 <= ZERO:
        return f_random(x)
    raw = []
    for part in x:
        r = np.zeros_like(part)
        r[0] = part[0]/y0
        raw.append(r)
    return DispatchField.from_raw(raw)


def f_jsq(x):
    totals = x.level_totals()
    occupied = np.flatnonzero(totals > ZERO)
    if not len(occupied):
        return f_random(x)
    level = occupied[0]
    raw = []
    for part in x:
        r = np.zeros_like(part)
        if level < len(part):
            r[level] = part[level]/totals[level]
        raw.append(r)
    return DispatchField.from_raw(raw)


def f_jsqd_limit(x, d):
    """
    Power-of-d: the job joins the shortest of d queues sampled uniformly. With
    z_i the fraction of queues holding at least i jobs, the chosen queue has
    length i with probability z_i^d - z_{i+1}^d, split over types in proportion
    to their share of length-i queues.
    """
    if d == 1:
        return f_random(x)
    totals = x.level_totals()
    tails = np.cumsum(totals[::-1])[::-1]
    z = np.append(tails/tails[0], 0.0)
    level_prob = np.power(z[:-1], d) - np.power(z[1:], d)
    share = np.divide(level_prob, totals, out = np.zeros_like(totals), where = totals > 0)
    return DispatchField.from_raw([part*share[:len(part)] for part in x])


def f_jbt(x, mpls):
    """Join below threshold: uniform over queues shorter than their type's threshold M_k."""
    y = sum(part[:m].sum() for part, m in zip(x, mpls))
    if y <= ZERO:
        return f_random(x)
    raw = []
    for part, m in zip(x, mpls):
        r = np.zeros_like(part)
        r[:m] = part[:m]/y
        raw.append(r)
    return DispatchField.from_raw(raw)


def f_partial(inner, x, p):
    """A fraction p of the jobs follows `inner`, the rest is dispatched randomly."""
    if p == 1:
        return inner
    rnd = f_random(x)
    parts = [p*a + (1 - p)*b for a, b in zip(inner.parts, rnd.parts)]
    return DispatchField(parts, p*inner.loss + (1 - p)*rnd.loss)


def dispatch_field(x, spec, policy):
    """The mean-field dispatch function of `policy` evaluated at state x."""
    if policy.kind == "random":
        inner = f_random(x)
    elif policy.kind == "jiq":
        inner = f_jiq(x)
    elif policy.kind == "jsq":
        inner = f_jsq(x)
    elif policy.kind == "jsqd":
        inner = f_jsqd_limit(x, policy.d)
    elif policy.kind == "jbt":
        inner = f_jbt(x, [t.mpl for t in spec.types])
    else:
        raise ValueError(f"unknown policy kind '{policy.kind}'")
    return f_partial(inner, x, policy.p)


def dispatch_branch(x, spec, policy):
    """
    Which piece of a discontinuous field applies at x, None for continuous rules.

    JIQ: are there idle queues
    JSQ: shortest occupied length
    JBT: is any queue below its threshold
    """
    if policy.kind == "jiq":
        return sum(part[0] for part in x) > ZERO
    if policy.kind == "jsq":
        return x.min_level(ZERO)
    if policy.kind == "jbt":
        return sum(part[:t.mpl].sum() for part, t in zip(x, spec.types)) > ZERO
    return None


class ServerPool:
    """
    Queue lengths of N servers, bucketed by (type, length) so that picking a
    uniform server of a given type and length is O(1). The simulator keeps its
    state in one of these; sample_target only reads it.
    """
    def __init__(self, spec, servers_per_type):
        self.spec = spec
        self.buffers = spec.buffers
        self.kind = []
        for k, n_k in enumerate(servers_per_type):
            self.kind.extend([k]*n_k)
        self.n = len(self.kind)
        self.length = [0]*self.n
        self.buckets = [[[] for _ in range(B + 1)] for B in self.buffers]
        self.slot = [0]*self.n
        for s, k in enumerate(self.kind):
            self.slot[s] = len(self.buckets[k][0])
            self.buckets[k][0].append(s)

    def count(self, k, i):
        return len(self.buckets[k][i])

    def counts(self, k):
        return [len(b) for b in self.buckets[k]]

    def member(self, k, i, idx):
        return self.buckets[k][i][idx]

    def is_full(self, s):
        return self.length[s] >= self.buffers[self.kind[s]]

    def move(self, s, new_length):
        k, old = self.kind[s], self.length[s]
        if new_length == old:
            return
        bucket = self.buckets[k][old]
        pos = self.slot[s]
        last = bucket.pop()
        if last != s:
            bucket[pos] = last
            self.slot[last] = pos
        target = self.buckets[k][new_length]
        self.slot[s] = len(target)
        target.append(s)
        self.length[s] = new_length

    def occupancy(self):
        return Occupancy([np.array(self.counts(k), dtype = float)/self.n for k in range(self.spec.K)])


def _pick(pool, categories, rng):
    """Uniform server among the union of (type, length) buckets."""
    total = sum(pool.count(k, i) for k, i in categories)
    u = int(rng.integers(total))
    for k, i in categories:
        c = pool.count(k, i)
        if u < c:
            return pool.member(k, i, u)
        u -= c
    raise AssertionError("unreachable: u < total")


def _distinct(rng, n, m):
    if 4*m > n:
        return rng.choice(n, size = m, replace = False).tolist()
    chosen = []
    seen = set()
    while len(chosen) < m:
        s = int(rng.integers(n))
        if s not in seen:
            seen.add(s)
            chosen.append(s)
    return chosen


def _admit(pool, s):
    return LOSS if pool.is_full(s) else s


def _sample_random(pool, rng):
    return _admit(pool, int(rng.integers(pool.n)))


def sample_target(pool, spec, policy, rng):
    """
    Pick the server an arriving job is sent to, or LOSS when that server is full.
    Every rule breaks ties uniformly at random.
    """
    if policy.p < 1 and rng.random() >= policy.p:
        return _sample_random(pool, rng)

    kind = policy.kind
    if kind == "random":
        return _sample_random(pool, rng)

    if kind == "jiq":
        idle = [(k, 0) for k in range(spec.K) if pool.count(k, 0)]
        if not idle:
            return _sample_random(pool, rng)
        return _pick(pool, idle, rng)

    if kind == "jsq":
        for i in range(spec.max_buffer + 1):
            level = [(k, i) for k in range(spec.K) if i <= pool.buffers[k] and pool.count(k, i)]
            if level:
                return _admit(pool, _pick(pool, level, rng))
        raise AssertionError("unreachable: pool has servers")

    if kind == "jsqd":
        sampled = _distinct(rng, pool.n, min(policy.d, pool.n))
        shortest = min(pool.length[s] for s in sampled)
        ties = [s for s in sampled if pool.length[s] == shortest]
        s = ties[0] if len(ties) == 1 else ties[int(rng.integers(len(ties)))]
        return _admit(pool, s)

    if kind == "jbt":
        below = [
            (k, i)
            for k, t in enumerate(spec.types)
            for i in range(t.mpl)
            if pool.count(k, i)
        ]
        if not below:
            return _sample_random(pool, rng)
        return _pick(pool, below, rng)

    raise ValueError(f"unknown policy kind '{kind}'")
