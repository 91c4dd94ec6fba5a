"""
Domain types shared by every other module: the cluster (server types with their
queue-length dependent service rates), the dispatch policy, and the normalized
occupancy vector. Everything here is immutable once built.
"""
from dataclasses import dataclass, replace
import re
import numpy as np
import pandas as pd
from utils_errors import ValidationError

POLICY_KINDS = ("random", "jiq", "jsq", "jsqd", "jbt")

# Sum of type fractions has to be 1 within this
GAMMA_TOL = 1e-12
# Decimal inputs like 0.8*3 don't compare exactly, so monotonicity gets a little slack
RATE_RTOL = 1e-12


@dataclass(frozen = True)
class Violation:
    constraint: str
    where: tuple = ()
    message: str = ""

    def __str__(self):
        loc = f" at {self.where}" if self.where else ""
        return f"{self.constraint}{loc}: {self.message}"


@dataclass(frozen = True)
class ServiceRateCurve:
    """
    Total service rate of one queue as a function of its length, rates[i] for
    i = 0..B. rates[0] is always 0 and B = len(rates) - 1 is the buffer size.
    """
    rates: tuple

    @classmethod
    def from_mu(cls, mu):
        # Config files list mu_1..mu_B, mu_0 = 0 is implicit
        return cls(rates = (0.0,) + tuple(float(m) for m in mu))

    @property
    def buffer(self):
        return len(self.rates) - 1

    @property
    def mu(self):
        return np.asarray(self.rates, dtype = float)

    def violations(self, where = ()):
        rates = self.rates
        found = []
        if len(rates) < 2:
            found.append(Violation("buffer", where, "need at least one rate (B >= 1)"))
            return found
        if rates[0] != 0:
            found.append(Violation("empty-queue-rate", where + (0,), "rates[0] must be 0"))
        for i, r in enumerate(rates):
            if not np.isfinite(r) or r < 0:
                found.append(Violation("nonnegative-rate", where + (i,), f"rate {r} is not a nonnegative number"))
        if found:
            return found
        if rates[1] <= 0:
            found.append(Violation("positive-unit-rate", where + (1,), "a queue holding one job must be served"))
        for i in range(len(rates) - 1):
            if rates[i + 1] < rates[i] - RATE_RTOL*max(1.0, rates[i]):
                found.append(Violation(
                    "nondecreasing-total-rate", where + (i,),
                    f"rates[{i}]={rates[i]} > rates[{i + 1}]={rates[i + 1]}"
                ))
        for i in range(1, len(rates) - 1):
            now, nxt = rates[i]/i, rates[i + 1]/(i + 1)
            if nxt > now + RATE_RTOL*max(1.0, now):
                found.append(Violation(
                    "nonincreasing-per-job-rate", where + (i,),
                    f"rates[{i}]/{i}={now} < rates[{i + 1}]/{i + 1}={nxt}"
                ))
        return found


@dataclass(frozen = True)
class ServerType:
    gamma: float
    curve: ServiceRateCurve
    # JBT threshold and LPS multiprogramming level share this field
    mpl: int = None

    @property
    def buffer(self):
        return self.curve.buffer


@dataclass(frozen = True)
class ClusterSpec:
    lam: float
    types: tuple

    @property
    def K(self):
        return len(self.types)

    @property
    def gammas(self):
        return np.array([t.gamma for t in self.types], dtype = float)

    @property
    def buffers(self):
        return [t.buffer for t in self.types]

    @property
    def max_buffer(self):
        return max(self.buffers)

    @property
    def capacity(self):
        """Aggregate service capacity with every queue full, sum_k gamma_k mu_B."""
        return float(sum(t.gamma*t.curve.rates[-1] for t in self.types))

    def rate(self, k, i):
        """mu_i for type k, clamped at the buffer (a type-k queue never grows past it)."""
        rates = self.types[k].curve.rates
        return rates[min(i, len(rates) - 1)]

    def with_lambda(self, lam):
        return replace(self, lam = float(lam))

    def with_gammas(self, gammas):
        types = tuple(replace(t, gamma = float(g)) for t, g in zip(self.types, gammas))
        return replace(self, types = types)

    def with_buffer(self, B):
        """Truncate (or keep) every curve at buffer B."""
        types = tuple(
            replace(t, curve = ServiceRateCurve(rates = t.curve.rates[:B + 1]),
                    mpl = None if t.mpl is None else min(t.mpl, B))
            for t in self.types
        )
        return replace(self, types = types)

    def with_mpl(self, mpls):
        types = tuple(replace(t, mpl = int(m)) for t, m in zip(self.types, mpls))
        return replace(self, types = types)


@dataclass(frozen = True)
class Policy:
    """
    kind is one of POLICY_KINDS; d is only used by jsqd. p < 1 is partial control:
    a fraction p of the arrivals follows the rule, the rest is dispatched randomly.
    """
    kind: str
    d: int = None
    p: float = 1.0

    @property
    def label(self):
        names = {"random": "Random", "jiq": "JIQ", "jsq": "JSQ", "jbt": "JBT"}
        name = f"JSQ({self.d})" if self.kind == "jsqd" else names.get(self.kind, self.kind)
        if self.p < 1:
            name += f" p={self.p:g}"
        return name

    @property
    def slug(self):
        # Safe for file names
        name = f"jsq{self.d}" if self.kind == "jsqd" else self.kind
        if self.p < 1:
            name += f"_p{self.p:g}"
        return name

    @classmethod
    def from_name(cls, name, d = None, p = 1.0):
        """
        Parse CLI style names.

        Examples:
        "random" -> Policy("random")
        "JSQ(5)" -> Policy("jsqd", d = 5)
        "jsq2" -> Policy("jsqd", d = 2)
        "jsqd:5" -> Policy("jsqd", d = 5)
        """
        text = name.strip().lower()
        if text in ("random", "jiq", "jsq", "jbt"):
            return cls(kind = text, p = float(p))
        if text == "jsqd":
            return cls(kind = "jsqd", d = d, p = float(p))
        match = re.fullmatch(r"jsqd?[(:]?(\d+)\)?", text)
        if match:
            return cls(kind = "jsqd", d = int(match.group(1)), p = float(p))
        raise ValueError(f"unknown policy name '{name}'")


class Occupancy:
    """
    Normalized occupancy, one vector per server type: parts[k][i] is the fraction
    of all servers that are of type k and hold i jobs. Type k's vector has length
    B_k + 1 (buffers may differ, nothing gets padded).
    """
    def __init__(self, parts):
        frozen = []
        for part in parts:
            arr = np.array(part, dtype = float)
            arr.setflags(write = False)
            frozen.append(arr)
        self.parts = tuple(frozen)

    @classmethod
    def empty(cls, spec):
        parts = []
        for t in spec.types:
            v = np.zeros(t.buffer + 1)
            v[0] = t.gamma
            parts.append(v)
        return cls(parts)

    @classmethod
    def from_flat(cls, flat, spec):
        flat = np.asarray(flat, dtype = float)
        cuts = np.cumsum([B + 1 for B in spec.buffers])[:-1]
        return cls(np.split(flat, cuts))

    @property
    def flat(self):
        return np.concatenate(self.parts)

    @property
    def K(self):
        return len(self.parts)

    def __getitem__(self, k):
        return self.parts[k]

    def __iter__(self):
        return iter(self.parts)

    def __repr__(self):
        return f"Occupancy({[p.round(6).tolist() for p in self.parts]})"

    @property
    def masses(self):
        return np.array([p.sum() for p in self.parts])

    def level_totals(self):
        """sum_k v_i^(k) for i = 0..max B."""
        out = np.zeros(max(len(p) for p in self.parts))
        for p in self.parts:
            out[:len(p)] += p
        return out

    def min_level(self, threshold = 0.0):
        """Smallest queue length holding more than `threshold` of the servers."""
        occupied = np.flatnonzero(self.level_totals() > threshold)
        return int(occupied[0]) if len(occupied) else None

    def distance(self, other):
        """Sup-norm distance to another occupancy of the same shape."""
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.parts, other.parts))

    def allclose(self, other, atol):
        return (len(self.parts) == len(other.parts)
                and all(a.shape == b.shape for a, b in zip(self.parts, other.parts))
                and self.distance(other) <= atol)

    def violations(self, masses, tol = 1e-9):
        found = []
        for k, (part, mass) in enumerate(zip(self.parts, masses)):
            bad = np.flatnonzero((part < -tol) | (part > 1 + tol) | ~np.isfinite(part))
            for i in bad:
                found.append(Violation("occupancy-range", (k, int(i)), f"entry {part[i]} outside [0, 1]"))
            if abs(part.sum() - mass) > tol:
                found.append(Violation("occupancy-mass", (k,), f"sums to {part.sum()}, expected {mass}"))
        return found


def validate(spec, policy):
    """
    Check the standing assumptions on a cluster/policy pair. Returns a list of
    Violation records, empty when everything holds.
    """
    found = []
    if not np.isfinite(spec.lam) or spec.lam < 0:
        found.append(Violation("arrival-rate", (), f"lambda={spec.lam} must be a number >= 0"))
    if not spec.types:
        found.append(Violation("types", (), "at least one server type is required"))
        return found

    for k, t in enumerate(spec.types):
        if not (0 < t.gamma <= 1):
            found.append(Violation("type-fraction", (k,), f"gamma={t.gamma} not in (0, 1]"))
        found.extend(t.curve.violations(where = (k,)))
        if t.mpl is not None and not (1 <= t.mpl <= t.buffer):
            found.append(Violation("mpl", (k,), f"mpl={t.mpl} not in [1, {t.buffer}]"))

    total = float(sum(t.gamma for t in spec.types))
    if abs(total - 1) > GAMMA_TOL:
        found.append(Violation("type-fractions-sum", (), f"gammas sum to {total!r}"))

    curves_ok = all(not t.curve.violations() for t in spec.types)
    if curves_ok and not spec.lam < spec.capacity:
        found.append(Violation(
            "stability", (),
            f"lambda={spec.lam} must be below sum_k gamma_k mu_B = {spec.capacity}"
        ))

    if policy.kind not in POLICY_KINDS:
        found.append(Violation("policy-kind", (), f"'{policy.kind}' is not one of {POLICY_KINDS}"))
    if policy.kind == "jsqd" and (policy.d is None or int(policy.d) != policy.d or policy.d < 1):
        found.append(Violation("policy-d", (), f"JSQ(d) needs an integer d >= 1, got {policy.d}"))
    if policy.kind == "jbt":
        for k, t in enumerate(spec.types):
            if t.mpl is None:
                found.append(Violation("policy-mpl", (k,), "JBT needs a threshold (mpl) on every type"))
    if not (0 < policy.p <= 1):
        found.append(Violation("policy-control", (), f"p={policy.p} not in (0, 1]"))
    return found


def check(spec, policy):
    """validate, but raise instead of returning the list."""
    found = validate(spec, policy)
    if found:
        raise ValidationError(found)
    return spec, policy


class Trajectory:
    """
    Occupancy snapshots at increasing sample times. Both the simulator and the
    mean-field integrator produce these, so their CSVs line up row for row.
    """
    def __init__(self, times, states):
        self.times = np.asarray(times, dtype = float)
        self.states = list(states)

    def __len__(self):
        return len(self.states)

    @property
    def final(self):
        return self.states[-1]

    def to_frame(self):
        """
        Long format, one row per (time, type, length).

        Example output:
               t  k  i  fraction
        0    0.0  0  0      1.00
        1    0.0  0  1      0.00
        ...
        """
        t, k, i, frac = [], [], [], []
        for time, state in zip(self.times, self.states):
            for kk, part in enumerate(state):
                n = len(part)
                t.append(np.full(n, time))
                k.append(np.full(n, kk))
                i.append(np.arange(n))
                frac.append(part)
        return pd.DataFrame({
            "t": np.concatenate(t),
            "k": np.concatenate(k),
            "i": np.concatenate(i),
            "fraction": np.concatenate(frac)
        })

    def kink_times(self, threshold = 1e-3):
        """Sample times where the shortest occupied queue length changes."""
        levels = [s.min_level(threshold) for s in self.states]
        return self.times[1:][np.diff(levels) != 0]

    def distance(self, other, exclude = (), window = 0.0):
        """
        Sup-norm distance over the sample times both trajectories share, skipping
        samples within `window` of any time in `exclude`.
        """
        exclude = np.asarray(exclude, dtype = float)
        worst = 0.0
        j = 0
        for t, state in zip(self.times, self.states):
            while j < len(other.times) and other.times[j] < t - 1e-9*max(1.0, t):
                j += 1
            if j == len(other.times):
                break
            if abs(other.times[j] - t) > 1e-9*max(1.0, t):
                continue
            if len(exclude) and np.min(np.abs(exclude - t)) <= window:
                continue
            worst = max(worst, state.distance(other.states[j]))
        return worst
