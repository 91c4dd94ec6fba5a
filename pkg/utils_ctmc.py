"""
Exact stationary solve of a small homogeneous cluster.

With one server type the state is the count vector c = (c_0, ..., c_B) of
servers holding i jobs, so n servers give C(n+B, B) states. That is tiny for the
handful of servers used to check the simulator and the N -> inf limit.
"""
import itertools
import logging
import numpy as np
from scipy.special import comb
from utils_model import Occupancy

logger = logging.getLogger(__name__)


def states(n, B):
    """
    All count vectors of n servers over lengths 0..B, in lexicographic order.

    Example output (n=2, B=1):
        [(0, 2), (1, 1), (2, 0)]
    """
    out = []
    # Stars and bars: choose where the B separators go among n+B slots
    for bars in itertools.combinations(range(n + B), B):
        edges = (-1,) + bars + (n + B,)
        out.append(tuple(edges[i + 1] - edges[i] - 1 for i in range(B + 1)))
    return sorted(out)


def _inner_dispatch(counts, spec, policy):
    c = np.asarray(counts, dtype = float)
    n = c.sum()
    kind = policy.kind
    random = c/n
    if kind == "random":
        return random
    if kind == "jiq":
        if c[0] == 0:
            return random
        return np.eye(len(c))[0]
    if kind == "jsq":
        return np.eye(len(c))[np.flatnonzero(c)[0]]
    if kind == "jsqd":
        d = min(policy.d, int(n))
        # d distinct servers: the shortest one holds i jobs unless all d hold more
        tails = np.cumsum(c[::-1])[::-1]
        at_least = comb(tails, d)
        beyond = np.append(at_least[1:], 0.0)
        return (at_least - beyond)/comb(n, d)
    if kind == "jbt":
        M = spec.types[0].mpl
        below = c[:M].sum()
        if below == 0:
            return random
        out = np.zeros_like(c)
        out[:M] = c[:M]/below
        return out
    raise ValueError(f"unknown policy kind '{kind}'")


def finite_dispatch(counts, spec, policy):
    """Probability that an arriving job is sent to a queue of length i (i = B means lost)."""
    inner = _inner_dispatch(counts, spec, policy)
    if policy.p == 1:
        return inner
    c = np.asarray(counts, dtype = float)
    return policy.p*inner + (1 - policy.p)*c/c.sum()


def generator(n, spec, policy):
    """Dense generator matrix over states(n, B); returns (states, Q)."""
    if spec.K != 1:
        raise ValueError("the exact solve only covers a single server type")
    B = spec.max_buffer
    mu = spec.types[0].curve.mu
    space = states(n, B)
    index = {c: idx for idx, c in enumerate(space)}
    Q = np.zeros((len(space), len(space)))

    def shift(c, i, j):
        c = list(c)
        c[i] -= 1
        c[j] += 1
        return index[tuple(c)]

    for row, c in enumerate(space):
        probs = finite_dispatch(c, spec, policy)
        for i in range(B):
            if probs[i] > 0:
                Q[row, shift(c, i, i + 1)] += n*spec.lam*probs[i]
        for i in range(1, B + 1):
            if c[i]:
                Q[row, shift(c, i, i - 1)] += c[i]*mu[i]
    Q[np.diag_indices_from(Q)] = -Q.sum(axis = 1)
    return space, Q


def stationary_distribution(n, spec, policy):
    """pi with pi Q = 0 and sum(pi) = 1, by least squares on the stacked system."""
    space, Q = generator(n, spec, policy)
    A = np.vstack([Q.T, np.ones(len(space))])
    b = np.zeros(len(space) + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond = None)
    pi = np.clip(pi, 0.0, None)
    return space, pi/pi.sum()


def stationary_occupancy(n, spec, policy):
    """E[x^N] under the stationary law: the expected fraction of servers at each length."""
    space, pi = stationary_distribution(n, spec, policy)
    expected = pi @ np.asarray(space, dtype = float)/n
    logger.debug("exact solve n=%d over %d states", n, len(space))
    return Occupancy([expected])
