"""
System time of an admitted job in the stationary mean-field regime.

A tagged job at position i of a type-k queue holding j jobs (FIFO) either sees
an arrival to its queue (rate a_j, queue grows: (i, j+1)) or a service
completion (rate mu_j, it moves up: (i-1, j-1)); at i = 1 that completion is its
own departure. The mean H_{i,j} and the Laplace transform H~_{i,j}(s) follow
from the same one-step recursion, and the unknowns can be swept in order
(i ascending, j descending) without solving anything.

Levels below an upkeep level are refilled instantly, so there H_{i,j} = H_{i,j+1}.
"""
from dataclasses import dataclass
import numpy as np
from utils_stationary import queue_arrival_rates, entry_weights
from utils_errors import RegimeError
from utils_ilt import invert

FD_STEP = 1e-6


def _check(spec, policy, report):
    if report.policy != policy or report.spec != spec:
        raise RegimeError(f"report was computed for {report.policy.label}, not {policy.label}")
    if spec.lam == 0:
        raise RegimeError("no arrivals, system time is undefined")


def _sweep(a, mu, s, constant, base):
    """
    Solve the FIFO recursion for one server type at every s at once.

        H_{i,j} = (constant + a_j H_{i,j+1} + mu_j H_{i-1,j-1}) / (s + a_j + mu_j)

    with H_{0,.} = base. constant=1, base=0, s=0 gives means; constant=0,
    base=1 gives transforms. Returns an array indexed [i, j, s].
    """
    B = len(mu) - 1
    s = np.atleast_1d(s)
    H = np.zeros((B + 2, B + 2, len(s)), dtype = np.result_type(s, float))
    H[0, :, :] = base
    for i in range(1, B + 1):
        for j in range(B, i - 1, -1):
            if np.isinf(a[j]):
                H[i, j] = H[i, j + 1]
                continue
            up = a[j]*H[i, j + 1] if a[j] > 0 else 0.0
            H[i, j] = (constant + up + mu[j]*H[i - 1, j - 1])/(s + a[j] + mu[j])
    return H


@dataclass(eq = False)
class SojournLinearSystem:
    """
    Coefficients of the FIFO system-time equations of one stationary report:
    per type, arrival rates a_j (np.inf at instantly refilled levels), service
    rates mu_j and entry weights w_j.
    """
    rule: str
    rates: list
    mus: list
    weights: list

    @classmethod
    def from_report(cls, report):
        rates = queue_arrival_rates(report)
        return cls(
            rule = report.rule,
            rates = rates,
            mus = [t.curve.mu for t in report.spec.types],
            weights = entry_weights(report, rates)
        )

    @staticmethod
    def dependencies(i, j, B):
        deps = []
        if j < B:
            deps.append((i, j + 1))
        if i > 1:
            deps.append((i - 1, j - 1))
        return deps

    @staticmethod
    def dependency_order(B):
        """Order in which _sweep fills the unknowns (i, j), 1 <= i <= j <= B."""
        return [(i, j) for i in range(1, B + 1) for j in range(B, i - 1, -1)]

    def means(self):
        """Per type, H[i, j] as a (B+2, B+2) real array."""
        return [_sweep(a, mu, np.zeros(1), 1.0, 0.0)[:, :, 0] for a, mu in zip(self.rates, self.mus)]

    def transforms(self, s):
        """Per type, H~[i, j, s]."""
        s = np.atleast_1d(np.asarray(s, dtype = complex))
        return [_sweep(a, mu, s, 0.0, 1.0) for a, mu in zip(self.rates, self.mus)]

    def weighted_transform(self, s):
        """sum_k sum_j w_j^(k) H~_{j,j}^(k)(s); its value at 0 is the admission probability."""
        total = 0.0
        for w, H in zip(self.weights, self.transforms(s)):
            j = np.arange(1, len(w))
            total = total + np.tensordot(w[1:], H[j, j, :], axes = 1)
        return total


@dataclass(frozen = True)
class MeanSojourn:
    h: float
    # None where a type admits nothing
    per_type: tuple
    entries: tuple


@dataclass(eq = False)
class SojournDistribution:
    # H~(s) including job loss: evaluator(0) = 1 - loss_prob
    evaluator: object
    mean: float
    loss_prob: float
    discipline: str = "fifo"

    def normalized(self, s):
        return self.evaluator(s)/self.evaluator(np.zeros(1, dtype = complex))[0]

    def density(self, t_grid, nodes = 64):
        """Density of the system time of an admitted job (integrates to 1)."""
        return invert(self.normalized, t_grid, nodes = nodes)


def mean_sojourn(spec, policy, report):
    """
    Mean system time H of an admitted job, per type and overall, from the FIFO
    recursion weighted by where arriving jobs enter.
    """
    _check(spec, policy, report)
    system = SojournLinearSystem.from_report(report)
    entries = system.means()
    num = 0.0
    den = 0.0
    per_type = []
    for w, H in zip(system.weights, entries):
        j = np.arange(1, len(w))
        contrib = float(np.dot(w[1:], H[j, j]))
        mass = float(w.sum())
        per_type.append(contrib/mass if mass > 0 else None)
        num += contrib
        den += mass
    return MeanSojourn(h = num/den, per_type = tuple(per_type), entries = tuple(entries))


def laplace_eval(spec, policy, report, s):
    """H~(s) for Re(s) >= 0 (scalar or array); losses included, so H~(0) = 1 - loss."""
    _check(spec, policy, report)
    values = np.atleast_1d(np.asarray(s, dtype = complex))
    if np.any(values.real < 0):
        raise ValueError("laplace_eval needs Re(s) >= 0")
    out = SojournLinearSystem.from_report(report).weighted_transform(values)
    return out[0] if np.ndim(s) == 0 else out


def _lps_type(a, mu, w, M, s):
    """
    Limited processor sharing for one type: up to M jobs share the server evenly.
    In-service unknowns u_j = H~_{1,j} form a tridiagonal system in j (another
    job finishing leaves ours in service in a shorter queue); waiting positions
    i > M then follow FIFO-style, moving into service at position M+1.
    """
    B = len(mu) - 1
    S = len(s)
    n = np.minimum(np.arange(B + 1), M)
    A = np.zeros((S, B, B), dtype = complex)
    rhs = np.zeros((S, B), dtype = complex)
    for j in range(1, B + 1):
        r = j - 1
        A[:, r, r] = s + a[j] + mu[j]
        if j < B:
            A[:, r, r + 1] = -a[j]
        if j > 1:
            A[:, r, r - 1] = -mu[j]*(n[j] - 1)/n[j]
        rhs[:, r] = mu[j]/n[j]
    u = np.zeros((B + 2, S), dtype = complex)
    u[1:B + 1] = np.linalg.solve(A, rhs[..., None])[..., 0].T

    W = np.zeros((B + 2, B + 2, S), dtype = complex)
    for i in range(M + 1, B + 1):
        for j in range(B, i - 1, -1):
            moved = u[j - 1] if i == M + 1 else W[i - 1, j - 1]
            up = a[j]*W[i, j + 1] if a[j] > 0 else 0.0
            W[i, j] = (up + mu[j]*moved)/(s + a[j] + mu[j])

    total = np.zeros(S, dtype = complex)
    for j in range(1, B + 1):
        total += w[j]*(u[j] if j <= M else W[j, j])
    return total


def mean_sojourn_lps(spec, policy, report):
    """
    H~ evaluator under limited processor sharing, M = mpl of each type. Only
    continuous regimes are supported. Arriving jobs enter at position j of a
    length-j queue, in service when j <= M.
    """
    _check(spec, policy, report)
    if not report.is_continuous:
        raise RegimeError(f"LPS system times are not available for the {report.regime} regime")
    if any(t.mpl is None for t in spec.types):
        raise RegimeError("LPS needs a multiprogramming level (mpl) on every type")
    rates = queue_arrival_rates(report)
    weights = entry_weights(report, rates)

    def evaluator(s):
        s = np.atleast_1d(np.asarray(s, dtype = complex))
        return sum(
            _lps_type(a, t.curve.mu, w, t.mpl, s)
            for a, w, t in zip(rates, weights, spec.types)
        )
    return evaluator


def moment_mean(evaluator, h = FD_STEP):
    """-H~'(0)/H~(0) with a central difference."""
    pts = np.array([-h, 0.0, h], dtype = complex)
    values = evaluator(pts)
    slope = (values[2] - values[0])/(2*h)
    return float((-slope/values[1]).real)


def distribution(spec, policy, report, discipline = "fifo"):
    _check(spec, policy, report)
    if discipline == "fifo":
        system = SojournLinearSystem.from_report(report)
        evaluator = system.weighted_transform
        mean = mean_sojourn(spec, policy, report).h
    elif discipline == "lps":
        evaluator = mean_sojourn_lps(spec, policy, report)
        mean = moment_mean(evaluator)
    else:
        raise ValueError(f"unknown discipline '{discipline}'")
    return SojournDistribution(
        evaluator = evaluator, mean = mean, loss_prob = report.loss_prob, discipline = discipline
    )
