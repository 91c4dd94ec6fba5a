"""
Stationary points of the mean-field equations, policy by policy.

Every stationary state we deal with is a birth-death product form per server
type, once the per-queue arrival rates a_i^(k) are known:

    nu_{i+1} = nu_i * a_i / mu_{i+1}

For continuous dispatch fields a_i = lam*f_i(nu)/nu_i and the whole thing is a
fixed point in nu. The discontinuous regimes (JIQ at/above idle capacity, JSQ)
have an upkeep level m: queues that drop below m are refilled instantly, the
service completions at level m (the upkeep z0) take that share of the
arrivals, and what is left is spread over the queues at level m and above.
Those reduce to one scalar equation each.
"""
import logging
from dataclasses import dataclass, replace
import numpy as np
from cachelib import SimpleCache
from scipy.optimize import brentq, fixed_point
from utils_model import Occupancy, Policy
from utils_dispatch import dispatch_field
from utils_ode import residual as ode_residual, solve_to_stationarity
from utils_errors import SolverError, RegimeError
import runtime_config

logger = logging.getLogger(__name__)

# Knife-edge band for the JIQ critical case and JSQ ties
CRITICAL_BAND = 1e-10
# 0/0 convention for per-queue arrival rates in the continuous assembly
RATE_ZERO = 1e-14

DAMPING = 0.5
FIXED_POINT_XTOL = 1e-12
FIXED_POINT_MAXITER = 10**6
POLISH_STEPS = 10

# How the system-time equations get assembled for each regime
ASSEMBLY_RULES = {
    "continuous": "continuous",
    "jiq-subcritical": "continuous",
    "jiq-critical": "jiq-critical",
    "jiq-supercritical": "jiq-supercritical",
    "jsq": "jsq",
}

# Reports never expire, a process only ever sees a handful of configs
_reports = SimpleCache(threshold = runtime_config.cache_threshold, default_timeout = 0)


@dataclass(eq = False)
class StationaryReport:
    spec: object
    policy: Policy
    nu: Occupancy
    regime: str
    # Upkeep regimes: levels below upkeep_level are refilled instantly, queues
    # at upkeep_level get upkeep_rate each, longer ones spread_rate each
    upkeep_level: int = 0
    upkeep_rate: float = 0.0
    spread_rate: float = 0.0
    z0: float = 0.0
    y0: float = None
    i0: int = None
    loss_prob: float = 0.0
    lambda_eff: np.ndarray = None

    @property
    def rule(self):
        return ASSEMBLY_RULES[self.regime]

    @property
    def is_continuous(self):
        return self.rule == "continuous"


@dataclass(frozen = True)
class LittleResult:
    overall: float
    # None where a type receives no jobs
    per_type: tuple


def product_form(rates, mu, start, mass):
    """
    Birth-death stationary vector that is zero below `start`, with up-rates
    rates[i] and down-rates mu[i], scaled to sum to `mass`.
    """
    u = np.zeros(len(mu))
    u[start] = 1.0
    for i in range(start, len(mu) - 1):
        u[i + 1] = u[i]*rates[i]/mu[i + 1]
    return mass*u/u.sum()


def queue_arrival_rates(report):
    """
    Per type, the arrival rate seen by one queue of each length. np.inf marks the
    instantly refilled levels below the upkeep level, and the full level gets 0.
    """
    spec = report.spec
    out = []
    if report.is_continuous:
        f = dispatch_field(report.nu, spec, report.policy)
        for k, (part, fk) in enumerate(zip(report.nu, f)):
            flow = spec.lam*fk
            a = np.zeros_like(part)
            both_tiny = (part < RATE_ZERO) & (fk < RATE_ZERO)
            if np.any((part < RATE_ZERO) & ~both_tiny):
                bad = np.flatnonzero((part < RATE_ZERO) & ~both_tiny).tolist()
                raise RegimeError(f"continuous assembly needs nu > 0 where f > 0 (type {k}, lengths {bad})")
            np.divide(flow, part, out = a, where = ~both_tiny)
            a[-1] = 0.0
            out.append(a)
        return out

    m = report.upkeep_level
    for t in spec.types:
        a = np.full(t.buffer + 1, report.spread_rate)
        a[:m] = np.inf
        a[m] = report.upkeep_rate
        a[-1] = 0.0
        out.append(a)
    return out


def entry_weights(report, rates = None):
    """
    w[k][j]: probability that an arriving job is admitted at position j of a
    type-k queue. Jobs refilling the levels below the upkeep level enter at the
    upkeep level itself; everything else joins a length-j queue at rate a_j.
    """
    spec = report.spec
    rates = queue_arrival_rates(report) if rates is None else rates
    out = []
    for part, a, t in zip(report.nu, rates, spec.types):
        w = np.zeros_like(part)
        if spec.lam == 0:
            out.append(w)
            continue
        m = int(np.sum(np.isinf(a)))
        if m > 0:
            w[m] = t.curve.rates[m]*part[m]/spec.lam
        finite = np.arange(m, len(part) - 1)
        w[finite + 1] += a[finite]*part[finite]/spec.lam
        out.append(w)
    return out


def _finish(spec, policy, nu, regime, **fields):
    report = StationaryReport(spec = spec, policy = policy, nu = nu, regime = regime, **fields)
    weights = entry_weights(report)
    admitted = np.array([w.sum() for w in weights])
    # No arrivals means nothing to lose either
    loss = 1.0 - admitted.sum() if spec.lam > 0 else 0.0
    report.loss_prob = float(min(1.0, max(0.0, loss)))
    report.lambda_eff = spec.lam*admitted/spec.gammas
    logger.info("%s: regime %s, loss %.6g", policy.label, regime, report.loss_prob)
    return report


def _balance_map(spec, policy):
    """nu -> product form built from the arrival rates lam*f_i(nu)/nu_i."""
    def phi(flat):
        nu = Occupancy.from_flat(flat, spec)
        f = dispatch_field(nu, spec, policy)
        out = []
        for part, fk, t in zip(nu, f, spec.types):
            a = np.zeros_like(part)
            np.divide(spec.lam*fk, part, out = a, where = part > 0)
            out.append(product_form(a, t.curve.mu, 0, t.gamma))
        return np.concatenate(out)
    return phi


def solve_balance(spec, policy):
    """
    Continuous-field stationary point: damped fixed-point iteration started from
    the empty system (the map is monotone from there). When that stalls, run
    the mean-field equations to stationarity and polish the result.
    """
    phi = _balance_map(spec, policy)
    x0 = Occupancy.empty(spec).flat
    try:
        flat = fixed_point(
            lambda x: DAMPING*x + (1 - DAMPING)*phi(x), x0,
            xtol = FIXED_POINT_XTOL, maxiter = FIXED_POINT_MAXITER, method = "iteration"
        )
    except RuntimeError:
        logger.warning("%s: fixed-point iteration stalled, integrating to stationarity", policy.label)
        try:
            state = solve_to_stationarity(Occupancy.empty(spec), spec, policy)
        except SolverError as e:
            raise SolverError(f"{policy.label}: both stationary solvers failed",
                              state = e.state, residual = e.residual) from e
        flat = state.flat
        for _ in range(POLISH_STEPS):
            flat = phi(flat)
    return Occupancy.from_flat(flat, spec)


def solve_random(spec, policy = None):
    """
    Random dispatch: every queue sees Poisson(lam) arrivals, so each type is a
    birth-death chain with up-rate lam truncated at its buffer.
    """
    policy = Policy("random") if policy is None else policy
    parts = [
        product_form(np.full(t.buffer + 1, spec.lam), t.curve.mu, 0, t.gamma)
        for t in spec.types
    ]
    return _finish(spec, policy, Occupancy(parts), "continuous")


def _upkeep_profile(spec, m, a, spread):
    parts = []
    for t in spec.types:
        rates = np.full(t.buffer + 1, spread)
        rates[m] = a
        parts.append(product_form(rates, t.curve.mu, m, t.gamma))
    return parts


def _jiq_upkeep(spec, z):
    """Upkeep produced when the arrivals left after refilling (lam - z) are spread randomly."""
    parts = _upkeep_profile(spec, 1, spec.lam - z, spec.lam - z)
    return sum(t.curve.rates[1]*part[1] for t, part in zip(spec.types, parts)), parts


def solve_jiq(spec, p = 1.0):
    """
    Three regimes, depending on lam against the idle-refill capacity
    s = sum_k gamma_k mu_1:
      lam < s: idle queues exist, continuous field (mass on 0 and 1 only)
      lam = s: every queue holds exactly one job
      lam > s: no idle queues; completions at length 1 (the upkeep z0) are
               refilled at once and lam - z0 is dispatched randomly
    With partial control the refilling budget is p*lam instead of lam.
    """
    policy = Policy("jiq", p = p)
    s = float(sum(t.gamma*t.curve.rates[1] for t in spec.types))

    if p == 1 and abs(spec.lam - s) < CRITICAL_BAND:
        parts = []
        for t in spec.types:
            v = np.zeros(t.buffer + 1)
            v[1] = t.gamma
            parts.append(v)
        return _finish(spec, policy, Occupancy(parts), "jiq-critical",
                       upkeep_level = 1, z0 = s, y0 = 0.0)

    budget = p*spec.lam
    if spec.lam > 0 and budget > 0 and _jiq_upkeep(spec, budget)[0] <= budget:
        z0 = brentq(lambda z: _jiq_upkeep(spec, z)[0] - z, 0.0, budget, xtol = 1e-15, rtol = 1e-15)
        _, parts = _jiq_upkeep(spec, z0)
        r = spec.lam - z0
        return _finish(spec, policy, Occupancy(parts), "jiq-supercritical",
                       upkeep_level = 1, upkeep_rate = r, spread_rate = r, z0 = z0, y0 = 0.0)

    nu = solve_balance(spec, policy)
    regime = "jiq-subcritical" if p == 1 else "continuous"
    return _finish(spec, policy, nu, regime, y0 = float(sum(part[0] for part in nu)))


def _jsq_level_equation(spec, m, p):
    """
    Upkeep-level equation for JSQ with the queues below m refilled instantly:
    find the per-queue rate a at level m with

        a = (p*lam - z0(a))/y(a) + (1 - p)*lam

    where y is the mass at level m and z0 its completion rate. Returns
    (a, parts) or None when level m can't be the upkeep level.
    """
    if any(m >= B for B in spec.buffers):
        return None
    spread = (1 - p)*spec.lam

    def gap(a):
        parts = _upkeep_profile(spec, m, a, spread)
        y = sum(part[m] for part in parts)
        z0 = sum(t.curve.rates[m]*part[m] for t, part in zip(spec.types, parts))
        return (p*spec.lam - z0)/y + spread - a

    lo = spread
    g_lo = gap(lo)
    if g_lo < 0:
        return None
    if g_lo == 0:
        return lo, _upkeep_profile(spec, m, lo, spread)
    hi = max(2*lo, 1.0)
    while gap(hi) > 0:
        hi *= 2
        if hi > 1e12:
            return None
    a = brentq(gap, lo, hi, xtol = 1e-15, rtol = 1e-15, maxiter = 1000)
    return a, _upkeep_profile(spec, m, a, spread)


def _jsq_report(spec, policy, m, a, parts):
    y = float(sum(part[m] for part in parts))
    z0 = float(sum(t.curve.rates[m]*part[m] for t, part in zip(spec.types, parts)))
    regime = "jsq" if m > 0 else "continuous"
    return _finish(spec, policy, Occupancy(parts), regime,
                   upkeep_level = m, upkeep_rate = a, spread_rate = (1 - policy.p)*spec.lam,
                   z0 = z0, y0 = y, i0 = m + 1)


def solve_jsq(spec, p = 1.0):
    """
    i0 is the shortest length whose capacity sum_k gamma_k mu_i0 covers lam.
    Below i0 the queues can't keep up, so JSQ holds every queue at i0 - 1 or i0:
    completions at i0 - 1 (the upkeep) are refilled at once and the remaining
    arrivals lift queues from i0 - 1 to i0. i0 = 1 is plain JIQ.

    With partial control the upkeep level is searched for: the smallest level m
    whose equation has a solution with a nonnegative controlled residual.
    """
    policy = Policy("jsq", p = p)

    if p == 1:
        def capacity(i):
            return sum(spec.rate(k, i)*t.gamma for k, t in enumerate(spec.types))
        i0 = next(i for i in range(1, spec.max_buffer + 1) if capacity(i) >= spec.lam - CRITICAL_BAND)
        tie = abs(capacity(i0) - spec.lam) < CRITICAL_BAND
        if i0 == 1:
            report = solve_jiq(spec)
            return replace(report, policy = policy, i0 = 1)
        if any(i0 > B for B in spec.buffers) or (not tie and any(i0 - 1 >= B for B in spec.buffers)):
            raise RegimeError(f"JSQ upkeep level {i0 - 1} reaches the buffer of a server type")
        if tie:
            # All the mass sits on i0 itself and the level below it is empty
            parts = []
            for t in spec.types:
                v = np.zeros(t.buffer + 1)
                v[i0] = t.gamma
                parts.append(v)
            return _finish(spec, policy, Occupancy(parts), "jsq",
                           upkeep_level = i0, z0 = float(capacity(i0)), y0 = 1.0, i0 = i0)
        found = _jsq_level_equation(spec, i0 - 1, 1.0)
        if found is None:
            raise SolverError(f"JSQ upkeep equation at level {i0 - 1} has no solution")
        return _jsq_report(spec, policy, i0 - 1, *found)

    for m in range(spec.max_buffer):
        found = _jsq_level_equation(spec, m, p)
        if found is not None:
            return _jsq_report(spec, policy, m, *found)
    raise SolverError(f"JSQ p={p}: no feasible upkeep level")


def solve_jsqd(spec, d, p = 1.0):
    policy = Policy("jsqd", d = d, p = p)
    if d == 1:
        return replace(solve_random(spec), policy = policy)
    return _finish(spec, policy, solve_balance(spec, policy), "continuous")


def solve_jbt(spec, p = 1.0):
    """
    Join below threshold with thresholds M_k. Needs lam < sum_k gamma_k mu_{M_k}
    (then the stationary point stays below the thresholds and the field is
    continuous there).
    """
    policy = Policy("jbt", p = p)
    threshold_capacity = sum(t.gamma*t.curve.rates[t.mpl] for t in spec.types)
    if not spec.lam < threshold_capacity:
        raise RegimeError(
            f"JBT needs lambda < sum_k gamma_k mu_Mk = {threshold_capacity}, got {spec.lam}"
        )
    return _finish(spec, policy, solve_balance(spec, policy), "continuous")


def solve(spec, policy):
    """Stationary report for any policy (partial control included), memoized."""
    key = repr((spec, policy))
    report = _reports.get(key)
    if report is not None:
        return report

    if policy.kind == "random":
        report = replace(solve_random(spec), policy = policy)
    elif policy.kind == "jiq":
        report = solve_jiq(spec, policy.p)
    elif policy.kind == "jsq":
        report = solve_jsq(spec, policy.p)
    elif policy.kind == "jsqd":
        report = solve_jsqd(spec, policy.d, policy.p)
    elif policy.kind == "jbt":
        report = solve_jbt(spec, policy.p)
    else:
        raise ValueError(f"unknown policy kind '{policy.kind}'")

    _reports.set(key, report)
    return report


def balance_residual(report):
    """
    How well the report satisfies its own equations. Continuous regimes use the
    mean-field right-hand side; upkeep regimes check the level-to-level flow
    balance above the upkeep level plus the upkeep definition.
    """
    if report.is_continuous:
        return ode_residual(report.nu, report.spec, report.policy)
    spec = report.spec
    rates = queue_arrival_rates(report)
    m = report.upkeep_level
    worst = 0.0
    for part, a, t in zip(report.nu, rates, spec.types):
        mu = t.curve.mu
        for i in range(m, t.buffer):
            worst = max(worst, abs(mu[i + 1]*part[i + 1] - a[i]*part[i]))
        worst = max(worst, float(np.abs(part[:m]).max()) if m else 0.0)
    z0 = sum(t.curve.rates[m]*part[m] for t, part in zip(spec.types, report.nu))
    worst = max(worst, abs(z0 - report.z0))
    if report.rule == "jsq" and report.y0:
        p = report.policy.p
        worst = max(worst, abs((p*spec.lam - report.z0)/report.y0 + report.spread_rate - report.upkeep_rate))
    return worst


def little(spec, policy, report):
    """
    Mean system times from Little's law: L_k = sum_i i nu_i^(k) / gamma_k queued
    jobs per type-k server, lam_k admitted per type-k server, H_k = L_k / lam_k,
    and the whole system H = L / lam_e.
    """
    if report.policy != policy or report.spec != spec:
        raise RegimeError(f"report was computed for {report.policy.label}, not {policy.label}")
    L = np.array([np.dot(np.arange(len(part)), part) for part in report.nu])
    admitted = report.lambda_eff*spec.gammas
    per_type = tuple(
        float(l/g/lam_k) if lam_k > 0 else None
        for l, g, lam_k in zip(L, spec.gammas, report.lambda_eff)
    )
    overall = float(L.sum()/admitted.sum()) if admitted.sum() > 0 else None
    return LittleResult(overall = overall, per_type = per_type)


def calibrate_type_fractions(spec, target_h):
    """
    Two server types under Random dispatch: per-type queue lengths L_k and
    admitted rates lam_k don't depend on the type fractions, so the whole-system
    mean (g L_1 + (1-g) L_2) / (g lam_1 + (1-g) lam_2) = target_h is linear in g.
    Returns (gamma_1, gamma_2).
    """
    if spec.K != 2:
        raise ValueError("calibration needs exactly two server types")
    base = solve_random(spec.with_gammas([0.5, 0.5]))
    L = [np.dot(np.arange(len(part)), part)/0.5 for part in base.nu]
    lam = base.lambda_eff
    g = (target_h*lam[1] - L[1])/(L[0] - L[1] - target_h*(lam[0] - lam[1]))
    return float(g), float(1 - g)


def report_document(report):
    """
    JSON-ready summary of a report.

    Example output:
    {"policy": "JSQ", "regime": "jsq", "rule": "jsq", "upkeep_level": 3,
     "z0": 0.55, "y0": 0.5, "i0": 4, "loss_prob": 0.0, "lambda_eff": [1.25],
     "nu": [[0.0, 0.0, 0.0, 0.5, 0.5, 0.0, ...]]}
    """
    def plain(value):
        return None if value is None else float(value)

    return {
        "policy": report.policy.label,
        "regime": report.regime,
        "rule": report.rule,
        "upkeep_level": int(report.upkeep_level),
        "upkeep_rate": plain(report.upkeep_rate),
        "spread_rate": plain(report.spread_rate),
        "z0": plain(report.z0),
        "y0": plain(report.y0),
        "i0": None if report.i0 is None else int(report.i0),
        "loss_prob": float(report.loss_prob),
        "lambda_eff": [float(v) for v in report.lambda_eff],
        "balance_residual": float(balance_residual(report)),
        "nu": [[float(v) for v in part] for part in report.nu]
    }
