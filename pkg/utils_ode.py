"""
Mean-field equations for the normalized occupancy:

    dv_i/dt = lam*f_{i-1}(v) - lam*f_i(v) + mu_{i+1} v_{i+1} - mu_i v_i

per server type. Dispatch fields are evaluated as they are, discontinuities
included. The integrator is explicit midpoint with a projection back onto the
per-type simplex after every step. When the midpoint lands on another piece of a
discontinuous field (idle queues appear, the shortest level moves) the step is a
plain Euler step instead, so the state chatters along the switching surface at
the sliding rate instead of sticking to it.
"""
import logging
import numpy as np
from utils_model import Occupancy, Trajectory
from utils_dispatch import dispatch_field, dispatch_branch
from utils_errors import IntegrationError, SolverError

logger = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
# Run-to-stationarity is only used on continuous fields, a coarser step is fine there
STATIONARITY_DT = 1e-2
STATIONARITY_TOL = 1e-9
STATIONARITY_T_MAX = 1e4


def rhs(v, spec, policy):
    """Time derivative of v, one array per server type."""
    f = dispatch_field(v, spec, policy)
    out = []
    for part, fk, t in zip(v, f, spec.types):
        served = t.curve.mu*part
        dv = -spec.lam*fk - served
        dv[1:] += spec.lam*fk[:-1]
        dv[:-1] += served[1:]
        out.append(dv)
    return tuple(out)


def residual(v, spec, policy):
    """Sup norm of rhs(v)."""
    return max(float(np.max(np.abs(d))) for d in rhs(v, spec, policy))


def project_simplex(part, mass):
    """Euclidean projection onto {w >= 0, sum(w) = mass}."""
    if mass <= 0:
        return np.zeros_like(part)
    u = np.sort(part)[::-1]
    css = np.cumsum(u) - mass
    idx = np.arange(1, len(u) + 1)
    keep = u - css/idx > 0
    rho = idx[keep][-1]
    theta = css[keep][-1]/rho
    return np.maximum(part - theta, 0.0)


class _Stepper:
    """One explicit step on the flat state vector, projection included."""
    def __init__(self, spec, policy, masses):
        self.spec = spec
        self.policy = policy
        self.masses = masses
        self.cuts = np.cumsum([B + 1 for B in spec.buffers])[:-1]

    def state(self, flat):
        return Occupancy(np.split(flat, self.cuts))

    def derivative(self, flat):
        return np.concatenate(rhs(self.state(flat), self.spec, self.policy))

    def branch(self, flat):
        return dispatch_branch(self.state(flat), self.spec, self.policy)

    def step(self, flat, dt):
        k1 = self.derivative(flat)
        mid = flat + 0.5*dt*k1
        if self.branch(mid) == self.branch(flat):
            nxt = flat + dt*self.derivative(mid)
        else:
            nxt = flat + dt*k1
        if not np.all(np.isfinite(nxt)):
            return None
        parts = np.split(nxt, self.cuts)
        return np.concatenate([project_simplex(p, m) for p, m in zip(parts, self.masses)])


def integrate(v0, spec, policy, horizon, dt = DEFAULT_DT, sample_interval = None):
    """
    Solve the mean-field equations from v0 over [0, horizon] with a fixed step.
    Snapshots are taken every `sample_interval` (every step when not given),
    always including t = 0 and the final time. Per-type masses of v0 are kept.
    """
    n_steps = max(1, int(round(horizon/dt)))
    every = 1 if sample_interval is None else max(1, int(round(sample_interval/dt)))
    stepper = _Stepper(spec, policy, v0.masses)

    x = v0.flat
    times = [0.0]
    states = [v0]
    for step in range(1, n_steps + 1):
        x = stepper.step(x, dt)
        if x is None:
            raise IntegrationError(step*dt)
        if step % every == 0 or step == n_steps:
            times.append(step*dt)
            states.append(Occupancy.from_flat(x, spec))
    return Trajectory(times, states)


def solve_to_stationarity(v0, spec, policy, tol = STATIONARITY_TOL, t_max = STATIONARITY_T_MAX,
                          dt = STATIONARITY_DT, check_every = 50):
    """
    Integrate until the sup norm of the right-hand side drops below tol. The
    fixed points of the step map are exactly the zeros of rhs, so nothing is
    lost by stepping coarsely.
    """
    stepper = _Stepper(spec, policy, v0.masses)
    x = v0.flat
    n_steps = int(round(t_max/dt))
    res = np.inf
    for step in range(1, n_steps + 1):
        x = stepper.step(x, dt)
        if x is None:
            raise IntegrationError(step*dt)
        if step % check_every == 0:
            res = float(np.max(np.abs(stepper.derivative(x))))
            if res < tol:
                logger.debug("Stationary after t=%.1f (residual %.2e)", step*dt, res)
                return Occupancy.from_flat(x, spec)
    raise SolverError(
        f"no stationary point within t_max={t_max}",
        state = Occupancy.from_flat(x, spec),
        residual = res
    )
