import logging
import pandas as pd
from utils_stationary import solve
from utils_systemtime import mean_sojourn
from utils_sim import replicate
from utils_summary import replication_summary
from utils_errors import LbmfError

logger = logging.getLogger(__name__)

ENTIRE_SYSTEM = "Entire system"


def scope_labels(spec):
    """Row labels for one policy: the whole system, then each type when there are several."""
    if spec.K == 1:
        return [ENTIRE_SYSTEM]
    return [ENTIRE_SYSTEM] + [f"Server type {k}" for k in range(spec.K)]


def limit_column(spec, policy):
    """Mean system times in the N -> inf limit, one per scope label, or the error text."""
    try:
        h = mean_sojourn(spec, policy, solve(spec, policy))
    except LbmfError as e:
        logger.warning("%s, N=inf: %s", policy.label, e)
        return [f"error: {e}"]*len(scope_labels(spec))
    values = [h.h]
    if spec.K > 1:
        values += [v if v is not None else float("nan") for v in h.per_type]
    return values


def simulated_column(spec, policy, n, run, seed, replications):
    """
    Replicated mean system time after burn-in, per scope. Returns (means, ses),
    with the error text in place of both when the cell fails.
    """
    try:
        results = replicate(spec, policy, n, run.horizon, seed, run.sample_interval,
                            replications, burn_in = run.burn_in)
    except LbmfError as e:
        logger.warning("%s, N=%d: %s", policy.label, n, e)
        failed = [f"error: {e}"]*len(scope_labels(spec))
        return failed, failed

    records = []
    for rep, res in enumerate(results):
        records.append({"scope": ENTIRE_SYSTEM, "replication": rep, "value": res.mean_sojourn()})
        if spec.K > 1:
            per_type = res.mean_sojourn_per_type()
            for k in range(spec.K):
                records.append({
                    "scope": f"Server type {k}",
                    "replication": rep,
                    "value": float(per_type.get(k, float("nan")))
                })
    summary = replication_summary(pd.DataFrame(records), by = "scope").set_index("scope")
    labels = scope_labels(spec)
    return list(summary.loc[labels, "mean"]), list(summary.loc[labels, "se"])


def start_table(spec, policies, ns, run, seed = None, replications = 1):
    """
    Mean system time table: policy/scope rows, one column per finite N (with its
    standard error in `<N>_se`) and `inf` for the mean-field limit. `ns` holds
    server counts, None standing for N = inf.

    Example output:
        policy          scope   1000  1000_se    inf
    0   Random  Entire system  3.571  0.00412  3.565
    1      JSQ  Entire system  2.813  0.00198  2.800
    """
    rows = []
    for policy in policies:
        labels = scope_labels(spec)
        columns = {"policy": [policy.label]*len(labels), "scope": labels}
        for n in ns:
            if n is None:
                columns["inf"] = limit_column(spec, policy)
                continue
            means, ses = simulated_column(spec, policy, n, run, seed, replications)
            columns[str(n)] = means
            columns[f"{n}_se"] = ses
        rows.append(pd.DataFrame(columns))
    return pd.concat(rows).reset_index(drop = True)
