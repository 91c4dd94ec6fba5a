import pandas as pd
from utils_stationary import solve, little, report_document
from utils_systemtime import mean_sojourn
from mod_config import config_document


def nu_frame(report):
    """
    Stationary occupancy in long format.

    Example output:
       k  i   nu
    0  0  0  0.0
    1  0  1  0.0
    2  0  2  0.0
    3  0  3  0.5
    """
    return pd.concat([
        pd.DataFrame({"k": k, "i": range(len(part)), "nu": part})
        for k, part in enumerate(report.nu)
    ]).reset_index(drop = True)


def start_stationary(spec, policy):
    report = solve(spec, policy)
    doc = {"config": config_document(spec, policy)}
    doc.update(report_document(report))
    if spec.lam > 0:
        h = mean_sojourn(spec, policy, report)
        doc["mean_sojourn"] = h.h
        doc["mean_sojourn_per_type"] = list(h.per_type)
        doc["mean_sojourn_little"] = little(spec, policy, report).overall
    return {"stationary.json": doc, "nu.csv": nu_frame(report)}
