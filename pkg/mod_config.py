import json
import logging
from dataclasses import dataclass
from jsonschema import Draft7Validator
from jsonschema.exceptions import best_match
from utils_model import (
    ClusterSpec, ServerType, ServiceRateCurve, Policy, POLICY_KINDS, GAMMA_TOL, check
)
from utils_errors import ConfigError

logger = logging.getLogger(__name__)

# Gamma sums off by less than this get renormalized quietly, anything bigger is
# left alone so that validate() complains about it
RENORMALIZE_BELOW = 1e-9

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["lambda", "types", "policy", "run"],
    "properties": {
        "lambda": {"type": "number"},
        "types": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["gamma", "mu"],
                "properties": {
                    "gamma": {"type": "number"},
                    # mu_1..mu_B, mu_0 = 0 must not be listed
                    "mu": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                    "mpl": {"type": "integer", "minimum": 1}
                }
            }
        },
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(POLICY_KINDS)},
                "d": {"type": "integer", "minimum": 1},
                "p": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
            }
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "required": ["horizon", "dt", "sample_interval"],
            "properties": {
                "n_servers": {"type": "integer", "minimum": 1},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "sample_interval": {"type": "number", "exclusiveMinimum": 0},
                "burn_in": {"type": "number", "minimum": 0},
                "replications": {"type": "integer", "minimum": 1}
            }
        }
    }
}

_validator = Draft7Validator(CONFIG_SCHEMA)


@dataclass(frozen = True)
class RunParameters:
    horizon: float
    dt: float
    sample_interval: float
    n_servers: int = None
    seed: int = None
    burn_in: float = None
    replications: int = None

    @property
    def warmup(self):
        """Burn-in actually used: half the horizon unless configured."""
        return self.horizon/2 if self.burn_in is None else self.burn_in


def parse_config(text):
    """
    Turn a JSON config document into (ClusterSpec, Policy, RunParameters).

    Example input:
    {
      "lambda": 1.25,
      "types": [{"gamma": 1.0, "mu": [1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.5, 1.5, 1.5, 1.5]}],
      "policy": {"kind": "jsqd", "d": 2},
      "run": {"n_servers": 1000, "horizon": 200, "dt": 0.001, "sample_interval": 0.5}
    }

    Raises ConfigError for malformed JSON or schema failures and ValidationError
    when the result breaks the model's assumptions (stability, monotone rates...).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, where = f"line {e.lineno}") from e

    error = best_match(_validator.iter_errors(doc))
    if error is not None:
        path = "/".join(str(p) for p in error.absolute_path) or "(root)"
        raise ConfigError(error.message, where = path)

    gammas = [float(t["gamma"]) for t in doc["types"]]
    total = sum(gammas)
    if GAMMA_TOL < abs(total - 1) < RENORMALIZE_BELOW:
        logger.info("Renormalizing type fractions (sum was %r)", total)
        gammas = [g/total for g in gammas]

    types = tuple(
        ServerType(
            gamma = g,
            curve = ServiceRateCurve.from_mu(t["mu"]),
            mpl = int(t["mpl"]) if "mpl" in t else None
        )
        for g, t in zip(gammas, doc["types"])
    )
    spec = ClusterSpec(lam = float(doc["lambda"]), types = types)

    pol = doc["policy"]
    policy = Policy(
        kind = pol["kind"],
        d = int(pol["d"]) if "d" in pol else None,
        p = float(pol.get("p", 1.0))
    )

    run_doc = doc["run"]
    run = RunParameters(
        horizon = float(run_doc["horizon"]),
        dt = float(run_doc["dt"]),
        sample_interval = float(run_doc["sample_interval"]),
        n_servers = int(run_doc["n_servers"]) if "n_servers" in run_doc else None,
        seed = int(run_doc["seed"]) if "seed" in run_doc else None,
        burn_in = float(run_doc["burn_in"]) if "burn_in" in run_doc else None,
        replications = int(run_doc["replications"]) if "replications" in run_doc else None
    )

    check(spec, policy)
    return spec, policy, run


def config_document(spec, policy, run = None):
    """The dict that serialize_config dumps; also the head of every report document."""
    doc = {
        "lambda": spec.lam,
        "types": [],
        "policy": {"kind": policy.kind}
    }
    for t in spec.types:
        entry = {"gamma": t.gamma, "mu": list(t.curve.rates[1:])}
        if t.mpl is not None:
            entry["mpl"] = t.mpl
        doc["types"].append(entry)
    if policy.d is not None:
        doc["policy"]["d"] = policy.d
    if policy.p != 1.0:
        doc["policy"]["p"] = policy.p

    if run is not None:
        run_doc = {"horizon": run.horizon, "dt": run.dt, "sample_interval": run.sample_interval}
        # Optional keys only go out when they were set, so parse(serialize(x)) == x
        for key in ("n_servers", "seed", "burn_in", "replications"):
            value = getattr(run, key)
            if value is not None:
                run_doc[key] = value
        doc["run"] = run_doc
    return doc


def serialize_config(spec, policy, run):
    return json.dumps(config_document(spec, policy, run), indent = 2)


def load_config(path):
    """Read and parse a config file. OSError is left for the caller (exit code 3)."""
    with open(path, encoding = "utf-8") as f:
        text = f.read()
    return parse_config(text)
