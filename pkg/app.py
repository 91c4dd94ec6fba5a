"""
Command-line entry point. Every command reads a JSON config, builds its
outputs with the matching mod_* builder and writes them under --out.

    python app.py transient --config table1.json --out out/ --overlay-sim --n 1000
    python app.py table --config table1.json --policy random --policy jsq --n 100 --n inf
"""
import functools
import logging
import sys
import click
from mod_config import load_config
from mod_export import write_outputs
from mod_transient import start_transient
from mod_table import start_table
from mod_dist import start_dist
from mod_sweep import start_sweep, DEFAULT_DS
from mod_stationary import start_stationary
from utils_model import Policy, check
from utils_errors import (
    ConfigError, ValidationError, RegimeError, SolverError, IntegrationError
)
import runtime_config

logger = logging.getLogger(__name__)

# Exit codes: 0 success, 1 bad input, 2 numerics gave up, 3 file trouble
EXIT_CODES = (
    ((ConfigError, ValidationError, RegimeError), 1),
    ((SolverError, IntegrationError), 2),
    ((OSError,), 3),
)


class ServerCount(click.ParamType):
    """A positive server count or `inf` (the mean-field limit, parsed as None)."""
    name = "N|inf"

    def convert(self, value, param, ctx):
        if value is None or isinstance(value, int):
            return value
        text = str(value).strip().lower()
        if text in ("inf", "infinity", "∞"):
            return None
        try:
            n = int(text)
        except ValueError:
            self.fail(f"{value!r} is neither a server count nor 'inf'", param, ctx)
        if n < 1:
            self.fail(f"need at least one server, got {n}", param, ctx)
        return n


SERVER_COUNT = ServerCount()


class ToolkitGroup(click.Group):
    """Usage errors are bad input like a bad config: exit code 1, not click's 2."""

    def make_context(self, info_name, args, parent = None, **extra):
        try:
            return super().make_context(info_name, args, parent = parent, **extra)
        except click.UsageError as e:
            e.exit_code = 1
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = 1
            raise


def handle_errors(command):
    """Turn the toolkit's exceptions into a message on stderr and the matching exit code."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except tuple(e for group, _ in EXIT_CODES for e in group) as e:
            code = next(code for group, code in EXIT_CODES if isinstance(e, group))
            click.echo(f"error: {e}", err = True)
            sys.exit(code)
    return wrapper


def read_inputs(config, policy_names = ()):
    """Config plus the policies to run: --policy names override the config's (keeping its p)."""
    spec, policy, run = load_config(config)
    if not policy_names:
        return spec, [policy], run
    policies = []
    for name in policy_names:
        try:
            chosen = Policy.from_name(name, d = policy.d, p = policy.p)
        except ValueError as e:
            raise ConfigError(str(e), where = "--policy") from e
        check(spec, chosen)
        policies.append(chosen)
    return spec, policies, run


def pick_seed(seed, run):
    return run.seed if seed is None else seed


def pick_replications(replications, run):
    if replications is not None:
        return replications
    return run.replications or 1


def report_written(paths):
    for path in paths:
        click.echo(str(path))


config_option = click.option("--config", "config", required = True, help = "JSON config file")
out_option = click.option("--out", "out", default = "out", show_default = True, help = "Output directory")
seed_option = click.option("--seed", type = click.IntRange(0, 2**64 - 1), default = None,
                           help = "Overrides run.seed")
replications_option = click.option("--replications", type = click.IntRange(min = 1), default = None,
                                   help = "Overrides run.replications")


@click.group(cls = ToolkitGroup)
def cli():
    logging.basicConfig(
        level = runtime_config.log_level,
        format = "%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


@cli.command()
@config_option
@out_option
@seed_option
@replications_option
@click.option("--overlay-sim", is_flag = True, help = "Also simulate N servers on the same grid")
@click.option("--policy", "policy_name", default = None, help = "Overrides the config's policy")
@click.option("--n", "n", type = SERVER_COUNT, default = None, help = "Servers for the overlay")
@handle_errors
def transient(config, out, seed, replications, overlay_sim, policy_name, n):
    """Mean-field trajectory from the empty system (mf.csv), optionally with sim.csv."""
    spec, policies, run = read_inputs(config, (policy_name,) if policy_name else ())
    outputs = start_transient(
        spec, policies[0], run,
        seed = pick_seed(seed, run),
        overlay_sim = overlay_sim,
        n = n,
        replications = pick_replications(replications, run)
    )
    report_written(write_outputs(out, outputs))


@cli.command()
@config_option
@out_option
@seed_option
@replications_option
@click.option("--policy", "policy_names", multiple = True, help = "Row policies (repeatable)")
@click.option("--n", "ns", type = SERVER_COUNT, multiple = True, help = "Columns: server counts or inf")
@handle_errors
def table(config, out, seed, replications, policy_names, ns):
    """Mean system time per policy (rows) and N (columns) in table.csv."""
    spec, policies, run = read_inputs(config, policy_names)
    if not ns:
        ns = (None,) if run.n_servers is None else (run.n_servers, None)
    frame = start_table(
        spec, policies, ns, run,
        seed = pick_seed(seed, run),
        replications = pick_replications(replications, run)
    )
    report_written(write_outputs(out, {"table.csv": frame}))


@cli.command()
@config_option
@out_option
@seed_option
@replications_option
@click.option("--overlay-sim", is_flag = True, help = "Add simulated sojourn histograms and KS distances")
@click.option("--policy", "policy_names", multiple = True, help = "Policies (repeatable)")
@click.option("--n", "n", type = SERVER_COUNT, default = None, help = "Servers for the overlay")
@click.option("--t-max", type = click.FloatRange(min = 0, min_open = True), default = 20.0, show_default = True)
@click.option("--points", type = click.IntRange(min = 2), default = 400, show_default = True)
@click.option("--bins", type = click.IntRange(min = 1), default = 80, show_default = True)
@click.option("--discipline", type = click.Choice(["fifo", "lps"]), default = "fifo", show_default = True)
@handle_errors
def dist(config, out, seed, replications, overlay_sim, policy_names, n, t_max, points, bins, discipline):
    """System time densities (and histograms) of admitted jobs, plus summary.json."""
    spec, policies, run = read_inputs(config, policy_names)
    outputs = start_dist(
        spec, policies, run,
        seed = pick_seed(seed, run),
        t_max = t_max,
        points = points,
        bins = bins,
        discipline = discipline,
        overlay_sim = overlay_sim,
        n = n,
        replications = pick_replications(replications, run)
    )
    report_written(write_outputs(out, outputs))


@cli.command("jsqd-sweep")
@config_option
@out_option
@click.option("--d", "ds", type = click.IntRange(min = 1), multiple = True, help = "Values of d (repeatable)")
@handle_errors
def jsqd_sweep(config, out, ds):
    """JSQ(d) trajectories for several d against the JSQ limit, plus distances.csv."""
    spec, policies, run = read_inputs(config)
    outputs = start_sweep(spec, ds or DEFAULT_DS, run, p = policies[0].p)
    report_written(write_outputs(out, outputs))


@cli.command()
@config_option
@out_option
@click.option("--policy", "policy_name", default = None, help = "Overrides the config's policy")
@handle_errors
def stationary(config, out, policy_name):
    """Stationary point of the mean-field equations: stationary.json and nu.csv."""
    spec, policies, run = read_inputs(config, (policy_name,) if policy_name else ())
    report_written(write_outputs(out, start_stationary(spec, policies[0])))


if __name__ == "__main__":
    cli()
