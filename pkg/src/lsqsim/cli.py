"""Command line front end.

    lsqsim simulate --scenario moderate_50_50 --policy sample:2 --load 0.9
    lsqsim sweep --scenario high_10_90 --out runs/high_10_90
    lsqsim presets
    lsqsim oracle all
"""

import logging
import os
import sys

import click

from . import harness
from .harness import PRESETS, build_config, get_scenario
from .validation import ORACLES


def _setup_logging():
    level = os.environ.get("LSQSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


@click.group()
def main():
    """Discrete-time load balancing simulator."""
    _setup_logging()


@main.command()
@click.option("--scenario", required=True, help="preset name or scenario YAML path")
@click.option("--policy", required=True, help="policy id, e.g. jsq, jsq_d:2, sample:2, update:0.2")
@click.option("--load", type=float, required=True, help="offered load as a fraction of capacity")
@click.option("--slots", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--warmup", type=int, default=None, help="slots to discard (default: slots/10)")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="write the report here")
@click.option("--json", "as_json", is_flag=True, help="write JSON instead of a CSV row")
@click.option("--engine", type=click.Choice(["fast", "reference"]), default="fast", show_default=True)
@click.option("--debug", is_flag=True, help="enable per-slot consistency checks")
def simulate(scenario, policy, load, slots, seed, warmup, out, as_json, engine, debug):
    """Run one configuration and print a summary."""
    scn = get_scenario(scenario)
    cfg = build_config(scn, policy, load, slots, seed, warmup=warmup, debug=debug)
    report = harness.run(cfg, engine=engine)
    click.echo(
        "scenario=%s policy=%s load=%g seed=%d slots=%d (capacity %g, lambda %g)"
        % (report.scenario, report.policy, load, seed, slots, report.capacity, load * report.capacity)
    )
    click.echo(
        "  mean queue %.4f   mean sojourn %s   p50/p99/p999 %s/%s/%s slots"
        % (
            report.mean_total_queue,
            "%.4f" % report.mean_sojourn if report.mean_sojourn is not None else "n/a",
            report.sojourn_p50, report.sojourn_p99, report.sojourn_p999,
        )
    )
    per_job = "%.4f" % report.messages_per_job if report.messages_per_job is not None else "n/a"
    click.echo(
        "  messages/slot %.4f   messages/job %s   worst incast %d"
        % (report.messages_per_slot, per_job, report.incast_p100)
    )
    if report.gap_mean is not None:
        click.echo(
            "  view gap mean %.4f max %d   refresh age max %d"
            % (report.gap_mean, report.gap_max, report.refresh_age_max)
        )
    click.echo("  stability: %s" % report.stability_verdict)
    if report.recursion_violations or report.fifo_violations or report.shadow_violations:
        click.echo(
            "  CONSISTENCY VIOLATIONS: recursion=%d fifo=%d shadow=%d"
            % (report.recursion_violations, report.fifo_violations, report.shadow_violations),
            err=True,
        )
        sys.exit(2)
    if out:
        if as_json or out.endswith(".json"):
            harness.write_json(report, out)
        else:
            harness.write_csv([report], out)
        click.echo("wrote %s" % out)


@main.command()
@click.option("--scenario", required=True, help="preset name or scenario YAML path")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--policy", "sweep_policies", multiple=True, help="repeatable; default is the scenario's set")
@click.option("--load", "sweep_loads", type=float, multiple=True)
@click.option("--seed", "sweep_seeds", type=int, multiple=True)
@click.option("--slots", type=int, default=None)
@click.option("--parallel", type=int, default=1, show_default=True)
@click.option("--engine", type=click.Choice(["fast", "reference"]), default="fast", show_default=True)
def sweep(scenario, out_dir, sweep_policies, sweep_loads, sweep_seeds, slots, parallel, engine):
    """Run a policy x load x seed grid and write results.csv + reports.json."""
    scn = get_scenario(scenario)
    reports = harness.run_sweep(
        scn,
        out_dir,
        policies=list(sweep_policies) or None,
        loads=list(sweep_loads) or None,
        seeds=list(sweep_seeds) or None,
        slots=slots,
        engine=engine,
        parallel=parallel,
    )
    click.echo("%d runs -> %s" % (len(reports), os.path.join(out_dir, "results.csv")))


@main.command()
def presets():
    """List built-in scenarios."""
    click.echo("%-16s %4s %3s %9s  %s" % ("name", "n", "m", "capacity", "description"))
    for name in sorted(PRESETS):
        s = PRESETS[name]
        click.echo(
            "%-16s %4d %3d %9.4f  %s" % (name, s.n, s.m, s.capacity(), s.description)
        )


@main.command()
@click.argument("name")
def oracle(name):
    """Run a validation oracle (or `all`). Exits nonzero on failure."""
    names = sorted(ORACLES) if name == "all" else [name]
    bad = 0
    for nm in names:
        if nm not in ORACLES:
            raise click.BadParameter(
                "unknown oracle %r (have: %s)" % (nm, ", ".join(sorted(ORACLES)))
            )
        ok, lines = ORACLES[nm]()
        click.echo("%s: %s" % (nm, "PASS" if ok else "FAIL"))
        for line in lines:
            click.echo("  " + line)
        bad += 0 if ok else 1
    if bad:
        sys.exit(1)


if __name__ == "__main__":
    main()
