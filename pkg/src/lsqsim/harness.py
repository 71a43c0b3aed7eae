"""Scenario presets, sweep orchestration and result files.

A scenario fixes the cluster (two server speed classes, dispatcher
count); a run adds policy, load, horizon and seed. Offered load is a
fraction of total service capacity, so load 0.95 on a capacity-100
preset is 95 jobs per slot spread evenly over the dispatchers.

The six presets span heterogeneity (weak servers 2x or 10x slower than
strong) and mix (10/90, 50/50, 90/10 strong/weak). Speed classes are
calibrated so total capacity is exactly 100 jobs per slot: with strong
mean 1/p and weak mean 1/(f*p), p = (n_strong + n_weak/f) / 100. Strong
servers get the 1-based geometric (they serve at least one job per
slot); weak servers are slower than one job per slot on average, which
the 0-based geometric covers. Servers 0..n_strong-1 are the strong ones.
"""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import policies as pol
from .engine import DEFAULT_WINDOWS, SimConfig, run_reference
from .metrics import SCHEMA_VERSION, MetricsReport, aggregate_reference
from .processes import ConfigError, ServiceSpec, poisson_arrivals

CSV_COLUMNS = [
    "scenario", "policy", "load", "seed", "slots",
    "mean_total_queue", "mean_sojourn", "p50", "p99", "p999",
    "messages_per_slot", "messages_per_job", "incast_p100",
    "gap_mean", "gap_max", "stability_verdict",
]

DEFAULT_POLICIES = ("jsq", "jsq_d:2", "jiq", "sample:2", "update:0.2", "smart:0.2")
DEFAULT_LOADS = (0.5, 0.8, 0.9, 0.95)
DEFAULT_SEEDS = (1, 2, 3)
DEFAULT_SLOTS = 100_000


@dataclass(frozen=True)
class Scenario:
    name: str
    m: int
    services: tuple
    description: str = ""
    default_policies: tuple = DEFAULT_POLICIES
    default_loads: tuple = DEFAULT_LOADS
    default_seeds: tuple = DEFAULT_SEEDS
    default_slots: int = DEFAULT_SLOTS

    @property
    def n(self):
        return len(self.services)

    def capacity(self):
        return sum(s.rate for s in self.services)


def _two_class(name, n_strong, n_weak, slowdown, description):
    p = (n_strong + n_weak / slowdown) / 100.0
    strong = ServiceSpec(kind="geometric_min1", rate=1.0 / p)
    weak = ServiceSpec(kind="geometric", rate=1.0 / (slowdown * p))
    return Scenario(
        name=name,
        m=10,
        services=(strong,) * n_strong + (weak,) * n_weak,
        description=description,
    )


PRESETS = {
    s.name: s
    for s in (
        _two_class("moderate_10_90", 10, 90, 2, "10 strong / 90 half-speed weak"),
        _two_class("moderate_50_50", 50, 50, 2, "50 strong / 50 half-speed weak"),
        _two_class("moderate_90_10", 90, 10, 2, "90 strong / 10 half-speed weak"),
        _two_class("high_10_90", 10, 90, 10, "10 strong / 90 tenth-speed weak"),
        _two_class("high_50_50", 50, 50, 10, "50 strong / 50 tenth-speed weak"),
        _two_class("high_90_10", 90, 10, 10, "90 strong / 10 tenth-speed weak"),
    )
}


def load_scenario(path):
    """Scenario from a YAML file (see README for the shape)."""
    import yaml

    with open(path) as f:
        raw = yaml.safe_load(f)
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must be a mapping")
    services = []
    for grp in raw.get("services", []):
        spec = ServiceSpec(kind=grp["kind"], rate=grp["rate"])
        services.extend([spec] * int(grp.get("count", 1)))
    if not services:
        raise ConfigError("scenario defines no servers")
    return Scenario(
        name=str(raw.get("name", os.path.splitext(os.path.basename(path))[0])),
        m=int(raw.get("dispatchers", 1)),
        services=tuple(services),
        description=str(raw.get("description", "")),
        default_policies=tuple(raw.get("policies", DEFAULT_POLICIES)),
        default_loads=tuple(raw.get("loads", DEFAULT_LOADS)),
        default_seeds=tuple(raw.get("seeds", DEFAULT_SEEDS)),
        default_slots=int(raw.get("slots", DEFAULT_SLOTS)),
    )


def get_scenario(name_or_path):
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    if os.path.exists(name_or_path):
        return load_scenario(name_or_path)
    raise ConfigError(
        "unknown scenario %r (presets: %s)" % (name_or_path, ", ".join(sorted(PRESETS)))
    )


def build_config(scenario, policy, load, slots, seed, warmup=None, windows=DEFAULT_WINDOWS,
                 debug=False, record_decisions=False):
    """SimConfig for one run; warmup defaults to the first tenth."""
    if isinstance(policy, str):
        policy = pol.parse_policy(policy)
    if load < 0:
        raise ConfigError("negative load")
    if warmup is None:
        warmup = slots // 10
    lam = load * scenario.capacity()
    cfg = SimConfig(
        n=scenario.n,
        m=scenario.m,
        slots=slots,
        seed=seed,
        arrival=poisson_arrivals(lam, scenario.m),
        services=scenario.services,
        policy=policy,
        warmup=warmup,
        windows=windows,
        scenario=scenario.name,
        load=load,
        debug=debug,
        record_decisions=record_decisions,
    )
    cfg.validate()
    return cfg


def run(config, engine="fast") -> MetricsReport:
    """Run one config on the chosen engine and aggregate."""
    if engine == "fast":
        from .kernel import run_fast

        return run_fast(config).report
    if engine == "reference":
        return aggregate_reference(run_reference(config))
    raise ConfigError("unknown engine %r" % (engine,))


class RunCache:
    """Memo of reports keyed by config fingerprint.

    The acceptance suite shares long runs between criteria through one
    of these; it is also how double executions are compared.
    """

    def __init__(self, engine="fast"):
        self.engine = engine
        self._store = {}
        self.misses = 0

    def get(self, config) -> MetricsReport:
        key = config.fingerprint()
        if key not in self._store:
            self.misses += 1
            self._store[key] = run(config, self.engine)
        return self._store[key]


def _run_row(args):
    scenario, policy, load, slots, seed, engine = args
    cfg = build_config(scenario, policy, load, slots, seed)
    return run(cfg, engine)


def run_sweep(scenario, out_dir, policies=None, loads=None, seeds=None, slots=None,
              engine="fast", parallel=1, csv_name="results.csv"):
    """Full grid (policy x load x seed), reports written as they finish.

    Returns the list of reports in grid order. The CSV is written
    incrementally so a killed sweep still leaves the finished rows.
    """
    policies = list(policies if policies is not None else scenario.default_policies)
    loads = list(loads if loads is not None else scenario.default_loads)
    seeds = list(seeds if seeds is not None else scenario.default_seeds)
    slots = slots if slots is not None else scenario.default_slots
    os.makedirs(out_dir, exist_ok=True)

    grid = [
        (scenario, policy, load, slots, seed, engine)
        for policy in policies
        for load in loads
        for seed in seeds
    ]
    reports = []
    csv_path = os.path.join(out_dir, csv_name)
    with open(csv_path, "w", newline="") as f:
        f.write("# schema_version: %d\n" % SCHEMA_VERSION)
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        if parallel > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                for report in pool.map(_run_row, grid):
                    reports.append(report)
                    writer.writerow(csv_row(report))
                    f.flush()
        else:
            for args in grid:
                report = _run_row(args)
                reports.append(report)
                writer.writerow(csv_row(report))
                f.flush()
    write_json(reports, os.path.join(out_dir, "reports.json"))
    return reports


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def csv_row(report: MetricsReport):
    return [
        report.scenario,
        report.policy,
        _cell(report.load),
        report.seed,
        report.slots,
        _cell(report.mean_total_queue),
        _cell(report.mean_sojourn),
        _cell(report.sojourn_p50),
        _cell(report.sojourn_p99),
        _cell(report.sojourn_p999),
        _cell(report.messages_per_slot),
        _cell(report.messages_per_job),
        report.incast_p100,
        _cell(report.gap_mean),
        _cell(report.gap_max),
        report.stability_verdict,
    ]


def write_csv(reports, path):
    with open(path, "w", newline="") as f:
        f.write("# schema_version: %d\n" % SCHEMA_VERSION)
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for report in reports:
            writer.writerow(csv_row(report))


def write_json(reports, path):
    if isinstance(reports, MetricsReport):
        reports = [reports]
    payload = [r.to_json_dict() for r in reports]
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=1)
        f.write("\n")
