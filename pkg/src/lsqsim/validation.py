"""Independent checks the simulator is validated against.

Each oracle here is implemented straight-line, without importing the
engine's sampling helpers, so agreement actually means something. The
CLI exposes them under `lsqsim oracle <name>`; the test suite runs the
same functions with tighter budgets.
"""

import random
import time

from . import rng as rnglib
from .engine import SimConfig
from .harness import PRESETS, Scenario, build_config, run
from .processes import ServiceSpec

# First outputs of the canonical PCG32 demo (seeded 42, 54), from the
# reference implementation's own demo program.
PCG_DEMO_STATE = 42
PCG_DEMO_SEQ = 54
PCG_DEMO_FIRST = (0xA15C02B7, 0x7B47F409, 0xBA1D3330, 0x83D2F293, 0xBFA4784B, 0xCBED606E)

# splitmix64 of 0, golden, 2*golden: the first three outputs of the
# canonical sequential generator seeded with 0.
SPLITMIX_FIRST = (0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F)


def check_rng():
    lines = []
    ok = True
    g = rnglib.Pcg32(PCG_DEMO_STATE, PCG_DEMO_SEQ)
    got = tuple(g.next32() for _ in range(len(PCG_DEMO_FIRST)))
    if got != PCG_DEMO_FIRST:
        ok = False
        lines.append("pcg32 demo vector mismatch: %s" % (tuple(hex(x) for x in got),))
    else:
        lines.append("pcg32 demo vector ok")
    sm = tuple(rnglib.splitmix64(k * rnglib.GOLDEN & rnglib.MASK64) for k in range(3))
    if sm != SPLITMIX_FIRST:
        ok = False
        lines.append("splitmix64 vector mismatch: %s" % (tuple(hex(x) for x in sm),))
    else:
        lines.append("splitmix64 vector ok")
    return ok, lines


# ---------------------------------------------------------------------------
# single queue, simulated independently with the stdlib RNG


def _indep_poisson(rnd, expneg):
    k = 0
    p = 1.0
    while True:
        p *= rnd.random()
        if p <= expneg:
            return k
        k += 1


def _indep_service(rnd, spec):
    if spec.kind == "deterministic":
        return int(spec.rate)
    if spec.kind == "geometric_min1":
        q = 1.0 / spec.rate
        s = 1
        while rnd.random() >= q:
            s += 1
        return s
    q = 1.0 / (1.0 + spec.rate)
    s = 0
    while rnd.random() >= q:
        s += 1
    return s


def single_queue_mean(lam, service_spec, slots, seed, warmup=0):
    """Mean slot-start queue of one server fed Poisson(lam), stdlib RNG."""
    import math

    rnd = random.Random(seed)
    expneg = math.exp(-lam)
    q = 0
    acc = 0
    for t in range(slots):
        if t >= warmup:
            acc += q
        a = _indep_poisson(rnd, expneg)
        s = _indep_service(rnd, service_spec)
        q = max(q + a - s, 0)
    return acc / max(slots - warmup, 1)


def single_server_scenario(service_spec):
    return Scenario(name="single", m=1, services=(service_spec,))


def oracle_single_queue(slots=600_000, tolerance=0.03):
    """Engine vs independent single-queue simulation, mean queue length.

    Load 0.8 keeps the mean queue O(1) so the relative tolerance sits
    several sigma above the Monte Carlo noise of both estimates.
    """
    spec = ServiceSpec(kind="geometric_min1", rate=2.0)
    scenario = single_server_scenario(spec)
    cfg = build_config(scenario, "jsq", 0.8, slots, seed=11)
    report = run(cfg)
    indep = single_queue_mean(1.6, spec, slots, seed=1234, warmup=slots // 10)
    rel = abs(report.mean_total_queue - indep) / max(indep, 1e-9)
    line = "engine %.5f vs independent %.5f (rel diff %.3f%%)" % (
        report.mean_total_queue, indep, 100 * rel,
    )
    return rel <= tolerance, [line]


# ---------------------------------------------------------------------------
# weighted-random drift against the closed form


def expected_wr_drift(services, lam):
    """E[potential service - arrivals] per server under WR routing."""
    total = sum(s.rate for s in services)
    return [s.rate - lam * (s.rate / total) for s in services]


def oracle_wr_drift(scenario_name="moderate_50_50", load=0.9, slots=200_000, z=4.0):
    scenario = PRESETS[scenario_name]
    cfg = build_config(scenario, "wr", load, slots, seed=7)
    report = run(cfg)
    lam = load * scenario.capacity()
    want = expected_wr_drift(scenario.services, lam)
    worst = 0.0
    bad = 0
    for i in range(scenario.n):
        se = max(report.drift_se[i], 1e-12)
        dev = abs(report.drift_mean[i] - want[i]) / se
        worst = max(worst, dev)
        if dev > z:
            bad += 1
    line = "%d/%d servers within %.1f se (worst %.2f se)" % (
        scenario.n - bad, scenario.n, z, worst,
    )
    return bad == 0, [line]


# ---------------------------------------------------------------------------
# JSQ and the every-slot full refresh must make identical decisions


def mini_cluster(name="mini"):
    strong = ServiceSpec(kind="geometric_min1", rate=2.0)
    weak = ServiceSpec(kind="geometric", rate=0.75)
    return Scenario(name=name, m=3, services=(strong,) * 5 + (weak,) * 5)


def jsq_full_decisions(slots=10_000, seed=1, engine="fast", load=0.9):
    scenario = mini_cluster()
    out = []
    for policy in ("jsq", "full_update"):
        cfg = build_config(scenario, policy, load, slots, seed, record_decisions=True)
        if engine == "fast":
            from .kernel import run_fast

            out.append(run_fast(cfg).decisions)
        else:
            from .engine import run_reference

            out.append(run_reference(cfg).decisions)
    return out


def oracle_jsq_full(slots=10_000, seeds=(1, 2, 3)):
    import numpy as np

    lines = []
    ok = True
    for seed in seeds:
        a, b = jsq_full_decisions(slots=slots, seed=seed)
        same = bool(np.array_equal(a, b))
        ok = ok and same
        lines.append("seed %d: %s" % (seed, "identical decisions" if same else "DIVERGED"))
    return ok, lines


def oracle_dynamics(slots=100_000, budget_s=60.0):
    """Debug run: per-slot queue recursion checks must all pass in budget."""
    scenario = PRESETS["moderate_50_50"]
    cfg = build_config(scenario, "sample:2", 0.9, slots, seed=3, debug=True)
    t0 = time.perf_counter()
    report = run(cfg)
    dt = time.perf_counter() - t0
    ok = report.recursion_violations == 0 and dt <= budget_s
    lines = [
        "queue recursion violations: %d over %d slots" % (report.recursion_violations, slots),
        "wall time %.1fs (budget %.0fs)" % (dt, budget_s),
    ]
    return ok, lines


ORACLES = {
    "rng": check_rng,
    "single-queue": oracle_single_queue,
    "wr-drift": oracle_wr_drift,
    "jsq-full": oracle_jsq_full,
    "dynamics": oracle_dynamics,
}
