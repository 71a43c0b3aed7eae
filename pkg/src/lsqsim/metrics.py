"""Aggregation of runs into reported quantities.

Scalar means, percentiles and verdicts are all derived from integer
accumulators (sums, histograms, counts), so two runs with the same seed
produce byte-identical reports. The reference engine reduces SlotTraces
here (aggregate_reference); the compiled kernel accumulates the same
integers in its hot loop and both meet in finalize_report.

Message accounting caveat: JSQ gets the nominal worst-case rates (m*n
per slot, m per job) instead of simulated messages, since its oracle
view has no message plumbing. For every other policy the reported
per-job rate is exactly messages_total / jobs_arrived.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import policies as pol
from .engine import window_plan

SCHEMA_VERSION = 1

# quantile grid used for tail comparisons, beyond the p50/p99/p999 columns
TAIL_GRID = (0.99, 0.995, 0.999, 0.9995, 0.9999, 1.0)

CCDF_MAX_POINTS = 4096
CCDF_TAIL_KEEP = 200

STABLE = "stable"
UNSTABLE = "unstable"
INCONCLUSIVE = "inconclusive"


@dataclass
class StabilityConfig:
    """Thresholds for the empirical stability verdict."""

    growth_factor: float = 1.5
    agree_fraction: float = 0.10
    z: float = 1.96
    practical_fraction: float = 0.05
    min_windows: int = 10


@dataclass
class MetricsReport:
    scenario: str
    policy: str
    load: float
    seed: int
    slots: int
    warmup: int
    n: int
    m: int
    capacity: float
    mean_total_queue: float
    mean_sojourn: float | None
    sojourn_p50: int | None
    sojourn_p99: int | None
    sojourn_p999: int | None
    sojourn_ccdf: list
    tail_quantiles: dict
    incast_histogram: dict
    incast_p100: int
    arrival_slots: int
    messages_total: int
    messages_per_slot: float
    messages_per_job: float | None
    gap_mean: float | None
    gap_max: int | None
    gap_pair_mean: list | None
    gap_window_means: list | None
    queue_window_means: list
    window_size: int
    refresh_age_max: int | None
    stability_verdict: str
    stability: dict
    drift_mean: list
    drift_se: list
    jobs_arrived: int
    jobs_completed: int
    final_total_queue: int
    recursion_violations: int
    fifo_violations: int
    shadow_violations: int
    window_slots: int
    schema_version: int = SCHEMA_VERSION

    def to_json_dict(self):
        d = asdict(self)
        d["incast_histogram"] = {str(k): v for k, v in self.incast_histogram.items()}
        d["tail_quantiles"] = {str(k): v for k, v in self.tail_quantiles.items()}
        return d

    def json_bytes(self):
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":")).encode()


def slope_ci(y, z=1.96):
    """OLS slope of y over its index with a normal-approx CI.

    Returns (slope, lo, hi, se). Two points or fewer: zero-information CI.
    """
    y = np.asarray(y, dtype=np.float64)
    k = len(y)
    if k < 3:
        return 0.0, -math.inf, math.inf, math.inf
    x = np.arange(k, dtype=np.float64)
    xm = x.mean()
    ym = y.mean()
    sxx = float(((x - xm) ** 2).sum())
    sxy = float(((x - xm) * (y - ym)).sum())
    b = sxy / sxx
    a = ym - b * xm
    resid = y - (a + b * x)
    s2 = float((resid**2).sum()) / (k - 2)
    se = math.sqrt(s2 / sxx) if s2 > 0 else 0.0
    return b, b - z * se, b + z * se, se


def stability_estimate(window_means, cfg: StabilityConfig = StabilityConfig()):
    """Heuristic verdict from a series of windowed queue-total means.

    unstable: second half grew by more than growth_factor AND the trend
    slope is significantly positive. stable: halves agree within
    agree_fraction AND the slope is statistically or practically zero.
    Anything else (including too-short series) is inconclusive. This is
    an empirical proxy, not a hypothesis test.
    """
    k = len(window_means)
    details = {"windows": k}
    if k < cfg.min_windows:
        details["reason"] = "series too short"
        return INCONCLUSIVE, details
    means = np.asarray(window_means, dtype=np.float64)
    h1 = float(means[: k // 2].mean())
    h2 = float(means[k // 2 :].mean())
    b, lo, hi, se = slope_ci(means, cfg.z)
    level = float(means.mean())
    practical_zero = abs(b) * k <= cfg.practical_fraction * max(level, 1.0)
    grew = h2 > cfg.growth_factor * h1 if h1 > 0 else h2 > 0
    agree = abs(h2 - h1) <= cfg.agree_fraction * max(h1, h2) if max(h1, h2) > 0 else True
    details.update(
        half1=h1, half2=h2, slope=b, ci_lo=lo, ci_hi=hi,
        slope_se=se, practical_zero=practical_zero,
    )
    if grew and lo > 0:
        return UNSTABLE, details
    if agree and (lo <= 0.0 <= hi or practical_zero):
        return STABLE, details
    return INCONCLUSIVE, details


# ---------------------------------------------------------------------------
# sojourn histogram summaries


def quantile_from_hist(hist, cum, total, q):
    """Smallest threshold whose CDF reaches q (hist indexed by sojourn)."""
    if total == 0:
        return None
    need = q * total
    idx = int(np.searchsorted(cum, need, side="left"))
    return idx


def sojourn_summary(hist):
    """(total, sum, p50, p99, p999, tail dict, ccdf pairs) from a histogram."""
    hist = np.asarray(hist, dtype=np.int64)
    nz = np.nonzero(hist)[0]
    total = int(hist.sum())
    if total == 0:
        return 0, 0, None, None, None, {}, []
    hi = int(nz[-1])
    hist = hist[: hi + 1]
    cum = np.cumsum(hist)
    soj_sum = int((np.arange(hi + 1, dtype=np.int64) * hist).sum())
    p50 = quantile_from_hist(hist, cum, total, 0.50)
    p99 = quantile_from_hist(hist, cum, total, 0.99)
    p999 = quantile_from_hist(hist, cum, total, 0.999)
    tails = {}
    for q in TAIL_GRID:
        tails[("%g" % q)] = int(quantile_from_hist(hist, cum, total, q))
    thresholds = sorted(set([0]) | set(int(i) for i in np.nonzero(hist)[0]))
    if len(thresholds) > CCDF_MAX_POINTS:
        head = thresholds[: -CCDF_TAIL_KEEP]
        stride = max(1, -(-len(head) // (CCDF_MAX_POINTS - CCDF_TAIL_KEEP)))
        kept = head[::stride] + thresholds[-CCDF_TAIL_KEEP:]
        if kept[0] != 0:
            kept.insert(0, 0)
        thresholds = kept
    ccdf = [[int(tau), float((total - int(cum[tau])) / total)] for tau in thresholds]
    return total, soj_sum, p50, p99, p999, tails, ccdf


# ---------------------------------------------------------------------------
# final assembly (shared by both engines)


def message_fields(policy_code, n, m, msgs_window, window_slots, jobs_window):
    """Measured message rates, or the nominal oracle row for JSQ."""
    if policy_code == pol.JSQ:
        total = m * n * window_slots
        return total, float(m * n) if window_slots else 0.0, float(m) if window_slots else None
    per_slot = msgs_window / window_slots if window_slots else 0.0
    per_job = msgs_window / jobs_window if jobs_window else None
    return msgs_window, per_slot, per_job


def finalize_report(
    config,
    capacity_value,
    *,
    sum_q_window,
    msgs_window,
    jobs_window,
    jobs_arrived_total,
    jobs_completed_total,
    sojourn_hist,
    incast_hist,
    arrival_slots_window,
    incast_p100,
    q_win_sums,
    gap_win_sums,
    gap_pair_sums,
    gap_sum_window,
    gap_max,
    age_max,
    drift_s_sums,
    drift_a_sums,
    drift_sq_sums,
    final_total_queue,
    recursion_violations,
    fifo_violations,
    shadow_violations,
    win_count,
    win_size,
    stability_cfg=None,
):
    """Build the MetricsReport from integer accumulators."""
    spec = config.policy
    has_views = spec.has_views
    w = config.slots - config.warmup

    completed_window, sojourn_sum, p50, p99, p999, tails, ccdf = sojourn_summary(sojourn_hist)
    mean_sojourn = (sojourn_sum / completed_window) if completed_window else None
    mean_q = (sum_q_window / w) if w else 0.0

    # float() everywhere below: numpy scalars are not json-serializable
    q_means = [float(q_win_sums[i]) / win_size for i in range(win_count)] if win_size else []
    verdict, details = stability_estimate(q_means, stability_cfg or StabilityConfig())
    details["window_size"] = win_size

    msgs_total, per_slot, per_job = message_fields(
        spec.code, config.n, config.m, msgs_window, w, jobs_window
    )

    if has_views and w:
        pair_norm = w
        gap_pair_mean = [
            [float(gap_pair_sums[j][i]) / pair_norm for i in range(config.n)]
            for j in range(config.m)
        ]
        gap_mean = gap_sum_window / (w * config.n * config.m)
        gap_windows = [float(gap_win_sums[i]) / (win_size * config.n * config.m) for i in range(win_count)] if win_size else []
        age_out = int(age_max)
        gap_max_out = int(gap_max)
    else:
        gap_pair_mean = None
        gap_mean = None
        gap_windows = None
        age_out = None
        gap_max_out = None

    drift_mean = []
    drift_se = []
    for i in range(config.n):
        if w:
            dm = (float(drift_s_sums[i]) - float(drift_a_sums[i])) / w
            var = (float(drift_sq_sums[i]) - w * dm * dm) / (w - 1) if w > 1 else 0.0
            se = math.sqrt(max(var, 0.0) / w) if w > 1 else 0.0
        else:
            dm, se = 0.0, 0.0
        drift_mean.append(dm)
        drift_se.append(se)

    incast_map = {int(v): int(c) for v, c in enumerate(incast_hist) if c > 0}

    return MetricsReport(
        scenario=config.scenario,
        policy=spec.label(),
        load=config.load,
        seed=config.seed,
        slots=config.slots,
        warmup=config.warmup,
        n=config.n,
        m=config.m,
        capacity=capacity_value,
        mean_total_queue=mean_q,
        mean_sojourn=mean_sojourn,
        sojourn_p50=p50,
        sojourn_p99=p99,
        sojourn_p999=p999,
        sojourn_ccdf=ccdf,
        tail_quantiles=tails,
        incast_histogram=incast_map,
        incast_p100=int(incast_p100),
        arrival_slots=int(arrival_slots_window),
        messages_total=int(msgs_total),
        messages_per_slot=per_slot,
        messages_per_job=per_job,
        gap_mean=gap_mean,
        gap_max=gap_max_out,
        gap_pair_mean=gap_pair_mean,
        gap_window_means=gap_windows,
        queue_window_means=q_means,
        window_size=int(win_size),
        refresh_age_max=age_out,
        stability_verdict=verdict,
        stability=details,
        drift_mean=drift_mean,
        drift_se=drift_se,
        jobs_arrived=int(jobs_arrived_total),
        jobs_completed=int(jobs_completed_total),
        final_total_queue=int(final_total_queue),
        recursion_violations=int(recursion_violations),
        fifo_violations=int(fifo_violations),
        shadow_violations=int(shadow_violations),
        window_slots=int(w),
    )


# ---------------------------------------------------------------------------
# trace-based reductions (reference engine path, also used directly in tests)


def mean_total_queue(traces, window):
    """Time average of the slot-start queue total over window (a range)."""
    picked = [traces[t].start_total_queue for t in window]
    if not picked:
        raise ValueError("empty measurement window")
    return sum(picked) / len(picked)


def sojourn_ccdf(sojourns, thresholds):
    """Empirical P(sojourn > tau) at each threshold."""
    total = len(sojourns)
    if total == 0:
        return []
    s = sorted(sojourns)
    out = []
    for tau in thresholds:
        above = total - np.searchsorted(s, tau, side="right")
        out.append((tau, above / total))
    return out


def incast_max(decisions):
    """Most dispatchers hitting one server among this slot's decisions."""
    if not decisions:
        return 0
    per_server = {}
    for d in decisions:
        per_server[d.server] = per_server.get(d.server, 0) + 1
    return max(per_server.values())


def message_rates(traces, window, jobs_window):
    """(per_slot, per_job) measured over the window; per_job None without jobs."""
    total = sum(traces[t].message_count for t in window)
    slots = len(window)
    per_slot = total / slots if slots else 0.0
    per_job = total / jobs_window if jobs_window else None
    return per_slot, per_job


def aggregate_reference(run) -> MetricsReport:
    """Reduce a ReferenceRun's traces into a MetricsReport."""
    config = run.config
    warmup, slots = config.warmup, config.slots
    w = slots - warmup
    tw = run.traces[warmup:]

    sum_q = sum(tr.start_total_queue for tr in tw)
    msgs = sum(tr.message_count for tr in tw)
    jobs_w = sum(sum(tr.dispatcher_arrivals) for tr in tw)
    arrival_slots = sum(1 for tr in tw if tr.incast_max > 0)
    incast_hist = np.zeros(config.m + 1, dtype=np.int64)
    for tr in tw:
        incast_hist[tr.incast_max] += 1
    incast_top = max((tr.incast_max for tr in tw), default=0)

    sojourns = [
        job.completion_slot - job.arrival_slot
        for job in run.completed
        if job.completion_slot >= warmup
    ]
    hist = np.bincount(sojourns, minlength=1).astype(np.int64) if sojourns else np.zeros(1, np.int64)

    win_count, win_size = window_plan(w, config.windows)
    q_win = np.zeros(win_count, dtype=np.int64)
    gap_win = np.zeros(win_count, dtype=np.int64)
    for idx, tr in enumerate(tw):
        wi = idx // win_size if win_size else win_count
        if wi < win_count:
            q_win[wi] += tr.start_total_queue
            gap_win[wi] += tr.gap_sum

    gap_sum_w = sum(tr.gap_sum for tr in tw)
    gap_max = max((tr.gap_max for tr in tw), default=0)
    age_max = max((tr.age_max for tr in tw), default=0)

    drift_s = np.zeros(config.n, dtype=np.int64)
    drift_a = np.zeros(config.n, dtype=np.int64)
    drift_sq = np.zeros(config.n, dtype=np.int64)
    for tr in tw:
        for i in range(config.n):
            s_i = tr.service[i]
            a_i = tr.server_arrivals[i]
            drift_s[i] += s_i
            drift_a[i] += a_i
            drift_sq[i] += (s_i - a_i) ** 2

    return finalize_report(
        config,
        config.capacity(),
        sum_q_window=int(sum_q),
        msgs_window=int(msgs),
        jobs_window=int(jobs_w),
        jobs_arrived_total=run.jobs_arrived,
        jobs_completed_total=run.jobs_completed,
        sojourn_hist=hist,
        incast_hist=incast_hist,
        arrival_slots_window=arrival_slots,
        incast_p100=incast_top,
        q_win_sums=q_win,
        gap_win_sums=gap_win,
        gap_pair_sums=run.gap_pair_sums,
        gap_sum_window=int(gap_sum_w),
        gap_max=gap_max,
        age_max=age_max,
        drift_s_sums=drift_s,
        drift_a_sums=drift_a,
        drift_sq_sums=drift_sq,
        final_total_queue=run.final_total_queue,
        recursion_violations=run.recursion_violations,
        fifo_violations=run.fifo_violations,
        shadow_violations=run.shadow_violations,
        win_count=win_count,
        win_size=win_size,
    )
