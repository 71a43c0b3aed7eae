"""Compiled hot loop for long runs.

Same slot protocol and draw order as engine.run_reference (that module's
docstring is the contract); this one trades the object model for flat
arrays so a million-slot run takes seconds. Job FIFOs are run-length
encoded as (arrival_slot, count) groups packed into one int64 per group,
which is enough because a sojourn only depends on the arrival slot. The
cross-engine test requires bit-identical decisions and reports.

All RNG arithmetic stays in uint64; mixing a plain int into a uint64
expression makes numba promote to float64 and silently change results,
hence the named constants below.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from numba.typed import List

from . import policies as pol
from . import rng as rnglib
from .engine import SimConfig, window_plan, wr_cumulative
from .metrics import MetricsReport, finalize_report

U64 = np.uint64
MULT = U64(rnglib.PCG_MULT)
MASK32 = U64(0xFFFFFFFF)
TWO32 = U64(1 << 32)
INV32 = 2.0**-32
C18 = U64(18)
C27 = U64(27)
C31 = U64(31)
C32 = U64(32)
C59 = U64(59)
LO32 = np.int64(0xFFFFFFFF)

# policy codes, frozen into the compiled loop
JSQ = pol.JSQ
WR = pol.WR
JSQ_D = pol.JSQ_D
JIQ = pol.JIQ
LSQ_SAMPLE = pol.LSQ_SAMPLE
LSQ_UPDATE = pol.LSQ_UPDATE
LSQ_SMART = pol.LSQ_SMART
LSQ_RR = pol.LSQ_RR
LSQ_FULL = pol.LSQ_FULL
PUSH = pol.PUSH
PULL = pol.PULL
HYBRID = pol.HYBRID

SVC_DET = 0
SVC_GEO_MIN1 = 1
SVC_GEO0 = 2

_SVC_CODE = {"deterministic": SVC_DET, "geometric_min1": SVC_GEO_MIN1, "geometric": SVC_GEO0}


@njit(cache=True, inline="always")
def _next32(st, inc, k):
    old = st[k]
    st[k] = old * MULT + inc[k]
    x = (((old >> C18) ^ old) >> C27) & MASK32
    rot = old >> C59
    return ((x >> rot) | (x << ((C32 - rot) & C31))) & MASK32


@njit(cache=True, inline="always")
def _below(st, inc, k, bound):
    # bound <= 1 consumes no draw, same as the python side
    if bound <= 1:
        return np.int64(0)
    b = U64(bound)
    lim = (TWO32 // b) * b
    while True:
        r = _next32(st, inc, k)
        if r < lim:
            return np.int64(r % b)


@njit(cache=True, inline="always")
def _coin(st, inc, k, thr):
    return _next32(st, inc, k) < thr


@njit(cache=True, inline="always")
def _float01(st, inc, k):
    return np.float64(_next32(st, inc, k)) * INV32


@njit(cache=True, inline="always")
def _poisson(st, inc, k, expneg):
    count = np.int64(0)
    p = 1.0
    while True:
        p *= _float01(st, inc, k)
        if p <= expneg:
            return count
        count += 1


@njit(cache=True, inline="always")
def _geo_min1(st, inc, k, thr):
    s = np.int64(1)
    while _next32(st, inc, k) >= thr:
        s += 1
    return s


@njit(cache=True, inline="always")
def _geo0(st, inc, k, thr):
    s = np.int64(0)
    while _next32(st, inc, k) >= thr:
        s += 1
    return s


@njit(cache=True, inline="always")
def _argmin_tb(vals, n, st, inc, k):
    best = vals[0]
    ties = np.int64(1)
    for i in range(1, n):
        v = vals[i]
        if v < best:
            best = v
            ties = 1
        elif v == best:
            ties += 1
    pick = _below(st, inc, k, ties)
    seen = np.int64(0)
    for i in range(n):
        if vals[i] == best:
            if seen == pick:
                return np.int64(i)
            seen += 1
    return np.int64(-1)


@njit(cache=True, inline="always")
def _sample_distinct(st, inc, k, n, d, out):
    cnt = 0
    for top in range(n - d, n):
        r = _below(st, inc, k, top + 1)
        dup = False
        for x in range(cnt):
            if out[x] == r:
                dup = True
                break
        out[cnt] = top if dup else r
        cnt += 1


@njit(cache=True)
def _simulate(
    n, m, slots, warmup, code, d, p_thr, push_thr, pull_thr, rr_period,
    arr_poisson, arr_expneg, arr_det, svc_kind, svc_thr, svc_det, wr_cum,
    st, inc, win_count, win_size, has_views, debug, record,
):
    k_arr = np.int64(0)

    q_len = np.zeros(n, np.int64)
    pre_q = np.zeros(n, np.int64)
    a_disp = np.zeros(m, np.int64)
    a_srv = np.zeros(n, np.int64)
    views = np.zeros((m, n), np.int64)
    shadow = np.zeros((n, m), np.int64)
    gaps_scratch = np.zeros(m, np.int64)
    idle = np.zeros((m, n), np.bool_)
    idle_cnt = np.zeros(m, np.int64)
    last_refresh = np.full((m, n), -1, np.int64)
    min_last = np.int64(-1)
    min_mult = np.int64(m * n)

    d_cap = d if d > 0 else 1
    samp_buf = np.zeros((m, d_cap), np.int64)
    samp_cnt = np.zeros(m, np.int64)

    # job FIFOs: per-server ring of packed (slot << 32 | count) groups
    qbuf = List()
    for _ in range(n):
        qbuf.append(np.zeros(16, np.int64))
    g_head = np.zeros(n, np.int64)
    g_cnt = np.zeros(n, np.int64)
    g_cap = np.full(n, 16, np.int64)

    # per-slot distinct-dispatcher counts, reset lazily via slot stamps
    stamp = np.full(n, -1, np.int64)
    hits = np.zeros(n, np.int64)
    touch = np.zeros(n, np.int64)

    sojourn_hist = np.zeros(slots + 1, np.int64)
    incast_hist = np.zeros(m + 1, np.int64)
    q_win = np.zeros(max(win_count, 1), np.int64)
    gap_win = np.zeros(max(win_count, 1), np.int64)
    gap_pair = np.zeros((m, n), np.int64)
    drift_s = np.zeros(n, np.int64)
    drift_a = np.zeros(n, np.int64)
    drift_sq = np.zeros(n, np.int64)
    decisions = np.full((slots if record else 0, m), -1, np.int32)

    total_q = np.int64(0)
    sum_q_window = np.int64(0)
    msgs_window = np.int64(0)
    jobs_window = np.int64(0)
    jobs_arrived = np.int64(0)
    jobs_completed = np.int64(0)
    arrival_slots = np.int64(0)
    incast_p100 = np.int64(0)
    gap_sum_window = np.int64(0)
    gap_max = np.int64(0)
    age_max = np.int64(0)
    recursion_bad = np.int64(0)
    shadow_bad = np.int64(0)

    for t in range(slots):
        in_window = t >= warmup
        wi = (t - warmup) // win_size if (in_window and win_size > 0) else np.int64(-1)
        if wi >= win_count:
            wi = np.int64(-1)

        # P0: slot-start monitors
        if in_window:
            sum_q_window += total_q
            if wi >= 0:
                q_win[wi] += total_q
            if has_views:
                gap_slot = np.int64(0)
                for j in range(m):
                    for i in range(n):
                        g = q_len[i] - views[j, i]
                        if g < 0:
                            g = -g
                        gap_slot += g
                        if g > gap_max:
                            gap_max = g
                        gap_pair[j, i] += g
                gap_sum_window += gap_slot
                if wi >= 0:
                    gap_win[wi] += gap_slot
                age = t - min_last
                if age > age_max:
                    age_max = age

        # P1: arrivals
        a_total = np.int64(0)
        for j in range(m):
            a = _poisson(st, inc, k_arr, arr_expneg[j]) if arr_poisson else arr_det[j]
            a_disp[j] = a
            a_total += a
        jobs_arrived += a_total
        if in_window:
            jobs_window += a_total

        # P2: routing
        for i in range(n):
            pre_q[i] = q_len[i]
            a_srv[i] = 0
        slot_msgs = np.int64(0)
        n_touch = 0
        for j in range(m):
            a_j = a_disp[j]
            samp_cnt[j] = 0
            if a_j <= 0:
                continue
            kd = 1 + n + j
            target = np.int64(-1)
            if code == JSQ:
                target = _argmin_tb(pre_q, n, st, inc, kd)
            elif code == WR:
                u = _float01(st, inc, kd)
                w = np.int64(0)
                while u >= wr_cum[w]:
                    w += 1
                target = w
            elif code == JSQ_D:
                _sample_distinct(st, inc, kd, n, d, samp_buf[j])
                best = pre_q[samp_buf[j, 0]]
                ties = np.int64(1)
                for x in range(1, d):
                    v = pre_q[samp_buf[j, x]]
                    if v < best:
                        best = v
                        ties = 1
                    elif v == best:
                        ties += 1
                pick = _below(st, inc, kd, ties)
                seen = np.int64(0)
                for x in range(d):
                    sx = samp_buf[j, x]
                    if pre_q[sx] == best:
                        if seen == pick:
                            target = sx
                            break
                        seen += 1
                samp_cnt[j] = 0
                slot_msgs += d
            elif code == JIQ:
                if idle_cnt[j] > 0:
                    pick = _below(st, inc, kd, idle_cnt[j])
                    seen = np.int64(0)
                    for i in range(n):
                        if idle[j, i]:
                            if seen == pick:
                                target = np.int64(i)
                                idle[j, i] = False
                                idle_cnt[j] -= 1
                                break
                            seen += 1
                else:
                    target = _below(st, inc, kd, n)
            else:
                target = _argmin_tb(views[j], n, st, inc, kd)
                views[j, target] += a_j
                if code == LSQ_SAMPLE:
                    _sample_distinct(st, inc, kd, n, d, samp_buf[j])
                    samp_cnt[j] = d
                    slot_msgs += d
                elif code == PUSH or code == HYBRID:
                    if _coin(st, inc, kd, push_thr):
                        samp_buf[j, 0] = _below(st, inc, kd, n)
                        samp_cnt[j] = 1
                        slot_msgs += 1
            if code == LSQ_SMART:
                shadow[target, j] += a_j
            if record:
                decisions[t, j] = target
            a_srv[target] += a_j
            q_len[target] += a_j
            total_q += a_j
            # append the batch to the run-length FIFO, merging same-slot groups
            cap = g_cap[target]
            mask = cap - 1
            merged = False
            if g_cnt[target] > 0:
                tail = (g_head[target] + g_cnt[target] - 1) & mask
                entry = qbuf[target][tail]
                if (entry >> 32) == t:
                    qbuf[target][tail] = entry + a_j
                    merged = True
            if not merged:
                if g_cnt[target] == cap:
                    newbuf = np.empty(cap * 2, np.int64)
                    old = qbuf[target]
                    for x in range(cap):
                        newbuf[x] = old[(g_head[target] + x) & mask]
                    qbuf[target] = newbuf
                    g_head[target] = 0
                    g_cap[target] = cap * 2
                    cap = cap * 2
                    mask = cap - 1
                qbuf[target][(g_head[target] + g_cnt[target]) & mask] = (np.int64(t) << 32) | a_j
                g_cnt[target] += 1
            # distinct dispatchers per server this slot
            if stamp[target] != t:
                stamp[target] = t
                hits[target] = 1
                touch[n_touch] = target
                n_touch += 1
            else:
                hits[target] += 1

        incast_slot = np.int64(0)
        for x in range(n_touch):
            h = hits[touch[x]]
            if h > incast_slot:
                incast_slot = h
        if in_window:
            incast_hist[incast_slot] += 1
            if incast_slot > 0:
                arrival_slots += 1
            if incast_slot > incast_p100:
                incast_p100 = incast_slot

        # P3: service
        for i in range(n):
            kind = svc_kind[i]
            ks = 1 + i
            if kind == SVC_DET:
                s_i = svc_det[i]
            elif kind == SVC_GEO_MIN1:
                s_i = _geo_min1(st, inc, ks, svc_thr[i])
            else:
                s_i = _geo0(st, inc, ks, svc_thr[i])
            done = q_len[i] if q_len[i] < s_i else s_i
            left = done
            mask = g_cap[i] - 1
            while left > 0:
                entry = qbuf[i][g_head[i]]
                g_slot = entry >> 32
                g_count = entry & LO32
                take = g_count if g_count < left else left
                if in_window:
                    sojourn_hist[t - g_slot] += take
                left -= take
                if take == g_count:
                    g_head[i] = (g_head[i] + 1) & mask
                    g_cnt[i] -= 1
                else:
                    qbuf[i][g_head[i]] = entry - take
            q_len[i] -= done
            total_q -= done
            jobs_completed += done
            new_q = pre_q[i] + a_srv[i] - s_i
            if new_q < 0:
                new_q = np.int64(0)
            if new_q != q_len[i]:
                recursion_bad += 1
            if in_window:
                drift_s[i] += s_i
                drift_a[i] += a_srv[i]
                dd = s_i - a_srv[i]
                drift_sq[i] += dd * dd

        # P4: server update rules
        for i in range(n):
            q_post = q_len[i]
            completed = pre_q[i] + a_srv[i] - q_post
            ks = 1 + n + m + i
            dest = np.int64(-1)
            if code == JIQ:
                if completed > 0 and q_post == 0:
                    nd = _below(st, inc, ks, m)
                    if not idle[nd, i]:
                        idle[nd, i] = True
                        idle_cnt[nd] += 1
                    slot_msgs += 1
            elif code == LSQ_UPDATE:
                if completed > 0:
                    cand = _below(st, inc, ks, m)
                    if q_post == 0:
                        dest = cand
                    elif _coin(st, inc, ks, p_thr):
                        dest = cand
            elif code == LSQ_SMART:
                if completed > 0:
                    z = np.int64(0)
                    for j in range(m):
                        g = q_post - shadow[i, j]
                        if g < 0:
                            g = -g
                        gaps_scratch[j] = g
                        if g > z:
                            z = g
                    send = z >= q_post
                    if not send:
                        send = _coin(st, inc, ks, p_thr)
                    if send:
                        ties = np.int64(0)
                        for j in range(m):
                            if gaps_scratch[j] == z:
                                ties += 1
                        pick = _below(st, inc, ks, ties)
                        seen = np.int64(0)
                        for j in range(m):
                            if gaps_scratch[j] == z:
                                if seen == pick:
                                    dest = np.int64(j)
                                    break
                                seen += 1
                        shadow[i, dest] = q_post
            elif code == PULL:
                if completed > 0:
                    if _coin(st, inc, ks, pull_thr):
                        dest = _below(st, inc, ks, m)
            elif code == HYBRID:
                if completed > 0 and q_post == 0:
                    dest = _below(st, inc, ks, m)
            elif code == LSQ_RR:
                if t % rr_period == 0:
                    rj = (t // rr_period) % m
                    views[rj, i] = q_post
                    if last_refresh[rj, i] == min_last:
                        min_mult -= 1
                    last_refresh[rj, i] = t
                    slot_msgs += 1
            elif code == LSQ_FULL:
                for j in range(m):
                    views[j, i] = q_post
                    if last_refresh[j, i] == min_last:
                        min_mult -= 1
                    last_refresh[j, i] = t
                slot_msgs += m
            if dest >= 0:
                views[dest, i] = q_post
                if last_refresh[dest, i] == min_last:
                    min_mult -= 1
                last_refresh[dest, i] = t
                slot_msgs += 1

        # P4b: push-sample delivery with post-service truth
        for j in range(m):
            for x in range(samp_cnt[j]):
                tgt = samp_buf[j, x]
                views[j, tgt] = q_len[tgt]
                if last_refresh[j, tgt] == min_last:
                    min_mult -= 1
                last_refresh[j, tgt] = t

        if min_mult == 0:
            min_last = last_refresh[0, 0]
            for j in range(m):
                for i in range(n):
                    if last_refresh[j, i] < min_last:
                        min_last = last_refresh[j, i]
            for j in range(m):
                for i in range(n):
                    if last_refresh[j, i] == min_last:
                        min_mult += 1

        if debug and code == LSQ_SMART:
            for i in range(n):
                for j in range(m):
                    if shadow[i, j] != views[j, i]:
                        shadow_bad += 1

        if in_window:
            msgs_window += slot_msgs

    return (
        sum_q_window, msgs_window, jobs_window, jobs_arrived, jobs_completed,
        sojourn_hist, incast_hist, arrival_slots, incast_p100,
        q_win, gap_win, gap_pair, gap_sum_window, gap_max, age_max,
        drift_s, drift_a, drift_sq, total_q, recursion_bad, shadow_bad, decisions,
    )


@dataclass
class FastRun:
    """Compiled-engine result: the report plus the raw decision trail."""

    config: SimConfig
    report: MetricsReport
    decisions: np.ndarray


def run_fast(config: SimConfig) -> FastRun:
    """Run the compiled kernel and aggregate, mirroring the reference setup."""
    config.validate()
    n, m = config.n, config.m
    spec = config.policy
    code = spec.code

    st, inc = rnglib.make_stream_arrays(config.seed, n, m)

    arr_poisson = config.arrival.kind == "poisson"
    # math.exp, not np.exp: the reference engine uses libm and the two can
    # disagree in the last ulp, which would break cross-engine bit parity
    arr_expneg = np.array(
        [math.exp(-r) for r in config.arrival.per_dispatcher_rates], dtype=np.float64
    )
    arr_det = np.array([int(r) for r in config.arrival.per_dispatcher_rates], dtype=np.int64)

    svc_kind = np.zeros(n, np.int64)
    svc_thr = np.zeros(n, np.uint64)
    svc_det = np.zeros(n, np.int64)
    for i, s in enumerate(config.services):
        svc_kind[i] = _SVC_CODE[s.kind]
        if s.kind == "deterministic":
            svc_det[i] = int(s.rate)
        else:
            svc_thr[i] = s.coin_threshold()

    wr_cum = (
        np.array(wr_cumulative(config.services), dtype=np.float64)
        if code == pol.WR
        else np.zeros(1, np.float64)
    )

    p_thr = rnglib.coin_threshold(spec.p) if spec.p else 0
    push_thr = rnglib.coin_threshold(min(1.0, spec.r / m)) if code in (pol.PUSH, pol.HYBRID) else 0
    pull_thr = rnglib.coin_threshold(min(1.0, spec.r / n)) if code == pol.PULL else 0
    rr_period = spec.c_up // m if code == pol.LSQ_RR else 1

    win_count, win_size = window_plan(config.slots - config.warmup, config.windows)

    (
        sum_q_window, msgs_window, jobs_window, jobs_arrived, jobs_completed,
        sojourn_hist, incast_hist, arrival_slots, incast_p100,
        q_win, gap_win, gap_pair, gap_sum_window, gap_max, age_max,
        drift_s, drift_a, drift_sq, total_q, recursion_bad, shadow_bad, decisions,
    ) = _simulate(
        np.int64(n), np.int64(m), np.int64(config.slots), np.int64(config.warmup),
        np.int64(code), np.int64(spec.d or 0),
        np.uint64(p_thr), np.uint64(push_thr), np.uint64(pull_thr), np.int64(rr_period),
        arr_poisson, arr_expneg, arr_det, svc_kind, svc_thr, svc_det, wr_cum,
        st, inc, np.int64(win_count), np.int64(win_size),
        spec.has_views, config.debug, config.record_decisions,
    )

    report = finalize_report(
        config,
        config.capacity(),
        sum_q_window=int(sum_q_window),
        msgs_window=int(msgs_window),
        jobs_window=int(jobs_window),
        jobs_arrived_total=int(jobs_arrived),
        jobs_completed_total=int(jobs_completed),
        sojourn_hist=sojourn_hist,
        incast_hist=incast_hist,
        arrival_slots_window=int(arrival_slots),
        incast_p100=int(incast_p100),
        q_win_sums=q_win[:win_count],
        gap_win_sums=gap_win[:win_count],
        gap_pair_sums=gap_pair,
        gap_sum_window=int(gap_sum_window),
        gap_max=int(gap_max),
        age_max=int(age_max),
        drift_s_sums=drift_s,
        drift_a_sums=drift_a,
        drift_sq_sums=drift_sq,
        final_total_queue=int(total_q),
        recursion_violations=int(recursion_bad),
        fifo_violations=0,
        shadow_violations=int(shadow_bad),
        win_count=win_count,
        win_size=win_size,
    )
    return FastRun(config=config, report=report, decisions=decisions)
