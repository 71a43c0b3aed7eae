"""Slot-phased simulation loop, reference implementation.

This is the readable, object-model engine. kernel.py implements the same
semantics as a compiled hot loop for long runs; a dedicated test drives
both on every policy and requires bit-identical decisions, trajectories
and reports.

Slot protocol (both engines follow it verbatim; stream indices are the
ones documented in rng.py):

  P0   metrics snapshot, no draws: slot-start total queue, view gaps,
       refresh ages. Queues at the start of slot 0 are empty.
  P1   arrivals: dispatchers in ascending id order draw from the arrival
       stream (Poisson via Knuth's product, or deterministic without a
       draw).
  P2   routing: each dispatcher with arrivals, ascending id, draws from
       its own dispatcher stream: policy-specific draws first (argmin
       tie-break; WR cumulative-weight spin; d distinct samples by
       Floyd's algorithm then a tie-break; idle-set pop or uniform
       fallback; push coin then target), then the local-view
       self-increment, then the batch joins the server's FIFO. The whole
       batch goes to one server. Routing reads slot-start state: queue
       totals for JSQ/JSQ(d), each dispatcher's own view for the LSQ
       family.
  P3   service: each server, ascending id, draws potential service from
       its service stream (drawn every slot whether or not work is
       queued) and completes min(queue + arrivals, service) jobs FIFO;
       a job arriving this slot can complete this slot.
  P4   server update rules, ascending id, each server's policy stream:
       update draws destination then coin-if-busy; smart draws
       coin-if-confident then worst-gap tie-break; pull draws coin then
       destination; idle notifications draw a destination; round-robin
       and full refresh draw nothing. Messages overwrite dispatcher
       views immediately (zero delay; views are next read at slot t+1).
  P4b  push-sample delivery: per dispatcher, in draw order, the sampled
       servers' post-service queue lengths overwrite the sampler's view.

Queue dynamics are exactly Q(t+1) = max(Q(t) + a(t) - s(t), 0) per
server; the debug counters verify this every slot.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import policies as pol
from . import rng as rnglib
from .processes import ArrivalSpec, ConfigError, ServiceSpec, capacity

DEFAULT_WINDOWS = 200


@dataclass(frozen=True)
class SimConfig:
    """Everything one run needs; same seed means same results."""

    n: int
    m: int
    slots: int
    seed: int
    arrival: ArrivalSpec
    services: tuple
    policy: pol.PolicySpec
    warmup: int = 0
    windows: int = DEFAULT_WINDOWS
    scenario: str = "custom"
    load: float = float("nan")
    debug: bool = False
    record_decisions: bool = False

    def validate(self):
        if self.n <= 0 or self.m <= 0:
            raise ConfigError("need n >= 1 servers and m >= 1 dispatchers")
        if self.slots < 0:
            raise ConfigError("negative horizon")
        if not 0 <= self.warmup <= self.slots:
            raise ConfigError("warmup outside [0, slots]")
        if self.windows < 1:
            raise ConfigError("need at least one window")
        if len(self.services) != self.n:
            raise ConfigError("expected %d service specs, got %d" % (self.n, len(self.services)))
        if self.arrival.m != self.m:
            raise ConfigError("arrival spec is for %d dispatchers, config has %d" % (self.arrival.m, self.m))
        self.policy.validate(self.n, self.m)

    def capacity(self):
        return capacity(self.services, self.arrival).capacity

    def fingerprint(self):
        return (
            self.scenario,
            self.policy.canonical_id(),
            self.n,
            self.m,
            self.slots,
            self.warmup,
            self.seed,
            self.windows,
            tuple((s.kind, s.rate) for s in self.services),
            self.arrival.kind,
            self.arrival.per_dispatcher_rates,
        )


@dataclass
class JobRecord:
    arrival_slot: int
    dispatcher: int
    completion_slot: int = -1


@dataclass
class ServerState:
    """True queue of one server; q_len caches len(queue)."""

    id: int
    queue: deque
    q_len: int
    service_spec: ServiceSpec
    policy_state: pol.ServerPolicyState


@dataclass
class SlotTrace:
    slot: int
    dispatcher_arrivals: list
    decisions: list
    server_arrivals: list
    service: list
    completions: list
    messages: list
    message_count: int
    incast_max: int
    # monitor snapshots taken at P0 (slot start)
    start_total_queue: int
    gap_sum: int = 0
    gap_max: int = 0
    age_max: int = 0


@dataclass
class ReferenceRun:
    """Raw output of the reference engine, consumed by metrics.aggregate."""

    config: SimConfig
    traces: list
    completed: list
    decisions: np.ndarray
    gap_pair_sums: np.ndarray
    jobs_arrived: int
    jobs_completed: int
    final_total_queue: int
    recursion_violations: int
    fifo_violations: int
    shadow_violations: int


def wr_cumulative(services):
    """Cumulative routing weights proportional to service rates."""
    total = 0.0
    for s in services:
        total += s.rate
    acc = 0.0
    out = []
    for s in services:
        acc += s.rate
        out.append(acc / total)
    out[-1] = 1.0  # guard against float round-off at the top end
    return out


def window_plan(window_slots, requested):
    """(count, size) of equal windows covering the measurement slots.

    The remainder after count*size slots is excluded from windowed series
    (scalar means still use every slot).
    """
    if window_slots <= 0:
        return 0, 0
    count = min(requested, window_slots)
    return count, window_slots // count


def run_reference(config: SimConfig) -> ReferenceRun:
    """Run the object-model engine and collect full traces."""
    config.validate()
    n, m = config.n, config.m
    spec = config.policy
    code = spec.code
    has_views = spec.has_views

    streams = rnglib.make_streams(config.seed, n, m)
    s_arr = streams[rnglib.stream_arrivals()]
    s_svc = [streams[rnglib.stream_service(i)] for i in range(n)]
    s_dsp = [streams[rnglib.stream_dispatcher(n, j)] for j in range(m)]
    s_srv = [streams[rnglib.stream_server(n, m, i)] for i in range(n)]

    servers = [
        ServerState(
            id=i,
            queue=deque(),
            q_len=0,
            service_spec=config.services[i],
            policy_state=pol.ServerPolicyState(id=i, dispatcher_shadow=[0] * m),
        )
        for i in range(n)
    ]
    dispatchers = [pol.DispatcherState(id=j, local_view=[0] * n) for j in range(m)]

    expneg = [math.exp(-r) for r in config.arrival.per_dispatcher_rates]
    det_arrivals = [int(r) for r in config.arrival.per_dispatcher_rates]
    cum_weights = wr_cumulative(config.services) if code == pol.WR else None
    p_thr = rnglib.coin_threshold(spec.p) if spec.p else 0
    push_thr = rnglib.coin_threshold(min(1.0, spec.r / m)) if code in (pol.PUSH, pol.HYBRID) else 0
    pull_thr = rnglib.coin_threshold(min(1.0, spec.r / n)) if code == pol.PULL else 0
    rr_period = spec.c_up // m if code == pol.LSQ_RR else 0

    last_refresh = [[-1] * n for _ in range(m)]
    gap_pair_sums = np.zeros((m, n), dtype=np.int64)

    traces = []
    completed = []
    decisions = np.full((config.slots if config.record_decisions else 0, m), -1, dtype=np.int32)

    jobs_arrived = 0
    jobs_completed = 0
    recursion_violations = 0
    fifo_violations = 0
    shadow_violations = 0
    last_popped_slot = [-1] * n

    for t in range(config.slots):
        in_window = t >= config.warmup

        # P0: monitor snapshots at slot start
        start_total = sum(sv.q_len for sv in servers)
        gap_sum = 0
        gap_max = 0
        age_max = 0
        if has_views:
            for j in range(m):
                view = dispatchers[j].local_view
                lr = last_refresh[j]
                for i in range(n):
                    g = abs(servers[i].q_len - view[i])
                    gap_sum += g
                    if g > gap_max:
                        gap_max = g
                    if in_window:
                        gap_pair_sums[j, i] += g
                    age = t - lr[i]
                    if age > age_max:
                        age_max = age

        # P1: arrivals
        if config.arrival.kind == "poisson":
            a_disp = [rnglib.poisson(s_arr, expneg[j]) for j in range(m)]
        else:
            a_disp = list(det_arrivals)
        jobs_arrived += sum(a_disp)

        # P2: routing
        slot_decisions = []
        a_srv = [0] * n
        sample_targets = [[] for _ in range(m)]
        messages = []
        msg_count = 0
        pre_q = [sv.q_len for sv in servers]  # slot-start queues for JSQ oracles
        for j in range(m):
            a_j = a_disp[j]
            if a_j <= 0:
                continue
            rng = s_dsp[j]
            view = dispatchers[j].local_view
            if code == pol.JSQ:
                target = pol.jsq_route(a_j, pre_q, rng)
            elif code == pol.WR:
                target = pol.wr_route(a_j, cum_weights, rng)
            elif code == pol.JSQ_D:
                target, sampled = pol.jsq_d_route(a_j, spec.d, pre_q, rng)
                msg_count += len(sampled)
            elif code == pol.JIQ:
                target = pol.jiq_route(a_j, dispatchers[j].idle_set, n, rng)
            else:
                target = pol.lsq_sample_route(a_j, view, rng)
                if code == pol.LSQ_SAMPLE:
                    sample_targets[j] = pol.lsq_sample_targets(a_j, spec.d, n, rng)
                    msg_count += len(sample_targets[j])
                elif code in (pol.PUSH, pol.HYBRID):
                    tgt = pol.push_target(a_j, push_thr, n, rng)
                    if tgt is not None:
                        sample_targets[j] = [tgt]
                        msg_count += 1
            if code == pol.LSQ_SMART:
                servers[target].policy_state.dispatcher_shadow[j] += a_j
            slot_decisions.append(pol.RoutingDecision(dispatcher=j, server=target, jobs=a_j))
            if config.record_decisions:
                decisions[t, j] = target
            a_srv[target] += a_j
            for _ in range(a_j):
                servers[target].queue.append(JobRecord(arrival_slot=t, dispatcher=j))
            servers[target].q_len += a_j

        incast = 0
        if slot_decisions:
            per_server = {}
            for dec in slot_decisions:
                per_server[dec.server] = per_server.get(dec.server, 0) + 1
            incast = max(per_server.values())

        # P3: service
        service = [0] * n
        completions = [0] * n
        for i in range(n):
            sv = servers[i]
            s_i = _draw_service(sv.service_spec, s_svc[i])
            service[i] = s_i
            done = min(sv.q_len, s_i)
            completions[i] = done
            for _ in range(done):
                job = sv.queue.popleft()
                job.completion_slot = t
                if job.arrival_slot < last_popped_slot[i]:
                    fifo_violations += 1
                last_popped_slot[i] = job.arrival_slot
                completed.append(job)
            sv.q_len -= done
            jobs_completed += done
            new_q = pre_q[i] + a_srv[i] - completions[i]
            if new_q != max(pre_q[i] + a_srv[i] - service[i], 0) or new_q != sv.q_len:
                recursion_violations += 1

        # P4: server update rules (zero-delay delivery)
        for i in range(n):
            sv = servers[i]
            q_post = sv.q_len
            comp = completions[i]
            rng = s_srv[i]
            dest = None
            if code == pol.JIQ:
                dest = pol.idle_notify_dest(comp, q_post, m, rng)
                if dest is not None:
                    dispatchers[dest].idle_set.add(i)
                    messages.append(pol.UpdateMessage(i, q_post, dest, t))
                    msg_count += 1
                dest = None
            elif code == pol.LSQ_UPDATE:
                dest = pol.lsq_update_dest(comp, q_post, m, p_thr, rng)
            elif code == pol.LSQ_SMART:
                shadow = sv.policy_state.dispatcher_shadow
                dest = pol.lsq_smart_dest(comp, q_post, shadow, p_thr, rng)
                if dest is not None:
                    shadow[dest] = q_post
            elif code == pol.PULL:
                dest = pol.pull_dest(comp, pull_thr, m, rng)
            elif code == pol.HYBRID:
                dest = pol.idle_notify_dest(comp, q_post, m, rng)
            elif code == pol.LSQ_RR:
                rr = pol.roundrobin_dest(t, rr_period, m)
                if rr is not None:
                    dispatchers[rr].local_view[i] = q_post
                    last_refresh[rr][i] = t
                    messages.append(pol.UpdateMessage(i, q_post, rr, t))
                    msg_count += 1
            elif code == pol.LSQ_FULL:
                for j in range(m):
                    dispatchers[j].local_view[i] = q_post
                    last_refresh[j][i] = t
                msg_count += m
            if dest is not None:
                dispatchers[dest].local_view[i] = q_post
                last_refresh[dest][i] = t
                messages.append(pol.UpdateMessage(i, q_post, dest, t))
                msg_count += 1

        # P4b: push-sample delivery with post-service truth
        for j in range(m):
            for i in sample_targets[j]:
                dispatchers[j].local_view[i] = servers[i].q_len
                last_refresh[j][i] = t
                messages.append(pol.UpdateMessage(i, servers[i].q_len, j, t))

        if config.debug and code == pol.LSQ_SMART:
            for i in range(n):
                shadow = servers[i].policy_state.dispatcher_shadow
                for j in range(m):
                    if shadow[j] != dispatchers[j].local_view[i]:
                        shadow_violations += 1

        traces.append(
            SlotTrace(
                slot=t,
                dispatcher_arrivals=a_disp,
                decisions=slot_decisions,
                server_arrivals=a_srv,
                service=service,
                completions=completions,
                messages=messages,
                message_count=msg_count,
                incast_max=incast,
                start_total_queue=start_total,
                gap_sum=gap_sum,
                gap_max=gap_max,
                age_max=age_max,
            )
        )

    return ReferenceRun(
        config=config,
        traces=traces,
        completed=completed,
        decisions=decisions,
        gap_pair_sums=gap_pair_sums,
        jobs_arrived=jobs_arrived,
        jobs_completed=jobs_completed,
        final_total_queue=sum(sv.q_len for sv in servers),
        recursion_violations=recursion_violations,
        fifo_violations=fifo_violations,
        shadow_violations=shadow_violations,
    )


def _draw_service(spec, rng):
    if spec.kind == "deterministic":
        return int(spec.rate)
    if spec.kind == "geometric_min1":
        return rnglib.geometric_min1(rng, spec.coin_threshold())
    return rnglib.geometric0(rng, spec.coin_threshold())
