"""Routing policies and server update rules.

A dispatcher policy decides, once per slot per dispatcher with arrivals,
which single server receives the whole batch. A server update rule
decides, at the end of a slot, whether to push the server's true queue
length to some dispatcher's local view.

The pure decision functions live here; the engines (engine.py and
kernel.py) own the state and call them in a fixed order. Determinism
contract: every random choice draws from the stream passed in, ties are
broken uniformly over the tied candidates scanned in ascending index
order, and a bound of one draws nothing (see rng.Pcg32.below).
"""

from dataclasses import dataclass, field

from .processes import ConfigError
from . import rng as rnglib

# integer codes shared with the compiled kernel
(
    JSQ,
    WR,
    JSQ_D,
    JIQ,
    LSQ_SAMPLE,
    LSQ_UPDATE,
    LSQ_SMART,
    LSQ_RR,
    LSQ_FULL,
    PUSH,
    PULL,
    HYBRID,
) = range(12)

_KIND_CODES = {
    "jsq": JSQ,
    "wr": WR,
    "jsq_d": JSQ_D,
    "jiq": JIQ,
    "sample": LSQ_SAMPLE,
    "update": LSQ_UPDATE,
    "smart": LSQ_SMART,
    "roundrobin": LSQ_RR,
    "full_update": LSQ_FULL,
    "push": PUSH,
    "pull": PULL,
    "hybrid": HYBRID,
}

# which policies maintain per-dispatcher local views
VIEW_CODES = frozenset(
    [LSQ_SAMPLE, LSQ_UPDATE, LSQ_SMART, LSQ_RR, LSQ_FULL, PUSH, PULL, HYBRID]
)
# which read true queue lengths while routing (oracle access)
TRUE_QUEUE_CODES = frozenset([JSQ, JSQ_D])


@dataclass(frozen=True)
class PolicySpec:
    """Parsed policy id: kind plus its single parameter, if any."""

    kind: str
    d: int = 0
    p: float = 0.0
    r: float = 0.0
    c_up: int = 0

    @property
    def code(self):
        return _KIND_CODES[self.kind]

    @property
    def has_views(self):
        return self.code in VIEW_CODES

    def label(self):
        k = self.kind
        if k == "jsq":
            return "JSQ"
        if k == "wr":
            return "WR"
        if k == "jsq_d":
            return "JSQ(%d)" % self.d
        if k == "jiq":
            return "JIQ"
        if k == "sample":
            return "LSQ-Sample(%d)" % self.d
        if k == "update":
            return "LSQ-Update(%g)" % self.p
        if k == "smart":
            return "LSQ-Smart(%g)" % self.p
        if k == "roundrobin":
            return "LSQ-RR(%d)" % self.c_up
        if k == "full_update":
            return "LSQ-Full"
        if k == "push":
            return "Push(%g)" % self.r
        if k == "pull":
            return "Pull(%g)" % self.r
        return "Hybrid(%g)" % self.r

    def canonical_id(self):
        k = self.kind
        if k in ("jsq_d", "sample"):
            return "%s:%d" % (k, self.d)
        if k in ("update", "smart"):
            return "%s:%g" % (k, self.p)
        if k == "roundrobin":
            return "%s:%d" % (k, self.c_up)
        if k in ("push", "pull", "hybrid"):
            return "%s:%g" % (k, self.r)
        return k

    def validate(self, n, m):
        k = self.kind
        if k in ("jsq_d", "sample"):
            if not 1 <= self.d <= n:
                raise ConfigError("%s: d=%d out of range 1..%d" % (k, self.d, n))
        elif k in ("update", "smart"):
            if not 0.0 < self.p <= 1.0:
                raise ConfigError("%s: p must be in (0, 1], got %r" % (k, self.p))
        elif k == "roundrobin":
            if self.c_up < m:
                raise ConfigError(
                    "roundrobin: C_up=%d cannot cover %d dispatchers" % (self.c_up, m)
                )
        elif k in ("push", "pull", "hybrid"):
            if self.r <= 0:
                raise ConfigError("%s: r must be > 0, got %r" % (k, self.r))


def parse_policy(text):
    """Parse a policy id such as 'jsq', 'sample:2', 'update:0.2'."""
    parts = text.strip().lower().split(":")
    kind = parts[0]
    if kind not in _KIND_CODES:
        raise ConfigError("unknown policy %r" % (text,))
    arg = parts[1] if len(parts) > 1 else None
    if len(parts) > 2:
        raise ConfigError("malformed policy id %r" % (text,))
    if kind in ("jsq_d", "sample"):
        if arg is None:
            raise ConfigError("%s needs a sample count, e.g. %s:2" % (kind, kind))
        return PolicySpec(kind, d=int(arg))
    if kind in ("update", "smart"):
        if arg is None:
            raise ConfigError("%s needs a probability, e.g. %s:0.2" % (kind, kind))
        return PolicySpec(kind, p=float(arg))
    if kind == "roundrobin":
        if arg is None:
            raise ConfigError("roundrobin needs a period, e.g. roundrobin:10")
        return PolicySpec(kind, c_up=int(arg))
    if kind in ("push", "pull", "hybrid"):
        if arg is None:
            raise ConfigError("%s needs a message budget, e.g. %s:0.01" % (kind, kind))
        return PolicySpec(kind, r=float(arg))
    if arg is not None:
        raise ConfigError("policy %r takes no parameter" % (kind,))
    return PolicySpec(kind)


# ---------------------------------------------------------------------------
# domain records


@dataclass
class DispatcherState:
    """Dispatcher j's local view of every queue plus policy extras."""

    id: int
    local_view: list
    idle_set: set = field(default_factory=set)


@dataclass
class ServerPolicyState:
    """Server-side bookkeeping for update rules."""

    id: int
    dispatcher_shadow: list = field(default_factory=list)


@dataclass(frozen=True)
class UpdateMessage:
    server: int
    queue_length: int
    dispatcher: int
    slot: int


@dataclass(frozen=True)
class RoutingDecision:
    dispatcher: int
    server: int
    jobs: int


# ---------------------------------------------------------------------------
# dispatcher-side decisions


def argmin_random_tiebreak(values, rng):
    """Index of the minimum, ties broken uniformly at random."""
    if len(values) == 0:
        raise ValueError("argmin over empty vector")
    best = values[0]
    ties = 1
    for v in values[1:]:
        if v < best:
            best = v
            ties = 1
        elif v == best:
            ties += 1
    pick = rng.below(ties)
    seen = 0
    for idx, v in enumerate(values):
        if v == best:
            if seen == pick:
                return idx
            seen += 1
    raise AssertionError("unreachable")


def _argmax_random_tiebreak(values, rng):
    best = values[0]
    ties = 1
    for v in values[1:]:
        if v > best:
            best = v
            ties = 1
        elif v == best:
            ties += 1
    pick = rng.below(ties)
    seen = 0
    for idx, v in enumerate(values):
        if v == best:
            if seen == pick:
                return idx
            seen += 1
    raise AssertionError("unreachable")


def sample_distinct(rng, n, d):
    """d distinct uniform ids from range(n), Floyd's algorithm.

    Exactly d draws; insertion order is the draw order (the kernel
    reproduces it verbatim).
    """
    if d > n:
        raise ConfigError("cannot sample %d distinct of %d" % (d, n))
    chosen = []
    for k in range(n - d, n):
        r = rng.below(k + 1)
        chosen.append(k if r in chosen else r)
    return chosen


def jsq_route(a_j, true_queues, rng):
    """Shortest true queue, ties uniform. Oracle access for JSQ only."""
    assert a_j > 0
    return argmin_random_tiebreak(true_queues, rng)


def wr_route(a_j, cum_weights, rng):
    """Server i with probability mu_i / sum(mu), independent of queues."""
    assert a_j > 0
    u = rng.float01()
    i = 0
    while u >= cum_weights[i]:
        i += 1
    return i


def jsq_d_route(a_j, d, true_queues, rng):
    """Sample d distinct servers, route to the shortest of them.

    Returns (server, sampled ids) so the caller can account d messages.
    """
    assert a_j > 0
    sampled = sample_distinct(rng, len(true_queues), d)
    best = min(true_queues[i] for i in sampled)
    ties = sum(1 for i in sampled if true_queues[i] == best)
    pick = rng.below(ties)
    seen = 0
    for i in sampled:
        if true_queues[i] == best:
            if seen == pick:
                return i, sampled
            seen += 1
    raise AssertionError("unreachable")


def jiq_route(a_j, idle_set, n, rng):
    """Pop a uniform known-idle server, or a uniform server if none known.

    The k-th smallest id is popped so the choice is reproducible.
    """
    assert a_j > 0
    if idle_set:
        pick = rng.below(len(idle_set))
        server = sorted(idle_set)[pick]
        idle_set.discard(server)
        return server
    return rng.below(n)


def lsq_sample_route(a_j, view, rng):
    """Shortest local view, then count the batch into that view entry."""
    assert a_j > 0
    i = argmin_random_tiebreak(view, rng)
    view[i] += a_j
    return i


def lsq_sample_targets(a_j, d, n, rng):
    """Servers to sample this slot; empty without arrivals."""
    if a_j <= 0:
        return []
    return sample_distinct(rng, n, d)


def push_target(a_j, r_over_m_threshold, n, rng):
    """Low-budget push: with probability r/m pick one uniform server."""
    if a_j <= 0:
        return None
    if rng.coin(r_over_m_threshold):
        return rng.below(n)
    return None


# ---------------------------------------------------------------------------
# server-side update rules (invoked at end of slot, post service)


def lsq_update_dest(completed, q_post, m, p_threshold, rng):
    """Uniform destination; send always when idle, else with probability p."""
    if completed <= 0:
        return None
    dest = rng.below(m)
    if q_post == 0 or rng.coin(p_threshold):
        return dest
    return None


def lsq_smart_dest(completed, q_post, shadow_row, p_threshold, rng):
    """Send to the dispatcher whose view of this server is most wrong.

    Z = max_j |Q - shadow_j|; send with probability 1 when Z >= Q (the
    worst view underestimates badly or the server just went idle), else
    with probability p. Ties on the worst gap break uniformly.
    """
    if completed <= 0:
        return None
    gaps = [abs(q_post - s) for s in shadow_row]
    z = max(gaps)
    if z >= q_post or rng.coin(p_threshold):
        return _argmax_random_tiebreak(gaps, rng)
    return None


def roundrobin_dest(t, period, m):
    """Deterministic schedule: every `period` slots, refresh one dispatcher.

    period = C_up // m, so every (server, dispatcher) view entry refreshes
    at least once every period*m <= C_up slots.
    """
    if t % period != 0:
        return None
    return (t // period) % m


def pull_dest(completed, r_over_n_threshold, m, rng):
    """Low-budget pull: on completion, with probability r/n update someone."""
    if completed <= 0:
        return None
    if rng.coin(r_over_n_threshold):
        return rng.below(m)
    return None


def idle_notify_dest(completed, q_post, m, rng):
    """One uniform dispatcher learns the server just went idle."""
    if completed > 0 and q_post == 0:
        return rng.below(m)
    return None
