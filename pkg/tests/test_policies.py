import pytest
from hypothesis import given, strategies as st

from lsqsim import policies as pol
from lsqsim.policies import ConfigError, PolicySpec, parse_policy
from lsqsim.rng import Pcg32, coin_threshold


class ScriptedRng:
    """Feeds pre-recorded draws and records which methods were called."""

    def __init__(self, below=(), coins=(), floats=()):
        self.below_vals = list(below)
        self.coin_vals = list(coins)
        self.float_vals = list(floats)
        self.calls = []

    def below(self, bound):
        if bound <= 1:
            return 0  # real generator consumes nothing here either
        self.calls.append(("below", bound))
        return self.below_vals.pop(0)

    def coin(self, threshold):
        self.calls.append(("coin", threshold))
        return self.coin_vals.pop(0)

    def float01(self):
        self.calls.append(("float01",))
        return self.float_vals.pop(0)


# ---------------------------------------------------------------------------
# parsing and validation


def test_parse_round_trips():
    cases = {
        "jsq": "JSQ",
        "wr": "WR",
        "jsq_d:2": "JSQ(2)",
        "jiq": "JIQ",
        "sample:7": "LSQ-Sample(7)",
        "update:0.2": "LSQ-Update(0.2)",
        "smart:0.2": "LSQ-Smart(0.2)",
        "roundrobin:30": "LSQ-RR(30)",
        "full_update": "LSQ-Full",
        "push:0.01": "Push(0.01)",
        "pull:0.5": "Pull(0.5)",
        "hybrid:1": "Hybrid(1)",
    }
    for text, label in cases.items():
        spec = parse_policy(text)
        assert spec.label() == label
        assert parse_policy(spec.canonical_id()) == spec


def test_parse_rejects_garbage():
    for bad in ("zap", "sample", "update", "roundrobin", "push", "jsq:3", "sample:2:3"):
        with pytest.raises(ConfigError):
            parse_policy(bad)


def test_validate_ranges():
    parse_policy("sample:2").validate(10, 3)
    with pytest.raises(ConfigError):
        parse_policy("sample:0").validate(10, 3)
    with pytest.raises(ConfigError):
        parse_policy("jsq_d:11").validate(10, 3)
    with pytest.raises(ConfigError):
        PolicySpec("update", p=0.0).validate(10, 3)
    with pytest.raises(ConfigError):
        PolicySpec("smart", p=1.5).validate(10, 3)
    with pytest.raises(ConfigError):
        parse_policy("roundrobin:2").validate(10, 3)  # cannot cover 3 dispatchers
    with pytest.raises(ConfigError):
        PolicySpec("push", r=0.0).validate(10, 3)


def test_view_bookkeeping_flags():
    assert not parse_policy("jsq").has_views
    assert not parse_policy("jiq").has_views
    assert parse_policy("sample:2").has_views
    assert parse_policy("push:0.5").has_views


# ---------------------------------------------------------------------------
# shared tie-breaking helpers


def test_argmin_uniform_over_ties():
    g = Pcg32(7, 7)
    counts = [0, 0, 0]
    for _ in range(9_000):
        idx = pol.argmin_random_tiebreak([4, 2, 2, 9, 2], g)
        assert idx in (1, 2, 4)
        counts[(1, 2, 4).index(idx)] += 1
    for c in counts:
        assert abs(c - 3_000) < 250


def test_argmin_single_minimum_is_draw_free():
    g = ScriptedRng()
    assert pol.argmin_random_tiebreak([3, 1, 2], g) == 1
    assert g.calls == []


@given(st.integers(1, 40), st.integers(0, 40), st.integers(0, 2**31))
def test_sample_distinct_properties(n, d, seed):
    d = min(d, n)
    g = Pcg32(seed, 99)
    got = pol.sample_distinct(g, n, d)
    assert len(got) == d
    assert len(set(got)) == d
    assert all(0 <= i < n for i in got)


def test_sample_distinct_draw_order():
    # Floyd: k walks n-d..n-1, keep r=below(k+1) unless already chosen.
    g = ScriptedRng(below=[2, 2, 7])
    assert pol.sample_distinct(g, 8, 3) == [2, 6, 7]
    assert g.calls == [("below", 6), ("below", 7), ("below", 8)]


# ---------------------------------------------------------------------------
# dispatcher-side routing


def test_wr_route_maps_float_to_weight_bands():
    cum = [0.25, 0.75, 1.0]
    for u, want in ((0.0, 0), (0.24, 0), (0.25, 1), (0.74, 1), (0.75, 2), (0.99, 2)):
        g = ScriptedRng(floats=[u])
        assert pol.wr_route(1, cum, g) == want


def test_jsq_d_prefers_first_sampled_on_tie():
    # sampled ids keep draw order; ties scan that order.
    g = ScriptedRng(below=[5, 1, 0])  # sample_distinct(8,2) -> [5, 1], pick 0
    server, sampled = pol.jsq_d_route(1, 2, [9, 3, 9, 9, 9, 3, 9, 9], g)
    assert sampled == [5, 1]
    assert server == 5


def test_jiq_pops_kth_smallest():
    idle = {9, 2, 5}
    g = ScriptedRng(below=[1])
    assert pol.jiq_route(1, idle, 12, g) == 5
    assert idle == {9, 2}


def test_jiq_falls_back_to_uniform_when_nothing_idle():
    g = ScriptedRng(below=[7])
    assert pol.jiq_route(1, set(), 12, g) == 7
    assert g.calls == [("below", 12)]


def test_lsq_sample_route_updates_own_view():
    view = [5, 1, 7]
    g = ScriptedRng()
    assert pol.lsq_sample_route(3, view, g) == 1
    assert view == [5, 4, 7]


def test_lsq_sample_targets_empty_without_arrivals():
    g = ScriptedRng()
    assert pol.lsq_sample_targets(0, 2, 8, g) == []
    assert g.calls == []


def test_push_target_gated_by_coin():
    thr = coin_threshold(0.5)
    g = ScriptedRng(coins=[False])
    assert pol.push_target(1, thr, 8, g) is None
    g = ScriptedRng(coins=[True], below=[3])
    assert pol.push_target(1, thr, 8, g) == 3
    g = ScriptedRng()
    assert pol.push_target(0, thr, 8, g) is None
    assert g.calls == []


# ---------------------------------------------------------------------------
# server-side update rules: exact draw order matters for replay


def test_update_dest_draw_order():
    thr = coin_threshold(0.2)
    # no completion: no draws at all
    g = ScriptedRng()
    assert pol.lsq_update_dest(0, 4, 3, thr, g) is None
    assert g.calls == []
    # idle after completion: destination drawn, coin skipped
    g = ScriptedRng(below=[2])
    assert pol.lsq_update_dest(1, 0, 3, thr, g) == 2
    assert g.calls == [("below", 3)]
    # busy: destination drawn, then coin decides
    g = ScriptedRng(below=[1], coins=[False])
    assert pol.lsq_update_dest(1, 4, 3, thr, g) is None
    assert g.calls == [("below", 3), ("coin", thr)]
    g = ScriptedRng(below=[1], coins=[True])
    assert pol.lsq_update_dest(1, 4, 3, thr, g) == 1


def test_smart_dest_targets_most_wrong_view():
    thr = coin_threshold(0.2)
    # gap 5 >= q_post 3: forced send, coin skipped
    g = ScriptedRng(below=[0])
    assert pol.lsq_smart_dest(2, 3, [8, 3, 3], thr, g) == 0
    assert g.calls == []  # single argmax winner, below(1) is free
    # all views close: coin gates the send
    g = ScriptedRng(coins=[False])
    assert pol.lsq_smart_dest(2, 9, [8, 8, 8], thr, g) is None
    assert g.calls == [("coin", thr)]
    g = ScriptedRng(coins=[True], below=[1])
    assert pol.lsq_smart_dest(2, 9, [8, 7, 7], thr, g) == 2
    assert g.calls == [("coin", thr), ("below", 2)]
    # no completion: silent
    g = ScriptedRng()
    assert pol.lsq_smart_dest(0, 9, [0, 0, 0], thr, g) is None
    assert g.calls == []


def test_roundrobin_schedule():
    assert pol.roundrobin_dest(0, 3, 2) == 0
    assert pol.roundrobin_dest(1, 3, 2) is None
    assert pol.roundrobin_dest(2, 3, 2) is None
    assert pol.roundrobin_dest(3, 3, 2) == 1
    assert pol.roundrobin_dest(6, 3, 2) == 0
    # period 1 refreshes someone every slot
    assert [pol.roundrobin_dest(t, 1, 3) for t in range(4)] == [0, 1, 2, 0]


def test_pull_dest_gates_on_completion_then_coin():
    thr = coin_threshold(0.25)
    g = ScriptedRng()
    assert pol.pull_dest(0, thr, 5, g) is None
    assert g.calls == []
    g = ScriptedRng(coins=[True], below=[4])
    assert pol.pull_dest(2, thr, 5, g) == 4
    g = ScriptedRng(coins=[False])
    assert pol.pull_dest(2, thr, 5, g) is None


def test_idle_notify_only_on_emptying():
    g = ScriptedRng(below=[1])
    assert pol.idle_notify_dest(3, 0, 4, g) == 1
    g = ScriptedRng()
    assert pol.idle_notify_dest(3, 2, 4, g) is None
    assert pol.idle_notify_dest(0, 0, 4, g) is None
    assert g.calls == []
