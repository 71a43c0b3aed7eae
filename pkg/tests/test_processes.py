import math

import pytest

from lsqsim import rng as rnglib
from lsqsim.processes import (
    ArrivalSpec,
    ConfigError,
    ServiceSpec,
    capacity,
    deterministic_arrivals,
    poisson_arrivals,
    sample_arrivals,
    sample_service,
)


def test_poisson_split_is_even():
    a = poisson_arrivals(9.0, 3)
    assert a.kind == "poisson"
    assert a.per_dispatcher_rates == (3.0, 3.0, 3.0)
    assert a.total_rate == 9.0
    assert a.m == 3


def test_deterministic_arrivals_require_integers():
    a = deterministic_arrivals([2, 0, 1])
    assert a.kind == "deterministic"
    with pytest.raises(ConfigError):
        deterministic_arrivals([1.5])


def test_arrival_rate_consistency_checked():
    with pytest.raises(ConfigError):
        ArrivalSpec(kind="poisson", total_rate=5.0, per_dispatcher_rates=(1.0, 1.0))
    with pytest.raises(ConfigError):
        ArrivalSpec(kind="poisson", total_rate=-1.0, per_dispatcher_rates=(-0.5, -0.5))
    with pytest.raises(ConfigError):
        ArrivalSpec(kind="nonsense", total_rate=1.0, per_dispatcher_rates=(1.0,))


def test_service_spec_validation():
    ServiceSpec(kind="geometric_min1", rate=1.0)
    with pytest.raises(ConfigError):
        ServiceSpec(kind="geometric_min1", rate=0.9)  # would need success prob > 1
    ServiceSpec(kind="geometric", rate=0.2)
    with pytest.raises(ConfigError):
        ServiceSpec(kind="geometric", rate=0.0)
    ServiceSpec(kind="deterministic", rate=3)
    with pytest.raises(ConfigError):
        ServiceSpec(kind="deterministic", rate=2.5)


def test_geometric_min1_threshold_is_inverse_rate():
    s = ServiceSpec(kind="geometric_min1", rate=2.0)
    assert s.coin_threshold() == rnglib.coin_threshold(0.5)
    s0 = ServiceSpec(kind="geometric", rate=0.25)  # success prob 1/(1+rate) = 0.8
    assert s0.coin_threshold() == rnglib.coin_threshold(0.8)


def test_sample_service_means():
    g = rnglib.Pcg32(21, 5)
    n = 40_000
    for spec, mean in (
        (ServiceSpec(kind="geometric_min1", rate=2.0), 2.0),
        (ServiceSpec(kind="geometric", rate=0.5), 0.5),
        (ServiceSpec(kind="deterministic", rate=4), 4.0),
    ):
        vals = [sample_service(spec, g) for _ in range(n)]
        got = sum(vals) / n
        assert abs(got - mean) < 0.06, spec


def test_sample_arrivals_deterministic_path():
    g = rnglib.Pcg32(1, 1)
    a = deterministic_arrivals([2, 1])
    s0 = g.state
    assert sample_arrivals(a, g) == [2, 1]
    assert g.state == s0  # no draws for the deterministic kind


def test_capacity_and_slack():
    services = (
        ServiceSpec(kind="geometric_min1", rate=2.0),
        ServiceSpec(kind="geometric_min1", rate=2.0),
    )
    report = capacity(services, poisson_arrivals(3.0, 1))
    assert report.capacity == 4.0
    assert report.slack == 1.0
    assert report.admissible
    report = capacity(services, poisson_arrivals(4.5, 1))
    assert not report.admissible


def test_mean_equals_rate_for_every_kind():
    # capacity arithmetic relies on rate being the per-slot mean
    for spec in (
        ServiceSpec(kind="geometric_min1", rate=3.0),
        ServiceSpec(kind="geometric", rate=0.8),
        ServiceSpec(kind="deterministic", rate=2),
    ):
        g = rnglib.Pcg32(77, 3)
        n = 60_000
        mean = sum(sample_service(spec, g) for _ in range(n)) / n
        sd = math.sqrt(max(spec.rate * (spec.rate + 1), 1.0))
        assert abs(mean - spec.rate) < 4 * sd / math.sqrt(n)
