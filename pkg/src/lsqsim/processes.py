"""Arrival and service generators.

Arrivals are i.i.d. per slot per dispatcher; service is i.i.d. per slot
per server and describes *potential* work (how many jobs the server could
finish this slot, drawn whether or not the queue has that many).
"""

import math
from dataclasses import dataclass

from . import rng as rnglib

ARRIVAL_KINDS = ("poisson", "deterministic")
SERVICE_KINDS = ("geometric_min1", "geometric", "deterministic")


class ConfigError(ValueError):
    """Invalid experiment configuration, raised before slot 0."""


@dataclass(frozen=True)
class ArrivalSpec:
    """Exogenous arrivals: total rate and its split over dispatchers."""

    kind: str
    total_rate: float
    per_dispatcher_rates: tuple

    def __post_init__(self):
        if self.kind not in ARRIVAL_KINDS:
            raise ConfigError("unknown arrival kind %r" % (self.kind,))
        rates = self.per_dispatcher_rates
        if not rates:
            raise ConfigError("need at least one dispatcher rate")
        if any(r < 0 for r in rates):
            raise ConfigError("negative arrival rate")
        if abs(sum(rates) - self.total_rate) > 1e-9 * max(1.0, self.total_rate):
            raise ConfigError("per-dispatcher rates do not sum to total_rate")
        if self.kind == "deterministic":
            for r in rates:
                if r != int(r):
                    raise ConfigError("deterministic arrivals must be integers")

    @property
    def m(self):
        return len(self.per_dispatcher_rates)


def poisson_arrivals(total_rate, m):
    """Even Poisson split: each of m dispatchers gets rate total/m."""
    if m <= 0:
        raise ConfigError("need m >= 1 dispatchers")
    per = total_rate / m
    return ArrivalSpec("poisson", total_rate, tuple([per] * m))


def deterministic_arrivals(per_dispatcher):
    rates = tuple(float(r) for r in per_dispatcher)
    return ArrivalSpec("deterministic", sum(rates), rates)


@dataclass(frozen=True)
class ServiceSpec:
    """Potential service of one server; rate is the per-slot mean."""

    kind: str
    rate: float

    def __post_init__(self):
        if self.kind not in SERVICE_KINDS:
            raise ConfigError("unknown service kind %r" % (self.kind,))
        if self.kind == "geometric_min1":
            # support {1,2,...}: success prob q = 1/rate needs rate >= 1
            if self.rate < 1:
                raise ConfigError("geometric_min1 needs rate >= 1")
        elif self.kind == "geometric":
            # support {0,1,...}: any positive mean works
            if self.rate <= 0:
                raise ConfigError("geometric needs rate > 0")
        else:
            if self.rate < 0 or self.rate != int(self.rate):
                raise ConfigError("deterministic service must be a non-negative integer")

    def coin_threshold(self):
        """u32 success threshold for the kernel's coin loop (0 if unused)."""
        if self.kind == "geometric_min1":
            return rnglib.coin_threshold(1.0 / self.rate)
        if self.kind == "geometric":
            return rnglib.coin_threshold(1.0 / (1.0 + self.rate))
        return 0


@dataclass(frozen=True)
class SlackReport:
    """Total service capacity and its margin over the arrival rate."""

    capacity: float
    slack: float

    @property
    def admissible(self):
        return self.slack > 0


def sample_arrivals(spec, rng):
    """Per-dispatcher job counts for one slot, drawn in dispatcher order."""
    if spec.kind == "deterministic":
        return [int(r) for r in spec.per_dispatcher_rates]
    out = []
    for r in spec.per_dispatcher_rates:
        out.append(rnglib.poisson(rng, math.exp(-r)))
    return out


def sample_service(spec, rng):
    """One potential-service draw for one server for one slot."""
    if spec.kind == "deterministic":
        return int(spec.rate)
    if spec.kind == "geometric_min1":
        return rnglib.geometric_min1(rng, spec.coin_threshold())
    return rnglib.geometric0(rng, spec.coin_threshold())


def capacity(specs, arrival):
    """Total capacity and slack. Inadmissible configs are reported, not errors."""
    if not specs:
        raise ConfigError("need at least one server")
    cap = sum(s.rate for s in specs)
    return SlackReport(capacity=cap, slack=cap - arrival.total_rate)
