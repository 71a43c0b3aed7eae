"""Seedable, portable random streams.

Every simulation run owns a family of PCG32 generators, one per logical
stream, derived from a single master seed. The split is fixed:

    stream 0                    arrival draws (all dispatchers, in id order)
    streams 1 .. n              per-server service draws
    streams 1+n .. n+m          per-dispatcher policy draws (tie-breaks,
                                sampling targets, push coins)
    streams 1+n+m .. 2n+m       per-server policy draws (update coins,
                                destination picks, idle notifications)

Keeping the streams separate means adding or swapping a policy cannot
perturb the arrival or service sequences, which is what makes the
JSQ / full-update equivalence test possible.

The same sequences are reproduced inside the compiled kernel (see
kernel.py); everything here is integer arithmetic plus exact power-of-two
float scaling, so both sides agree bit for bit.
"""

MASK64 = (1 << 64) - 1
PCG_MULT = 6364136223846793005
GOLDEN = 0x9E3779B97F4A7C15
TWO32 = 1 << 32
INV32 = 2.0 ** -32


def splitmix64(x):
    """One splitmix64 scramble of x (Vigna's finalizer)."""
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master, k):
    """(initstate, sequence) pair for stream k of a master seed."""
    state = splitmix64((master + (2 * k) * GOLDEN) & MASK64)
    seq = splitmix64((master + (2 * k + 1) * GOLDEN) & MASK64)
    return state, seq


def pcg_init(initstate, seq):
    """Raw (state, inc) after the canonical PCG32 seeding dance."""
    inc = ((seq << 1) | 1) & MASK64
    state = (inc + initstate) & MASK64  # step from 0, add initstate
    state = (state * PCG_MULT + inc) & MASK64  # and step once more
    return state, inc


def _output(old):
    xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
    rot = old >> 59
    return ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & 0xFFFFFFFF


class Pcg32:
    """Minimal PCG-XSH-RR 32-bit generator."""

    __slots__ = ("state", "inc")

    def __init__(self, initstate, seq):
        self.state, self.inc = pcg_init(initstate, seq)

    @classmethod
    def from_raw(cls, state, inc):
        g = cls.__new__(cls)
        g.state, g.inc = state, inc
        return g

    def next32(self):
        old = self.state
        self.state = (old * PCG_MULT + self.inc) & MASK64
        return _output(old)

    def below(self, bound):
        """Uniform int in [0, bound). Draws nothing when bound <= 1."""
        if bound <= 1:
            return 0
        threshold = (TWO32 // bound) * bound
        while True:
            r = self.next32()
            if r < threshold:
                return r % bound

    def coin(self, threshold):
        """True with probability threshold / 2^32 (threshold in [0, 2^32])."""
        return self.next32() < threshold

    def float01(self):
        """Uniform float in [0, 1) with 32 bits of resolution."""
        return self.next32() * INV32


def coin_threshold(p):
    """u32 threshold such that next32() < threshold has probability ~p.

    Exact at p=0 and p=1; elsewhere rounded to the nearest 2^-32.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability out of [0, 1]: %r" % (p,))
    return min(TWO32, int(round(p * TWO32)))


def stream_count(n, m):
    return 1 + 2 * n + m


def stream_arrivals():
    return 0


def stream_service(i):
    return 1 + i


def stream_dispatcher(n, j):
    return 1 + n + j


def stream_server(n, m, i):
    return 1 + n + m + i


def make_streams(master, n, m):
    """List of Pcg32 generators for a run, indexed by the stream_* helpers."""
    out = []
    for k in range(stream_count(n, m)):
        st, seq = stream_seed(master, k)
        out.append(Pcg32(st, seq))
    return out


def make_stream_arrays(master, n, m):
    """(state, inc) uint64 arrays for the compiled kernel, same streams."""
    import numpy as np

    count = stream_count(n, m)
    state = np.empty(count, dtype=np.uint64)
    inc = np.empty(count, dtype=np.uint64)
    for k in range(count):
        st, seq = stream_seed(master, k)
        s, i = pcg_init(st, seq)
        state[k] = s
        inc[k] = i
    return state, inc


def poisson(rng, expneg_lambda):
    """Poisson sample by Knuth's product method.

    expneg_lambda is exp(-lambda), computed once by the caller so both
    engines multiply and compare the same double.
    """
    k = 0
    p = 1.0
    while True:
        p *= rng.float01()
        if p <= expneg_lambda:
            return k
        k += 1


def geometric_min1(rng, threshold):
    """Trials until first success, support {1, 2, ...}."""
    s = 1
    while rng.next32() >= threshold:
        s += 1
    return s


def geometric0(rng, threshold):
    """Failures before first success, support {0, 1, 2, ...}."""
    s = 0
    while rng.next32() >= threshold:
        s += 1
    return s
