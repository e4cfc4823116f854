"""Per-neighbor link-quality state: receiving-ratio EMAs, relative-speed
estimation, and the plain and speed-weighted ETX hop metrics.

Each node measures its own receive ratio of a neighbor's Hellos (rho, used
as the reverse ratio of the hop toward that neighbor) and learns the forward
ratio (phi) from the lq byte of the neighbor's Hello block naming it. The
speed-weighted metric multiplies 1/(phi*rho) by exp(v*beta), where v is the
EMA-smoothed relative speed derived from advertised GPS positions; beta = 0
reduces it exactly to plain ETX.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geo import GeoPosition, distance
from .wire import HelloMessage, Variant, dequantize_ratio

# A neighbor is dropped after this many Hello intervals without a Hello.
NEIGHBOR_VALIDITY_MULT = 3.0

# Silence longer than this many intervals starts injecting miss updates.
SILENCE_FACTOR = 1.5

# exp(v*beta) is capped so one corrupt GPS sample cannot poison route sums.
MAX_SPEED_EXPONENT = 20.0

INFINITE_METRIC = math.inf


@dataclass(frozen=True)
class LqParams:
    """Link-quality knobs shared by both protocol modes.

    alpha: receiving-ratio aging, beta: speed-weight coefficient (s/m),
    gamma: speed aging, hello_interval: probe period in seconds.
    """

    alpha: float
    beta: float
    gamma: float
    hello_interval: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha {self.alpha!r} outside [0, 1]")
        if self.beta < 0.0:
            raise ValueError(f"beta {self.beta!r} is negative")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma {self.gamma!r} outside [0, 1]")
        if self.hello_interval <= 0.0:
            raise ValueError(f"hello_interval {self.hello_interval!r} not positive")


@dataclass
class LinkState:
    """Metric state for one directed neighbor relationship."""

    neighbor: int
    rho_ema: float = 0.0
    phi_reported: float | None = None
    last_seq: int | None = None
    last_distance: float | None = None
    last_hello_time: float | None = None
    v_ema: float = 0.0
    expires_at: float = 0.0
    # Bookkeeping so silence-injected misses and sequence-gap misses never
    # double count the same probe window.
    pending_misses: int = field(default=0, repr=False)
    last_miss_time: float | None = field(default=None, repr=False)

    @property
    def symmetric(self) -> bool:
        """True once the neighbor has named this node back in a Hello."""
        return self.phi_reported is not None


def update_ratio(s: LinkState, received: bool, p: LqParams) -> LinkState:
    """Apply one probe-window observation to the receive-ratio EMA."""
    h = 1.0 if received else 0.0
    s.rho_ema = p.alpha * h + (1.0 - p.alpha) * s.rho_ema
    return s


def update_speed(s: LinkState, d_now: float, t_now: float, p: LqParams) -> LinkState:
    """Fold one distance sample into the smoothed relative speed.

    The first sample only stores (distance, time); v_ema stays 0 until two
    samples exist. Timestamps must strictly increase.
    """
    if s.last_distance is not None and s.last_hello_time is not None:
        dt = t_now - s.last_hello_time
        if dt <= 0.0:
            raise ValueError(f"non-increasing speed-sample time {t_now!r}")
        v_inst = (d_now - s.last_distance) / dt
        s.v_ema = p.gamma * v_inst + (1.0 - p.gamma) * s.v_ema
    s.last_distance = d_now
    s.last_hello_time = t_now
    return s


def hop_etx(phi: float, rho: float, v: float, beta: float) -> float:
    """Speed-weighted expected transmission count of a single hop.

    Returns exp(v*beta)/(phi*rho); the plain ETX when beta or v is zero, and
    an infinite (unusable) metric when either ratio is zero.
    """
    product = phi * rho
    if product <= 0.0:
        return INFINITE_METRIC
    exponent = min(v * beta, MAX_SPEED_EXPONENT)
    return math.exp(exponent) / product


def route_etx(hops: list[float]) -> float:
    """Total metric of a route: the sum of its hop metrics."""
    if not hops:
        raise ValueError("route has no hops")
    return math.fsum(hops)


def on_hello(
    s: LinkState,
    hello: HelloMessage,
    my_addr: int,
    my_pos: GeoPosition,
    t: float,
    p: LqParams,
    validity_s: float | None = None,
) -> LinkState:
    """Process one received Hello from this link's neighbor.

    Sequence-number gaps (minus misses already injected by silence ticks)
    become miss updates before the hit update. The modified variant also
    feeds the advertised position into the speed estimate, and the block
    naming my_addr refreshes the reported forward ratio.
    """
    if hello.originator != s.neighbor:
        raise ValueError(f"Hello from {hello.originator} applied to link {s.neighbor}")
    if hello.variant is Variant.MODIFIED and hello.position is None:
        raise ValueError("modified-variant Hello without a position")

    if s.last_seq is not None:
        gap = (hello.seq - s.last_seq) & 0xFFFF
        missed = max(0, gap - 1 - s.pending_misses)
        for _ in range(missed):
            update_ratio(s, False, p)
    update_ratio(s, True, p)
    s.last_seq = hello.seq
    s.pending_misses = 0
    s.last_miss_time = None

    if hello.variant is Variant.MODIFIED:
        update_speed(s, distance(my_pos, hello.position), t, p)
    else:
        s.last_hello_time = t

    for blk in hello.neighbors:
        if blk.addr == my_addr:
            s.phi_reported = dequantize_ratio(blk.lq)
            break

    if validity_s is None:
        validity_s = NEIGHBOR_VALIDITY_MULT * p.hello_interval
    s.expires_at = t + validity_s
    return s


def inject_silence_miss(s: LinkState, t: float, p: LqParams) -> bool:
    """Record one missed window if the neighbor has been silent too long.

    Called from the periodic per-neighbor window tick; injects at most one
    miss per elapsed Hello interval once silence exceeds 1.5 intervals.
    Returns True when a miss was applied.
    """
    if s.last_hello_time is None:
        return False
    if t - s.last_hello_time <= SILENCE_FACTOR * p.hello_interval:
        return False
    anchor = s.last_miss_time if s.last_miss_time is not None else s.last_hello_time
    if t - anchor < p.hello_interval * (1.0 - 1e-9):
        return False
    update_ratio(s, False, p)
    s.pending_misses += 1
    s.last_miss_time = t
    return True
