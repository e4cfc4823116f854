"""Link-state routing core: topology set, duplicate-suppressed TC flooding,
and minimum-ETX route computation.

TC dissemination is duplicate-suppressed full flooding rather than the RFC
3626 MPR-restricted kind: at the network sizes simulated here the overhead
is negligible and the routing outcome is unchanged. Remote edges use the
advertised quantized lq/nlq/speed values, exactly what a real daemon can
know, while a node's own 1-hop edges use full-precision local link state.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .geo import GeoPosition
from .linkmetrics import LinkState, LqParams, hop_etx
from .wire import (
    HelloMessage,
    NeighborBlock,
    TcMessage,
    Variant,
    dequantize_ratio,
    quantize_interval,
    quantize_ratio,
)

# Q8.8 saturation bound for advertised speeds; one corrupt GPS-derived value
# must not make a message unencodable.
_SPEED_WIRE_LIMIT = 32767 / 256.0

WILL_DEFAULT = 3


def seq_newer(a: int, b: int) -> bool:
    """RFC-style 16-bit sequence comparison: is a strictly newer than b?"""
    return a != b and ((a - b) & 0xFFFF) < 0x8000


@dataclass
class TopologyEntry:
    lq: int
    nlq: int
    speed: float
    ansn: int
    expires_at: float


class TopologySet:
    """Advertised links keyed by (originator, advertised neighbor)."""

    def __init__(self) -> None:
        self.entries: dict[tuple[int, int], TopologyEntry] = {}
        self.ansn_by_origin: dict[int, int] = {}

    def purge(self, t: float) -> bool:
        """Drop entries past their validity; returns True if any were removed."""
        dead = [k for k, e in self.entries.items() if e.expires_at <= t]
        for k in dead:
            del self.entries[k]
        return bool(dead)


def absorb_tc(ts: TopologySet, tc: TcMessage, t: float, validity_s: float) -> bool:
    """Fold a decoded TC into the topology set.

    A strictly older ANSN (mod 2^16) is silently dropped; a newer or equal
    one replaces the originator's entries and refreshes their validity.
    Returns True when any stored link content actually changed.
    """
    origin = tc.originator
    stored = ts.ansn_by_origin.get(origin)
    if stored is not None and seq_newer(stored, tc.ansn):
        return False
    old = {k[1]: (e.lq, e.nlq, e.speed) for k, e in ts.entries.items() if k[0] == origin}
    for neigh in old:
        del ts.entries[(origin, neigh)]
    new = {}
    for blk in tc.advertised:
        ts.entries[(origin, blk.addr)] = TopologyEntry(
            lq=blk.lq, nlq=blk.nlq, speed=blk.speed, ansn=tc.ansn, expires_at=t + validity_s
        )
        new[blk.addr] = (blk.lq, blk.nlq, blk.speed)
    ts.ansn_by_origin[origin] = tc.ansn
    return new != old


def should_forward(tc: TcMessage, dedup: set[tuple[int, int, int]]) -> bool:
    """True exactly once per (originator, ansn, seq) triple."""
    key = (tc.originator, tc.ansn, tc.seq)
    if key in dedup:
        return False
    dedup.add(key)
    return True


@dataclass(frozen=True)
class RouteEntry:
    next_hop: int
    total_metric: float
    hop_count: int


def build_metric_graph(
    self_addr: int,
    neighbors: dict[int, LinkState],
    ts: TopologySet,
    p: LqParams,
    t: float,
) -> dict[int, dict[int, float]]:
    """Directed edge weights: local links from full-precision state, remote
    links from advertised quantized values. Infinite edges are omitted."""
    adj: dict[int, dict[int, float]] = {}
    for (origin, neigh), e in ts.entries.items():
        if origin == self_addr or e.expires_at <= t:
            continue
        w = hop_etx(dequantize_ratio(e.nlq), dequantize_ratio(e.lq), e.speed, p.beta)
        if w != float("inf"):
            adj.setdefault(origin, {})[neigh] = w
    local: dict[int, float] = {}
    for addr, link in neighbors.items():
        if not link.symmetric or link.expires_at <= t:
            continue
        w = hop_etx(link.phi_reported, link.rho_ema, link.v_ema, p.beta)
        if w != float("inf"):
            local[addr] = w
    adj[self_addr] = local
    return adj


def shortest_routes(adj: dict[int, dict[int, float]], source: int) -> dict[int, RouteEntry]:
    """Dijkstra with the total tie-break (metric, hop count, next-hop address).

    Every returned destination carries the first hop of its minimum-metric
    path; unreachable destinations are absent.
    """
    # Heap keys are (cost, hops, first_hop, node); extending any path by an
    # edge preserves the lexicographic order, so Dijkstra stays exact.
    best: dict[int, tuple[float, int, int]] = {source: (0.0, 0, -1)}
    settled: set[int] = set()
    heap: list[tuple[float, int, int, int]] = [(0.0, 0, -1, source)]
    while heap:
        cost, hops, first, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        for v, w in adj.get(u, {}).items():
            if v in settled:
                continue
            cand = (cost + w, hops + 1, v if u == source else first)
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, (*cand, v))
    return {
        node: RouteEntry(next_hop=first, total_metric=cost, hop_count=hops)
        for node, (cost, hops, first) in best.items()
        if node != source
    }


def compute_routes(
    self_addr: int,
    neighbors: dict[int, LinkState],
    ts: TopologySet,
    p: LqParams,
    t: float,
) -> dict[int, RouteEntry]:
    return shortest_routes(build_metric_graph(self_addr, neighbors, ts, p, t), self_addr)


def snapshot_rows(t: float, addr: int, table: dict[int, RouteEntry]) -> list[tuple]:
    """Routing table as (time, node, destination, next hop, metric) rows."""
    return [(t, addr, dest, e.next_hop, e.total_metric)
            for dest, e in sorted(table.items())]


class RouterState:
    """Protocol state owned by one simulated node."""

    def __init__(self, addr: int, params: LqParams, variant: Variant,
                 neighbor_validity_s: float | None = None) -> None:
        self.addr = addr
        self.params = params
        self.variant = variant
        self.neighbor_validity_s = neighbor_validity_s
        self.links: dict[int, LinkState] = {}
        self.topology = TopologySet()
        self.seen_tcs: set[tuple[int, int, int]] = set()
        self.hello_seq = 0
        self.tc_seq = 0
        self.ansn = 0
        self._advertised: frozenset[int] | None = None
        self.table: dict[int, RouteEntry] = {}
        self.dirty = True

    def _blocks(self, addrs: list[int], t: float) -> list[NeighborBlock]:
        modified = self.variant is Variant.MODIFIED
        blocks = []
        for addr in addrs:
            link = self.links[addr]
            phi = link.phi_reported if link.phi_reported is not None else 0.0
            speed = 0.0
            if modified:
                speed = max(-_SPEED_WIRE_LIMIT, min(_SPEED_WIRE_LIMIT, link.v_ema))
            blocks.append(NeighborBlock(
                addr=addr,
                lq=quantize_ratio(link.rho_ema),
                nlq=quantize_ratio(phi),
                speed=speed,
            ))
        return blocks

    def generate_hello(self, t: float, position: GeoPosition | None) -> HelloMessage:
        """Hello naming every non-expired neighbor; modified variant embeds
        this node's GPS-reported position."""
        addrs = sorted(a for a, l in self.links.items() if l.expires_at > t)
        msg = HelloMessage(
            variant=self.variant,
            seq=self.hello_seq,
            htime=quantize_interval(self.params.hello_interval),
            willingness=WILL_DEFAULT,
            position=position if self.variant is Variant.MODIFIED else None,
            neighbors=self._blocks(addrs, t),
            originator=self.addr,
        )
        self.hello_seq = (self.hello_seq + 1) & 0xFFFF
        return msg

    def generate_tc(self, t: float) -> TcMessage:
        """TC advertising the symmetric neighbor set; the ANSN increments
        exactly when that set changes."""
        addrs = sorted(
            a for a, l in self.links.items() if l.symmetric and l.expires_at > t
        )
        adv = frozenset(addrs)
        if self._advertised is not None and adv != self._advertised:
            self.ansn = (self.ansn + 1) & 0xFFFF
        self._advertised = adv
        msg = TcMessage(
            variant=self.variant,
            ansn=self.ansn,
            advertised=self._blocks(addrs, t),
            originator=self.addr,
            seq=self.tc_seq,
        )
        self.tc_seq = (self.tc_seq + 1) & 0xFFFF
        return msg

    def refresh_topology_from_hello(self, hello: HelloMessage) -> bool:
        """Update stored topology values from a neighbor'saged-out-of-band
        Hello blocks; link quality and speed ride Hellos as well as TCs, and
        the fresher samples keep neighbors' edge views consistent.

        Only existing entries are refreshed: membership and validity remain
        TC-driven. Returns True when any value changed.
        """
        origin = hello.originator
        changed = False
        for blk in hello.neighbors:
            if blk.addr == self.addr:
                continue
            entry = self.topology.entries.get((origin, blk.addr))
            if entry is None:
                continue
            if (entry.lq, entry.nlq, entry.speed) != (blk.lq, blk.nlq, blk.speed):
                entry.lq = blk.lq
                entry.nlq = blk.nlq
                entry.speed = blk.speed
                changed = True
        return changed

    def link_for(self, neighbor: int) -> LinkState:
        link = self.links.get(neighbor)
        if link is None:
            link = LinkState(neighbor=neighbor)
            self.links[neighbor] = link
        return link

    def expire_links(self, t: float) -> list[int]:
        """Remove neighbors past their validity; returns the dropped addresses."""
        dead = [a for a, l in self.links.items() if l.expires_at <= t]
        for a in dead:
            del self.links[a]
        if dead:
            self.dirty = True
        return dead

    def current_routes(self, t: float) -> tuple[dict[int, RouteEntry], list[tuple[int, int | None, int | None]]]:
        """Routing table at time t, recomputed only when state changed.

        Also returns (destination, old next hop, new next hop) for every
        destination whose next hop changed since the previous table.
        """
        if not self.dirty:
            return self.table, []
        new = compute_routes(self.addr, self.links, self.topology, self.params, t)
        changes: list[tuple[int, int | None, int | None]] = []
        for dest in sorted(set(self.table) | set(new)):
            old_hop = self.table[dest].next_hop if dest in self.table else None
            new_hop = new[dest].next_hop if dest in new else None
            if old_hop != new_hop:
                changes.append((dest, old_hop, new_hop))
        self.table = new
        self.dirty = False
        return new, changes
