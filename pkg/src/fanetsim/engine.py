"""Deterministic discrete-event simulation of one scenario.

Every source of randomness draws from its own substream keyed by
(seed, purpose, node-or-link), so adding a probe or reordering unrelated
work never shifts another stream's draws; identical (scenario, seed) pairs
produce bit-identical results.

Timeline: the protocol runs from t=0; traffic flows during
[warmup, warmup + duration) and the trajectory clock starts with the
traffic so that the warmup only bootstraps neighbor sensing. Loss/goodput
are binned by emission second. Control frames occupy one slot time on the
air (their few bytes of serialization are negligible); data frames pay slot
time plus serialization per hop.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import math
import random
from dataclasses import dataclass
from multiprocessing import Pool

from . import __version__
from .geo import GeoPosition, LocalPosition, from_local
from .linkmetrics import inject_silence_miss, on_hello
from .mobility import GpsErrorModel, Trajectory, build_trajectory
from .routing import RouterState, absorb_tc, should_forward, snapshot_rows
from .scenario import Protocol, Scenario
from .wire import Variant, decode_hello, decode_tc, encode_hello, encode_tc

OUTAGE_DLR_THRESHOLD = 0.2
TTL_LIMIT = 16

_HELLO, _TC, _WINTICK, _EMIT, _RX_HELLO, _RX_TC, _FWD = range(7)


def outage_time(dlr_series: list[float], threshold: float = OUTAGE_DLR_THRESHOLD) -> float:
    """Seconds whose DLR is strictly greater than the threshold."""
    return float(sum(1 for v in dlr_series if v > threshold))


def goodput(delivered_bits_per_bin: list[float]) -> tuple[list[float], float]:
    """Per-bin delivered payload bits and their mean over the run."""
    series = list(delivered_bits_per_bin)
    mean = sum(series) / len(series) if series else 0.0
    return series, mean


@dataclass
class RunResult:
    """Per-second series and counters of one seeded run.

    dlr/goodput/distance series are indexed by emission second, starting at
    traffic_start_s. Route changes are observed at forwarding-time table
    recomputations (nodes off the forwarding path keep their tables lazy).
    Every offered datagram lands in exactly one counter: delivered,
    lost_channel, lost_no_route (including the rare TTL-expired loop drop)
    or lost_late.
    """

    scenario_name: str
    scenario_hash: str
    protocol: str
    seed: int
    traffic_start_s: float
    duration_s: int
    dlr_series: list[float]
    goodput_series: list[float]
    distance_series: list[float]
    outage_time_s: float
    mean_goodput_bps: float
    counters: dict[str, int]
    route_changes: list[tuple[float, int, int, int | None, int | None]]
    # end-of-run table snapshot: (time, node, destination, next hop, metric)
    final_routes: list[tuple[float, int, int, int, float]]

    @property
    def offered(self) -> int:
        return self.counters["offered"]


class _SimNode:
    __slots__ = ("id", "router", "traj", "gps", "fix", "last_fix_t")

    def __init__(self, node_id: int, router: RouterState, traj: Trajectory,
                 gps: GpsErrorModel | None) -> None:
        self.id = node_id
        self.router = router
        self.traj = traj
        self.gps = gps
        self.fix: GeoPosition | None = None
        self.last_fix_t = 0.0


class Simulation:
    def __init__(self, sc: Scenario, seed: int) -> None:
        sc.validate()
        self.sc = sc
        self.seed = seed
        self.params = sc.params.lq_params()
        self.variant = Variant.MODIFIED if sc.protocol is Protocol.POLSR else Variant.ORIGINAL
        self.chan = sc.channel
        self.cutoff = sc.channel.max_useful_range()
        self.frame_bits = sc.traffic.datagram_bytes * 8
        self.origin = sc.origin
        self.warmup = float(sc.warmup_s)
        self.duration = int(sc.duration_s)
        self.traffic_end = self.warmup + self.duration
        self.sim_end = self.traffic_end + 1.0
        self.hello_interval = self.params.hello_interval
        self.tc_interval = sc.params.effective_tc_interval
        self.neighbor_validity = sc.params.neighbor_validity_s
        self.tc_validity = sc.params.tc_validity_s
        self.dps = sc.traffic.datagrams_per_second
        self.total_datagrams = self.dps * self.duration
        self.late_threshold = sc.traffic.delay_loss_threshold_s
        self.dest_id = sc.traffic.destination
        self.src_id = sc.traffic.source

        self.nodes: list[_SimNode] = []
        self.by_id: dict[int, _SimNode] = {}
        for spec in sorted(sc.nodes, key=lambda n: n.id):
            traj = build_trajectory(spec.trajectory, sc.origin, rng=self._stream("phase", spec.id))
            gps = None
            if sc.protocol is Protocol.POLSR and sc.gps_error is not None:
                cfg = sc.gps_error
                gps = GpsErrorModel(tau=cfg.tau, sigma_h=cfg.sigma_h, sigma_v=cfg.sigma_v)
            router = RouterState(spec.id, self.params, self.variant,
                                 neighbor_validity_s=self.neighbor_validity)
            node = _SimNode(spec.id, router, traj, gps)
            self.nodes.append(node)
            self.by_id[spec.id] = node

        self._jitter_hello = {n.id: self._stream("jitter-hello", n.id) for n in self.nodes}
        self._jitter_tc = {n.id: self._stream("jitter-tc", n.id) for n in self.nodes}
        self._gps_rng = {n.id: self._stream("gps", n.id) for n in self.nodes}
        self._chan_rng: dict[tuple[int, int], random.Random] = {}

        self._heap: list[tuple] = []
        self._tie = 0
        self.delivered_per_bin = [0] * self.duration
        self.distance_series = [0.0] * self.duration
        self.counters = {
            "offered": 0, "delivered": 0, "lost_channel": 0,
            "lost_no_route": 0, "lost_late": 0,
        }
        self.route_changes: list[tuple[float, int, int, int | None, int | None]] = []

    # -- randomness ---------------------------------------------------------

    def _stream(self, purpose: str, *key: int) -> random.Random:
        material = f"{self.seed}|{purpose}|" + "|".join(str(k) for k in key)
        digest = hashlib.sha256(material.encode()).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))

    def _link_rng(self, a: int, b: int) -> random.Random:
        rng = self._chan_rng.get((a, b))
        if rng is None:
            rng = self._stream("chan", a, b)
            self._chan_rng[(a, b)] = rng
        return rng

    # -- geometry -----------------------------------------------------------

    def _traj_time(self, t: float) -> float:
        return max(0.0, t - self.warmup)

    def _local(self, node: _SimNode, t: float) -> tuple[float, float, float]:
        return node.traj.local_position(self._traj_time(t))

    def _true_geo(self, node: _SimNode, t: float) -> GeoPosition:
        e, n, u = self._local(node, t)
        return from_local(self.origin, LocalPosition(east=e, north=n, up=u))

    def _refresh_fix(self, node: _SimNode, t: float) -> None:
        if node.gps is None:
            node.fix = self._true_geo(node, t)
            return
        dt = t - node.last_fix_t
        if node.fix is not None and dt <= 0.0:
            return
        node.fix = node.gps.perturb(self._true_geo(node, t), max(dt, 1e-3),
                                    self._gps_rng[node.id])
        node.last_fix_t = t

    # -- event plumbing -----------------------------------------------------

    def _push(self, t: float, kind: int, *payload) -> None:
        self._tie += 1
        heapq.heappush(self._heap, (t, self._tie, kind, payload))

    def _broadcast(self, sender: _SimNode, t: float, kind: int, msg) -> None:
        se, sn, su = self._local(sender, t)
        latency = self.chan.slot_time
        for other in self.nodes:
            if other is sender:
                continue
            oe, on_, ou = self._local(other, t)
            d = math.sqrt((se - oe) ** 2 + (sn - on_) ** 2 + (su - ou) ** 2)
            if d > self.cutoff:
                continue
            rng = self._link_rng(sender.id, other.id)
            if rng.random() >= self.chan.control_loss_prob(d, rng):
                self._push(t + latency, kind, other.id, msg)

    # -- handlers -----------------------------------------------------------

    def _emit_hello(self, t: float, node: _SimNode) -> None:
        position = None
        if self.variant is Variant.MODIFIED:
            self._refresh_fix(node, t)
            position = node.fix
        msg = node.router.generate_hello(t, position)
        decoded = decode_hello(encode_hello(msg), self.variant, originator=node.id)
        self._broadcast(node, t, _RX_HELLO, decoded)
        nxt = t + self.hello_interval * (1.0 + self._jitter_hello[node.id].uniform(-0.05, 0.05))
        if nxt <= self.sim_end:
            self._push(nxt, _HELLO, node.id)

    def _rx_hello(self, t: float, node: _SimNode, msg) -> None:
        link = node.router.link_for(msg.originator)
        my_pos = self.origin
        if self.variant is Variant.MODIFIED:
            # A daemon reads its current GPS fix when processing a Hello;
            # a stale own-position would alias vehicle motion into the
            # relative-speed estimate.
            self._refresh_fix(node, t)
            my_pos = node.fix
        on_hello(link, msg, node.id, my_pos, t, self.params,
                 validity_s=self.neighbor_validity)
        node.router.refresh_topology_from_hello(msg)
        node.router.dirty = True

    def _emit_tc(self, t: float, node: _SimNode) -> None:
        msg = node.router.generate_tc(t)
        decoded = decode_tc(encode_tc(msg), self.variant, originator=node.id, seq=msg.seq)
        should_forward(decoded, node.router.seen_tcs)
        self._broadcast(node, t, _RX_TC, decoded)
        nxt = t + self.tc_interval * (1.0 + self._jitter_tc[node.id].uniform(-0.05, 0.05))
        if nxt <= self.sim_end:
            self._push(nxt, _TC, node.id)

    def _rx_tc(self, t: float, node: _SimNode, msg) -> None:
        if msg.originator == node.id:
            return
        # The dedup set keys one origination; later copies carry identical
        # content, so absorbing only the first seen copy loses nothing.
        if not should_forward(msg, node.router.seen_tcs):
            return
        if absorb_tc(node.router.topology, msg, t, validity_s=self.tc_validity):
            node.router.dirty = True
        self._broadcast(node, t, _RX_TC, msg)

    def _wintick(self, t: float, node: _SimNode) -> None:
        node.router.expire_links(t)
        if node.router.topology.purge(t):
            node.router.dirty = True
        for link in node.router.links.values():
            if inject_silence_miss(link, t, self.params):
                node.router.dirty = True
        nxt = t + self.hello_interval
        if nxt <= self.sim_end:
            self._push(nxt, _WINTICK, node.id)

    def _emit_datagram(self, t: float, k: int) -> None:
        bin_idx = k // self.dps
        self.counters["offered"] += 1
        if k % self.dps == 0:
            src = self.by_id[self.src_id]
            dst = self.by_id[self.dest_id]
            se, sn, su = self._local(src, t + 0.5)
            de, dn, du = self._local(dst, t + 0.5)
            self.distance_series[bin_idx] = math.sqrt(
                (se - de) ** 2 + (sn - dn) ** 2 + (su - du) ** 2
            )
        self._forward(t, self.by_id[self.src_id], bin_idx, t, TTL_LIMIT)
        if k + 1 < self.total_datagrams:
            nxt = self.warmup + (k + 1) // self.dps + ((k + 1) % self.dps) / self.dps
            self._push(nxt, _EMIT, k + 1)

    def _forward(self, t: float, node: _SimNode, bin_idx: int, emit_t: float, ttl: int) -> None:
        if node.id == self.dest_id:
            if t - emit_t <= self.late_threshold:
                self.counters["delivered"] += 1
                self.delivered_per_bin[bin_idx] += 1
            else:
                self.counters["lost_late"] += 1
            return
        if ttl <= 0:
            # Loop drop: a routing failure, counted with the no-route losses.
            self.counters["lost_no_route"] += 1
            return
        table, changes = node.router.current_routes(t)
        if changes:
            self.route_changes.extend(
                (t, node.id, dest, old, new) for dest, old, new in changes
            )
        entry = table.get(self.dest_id)
        if entry is None:
            self.counters["lost_no_route"] += 1
            return
        nh = self.by_id[entry.next_hop]
        se, sn, su = self._local(node, t)
        oe, on_, ou = self._local(nh, t)
        d = math.sqrt((se - oe) ** 2 + (sn - on_) ** 2 + (su - ou) ** 2)
        outcome = self.chan.attempt_delivery(d, self.frame_bits, self._link_rng(node.id, nh.id))
        if outcome.delivered:
            self._push(t + outcome.latency, _FWD, nh.id, bin_idx, emit_t, ttl - 1)
        else:
            self.counters["lost_channel"] += 1

    # -- main loop ----------------------------------------------------------

    def run(self) -> RunResult:
        for node in self.nodes:
            if self.variant is Variant.MODIFIED:
                self._refresh_fix(node, 0.0)
            self._push(self._jitter_hello[node.id].uniform(0.0, self.hello_interval),
                       _HELLO, node.id)
            self._push(self._jitter_tc[node.id].uniform(0.0, self.tc_interval),
                       _TC, node.id)
            self._push(self.hello_interval, _WINTICK, node.id)
        self._push(self.warmup, _EMIT, 0)

        heap = self._heap
        while heap:
            t, _, kind, payload = heapq.heappop(heap)
            if kind == _RX_TC:
                self._rx_tc(t, self.by_id[payload[0]], payload[1])
            elif kind == _RX_HELLO:
                self._rx_hello(t, self.by_id[payload[0]], payload[1])
            elif kind == _FWD:
                self._forward(t, self.by_id[payload[0]], payload[1], payload[2], payload[3])
            elif kind == _HELLO:
                self._emit_hello(t, self.by_id[payload[0]])
            elif kind == _TC:
                self._emit_tc(t, self.by_id[payload[0]])
            elif kind == _WINTICK:
                self._wintick(t, self.by_id[payload[0]])
            else:
                self._emit_datagram(t, payload[0])

        dlr = [1.0 - d / self.dps for d in self.delivered_per_bin]
        bits = float(self.sc.traffic.datagram_bytes * 8)
        gp_series, gp_mean = goodput([d * bits for d in self.delivered_per_bin])
        final_routes: list[tuple[float, int, int, int, float]] = []
        for node in self.nodes:
            table, _ = node.router.current_routes(self.traffic_end)
            final_routes.extend(snapshot_rows(self.traffic_end, node.id, table))
        return RunResult(
            scenario_name=self.sc.name,
            scenario_hash=self.sc.scenario_hash(),
            protocol=self.sc.protocol.value,
            seed=self.seed,
            traffic_start_s=self.warmup,
            duration_s=self.duration,
            dlr_series=dlr,
            goodput_series=gp_series,
            distance_series=list(self.distance_series),
            outage_time_s=outage_time(dlr),
            mean_goodput_bps=gp_mean,
            counters=dict(self.counters),
            route_changes=self.route_changes,
            final_routes=final_routes,
        )


def run(sc: Scenario, seed: int) -> RunResult:
    """Execute one seeded run of the scenario."""
    return Simulation(sc, seed).run()


@dataclass
class CampaignResult:
    scenario_name: str
    scenario_hash: str
    protocol: str
    seeds: list[int]
    runs: list[RunResult]
    mean_outage_s: float
    mean_goodput_bps: float


def _campaign_worker(args: tuple[dict, int]) -> RunResult:
    sc_dict, seed = args
    return run(Scenario.from_dict(sc_dict), seed)


def run_campaign(sc: Scenario, repetitions: int | None = None,
                 base_seed: int | None = None, workers: int = 1) -> CampaignResult:
    """Run seeds base..base+n-1 and aggregate their means.

    Results are collected in seed order, so the aggregate is invariant to
    the number of workers.
    """
    reps = sc.repetitions if repetitions is None else repetitions
    if reps < 1:
        raise ValueError(f"repetitions {reps!r} must be >= 1")
    base = sc.base_seed if base_seed is None else base_seed
    seeds = [base + i for i in range(reps)]
    if workers > 1 and reps > 1:
        sc_dict = sc.to_dict()
        with Pool(processes=min(workers, reps)) as pool:
            runs = pool.map(_campaign_worker, [(sc_dict, s) for s in seeds])
    else:
        runs = [run(sc, s) for s in seeds]
    return CampaignResult(
        scenario_name=sc.name,
        scenario_hash=sc.scenario_hash(),
        protocol=sc.protocol.value,
        seeds=seeds,
        runs=runs,
        mean_outage_s=sum(r.outage_time_s for r in runs) / reps,
        mean_goodput_bps=sum(r.mean_goodput_bps for r in runs) / reps,
    )


# -- trace output -----------------------------------------------------------


def write_run_csv(result: RunResult, path: str) -> None:
    """Per-second trace: `second,dlr,goodput_bits` (absolute seconds)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["second", "dlr", "goodput_bits"])
        start = int(result.traffic_start_s)
        for i, (dlr, gp) in enumerate(zip(result.dlr_series, result.goodput_series)):
            w.writerow([start + i, f"{dlr:.6f}", f"{gp:.0f}"])


def write_route_changes_csv(result: RunResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "node", "destination", "old_next_hop", "new_next_hop"])
        for t, node, dest, old, new in result.route_changes:
            w.writerow([f"{t:.6f}", node, dest,
                        "" if old is None else old, "" if new is None else new])


def write_final_tables_csv(result: RunResult, path: str) -> None:
    """End-of-run routing-table snapshot of every node."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "node", "destination", "next_hop", "metric"])
        for t, node, dest, nh, metric in result.final_routes:
            w.writerow([f"{t:.6f}", node, dest, nh, f"{metric:.6f}"])


def write_campaign_csv(campaign: CampaignResult, path: str) -> None:
    """Campaign summary: one row per run plus a mean row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "hash", "protocol", "seed",
                    "outage_s", "mean_goodput_bps", "version"])
        for r in campaign.runs:
            w.writerow([campaign.scenario_name, campaign.scenario_hash,
                        campaign.protocol, r.seed, f"{r.outage_time_s:.0f}",
                        f"{r.mean_goodput_bps:.1f}", __version__])
        w.writerow([campaign.scenario_name, campaign.scenario_hash,
                    campaign.protocol, "mean", f"{campaign.mean_outage_s:.2f}",
                    f"{campaign.mean_goodput_bps:.1f}", __version__])
