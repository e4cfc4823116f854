"""Declarative experiment description: nodes, trajectories, protocol knobs,
channel and traffic, with a versioned JSON form and field-level validation.

A scenario hash (over the canonical JSON) names every output file so reruns
are trivially comparable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum

from .channel import LogisticDlr, TwoSlope
from .geo import GeoPosition
from .linkmetrics import LqParams

SCHEMA_VERSION = 1


class Protocol(Enum):
    OLSR = "olsr"
    POLSR = "polsr"


class ScenarioError(ValueError):
    """Validation failure; carries one message per offending field."""

    def __init__(self, problems: list[str]) -> None:
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class GpsErrorConfig:
    """Gauss-Markov GPS error knobs; typical consumer-receiver figures."""

    tau: float = 30.0
    sigma_h: float = 3.0
    sigma_v: float = 5.0


@dataclass
class ProtocolParams:
    """Link-quality parameters plus the timer/validity plumbing around them.

    tc_interval defaults to twice the Hello interval and each validity to
    three periods of the corresponding timer.
    """

    alpha: float = 0.2
    beta: float = 0.2
    gamma: float = 0.08
    hello_interval: float = 0.5
    tc_interval: float | None = None
    neighbor_validity_mult: float = 3.0
    tc_validity_mult: float = 3.0

    @property
    def effective_tc_interval(self) -> float:
        return 2.0 * self.hello_interval if self.tc_interval is None else self.tc_interval

    @property
    def neighbor_validity_s(self) -> float:
        return self.neighbor_validity_mult * self.hello_interval

    @property
    def tc_validity_s(self) -> float:
        return self.tc_validity_mult * self.effective_tc_interval

    def lq_params(self) -> LqParams:
        return LqParams(alpha=self.alpha, beta=self.beta, gamma=self.gamma,
                        hello_interval=self.hello_interval)


@dataclass
class TrafficSpec:
    source: int
    destination: int
    datagrams_per_second: int = 85
    datagram_bytes: int = 1470
    delay_loss_threshold_s: float = 5.0

    @property
    def offered_bps(self) -> float:
        return self.datagrams_per_second * self.datagram_bytes * 8.0


@dataclass
class NodeSpec:
    """One node: its 32-bit address doubles as its identifier."""

    id: int
    trajectory: dict
    role: str = "uav"


@dataclass
class Scenario:
    name: str
    protocol: Protocol
    origin: GeoPosition
    nodes: list[NodeSpec]
    traffic: TrafficSpec
    params: ProtocolParams = field(default_factory=ProtocolParams)
    channel: LogisticDlr | TwoSlope = field(default_factory=LogisticDlr)
    gps_error: GpsErrorConfig | None = field(default_factory=GpsErrorConfig)
    duration_s: int = 60
    warmup_s: float = 30.0
    repetitions: int = 10
    base_seed: int = 1

    def node(self, node_id: int) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def to_dict(self) -> dict:
        chan = {"kind": "logistic_dlr"} if isinstance(self.channel, LogisticDlr) else {"kind": "two_slope"}
        chan.update({k: v for k, v in vars(self.channel).items()})
        return {
            "version": SCHEMA_VERSION,
            "name": self.name,
            "protocol": self.protocol.value,
            "origin": _geo_dict(self.origin),
            "params": {
                "alpha": self.params.alpha,
                "beta": self.params.beta,
                "gamma": self.params.gamma,
                "hello_interval_s": self.params.hello_interval,
                "tc_interval_s": self.params.tc_interval,
                "neighbor_validity_mult": self.params.neighbor_validity_mult,
                "tc_validity_mult": self.params.tc_validity_mult,
            },
            "channel": chan,
            "gps_error": (
                None if self.gps_error is None else {
                    "tau_s": self.gps_error.tau,
                    "sigma_h_m": self.gps_error.sigma_h,
                    "sigma_v_m": self.gps_error.sigma_v,
                }
            ),
            "nodes": [
                {"id": n.id, "role": n.role, "trajectory": n.trajectory} for n in self.nodes
            ],
            "traffic": {
                "source": self.traffic.source,
                "destination": self.traffic.destination,
                "datagrams_per_second": self.traffic.datagrams_per_second,
                "datagram_bytes": self.traffic.datagram_bytes,
                "delay_loss_threshold_s": self.traffic.delay_loss_threshold_s,
            },
            "duration_s": self.duration_s,
            "warmup_s": self.warmup_s,
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        problems: list[str] = []
        if data.get("version") != SCHEMA_VERSION:
            problems.append(f"version: expected {SCHEMA_VERSION}, got {data.get('version')!r}")
        try:
            protocol = Protocol(data.get("protocol"))
        except ValueError:
            problems.append(f"protocol: {data.get('protocol')!r} not one of olsr|polsr")
            protocol = Protocol.OLSR
        origin = _geo_from(data.get("origin"), "origin", problems)
        p = data.get("params", {})
        params = ProtocolParams(
            alpha=p.get("alpha", 0.2),
            beta=p.get("beta", 0.2),
            gamma=p.get("gamma", 0.08),
            hello_interval=p.get("hello_interval_s", 0.5),
            tc_interval=p.get("tc_interval_s"),
            neighbor_validity_mult=p.get("neighbor_validity_mult", 3.0),
            tc_validity_mult=p.get("tc_validity_mult", 3.0),
        )
        channel = _channel_from(data.get("channel", {"kind": "logistic_dlr"}), problems)
        ge = data.get("gps_error", {"tau_s": 30.0, "sigma_h_m": 3.0, "sigma_v_m": 5.0})
        gps_error = None
        if ge is not None:
            try:
                gps_error = GpsErrorConfig(
                    tau=float(ge.get("tau_s", 30.0)),
                    sigma_h=float(ge.get("sigma_h_m", 3.0)),
                    sigma_v=float(ge.get("sigma_v_m", 5.0)),
                )
            except (TypeError, ValueError, AttributeError) as exc:
                problems.append(f"gps_error: {exc!r}")
        nodes = []
        for i, nd in enumerate(data.get("nodes", [])):
            try:
                nodes.append(NodeSpec(id=int(nd["id"]), trajectory=dict(nd["trajectory"]),
                                      role=str(nd.get("role", "uav"))))
            except (KeyError, TypeError, ValueError) as exc:
                problems.append(f"nodes[{i}]: {exc!r}")
        tr = data.get("traffic", {})
        try:
            traffic = TrafficSpec(
                source=int(tr["source"]),
                destination=int(tr["destination"]),
                datagrams_per_second=int(tr.get("datagrams_per_second", 85)),
                datagram_bytes=int(tr.get("datagram_bytes", 1470)),
                delay_loss_threshold_s=float(tr.get("delay_loss_threshold_s", 5.0)),
            )
        except (KeyError, TypeError, ValueError):
            problems.append("traffic: requires integer source and destination")
            traffic = TrafficSpec(source=-1, destination=-1)
        if problems:
            raise ScenarioError(problems)
        return cls(
            name=str(data.get("name", "scenario")),
            protocol=protocol,
            origin=origin,
            nodes=nodes,
            traffic=traffic,
            params=params,
            channel=channel,
            gps_error=gps_error,
            duration_s=data.get("duration_s", 60),
            warmup_s=data.get("warmup_s", 30.0),
            repetitions=data.get("repetitions", 10),
            base_seed=data.get("base_seed", 1),
        )

    def validate(self) -> list[str]:
        """Hard invariant checks; returns soft warnings, raises on errors."""
        problems: list[str] = []
        ids = [n.id for n in self.nodes]
        if len(ids) != len(set(ids)):
            problems.append("nodes: duplicate node ids")
        if len(ids) < 2:
            problems.append("nodes: at least two nodes required")
        for n in self.nodes:
            kind = n.trajectory.get("kind")
            if kind not in ("fixed", "circular", "shuttle", "lawnmower", "log_replay"):
                problems.append(f"nodes[{n.id}].trajectory.kind: unknown kind {kind!r}")
        if self.traffic.source == self.traffic.destination:
            problems.append("traffic: source equals destination")
        if self.traffic.source not in ids:
            problems.append(f"traffic.source: node {self.traffic.source} not defined")
        if self.traffic.destination not in ids:
            problems.append(f"traffic.destination: node {self.traffic.destination} not defined")
        if self.traffic.datagrams_per_second <= 0 or self.traffic.datagram_bytes <= 0:
            problems.append("traffic: rate and datagram size must be positive")
        if self.traffic.delay_loss_threshold_s <= 0:
            problems.append("traffic.delay_loss_threshold_s: must be positive")
        if not isinstance(self.duration_s, int) or self.duration_s <= 0:
            problems.append("duration_s: must be a positive integer of seconds")
        if self.warmup_s < 0:
            problems.append("warmup_s: must be non-negative")
        if self.repetitions < 1:
            problems.append("repetitions: must be >= 1")
        try:
            self.params.lq_params()
        except ValueError as exc:
            problems.append(f"params: {exc}")
        if self.params.effective_tc_interval <= 0:
            problems.append("params.tc_interval_s: must be positive")
        if self.params.neighbor_validity_mult <= 1 or self.params.tc_validity_mult <= 1:
            problems.append("params: validity multiples must exceed 1")
        if self.gps_error is not None:
            if self.gps_error.tau <= 0:
                problems.append("gps_error.tau_s: must be positive")
            if self.gps_error.sigma_h < 0 or self.gps_error.sigma_v < 0:
                problems.append("gps_error: sigmas must be non-negative")
        if problems:
            raise ScenarioError(problems)
        warnings: list[str] = []
        if abs(self.traffic.offered_bps - 1e6) > 0.1e6:
            warnings.append(
                f"traffic: offered load {self.traffic.offered_bps:.0f} bit/s departs "
                "from the nominal 1 Mbit/s"
            )
        return warnings

    def scenario_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _geo_dict(g: GeoPosition) -> dict:
    return {"lat": g.lat, "lon": g.lon, "alt": g.alt}


def _geo_from(data, label: str, problems: list[str]) -> GeoPosition:
    try:
        return GeoPosition(float(data["lat"]), float(data["lon"]), float(data.get("alt", 0.0)))
    except (TypeError, KeyError, ValueError) as exc:
        problems.append(f"{label}: {exc!r}")
        return GeoPosition(0.0, 0.0, 0.0)


def _channel_from(data: dict, problems: list[str]):
    kind = data.get("kind", "logistic_dlr")
    kwargs = {k: v for k, v in data.items() if k != "kind"}
    try:
        if kind == "logistic_dlr":
            return LogisticDlr(**kwargs)
        if kind == "two_slope":
            return TwoSlope(**kwargs)
        problems.append(f"channel.kind: unknown kind {kind!r}")
    except (TypeError, ValueError) as exc:
        problems.append(f"channel: {exc}")
    return LogisticDlr()


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"file: not valid JSON ({exc})"]) from exc
    return Scenario.from_dict(data)


def save_scenario(sc: Scenario, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(sc.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
